//! Wavelength ranges of coefficient variables.
//!
//! Each row of the projection matrix concentrates its weight on a contiguous
//! band of wavelengths; given a precision ratio, the range keeps exactly the
//! wavelengths whose weight reaches that fraction of the row maximum.

use serde::{Deserialize, Serialize};

use super::{BsplineError, ProjectionMatrix};

/// Wavelength interval attributed to one coefficient variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavelengthRange {
    pub variable_index: usize,
    pub lower: f64,
    pub upper: f64,
    pub epsilon: f64,
}

/// Bounds of the wavelengths that contribute to variable `i` (0-based).
///
/// The lower bound is the first wavelength whose projection weight reaches
/// `epsilon` times the row maximum; the upper bound is the last.
pub fn wavelength_range(
    r: &ProjectionMatrix,
    i: usize,
    epsilon: f64,
) -> Result<WavelengthRange, BsplineError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(BsplineError::Precondition(format!(
            "epsilon must be in (0,1), got {epsilon}"
        )));
    }
    if i >= r.n_functions() {
        return Err(BsplineError::Precondition(format!(
            "variable index {i} out of range (n = {})",
            r.n_functions()
        )));
    }
    let row = r.row(i);
    let max = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Err(BsplineError::Precondition(format!(
            "projection row {i} is zero"
        )));
    }
    let threshold = epsilon * max;
    let first = row.iter().position(|v| v.abs() >= threshold).unwrap();
    let last = row.iter().rposition(|v| v.abs() >= threshold).unwrap();
    Ok(WavelengthRange {
        variable_index: i,
        lower: r.wavelengths()[first],
        upper: r.wavelengths()[last],
        epsilon,
    })
}

/// Union of the input intervals as maximal disjoint closed intervals, sorted.
pub fn merge_ranges(ranges: &[WavelengthRange]) -> Vec<(f64, f64)> {
    let mut intervals: Vec<(f64, f64)> = ranges.iter().map(|r| (r.lower, r.upper)).collect();
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in intervals {
        match merged.last_mut() {
            Some((_, end)) if lo <= *end => *end = end.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    merged
}
