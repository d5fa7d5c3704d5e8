//! Uniform-knot B-spline bases, least-squares compression of spectra and the
//! leave-one-out machinery that picks the basis size.
//!
//! The basis is clamped: the knot vector is extended with `d`-fold repeated
//! boundary knots, so `p` intervals of order `d` give exactly `p - 1 + d`
//! basis functions and the basis reproduces every polynomial of degree
//! `d - 1` on the whole range.

mod fit;
mod ranges;
mod size;

pub use fit::{
    compress, loo_error_spectrum, projection_matrix, total_loo, CompressedSet, ProjectionMatrix,
    SplineFit,
};
pub use ranges::{merge_ranges, wavelength_range, WavelengthRange};
pub use size::{select_basis_size, BasisSelection, LooPoint, SearchStrategy};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BsplineError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("wavelength {w} outside basis domain [{min}, {max}]")]
    Domain { w: f64, min: f64, max: f64 },
    #[error("singular design: knot interval {interval} contains no wavelength")]
    SingularDesign { interval: usize },
    #[error(
        "leave-one-out is ill-posed: removing wavelength {index} leaves the fit underdetermined"
    )]
    IllPosedLoo { index: usize },
    #[error("wavelength grid does not match the projection matrix")]
    WavelengthMismatch,
}

/// Uniform-knot B-spline basis of order `d` over `p` intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsplineBasis {
    order: usize,
    intervals: usize,
    knots: Vec<f64>,
}

impl BsplineBasis {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// The `p + 1` knots `t_0..t_p`.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions, `p - 1 + d`.
    pub fn n_functions(&self) -> usize {
        self.intervals - 1 + self.order
    }

    pub fn w_min(&self) -> f64 {
        self.knots[0]
    }

    pub fn w_max(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Extended (clamped) knot: index into the knot vector with `d - 1`
    /// virtual repeats of each boundary knot.
    fn ext_knot(&self, i: usize) -> f64 {
        let shifted = i.saturating_sub(self.order - 1).min(self.intervals);
        self.knots[shifted]
    }

    /// Index of the knot interval containing `w`; half-open `[t_k, t_{k+1})`
    /// except the last interval, which is closed at `w_max`.
    fn interval_of(&self, w: f64) -> usize {
        let k = self.knots.partition_point(|&t| t <= w);
        k.saturating_sub(1).min(self.intervals - 1)
    }

    /// The `d` (at most) basis values that are nonzero at `w`, together with
    /// the index of the first one: values `B_k(w)..B_{k+d-1}(w)`.
    pub(crate) fn nonzero_at(&self, w: f64) -> (usize, Vec<f64>) {
        let d = self.order;
        let k = self.interval_of(w);
        let span = k + d - 1; // extended-knot span index

        // Cox-de Boor triangle over the clamped knot vector.
        let mut vals = vec![0.0; d];
        vals[0] = 1.0;
        let mut left = vec![0.0; d];
        let mut right = vec![0.0; d];
        for r in 1..d {
            left[r] = w - self.ext_knot(span + 1 - r);
            right[r] = self.ext_knot(span + r) - w;
            let mut saved = 0.0;
            for i in 0..r {
                let term = vals[i] / (right[i + 1] + left[r - i]);
                vals[i] = saved + right[i + 1] * term;
                saved = left[r - i] * term;
            }
            vals[r] = saved;
        }
        (k, vals)
    }
}

/// Split `[w_min, w_max]` into `p` equal intervals and build the clamped
/// order-`d` basis on them.
pub fn build_basis(
    w_min: f64,
    w_max: f64,
    p: usize,
    d: usize,
) -> Result<BsplineBasis, BsplineError> {
    if p < 1 || d < 1 {
        return Err(BsplineError::Precondition(format!(
            "intervals and order must be positive, got p={p}, d={d}"
        )));
    }
    if !(w_min < w_max) || !w_min.is_finite() || !w_max.is_finite() {
        return Err(BsplineError::Precondition(format!(
            "invalid range [{w_min}, {w_max}]"
        )));
    }
    let h = (w_max - w_min) / p as f64;
    let mut knots: Vec<f64> = (0..=p).map(|k| w_min + k as f64 * h).collect();
    knots[p] = w_max;
    Ok(BsplineBasis {
        order: d,
        intervals: p,
        knots,
    })
}

/// Evaluate all `n` basis functions at `w`.
///
/// At most `d` entries are nonzero and the entries sum to one.
pub fn evaluate_basis(basis: &BsplineBasis, w: f64) -> Result<Vec<f64>, BsplineError> {
    if !(w >= basis.w_min() && w <= basis.w_max()) {
        return Err(BsplineError::Domain {
            w,
            min: basis.w_min(),
            max: basis.w_max(),
        });
    }
    let mut out = vec![0.0; basis.n_functions()];
    let (start, vals) = basis.nonzero_at(w);
    out[start..start + vals.len()].copy_from_slice(&vals);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Bernstein polynomial b_{i,m}(x) on [0,1]; the order-(m+1) clamped
    /// B-spline basis with a single interval must coincide with these.
    fn bernstein(i: usize, m: usize, x: f64) -> f64 {
        let binom = |n: usize, k: usize| -> f64 {
            (0..k).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
        };
        binom(m, i) * x.powi(i as i32) * (1.0 - x).powi((m - i) as i32)
    }

    #[test]
    fn order_one_is_interval_indicator() {
        let basis = build_basis(0.0, 1.0, 4, 1).unwrap();
        assert_eq!(basis.n_functions(), 4);
        let vals = evaluate_basis(&basis, 0.3).unwrap();
        assert_eq!(vals, vec![0.0, 1.0, 0.0, 0.0]);
        // Last interval is closed at w_max.
        let vals = evaluate_basis(&basis, 1.0).unwrap();
        assert_eq!(vals, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn function_count_matches_shootout_basis() {
        let basis = build_basis(400.0, 2498.0, 151, 5).unwrap();
        assert_eq!(basis.n_functions(), 155);
    }

    #[test]
    fn single_interval_order_four_is_cubic_bernstein() {
        let basis = build_basis(0.0, 1.0, 1, 4).unwrap();
        assert_eq!(basis.n_functions(), 4);
        for step in 0..=100 {
            let x = step as f64 / 100.0;
            let vals = evaluate_basis(&basis, x).unwrap();
            for i in 0..4 {
                assert_abs_diff_eq!(vals[i], bernstein(i, 3, x), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn order_two_midpoint_is_half_half() {
        let basis = build_basis(0.0, 4.0, 4, 2).unwrap();
        // Midpoint of the second interval: the two spanning hats share it.
        let vals = evaluate_basis(&basis, 1.5).unwrap();
        let nonzero: Vec<(usize, f64)> = vals
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .collect();
        assert_eq!(nonzero.len(), 2);
        assert_abs_diff_eq!(nonzero[0].1, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(nonzero[1].1, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn rejects_out_of_domain() {
        let basis = build_basis(0.0, 1.0, 3, 2).unwrap();
        assert!(matches!(
            evaluate_basis(&basis, -0.1),
            Err(BsplineError::Domain { .. })
        ));
        assert!(matches!(
            evaluate_basis(&basis, 1.1),
            Err(BsplineError::Domain { .. })
        ));
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(build_basis(0.0, 1.0, 0, 2).is_err());
        assert!(build_basis(0.0, 1.0, 3, 0).is_err());
        assert!(build_basis(1.0, 1.0, 3, 2).is_err());
    }

    #[test]
    fn uniform_knot_spacing() {
        let basis = build_basis(400.0, 2498.0, 151, 5).unwrap();
        let knots = basis.knots();
        let h = (2498.0 - 400.0) / 151.0;
        for w in knots.windows(2) {
            assert!(((w[1] - w[0]) - h).abs() <= 1e-9 * h);
        }
        assert_eq!(knots[0], 400.0);
        assert_eq!(*knots.last().unwrap(), 2498.0);
    }

    #[test]
    fn local_support_spans_at_most_d_intervals() {
        for d in 1..=5usize {
            let basis = build_basis(0.0, 10.0, 7, d).unwrap();
            let n = basis.n_functions();
            for i in 0..n {
                let mut intervals = std::collections::BTreeSet::new();
                for step in 0..=1000 {
                    let w = 10.0 * step as f64 / 1000.0;
                    let vals = evaluate_basis(&basis, w).unwrap();
                    if vals[i].abs() > 0.0 {
                        intervals.insert(basis.interval_of(w));
                    }
                }
                assert!(
                    intervals.len() <= d,
                    "function {i} of order {d} spans {intervals:?}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(
            p in 1usize..40,
            d in 1usize..6,
            t in 0.0f64..1.0,
            span in prop::sample::select(vec![1.0f64, 12.5, 2098.0]),
        ) {
            let basis = build_basis(100.0, 100.0 + span, p, d).unwrap();
            let w = 100.0 + t * span;
            let vals = evaluate_basis(&basis, w).unwrap();
            let sum: f64 = vals.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12, "sum = {}", sum);
            prop_assert!(vals.iter().filter(|v| **v != 0.0).count() <= d);
        }
    }
}
