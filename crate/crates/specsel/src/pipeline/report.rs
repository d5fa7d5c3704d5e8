//! Report document produced by a pipeline run (`schema = 1`). Everything
//! needed by the plot exports is embedded, so a report file is self-contained.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bspline::LooPoint;
use crate::selection::SelectionTrace;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub schema: u32,
    pub wavelengths: Vec<f64>,
    pub split: SplitSummary,
    /// Present when a B-spline method ran.
    pub basis: Option<BasisSummary>,
    pub loo_curve: Vec<LooPoint>,
    /// Selection traces keyed by feature space ("bspline" or "raw").
    pub selection: BTreeMap<String, SelectionTrace>,
    /// Projection-matrix rows of the selected coefficient variables.
    pub selected_projection_rows: Option<ProjectionRows>,
    /// Compressed coefficient values of the selected variables, one row per
    /// spectrum, with the target alongside.
    pub selected_coefficients: Option<SelectedCoefficients>,
    pub methods: Vec<MethodReport>,
    pub warnings: Vec<String>,
    /// Wall-clock seconds per stage; the only non-deterministic fields.
    pub timing: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub seed: u64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSummary {
    pub order: usize,
    pub intervals: usize,
    pub n_functions: usize,
    pub w_min: f64,
    pub w_max: f64,
    pub total_loo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRows {
    pub variables: Vec<usize>,
    /// One row per selected variable, one value per wavelength.
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedCoefficients {
    pub variables: Vec<usize>,
    pub target: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub name: String,
    /// Selected variable indices: coefficient space for B-spline methods,
    /// wavelength space for the raw method, empty for PCR/PLSR which use
    /// every input.
    pub variables: Vec<usize>,
    /// Size of the selection, or the component count for PCR/PLSR.
    pub n_variables: usize,
    /// Merged wavelength intervals attributed to the method's inputs.
    pub intervals: Vec<(f64, f64)>,
    /// Meta parameters chosen by cross validation.
    pub meta: BTreeMap<String, serde_json::Value>,
    pub nmse_test: f64,
    /// Coefficients on standardized raw inputs (length N), for the linear
    /// methods; used by the linear-coefficients plot export.
    pub linear_profile: Option<Vec<f64>>,
}
