//! Prediction models: RBF networks with vector-quantized centers, ordinary
//! least squares, principal-component and partial-least-squares regression,
//! plus the stratified 3-fold cross-validation that picks meta-parameters.

mod cv;
mod kmeans;
mod linear;
mod rbfn;

pub use cv::{
    cv_select_components, cv_select_meta, ComponentSelection, CvCell, CvGrid, CvSelection,
};
pub use kmeans::{kmeans, KmeansResult};
pub use linear::{
    fit_latent, fit_linear, important_wavelengths_linear, LatentKind, LatentModel, LinearModel,
};
pub use rbfn::{fit_rbfn, fit_rbfn_with_centers, predict_rbfn, RbfnFit, RbfnModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::RowMatrix;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Split(#[from] crate::spectra::SpectraError),
}

/// Versioned on-disk model document for the CLI's train/predict round trip.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedModel {
    pub schema: u32,
    /// Feature columns the model was trained on (indices into its input CSV).
    pub columns: Vec<usize>,
    #[serde(flatten)]
    pub model: ModelKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Rbfn(RbfnModel),
    Linear(LinearModel),
    Latent(LatentModel),
}

impl SavedModel {
    pub const SCHEMA: u32 = 1;

    pub fn new(columns: Vec<usize>, model: ModelKind) -> Self {
        Self {
            schema: Self::SCHEMA,
            columns,
            model,
        }
    }

    /// Predict from the full feature matrix; the stored column set is applied
    /// first.
    pub fn predict(&self, features: &RowMatrix) -> Result<Vec<f64>, ModelError> {
        if let Some(&bad) = self.columns.iter().find(|&&c| c >= features.ncols()) {
            return Err(ModelError::Dimension(format!(
                "model expects column {bad} but input has {} columns",
                features.ncols()
            )));
        }
        let x = features.select_columns(&self.columns);
        match &self.model {
            ModelKind::Rbfn(m) => predict_rbfn(m, &x),
            ModelKind::Linear(m) => m.predict(&x),
            ModelKind::Latent(m) => m.linear.predict(&x),
        }
    }
}

/// Normalized mean squared error: mean of squared residuals over `variance`.
///
/// The variance is supplied by the caller because the normalization uses the
/// union of the learning and test targets, not the evaluation set alone.
pub fn nmse(y_true: &[f64], y_pred: &[f64], variance: f64) -> Result<f64, ModelError> {
    if y_true.len() != y_pred.len() {
        return Err(ModelError::Dimension(format!(
            "{} true values vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(ModelError::Precondition("empty evaluation set".into()));
    }
    if !(variance > 0.0) {
        return Err(ModelError::Precondition(format!(
            "variance must be positive, got {variance}"
        )));
    }
    let mse = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p) * (t - p))
        .sum::<f64>()
        / y_true.len() as f64;
    Ok(mse / variance)
}
