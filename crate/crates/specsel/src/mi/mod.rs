//! Mutual information between a feature block and a scalar target, estimated
//! from nearest-neighbor statistics in the joint space (Kraskov variant 1):
//!
//! `I = psi(k) + psi(P) - mean_l[ psi(n_x(l)+1) + psi(n_y(l)+1) ]`
//!
//! where the joint metric is the max norm across blocks and the marginal
//! counts are strict. Estimates are in nats and depend only on distance
//! ranks, so they are invariant under shifts and global positive scaling.
//!
//! The estimator never rescales individual coordinates: the max norm mixes
//! units as given, so callers comparing features on wildly different scales
//! should standardize first.

mod digamma;
mod neighbors;

pub use digamma::digamma;
pub use neighbors::{neighbor_stats, NeighborBackend, NeighborStats};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{std_dev, RowMatrix};

#[derive(Debug, Error)]
pub enum MiError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Estimator parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiEstimatorConfig {
    /// Neighbor count; must satisfy `1 <= k <= P-1`.
    pub k: usize,
    /// Relative amplitude of the tie-breaking jitter.
    pub jitter_scale: f64,
    /// Seed driving the jitter stream.
    pub seed: u64,
}

impl Default for MiEstimatorConfig {
    fn default() -> Self {
        Self {
            k: 6,
            jitter_scale: 1e-10,
            seed: 0,
        }
    }
}

/// Feature block plus target, aligned by row.
#[derive(Debug, Clone)]
pub struct JointSample {
    x: RowMatrix,
    y: Vec<f64>,
}

impl JointSample {
    pub fn new(x: RowMatrix, y: Vec<f64>) -> Result<Self, MiError> {
        if x.nrows() != y.len() {
            return Err(MiError::Precondition(format!(
                "feature block has {} rows but target has {} values",
                x.nrows(),
                y.len()
            )));
        }
        if x.ncols() == 0 {
            return Err(MiError::Precondition("feature block has no columns".into()));
        }
        if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(MiError::Precondition("non-finite value in sample".into()));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// Estimate with a degeneracy marker for zero-variance targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiEstimate {
    pub nats: f64,
    pub degenerate: bool,
}

/// Estimate the mutual information of a sample using the default (brute
/// force) neighbor search.
pub fn mutual_information(
    sample: &JointSample,
    config: &MiEstimatorConfig,
) -> Result<MiEstimate, MiError> {
    mutual_information_with_backend(sample, config, NeighborBackend::BruteForce)
}

/// Same estimator with an explicit neighbor-search backend; both backends
/// return identical values.
pub fn mutual_information_with_backend(
    sample: &JointSample,
    config: &MiEstimatorConfig,
    backend: NeighborBackend,
) -> Result<MiEstimate, MiError> {
    let p = sample.len();
    let dx = sample.dim();
    if config.k < 1 {
        return Err(MiError::Precondition("k must be at least 1".into()));
    }
    if p < config.k + 1 {
        return Err(MiError::Precondition(format!(
            "need at least k+1 = {} samples, got {p}",
            config.k + 1
        )));
    }
    if !(config.jitter_scale >= 0.0) {
        return Err(MiError::Precondition(
            "jitter_scale must be non-negative".into(),
        ));
    }

    let degenerate = std_dev(&sample.y) == 0.0;

    // Joint layout: x columns then y.
    let mut joint = RowMatrix::zeros(p, dx + 1);
    for l in 0..p {
        let row = joint.row_mut(l);
        row[..dx].copy_from_slice(sample.x.row(l));
        row[dx] = sample.y[l];
    }
    apply_tie_breaking_jitter(&mut joint, config);

    let stats = neighbor_stats(&joint, dx, config.k, backend);
    let psi_k = digamma(config.k as f64)?;
    let psi_p = digamma(p as f64)?;
    let mut sum = 0.0;
    for s in &stats {
        sum += digamma((s.n_x + 1) as f64)? + digamma((s.n_y + 1) as f64)?;
    }
    let nats = psi_k + psi_p - sum / p as f64;
    Ok(MiEstimate { nats, degenerate })
}

/// MI of a column subset of a feature matrix against the target.
pub fn mutual_information_subset(
    features: &RowMatrix,
    columns: &[usize],
    y: &[f64],
    config: &MiEstimatorConfig,
) -> Result<MiEstimate, MiError> {
    if columns.is_empty() {
        return Err(MiError::Precondition("empty column set".into()));
    }
    if let Some(&bad) = columns.iter().find(|&&c| c >= features.ncols()) {
        return Err(MiError::Precondition(format!(
            "column {bad} out of range (n = {})",
            features.ncols()
        )));
    }
    let sample = JointSample::new(features.select_columns(columns), y.to_vec())?;
    mutual_information(&sample, config)
}

/// Strict-inequality neighbor counts break on exact ties, so coordinates with
/// duplicates get a deterministic jitter of `jitter_scale * std` amplitude.
/// Untied coordinates are left untouched.
fn apply_tie_breaking_jitter(joint: &mut RowMatrix, config: &MiEstimatorConfig) {
    let p = joint.nrows();
    let cols = joint.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for c in 0..cols {
        let mut column = joint.column(c);
        column.sort_by(f64::total_cmp);
        let has_ties = column.windows(2).any(|w| w[0] == w[1]);
        if !has_ties {
            continue;
        }
        let amplitude = config.jitter_scale * std_dev(&column);
        for l in 0..p {
            let noise: f64 = rng.random_range(-1.0..1.0);
            let v = joint.get(l, c);
            joint.set(l, c, v + amplitude * noise);
        }
    }
}
