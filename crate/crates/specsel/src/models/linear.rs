//! Linear models on standardized inputs: ordinary least squares plus the two
//! latent-variable regressions (principal components, partial least squares),
//! both reducible to an equivalent single linear model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::linalg::{mean, RowMatrix};

/// Least-squares linear model; coefficients live on standardized inputs and
/// the stored statistics make raw-input prediction exact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearModel {
    /// Coefficient per input column (standardized scale; 0 for dropped ones).
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub input_means: Vec<f64>,
    /// Population standard deviation per column; 1 for dropped columns.
    pub input_stds: Vec<f64>,
    /// Zero-variance columns excluded from the fit.
    pub dropped_columns: Vec<usize>,
    /// Set when the kept design was rank deficient and the minimum-norm
    /// solution was returned.
    pub rank_deficient: bool,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut acc = self.intercept;
        for j in 0..row.len() {
            acc += self.coefficients[j] * (row[j] - self.input_means[j]) / self.input_stds[j];
        }
        acc
    }

    pub fn predict(&self, x: &RowMatrix) -> Result<Vec<f64>, ModelError> {
        if x.ncols() != self.coefficients.len() {
            return Err(ModelError::Dimension(format!(
                "input has {} features but the model expects {}",
                x.ncols(),
                self.coefficients.len()
            )));
        }
        Ok(x.iter_rows().map(|row| self.predict_row(row)).collect())
    }

    /// Slopes and intercept on the raw (unstandardized) inputs.
    pub fn raw_coefficients(&self) -> (Vec<f64>, f64) {
        let slopes: Vec<f64> = self
            .coefficients
            .iter()
            .zip(&self.input_stds)
            .map(|(c, s)| c / s)
            .collect();
        let intercept = self.intercept
            - slopes
                .iter()
                .zip(&self.input_means)
                .map(|(b, m)| b * m)
                .sum::<f64>();
        (slopes, intercept)
    }
}

/// Column statistics for standardization, computed from the fitting data.
struct ColumnStats {
    means: Vec<f64>,
    stds: Vec<f64>,
    kept: Vec<usize>,
    dropped: Vec<usize>,
}

fn column_stats(x: &RowMatrix) -> ColumnStats {
    let p = x.nrows() as f64;
    let q = x.ncols();
    let mut means = vec![0.0; q];
    for row in x.iter_rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= p;
    }
    let mut vars = vec![0.0; q];
    for row in x.iter_rows() {
        for j in 0..q {
            let d = row[j] - means[j];
            vars[j] += d * d;
        }
    }
    let mut stds = vec![1.0; q];
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..q {
        let var = vars[j] / p;
        if var > 0.0 {
            stds[j] = var.sqrt();
            kept.push(j);
        } else {
            dropped.push(j);
        }
    }
    ColumnStats {
        means,
        stds,
        kept,
        dropped,
    }
}

fn standardized_design(x: &RowMatrix, stats: &ColumnStats) -> DMatrix<f64> {
    let p = x.nrows();
    let mut z = DMatrix::zeros(p, stats.kept.len());
    for (i, row) in x.iter_rows().enumerate() {
        for (t, &j) in stats.kept.iter().enumerate() {
            z[(i, t)] = (row[j] - stats.means[j]) / stats.stds[j];
        }
    }
    z
}

fn model_from_kept_coefficients(
    stats: &ColumnStats,
    kept_coeffs: &[f64],
    intercept: f64,
    rank_deficient: bool,
) -> LinearModel {
    let q = stats.means.len();
    let mut coefficients = vec![0.0; q];
    for (t, &j) in stats.kept.iter().enumerate() {
        coefficients[j] = kept_coeffs[t];
    }
    LinearModel {
        coefficients,
        intercept,
        input_means: stats.means.clone(),
        input_stds: stats.stds.clone(),
        dropped_columns: stats.dropped.clone(),
        rank_deficient,
    }
}

/// Ordinary least squares on standardized inputs; rank deficiency falls back
/// to the minimum-norm solution and is flagged.
pub fn fit_linear(x: &RowMatrix, y: &[f64]) -> Result<LinearModel, ModelError> {
    if x.nrows() != y.len() {
        return Err(ModelError::Dimension(format!(
            "{} samples vs {} targets",
            x.nrows(),
            y.len()
        )));
    }
    let stats = column_stats(x);
    if x.nrows() <= stats.kept.len() {
        return Err(ModelError::Precondition(format!(
            "need more samples ({}) than kept features ({})",
            x.nrows(),
            stats.kept.len()
        )));
    }
    let y_mean = mean(y);
    if stats.kept.is_empty() {
        return Ok(model_from_kept_coefficients(&stats, &[], y_mean, false));
    }
    let z = standardized_design(x, &stats);
    let y_centered = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));

    let svd = z.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let eps = sigma_max * f64::EPSILON * (x.nrows().max(stats.kept.len().max(1))) as f64;
    let rank = svd.singular_values.iter().filter(|s| **s > eps).count();
    let beta = svd
        .solve(&y_centered, eps)
        .map_err(|e| ModelError::Numerical(e.to_string()))?;
    let rank_deficient = rank < stats.kept.len();

    Ok(model_from_kept_coefficients(
        &stats,
        beta.as_slice(),
        y_mean,
        rank_deficient,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentKind {
    Pcr,
    Plsr,
}

/// Latent-variable regression reduced to its equivalent linear model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatentModel {
    pub kind: LatentKind,
    pub requested_components: usize,
    /// Components actually used (truncated at the numerical rank).
    pub n_components: usize,
    pub truncated: bool,
    pub linear: LinearModel,
}

/// Fit PCR (OLS on top principal components) or PLSR (one-component-at-a-time
/// deflation) on standardized inputs.
pub fn fit_latent(
    x: &RowMatrix,
    y: &[f64],
    kind: LatentKind,
    n_components: usize,
) -> Result<LatentModel, ModelError> {
    if x.nrows() != y.len() {
        return Err(ModelError::Dimension(format!(
            "{} samples vs {} targets",
            x.nrows(),
            y.len()
        )));
    }
    let p = x.nrows();
    let q = x.ncols();
    let max_components = (p - 1).min(q);
    if n_components < 1 || n_components > max_components {
        return Err(ModelError::Precondition(format!(
            "n_components must be in [1, {max_components}], got {n_components}"
        )));
    }
    let stats = column_stats(x);
    let z = standardized_design(x, &stats);
    let y_mean = mean(y);

    let (kept_coeffs, used) = match kind {
        LatentKind::Pcr => pcr_coefficients(&z, y, y_mean, n_components),
        LatentKind::Plsr => plsr_coefficients(&z, y, y_mean, n_components)?,
    };
    let truncated = used < n_components;
    Ok(LatentModel {
        kind,
        requested_components: n_components,
        n_components: used,
        truncated,
        linear: model_from_kept_coefficients(&stats, &kept_coeffs, y_mean, truncated),
    })
}

fn pcr_coefficients(
    z: &DMatrix<f64>,
    y: &[f64],
    y_mean: f64,
    n_components: usize,
) -> (Vec<f64>, usize) {
    let svd = z.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let eps = sigma_max * f64::EPSILON * (z.nrows().max(z.ncols())) as f64;
    let rank = svd.singular_values.iter().filter(|s| **s > eps).count();
    let used = n_components.min(rank);

    // Scores are orthogonal, so each component regresses independently:
    // gamma_j = u_j . y_centered / sigma_j.
    let mut beta = vec![0.0; z.ncols()];
    for j in 0..used {
        let mut u_dot_y = 0.0;
        for i in 0..z.nrows() {
            u_dot_y += u[(i, j)] * (y[i] - y_mean);
        }
        let gamma = u_dot_y / svd.singular_values[j];
        for t in 0..z.ncols() {
            beta[t] += vt[(j, t)] * gamma;
        }
    }
    (beta, used)
}

fn plsr_coefficients(
    z: &DMatrix<f64>,
    y: &[f64],
    y_mean: f64,
    n_components: usize,
) -> Result<(Vec<f64>, usize), ModelError> {
    let p = z.nrows();
    let q = z.ncols();
    let mut xk = z.clone();
    let mut yk = DVector::from_iterator(p, y.iter().map(|v| v - y_mean));
    let initial_scale = (xk.transpose() * &yk).norm().max(f64::MIN_POSITIVE);

    let mut w_vectors: Vec<DVector<f64>> = Vec::new();
    let mut p_loadings: Vec<DVector<f64>> = Vec::new();
    let mut q_loadings: Vec<f64> = Vec::new();
    for _ in 0..n_components {
        let cov = xk.transpose() * &yk;
        let cov_norm = cov.norm();
        if cov_norm <= 1e-12 * initial_scale {
            break; // remaining structure is numerically exhausted
        }
        let w = cov / cov_norm;
        let t = &xk * &w;
        let tt = t.norm_squared();
        if tt <= f64::MIN_POSITIVE {
            break;
        }
        let p_load = xk.transpose() * &t / tt;
        let q_load = yk.dot(&t) / tt;
        xk -= &t * p_load.transpose();
        yk -= &t * q_load;
        w_vectors.push(w);
        p_loadings.push(p_load);
        q_loadings.push(q_load);
    }

    let used = w_vectors.len();
    if used == 0 {
        return Ok((vec![0.0; q], 0));
    }
    // beta = W (P^T W)^{-1} q
    let mut w_mat = DMatrix::zeros(q, used);
    let mut p_mat = DMatrix::zeros(q, used);
    for (j, (w, pl)) in w_vectors.iter().zip(&p_loadings).enumerate() {
        w_mat.set_column(j, w);
        p_mat.set_column(j, pl);
    }
    let ptw = p_mat.transpose() * &w_mat;
    let qv = DVector::from_vec(q_loadings);
    let solved = ptw
        .lu()
        .solve(&qv)
        .ok_or_else(|| ModelError::Numerical("PLS loading system is singular".into()))?;
    let beta = w_mat * solved;
    Ok((beta.as_slice().to_vec(), used))
}

/// Wavelengths whose standardized coefficient magnitude reaches `epsilon`
/// times the maximum, merged into maximal runs of consecutive grid points.
pub fn important_wavelengths_linear(
    model: &LinearModel,
    wavelengths: &[f64],
    epsilon: f64,
) -> Result<Vec<(f64, f64)>, ModelError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ModelError::Precondition(format!(
            "epsilon must be in (0,1), got {epsilon}"
        )));
    }
    if wavelengths.len() != model.coefficients.len() {
        return Err(ModelError::Dimension(format!(
            "{} wavelengths vs {} coefficients",
            wavelengths.len(),
            model.coefficients.len()
        )));
    }
    let max = model
        .coefficients
        .iter()
        .fold(0.0f64, |m, c| m.max(c.abs()));
    if max == 0.0 {
        return Ok(Vec::new());
    }
    let threshold = epsilon * max;
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut run_start: Option<usize> = None;
    for j in 0..=model.coefficients.len() {
        let important = j < model.coefficients.len() && model.coefficients[j].abs() > threshold;
        match (run_start, important) {
            (None, true) => run_start = Some(j),
            (Some(s), false) => {
                intervals.push((wavelengths[s], wavelengths[j - 1]));
                run_start = None;
            }
            _ => {}
        }
    }
    Ok(intervals)
}
