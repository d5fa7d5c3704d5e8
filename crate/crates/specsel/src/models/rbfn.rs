//! Radial basis function network: a weighted sum of Gaussian kernels over
//! vector-quantized centers plus a bias, with kernel widths taken from the
//! cluster variances and weights fixed by linear regression.

use serde::{Deserialize, Serialize};

use super::{kmeans, ModelError};
use crate::linalg::{sq_dist, RowMatrix};

const RIDGE_FALLBACK: f64 = 1e-8;
const DEGENERATE_KERNEL: f64 = 1e-300;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RbfnModel {
    pub centers: RowMatrix,
    /// Per-center width sigma_i (square root of the cluster variance).
    pub widths: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub width_scale: f64,
}

#[derive(Debug, Clone)]
pub struct RbfnFit {
    pub model: RbfnModel,
    pub warnings: Vec<String>,
}

fn kernel(x: &[f64], center: &[f64], sigma: f64, width_scale: f64) -> f64 {
    let dist = sq_dist(x, center).sqrt();
    let scaled = dist / (width_scale * sigma);
    (-(scaled * scaled)).exp()
}

/// Cluster the inputs with seeded k-means, set widths from the cluster
/// variances and solve the output layer by least squares.
pub fn fit_rbfn(
    x: &RowMatrix,
    y: &[f64],
    m: usize,
    width_scale: f64,
    seed: u64,
) -> Result<RbfnFit, ModelError> {
    if x.nrows() != y.len() {
        return Err(ModelError::Dimension(format!(
            "{} samples vs {} targets",
            x.nrows(),
            y.len()
        )));
    }
    if !(width_scale > 0.0) {
        return Err(ModelError::Precondition(format!(
            "width_scale must be positive, got {width_scale}"
        )));
    }
    let clusters = kmeans(x, m, seed)?;
    fit_rbfn_with_centers(x, y, clusters.centers, &clusters.variances, width_scale)
}

/// Fit the output layer for caller-supplied centers and cluster variances.
pub fn fit_rbfn_with_centers(
    x: &RowMatrix,
    y: &[f64],
    centers: RowMatrix,
    variances: &[f64],
    width_scale: f64,
) -> Result<RbfnFit, ModelError> {
    let p = x.nrows();
    let m = centers.nrows();
    let widths: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
    if widths.iter().any(|w| !(*w > 0.0)) {
        return Err(ModelError::Precondition(
            "widths must be strictly positive".into(),
        ));
    }

    let mut warnings = Vec::new();
    let mut design = RowMatrix::zeros(p, m + 1);
    for i in 0..p {
        let row = design.row_mut(i);
        for c in 0..m {
            row[c] = kernel(x.row(i), centers.row(c), widths[c], width_scale);
        }
        row[m] = 1.0;
        if row[..m].iter().all(|v| *v < DEGENERATE_KERNEL) {
            warnings.push(format!(
                "sample {i} sees no kernel above {DEGENERATE_KERNEL:e}; fit is poorly conditioned"
            ));
        }
    }

    let theta = lsq_via_normal_equations(&design, y, &mut warnings)?;
    let (weights, bias) = theta.split_at(m);
    Ok(RbfnFit {
        model: RbfnModel {
            centers,
            widths,
            weights: weights.to_vec(),
            bias: bias[0],
            width_scale,
        },
        warnings,
    })
}

/// Normal equations with Cholesky. The kernel columns of a wide-width design
/// are near collinear, which makes the plain solution explode and generalize
/// badly, so the kernel diagonal always carries a 1e-8-relative ridge (the
/// bias column stays exact); outright Cholesky breakdown escalates the ridge.
fn lsq_via_normal_equations(
    design: &RowMatrix,
    y: &[f64],
    warnings: &mut Vec<String>,
) -> Result<Vec<f64>, ModelError> {
    let cols = design.ncols();
    let mut gram = nalgebra::DMatrix::zeros(cols, cols);
    let mut rhs = nalgebra::DVector::zeros(cols);
    for (row, &yi) in design.iter_rows().zip(y) {
        for a in 0..cols {
            rhs[a] += row[a] * yi;
            for b in a..cols {
                gram[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..cols {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }

    let diag_scale = (0..cols - 1).map(|a| gram[(a, a)]).sum::<f64>() / (cols - 1).max(1) as f64;
    let mut ridge = RIDGE_FALLBACK * diag_scale.max(f64::MIN_POSITIVE);
    for attempt in 0..4 {
        let mut ridged = gram.clone();
        for a in 0..cols - 1 {
            ridged[(a, a)] += ridge;
        }
        if let Some(chol) = nalgebra::Cholesky::new(ridged) {
            return Ok(chol.solve(&rhs).as_slice().to_vec());
        }
        if attempt == 0 {
            warnings.push("kernel design is rank deficient; escalating ridge".into());
        }
        ridge *= 1e3;
    }
    Err(ModelError::Numerical(
        "ridge-regularized solve failed".into(),
    ))
}

/// Evaluate the network on raw inputs.
pub fn predict_rbfn(model: &RbfnModel, x: &RowMatrix) -> Result<Vec<f64>, ModelError> {
    if x.ncols() != model.centers.ncols() {
        return Err(ModelError::Dimension(format!(
            "input has {} features but the model expects {}",
            x.ncols(),
            model.centers.ncols()
        )));
    }
    Ok(x.iter_rows()
        .map(|row| {
            let mut acc = model.bias;
            for c in 0..model.centers.nrows() {
                acc += model.weights[c]
                    * kernel(
                        row,
                        model.centers.row(c),
                        model.widths[c],
                        model.width_scale,
                    );
            }
            acc
        })
        .collect())
}
