//! Banded least-squares machinery behind compression and leave-one-out.
//!
//! The design matrix `B` (basis values at the `N` wavelengths) has `d`
//! contiguous nonzeros per row, so a Givens QR touches only a `d`-wide band.
//! The factorization is computed once per basis; per-spectrum coefficient
//! solves replay the stored rotations in `O(N d)` and the leave-one-out error
//! follows from the leverage identity without any refitting, giving the
//! `O(n N)` per-spectrum cost that makes the basis-size search affordable.

use serde::{Deserialize, Serialize};

use super::{BsplineBasis, BsplineError};
use crate::linalg::RowMatrix;
use crate::spectra::SpectraSet;

const LEVERAGE_GUARD: f64 = 1e-10;
const RANK_TOLERANCE: f64 = 1e-12;

/// Linear map from `N` spectral samples to `n` basis coefficients (the
/// least-squares projection), stored dense as `n x N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMatrix {
    entries: RowMatrix,
    basis: BsplineBasis,
    wavelengths: Vec<f64>,
}

impl ProjectionMatrix {
    pub fn entries(&self) -> &RowMatrix {
        &self.entries
    }

    pub fn basis(&self) -> &BsplineBasis {
        &self.basis
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn n_functions(&self) -> usize {
        self.entries.nrows()
    }

    /// Row `i`: the weights applied to the original variables to form the
    /// coefficient variable `A_i`.
    pub fn row(&self, i: usize) -> &[f64] {
        self.entries.row(i)
    }
}

/// Per-spectrum coefficients on a B-spline basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedSet {
    pub coefficients: RowMatrix,
    pub basis: BsplineBasis,
}

/// Factorized banded design for one (basis, wavelength grid) pair.
#[derive(Debug)]
pub struct SplineFit {
    basis: BsplineBasis,
    n_functions: usize,
    row_start: Vec<usize>,
    row_vals: RowMatrix,             // N x d basis values per wavelength
    band: RowMatrix,                 // n x d upper-triangular factor band
    rotations: Vec<(u32, f64, f64)>, // (band row, c, s), d per data row
    leverage: Vec<f64>,
}

impl SplineFit {
    /// Build the design at the given wavelengths and factorize it.
    pub fn new(basis: &BsplineBasis, wavelengths: &[f64]) -> Result<Self, BsplineError> {
        let n = basis.n_functions();
        let n_points = wavelengths.len();
        let d = basis.order();
        if n > n_points {
            return Err(BsplineError::Precondition(format!(
                "{n} basis functions exceed {n_points} wavelengths"
            )));
        }

        let mut row_start = Vec::with_capacity(n_points);
        let mut row_vals = RowMatrix::zeros(n_points, d);
        for (r, &w) in wavelengths.iter().enumerate() {
            if !(w >= basis.w_min() && w <= basis.w_max()) {
                return Err(BsplineError::Domain {
                    w,
                    min: basis.w_min(),
                    max: basis.w_max(),
                });
            }
            let (start, vals) = basis.nonzero_at(w);
            row_start.push(start);
            row_vals.row_mut(r).copy_from_slice(&vals);
        }

        let mut band = RowMatrix::zeros(n, d);
        let mut rotations = Vec::with_capacity(n_points * d);
        let mut work = vec![0.0; d];
        for r in 0..n_points {
            work.copy_from_slice(row_vals.row(r));
            let mut col = row_start[r];
            for _ in 0..d {
                let a = band.get(col, 0);
                let b = work[0];
                let (c, s) = givens(a, b);
                rotations.push((col as u32, c, s));
                if s != 0.0 {
                    for j in 0..d {
                        let bv = band.get(col, j);
                        let wv = work[j];
                        band.set(col, j, c * bv + s * wv);
                        work[j] = -s * bv + c * wv;
                    }
                }
                work[0] = 0.0;
                work.rotate_left(1);
                col += 1;
                if col >= n {
                    break;
                }
            }
        }

        let fit = Self {
            basis: basis.clone(),
            n_functions: n,
            row_start,
            row_vals,
            band,
            rotations,
            leverage: Vec::new(),
        };
        fit.check_rank(wavelengths)?;

        let mut fit = fit;
        fit.leverage = (0..n_points).map(|k| fit.leverage_at(k)).collect();
        Ok(fit)
    }

    pub fn basis(&self) -> &BsplineBasis {
        &self.basis
    }

    pub fn leverages(&self) -> &[f64] {
        &self.leverage
    }

    fn check_rank(&self, wavelengths: &[f64]) -> Result<(), BsplineError> {
        let max_diag = (0..self.n_functions)
            .map(|i| self.band.get(i, 0).abs())
            .fold(0.0f64, f64::max);
        for i in 0..self.n_functions {
            if self.band.get(i, 0).abs() <= RANK_TOLERANCE * max_diag {
                return Err(BsplineError::SingularDesign {
                    interval: self.empty_interval_near(i, wavelengths),
                });
            }
        }
        Ok(())
    }

    /// Locate an empty knot interval inside the support of basis function `i`
    /// to make the singular-design error actionable.
    fn empty_interval_near(&self, i: usize, wavelengths: &[f64]) -> usize {
        let d = self.basis.order();
        let p = self.basis.intervals();
        let mut counts = vec![0usize; p];
        for &w in wavelengths {
            counts[self.basis.interval_of(w)] += 1;
        }
        let lo = i.saturating_sub(d - 1);
        let hi = i.min(p - 1);
        (lo..=hi).find(|&k| counts[k] == 0).unwrap_or(i.min(p - 1))
    }

    /// Leverage `h_kk`: squared norm of the forward-solve of the k-th design
    /// row against the transposed factor.
    fn leverage_at(&self, k: usize) -> f64 {
        let d = self.basis.order();
        let n = self.n_functions;
        let start = self.row_start[k];
        let vals = self.row_vals.row(k);
        let mut z = vec![0.0; n];
        let mut h = 0.0;
        for i in start..n {
            let mut acc = if i < start + d { vals[i - start] } else { 0.0 };
            for j in i.saturating_sub(d - 1)..i {
                acc -= self.band.get(j, i - j) * z[j];
            }
            let zi = acc / self.band.get(i, 0);
            z[i] = zi;
            h += zi * zi;
        }
        h
    }

    /// Least-squares coefficients for one sampled spectrum.
    pub fn solve(&self, sample: &[f64]) -> Vec<f64> {
        let n = self.n_functions;
        let d = self.basis.order();
        let mut g = vec![0.0; n];
        let mut rot = self.rotations.iter();
        for (r, &y) in sample.iter().enumerate() {
            let mut yw = y;
            let steps = d.min(n - self.row_start[r]);
            for _ in 0..steps {
                let &(row, c, s) = rot.next().expect("rotation stream in sync");
                let gi = g[row as usize];
                g[row as usize] = c * gi + s * yw;
                yw = -s * gi + c * yw;
            }
        }
        // Banded back-substitution.
        let mut coeffs = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = g[i];
            for t in 1..d.min(n - i) {
                acc -= self.band.get(i, t) * coeffs[i + t];
            }
            coeffs[i] = acc / self.band.get(i, 0);
        }
        coeffs
    }

    /// Fitted values `B a` at every design wavelength.
    pub fn predict(&self, coeffs: &[f64]) -> Vec<f64> {
        let d = self.basis.order();
        (0..self.row_start.len())
            .map(|r| {
                let start = self.row_start[r];
                let vals = self.row_vals.row(r);
                (0..d).map(|t| vals[t] * coeffs[start + t]).sum()
            })
            .collect()
    }

    /// Leave-one-out error of one spectrum via the leverage identity: the
    /// deleted residual at `k` is the ordinary residual over `1 - h_kk`.
    pub fn loo_error(&self, sample: &[f64]) -> Result<f64, BsplineError> {
        let coeffs = self.solve(sample);
        let fitted = self.predict(&coeffs);
        let n_points = sample.len() as f64;
        let mut sum = 0.0;
        for (k, (&y, yhat)) in sample.iter().zip(&fitted).enumerate() {
            let h = self.leverage[k];
            if h >= 1.0 - LEVERAGE_GUARD {
                return Err(BsplineError::IllPosedLoo { index: k });
            }
            let deleted = (y - yhat) / (1.0 - h);
            sum += deleted * deleted;
        }
        Ok(sum / n_points)
    }

    /// The explicit projection matrix: column `k` solves the normal system
    /// for the k-th design row through the two triangular band solves.
    fn projection_entries(&self) -> RowMatrix {
        let n = self.n_functions;
        let d = self.basis.order();
        let n_points = self.row_start.len();
        let mut out = RowMatrix::zeros(n, n_points);
        let mut z = vec![0.0; n];
        for k in 0..n_points {
            let start = self.row_start[k];
            let vals = self.row_vals.row(k);
            for zi in z.iter_mut().take(start) {
                *zi = 0.0;
            }
            for i in start..n {
                let mut acc = if i < start + d { vals[i - start] } else { 0.0 };
                for j in i.saturating_sub(d - 1)..i {
                    acc -= self.band.get(j, i - j) * z[j];
                }
                z[i] = acc / self.band.get(i, 0);
            }
            // Back-substitution for R_qr x = z.
            for i in (0..n).rev() {
                let mut acc = z[i];
                for t in 1..d.min(n - i) {
                    acc -= self.band.get(i, t) * out.get(i + t, k);
                }
                out.set(i, k, acc / self.band.get(i, 0));
            }
        }
        out
    }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Compute the projection matrix `R` mapping samples to coefficients.
pub fn projection_matrix(
    basis: &BsplineBasis,
    wavelengths: &[f64],
) -> Result<ProjectionMatrix, BsplineError> {
    let fit = SplineFit::new(basis, wavelengths)?;
    Ok(ProjectionMatrix {
        entries: fit.projection_entries(),
        basis: basis.clone(),
        wavelengths: wavelengths.to_vec(),
    })
}

/// Apply `R` to every spectrum: `coefficients[l][i] = sum_j R[i][j] x[l][j]`.
pub fn compress(r: &ProjectionMatrix, set: &SpectraSet) -> Result<CompressedSet, BsplineError> {
    if set.wavelengths() != r.wavelengths() {
        return Err(BsplineError::WavelengthMismatch);
    }
    let n = r.n_functions();
    let mut coefficients = RowMatrix::zeros(set.n_spectra(), n);
    for (l, sample) in set.responses().iter_rows().enumerate() {
        let out = coefficients.row_mut(l);
        for i in 0..n {
            out[i] = crate::linalg::dot(r.row(i), sample);
        }
    }
    Ok(CompressedSet {
        coefficients,
        basis: r.basis().clone(),
    })
}

/// Leave-one-out error of a single sampled spectrum on the given basis.
pub fn loo_error_spectrum(
    basis: &BsplineBasis,
    wavelengths: &[f64],
    sample: &[f64],
) -> Result<f64, BsplineError> {
    if sample.len() != wavelengths.len() {
        return Err(BsplineError::Precondition(format!(
            "sample has {} values but there are {} wavelengths",
            sample.len(),
            wavelengths.len()
        )));
    }
    SplineFit::new(basis, wavelengths)?.loo_error(sample)
}

/// Sum of per-spectrum leave-one-out errors over the whole set.
pub fn total_loo(basis: &BsplineBasis, set: &SpectraSet) -> Result<f64, BsplineError> {
    if set.n_spectra() == 0 {
        return Ok(0.0);
    }
    let fit = SplineFit::new(basis, set.wavelengths())?;
    let mut sum = 0.0;
    for sample in set.responses().iter_rows() {
        sum += fit.loo_error(sample)?;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::build_basis;
    use crate::linalg::RowMatrix;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect()
    }

    /// Dense least-squares oracle via normal equations, independent of the
    /// banded path.
    fn dense_lsq(basis: &BsplineBasis, wavelengths: &[f64], y: &[f64]) -> Vec<f64> {
        let n = basis.n_functions();
        let rows: Vec<Vec<f64>> = wavelengths
            .iter()
            .map(|&w| crate::bspline::evaluate_basis(basis, w).unwrap())
            .collect();
        let mut ata = nalgebra::DMatrix::zeros(n, n);
        let mut aty = nalgebra::DVector::zeros(n);
        for (row, &yi) in rows.iter().zip(y) {
            for i in 0..n {
                aty[i] += row[i] * yi;
                for j in 0..n {
                    ata[(i, j)] += row[i] * row[j];
                }
            }
        }
        ata.lu().solve(&aty).unwrap().as_slice().to_vec()
    }

    /// Literal refit-without-point-k oracle for the leave-one-out error.
    fn brute_loo(basis: &BsplineBasis, wavelengths: &[f64], y: &[f64]) -> f64 {
        let n_points = wavelengths.len();
        let mut sum = 0.0;
        for k in 0..n_points {
            let wl: Vec<f64> = wavelengths
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, &w)| w)
                .collect();
            let ys: Vec<f64> = y
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, &v)| v)
                .collect();
            let coeffs = dense_lsq(basis, &wl, &ys);
            let row = crate::bspline::evaluate_basis(basis, wavelengths[k]).unwrap();
            let pred: f64 = row.iter().zip(&coeffs).map(|(b, a)| b * a).sum();
            sum += (y[k] - pred) * (y[k] - pred);
        }
        sum / n_points as f64
    }

    #[test]
    fn one_point_per_interval_order_one_is_identity() {
        let basis = build_basis(0.0, 1.0, 10, 1).unwrap();
        let wavelengths: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        let r = projection_matrix(&basis, &wavelengths).unwrap();
        let sample: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        for i in 0..10 {
            let coeff = crate::linalg::dot(r.row(i), &sample);
            assert_abs_diff_eq!(coeff, sample[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn reproduces_low_degree_polynomials() {
        for d in 1..=5usize {
            let basis = build_basis(-1.0, 2.0, 7, d).unwrap();
            let wavelengths = linspace(-1.0, 2.0, 40);
            let fit = SplineFit::new(&basis, &wavelengths).unwrap();
            let y: Vec<f64> = wavelengths
                .iter()
                .map(|&w| (0..d).map(|q| (q as f64 + 0.3) * w.powi(q as i32)).sum())
                .collect();
            let coeffs = fit.solve(&y);
            let fitted = fit.predict(&coeffs);
            let scale = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let resid = y
                .iter()
                .zip(&fitted)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(
                resid <= 1e-9 * scale,
                "order {d}: relative residual {}",
                resid / scale
            );
        }
    }

    #[test]
    fn matches_dense_normal_equations() {
        let basis = build_basis(0.0, 5.0, 9, 4).unwrap(); // n = 12
        let wavelengths = linspace(0.0, 5.0, 50);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fit = SplineFit::new(&basis, &wavelengths).unwrap();
        let fast = fit.solve(&y);
        let slow = dense_lsq(&basis, &wavelengths, &y);
        for (a, b) in fast.iter().zip(&slow) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn projection_rows_have_localized_support() {
        let basis = build_basis(0.0, 1.0, 20, 4).unwrap();
        let wavelengths = linspace(0.0, 1.0, 120);
        let r = projection_matrix(&basis, &wavelengths).unwrap();
        for i in 0..r.n_functions() {
            let row = r.row(i);
            let above: Vec<usize> = (0..row.len()).filter(|&j| row[j].abs() > 1e-12).collect();
            assert!(!above.is_empty());
            // Contiguous band.
            assert_eq!(
                above.last().unwrap() - above.first().unwrap() + 1,
                above.len(),
                "row {i} support has holes"
            );
        }
    }

    #[test]
    fn compress_reconstructs_constant_spectra() {
        let basis = build_basis(400.0, 700.0, 12, 4).unwrap();
        let wavelengths = linspace(400.0, 700.0, 60);
        let r = projection_matrix(&basis, &wavelengths).unwrap();
        let responses = RowMatrix::from_rows(&[vec![3.25; 60], vec![0.0; 60]]);
        let set = SpectraSet::new(wavelengths.clone(), responses, None).unwrap();
        let compressed = compress(&r, &set).unwrap();

        let fit = SplineFit::new(&basis, &wavelengths).unwrap();
        let recon = fit.predict(compressed.coefficients.row(0));
        for v in recon {
            assert_abs_diff_eq!(v, 3.25, epsilon = 1e-10);
        }
        assert!(compressed
            .coefficients
            .row(1)
            .iter()
            .all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn compress_matches_per_spectrum_oracle() {
        let basis = build_basis(0.0, 1.0, 6, 3).unwrap();
        let wavelengths = linspace(0.0, 1.0, 30);
        let r = projection_matrix(&basis, &wavelengths).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..30).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let set = SpectraSet::new(wavelengths.clone(), RowMatrix::from_rows(&rows), None).unwrap();
        let compressed = compress(&r, &set).unwrap();
        for (l, row) in rows.iter().enumerate() {
            let oracle = dense_lsq(&basis, &wavelengths, row);
            for (a, b) in compressed.coefficients.row(l).iter().zip(&oracle) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn compress_rejects_mismatched_grid() {
        let basis = build_basis(0.0, 1.0, 4, 2).unwrap();
        let wavelengths = linspace(0.0, 1.0, 12);
        let r = projection_matrix(&basis, &wavelengths).unwrap();
        let other = linspace(0.0, 2.0, 12);
        let set = SpectraSet::new(other, RowMatrix::zeros(2, 12), None).unwrap();
        assert!(matches!(
            compress(&r, &set),
            Err(BsplineError::WavelengthMismatch)
        ));
    }

    #[test]
    fn singular_design_names_empty_interval() {
        let basis = build_basis(0.0, 1.0, 5, 1).unwrap();
        // Nothing lands in interval 2 = [0.4, 0.6).
        let wavelengths = vec![0.05, 0.1, 0.25, 0.3, 0.65, 0.85];
        match SplineFit::new(&basis, &wavelengths) {
            Err(BsplineError::SingularDesign { interval }) => assert_eq!(interval, 2),
            other => panic!("expected singular design, got {other:?}"),
        }
    }

    #[test]
    fn loo_exact_fit_is_zero() {
        let basis = build_basis(0.0, 1.0, 3, 4).unwrap();
        let wavelengths = linspace(0.0, 1.0, 25);
        let y: Vec<f64> = wavelengths
            .iter()
            .map(|&w| 2.0 - w + 0.5 * w * w * w)
            .collect();
        let scale: f64 = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        let loo = loo_error_spectrum(&basis, &wavelengths, &y).unwrap();
        assert!(loo < 1e-16 * scale, "loo = {loo}");
    }

    #[test]
    fn loo_hand_computed_mean_case() {
        // Order 1, single interval: deleted prediction at k is the mean of
        // the other samples. For {0, 0, 3}: (1.5^2 + 1.5^2 + 3^2) / 3 = 4.5.
        let basis = build_basis(0.0, 1.0, 1, 1).unwrap();
        let wavelengths = vec![0.2, 0.5, 0.8];
        let loo = loo_error_spectrum(&basis, &wavelengths, &[0.0, 0.0, 3.0]).unwrap();
        assert_abs_diff_eq!(loo, 4.5, epsilon = 1e-12);
    }

    #[test]
    fn loo_matches_brute_force_refit() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for case in 0..50 {
            let d = rng.random_range(1..=5usize);
            // Keep a couple of points per interval so no deletion is ill-posed.
            let n_points = rng.random_range(24..=30);
            let p = rng.random_range(1..=(11 - d));
            let basis = build_basis(0.0, 1.0, p, d).unwrap();
            let wavelengths = linspace(0.0, 1.0, n_points);
            let y: Vec<f64> = (0..n_points).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = loo_error_spectrum(&basis, &wavelengths, &y).unwrap();
            let slow = brute_loo(&basis, &wavelengths, &y);
            assert!(
                (fast - slow).abs() <= 1e-8 * slow.abs().max(1e-12),
                "case {case} (d={d}, p={p}, N={n_points}): fast {fast} vs slow {slow}"
            );
        }
    }

    #[test]
    fn loo_rejects_interpolating_design() {
        // One point per interval with order 1: every leverage is exactly 1.
        let basis = build_basis(0.0, 1.0, 3, 1).unwrap();
        let wavelengths = vec![0.1, 0.5, 0.9];
        assert!(matches!(
            loo_error_spectrum(&basis, &wavelengths, &[1.0, 2.0, 3.0]),
            Err(BsplineError::IllPosedLoo { .. })
        ));
    }

    #[test]
    fn total_loo_is_additive() {
        let basis = build_basis(0.0, 1.0, 4, 3).unwrap();
        let wavelengths = linspace(0.0, 1.0, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let row: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..1.0)).collect();
        let set = SpectraSet::new(
            wavelengths.clone(),
            RowMatrix::from_rows(&vec![row.clone(); 5]),
            None,
        )
        .unwrap();
        let total = total_loo(&basis, &set).unwrap();
        let single = loo_error_spectrum(&basis, &wavelengths, &row).unwrap();
        assert_abs_diff_eq!(total, 5.0 * single, epsilon = 1e-12 * single.max(1.0));
    }

    #[test]
    fn total_loo_empty_set_is_zero() {
        let basis = build_basis(0.0, 1.0, 4, 3).unwrap();
        let wavelengths = linspace(0.0, 1.0, 20);
        let set = SpectraSet::new(wavelengths, RowMatrix::zeros(0, 20), None).unwrap();
        assert_eq!(total_loo(&basis, &set).unwrap(), 0.0);
    }

    #[test]
    fn total_loo_matches_brute_force_sum() {
        let basis = build_basis(0.0, 1.0, 5, 2).unwrap();
        let wavelengths = linspace(0.0, 1.0, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..16).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let set = SpectraSet::new(wavelengths.clone(), RowMatrix::from_rows(&rows), None).unwrap();
        let total = total_loo(&basis, &set).unwrap();
        let brute: f64 = rows
            .iter()
            .map(|y| brute_loo(&basis, &wavelengths, y))
            .sum();
        assert!((total - brute).abs() <= 1e-8 * brute, "{total} vs {brute}");
    }

    #[test]
    fn least_squares_optimum_cannot_be_improved() {
        let basis = build_basis(0.0, 1.0, 8, 3).unwrap();
        let wavelengths = linspace(0.0, 1.0, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let y: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fit = SplineFit::new(&basis, &wavelengths).unwrap();
        let coeffs = fit.solve(&y);
        let resid = |c: &[f64]| -> f64 {
            fit.predict(c)
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        };
        let base = resid(&coeffs);
        for i in 0..coeffs.len() {
            for delta in [-1e-4, 1e-4] {
                let mut bumped = coeffs.clone();
                bumped[i] += delta;
                assert!(
                    resid(&bumped) >= base,
                    "perturbing coefficient {i} improved the fit"
                );
            }
        }
    }

    #[test]
    fn reconstruction_error_non_increasing_for_nested_bases() {
        let wavelengths = linspace(0.0, 1.0, 200);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let a: f64 = rng.random_range(0.5..2.0);
                let b: f64 = rng.random_range(1.0..8.0);
                wavelengths
                    .iter()
                    .map(|&w| (a * 6.0 * w + b).sin() + w * w)
                    .collect()
            })
            .collect();
        let mut previous = f64::INFINITY;
        for p in [5usize, 10, 20] {
            let basis = build_basis(0.0, 1.0, p, 4).unwrap();
            let fit = SplineFit::new(&basis, &wavelengths).unwrap();
            let total: f64 = rows
                .iter()
                .map(|y| {
                    let c = fit.solve(y);
                    fit.predict(&c)
                        .iter()
                        .zip(y)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                })
                .sum();
            assert!(
                total <= previous * (1.0 + 1e-12),
                "residual grew from {previous} to {total} at p = {p}"
            );
            previous = total;
        }
    }
}
