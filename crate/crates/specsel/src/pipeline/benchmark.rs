//! Wall-clock comparison of selection on compressed coefficients (including
//! the basis search and compression) against selection on the raw spectral
//! variables, across problem sizes.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::bspline::{build_basis, compress, projection_matrix, select_basis_size, SearchStrategy};
use crate::linalg::RowMatrix;
use crate::mi::MiEstimatorConfig;
use crate::selection::{forward_backward, SelectionConfig};
use crate::spectra::SpectraSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub n_wavelengths: usize,
    pub n_functions: usize,
    pub n_spectra: usize,
    /// Basis search + compression + forward-backward on the coefficients.
    pub compressed_seconds: f64,
    /// Forward-backward directly on the raw spectral variables.
    pub raw_seconds: f64,
    /// compressed_seconds / raw_seconds.
    pub ratio: f64,
    /// `1/P + (n/N)^3`; below one predicts an advantage for compression.
    pub cost_inequality: f64,
}

const GREEDY_STEPS: usize = 4;
const REPETITIONS: usize = 3;

/// Time both routes at each `(N, n, P)` size.
///
/// The compressed route runs the coarse-to-fine basis search over
/// `[N/20, N/2]` (its realistic cost), then compresses at the requested `n`
/// so the selection dimensionality is controlled across sizes. Both routes
/// run the greedy search for a fixed number of accepted steps, which makes
/// the measured scaling a function of the estimator cost alone. Each
/// measurement is the minimum of a few repetitions.
pub fn benchmark_complexity(
    sizes: &[(usize, usize, usize)],
    seed: u64,
) -> Result<Vec<BenchmarkRow>, PipelineError> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &(n_wavelengths, n_functions, n_spectra) in sizes {
        if n_functions + 1 < 5 || n_functions >= n_wavelengths {
            return Err(PipelineError::Config(format!(
                "invalid benchmark size N={n_wavelengths}, n={n_functions}"
            )));
        }
        let (set, target) = synthetic_problem(n_wavelengths, n_spectra, seed);
        let selection_config = SelectionConfig {
            mi: MiEstimatorConfig {
                k: 6.min(n_spectra - 1),
                ..MiEstimatorConfig::default()
            },
            max_size: Some(GREEDY_STEPS),
            // Force the full number of greedy iterations so every size pays
            // for the same number of subset evaluations.
            min_delta: f64::NEG_INFINITY,
            ..SelectionConfig::default()
        };

        let mut compressed_seconds = f64::INFINITY;
        let mut raw_seconds = f64::INFINITY;
        for _ in 0..REPETITIONS {
            let start = Instant::now();
            let order = 4;
            let range = ((n_wavelengths / 20).max(order + 1), n_wavelengths / 2);
            select_basis_size(&set, range, &[order], SearchStrategy::CoarseToFine)
                .map_err(|e| PipelineError::stage("benchmark", e))?;
            let basis = build_basis(
                set.wavelengths()[0],
                *set.wavelengths().last().unwrap(),
                n_functions + 1 - order,
                order,
            )
            .map_err(|e| PipelineError::stage("benchmark", e))?;
            let r = projection_matrix(&basis, set.wavelengths())
                .map_err(|e| PipelineError::stage("benchmark", e))?;
            let compressed =
                compress(&r, &set).map_err(|e| PipelineError::stage("benchmark", e))?;
            forward_backward(&compressed.coefficients, &target, &selection_config)
                .map_err(|e| PipelineError::stage("benchmark", e))?;
            compressed_seconds = compressed_seconds.min(start.elapsed().as_secs_f64());

            let start = Instant::now();
            forward_backward(set.responses(), &target, &selection_config)
                .map_err(|e| PipelineError::stage("benchmark", e))?;
            raw_seconds = raw_seconds.min(start.elapsed().as_secs_f64());
        }

        rows.push(BenchmarkRow {
            n_wavelengths,
            n_functions,
            n_spectra,
            compressed_seconds,
            raw_seconds,
            ratio: compressed_seconds / raw_seconds,
            cost_inequality: 1.0 / n_spectra as f64
                + (n_functions as f64 / n_wavelengths as f64).powi(3),
        });
    }
    Ok(rows)
}

/// Smooth synthetic spectra with a nonlinear two-band target.
pub(crate) fn synthetic_problem(
    n_wavelengths: usize,
    n_spectra: usize,
    seed: u64,
) -> (SpectraSet, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wavelengths: Vec<f64> = (0..n_wavelengths)
        .map(|j| j as f64 / (n_wavelengths - 1) as f64)
        .collect();
    let mut rows = Vec::with_capacity(n_spectra);
    let mut target = Vec::with_capacity(n_spectra);
    for _ in 0..n_spectra {
        let mut amplitudes = [0.0; 5];
        let mut centers = [0.0; 5];
        let mut widths = [0.0; 5];
        for g in 0..5 {
            amplitudes[g] = rng.random_range(0.2..1.2);
            centers[g] = rng.random_range(0.0..1.0);
            widths[g] = rng.random_range(0.05..0.25);
        }
        let row: Vec<f64> = wavelengths
            .iter()
            .map(|&w| {
                (0..5)
                    .map(|g| {
                        let z = (w - centers[g]) / widths[g];
                        amplitudes[g] * (-z * z).exp()
                    })
                    .sum::<f64>()
            })
            .collect();
        let band = |lo: f64, hi: f64| -> f64 {
            let vals: Vec<f64> = wavelengths
                .iter()
                .zip(&row)
                .filter(|(w, _)| **w >= lo && **w <= hi)
                .map(|(_, v)| *v)
                .collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        let b1 = band(0.2, 0.3);
        let b2 = band(0.6, 0.7);
        target.push(b1 * b2 + 0.1 * (5.0 * b1).sin() + 0.01 * rng.random_range(-1.0..1.0));
        rows.push(row);
    }
    let set = SpectraSet::new(
        wavelengths,
        RowMatrix::from_rows(&rows),
        Some(target.clone()),
    )
    .expect("synthetic set is valid");
    (set, target)
}
