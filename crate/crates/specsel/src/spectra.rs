//! Spectra data model, CSV ingestion and distribution-preserving splits.
//!
//! A [`SpectraSet`] holds `P` spectra sampled at `N` shared ascending
//! wavelengths plus an optional prediction target per spectrum. Splits and
//! folds stratify by sorting samples on the target and drawing within
//! consecutive sorted blocks, so they roughly preserve the target
//! distribution while staying bit-for-bit reproducible per seed.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::RowMatrix;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// CSV layout of an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvLayout {
    /// Header `target,<w1>,...,<wN>`; each row `y,x1,...,xN`.
    TargetFirstColumn,
    /// Header `<w1>,...,<wN>`; each row `x1,...,xN`.
    NoTarget,
}

/// `P` spectra over `N` shared wavelengths, immutable after load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraSet {
    wavelengths: Vec<f64>,
    responses: RowMatrix,
    target: Option<Vec<f64>>,
}

impl SpectraSet {
    /// Validate invariants and build a set.
    pub fn new(
        wavelengths: Vec<f64>,
        responses: RowMatrix,
        target: Option<Vec<f64>>,
    ) -> Result<Self, SpectraError> {
        if wavelengths.len() < 2 {
            return Err(SpectraError::Validation(format!(
                "need at least 2 wavelengths, got {}",
                wavelengths.len()
            )));
        }
        if wavelengths.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SpectraError::Validation(
                "wavelengths must be strictly increasing".into(),
            ));
        }
        if responses.ncols() != wavelengths.len() {
            return Err(SpectraError::Validation(format!(
                "responses have {} columns but there are {} wavelengths",
                responses.ncols(),
                wavelengths.len()
            )));
        }
        if let Some(t) = &target {
            if t.len() != responses.nrows() {
                return Err(SpectraError::Validation(format!(
                    "target length {} does not match {} spectra",
                    t.len(),
                    responses.nrows()
                )));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(SpectraError::Validation("non-finite target value".into()));
            }
        }
        if wavelengths.iter().any(|v| !v.is_finite()) || !responses.is_finite() {
            return Err(SpectraError::Validation("non-finite entry".into()));
        }
        Ok(Self {
            wavelengths,
            responses,
            target,
        })
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn responses(&self) -> &RowMatrix {
        &self.responses
    }

    pub fn target(&self) -> Option<&[f64]> {
        self.target.as_deref()
    }

    /// Number of spectra `P`.
    pub fn n_spectra(&self) -> usize {
        self.responses.nrows()
    }

    /// Number of wavelengths `N`.
    pub fn n_wavelengths(&self) -> usize {
        self.wavelengths.len()
    }

    /// New set restricted to the given spectra, same wavelength grid.
    pub fn subset(&self, indices: &[usize]) -> SpectraSet {
        SpectraSet {
            wavelengths: self.wavelengths.clone(),
            responses: self.responses.select_rows(indices),
            target: self
                .target
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i]).collect()),
        }
    }

    /// Replace the target vector (used by the pipeline's isolation audit).
    pub(crate) fn with_target(&self, target: Option<Vec<f64>>) -> SpectraSet {
        SpectraSet {
            wavelengths: self.wavelengths.clone(),
            responses: self.responses.clone(),
            target,
        }
    }
}

/// Deterministic train/test assignment over `0..P-1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

/// Parse a CSV file into a [`SpectraSet`].
pub fn load_spectra(path: &Path, layout: CsvLayout) -> Result<SpectraSet, SpectraError> {
    let text = fs::read_to_string(path).map_err(|source| SpectraError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_spectra(&text, layout)
}

/// Parse CSV text (UTF-8, comma separated, '.' decimal).
pub fn parse_spectra(text: &str, layout: CsvLayout) -> Result<SpectraSet, SpectraError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (header_line, header) = lines.next().ok_or_else(|| SpectraError::Format {
        line: 1,
        message: "empty file".into(),
    })?;

    let mut fields = header.split(',').map(str::trim);
    if layout == CsvLayout::TargetFirstColumn {
        let first = fields.next().unwrap_or("");
        if !first.eq_ignore_ascii_case("target") {
            return Err(SpectraError::Format {
                line: header_line + 1,
                message: format!("expected header to start with 'target', found '{first}'"),
            });
        }
    }
    let wavelengths = fields
        .map(|f| {
            f.parse::<f64>().map_err(|_| SpectraError::Format {
                line: header_line + 1,
                message: format!("invalid wavelength '{f}'"),
            })
        })
        .collect::<Result<Vec<f64>, _>>()?;

    let n = wavelengths.len();
    let expected = n + usize::from(layout == CsvLayout::TargetFirstColumn);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for (line_idx, line) in lines {
        let values = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| SpectraError::Format {
                    line: line_idx + 1,
                    message: format!("invalid number '{}'", f.trim()),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() != expected {
            return Err(SpectraError::Format {
                line: line_idx + 1,
                message: format!("expected {expected} fields, found {}", values.len()),
            });
        }
        match layout {
            CsvLayout::TargetFirstColumn => {
                targets.push(values[0]);
                rows.push(values[1..].to_vec());
            }
            CsvLayout::NoTarget => rows.push(values),
        }
    }

    let responses = RowMatrix::from_rows(&rows);
    let target = match layout {
        CsvLayout::TargetFirstColumn => Some(targets),
        CsvLayout::NoTarget => None,
    };
    SpectraSet::new(wavelengths, responses, target)
}

/// Sorted-block stratified train/test split.
///
/// Samples are sorted by target, partitioned into consecutive blocks of
/// `ceil(1/test_fraction)` and the test quota is drawn inside each block, so
/// `|test| = round(test_fraction * P)` exactly and both halves see the whole
/// target range.
pub fn stratified_split(
    set: &SpectraSet,
    test_fraction: f64,
    seed: u64,
) -> Result<SplitAssignment, SpectraError> {
    let target = set
        .target()
        .ok_or_else(|| SpectraError::Precondition("stratified split requires a target".into()))?;
    let p = set.n_spectra();
    if p < 4 {
        return Err(SpectraError::Precondition(format!(
            "need at least 4 spectra, got {p}"
        )));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(SpectraError::Precondition(format!(
            "test_fraction must be in (0,1), got {test_fraction}"
        )));
    }

    let block = (1.0 / test_fraction).ceil() as usize;
    let total_test = (test_fraction * p as f64).round() as usize;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| target[a].total_cmp(&target[b]).then(a.cmp(&b)));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test: Vec<usize> = Vec::with_capacity(total_test);
    let mut taken = 0usize;
    let mut covered = 0usize;
    for chunk in order.chunks(block) {
        covered += chunk.len();
        // Running quota keeps the final count at round(test_fraction * P).
        let quota = ((test_fraction * covered as f64).round() as usize)
            .min(total_test)
            .saturating_sub(taken)
            .min(chunk.len());
        let mut members = chunk.to_vec();
        members.shuffle(&mut rng);
        test.extend(members.into_iter().take(quota));
        taken += quota;
    }
    test.sort_unstable();
    let train: Vec<usize> = (0..p).filter(|i| test.binary_search(i).is_err()).collect();
    Ok(SplitAssignment {
        train_indices: train,
        test_indices: test,
        seed,
    })
}

/// Stratified k-fold partition of `indices` using the same sorted-block scheme.
///
/// Folds are disjoint, cover `indices`, and their sizes differ by at most one.
pub fn kfold_stratified(
    indices: &[usize],
    target: &[f64],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, SpectraError> {
    if k < 2 {
        return Err(SpectraError::Precondition(format!(
            "k must be >= 2, got {k}"
        )));
    }
    if indices.len() < k {
        return Err(SpectraError::Precondition(format!(
            "k = {k} exceeds {} samples",
            indices.len()
        )));
    }
    let mut order = indices.to_vec();
    order.sort_by(|&a, &b| target[a].total_cmp(&target[b]).then(a.cmp(&b)));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for chunk in order.chunks(k) {
        // One member per fold; a partial tail chunk goes to the currently
        // smallest folds so sizes stay within one of each other.
        let mut labels: Vec<usize> = (0..k).collect();
        labels.shuffle(&mut rng);
        if chunk.len() < k {
            labels.sort_by_key(|&f| (folds[f].len(), f));
            labels.truncate(chunk.len());
            labels.shuffle(&mut rng);
        }
        for (&idx, &fold) in chunk.iter().zip(&labels) {
            folds[fold].push(idx);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mean;
    use proptest::prelude::*;

    fn set_with_target(target: Vec<f64>) -> SpectraSet {
        let p = target.len();
        let responses = RowMatrix::from_rows(
            &(0..p)
                .map(|i| vec![i as f64, 2.0 * i as f64])
                .collect::<Vec<_>>(),
        );
        SpectraSet::new(vec![400.0, 402.0], responses, Some(target)).unwrap()
    }

    #[test]
    fn parse_target_first_column() {
        let text = "target,400,402\n1.0,0.5,0.6\n1.1,0.4,0.7\n0.9,0.6,0.5\n";
        let set = parse_spectra(text, CsvLayout::TargetFirstColumn).unwrap();
        assert_eq!(set.n_wavelengths(), 2);
        assert_eq!(set.n_spectra(), 3);
        assert_eq!(set.target().unwrap(), &[1.0, 1.1, 0.9]);
        assert_eq!(set.responses().row(0), &[0.5, 0.6]);
    }

    #[test]
    fn parse_rejects_non_increasing_wavelengths() {
        let text = "400,400\n0.5,0.6\n";
        let err = parse_spectra(text, CsvLayout::NoTarget).unwrap_err();
        assert!(matches!(err, SpectraError::Validation(_)), "{err}");
    }

    #[test]
    fn parse_rejects_ragged_rows() {
        let text = "400,402\n0.5,0.6\n0.5\n";
        let err = parse_spectra(text, CsvLayout::NoTarget).unwrap_err();
        assert!(matches!(err, SpectraError::Format { line: 3, .. }), "{err}");
    }

    #[test]
    fn parse_rejects_non_finite() {
        let text = "400,402\n0.5,inf\n";
        let err = parse_spectra(text, CsvLayout::NoTarget).unwrap_err();
        assert!(matches!(err, SpectraError::Validation(_)), "{err}");
    }

    #[test]
    fn split_produces_published_benchmark_sizes() {
        // 141 spectra, 36-spectrum test set.
        let target: Vec<f64> = (0..141).map(|i| 0.8 + 0.9 * i as f64 / 140.0).collect();
        let set = set_with_target(target);
        let split = stratified_split(&set, 36.0 / 141.0, 7).unwrap();
        assert_eq!(split.test_indices.len(), 36);
        assert_eq!(split.train_indices.len(), 105);
    }

    #[test]
    fn split_constant_target_is_deterministic() {
        let set = set_with_target(vec![1.0; 10]);
        let a = stratified_split(&set, 0.5, 3).unwrap();
        let b = stratified_split(&set, 0.5, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.test_indices.len(), 5);
        assert_eq!(a.train_indices.len(), 5);
    }

    #[test]
    fn split_preserves_target_mean() {
        let target: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let set = set_with_target(target.clone());
        let split = stratified_split(&set, 0.25, 11).unwrap();
        let test_mean = mean(
            &split
                .test_indices
                .iter()
                .map(|&i| target[i])
                .collect::<Vec<_>>(),
        );
        let train_mean = mean(
            &split
                .train_indices
                .iter()
                .map(|&i| target[i])
                .collect::<Vec<_>>(),
        );
        assert!(
            (test_mean - train_mean).abs() < 0.1,
            "means diverged: test {test_mean} train {train_mean}"
        );
    }

    #[test]
    fn split_requires_target() {
        let responses = RowMatrix::from_rows(&vec![vec![0.0, 1.0]; 6]);
        let set = SpectraSet::new(vec![1.0, 2.0], responses, None).unwrap();
        assert!(matches!(
            stratified_split(&set, 0.5, 0),
            Err(SpectraError::Precondition(_))
        ));
    }

    #[test]
    fn kfold_nine_samples_three_folds() {
        let indices: Vec<usize> = (0..9).collect();
        let target: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let folds = kfold_stratified(&indices, &target, 3, 1).unwrap();
        assert_eq!(folds.len(), 3);
        assert!(folds.iter().all(|f| f.len() == 3));
    }

    #[test]
    fn kfold_rejects_oversized_k() {
        let indices: Vec<usize> = (0..3).collect();
        let target = vec![0.0, 1.0, 2.0];
        assert!(matches!(
            kfold_stratified(&indices, &target, 4, 0),
            Err(SpectraError::Precondition(_))
        ));
    }

    #[test]
    fn kfold_means_close_on_linear_ramp() {
        let indices: Vec<usize> = (0..99).collect();
        let target: Vec<f64> = (0..99).map(|i| i as f64).collect();
        let folds = kfold_stratified(&indices, &target, 3, 5).unwrap();
        let std = crate::linalg::std_dev(&target);
        let means: Vec<f64> = folds
            .iter()
            .map(|f| mean(&f.iter().map(|&i| target[i]).collect::<Vec<_>>()))
            .collect();
        for a in &means {
            for b in &means {
                assert!((a - b).abs() <= 0.15 * std, "fold means {means:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn split_partitions_and_is_reproducible(
            p in 4usize..80,
            frac in 0.05f64..0.95,
            seed in 0u64..1000,
        ) {
            let target: Vec<f64> = (0..p).map(|i| ((i * 37) % 23) as f64).collect();
            let set = set_with_target(target.clone());
            let a = stratified_split(&set, frac, seed).unwrap();
            let b = stratified_split(&set, frac, seed).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.test_indices.len(), (frac * p as f64).round() as usize);
            let mut all = a.train_indices.clone();
            all.extend(&a.test_indices);
            all.sort_unstable();
            prop_assert_eq!(all, (0..p).collect::<Vec<_>>());

            // Sorted-block stratification bound: each consecutive sorted block
            // sends at most ceil(block * frac) + 1 members to test.
            let mut order: Vec<usize> = (0..p).collect();
            order.sort_by(|&x, &y| target[x].total_cmp(&target[y]).then(x.cmp(&y)));
            let block = (1.0 / frac).ceil() as usize;
            for chunk in order.chunks(block) {
                let in_test = chunk
                    .iter()
                    .filter(|i| a.test_indices.binary_search(i).is_ok())
                    .count();
                let bound = (chunk.len() as f64 * frac).ceil() as usize + 1;
                prop_assert!(in_test <= bound, "block sent {} of {} to test", in_test, chunk.len());
            }
        }

        #[test]
        fn kfold_partitions_with_balanced_sizes(
            p in 6usize..60,
            k in 2usize..6,
            seed in 0u64..100,
        ) {
            prop_assume!(p >= k);
            let indices: Vec<usize> = (0..p).collect();
            let target: Vec<f64> = (0..p).map(|i| (i as f64 * 1.7).sin()).collect();
            let folds = kfold_stratified(&indices, &target, k, seed).unwrap();
            let again = kfold_stratified(&indices, &target, k, seed).unwrap();
            prop_assert_eq!(&folds, &again);
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, indices);
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            let min = *sizes.iter().min().unwrap();
            let max = *sizes.iter().max().unwrap();
            prop_assert!(max - min <= 1, "fold sizes {:?}", sizes);
        }
    }
}
