//! Meta-parameter selection by stratified k-fold cross validation: neuron
//! count and width scale for the RBFN, component counts for PCR/PLSR.

use serde::{Deserialize, Serialize};

use super::{fit_latent, fit_rbfn_with_centers, kmeans, predict_rbfn, LatentKind, ModelError};
use crate::linalg::RowMatrix;
use crate::spectra::kfold_stratified;

/// Candidate grid for the RBFN meta parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvGrid {
    pub neuron_counts: Vec<usize>,
    pub width_scales: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvGrid {
    fn default() -> Self {
        Self {
            neuron_counts: vec![2, 3, 5, 8, 12, 20, 30],
            width_scales: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            folds: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub neurons: usize,
    pub width_scale: f64,
    pub mean_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSelection {
    pub neurons: usize,
    pub width_scale: f64,
    pub table: Vec<CvCell>,
    pub warnings: Vec<String>,
}

/// (training rows, validation rows) per fold.
type FoldSplit = (Vec<usize>, Vec<usize>);

fn make_folds(y: &[f64], folds: usize, seed: u64) -> Result<Vec<FoldSplit>, ModelError> {
    let indices: Vec<usize> = (0..y.len()).collect();
    let parts = kfold_stratified(&indices, y, folds, seed)?;
    Ok(parts
        .iter()
        .map(|validation| {
            let train: Vec<usize> = indices
                .iter()
                .copied()
                .filter(|i| validation.binary_search(i).is_err())
                .collect();
            (train, validation.clone())
        })
        .collect())
}

fn fold_mse(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / truth.len() as f64
}

/// Mean validation MSE per (neurons, width_scale) pair over stratified folds;
/// returns the arg-min with ties toward smaller size, then smaller scale.
///
/// The centers come from one vector quantization of the full learning block
/// per neuron count (quantization never sees the targets); each fold then
/// refits only the output layer. The validated kernel layout is therefore
/// exactly the one the final model uses, so the fold scores carry no
/// clustering-draw noise that the final refit would not share.
pub fn cv_select_meta(x: &RowMatrix, y: &[f64], grid: &CvGrid) -> Result<CvSelection, ModelError> {
    if grid.neuron_counts.is_empty() || grid.width_scales.is_empty() {
        return Err(ModelError::Precondition("empty meta-parameter grid".into()));
    }
    if x.nrows() != y.len() {
        return Err(ModelError::Dimension(format!(
            "{} samples vs {} targets",
            x.nrows(),
            y.len()
        )));
    }
    let mut warnings = Vec::new();
    let max_m = *grid.neuron_counts.iter().max().unwrap();
    if y.len() < 3 * max_m {
        warnings.push(format!(
            "only {} samples for up to {max_m} neurons; at least {} are recommended",
            y.len(),
            3 * max_m
        ));
    }
    let folds = make_folds(y, grid.folds, grid.seed)?;

    let mut neurons = grid.neuron_counts.clone();
    neurons.sort_unstable();
    let mut scales = grid.width_scales.clone();
    scales.sort_by(f64::total_cmp);

    let mut table = Vec::with_capacity(neurons.len() * scales.len());
    let mut best: Option<CvCell> = None;
    for &m in &neurons {
        let min_train = folds
            .iter()
            .map(|(train, _)| train.len())
            .min()
            .unwrap_or(0);
        let clusters = if m <= min_train {
            Some(kmeans(x, m, grid.seed)?)
        } else {
            None
        };
        if clusters.is_none() {
            warnings.push(format!("skipped M = {m}: exceeds a training fold"));
        }
        for &scale in &scales {
            let mean_mse = match &clusters {
                None => f64::INFINITY,
                Some(clusters) => {
                    let mut total = 0.0;
                    for (train, validation) in &folds {
                        let x_train = x.select_rows(train);
                        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                        let fit = fit_rbfn_with_centers(
                            &x_train,
                            &y_train,
                            clusters.centers.clone(),
                            &clusters.variances,
                            scale,
                        )?;
                        let x_val = x.select_rows(validation);
                        let truth: Vec<f64> = validation.iter().map(|&i| y[i]).collect();
                        let pred = predict_rbfn(&fit.model, &x_val)?;
                        total += fold_mse(&pred, &truth);
                    }
                    total / folds.len() as f64
                }
            };
            let cell = CvCell {
                neurons: m,
                width_scale: scale,
                mean_mse,
            };
            table.push(cell);
            if best.is_none_or(|b| cell.mean_mse < b.mean_mse) {
                best = Some(cell);
            }
        }
    }
    let best = best.expect("non-empty grid");
    if best.mean_mse.is_infinite() {
        return Err(ModelError::Precondition(
            "every grid cell exceeds the training fold size".into(),
        ));
    }
    Ok(CvSelection {
        neurons: best.neurons,
        width_scale: best.width_scale,
        table,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSelection {
    pub n_components: usize,
    pub table: Vec<(usize, f64)>,
    pub warnings: Vec<String>,
}

/// Component count for PCR/PLSR by the same stratified k-fold scheme.
pub fn cv_select_components(
    x: &RowMatrix,
    y: &[f64],
    kind: LatentKind,
    candidates: &[usize],
    folds: usize,
    seed: u64,
) -> Result<ComponentSelection, ModelError> {
    if candidates.is_empty() {
        return Err(ModelError::Precondition(
            "empty component candidate list".into(),
        ));
    }
    let fold_sets = make_folds(y, folds, seed)?;
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut warnings = Vec::new();
    let mut table = Vec::with_capacity(sorted.len());
    let mut best: Option<(usize, f64)> = None;
    for &c in &sorted {
        let mut total = 0.0;
        let mut feasible = true;
        for (train, validation) in &fold_sets {
            let max_c = (train.len() - 1).min(x.ncols());
            if c > max_c {
                feasible = false;
                break;
            }
            let x_train = x.select_rows(train);
            let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let model = fit_latent(&x_train, &y_train, kind, c)?;
            let x_val = x.select_rows(validation);
            let truth: Vec<f64> = validation.iter().map(|&i| y[i]).collect();
            let pred = model.linear.predict(&x_val)?;
            total += fold_mse(&pred, &truth);
        }
        let mean_mse = if feasible {
            total / fold_sets.len() as f64
        } else {
            f64::INFINITY
        };
        if !feasible {
            warnings.push(format!("skipped {c} components: exceeds a training fold"));
        }
        table.push((c, mean_mse));
        if best.is_none_or(|(_, b)| mean_mse < b) {
            best = Some((c, mean_mse));
        }
    }
    let (n_components, best_mse) = best.expect("non-empty candidates");
    if best_mse.is_infinite() {
        return Err(ModelError::Precondition(
            "every component count exceeds the training fold size".into(),
        ));
    }
    Ok(ComponentSelection {
        n_components,
        table,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::fit_rbfn;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sine_data(p: usize, seed: u64) -> (RowMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..p).map(|_| vec![rng.random_range(-2.0..2.0)]).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| (3.0 * r[0]).sin() + 0.05 * rng.random_range(-1.0..1.0))
            .collect();
        (RowMatrix::from_rows(&rows), y)
    }

    #[test]
    fn single_candidate_grid_returns_it() {
        let (x, y) = sine_data(60, 1);
        let grid = CvGrid {
            neuron_counts: vec![4],
            width_scales: vec![1.5],
            folds: 3,
            seed: 0,
        };
        let sel = cv_select_meta(&x, &y, &grid).unwrap();
        assert_eq!(sel.neurons, 4);
        assert_eq!(sel.width_scale, 1.5);
        assert_eq!(sel.table.len(), 1);
    }

    #[test]
    fn selected_cell_is_table_minimum() {
        let (x, y) = sine_data(90, 2);
        let grid = CvGrid {
            neuron_counts: vec![1, 4, 10],
            width_scales: vec![0.5, 2.0],
            folds: 3,
            seed: 3,
        };
        let sel = cv_select_meta(&x, &y, &grid).unwrap();
        let min = sel
            .table
            .iter()
            .map(|c| c.mean_mse)
            .fold(f64::INFINITY, f64::min);
        let chosen = sel
            .table
            .iter()
            .find(|c| c.neurons == sel.neurons && c.width_scale == sel.width_scale)
            .unwrap();
        assert_eq!(chosen.mean_mse, min);
    }

    #[test]
    fn nonlinear_target_selection_generalizes() {
        let (x, y) = sine_data(120, 5);
        let (x_test, y_test) = sine_data(200, 6);
        let grid = CvGrid {
            neuron_counts: vec![2, 5, 10, 16],
            width_scales: vec![0.5, 1.0, 2.0, 4.0],
            folds: 3,
            seed: 1,
        };
        let sel = cv_select_meta(&x, &y, &grid).unwrap();

        // Evaluate the full grid on the held-out set.
        let mut best_test = f64::INFINITY;
        let mut selected_test = f64::NAN;
        for cell in &sel.table {
            let fit = fit_rbfn(&x, &y, cell.neurons, cell.width_scale, grid.seed).unwrap();
            let pred = predict_rbfn(&fit.model, &x_test).unwrap();
            let mse = fold_mse(&pred, &y_test);
            if cell.neurons == sel.neurons && cell.width_scale == sel.width_scale {
                selected_test = mse;
            }
            best_test = best_test.min(mse);
        }
        assert!(
            selected_test <= 1.2 * best_test,
            "selected {selected_test} vs best {best_test}"
        );
    }

    #[test]
    fn oversized_neuron_counts_warn_and_are_skipped() {
        let (x, y) = sine_data(12, 7);
        let grid = CvGrid {
            neuron_counts: vec![2, 50],
            width_scales: vec![1.0],
            folds: 3,
            seed: 0,
        };
        let sel = cv_select_meta(&x, &y, &grid).unwrap();
        assert_eq!(sel.neurons, 2);
        assert!(sel.warnings.iter().any(|w| w.contains("skipped M = 50")));
        assert!(sel
            .table
            .iter()
            .any(|c| c.neurons == 50 && c.mean_mse.is_infinite()));
    }

    #[test]
    fn component_selection_prefers_enough_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..90)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let x = RowMatrix::from_rows(&rows);
        let y: Vec<f64> = rows
            .iter()
            .map(|r| r[0] + 2.0 * r[1] - r[2] + 0.5 * r[3] + 0.01 * rng.random_range(-1.0..1.0))
            .collect();
        let sel = cv_select_components(&x, &y, LatentKind::Plsr, &[1, 2, 3, 4], 3, 0).unwrap();
        assert!(sel.n_components >= 2, "picked {}", sel.n_components);
        let min = sel
            .table
            .iter()
            .map(|(_, m)| *m)
            .fold(f64::INFINITY, f64::min);
        let chosen = sel
            .table
            .iter()
            .find(|(c, _)| *c == sel.n_components)
            .unwrap();
        assert_eq!(chosen.1, min);
    }

    #[test]
    fn rejects_empty_grids() {
        let (x, y) = sine_data(30, 9);
        let grid = CvGrid {
            neuron_counts: vec![],
            width_scales: vec![1.0],
            folds: 3,
            seed: 0,
        };
        assert!(cv_select_meta(&x, &y, &grid).is_err());
        assert!(cv_select_components(&x, &y, LatentKind::Pcr, &[], 3, 0).is_err());
    }
}
