//! Brute-force (or coarse-to-fine) minimization of the total leave-one-out
//! error over candidate basis sizes and orders.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{build_basis, BsplineError, SplineFit};
use crate::spectra::SpectraSet;

/// How the candidate grid is scanned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStrategy {
    /// Every `n` in the range, for every order.
    Exhaustive,
    /// Probe ~10 equispaced sizes, then scan the bracketing sub-interval.
    CoarseToFine,
}

/// One evaluated candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LooPoint {
    pub n_functions: usize,
    pub order: usize,
    pub loo: f64,
}

/// Search result: the winning size/order plus every evaluated point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSelection {
    pub n_functions: usize,
    pub order: usize,
    pub loo: f64,
    pub curve: Vec<LooPoint>,
}

const PROBES: usize = 10;

/// Pick the basis size minimizing total LOO over `n_range` for each order.
///
/// Ties (within numerical noise of the data scale) break toward smaller `n`,
/// then smaller order.
pub fn select_basis_size(
    set: &SpectraSet,
    n_range: (usize, usize),
    orders: &[usize],
    strategy: SearchStrategy,
) -> Result<BasisSelection, BsplineError> {
    let (lo, hi) = n_range;
    let n_points = set.n_wavelengths();
    if orders.is_empty() || lo > hi {
        return Err(BsplineError::Precondition("empty candidate set".into()));
    }
    let max_order = *orders.iter().max().unwrap();
    if lo <= max_order || hi > n_points {
        return Err(BsplineError::Precondition(format!(
            "size range [{lo}, {hi}] must lie within [{}, {n_points}]",
            max_order + 1
        )));
    }
    if set.n_spectra() == 0 {
        return Err(BsplineError::Precondition("no spectra to evaluate".into()));
    }

    // Ties are called on the scale of the data: total LOO is a sum of
    // per-spectrum mean squares, so exact fits land many orders of magnitude
    // below this threshold while genuine differences sit far above it.
    let scale: f64 = set
        .responses()
        .iter_rows()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>() / row.len().max(1) as f64)
        .sum();
    let tie_tol = 1e-12 * scale;

    let mut cache: HashMap<(usize, usize), f64> = HashMap::new();
    let mut evaluate = |n: usize, d: usize| -> Result<f64, BsplineError> {
        if let Some(&v) = cache.get(&(n, d)) {
            return Ok(v);
        }
        let basis = build_basis(
            set.wavelengths()[0],
            *set.wavelengths().last().unwrap(),
            n + 1 - d,
            d,
        )?;
        let fit = SplineFit::new(&basis, set.wavelengths())?;
        let mut total = 0.0;
        for sample in set.responses().iter_rows() {
            total += fit.loo_error(sample)?;
        }
        cache.insert((n, d), total);
        Ok(total)
    };

    for &d in orders {
        match strategy {
            SearchStrategy::Exhaustive => {
                for n in lo..=hi {
                    evaluate(n, d)?;
                }
            }
            SearchStrategy::CoarseToFine => {
                let count = hi - lo + 1;
                if count <= PROBES + 2 {
                    for n in lo..=hi {
                        evaluate(n, d)?;
                    }
                } else {
                    let probe_at = |j: usize| -> usize {
                        lo + (j * (count - 1) + (PROBES - 1) / 2) / (PROBES - 1)
                    };
                    let mut best_j = 0;
                    let mut best = f64::INFINITY;
                    for j in 0..PROBES {
                        let loo = evaluate(probe_at(j), d)?;
                        if loo < best {
                            best = loo;
                            best_j = j;
                        }
                    }
                    let refine_lo = probe_at(best_j.saturating_sub(1));
                    let refine_hi = probe_at((best_j + 1).min(PROBES - 1));
                    for n in refine_lo..=refine_hi {
                        evaluate(n, d)?;
                    }
                }
            }
        }
    }

    let mut curve: Vec<LooPoint> = cache
        .iter()
        .map(|(&(n, d), &loo)| LooPoint {
            n_functions: n,
            order: d,
            loo,
        })
        .collect();
    curve.sort_by(|a, b| {
        a.n_functions
            .cmp(&b.n_functions)
            .then(a.order.cmp(&b.order))
    });

    let mut best: Option<LooPoint> = None;
    for &point in &curve {
        match &best {
            None => best = Some(point),
            Some(b) => {
                let tied = (point.loo - b.loo).abs() <= tie_tol;
                let better = point.loo < b.loo - tie_tol
                    || (tied && (point.n_functions, point.order) < (b.n_functions, b.order));
                if better {
                    best = Some(point);
                }
            }
        }
    }
    let best = best.expect("at least one candidate evaluated");
    Ok(BasisSelection {
        n_functions: best.n_functions,
        order: best.order,
        loo: best.loo,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RowMatrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect()
    }

    fn cubic_set(n_points: usize, p_spectra: usize) -> SpectraSet {
        let wavelengths = linspace(0.0, 1.0, n_points);
        let rows: Vec<Vec<f64>> = (0..p_spectra)
            .map(|l| {
                let a = 1.0 + l as f64;
                wavelengths
                    .iter()
                    .map(|&w| a * w * w * w - w + 0.5)
                    .collect()
            })
            .collect();
        SpectraSet::new(wavelengths, RowMatrix::from_rows(&rows), None).unwrap()
    }

    fn noisy_smooth_set(n_points: usize, p_spectra: usize, seed: u64) -> SpectraSet {
        let wavelengths = linspace(0.0, 1.0, n_points);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..p_spectra)
            .map(|_| {
                let a: f64 = rng.random_range(0.5..1.5);
                let phase: f64 = rng.random_range(0.0..3.0);
                wavelengths
                    .iter()
                    .map(|&w| (a * 9.0 * w + phase).sin() + 0.05 * rng.random_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        SpectraSet::new(wavelengths, RowMatrix::from_rows(&rows), None).unwrap()
    }

    #[test]
    fn exact_fit_ties_break_to_smallest_size() {
        let set = cubic_set(80, 3);
        let sel = select_basis_size(&set, (6, 20), &[4], SearchStrategy::Exhaustive).unwrap();
        assert_eq!(sel.n_functions, 6);
        assert_eq!(sel.order, 4);
    }

    #[test]
    fn order_ties_break_to_smaller_order() {
        // Cubic spectra are exact under both orders 4 and 5 at every size.
        let set = cubic_set(80, 2);
        let sel = select_basis_size(&set, (8, 14), &[5, 4], SearchStrategy::Exhaustive).unwrap();
        assert_eq!((sel.n_functions, sel.order), (8, 4));
    }

    #[test]
    fn coarse_to_fine_never_beats_exhaustive() {
        let set = noisy_smooth_set(120, 6, 13);
        let exhaustive =
            select_basis_size(&set, (6, 50), &[4], SearchStrategy::Exhaustive).unwrap();
        let coarse = select_basis_size(&set, (6, 50), &[4], SearchStrategy::CoarseToFine).unwrap();
        assert!(exhaustive.loo <= coarse.loo + 1e-15);
        // Both strategies agree on re-evaluated points.
        for p in &coarse.curve {
            let same = exhaustive
                .curve
                .iter()
                .find(|q| q.n_functions == p.n_functions && q.order == p.order)
                .unwrap();
            assert_eq!(same.loo, p.loo);
        }
        assert!(coarse.curve.len() < exhaustive.curve.len());
    }

    #[test]
    fn noisy_data_prefers_intermediate_size() {
        let set = noisy_smooth_set(150, 5, 7);
        let sel = select_basis_size(&set, (5, 75), &[4], SearchStrategy::Exhaustive).unwrap();
        assert!(
            sel.n_functions > 5 && sel.n_functions < 75,
            "expected interior optimum, got {}",
            sel.n_functions
        );
    }

    #[test]
    fn rejects_bad_ranges() {
        let set = cubic_set(40, 2);
        assert!(select_basis_size(&set, (10, 9), &[4], SearchStrategy::Exhaustive).is_err());
        assert!(select_basis_size(&set, (4, 20), &[4], SearchStrategy::Exhaustive).is_err());
        assert!(select_basis_size(&set, (6, 41), &[4], SearchStrategy::Exhaustive).is_err());
        assert!(select_basis_size(&set, (6, 20), &[], SearchStrategy::Exhaustive).is_err());
    }
}
