//! Forward-backward greedy search over feature subsets, scored by mutual
//! information with the target.
//!
//! The forward phase grows the subset from empty, accepting the candidate
//! that most increases the subset MI as long as the increase is strict; the
//! backward phase then drops features whose removal increases the MI. Subset
//! scores are cached per sorted index tuple, so a shared run never evaluates
//! the same subset twice. The greedy core is generic over the scoring
//! function, which keeps it testable against deterministic set functions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::RowMatrix;
use crate::mi::{
    mutual_information_with_backend, JointSample, MiError, MiEstimatorConfig, NeighborBackend,
};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Mi(#[from] MiError),
}

/// Search parameters: MI estimator settings plus stopping controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    pub mi: MiEstimatorConfig,
    /// Cap on the forward subset size; `None` keeps growing until MI stalls.
    pub max_size: Option<usize>,
    /// Minimum MI increase to accept a step (0 = any strict increase).
    pub min_delta: f64,
    /// Neighbor-search backend for the MI estimates.
    pub backend: NeighborBackend,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            mi: MiEstimatorConfig::default(),
            max_size: None,
            min_delta: 0.0,
            backend: NeighborBackend::BruteForce,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Forward,
    Backward,
}

/// One accepted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub phase: Phase,
    pub candidate_index: usize,
    pub subset_after: Vec<usize>,
    pub mi_after: f64,
}

/// Full record of a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub steps: Vec<SelectionStep>,
    pub final_subset: Vec<usize>,
    pub final_mi: f64,
    /// Scoring-function invocations during the forward phase (cache misses).
    pub forward_evaluations: usize,
    pub backward_evaluations: usize,
}

impl SelectionTrace {
    /// Audit export: `step,phase,candidate,subset,mi` with the subset encoded
    /// as `;`-joined indices.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,phase,candidate,subset,mi\n");
        for (i, step) in self.steps.iter().enumerate() {
            let subset = step
                .subset_after
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(";");
            let phase = match step.phase {
                Phase::Forward => "forward",
                Phase::Backward => "backward",
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i, phase, step.candidate_index, subset, step.mi_after
            ));
        }
        out
    }
}

/// Caching wrapper around a subset score function.
struct Scorer<F> {
    score_fn: F,
    cache: HashMap<Vec<usize>, f64>,
    evaluations: usize,
}

impl<F> Scorer<F>
where
    F: FnMut(&[usize]) -> Result<f64, SelectionError>,
{
    fn new(score_fn: F) -> Self {
        Self {
            score_fn,
            cache: HashMap::new(),
            evaluations: 0,
        }
    }

    fn score(&mut self, subset: &[usize]) -> Result<f64, SelectionError> {
        debug_assert!(
            subset.windows(2).all(|w| w[0] < w[1]),
            "subset must be sorted"
        );
        if let Some(&v) = self.cache.get(subset) {
            return Ok(v);
        }
        let v = (self.score_fn)(subset)?;
        self.evaluations += 1;
        self.cache.insert(subset.to_vec(), v);
        Ok(v)
    }
}

fn insert_sorted(subset: &[usize], feature: usize) -> Vec<usize> {
    let mut out = subset.to_vec();
    let pos = out.partition_point(|&f| f < feature);
    out.insert(pos, feature);
    out
}

fn remove_sorted(subset: &[usize], feature: usize) -> Vec<usize> {
    subset.iter().copied().filter(|&f| f != feature).collect()
}

fn forward_loop<F>(
    n_features: usize,
    scorer: &mut Scorer<F>,
    max_size: Option<usize>,
    min_delta: f64,
    steps: &mut Vec<SelectionStep>,
) -> Result<(Vec<usize>, f64), SelectionError>
where
    F: FnMut(&[usize]) -> Result<f64, SelectionError>,
{
    let mut subset: Vec<usize> = Vec::new();
    let mut current_mi = 0.0; // MI of the empty set
    loop {
        if subset.len() == n_features || max_size.is_some_and(|m| subset.len() >= m) {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for f in 0..n_features {
            if subset.binary_search(&f).is_ok() {
                continue;
            }
            let candidate = insert_sorted(&subset, f);
            let mi = scorer.score(&candidate)?;
            // Strict improvement over the running best keeps ties on the
            // lowest feature index.
            if best.is_none_or(|(_, b)| mi > b) {
                best = Some((f, mi));
            }
        }
        let (feature, mi) = best.expect("candidates remain");
        if mi > current_mi + min_delta {
            subset = insert_sorted(&subset, feature);
            current_mi = mi;
            steps.push(SelectionStep {
                phase: Phase::Forward,
                candidate_index: feature,
                subset_after: subset.clone(),
                mi_after: mi,
            });
        } else {
            break;
        }
    }
    Ok((subset, current_mi))
}

fn backward_loop<F>(
    start: Vec<usize>,
    start_mi: f64,
    scorer: &mut Scorer<F>,
    min_delta: f64,
    steps: &mut Vec<SelectionStep>,
) -> Result<(Vec<usize>, f64), SelectionError>
where
    F: FnMut(&[usize]) -> Result<f64, SelectionError>,
{
    let mut subset = start;
    let mut current_mi = start_mi;
    while subset.len() > 1 {
        let mut best: Option<(usize, f64)> = None;
        for &f in &subset {
            let candidate = remove_sorted(&subset, f);
            let mi = scorer.score(&candidate)?;
            if best.is_none_or(|(_, b)| mi > b) {
                best = Some((f, mi));
            }
        }
        let (feature, mi) = best.expect("subset non-empty");
        if mi > current_mi + min_delta {
            subset = remove_sorted(&subset, feature);
            current_mi = mi;
            steps.push(SelectionStep {
                phase: Phase::Backward,
                candidate_index: feature,
                subset_after: subset.clone(),
                mi_after: mi,
            });
        } else {
            break;
        }
    }
    Ok((subset, current_mi))
}

/// Forward phase over an arbitrary subset score function.
pub fn forward_phase_with<F>(
    n_features: usize,
    score_fn: F,
    max_size: Option<usize>,
    min_delta: f64,
) -> Result<SelectionTrace, SelectionError>
where
    F: FnMut(&[usize]) -> Result<f64, SelectionError>,
{
    if n_features == 0 {
        return Err(SelectionError::Precondition(
            "no features to select from".into(),
        ));
    }
    let mut scorer = Scorer::new(score_fn);
    let mut steps = Vec::new();
    let (subset, mi) = forward_loop(n_features, &mut scorer, max_size, min_delta, &mut steps)?;
    Ok(SelectionTrace {
        steps,
        final_subset: subset,
        final_mi: mi,
        forward_evaluations: scorer.evaluations,
        backward_evaluations: 0,
    })
}

/// Backward phase over an arbitrary subset score function.
pub fn backward_phase_with<F>(
    start_subset: &[usize],
    score_fn: F,
    min_delta: f64,
) -> Result<SelectionTrace, SelectionError>
where
    F: FnMut(&[usize]) -> Result<f64, SelectionError>,
{
    if start_subset.is_empty() {
        return Err(SelectionError::Precondition("empty start subset".into()));
    }
    let mut start = start_subset.to_vec();
    start.sort_unstable();
    start.dedup();
    let mut scorer = Scorer::new(score_fn);
    let start_mi = scorer.score(&start)?;
    let start_evals = scorer.evaluations;
    let mut steps = Vec::new();
    let (subset, mi) = backward_loop(start, start_mi, &mut scorer, min_delta, &mut steps)?;
    Ok(SelectionTrace {
        steps,
        final_subset: subset,
        final_mi: mi,
        forward_evaluations: 0,
        backward_evaluations: scorer.evaluations - start_evals,
    })
}

/// Forward then backward over one shared score cache.
pub fn forward_backward_with<F>(
    n_features: usize,
    score_fn: F,
    max_size: Option<usize>,
    min_delta: f64,
) -> Result<SelectionTrace, SelectionError>
where
    F: FnMut(&[usize]) -> Result<f64, SelectionError>,
{
    if n_features == 0 {
        return Err(SelectionError::Precondition(
            "no features to select from".into(),
        ));
    }
    let mut scorer = Scorer::new(score_fn);
    let mut steps = Vec::new();
    let (subset, mi) = forward_loop(n_features, &mut scorer, max_size, min_delta, &mut steps)?;
    let forward_evaluations = scorer.evaluations;
    let (subset, mi) = if subset.is_empty() {
        (subset, mi)
    } else {
        backward_loop(subset, mi, &mut scorer, min_delta, &mut steps)?
    };
    Ok(SelectionTrace {
        steps,
        final_subset: subset,
        final_mi: mi,
        forward_evaluations,
        backward_evaluations: scorer.evaluations - forward_evaluations,
    })
}

fn mi_score_fn<'a>(
    features: &'a RowMatrix,
    y: &'a [f64],
    config: &SelectionConfig,
) -> impl FnMut(&[usize]) -> Result<f64, SelectionError> + 'a {
    let mi = config.mi;
    let backend = config.backend;
    move |subset: &[usize]| {
        let sample = JointSample::new(features.select_columns(subset), y.to_vec())?;
        Ok(mutual_information_with_backend(&sample, &mi, backend)?.nats)
    }
}

fn validate_inputs(
    features: &RowMatrix,
    y: &[f64],
    config: &SelectionConfig,
) -> Result<(), SelectionError> {
    if features.ncols() == 0 {
        return Err(SelectionError::Precondition(
            "no features to select from".into(),
        ));
    }
    if features.nrows() != y.len() {
        return Err(SelectionError::Precondition(format!(
            "feature rows {} do not match target length {}",
            features.nrows(),
            y.len()
        )));
    }
    if y.len() < config.mi.k + 1 {
        return Err(SelectionError::Precondition(format!(
            "need at least k+1 = {} samples, got {}",
            config.mi.k + 1,
            y.len()
        )));
    }
    Ok(())
}

/// Grow a subset from empty by MI maximization.
pub fn forward_phase(
    features: &RowMatrix,
    y: &[f64],
    config: &SelectionConfig,
) -> Result<SelectionTrace, SelectionError> {
    validate_inputs(features, y, config)?;
    forward_phase_with(
        features.ncols(),
        mi_score_fn(features, y, config),
        config.max_size,
        config.min_delta,
    )
}

/// Shrink a subset by removing features whose removal raises the MI.
pub fn backward_phase(
    features: &RowMatrix,
    y: &[f64],
    start_subset: &[usize],
    config: &SelectionConfig,
) -> Result<SelectionTrace, SelectionError> {
    validate_inputs(features, y, config)?;
    backward_phase_with(
        start_subset,
        mi_score_fn(features, y, config),
        config.min_delta,
    )
}

/// The two-stage procedure: forward growth, then backward pruning.
pub fn forward_backward(
    features: &RowMatrix,
    y: &[f64],
    config: &SelectionConfig,
) -> Result<SelectionTrace, SelectionError> {
    validate_inputs(features, y, config)?;
    forward_backward_with(
        features.ncols(),
        mi_score_fn(features, y, config),
        config.max_size,
        config.min_delta,
    )
}
