//! End-to-end orchestration: compress, select, map to wavelength ranges, fit
//! and compare prediction models on a held-out test set, everything
//! deterministic given the configured seeds.

mod benchmark;
pub mod cli;
mod config;
mod export;
mod io;
mod report;

pub use benchmark::{benchmark_complexity, BenchmarkRow};
pub use config::{parse_config, Method, PipelineConfig, SplitSpec};
pub use export::{export_plot_data, PlotData};
pub use io::FeatureTable;
pub use report::{
    BasisSummary, MethodReport, PipelineReport, ProjectionRows, SelectedCoefficients, SplitSummary,
    REPORT_SCHEMA,
};

use std::collections::BTreeMap;
use std::time::Instant;

use serde_json::json;
use thiserror::Error;

use crate::bspline::{
    self, build_basis, compress, merge_ranges, projection_matrix, select_basis_size,
    wavelength_range, ProjectionMatrix,
};
use crate::linalg::{variance, RowMatrix};
use crate::mi::{mutual_information_with_backend, JointSample, NeighborBackend};
use crate::models::{
    cv_select_components, cv_select_meta, fit_latent, fit_linear, fit_rbfn, nmse, predict_rbfn,
    LatentKind,
};
use crate::selection::{forward_backward, SelectionConfig, SelectionTrace};
use crate::spectra::{load_spectra, stratified_split, SplitAssignment};

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad configuration or command line; maps to exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Failure inside a named pipeline stage; maps to exit code 1.
    #[error("stage {stage}: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },
    /// Any other runtime failure; maps to exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl PipelineError {
    pub(crate) fn runtime(message: impl Into<String>) -> Self {
        PipelineError::Runtime(message.into())
    }

    fn stage(stage: &'static str, err: impl std::fmt::Display) -> Self {
        PipelineError::Stage {
            stage,
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Feature matrix with the affine scaling applied ahead of selection and
/// model fitting (identity unless `standardize` is on).
struct FeatureSpace {
    features: RowMatrix,
    /// Per-column divisor applied before modelling (1 when untouched).
    scale: Vec<f64>,
}

fn standardize_by_train(features: &RowMatrix, train: &[usize]) -> FeatureSpace {
    let q = features.ncols();
    let mut means = vec![0.0; q];
    for &i in train {
        for (m, v) in means.iter_mut().zip(features.row(i)) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= train.len() as f64;
    }
    let mut vars = vec![0.0; q];
    for &i in train {
        for j in 0..q {
            let d = features.get(i, j) - means[j];
            vars[j] += d * d;
        }
    }
    let scale: Vec<f64> = vars
        .iter()
        .map(|v| {
            let s = (v / train.len() as f64).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let mut out = RowMatrix::zeros(features.nrows(), q);
    for i in 0..features.nrows() {
        let src = features.row(i);
        let dst = out.row_mut(i);
        for j in 0..q {
            dst[j] = (src[j] - means[j]) / scale[j];
        }
    }
    FeatureSpace {
        features: out,
        scale,
    }
}

fn identity_space(features: RowMatrix) -> FeatureSpace {
    let scale = vec![1.0; features.ncols()];
    FeatureSpace { features, scale }
}

fn default_size_range(n_points: usize, max_order: usize) -> (usize, usize) {
    let lo = (n_points / 20).max(max_order + 1);
    let hi = (n_points / 2).max(lo);
    (lo, hi)
}

fn read_split_files(
    train_path: &std::path::Path,
    test_path: &std::path::Path,
    n_spectra: usize,
    seed: u64,
) -> Result<SplitAssignment, PipelineError> {
    let mut train = io::parse_indices(&io::read_to_string(train_path)?)?;
    let mut test = io::parse_indices(&io::read_to_string(test_path)?)?;
    train.sort_unstable();
    test.sort_unstable();
    let mut all: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
    all.sort_unstable();
    all.dedup();
    if all.len() != train.len() + test.len() || all != (0..n_spectra).collect::<Vec<_>>() {
        return Err(PipelineError::stage(
            "split",
            format!(
                "index files must partition 0..{} with no overlap",
                n_spectra.saturating_sub(1)
            ),
        ));
    }
    Ok(SplitAssignment {
        train_indices: train,
        test_indices: test,
        seed,
    })
}

/// Run the configured methods and assemble the report.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineReport, PipelineError> {
    config.validate()?;
    let total_start = Instant::now();
    let mut timing: BTreeMap<String, f64> = BTreeMap::new();
    let mut warnings: Vec<String> = Vec::new();

    // Load and split.
    let stage_start = Instant::now();
    let full =
        load_spectra(&config.data, config.layout).map_err(|e| PipelineError::stage("load", e))?;
    let pristine_target = full
        .target()
        .map(<[f64]>::to_vec)
        .ok_or_else(|| PipelineError::stage("load", "pipeline data needs a target column"))?;
    timing.insert("load".into(), stage_start.elapsed().as_secs_f64());

    let stage_start = Instant::now();
    let split = match &config.split {
        SplitSpec::Fraction(f) => stratified_split(&full, *f, config.seed)
            .map_err(|e| PipelineError::stage("split", e))?,
        SplitSpec::Files { train, test } => {
            read_split_files(train, test, full.n_spectra(), config.seed)?
        }
    };
    timing.insert("split".into(), stage_start.elapsed().as_secs_f64());

    // Test-target isolation audit: stages below only ever see the working
    // set, whose test targets are poisoned; evaluation reads the pristine
    // copy kept aside here.
    let working = if config.audit_test_isolation {
        let mut poisoned = pristine_target.clone();
        for &i in &split.test_indices {
            poisoned[i] = f64::NAN;
        }
        full.with_target(Some(poisoned))
    } else {
        full.clone()
    };

    let train_set = working.subset(&split.train_indices);
    let y_train = train_set.target().expect("target present").to_vec();
    let y_test: Vec<f64> = split
        .test_indices
        .iter()
        .map(|&i| pristine_target[i])
        .collect();
    let union_variance = variance(&pristine_target);
    if !(union_variance > 0.0) {
        return Err(PipelineError::stage("evaluate", "target variance is zero"));
    }

    // Basis selection and compression (B-spline methods only).
    let needs_bspline = config.methods.iter().any(|m| m.needs_bspline());
    let mut basis_summary = None;
    let mut loo_curve = Vec::new();
    let mut projection: Option<ProjectionMatrix> = None;
    let mut coefficient_matrix: Option<RowMatrix> = None;
    if needs_bspline {
        let stage_start = Instant::now();
        let max_order = *config.orders.iter().max().unwrap();
        let range = config
            .n_range
            .unwrap_or_else(|| default_size_range(working.n_wavelengths(), max_order));
        let selected = select_basis_size(&train_set, range, &config.orders, config.strategy)
            .map_err(|e| PipelineError::stage("basis", e))?;
        let basis = build_basis(
            working.wavelengths()[0],
            *working.wavelengths().last().unwrap(),
            selected.n_functions + 1 - selected.order,
            selected.order,
        )
        .map_err(|e| PipelineError::stage("basis", e))?;
        let r = projection_matrix(&basis, working.wavelengths())
            .map_err(|e| PipelineError::stage("basis", e))?;
        let compressed = compress(&r, &working).map_err(|e| PipelineError::stage("compress", e))?;
        basis_summary = Some(BasisSummary {
            order: basis.order(),
            intervals: basis.intervals(),
            n_functions: basis.n_functions(),
            w_min: basis.w_min(),
            w_max: basis.w_max(),
            total_loo: selected.loo,
        });
        loo_curve = selected.curve;
        projection = Some(r);
        coefficient_matrix = Some(compressed.coefficients);
        timing.insert("basis".into(), stage_start.elapsed().as_secs_f64());
    }

    let selection_config = SelectionConfig {
        mi: config.mi,
        max_size: config.max_size,
        min_delta: config.min_delta,
        backend: if config.mi_accel {
            NeighborBackend::KdTree
        } else {
            NeighborBackend::BruteForce
        },
    };

    // Feature spaces, scaled if requested.
    let bspline_space = coefficient_matrix.as_ref().map(|m| {
        if config.standardize {
            standardize_by_train(m, &split.train_indices)
        } else {
            identity_space(m.clone())
        }
    });
    let needs_raw = config
        .methods
        .iter()
        .any(|m| matches!(m, Method::MiRbfn | Method::Pcr | Method::Plsr));
    let raw_space = needs_raw.then(|| {
        if config.standardize {
            standardize_by_train(working.responses(), &split.train_indices)
        } else {
            identity_space(working.responses().clone())
        }
    });

    // Greedy selection per feature space.
    let stage_start = Instant::now();
    let mut selection_traces: BTreeMap<String, SelectionTrace> = BTreeMap::new();
    let run_selection = |space: &FeatureSpace,
                         label: &str,
                         warnings: &mut Vec<String>|
     -> Result<(Vec<usize>, SelectionTrace), PipelineError> {
        let train_features = space.features.select_rows(&split.train_indices);
        let trace = forward_backward(&train_features, &y_train, &selection_config)
            .map_err(|e| PipelineError::stage("select", e))?;
        let subset = if trace.final_subset.is_empty() {
            warnings.push(format!(
                "{label}: selection kept nothing; falling back to the single best-MI feature"
            ));
            let mut best = (0usize, f64::NEG_INFINITY);
            for f in 0..train_features.ncols() {
                let sample = JointSample::new(train_features.select_columns(&[f]), y_train.clone())
                    .map_err(|e| PipelineError::stage("select", e))?;
                let est =
                    mutual_information_with_backend(&sample, &config.mi, selection_config.backend)
                        .map_err(|e| PipelineError::stage("select", e))?;
                if est.nats > best.1 {
                    best = (f, est.nats);
                }
            }
            vec![best.0]
        } else {
            trace.final_subset.clone()
        };
        Ok((subset, trace))
    };

    let bspline_selection = match (&bspline_space, needs_bspline) {
        (Some(space), true) => {
            let (subset, trace) = run_selection(space, "bspline", &mut warnings)?;
            selection_traces.insert("bspline".into(), trace);
            Some(subset)
        }
        _ => None,
    };
    let raw_selection = if config.methods.contains(&Method::MiRbfn) {
        let space = raw_space.as_ref().expect("raw space built");
        let (subset, trace) = run_selection(space, "raw", &mut warnings)?;
        selection_traces.insert("raw".into(), trace);
        Some(subset)
    } else {
        None
    };
    timing.insert("selection".into(), stage_start.elapsed().as_secs_f64());

    // Wavelength ranges for the B-spline selection.
    let bspline_intervals = match (&projection, &bspline_selection) {
        (Some(r), Some(subset)) => {
            let ranges = subset
                .iter()
                .map(|&i| wavelength_range(r, i, config.epsilon))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| PipelineError::stage("ranges", e))?;
            Some(merge_ranges(&ranges))
        }
        _ => None,
    };

    // Per-method fitting and evaluation.
    let stage_start = Instant::now();
    let wavelengths = working.wavelengths().to_vec();
    let raw_train_stds = train_column_stds(working.responses(), &split.train_indices);
    let mut methods_seen = Vec::new();
    let mut method_reports = Vec::new();
    for &method in &config.methods {
        if methods_seen.contains(&method) {
            warnings.push(format!("method {method} listed twice; running once"));
            continue;
        }
        methods_seen.push(method);
        let report = run_method(
            method,
            config,
            &split,
            &y_train,
            &y_test,
            union_variance,
            &wavelengths,
            &raw_train_stds,
            bspline_space.as_ref(),
            raw_space.as_ref(),
            bspline_selection.as_deref(),
            raw_selection.as_deref(),
            bspline_intervals.as_deref(),
            projection.as_ref(),
            &mut warnings,
        )?;
        method_reports.push(report);
    }
    timing.insert("models".into(), stage_start.elapsed().as_secs_f64());

    // Export artifacts for the selected coefficient variables.
    let selected_projection_rows = match (&projection, &bspline_selection) {
        (Some(r), Some(subset)) => Some(ProjectionRows {
            variables: subset.clone(),
            rows: subset.iter().map(|&i| r.row(i).to_vec()).collect(),
        }),
        _ => None,
    };
    let selected_coefficients = match (&coefficient_matrix, &bspline_selection) {
        (Some(m), Some(subset)) => Some(SelectedCoefficients {
            variables: subset.clone(),
            target: pristine_target.clone(),
            coefficients: (0..m.nrows())
                .map(|i| subset.iter().map(|&j| m.get(i, j)).collect())
                .collect(),
        }),
        _ => None,
    };

    timing.insert("total".into(), total_start.elapsed().as_secs_f64());
    Ok(PipelineReport {
        schema: REPORT_SCHEMA,
        wavelengths,
        split: SplitSummary {
            seed: split.seed,
            train_indices: split.train_indices,
            test_indices: split.test_indices,
        },
        basis: basis_summary,
        loo_curve,
        selection: selection_traces,
        selected_projection_rows,
        selected_coefficients,
        methods: method_reports,
        warnings,
        timing,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_method(
    method: Method,
    config: &PipelineConfig,
    split: &SplitAssignment,
    y_train: &[f64],
    y_test: &[f64],
    union_variance: f64,
    wavelengths: &[f64],
    raw_train_stds: &[f64],
    bspline_space: Option<&FeatureSpace>,
    raw_space: Option<&FeatureSpace>,
    bspline_selection: Option<&[usize]>,
    raw_selection: Option<&[usize]>,
    bspline_intervals: Option<&[(f64, f64)]>,
    projection: Option<&ProjectionMatrix>,
    warnings: &mut Vec<String>,
) -> Result<MethodReport, PipelineError> {
    let name = method.to_string();
    let (space, subset): (&FeatureSpace, Vec<usize>) = match method {
        Method::BsplineMiRbfn | Method::BsplineMiLr => (
            bspline_space.expect("bspline space built"),
            bspline_selection.expect("bspline selection ran").to_vec(),
        ),
        Method::MiRbfn => (
            raw_space.expect("raw space built"),
            raw_selection.expect("raw selection ran").to_vec(),
        ),
        Method::Pcr | Method::Plsr => {
            let space = raw_space.expect("raw space built");
            (space, (0..space.features.ncols()).collect())
        }
    };
    let x_train = space
        .features
        .select_rows(&split.train_indices)
        .select_columns(&subset);
    let x_test = space
        .features
        .select_rows(&split.test_indices)
        .select_columns(&subset);

    let mut meta = BTreeMap::new();
    let mut linear_profile = None;
    let (predictions, variables, n_variables, intervals) = match method {
        Method::BsplineMiRbfn | Method::MiRbfn => {
            let cv = cv_select_meta(&x_train, y_train, &config.rbfn_grid)
                .map_err(|e| PipelineError::stage("cv", e))?;
            for w in &cv.warnings {
                warnings.push(format!("{name}: {w}"));
            }
            let fit = fit_rbfn(
                &x_train,
                y_train,
                cv.neurons,
                cv.width_scale,
                config.rbfn_grid.seed,
            )
            .map_err(|e| PipelineError::stage("train", e))?;
            for w in &fit.warnings {
                warnings.push(format!("{name}: {w}"));
            }
            meta.insert("neurons".into(), json!(cv.neurons));
            meta.insert("width_scale".into(), json!(cv.width_scale));
            let predictions = predict_rbfn(&fit.model, &x_test)
                .map_err(|e| PipelineError::stage("predict", e))?;
            let intervals = match method {
                Method::BsplineMiRbfn => bspline_intervals.expect("ranges computed").to_vec(),
                _ => {
                    let point_ranges: Vec<bspline::WavelengthRange> = subset
                        .iter()
                        .map(|&j| bspline::WavelengthRange {
                            variable_index: j,
                            lower: wavelengths[j],
                            upper: wavelengths[j],
                            epsilon: config.epsilon,
                        })
                        .collect();
                    merge_ranges(&point_ranges)
                }
            };
            (predictions, subset.clone(), subset.len(), intervals)
        }
        Method::BsplineMiLr => {
            let model =
                fit_linear(&x_train, y_train).map_err(|e| PipelineError::stage("train", e))?;
            if model.rank_deficient {
                warnings.push(format!("{name}: rank-deficient design, minimum-norm fit"));
            }
            let predictions = model
                .predict(&x_test)
                .map_err(|e| PipelineError::stage("predict", e))?;
            // Compose the model with the projection to express it on
            // standardized raw inputs: slope_j = sum_i c_i/(sigma_i s_i) R_ij,
            // then multiply by the raw variable's training std.
            let r = projection.expect("projection built");
            let mut profile = vec![0.0; wavelengths.len()];
            for (t, &i) in subset.iter().enumerate() {
                let weight = model.coefficients[t] / (model.input_stds[t] * space.scale[i]);
                for (j, p) in profile.iter_mut().enumerate() {
                    *p += weight * r.row(i)[j];
                }
            }
            for (p, s) in profile.iter_mut().zip(raw_train_stds) {
                *p *= s;
            }
            linear_profile = Some(profile);
            (
                predictions,
                subset.clone(),
                subset.len(),
                bspline_intervals.expect("ranges computed").to_vec(),
            )
        }
        Method::Pcr | Method::Plsr => {
            let kind = if method == Method::Pcr {
                LatentKind::Pcr
            } else {
                LatentKind::Plsr
            };
            let max_components = (split.train_indices.len() - 1).min(x_train.ncols());
            let candidates: Vec<usize> = config
                .latent_components
                .iter()
                .copied()
                .filter(|&c| c >= 1 && c <= max_components)
                .collect();
            if candidates.is_empty() {
                return Err(PipelineError::stage(
                    "cv",
                    format!("no feasible component counts below {max_components}"),
                ));
            }
            let cv = cv_select_components(
                &x_train,
                y_train,
                kind,
                &candidates,
                config.rbfn_grid.folds,
                config.rbfn_grid.seed,
            )
            .map_err(|e| PipelineError::stage("cv", e))?;
            for w in &cv.warnings {
                warnings.push(format!("{name}: {w}"));
            }
            let model = fit_latent(&x_train, y_train, kind, cv.n_components)
                .map_err(|e| PipelineError::stage("train", e))?;
            if model.truncated {
                warnings.push(format!(
                    "{name}: component count truncated to rank {}",
                    model.n_components
                ));
            }
            meta.insert("components".into(), json!(model.n_components));
            let predictions = model
                .linear
                .predict(&x_test)
                .map_err(|e| PipelineError::stage("predict", e))?;
            let intervals =
                important_wavelength_intervals(&model.linear, wavelengths, config.epsilon)?;
            linear_profile = Some(model.linear.coefficients.clone());
            (predictions, Vec::new(), model.n_components, intervals)
        }
    };

    let nmse_test = nmse(y_test, &predictions, union_variance)
        .map_err(|e| PipelineError::stage("evaluate", e))?;
    Ok(MethodReport {
        name,
        variables,
        n_variables,
        intervals,
        meta,
        nmse_test,
        linear_profile,
    })
}

fn important_wavelength_intervals(
    model: &crate::models::LinearModel,
    wavelengths: &[f64],
    epsilon: f64,
) -> Result<Vec<(f64, f64)>, PipelineError> {
    crate::models::important_wavelengths_linear(model, wavelengths, epsilon)
        .map_err(|e| PipelineError::stage("ranges", e))
}

/// Population std of each column over the training rows.
fn train_column_stds(features: &RowMatrix, train: &[usize]) -> Vec<f64> {
    let q = features.ncols();
    let mut means = vec![0.0; q];
    for &i in train {
        for (m, v) in means.iter_mut().zip(features.row(i)) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= train.len() as f64;
    }
    let mut vars = vec![0.0; q];
    for &i in train {
        for j in 0..q {
            let d = features.get(i, j) - means[j];
            vars[j] += d * d;
        }
    }
    vars.iter()
        .map(|v| (v / train.len() as f64).sqrt())
        .collect()
}

/// Serialize a report as pretty JSON.
pub fn report_to_json(report: &PipelineReport) -> Result<String, PipelineError> {
    serde_json::to_string_pretty(report)
        .map_err(|e| PipelineError::runtime(format!("serializing report: {e}")))
}

/// Parse a report document.
pub fn report_from_json(text: &str) -> Result<PipelineReport, PipelineError> {
    let report: PipelineReport = serde_json::from_str(text)
        .map_err(|e| PipelineError::runtime(format!("parsing report: {e}")))?;
    if report.schema != REPORT_SCHEMA {
        return Err(PipelineError::runtime(format!(
            "unsupported report schema {}",
            report.schema
        )));
    }
    Ok(report)
}
