//! Pipeline configuration: a flat `key = value` text format (one pair per
//! line, `#` comments, lists comma-separated) mirrored by an in-memory
//! struct carrying the documented defaults.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::bspline::SearchStrategy;
use crate::mi::MiEstimatorConfig;
use crate::models::CvGrid;
use crate::spectra::CsvLayout;

use super::PipelineError;

/// Prediction methods the pipeline can run and compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    BsplineMiRbfn,
    BsplineMiLr,
    MiRbfn,
    Pcr,
    Plsr,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::BsplineMiRbfn,
        Method::BsplineMiLr,
        Method::MiRbfn,
        Method::Pcr,
        Method::Plsr,
    ];

    pub fn needs_bspline(self) -> bool {
        matches!(self, Method::BsplineMiRbfn | Method::BsplineMiLr)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Method::BsplineMiRbfn => "bspline_mi_rbfn",
            Method::BsplineMiLr => "bspline_mi_lr",
            Method::MiRbfn => "mi_rbfn",
            Method::Pcr => "pcr",
            Method::Plsr => "plsr",
        };
        f.write_str(name)
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "bspline_mi_rbfn" => Ok(Method::BsplineMiRbfn),
            "bspline_mi_lr" => Ok(Method::BsplineMiLr),
            "mi_rbfn" => Ok(Method::MiRbfn),
            "pcr" => Ok(Method::Pcr),
            "plsr" => Ok(Method::Plsr),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

/// How the train/test split is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitSpec {
    Fraction(f64),
    Files { train: PathBuf, test: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub data: PathBuf,
    pub layout: CsvLayout,
    pub split: SplitSpec,
    pub seed: u64,
    pub standardize: bool,
    pub methods: Vec<Method>,
    pub orders: Vec<usize>,
    /// Basis-size search range; `None` derives `[N/20, N/2]` from the data.
    pub n_range: Option<(usize, usize)>,
    pub strategy: SearchStrategy,
    /// Precision ratio for wavelength ranges and linear importance.
    pub epsilon: f64,
    pub mi: MiEstimatorConfig,
    pub mi_accel: bool,
    pub max_size: Option<usize>,
    pub min_delta: f64,
    pub rbfn_grid: CvGrid,
    pub latent_components: Vec<usize>,
    /// Poison test targets until evaluation to audit test-set isolation.
    pub audit_test_isolation: bool,
    pub out_report: Option<PathBuf>,
}

impl PipelineConfig {
    /// Defaults for a data file: epsilon 0.01, k = 6, 3 stratified folds,
    /// spline orders {4, 5}, coarse-to-fine size search.
    pub fn new(data: PathBuf) -> Self {
        Self {
            data,
            layout: CsvLayout::TargetFirstColumn,
            split: SplitSpec::Fraction(0.25),
            seed: 42,
            standardize: false,
            methods: Method::ALL.to_vec(),
            orders: vec![4, 5],
            n_range: None,
            strategy: SearchStrategy::CoarseToFine,
            epsilon: 0.01,
            mi: MiEstimatorConfig {
                k: 6,
                jitter_scale: 1e-10,
                seed: 42,
            },
            mi_accel: false,
            max_size: None,
            min_delta: 0.0,
            rbfn_grid: CvGrid {
                seed: 42,
                ..CvGrid::default()
            },
            latent_components: (1..=20).collect(),
            audit_test_isolation: false,
            out_report: None,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.methods.is_empty() {
            return Err(config_err("methods list is empty"));
        }
        if self.orders.is_empty() || self.orders.contains(&0) {
            return Err(config_err("orders must be positive integers"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(config_err(format!(
                "epsilon must be in (0,1), got {}",
                self.epsilon
            )));
        }
        if let SplitSpec::Fraction(f) = self.split {
            if !(f > 0.0 && f < 1.0) {
                return Err(config_err(format!(
                    "test_fraction must be in (0,1), got {f}"
                )));
            }
        }
        if let Some((lo, hi)) = self.n_range {
            if lo > hi {
                return Err(config_err(format!("empty basis size range [{lo}, {hi}]")));
            }
            let max_order = *self.orders.iter().max().unwrap();
            if lo <= max_order {
                return Err(config_err(format!(
                    "n_min must exceed the largest order ({max_order}), got {lo}"
                )));
            }
        }
        if self.mi.k == 0 {
            return Err(config_err("mi_k must be at least 1"));
        }
        if self.latent_components.is_empty()
            && self
                .methods
                .iter()
                .any(|m| matches!(m, Method::Pcr | Method::Plsr))
        {
            return Err(config_err("latent_components is empty"));
        }
        Ok(())
    }
}

fn config_err(message: impl Into<String>) -> PipelineError {
    PipelineError::Config(message.into())
}

/// Parse the flat key-value config format.
pub fn parse_config(text: &str) -> Result<PipelineConfig, PipelineError> {
    let mut data: Option<PathBuf> = None;
    let mut pairs: Vec<(usize, String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(config_err(format!(
                "line {}: expected 'key = value'",
                idx + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key == "data" {
            data = Some(PathBuf::from(&value));
        }
        pairs.push((idx + 1, key, value));
    }
    let data = data.ok_or_else(|| config_err("missing required key 'data'"))?;
    let mut config = PipelineConfig::new(data);

    // The master seed feeds the stage-specific defaults, so resolve it before
    // the per-stage overrides regardless of key order in the file.
    if let Some((line, _, value)) = pairs.iter().find(|(_, k, _)| k == "seed") {
        let seed: u64 = value
            .parse()
            .map_err(|_| config_err(format!("line {line}: bad seed '{value}'")))?;
        config.seed = seed;
        config.mi.seed = seed;
        config.rbfn_grid.seed = seed;
    }

    let mut train_file: Option<PathBuf> = None;
    let mut test_file: Option<PathBuf> = None;
    let mut n_min: Option<usize> = None;
    let mut n_max: Option<usize> = None;
    let mut seen = BTreeSet::new();
    for (line, key, value) in pairs {
        let at = |message: String| config_err(format!("line {line}: {message}"));
        if !seen.insert(key.clone()) {
            return Err(at(format!("duplicate key '{key}'")));
        }
        match key.as_str() {
            "data" => {}
            "layout" => {
                config.layout = match value.as_str() {
                    "target_first_column" => CsvLayout::TargetFirstColumn,
                    "no_target" => CsvLayout::NoTarget,
                    other => return Err(at(format!("unknown layout '{other}'"))),
                }
            }
            "test_fraction" => {
                config.split = SplitSpec::Fraction(
                    value
                        .parse()
                        .map_err(|_| at(format!("bad fraction '{value}'")))?,
                )
            }
            "train_indices" => train_file = Some(PathBuf::from(&value)),
            "test_indices" => test_file = Some(PathBuf::from(&value)),
            "seed" => {} // resolved in the pre-pass above
            "standardize" => config.standardize = parse_bool(&value).map_err(at)?,
            "methods" => {
                config.methods = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.parse::<Method>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(at)?
            }
            "orders" => config.orders = parse_list(&value).map_err(at)?,
            "n_min" => {
                n_min = Some(
                    value
                        .parse()
                        .map_err(|_| at(format!("bad n_min '{value}'")))?,
                )
            }
            "n_max" => {
                n_max = Some(
                    value
                        .parse()
                        .map_err(|_| at(format!("bad n_max '{value}'")))?,
                )
            }
            "strategy" => {
                config.strategy = match value.as_str() {
                    "exhaustive" => SearchStrategy::Exhaustive,
                    "coarse_to_fine" => SearchStrategy::CoarseToFine,
                    other => return Err(at(format!("unknown strategy '{other}'"))),
                }
            }
            "epsilon" => {
                config.epsilon = value
                    .parse()
                    .map_err(|_| at(format!("bad epsilon '{value}'")))?
            }
            "mi_k" => {
                config.mi.k = value
                    .parse()
                    .map_err(|_| at(format!("bad mi_k '{value}'")))?
            }
            "mi_seed" => {
                config.mi.seed = value
                    .parse()
                    .map_err(|_| at(format!("bad mi_seed '{value}'")))?
            }
            "mi_jitter" => {
                config.mi.jitter_scale = value
                    .parse()
                    .map_err(|_| at(format!("bad mi_jitter '{value}'")))?
            }
            "mi_accel" => config.mi_accel = parse_bool(&value).map_err(at)?,
            "max_size" => {
                config.max_size = if value.is_empty() {
                    None
                } else {
                    Some(
                        value
                            .parse()
                            .map_err(|_| at(format!("bad max_size '{value}'")))?,
                    )
                }
            }
            "min_delta" => {
                config.min_delta = value
                    .parse()
                    .map_err(|_| at(format!("bad min_delta '{value}'")))?
            }
            "rbfn_neurons" => config.rbfn_grid.neuron_counts = parse_list(&value).map_err(at)?,
            "rbfn_width_scales" => {
                config.rbfn_grid.width_scales = parse_list(&value).map_err(at)?
            }
            "cv_seed" => {
                config.rbfn_grid.seed = value
                    .parse()
                    .map_err(|_| at(format!("bad cv_seed '{value}'")))?
            }
            "latent_components" => config.latent_components = parse_list(&value).map_err(at)?,
            "audit_test_isolation" => {
                config.audit_test_isolation = parse_bool(&value).map_err(at)?
            }
            "out_report" => config.out_report = Some(PathBuf::from(&value)),
            other => return Err(at(format!("unknown key '{other}'"))),
        }
    }

    match (train_file, test_file) {
        (Some(train), Some(test)) => config.split = SplitSpec::Files { train, test },
        (None, None) => {}
        _ => {
            return Err(config_err(
                "train_indices and test_indices must be given together",
            ))
        }
    }
    match (n_min, n_max) {
        (Some(lo), Some(hi)) => config.n_range = Some((lo, hi)),
        (None, None) => {}
        _ => return Err(config_err("n_min and n_max must be given together")),
    }
    config.validate()?;
    Ok(config)
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected boolean, got '{other}'")),
    }
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| format!("bad list entry '{s}'")))
        .collect()
}
