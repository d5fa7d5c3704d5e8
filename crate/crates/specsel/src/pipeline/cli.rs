//! Command-line interface. Exit codes: 0 success, 2 configuration or usage
//! error, 1 runtime error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::{
    benchmark_complexity, export_plot_data, io, parse_config, report_from_json, report_to_json,
    run_pipeline, PipelineError, PlotData,
};
use crate::bspline::{build_basis, compress, projection_matrix, select_basis_size, SearchStrategy};
use crate::linalg::variance;
use crate::mi::MiEstimatorConfig;
use crate::models::{
    cv_select_components, cv_select_meta, fit_latent, fit_linear, fit_rbfn, nmse, CvGrid,
    LatentKind, ModelKind, SavedModel,
};
use crate::selection::{forward_backward, SelectionConfig};
use crate::spectra::{load_spectra, CsvLayout};

#[derive(Debug, Parser)]
#[command(
    name = "specsel",
    version,
    about = "Spectral variable selection: B-spline compression, kNN mutual information, \
             forward-backward search and RBFN/linear prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compress spectra onto a B-spline basis (size chosen by leave-one-out).
    Compress(CompressArgs),
    /// Forward-backward mutual-information selection on a feature table.
    Select(SelectArgs),
    /// Fit a prediction model on a feature table.
    Train(TrainArgs),
    /// Predict with a trained model document.
    Predict(PredictArgs),
    /// Normalized mean squared error of predictions against targets.
    Evaluate(EvaluateArgs),
    /// Run the full compress/select/train/evaluate pipeline from a config.
    Pipeline(PipelineArgs),
    /// Time compressed vs raw variable selection across sizes.
    Benchmark(BenchmarkArgs),
    /// Export plot-ready CSV from a pipeline report.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
struct CompressArgs {
    /// Input spectra CSV.
    #[arg(long)]
    data: PathBuf,
    /// CSV layout.
    #[arg(long, default_value = "target_first_column")]
    layout: String,
    /// Candidate spline orders, comma separated.
    #[arg(long, default_value = "4,5", value_delimiter = ',')]
    orders: Vec<usize>,
    /// Fixed basis size (skips the search; needs exactly one order).
    #[arg(long)]
    n: Option<usize>,
    /// Lower end of the size search range (default N/20).
    #[arg(long)]
    n_min: Option<usize>,
    /// Upper end of the size search range (default N/2).
    #[arg(long)]
    n_max: Option<usize>,
    /// Search strategy: exhaustive or coarse_to_fine.
    #[arg(long, default_value = "coarse_to_fine")]
    strategy: String,
    /// Write the coefficient table here.
    #[arg(long)]
    out_coefficients: Option<PathBuf>,
    /// Write the projection matrix here.
    #[arg(long)]
    out_projection: Option<PathBuf>,
    /// Write the size-search curve here.
    #[arg(long)]
    out_loo_curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelectArgs {
    /// Feature CSV with a leading target column.
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = 6)]
    mi_k: usize,
    #[arg(long, default_value_t = 0)]
    mi_seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    mi_jitter: f64,
    /// Use the k-d tree neighbor search.
    #[arg(long)]
    mi_accel: bool,
    #[arg(long)]
    max_size: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    min_delta: f64,
    /// Write the audit trace CSV here.
    #[arg(long)]
    out_trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Feature CSV with a leading target column.
    #[arg(long)]
    features: PathBuf,
    /// Model kind: rbfn, lr, pcr or plsr.
    #[arg(long)]
    model: String,
    /// Feature columns to train on (default: all).
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<usize>>,
    /// RBFN neuron-count candidates.
    #[arg(long, default_value = "2,3,5,8,12,20,30", value_delimiter = ',')]
    neurons: Vec<usize>,
    /// RBFN width-scale candidates.
    #[arg(long, default_value = "0.5,1,2,4,8", value_delimiter = ',')]
    width_scales: Vec<f64>,
    /// Component-count candidates for pcr/plsr (default 1..=20).
    #[arg(long, value_delimiter = ',')]
    components: Option<Vec<usize>>,
    #[arg(long, default_value_t = 3)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    cv_seed: u64,
    /// Output model document (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Trained model document.
    #[arg(long)]
    model: PathBuf,
    /// Feature CSV (target column optional and ignored).
    #[arg(long)]
    data: PathBuf,
    /// Output predictions CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Feature CSV with the true targets in its leading column.
    #[arg(long)]
    data: PathBuf,
    /// Predictions CSV.
    #[arg(long)]
    pred: PathBuf,
    /// Normalization variance (default: population variance of the targets).
    #[arg(long)]
    variance: Option<f64>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Key-value config file.
    #[arg(long)]
    config: PathBuf,
    /// Report destination (overrides the config's out_report).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    /// Problem sizes as N:n:P triples, comma separated.
    #[arg(long, default_value = "400:80:40,400:80:80,400:80:160")]
    sizes: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the timing table as CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Pipeline report (JSON).
    #[arg(long)]
    report: PathBuf,
    /// One of: coefficient_rows, loo_curve, selected_coefficients,
    /// linear_coefficients.
    #[arg(long)]
    what: String,
    /// Method name for linear_coefficients (default: first linear method).
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

/// Entry point used by `main`; parses real process arguments.
pub fn run() -> i32 {
    cli(std::env::args_os())
}

/// Parse `argv` and execute; returns the process exit code.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(parsed) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Compress(args) => cmd_compress(args),
        Command::Select(args) => cmd_select(args),
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Pipeline(args) => cmd_pipeline(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Export(args) => cmd_export(args),
    }
}

fn parse_layout(value: &str) -> Result<CsvLayout, PipelineError> {
    match value {
        "target_first_column" => Ok(CsvLayout::TargetFirstColumn),
        "no_target" => Ok(CsvLayout::NoTarget),
        other => Err(PipelineError::Config(format!("unknown layout '{other}'"))),
    }
}

fn parse_strategy(value: &str) -> Result<SearchStrategy, PipelineError> {
    match value {
        "exhaustive" => Ok(SearchStrategy::Exhaustive),
        "coarse_to_fine" => Ok(SearchStrategy::CoarseToFine),
        other => Err(PipelineError::Config(format!("unknown strategy '{other}'"))),
    }
}

fn cmd_compress(args: CompressArgs) -> Result<(), PipelineError> {
    let layout = parse_layout(&args.layout)?;
    if args.orders.is_empty() || args.orders.contains(&0) {
        return Err(PipelineError::Config("orders must be positive".into()));
    }
    let set =
        load_spectra(&args.data, layout).map_err(|e| PipelineError::runtime(e.to_string()))?;
    let w_min = set.wavelengths()[0];
    let w_max = *set.wavelengths().last().unwrap();

    let (n, order, curve) = if let Some(n) = args.n {
        if args.orders.len() != 1 {
            return Err(PipelineError::Config(
                "--n needs exactly one order in --orders".into(),
            ));
        }
        (n, args.orders[0], Vec::new())
    } else {
        let max_order = *args.orders.iter().max().unwrap();
        let lo = args
            .n_min
            .unwrap_or((set.n_wavelengths() / 20).max(max_order + 1));
        let hi = args.n_max.unwrap_or((set.n_wavelengths() / 2).max(lo));
        let strategy = parse_strategy(&args.strategy)?;
        let selection = select_basis_size(&set, (lo, hi), &args.orders, strategy)
            .map_err(|e| PipelineError::runtime(e.to_string()))?;
        println!(
            "selected basis: n = {}, order = {}, total loo = {:.6e}",
            selection.n_functions, selection.order, selection.loo
        );
        (selection.n_functions, selection.order, selection.curve)
    };

    let basis = build_basis(w_min, w_max, n + 1 - order, order)
        .map_err(|e| PipelineError::runtime(e.to_string()))?;
    let r = projection_matrix(&basis, set.wavelengths())
        .map_err(|e| PipelineError::runtime(e.to_string()))?;
    let compressed = compress(&r, &set).map_err(|e| PipelineError::runtime(e.to_string()))?;
    println!(
        "basis (order = {}, intervals = {}, w_min = {}, w_max = {}): {} coefficients per spectrum",
        basis.order(),
        basis.intervals(),
        basis.w_min(),
        basis.w_max(),
        basis.n_functions()
    );

    if let Some(path) = &args.out_coefficients {
        let names: Vec<String> = (0..basis.n_functions()).map(|i| format!("c{i}")).collect();
        let text = io::format_features(&names, &compressed.coefficients, set.target());
        io::write_file(path, &text)?;
        println!("wrote coefficients to {}", path.display());
    }
    if let Some(path) = &args.out_projection {
        let mut text = String::from("variable");
        for w in set.wavelengths() {
            text.push_str(&format!(",{w}"));
        }
        text.push('\n');
        for i in 0..r.n_functions() {
            text.push_str(&format!("{i}"));
            for v in r.row(i) {
                text.push_str(&format!(",{v}"));
            }
            text.push('\n');
        }
        io::write_file(path, &text)?;
        println!("wrote projection matrix to {}", path.display());
    }
    if let Some(path) = &args.out_loo_curve {
        let mut text = String::from("n_functions,order,loo\n");
        for point in &curve {
            text.push_str(&format!(
                "{},{},{}\n",
                point.n_functions, point.order, point.loo
            ));
        }
        io::write_file(path, &text)?;
        println!("wrote loo curve to {}", path.display());
    }
    Ok(())
}

fn cmd_select(args: SelectArgs) -> Result<(), PipelineError> {
    let table = io::parse_features(&io::read_to_string(&args.features)?)?;
    let target = table
        .target
        .ok_or_else(|| PipelineError::runtime("feature file needs a target column"))?;
    let config = SelectionConfig {
        mi: MiEstimatorConfig {
            k: args.mi_k,
            jitter_scale: args.mi_jitter,
            seed: args.mi_seed,
        },
        max_size: args.max_size,
        min_delta: args.min_delta,
        backend: if args.mi_accel {
            crate::mi::NeighborBackend::KdTree
        } else {
            crate::mi::NeighborBackend::BruteForce
        },
    };
    let trace = forward_backward(&table.features, &target, &config)
        .map_err(|e| PipelineError::runtime(e.to_string()))?;
    let names: Vec<&str> = trace
        .final_subset
        .iter()
        .map(|&i| table.names[i].as_str())
        .collect();
    println!(
        "selected {} features (final MI {:.4} nats): {}",
        trace.final_subset.len(),
        trace.final_mi,
        names.join(", ")
    );
    println!(
        "indices: {}",
        trace
            .final_subset
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(",")
    );
    if let Some(path) = &args.out_trace {
        io::write_file(path, &trace.to_csv())?;
        println!("wrote trace to {}", path.display());
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), PipelineError> {
    let table = io::parse_features(&io::read_to_string(&args.features)?)?;
    let target = table
        .target
        .ok_or_else(|| PipelineError::runtime("feature file needs a target column"))?;
    let columns: Vec<usize> = args
        .columns
        .unwrap_or_else(|| (0..table.features.ncols()).collect());
    if let Some(&bad) = columns.iter().find(|&&c| c >= table.features.ncols()) {
        return Err(PipelineError::Config(format!(
            "column {bad} out of range ({} features)",
            table.features.ncols()
        )));
    }
    let x = table.features.select_columns(&columns);

    let model = match args.model.as_str() {
        "rbfn" => {
            let grid = CvGrid {
                neuron_counts: args.neurons.clone(),
                width_scales: args.width_scales.clone(),
                folds: args.folds,
                seed: args.cv_seed,
            };
            let cv = cv_select_meta(&x, &target, &grid)
                .map_err(|e| PipelineError::runtime(e.to_string()))?;
            println!(
                "cross-validation picked M = {}, width_scale = {}",
                cv.neurons, cv.width_scale
            );
            let fit = fit_rbfn(&x, &target, cv.neurons, cv.width_scale, args.cv_seed)
                .map_err(|e| PipelineError::runtime(e.to_string()))?;
            for w in &fit.warnings {
                eprintln!("warning: {w}");
            }
            ModelKind::Rbfn(fit.model)
        }
        "lr" => {
            let model =
                fit_linear(&x, &target).map_err(|e| PipelineError::runtime(e.to_string()))?;
            if model.rank_deficient {
                eprintln!("warning: rank-deficient design, minimum-norm fit");
            }
            ModelKind::Linear(model)
        }
        "pcr" | "plsr" => {
            let kind = if args.model == "pcr" {
                LatentKind::Pcr
            } else {
                LatentKind::Plsr
            };
            let max_c = (x.nrows() - 1).min(x.ncols());
            let candidates: Vec<usize> = args
                .components
                .unwrap_or_else(|| (1..=max_c.min(20)).collect())
                .into_iter()
                .filter(|&c| c >= 1 && c <= max_c)
                .collect();
            if candidates.is_empty() {
                return Err(PipelineError::Config("no feasible component counts".into()));
            }
            let cv = cv_select_components(&x, &target, kind, &candidates, args.folds, args.cv_seed)
                .map_err(|e| PipelineError::runtime(e.to_string()))?;
            println!("cross-validation picked {} components", cv.n_components);
            let model = fit_latent(&x, &target, kind, cv.n_components)
                .map_err(|e| PipelineError::runtime(e.to_string()))?;
            ModelKind::Latent(model)
        }
        other => {
            return Err(PipelineError::Config(format!(
                "unknown model '{other}' (expected rbfn, lr, pcr or plsr)"
            )))
        }
    };

    let saved = SavedModel::new(columns, model);
    let json = serde_json::to_string_pretty(&saved)
        .map_err(|e| PipelineError::runtime(format!("serializing model: {e}")))?;
    io::write_file(&args.out, &json)?;
    println!("wrote model to {}", args.out.display());
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), PipelineError> {
    let json = io::read_to_string(&args.model)?;
    let saved: SavedModel = serde_json::from_str(&json)
        .map_err(|e| PipelineError::runtime(format!("parsing model: {e}")))?;
    if saved.schema != SavedModel::SCHEMA {
        return Err(PipelineError::runtime(format!(
            "unsupported model schema {}",
            saved.schema
        )));
    }
    let table = io::parse_features(&io::read_to_string(&args.data)?)?;
    let predictions = saved
        .predict(&table.features)
        .map_err(|e| PipelineError::runtime(e.to_string()))?;
    io::write_file(&args.out, &io::format_predictions(&predictions))?;
    println!(
        "wrote {} predictions to {}",
        predictions.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), PipelineError> {
    let table = io::parse_features(&io::read_to_string(&args.data)?)?;
    let target = table
        .target
        .ok_or_else(|| PipelineError::runtime("data file needs a target column"))?;
    let predictions = io::parse_predictions(&io::read_to_string(&args.pred)?)?;
    let norm = args.variance.unwrap_or_else(|| variance(&target));
    let value =
        nmse(&target, &predictions, norm).map_err(|e| PipelineError::runtime(e.to_string()))?;
    println!("NMSE {value}");
    Ok(())
}

fn cmd_pipeline(args: PipelineArgs) -> Result<(), PipelineError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| PipelineError::Config(format!("reading {}: {e}", args.config.display())))?;
    let mut config = parse_config(&text)?;
    if let Some(out) = args.out {
        config.out_report = Some(out);
    }
    let report = run_pipeline(&config)?;

    println!("{:<18} {:>10} {:>12}", "method", "variables", "NMSE(test)");
    for m in &report.methods {
        println!("{:<18} {:>10} {:>12.4}", m.name, m.n_variables, m.nmse_test);
    }
    if let Some(basis) = &report.basis {
        println!(
            "basis: order {} with {} functions over [{}, {}]",
            basis.order, basis.n_functions, basis.w_min, basis.w_max
        );
    }
    for m in &report.methods {
        if !m.intervals.is_empty() {
            let intervals: Vec<String> = m
                .intervals
                .iter()
                .map(|(lo, hi)| format!("[{lo:.0}, {hi:.0}]"))
                .collect();
            println!("{}: wavelength intervals {}", m.name, intervals.join(" "));
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }

    let out = config
        .out_report
        .unwrap_or_else(|| PathBuf::from("report.json"));
    io::write_file(&out, &report_to_json(&report)?)?;
    println!("wrote report to {}", out.display());
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<(), PipelineError> {
    let sizes: Vec<(usize, usize, usize)> = args
        .sizes
        .split(',')
        .map(|triple| {
            let parts: Vec<&str> = triple.trim().split(':').collect();
            if parts.len() != 3 {
                return Err(PipelineError::Config(format!(
                    "size '{triple}' is not an N:n:P triple"
                )));
            }
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| PipelineError::Config(format!("bad size component '{s}'")))
            };
            Ok((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?))
        })
        .collect::<Result<_, _>>()?;

    let rows = benchmark_complexity(&sizes, args.seed)?;
    println!(
        "{:>6} {:>6} {:>6} {:>14} {:>14} {:>8} {:>12}",
        "N", "n", "P", "compressed(s)", "raw(s)", "ratio", "1/P+(n/N)^3"
    );
    let mut csv = String::from(
        "n_wavelengths,n_functions,n_spectra,compressed_seconds,raw_seconds,ratio,cost_inequality\n",
    );
    for row in &rows {
        println!(
            "{:>6} {:>6} {:>6} {:>14.4} {:>14.4} {:>8.3} {:>12.4}",
            row.n_wavelengths,
            row.n_functions,
            row.n_spectra,
            row.compressed_seconds,
            row.raw_seconds,
            row.ratio,
            row.cost_inequality
        );
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.n_wavelengths,
            row.n_functions,
            row.n_spectra,
            row.compressed_seconds,
            row.raw_seconds,
            row.ratio,
            row.cost_inequality
        ));
    }
    if let Some(path) = &args.out {
        io::write_file(path, &csv)?;
        println!("wrote timing table to {}", path.display());
    }
    Ok(())
}

fn cmd_export(args: ExportArgs) -> Result<(), PipelineError> {
    let what: PlotData = args.what.parse().map_err(PipelineError::Config)?;
    let report = report_from_json(&io::read_to_string(&args.report)?)?;
    export_plot_data(&report, what, args.method.as_deref(), &args.out)?;
    println!("wrote {} to {}", args.what, args.out.display());
    Ok(())
}
