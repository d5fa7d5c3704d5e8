//! Plot-ready CSV exports from a pipeline report.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::io::write_file;
use super::{PipelineError, PipelineReport};

/// Which report artifact to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotData {
    /// Normalized projection-matrix rows of the selected variables, one CSV
    /// row per wavelength.
    CoefficientRows,
    /// The basis-size search curve: one row per evaluated candidate.
    LooCurve,
    /// Selected coefficient values per spectrum, target alongside.
    SelectedCoefficients,
    /// Normalized absolute coefficients of a linear method over wavelength.
    LinearCoefficients,
}

impl FromStr for PlotData {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "coefficient_rows" => Ok(PlotData::CoefficientRows),
            "loo_curve" => Ok(PlotData::LooCurve),
            "selected_coefficients" => Ok(PlotData::SelectedCoefficients),
            "linear_coefficients" => Ok(PlotData::LinearCoefficients),
            other => Err(format!("unknown export '{other}'")),
        }
    }
}

/// Write the requested artifact as CSV; errors name the stage that would have
/// produced a missing artifact.
pub fn export_plot_data(
    report: &PipelineReport,
    what: PlotData,
    method: Option<&str>,
    path: &Path,
) -> Result<(), PipelineError> {
    let csv = match what {
        PlotData::CoefficientRows => coefficient_rows_csv(report)?,
        PlotData::LooCurve => loo_curve_csv(report)?,
        PlotData::SelectedCoefficients => selected_coefficients_csv(report)?,
        PlotData::LinearCoefficients => linear_coefficients_csv(report, method)?,
    };
    write_file(path, &csv)
}

fn missing(artifact: &str, stage: &str) -> PipelineError {
    PipelineError::runtime(format!(
        "report does not contain {artifact}; run the {stage} stage first"
    ))
}

fn coefficient_rows_csv(report: &PipelineReport) -> Result<String, PipelineError> {
    let rows = report
        .selected_projection_rows
        .as_ref()
        .ok_or_else(|| missing("projection rows", "B-spline selection"))?;
    let mut out = String::from("wavelength");
    for v in &rows.variables {
        let _ = write!(out, ",var_{v}");
    }
    out.push('\n');
    let maxima: Vec<f64> = rows
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(f64::MIN_POSITIVE)
        })
        .collect();
    for (j, w) in report.wavelengths.iter().enumerate() {
        let _ = write!(out, "{w}");
        for (row, max) in rows.rows.iter().zip(&maxima) {
            let _ = write!(out, ",{}", row[j].abs() / max);
        }
        out.push('\n');
    }
    Ok(out)
}

fn loo_curve_csv(report: &PipelineReport) -> Result<String, PipelineError> {
    if report.loo_curve.is_empty() {
        return Err(missing("a leave-one-out curve", "basis selection"));
    }
    let mut out = String::from("n_functions,order,loo\n");
    for point in &report.loo_curve {
        let _ = writeln!(out, "{},{},{}", point.n_functions, point.order, point.loo);
    }
    Ok(out)
}

fn selected_coefficients_csv(report: &PipelineReport) -> Result<String, PipelineError> {
    let selected = report
        .selected_coefficients
        .as_ref()
        .ok_or_else(|| missing("selected coefficients", "compression and selection"))?;
    let mut out = String::from("target");
    for v in &selected.variables {
        let _ = write!(out, ",c{v}");
    }
    out.push('\n');
    for (t, row) in selected.target.iter().zip(&selected.coefficients) {
        let _ = write!(out, "{t}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

fn linear_coefficients_csv(
    report: &PipelineReport,
    method: Option<&str>,
) -> Result<String, PipelineError> {
    let entry = match method {
        Some(name) => report
            .methods
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| PipelineError::runtime(format!("report has no method '{name}'")))?,
        None => report
            .methods
            .iter()
            .find(|m| m.linear_profile.is_some())
            .ok_or_else(|| missing("a linear coefficient profile", "a linear method"))?,
    };
    let profile = entry
        .linear_profile
        .as_ref()
        .ok_or_else(|| missing("a linear coefficient profile", "a linear method"))?;
    let max = profile
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut out = String::from("wavelength,coefficient\n");
    for (w, c) in report.wavelengths.iter().zip(profile) {
        let _ = writeln!(out, "{w},{}", c.abs() / max);
    }
    Ok(out)
}
