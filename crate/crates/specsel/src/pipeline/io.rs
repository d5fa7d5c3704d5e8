//! Small CSV/text readers and writers shared by the pipeline and the CLI:
//! feature tables (`target,c0,...` or `c0,...`), single-column prediction
//! files and index lists.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::linalg::RowMatrix;

use super::PipelineError;

#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub features: RowMatrix,
    pub target: Option<Vec<f64>>,
}

pub fn read_to_string(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path)
        .map_err(|e| PipelineError::runtime(format!("reading {}: {e}", path.display())))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| {
                PipelineError::runtime(format!("creating {}: {e}", parent.display()))
            })?;
        }
    }
    fs::write(path, contents)
        .map_err(|e| PipelineError::runtime(format!("writing {}: {e}", path.display())))
}

/// Feature CSV: optional leading `target` column, arbitrary column names.
pub fn parse_features(text: &str) -> Result<FeatureTable, PipelineError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| PipelineError::runtime("empty feature file".to_string()))?;
    let mut names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let has_target = names
        .first()
        .is_some_and(|n| n.eq_ignore_ascii_case("target"));
    if has_target {
        names.remove(0);
    }
    if names.is_empty() {
        return Err(PipelineError::runtime(
            "feature file has no feature columns",
        ));
    }
    let expected = names.len() + usize::from(has_target);
    let mut rows = Vec::new();
    let mut target = Vec::new();
    for (idx, line) in lines {
        let values: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    PipelineError::runtime(format!(
                        "line {}: invalid number '{}'",
                        idx + 1,
                        f.trim()
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        if values.len() != expected {
            return Err(PipelineError::runtime(format!(
                "line {}: expected {expected} fields, found {}",
                idx + 1,
                values.len()
            )));
        }
        if has_target {
            target.push(values[0]);
            rows.push(values[1..].to_vec());
        } else {
            rows.push(values);
        }
    }
    Ok(FeatureTable {
        names,
        features: RowMatrix::from_rows(&rows),
        target: has_target.then_some(target),
    })
}

pub fn format_features(names: &[String], features: &RowMatrix, target: Option<&[f64]>) -> String {
    let mut out = String::new();
    if target.is_some() {
        out.push_str("target,");
    }
    out.push_str(&names.join(","));
    out.push('\n');
    for (i, row) in features.iter_rows().enumerate() {
        if let Some(t) = target {
            let _ = write!(out, "{},", t[i]);
        }
        let fields: Vec<String> = row.iter().map(ToString::to_string).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Single-column prediction file with a `prediction` header.
pub fn parse_predictions(text: &str) -> Result<Vec<f64>, PipelineError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| PipelineError::runtime("empty prediction file".to_string()))?;
    if !header.trim().eq_ignore_ascii_case("prediction") {
        return Err(PipelineError::runtime(format!(
            "expected 'prediction' header, found '{}'",
            header.trim()
        )));
    }
    lines
        .map(|(idx, line)| {
            line.trim().parse::<f64>().map_err(|_| {
                PipelineError::runtime(format!("line {}: invalid number '{line}'", idx + 1))
            })
        })
        .collect()
}

pub fn format_predictions(values: &[f64]) -> String {
    let mut out = String::from("prediction\n");
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    out
}

/// Index file: one 0-based index per line.
pub fn parse_indices(text: &str) -> Result<Vec<usize>, PipelineError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, line)| {
            line.trim().parse::<usize>().map_err(|_| {
                PipelineError::runtime(format!("line {}: invalid index '{line}'", idx + 1))
            })
        })
        .collect()
}
