//! CSV and JSON file handling.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use pairwise_rkhs::Dataset;
use serde::Serialize;

use crate::error::{input, CliError, CliResult};

/// Rows of a CSV with header `x1,…,xd[,y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub xs: Vec<Vec<f64>>,
    pub ys: Option<Vec<f64>>,
}

fn parse_f64(field: &str, path: &Path, line: u64) -> CliResult<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => input(format!("{}:{line}: expected a finite number, got {field:?}", path.display())),
    }
}

/// Reads a table whose header names the input columns `x1…xd`, optionally
/// followed by `y`. A file with no rows (or no content at all) gives an
/// empty table.
pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.is_empty() || names == [""] {
        return Ok(Table { xs: Vec::new(), ys: None });
    }
    let has_y = names.last() == Some(&"y");
    let d = names.len() - usize::from(has_y);
    for (k, name) in names[..d].iter().enumerate() {
        if *name != format!("x{}", k + 1) {
            return input(format!("{}: header must be x1,…,xd[,y], found {name:?} in column {}", path.display(), k + 1));
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != names.len() {
            return input(format!("{}:{line}: expected {} fields, found {}", path.display(), names.len(), record.len()));
        }
        let row = (0..d).map(|k| parse_f64(&record[k], path, line)).collect::<CliResult<Vec<_>>>()?;
        xs.push(row);
        if has_y {
            ys.push(parse_f64(&record[d], path, line)?);
        }
    }
    Ok(Table { xs, ys: has_y.then_some(ys) })
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let table = read_table(path)?;
    match table.ys {
        Some(ys) if !ys.is_empty() => Ok(Dataset::new(table.xs, ys)?),
        Some(_) => input(format!("{}: dataset has no rows", path.display())),
        None => input(format!("{}: dataset needs a y column", path.display())),
    }
}

/// Headerless square matrix of decimals.
pub fn read_matrix(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push(record.iter().map(|f| parse_f64(f, path, line)).collect::<CliResult<Vec<_>>>()?);
    }
    Ok(rows)
}

/// Parses `"x1,…,xd;y"`.
pub fn parse_point(text: &str) -> CliResult<(Vec<f64>, f64)> {
    let Some((xs, y)) = text.split_once(';') else {
        return input(format!("point must look like \"x1,...,xd;y\", got {text:?}"));
    };
    let num = |s: &str| match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => input(format!("invalid number {s:?} in point {text:?}")),
    };
    let x = xs.split(',').map(num).collect::<CliResult<Vec<_>>>()?;
    Ok((x, num(y)?))
}

/// 17 significant digits, enough to recover every `f64` exactly.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn predictions_csv(values: &[f64]) -> String {
    let mut out = String::from("prediction\n");
    for v in values {
        out.push_str(&format_f64(*v));
        out.push('\n');
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes `content` to `dir/name`, or to standard output when `dir` is `None`.
pub fn emit(dir: Option<&Path>, name: &str, content: &str) -> CliResult<Option<PathBuf>> {
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            let path = dir.join(name);
            fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
            Ok(Some(path))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes()).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
            Ok(None)
        }
    }
}
