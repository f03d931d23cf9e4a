use std::fs;
use std::path::Path;

use crate::gridfn::{resample_to_grid, Grid, GridFunction};

use super::CliError;

/// Header names that mark the first column as time stamps.
const TIME_NAMES: [&str; 6] = ["t", "time", "month", "day", "year", "age"];

/// Time stamps this close to an even spacing are taken as already uniform.
const UNIFORM_TOL: f64 = 1e-9;

/// A numeric CSV: header names and column-major values.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }
}

/// Observations on the uniform grid, with the original time axis if one was given.
#[derive(Debug, Clone)]
pub struct Panel {
    pub names: Vec<String>,
    pub observations: Vec<GridFunction>,
    pub time_column: Option<String>,
    pub time_range: Option<(f64, f64)>,
}

impl Panel {
    pub fn grid(&self) -> &Grid {
        self.observations[0].grid()
    }
}

fn csv_error(e: csv::Error) -> CliError {
    let at = e
        .position()
        .map(|p| format!("line {}: ", p.line()))
        .unwrap_or_default();
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => CliError::Input(format!(
            "{at}expected {expected_len} fields, found {len}"
        )),
        _ => CliError::Input(format!("{at}{e}")),
    }
}

/// Reads raw string records; the header is returned separately.
fn read_records(text: &str) -> Result<(Vec<String>, Vec<(u64, Vec<String>)>), CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::Input("missing header row".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok((headers, rows))
}

fn parse_cell(cell: &str, line: u64, name: &str) -> Result<f64, CliError> {
    let v: f64 = cell.parse().map_err(|_| {
        CliError::Input(format!("line {line}, column '{name}': cannot parse '{cell}' as a number"))
    })?;
    if !v.is_finite() {
        return Err(CliError::Input(format!("line {line}, column '{name}': value is not finite")));
    }
    Ok(v)
}

pub fn parse_table(text: &str) -> Result<Table, CliError> {
    let (headers, rows) = read_records(text)?;
    let mut columns = vec![Vec::with_capacity(rows.len()); headers.len()];
    for (line, rec) in &rows {
        for ((col, cell), name) in columns.iter_mut().zip(rec).zip(&headers) {
            col.push(parse_cell(cell, *line, name)?);
        }
    }
    Ok(Table { headers, columns })
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    parse_table(&read_text(path)?)
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn is_time_header(name: &str) -> bool {
    TIME_NAMES.contains(&name.to_ascii_lowercase().as_str())
}

/// Builds a panel from a table. A leading time column (named `t`, `time`,
/// `month`, `day`, `year` or `age`) is rescaled to `[0, 1]`; unevenly spaced
/// samples are resampled onto a uniform grid with as many points as rows.
pub fn panel_from_table(table: Table) -> Result<Panel, CliError> {
    let Table { mut headers, mut columns } = table;
    let (time_column, times) = if headers.first().is_some_and(|h| is_time_header(h)) {
        (Some(headers.remove(0)), Some(columns.remove(0)))
    } else {
        (None, None)
    };
    if headers.len() < 2 {
        return Err(CliError::Input(format!(
            "need at least 2 observations, found {}",
            headers.len()
        )));
    }
    let m = columns[0].len();
    if m < 3 {
        return Err(CliError::Input(format!("need at least 3 samples per observation, found {m}")));
    }
    let grid = Grid::uniform(m).map_err(CliError::from_core)?;
    let mut time_range = None;
    let observations = match &times {
        Some(ts) => {
            if let Some(k) = ts.windows(2).position(|w| w[1] <= w[0]) {
                return Err(CliError::Input(format!(
                    "time column must be strictly increasing (data row {})",
                    k + 2
                )));
            }
            time_range = Some((ts[0], ts[m - 1]));
            if evenly_spaced(ts) {
                return panel_from_table(Table { headers, columns }).map(|p| Panel {
                    time_column,
                    time_range,
                    ..p
                });
            }
            columns
                .iter()
                .map(|c| resample_to_grid(c, ts, &grid).map_err(CliError::from_core))
                .collect::<Result<Vec<_>, _>>()?
        }
        None => columns
            .into_iter()
            .map(|c| GridFunction::new(grid.clone(), c).map_err(CliError::from_core))
            .collect::<Result<Vec<_>, _>>()?,
    };
    Ok(Panel {
        names: headers,
        observations,
        time_column,
        time_range,
    })
}

fn evenly_spaced(ts: &[f64]) -> bool {
    let span = ts[ts.len() - 1] - ts[0];
    let last = (ts.len() - 1) as f64;
    ts.iter()
        .enumerate()
        .all(|(k, t)| ((t - ts[0]) / span - k as f64 / last).abs() <= UNIFORM_TOL)
}

pub fn read_panel(path: &Path) -> Result<Panel, CliError> {
    panel_from_table(read_table(path)?)
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros dropped.
pub fn format_value(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.11e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let neg = mant.starts_with('-');
    let digits: String = mant.chars().filter(char::is_ascii_digit).collect();
    let sign = if neg { "-" } else { "" };
    if !(-5..12).contains(&exp) {
        let mant = trim_fraction(mant.trim_start_matches('-'));
        return format!("{sign}{mant}e{exp}");
    }
    let body = if exp >= 0 {
        let split = exp as usize + 1;
        format!("{}.{}", &digits[..split], &digits[split..])
    } else {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    };
    format!("{sign}{}", trim_fraction(&body))
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Writes equal-length numeric columns under the given headers.
pub fn write_table(path: &Path, headers: &[String], columns: &[&[f64]]) -> Result<(), CliError> {
    let rows = columns.first().map_or(0, |c| c.len());
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(headers).map_err(|e| CliError::io(path, e))?;
    for r in 0..rows {
        w.write_record(columns.iter().map(|c| format_value(c[r])))
            .map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Like [`write_table`] with a leading text column.
pub fn write_labelled(
    path: &Path,
    headers: &[String],
    labels: &[String],
    columns: &[&[f64]],
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(headers).map_err(|e| CliError::io(path, e))?;
    for (r, label) in labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend(columns.iter().map(|c| format_value(c[r])));
        w.write_record(&rec).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
