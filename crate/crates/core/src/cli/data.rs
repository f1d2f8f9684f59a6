//! CSV ingestion, log-difference transforms and CSV output.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::files::DataEntry;

/// A multivariate series with one row per variable.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub names: Vec<String>,
    /// `d x T`.
    pub values: Matrix,
    /// Row labels from the date column, when one was requested.
    pub dates: Option<Vec<String>>,
}

struct RawTable {
    headers: Vec<String>,
    /// Cells with the 1-based file line of each row.
    rows: Vec<(usize, Vec<String>)>,
}

fn read_raw(path: &Path) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(RawTable { headers, rows })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            line,
            column: 0,
            message: format!(
                "{}: row has {len} fields, header has {expected_len} (is the decimal separator a comma?)",
                path.display()
            ),
        },
        other => Error::Parse {
            line,
            column: 0,
            message: format!("{}: {other:?}", path.display()),
        },
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "N/A" | "NaN" | "nan" | "." | "null" | "NULL")
}

fn column_index(headers: &[String], name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::InvalidInput(format!("column '{name}' not found in header")))
}

/// Reads the selected numeric columns (all columns when `columns` is `None`)
/// of a headed CSV file.
pub fn load_csv(path: &Path, columns: Option<&[String]>) -> Result<Dataset> {
    let raw = read_raw(path)?;
    parse_rows(&raw, columns, 0..raw.rows.len(), None)
}

fn parse_rows(
    raw: &RawTable,
    columns: Option<&[String]>,
    range: std::ops::Range<usize>,
    date_col: Option<usize>,
) -> Result<Dataset> {
    let names: Vec<String> = match columns {
        Some(c) => c.to_vec(),
        None => raw.headers.clone(),
    };
    if names.is_empty() {
        return Err(Error::InvalidInput("no columns selected".into()));
    }
    let idx = names
        .iter()
        .map(|n| column_index(&raw.headers, n))
        .collect::<Result<Vec<_>>>()?;
    let len = range.len();
    if len == 0 {
        return Err(Error::InvalidInput("no data rows selected".into()));
    }
    let mut values = Matrix::zeros(names.len(), len);
    let mut dates = date_col.map(|_| Vec::with_capacity(len));
    for (t, r) in range.enumerate() {
        let (line, cells) = &raw.rows[r];
        for (v, &c) in idx.iter().enumerate() {
            let cell = cells[c].as_str();
            if is_missing(cell) {
                return Err(Error::MissingValue {
                    column: names[v].clone(),
                    row: r + 1,
                });
            }
            values[(v, t)] = cell.parse::<f64>().map_err(|_| Error::Parse {
                line: *line,
                column: c + 1,
                message: format!("'{cell}' in column '{}' is not a number", names[v]),
            })?;
            if !values[(v, t)].is_finite() {
                return Err(Error::Parse {
                    line: *line,
                    column: c + 1,
                    message: format!("'{cell}' is not finite"),
                });
            }
        }
        if let (Some(d), Some(c)) = (dates.as_mut(), date_col) {
            d.push(cells[c].clone());
        }
    }
    Ok(Dataset { names, values, dates })
}

/// Log-difference transform settings for one series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransformSpec {
    /// 0 keeps the level (no log), 1 and 2 take differences of `ln x`.
    pub log_diff: u8,
    pub percent: bool,
}

/// `m`-th difference of `ln x` (or `x` itself when `m = 0`), times 100
/// when `percent`. The output has `T − m` values.
pub fn transform(series: &[f64], spec: TransformSpec) -> Result<Vec<f64>> {
    let m = spec.log_diff as usize;
    if m > 2 {
        return Err(Error::InvalidInput(format!("log-difference order must be 0, 1 or 2, got {m}")));
    }
    if series.len() <= m {
        return Err(Error::InvalidInput(format!(
            "series of length {} is too short for difference order {m}",
            series.len()
        )));
    }
    let mut out: Vec<f64> = if m == 0 {
        series.to_vec()
    } else {
        if let Some(p) = series.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "log transform needs positive values, found {} at position {}",
                series[p],
                p + 1
            )));
        }
        series.iter().map(|x| x.ln()).collect()
    };
    for _ in 0..m {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    if spec.percent {
        out.iter_mut().for_each(|x| *x *= 100.0);
    }
    Ok(out)
}

/// Loads and transforms data per a configuration's `[data]` section. With
/// per-column difference orders the series are aligned on their common
/// final rows; `start`/`end` select the transformed sample by row label.
pub fn load_dataset(path: &Path, entry: Option<&DataEntry>) -> Result<Dataset> {
    let default = DataEntry::default();
    let entry = entry.unwrap_or(&default);
    let raw = read_raw(path)?;
    let date_col = entry
        .date_column
        .as_deref()
        .map(|c| column_index(&raw.headers, c))
        .transpose()?;
    let columns: Vec<String> = match &entry.columns {
        Some(c) => c.clone(),
        None => raw
            .headers
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != date_col)
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let orders = entry.log_diff.clone().unwrap_or_else(|| vec![0; columns.len()]);
    if orders.len() != columns.len() {
        return Err(Error::InvalidInput(format!(
            "{} log-difference orders for {} columns",
            orders.len(),
            columns.len()
        )));
    }
    let lookback = orders.iter().copied().max().unwrap_or(0) as usize;
    let first = entry.skip_rows;
    let find = |label: &str| -> Result<usize> {
        let c = date_col.ok_or_else(|| Error::InvalidInput("start/end need a date_column".into()))?;
        raw.rows
            .iter()
            .enumerate()
            .skip(first)
            .find(|(_, (_, cells))| cells[c] == label)
            .map(|(i, _)| i)
            .ok_or_else(|| Error::InvalidInput(format!("row label '{label}' not found")))
    };
    let start = match &entry.start {
        Some(s) => find(s)?
            .checked_sub(lookback)
            .filter(|&i| i >= first)
            .ok_or_else(|| Error::InvalidInput(format!("not enough rows before '{s}' for differencing")))?,
        None => first,
    };
    let end = match &entry.end {
        Some(e) => find(e)? + 1,
        None => raw.rows.len(),
    };
    if end <= start {
        return Err(Error::InvalidInput("empty row range".into()));
    }
    let levels = parse_rows(&raw, Some(&columns), start..end, date_col)?;
    let out_len = levels.values.ncols() - lookback;
    let mut values = Matrix::zeros(columns.len(), out_len);
    for (i, &m) in orders.iter().enumerate() {
        let row: Vec<f64> = levels.values.row(i).iter().copied().collect();
        let tr = transform(
            &row,
            TransformSpec {
                log_diff: m,
                percent: entry.percent && m > 0,
            },
        )
        .map_err(|e| Error::InvalidInput(format!("column '{}': {e}", columns[i])))?;
        let offset = tr.len() - out_len;
        for t in 0..out_len {
            values[(i, t)] = tr[offset + t];
        }
    }
    let dates = levels.dates.map(|d| d[lookback..].to_vec());
    Ok(Dataset {
        names: columns,
        values,
        dates,
    })
}

/// Writes a `d x T` matrix as a headed CSV with one row per time point.
pub fn write_csv<W: std::io::Write>(out: W, names: &[String], values: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(names).map_err(io)?;
    for t in 0..values.ncols() {
        w.write_record(values.column(t).iter().map(|x| x.to_string())).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
