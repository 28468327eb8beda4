//! CSV grids and series.
//!
//! A grid file has the header `t_us,site_<i>,...` followed by one row per
//! time. A series file has free-form column names with time first. Every
//! number is written like C's `%.10e`, e.g. `1.0000000000e+00`, with `nan`
//! for undefined entries.

use std::path::Path;

use rydchain::Grid;

use crate::error::{CliError, Result};

/// Formats `x` like C's `%.10e`.
pub fn format_value(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.10e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// The value a CSV file stores for `x`.
pub fn quantize(x: f64) -> f64 {
    format_value(x).parse().expect("formatted values parse")
}

/// Rounds every time and value of a grid to what its CSV file holds.
pub fn quantize_grid(grid: &Grid) -> Grid {
    Grid {
        times: grid.times.iter().copied().map(quantize).collect(),
        sites: grid.sites.clone(),
        values: grid.values.iter().copied().map(quantize).collect(),
        stderr: grid
            .stderr
            .as_ref()
            .map(|s| s.iter().copied().map(quantize).collect()),
    }
}

/// Columns of numbers sharing one row index, typically time.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(columns: Vec<String>) -> Self {
        Series {
            columns,
            rows: Vec::new(),
        }
    }

    /// Builds a series from equally long columns.
    pub fn from_columns(names: &[&str], data: &[&[f64]]) -> Self {
        let len = data.first().map_or(0, |c| c.len());
        debug_assert!(data.iter().all(|c| c.len() == len));
        Series {
            columns: names.iter().map(|s| s.to_string()).collect(),
            rows: (0..len)
                .map(|r| data.iter().map(|c| c[r]).collect())
                .collect(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn quantized(&self) -> Self {
        Series {
            columns: self.columns.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().copied().map(quantize).collect())
                .collect(),
        }
    }
}

/// Grid holding the standard errors of `grid`, if it has any.
pub fn stderr_grid(grid: &Grid) -> Option<Grid> {
    grid.stderr.as_ref().map(|s| Grid {
        times: grid.times.clone(),
        sites: grid.sites.clone(),
        values: s.clone(),
        stderr: None,
    })
}

fn write_rows(header: Vec<String>, rows: impl Iterator<Item = Vec<f64>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for row in rows {
        w.write_record(row.into_iter().map(format_value))
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// CSV text of a grid.
pub fn grid_to_csv(grid: &Grid) -> Vec<u8> {
    let header = std::iter::once("t_us".to_string())
        .chain(grid.sites.iter().map(|s| format!("site_{s}")))
        .collect();
    let rows = (0..grid.n_times()).map(|k| {
        std::iter::once(grid.times[k])
            .chain(grid.row(k).iter().copied())
            .collect()
    });
    write_rows(header, rows)
}

/// CSV text of a series.
pub fn series_to_csv(series: &Series) -> Vec<u8> {
    write_rows(series.columns.clone(), series.rows.iter().cloned())
}

fn table_error(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Table {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes.as_slice());
    let header: Vec<String> = r
        .headers()
        .map_err(|e| table_error(path, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| table_error(path, e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| table_error(path, format!("row {}: `{f}` is not a number", i + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Reads a grid file.
pub fn read_grid(path: &Path) -> Result<Grid> {
    let (header, rows) = read_records(path)?;
    if header.first().map(String::as_str) != Some("t_us") {
        return Err(table_error(path, "first column must be t_us"));
    }
    let sites = header[1..]
        .iter()
        .map(|h| {
            h.strip_prefix("site_")
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| table_error(path, format!("column `{h}` is not site_<i>")))
        })
        .collect::<Result<Vec<usize>>>()?;
    if sites.is_empty() {
        return Err(table_error(path, "no site columns"));
    }
    let mut times = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len() * sites.len());
    for row in rows {
        times.push(row[0]);
        values.extend_from_slice(&row[1..]);
    }
    Grid::new(times, sites, values).map_err(|e| table_error(path, e.to_string()))
}

/// Reads a series file.
pub fn read_series(path: &Path) -> Result<Series> {
    let (columns, rows) = read_records(path)?;
    Ok(Series { columns, rows })
}
