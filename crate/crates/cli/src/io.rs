//! CSV input and output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use vmbpbb::TimeSeries;

use crate::error::{CliError, CliResult};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_error(path: &Path, line: u64, msg: impl Into<String>) -> CliError {
    CliError::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

fn reader(path: &Path) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(CliError::io(path))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn record_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::Io(_) => CliError::csv(path)(e),
        _ => parse_error(path, line, e.to_string()),
    }
}

/// Reads a `t,value` file. `t` must be consecutive integers.
pub fn read_series(path: &Path) -> CliResult<TimeSeries> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| record_error(path, e))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(parse_error(path, 1, "empty input, expected header `t,value`"));
    }
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "value" {
        return Err(parse_error(
            path,
            1,
            format!("expected header `t,value`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut start = 0i64;
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| record_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let t: i64 =
            rec[0].parse().map_err(|_| parse_error(path, line, format!("time `{}` is not an integer", &rec[0])))?;
        let v: f64 =
            rec[1].parse().map_err(|_| parse_error(path, line, format!("value `{}` is not a number", &rec[1])))?;
        if !v.is_finite() {
            return Err(parse_error(path, line, format!("value `{}` is not finite", &rec[1])));
        }
        if values.is_empty() {
            start = t;
        } else if t != start + values.len() as i64 {
            return Err(parse_error(
                path,
                line,
                format!("time {t} does not follow {}; gaps are not supported", start + values.len() as i64 - 1),
            ));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(parse_error(path, 2, "no data rows"));
    }
    Ok(TimeSeries::with_start(values, start)?)
}

/// Writes `t` plus one column per entry of `columns`.
pub fn write_columns(path: &Path, start: i64, names: &[String], columns: &[&[f64]]) -> CliResult<()> {
    let n = columns.first().map_or(0, |c| c.len());
    let mut w = csv::Writer::from_path(path).map_err(CliError::csv(path))?;
    let mut header = vec!["t".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(CliError::csv(path))?;
    for i in 0..n {
        let mut row = vec![(start + i as i64).to_string()];
        row.extend(columns.iter().map(|c| fmt_f64(c[i])));
        w.write_record(&row).map_err(CliError::csv(path))?;
    }
    w.flush().map_err(CliError::io(path))
}

/// Writes pre-formatted rows.
pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(CliError::csv(path))?;
    w.write_record(header).map_err(CliError::csv(path))?;
    for row in rows {
        w.write_record(row).map_err(CliError::csv(path))?;
    }
    w.flush().map_err(CliError::io(path))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|source| CliError::Json { path: path.to_path_buf(), source })?;
    w.write_all(b"\n").map_err(CliError::io(path))?;
    w.flush().map_err(CliError::io(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Generic reader for files this tool wrote itself, keyed by header name.
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let mut rdr = reader(path)?;
        let headers = rdr.headers().map_err(|e| record_error(path, e))?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| record_error(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec.iter().map(String::from).collect()));
        }
        Ok(Self { headers, rows })
    }

    pub fn column(&self, path: &Path, name: &str) -> CliResult<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_error(path, 1, format!("missing column `{name}`")))
    }

    pub fn parse<T: std::str::FromStr>(path: &Path, line: u64, field: &str, name: &str) -> CliResult<T> {
        field.parse().map_err(|_| parse_error(path, line, format!("bad {name} `{field}`")))
    }
}
