//! CSV and JSON files, all written through a temporary file and a rename.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use loadshape_core::curves::{validate_curve, LoadCurve};
use loadshape_core::HOURS;
use serde::Serialize;

use crate::{CliError, CliResult};

/// `household_id,date,h00,...,h23`
pub fn curve_header() -> Vec<String> {
    let mut header = vec!["household_id".to_string(), "date".to_string()];
    header.extend((0..HOURS).map(|h| format!("h{h:02}")));
    header
}

pub fn parse_date(s: &str) -> CliResult<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| CliError::invalid(format!("invalid date `{s}`")))
}

/// Reads and validates a curve file. Duplicate (household, date) rows are
/// rejected.
pub fn read_curves(path: &Path) -> CliResult<Vec<LoadCurve>> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse_curves(&bytes, &path.display().to_string())
}

pub fn parse_curves(bytes: &[u8], source: &str) -> CliResult<Vec<LoadCurve>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| CliError::invalid(format!("{source}: {e}")))?;
    if header.iter().ne(curve_header().iter().map(String::as_str)) {
        return Err(CliError::invalid(format!(
            "{source}: header must be `{}`",
            curve_header().join(",")
        )));
    }
    let mut seen = BTreeSet::new();
    let mut curves = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record =
            record.map_err(|e| CliError::invalid(format!("{source}: line {line}: {e}")))?;
        let id = &record[0];
        if id.is_empty() {
            return Err(CliError::invalid(format!(
                "{source}: line {line}: empty household_id"
            )));
        }
        let date = parse_date(&record[1])
            .map_err(|e| CliError::invalid(format!("{source}: line {line}: {e}")))?;
        let values = record
            .iter()
            .skip(2)
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::invalid(format!("{source}: line {line}: {e}")))?;
        let curve = validate_curve(&values, id, date)
            .map_err(|e| CliError::invalid(format!("{source}: line {line}: {e}")))?;
        if !seen.insert((id.to_string(), date)) {
            return Err(CliError::invalid(format!(
                "{source}: line {line}: duplicate row for {id} {date}"
            )));
        }
        curves.push(curve);
    }
    Ok(curves)
}

/// Shortest decimal form that reads back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn csv_bytes<I>(header: &[String], rows: I) -> CliResult<Vec<u8>>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Runtime(format!("csv encoding failed: {e}"));
    writer.write_record(header).map_err(fail)?;
    for row in rows {
        writer.write_record(&row).map_err(fail)?;
    }
    writer
        .into_inner()
        .map_err(|e| CliError::Runtime(format!("csv encoding failed: {e}")))
}

pub fn curves_csv(curves: &[LoadCurve]) -> CliResult<Vec<u8>> {
    csv_bytes(
        &curve_header(),
        curves.iter().map(|c| {
            let mut row = vec![c.household_id.clone(), c.date.to_string()];
            row.extend(c.values().iter().map(|v| fmt_f64(*v)));
            row
        }),
    )
}

pub fn json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Runtime(format!("json encoding failed: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

/// Writes `bytes` to a temporary file beside `path` and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Writes to `path`, or to standard output when `path` is `None`.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}
