//! CSV streams and JSON sidecars.
//!
//! A stream file has a header row, one row per instance, features first and
//! a 0/1 label last. An empty field or `NA` is a missing cell. Floats are
//! written with Rust's shortest round-trip formatting, so ingesting a written
//! file and writing it again reproduces it byte for byte.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::streamgen::{DriftSpec, LabeledStream};
use crate::{Error, Result, SparseMatrix};

pub const MISSING: &str = "NA";

/// Where the label lives in an ingested file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
}

/// Parsed contents of a stream CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvData {
    pub feature_names: Vec<String>,
    pub features: SparseMatrix,
    pub labels: Vec<u8>,
}

impl CsvData {
    pub fn into_stream(self, drift: DriftSpec) -> Result<LabeledStream> {
        LabeledStream::new(self.features, self.labels, drift)
    }
}

fn parse_cell(field: &str, row: usize, column: usize) -> Result<Option<f64>> {
    let f = field.trim();
    if f.is_empty() || f == MISSING {
        return Ok(None);
    }
    f.parse::<f64>().map(Some).map_err(|_| Error::Parse {
        row,
        column,
        message: format!("'{f}' is not a number"),
    })
}

fn parse_label(field: &str, row: usize, column: usize) -> Result<u8> {
    let f = field.trim();
    if f.is_empty() || f == MISSING {
        return Err(Error::Schema(format!("row {row} has no label")));
    }
    match f.parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(0),
        Ok(v) if v == 1.0 => Ok(1),
        _ => Err(Error::Parse {
            row,
            column,
            message: format!("label '{f}' is not 0 or 1"),
        }),
    }
}

/// Parses stream CSV text. Rows and columns in errors are 1-based, counting
/// the header as row 1.
pub fn read_csv<R: Read>(input: R, label: LabelColumn) -> Result<CsvData> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(Error::Schema("empty file".into())),
        Some(r) => r.map_err(|e| Error::Schema(e.to_string()))?,
    };
    let width = header.len();
    if width < 2 {
        return Err(Error::Schema("need at least one feature column and a label column".into()));
    }
    let label_col = match label {
        LabelColumn::Last => width - 1,
        LabelColumn::Index(i) if i < width => i,
        LabelColumn::Index(i) => return Err(Error::Schema(format!("label column {i} out of range"))),
    };
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != label_col)
        .map(|(_, h)| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (k, record) in records.enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| Error::Schema(e.to_string()))?;
        if record.len() != width {
            if record.len() < width && label_col >= record.len() {
                return Err(Error::Schema(format!("row {row} has no label")));
            }
            return Err(Error::Schema(format!(
                "row {row} has {} fields, header has {width}",
                record.len()
            )));
        }
        let mut values = Vec::with_capacity(width - 1);
        for (c, field) in record.iter().enumerate() {
            if c == label_col {
                labels.push(parse_label(field, row, c + 1)?);
            } else {
                values.push(parse_cell(field, row, c + 1)?);
            }
        }
        rows.push(values);
    }
    let features = if rows.is_empty() {
        SparseMatrix::empty(0, width - 1)
    } else {
        SparseMatrix::from_rows(&rows)?
    };
    Ok(CsvData {
        feature_names,
        features,
        labels,
    })
}

/// Reads one numeric column (by header name) of a CSV with a header row.
/// Every cell must be present.
pub fn read_series<R: Read>(input: R, column: &str) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(input);
    let headers = reader.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    if headers.is_empty() {
        return Err(Error::Schema("empty file".into()));
    }
    let idx = headers
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| Error::Schema(format!("no column named '{column}'")))?;
    let mut out = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| Error::Schema(e.to_string()))?;
        let field = record
            .get(idx)
            .ok_or_else(|| Error::Schema(format!("row {row} is too short")))?;
        out.push(parse_cell(field, row, idx + 1)?.ok_or(Error::Parse {
            row,
            column: idx + 1,
            message: "missing value in a series".into(),
        })?);
    }
    Ok(out)
}

pub fn ingest_csv(path: &Path, label: LabelColumn) -> Result<CsvData> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(BufReader::new(file), label).map_err(|e| match e {
        Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Writes features `f0..f{d-1}` and `label`.
pub fn write_csv<W: Write>(out: W, features: &SparseMatrix, labels: &[u8]) -> Result<()> {
    if features.n_rows() != labels.len() {
        return Err(Error::Input("feature rows and labels differ in length".into()));
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let to_io = |e: csv::Error| Error::Input(format!("csv write failed: {e}"));
    let mut header: Vec<String> = (0..features.n_cols()).map(|c| format!("f{c}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(to_io)?;
    for (r, &label) in labels.iter().enumerate() {
        let mut fields: Vec<String> = features
            .row(r)
            .into_iter()
            .map(|v| v.map_or_else(|| MISSING.to_string(), |x| x.to_string()))
            .collect();
        fields.push(label.to_string());
        w.write_record(&fields).map_err(to_io)?;
    }
    w.flush().map_err(|e| Error::Input(format!("csv write failed: {e}")))?;
    Ok(())
}

pub fn write_stream_file(path: &Path, stream: &LabeledStream) -> Result<()> {
    create_parent(path)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(BufWriter::new(file), &stream.features, &stream.labels)
}

/// Reads a stream CSV and, when present, its drift sidecar.
pub fn read_stream_file(path: &Path, sidecar: Option<&Path>) -> Result<LabeledStream> {
    let data = ingest_csv(path, LabelColumn::Last)?;
    let drift = match sidecar {
        Some(p) => read_json(p)?,
        None => DriftSpec::none(),
    };
    data.into_stream(drift)
}

/// Sidecar path next to a stream file: `x.csv` → `x.drift.json`.
pub fn sidecar_path(stream: &Path) -> std::path::PathBuf {
    stream.with_extension("drift.json")
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, to_json_string(value)?.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        None => Ok(()),
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    create_parent(path)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
