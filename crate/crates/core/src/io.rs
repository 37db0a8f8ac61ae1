//! LIBSVM datasets and CSV traces.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SparseRowMatrix;

/// One line of a LIBSVM file. Indices are 1-based as on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LibsvmRecord {
    pub label: f64,
    pub features: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibsvmDataset {
    pub records: Vec<LibsvmRecord>,
    /// Rows with 0-based column indices.
    pub matrix: SparseRowMatrix,
    /// Labels in `{-1, +1}`.
    pub labels: Vec<f64>,
    /// Whether `0/1` labels were mapped to `-1/+1`.
    pub remapped: bool,
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn parse_line(text: &str, line_no: usize) -> Result<Option<LibsvmRecord>> {
    let content = text.split('#').next().unwrap_or("");
    let base = content.as_ptr() as usize;
    let mut tokens = content
        .split_whitespace()
        .map(|t| (t.as_ptr() as usize - base + 1, t));
    let Some((col, label_tok)) = tokens.next() else {
        return Ok(None);
    };
    let label: f64 = label_tok
        .parse()
        .map_err(|_| parse_error(line_no, col, format!("bad label {label_tok:?}")))?;
    if !label.is_finite() {
        return Err(parse_error(line_no, col, "non-finite label"));
    }
    let mut features = Vec::new();
    let mut last = 0usize;
    for (col, tok) in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| parse_error(line_no, col, format!("expected index:value, got {tok:?}")))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| parse_error(line_no, col, format!("bad feature index {idx:?}")))?;
        if idx == 0 {
            return Err(parse_error(line_no, col, "feature indices are 1-based"));
        }
        if idx <= last {
            return Err(parse_error(line_no, col, "feature indices must be strictly increasing"));
        }
        let val: f64 = val
            .parse()
            .map_err(|_| parse_error(line_no, col, format!("bad feature value {val:?}")))?;
        if !val.is_finite() {
            return Err(parse_error(line_no, col, "non-finite feature value"));
        }
        last = idx;
        features.push((idx, val));
    }
    Ok(Some(LibsvmRecord { label, features }))
}

/// Reads `label idx:val ...` lines; text after `#` is ignored.
///
/// The column count is the largest index seen, or `dim` when given (which
/// must not be smaller).
pub fn parse_libsvm<R: BufRead>(reader: R, dim: Option<usize>) -> Result<LibsvmDataset> {
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<libsvm input>", e))?;
        if let Some(rec) = parse_line(&line, i + 1)? {
            records.push(rec);
            lines.push(i + 1);
        }
    }
    let zero_one = records.iter().all(|r| r.label == 0.0 || r.label == 1.0);
    let remapped = zero_one && records.iter().any(|r| r.label == 0.0);
    if remapped {
        warn!("mapping 0/1 labels to -1/+1");
    }
    let mut labels = Vec::with_capacity(records.len());
    for (rec, &line) in records.iter_mut().zip(&lines) {
        let b = match rec.label {
            l if l == 1.0 => 1.0,
            l if l == -1.0 => -1.0,
            l if l == 0.0 && remapped => -1.0,
            l => return Err(Error::NonBinaryLabel { line, label: l }),
        };
        rec.label = b;
        labels.push(b);
    }
    let max_idx = records
        .iter()
        .filter_map(|r| r.features.last().map(|&(j, _)| j))
        .max()
        .unwrap_or(0);
    let cols = match dim {
        Some(d) if d < max_idx => {
            return Err(Error::InvalidConfig(format!(
                "dimension override {d} below largest index {max_idx}"
            )))
        }
        Some(d) => d,
        None => max_idx,
    };
    let mut offsets = vec![0];
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for r in &records {
        for &(j, v) in &r.features {
            indices.push(j - 1);
            values.push(v);
        }
        offsets.push(indices.len());
    }
    let matrix = SparseRowMatrix::new(records.len(), cols, offsets, indices, values)?;
    Ok(LibsvmDataset {
        records,
        matrix,
        labels,
        remapped,
    })
}

pub fn read_libsvm(path: impl AsRef<Path>, dim: Option<usize>) -> Result<LibsvmDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_libsvm(BufReader::new(file), dim)
}

/// Canonical text: `+1`/`-1` labels and shortest round-trip values.
pub fn write_libsvm<W: Write>(mut out: W, matrix: &SparseRowMatrix, labels: &[f64]) -> std::io::Result<()> {
    for (i, &b) in labels.iter().enumerate() {
        write!(out, "{}", if b > 0.0 { "+1" } else { "-1" })?;
        let (idx, val) = matrix.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            write!(out, " {}:{}", j + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_libsvm(path: impl AsRef<Path>, matrix: &SparseRowMatrix, labels: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_libsvm(&mut w, matrix, labels).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row of a solver trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub mode: String,
    pub f: f64,
    pub grad_norm: f64,
    pub lambda: f64,
    pub delta: f64,
    pub step_length: f64,
    pub bisection_count: usize,
    pub while_count: usize,
    pub oracle_calls: u64,
    pub data_passes: f64,
    pub wall_nanos: u64,
    pub sigma_k: f64,
    pub sample_size: usize,
}

pub const TRACE_COLUMNS: [&str; 14] = [
    "iter",
    "mode",
    "f",
    "grad_norm",
    "lambda",
    "delta",
    "step_length",
    "bisection_count",
    "while_count",
    "oracle_calls",
    "data_passes",
    "wall_nanos",
    "sigma_k",
    "sample_size",
];

/// Writes `# <header json>` followed by CSV rows.
pub fn write_trace_to<W: Write>(
    mut out: W,
    records: &[TraceRecord],
    header: &serde_json::Value,
) -> Result<()> {
    writeln!(out, "# {}", serde_json::to_string(header)?).map_err(|e| Error::io("<trace>", e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<trace>", e))?;
    Ok(())
}

pub fn write_trace(path: impl AsRef<Path>, records: &[TraceRecord], header: &serde_json::Value) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = BufWriter::new(file);
    write_trace_to(&mut buf, records, header).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    buf.flush().map_err(|e| Error::io(path, e))
}

/// Parses a trace written by [`write_trace`].
pub fn read_trace(path: impl AsRef<Path>) -> Result<(serde_json::Value, Vec<TraceRecord>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let json = first
        .strip_prefix("# ")
        .ok_or_else(|| parse_error(1, 1, "missing trace header"))?;
    let header: serde_json::Value = serde_json::from_str(json.trim_end())?;
    let mut rdr = csv::Reader::from_reader(reader);
    let records = rdr.deserialize().collect::<std::result::Result<Vec<TraceRecord>, _>>()?;
    Ok((header, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_line() {
        let d = parse_libsvm("+1 1:0.5 3:2\n".as_bytes(), None).unwrap();
        assert_eq!(d.records[0].label, 1.0);
        assert_eq!(d.records[0].features, vec![(1, 0.5), (3, 2.0)]);
        assert_eq!(d.matrix.cols(), 3);
        assert_eq!(d.matrix.row_dense(0), vec![0.5, 0.0, 2.0]);
    }

    #[test]
    fn zero_one_labels_remap() {
        let d = parse_libsvm("0 2:1\n1 1:1\n".as_bytes(), None).unwrap();
        assert_eq!(d.labels, vec![-1.0, 1.0]);
        assert!(d.remapped);
    }

    #[test]
    fn comments_blank_lines_and_override() {
        let text = "# header\n\n-1 2:1.5 # trailing\n+1\n";
        let d = parse_libsvm(text.as_bytes(), Some(5)).unwrap();
        assert_eq!(d.labels, vec![-1.0, 1.0]);
        assert_eq!(d.matrix.cols(), 5);
        assert_eq!(d.matrix.nnz(), 1);
    }

    #[test]
    fn error_positions() {
        match parse_libsvm("+1 1:1\n-1 3:1 2:4\n".as_bytes(), None) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 8)),
            other => panic!("{other:?}"),
        }
        match parse_libsvm("+1 0:1\n".as_bytes(), None) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (1, 4)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_libsvm("+1 1:x\n".as_bytes(), None),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_libsvm("-1 1:1\n2 1:1\n".as_bytes(), None),
            Err(Error::NonBinaryLabel { line: 2, .. })
        ));
        assert!(matches!(
            parse_libsvm("-1 1:1\n0 1:1\n".as_bytes(), None),
            Err(Error::NonBinaryLabel { line: 2, .. })
        ));
        assert!(parse_libsvm("+1 4:1\n".as_bytes(), Some(3)).is_err());
    }

    #[test]
    fn canonical_write_is_idempotent() {
        let text = "1 1:0.50 3:2e0\n0 2:-1.25\n";
        let a = parse_libsvm(text.as_bytes(), None).unwrap();
        let mut buf = Vec::new();
        write_libsvm(&mut buf, &a.matrix, &a.labels).unwrap();
        let b = parse_libsvm(buf.as_slice(), None).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.labels, b.labels);
        let mut again = Vec::new();
        write_libsvm(&mut again, &b.matrix, &b.labels).unwrap();
        assert_eq!(buf, again);
        assert_eq!(String::from_utf8(buf).unwrap(), "+1 1:0.5 3:2\n-1 2:-1.25\n");
    }

    fn record(iter: usize) -> TraceRecord {
        TraceRecord {
            iter,
            mode: "accelerated".into(),
            f: 0.1 + iter as f64 / 3.0,
            grad_norm: 1e-7 / 3.0,
            lambda: 12345.678_901_234_5,
            delta: f64::MIN_POSITIVE,
            step_length: 2.0 / 7.0,
            bisection_count: 3,
            while_count: 1,
            oracle_calls: 17,
            data_passes: 4.25,
            wall_nanos: 1000 + iter as u64,
            sigma_k: 0.9,
            sample_size: 64,
        }
    }

    #[test]
    fn trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let header = serde_json::json!({"seed": 7});
        write_trace(&path, &[], &header).unwrap();
        let (h, rows) = read_trace(&path).unwrap();
        assert_eq!(h, header);
        assert!(rows.is_empty());
        let recs = vec![record(1), record(2)];
        write_trace(&path, &recs, &header).unwrap();
        let (_, rows) = read_trace(&path).unwrap();
        assert_eq!(rows, recs);
    }

    #[test]
    fn large_trace_row_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.csv");
        let recs: Vec<_> = (0..10_000).map(record).collect();
        write_trace(&path, &recs, &serde_json::json!({})).unwrap();
        let (_, rows) = read_trace(&path).unwrap();
        assert_eq!(rows.len(), 10_000);
        assert_eq!(rows[9_999], recs[9_999]);
    }

    #[test]
    fn missing_file_reports_path() {
        let err = read_trace("/nonexistent/trace.csv").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/trace.csv"));
    }
}
