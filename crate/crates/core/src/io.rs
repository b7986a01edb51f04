//! Matrix, label and JSON file formats.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic  b"FMAT"
//! 4       2     version u16 = 1
//! 6       8     rows u64
//! 14      8     cols u64
//! 22      8*n   row-major f64 values
//! ```
//!
//! CSV has one matrix row per line, comma separated, no header unless
//! requested. Values are written with 17 significant digits so every `f64`
//! survives a write/read cycle.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{validate_matrix, LabelVector, Matrix};

pub const MAGIC: &[u8; 4] = b"FMAT";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Binary,
    /// `header` skips the first line on read and writes `c0,c1,...` on write.
    Csv { header: bool },
}

impl MatrixFormat {
    /// `.csv` files are CSV without header, anything else is binary.
    pub fn from_path(path: &Path) -> MatrixFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => MatrixFormat::Csv { header: false },
            _ => MatrixFormat::Binary,
        }
    }
}

fn format_err(path: &Path, format: &'static str, location: String, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        format,
        location,
        reason: reason.into(),
    }
}

pub fn encode_binary(m: &Matrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * m.as_slice().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

/// Decodes the binary format; `path` is only used in error messages.
pub fn decode_binary(bytes: &[u8], path: &Path) -> Result<Matrix> {
    let err = |offset: usize, reason: String| format_err(path, "binary", format!("byte offset {offset}"), reason);
    if bytes.len() < HEADER_LEN {
        return Err(err(bytes.len(), format!("truncated header ({} of {HEADER_LEN} bytes)", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(err(0, format!("bad magic {:?}, expected \"FMAT\"", &bytes[0..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(err(4, format!("unsupported version {version}, expected {VERSION}")));
    }
    let rows = u64::from_le_bytes(bytes[6..14].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[14..22].try_into().unwrap());
    let n = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| err(6, format!("{rows}x{cols} is too large")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != n {
        return Err(err(
            HEADER_LEN,
            format!("payload is {} bytes, header declares {rows}x{cols} ({n} bytes)", payload.len()),
        ));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let (rows, cols) = (rows as usize, cols as usize);
    if let Err(e) = validate_matrix(rows, cols, &data) {
        return Err(match e {
            Error::NonFinite { row, col, value } => err(
                HEADER_LEN + 8 * (row * cols + col),
                format!("non-finite value {value} at ({row}, {col})"),
            ),
            other => err(6, other.to_string()),
        });
    }
    Ok(Matrix::new(rows, cols, data).expect("validated above"))
}

pub fn encode_csv(m: &Matrix, header: bool) -> String {
    let mut out = String::with_capacity(m.as_slice().len() * 24);
    if header {
        let names: Vec<String> = (0..m.cols()).map(|j| format!("c{j}")).collect();
        out.push_str(&names.join(","));
        out.push('\n');
    }
    for row in m.row_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

pub fn decode_csv(text: &str, header: bool, path: &Path) -> Result<Matrix> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for (lineno, line) in text.lines().enumerate().skip(usize::from(header)) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for (j, field) in line.split(',').enumerate() {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| {
                format_err(path, "csv", format!("line {}, column {}", lineno + 1, j + 1), format!("cannot parse {field:?} as a number"))
            })?;
            if !v.is_finite() {
                return Err(format_err(path, "csv", format!("line {}, column {}", lineno + 1, j + 1), format!("non-finite value {field}")));
            }
            data.push(v);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(format_err(path, "csv", format!("line {}", lineno + 1), format!("{count} fields, expected {c}")));
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| format_err(path, "csv", "end of file".into(), "no data rows"))?;
    Matrix::new(rows, cols, data)
}

pub fn read_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<Matrix> {
    let path = path.as_ref();
    match format {
        MatrixFormat::Binary => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            decode_binary(&bytes, path)
        }
        MatrixFormat::Csv { header } => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            decode_csv(&text, header, path)
        }
    }
}

pub fn write_matrix(m: &Matrix, path: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        MatrixFormat::Binary => encode_binary(m),
        MatrixFormat::Csv { header } => encode_csv(m, header).into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Labels are stored as text, one non-negative integer per line.
pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let l = line.parse::<usize>().map_err(|_| {
            format_err(path, "labels", format!("line {}", lineno + 1), format!("cannot parse {line:?} as a class index"))
        })?;
        labels.push(l);
    }
    Ok(LabelVector::new(labels))
}

pub fn write_labels(y: &LabelVector, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for l in y.as_slice() {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Pretty-printed, trailing newline. Key order follows struct declaration order.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
