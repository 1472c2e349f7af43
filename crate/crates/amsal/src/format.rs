//! Matrix files.
//!
//! BIN: `AMSL`, version `u32`, rows `u64`, cols `u64` (all little-endian),
//! then `rows × cols` little-endian `f64` in row-major order.
//!
//! CSV: comma-separated decimal floats, one row per line, with an optional
//! header line. Values are written in shortest round-trip form.

use std::fs;
use std::path::Path;

use amsal_core::Matrix;

use crate::error::{Error, FormatError, Result};

pub const BIN_MAGIC: &[u8; 4] = b"AMSL";
pub const BIN_VERSION: u32 = 1;
const BIN_HEADER: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatrixFormat {
    Csv,
    #[default]
    Bin,
}

impl MatrixFormat {
    /// `.bin` selects BIN; anything else is read as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("bin") => MatrixFormat::Bin,
            _ => MatrixFormat::Csv,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::Bin => "bin",
        }
    }
}

impl std::str::FromStr for MatrixFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(MatrixFormat::Csv),
            "bin" => Ok(MatrixFormat::Bin),
            _ => Err(format!("unknown matrix format `{s}` (expected csv or bin)")),
        }
    }
}

pub fn encode_bin(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(BIN_HEADER + 8 * m.as_slice().len());
    out.extend_from_slice(BIN_MAGIC);
    out.extend_from_slice(&BIN_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn le_u64(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

pub fn decode_bin(bytes: &[u8]) -> std::result::Result<Matrix, FormatError> {
    if bytes.len() < 4 || &bytes[..4] != BIN_MAGIC {
        return Err(FormatError::new(0, "missing AMSL magic"));
    }
    if bytes.len() < BIN_HEADER {
        return Err(FormatError::new(bytes.len() as u64, "header truncated"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != BIN_VERSION {
        return Err(FormatError::new(4, format!("unsupported version {version}")));
    }
    let (rows, cols) = (le_u64(bytes, 8), le_u64(bytes, 16));
    if rows == 0 || cols == 0 {
        return Err(FormatError::new(8, format!("empty matrix {rows}x{cols}")));
    }
    let payload = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .and_then(|b| usize::try_from(b).ok())
        .filter(|b| b.checked_add(BIN_HEADER).is_some())
        .ok_or_else(|| FormatError::new(8, format!("dimensions {rows}x{cols} overflow")))?;
    let expected = BIN_HEADER + payload;
    if bytes.len() < expected {
        return Err(FormatError::new(bytes.len() as u64, format!("data truncated, expected {expected} bytes")));
    }
    if bytes.len() > expected {
        return Err(FormatError::new(expected as u64, "trailing bytes after matrix data"));
    }
    let mut data = Vec::with_capacity(payload / 8);
    for (k, chunk) in bytes[BIN_HEADER..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(FormatError::new((BIN_HEADER + 8 * k) as u64, "non-finite value"));
        }
        data.push(v);
    }
    Matrix::new(rows as usize, cols as usize, data).map_err(|e| FormatError::new(8, e.to_string()))
}

/// CSV text; `header` names the columns when given.
pub fn encode_csv(m: &Matrix, header: Option<&[&str]>) -> String {
    let mut out = String::new();
    if let Some(names) = header {
        out.push_str(&names.join(","));
        out.push('\n');
    }
    for row in m.iter_rows() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Parses CSV. The first non-blank line is a header if any of its fields is
/// not a number.
pub fn decode_csv(bytes: &[u8]) -> std::result::Result<Matrix, FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|e| FormatError::new(e.valid_up_to() as u64, "invalid UTF-8"))?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    let mut first = true;
    let mut offset = 0usize;
    for raw in text.split_inclusive('\n') {
        let start = offset;
        offset += raw.len();
        let line = raw.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let mut values = Vec::new();
        let mut bad = None;
        let mut at = start;
        for field in line.split(',') {
            match field.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    bad.get_or_insert((at, field.trim()));
                }
            }
            at += field.len() + 1;
        }
        if let Some((at, field)) = bad {
            if first {
                first = false;
                continue;
            }
            return Err(FormatError::new(at as u64, format!("`{field}` is not a finite number")));
        }
        first = false;
        match cols {
            None => cols = Some(values.len()),
            Some(c) if c != values.len() => {
                return Err(FormatError::new(start as u64, format!("expected {c} fields, found {}", values.len())))
            }
            Some(_) => {}
        }
        data.extend(values);
        rows += 1;
    }
    let Some(cols) = cols else {
        return Err(FormatError::new(offset as u64, "no data rows"));
    };
    Matrix::new(rows, cols, data).map_err(|e| FormatError::new(0, e.to_string()))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_matrix_as(path: &Path, format: MatrixFormat) -> Result<Matrix> {
    let bytes = read(path)?;
    let decoded = match format {
        MatrixFormat::Bin => decode_bin(&bytes),
        MatrixFormat::Csv => decode_csv(&bytes),
    };
    decoded.map_err(|e| Error::format(path, e))
}

/// Loads with the format implied by the extension.
pub fn load_matrix(path: &Path) -> Result<Matrix> {
    load_matrix_as(path, MatrixFormat::from_path(path))
}

pub fn save_matrix_as(m: &Matrix, path: &Path, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Bin => write(path, &encode_bin(m)),
        MatrixFormat::Csv => write(path, encode_csv(m, None).as_bytes()),
    }
}

pub fn save_matrix(m: &Matrix, path: &Path) -> Result<()> {
    save_matrix_as(m, path, MatrixFormat::from_path(path))
}

/// Integer ids, one per row of a single-column matrix file.
pub fn load_ids(path: &Path) -> Result<Vec<usize>> {
    let m = load_matrix(path)?;
    if m.cols() != 1 {
        return Err(Error::invalid(format!("{}: expected one column, found {}", path.display(), m.cols())));
    }
    m.as_slice().iter().enumerate().map(|(i, &v)| as_id(path, i, v)).collect()
}

/// `(input, record)` pairs from a two-column matrix file.
pub fn load_pairs(path: &Path) -> Result<Vec<(usize, usize)>> {
    let m = load_matrix(path)?;
    if m.cols() != 2 {
        return Err(Error::invalid(format!("{}: expected two columns, found {}", path.display(), m.cols())));
    }
    m.iter_rows().enumerate().map(|(i, r)| Ok((as_id(path, i, r[0])?, as_id(path, i, r[1])?))).collect()
}

/// Real targets from a single-column matrix file.
pub fn load_values(path: &Path) -> Result<Vec<f64>> {
    let m = load_matrix(path)?;
    if m.cols() != 1 {
        return Err(Error::invalid(format!("{}: expected one column, found {}", path.display(), m.cols())));
    }
    Ok(m.into_vec())
}

fn as_id(path: &Path, row: usize, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::invalid(format!("{}: row {row}: `{v}` is not a non-negative integer id", path.display())))
    }
}

/// Writes ids as a one-column CSV with the given header.
pub fn save_ids(ids: &[usize], header: &str, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(ids.len() * 3 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for id in ids {
        out.push_str(&id.to_string());
        out.push('\n');
    }
    write(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_header_layout() {
        let m = Matrix::new(1, 2, vec![1.5, -2.0]).unwrap();
        let b = encode_bin(&m);
        assert_eq!(&b[..4], b"AMSL");
        assert_eq!(&b[4..8], &[1, 0, 0, 0]);
        assert_eq!(le_u64(&b, 8), 1);
        assert_eq!(le_u64(&b, 16), 2);
        assert_eq!(&b[24..32], &1.5f64.to_le_bytes());
        assert_eq!(decode_bin(&b).unwrap(), m);
    }

    #[test]
    fn bin_errors_carry_offsets() {
        assert_eq!(decode_bin(b"").unwrap_err().offset, 0);
        assert_eq!(decode_bin(b"AMSX").unwrap_err().offset, 0);
        let mut b = encode_bin(&Matrix::new(2, 2, vec![0.0; 4]).unwrap());
        b.truncate(30);
        assert_eq!(decode_bin(&b).unwrap_err().offset, 30);
        let mut huge = encode_bin(&Matrix::new(1, 1, vec![0.0]).unwrap());
        huge[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        huge[16..24].copy_from_slice(&3u64.to_le_bytes());
        let e = decode_bin(&huge).unwrap_err();
        assert_eq!(e.offset, 8);
        assert!(e.message.contains("overflow"));
        let mut v2 = encode_bin(&Matrix::new(1, 1, vec![0.0]).unwrap());
        v2[4] = 2;
        assert_eq!(decode_bin(&v2).unwrap_err().offset, 4);
        let mut nan = encode_bin(&Matrix::new(1, 2, vec![0.0, 0.0]).unwrap());
        nan[32..40].copy_from_slice(&f64::NAN.to_le_bytes());
        assert_eq!(decode_bin(&nan).unwrap_err().offset, 32);
    }

    #[test]
    fn csv_with_and_without_header() {
        let m = Matrix::new(2, 2, vec![0.1, -3.0, 1e-300, 7.25]).unwrap();
        assert_eq!(decode_csv(encode_csv(&m, None).as_bytes()).unwrap(), m);
        assert_eq!(decode_csv(encode_csv(&m, Some(&["a", "b"])).as_bytes()).unwrap(), m);
        assert_eq!(decode_csv(b"a, b\r\n1, 2\r\n\r\n3,4").unwrap().as_slice(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn csv_errors_carry_offsets() {
        assert!(decode_csv(b"").is_err());
        assert!(decode_csv(b"x,y\n").is_err());
        let e = decode_csv(b"1,2\n3,oops\n").unwrap_err();
        assert_eq!(e.offset, 6);
        let e = decode_csv(b"1,2\n3\n").unwrap_err();
        assert_eq!(e.offset, 4);
        assert_eq!(decode_csv(b"1,2\n1,inf\n").unwrap_err().offset, 6);
    }
}
