//! Eraser model files.
//!
//! Layout (little-endian): `AMSE`, version `u32`, kind `u8` (0 SAL, 1 INLP),
//! input dim `d: u64`, `d` input means as `f64`, then per kind:
//!
//! * SAL: removed `u64`, reduced `u8`, kept `k: u64`, `d × k` basis row-major.
//! * INLP: iterations `u64`, accuracy count `a: u64`, `a` accuracies,
//!   `d × d` projection row-major.

use std::path::Path;

use amsal_core::{Eraser, EraserKind, Matrix};

use crate::error::{Error, FormatError, Result};
use crate::format::write;

pub const MODEL_MAGIC: &[u8; 4] = b"AMSE";
pub const MODEL_VERSION: u32 = 1;

pub fn encode_eraser(e: &Eraser) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    let floats = |out: &mut Vec<u8>, v: &[f64]| v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    let word = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u64).to_le_bytes());
    match &e.kind {
        EraserKind::Sal { basis, removed, reduced } => {
            out.push(0);
            word(&mut out, e.dim());
            floats(&mut out, &e.input_means);
            word(&mut out, *removed);
            out.push(u8::from(*reduced));
            word(&mut out, basis.cols());
            floats(&mut out, basis.as_slice());
        }
        EraserKind::Inlp { projection, iterations, accuracies } => {
            out.push(1);
            word(&mut out, e.dim());
            floats(&mut out, &e.input_means);
            word(&mut out, *iterations);
            word(&mut out, accuracies.len());
            floats(&mut out, accuracies);
            floats(&mut out, projection.as_slice());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> std::result::Result<&'a [u8], FormatError> {
        match self.pos.checked_add(n) {
            Some(end) if end <= self.bytes.len() => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            _ => Err(FormatError::new(self.bytes.len() as u64, format!("truncated while reading {what}"))),
        }
    }

    fn u8(&mut self, what: &str) -> std::result::Result<u8, FormatError> {
        Ok(self.take(1, what)?[0])
    }

    fn word(&mut self, what: &str) -> std::result::Result<usize, FormatError> {
        let at = self.pos as u64;
        let v = u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes"));
        usize::try_from(v).ok().filter(|&v| v <= self.bytes.len()).ok_or_else(|| FormatError::new(at, format!("{what} {v} too large")))
    }

    fn floats(&mut self, count: usize, what: &str) -> std::result::Result<Vec<f64>, FormatError> {
        let at = self.pos;
        let len = count.checked_mul(8).ok_or_else(|| FormatError::new(at as u64, format!("{what} size overflows")))?;
        let raw = self.take(len, what)?;
        raw.chunks_exact(8)
            .enumerate()
            .map(|(k, c)| {
                let v = f64::from_le_bytes(c.try_into().expect("8 bytes"));
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(FormatError::new((at + 8 * k) as u64, format!("non-finite value in {what}")))
                }
            })
            .collect()
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> std::result::Result<Matrix, FormatError> {
        let at = self.pos as u64;
        let count = rows.checked_mul(cols).ok_or_else(|| FormatError::new(at, format!("{what} dimensions overflow")))?;
        let data = self.floats(count, what)?;
        Matrix::new(rows, cols, data).map_err(|e| FormatError::new(at, e.to_string()))
    }
}

pub fn decode_eraser(bytes: &[u8]) -> std::result::Result<Eraser, FormatError> {
    if bytes.len() < 4 || &bytes[..4] != MODEL_MAGIC {
        return Err(FormatError::new(0, "missing AMSE magic"));
    }
    let mut c = Cursor { bytes, pos: 4 };
    let version = u32::from_le_bytes(c.take(4, "version")?.try_into().expect("4 bytes"));
    if version != MODEL_VERSION {
        return Err(FormatError::new(4, format!("unsupported version {version}")));
    }
    let kind_at = c.pos as u64;
    let tag = c.u8("kind")?;
    let d = c.word("input dim")?;
    if d == 0 {
        return Err(FormatError::new(9, "input dim is zero"));
    }
    let input_means = c.floats(d, "input means")?;
    let kind = match tag {
        0 => {
            let removed = c.word("removed count")?;
            let reduced = match c.u8("reduced flag")? {
                0 => false,
                1 => true,
                v => return Err(FormatError::new(c.pos as u64 - 1, format!("reduced flag {v} is not 0 or 1"))),
            };
            let kept_at = c.pos as u64;
            let kept = c.word("kept count")?;
            if kept == 0 || kept + removed > d {
                return Err(FormatError::new(kept_at, format!("kept {kept} and removed {removed} do not fit dim {d}")));
            }
            let basis = c.matrix(d, kept, "basis")?;
            EraserKind::Sal { basis, removed, reduced }
        }
        1 => {
            let iterations = c.word("iteration count")?;
            let count = c.word("accuracy count")?;
            let accuracies = c.floats(count, "accuracies")?;
            let projection = c.matrix(d, d, "projection")?;
            EraserKind::Inlp { projection, iterations, accuracies }
        }
        t => return Err(FormatError::new(kind_at, format!("unknown eraser kind {t}"))),
    };
    if c.pos != bytes.len() {
        return Err(FormatError::new(c.pos as u64, "trailing bytes after model"));
    }
    Ok(Eraser { kind, input_means })
}

pub fn save_eraser(e: &Eraser, path: &Path) -> Result<()> {
    write(path, &encode_eraser(e))
}

pub fn load_eraser(path: &Path) -> Result<Eraser> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_eraser(&bytes).map_err(|e| Error::format(path, e))
}
