//! Dense row-major complex matrix and its `CXM1` binary encoding.

use std::io::{Read, Write};
use std::ops::{Index, IndexMut};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const CXM_MAGIC: &[u8; 4] = b"CXM1";
pub const CXM_VERSION: u32 = 1;
const HEADER_LEN: u64 = 4 + 4 + 8 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::param(format!(
                "{} elements cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Single-row matrix holding `v`.
    pub fn row_vector(v: &[Complex64]) -> Self {
        Self {
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [Complex64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.data[r * self.cols + c]).collect()
    }

    pub fn set_column(&mut self, c: usize, values: &[Complex64]) {
        assert_eq!(values.len(), self.rows);
        for (r, v) in values.iter().enumerate() {
            self.data[r * self.cols + c] = *v;
        }
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn transpose(&self) -> Self {
        const BLOCK: usize = 32;
        let (rows, cols) = (self.rows, self.cols);
        let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
        for r0 in (0..rows).step_by(BLOCK) {
            for c0 in (0..cols).step_by(BLOCK) {
                for r in r0..(r0 + BLOCK).min(rows) {
                    for c in c0..(c0 + BLOCK).min(cols) {
                        data[c * rows + r] = self.data[r * cols + c];
                    }
                }
            }
        }
        Self { rows: cols, cols: rows, data }
    }

    /// Flattens a 1×M or M×1 matrix into a vector.
    pub fn to_vector(&self) -> Result<Vec<Complex64>> {
        if self.rows == 1 || self.cols == 1 {
            Ok(self.data.clone())
        } else {
            Err(Error::param(format!(
                "expected a vector, found a {}x{} matrix",
                self.rows, self.cols
            )))
        }
    }

    pub fn write_cxm<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CXM_MAGIC)?;
        w.write_all(&CXM_VERSION.to_le_bytes())?;
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.cols as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 16);
        for z in &self.data {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn save_cxm(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_cxm(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Decodes a `CXM1` byte stream. Format errors carry the offset of the
    /// first offending byte.
    pub fn from_cxm_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |offset: u64, reason: &str| Error::Format {
            offset,
            reason: reason.to_string(),
        };
        for (i, (&got, &want)) in bytes.iter().zip(CXM_MAGIC.iter()).enumerate() {
            if got != want {
                return Err(bad(i as u64, "bad magic"));
            }
        }
        if bytes.len() < HEADER_LEN as usize {
            return Err(bad(bytes.len() as u64, "truncated header"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CXM_VERSION {
            let first = (4..8)
                .find(|&i| bytes[i] != CXM_VERSION.to_le_bytes()[i - 4])
                .unwrap_or(4);
            return Err(bad(first as u64, "unsupported version"));
        }
        let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let count = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(16))
            .ok_or_else(|| bad(8, "dimensions overflow"))?;
        let body = &bytes[HEADER_LEN as usize..];
        if (body.len() as u64) < count {
            return Err(bad(
                HEADER_LEN + body.len() as u64 - body.len() as u64 % 16,
                "truncated payload",
            ));
        }
        if body.len() as u64 > count {
            return Err(bad(HEADER_LEN + count, "trailing bytes after payload"));
        }
        let mut data = Vec::with_capacity((rows * cols) as usize);
        for (k, chunk) in body.chunks_exact(16).enumerate() {
            let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
            let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
            if !re.is_finite() {
                return Err(bad(HEADER_LEN + 16 * k as u64, "non-finite value"));
            }
            if !im.is_finite() {
                return Err(bad(HEADER_LEN + 16 * k as u64 + 8, "non-finite value"));
            }
            data.push(Complex64::new(re, im));
        }
        Ok(Self {
            rows: rows as usize,
            cols: cols as usize,
            data,
        })
    }

    pub fn read_cxm<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_cxm_bytes(&bytes)
    }

    pub fn load_cxm(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_cxm_bytes(&bytes)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ComplexMatrix {
        ComplexMatrix::from_fn(2, 3, |r, c| Complex64::new(r as f64, c as f64 - 0.5))
    }

    #[test]
    fn cxm_round_trip() {
        let m = sample();
        let mut buf = Vec::new();
        m.write_cxm(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 6 * 16);
        assert_eq!(&buf[..4], b"CXM1");
        assert_eq!(ComplexMatrix::from_cxm_bytes(&buf).unwrap(), m);
    }

    #[test]
    fn bad_magic_reports_first_byte() {
        let mut buf = Vec::new();
        sample().write_cxm(&mut buf).unwrap();
        buf[2] = b'X';
        match ComplexMatrix::from_cxm_bytes(&buf) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_offset() {
        let mut buf = Vec::new();
        sample().write_cxm(&mut buf).unwrap();
        buf.truncate(24 + 16 * 2 + 5);
        match ComplexMatrix::from_cxm_bytes(&buf) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 24 + 32),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nan_payload_rejected() {
        let mut buf = Vec::new();
        sample().write_cxm(&mut buf).unwrap();
        buf[24 + 16 + 8..24 + 16 + 16].copy_from_slice(&f64::NAN.to_le_bytes());
        match ComplexMatrix::from_cxm_bytes(&buf) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 24 + 24),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_version() {
        let mut buf = Vec::new();
        sample().write_cxm(&mut buf).unwrap();
        buf[4] = 2;
        assert!(matches!(
            ComplexMatrix::from_cxm_bytes(&buf),
            Err(Error::Format { offset: 4, .. })
        ));
    }
}
