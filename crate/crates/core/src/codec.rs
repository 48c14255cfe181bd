//! Little-endian binary encoding for persisted tables and model weights.
//! `f64` values are stored as raw IEEE-754 bits, so round trips are exact.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

#[derive(Debug, Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(magic: &[u8; 8]) -> Self {
        Self { buf: magic.to_vec() }
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_bits().to_le_bytes());
        self
    }

    pub fn f64s(&mut self, vs: &[f64]) -> &mut Self {
        for &v in vs {
            self.f64(v);
        }
        self
    }

    pub fn matrix(&mut self, m: &DenseMatrix) -> &mut Self {
        self.u64(m.rows() as u64).u64(m.cols() as u64).f64s(m.as_slice())
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
    origin: &'a Path,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8], magic: &[u8; 8], origin: &'a Path) -> Result<Self> {
        if buf.len() < 8 || &buf[..8] != magic {
            return Err(Error::format(origin, "bad magic header"));
        }
        Ok(Self { buf, pos: 8, origin })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::format(self.origin, "unexpected end of file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::format(self.origin, "size overflow"))
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn matrix(&mut self) -> Result<DenseMatrix> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        let len = rows
            .checked_mul(cols)
            .filter(|&l| l <= (self.buf.len() - self.pos) / 8)
            .ok_or_else(|| Error::format(self.origin, "matrix larger than file"))?;
        let data = self.f64s(len)?;
        DenseMatrix::new(rows, cols, data).map_err(|e| Error::format(self.origin, e.to_string()))
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::format(self.origin, "trailing bytes"));
        }
        Ok(())
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}
