//! Binary tensor files.
//!
//! ```text
//! "ESAT" | version u8 = 1 | dtype u8 (0 i8, 1 i32, 2 f64) | ndim u8
//! | dims: ndim x u32 LE | scale: f64 LE | payload: row-major, LE
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Matrix, QTensor};

pub const MAGIC: [u8; 4] = *b"ESAT";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    I8 = 0,
    I32 = 1,
    F64 = 2,
}

impl Dtype {
    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Dtype::I8),
            1 => Ok(Dtype::I32),
            2 => Ok(Dtype::F64),
            t => Err(Error::UnknownDtype(t)),
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::I8 => 1,
            Dtype::I32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::I8 => "int8",
            Dtype::I32 => "int32",
            Dtype::F64 => "float64",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    I8(Vec<i8>),
    I32(Vec<i32>),
    F64(Vec<f64>),
}

impl TensorData {
    pub fn dtype(&self) -> Dtype {
        match self {
            TensorData::I8(_) => Dtype::I8,
            TensorData::I32(_) => Dtype::I32,
            TensorData::F64(_) => Dtype::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::I8(v) => v.len(),
            TensorData::I32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    dims: Vec<u32>,
    scale: f64,
    data: TensorData,
}

impl TensorFile {
    pub fn new(dims: Vec<u32>, scale: f64, data: TensorData) -> Result<Self> {
        if dims.len() > usize::from(u8::MAX) {
            return Err(Error::InvalidParameter(format!("{} dimensions", dims.len())));
        }
        let count: usize = dims.iter().map(|&d| d as usize).product();
        if count != data.len() {
            return Err(Error::InvalidParameter(format!(
                "dims {dims:?} describe {count} elements, data has {}",
                data.len()
            )));
        }
        Ok(Self { dims, scale, data })
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn dtype(&self) -> Dtype {
        self.data.dtype()
    }

    pub fn from_qtensor(t: &QTensor) -> Self {
        Self {
            dims: vec![t.rows() as u32, t.cols() as u32],
            scale: t.scale(),
            data: TensorData::I8(t.values().as_slice().to_vec()),
        }
    }

    pub fn from_i32(m: &Matrix<i32>, scale: f64) -> Self {
        Self {
            dims: vec![m.rows() as u32, m.cols() as u32],
            scale,
            data: TensorData::I32(m.as_slice().to_vec()),
        }
    }

    pub fn from_real(m: &Matrix<f64>) -> Self {
        Self {
            dims: vec![m.rows() as u32, m.cols() as u32],
            scale: 1.0,
            data: TensorData::F64(m.as_slice().to_vec()),
        }
    }

    /// Rows and columns; a 1-D tensor is one row.
    fn shape2(&self) -> Result<(usize, usize)> {
        match *self.dims.as_slice() {
            [n] => Ok((1, n as usize)),
            [r, c] => Ok((r as usize, c as usize)),
            _ => Err(Error::InvalidParameter(format!(
                "expected a 1-D or 2-D tensor, found dims {:?}",
                self.dims
            ))),
        }
    }

    fn mismatch(&self, expected: Dtype) -> Error {
        Error::DtypeMismatch {
            expected: expected.name(),
            found: self.dtype().name(),
        }
    }

    pub fn to_qtensor(&self) -> Result<QTensor> {
        let (r, c) = self.shape2()?;
        match &self.data {
            TensorData::I8(v) => QTensor::new(r, c, v.clone(), self.scale),
            _ => Err(self.mismatch(Dtype::I8)),
        }
    }

    pub fn to_i32(&self) -> Result<Matrix<i32>> {
        let (r, c) = self.shape2()?;
        match &self.data {
            TensorData::I32(v) => Matrix::new(r, c, v.clone()),
            _ => Err(self.mismatch(Dtype::I32)),
        }
    }

    /// Real values: `f64` data as stored.
    pub fn to_real(&self) -> Result<Matrix<f64>> {
        let (r, c) = self.shape2()?;
        match &self.data {
            TensorData::F64(v) => Matrix::new(r, c, v.clone()),
            _ => Err(self.mismatch(Dtype::F64)),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let dtype = self.dtype();
        let mut out = Vec::with_capacity(15 + 4 * self.dims.len() + dtype.size() * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(dtype as u8);
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&self.scale.to_le_bytes());
        match &self.data {
            TensorData::I8(v) => out.extend(v.iter().map(|&x| x as u8)),
            TensorData::I32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let need = |n: usize| {
            if bytes.len() < n {
                Err(Error::Truncated {
                    expected: n,
                    actual: bytes.len(),
                })
            } else {
                Ok(())
            }
        };
        need(4)?;
        let magic: [u8; 4] = bytes[..4].try_into().expect("four bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        need(7)?;
        if bytes[4] != VERSION {
            return Err(Error::UnsupportedVersion(bytes[4]));
        }
        let dtype = Dtype::from_tag(bytes[5])?;
        let ndim = usize::from(bytes[6]);
        let header = 7 + 4 * ndim + 8;
        need(header)?;
        let dims: Vec<u32> = bytes[7..7 + 4 * ndim]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("four bytes")))
            .collect();
        let scale = f64::from_le_bytes(bytes[header - 8..header].try_into().expect("eight bytes"));
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .and_then(|n| n.checked_mul(dtype.size()))
            .ok_or_else(|| Error::InvalidParameter(format!("dims {dims:?} overflow")))?;
        need(header + count)?;
        let extra = bytes.len() - header - count;
        if extra > 0 {
            return Err(Error::TrailingBytes(extra));
        }
        let payload = &bytes[header..];
        let data = match dtype {
            Dtype::I8 => TensorData::I8(payload.iter().map(|&b| b as i8).collect()),
            Dtype::I32 => TensorData::I32(
                payload
                    .chunks_exact(4)
                    .map(|c| i32::from_le_bytes(c.try_into().expect("four bytes")))
                    .collect(),
            ),
            Dtype::F64 => TensorData::F64(
                payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
                    .collect(),
            ),
        };
        Ok(Self { dims, scale, data })
    }
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<TensorFile> {
    TensorFile::from_bytes(&fs::read(path)?)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &TensorFile) -> Result<()> {
    fs::write(path, t.to_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TensorFile {
        let q = QTensor::new(2, 2, vec![1, -2, 3, 4], 0.25).unwrap();
        TensorFile::from_qtensor(&q)
    }

    #[test]
    fn exact_bytes() {
        let bytes = sample().to_bytes();
        let mut want = b"ESAT".to_vec();
        want.extend([1, 0, 2, 2, 0, 0, 0, 2, 0, 0, 0]);
        want.extend(0.25f64.to_le_bytes());
        want.extend([1, 0xFE, 3, 4]);
        assert_eq!(bytes, want);
    }

    #[test]
    fn round_trip_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.esat");
        write_tensor(&path, &sample()).unwrap();
        let back = read_tensor(&path).unwrap();
        assert_eq!(back, sample());
        assert_eq!(back.to_qtensor().unwrap().values().as_slice(), &[1, -2, 3, 4]);
    }

    #[test]
    fn distinct_errors() {
        let good = sample().to_bytes();
        let mut bad = good.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(TensorFile::from_bytes(&bad), Err(Error::BadMagic(_))));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(TensorFile::from_bytes(&bad), Err(Error::UnsupportedVersion(2))));
        let mut bad = good.clone();
        bad[5] = 9;
        assert!(matches!(TensorFile::from_bytes(&bad), Err(Error::UnknownDtype(9))));
        assert!(matches!(
            TensorFile::from_bytes(&good[..good.len() - 1]),
            Err(Error::Truncated { .. })
        ));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(TensorFile::from_bytes(&long), Err(Error::TrailingBytes(1))));
        assert!(matches!(sample().to_real(), Err(Error::DtypeMismatch { .. })));
    }

    #[test]
    fn other_dtypes() {
        let m = Matrix::new(1, 3, vec![i32::MIN, 0, i32::MAX]).unwrap();
        let t = TensorFile::from_i32(&m, 1.0);
        assert_eq!(TensorFile::from_bytes(&t.to_bytes()).unwrap().to_i32().unwrap(), m);
        let r = Matrix::new(1, 2, vec![-0.0, f64::MIN_POSITIVE]).unwrap();
        let t = TensorFile::from_real(&r);
        assert_eq!(TensorFile::from_bytes(&t.to_bytes()).unwrap().to_bytes(), t.to_bytes());
    }
}
