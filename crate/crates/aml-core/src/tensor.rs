//! Dense f32 tensor and the AMLT binary file format.
//!
//! AMLT layout: magic `AMLT`, version byte 0x01, dtype byte 0x01 (f32),
//! ndim byte, `ndim` little-endian u32 dimensions, then the row-major
//! little-endian f32 payload. Round-trips are bit-exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{AmlError, Result};

pub const AMLT_MAGIC: [u8; 4] = *b"AMLT";
pub const AMLT_VERSION: u8 = 0x01;
pub const AMLT_DTYPE_F32: u8 = 0x01;
pub const MAX_NDIM: usize = 4;

/// Dense row-major f32 array with up to four axes.
///
/// Immutable in practice: operations produce new tensors, so values may be
/// shared across threads freely.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    /// Builds a tensor, enforcing shape/length consistency.
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        validate_shape(&shape)?;
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(AmlError::ShapeMismatch {
                context: format!(
                    "data length {} does not match shape {:?} (product {})",
                    data.len(),
                    shape,
                    expect
                ),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        validate_shape(&shape)?;
        let n = shape.iter().product();
        Ok(Tensor {
            shape,
            data: vec![0.0; n],
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Number of rows when viewed as a 2-D matrix.
    pub fn rows(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "rows() requires a 2-D tensor");
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "cols() requires a 2-D tensor");
        self.shape[1]
    }

    /// Element access for 2-D tensors.
    pub fn at2(&self, r: usize, c: usize) -> f32 {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[r * self.shape[1] + c]
    }

    /// Checks that every element is finite, reporting the first offender.
    pub fn check_finite(&self) -> Result<()> {
        if let Some(index) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(AmlError::NonFinite { index });
        }
        Ok(())
    }
}

fn validate_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.len() > MAX_NDIM {
        return Err(AmlError::InvalidShape {
            shape: shape.to_vec(),
            reason: format!("ndim must be 1..={MAX_NDIM}"),
        });
    }
    if shape.iter().any(|&d| d == 0) {
        return Err(AmlError::InvalidShape {
            shape: shape.to_vec(),
            reason: "dimensions must be positive".into(),
        });
    }
    let mut product: usize = 1;
    for &d in shape {
        product = product.checked_mul(d).ok_or_else(|| AmlError::InvalidShape {
            shape: shape.to_vec(),
            reason: "element count overflows usize".into(),
        })?;
    }
    if product.checked_mul(4).is_none() {
        return Err(AmlError::InvalidShape {
            shape: shape.to_vec(),
            reason: "byte size overflows usize".into(),
        });
    }
    Ok(())
}

/// Serializes a tensor into the AMLT byte layout.
pub fn encode_tensor(t: &Tensor) -> Result<Vec<u8>> {
    t.check_finite()?;
    let mut out = Vec::with_capacity(7 + 4 * t.shape.len() + 4 * t.data.len());
    out.extend_from_slice(&AMLT_MAGIC);
    out.push(AMLT_VERSION);
    out.push(AMLT_DTYPE_F32);
    out.push(t.shape.len() as u8);
    for &d in &t.shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses a tensor from AMLT bytes, validating header, length, and finiteness.
pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 4 {
        return Err(AmlError::Truncated {
            needed: 4 - bytes.len(),
        });
    }
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&bytes[..4]);
    if magic != AMLT_MAGIC {
        return Err(AmlError::BadMagic { found: magic });
    }
    if bytes.len() < 7 {
        return Err(AmlError::Truncated {
            needed: 7 - bytes.len(),
        });
    }
    if bytes[4] != AMLT_VERSION {
        return Err(AmlError::VersionMismatch {
            expected: AMLT_VERSION,
            found: bytes[4],
        });
    }
    if bytes[5] != AMLT_DTYPE_F32 {
        return Err(AmlError::DtypeMismatch { found: bytes[5] });
    }
    let ndim = bytes[6] as usize;
    if ndim == 0 || ndim > MAX_NDIM {
        return Err(AmlError::InvalidShape {
            shape: vec![],
            reason: format!("ndim byte {ndim} outside 1..={MAX_NDIM}"),
        });
    }
    let dims_end = 7 + 4 * ndim;
    if bytes.len() < dims_end {
        return Err(AmlError::Truncated {
            needed: dims_end - bytes.len(),
        });
    }
    let mut shape = Vec::with_capacity(ndim);
    for i in 0..ndim {
        let off = 7 + 4 * i;
        let d = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        shape.push(d as usize);
    }
    validate_shape(&shape)?;
    let count: usize = shape.iter().product();
    let payload_end = dims_end + 4 * count;
    if bytes.len() < payload_end {
        return Err(AmlError::Truncated {
            needed: payload_end - bytes.len(),
        });
    }
    if bytes.len() > payload_end {
        return Err(AmlError::TrailingData {
            extra: bytes.len() - payload_end,
        });
    }
    let mut data = Vec::with_capacity(count);
    for i in 0..count {
        let off = dims_end + 4 * i;
        data.push(f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()));
    }
    let t = Tensor { shape, data };
    t.check_finite()?;
    Ok(t)
}

pub fn write_tensor(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_tensor(t)?;
    let mut f = fs::File::create(path).map_err(|e| AmlError::io(path, e))?;
    f.write_all(&bytes).map_err(|e| AmlError::io(path, e))?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| AmlError::io(path, e))?;
    decode_tensor(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_shaped_tensor_header_bytes() {
        let t = Tensor::new(vec![1], vec![0.0]).unwrap();
        let bytes = encode_tensor(&t).unwrap();
        // magic + version + dtype + ndim + one u32 dim + one f32 = 15 bytes
        assert_eq!(bytes.len(), 15);
        assert_eq!(&bytes[..7], &[0x41, 0x4D, 0x4C, 0x54, 0x01, 0x01, 0x01]);
        assert_eq!(&bytes[7..11], &[1, 0, 0, 0]);
        assert_eq!(&bytes[11..], &[0, 0, 0, 0]);
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let data: Vec<f32> = (0..12).map(|i| (i as f32) * 0.37 - 1.5).collect();
        let t = Tensor::new(vec![3, 4], data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.amlt");
        write_tensor(&t, &path).unwrap();
        let back = read_tensor(&path).unwrap();
        assert_eq!(back.shape(), t.shape());
        for (a, b) in back.data().iter().zip(t.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn bad_magic_is_distinct_error() {
        let t = Tensor::new(vec![1], vec![0.0]).unwrap();
        let mut bytes = encode_tensor(&t).unwrap();
        bytes[3] = b'X'; // "AMLX"
        match decode_tensor(&bytes) {
            Err(AmlError::BadMagic { .. }) => {}
            other => panic!("expected BadMagic, got {other:?}"),
        }
    }

    #[test]
    fn version_and_dtype_mismatch() {
        let t = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let good = encode_tensor(&t).unwrap();

        let mut v = good.clone();
        v[4] = 0x02;
        assert!(matches!(
            decode_tensor(&v),
            Err(AmlError::VersionMismatch { found: 2, .. })
        ));

        let mut d = good;
        d[5] = 0x02;
        assert!(matches!(
            decode_tensor(&d),
            Err(AmlError::DtypeMismatch { found: 2 })
        ));
    }

    #[test]
    fn truncated_payload() {
        let t = Tensor::new(vec![2, 2], vec![1.0; 4]).unwrap();
        let bytes = encode_tensor(&t).unwrap();
        match decode_tensor(&bytes[..bytes.len() - 3]) {
            Err(AmlError::Truncated { needed: 3 }) => {}
            other => panic!("expected Truncated, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_rejected_on_write_and_read() {
        let t = Tensor {
            shape: vec![2],
            data: vec![1.0, f32::NAN],
        };
        assert!(matches!(
            encode_tensor(&t),
            Err(AmlError::NonFinite { index: 1 })
        ));

        let ok = Tensor::new(vec![1], vec![0.0]).unwrap();
        let mut bytes = encode_tensor(&ok).unwrap();
        bytes[11..15].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(
            decode_tensor(&bytes),
            Err(AmlError::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn shape_validation() {
        assert!(Tensor::new(vec![], vec![]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        assert!(Tensor::new(vec![1, 2, 3, 4, 5], vec![0.0; 120]).is_err());
        assert!(Tensor::new(vec![3], vec![0.0; 2]).is_err());
    }
}
