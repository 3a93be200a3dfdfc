//! 8-bit RGB images and binary masks with netpbm IO.
//!
//! Only the binary variants are supported: P6 for RGB (maxval 255) and P5
//! for masks, where a mask bit of 1 is stored as 255 and 0 as 0. Any other
//! gray value is rejected rather than thresholded.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{AmlError, Result};

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl ImageRgb {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(AmlError::InvalidParam(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != 3 * width * height {
            return Err(AmlError::ShapeMismatch {
                context: format!(
                    "pixel buffer length {} != 3*{width}*{height}",
                    pixels.len()
                ),
            });
        }
        Ok(ImageRgb {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(3 * width * height);
        for _ in 0..width * height {
            pixels.extend_from_slice(&rgb);
        }
        ImageRgb::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        let i = 3 * (row * self.width + col);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = 3 * (row * self.width + col);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Binary mask; every element is 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskBitmap {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl MaskBitmap {
    pub fn new(width: usize, height: usize, bits: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(AmlError::InvalidParam(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        if bits.len() != width * height {
            return Err(AmlError::ShapeMismatch {
                context: format!("bit buffer length {} != {width}*{height}", bits.len()),
            });
        }
        if let Some(&v) = bits.iter().find(|&&b| b > 1) {
            return Err(AmlError::InvalidParam(format!(
                "mask bits must be 0 or 1, found {v}"
            )));
        }
        Ok(MaskBitmap {
            width,
            height,
            bits,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        MaskBitmap::new(width, height, vec![0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [u8] {
        &mut self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.bits[row * self.width + col]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }
}

/// Reads the netpbm header: magic, width, height, maxval, then one
/// whitespace byte before the binary payload. `#` comments are skipped.
fn parse_pnm_header<'a>(bytes: &'a [u8], magic: &str) -> Result<(usize, usize, &'a [u8])> {
    if bytes.len() < 2 {
        return Err(AmlError::Truncated {
            needed: 2 - bytes.len(),
        });
    }
    let found = &bytes[..2];
    if found != magic.as_bytes() {
        if found[0] == b'P' && (found[1] == b'2' || found[1] == b'3') {
            return Err(AmlError::UnsupportedFormat(format!(
                "ASCII netpbm variant P{} is not supported",
                found[1] as char
            )));
        }
        return Err(AmlError::UnsupportedFormat(format!(
            "expected {magic}, found {:?}",
            String::from_utf8_lossy(found)
        )));
    }

    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(AmlError::UnsupportedFormat(
                "malformed netpbm header".into(),
            ));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
        *field = text
            .parse()
            .map_err(|_| AmlError::UnsupportedFormat("header field overflow".into()))?;
    }
    if fields[2] != 255 {
        return Err(AmlError::UnsupportedFormat(format!(
            "maxval {} not supported (must be 255)",
            fields[2]
        )));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(AmlError::UnsupportedFormat(
            "missing whitespace before payload".into(),
        ));
    }
    pos += 1;
    let (w, h) = (fields[0], fields[1]);
    if w == 0 || h == 0 {
        return Err(AmlError::UnsupportedFormat("zero image dimension".into()));
    }
    Ok((w, h, &bytes[pos..]))
}

pub fn encode_ppm(img: &ImageRgb) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<ImageRgb> {
    let (w, h, payload) = parse_pnm_header(bytes, "P6")?;
    let need = 3 * w * h;
    if payload.len() < need {
        return Err(AmlError::Truncated {
            needed: need - payload.len(),
        });
    }
    if payload.len() > need {
        return Err(AmlError::TrailingData {
            extra: payload.len() - need,
        });
    }
    ImageRgb::new(w, h, payload.to_vec())
}

pub fn write_ppm(img: &ImageRgb, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| AmlError::io(path, e))?;
    f.write_all(&encode_ppm(img))
        .map_err(|e| AmlError::io(path, e))?;
    Ok(())
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<ImageRgb> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| AmlError::io(path, e))?;
    decode_ppm(&bytes)
}

pub fn encode_pgm(mask: &MaskBitmap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    out.extend(mask.bits.iter().map(|&b| if b == 1 { 255 } else { 0 }));
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<MaskBitmap> {
    let (w, h, payload) = parse_pnm_header(bytes, "P5")?;
    let need = w * h;
    if payload.len() < need {
        return Err(AmlError::Truncated {
            needed: need - payload.len(),
        });
    }
    if payload.len() > need {
        return Err(AmlError::TrailingData {
            extra: payload.len() - need,
        });
    }
    let mut bits = Vec::with_capacity(need);
    for &v in payload {
        bits.push(match v {
            0 => 0,
            255 => 1,
            other => return Err(AmlError::MaskNotBinary { value: other }),
        });
    }
    MaskBitmap::new(w, h, bits)
}

pub fn write_pgm(mask: &MaskBitmap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| AmlError::io(path, e))?;
    f.write_all(&encode_pgm(mask))
        .map_err(|e| AmlError::io(path, e))?;
    Ok(())
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<MaskBitmap> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| AmlError::io(path, e))?;
    decode_pgm(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one_white_ppm() {
        let bytes = b"P6\n1 1\n255\n\xff\xff\xff";
        let img = decode_ppm(bytes).unwrap();
        assert_eq!(img.get(0, 0), [255, 255, 255]);
    }

    #[test]
    fn mask_round_trip() {
        let mask = MaskBitmap::new(2, 2, vec![1, 0, 0, 1]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        write_pgm(&mask, &path).unwrap();
        assert_eq!(read_pgm(&path).unwrap(), mask);
    }

    #[test]
    fn gray_value_is_not_binary() {
        let bytes = b"P5\n1 1\n255\n\x80";
        match decode_pgm(bytes) {
            Err(AmlError::MaskNotBinary { value: 128 }) => {}
            other => panic!("expected MaskNotBinary, got {other:?}"),
        }
    }

    #[test]
    fn ascii_variants_rejected() {
        assert!(matches!(
            decode_ppm(b"P3\n1 1\n255\n255 255 255\n"),
            Err(AmlError::UnsupportedFormat(_))
        ));
        assert!(matches!(
            decode_pgm(b"P2\n1 1\n255\n0\n"),
            Err(AmlError::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn unsupported_maxval() {
        assert!(matches!(
            decode_ppm(b"P6\n1 1\n65535\n\0\0\0\0\0\0"),
            Err(AmlError::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn truncated_payload() {
        assert!(matches!(
            decode_ppm(b"P6\n2 2\n255\n\0\0\0"),
            Err(AmlError::Truncated { .. })
        ));
    }

    #[test]
    fn header_comments_are_skipped() {
        let bytes = b"P6\n# made by hand\n1 1\n255\n\x01\x02\x03";
        let img = decode_ppm(bytes).unwrap();
        assert_eq!(img.get(0, 0), [1, 2, 3]);
    }

    #[test]
    fn ppm_round_trip() {
        let img = ImageRgb::new(3, 2, (0..18).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.ppm");
        write_ppm(&img, &path).unwrap();
        assert_eq!(read_ppm(&path).unwrap(), img);
    }
}
