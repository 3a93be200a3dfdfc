//! Alignment-aware filtering masks: upsample the patch heatmap to pixel
//! resolution, collect weakly aligned pixels under a threshold, randomly
//! retain a proportion of them, aggregate to image blocks with an
//! any-triggers-all rule, and zero the masked blocks out of the image.

use crate::error::{AmlError, Result};
use crate::image::{ImageRgb, MaskBitmap};
use crate::pmme::SimilarityMap;
use crate::rng::{RngStream, STREAM_DROPOUT};
use crate::tensor::Tensor;

/// Pipeline configuration. Defaults: tau 0.4, rho 0.25, 32x32 blocks,
/// D_a 2048, 14x14 patch grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AmlConfig {
    /// Similarity threshold; pixels strictly below it are weak.
    pub tau: f64,
    /// Dropout ratio: each weak pixel is kept with probability 1 - rho.
    pub rho: f64,
    pub block_h: usize,
    pub block_w: usize,
    pub d_attach: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub seed: u64,
}

impl Default for AmlConfig {
    fn default() -> Self {
        AmlConfig {
            tau: 0.4,
            rho: 0.25,
            block_h: 32,
            block_w: 32,
            d_attach: 2048,
            grid_h: 14,
            grid_w: 14,
            seed: 0,
        }
    }
}

impl AmlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.tau) {
            return Err(AmlError::InvalidParam(format!(
                "tau must lie in [0, 1), got {}",
                self.tau
            )));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(AmlError::InvalidParam(format!(
                "rho must lie in [0, 1], got {}",
                self.rho
            )));
        }
        if self.block_h == 0 || self.block_w == 0 {
            return Err(AmlError::InvalidParam("block size must be positive".into()));
        }
        if self.d_attach == 0 || self.grid_h == 0 || self.grid_w == 0 {
            return Err(AmlError::InvalidParam(
                "d_attach and grid dims must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Block-resolution binary mask; bit 1 means "zero this block".
/// Edge blocks are clipped when the image size is not a multiple of the
/// block size, so the blocks always partition the image exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMask {
    rows: usize,
    cols: usize,
    block_h: usize,
    block_w: usize,
    bits: Vec<u8>,
}

impl BlockMask {
    pub fn new(rows: usize, cols: usize, block_h: usize, block_w: usize, bits: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 || block_h == 0 || block_w == 0 {
            return Err(AmlError::InvalidParam("block mask dims must be positive".into()));
        }
        if bits.len() != rows * cols {
            return Err(AmlError::ShapeMismatch {
                context: format!("block bits {} != {rows}*{cols}", bits.len()),
            });
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(AmlError::InvalidParam("block bits must be 0 or 1".into()));
        }
        Ok(BlockMask {
            rows,
            cols,
            block_h,
            block_w,
            bits,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn block_h(&self) -> usize {
        self.block_h
    }

    pub fn block_w(&self) -> usize {
        self.block_w
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, p: usize, q: usize) -> u8 {
        self.bits[p * self.cols + q]
    }

    /// Fraction of blocks that are masked.
    pub fn masked_fraction(&self) -> f64 {
        self.bits.iter().filter(|&&b| b == 1).count() as f64 / self.bits.len() as f64
    }

    /// Block-resolution bitmap view for PGM serialization.
    pub fn to_bitmap(&self) -> MaskBitmap {
        MaskBitmap::new(self.cols, self.rows, self.bits.clone()).expect("bits validated")
    }
}

/// Canonically ordered set of (row, col) pixel coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PixelSet {
    coords: Vec<(u32, u32)>,
}

impl PixelSet {
    /// Builds the canonical form: strictly increasing lexicographic order.
    pub fn new(mut coords: Vec<(u32, u32)>) -> Self {
        coords.sort_unstable();
        coords.dedup();
        PixelSet { coords }
    }

    pub fn coords(&self) -> &[(u32, u32)] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn contains(&self, coord: (u32, u32)) -> bool {
        self.coords.binary_search(&coord).is_ok()
    }

    pub fn is_subset_of(&self, other: &PixelSet) -> bool {
        self.coords.iter().all(|&c| other.contains(c))
    }
}

pub(crate) fn upsample_f64(src: &[f64], src_h: usize, src_w: usize, dst_h: usize, dst_w: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; dst_h * dst_w];
    let scale_y = src_h as f64 / dst_h as f64;
    let scale_x = src_w as f64 / dst_w as f64;
    for y in 0..dst_h {
        // half-pixel centers: src coordinate of output pixel p is
        // (p + 0.5) * (src / dst) - 0.5, clamped to [0, src - 1]
        let sy = ((y as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (src_h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(src_h - 1);
        let fy = sy - y0 as f64;
        for x in 0..dst_w {
            let sx = ((x as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (src_w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(src_w - 1);
            let fx = sx - x0 as f64;
            let v00 = src[y0 * src_w + x0];
            let v01 = src[y0 * src_w + x1];
            let v10 = src[y1 * src_w + x0];
            let v11 = src[y1 * src_w + x1];
            let top = v00 + (v01 - v00) * fx;
            let bot = v10 + (v11 - v10) * fx;
            out[y * dst_w + x] = top + (bot - top) * fy;
        }
    }
    out
}

/// Adjoint of [`upsample_f64`]: scatters pixel-level values back to the
/// source grid with the same blend weights, so that
/// `dot(upsample(s), g) == dot(s, adjoint(g))`.
pub(crate) fn upsample_adjoint_f64(
    grad: &[f64],
    src_h: usize,
    src_w: usize,
    dst_h: usize,
    dst_w: usize,
) -> Vec<f64> {
    let mut out = vec![0.0f64; src_h * src_w];
    let scale_y = src_h as f64 / dst_h as f64;
    let scale_x = src_w as f64 / dst_w as f64;
    for y in 0..dst_h {
        let sy = ((y as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (src_h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(src_h - 1);
        let fy = sy - y0 as f64;
        for x in 0..dst_w {
            let sx = ((x as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (src_w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(src_w - 1);
            let fx = sx - x0 as f64;
            let g = grad[y * dst_w + x];
            out[y0 * src_w + x0] += g * (1.0 - fy) * (1.0 - fx);
            out[y0 * src_w + x1] += g * (1.0 - fy) * fx;
            out[y1 * src_w + x0] += g * fy * (1.0 - fx);
            out[y1 * src_w + x1] += g * fy * fx;
        }
    }
    out
}

/// Bilinear upsampling of the similarity map to pixel resolution with
/// half-pixel-center sampling. Target must be at least the grid size.
pub fn bilinear_upsample(s: &SimilarityMap, height: usize, width: usize) -> Result<Tensor> {
    if height == 0 || width == 0 {
        return Err(AmlError::InvalidParam("target size must be positive".into()));
    }
    if height < s.grid_h() || width < s.grid_w() {
        return Err(AmlError::InvalidParam(format!(
            "target {height}x{width} smaller than grid {}x{}",
            s.grid_h(),
            s.grid_w()
        )));
    }
    let src: Vec<f64> = s.grid().data().iter().map(|&v| v as f64).collect();
    let out = upsample_f64(&src, s.grid_h(), s.grid_w(), height, width);
    Tensor::new(vec![height, width], out.into_iter().map(|v| v as f32).collect())
}

/// Pixels whose similarity is strictly below tau, in canonical order.
pub fn weak_pixels(s_pixel: &Tensor, tau: f64) -> Result<PixelSet> {
    if s_pixel.shape().len() != 2 {
        return Err(AmlError::ShapeMismatch {
            context: "weak_pixels expects a 2-D map".into(),
        });
    }
    let (h, w) = (s_pixel.rows(), s_pixel.cols());
    let mut coords = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if (s_pixel.at2(r, c) as f64) < tau {
                coords.push((r as u32, c as u32));
            }
        }
    }
    Ok(PixelSet::new(coords))
}

/// Keeps each weak pixel independently with probability 1 - rho, using
/// the dropout stream for the given seed. Pixels are visited in
/// canonical order, one uniform draw each.
pub fn dropout_select(weak: &PixelSet, rho: f64, seed: u64) -> Result<PixelSet> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(AmlError::InvalidParam(format!(
            "rho must lie in [0, 1], got {rho}"
        )));
    }
    let mut stream = RngStream::new(seed, STREAM_DROPOUT);
    let kept: Vec<(u32, u32)> = weak
        .coords()
        .iter()
        .filter(|_| stream.next_f64() >= rho)
        .copied()
        .collect();
    Ok(PixelSet::new(kept))
}

/// Marks block (p, q) when any selected pixel falls in
/// `[p*block_h, min((p+1)*block_h, H)) x [q*block_w, min((q+1)*block_w, W))`.
pub fn block_aggregate(
    selected: &PixelSet,
    height: usize,
    width: usize,
    block_h: usize,
    block_w: usize,
) -> Result<BlockMask> {
    if height == 0 || width == 0 || block_h == 0 || block_w == 0 {
        return Err(AmlError::InvalidParam("sizes must be positive".into()));
    }
    let rows = height.div_ceil(block_h);
    let cols = width.div_ceil(block_w);
    let mut bits = vec![0u8; rows * cols];
    for &(r, c) in selected.coords() {
        if r as usize >= height || c as usize >= width {
            return Err(AmlError::OutOfBounds {
                row: r,
                col: c,
                height,
                width,
            });
        }
        let p = r as usize / block_h;
        let q = c as usize / block_w;
        bits[p * cols + q] = 1;
    }
    BlockMask::new(rows, cols, block_h, block_w, bits)
}

/// Zeroes out every masked block; all other pixels are byte-identical.
pub fn apply_mask(image: &ImageRgb, mask: &BlockMask) -> Result<ImageRgb> {
    let (h, w) = (image.height(), image.width());
    if mask.rows() != h.div_ceil(mask.block_h()) || mask.cols() != w.div_ceil(mask.block_w()) {
        return Err(AmlError::ShapeMismatch {
            context: format!(
                "block mask {}x{} (blocks {}x{}) does not cover image {h}x{w}",
                mask.rows(),
                mask.cols(),
                mask.block_h(),
                mask.block_w()
            ),
        });
    }
    let mut out = image.clone();
    for p in 0..mask.rows() {
        for q in 0..mask.cols() {
            if mask.get(p, q) == 0 {
                continue;
            }
            let r_end = ((p + 1) * mask.block_h()).min(h);
            let c_end = ((q + 1) * mask.block_w()).min(w);
            for r in p * mask.block_h()..r_end {
                for c in q * mask.block_w()..c_end {
                    out.set(r, c, [0, 0, 0]);
                }
            }
        }
    }
    Ok(out)
}

/// Full masking stage: upsample, threshold, dropout, aggregate, zero.
/// Deterministic in the inputs and `cfg.seed`.
pub fn afm(s: &SimilarityMap, image: &ImageRgb, cfg: &AmlConfig) -> Result<(ImageRgb, BlockMask)> {
    cfg.validate()?;
    let s_pixel = bilinear_upsample(s, image.height(), image.width())?;
    let weak = weak_pixels(&s_pixel, cfg.tau)?;
    let selected = dropout_select(&weak, cfg.rho, cfg.seed)?;
    let mask = block_aggregate(
        &selected,
        image.height(),
        image.width(),
        cfg.block_h,
        cfg.block_w,
    )?;
    let masked = apply_mask(image, &mask)?;
    Ok((masked, mask))
}
