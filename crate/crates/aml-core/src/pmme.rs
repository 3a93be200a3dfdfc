//! Patch-token alignment heatmaps.
//!
//! Both modalities are row-normalized, projected into the shared space,
//! and compared with a row-softmaxed dot product; each patch keeps the
//! probability of its best-matching token. The result is a per-patch
//! alignment score in [1/N_l, 1].

use crate::error::{AmlError, Result};
use crate::projection::{l2_normalize_rows, project, ProjectionPair};
use crate::tensor::Tensor;

/// Per-patch alignment heatmap over the feature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    grid: Tensor,
    grid_h: usize,
    grid_w: usize,
}

impl SimilarityMap {
    pub fn new(grid: Tensor) -> Result<Self> {
        if grid.shape().len() != 2 {
            return Err(AmlError::ShapeMismatch {
                context: format!("similarity map must be 2-D, got {:?}", grid.shape()),
            });
        }
        if grid.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(AmlError::InvalidParam(
                "similarity values must lie in [0, 1]".into(),
            ));
        }
        let (grid_h, grid_w) = (grid.rows(), grid.cols());
        Ok(SimilarityMap {
            grid,
            grid_h,
            grid_w,
        })
    }

    pub fn grid(&self) -> &Tensor {
        &self.grid
    }

    pub fn grid_h(&self) -> usize {
        self.grid_h
    }

    pub fn grid_w(&self) -> usize {
        self.grid_w
    }

    pub fn at(&self, i: usize, j: usize) -> f32 {
        self.grid.at2(i, j)
    }

    pub fn into_grid(self) -> Tensor {
        self.grid
    }
}

/// Pre-softmax patch-token similarity: entry (m, n) is the dot product
/// of projected patch row m with projected token row n.
pub fn similarity_logits(v_proj: &Tensor, t_proj: &Tensor) -> Result<Tensor> {
    if v_proj.shape().len() != 2 || t_proj.shape().len() != 2 {
        return Err(AmlError::ShapeMismatch {
            context: "similarity_logits expects 2-D operands".into(),
        });
    }
    if v_proj.cols() != t_proj.cols() {
        return Err(AmlError::ShapeMismatch {
            context: format!(
                "shared dimension disagrees: {} vs {}",
                v_proj.cols(),
                t_proj.cols()
            ),
        });
    }
    let (rows, inner) = (v_proj.rows(), v_proj.cols());
    let tokens = t_proj.rows();
    let mut out = vec![0.0f32; rows * tokens];
    for m in 0..rows {
        let vrow = &v_proj.data()[m * inner..(m + 1) * inner];
        for n in 0..tokens {
            let trow = &t_proj.data()[n * inner..(n + 1) * inner];
            let dot: f64 = vrow
                .iter()
                .zip(trow)
                .map(|(&a, &b)| a as f64 * b as f64)
                .sum();
            out[m * tokens + n] = dot as f32;
        }
    }
    Tensor::new(vec![rows, tokens], out)
}

/// Row-wise softmax, stabilized by subtracting each row's maximum.
pub fn row_softmax(logits: &Tensor) -> Result<Tensor> {
    if logits.shape().len() != 2 {
        return Err(AmlError::ShapeMismatch {
            context: "row_softmax expects a 2-D tensor".into(),
        });
    }
    let (rows, cols) = (logits.rows(), logits.cols());
    let mut out = vec![0.0f32; rows * cols];
    for r in 0..rows {
        let row = &logits.data()[r * cols..(r + 1) * cols];
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
        let mut exps = vec![0.0f64; cols];
        let mut sum = 0.0f64;
        for (e, &v) in exps.iter_mut().zip(row) {
            *e = (v as f64 - max).exp();
            sum += *e;
        }
        for (o, e) in out[r * cols..(r + 1) * cols].iter_mut().zip(exps) {
            *o = (e / sum) as f32;
        }
    }
    Tensor::new(vec![rows, cols], out)
}

/// Reduces the softmaxed similarity to the per-patch maximum over
/// tokens, reshaping rows to the patch grid in row-major order
/// (row index = i * grid_w + j).
pub fn patch_max(s_norm: &Tensor, grid_h: usize, grid_w: usize) -> Result<SimilarityMap> {
    if s_norm.shape().len() != 2 || s_norm.rows() != grid_h * grid_w {
        return Err(AmlError::ShapeMismatch {
            context: format!(
                "patch_max expects [{}x{}, N] rows, got {:?}",
                grid_h,
                grid_w,
                s_norm.shape()
            ),
        });
    }
    let tokens = s_norm.cols();
    let mut out = vec![0.0f32; grid_h * grid_w];
    for (i, o) in out.iter_mut().enumerate() {
        let row = &s_norm.data()[i * tokens..(i + 1) * tokens];
        *o = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    }
    SimilarityMap::new(Tensor::new(vec![grid_h, grid_w], out)?)
}

/// Full patch-token alignment pipeline: normalize rows of both feature
/// matrices, project each with its modality matrix, take the softmaxed
/// dot-product similarity, and keep each patch's best token score.
pub fn pmme(
    v_enc: &Tensor,
    t_enc: &Tensor,
    proj: &ProjectionPair,
    grid_h: usize,
    grid_w: usize,
) -> Result<SimilarityMap> {
    if v_enc.shape().len() != 2 || v_enc.rows() != grid_h * grid_w {
        return Err(AmlError::ShapeMismatch {
            context: format!(
                "visual features must be [{}x{}, D_i], got {:?}",
                grid_h,
                grid_w,
                v_enc.shape()
            ),
        });
    }
    if v_enc.cols() != proj.d_visual {
        return Err(AmlError::ShapeMismatch {
            context: format!(
                "visual dim {} does not match projection D_i {}",
                v_enc.cols(),
                proj.d_visual
            ),
        });
    }
    if t_enc.shape().len() != 2 || t_enc.cols() != proj.d_text {
        return Err(AmlError::ShapeMismatch {
            context: format!(
                "text features must be [N_l, {}], got {:?}",
                proj.d_text,
                t_enc.shape()
            ),
        });
    }
    let v_proj = project(&l2_normalize_rows(v_enc)?, &proj.w_visual)?;
    let t_proj = project(&l2_normalize_rows(t_enc)?, &proj.w_text)?;
    let logits = similarity_logits(&v_proj, &t_proj)?;
    let s_norm = row_softmax(&logits)?;
    patch_max(&s_norm, grid_h, grid_w)
}
