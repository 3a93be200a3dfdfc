//! Gaussian random projection of two feature modalities into a shared
//! space, plus closed-form bound calculators and Monte Carlo verifiers
//! for the dimension/distortion guarantees behind it.

use rayon::prelude::*;

use crate::error::{AmlError, Result};
use crate::rng::{RngStream, STREAM_MONTE_CARLO_BASE, STREAM_PROJECTION};
use crate::tensor::Tensor;

/// Rows whose L2 norm falls below this are normalized to all-zeros
/// instead of dividing by a vanishing norm.
pub const ZERO_ROW_NORM_EPS: f64 = 1e-12;

/// Ambient dimension of the probe vectors used by [`mc_chi2_tail`].
/// Any positive value yields the same scaled chi-squared law; a small
/// one keeps the per-trial matrix cheap.
pub const CHI2_PROBE_AMBIENT_DIM: usize = 4;

/// The two fixed Gaussian projection matrices, one per modality.
/// Entries are i.i.d. N(0, 1/D_a) and never change after sampling.
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    pub w_visual: Tensor,
    pub w_text: Tensor,
    pub d_visual: usize,
    pub d_text: usize,
    pub d_attach: usize,
    pub seed: u64,
}

/// Outcome of a Monte Carlo distortion run.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionReport {
    pub trials: usize,
    pub epsilon_target: f64,
    pub violation_rate: f64,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
}

impl DistortionReport {
    /// Flat key=value text, one metric per line.
    pub fn to_text(&self) -> String {
        format!(
            "trials={}\nepsilon_target={}\nviolation_rate={}\nmax_abs_error={}\nmean_abs_error={}\n",
            self.trials,
            self.epsilon_target,
            self.violation_rate,
            self.max_abs_error,
            self.mean_abs_error
        )
    }
}

/// L2-normalizes every row; rows with norm below [`ZERO_ROW_NORM_EPS`]
/// come back as all-zeros rather than NaN (padded tokens produce them).
pub fn l2_normalize_rows(m: &Tensor) -> Result<Tensor> {
    if m.shape().len() != 2 {
        return Err(AmlError::ShapeMismatch {
            context: format!("l2_normalize_rows expects 2-D, got {:?}", m.shape()),
        });
    }
    let (rows, cols) = (m.rows(), m.cols());
    let mut out = vec![0.0f32; rows * cols];
    for r in 0..rows {
        let row = &m.data()[r * cols..(r + 1) * cols];
        let norm = row.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
        if norm >= ZERO_ROW_NORM_EPS {
            for c in 0..cols {
                out[r * cols + c] = (row[c] as f64 / norm) as f32;
            }
        }
    }
    Tensor::new(vec![rows, cols], out)
}

/// Samples the fixed projection pair for the given seed and dimensions.
/// W_visual is drawn first, then W_text, both row-major from the
/// projection stream; entries are N(0, 1/D_a).
pub fn sample_projection(seed: u64, d_visual: usize, d_text: usize, d_attach: usize) -> Result<ProjectionPair> {
    for (name, v) in [("d_visual", d_visual), ("d_text", d_text), ("d_attach", d_attach)] {
        if v == 0 {
            return Err(AmlError::InvalidParam(format!("{name} must be >= 1")));
        }
    }
    let stddev = 1.0 / (d_attach as f64).sqrt();
    let mut stream = RngStream::new(seed, STREAM_PROJECTION);
    let mut draw = |rows: usize, cols: usize| -> Tensor {
        let data: Vec<f32> = (0..rows * cols)
            .map(|_| (stream.next_standard_normal() * stddev) as f32)
            .collect();
        Tensor::new(vec![rows, cols], data).expect("shape/data consistent")
    };
    let w_visual = draw(d_visual, d_attach);
    let w_text = draw(d_text, d_attach);
    Ok(ProjectionPair {
        w_visual,
        w_text,
        d_visual,
        d_text,
        d_attach,
        seed,
    })
}

/// Matrix product `normed[R, D] * w[D, D_a] -> [R, D_a]`, accumulated
/// in f64 row by row so the result does not depend on thread count.
pub fn project(normed: &Tensor, w: &Tensor) -> Result<Tensor> {
    if normed.shape().len() != 2 || w.shape().len() != 2 {
        return Err(AmlError::ShapeMismatch {
            context: format!(
                "project expects 2-D operands, got {:?} and {:?}",
                normed.shape(),
                w.shape()
            ),
        });
    }
    let (rows, inner) = (normed.rows(), normed.cols());
    let (w_rows, w_cols) = (w.rows(), w.cols());
    if inner != w_rows {
        return Err(AmlError::ShapeMismatch {
            context: format!("inner dims disagree: [{rows}, {inner}] x [{w_rows}, {w_cols}]"),
        });
    }
    let x = normed.data();
    let wd = w.data();
    let mut out = vec![0.0f32; rows * w_cols];
    out.par_chunks_mut(w_cols).enumerate().for_each(|(r, orow)| {
        let xrow = &x[r * inner..(r + 1) * inner];
        let mut acc = vec![0.0f64; w_cols];
        for (l, &xv) in xrow.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wrow = &wd[l * w_cols..(l + 1) * w_cols];
            let xv = xv as f64;
            for (a, &wv) in acc.iter_mut().zip(wrow) {
                *a += xv * wv as f64;
            }
        }
        for (o, a) in orow.iter_mut().zip(acc) {
            *o = a as f32;
        }
    });
    Tensor::new(vec![rows, w_cols], out)
}

fn check_jl_params(m: usize, n: usize, sigma: f64, epsilon: Option<f64>) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(AmlError::InvalidParam("M and N must be >= 1".into()));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(AmlError::InvalidParam(format!(
            "sigma must lie in (0, 1), got {sigma}"
        )));
    }
    if let Some(e) = epsilon {
        if !(e > 0.0 && e < 1.0) {
            return Err(AmlError::InvalidParam(format!(
                "epsilon must lie in (0, 1), got {e}"
            )));
        }
    }
    Ok(())
}

/// Minimum projection dimension `ceil(8 ln(M*N/sigma) / epsilon^2)`
/// guaranteeing (1 +/- epsilon) distortion with failure probability sigma.
pub fn jl_dim_bound(m: usize, n: usize, sigma: f64, epsilon: f64) -> Result<usize> {
    check_jl_params(m, n, sigma, Some(epsilon))?;
    let v = 8.0 * ((m as f64) * (n as f64) / sigma).ln() / (epsilon * epsilon);
    Ok(v.ceil() as usize)
}

/// Inversion of the dimension bound: the distortion achievable at a
/// given projection dimension, `sqrt(8 ln(M*N/sigma) / D_a)`.
pub fn jl_epsilon(d_attach: usize, m: usize, n: usize, sigma: f64) -> Result<f64> {
    check_jl_params(m, n, sigma, None)?;
    if d_attach == 0 {
        return Err(AmlError::InvalidParam("D_a must be >= 1".into()));
    }
    Ok((8.0 * ((m as f64) * (n as f64) / sigma).ln() / d_attach as f64).sqrt())
}

/// Two-sided chi-squared tail bound `min(1, 2 exp(-d epsilon^2 / 8))`
/// on `Pr[|chi2_d - d| >= epsilon d]`.
pub fn chi2_tail_bound(d: usize, epsilon: f64) -> Result<f64> {
    if d == 0 {
        return Err(AmlError::InvalidParam("d must be >= 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(AmlError::InvalidParam(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok((2.0 * (-(d as f64) * epsilon * epsilon / 8.0).exp()).min(1.0))
}

fn gaussian_vec(stream: &mut RngStream, n: usize, stddev: f64) -> Vec<f64> {
    (0..n).map(|_| stream.next_standard_normal() * stddev).collect()
}

fn random_unit(stream: &mut RngStream, n: usize) -> Vec<f64> {
    loop {
        let mut v = gaussian_vec(stream, n, 1.0);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}

/// `Wᵀx` where `w` is `[rows, cols]` row-major; output has length `cols`.
fn apply_transpose(w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), rows);
    let mut out = vec![0.0f64; cols];
    for (l, &xv) in x.iter().enumerate() {
        if xv == 0.0 {
            continue;
        }
        let wrow = &w[l * cols..(l + 1) * cols];
        for (o, &wv) in out.iter_mut().zip(wrow) {
            *o += xv * wv;
        }
    }
    out
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Signed squared-distance distortion of the scaled block-diagonal
/// projection on one pair of concatenated vectors `z = [v; u]`,
/// `z' = [v2; u2]`: `||W~ (z - z')||^2 / ||z - z'||^2 - 1`, where
/// `W~ = (1/sqrt 2) diag(W_visual, W_text)` is sampled from `stream`
/// (W_visual first). Identical pairs yield exactly 0.
pub fn block_pair_distortion(
    stream: &mut RngStream,
    d_attach: usize,
    v: &[f64],
    u: &[f64],
    v2: &[f64],
    u2: &[f64],
) -> f64 {
    let a: Vec<f64> = v.iter().zip(v2).map(|(x, y)| x - y).collect();
    let b: Vec<f64> = u.iter().zip(u2).map(|(x, y)| x - y).collect();
    let base = sq_norm(&a) + sq_norm(&b);
    if base == 0.0 {
        return 0.0;
    }
    let stddev = 1.0 / (d_attach as f64).sqrt();
    let w_v = gaussian_vec(stream, v.len() * d_attach, stddev);
    let w_t = gaussian_vec(stream, u.len() * d_attach, stddev);
    let pa = apply_transpose(&w_v, v.len(), d_attach, &a);
    let pb = apply_transpose(&w_t, u.len(), d_attach, &b);
    let projected = 0.5 * (sq_norm(&pa) + sq_norm(&pb));
    projected / base - 1.0
}

/// Cross-modal inner-product error for one vector pair under
/// independently sampled W_visual, W_text (W_visual first). The
/// reference inner product treats both vectors as zero-padded into a
/// common ambient space.
pub fn cross_inner_error(stream: &mut RngStream, d_attach: usize, v: &[f64], u: &[f64]) -> f64 {
    let reference: f64 = v.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
    let stddev = 1.0 / (d_attach as f64).sqrt();
    let w_v = gaussian_vec(stream, v.len() * d_attach, stddev);
    let w_t = gaussian_vec(stream, u.len() * d_attach, stddev);
    let pv = apply_transpose(&w_v, v.len(), d_attach, v);
    let pu = apply_transpose(&w_t, u.len(), d_attach, u);
    let projected: f64 = pv.iter().zip(&pu).map(|(a, b)| a * b).sum();
    (projected - reference).abs()
}

/// `||W w||^2` for a fresh `W` with `d` rows and `w.len()` columns,
/// entries N(0, 1/d), sampled row-major from `stream`.
pub fn projected_sq_norm(stream: &mut RngStream, d: usize, w: &[f64]) -> f64 {
    let p = w.len();
    let stddev = 1.0 / (d as f64).sqrt();
    let mut acc = 0.0f64;
    for _ in 0..d {
        let row = gaussian_vec(stream, p, stddev);
        let dot: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum();
        acc += dot * dot;
    }
    acc
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(AmlError::InvalidParam("trials must be >= 1".into()));
    }
    Ok(())
}

fn aggregate(trials: usize, epsilon_target: f64, errors: Vec<(f64, bool)>) -> DistortionReport {
    let mut violations = 0usize;
    let mut max_abs = 0.0f64;
    let mut sum_abs = 0.0f64;
    for (err, violated) in errors {
        if violated {
            violations += 1;
        }
        max_abs = max_abs.max(err);
        sum_abs += err;
    }
    DistortionReport {
        trials,
        epsilon_target,
        violation_rate: violations as f64 / trials as f64,
        max_abs_error: max_abs,
        mean_abs_error: sum_abs / trials as f64,
    }
}

/// Monte Carlo check of block-diagonal squared-distance preservation.
///
/// Each trial draws two random unit-vector pairs and a fresh projection
/// from its own derived stream (so the trial count can grow without
/// changing earlier trials), then tests the (1 +/- epsilon) sandwich on
/// the concatenated difference. Trials run in parallel; aggregation is
/// in trial order.
pub fn mc_block_distance_distortion(
    seed: u64,
    trials: usize,
    d_visual: usize,
    d_text: usize,
    d_attach: usize,
    epsilon: f64,
) -> Result<DistortionReport> {
    check_trials(trials)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(AmlError::InvalidParam(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if d_visual == 0 || d_text == 0 || d_attach == 0 {
        return Err(AmlError::InvalidParam("dimensions must be >= 1".into()));
    }
    let errors: Vec<(f64, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut stream = RngStream::new(seed, STREAM_MONTE_CARLO_BASE + t as u64);
            let v = random_unit(&mut stream, d_visual);
            let u = random_unit(&mut stream, d_text);
            let v2 = random_unit(&mut stream, d_visual);
            let u2 = random_unit(&mut stream, d_text);
            let distortion = block_pair_distortion(&mut stream, d_attach, &v, &u, &v2, &u2);
            (distortion.abs(), distortion.abs() > epsilon)
        })
        .collect();
    Ok(aggregate(trials, epsilon, errors))
}

/// Monte Carlo probe of the raw cross-modal inner product under
/// independent per-modality projections. This measures the error
/// distribution and asserts nothing: with independent W_visual and
/// W_text the projected cross inner product is centered at zero
/// regardless of the reference value, so the report is observational.
pub fn mc_cross_inner_error(
    seed: u64,
    trials: usize,
    d_visual: usize,
    d_text: usize,
    d_attach: usize,
) -> Result<DistortionReport> {
    check_trials(trials)?;
    if d_visual == 0 || d_text == 0 || d_attach == 0 {
        return Err(AmlError::InvalidParam("dimensions must be >= 1".into()));
    }
    let errors: Vec<(f64, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut stream = RngStream::new(seed, STREAM_MONTE_CARLO_BASE + t as u64);
            let v = random_unit(&mut stream, d_visual);
            let u = random_unit(&mut stream, d_text);
            (cross_inner_error(&mut stream, d_attach, &v, &u), false)
        })
        .collect();
    Ok(aggregate(trials, 0.0, errors))
}

/// Monte Carlo check of the chi-squared tail: samples `||W w||^2` for
/// random unit `w` and reports how often `|..| - 1| >= epsilon`, for
/// comparison against [`chi2_tail_bound`].
pub fn mc_chi2_tail(seed: u64, trials: usize, d: usize, epsilon: f64) -> Result<DistortionReport> {
    check_trials(trials)?;
    if d == 0 {
        return Err(AmlError::InvalidParam("d must be >= 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(AmlError::InvalidParam(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let errors: Vec<(f64, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut stream = RngStream::new(seed, STREAM_MONTE_CARLO_BASE + t as u64);
            let w = random_unit(&mut stream, CHI2_PROBE_AMBIENT_DIM);
            let q = projected_sq_norm(&mut stream, d, &w);
            let err = (q - 1.0).abs();
            (err, err >= epsilon)
        })
        .collect();
    Ok(aggregate(trials, epsilon, errors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor2(rows: usize, cols: usize, data: Vec<f32>) -> Tensor {
        Tensor::new(vec![rows, cols], data).unwrap()
    }

    #[test]
    fn normalize_three_four_five() {
        let m = tensor2(1, 2, vec![3.0, 4.0]);
        let n = l2_normalize_rows(&m).unwrap();
        assert!((n.at2(0, 0) - 0.6).abs() < 1e-6);
        assert!((n.at2(0, 1) - 0.8).abs() < 1e-6);
    }

    #[test]
    fn normalize_zero_row_stays_zero() {
        let m = tensor2(2, 3, vec![0.0, 0.0, 0.0, 1.0, 2.0, 2.0]);
        let n = l2_normalize_rows(&m).unwrap();
        assert_eq!(&n.data()[..3], &[0.0, 0.0, 0.0]);
        assert!(n.data()[3..].iter().all(|v| v.is_finite()));
    }

    #[test]
    fn normalize_random_rows_unit_norm() {
        let mut stream = RngStream::new(3, 0);
        let data: Vec<f32> = (0..40).map(|_| stream.next_standard_normal() as f32).collect();
        let n = l2_normalize_rows(&tensor2(5, 8, data)).unwrap();
        for r in 0..5 {
            let norm: f64 = (0..8).map(|c| n.at2(r, c) as f64).map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6, "row {r} norm {norm}");
        }
    }

    #[test]
    fn projection_is_deterministic_in_seed() {
        let a = sample_projection(42, 8, 6, 16).unwrap();
        let b = sample_projection(42, 8, 6, 16).unwrap();
        let c = sample_projection(43, 8, 6, 16).unwrap();
        assert_eq!(a.w_visual.data(), b.w_visual.data());
        assert_eq!(a.w_text.data(), b.w_text.data());
        assert_ne!(a.w_visual.data(), c.w_visual.data());
    }

    #[test]
    fn projection_entry_variance() {
        let d_attach = 2048;
        let p = sample_projection(7, 64, 1, d_attach).unwrap();
        let n = p.w_visual.len() as f64;
        let mean: f64 = p.w_visual.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        let var: f64 = p
            .w_visual
            .data()
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        let target = 1.0 / d_attach as f64;
        assert!(
            var > 0.97 * target && var < 1.03 * target,
            "variance {var} vs target {target}"
        );
    }

    #[test]
    fn project_with_identity_is_identity() {
        let x = tensor2(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut eye = vec![0.0f32; 9];
        for i in 0..3 {
            eye[i * 3 + i] = 1.0;
        }
        let y = project(&x, &tensor2(3, 3, eye)).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn project_basis_row_selects_matrix_row() {
        let w = tensor2(2, 4, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let x = tensor2(1, 2, vec![1.0, 0.0]);
        let y = project(&x, &w).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn project_matches_triple_loop() {
        let mut stream = RngStream::new(11, 0);
        let x_data: Vec<f32> = (0..6 * 5).map(|_| stream.next_standard_normal() as f32).collect();
        let w_data: Vec<f32> = (0..5 * 7).map(|_| stream.next_standard_normal() as f32).collect();
        let x = tensor2(6, 5, x_data);
        let w = tensor2(5, 7, w_data);
        let y = project(&x, &w).unwrap();
        for r in 0..6 {
            for c in 0..7 {
                let mut acc = 0.0f64;
                for l in 0..5 {
                    acc += x.at2(r, l) as f64 * w.at2(l, c) as f64;
                }
                let got = y.at2(r, c) as f64;
                assert!(
                    (got - acc).abs() <= 1e-5 * acc.abs().max(1.0),
                    "({r},{c}): {got} vs {acc}"
                );
            }
        }
    }

    #[test]
    fn project_dim_mismatch() {
        let x = tensor2(1, 3, vec![0.0; 3]);
        let w = tensor2(2, 2, vec![0.0; 4]);
        assert!(matches!(project(&x, &w), Err(AmlError::ShapeMismatch { .. })));
    }

    #[test]
    fn dim_bound_canonical_value() {
        assert_eq!(jl_dim_bound(196, 20, 0.05, 0.2).unwrap(), 2254);
        // halving epsilon quadruples the bound for these parameters
        assert_eq!(jl_dim_bound(196, 20, 0.05, 0.1).unwrap(), 9016);
    }

    #[test]
    fn dim_bound_rejects_bad_sigma() {
        assert!(jl_dim_bound(196, 20, 1.5, 0.2).is_err());
        assert!(jl_dim_bound(196, 20, 0.0, 0.2).is_err());
        assert!(jl_dim_bound(0, 20, 0.05, 0.2).is_err());
    }

    #[test]
    fn epsilon_inversion_scaling() {
        let e1 = jl_epsilon(1024, 196, 20, 0.05).unwrap();
        let e4 = jl_epsilon(4096, 196, 20, 0.05).unwrap();
        assert!((e4 - e1 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn epsilon_sqrt_dim_product_is_constant() {
        let dims = [1024usize, 2048, 4096];
        let products: Vec<f64> = dims
            .iter()
            .map(|&d| jl_epsilon(d, 196, 20, 0.05).unwrap() * (d as f64).sqrt())
            .collect();
        for p in &products[1..] {
            assert!((p - products[0]).abs() < 1e-12 * products[0]);
        }
    }

    #[test]
    fn chi2_bound_values() {
        let b = chi2_tail_bound(2048, 0.2).unwrap();
        assert!((b - 7.14e-5).abs() < 1e-3 * 7.14e-5 + 1e-8, "bound {b}");
        // small epsilon and small d both clamp at 1
        assert_eq!(chi2_tail_bound(2048, 1e-9).unwrap(), 1.0);
        assert_eq!(chi2_tail_bound(8, 0.5).unwrap(), 1.0);
        assert!(chi2_tail_bound(0, 0.2).is_err());
        assert!(chi2_tail_bound(8, 1.0).is_err());
    }

    #[test]
    fn identical_pair_has_zero_distortion() {
        let mut stream = RngStream::new(5, STREAM_MONTE_CARLO_BASE);
        let v = random_unit(&mut stream, 6);
        let u = random_unit(&mut stream, 4);
        let d = block_pair_distortion(&mut stream, 32, &v, &u, &v, &u);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn block_distance_smoke() {
        let r = mc_block_distance_distortion(42, 300, 8, 6, 512, 0.3).unwrap();
        assert_eq!(r.trials, 300);
        assert!(r.violation_rate < 0.05, "rate {}", r.violation_rate);
        assert!(r.mean_abs_error < 0.1);
    }

    #[test]
    fn block_distortion_shrinks_with_dimension() {
        let mut means = Vec::new();
        for d_attach in [64usize, 256, 1024] {
            let r = mc_block_distance_distortion(9, 2000, 8, 6, d_attach, 0.5).unwrap();
            means.push(r.mean_abs_error);
        }
        assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
    }

    #[test]
    fn cross_inner_orthogonal_probe_variance() {
        // e1 vs e2 under zero-padding: reference inner product 0, so the
        // error is the raw projected product with variance 1/D_a.
        let d_attach = 1024;
        let mut v = vec![0.0f64; 8];
        v[0] = 1.0;
        let mut u = vec![0.0f64; 8];
        u[1] = 1.0;
        let trials = 2000;
        let mut sum_sq = 0.0f64;
        for t in 0..trials {
            let mut stream = RngStream::new(77, STREAM_MONTE_CARLO_BASE + t);
            let e = cross_inner_error(&mut stream, d_attach, &v, &u);
            sum_sq += e * e;
        }
        let var = sum_sq / trials as f64;
        let target = 1.0 / d_attach as f64;
        assert!(
            var > 0.9 * target && var < 1.1 * target,
            "var {var} vs {target}"
        );
    }

    #[test]
    fn cross_inner_zero_trials_rejected() {
        assert!(mc_cross_inner_error(1, 0, 8, 8, 64).is_err());
    }

    #[test]
    fn cross_inner_reports_without_asserting() {
        let r = mc_cross_inner_error(3, 500, 8, 6, 2048).unwrap();
        assert_eq!(r.violation_rate, 0.0);
        assert_eq!(r.epsilon_target, 0.0);
        assert!(r.mean_abs_error > 0.0);
        assert!(r.max_abs_error >= r.mean_abs_error);
    }

    #[test]
    fn chi2_tail_smoke_and_mean() {
        let r = mc_chi2_tail(13, 20_000, 128, 0.3).unwrap();
        let bound = chi2_tail_bound(128, 0.3).unwrap();
        let se = (r.violation_rate * (1.0 - r.violation_rate) / r.trials as f64).sqrt();
        assert!(
            r.violation_rate <= bound + 3.0 * se,
            "rate {} vs bound {bound}",
            r.violation_rate
        );

        let mut mean = 0.0f64;
        let trials = 20_000u64;
        for t in 0..trials {
            let mut stream = RngStream::new(21, STREAM_MONTE_CARLO_BASE + t);
            let w = random_unit(&mut stream, CHI2_PROBE_AMBIENT_DIM);
            mean += projected_sq_norm(&mut stream, 128, &w);
        }
        mean /= trials as f64;
        assert!((0.99..=1.01).contains(&mean), "mean {mean}");
    }

    #[test]
    fn projected_sq_norm_scales_quadratically() {
        let w: Vec<f64> = vec![0.3, -0.2, 0.9, 0.1];
        let w2: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
        let a = projected_sq_norm(&mut RngStream::new(4, 100), 64, &w);
        let b = projected_sq_norm(&mut RngStream::new(4, 100), 64, &w2);
        assert_eq!(b, 4.0 * a);
    }

    #[test]
    fn report_text_format() {
        let r = DistortionReport {
            trials: 10,
            epsilon_target: 0.2,
            violation_rate: 0.1,
            max_abs_error: 0.5,
            mean_abs_error: 0.25,
        };
        let text = r.to_text();
        assert!(text.contains("trials=10\n"));
        assert!(text.contains("violation_rate=0.1\n"));
        assert!(text.ends_with("mean_abs_error=0.25\n"));
    }
}
