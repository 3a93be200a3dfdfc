//! Deterministic, seedable random streams.
//!
//! xoshiro256** seeded through SplitMix64, with Gaussian draws via
//! Box-Muller. Identical `(seed, stream_id)` pairs reproduce identical
//! sequences bit-for-bit on every platform; distinct stream ids derived
//! from the same seed give independent sequences, so each stochastic
//! subsystem owns its own stream and never perturbs the others.

use crate::error::{AmlError, Result};

/// Stream id used when sampling projection matrices.
pub const STREAM_PROJECTION: u64 = 1;
/// Stream id used by the weak-pixel dropout step.
pub const STREAM_DROPOUT: u64 = 2;
/// Stream id used for perturbation placement (occlusion, patches, jitter).
pub const STREAM_OCCLUSION: u64 = 3;
/// Monte Carlo trial `t` draws from stream id `STREAM_MONTE_CARLO_BASE + t`.
pub const STREAM_MONTE_CARLO_BASE: u64 = 4;

const SPLITMIX_GAMMA: u64 = 0x9E3779B97F4A7C15;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(SPLITMIX_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Mixes a secondary tag into a base seed, producing a new seed.
///
/// Used to derive per-(epoch, sample) or per-trial seeds without
/// consuming draws from any live stream.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut s = tag;
    let h = splitmix64(&mut s);
    let mut t = seed ^ h;
    splitmix64(&mut t)
}

/// A single xoshiro256** generator instance.
#[derive(Debug, Clone)]
pub struct RngStream {
    s: [u64; 4],
    seed: u64,
    stream_id: u64,
    cached_gaussian: Option<f64>,
}

impl RngStream {
    /// Deterministic initialization: SplitMix64 expansion of
    /// `seed XOR hash(stream_id)`, where the hash is one SplitMix64 step
    /// seeded at the stream id.
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut id_state = stream_id;
        let hash = splitmix64(&mut id_state);
        let mut st = seed ^ hash;
        let s = [
            splitmix64(&mut st),
            splitmix64(&mut st),
            splitmix64(&mut st),
            splitmix64(&mut st),
        ];
        RngStream {
            s,
            seed,
            stream_id,
            cached_gaussian: None,
        }
    }

    /// Builds a generator directly from raw xoshiro256** state.
    /// The state must not be all zeros.
    pub fn from_raw_state(s: [u64; 4]) -> Self {
        assert!(s.iter().any(|&w| w != 0), "all-zero xoshiro state");
        RngStream {
            s,
            seed: 0,
            stream_id: 0,
            cached_gaussian: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// One xoshiro256** step.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform double in [0, 1) from the top 53 bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, bound) by modulo mapping. The tiny modulo
    /// bias is irrelevant here; the fixed rule keeps outputs stable.
    #[inline]
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "next_below bound must be positive");
        self.next_u64() % bound
    }

    /// Standard normal via Box-Muller. Each uniform pair produces two
    /// values; the second is cached and returned by the following call,
    /// so both values of a pair are always consumed in order.
    #[inline]
    pub fn next_standard_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_gaussian.take() {
            return z;
        }
        // u1 in (0, 1] so the log is finite
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        let z0 = r * theta.cos();
        let z1 = r * theta.sin();
        self.cached_gaussian = Some(z1);
        z0
    }

    pub fn next_gaussian(&mut self, mean: f64, stddev: f64) -> Result<f64> {
        if !(stddev > 0.0) || !stddev.is_finite() || !mean.is_finite() {
            return Err(AmlError::InvalidParam(format!(
                "next_gaussian requires finite mean and stddev > 0, got ({mean}, {stddev})"
            )));
        }
        Ok(mean + stddev * self.next_standard_normal())
    }
}
