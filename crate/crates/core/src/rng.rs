//! Counter-based random streams.
//!
//! Every 64-bit output is a pure function of `(key, counter)`, so any variate
//! of any path can be regenerated without replaying the others. Path `i` of a
//! run seeded with `master` reads the stream keyed by [`mix`]`(master, i)`,
//! which makes sequential and parallel fan-out draw identical variates.
//!
//! Output function (SplitMix64 finalizer `fmix64`, Weyl constant `G`):
//!
//! ```text
//! out(key, c) = fmix64( fmix64(c * G  xor  key) + key )
//! mix(master, i) = fmix64( master xor fmix64(i + G) )
//! ```
//!
//! Uniforms take the top 53 bits, `u = (x >> 11 + 0.5) / 2^53`, so `u` lies
//! strictly inside (0, 1). Gaussians use the Box–Muller pair, both halves
//! consumed in order.

use std::f64::consts::PI;

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_CONST1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_CONST2: u64 = 0x94D0_49BB_1331_11EB;
const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

#[inline]
pub fn fmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_CONST1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_CONST2);
    z ^ (z >> 31)
}

/// Stream key of sub-stream `index` under `master`.
#[inline]
pub fn mix(master: u64, index: u64) -> u64 {
    fmix64(master ^ fmix64(index.wrapping_add(GOLDEN_GAMMA)))
}

/// Seed for a named purpose (FNV-1a of the tag, then [`mix`]).
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix(master, h)
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
    spare: Option<f64>,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        Self {
            key,
            counter: 0,
            spare: None,
        }
    }

    /// Generator for path `index` of a run seeded with `master`.
    pub fn for_path(master: u64, index: u64) -> Self {
        Self::new(mix(master, index))
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Output at an arbitrary counter position, without advancing.
    #[inline]
    pub fn output_at(key: u64, counter: u64) -> u64 {
        fmix64(fmix64(counter.wrapping_mul(GOLDEN_GAMMA) ^ key).wrapping_add(key))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let out = Self::output_at(self.key, self.counter);
        self.counter = self.counter.wrapping_add(1);
        out
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * INV_2_53
    }

    /// Uniform integer in `0..bound` (bound > 0), by multiply-shift.
    #[inline]
    pub fn below(&mut self, bound: u64) -> u64 {
        ((u128::from(self.next_u64()) * u128::from(bound)) >> 64) as u64
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Inverse-CDF sampler over `0..len` with a guide table.
///
/// Returns the smallest index `i` with `u < cdf[i]`; the guide table only
/// narrows the binary-search window, so results equal plain inversion.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    cdf: Vec<f64>,
    guide: Vec<u32>,
}

impl InverseCdf {
    const MAX_GUIDE: usize = 1 << 20;

    /// Builds from nonnegative weights summing to (approximately) one. The
    /// final cumulative entry is pinned to 1.
    pub fn from_weights(weights: &[f64]) -> Self {
        assert!(!weights.is_empty(), "empty weight table");
        assert!(weights.len() < u32::MAX as usize);
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            acc += w;
            cdf.push(acc);
        }
        *cdf.last_mut().unwrap() = 1.0;
        let g = weights.len().min(Self::MAX_GUIDE);
        let mut guide = Vec::with_capacity(g + 1);
        let mut i = 0usize;
        for b in 0..g {
            let threshold = b as f64 / g as f64;
            while cdf[i] <= threshold {
                i += 1;
            }
            guide.push(i as u32);
        }
        guide.push((cdf.len() - 1) as u32);
        Self { cdf, guide }
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    #[inline]
    pub fn index_for(&self, u: f64) -> usize {
        let g = self.guide.len() - 1;
        let b = ((u * g as f64) as usize).min(g - 1);
        let lo = self.guide[b] as usize;
        let hi = self.guide[b + 1] as usize;
        lo + self.cdf[lo..=hi].partition_point(|&c| c <= u)
    }

    #[inline]
    pub fn sample(&self, rng: &mut CounterRng) -> usize {
        self.index_for(rng.uniform())
    }
}
