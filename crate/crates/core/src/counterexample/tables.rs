//! Exact renewal quantities of the chain started at 0 and from stationarity.
//!
//! With `u_k = P_0(Y_k = 0)` and `h(n) = u_1 + ... + u_n`, the conditional
//! means of `S_n` given the starting state are
//! `E_0 S_n = A_n = h(n) - n pi_0`, `E_k S_n = 1 - k pi_0 + A_{n-k}` for
//! `1 <= k <= n`, and `E_k S_n = -n pi_0` for `k > n`.

use serde::Serialize;

use super::chain::RenewalChain;
use crate::error::{param, Result};
use crate::fft::{renewal_sequence_fft, Convolver};

/// Direct renewal recursion is used while `support points * N` stays below this.
const DIRECT_DP_WORK: usize = 40_000_000;
/// Blocks of constant stationary mass shorter than this are summed directly.
const SHORT_BLOCK: u64 = 32;
/// Runtime tolerance for the renewal-equation identity.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

/// `u_0..=u_n` for the return-time law of `chain`.
pub fn renewal_mass(chain: &RenewalChain, n: usize) -> Vec<f64> {
    let support = chain.support();
    let masses = chain.masses();
    let live = support.partition_point(|&s| s as usize <= n);
    if live.saturating_mul(n) <= DIRECT_DP_WORK {
        let mut u = vec![0.0; n + 1];
        u[0] = 1.0;
        for k in 1..=n {
            let mut acc = 0.0;
            for (&s, &p) in support[..live].iter().zip(masses) {
                let s = s as usize;
                if s > k {
                    break;
                }
                acc += p * u[k - s];
            }
            u[k] = acc;
        }
        u
    } else {
        let mut p = vec![0.0; n + 1];
        for (&s, &m) in support[..live].iter().zip(masses) {
            p[s as usize] = m;
        }
        renewal_sequence_fft(&p, n)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RenewalTables {
    pub n_max: usize,
    pub pi0: f64,
    /// `u_k`, k = 0..=N
    pub mass: Vec<f64>,
    /// `h(n)`, n = 0..=N
    pub h: Vec<f64>,
    /// `A_n = h(n) - n pi_0`, n = 0..=N
    pub a: Vec<f64>,
    /// `I_n = ||min(nu, n)||` under the stationary law, n = 0..=N
    pub i_norm: Vec<f64>,
    /// `J_n = max_{i<=n} |A_i|`, n = 0..=N
    pub j_max: Vec<f64>,
    /// `Var_pi(S_n)`, n = 0..=N
    pub var_s: Vec<f64>,
    /// Largest residual of the renewal-equation identity over n <= N.
    pub identity_residual: f64,
}

impl RenewalTables {
    pub fn build(chain: &RenewalChain, n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return param("renewal tables need N >= 1");
        }
        let pi0 = chain.pi0();
        let mass = renewal_mass(chain, n_max);
        let mut h = vec![0.0; n_max + 1];
        let mut a = vec![0.0; n_max + 1];
        // compensated running sum: h(n) grows like n pi_0 while A_n stays O(log n)
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for k in 1..=n_max {
            let y = mass[k] - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            h[k] = sum;
            a[k] = (sum - k as f64 * pi0) - comp;
        }

        let gamma0 = pi0 * (1.0 - pi0);
        let mut var_s = vec![0.0; n_max + 1];
        for m in 0..n_max {
            // sum_{h=1}^m gamma_h = pi_0 A_m
            var_s[m + 1] = var_s[m] + gamma0 + 2.0 * pi0 * a[m];
        }

        let mut j_max = vec![0.0f64; n_max + 1];
        for k in 1..=n_max {
            j_max[k] = j_max[k - 1].max(a[k].abs());
        }

        let support = chain.support();
        let masses = chain.masses();
        let mut i_norm = vec![0.0; n_max + 1];
        let (mut head2, mut ptr, mut k2pi) = (0.0f64, 0usize, 0.0f64);
        for n in 1..=n_max {
            while ptr < support.len() && support[ptr] as usize <= n {
                head2 += masses[ptr] * (support[ptr] as f64).powi(2);
                ptr += 1;
            }
            let nf = n as f64;
            let e_min_sq = head2 + nf * nf * chain.surv(n as u64);
            k2pi += nf * nf * chain.pi(n as u64);
            let v = pi0 * e_min_sq + k2pi + nf * nf * chain.pi_tail(n as u64);
            i_norm[n] = v.sqrt();
        }

        let identity_residual = identity_residual(chain, &a);
        Ok(Self {
            n_max,
            pi0,
            mass,
            h,
            a,
            i_norm,
            j_max,
            var_s,
            identity_residual,
        })
    }

    pub fn identity_holds(&self) -> bool {
        self.identity_residual < IDENTITY_TOLERANCE
    }

    /// `E_k(S_n)`.
    pub fn conditional_mean(&self, k: u64, n: usize) -> f64 {
        let nf = n as f64;
        if k == 0 {
            self.a[n]
        } else if k as usize <= n {
            1.0 - k as f64 * self.pi0 + self.a[n - k as usize]
        } else {
            -nf * self.pi0
        }
    }

    /// Exact `V_n` for n = 0..=N.
    pub fn v_sequence(&self, chain: &RenewalChain) -> Vec<f64> {
        let ev = VEvaluator::new(chain, self);
        let short_states: u64 = ev
            .blocks
            .iter()
            .filter(|(lo, hi, _)| hi - lo < SHORT_BLOCK)
            .map(|(lo, hi, _)| hi - lo + 1)
            .sum();
        if (short_states as usize).saturating_mul(self.n_max) > DIRECT_DP_WORK {
            return self.v_by_convolution(chain);
        }
        (0..=self.n_max).map(|n| ev.v_squared(n).max(0.0).sqrt()).collect()
    }

    /// `V_n` for all n at once: with `c_k = 1 - k pi_0`,
    /// `sum_{k<=n} pi_k (c_k + A_{n-k})^2` splits into a prefix sum and the
    /// convolutions `(pi c) * A` and `pi * A^2`.
    fn v_by_convolution(&self, chain: &RenewalChain) -> Vec<f64> {
        let n_max = self.n_max;
        let pi0 = self.pi0;
        let pi: Vec<f64> = (0..=n_max as u64).map(|k| if k == 0 { 0.0 } else { chain.pi(k) }).collect();
        let pic: Vec<f64> = pi.iter().enumerate().map(|(k, &w)| w * (1.0 - k as f64 * pi0)).collect();
        let a2: Vec<f64> = self.a.iter().map(|x| x * x).collect();
        let mut conv = Convolver::new();
        let cross = conv.convolve(&pic, &self.a);
        let square = conv.convolve(&pi, &a2);
        let mut head = 0.0;
        (0..=n_max)
            .map(|n| {
                let nf = n as f64;
                let c = 1.0 - nf * pi0;
                head += pi[n] * c * c;
                let v2 = pi0 * self.a[n].powi(2)
                    + head
                    + 2.0 * cross[n]
                    + square[n]
                    + (nf * pi0).powi(2) * chain.pi_tail(n as u64);
                v2.max(0.0).sqrt()
            })
            .collect()
    }

    /// `V_n` by the plain sum over every starting state (reference method).
    pub fn v_direct(&self, chain: &RenewalChain, n: usize) -> f64 {
        let pi0 = self.pi0;
        let mut acc = pi0 * self.a[n].powi(2);
        for k in 1..=n as u64 {
            acc += chain.pi(k) * self.conditional_mean(k, n).powi(2);
        }
        acc += (n as f64 * pi0).powi(2) * chain.pi_tail(n as u64);
        acc.sqrt()
    }

    /// CSV rows `n,h,A,I,J,V,var_s`.
    pub fn rows(&self, v: &[f64]) -> Vec<[f64; 7]> {
        (1..=self.n_max)
            .map(|n| {
                [
                    n as f64,
                    self.h[n],
                    self.a[n],
                    self.i_norm[n],
                    self.j_max[n],
                    v.get(n).copied().unwrap_or(f64::NAN),
                    self.var_s[n],
                ]
            })
            .collect()
    }
}

/// Max over n of `|A_n - (P(tau<=n) - pi_0 E[min(tau,n)] + sum_{j<n} A_{n-j} p_j)|`.
fn identity_residual(chain: &RenewalChain, a: &[f64]) -> f64 {
    let n_max = a.len() - 1;
    let pi0 = chain.pi0();
    let support = chain.support();
    let masses = chain.masses();
    let live = support.partition_point(|&s| s as usize <= n_max);
    let conv: Vec<f64> = if live.saturating_mul(n_max) <= DIRECT_DP_WORK {
        let mut c = vec![0.0; n_max + 1];
        for (n, slot) in c.iter_mut().enumerate() {
            for (&s, &p) in support[..live].iter().zip(masses) {
                let s = s as usize;
                if s >= n {
                    break;
                }
                *slot += a[n - s] * p;
            }
        }
        c
    } else {
        let mut p = vec![0.0; n_max + 1];
        for (&s, &m) in support[..live].iter().zip(masses) {
            p[s as usize] = m;
        }
        let mut c = Convolver::new().convolve(a, &p);
        c.truncate(n_max + 1);
        c
    };
    let mut worst = 0.0f64;
    for n in 1..=n_max {
        let stopped = (1.0 - chain.surv(n as u64)) - pi0 * chain.e_tau_min(n as u64);
        worst = worst.max((a[n] - stopped - conv[n]).abs());
    }
    worst
}

/// Evaluates `V_n^2` using that `pi_k` is constant between support points.
struct VEvaluator<'a> {
    tables: &'a RenewalTables,
    /// (first state, last state, stationary mass) for k >= 1
    blocks: Vec<(u64, u64, f64)>,
    /// prefix sums over m = 0..=N of A_m, m A_m, A_m^2 (index m+1)
    pa: Vec<f64>,
    pma: Vec<f64>,
    pa2: Vec<f64>,
    tails: Vec<f64>,
}

impl<'a> VEvaluator<'a> {
    fn new(chain: &RenewalChain, tables: &'a RenewalTables) -> Self {
        let n_max = tables.n_max as u64;
        let support = chain.support();
        let mut blocks = Vec::new();
        for (j, &lo) in support.iter().enumerate() {
            if lo > n_max {
                break;
            }
            let next = support.get(j + 1).copied().unwrap_or(lo);
            if next <= lo {
                break; // pi vanishes from the top support point on
            }
            blocks.push((lo, (next - 1).min(n_max), chain.pi(lo)));
        }
        let len = tables.a.len();
        let mut pa = vec![0.0; len + 1];
        let mut pma = vec![0.0; len + 1];
        let mut pa2 = vec![0.0; len + 1];
        for (m, &am) in tables.a.iter().enumerate() {
            pa[m + 1] = pa[m] + am;
            pma[m + 1] = pma[m] + m as f64 * am;
            pa2[m + 1] = pa2[m] + am * am;
        }
        let tails = (0..=n_max).map(|n| chain.pi_tail(n)).collect();
        Self {
            tables,
            blocks,
            pa,
            pma,
            pa2,
            tails,
        }
    }

    fn v_squared(&self, n: usize) -> f64 {
        let t = self.tables;
        let pi0 = t.pi0;
        let nf = n as f64;
        let mut acc = pi0 * t.a[n].powi(2);
        for &(lo, hi, w) in &self.blocks {
            if lo as usize > n {
                break;
            }
            let hi = hi.min(n as u64);
            let block = if hi - lo < SHORT_BLOCK {
                (lo..=hi)
                    .map(|k| t.conditional_mean(k, n).powi(2))
                    .sum::<f64>()
            } else {
                // k in [lo, hi]  <->  m = n - k in [n - hi, n - lo]
                let (m0, m1) = ((n as u64 - hi) as usize, (n as u64 - lo) as usize);
                let s_a = self.pa[m1 + 1] - self.pa[m0];
                let s_ma = self.pma[m1 + 1] - self.pma[m0];
                let s_a2 = self.pa2[m1 + 1] - self.pa2[m0];
                let quad = sum_quadratic(lo, hi, pi0);
                quad + 2.0 * ((1.0 - nf * pi0) * s_a + pi0 * s_ma) + s_a2
            };
            acc += w * block;
        }
        acc + (nf * pi0).powi(2) * self.tails[n]
    }
}

/// `sum_{k=lo}^{hi} (1 - k pi_0)^2`.
fn sum_quadratic(lo: u64, hi: u64, pi0: f64) -> f64 {
    let s0 = (hi - lo + 1) as f64;
    let s1 = |x: u64| x as f64 * (x as f64 + 1.0) / 2.0;
    let s2 = |x: u64| x as f64 * (x as f64 + 1.0) * (2.0 * x as f64 + 1.0) / 6.0;
    let k1 = s1(hi) - s1(lo - 1);
    let k2 = s2(hi) - s2(lo - 1);
    s0 - 2.0 * pi0 * k1 + pi0 * pi0 * k2
}
