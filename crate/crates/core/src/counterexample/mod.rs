//! The renewal-chain counterexample: a stationary chain whose return time has
//! finite mean but infinite variance, so that `X_j = I(Y_j = 0) - pi_0` has
//! summable weighted conditional norms while `S_n / sqrt(n)` is unbounded.

mod chain;
mod simulate;
mod support;
mod tables;

pub use chain::{
    ChainOrigin, ChainSampler, RenewalChain, SecondMoment, DEFAULT_DENSE_TRUNCATION,
    MAX_PI_STATES, PI_TAIL_CUTOFF, ZETA2, ZETA3,
};
pub use simulate::{
    desk_scale_flag, regeneration_counts, regeneration_identity_check, simulate_chain_sums,
    wald_check, ChainQuantiles, ChainWalker, QuantileRow,
};
pub use support::{build_u, DecaySpec, SupportSequence};
pub use tables::{renewal_mass, RenewalTables, IDENTITY_TOLERANCE};

use serde::Serialize;

use crate::error::{param, Result};
use crate::report::Verdict;
use crate::stats::loglog_slope;

/// `S` below which `1 - (1 - S)^n` is expanded as a binomial series.
const SERIES_SCALE: f64 = 1e-3;
const SERIES_TERMS: usize = 8;

/// `E[max(tau_1, ..., tau_n)]` for each n, from `P(M_n <= u) = F(u)^n`:
/// `E M_n = u_1 + sum_j (u_{j+1} - u_j) (1 - F(u_j)^n)`.
pub fn expected_max_tau(chain: &RenewalChain, n_list: &[usize]) -> Vec<f64> {
    let support = chain.support();
    let k = support.len();
    if n_list.is_empty() {
        return Vec::new();
    }
    let n_max = *n_list.iter().max().unwrap() as f64;
    // gaps and survival P(tau > u_j) for j = 0..k-2
    let gaps: Vec<f64> = support.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let surv: Vec<f64> = (0..k.saturating_sub(1))
        .map(|j| chain.surv(support[j]))
        .collect();
    let cut = SERIES_SCALE / n_max;
    let head = surv.partition_point(|&s| s > cut);
    let mut powers = [0.0f64; SERIES_TERMS];
    for j in (head..surv.len()).rev() {
        let mut sp = surv[j];
        for slot in powers.iter_mut() {
            *slot += gaps[j] * sp;
            sp *= surv[j];
        }
    }
    n_list
        .iter()
        .map(|&n| {
            let nf = n as f64;
            let mut acc = support[0] as f64;
            for j in 0..head {
                acc += gaps[j] * -(nf * (-surv[j]).ln_1p()).exp_m1();
            }
            let mut binom = 1.0;
            for (m, &pm) in powers.iter().enumerate() {
                let m1 = (m + 1) as f64;
                binom *= (nf - m1 + 1.0) / m1;
                if binom == 0.0 {
                    break;
                }
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * binom * pm;
            }
            acc
        })
        .collect()
}

/// `P(M_n = u_t) = F(u_{t-1})^n ((1 + p_t / F(u_{t-1}))^n - 1)` against
/// `min(1, n p_t)`, for every support point. Returns the count of violations.
pub fn max_tau_mass_check(chain: &RenewalChain, n: usize) -> usize {
    let nf = n as f64;
    let masses = chain.masses();
    let mut below = 0.0f64; // F(u_{t-1})
    let mut violations = 0;
    for &p in masses {
        let prob = if below == 0.0 {
            p.powf(nf)
        } else {
            (nf * below.ln()).exp() * (nf * (p / below).ln_1p()).exp_m1()
        };
        let bound = (nf * p).min(1.0);
        if prob > bound * (1.0 + 1e-9) + 1e-300 {
            violations += 1;
        }
        below += p;
    }
    violations
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop31Report {
    pub n_max: usize,
    /// n with `V_n > I_n + J_n + 1e-9`
    pub violations: Vec<usize>,
    pub worst_margin: f64,
    pub worst_n: usize,
    /// n with `J_n > E[M_n]`
    pub j_bound_violations: Vec<usize>,
    pub e_max_tau_at_n_max: f64,
    pub mass_law_violations: usize,
    pub verdict: Verdict,
}

/// Checks `V_n <= I_n + J_n` and `J_n <= E[M_n]` for every `1 <= n <= N`.
pub fn prop31_bounds(chain: &RenewalChain, tables: &RenewalTables, v: &[f64]) -> Result<Prop31Report> {
    let n_max = tables.n_max;
    if v.len() <= n_max {
        return param("V sequence does not cover the table range");
    }
    let mut violations = Vec::new();
    let (mut worst_margin, mut worst_n) = (f64::INFINITY, 0);
    for n in 1..=n_max {
        let margin = tables.i_norm[n] + tables.j_max[n] - v[n];
        if margin < worst_margin {
            worst_margin = margin;
            worst_n = n;
        }
        if margin < -1e-9 {
            violations.push(n);
        }
    }
    let ns: Vec<usize> = (1..=n_max).collect();
    let em = expected_max_tau(chain, &ns);
    let j_bound_violations: Vec<usize> = ns
        .iter()
        .zip(&em)
        .filter(|&(&n, &e)| tables.j_max[n] > e * (1.0 + 1e-9))
        .map(|(&n, _)| n)
        .collect();
    let mass_law_violations: usize = [1usize, 2, 10, n_max]
        .iter()
        .map(|&n| max_tau_mass_check(chain, n))
        .sum();
    let verdict = Verdict::from_bool(
        violations.is_empty() && j_bound_violations.is_empty() && mass_law_violations == 0,
    );
    Ok(Prop31Report {
        n_max,
        violations,
        worst_margin,
        worst_n,
        j_bound_violations,
        e_max_tau_at_n_max: *em.last().unwrap(),
        mass_law_violations,
        verdict,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesPoint {
    pub n: usize,
    pub partial_sum: f64,
    pub increment: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightedSeries {
    pub decay: String,
    pub n_max: usize,
    pub total: f64,
    /// Log-spaced checkpoints of the partial sums.
    pub points: Vec<SeriesPoint>,
    /// Mean increment per log-bin over the last decade is decreasing.
    pub increments_decreasing: bool,
    /// Fitted exponent of the increments over the last decade.
    pub tail_exponent: Option<f64>,
    /// `V_n / sqrt(n)` at the start and the end of the last decade.
    pub v_over_sqrt_n: (f64, f64),
    pub cauchy_evidence: bool,
}

/// Partial sums of `sum_n a_n V_n / n^{3/2}` with a tail-trend diagnosis.
pub fn weighted_series(decay: &DecaySpec, v: &[f64], n_max: usize) -> Result<WeightedSeries> {
    if n_max < 10 || v.len() <= n_max {
        return param("weighted series needs N >= 10 and V covering 1..=N");
    }
    let mut partial = 0.0;
    let mut increments = vec![0.0; n_max + 1];
    let mut sums = vec![0.0; n_max + 1];
    for n in 1..=n_max {
        let inc = decay.value(n as u64)? * v[n] / (n as f64).powf(1.5);
        increments[n] = inc;
        partial += inc;
        sums[n] = partial;
    }
    let lo = (n_max / 10).max(1);
    // ten log-spaced bins over [N/10, N]
    let edges: Vec<usize> = (0..=10)
        .map(|i| (lo as f64 * 10f64.powf(i as f64 / 10.0)).round() as usize)
        .map(|e| e.clamp(lo, n_max))
        .collect();
    let mut bin_means = Vec::new();
    let mut centers = Vec::new();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let m = increments[a + 1..=b].iter().sum::<f64>() / (b - a) as f64;
        bin_means.push(m);
        centers.push(((a + 1) as f64 * b as f64).sqrt());
    }
    let increments_decreasing = bin_means.windows(2).all(|w| w[1] < w[0]);
    let positive: Vec<(f64, f64)> = centers
        .iter()
        .zip(&bin_means)
        .filter(|(_, &m)| m > 0.0)
        .map(|(&c, &m)| (c, m))
        .collect();
    let tail_exponent = if positive.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = positive.into_iter().unzip();
        loglog_slope(&xs, &ys)
    } else {
        None
    };
    let all_zero = increments[lo..=n_max].iter().all(|&x| x == 0.0);
    let cauchy_evidence =
        all_zero || (increments_decreasing && tail_exponent.is_some_and(|s| s < -1.0));
    let mut points = Vec::new();
    let mut n = 1usize;
    while n <= n_max {
        points.push(SeriesPoint {
            n,
            partial_sum: sums[n],
            increment: increments[n],
        });
        n = ((n as f64) * 10f64.powf(0.1)).ceil().max(n as f64 + 1.0) as usize;
    }
    if points.last().map(|p| p.n) != Some(n_max) {
        points.push(SeriesPoint {
            n: n_max,
            partial_sum: sums[n_max],
            increment: increments[n_max],
        });
    }
    Ok(WeightedSeries {
        decay: decay.name(),
        n_max,
        total: partial,
        points,
        increments_decreasing,
        tail_exponent,
        v_over_sqrt_n: (v[lo] / (lo as f64).sqrt(), v[n_max] / (n_max as f64).sqrt()),
        cauchy_evidence,
    })
}
