//! Simulation of the renewal chain: stepwise, and through its regeneration
//! times. Both consume one uniform for the stationary start and one per
//! departure from 0 at times `< n`, so they see identical draws.

use rayon::prelude::*;
use serde::Serialize;

use super::chain::{ChainOrigin, ChainSampler, RenewalChain};
use crate::error::{param, Result};
use crate::report::BoundReport;
use crate::rng::CounterRng;
use crate::stats::{quantile_sorted, sort_floats, MeanEstimate};

/// Steps the chain one time unit at a time.
pub struct ChainWalker<'a> {
    sampler: &'a ChainSampler,
    support: &'a [u64],
    state: u64,
}

impl<'a> ChainWalker<'a> {
    /// Starts from `Y_0 ~ pi` (one uniform).
    pub fn stationary(chain: &'a RenewalChain, rng: &mut CounterRng) -> Result<Self> {
        let sampler = chain.sampler()?;
        let state = sampler.pi_state(rng.uniform());
        Ok(Self {
            sampler,
            support: chain.support(),
            state,
        })
    }

    pub fn from_state(chain: &'a RenewalChain, state: u64) -> Result<Self> {
        Ok(Self {
            sampler: chain.sampler()?,
            support: chain.support(),
            state,
        })
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    /// Advances one step; returns whether the new state is 0.
    #[inline]
    pub fn step(&mut self, rng: &mut CounterRng) -> bool {
        if self.state == 0 {
            let j = self.sampler.tau_index(rng.uniform());
            self.state = self.support[j] - 1;
        } else {
            self.state -= 1;
        }
        self.state == 0
    }
}

/// Number of visits to 0 during `1..=n` for each `n` in the increasing list,
/// starting from state `y0`.
pub fn regeneration_counts(
    chain: &RenewalChain,
    y0: u64,
    n_list: &[usize],
    rng: &mut CounterRng,
) -> Result<Vec<u64>> {
    let sampler = chain.sampler()?;
    let support = chain.support();
    let n_max = *n_list.last().unwrap_or(&0) as u64;
    let mut out = Vec::with_capacity(n_list.len());
    let mut next = 0usize;
    let mut count = 0u64;
    // `t` is the current time at which the chain sits at 0
    let mut t = y0;
    loop {
        while next < n_list.len() && t > n_list[next] as u64 {
            out.push(count);
            next += 1;
        }
        if next == n_list.len() {
            break;
        }
        if t >= 1 {
            count += 1;
        }
        if t >= n_max {
            break;
        }
        t += support[sampler.tau_index(rng.uniform())];
    }
    while out.len() < n_list.len() {
        out.push(count);
    }
    Ok(out)
}

fn check_n_list(n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() || n_list[0] == 0 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return param("n_list must be nonempty, positive and strictly increasing");
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct QuantileRow {
    pub n: usize,
    pub median: f64,
    pub p90: f64,
    /// Empirical `E S_n^2 / n`.
    pub mean_square: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainQuantiles {
    pub paths: usize,
    pub seed: u64,
    pub method: &'static str,
    pub rows: Vec<QuantileRow>,
    pub p90_increasing: bool,
    pub flag: Option<String>,
}

/// Median and 90th percentile of `|S_n| / sqrt(n)` from stationary starts.
pub fn simulate_chain_sums(
    chain: &RenewalChain,
    n_list: &[usize],
    paths: usize,
    seed: u64,
) -> Result<ChainQuantiles> {
    check_n_list(n_list)?;
    if paths == 0 {
        return param("paths must be positive");
    }
    chain.sampler()?;
    let pi0 = chain.pi0();
    let per_path: Vec<Vec<f64>> = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::for_path(seed, i);
            let y0 = chain.sampler()?.pi_state(rng.uniform());
            let counts = regeneration_counts(chain, y0, n_list, &mut rng)?;
            Ok(counts
                .iter()
                .zip(n_list)
                .map(|(&c, &n)| c as f64 - n as f64 * pi0)
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(n_list.len());
    for (col, &n) in n_list.iter().enumerate() {
        let root = (n as f64).sqrt();
        let mut scaled: Vec<f64> = per_path.iter().map(|s| s[col].abs() / root).collect();
        let mean_square = scaled.iter().map(|x| x * x).sum::<f64>() / paths as f64;
        sort_floats(&mut scaled);
        rows.push(QuantileRow {
            n,
            median: quantile_sorted(&scaled, 0.5),
            p90: quantile_sorted(&scaled, 0.9),
            mean_square,
        });
    }
    let p90_increasing = rows.windows(2).all(|w| w[1].p90 > w[0].p90);
    Ok(ChainQuantiles {
        paths,
        seed,
        method: "regeneration",
        rows,
        p90_increasing,
        flag: desk_scale_flag(chain, *n_list.last().unwrap(), paths),
    })
}

/// Honesty flag for the sparse family: its heavy tail lives on support points
/// that a desk-scale run essentially never draws.
pub fn desk_scale_flag(chain: &RenewalChain, n_max: usize, paths: usize) -> Option<String> {
    if !matches!(chain.origin(), ChainOrigin::Sparse { .. }) {
        return None;
    }
    let top = chain.max_support();
    let mass = *chain.masses().last().unwrap();
    let expected = n_max as f64 * chain.pi0() * mass * paths as f64;
    Some(format!(
        "divergence not observable at desk scale: largest support point {top} has mass \
         {mass:.3e}; expected draws of it across the run {expected:.3e}, and the next \
         support point exceeds {top}^4"
    ))
}

/// Pathwise comparison of stepping and regeneration for each `n <= n_max`
/// on `paths` shared streams. Returns the number of mismatching (path, n).
pub fn regeneration_identity_check(
    chain: &RenewalChain,
    n_max: usize,
    paths: usize,
    seed: u64,
) -> Result<usize> {
    let pi0 = chain.pi0();
    let mismatches: Vec<usize> = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let n_list: Vec<usize> = (1..=n_max).collect();
            let mut rng = CounterRng::for_path(seed, i);
            let mut walker = ChainWalker::stationary(chain, &mut rng)?;
            let y0 = walker.state();
            let mut s = 0.0f64;
            let mut visits = 0u64;
            let mut stepped = Vec::with_capacity(n_max);
            for _ in 0..n_max {
                let hit = walker.step(&mut rng);
                visits += hit as u64;
                s += if hit { 1.0 - pi0 } else { -pi0 };
                stepped.push((visits, s));
            }
            let mut rng2 = CounterRng::for_path(seed, i);
            rng2.uniform();
            let counts = regeneration_counts(chain, y0, &n_list, &mut rng2)?;
            Ok(stepped
                .iter()
                .zip(&counts)
                .zip(&n_list)
                .filter(|&((&(v, s), &c), &n)| {
                    let regen = c as f64 - n as f64 * pi0;
                    v != c || (s - regen).abs() > 1e-9 * (n as f64).max(1.0)
                })
                .count())
        })
        .collect::<Result<_>>()?;
    Ok(mismatches.iter().sum())
}

/// Wald identity from 0: `E[nu_n - pi_0 T_{nu_n}] = 0`, where `T_j` are the
/// renewal times and `nu_n = min{j : T_j >= n}`.
pub fn wald_check(chain: &RenewalChain, n: usize, paths: usize, seed: u64) -> Result<BoundReport> {
    if n == 0 || paths < 2 {
        return param("wald check needs n >= 1 and at least two paths");
    }
    let sampler = chain.sampler()?;
    let support = chain.support();
    let pi0 = chain.pi0();
    let values: Vec<f64> = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::for_path(seed, i);
            let (mut nu, mut t) = (0u64, 0u64);
            while t < n as u64 {
                t += support[sampler.tau_index(rng.uniform())];
                nu += 1;
            }
            // sum of xi_j = 1 - pi_0 tau_j over j <= nu
            nu as f64 - pi0 * t as f64
        })
        .collect();
    let est = MeanEstimate::of(&values);
    Ok(
        BoundReport::centered("wald_identity", est.mean, est.stderr, 0.0)
            .with_n(n as u64)
            .with_mc(paths as u64, seed),
    )
}
