//! The blocking construction: block sums of size `m`, the martingale built
//! from their one-step conditional means, and approximation diagnostics.

use rayon::prelude::*;
use serde::Serialize;

use crate::conditional::{ar1_conditional_factor, v_exact};
use crate::counterexample::RenewalTables;
use crate::error::{param, Error, Result};
use crate::moments::second_moments;
use crate::processes::{partial_sums_of, simulate_trajectory, ProcessSpec, StateTrace, Trajectory};
use crate::report::BoundReport;
use crate::rng::mix;
use crate::stats::{quantile_sorted, sort_floats, MeanEstimate};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockedPath {
    pub m: usize,
    pub k: usize,
    /// `X_i^(m) = m^{-1/2} sum_{j=(i-1)m+1}^{im} X_j`
    pub block_values: Vec<f64>,
}

/// Block sums of size `m`; a trailing partial block is dropped.
pub fn block_sums(values: &[f64], m: usize) -> Result<BlockedPath> {
    if m == 0 || m > values.len() {
        return param(format!("block size must be in 1..={}, got {m}", values.len()));
    }
    let scale = (m as f64).sqrt();
    let block_values: Vec<f64> = values
        .chunks_exact(m)
        .map(|c| c.iter().sum::<f64>() / scale)
        .collect();
    Ok(BlockedPath {
        m,
        k: block_values.len(),
        block_values,
    })
}

/// What the next block's conditional mean depends on.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockState {
    None,
    /// current value `X_t`
    Ar1(f64),
    /// chain state `Y_t`
    Chain(u64),
    /// retained innovations `eps_t, eps_{t-1}, ..., eps_{t-L+1}`
    Innovations(Vec<f64>),
}

/// `E(X^(m)_{i} | state at the block boundary)`, prepared for one `m`.
#[derive(Debug, Clone)]
pub enum BlockMean {
    Zero,
    Ar1 { factor: f64 },
    /// `weights[j] = m^{-1/2} sum_{i=1}^m c_{i+j}` multiplying `eps_{t-j}`
    Linear { weights: Vec<f64> },
    /// `by_state[k] = m^{-1/2} E_k(S_m)` for k = 0..=m; beyond, `tail`
    Renewal { by_state: Vec<f64>, tail: f64 },
}

impl BlockMean {
    pub fn new(spec: &ProcessSpec, m: usize) -> Result<Self> {
        if m == 0 {
            return param("block size must be at least 1");
        }
        spec.validate()?;
        let scale = (m as f64).sqrt();
        Ok(match spec {
            ProcessSpec::Iid { .. } => BlockMean::Zero,
            ProcessSpec::Ar1 { rho, .. } => BlockMean::Ar1 {
                factor: ar1_conditional_factor(*rho, m) / scale,
            },
            ProcessSpec::Linear { coeffs, .. } => {
                let lag = coeffs.len() - 1;
                let weights = (0..lag)
                    .map(|j| (1..=m).map(|i| coeffs.get(i + j).copied().unwrap_or(0.0)).sum::<f64>() / scale)
                    .collect();
                BlockMean::Linear { weights }
            }
            ProcessSpec::Renewal { chain } => {
                let t = RenewalTables::build(chain, m)?;
                BlockMean::Renewal {
                    by_state: (0..=m as u64).map(|k| t.conditional_mean(k, m) / scale).collect(),
                    tail: -(m as f64) * chain.pi0() / scale,
                }
            }
        })
    }

    pub fn at_state(&self, state: &BlockState) -> Result<f64> {
        match (self, state) {
            (BlockMean::Zero, _) => Ok(0.0),
            (BlockMean::Ar1 { factor }, BlockState::Ar1(x)) => Ok(factor * x),
            (BlockMean::Linear { weights }, BlockState::Innovations(eps)) => {
                if eps.len() < weights.len() {
                    return param(format!("need {} retained innovations", weights.len()));
                }
                Ok(weights.iter().zip(eps).map(|(w, e)| w * e).sum())
            }
            (BlockMean::Renewal { by_state, tail }, BlockState::Chain(k)) => {
                Ok(by_state.get(*k as usize).copied().unwrap_or(*tail))
            }
            _ => param("block state does not match the process family"),
        }
    }

    /// The conditional mean of the block starting after time `t` (0-based).
    fn at_time(&self, traj: &Trajectory, t: usize) -> f64 {
        match (self, &traj.trace) {
            (BlockMean::Zero, _) => 0.0,
            (BlockMean::Ar1 { factor }, StateTrace::Autoregressive { x0, .. }) => {
                factor * if t == 0 { *x0 } else { traj.path.values[t - 1] }
            }
            (BlockMean::Linear { weights }, StateTrace::Innovations { innovations, lag }) => {
                // eps_s sits at index s + lag - 1
                weights
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * innovations[t + lag - 1 - j])
                    .sum()
            }
            (BlockMean::Renewal { by_state, tail }, StateTrace::Chain { states }) => {
                by_state.get(states[t] as usize).copied().unwrap_or(*tail)
            }
            _ => unreachable!("trajectory trace always matches its spec"),
        }
    }
}

/// `E(X_i^(m) | F_{i-1}^(m))` given the state at the block boundary.
pub fn conditional_block_mean(spec: &ProcessSpec, state: &BlockState, m: usize) -> Result<f64> {
    BlockMean::new(spec, m)?.at_state(state)
}

/// Martingale increments `X_i^(m) - E(X_i^(m) | F_{i-1}^(m))`, i = 1..=k.
pub fn martingale_increments(traj: &Trajectory, mean: &BlockMean, m: usize) -> Result<Vec<f64>> {
    let blocks = block_sums(&traj.path.values, m)?;
    Ok(blocks
        .block_values
        .iter()
        .enumerate()
        .map(|(i, x)| x - mean.at_time(traj, i * m))
        .collect())
}

/// `M_1^(m), ..., M_k^(m)`.
pub fn martingale_path(traj: &Trajectory, spec: &ProcessSpec, m: usize) -> Result<Vec<f64>> {
    let mean = BlockMean::new(spec, m)?;
    let inc = martingale_increments(traj, &mean, m)?;
    let mut acc = 0.0;
    Ok(inc
        .iter()
        .map(|d| {
            acc += d;
            acc
        })
        .collect())
}

/// `sup_{j<=n} |S_j / sqrt(n) - M_{floor(k j / n)} / sqrt(k)|`.
pub fn sup_error(values: &[f64], martingale: &[f64]) -> f64 {
    let n = values.len();
    let k = martingale.len();
    let sums = partial_sums_of(values).sums;
    let (sn, sk) = ((n as f64).sqrt(), (k as f64).sqrt());
    (0..=n)
        .map(|j| {
            let idx = k * j / n;
            let mk = if idx == 0 { 0.0 } else { martingale[idx - 1] };
            (sums[j] / sn - mk / sk).abs()
        })
        .fold(0.0, f64::max)
}

/// `(E S_m^2 - V_m^2) / m`, the exact second moment of one increment.
pub fn eta_exact(spec: &ProcessSpec, m: usize) -> Result<f64> {
    let es2 = second_moments(spec, m)?[m];
    let v = v_exact(spec, m)?.v(m)?;
    Ok((es2 - v * v) / m as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxReport {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub paths: usize,
    pub seed: u64,
    /// `k^{-1} sum_i (X_i^(m) - E(.))^2`, averaged over paths
    pub eta_m: MeanEstimate,
    pub eta_exact: f64,
    pub eta_check: BoundReport,
    pub mean_sup_err: f64,
    pub sup_err_stderr: f64,
    pub p90_sup_err: f64,
    /// mean of `xi_1 xi_2` over paths (orthogonality of increments)
    pub lag1_product: MeanEstimate,
}

impl ApproxReport {
    /// CSV row `m,eta_m,eta_stderr,mean_sup_err,p90_sup_err`.
    pub fn row(&self) -> (usize, f64, f64, f64, f64) {
        (self.m, self.eta_m.mean, self.eta_m.stderr, self.mean_sup_err, self.p90_sup_err)
    }
}

fn run_block(spec: &ProcessSpec, m: usize, n: usize, paths: usize, seed: u64) -> Result<ApproxReport> {
    let k = n / m;
    if k < 2 || paths < 2 {
        return param("blocking needs at least two blocks and two paths");
    }
    let mean = BlockMean::new(spec, m)?;
    let per_path: Vec<(f64, f64, f64)> = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let traj = simulate_trajectory(spec, n, mix(seed, i))?;
            let inc = martingale_increments(&traj, &mean, m)?;
            let eta = inc.iter().map(|d| d * d).sum::<f64>() / k as f64;
            let mut acc = 0.0;
            let mart: Vec<f64> = inc
                .iter()
                .map(|d| {
                    acc += d;
                    acc
                })
                .collect();
            Ok((eta, sup_error(&traj.path.values, &mart), inc[0] * inc[1]))
        })
        .collect::<Result<_>>()?;
    let etas: Vec<f64> = per_path.iter().map(|p| p.0).collect();
    let mut errs: Vec<f64> = per_path.iter().map(|p| p.1).collect();
    let lag: Vec<f64> = per_path.iter().map(|p| p.2).collect();
    let eta_m = MeanEstimate::of(&etas);
    let err = MeanEstimate::of(&errs);
    sort_floats(&mut errs);
    let exact = eta_exact(spec, m)?;
    Ok(ApproxReport {
        m,
        n,
        k,
        paths,
        seed,
        eta_check: BoundReport::centered("eta_m_consistency", eta_m.mean, eta_m.stderr, exact)
            .with_n(n as u64)
            .with_mc(paths as u64, seed)
            .with_note(format!("m = {m}")),
        eta_m,
        eta_exact: exact,
        mean_sup_err: err.mean,
        sup_err_stderr: err.stderr,
        p90_sup_err: quantile_sorted(&errs, 0.9),
        lag1_product: MeanEstimate::of(&lag),
    })
}

/// `eta^(m)` estimated from `paths` paths of length `n`.
pub fn eta_m(spec: &ProcessSpec, m: usize, n: usize, paths: usize, seed: u64) -> Result<MeanEstimate> {
    Ok(run_block(spec, m, n, paths, seed)?.eta_m)
}

/// One report per block size; every `m` needs `floor(n/m) >= 32`.
pub fn approximation_error(
    spec: &ProcessSpec,
    m_list: &[usize],
    n: usize,
    paths: usize,
    seed: u64,
) -> Result<Vec<ApproxReport>> {
    m_list
        .iter()
        .map(|&m| {
            if m == 0 || n / m < 32 {
                return Err(Error::Parameter(format!(
                    "block size {m} leaves fewer than 32 blocks at n = {n}"
                )));
            }
            // the same seed for every m: paths are shared across block sizes
            run_block(spec, m, n, paths, seed)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterexample::RenewalChain;

    #[test]
    fn block_examples() {
        let b = block_sums(&[1.0, 3.0, -1.0, 1.0], 2).unwrap();
        assert!((b.block_values[0] - 4.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(b.block_values[1], 0.0);
        assert_eq!(block_sums(&[1.0, 2.0, 3.0], 1).unwrap().block_values, vec![1.0, 2.0, 3.0]);
        assert_eq!(block_sums(&[1.0, 2.0, 3.0], 2).unwrap().k, 1);
        assert!(block_sums(&[1.0], 2).is_err());
    }

    #[test]
    fn conditional_mean_examples() {
        let iid = ProcessSpec::iid(1.0);
        assert_eq!(conditional_block_mean(&iid, &BlockState::None, 3).unwrap(), 0.0);
        let ar = ProcessSpec::ar1(0.5, 1.0);
        let v = conditional_block_mean(&ar, &BlockState::Ar1(1.0), 2).unwrap();
        assert!((v - 0.75 / 2f64.sqrt()).abs() < 1e-15);
        let toy = RenewalChain::toy();
        let want = toy.masses()[0] - toy.pi0();
        let spec = ProcessSpec::renewal(toy);
        let v = conditional_block_mean(&spec, &BlockState::Chain(0), 1).unwrap();
        assert!((v - want).abs() < 1e-15 && (v - 0.01637).abs() < 1e-5);
    }

    #[test]
    fn ar1_unit_blocks_recover_innovations() {
        let spec = ProcessSpec::ar1(0.5, 1.0);
        let traj = simulate_trajectory(&spec, 100, 5).unwrap();
        let mean = BlockMean::new(&spec, 1).unwrap();
        let inc = martingale_increments(&traj, &mean, 1).unwrap();
        let StateTrace::Autoregressive { innovations, .. } = &traj.trace else {
            panic!()
        };
        for (a, b) in inc.iter().zip(innovations) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_increment_definition() {
        let spec = ProcessSpec::linear(&[1.0, -1.0], 1.0);
        let traj = simulate_trajectory(&spec, 20, 8).unwrap();
        let mart = martingale_path(&traj, &spec, 2).unwrap();
        let StateTrace::Innovations { innovations, lag } = &traj.trace else {
            panic!()
        };
        let eps = |s: usize| innovations[s + lag - 1];
        // X^(2)_i = (eps_{2i} - eps_{2i-2}) / sqrt 2; conditional mean -eps_{2i-2}/sqrt 2
        let mut acc = 0.0;
        for i in 1..=10 {
            acc += eps(2 * i) / 2f64.sqrt();
            assert!((mart[i - 1] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_exact_examples() {
        let lin = ProcessSpec::linear(&[1.0, -1.0], 1.0);
        for m in [1, 2, 8] {
            assert!((eta_exact(&lin, m).unwrap() - 1.0 / m as f64).abs() < 1e-14);
        }
        assert!((eta_exact(&ProcessSpec::iid(1.0), 5).unwrap() - 1.0).abs() < 1e-14);
        let ar = ProcessSpec::ar1(0.5, 1.0);
        assert!((eta_exact(&ar, 4096).unwrap() - 4.0).abs() < 0.01);
    }

    #[test]
    fn eta_estimates_agree() {
        for spec in [
            ProcessSpec::ar1(0.5, 1.0),
            ProcessSpec::linear(&[1.0, -1.0], 1.0),
            ProcessSpec::renewal(RenewalChain::toy()),
        ] {
            let r = &approximation_error(&spec, &[4], 256, 400, 11).unwrap()[0];
            assert!(r.eta_check.verdict.is_pass(), "{:?}", r.eta_check);
        }
    }
}
