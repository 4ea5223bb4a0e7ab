//! Empirical checks of the functional CLT: the marginal at `t = 1`, the
//! covariance of `W_n(s), W_n(t)`, uniform integrability of `max S_k^2 / n`,
//! and the convergence of `E S_n^2 / n`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::moments::second_moments;
use crate::processes::{simulate_path, ProcessSpec};
use crate::report::Verdict;
use crate::rng::mix;
use crate::stats::{ks_distance_sorted, normal_cdf, quantile_sorted, sort_floats, MeanEstimate};

/// Asymptotic 99% Kolmogorov critical value, scaled by `1/sqrt(paths)`.
pub const KS_CRITICAL: f64 = 1.63;
/// Fixed allowance for pre-asymptotic `n` and lattice effects.
pub const KS_ALLOWANCE: f64 = 0.01;
/// Degenerate-limit check: `P(|S_n| / sqrt n > DEGENERATE_LEVEL) < DEGENERATE_PROB`.
pub const DEGENERATE_LEVEL: f64 = 0.1;
pub const DEGENERATE_PROB: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>) -> Self {
        sort_floats(&mut values);
        Self { sorted: values }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// `#{x_i <= x} / n`
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn quantile(&self, q: f64) -> f64 {
        quantile_sorted(&self.sorted, q)
    }

    pub fn ks_distance<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        ks_distance_sorted(&self.sorted, cdf)
    }

    /// Plot rows `x,empirical,normal` on an even grid over the central range.
    pub fn cdf_rows(&self, points: usize) -> Vec<(f64, f64, f64)> {
        if self.sorted.is_empty() || points < 2 {
            return Vec::new();
        }
        let (lo, hi) = (self.quantile(0.001), self.quantile(0.999));
        let lo = lo.min(-3.0);
        let hi = hi.max(3.0);
        (0..points)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
                (x, self.cdf(x), normal_cdf(x))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CltMode {
    /// `S_n / (sigma sqrt n)` against the standard normal
    Normal,
    /// `sigma^2 = 0`: the rescaled sums must concentrate at 0
    Degenerate,
}

#[derive(Debug, Clone, Serialize)]
pub struct CltReport {
    pub spec_id: String,
    pub n: usize,
    pub paths: usize,
    pub seed: u64,
    pub mode: CltMode,
    pub sigma2: f64,
    pub ks_distance: Option<f64>,
    pub ks_threshold: Option<f64>,
    /// `P(|S_n| / sqrt n > 0.1)` in degenerate mode
    pub tail_probability: Option<f64>,
    pub cov_grid: Vec<CovCell>,
    pub ui_profile: Option<UiProfile>,
    pub verdict: Verdict,
    pub note: String,
    #[serde(skip)]
    pub sample: EmpiricalDistribution,
}

/// `W_n(t_j)` for each grid point plus `max_{k<=n} S_k^2 / n`, per path.
fn sample_paths(
    spec: &ProcessSpec,
    n: usize,
    paths: usize,
    seed: u64,
    grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if n < 1 || paths < 2 {
        return param("need n >= 1 and at least two paths");
    }
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return param("grid points must lie in [0, 1]");
    }
    let idx: Vec<usize> = grid
        .iter()
        .map(|t| ((n as f64 * t).floor() as usize).min(n))
        .collect();
    let root = (n as f64).sqrt();
    (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let p = simulate_path(spec, n, mix(seed, i))?;
            let mut sums = Vec::with_capacity(n + 1);
            let (mut s, mut mx) = (0.0f64, 0.0f64);
            sums.push(0.0);
            for x in &p.values {
                s += x;
                mx = mx.max(s * s);
                sums.push(s);
            }
            let mut row: Vec<f64> = idx.iter().map(|&k| sums[k] / root).collect();
            row.push(mx / n as f64);
            Ok(row)
        })
        .collect()
}

/// Marginal CLT at `t = 1` (KS distance against the normal), or the
/// concentration check when the long-run variance vanishes.
pub fn clt_ks(spec: &ProcessSpec, n: usize, paths: usize, seed: u64) -> Result<CltReport> {
    let sigma2 = spec.sigma2_closed_form().map_err(|e| match e {
        Error::NoClosedForm(m) => Error::UnsupportedSpec(format!(
            "{}: the invariance check needs a finite long-run variance ({m})",
            spec.id()
        )),
        other => other,
    })?;
    let rows = sample_paths(spec, n, paths, seed, &[1.0])?;
    let w1: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let base = |mode, sample, verdict, note: String| CltReport {
        spec_id: spec.id(),
        n,
        paths,
        seed,
        mode,
        sigma2,
        ks_distance: None,
        ks_threshold: None,
        tail_probability: None,
        cov_grid: Vec::new(),
        ui_profile: None,
        verdict,
        note,
        sample,
    };
    if sigma2 <= 1e-12 {
        let tail = w1.iter().filter(|w| w.abs() > DEGENERATE_LEVEL).count() as f64 / paths as f64;
        let mut r = base(
            CltMode::Degenerate,
            EmpiricalDistribution::new(w1),
            Verdict::from_bool(tail < DEGENERATE_PROB),
            format!("sigma^2 = 0: requires P(|S_n|/sqrt n > {DEGENERATE_LEVEL}) < {DEGENERATE_PROB}"),
        );
        r.tail_probability = Some(tail);
        return Ok(r);
    }
    let sd = sigma2.sqrt();
    let dist = EmpiricalDistribution::new(w1.iter().map(|w| w / sd).collect());
    let ks = dist.ks_distance(normal_cdf);
    let threshold = KS_CRITICAL / (paths as f64).sqrt() + KS_ALLOWANCE;
    let mut r = base(
        CltMode::Normal,
        dist,
        Verdict::from_bool(ks < threshold),
        format!(
            "threshold = {KS_CRITICAL}/sqrt(paths) + {KS_ALLOWANCE} (99% asymptotic critical value plus \
             a fixed pre-asymptotic allowance); ergodic case, eta = sigma^2"
        ),
    );
    r.ks_distance = Some(ks);
    r.ks_threshold = Some(threshold);
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovCell {
    pub s: f64,
    pub t: f64,
    pub empirical: f64,
    pub target: f64,
    pub stderr: f64,
    pub error: f64,
    pub pass: bool,
}

/// `Cov(W_n(s), W_n(t)) - sigma^2 min(s, t)` over all pairs `s <= t` of the grid;
/// each cell passes within 4 standard errors.
pub fn fdd_covariance(
    spec: &ProcessSpec,
    n: usize,
    paths: usize,
    seed: u64,
    grid: &[f64],
) -> Result<Vec<CovCell>> {
    let sigma2 = spec.sigma2_closed_form()?;
    let rows = sample_paths(spec, n, paths, seed, grid)?;
    let cols: Vec<Vec<f64>> = (0..grid.len())
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / paths as f64).collect();
    let mut out = Vec::new();
    for a in 0..grid.len() {
        for b in a..grid.len() {
            let (s, t) = (grid[a].min(grid[b]), grid[a].max(grid[b]));
            let prods: Vec<f64> = cols[a]
                .iter()
                .zip(&cols[b])
                .map(|(x, y)| (x - means[a]) * (y - means[b]))
                .collect();
            let est = MeanEstimate::of(&prods);
            let empirical = est.mean * paths as f64 / (paths - 1) as f64;
            let target = sigma2 * s;
            let error = empirical - target;
            out.push(CovCell {
                s,
                t,
                empirical,
                target,
                stderr: est.stderr,
                error,
                pass: error.abs() <= 4.0 * est.stderr,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UiRow {
    pub n: usize,
    pub threshold: f64,
    /// `E[(max_k S_k^2 / n) 1{max_k S_k^2 / n > M}]`
    pub tail: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UiProfile {
    pub rows: Vec<UiRow>,
    /// `(M, sup_n tail)`
    pub sup_over_n: Vec<(f64, f64)>,
    /// the tail is nonincreasing in `M` for every `n` and its sup over `n`
    /// decreases along the thresholds
    pub decreasing: bool,
}

/// Truncated moments of `max_{k<=n} S_k^2 / n`, from prefixes of one long
/// path per replicate.
pub fn uniform_integrability_profile(
    spec: &ProcessSpec,
    n_list: &[usize],
    paths: usize,
    seed: u64,
    thresholds: &[f64],
) -> Result<UiProfile> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] == 0 {
        return param("n list must be a nonempty increasing list of positive integers");
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return param("thresholds must be increasing");
    }
    let n_max = *n_list.last().unwrap();
    let maxima: Vec<Vec<f64>> = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let p = simulate_path(spec, n_max, mix(seed, i))?;
            let (mut s, mut mx, mut next) = (0.0f64, 0.0f64, 0);
            let mut out = Vec::with_capacity(n_list.len());
            for (k, x) in p.values.iter().enumerate() {
                s += x;
                mx = mx.max(s * s);
                if k + 1 == n_list[next] {
                    out.push(mx / n_list[next] as f64);
                    next += 1;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut decreasing = true;
    for (col, &n) in n_list.iter().enumerate() {
        let mut prev = f64::INFINITY;
        for &m in thresholds {
            let xs: Vec<f64> = maxima
                .iter()
                .map(|r| if r[col] > m { r[col] } else { 0.0 })
                .collect();
            let est = MeanEstimate::of(&xs);
            decreasing &= est.mean <= prev;
            prev = est.mean;
            rows.push(UiRow {
                n,
                threshold: m,
                tail: est.mean,
                stderr: est.stderr,
            });
        }
    }
    let sup_over_n: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&m| {
            let sup = rows
                .iter()
                .filter(|r| r.threshold == m)
                .map(|r| r.tail)
                .fold(0.0, f64::max);
            (m, sup)
        })
        .collect();
    decreasing &= sup_over_n.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(UiProfile {
        rows,
        sup_over_n,
        decreasing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaLimit {
    /// `(n, E S_n^2 / n)`
    pub ratios: Vec<(usize, f64)>,
    pub sigma2: Option<f64>,
    pub relative_error_at_last: Option<f64>,
}

/// `E S_n^2 / n` along `n_list`, compared with the closed-form long-run variance.
pub fn eta_limit(spec: &ProcessSpec, n_list: &[usize]) -> Result<EtaLimit> {
    let n_max = n_list.iter().copied().max().unwrap_or(0);
    if n_list.contains(&0) || n_list.is_empty() {
        return param("n list must contain positive integers");
    }
    let es2 = second_moments(spec, n_max)?;
    let ratios: Vec<(usize, f64)> = n_list.iter().map(|&n| (n, es2[n] / n as f64)).collect();
    let sigma2 = spec.sigma2_closed_form().ok();
    let relative_error_at_last = sigma2.map(|s| {
        let last = ratios.last().unwrap().1;
        if s == 0.0 {
            last.abs()
        } else {
            (last - s).abs() / s
        }
    });
    Ok(EtaLimit {
        ratios,
        sigma2,
        relative_error_at_last,
    })
}
