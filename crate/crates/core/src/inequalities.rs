//! Second-moment and maximal inequalities for stationary partial sums, plus
//! the pathwise telescoping inequalities behind them.

use rayon::prelude::*;
use serde::Serialize;

use crate::conditional::{delta_r, v_exact, DyadicProfile};
use crate::error::{param, Result};
use crate::moments::{dyadic_cross_moment, second_moments};
use crate::processes::{partial_sums_of, simulate_path, ProcessSpec};
use crate::report::BoundReport;
use crate::rng::mix;
use crate::stats::{dyadic_level, MeanEstimate};

/// Paths are reduced in fixed-size chunks, in index order, so results do not
/// depend on the thread count.
const CHUNK: usize = 256;

/// Running maxima of one path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxStats {
    /// `max_{1<=i<=n} |S_i|`
    pub m: f64,
    /// `max(0, S_1, ..., S_n)`
    pub m_plus: f64,
    /// `max(0, -S_1, ..., -S_n)`
    pub m_minus: f64,
    /// `D_k = (M_k^+ - M_{k-1}^+) - (M_k^- - M_{k-1}^-)` for k = 1..=n
    pub d: Vec<f64>,
}

impl MaxStats {
    /// From `S_0 = 0, S_1, ..., S_n`.
    pub fn from_sums(sums: &[f64]) -> Self {
        let (mut mp, mut mm, mut m) = (0.0f64, 0.0f64, 0.0f64);
        let mut d = Vec::with_capacity(sums.len().saturating_sub(1));
        for &s in &sums[1..] {
            let (np, nm) = (mp.max(s), mm.max(-s));
            d.push((np - mp) - (nm - mm));
            mp = np;
            mm = nm;
            m = m.max(s.abs());
        }
        Self {
            m,
            m_plus: mp,
            m_minus: mm,
            d,
        }
    }

    pub fn from_values(values: &[f64]) -> Self {
        Self::from_sums(&partial_sums_of(values).sums)
    }
}

/// Pairs `(a, b)`, `0 <= a < b <= n`, where
/// `|sum_{k=a+1}^b D_k| > max_{a<=i<=b} |S_i - S_a|` beyond rounding.
pub fn window_property_violations(sums: &[f64]) -> Vec<(usize, usize)> {
    let stats = MaxStats::from_sums(sums);
    let n = sums.len() - 1;
    let mut out = Vec::new();
    for a in 0..n {
        let (mut dsum, mut spread) = (0.0f64, 0.0f64);
        for b in a + 1..=n {
            dsum += stats.d[b - 1];
            spread = spread.max((sums[b] - sums[a]).abs());
            if dsum.abs() > spread + 1e-9 * (spread + 1.0) {
                out.push((a, b));
            }
        }
    }
    out
}

/// Outcome of the telescoping inequalities on one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathwiseCheck {
    /// `(M_n^+)^2 <= 4 (S_n^+)^2 - 4 sum_{k<=n} M_{k-1}^+ X_k`
    pub plus_holds: bool,
    /// the same inequality for `-X`
    pub minus_holds: bool,
    /// `M_n^2 <= 4 S_n^2 - 4 sum_{k<n} D_k (S_n - S_k)`
    pub combined_holds: bool,
    /// smallest `rhs - lhs` over the three inequalities, relative to scale
    pub worst_relative_slack: f64,
    pub plus_lhs: f64,
    pub plus_rhs: f64,
}

impl PathwiseCheck {
    pub fn holds(&self) -> bool {
        self.plus_holds && self.minus_holds && self.combined_holds
    }
}

fn one_sided(sums: &[f64], sign: f64) -> (f64, f64, f64) {
    let n = sums.len() - 1;
    let (mut m_prev, mut acc, mut abs_acc) = (0.0f64, 0.0, 0.0);
    for k in 1..=n {
        let x = sign * (sums[k] - sums[k - 1]);
        acc += m_prev * x;
        abs_acc += (m_prev * x).abs();
        m_prev = m_prev.max(sign * sums[k]);
    }
    let sn_plus = (sign * sums[n]).max(0.0);
    let lhs = m_prev * m_prev;
    let rhs = 4.0 * sn_plus * sn_plus - 4.0 * acc;
    (lhs, rhs, lhs.max(4.0 * sn_plus * sn_plus).max(4.0 * abs_acc).max(1.0))
}

/// Checks the telescoping maximal inequalities on a single path `X_1..X_n`
/// with relative tolerance `1e-9`.
pub fn dedecker_rio_pathwise(values: &[f64]) -> PathwiseCheck {
    let sums = partial_sums_of(values).sums;
    let n = values.len();
    let (pl, pr, ps) = one_sided(&sums, 1.0);
    let (ml, mr, ms) = one_sided(&sums, -1.0);
    let stats = MaxStats::from_sums(&sums);
    let sn = sums[n];
    let (mut acc, mut abs_acc) = (0.0, 0.0);
    for k in 1..n {
        let t = stats.d[k - 1] * (sn - sums[k]);
        acc += t;
        abs_acc += t.abs();
    }
    let (cl, cr) = (stats.m * stats.m, 4.0 * sn * sn - 4.0 * acc);
    let cs = cl.max(4.0 * sn * sn).max(4.0 * abs_acc).max(1.0);
    let tol = 1e-9;
    let worst = ((pr - pl) / ps).min((mr - ml) / ms).min((cr - cl) / cs);
    PathwiseCheck {
        plus_holds: pr - pl >= -tol * ps,
        minus_holds: mr - ml >= -tol * ms,
        combined_holds: cr - cl >= -tol * cs,
        worst_relative_slack: worst,
        plus_lhs: pl,
        plus_rhs: pr,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathwiseSweep {
    pub n: usize,
    pub paths: usize,
    pub violations: usize,
    pub window_violations: usize,
    pub worst_relative_slack: f64,
}

/// Runs the pathwise inequalities over `paths` independent paths of length `n`;
/// the window property is brute-forced on the first `window_paths` of them.
pub fn pathwise_sweep(
    spec: &ProcessSpec,
    n: usize,
    paths: usize,
    seed: u64,
    window_paths: usize,
) -> Result<PathwiseSweep> {
    let out: Vec<(bool, f64, usize)> = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let p = simulate_path(spec, n, mix(seed, i))?;
            let c = dedecker_rio_pathwise(&p.values);
            let w = if (i as usize) < window_paths {
                window_property_violations(&partial_sums_of(&p.values).sums).len()
            } else {
                0
            };
            Ok((c.holds(), c.worst_relative_slack, w))
        })
        .collect::<Result<_>>()?;
    Ok(PathwiseSweep {
        n,
        paths,
        violations: out.iter().filter(|o| !o.0).count(),
        window_violations: out.iter().map(|o| o.2).sum(),
        worst_relative_slack: out.iter().map(|o| o.1).fold(f64::INFINITY, f64::min),
    })
}

fn dyadic_profile(spec: &ProcessSpec, n: usize) -> Result<(u32, DyadicProfile)> {
    if n < 1 {
        return param("n must be at least 1");
    }
    let r = dyadic_level(n);
    let cover = if r == 0 { 1 } else { 1usize << (r - 1) };
    let v = v_exact(spec, cover)?;
    Ok((r, delta_r(&v, r as usize)?))
}

/// `E S_n^2 <= n (||X_1|| + Delta_r / 2)^2` with `2^{r-1} < n <= 2^r`,
/// both sides exact.
pub fn prop21_bound(spec: &ProcessSpec, n: usize) -> Result<BoundReport> {
    let (r, prof) = dyadic_profile(spec, n)?;
    let es2 = second_moments(spec, n)?[n];
    let delta = prof.delta(r as usize);
    let rhs = n as f64 * (spec.x1_norm() + 0.5 * delta).powi(2);
    Ok(BoundReport::exact("prop21_second_moment", es2, rhs)
        .with_n(n as u64)
        .with_note(format!("r = {r}, Delta_r = {delta:.12e}, exact E S_n^2")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sigma2Series {
    /// `terms[j] = 2^{-j} E(S_{2^j} (S_{2^{j+1}} - S_{2^j}))`
    pub terms: Vec<f64>,
    pub partial: f64,
    /// `|term_J|`, the size of the remainder if the cross moments stay bounded
    pub tail_estimate: f64,
    pub closed_form: Option<f64>,
}

/// `sigma^2 ~ E X_1^2 + sum_{j<J} 2^{-j} E(S_{2^j}(S_{2^{j+1}} - S_{2^j}))`, i.e. the
/// first `J` cross terms.
pub fn sigma2_series(spec: &ProcessSpec, j_terms: usize) -> Result<Sigma2Series> {
    if !(1..=24).contains(&j_terms) {
        return param("sigma^2 series supports 1 to 24 dyadic terms");
    }
    let es2 = second_moments(spec, 1 << j_terms)?;
    let terms: Vec<f64> = (0..j_terms)
        .map(|j| Ok(dyadic_cross_moment(&es2, 1 << j)? / 2f64.powi(j as i32)))
        .collect::<Result<_>>()?;
    let partial = es2[1] + terms.iter().sum::<f64>();
    Ok(Sigma2Series {
        tail_estimate: terms.last().map_or(0.0, |t| t.abs()),
        terms,
        partial,
        closed_form: spec.sigma2_closed_form().ok(),
    })
}

/// Which adapted sequence plays the role of `Y` in the cross-moment lemma.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YChoice {
    /// `Y_l = X_l`: all moments exact.
    X,
    /// `Y_k = D_k` from the running maxima: Monte Carlo.
    D,
}

/// Largest `n` for which the `Y = D` window scan is run.
pub const MAX_WINDOW_SCAN: usize = 1024;

/// `|E sum_{l<n} Y_l (S_n - S_l)| <= C n Delta_r / 2` where `C` is the
/// constant in `E(sum_a^b Y)^2 <= C (b - a + 1)`.
pub fn lemma22_check(
    spec: &ProcessSpec,
    n: usize,
    paths: usize,
    seed: u64,
    y: YChoice,
) -> Result<BoundReport> {
    if n < 2 {
        return param("the cross-moment lemma needs n >= 2");
    }
    let (r, prof) = dyadic_profile(spec, n)?;
    let delta = prof.delta(r as usize);
    match y {
        YChoice::X => {
            let es2 = second_moments(spec, n)?;
            let lhs = ((es2[n] - n as f64 * es2[1]) / 2.0).abs();
            let c = (1..=n).map(|m| es2[m] / m as f64).fold(0.0, f64::max);
            let rhs = 0.5 * c * n as f64 * delta;
            Ok(BoundReport::exact("lemma22_y_equals_x", lhs, rhs)
                .with_n(n as u64)
                .with_note(format!(
                    "exact; C = {c:.12e}, Delta_r = {delta:.12e}; scale-consistent form \
                     sqrt(C) n Delta_r / 2 = {:.12e}",
                    0.5 * c.sqrt() * n as f64 * delta
                )))
        }
        YChoice::D => {
            if n > MAX_WINDOW_SCAN {
                return param(format!(
                    "Y = D needs a window scan; n must be at most {MAX_WINDOW_SCAN}"
                ));
            }
            if paths < 2 {
                return param("Monte Carlo needs at least two paths");
            }
            let windows = n * (n + 1) / 2;
            let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..paths.div_ceil(CHUNK))
                .into_par_iter()
                .map(|c| {
                    let mut acc = vec![0.0; windows];
                    let mut cross = Vec::with_capacity(CHUNK);
                    for i in c * CHUNK..((c + 1) * CHUNK).min(paths) {
                        let p = simulate_path(spec, n, mix(seed, i as u64))?;
                        let sums = partial_sums_of(&p.values).sums;
                        let st = MaxStats::from_sums(&sums);
                        let mut pre = vec![0.0; n + 1];
                        for k in 1..=n {
                            pre[k] = pre[k - 1] + st.d[k - 1];
                        }
                        let mut w = 0;
                        for a in 1..=n {
                            for b in a..=n {
                                acc[w] += (pre[b] - pre[a - 1]).powi(2);
                                w += 1;
                            }
                        }
                        cross.push(
                            (1..n).map(|k| st.d[k - 1] * (sums[n] - sums[k])).sum::<f64>(),
                        );
                    }
                    Ok((acc, cross))
                })
                .collect::<Result<_>>()?;
            let mut acc = vec![0.0; windows];
            let mut cross = Vec::with_capacity(paths);
            for (a, c) in chunks {
                for (t, v) in acc.iter_mut().zip(a) {
                    *t += v;
                }
                cross.extend(c);
            }
            let mut c_hat = 0.0f64;
            let mut w = 0;
            for a in 1..=n {
                for b in a..=n {
                    c_hat = c_hat.max(acc[w] / paths as f64 / (b - a + 1) as f64);
                    w += 1;
                }
            }
            let est = MeanEstimate::of(&cross);
            let rhs = 0.5 * c_hat * n as f64 * delta;
            Ok(
                BoundReport::statistical("lemma22_y_equals_d", est.mean.abs(), est.stderr, rhs)
                    .with_n(n as u64)
                    .with_mc(paths as u64, seed)
                    .with_note(format!(
                        "C estimated as the max window ratio = {c_hat:.9e}; Delta_r = {delta:.12e}; \
                         scale-consistent form sqrt(C) n Delta_r / 2 = {:.9e}",
                        0.5 * c_hat.sqrt() * n as f64 * delta
                    )),
            )
        }
    }
}

fn prop23_rhs(spec: &ProcessSpec, n: usize, delta: f64) -> f64 {
    n as f64 * (2.0 * spec.x1_norm() + (1.0 + 2f64.sqrt()) * delta).powi(2)
}

/// `E max_{i<=n} S_i^2 <= n (2 ||X_1|| + (1 + sqrt 2) Delta_r)^2`, with the
/// Doob comparison `4 n ||X_1||^2` added when `Delta_r = 0`.
pub fn prop23_maximal(spec: &ProcessSpec, n: usize, paths: usize, seed: u64) -> Result<Vec<BoundReport>> {
    prop23_profile(spec, &[n], paths, seed)
}

/// The maximal inequality at every `n` in the increasing list, using prefixes
/// of one long path per replicate.
pub fn prop23_profile(
    spec: &ProcessSpec,
    n_list: &[usize],
    paths: usize,
    seed: u64,
) -> Result<Vec<BoundReport>> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] < 1 {
        return param("n list must be a nonempty increasing list of positive integers");
    }
    if paths < 2 {
        return param("Monte Carlo needs at least two paths");
    }
    let n_max = *n_list.last().unwrap();
    let r_max = dyadic_level(n_max) as usize;
    let v = v_exact(spec, if r_max == 0 { 1 } else { 1 << (r_max - 1) })?;
    let prof = delta_r(&v, r_max)?;
    let maxima: Vec<Vec<f64>> = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let p = simulate_path(spec, n_max, mix(seed, i))?;
            let mut out = Vec::with_capacity(n_list.len());
            let (mut s, mut m, mut next) = (0.0f64, 0.0f64, 0);
            for (k, x) in p.values.iter().enumerate() {
                s += x;
                m = m.max(s * s);
                if k + 1 == n_list[next] {
                    out.push(m);
                    next += 1;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut reports = Vec::new();
    for (col, &n) in n_list.iter().enumerate() {
        let xs: Vec<f64> = maxima.iter().map(|m| m[col]).collect();
        let est = MeanEstimate::of(&xs);
        let r = dyadic_level(n) as usize;
        let delta = prof.delta(r);
        reports.push(
            BoundReport::statistical("prop23_maximal", est.mean, est.stderr, prop23_rhs(spec, n, delta))
                .with_n(n as u64)
                .with_mc(paths as u64, seed)
                .with_note(format!("r = {r}, Delta_r = {delta:.12e}")),
        );
        if delta == 0.0 {
            let doob = 4.0 * n as f64 * spec.x1_norm().powi(2);
            reports.push(
                BoundReport::statistical("prop23_doob_case", est.mean, est.stderr, doob)
                    .with_n(n as u64)
                    .with_mc(paths as u64, seed)
                    .with_note("Delta_r = 0: the bound reduces to Doob's 4 n ||X_1||^2"),
            );
        }
    }
    Ok(reports)
}

/// CSV summary rows `name,n,lhs,stderr,rhs,margin,verdict`.
pub fn report_rows(reports: &[BoundReport]) -> Vec<[String; 7]> {
    reports
        .iter()
        .map(|r| {
            [
                r.name.clone(),
                r.n.map_or(String::new(), |n| n.to_string()),
                format!("{:.16e}", r.lhs),
                r.lhs_stderr.map_or(String::new(), |s| format!("{s:.16e}")),
                format!("{:.16e}", r.rhs),
                format!("{:.16e}", r.margin),
                format!("{:?}", r.verdict).to_uppercase(),
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterexample::RenewalChain;
    use crate::report::Verdict;

    #[test]
    fn pathwise_examples() {
        let c = dedecker_rio_pathwise(&[1.0, -1.0]);
        assert_eq!((c.plus_lhs, c.plus_rhs), (1.0, 4.0));
        assert!(c.holds());
        let c = dedecker_rio_pathwise(&[-1.0, -1.0]);
        assert_eq!((c.plus_lhs, c.plus_rhs), (0.0, 0.0));
        assert!(c.holds());
        let c = dedecker_rio_pathwise(&[1.0, 1.0]);
        assert_eq!((c.plus_lhs, c.plus_rhs), (4.0, 12.0));
    }

    #[test]
    fn max_stats_consistency() {
        let p = simulate_path(&ProcessSpec::ar1(0.5, 1.0), 40, 3).unwrap();
        let st = MaxStats::from_values(&p.values);
        assert_eq!(st.m, st.m_plus.max(st.m_minus));
        let sums = partial_sums_of(&p.values).sums;
        assert!(window_property_violations(&sums).is_empty());
    }

    #[test]
    fn prop21_examples() {
        let r = prop21_bound(&ProcessSpec::iid(1.0), 8).unwrap();
        assert_eq!((r.lhs, r.rhs, r.margin), (8.0, 8.0, 0.0));
        assert_eq!(r.verdict, Verdict::Pass);
        let r = prop21_bound(&ProcessSpec::linear(&[1.0, -1.0], 1.0), 4).unwrap();
        assert!((r.lhs - 2.0).abs() < 1e-15);
        let want = 4.0 * (2f64.sqrt() + 0.5 * (1.0 + 0.5f64.sqrt())).powi(2);
        assert!((r.rhs - want).abs() < 1e-12 && (r.rhs - 20.57).abs() < 0.01);
        assert!(prop21_bound(&ProcessSpec::ar1(0.5, 1.0), 16).unwrap().verdict.is_pass());
    }

    #[test]
    fn sigma2_examples() {
        let s = sigma2_series(&ProcessSpec::iid(1.0), 10).unwrap();
        assert!((s.partial - 1.0).abs() < 1e-12);
        let s = sigma2_series(&ProcessSpec::linear(&[1.0, -1.0], 1.0), 6).unwrap();
        assert!(s.terms.iter().enumerate().all(|(j, t)| (t + 0.5f64.powi(j as i32)).abs() < 1e-15));
        assert!((s.partial - 2f64.powi(1 - 6)).abs() < 1e-12);
        let s = sigma2_series(&ProcessSpec::ar1(0.5, 1.0), 20).unwrap();
        assert!((s.partial - 4.0).abs() < 0.04);
    }

    #[test]
    fn lemma22_exact_examples() {
        let r = lemma22_check(&ProcessSpec::iid(1.0), 8, 0, 0, YChoice::X).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.verdict.is_pass());
        let r = lemma22_check(&ProcessSpec::linear(&[1.0, -1.0], 1.0), 4, 0, 0, YChoice::X).unwrap();
        assert!((r.lhs - 3.0).abs() < 1e-12);
        assert!((r.rhs - 4.0 * (1.0 + 0.5f64.sqrt())).abs() < 1e-12);
        assert!(r.verdict.is_pass());
    }

    #[test]
    fn prop23_iid_rhs() {
        let rs = prop23_maximal(&ProcessSpec::iid(1.0), 4, 2000, 7).unwrap();
        assert_eq!(rs[0].rhs, 16.0);
        assert!(rs.iter().all(|r| r.verdict.is_pass()));
        assert_eq!(rs[1].name, "prop23_doob_case");
        let rs = prop23_maximal(&ProcessSpec::linear(&[1.0, -1.0], 1.0), 4, 2000, 7).unwrap();
        let want = 4.0 * (2.0 * 2f64.sqrt() + (1.0 + 2f64.sqrt()) * (1.0 + 0.5f64.sqrt())).powi(2);
        assert!((rs[0].rhs - want).abs() < 1e-12 && (rs[0].rhs - 193.196).abs() < 1e-3);
    }

    #[test]
    fn renewal_smoke() {
        let spec = ProcessSpec::renewal(RenewalChain::toy());
        assert!(prop21_bound(&spec, 64).unwrap().verdict.is_pass());
        let rs = prop23_profile(&spec, &[16, 64], 500, 1).unwrap();
        assert_eq!(rs.len(), 2);
    }
}
