//! The conditional norms `V_n = ||E(S_n | F_0)||`, the dyadic functional
//! `Delta_r`, and the series diagnostics built on subadditive sequences.

use rayon::prelude::*;
use serde::Serialize;

use crate::counterexample::{regeneration_counts, RenewalTables};
use crate::error::{param, Error, Result};
use crate::processes::ProcessSpec;
use crate::report::{BoundReport, Verdict};
use crate::rng::{derive_seed, CounterRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    MonteCarlo,
}

/// `V_n <= c n^alpha` for every `n >= from_n` (used for series tail bounds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthEnvelope {
    pub c: f64,
    pub alpha: f64,
    pub from_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VSequence {
    /// `values[n - 1] = V_n`
    pub values: Vec<f64>,
    pub provenance: Provenance,
    pub stderr: Option<Vec<f64>>,
    pub method: String,
    pub envelope: Option<GrowthEnvelope>,
}

impl VSequence {
    /// An analytic sequence `V_n = f(n)`, treated as exact.
    pub fn from_fn<F: Fn(usize) -> f64>(n_max: usize, f: F, method: &str) -> Self {
        Self {
            values: (1..=n_max).map(f).collect(),
            provenance: Provenance::Exact,
            stderr: None,
            method: method.to_string(),
            envelope: None,
        }
    }

    pub fn from_values(values: Vec<f64>, method: &str) -> Self {
        Self {
            values,
            provenance: Provenance::Exact,
            stderr: None,
            method: method.to_string(),
            envelope: None,
        }
    }

    pub fn with_envelope(mut self, envelope: GrowthEnvelope) -> Self {
        self.envelope = Some(envelope);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `V_n` for `1 <= n <= N`.
    pub fn v(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Ok(0.0);
        }
        self.values.get(n - 1).copied().ok_or(Error::Coverage {
            needed: n,
            available: self.values.len(),
        })
    }

    fn require(&self, n: usize) -> Result<()> {
        if n > self.values.len() {
            Err(Error::Coverage {
                needed: n,
                available: self.values.len(),
            })
        } else {
            Ok(())
        }
    }

    /// CSV rows `n,v,stderr,method`.
    pub fn rows(&self) -> Vec<(usize, f64, Option<f64>, &str)> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let se = self.stderr.as_ref().map(|s| s[i]);
                (i + 1, v, se, self.method.as_str())
            })
            .collect()
    }
}

/// `E(S_n | X_0 = x)` for AR(1): `x rho (1 - rho^n) / (1 - rho)`.
pub fn ar1_conditional_factor(rho: f64, n: usize) -> f64 {
    rho * (1.0 - rho.powi(n as i32)) / (1.0 - rho)
}

/// Exact `V_1..V_N`.
pub fn v_exact(spec: &ProcessSpec, n_max: usize) -> Result<VSequence> {
    if n_max < 1 {
        return param("V sequence needs N >= 1");
    }
    spec.validate()?;
    let seq = match spec {
        ProcessSpec::Iid { .. } => VSequence::from_values(vec![0.0; n_max], "closed_form")
            .with_envelope(GrowthEnvelope {
                c: 0.0,
                alpha: 0.0,
                from_n: 1,
            }),
        ProcessSpec::Linear {
            coeffs,
            innovation_sd,
        } => {
            // E(S_n | F_0) = sum_{j>=0} eps_{-j} sum_{i=1}^{n} c_{i+j}
            let lag = coeffs.len() - 1;
            let mut cum = vec![0.0; coeffs.len() + 1]; // cum[m] = c_0 + .. + c_{m-1}
            for (m, c) in coeffs.iter().enumerate() {
                cum[m + 1] = cum[m] + c;
            }
            let partial = |lo: usize, hi: usize| -> f64 {
                // c_lo + ... + c_hi, zero outside 0..=L
                if lo > lag {
                    return 0.0;
                }
                cum[hi.min(lag) + 1] - cum[lo]
            };
            let values: Vec<f64> = (1..=n_max)
                .map(|n| {
                    let s: f64 = (0..lag).map(|j| partial(j + 1, j + n).powi(2)).sum();
                    innovation_sd * s.sqrt()
                })
                .collect();
            let bound = values.iter().cloned().fold(0.0, f64::max);
            // V_n is constant for n >= L
            VSequence::from_values(values, "closed_form").with_envelope(GrowthEnvelope {
                c: bound,
                alpha: 0.0,
                from_n: 1,
            })
        }
        ProcessSpec::Ar1 { rho, innovation_sd } => {
            let g0 = innovation_sd.powi(2) / (1.0 - rho * rho);
            let values = (1..=n_max)
                .map(|n| g0.sqrt() * ar1_conditional_factor(*rho, n).abs())
                .collect();
            let sup = if *rho >= 0.0 { 1.0 } else { 2.0 };
            VSequence::from_values(values, "closed_form").with_envelope(GrowthEnvelope {
                c: g0.sqrt() * rho.abs() * sup / (1.0 - rho),
                alpha: 0.0,
                from_n: 1,
            })
        }
        ProcessSpec::Renewal { chain } => {
            let tables = RenewalTables::build(chain, n_max)?;
            let v = tables.v_sequence(chain);
            let values = v[1..].to_vec();
            // subadditivity: V_{kN+r} <= (k+1) max_{i<=N} V_i <= 2 m max/N for m >= N
            let vmax = values.iter().cloned().fold(0.0, f64::max);
            VSequence::from_values(values, "renewal_dp").with_envelope(GrowthEnvelope {
                c: 2.0 * vmax / n_max as f64,
                alpha: 1.0,
                from_n: n_max,
            })
        }
    };
    Ok(seq)
}

/// Replications consumed by the bootstrap for Monte Carlo stderr.
pub const BOOTSTRAP_REPLICATES: usize = 200;

/// Monte Carlo `V_1..V_N` for Markov specs. Each path freezes `state_0 ~ pi`
/// and runs two independent continuations; the product of their sums is an
/// unbiased estimate of `f_n(state_0)^2`, whose mean is `V_n^2`.
pub fn v_monte_carlo(spec: &ProcessSpec, n_max: usize, paths: usize, seed: u64) -> Result<VSequence> {
    if n_max < 1 || paths < 2 {
        return param("Monte Carlo V needs N >= 1 and at least two paths");
    }
    spec.validate()?;
    let second = derive_seed(seed, "second-replica");
    let products: Vec<Vec<f64>> = match spec {
        ProcessSpec::Ar1 { rho, innovation_sd } => {
            let sd0 = innovation_sd / (1.0 - rho * rho).sqrt();
            (0..paths as u64)
                .into_par_iter()
                .map(|i| {
                    let mut r1 = CounterRng::for_path(seed, i);
                    let mut r2 = CounterRng::for_path(second, i);
                    let x0 = sd0 * r1.standard_normal();
                    let (mut xa, mut xb, mut sa, mut sb) = (x0, x0, 0.0, 0.0);
                    (0..n_max)
                        .map(|_| {
                            xa = rho * xa + innovation_sd * r1.standard_normal();
                            xb = rho * xb + innovation_sd * r2.standard_normal();
                            sa += xa;
                            sb += xb;
                            sa * sb
                        })
                        .collect()
                })
                .collect()
        }
        ProcessSpec::Renewal { chain } => {
            let sampler = chain.sampler()?;
            let n_list: Vec<usize> = (1..=n_max).collect();
            let pi0 = chain.pi0();
            (0..paths as u64)
                .into_par_iter()
                .map(|i| {
                    let mut r1 = CounterRng::for_path(seed, i);
                    let mut r2 = CounterRng::for_path(second, i);
                    let y0 = sampler.pi_state(r1.uniform());
                    let ca = regeneration_counts(chain, y0, &n_list, &mut r1)?;
                    let cb = regeneration_counts(chain, y0, &n_list, &mut r2)?;
                    Ok(ca
                        .iter()
                        .zip(&cb)
                        .zip(&n_list)
                        .map(|((&a, &b), &n)| {
                            let c = n as f64 * pi0;
                            (a as f64 - c) * (b as f64 - c)
                        })
                        .collect())
                })
                .collect::<Result<_>>()?
        }
        _ => {
            return Err(Error::UnsupportedSpec(format!(
                "{}: Monte Carlo V_n needs a Markov state (AR(1) or renewal); use v_exact",
                spec.id()
            )))
        }
    };
    let mut values = Vec::with_capacity(n_max);
    let mut stderr = Vec::with_capacity(n_max);
    let mut boot = CounterRng::new(derive_seed(seed, "bootstrap"));
    let draws: Vec<Vec<usize>> = (0..BOOTSTRAP_REPLICATES)
        .map(|_| (0..paths).map(|_| boot.below(paths as u64) as usize).collect())
        .collect();
    for col in 0..n_max {
        let xs: Vec<f64> = products.iter().map(|p| p[col]).collect();
        let mean = xs.iter().sum::<f64>() / paths as f64;
        let v = mean.max(0.0).sqrt();
        let reps: Vec<f64> = draws
            .iter()
            .map(|idx| {
                let m = idx.iter().map(|&j| xs[j]).sum::<f64>() / paths as f64;
                m.max(0.0).sqrt()
            })
            .collect();
        let rm = reps.iter().sum::<f64>() / reps.len() as f64;
        let var = reps.iter().map(|r| (r - rm).powi(2)).sum::<f64>() / (reps.len() - 1) as f64;
        values.push(v);
        stderr.push(var.sqrt());
    }
    Ok(VSequence {
        values,
        provenance: Provenance::MonteCarlo,
        stderr: Some(stderr),
        method: "two_replica_mc".into(),
        envelope: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GmEntry {
    pub m: usize,
    pub g: f64,
    pub levels: usize,
    pub tail_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicProfile {
    /// `deltas[r - 1] = Delta_r`
    pub deltas: Vec<f64>,
    pub g: Vec<GmEntry>,
}

impl DyadicProfile {
    pub fn delta(&self, r: usize) -> f64 {
        if r == 0 {
            0.0
        } else {
            self.deltas[r - 1]
        }
    }
}

/// `Delta_r = sum_{j<r} V_{2^j} / 2^{j/2}` for r = 1..=R.
pub fn delta_r(v: &VSequence, r_max: usize) -> Result<DyadicProfile> {
    if r_max == 0 {
        return Ok(DyadicProfile {
            deltas: Vec::new(),
            g: Vec::new(),
        });
    }
    v.require(1usize << (r_max - 1))?;
    let mut acc = 0.0;
    let deltas = (0..r_max)
        .map(|j| {
            acc += v.v(1 << j).unwrap() / 2f64.powf(j as f64 / 2.0);
            acc
        })
        .collect();
    Ok(DyadicProfile {
        deltas,
        g: Vec::new(),
    })
}

/// Unordered pairs `(i, j)`, `i <= j`, `i + j <= N`, with
/// `V_{i+j} > V_i + V_j + 1e-9 (V_i + V_j + 1)`.
pub fn check_subadditive(v: &VSequence) -> Result<Vec<(usize, usize)>> {
    if v.provenance != Provenance::Exact {
        return Err(Error::Refused(
            "subadditivity is a sharp inequality; Monte Carlo noise cannot certify it".into(),
        ));
    }
    let n = v.len();
    let vals = &v.values;
    let out: Vec<Vec<(usize, usize)>> = (1..=n / 2)
        .into_par_iter()
        .map(|i| {
            let vi = vals[i - 1];
            (i..=n - i)
                .filter(|&j| {
                    let vj = vals[j - 1];
                    vals[i + j - 1] > vi + vj + 1e-9 * (vi + vj + 1.0)
                })
                .map(|j| (i, j))
                .collect()
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesTriple {
    pub p: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "R")]
    pub r: usize,
    /// Bound on the omitted tail of `I` (when a growth envelope is known).
    pub tail_bound: Option<f64>,
    pub tail_bound_j: Option<f64>,
    pub tail_bound_w: Option<f64>,
    /// `I` truncated at the largest even level `<= R`.
    pub i_even: f64,
}

/// `I = sum_{j=0}^R V_{2^j} / 2^{j(p-1)}`, `J = sum_{n<=2^R} V_n / n^p`,
/// `W = sum_{n<=2^R} n^-p max_{i<=n} V_i`.
pub fn series_triple(v: &VSequence, p: f64, r: usize) -> Result<SeriesTriple> {
    if !(p > 1.0 && p.is_finite()) {
        return param(format!("series exponent must exceed 1, got {p}"));
    }
    if r > 40 {
        return param("truncation level R must be at most 40");
    }
    let top = 1usize << r;
    v.require(top)?;
    let mut i_sum = 0.0;
    let mut i_even = 0.0;
    for j in 0..=r {
        i_sum += v.v(1 << j)? / 2f64.powf(j as f64 * (p - 1.0));
        if j == r - (r % 2) {
            i_even = i_sum;
        }
    }
    let (mut j_sum, mut w_sum, mut running) = (0.0, 0.0, 0.0f64);
    for n in 1..=top {
        let vn = v.values[n - 1];
        running = running.max(vn);
        let w = (n as f64).powf(-p);
        j_sum += vn * w;
        w_sum += running * w;
    }
    let (tail_i, tail_j) = match v.envelope {
        Some(GrowthEnvelope { c, alpha, from_n }) if from_n <= top => {
            let q = 2f64.powf(alpha - (p - 1.0));
            let ti = (q < 1.0).then(|| c * q.powi(r as i32 + 1) / (1.0 - q));
            let tj = (alpha < p - 1.0)
                .then(|| c * (top as f64).powf(alpha - p + 1.0) / (p - 1.0 - alpha));
            (ti, tj)
        }
        _ => (None, None),
    };
    // the running max obeys the same envelope when alpha >= 0 and c covers the head
    let tail_w = match v.envelope {
        Some(GrowthEnvelope { c, alpha, from_n }) if from_n == 1 && alpha >= 0.0 => tail_j
            .map(|_| c * (top as f64).powf(alpha - p + 1.0) / (p - 1.0 - alpha)),
        _ => None,
    };
    Ok(SeriesTriple {
        p,
        i: i_sum,
        j: j_sum,
        w: w_sum,
        r,
        tail_bound: tail_i,
        tail_bound_j: tail_j,
        tail_bound_w: tail_w,
        i_even,
    })
}

/// `K_p = 1 / (1 - 2^{-(p-1)})`
pub fn k_p(p: f64) -> f64 {
    1.0 / (1.0 - 2f64.powf(-(p - 1.0)))
}

/// Proof-derived `C_p = [9 (2^{2-p} + 1)]^{-1}`.
pub fn c_p(p: f64) -> f64 {
    1.0 / (9.0 * (2f64.powf(2.0 - p) + 1.0))
}

/// `J <= W`, `W <= K_p I`, and `C_p I <= J`.
pub fn lemma27_check(t: &SeriesTriple) -> Vec<BoundReport> {
    let kp = k_p(t.p);
    let cp = c_p(t.p);
    let r_even = t.r - t.r % 2;
    let mut lower = BoundReport::exact("lemma27_lower_I_le_J_over_Cp", t.i_even, t.j / cp)
        .with_n(1 << t.r)
        .with_note(format!(
            "C_p = {cp:.9} is proof-derived; I truncated at the even level {r_even} \
             (blocks of 4^r), J at 2^{}",
            t.r
        ));
    if let Some(tail) = t.tail_bound {
        let full_ok = t.i + tail <= t.j / cp * (1.0 + 1e-9);
        lower = lower.with_note(format!(
            "full-series extrapolation I <= {:.9e} (tail bound {tail:.3e}) vs J/C_p >= {:.9e}: {}",
            t.i + tail,
            t.j / cp,
            if full_ok { "holds" } else { "not certified" }
        ));
    } else {
        lower = lower.with_note("no analytic tail bound for I at this p");
    }
    vec![
        BoundReport::exact("lemma27_J_le_W", t.j, t.w).with_n(1 << t.r),
        BoundReport::exact("lemma27_W_le_KpI", t.w, kp * t.i)
            .with_n(1 << t.r)
            .with_note(format!("K_p = {kp:.9}")),
        lower,
    ]
}

/// `|A_N| = #{i <= N : V_i >= V_N / 2}` and whether it is at least `N/2`.
pub fn property_an(v: &VSequence, n: usize) -> Result<(usize, Verdict)> {
    v.require(n)?;
    if n == 0 {
        return param("N must be positive");
    }
    let half = v.values[n - 1] / 2.0;
    let card = v.values[..n].iter().filter(|&&x| x >= half).count();
    Ok((card, Verdict::from_bool(2 * card >= n)))
}

/// `G_m = m^{-1/2} sum_{k=0}^{K} V_{m 2^k} / 2^{k/2}` with a geometric tail
/// bound when the growth envelope permits.
pub fn g_m_profile(v: &VSequence, m_list: &[usize], k: usize) -> Result<Vec<GmEntry>> {
    m_list
        .iter()
        .map(|&m| {
            if m == 0 {
                return param("G_m needs m >= 1");
            }
            v.require(m << k)?;
            let mut g = 0.0;
            for level in 0..=k {
                g += v.v(m << level)? / 2f64.powf(level as f64 / 2.0);
            }
            let tail_bound = v.envelope.and_then(|e| {
                let q = 2f64.powf(e.alpha - 0.5);
                (q < 1.0 && e.from_n <= m << (k + 1)).then(|| {
                    e.c * (m as f64).powf(e.alpha) * q.powi(k as i32 + 1) / (1.0 - q)
                        / (m as f64).sqrt()
                })
            });
            Ok(GmEntry {
                m,
                g: g / (m as f64).sqrt(),
                levels: k,
                tail_bound,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterexample::RenewalChain;

    #[test]
    fn closed_forms() {
        let iid = v_exact(&ProcessSpec::iid(1.0), 10).unwrap();
        assert!(iid.values.iter().all(|&x| x == 0.0));
        let lin = v_exact(&ProcessSpec::linear(&[1.0, -1.0], 1.0), 10).unwrap();
        assert!(lin.values.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        let ar = v_exact(&ProcessSpec::ar1(0.5, 1.0), 10).unwrap();
        assert!((ar.values[0] - (4.0f64 / 3.0).sqrt() * 0.5).abs() < 1e-15);
        assert!((ar.values[0] - 0.57735).abs() < 5e-6);
    }

    #[test]
    fn linear_matches_brute_expansion() {
        let c = [0.7, -0.2, 0.5, 0.1];
        let v = v_exact(&ProcessSpec::linear(&c, 1.3), 8).unwrap();
        for n in 1..=8usize {
            let mut s = 0.0;
            for j in 0..10usize {
                let t: f64 = (1..=n).map(|i| c.get(i + j).copied().unwrap_or(0.0)).sum();
                s += t * t;
            }
            assert!((v.v(n).unwrap() - 1.3 * s.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn delta_examples() {
        let one = VSequence::from_fn(1 << 12, |_| 1.0, "const");
        let d = delta_r(&one, 2).unwrap();
        assert!((d.delta(2) - (1.0 + 0.5f64.sqrt())).abs() < 1e-15);
        let d = delta_r(&one, 13).unwrap();
        let q = 0.5f64.sqrt();
        assert!((d.delta(13) - (1.0 - q.powi(13)) / (1.0 - q)).abs() < 1e-12);
        assert!((d.delta(13) - 1.0 / (1.0 - q)).abs() < 0.04);
        assert!(delta_r(&one, 14).is_err());
        let zero = VSequence::from_fn(8, |_| 0.0, "zero");
        assert!(delta_r(&zero, 4).unwrap().deltas.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn subadditive_scans() {
        let bad = VSequence::from_values(vec![1.0, 3.0], "artificial");
        assert_eq!(check_subadditive(&bad).unwrap(), vec![(1, 1)]);
        let root = VSequence::from_fn(2000, |n| (n as f64).sqrt(), "sqrt");
        assert!(check_subadditive(&root).unwrap().is_empty());
        let ar = v_exact(&ProcessSpec::ar1(0.5, 1.0), 500).unwrap();
        assert!(check_subadditive(&ar).unwrap().is_empty());
        let ch = v_exact(&ProcessSpec::renewal(RenewalChain::toy()), 300).unwrap();
        assert!(check_subadditive(&ch).unwrap().is_empty());
        let mut mc = ar.clone();
        mc.provenance = Provenance::MonteCarlo;
        assert!(matches!(check_subadditive(&mc), Err(Error::Refused(_))));
    }

    #[test]
    fn series_examples() {
        let lin = VSequence::from_fn(1 << 10, |n| n as f64, "n");
        let t = series_triple(&lin, 1.5, 10).unwrap();
        let direct: f64 = (1..=1024).map(|n| (n as f64).powf(-0.5)).sum();
        assert!((t.j - direct).abs() < 1e-10);
        assert!((t.j - 62.6).abs() < 0.05);
        assert!((k_p(1.5) - 3.41421).abs() < 5e-6);
        let one = VSequence::from_fn(1 << 20, |_| 1.0, "one").with_envelope(GrowthEnvelope {
            c: 1.0,
            alpha: 0.0,
            from_n: 1,
        });
        let t = series_triple(&one, 1.5, 20).unwrap();
        assert!((t.i + t.tail_bound.unwrap() - 1.0 / (1.0 - 0.5f64.sqrt())).abs() < 1e-9);
        assert!(lemma27_check(&t).iter().all(|r| r.verdict.is_pass()));
    }

    #[test]
    fn property_an_examples() {
        let one = VSequence::from_fn(10, |_| 1.0, "one");
        assert_eq!(property_an(&one, 10).unwrap(), (10, Verdict::Pass));
        let lin = VSequence::from_fn(10, |n| n as f64, "n");
        assert_eq!(property_an(&lin, 10).unwrap(), (6, Verdict::Pass));
        let root = VSequence::from_fn(100, |n| (n as f64).sqrt(), "sqrt");
        assert_eq!(property_an(&root, 100).unwrap(), (76, Verdict::Pass));
    }

    #[test]
    fn g_profiles() {
        let one = VSequence::from_fn(1 << 12, |_| 1.0, "one");
        let g = g_m_profile(&one, &[1, 4, 16], 6).unwrap();
        let base: f64 = (0..=6).map(|k| 2f64.powf(-(k as f64) / 2.0)).sum();
        assert!((g[1].g - base / 2.0).abs() < 1e-15);
        assert!(g[2].g < g[1].g && g[1].g < g[0].g);
        let ar = v_exact(&ProcessSpec::ar1(0.5, 1.0), 64 << 6).unwrap();
        let g = g_m_profile(&ar, &[4, 64], 6).unwrap();
        assert!(g[1].g < g[0].g);
    }

    #[test]
    fn mc_rejects_iid() {
        assert!(matches!(
            v_monte_carlo(&ProcessSpec::iid(1.0), 4, 10, 1),
            Err(Error::UnsupportedSpec(_))
        ));
    }

    #[test]
    fn mc_matches_exact_small() {
        let spec = ProcessSpec::renewal(RenewalChain::toy());
        let ex = v_exact(&spec, 4).unwrap();
        let mc = v_monte_carlo(&spec, 4, 20_000, 17).unwrap();
        let se = mc.stderr.as_ref().unwrap();
        for n in 0..4 {
            assert!((mc.values[n] - ex.values[n]).abs() < 4.0 * se[n], "n={}", n + 1);
        }
    }
}
