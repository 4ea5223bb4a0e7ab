//! Stationary sequences with exactly known conditional structure, started in
//! their stationary law and driven by counter-based random streams.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::counterexample::{ChainWalker, RenewalChain, SecondMoment};
use crate::error::{param, Error, Result};
use crate::rng::CounterRng;
use crate::stats::MeanEstimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessSpec {
    /// `X_k = sd * Z_k`
    Iid { sd: f64 },
    /// `X_k = sum_{j=0}^{L} c_j eps_{k-j}`
    Linear {
        coeffs: Vec<f64>,
        innovation_sd: f64,
    },
    /// `X_k = rho X_{k-1} + eps_k`
    Ar1 { rho: f64, innovation_sd: f64 },
    /// `X_k = I(Y_k = 0) - pi_0` for the renewal chain `Y`.
    Renewal { chain: Arc<RenewalChain> },
}

impl ProcessSpec {
    pub fn iid(sd: f64) -> Self {
        ProcessSpec::Iid { sd }
    }

    pub fn linear(coeffs: &[f64], innovation_sd: f64) -> Self {
        ProcessSpec::Linear {
            coeffs: coeffs.to_vec(),
            innovation_sd,
        }
    }

    pub fn ar1(rho: f64, innovation_sd: f64) -> Self {
        ProcessSpec::Ar1 { rho, innovation_sd }
    }

    pub fn renewal(chain: RenewalChain) -> Self {
        ProcessSpec::Renewal {
            chain: Arc::new(chain),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                param(format!("{name} must be positive and finite, got {v}"))
            }
        };
        match self {
            ProcessSpec::Iid { sd } => positive("sd", *sd),
            ProcessSpec::Linear {
                coeffs,
                innovation_sd,
            } => {
                if coeffs.is_empty() {
                    return param("linear coefficient list must be nonempty");
                }
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return param("linear coefficients must be finite");
                }
                positive("innovation_sd", *innovation_sd)
            }
            ProcessSpec::Ar1 { rho, innovation_sd } => {
                if !(rho.is_finite() && rho.abs() < 1.0) {
                    return param(format!("AR(1) needs |rho| < 1, got {rho}"));
                }
                positive("innovation_sd", *innovation_sd)
            }
            // chains are validated when they are built
            ProcessSpec::Renewal { .. } => Ok(()),
        }
    }

    /// Short human-readable identifier.
    pub fn id(&self) -> String {
        match self {
            ProcessSpec::Iid { sd } => format!("iid(sd={sd})"),
            ProcessSpec::Linear {
                coeffs,
                innovation_sd,
            } => {
                let c: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
                format!("linear(c=[{}],sd={innovation_sd})", c.join(","))
            }
            ProcessSpec::Ar1 { rho, innovation_sd } => {
                format!("ar1(rho={rho},sd={innovation_sd})")
            }
            ProcessSpec::Renewal { chain } => format!(
                "renewal(support_len={},max={},pi0={:.6})",
                chain.support().len(),
                chain.max_support(),
                chain.pi0()
            ),
        }
    }

    /// True when `E(S_n | F_0)` is a function of a finite-dimensional state.
    pub fn is_markov(&self) -> bool {
        matches!(self, ProcessSpec::Ar1 { .. } | ProcessSpec::Renewal { .. })
    }

    pub fn chain(&self) -> Option<&RenewalChain> {
        match self {
            ProcessSpec::Renewal { chain } => Some(chain),
            _ => None,
        }
    }

    /// `||X_1||_2`
    pub fn x1_norm(&self) -> f64 {
        match self {
            ProcessSpec::Iid { sd } => *sd,
            ProcessSpec::Linear {
                coeffs,
                innovation_sd,
            } => innovation_sd * coeffs.iter().map(|c| c * c).sum::<f64>().sqrt(),
            ProcessSpec::Ar1 { rho, innovation_sd } => innovation_sd / (1.0 - rho * rho).sqrt(),
            ProcessSpec::Renewal { chain } => (chain.pi0() * (1.0 - chain.pi0())).sqrt(),
        }
    }

    /// Long-run variance `lim E S_n^2 / n`.
    pub fn sigma2_closed_form(&self) -> Result<f64> {
        match self {
            ProcessSpec::Iid { sd } => Ok(sd * sd),
            ProcessSpec::Linear {
                coeffs,
                innovation_sd,
            } => Ok(innovation_sd.powi(2) * coeffs.iter().sum::<f64>().powi(2)),
            ProcessSpec::Ar1 { rho, innovation_sd } => {
                Ok(innovation_sd.powi(2) / (1.0 - rho).powi(2))
            }
            // renewal-reward: Var(tau) / E[tau]^3
            ProcessSpec::Renewal { chain } => match chain.e_tau_sq() {
                SecondMoment::Finite { value } => {
                    Ok((value - chain.e_tau().powi(2)) * chain.pi0().powi(3))
                }
                SecondMoment::Divergent { .. } => Err(Error::NoClosedForm(
                    "E[tau^2] is infinite: Var S_n / n diverges".into(),
                )),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub spec_id: String,
    pub seed: u64,
    /// `X_1..X_n`
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialSumPath {
    /// `S_0 = 0, S_1, ..., S_n`
    pub sums: Vec<f64>,
}

impl PartialSumPath {
    pub fn n(&self) -> usize {
        self.sums.len() - 1
    }

    /// Recovers `X_k = S_k - S_{k-1}`.
    pub fn increments(&self) -> Vec<f64> {
        self.sums.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// The conditioning information retained alongside a path.
#[derive(Debug, Clone, PartialEq)]
pub enum StateTrace {
    None,
    /// `innovations[i] = eps_{i + 1 - lag}`, i.e. `eps_{1-L}, ..., eps_n`.
    Innovations { innovations: Vec<f64>, lag: usize },
    /// `X_0` and `eps_1..eps_n`.
    Autoregressive { x0: f64, innovations: Vec<f64> },
    /// `Y_0..Y_n`.
    Chain { states: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub path: PathSample,
    pub trace: StateTrace,
}

/// Path `X_1..X_n` from the stream keyed by `seed`.
pub fn simulate_path(spec: &ProcessSpec, n: usize, seed: u64) -> Result<PathSample> {
    simulate_trajectory(spec, n, seed).map(|t| t.path)
}

/// Path plus its conditioning trace.
pub fn simulate_trajectory(spec: &ProcessSpec, n: usize, seed: u64) -> Result<Trajectory> {
    spec.validate()?;
    if n == 0 {
        return param("path length must be at least 1");
    }
    let mut rng = CounterRng::new(seed);
    let (values, trace) = match spec {
        ProcessSpec::Iid { sd } => (
            (0..n).map(|_| sd * rng.standard_normal()).collect(),
            StateTrace::None,
        ),
        ProcessSpec::Linear {
            coeffs,
            innovation_sd,
        } => {
            let lag = coeffs.len() - 1;
            let eps: Vec<f64> = (0..n + lag)
                .map(|_| innovation_sd * rng.standard_normal())
                .collect();
            let values = (0..n)
                .map(|t| {
                    // X_{t+1} = sum_j c_j eps_{t+1-j}, eps_{t+1-j} = eps[t + lag - j]
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(j, c)| c * eps[t + lag - j])
                        .sum()
                })
                .collect();
            (
                values,
                StateTrace::Innovations {
                    innovations: eps,
                    lag,
                },
            )
        }
        ProcessSpec::Ar1 { rho, innovation_sd } => {
            let x0 = innovation_sd / (1.0 - rho * rho).sqrt() * rng.standard_normal();
            let eps: Vec<f64> = (0..n)
                .map(|_| innovation_sd * rng.standard_normal())
                .collect();
            let mut x = x0;
            let values = eps
                .iter()
                .map(|e| {
                    x = rho * x + e;
                    x
                })
                .collect();
            (
                values,
                StateTrace::Autoregressive {
                    x0,
                    innovations: eps,
                },
            )
        }
        ProcessSpec::Renewal { chain } => {
            let pi0 = chain.pi0();
            let mut walker = ChainWalker::stationary(chain, &mut rng)?;
            let mut states = Vec::with_capacity(n + 1);
            states.push(walker.state());
            let values = (0..n)
                .map(|_| {
                    let hit = walker.step(&mut rng);
                    states.push(walker.state());
                    if hit {
                        1.0 - pi0
                    } else {
                        -pi0
                    }
                })
                .collect();
            (values, StateTrace::Chain { states })
        }
    };
    Ok(Trajectory {
        path: PathSample {
            spec_id: spec.id(),
            seed,
            values,
        },
        trace,
    })
}

/// `S_0 = 0, S_k = S_{k-1} + X_k`.
pub fn partial_sums(path: &PathSample) -> PartialSumPath {
    partial_sums_of(&path.values)
}

pub fn partial_sums_of(values: &[f64]) -> PartialSumPath {
    let mut sums = Vec::with_capacity(values.len() + 1);
    let mut s = 0.0;
    sums.push(s);
    for &x in values {
        s += x;
        sums.push(s);
    }
    PartialSumPath { sums }
}

/// `W_n(t) = S_{floor(n t)} / sqrt(n)`.
pub fn wn_value(sums: &PartialSumPath, t: f64) -> f64 {
    let n = sums.n();
    let idx = ((n as f64 * t).floor().max(0.0) as usize).min(n);
    sums.sums[idx] / (n as f64).sqrt()
}

/// Path dump with header `k,x,s`; row 0 carries `S_0`.
pub fn path_rows(sums: &PartialSumPath) -> Vec<(usize, f64, f64)> {
    let mut rows = vec![(0, f64::NAN, 0.0)];
    for k in 1..=sums.n() {
        rows.push((k, sums.sums[k] - sums.sums[k - 1], sums.sums[k]));
    }
    rows
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginalMoment {
    pub k: usize,
    pub mean: MeanEstimate,
    pub variance: f64,
    pub variance_stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    pub n: usize,
    pub paths: usize,
    pub marginals: Vec<MarginalMoment>,
    /// Largest pairwise difference in units of its standard error.
    pub worst_mean_z: f64,
    pub worst_variance_z: f64,
    pub pass: bool,
}

/// Mean and variance of `X_k` across paths for `k in {1, n/2, n}` agree
/// pairwise within 4 standard errors.
pub fn stationarity_check(
    spec: &ProcessSpec,
    n: usize,
    paths: usize,
    seed: u64,
) -> Result<StationarityReport> {
    use rayon::prelude::*;
    if n < 2 || paths < 10 {
        return param("stationarity check needs n >= 2 and at least 10 paths");
    }
    let ks = [1usize, n / 2, n];
    let cols: Vec<[f64; 3]> = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let p = simulate_path(spec, n, crate::rng::mix(seed, i))?;
            Ok([p.values[ks[0] - 1], p.values[ks[1] - 1], p.values[ks[2] - 1]])
        })
        .collect::<Result<_>>()?;
    let marginals: Vec<MarginalMoment> = (0..3)
        .map(|c| {
            let xs: Vec<f64> = cols.iter().map(|r| r[c]).collect();
            let mean = MeanEstimate::of(&xs);
            let dev2: Vec<f64> = xs.iter().map(|x| (x - mean.mean).powi(2)).collect();
            let var = MeanEstimate::of(&dev2);
            MarginalMoment {
                k: ks[c],
                mean,
                variance: var.mean,
                variance_stderr: var.stderr,
            }
        })
        .collect();
    let (mut wm, mut wv) = (0.0f64, 0.0f64);
    for a in 0..3 {
        for b in a + 1..3 {
            let (x, y) = (&marginals[a], &marginals[b]);
            let sm = (x.mean.stderr.powi(2) + y.mean.stderr.powi(2)).sqrt();
            let sv = (x.variance_stderr.powi(2) + y.variance_stderr.powi(2)).sqrt();
            let dm = (x.mean.mean - y.mean.mean).abs();
            let dv = (x.variance - y.variance).abs();
            wm = wm.max(if sm > 0.0 { dm / sm } else if dm > 0.0 { f64::INFINITY } else { 0.0 });
            wv = wv.max(if sv > 0.0 { dv / sv } else if dv > 0.0 { f64::INFINITY } else { 0.0 });
        }
    }
    Ok(StationarityReport {
        n,
        paths,
        marginals,
        worst_mean_z: wm,
        worst_variance_z: wv,
        pass: wm <= 4.0 && wv <= 4.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible() {
        for spec in [
            ProcessSpec::iid(1.0),
            ProcessSpec::linear(&[1.0, -1.0], 1.0),
            ProcessSpec::ar1(0.5, 1.0),
            ProcessSpec::renewal(RenewalChain::toy()),
        ] {
            let a = simulate_path(&spec, 200, 42).unwrap();
            let b = simulate_path(&spec, 200, 42).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.values.len(), 200);
            let c = simulate_path(&spec, 200, 43).unwrap();
            assert_ne!(a.values, c.values);
        }
    }

    #[test]
    fn differenced_noise_telescopes() {
        let spec = ProcessSpec::linear(&[1.0, -1.0], 1.0);
        let t = simulate_trajectory(&spec, 50, 9).unwrap();
        let StateTrace::Innovations { innovations, lag } = &t.trace else {
            panic!()
        };
        assert_eq!(*lag, 1);
        let s = partial_sums(&t.path);
        // S_n = eps_n - eps_0 with eps_0 = innovations[0]
        let expected = innovations[50] - innovations[0];
        assert!((s.sums[50] - expected).abs() < 1e-12);
    }

    #[test]
    fn renewal_values_two_point() {
        let ch = RenewalChain::toy();
        let pi0 = ch.pi0();
        let spec = ProcessSpec::renewal(ch);
        let p = simulate_path(&spec, 500, 1).unwrap();
        assert!(p
            .values
            .iter()
            .all(|&x| x == 1.0 - pi0 || x == -pi0));
        assert!((pi0 - 0.758824).abs() < 5e-7);
    }

    #[test]
    fn partial_sum_examples() {
        assert_eq!(partial_sums_of(&[1.0, -1.0, 2.0]).sums, vec![0.0, 1.0, 0.0, 2.0]);
        assert_eq!(
            partial_sums_of(&[1.0, 3.0, -1.0, 1.0]).sums,
            vec![0.0, 1.0, 4.0, 3.0, 4.0]
        );
        assert_eq!(partial_sums_of(&[0.0; 4]).sums, vec![0.0; 5]);
    }

    #[test]
    fn wn_floor_index() {
        let s = partial_sums_of(&[1.0, -1.0, 2.0]);
        assert!((wn_value(&s, 0.6) - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(wn_value(&s, 0.0), 0.0);
        let s4 = partial_sums_of(&[1.0, 3.0, -1.0, 1.0]);
        assert_eq!(wn_value(&s4, 1.0), 2.0);
    }

    #[test]
    fn closed_form_sigma2() {
        assert_eq!(ProcessSpec::ar1(0.5, 1.0).sigma2_closed_form().unwrap(), 4.0);
        assert_eq!(
            ProcessSpec::linear(&[1.0, -1.0], 1.0).sigma2_closed_form().unwrap(),
            0.0
        );
        assert_eq!(ProcessSpec::iid(2.0).sigma2_closed_form().unwrap(), 4.0);
        assert!(ProcessSpec::renewal(RenewalChain::toy()).sigma2_closed_form().unwrap() > 0.0);
        let dense = RenewalChain::dense_cubic(1 << 10).unwrap();
        assert!(ProcessSpec::renewal(dense).sigma2_closed_form().is_err());
        let sparse = RenewalChain::sparse(&crate::counterexample::DecaySpec::InverseLog, 3).unwrap();
        assert!(matches!(
            ProcessSpec::renewal(sparse).sigma2_closed_form(),
            Err(Error::NoClosedForm(_))
        ));
    }

    #[test]
    fn invalid_specs() {
        assert!(ProcessSpec::ar1(1.0, 1.0).validate().is_err());
        assert!(ProcessSpec::iid(0.0).validate().is_err());
        assert!(ProcessSpec::linear(&[], 1.0).validate().is_err());
        assert!(simulate_path(&ProcessSpec::iid(1.0), 0, 1).is_err());
    }

    #[test]
    fn json_forms() {
        let s: ProcessSpec = serde_json::from_str(r#"{"kind":"ar1","rho":0.5,"innovation_sd":1}"#).unwrap();
        assert_eq!(s.sigma2_closed_form().unwrap(), 4.0);
        let r: ProcessSpec = serde_json::from_str(
            r#"{"kind":"renewal","chain":{"rule":"inverse_square","support":[1,2,5]}}"#,
        )
        .unwrap();
        assert!((r.chain().unwrap().pi0() - 129.0 / 170.0).abs() < 1e-14);
        assert!(serde_json::from_str::<ProcessSpec>(r#"{"kind":"iid","sd":1,"extra":2}"#).is_err());
    }

    #[test]
    fn iid_mean_near_zero() {
        let p = simulate_path(&ProcessSpec::iid(1.0), 3, 5).unwrap();
        assert_eq!(p.values.len(), 3);
        assert!(p.values.iter().all(|x| x.abs() < 6.0));
        let r = stationarity_check(&ProcessSpec::ar1(0.5, 1.0), 64, 4000, 3).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
