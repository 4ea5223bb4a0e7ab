//! Exact second moments of partial sums.

use crate::counterexample::RenewalTables;
use crate::error::{param, Result};
use crate::processes::ProcessSpec;

/// `E S_n^2` for n = 0..=N.
pub fn second_moments(spec: &ProcessSpec, n_max: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    match spec {
        ProcessSpec::Iid { sd } => Ok((0..=n_max).map(|n| n as f64 * sd * sd).collect()),
        ProcessSpec::Linear {
            coeffs,
            innovation_sd,
        } => {
            let lag = coeffs.len() - 1;
            let gamma: Vec<f64> = (0..=lag)
                .map(|h| {
                    innovation_sd.powi(2)
                        * coeffs[..coeffs.len() - h]
                            .iter()
                            .zip(&coeffs[h..])
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                })
                .collect();
            Ok(from_autocovariances(|h| gamma.get(h).copied().unwrap_or(0.0), n_max))
        }
        ProcessSpec::Ar1 { rho, innovation_sd } => Ok((0..=n_max)
            .map(|n| ar1_second_moment(*rho, *innovation_sd, n))
            .collect()),
        ProcessSpec::Renewal { chain } => {
            if n_max == 0 {
                return Ok(vec![0.0]);
            }
            Ok(RenewalTables::build(chain, n_max)?.var_s)
        }
    }
}

/// `E S_n^2 = n gamma_0 + 2 sum_{h=1}^{n-1} (n - h) gamma_h`, accumulated as
/// `E S_{n+1}^2 = E S_n^2 + gamma_0 + 2 sum_{h=1}^{n} gamma_h`.
pub fn from_autocovariances<F: Fn(usize) -> f64>(gamma: F, n_max: usize) -> Vec<f64> {
    let g0 = gamma(0);
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(0.0);
    let (mut es2, mut cum) = (0.0, 0.0);
    for n in 0..n_max {
        if n >= 1 {
            cum += gamma(n);
        }
        es2 += g0 + 2.0 * cum;
        out.push(es2);
    }
    out
}

/// `Var S_n = gamma_0 [n (1+rho)/(1-rho) - 2 rho (1 - rho^n)/(1-rho)^2]`.
pub fn ar1_second_moment(rho: f64, sd: f64, n: usize) -> f64 {
    let g0 = sd * sd / (1.0 - rho * rho);
    let nf = n as f64;
    g0 * (nf * (1.0 + rho) / (1.0 - rho) - 2.0 * rho * (1.0 - rho.powi(n as i32)) / (1.0 - rho).powi(2))
}

/// `E[S_a (S_{2a} - S_a)] = (E S_{2a}^2 - 2 E S_a^2) / 2`.
pub fn dyadic_cross_moment(es2: &[f64], a: usize) -> Result<f64> {
    if 2 * a >= es2.len() {
        return param(format!(
            "cross moment at a = {a} needs E S_n^2 up to n = {}",
            2 * a
        ));
    }
    Ok((es2[2 * a] - 2.0 * es2[a]) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterexample::RenewalChain;

    #[test]
    fn ar1_matches_covariance_sum() {
        let (rho, sd) = (0.5f64, 1.0f64);
        let g0 = sd * sd / (1.0 - rho * rho);
        let brute = from_autocovariances(|h| g0 * rho.powi(h as i32), 64);
        for n in 0..=64 {
            assert!((brute[n] - ar1_second_moment(rho, sd, n)).abs() < 1e-10 * brute[n].max(1.0));
        }
        let es2 = second_moments(&ProcessSpec::ar1(0.5, 1.0), 1 << 14).unwrap();
        assert!((es2[1 << 14] / (1 << 14) as f64 - 4.0).abs() < 0.01 * 4.0);
    }

    #[test]
    fn differenced_noise() {
        let es2 = second_moments(&ProcessSpec::linear(&[1.0, -1.0], 1.0), 10).unwrap();
        assert_eq!(es2[0], 0.0);
        for &v in &es2[1..] {
            assert!((v - 2.0).abs() < 1e-15);
        }
        assert!((dyadic_cross_moment(&es2, 4).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn iid_and_renewal() {
        let es2 = second_moments(&ProcessSpec::iid(1.0), 8).unwrap();
        assert_eq!(es2[8], 8.0);
        let ch = RenewalChain::toy();
        let pi0 = ch.pi0();
        let r = second_moments(&ProcessSpec::renewal(ch), 3).unwrap();
        assert!((r[1] - pi0 * (1.0 - pi0)).abs() < 1e-15);
        let spec = ProcessSpec::renewal(RenewalChain::toy());
        let s2 = spec.sigma2_closed_form().unwrap();
        let es2 = second_moments(&spec, 1 << 12).unwrap();
        assert!((es2[1 << 12] / 4096.0 - s2).abs() < 1e-3 * s2);
    }
}
