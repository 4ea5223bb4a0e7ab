//! Real-sequence convolution and the online renewal convolution
//! `u_0 = 1, u_k = sum_{j=1}^{k} p_j u_{k-j}`.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

const DIRECT_WORK_LIMIT: usize = 1 << 14;
const CDQ_BASE: usize = 64;

pub struct Convolver {
    planner: FftPlanner<f64>,
}

impl Default for Convolver {
    fn default() -> Self {
        Self::new()
    }
}

impl Convolver {
    pub fn new() -> Self {
        Self {
            planner: FftPlanner::new(),
        }
    }

    /// Full linear convolution, length `a.len() + b.len() - 1`.
    pub fn convolve(&mut self, a: &[f64], b: &[f64]) -> Vec<f64> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let out_len = a.len() + b.len() - 1;
        if a.len() * b.len() <= DIRECT_WORK_LIMIT {
            return convolve_direct(a, b);
        }
        let size = out_len.next_power_of_two();
        let fwd = self.planner.plan_fft_forward(size);
        let inv = self.planner.plan_fft_inverse(size);
        // Pack a into the real part and b into the imaginary part. Both are
        // scaled to unit norm first: otherwise rounding from the larger input
        // leaks into the spectrum of the smaller one.
        let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (na, nb) = (norm(a), norm(b));
        if na == 0.0 || nb == 0.0 {
            return vec![0.0; out_len];
        }
        let (sa, sb) = (1.0 / na, 1.0 / nb);
        let mut buf: Vec<Complex64> = (0..size)
            .map(|i| {
                Complex64::new(
                    a.get(i).map_or(0.0, |x| x * sa),
                    b.get(i).map_or(0.0, |x| x * sb),
                )
            })
            .collect();
        fwd.process(&mut buf);
        let mut prod = vec![Complex64::new(0.0, 0.0); size];
        for k in 0..size {
            let z = buf[k];
            let zc = buf[(size - k) % size].conj();
            let fa = (z + zc) * 0.5;
            let fb = (z - zc) * Complex64::new(0.0, -0.5);
            prod[k] = fa * fb;
        }
        inv.process(&mut prod);
        let scale = na * nb / size as f64;
        prod.iter().take(out_len).map(|z| z.re * scale).collect()
    }
}

pub fn convolve_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Renewal sequence `u_0..=u_n` for the step law `p` (`p[0]` ignored),
/// by divide-and-conquer online convolution.
///
/// The FFT only sees `u_i - c` with `c = 1 / sum j p_j` (the renewal limit);
/// the constant part is added exactly through survival sums. This keeps FFT
/// rounding proportional to the small deviations rather than to `u ~ c`.
pub fn renewal_sequence_fft(p: &[f64], n: usize) -> Vec<f64> {
    let mut u = vec![0.0; n + 1];
    u[0] = 1.0;
    let mut dense = vec![0.0; n + 1];
    for (j, slot) in dense.iter_mut().enumerate().skip(1) {
        *slot = p.get(j).copied().unwrap_or(0.0);
    }
    let mean: f64 = dense.iter().enumerate().rev().map(|(j, &q)| j as f64 * q).sum();
    let center = if mean > 0.0 { 1.0 / mean } else { 0.0 };
    // surv[m] = sum_{j > m} p_j
    let mut surv = vec![0.0; n + 1];
    for m in (0..n).rev() {
        surv[m] = surv[m + 1] + dense[m + 1];
    }
    let mut ctx = Cdq {
        p: &dense,
        surv: &surv,
        center,
        conv: Convolver::new(),
    };
    ctx.run(&mut u, 0, n + 1);
    u
}

struct Cdq<'a> {
    p: &'a [f64],
    surv: &'a [f64],
    center: f64,
    conv: Convolver,
}

impl Cdq<'_> {
    fn run(&mut self, u: &mut [f64], l: usize, r: usize) {
        let p = self.p;
        if r - l <= CDQ_BASE {
            for k in l.max(1)..r {
                let mut acc = 0.0;
                for i in l..k {
                    acc += u[i] * p[k - i];
                }
                u[k] += acc;
            }
            return;
        }
        let mid = l + (r - l) / 2;
        self.run(u, l, mid);
        let dev: Vec<f64> = u[l..mid].iter().map(|x| x - self.center).collect();
        let c = self.conv.convolve(&dev, &p[..r - l]);
        for k in mid..r {
            // sum_{i=l}^{mid-1} p_{k-i} = surv[k-mid] - surv[k-l]
            let flat = self.center * (self.surv[k - mid] - self.surv[k - l]);
            u[k] += c[k - l] + flat;
        }
        self.run(u, mid, r);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_direct() {
        let a: Vec<f64> = (0..300).map(|i| ((i * 37 % 101) as f64) / 101.0).collect();
        let b: Vec<f64> = (0..257).map(|i| ((i * 13 % 89) as f64) / 89.0 - 0.5).collect();
        let mut c = Convolver::new();
        let f = c.convolve(&a, &b);
        let d = convolve_direct(&a, &b);
        assert_eq!(f.len(), d.len());
        for (x, y) in f.iter().zip(&d) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn renewal_sequence_geometric_law() {
        // p_1 = 1: the renewal sequence is identically one
        let u = renewal_sequence_fft(&[0.0, 1.0], 500);
        assert!(u.iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn renewal_sequence_matches_recursion() {
        let n = 2000;
        let mut p = vec![0.0; n + 1];
        let z: f64 = (1..=n).map(|i| (i as f64).powi(-3)).sum();
        for (i, slot) in p.iter_mut().enumerate().skip(1) {
            *slot = (i as f64).powi(-3) / z;
        }
        let fast = renewal_sequence_fft(&p, n);
        let mut slow = vec![0.0; n + 1];
        slow[0] = 1.0;
        for k in 1..=n {
            slow[k] = (1..=k).map(|j| p[j] * slow[k - j]).sum();
        }
        for k in 0..=n {
            assert!((fast[k] - slow[k]).abs() < 1e-12, "k={k}");
        }
    }
}
