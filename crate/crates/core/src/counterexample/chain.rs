//! The renewal chain on {0, 1, 2, ...}: from `k >= 1` move to `k - 1`; from 0
//! jump to `j - 1` with probability `p_j`. The return time to 0 has law `p`.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize, Serializer};

use super::support::{build_u, DecaySpec};
use crate::error::{Error, Result};
use crate::rng::InverseCdf;

/// `zeta(2)`
pub const ZETA2: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
/// `zeta(3)` (Apery's constant)
pub const ZETA3: f64 = 1.202_056_903_159_594_3;

const MASS_TOLERANCE: f64 = 1e-12;
/// Stationary tail mass below which states are folded into the last one kept.
pub const PI_TAIL_CUTOFF: f64 = 1e-12;
/// Largest stationary table the sampler will allocate.
pub const MAX_PI_STATES: u64 = 1 << 25;
/// Truncation of the dense cubic rule when a config does not give one.
pub const DEFAULT_DENSE_TRUNCATION: u64 = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SecondMoment {
    Finite {
        value: f64,
    },
    /// `E tau^2` is infinite for the untruncated law; `partial` is the value
    /// of the truncated law actually used.
    Divergent {
        partial: f64,
        certificate: String,
    },
}

impl SecondMoment {
    pub fn is_finite(&self) -> bool {
        matches!(self, SecondMoment::Finite { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ChainOrigin {
    Explicit,
    /// `p_{u_j} = c / u_j^2` on a finite support.
    InverseSquare,
    /// Inverse-square masses on the sparse support built from a decay sequence.
    Sparse {
        decay: String,
        lambda: f64,
        levels: usize,
    },
    /// `p_i = i^-3 / zeta(3)` for `i < T`, remaining mass on `T`.
    DenseCubic {
        truncation: u64,
        fold_mass: f64,
        fold_bias_e_tau: f64,
    },
}

/// Sampling tables: return-time law and truncated stationary law.
pub struct ChainSampler {
    tau: InverseCdf,
    pi: InverseCdf,
    pi_fold: f64,
}

impl ChainSampler {
    /// Index into the support list.
    pub fn tau_index(&self, u: f64) -> usize {
        self.tau.index_for(u)
    }

    pub fn pi_state(&self, u: f64) -> u64 {
        self.pi.index_for(u) as u64
    }

    /// Number of stationary states retained.
    pub fn pi_states(&self) -> usize {
        self.pi.len()
    }

    /// Tail mass folded into the largest retained state.
    pub fn pi_fold(&self) -> f64 {
        self.pi_fold
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ChainDoc {
    Recipe(ChainRecipe),
    Explicit(ExplicitChain),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
enum ChainRecipe {
    /// Inverse-square masses on a given support.
    InverseSquare { support: Vec<u64> },
    /// Inverse-square masses on the support built from the decay sequence.
    Sparse { decay: DecaySpec, levels: usize },
    DenseCubic {
        #[serde(default)]
        truncation: Option<u64>,
    },
    /// `p_1 = 1`: the chain sits at 0.
    Degenerate,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitChain {
    support: Vec<u64>,
    masses: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pi0: Option<f64>,
}

#[derive(Deserialize)]
#[serde(try_from = "ChainDoc")]
pub struct RenewalChain {
    support: Vec<u64>,
    masses: Vec<f64>,
    c: Option<f64>,
    pi0: f64,
    e_tau: f64,
    e_tau_sq: SecondMoment,
    origin: ChainOrigin,
    /// `tail_mass[j] = sum_{i >= j} p_i`, with a trailing 0.
    tail_mass: Vec<f64>,
    /// `tail_pu[j] = sum_{i >= j} p_i u_i`, with a trailing 0.
    tail_pu: Vec<f64>,
    sampler: OnceLock<std::result::Result<ChainSampler, String>>,
}

impl TryFrom<ChainDoc> for RenewalChain {
    type Error = Error;

    fn try_from(doc: ChainDoc) -> Result<Self> {
        match doc {
            ChainDoc::Recipe(ChainRecipe::InverseSquare { support }) => {
                RenewalChain::inverse_square(&support)
            }
            ChainDoc::Recipe(ChainRecipe::Sparse { decay, levels }) => {
                RenewalChain::sparse(&decay, levels)
            }
            ChainDoc::Recipe(ChainRecipe::DenseCubic { truncation }) => {
                RenewalChain::dense_cubic(truncation.unwrap_or(DEFAULT_DENSE_TRUNCATION))
            }
            ChainDoc::Recipe(ChainRecipe::Degenerate) => RenewalChain::degenerate(),
            ChainDoc::Explicit(e) => {
                let chain = RenewalChain::from_masses(e.support, e.masses)?;
                if let Some(pi0) = e.pi0 {
                    if (pi0 - chain.pi0).abs() > 1e-9 * chain.pi0 {
                        return Err(Error::Input(format!(
                            "declared pi0 = {pi0} disagrees with 1/E[tau] = {}",
                            chain.pi0
                        )));
                    }
                }
                Ok(RenewalChain { c: e.c, ..chain })
            }
        }
    }
}

impl Serialize for RenewalChain {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ExplicitChain {
            support: self.support.clone(),
            masses: self.masses.clone(),
            c: self.c,
            pi0: Some(self.pi0),
        }
        .serialize(s)
    }
}

impl fmt::Debug for RenewalChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RenewalChain")
            .field("support_len", &self.support.len())
            .field("max_support", &self.max_support())
            .field("pi0", &self.pi0)
            .field("e_tau", &self.e_tau)
            .field("origin", &self.origin)
            .finish()
    }
}

impl PartialEq for RenewalChain {
    fn eq(&self, other: &Self) -> bool {
        self.support == other.support && self.masses == other.masses
    }
}

fn second_moment(support: &[u64], masses: &[f64]) -> f64 {
    support
        .iter()
        .zip(masses)
        .rev()
        .map(|(&u, &p)| p * (u as f64) * (u as f64))
        .sum()
}

impl RenewalChain {
    /// A chain from an explicit return-time law.
    pub fn from_masses(support: Vec<u64>, masses: Vec<f64>) -> Result<Self> {
        let value = second_moment(&support, &masses);
        Self::assemble(
            support,
            masses,
            None,
            SecondMoment::Finite { value },
            ChainOrigin::Explicit,
        )
    }

    /// `p_{u_j} = c / u_j^2` with `c = (sum_j u_j^-2)^-1`.
    pub fn inverse_square(support: &[u64]) -> Result<Self> {
        if support.len() < 2 || support[0] != 1 || support[1] != 2 {
            return Err(Error::Parameter(
                "inverse-square supports must start with 1 and 2 (aperiodicity)".into(),
            ));
        }
        let inv: Vec<f64> = support.iter().map(|&u| (u as f64).powi(-2)).collect();
        let c = 1.0 / inv.iter().rev().sum::<f64>();
        let masses: Vec<f64> = inv.iter().map(|w| c * w).collect();
        let value = c * support.len() as f64;
        Self::assemble(
            support.to_vec(),
            masses,
            Some(c),
            SecondMoment::Finite { value },
            ChainOrigin::InverseSquare,
        )
    }

    /// The toy chain with support (1, 2, 5).
    pub fn toy() -> Self {
        Self::inverse_square(&[1, 2, 5]).expect("toy chain is valid")
    }

    /// Inverse-square masses on `build_u(decay, levels)`. Each support point
    /// adds exactly `c` to `E tau^2`, so the untruncated family has infinite
    /// second moment.
    pub fn sparse(decay: &DecaySpec, levels: usize) -> Result<Self> {
        let seq = build_u(&|t| decay.value(t), levels)?;
        let mut chain = Self::inverse_square(&seq.u)?;
        let c = chain.c.unwrap();
        chain.e_tau_sq = SecondMoment::Divergent {
            partial: c * levels as f64,
            certificate: format!(
                "every support point u_j contributes u_j^2 * c / u_j^2 = c = {c:.6}; \
                 partial sums grow linearly in the number of levels"
            ),
        };
        chain.origin = ChainOrigin::Sparse {
            decay: decay.name(),
            lambda: seq.lambda,
            levels,
        };
        Ok(chain)
    }

    /// `p_i = i^-3 / zeta(3)` for `1 <= i < T`; the mass of `{i >= T}` sits on `T`.
    pub fn dense_cubic(truncation: u64) -> Result<Self> {
        if truncation < 3 {
            return Err(Error::Parameter(format!(
                "dense cubic truncation must be at least 3, got {truncation}"
            )));
        }
        if truncation > MAX_PI_STATES {
            return Err(Error::Resource(format!(
                "dense cubic truncation {truncation} exceeds the table budget {MAX_PI_STATES}"
            )));
        }
        let t = truncation as f64;
        // Euler-Maclaurin: sum_{i >= T} i^-3.
        let tail = 1.0 / (2.0 * t * t) + 1.0 / (2.0 * t.powi(3)) + 1.0 / (4.0 * t.powi(4))
            - 1.0 / (12.0 * t.powi(6));
        let support: Vec<u64> = (1..=truncation).collect();
        let mut masses: Vec<f64> = support
            .iter()
            .map(|&i| (i as f64).powi(-3) / ZETA3)
            .collect();
        *masses.last_mut().unwrap() = tail / ZETA3;
        let total: f64 = masses.iter().rev().sum();
        masses.iter_mut().for_each(|m| *m /= total);
        let fold_mass = *masses.last().unwrap();
        let partial = second_moment(&support, &masses);
        let mut chain = Self::assemble(
            support,
            masses,
            None,
            SecondMoment::Divergent {
                partial,
                certificate: "i^2 p_i = 1/(zeta(3) i): harmonic divergence".into(),
            },
            ChainOrigin::Explicit,
        )?;
        chain.origin = ChainOrigin::DenseCubic {
            truncation,
            fold_mass,
            fold_bias_e_tau: chain.e_tau - ZETA2 / ZETA3,
        };
        Ok(chain)
    }

    /// `p_1 = 1`: the chain never leaves 0 and `X_j = 0`.
    pub fn degenerate() -> Result<Self> {
        Self::from_masses(vec![1], vec![1.0])
    }

    fn assemble(
        support: Vec<u64>,
        masses: Vec<f64>,
        c: Option<f64>,
        e_tau_sq: SecondMoment,
        origin: ChainOrigin,
    ) -> Result<Self> {
        if support.is_empty() || support.len() != masses.len() {
            return Err(Error::Parameter(
                "support and masses must be nonempty and of equal length".into(),
            ));
        }
        if support[0] != 1 {
            return Err(Error::Parameter(
                "support must contain 1 (p_1 > 0 required)".into(),
            ));
        }
        if support.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter(
                "support must be strictly increasing".into(),
            ));
        }
        if masses.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
            return Err(Error::Parameter("masses must be positive and finite".into()));
        }
        let total: f64 = masses.iter().rev().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Parameter(format!(
                "masses sum to {total:.17}, not 1 within {MASS_TOLERANCE:e}"
            )));
        }
        if support.len() > 1 && support[1] != 2 {
            return Err(Error::Parameter(
                "support must contain 2 (p_2 > 0 required for aperiodicity)".into(),
            ));
        }
        let k = support.len();
        let mut tail_mass = vec![0.0; k + 1];
        let mut tail_pu = vec![0.0; k + 1];
        for j in (0..k).rev() {
            tail_mass[j] = tail_mass[j + 1] + masses[j];
            tail_pu[j] = tail_pu[j + 1] + masses[j] * support[j] as f64;
        }
        let e_tau = tail_pu[0];
        Ok(Self {
            support,
            masses,
            c,
            pi0: 1.0 / e_tau,
            e_tau,
            e_tau_sq,
            origin,
            tail_mass,
            tail_pu,
            sampler: OnceLock::new(),
        })
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn c(&self) -> Option<f64> {
        self.c
    }

    pub fn pi0(&self) -> f64 {
        self.pi0
    }

    pub fn e_tau(&self) -> f64 {
        self.e_tau
    }

    pub fn e_tau_sq(&self) -> &SecondMoment {
        &self.e_tau_sq
    }

    pub fn origin(&self) -> &ChainOrigin {
        &self.origin
    }

    pub fn max_support(&self) -> u64 {
        *self.support.last().unwrap()
    }

    pub fn is_degenerate(&self) -> bool {
        self.support.len() == 1
    }

    /// Index of the first support point `> k`.
    fn first_above(&self, k: u64) -> usize {
        self.support.partition_point(|&u| u <= k)
    }

    /// `P(tau = k)`.
    pub fn mass_at(&self, k: u64) -> f64 {
        match self.support.binary_search(&k) {
            Ok(j) => self.masses[j],
            Err(_) => 0.0,
        }
    }

    /// `P(tau > k)`.
    pub fn surv(&self, k: u64) -> f64 {
        self.tail_mass[self.first_above(k)]
    }

    /// Stationary mass `pi_k = pi_0 P(tau > k)`.
    pub fn pi(&self, k: u64) -> f64 {
        self.pi0 * self.surv(k)
    }

    /// `sum_{k > n} pi_k = pi_0 sum_{u_j > n+1} p_j (u_j - n - 1)`.
    pub fn pi_tail(&self, n: u64) -> f64 {
        let j = self.first_above(n + 1);
        let v = self.pi0 * (self.tail_pu[j] - (n + 1) as f64 * self.tail_mass[j]);
        v.max(0.0)
    }

    /// `E[min(tau, n)]`.
    pub fn e_tau_min(&self, n: u64) -> f64 {
        let j = self.first_above(n);
        let head = self.tail_pu[0] - self.tail_pu[j];
        head + n as f64 * self.tail_mass[j]
    }

    /// `E[min(tau, n)^2]`.
    pub fn e_tau_min_sq(&self, n: u64) -> f64 {
        let j = self.first_above(n);
        second_moment(&self.support[..j], &self.masses[..j])
            + (n as f64).powi(2) * self.tail_mass[j]
    }

    /// Sampling tables, built on first use.
    pub fn sampler(&self) -> Result<&ChainSampler> {
        self.sampler
            .get_or_init(|| self.build_sampler().map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|msg| Error::Resource(msg.clone()))
    }

    fn build_sampler(&self) -> Result<ChainSampler> {
        let tau = InverseCdf::from_weights(&self.masses);
        // Smallest K with sum_{k > K} pi_k < cutoff; pi_tail is nonincreasing
        // and vanishes at K = max_support - 1.
        let keep = if self.pi_tail(0) < PI_TAIL_CUTOFF {
            0
        } else {
            let (mut lo, mut hi) = (0u64, self.max_support());
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if self.pi_tail(mid) < PI_TAIL_CUTOFF {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        };
        if keep + 1 > MAX_PI_STATES {
            return Err(Error::Resource(format!(
                "stationary law needs {} states to reach tail mass {PI_TAIL_CUTOFF:e} \
                 (budget {MAX_PI_STATES})",
                keep + 1
            )));
        }
        let mut weights = Vec::with_capacity(keep as usize + 1);
        let mut j = 0usize;
        for k in 0..=keep {
            while j < self.support.len() && self.support[j] <= k {
                j += 1;
            }
            weights.push(self.pi0 * self.tail_mass[j]);
        }
        let pi_fold = self.pi_tail(keep);
        *weights.last_mut().unwrap() += pi_fold;
        let pi = InverseCdf::from_weights(&weights);
        Ok(ChainSampler { tau, pi, pi_fold })
    }
}
