//! Decay sequences `a_n -> 0` and the sparse support `u_1 < u_2 < ...` tied
//! to them: `u_1 = 1`, `u_2 = 2`, `u_{k+1} > u_k^4 + 1`, and
//! `lambda * a_t <= k^-2` for every `t >= u_k`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whitelisted decay formulas, plus an inline table `a_1..a_L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DecayDoc", into = "DecayDoc")]
pub enum DecaySpec {
    /// `1/ln(n+2)`
    InverseLog,
    /// `n^-beta`, beta > 0
    Power { beta: f64 },
    /// `const:v`
    Constant { value: f64 },
    /// `a_n = table[n-1]`
    Table { values: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum DecayDoc {
    Named(String),
    Table { table: Vec<f64> },
}

impl TryFrom<DecayDoc> for DecaySpec {
    type Error = Error;

    fn try_from(doc: DecayDoc) -> Result<Self> {
        match doc {
            DecayDoc::Table { table } => {
                if table.is_empty() || table.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Input(
                        "decay table must be nonempty, finite and nonnegative".into(),
                    ));
                }
                Ok(DecaySpec::Table { values: table })
            }
            DecayDoc::Named(s) => DecaySpec::parse(&s),
        }
    }
}

impl From<DecaySpec> for DecayDoc {
    fn from(d: DecaySpec) -> Self {
        match d {
            DecaySpec::Table { values } => DecayDoc::Table { table: values },
            other => DecayDoc::Named(other.name()),
        }
    }
}

impl DecaySpec {
    pub fn parse(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t == "1/ln(n+2)" {
            return Ok(DecaySpec::InverseLog);
        }
        if t == "const" {
            return Ok(DecaySpec::Constant { value: 1.0 });
        }
        if let Some(v) = t.strip_prefix("const:") {
            let value: f64 = v
                .parse()
                .map_err(|_| Error::Input(format!("bad constant in decay formula '{s}'")))?;
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Input("decay constant must be positive".into()));
            }
            return Ok(DecaySpec::Constant { value });
        }
        if let Some(b) = t.strip_prefix("n^-") {
            let beta: f64 = b
                .trim_start_matches('(')
                .trim_end_matches(')')
                .parse()
                .map_err(|_| Error::Input(format!("bad exponent in decay formula '{s}'")))?;
            if !(beta.is_finite() && beta > 0.0) {
                return Err(Error::Input("decay exponent must be positive".into()));
            }
            return Ok(DecaySpec::Power { beta });
        }
        Err(Error::Input(format!(
            "unknown decay formula '{s}' (expected 1/ln(n+2), n^-beta, const or const:v)"
        )))
    }

    pub fn name(&self) -> String {
        match self {
            DecaySpec::InverseLog => "1/ln(n+2)".into(),
            DecaySpec::Power { beta } => format!("n^-{beta}"),
            DecaySpec::Constant { value } => format!("const:{value}"),
            DecaySpec::Table { values } => format!("table[{}]", values.len()),
        }
    }

    /// `a_t` for `t >= 1`.
    pub fn value(&self, t: u64) -> Result<f64> {
        if t == 0 {
            return Err(Error::Input("decay sequences are indexed from 1".into()));
        }
        Ok(match self {
            DecaySpec::InverseLog => 1.0 / ((t as f64) + 2.0).ln(),
            DecaySpec::Power { beta } => (t as f64).powf(-beta),
            DecaySpec::Constant { value } => *value,
            DecaySpec::Table { values } => *values.get((t - 1) as usize).ok_or_else(|| {
                Error::Input(format!(
                    "decay table has {} entries, index {t} requested",
                    values.len()
                ))
            })?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportSequence {
    pub u: Vec<u64>,
    pub lambda: f64,
    /// `min{t : lambda a_t <= k^-2}` for k = 3..=K (the decay-driven candidates).
    pub thresholds: Vec<u64>,
}

struct Probe<'a, F> {
    a: &'a F,
    seen: BTreeMap<u64, f64>,
}

impl<F: Fn(u64) -> Result<f64>> Probe<'_, F> {
    fn at(&mut self, t: u64) -> Result<f64> {
        if let Some(&v) = self.seen.get(&t) {
            return Ok(v);
        }
        let v = (self.a)(t)?;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Input(format!("a_{t} = {v} is not a positive real")));
        }
        if let Some((&tp, &vp)) = self.seen.range(..t).next_back() {
            if v > vp {
                return Err(Error::Input(format!(
                    "decay sequence increases between t={tp} and t={t}"
                )));
            }
        }
        if let Some((&tn, &vn)) = self.seen.range(t + 1..).next() {
            if vn > v {
                return Err(Error::Input(format!(
                    "decay sequence increases between t={t} and t={tn}"
                )));
            }
        }
        self.seen.insert(t, v);
        Ok(v)
    }

    /// Smallest `t >= 1` with `lambda * a_t <= target`.
    fn first_below(&mut self, lambda: f64, target: f64) -> Result<u64> {
        if lambda * self.at(1)? <= target {
            return Ok(1);
        }
        let (mut lo, mut hi) = (1u64, 2u64);
        while lambda * self.at(hi)? > target {
            lo = hi;
            hi = match hi.checked_mul(2) {
                Some(h) if h <= 1 << 62 => h,
                _ => {
                    return Err(Error::Input(format!(
                        "decay sequence does not fall below {target:e} within 2^62 terms"
                    )))
                }
            };
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if lambda * self.at(mid)? <= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// Builds `u_1..u_K` for the decay accessor `a` (caller asserts `a_n -> 0`).
pub fn build_u<F: Fn(u64) -> Result<f64>>(a: &F, k: usize) -> Result<SupportSequence> {
    if k < 2 {
        return Err(Error::Parameter(format!(
            "at least two support points are needed, K = {k}"
        )));
    }
    let mut probe = Probe {
        a,
        seen: BTreeMap::new(),
    };
    let a1 = probe.at(1)?;
    let a2 = probe.at(2)?;
    let lambda = 1.0f64.min(1.0 / a1).min(1.0 / (4.0 * a2));
    let mut u = vec![1u64, 2];
    let mut thresholds = Vec::new();
    for idx in 2..k {
        let level = (idx + 1) as f64;
        let t_star = probe.first_below(lambda, 1.0 / (level * level))?;
        thresholds.push(t_star);
        let last = *u.last().unwrap();
        let spaced = last
            .checked_pow(4)
            .and_then(|x| x.checked_add(2))
            .ok_or_else(|| {
                Error::Resource(format!(
                    "support point u_{} = {last}^4 + 2 overflows 64 bits",
                    idx + 1
                ))
            })?;
        u.push(spaced.max(t_star));
    }
    Ok(SupportSequence {
        u,
        lambda,
        thresholds,
    })
}

impl SupportSequence {
    /// Checks `lambda a_t <= k^-2` for every probe `t >= u_k`, and the spacing rule.
    pub fn verify<F: Fn(u64) -> Result<f64>>(&self, a: &F, probes: &[u64]) -> Result<bool> {
        if self.u.len() < 2 || self.u[0] != 1 || self.u[1] != 2 {
            return Ok(false);
        }
        for w in self.u.windows(2).skip(1) {
            if w[1] <= w[0].saturating_pow(4).saturating_add(1) {
                return Ok(false);
            }
        }
        for (k, &uk) in self.u.iter().enumerate() {
            let bound = 1.0 / ((k + 1) as f64).powi(2);
            for &t in probes.iter().filter(|&&t| t >= uk) {
                if self.lambda * a(t)? > bound * (1.0 + 1e-12) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan_first_below(a: impl Fn(u64) -> f64, lambda: f64, target: f64) -> u64 {
        (1..).find(|&t| lambda * a(t) <= target).unwrap()
    }

    #[test]
    fn inverse_log_support() {
        let a = DecaySpec::InverseLog;
        let s = build_u(&|t| a.value(t), 4).unwrap();
        assert!((s.lambda - 4f64.ln() / 4.0).abs() < 1e-15);
        let oracle3 = scan_first_below(|t| 1.0 / (t as f64 + 2.0).ln(), s.lambda, 1.0 / 9.0);
        let oracle4 = scan_first_below(|t| 1.0 / (t as f64 + 2.0).ln(), s.lambda, 1.0 / 16.0);
        assert_eq!(oracle3, 21);
        assert!((254..=255).contains(&oracle4));
        assert_eq!(s.thresholds, vec![21, oracle4]);
        assert_eq!(s.u, vec![1, 2, 21, 194_483]);
        let probes: Vec<u64> = (1..2000).chain([194_483, 10_000_000]).collect();
        assert!(s.verify(&|t| a.value(t), &probes).unwrap());
    }

    #[test]
    fn fast_decay_support() {
        let a = DecaySpec::Power { beta: 1.0 };
        let s = build_u(&|t| a.value(t), 3).unwrap();
        assert_eq!(s.lambda, 0.5);
        let oracle = scan_first_below(|t| 1.0 / t as f64, 0.5, 1.0 / 9.0);
        assert_eq!(oracle, 5);
        assert_eq!(s.u, vec![1, 2, 18]);
        assert!(s.u[2] > 2u64.pow(4) + 1);
    }

    #[test]
    fn fifth_point_overflows() {
        let a = DecaySpec::InverseLog;
        assert!(matches!(
            build_u(&|t| a.value(t), 5),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn increasing_accessor_rejected() {
        let bad = |t: u64| Ok(t as f64);
        assert!(matches!(build_u(&bad, 3), Err(Error::Input(_))));
    }

    #[test]
    fn constant_never_decays() {
        let a = DecaySpec::Constant { value: 1.0 };
        assert!(build_u(&|t| a.value(t), 3).is_err());
    }

    #[test]
    fn parse_formulas() {
        assert_eq!(DecaySpec::parse("1/ln(n+2)").unwrap(), DecaySpec::InverseLog);
        assert_eq!(
            DecaySpec::parse("n^-0.5").unwrap(),
            DecaySpec::Power { beta: 0.5 }
        );
        assert_eq!(
            DecaySpec::parse("const").unwrap(),
            DecaySpec::Constant { value: 1.0 }
        );
        assert_eq!(
            DecaySpec::parse("const:0.25").unwrap(),
            DecaySpec::Constant { value: 0.25 }
        );
        assert!(DecaySpec::parse("exp(-n)").is_err());
        let t: DecaySpec = serde_json::from_str(r#"{"table":[1.0,0.5]}"#).unwrap();
        assert_eq!(t.value(2).unwrap(), 0.5);
        assert!(t.value(3).is_err());
        let named: DecaySpec = serde_json::from_str(r#""1/ln(n+2)""#).unwrap();
        assert_eq!(named, DecaySpec::InverseLog);
    }
}
