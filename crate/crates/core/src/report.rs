use serde::Serialize;

/// Relative tolerance for checks whose sides are both computed exactly.
pub const EXACT_RTOL: f64 = 1e-9;
/// One-sided statistical margin, in standard errors.
pub const STDERR_MARGIN: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl Verdict {
    /// The worse of two verdicts (FAIL dominates INCONCLUSIVE dominates PASS).
    pub fn and(self, other: Verdict) -> Verdict {
        self.max(other)
    }

    pub fn all<I: IntoIterator<Item = Verdict>>(it: I) -> Verdict {
        it.into_iter().fold(Verdict::Pass, Verdict::and)
    }

    pub fn from_bool(ok: bool) -> Verdict {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }

    /// Process exit status: 0 PASS, 1 FAIL, 2 INCONCLUSIVE.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
        }
    }
}

/// One inequality check `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    pub lhs_stderr: Option<f64>,
    pub rhs: f64,
    pub margin: f64,
    pub verdict: Verdict,
    pub n: Option<u64>,
    pub paths: Option<u64>,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl BoundReport {
    fn base(name: &str, lhs: f64, lhs_stderr: Option<f64>, rhs: f64, verdict: Verdict) -> Self {
        Self {
            name: name.to_string(),
            lhs,
            lhs_stderr,
            rhs,
            margin: rhs - lhs,
            verdict,
            n: None,
            paths: None,
            seed: None,
            note: None,
        }
    }

    /// Both sides exact: PASS iff `lhs <= rhs` up to [`EXACT_RTOL`].
    pub fn exact(name: &str, lhs: f64, rhs: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs());
        let verdict = if !(lhs.is_finite() && rhs.is_finite()) {
            Verdict::Inconclusive
        } else {
            Verdict::from_bool(rhs - lhs >= -EXACT_RTOL * scale)
        };
        Self::base(name, lhs, Some(0.0), rhs, verdict)
    }

    /// Estimated `lhs` against an exact `rhs`: PASS iff
    /// `margin >= -3 stderr`; INCONCLUSIVE when the noise is as large as the
    /// bound itself (or the stderr is unusable).
    pub fn statistical(name: &str, lhs: f64, stderr: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        let verdict = if !(stderr.is_finite() && lhs.is_finite() && rhs.is_finite()) {
            Verdict::Inconclusive
        } else if margin >= -STDERR_MARGIN * stderr {
            Verdict::Pass
        } else if STDERR_MARGIN * stderr >= rhs.abs() {
            Verdict::Inconclusive
        } else {
            Verdict::Fail
        };
        Self::base(name, lhs, Some(stderr), rhs, verdict)
    }

    /// Two-sided agreement of an estimate with a target: reported as
    /// `lhs = |estimate - target| <= rhs = 0` within 3 stderr.
    pub fn centered(name: &str, estimate: f64, stderr: f64, target: f64) -> Self {
        let dev = (estimate - target).abs();
        let verdict = if !(stderr.is_finite() && estimate.is_finite()) {
            Verdict::Inconclusive
        } else {
            Verdict::from_bool(dev <= STDERR_MARGIN * stderr)
        };
        let mut r = Self::base(name, dev, Some(stderr), 0.0, verdict);
        r.note = Some(format!("estimate {estimate:.9e} vs target {target:.9e}"));
        r
    }

    pub fn with_n(mut self, n: u64) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_mc(mut self, paths: u64, seed: u64) -> Self {
        self.paths = Some(paths);
        self.seed = Some(seed);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        let note = note.into();
        self.note = Some(match self.note.take() {
            Some(prev) => format!("{prev}; {note}"),
            None => note,
        });
        self
    }
}
