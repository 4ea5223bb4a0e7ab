//! Config-driven runs: a suite name plus a JSON configuration produce a
//! [`ReportDocument`] and a set of CSV tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::conditional::{
    c_p, check_subadditive, delta_r, g_m_profile, k_p, lemma27_check, property_an, series_triple,
    v_exact, v_monte_carlo, GrowthEnvelope, VSequence,
};
use crate::counterexample::{
    build_u, expected_max_tau, prop31_bounds, regeneration_identity_check, simulate_chain_sums,
    wald_check, weighted_series, DecaySpec, RenewalChain, RenewalTables,
};
use crate::error::{Error, Result};
use crate::inequalities::{
    lemma22_check, pathwise_sweep, prop21_bound, prop23_profile, report_rows, sigma2_series,
    YChoice, MAX_WINDOW_SCAN,
};
use crate::invariance::{clt_ks, eta_limit, fdd_covariance, uniform_integrability_profile, CltMode};
use crate::martingale::approximation_error;
use crate::output::{fmt_f64, fmt_opt, write_json, Table};
use crate::processes::{partial_sums, path_rows, simulate_path, stationarity_check, ProcessSpec};
use crate::report::{BoundReport, Verdict};
use crate::rng::{derive_seed, mix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Paths,
    Vseq,
    Series,
    Inequalities,
    Blocking,
    Invariance,
    Counterexample,
    All,
}

impl Suite {
    pub const EACH: [Suite; 7] = [
        Suite::Paths,
        Suite::Vseq,
        Suite::Series,
        Suite::Inequalities,
        Suite::Blocking,
        Suite::Invariance,
        Suite::Counterexample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Paths => "paths",
            Suite::Vseq => "vseq",
            Suite::Series => "series",
            Suite::Inequalities => "inequalities",
            Suite::Blocking => "blocking",
            Suite::Invariance => "invariance",
            Suite::Counterexample => "counterexample",
            Suite::All => "all",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_string()))
            .map_err(|_| Error::Input(format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    /// `report.json` plus CSV tables and plot data
    #[default]
    Csv,
    /// `report.json` plus the plot-data tables (`cdf`, `quantiles`, `series`)
    Json,
}

/// A process given either as a tagged process spec or as a bare chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpecInput {
    Process(ProcessSpec),
    Chain(Arc<RenewalChain>),
}

impl SpecInput {
    pub fn to_spec(&self) -> ProcessSpec {
        match self {
            SpecInput::Process(p) => p.clone(),
            SpecInput::Chain(c) => ProcessSpec::Renewal { chain: c.clone() },
        }
    }
}

/// An abstract sequence `V_n = scale * n^power` for the series suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceInput {
    pub power: f64,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<Suite>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<SpecInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// series exponent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// dyadic truncation level
    #[serde(default, alias = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_list: Option<Vec<usize>>,
    /// dyadic levels for `G_m`, and terms of the sigma^2 series
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// decay sequence `a_n`
    #[serde(default, alias = "a", skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecaySpec>,
    /// number of sparse support levels
    #[serde(default, alias = "K", skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_choice: Option<YChoice>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Input(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = &self.n_list {
            if l.is_empty() || l[0] == 0 || l.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Input("n_list must be strictly increasing positive integers".into()));
            }
        }
        if let Some(SpecInput::Process(p)) = &self.spec {
            p.validate()?;
        }
        Ok(())
    }

    fn seed(&self) -> Result<u64> {
        self.master_seed
            .ok_or_else(|| Error::Input("master_seed is required (no clock-based seeding)".into()))
    }

    fn spec(&self) -> Result<ProcessSpec> {
        self.spec
            .as_ref()
            .map(SpecInput::to_spec)
            .ok_or_else(|| Error::Input("this suite needs a 'spec'".into()))
    }

    fn n_or(&self, d: usize) -> usize {
        self.n.unwrap_or(d)
    }

    fn paths_or(&self, d: usize) -> usize {
        self.paths.unwrap_or(d)
    }
}

/// What one suite produced.
#[derive(Debug, Clone, Default)]
pub struct SuiteOutcome {
    pub checks: Vec<BoundReport>,
    pub sections: BTreeMap<String, Value>,
    /// `(file name, table)`
    pub tables: Vec<(String, Table)>,
}

impl SuiteOutcome {
    fn section<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.sections.insert(name.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    fn table(&mut self, file: &str, t: Table) {
        self.tables.push((file.to_string(), t));
    }

    fn verdict(&self) -> Verdict {
        Verdict::all(self.checks.iter().map(|c| c.verdict))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub suite: Suite,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    pub checks: Vec<BoundReport>,
    pub sections: BTreeMap<String, Value>,
    pub verdict: Verdict,
    #[serde(skip)]
    pub tables: Vec<(String, Table)>,
}

/// Count of something that must be zero, as an exact check.
fn zero_check(name: &str, count: usize) -> BoundReport {
    BoundReport::exact(name, count as f64, 0.0)
}

fn bounds_table(reports: &[BoundReport]) -> Table {
    let mut t = Table::new(&["name", "n", "lhs", "stderr", "rhs", "margin", "verdict"]);
    for r in report_rows(reports) {
        t.push(r.to_vec());
    }
    t
}

fn vseq_table(v: &VSequence) -> Table {
    let mut t = Table::new(&["n", "v", "stderr", "method"]);
    for (n, x, se, m) in v.rows() {
        t.push(vec![n.to_string(), fmt_f64(x), fmt_opt(se), m.to_string()]);
    }
    t
}

fn run_paths(cfg: &ExperimentConfig, seed: u64) -> Result<SuiteOutcome> {
    let spec = cfg.spec()?;
    let (n, paths) = (cfg.n_or(1024), cfg.paths_or(1000));
    let mut out = SuiteOutcome::default();
    let path = simulate_path(&spec, n, mix(seed, 0))?;
    let mut t = Table::new(&["k", "x", "s"]);
    for (k, x, s) in path_rows(&partial_sums(&path)) {
        t.push(vec![k.to_string(), fmt_f64(x), fmt_f64(s)]);
    }
    out.table("paths.csv", t);
    let st = stationarity_check(&spec, n, paths, seed)?;
    out.checks.push(
        BoundReport::exact("stationarity_worst_z", st.worst_mean_z.max(st.worst_variance_z), 4.0)
            .with_n(n as u64)
            .with_mc(paths as u64, seed)
            .with_note("pairwise mean/variance differences at k in {1, n/2, n}, in stderr units"),
    );
    out.section("stationarity", &st)?;
    out.section("spec_id", &spec.id())?;
    Ok(out)
}

fn run_vseq(cfg: &ExperimentConfig, seed: u64) -> Result<SuiteOutcome> {
    let spec = cfg.spec()?;
    let n = cfg.n_or(64);
    let mut out = SuiteOutcome::default();
    let v = v_exact(&spec, n)?;
    out.checks.push(zero_check("subadditivity_violations", check_subadditive(&v)?.len()).with_n(n as u64));
    let r = (usize::BITS - n.leading_zeros()) as usize; // 2^{r-1} <= n
    let prof = delta_r(&v, r)?;
    out.section("delta_r", &prof.deltas)?;
    let (card, _) = property_an(&v, n)?;
    out.checks.push(
        BoundReport::exact("property_an_half", n as f64 / 2.0, card as f64)
            .with_n(n as u64)
            .with_note("N/2 <= |A_N|"),
    );
    let k = cfg.k.unwrap_or(4).min(r.saturating_sub(1));
    let m_list: Vec<usize> = (0..r).map(|j| 1usize << j).filter(|m| m << k <= n).collect();
    out.section("g_m", &g_m_profile(&v, &m_list, k)?)?;
    out.table("vseq.csv", vseq_table(&v));
    if spec.is_markov() {
        if let Some(paths) = cfg.paths {
            let list = cfg.n_list.clone().unwrap_or_else(|| {
                [1usize, 2, 4, 8, 16].into_iter().filter(|&x| x <= n).collect()
            });
            let top = *list.last().unwrap();
            let mc = v_monte_carlo(&spec, top, paths, derive_seed(seed, "vseq-mc"))?;
            let exact = if top <= n { v.clone() } else { v_exact(&spec, top)? };
            for &m in &list {
                let se = mc.stderr.as_ref().unwrap()[m - 1];
                out.checks.push(
                    BoundReport::centered("v_monte_carlo_vs_exact", mc.v(m)?, se, exact.v(m)?)
                        .with_n(m as u64)
                        .with_mc(paths as u64, seed),
                );
            }
            out.table("vseq_mc.csv", vseq_table(&mc));
        }
    }
    Ok(out)
}

fn run_series(cfg: &ExperimentConfig, _seed: u64) -> Result<SuiteOutcome> {
    let p = cfg.p.unwrap_or(1.5);
    let r = cfg.r.unwrap_or(20);
    let top = 1usize << r;
    let v = match (&cfg.sequence, &cfg.spec) {
        (Some(s), _) => {
            let (c, a) = (s.scale, s.power);
            VSequence::from_fn(top, |n| c * (n as f64).powf(a), "power").with_envelope(GrowthEnvelope {
                c,
                alpha: a,
                from_n: 1,
            })
        }
        (None, Some(_)) => v_exact(&cfg.spec()?, top)?,
        (None, None) => return Err(Error::Input("series suite needs 'sequence' or 'spec'".into())),
    };
    let mut out = SuiteOutcome::default();
    let triple = series_triple(&v, p, r)?;
    out.checks.extend(lemma27_check(&triple));
    let n_an = top.min(10_000);
    let (card, _) = property_an(&v, n_an)?;
    out.checks.push(
        BoundReport::exact("property_an_half", n_an as f64 / 2.0, card as f64).with_n(n_an as u64),
    );
    out.section("series_triple", &triple)?;
    out.section("K_p", &k_p(p))?;
    out.section("C_p", &c_p(p))?;
    // partial sums of sum V_n / n^p at log-spaced n
    let mut t = Table::new(&["n", "partial_sum", "increment"]);
    let (mut acc, mut next) = (0.0, 1usize);
    for n in 1..=top {
        let inc = v.values[n - 1] * (n as f64).powf(-p);
        acc += inc;
        if n == next || n == top {
            t.push(vec![n.to_string(), fmt_f64(acc), fmt_f64(inc)]);
            next = ((next as f64 * 10f64.powf(0.1)).ceil() as usize).max(next + 1);
        }
    }
    out.table("series.csv", t);
    Ok(out)
}

fn run_inequalities(cfg: &ExperimentConfig, seed: u64) -> Result<SuiteOutcome> {
    let spec = cfg.spec()?;
    let n = cfg.n_or(16);
    let paths = cfg.paths_or(10_000);
    let n_list = cfg.n_list.clone().unwrap_or_else(|| vec![n]);
    let mut out = SuiteOutcome::default();
    let mut checks = Vec::new();
    for &m in &n_list {
        checks.push(prop21_bound(&spec, m)?);
    }
    checks.extend(prop23_profile(&spec, &n_list, paths, derive_seed(seed, "prop23"))?);
    if n >= 2 {
        checks.push(lemma22_check(&spec, n, 0, seed, YChoice::X)?);
        if cfg.y_choice == Some(YChoice::D) || (cfg.y_choice.is_none() && n <= MAX_WINDOW_SCAN) {
            checks.push(lemma22_check(&spec, n, paths, derive_seed(seed, "lemma22"), YChoice::D)?);
        }
    }
    for &m in &n_list {
        let sweep = pathwise_sweep(&spec, m, paths, derive_seed(seed, "pathwise"), if m <= 256 { 10 } else { 0 })?;
        checks.push(zero_check("pathwise_telescoping_violations", sweep.violations).with_n(m as u64).with_mc(paths as u64, seed));
        checks.push(zero_check("window_property_violations", sweep.window_violations).with_n(m as u64));
    }
    let j = cfg.k.unwrap_or(16);
    out.section("sigma2_series", &sigma2_series(&spec, j)?)?;
    out.table("bounds.csv", bounds_table(&checks));
    out.checks = checks;
    Ok(out)
}

fn run_blocking(cfg: &ExperimentConfig, seed: u64) -> Result<SuiteOutcome> {
    let spec = cfg.spec()?;
    let n = cfg.n_or(1 << 14);
    let paths = cfg.paths_or(200);
    let m_list = cfg
        .m_list
        .clone()
        .unwrap_or_else(|| [4usize, 16, 64].into_iter().filter(|&m| n / m >= 32).collect());
    let mut out = SuiteOutcome::default();
    let reports = approximation_error(&spec, &m_list, n, paths, seed)?;
    let mut t = Table::new(&["m", "eta_m", "eta_stderr", "mean_sup_err", "p90_sup_err"]);
    for r in &reports {
        out.checks.push(r.eta_check.clone());
        let (m, e, se, mean, p90) = r.row();
        t.push(vec![m.to_string(), fmt_f64(e), fmt_f64(se), fmt_f64(mean), fmt_f64(p90)]);
    }
    let trend = reports.windows(2).all(|w| w[1].mean_sup_err < w[0].mean_sup_err);
    out.section("approximation", &reports)?;
    out.section("sup_error_decreasing_in_m", &trend)?;
    out.table("blocking.csv", t);
    Ok(out)
}

fn run_invariance(cfg: &ExperimentConfig, seed: u64) -> Result<SuiteOutcome> {
    let spec = cfg.spec()?;
    let n = cfg.n_or(1 << 14);
    let paths = cfg.paths_or(10_000);
    let mut out = SuiteOutcome::default();
    let mut clt = clt_ks(&spec, n, paths, derive_seed(seed, "clt"))?;
    match clt.mode {
        CltMode::Normal => out.checks.push(
            BoundReport::exact("clt_ks_distance", clt.ks_distance.unwrap(), clt.ks_threshold.unwrap())
                .with_n(n as u64)
                .with_mc(paths as u64, seed),
        ),
        CltMode::Degenerate => out.checks.push(
            BoundReport::exact("clt_degenerate_tail", clt.tail_probability.unwrap(), 0.01)
                .with_n(n as u64)
                .with_mc(paths as u64, seed),
        ),
    }
    let grid = cfg.grid.clone().unwrap_or_else(|| vec![0.25, 0.5, 0.75, 1.0]);
    let cells = fdd_covariance(&spec, n, paths, derive_seed(seed, "fdd"), &grid)?;
    out.checks.push(zero_check("covariance_grid_failures", cells.iter().filter(|c| !c.pass).count()));
    clt.cov_grid = cells;
    let ui_n: Vec<usize> = cfg
        .n_list
        .clone()
        .unwrap_or_else(|| (8..=14).step_by(2).map(|j| 1usize << j).filter(|&m| m <= n).collect());
    let thresholds = cfg.thresholds.clone().unwrap_or_else(|| vec![1.0, 4.0, 16.0, 64.0]);
    let ui = uniform_integrability_profile(&spec, &ui_n, paths.min(2000), derive_seed(seed, "ui"), &thresholds)?;
    out.checks.push(zero_check("ui_not_decreasing", usize::from(!ui.decreasing)));
    clt.ui_profile = Some(ui);
    out.section("eta_limit", &eta_limit(&spec, &ui_n)?)?;
    let mut t = Table::new(&["x", "empirical", "normal"]);
    for (x, e, nrm) in clt.sample.cdf_rows(201) {
        t.push(vec![fmt_f64(x), fmt_f64(e), fmt_f64(nrm)]);
    }
    out.table("cdf.csv", t);
    out.section("clt", &clt)?;
    Ok(out)
}

fn run_counterexample(cfg: &ExperimentConfig, seed: u64) -> Result<SuiteOutcome> {
    let decay = cfg.decay.clone().unwrap_or(DecaySpec::InverseLog);
    let levels = cfg.levels.unwrap_or(4);
    let mut out = SuiteOutcome::default();
    let a = |t: u64| decay.value(t);
    let support = build_u(&a, levels)?;
    out.section("support_sequence", &support)?;
    let chain: Arc<RenewalChain> = match cfg.spec.as_ref().map(SpecInput::to_spec) {
        Some(ProcessSpec::Renewal { chain }) => chain,
        Some(_) => return Err(Error::Input("counterexample suite needs a renewal chain spec".into())),
        None => Arc::new(RenewalChain::sparse(&decay, levels)?),
    };
    out.section("chain", &chain)?;
    let n = cfg.n_or(10_000);
    let paths = cfg.paths_or(1000);
    let tables = RenewalTables::build(&chain, n)?;
    out.checks.push(
        BoundReport::exact("renewal_identity_residual", tables.identity_residual, crate::counterexample::IDENTITY_TOLERANCE)
            .with_n(n as u64),
    );
    let v = tables.v_sequence(&chain);
    let p31 = prop31_bounds(&chain, &tables, &v)?;
    out.checks.push(zero_check("prop31_violations", p31.violations.len()).with_n(n as u64));
    out.checks.push(zero_check("max_tau_bound_violations", p31.j_bound_violations.len() + p31.mass_law_violations));
    out.section("prop31", &p31)?;
    let mut t = Table::new(&["n", "h", "A", "I", "J", "V", "var_s"]);
    for row in tables.rows(&v) {
        let mut cells = vec![format!("{}", row[0] as u64)];
        cells.extend(row[1..].iter().map(|&x| fmt_f64(x)));
        t.push(cells);
    }
    out.table("tables.csv", t);
    if n >= 10 {
        let ws = weighted_series(&decay, &v, n)?;
        let mut t = Table::new(&["n", "partial_sum", "increment"]);
        for p in &ws.points {
            t.push(vec![p.n.to_string(), fmt_f64(p.partial_sum), fmt_f64(p.increment)]);
        }
        out.table("series.csv", t);
        out.section("weighted_series", &ws)?;
    }
    let var_ratio: Vec<(usize, f64)> = [n / 100, n / 10, n]
        .into_iter()
        .filter(|&m| m >= 1)
        .map(|m| (m, tables.var_s[m] / m as f64))
        .collect();
    out.section("var_s_over_n", &var_ratio)?;
    let n_list = cfg.n_list.clone().unwrap_or_else(|| {
        let mut l: Vec<usize> = [n / 100, n / 10, n].into_iter().filter(|&m| m >= 1).collect();
        l.dedup();
        l
    });
    let q = simulate_chain_sums(&chain, &n_list, paths, derive_seed(seed, "chain-sums"))?;
    let mut t = Table::new(&["n", "median", "p90"]);
    for r in &q.rows {
        t.push(vec![r.n.to_string(), fmt_f64(r.median), fmt_f64(r.p90)]);
    }
    out.table("quantiles.csv", t);
    out.section("quantiles", &q)?;
    let small = n.min(1000);
    let mism = regeneration_identity_check(&chain, small, paths.min(100), derive_seed(seed, "regen"))?;
    out.checks.push(zero_check("regeneration_identity_mismatches", mism).with_n(small as u64));
    out.checks.push(wald_check(&chain, n, paths, derive_seed(seed, "wald"))?);
    out.section("expected_max_tau", &expected_max_tau(&chain, &n_list).into_iter().zip(&n_list).map(|(e, &m)| (m, e)).collect::<Vec<_>>())?;
    Ok(out)
}

pub fn run_suite(suite: Suite, cfg: &ExperimentConfig, seed: u64) -> Result<SuiteOutcome> {
    match suite {
        Suite::Paths => run_paths(cfg, seed),
        Suite::Vseq => run_vseq(cfg, seed),
        Suite::Series => run_series(cfg, seed),
        Suite::Inequalities => run_inequalities(cfg, seed),
        Suite::Blocking => run_blocking(cfg, seed),
        Suite::Invariance => run_invariance(cfg, seed),
        Suite::Counterexample => run_counterexample(cfg, seed),
        Suite::All => {
            let mut all = SuiteOutcome::default();
            for s in Suite::EACH {
                if s == Suite::Series && cfg.sequence.is_none() && cfg.spec.is_none() {
                    continue;
                }
                let one = run_suite(s, cfg, derive_seed(seed, s.name()))?;
                all.checks.extend(one.checks);
                for (k, v) in one.sections {
                    all.sections.insert(format!("{}.{k}", s.name()), v);
                }
                for (f, t) in one.tables {
                    all.tables.push((format!("{}_{f}", s.name()), t));
                }
            }
            Ok(all)
        }
    }
}

/// Executes `suite` under `cfg`; `seed` (when given) overrides the config's
/// master seed.
pub fn run(suite: Suite, cfg: &ExperimentConfig, seed: Option<u64>) -> Result<ReportDocument> {
    if let Some(s) = cfg.suite {
        if s != suite {
            return Err(Error::Input(format!(
                "config names suite '{}' but '{}' was requested",
                s.name(),
                suite.name()
            )));
        }
    }
    cfg.validate()?;
    let master_seed = match seed {
        Some(s) => s,
        None => cfg.seed()?,
    };
    let outcome = run_suite(suite, cfg, master_seed)?;
    Ok(ReportDocument {
        tool: "invlab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        suite,
        master_seed,
        config: cfg.clone(),
        verdict: outcome.verdict(),
        checks: outcome.checks,
        sections: outcome.sections,
        tables: outcome.tables,
    })
}

/// Plot-data files among the tables (`cdf.csv`, `quantiles.csv`, `series.csv`).
pub fn emit_plot_data(report: &ReportDocument, dir: &Path) -> Result<Vec<PathBuf>> {
    let plot = ["cdf.csv", "quantiles.csv", "series.csv"];
    let mut written = Vec::new();
    for (name, t) in &report.tables {
        if plot.iter().any(|p| name.ends_with(p)) {
            let path = dir.join(name);
            t.write(&path)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Writes `report.json` and, for the CSV format, every table.
pub fn write_outputs(report: &ReportDocument, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let main = dir.join("report.json");
    write_json(&main, report)?;
    let mut written = vec![main];
    if format == Format::Csv {
        for (name, t) in &report.tables {
            let path = dir.join(name);
            t.write(&path)?;
            written.push(path);
        }
    }
    Ok(written)
}
