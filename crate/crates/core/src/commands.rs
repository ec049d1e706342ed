//! Subcommand dispatch: a validated config in, a self-contained report, a
//! tidy table and an exit status out.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::{FsdError, Result};
use crate::experiments::{
    bound_matching_study, log_grid, omega_frequency, partial_order_verdict, plateau_saturation,
    single_index_barrier, sobolev_monte_carlo, sobolev_study, MatchingSettings, OmegaSettings, Regime,
    DEFAULT_GRID_POINTS,
};
use crate::fsd::{
    deterministic_norm_bounds, effective_rank, effective_rank_bracket, estimation_dimension, matching_condition,
    pcr_theta, rate_breakdown, ridge_estimation_dimension,
};
use crate::simulate::{
    draw_batch, excess_risk, fit_spectral, run_monte_carlo, MonteCarloSettings, SeedKey, TRIAL_CSV_HEADER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subcommand {
    Kstar,
    Rate,
    Theta,
    Fit,
    Mc,
    Sobolev,
    Plateau,
    Compare,
    SingleIndex,
    Omega,
    Match,
}

impl Subcommand {
    pub const ALL: [Subcommand; 11] = [
        Subcommand::Kstar,
        Subcommand::Rate,
        Subcommand::Theta,
        Subcommand::Fit,
        Subcommand::Mc,
        Subcommand::Sobolev,
        Subcommand::Plateau,
        Subcommand::Compare,
        Subcommand::SingleIndex,
        Subcommand::Omega,
        Subcommand::Match,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Kstar => "kstar",
            Subcommand::Rate => "rate",
            Subcommand::Theta => "theta",
            Subcommand::Fit => "fit",
            Subcommand::Mc => "mc",
            Subcommand::Sobolev => "sobolev",
            Subcommand::Plateau => "plateau",
            Subcommand::Compare => "compare",
            Subcommand::SingleIndex => "single-index",
            Subcommand::Omega => "omega",
            Subcommand::Match => "match",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = FsdError;

    fn from_str(s: &str) -> Result<Self> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| FsdError::Config(format!("unknown subcommand `{s}`")))
    }
}

/// One checked hypothesis. A failed gating check turns the exit status into 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Precondition {
    pub name: String,
    pub holds: bool,
    pub gating: bool,
    pub detail: String,
}

impl Precondition {
    fn gate(name: &str, holds: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), holds, gating: true, detail: detail.into() }
    }

    fn info(name: &str, holds: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), holds, gating: false, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Success,
    HypothesisNotMet,
}

impl RunStatus {
    pub fn exit_code(self) -> u8 {
        match self {
            RunStatus::Success => 0,
            RunStatus::HypothesisNotMet => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub wall_seconds: f64,
}

/// Everything needed to reproduce a run: re-running `command` on `config`
/// yields the same report up to `timings`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub outputs: Value,
    pub preconditions: Vec<Precondition>,
    pub status: RunStatus,
    pub timings: Timings,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report with timings zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        Self { timings: Timings { wall_seconds: 0.0 }, ..self.clone() }
    }
}

/// Tidy table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &str) -> Self {
        Self { header: header.split(',').map(str::to_owned).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn quantities(pairs: &[(&str, f64)]) -> Self {
        let mut t = Table::new("quantity,value");
        for (k, v) in pairs {
            t.push(vec![(*k).to_owned(), v.to_string()]);
        }
        t
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub report: RunReport,
    pub table: Table,
}

impl CommandOutput {
    pub fn status(&self) -> RunStatus {
        self.report.status
    }
}

macro_rules! row {
    ($($v:expr),* $(,)?) => { vec![$($v.to_string()),*] };
}

pub fn run_command(command: Subcommand, config: &ExperimentConfig) -> Result<CommandOutput> {
    config.validate()?;
    let start = Instant::now();
    let (outputs, preconditions, table) = dispatch(command, config)?;
    let hypotheses_met = preconditions.iter().all(|p| p.holds || !p.gating);
    let report = RunReport {
        command: command.name().to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        config: config.clone(),
        outputs,
        preconditions,
        status: if hypotheses_met { RunStatus::Success } else { RunStatus::HypothesisNotMet },
        timings: Timings { wall_seconds: start.elapsed().as_secs_f64() },
    };
    Ok(CommandOutput { report, table })
}

/// Writes `<command>.json` and `<command>.csv` into `dir`, creating it if needed.
pub fn write_outputs(output: &CommandOutput, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| FsdError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let json_path = dir.join(format!("{}.json", output.report.command));
    let csv_path = dir.join(format!("{}.csv", output.report.command));
    std::fs::write(&json_path, output.report.to_json()).map_err(io(&json_path))?;
    std::fs::write(&csv_path, output.table.to_csv()).map_err(io(&csv_path))?;
    Ok((json_path, csv_path))
}

type Dispatched = (Value, Vec<Precondition>, Table);

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("outputs serialize")
}

fn dispatch(command: Subcommand, c: &ExperimentConfig) -> Result<Dispatched> {
    match command {
        Subcommand::Kstar => kstar(c),
        Subcommand::Rate => rate(c),
        Subcommand::Theta => theta(c),
        Subcommand::Fit => fit(c),
        Subcommand::Mc => mc(c),
        Subcommand::Sobolev => sobolev(c),
        Subcommand::Plateau => plateau(c),
        Subcommand::Compare => compare(c),
        Subcommand::SingleIndex => single_index(c),
        Subcommand::Omega => omega(c),
        Subcommand::Match => matching(c),
    }
}

fn kstar(c: &ExperimentConfig) -> Result<Dispatched> {
    let t = c.require_t()?;
    let problem = c.problem.build(c.n)?;
    let dim = estimation_dimension(&problem.spectrum, t, c.b)?;
    let bracket = effective_rank_bracket(&problem.spectrum, t, c.b)?;
    let norms = deterministic_norm_bounds(&problem.spectrum, t, c.b)?;
    let ridge_dim = c.n.map(|n| ridge_estimation_dimension(&problem.spectrum, t, c.b, n)).transpose()?;
    let pre = vec![
        Precondition::info(
            "nondegenerate split",
            !dim.degenerate,
            format!("σ_1 = {} against b/t = {}", problem.spectrum.sigma(1), dim.threshold),
        ),
        Precondition::gate("effective rank bracket", bracket.contains(), format!("{} ≤ {} ≤ {}", bracket.lower, bracket.effective_rank, bracket.upper)),
        Precondition::gate("norm bounds", norms.violations.is_empty(), norms.violations.join("; ")),
    ];
    let table = Table::quantities(&[
        ("k_star", dim.k_star as f64),
        ("threshold", dim.threshold),
        ("effective_rank", bracket.effective_rank),
        ("bracket_lower", bracket.lower),
        ("bracket_upper", bracket.upper),
    ]);
    let out = json!({
        "estimation_dimension": dim,
        "certified_head": dim.certified_head(),
        "effective_rank_bracket": bracket,
        "norm_bounds": norms,
        "ridge_estimation_dimension": ridge_dim,
    });
    Ok((out, pre, table))
}

fn rate(c: &ExperimentConfig) -> Result<Dispatched> {
    let t = c.require_t()?;
    let n = c.require_n()?;
    let problem = c.problem.build(Some(n))?;
    let box_tol = c.resolved_box(t);
    let r = rate_breakdown(&problem, &c.filter, t, c.b, n, box_tol)?;
    let matching = matching_condition(&problem, &c.filter, t, c.b, n, box_tol, c.c2)?;
    let eff = effective_rank(&problem.spectrum, t);
    let pre = vec![
        Precondition::info("matching condition", matching, format!("slack {} against c2 · rate = {}", r.slack, c.c2 * r.total)),
        Precondition::info("sample complexity", box_tol * box_tol * n as f64 >= eff, format!("□²N = {} against effective rank {eff}", box_tol * box_tol * n as f64)),
    ];
    let table = Table::quantities(&[
        ("bias_head", r.bias_head),
        ("var_head", r.var_head),
        ("align_tail", r.align_tail),
        ("var_tail", r.var_tail),
        ("slack", r.slack),
        ("total", r.total),
    ]);
    Ok((json!({ "filter": c.filter, "rate": r, "matching_condition": matching }), pre, table))
}

fn theta(c: &ExperimentConfig) -> Result<Dispatched> {
    let t = c.require_t()?;
    let problem = c.problem.build(c.n)?;
    let box_tol = c.resolved_box(t);
    let th = pcr_theta(&problem.spectrum, t, c.b, box_tol)?;
    let pre = vec![Precondition::gate("spectral gap margin θ > 0", th.applicable(), format!("θ = {}", th.theta))];
    let table = Table::quantities(&[
        ("theta", th.theta),
        ("lower_margin", th.lower_margin),
        ("upper_margin", th.upper_margin),
        ("k_star", th.k_star as f64),
    ]);
    Ok((json!({ "theta": th, "box": box_tol }), pre, table))
}

fn fit(c: &ExperimentConfig) -> Result<Dispatched> {
    let t = c.require_t()?;
    let n = c.require_n()?;
    let problem = c.problem.build(Some(n))?;
    let batch = draw_batch(&problem, n, SeedKey::new(c.master_seed, 0), c.design)?;
    let f = fit_spectral(&batch, &c.filter, t)?;
    let k_star = estimation_dimension(&problem.spectrum, t, c.b)?.k_star;
    let risk = excess_risk(f.beta_hat.as_slice(), &problem, k_star)?;
    let mut table = Table::new("j,sigma,beta_star,beta_hat");
    for (j, ((s, b), e)) in problem.eigenvalues().iter().zip(problem.beta()).zip(f.beta_hat.iter()).enumerate() {
        table.push(row![j + 1, s, b, e]);
    }
    let out = json!({ "filter": c.filter, "route": f.route, "k_star": k_star, "excess_risk": risk });
    Ok((out, Vec::new(), table))
}

fn mc(c: &ExperimentConfig) -> Result<Dispatched> {
    let t = c.require_t()?;
    let n = c.require_n()?;
    let problem = c.problem.build(Some(n))?;
    let box_tol = c.resolved_box(t);
    let settings = MonteCarloSettings {
        n,
        trials: c.trials,
        master_seed: c.master_seed,
        parallelism: c.parallelism,
        design: c.design,
        b: c.b,
        box_tol,
    };
    let s = run_monte_carlo(&problem, &c.filter, t, &settings)?;
    let rate = rate_breakdown(&problem, &c.filter, t, c.b, n, box_tol)?;
    let mut table = Table::new(TRIAL_CSV_HEADER);
    table.rows = s.per_trial.iter().map(|r| r.csv_row().split(',').map(str::to_owned).collect()).collect();
    let eff = effective_rank(&problem.spectrum, t);
    let pre = vec![Precondition::info(
        "sample complexity",
        box_tol * box_tol * n as f64 >= eff,
        format!("□²N = {} against effective rank {eff}", box_tol * box_tol * n as f64),
    )];
    let out = json!({
        "filter": c.filter,
        "box": box_tol,
        "k_star": s.k_star,
        "median": s.median,
        "q10": s.q10,
        "q90": s.q90,
        "omega_frequency": s.omega_frequency,
        "rate": rate,
    });
    Ok((out, pre, table))
}

fn sobolev(c: &ExperimentConfig) -> Result<Dispatched> {
    let setup = c.problem.sobolev(c.b)?;
    let grid = c.require_n_grid()?;
    let theory = sobolev_study(&setup, &c.filter, grid)?;
    let simulated = if c.monte_carlo {
        if setup.dim.is_none() {
            return Err(FsdError::Config("`monte_carlo` needs an explicit truncation `p` in the problem".into()));
        }
        Some(sobolev_monte_carlo(&setup, &c.filter, grid, c.trials, c.master_seed, c.parallelism, c.design)?)
    } else {
        None
    };
    let mut table = Table::new("n,t,squared_rate,median_risk");
    for (i, &n) in theory.n_grid.iter().enumerate() {
        let median = simulated.as_ref().map_or(String::new(), |s| s.values[i].to_string());
        table.push(row![n, theory.tuning[i], theory.values[i], median]);
    }
    Ok((json!({ "filter": c.filter, "rate_fit": theory, "simulated_fit": simulated }), Vec::new(), table))
}

fn plateau(c: &ExperimentConfig) -> Result<Dispatched> {
    let scenario = c.problem.plateau(c.require_n()?)?;
    let r = plateau_saturation(&scenario, c.b, DEFAULT_GRID_POINTS)?;
    let pre = vec![Precondition::gate(
        "4 < SNR ≤ bσ/ε",
        r.hypothesis_met,
        format!("SNR = {} against bσ/ε = {}", r.snr_closed_form, c.b * scenario.sigma / scenario.epsilon),
    )];
    let mut table = Table::new("t,ridge_rate,gradient_flow_rate");
    for ((t, ridge), gf) in r.t_grid.iter().zip(&r.ridge_curve).zip(&r.gradient_flow_curve) {
        table.push(row![t, ridge, gf]);
    }
    Ok((to_value(&r), pre, table))
}

fn compare(c: &ExperimentConfig) -> Result<Dispatched> {
    let t = c.require_t()?;
    let n = c.require_n()?;
    let problem = c.problem.build(Some(n))?;
    let v = partial_order_verdict(&problem, &c.filter, &c.compare_with, t, c.b, n, c.resolved_box(t))?;
    let table = Table::quantities(&[
        ("bias_a", v.bias_a),
        ("bias_b", v.bias_b),
        ("bias_ratio", v.bias_ratio),
        ("a_leq_b", f64::from(u8::from(v.a_leq_b))),
    ]);
    Ok((json!({ "filter_a": c.filter, "filter_b": c.compare_with, "verdict": v }), Vec::new(), table))
}

fn single_index(c: &ExperimentConfig) -> Result<Dispatched> {
    let setup = c.problem.single_index(c.require_n()?, c.b)?;
    let g = c.require_t_grid()?;
    let grid = log_grid(g.lo, g.hi, g.points)?;
    let grid: Vec<f64> = if c.integer_t() { grid.into_iter().map(f64::ceil).collect() } else { grid };
    let r = single_index_barrier(&setup, &c.filter, c.box_tol, &grid)?;
    let pre = vec![Precondition::gate(
        "no-learning alignment identity",
        r.no_learning_consistent,
        "align_tail equals ‖Σ^{1/2}β*‖₂ wherever the signal shell lies outside the head",
    )];
    let mut table = Table::new("t,threshold,k_star,regime,align_tail,var_head");
    for p in &r.points {
        let regime = match p.regime {
            Regime::NoLearning => "no_learning",
            Regime::Learning => "learning",
            Regime::Partial => "partial",
        };
        table.push(row![p.t, p.threshold, p.k_star, regime, p.align_tail, p.var_head]);
    }
    Ok((to_value(&r), pre, table))
}

fn omega(c: &ExperimentConfig) -> Result<Dispatched> {
    let t = c.require_t()?;
    let n = c.require_n()?;
    let problem = c.problem.build(Some(n))?;
    let settings = OmegaSettings {
        n,
        trials: c.trials,
        box_tol: c.resolved_box(t),
        master_seed: c.master_seed,
        parallelism: c.parallelism,
        design: c.design,
    };
    let s = omega_frequency(&problem, t, &settings)?;
    let pre = vec![
        Precondition::info("sample complexity", s.sample_complexity_met, format!("□²N against effective rank {}", s.effective_rank)),
        Precondition::gate(
            "operator-norm consequences on the event",
            s.sample_op_violations + s.change_of_norm_violations == 0,
            format!("{} ‖Σ̂‖ violations, {} change-of-norm violations", s.sample_op_violations, s.change_of_norm_violations),
        ),
    ];
    let mut table = Table::new("trial_id,omega_value,omega_holds,sample_op_norm,change_of_norm");
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for r in &s.per_trial {
        table.push(row![r.trial_id, r.value, r.holds, opt(r.sample_op_norm), opt(r.change_of_norm)]);
    }
    let out = json!({
        "frequency": s.frequency,
        "trials": s.trials,
        "n": s.n,
        "box": s.box_tol,
        "effective_rank": s.effective_rank,
        "sample_op_bound": s.sample_op_bound,
        "sample_op_violations": s.sample_op_violations,
        "change_of_norm_violations": s.change_of_norm_violations,
    });
    Ok((out, pre, table))
}

fn matching(c: &ExperimentConfig) -> Result<Dispatched> {
    let t = c.require_t()?;
    let grid = c.require_n_grid()?;
    let problem = c.problem.build(grid.iter().copied().max())?;
    let settings = MatchingSettings {
        b: c.b,
        box_tol: c.resolved_box(t),
        c2: c.c2,
        trials: c.trials,
        master_seed: c.master_seed,
        parallelism: c.parallelism,
        design: c.design,
        band: c.band,
    };
    let r = bound_matching_study(&problem, &c.filter, t, grid, &settings)?;
    let mut pre = Vec::new();
    for p in &r.points {
        pre.push(Precondition::gate(&format!("matching condition at N = {}", p.n), p.matching_holds, format!("c2 = {}", c.c2)));
        pre.push(Precondition::info(&format!("sample complexity at N = {}", p.n), p.sample_complexity_met, ""));
    }
    if let Some(p) = r.points.first() {
        pre.push(Precondition::gate("k* ≥ 4", p.k_star_ok, format!("k* = {}", p.k_star)));
    }
    let mut table = Table::new("n,k_star,rate,median_risk,ratio,matching_holds,sample_complexity_met");
    for p in &r.points {
        table.push(row![p.n, p.k_star, p.rate, p.median_risk, p.ratio, p.matching_holds, p.sample_complexity_met]);
    }
    Ok((json!({ "filter": c.filter, "study": r }), pre, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn config(extra: &str) -> ExperimentConfig {
        parse_config(&format!(
            r#"{{"problem": {{"kind": "plateau", "k": 4, "sigma": 1.0, "epsilon": 0.01, "p": 40, "alpha_star": 0.2}}, "filter": "ridge"{extra}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn subcommand_names_round_trip() {
        for c in Subcommand::ALL {
            assert_eq!(c.name().parse::<Subcommand>().unwrap(), c);
        }
        assert!("nope".parse::<Subcommand>().is_err());
    }

    #[test]
    fn rate_reports_five_terms() {
        let out = run_command(Subcommand::Rate, &config(r#", "t": 10, "n": 400"#)).unwrap();
        let rate = &out.report.outputs["rate"];
        for key in ["bias_head", "var_head", "align_tail", "var_tail", "slack"] {
            assert!(rate[key].is_number(), "{key}");
        }
        assert_eq!(out.status(), RunStatus::Success);
        assert_eq!(out.table.header, ["quantity", "value"]);
    }

    #[test]
    fn theta_on_gapless_spectrum_is_not_applicable() {
        let c = parse_config(r#"{"problem": {"kind": "explicit", "eigenvalues": [0.5, 0.3, 0.26, 0.24, 0.2], "coefficients": [1, 1, 1, 1, 1]}, "t": 2}"#).unwrap();
        let out = run_command(Subcommand::Theta, &c).unwrap();
        assert_eq!(out.status().exit_code(), 2);
        assert!(out.report.outputs["theta"]["theta"].as_f64().unwrap() <= 0.0);
    }

    #[test]
    fn missing_fields_are_errors() {
        assert!(run_command(Subcommand::Rate, &config("")).is_err());
        assert!(run_command(Subcommand::Sobolev, &config(r#", "n_grid": [1, 2, 4, 8]"#)).is_err());
    }

    #[test]
    fn mc_is_reproducible() {
        let c = config(r#", "t": 10, "n": 50, "trials": 8, "master_seed": 7"#);
        let a = run_command(Subcommand::Mc, &c).unwrap();
        let b = run_command(Subcommand::Mc, &c).unwrap();
        assert_eq!(a.table.to_csv(), b.table.to_csv());
        assert_eq!(a.report.without_timings(), b.report.without_timings());
        assert!(a.table.to_csv().starts_with("trial_id,excess_risk,risk_head,risk_tail,omega_holds\n"));
        assert_eq!(a.table.rows.len(), 8);
    }

    #[test]
    fn plateau_flags_unmet_hypothesis() {
        let c = parse_config(r#"{"problem": {"kind": "plateau", "k": 8, "sigma": 1.0, "epsilon": 0.01, "p": 1008, "alpha_star": 1.0}, "n": 1000}"#).unwrap();
        let out = run_command(Subcommand::Plateau, &c).unwrap();
        assert_eq!(out.status(), RunStatus::HypothesisNotMet);
        assert_eq!(out.table.rows.len(), DEFAULT_GRID_POINTS);
    }

    #[test]
    fn write_outputs_creates_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_command(Subcommand::Compare, &config(r#", "t": 10, "n": 100, "compare_with": "gf""#)).unwrap();
        let (json_path, csv_path) = write_outputs(&out, &dir.path().join("nested")).unwrap();
        let back: RunReport = serde_json::from_str(&std::fs::read_to_string(json_path).unwrap()).unwrap();
        assert_eq!(back, out.report);
        assert!(std::fs::read_to_string(csv_path).unwrap().starts_with("quantity,value\n"));
    }
}
