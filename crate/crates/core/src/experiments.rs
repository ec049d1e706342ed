//! End-to-end studies built on the rate and the Monte Carlo harness: tuning
//! sweeps, plateau and Sobolev saturation, filter comparison, the
//! single-index barrier, concentration frequency and bound matching.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::filters::{FilterKind, FilterSpec, TuningParameter};
use crate::fsd::{
    check_b, check_box, default_box, effective_rank, estimation_dimension, matching_condition,
    omega_consequences, omega_statistic, rate_breakdown, RateBreakdown,
};
use crate::simulate::{
    draw_batch, excess_risk, fit_spectral, nearest_rank, run_monte_carlo, run_trials, Design,
    MonteCarloSettings,
};
use crate::spectra::{
    make_head_signal, make_multiplateau_spectrum, make_plateau_spectrum, make_power_spectrum,
    make_shell_signal, make_sobolev_signal, RegressionProblem,
};

/// Relative margin kept from the open end of a half-open interval.
pub const OPEN_END_MARGIN: f64 = 1e-9;
pub const DEFAULT_GRID_POINTS: usize = 512;

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(invalid("grid", format!("log grid needs 0 < lo ≤ hi < ∞, got [{lo}, {hi}]")));
    }
    if n == 0 {
        return Err(invalid("grid", "log grid needs at least one point"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (n - 1) as f64;
    let mut grid: Vec<f64> = (0..n).map(|i| (a + step * i as f64).exp()).collect();
    grid[0] = lo;
    grid[n - 1] = hi;
    Ok(grid)
}

/// Rate over a grid of tuning parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub t_grid: Vec<f64>,
    pub rates: Vec<RateBreakdown>,
    pub argmin_t: f64,
    pub min_rate: f64,
}

impl SweepResult {
    pub fn argmin_index(&self) -> usize {
        self.t_grid.iter().position(|&t| t == self.argmin_t).unwrap_or(0)
    }
}

/// `box_tol = None` applies [`default_box`] at each `t`.
pub fn sweep_rates(
    problem: &RegressionProblem,
    filter: &FilterSpec,
    b: f64,
    n: usize,
    box_tol: Option<f64>,
    t_grid: &[f64],
) -> Result<SweepResult> {
    if t_grid.is_empty() {
        return Err(invalid("t_grid", "sweep needs at least one tuning parameter"));
    }
    let rates = t_grid
        .par_iter()
        .map(|&t| {
            let t = TuningParameter::new(t)?;
            rate_breakdown(problem, filter, t, b, n, box_tol.unwrap_or_else(|| default_box(t)))
        })
        .collect::<Result<Vec<_>>>()?;
    let best = (0..rates.len())
        .min_by(|&i, &j| {
            rates[i]
                .total
                .total_cmp(&rates[j].total)
                .then(t_grid[i].total_cmp(&t_grid[j]))
        })
        .expect("nonempty grid");
    Ok(SweepResult {
        t_grid: t_grid.to_vec(),
        argmin_t: t_grid[best],
        min_rate: rates[best].total,
        rates,
    })
}

/// Two-level spectrum with a signal of constant magnitude on the top level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlateauScenario {
    pub k: usize,
    pub sigma: f64,
    pub epsilon: f64,
    pub p: usize,
    pub alpha_star: f64,
    pub noise_std: f64,
    pub n: usize,
}

impl PlateauScenario {
    pub fn problem(&self) -> Result<RegressionProblem> {
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(invalid("noise_std", "plateau scenario needs σ_ξ > 0"));
        }
        if !(self.alpha_star > 0.0 && self.alpha_star.is_finite()) {
            return Err(invalid("alpha_star", "plateau scenario needs α* > 0"));
        }
        if self.n == 0 {
            return Err(invalid("n", "sample size must be at least 1"));
        }
        if self.k >= self.p {
            return Err(invalid("k", format!("plateau needs k < p, got k = {}, p = {}", self.k, self.p)));
        }
        let spectrum = make_plateau_spectrum(self.k, self.sigma, self.epsilon, self.p)?;
        let signal = make_head_signal(&spectrum, self.k, self.alpha_star)?;
        RegressionProblem::new(spectrum, signal, self.noise_std)
    }

    /// `(‖Σ^{1/2}β*‖₂/σ_ξ) σ√N / √Tr(Σ_{J^c}²)` from the materialized problem.
    pub fn snr(&self) -> Result<f64> {
        let problem = self.problem()?;
        let tail_sq: f64 = problem.eigenvalues()[self.k..].iter().map(|s| s * s).sum();
        Ok(problem.signal_norm() / self.noise_std * self.sigma * (self.n as f64).sqrt() / tail_sq.sqrt())
    }

    /// `R = (α*/σ_ξ)(σ^{3/2}/ε)√(kN/(p-k))`.
    pub fn snr_closed_form(&self) -> f64 {
        let (k, p, n) = (self.k as f64, self.p as f64, self.n as f64);
        self.alpha_star / self.noise_std * self.sigma.powf(1.5) / self.epsilon * (k * n / (p - k)).sqrt()
    }

    /// Bounds of `I = {t ≥ 1 : ε/b ≤ 1/t < σ}` as `(open lower, closed upper)`.
    pub fn interval(&self, b: f64) -> (f64, f64) {
        ((1.0 / self.sigma).max(1.0), b / self.epsilon)
    }

    pub fn hypothesis_met(&self, b: f64) -> bool {
        let r = self.snr_closed_form();
        r > 4.0 && r <= b * self.sigma / self.epsilon
    }

    fn closed_prefix(&self) -> (f64, f64) {
        let (k, p, n) = (self.k as f64, self.p as f64, self.n as f64);
        (
            self.noise_std * (k / n).sqrt(),
            self.noise_std / self.sigma * self.epsilon * ((p - k) / n).sqrt(),
        )
    }

    /// Minimum over `I` of the ridge rate, `σ_ξ√(k/N) + (σ_ξ/σ)ε√((p-k)/N)(2√R - 1)`.
    pub fn closed_ridge(&self) -> f64 {
        let (head, scale) = self.closed_prefix();
        head + scale * (2.0 * self.snr_closed_form().sqrt() - 1.0)
    }

    /// Minimum over `I` of the gradient-flow rate, with factor `1 + log R`.
    pub fn closed_gradient_flow(&self) -> f64 {
        let (head, scale) = self.closed_prefix();
        head + scale * (1.0 + self.snr_closed_form().ln())
    }

    pub fn with_alpha(&self, alpha_star: f64) -> Self {
        Self { alpha_star, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlateauReport {
    pub scenario: PlateauScenario,
    pub b: f64,
    pub snr: f64,
    pub snr_closed_form: f64,
    pub interval: (f64, f64),
    pub hypothesis_met: bool,
    pub min_ridge: f64,
    pub argmin_ridge: f64,
    pub min_gradient_flow: f64,
    pub argmin_gradient_flow: f64,
    pub closed_ridge: f64,
    pub closed_gradient_flow: f64,
    pub ridge_relative_error: f64,
    pub gradient_flow_relative_error: f64,
    /// `min_GF ≤ min_Ridge` over the grid.
    pub gradient_flow_leq_ridge: bool,
    #[serde(skip)]
    pub t_grid: Vec<f64>,
    #[serde(skip)]
    pub ridge_curve: Vec<f64>,
    #[serde(skip)]
    pub gradient_flow_curve: Vec<f64>,
}

pub fn plateau_saturation(scenario: &PlateauScenario, b: f64, grid_points: usize) -> Result<PlateauReport> {
    check_b(b)?;
    let problem = scenario.problem()?;
    let (lo, hi) = scenario.interval(b);
    let lo = lo * (1.0 + OPEN_END_MARGIN);
    if lo > hi {
        return Err(invalid(
            "epsilon",
            format!("tuning interval is empty: need max(1, 1/σ) < b/ε, got {lo} > {hi}"),
        ));
    }
    let grid = log_grid(lo, hi, grid_points)?;
    let ridge = sweep_rates(&problem, &FilterSpec::ridge(), b, scenario.n, None, &grid)?;
    let gf = sweep_rates(&problem, &FilterSpec::gradient_flow(), b, scenario.n, None, &grid)?;
    let closed_ridge = scenario.closed_ridge();
    let closed_gf = scenario.closed_gradient_flow();
    Ok(PlateauReport {
        scenario: *scenario,
        b,
        snr: scenario.snr()?,
        snr_closed_form: scenario.snr_closed_form(),
        interval: (lo, hi),
        hypothesis_met: scenario.hypothesis_met(b),
        min_ridge: ridge.min_rate,
        argmin_ridge: ridge.argmin_t,
        min_gradient_flow: gf.min_rate,
        argmin_gradient_flow: gf.argmin_t,
        closed_ridge,
        closed_gradient_flow: closed_gf,
        ridge_relative_error: (ridge.min_rate - closed_ridge).abs() / closed_ridge,
        gradient_flow_relative_error: (gf.min_rate - closed_gf).abs() / closed_gf,
        gradient_flow_leq_ridge: gf.min_rate <= ridge.min_rate,
        ridge_curve: ridge.rates.iter().map(|r| r.total).collect(),
        gradient_flow_curve: gf.rates.iter().map(|r| r.total).collect(),
        t_grid: grid,
    })
}

/// `min_Ridge / min_GF` as `α*` doubles `doublings` times.
pub fn saturation_trend(
    scenario: &PlateauScenario,
    b: f64,
    doublings: usize,
    grid_points: usize,
) -> Result<Vec<(f64, f64)>> {
    (0..=doublings)
        .map(|i| {
            let s = scenario.with_alpha(scenario.alpha_star * 2f64.powi(i as i32));
            let r = plateau_saturation(&s, b, grid_points)?;
            Ok((s.alpha_star, r.min_ridge / r.min_gradient_flow))
        })
        .collect()
}

/// Least-squares slope of `log(value)` against `log(N)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub n_grid: Vec<usize>,
    pub values: Vec<f64>,
    pub tuning: Vec<f64>,
    pub fitted_slope: f64,
    pub target_exponent: f64,
}

impl ExponentFit {
    pub fn slope_error(&self) -> f64 {
        (self.fitted_slope - self.target_exponent).abs()
    }
}

pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(invalid("grid", "slope fit needs two or more paired points"));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(invalid("grid", "slope fit needs positive finite values"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(invalid("grid", "slope fit needs distinct abscissae"));
    }
    Ok(sxy / sxx)
}

/// Rejects grids that are not increasing geometric sequences of four or more points.
pub fn check_geometric(n_grid: &[usize]) -> Result<()> {
    if n_grid.len() < 4 {
        return Err(invalid("n_grid", format!("exponent fit needs ≥ 4 grid points, got {}", n_grid.len())));
    }
    if n_grid[0] == 0 {
        return Err(invalid("n_grid", "sample sizes must be positive"));
    }
    let ratio = n_grid[1] as f64 / n_grid[0] as f64;
    let geometric = ratio > 1.0
        && n_grid
            .windows(2)
            .all(|w| ((w[1] as f64 / w[0] as f64) / ratio - 1.0).abs() <= 1e-2);
    if !geometric {
        return Err(invalid("n_grid", format!("sample sizes must form an increasing geometric grid, got {n_grid:?}")));
    }
    Ok(())
}

/// Effective smoothness: ridge saturates at `s = 2`.
pub fn effective_smoothness(filter: &FilterSpec, s: f64) -> f64 {
    match filter.kind {
        FilterKind::Ridge => s.min(2.0),
        _ => s,
    }
}

/// Target exponent `-α s̃ / (1 + s̃ α)` of the squared rate.
pub fn sobolev_target(filter: &FilterSpec, alpha: f64, s: f64) -> f64 {
    let st = effective_smoothness(filter, s);
    -alpha * st / (1.0 + st * alpha)
}

/// `t = N^{α/(1+s̃α)}`, rounded up to an integer step count for gradient descent.
pub fn sobolev_tuning(filter: &FilterSpec, alpha: f64, s: f64, n: usize) -> Result<TuningParameter> {
    let st = effective_smoothness(filter, s);
    let t = (n as f64).powf(alpha / (1.0 + st * alpha)).max(1.0);
    let t = match filter.kind {
        FilterKind::GradientDescent { .. } => t.ceil(),
        _ => t,
    };
    TuningParameter::new(t)
}

/// Power-law problem with `p = max(32N, 4096)` unless `dim` is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevSetup {
    pub alpha: f64,
    pub s: f64,
    pub delta: f64,
    pub noise_std: f64,
    pub b: f64,
    pub dim: Option<usize>,
}

impl SobolevSetup {
    pub fn dimension(&self, n: usize) -> usize {
        self.dim.unwrap_or_else(|| (32 * n).max(4096))
    }

    pub fn problem(&self, p: usize) -> Result<RegressionProblem> {
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", format!("Sobolev study needs α > 1, got {}", self.alpha)));
        }
        let spectrum = make_power_spectrum(self.alpha, p)?;
        let signal = make_sobolev_signal(&spectrum, self.s, self.delta)?;
        RegressionProblem::new(spectrum, signal, self.noise_std)
    }
}

/// Squared rate at the tuned `t` against `N`.
pub fn sobolev_study(setup: &SobolevSetup, filter: &FilterSpec, n_grid: &[usize]) -> Result<ExponentFit> {
    check_geometric(n_grid)?;
    check_b(setup.b)?;
    let points = n_grid
        .par_iter()
        .map(|&n| {
            let problem = setup.problem(setup.dimension(n))?;
            let t = sobolev_tuning(filter, setup.alpha, setup.s, n)?;
            let r = rate_breakdown(&problem, filter, t, setup.b, n, default_box(t))?;
            Ok((r.total * r.total, t.value()))
        })
        .collect::<Result<Vec<_>>>()?;
    finish_fit(setup, filter, n_grid, points)
}

/// Median simulated excess risk at the tuned `t` against `N`, with `trials`
/// replications per grid point.
pub fn sobolev_monte_carlo(
    setup: &SobolevSetup,
    filter: &FilterSpec,
    n_grid: &[usize],
    trials: usize,
    master_seed: u64,
    parallelism: usize,
    design: Design,
) -> Result<ExponentFit> {
    check_geometric(n_grid)?;
    let points = n_grid
        .iter()
        .map(|&n| {
            let problem = setup.problem(setup.dimension(n))?;
            let t = sobolev_tuning(filter, setup.alpha, setup.s, n)?;
            filter.at(t)?;
            let k_star = estimation_dimension(&problem.spectrum, t, setup.b)?.k_star;
            let risks = run_trials(trials, master_seed, parallelism, |_, seed| {
                let batch = draw_batch(&problem, n, seed, design)?;
                let fit = fit_spectral(&batch, filter, t)?;
                Ok(excess_risk(fit.beta_hat.as_slice(), &problem, k_star)?.total)
            })?;
            Ok((nearest_rank(&risks, 0.5), t.value()))
        })
        .collect::<Result<Vec<_>>>()?;
    finish_fit(setup, filter, n_grid, points)
}

fn finish_fit(
    setup: &SobolevSetup,
    filter: &FilterSpec,
    n_grid: &[usize],
    points: Vec<(f64, f64)>,
) -> Result<ExponentFit> {
    let (values, tuning): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
    let xs: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    Ok(ExponentFit {
        n_grid: n_grid.to_vec(),
        fitted_slope: log_log_slope(&xs, &values)?,
        target_exponent: sobolev_target(filter, setup.alpha, setup.s),
        values,
        tuning,
    })
}

/// Order of two filters at a common `t` by their head bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialOrderVerdict {
    pub a_leq_b: bool,
    pub bias_a: f64,
    pub bias_b: f64,
    /// `bias_a / bias_b`, with `0/0 = 1`.
    pub bias_ratio: f64,
}

pub fn partial_order_verdict(
    problem: &RegressionProblem,
    filter_a: &FilterSpec,
    filter_b: &FilterSpec,
    t: TuningParameter,
    b: f64,
    n: usize,
    box_tol: f64,
) -> Result<PartialOrderVerdict> {
    let ra = rate_breakdown(problem, filter_a, t, b, n, box_tol)?;
    let rb = rate_breakdown(problem, filter_b, t, b, n, box_tol)?;
    let bias_ratio = if ra.bias_head == rb.bias_head {
        1.0
    } else {
        ra.bias_head / rb.bias_head
    };
    Ok(PartialOrderVerdict {
        a_leq_b: ra.bias_head <= rb.bias_head,
        bias_a: ra.bias_head,
        bias_b: rb.bias_head,
        bias_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// The signal shell lies entirely outside the estimation head.
    NoLearning,
    /// The estimation head covers the signal shell.
    Learning,
    /// The threshold cuts through the signal shell.
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierPoint {
    pub t: f64,
    pub threshold: f64,
    pub k_star: usize,
    pub regime: Regime,
    pub align_tail: f64,
    pub var_head: f64,
    /// `align_tail == ‖Σ^{1/2}β*‖₂` (required in the no-learning regime).
    pub align_equals_norm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleIndexReport {
    pub d: usize,
    pub levels: usize,
    pub information_exponent: usize,
    pub shell_boundaries: Vec<usize>,
    pub signal_norm: f64,
    pub points: Vec<BarrierPoint>,
    /// `var_head` at the smallest learning `t`, if any.
    pub kernel_rate_at_learning: Option<f64>,
    /// Every no-learning point has `align_tail = ‖Σ^{1/2}β*‖₂`.
    pub no_learning_consistent: bool,
}

impl SingleIndexReport {
    pub fn ts_in(&self, regime: Regime) -> Vec<f64> {
        self.points.iter().filter(|p| p.regime == regime).map(|p| p.t).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleIndexSetup {
    pub d: usize,
    pub levels: usize,
    pub information_exponent: usize,
    pub magnitude: f64,
    pub noise_std: f64,
    pub n: usize,
    pub b: f64,
}

impl SingleIndexSetup {
    pub fn problem(&self) -> Result<RegressionProblem> {
        if self.information_exponent < 1 || self.information_exponent > self.levels {
            return Err(invalid(
                "information_exponent",
                format!(
                    "information exponent must lie in 1..={}, got {}",
                    self.levels, self.information_exponent
                ),
            ));
        }
        let spectrum = make_multiplateau_spectrum(self.d, self.levels)?;
        let signal = make_shell_signal(&spectrum, self.information_exponent, self.magnitude)?;
        RegressionProblem::new(spectrum, signal, self.noise_std)
    }
}

pub fn single_index_barrier(
    setup: &SingleIndexSetup,
    filter: &FilterSpec,
    box_tol: Option<f64>,
    t_grid: &[f64],
) -> Result<SingleIndexReport> {
    let problem = setup.problem()?;
    let boundaries = problem
        .spectrum
        .shell_boundaries()
        .expect("multi-plateau spectrum")
        .to_vec();
    let ie = setup.information_exponent;
    let (before, after) = (boundaries[ie - 1], boundaries[ie]);
    let norm = problem.signal_norm();
    let sweep = sweep_rates(&problem, filter, setup.b, setup.n, box_tol, t_grid)?;
    let points: Vec<BarrierPoint> = sweep
        .rates
        .iter()
        .map(|r| {
            let regime = if r.k_star <= before {
                Regime::NoLearning
            } else if r.k_star >= after {
                Regime::Learning
            } else {
                Regime::Partial
            };
            BarrierPoint {
                t: r.t,
                threshold: r.threshold,
                k_star: r.k_star,
                regime,
                align_tail: r.align_tail,
                var_head: r.var_head,
                align_equals_norm: r.align_tail == norm,
            }
        })
        .collect();
    let kernel_rate_at_learning = points
        .iter()
        .filter(|p| p.regime == Regime::Learning)
        .min_by(|a, b| a.t.total_cmp(&b.t))
        .map(|p| p.var_head);
    let no_learning_consistent = points
        .iter()
        .filter(|p| p.regime == Regime::NoLearning)
        .all(|p| p.align_equals_norm);
    Ok(SingleIndexReport {
        d: setup.d,
        levels: setup.levels,
        information_exponent: ie,
        shell_boundaries: boundaries,
        signal_norm: norm,
        points,
        kernel_rate_at_learning,
        no_learning_consistent,
    })
}

pub const MIN_OMEGA_TRIALS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaTrial {
    pub trial_id: u64,
    pub value: f64,
    pub holds: bool,
    /// `‖Σ̂‖_op`, computed when the event holds.
    pub sample_op_norm: Option<f64>,
    /// `λ_max(Σ_t^{1/2} Σ̂_t^{-1} Σ_t^{1/2})`, computed when the event holds.
    pub change_of_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaStudy {
    pub frequency: f64,
    pub trials: usize,
    pub n: usize,
    pub box_tol: f64,
    pub effective_rank: f64,
    /// `□²N ≥ effective rank`.
    pub sample_complexity_met: bool,
    pub sample_op_bound: f64,
    pub sample_op_violations: usize,
    pub change_of_norm_violations: usize,
    pub per_trial: Vec<OmegaTrial>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaSettings {
    pub n: usize,
    pub trials: usize,
    pub box_tol: f64,
    pub master_seed: u64,
    pub parallelism: usize,
    pub design: Design,
}

/// Fraction of trials on which the concentration event holds, with its
/// operator-norm consequences checked on every such trial.
pub fn omega_frequency(problem: &RegressionProblem, t: TuningParameter, settings: &OmegaSettings) -> Result<OmegaStudy> {
    if settings.trials < MIN_OMEGA_TRIALS {
        return Err(invalid(
            "trials",
            format!("frequency study needs ≥ {MIN_OMEGA_TRIALS} trials, got {}", settings.trials),
        ));
    }
    check_box(settings.box_tol)?;
    let per_trial = run_trials(settings.trials, settings.master_seed, settings.parallelism, |id, seed| {
        let batch = draw_batch(problem, settings.n, seed, settings.design)?;
        let cov = batch.sample_covariance();
        let omega = omega_statistic(&cov, &problem.spectrum, t, settings.box_tol)?;
        let (sample_op_norm, change_of_norm) = if omega.holds {
            let c = omega_consequences(&cov, &problem.spectrum, t)?;
            (Some(c.sample_op_norm), Some(c.change_of_norm))
        } else {
            (None, None)
        };
        Ok(OmegaTrial {
            trial_id: id,
            value: omega.value,
            holds: omega.holds,
            sample_op_norm,
            change_of_norm,
        })
    })?;
    let sample_op_bound = 4.0 * (problem.spectrum.sigma(1) + t.inverse());
    let holds = per_trial.iter().filter(|r| r.holds).count();
    let eff = effective_rank(&problem.spectrum, t);
    Ok(OmegaStudy {
        frequency: holds as f64 / per_trial.len() as f64,
        trials: per_trial.len(),
        n: settings.n,
        box_tol: settings.box_tol,
        effective_rank: eff,
        sample_complexity_met: settings.box_tol * settings.box_tol * settings.n as f64 >= eff,
        sample_op_bound,
        sample_op_violations: per_trial
            .iter()
            .filter(|r| r.sample_op_norm.is_some_and(|v| v > sample_op_bound))
            .count(),
        change_of_norm_violations: per_trial
            .iter()
            .filter(|r| r.change_of_norm.is_some_and(|v| v > 2.0))
            .count(),
        per_trial,
    })
}

/// Harness convention for the minimum estimation dimension of a lower bound.
pub const MIN_MATCHING_K_STAR: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchingPoint {
    pub n: usize,
    pub k_star: usize,
    pub rate: f64,
    pub median_risk: f64,
    /// `median_risk / rate²`
    pub ratio: f64,
    pub matching_holds: bool,
    pub sample_complexity_met: bool,
    pub k_star_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchingReport {
    /// Zero signal and zero noise: risk and rate vanish and no ratio is formed.
    pub degenerate: bool,
    pub points: Vec<MatchingPoint>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub band: f64,
    pub within_band: bool,
}

impl MatchingReport {
    pub fn preconditions_met(&self) -> bool {
        self.points.iter().all(|p| p.matching_holds && p.k_star_ok)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchingSettings {
    pub b: f64,
    pub box_tol: f64,
    pub c2: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub parallelism: usize,
    pub design: Design,
    /// Allowed `max/min` of the ratio across the grid.
    pub band: f64,
}

pub fn bound_matching_study(
    problem: &RegressionProblem,
    filter: &FilterSpec,
    t: TuningParameter,
    n_grid: &[usize],
    settings: &MatchingSettings,
) -> Result<MatchingReport> {
    if n_grid.is_empty() {
        return Err(invalid("n_grid", "matching study needs at least one sample size"));
    }
    if settings.band.is_nan() || settings.band < 1.0 {
        return Err(invalid("band", format!("ratio band must be ≥ 1, got {}", settings.band)));
    }
    check_box(settings.box_tol)?;
    let degenerate = problem.noise_std == 0.0 && problem.beta().iter().all(|&c| c == 0.0);
    if degenerate {
        return Ok(MatchingReport {
            degenerate,
            points: Vec::new(),
            ratio_min: f64::NAN,
            ratio_max: f64::NAN,
            band: settings.band,
            within_band: true,
        });
    }
    let eff = effective_rank(&problem.spectrum, t);
    let k_star = estimation_dimension(&problem.spectrum, t, settings.b)?.k_star;
    let mut points = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let rate = rate_breakdown(problem, filter, t, settings.b, n, settings.box_tol)?.total;
        let mc = MonteCarloSettings {
            n,
            trials: settings.trials,
            master_seed: settings.master_seed,
            parallelism: settings.parallelism,
            design: settings.design,
            b: settings.b,
            box_tol: settings.box_tol,
        };
        let summary = run_monte_carlo(problem, filter, t, &mc)?;
        points.push(MatchingPoint {
            n,
            k_star,
            rate,
            median_risk: summary.median,
            ratio: summary.median / (rate * rate),
            matching_holds: matching_condition(problem, filter, t, settings.b, n, settings.box_tol, settings.c2)?,
            sample_complexity_met: settings.box_tol * settings.box_tol * n as f64 >= eff,
            k_star_ok: k_star >= MIN_MATCHING_K_STAR,
        });
    }
    let ratio_min = points.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
    let ratio_max = points.iter().map(|p| p.ratio).fold(f64::NEG_INFINITY, f64::max);
    Ok(MatchingReport {
        degenerate,
        within_band: ratio_max <= settings.band * ratio_min,
        points,
        ratio_min,
        ratio_max,
        band: settings.band,
    })
}
