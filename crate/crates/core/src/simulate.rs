//! Synthetic data, exact spectral-calculus fits and seeded Monte Carlo runs.
//!
//! Randomness is keyed: every batch owns a [`SeedKey`] `(master, trial)` and
//! draws the design from ChaCha stream 0 and the noise from stream 1, so a
//! replication depends only on its key and never on scheduling.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FsdError, Result};
use crate::filters::{FilterSpec, TuningParameter};
use crate::fsd::{check_box, estimation_dimension, omega_statistic};
use crate::linalg::SymmetricEigen;
use crate::spectra::RegressionProblem;

const DESIGN_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

/// Key of a counter-based random stream family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedKey {
    pub master: u64,
    pub trial: u64,
}

impl SeedKey {
    pub fn new(master: u64, trial: u64) -> Self {
        Self { master, trial }
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.master.to_le_bytes());
        seed[8..16].copy_from_slice(&self.trial.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng
    }
}

impl From<u64> for SeedKey {
    fn from(seed: u64) -> Self {
        Self::new(seed, 0)
    }
}

/// Distribution of the standardized design coordinates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    #[default]
    Gaussian,
    Rademacher,
}

/// `N` i.i.d. observations `y = Xβ* + ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    /// `N × p` design with column `j` scaled by `√σ_j`.
    pub design: DMatrix<f64>,
    pub response: DVector<f64>,
    pub seed: SeedKey,
    pub distribution: Design,
}

impl SampleBatch {
    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    /// `Σ̂ = XᵀX / N`.
    pub fn sample_covariance(&self) -> DMatrix<f64> {
        self.design.tr_mul(&self.design) / self.n() as f64
    }

    /// Same design, different response (the fit is linear in `y`).
    pub fn with_response(&self, response: DVector<f64>) -> Result<Self> {
        if response.len() != self.n() {
            return Err(FsdError::DimensionMismatch {
                context: "response length vs sample size",
                expected: self.n(),
                actual: response.len(),
            });
        }
        Ok(Self {
            response,
            ..self.clone()
        })
    }
}

pub fn draw_batch(
    problem: &RegressionProblem,
    n: usize,
    seed: impl Into<SeedKey>,
    distribution: Design,
) -> Result<SampleBatch> {
    if n == 0 {
        return Err(invalid("n", "sample size must be at least 1"));
    }
    let seed = seed.into();
    let p = problem.dim();
    let mut rng = seed.rng(DESIGN_STREAM);
    let mut design = DMatrix::<f64>::zeros(n, p);
    for (mut col, &s) in design.column_iter_mut().zip(problem.eigenvalues()) {
        let scale = s.sqrt();
        match distribution {
            Design::Gaussian => {
                for v in col.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v = scale * z;
                }
            }
            Design::Rademacher => {
                for v in col.iter_mut() {
                    let bit: bool = rand::Rng::random(&mut rng);
                    *v = if bit { scale } else { -scale };
                }
            }
        }
    }
    let beta = DVector::from_column_slice(problem.beta());
    let mut response = &design * &beta;
    if problem.noise_std > 0.0 {
        let mut rng = seed.rng(NOISE_STREAM);
        for v in response.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += problem.noise_std * z;
        }
    }
    Ok(SampleBatch {
        design,
        response,
        seed,
        distribution,
    })
}

/// Which Gram matrix the fit diagonalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// `Σ̂ = XᵀX/N`, `p × p`.
    Primal,
    /// `XXᵀ/N`, `N × N`.
    Dual,
}

impl Route {
    /// The cheaper of the two eigenproblems.
    pub fn for_shape(n: usize, p: usize) -> Self {
        if n < p {
            Route::Dual
        } else {
            Route::Primal
        }
    }
}

/// Eigendecomposition of one Gram matrix of a batch, reusable across filters and `t`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition<'a> {
    batch: &'a SampleBatch,
    route: Route,
    eigen: SymmetricEigen,
    sample_cov: Option<DMatrix<f64>>,
    /// `Xᵀy/N` on the primal route.
    rhs: DVector<f64>,
}

impl<'a> SpectralDecomposition<'a> {
    pub fn new(batch: &'a SampleBatch) -> Result<Self> {
        Self::with_route(batch, Route::for_shape(batch.n(), batch.p()))
    }

    pub fn with_route(batch: &'a SampleBatch, route: Route) -> Result<Self> {
        let n = batch.n() as f64;
        match route {
            Route::Primal => {
                let cov = batch.sample_covariance();
                let eigen = SymmetricEigen::new(cov.clone())?;
                let rhs = batch.design.tr_mul(&batch.response) / n;
                Ok(Self {
                    batch,
                    route,
                    eigen,
                    sample_cov: Some(cov),
                    rhs,
                })
            }
            Route::Dual => {
                let gram = &batch.design * batch.design.transpose() / n;
                let eigen = SymmetricEigen::new(gram)?;
                Ok(Self {
                    batch,
                    route,
                    eigen,
                    sample_cov: None,
                    rhs: DVector::zeros(0),
                })
            }
        }
    }

    pub fn route(&self) -> Route {
        self.route
    }

    /// Eigenvalues of the diagonalized Gram matrix (nonzero ones are shared by both routes).
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigen.eigenvalues
    }

    /// `Σ̂` if the primal route already formed it.
    pub fn sample_covariance(&self) -> Option<&DMatrix<f64>> {
        self.sample_cov.as_ref()
    }

    /// `β̂ = φ_t(Σ̂)Xᵀy/N = Xᵀφ_t(XXᵀ/N)y/N`.
    pub fn fit(&self, filter: &FilterSpec, t: TuningParameter) -> Result<SpectralFit> {
        let f = filter.at(t)?;
        let beta_hat = match self.route {
            Route::Primal => self.eigen.apply_to(|l| f.phi(l), &self.rhs),
            Route::Dual => {
                let coeffs = self.eigen.apply_to(|l| f.phi(l), &self.batch.response);
                self.batch.design.tr_mul(&coeffs) / self.batch.n() as f64
            }
        };
        Ok(SpectralFit {
            beta_hat,
            filter: *filter,
            t,
            route: self.route,
        })
    }

    /// `ψ_t(Σ̂)` as a `p × p` matrix (primal route only).
    pub fn residual_operator(&self, filter: &FilterSpec, t: TuningParameter) -> Result<DMatrix<f64>> {
        if self.route != Route::Primal {
            return Err(invalid("route", "residual operator needs the primal decomposition"));
        }
        let f = filter.at(t)?;
        Ok(self.eigen.apply(|l| f.psi(l)))
    }

    /// Eigenvectors of `Σ̂` (primal route) with their eigenvalues.
    pub fn primal_eigen(&self) -> Option<&SymmetricEigen> {
        (self.route == Route::Primal).then_some(&self.eigen)
    }
}

/// A fitted spectral estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFit {
    pub beta_hat: DVector<f64>,
    pub filter: FilterSpec,
    pub t: TuningParameter,
    pub route: Route,
}

pub fn fit_spectral(batch: &SampleBatch, filter: &FilterSpec, t: TuningParameter) -> Result<SpectralFit> {
    SpectralDecomposition::new(batch)?.fit(filter, t)
}

pub fn fit_spectral_with_route(
    batch: &SampleBatch,
    filter: &FilterSpec,
    t: TuningParameter,
    route: Route,
) -> Result<SpectralFit> {
    SpectralDecomposition::with_route(batch, route)?.fit(filter, t)
}

/// `‖Σ^{1/2}(β̂ - β*)‖₂²` split over the head `{1..k*}` and the tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskSplit {
    pub total: f64,
    pub head: f64,
    pub tail: f64,
}

pub fn excess_risk(beta_hat: &[f64], problem: &RegressionProblem, k_star: usize) -> Result<RiskSplit> {
    if beta_hat.len() != problem.dim() {
        return Err(FsdError::DimensionMismatch {
            context: "estimate length vs problem dimension",
            expected: problem.dim(),
            actual: beta_hat.len(),
        });
    }
    let k = k_star.min(problem.dim());
    let part = |range: std::ops::Range<usize>| -> f64 {
        range
            .map(|j| {
                let d = beta_hat[j] - problem.beta()[j];
                problem.eigenvalues()[j] * d * d
            })
            .sum()
    };
    let head = part(0..k);
    let tail = part(k..problem.dim());
    Ok(RiskSplit {
        total: head + tail,
        head,
        tail,
    })
}

/// One Monte Carlo replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial_id: u64,
    pub seed: SeedKey,
    pub excess_risk: f64,
    pub risk_head: f64,
    pub risk_tail: f64,
    pub omega_holds: bool,
    pub omega_value: f64,
}

/// Settings shared by every replication of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloSettings {
    pub n: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub parallelism: usize,
    pub design: Design,
    pub b: f64,
    pub box_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub k_star: usize,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub omega_frequency: f64,
    pub per_trial: Vec<TrialResult>,
}

/// Runs `trials` independent replications of `task`, in trial order, on
/// `parallelism` threads. Results do not depend on the thread count.
pub fn run_trials<T, F>(trials: usize, master_seed: u64, parallelism: usize, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, SeedKey) -> Result<T> + Sync + Send,
{
    let run = |i: usize| {
        let id = i as u64;
        task(id, SeedKey::new(master_seed, id)).map_err(|e| FsdError::Trial {
            trial_id: id,
            source: Box::new(e),
        })
    };
    if parallelism <= 1 {
        return (0..trials).map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| invalid("parallelism", e.to_string()))?;
    pool.install(|| (0..trials).into_par_iter().map(run).collect())
}

pub fn run_monte_carlo(
    problem: &RegressionProblem,
    filter: &FilterSpec,
    t: TuningParameter,
    settings: &MonteCarloSettings,
) -> Result<MonteCarloSummary> {
    if settings.trials == 0 {
        return Err(invalid("trials", "at least one trial is required"));
    }
    check_box(settings.box_tol)?;
    filter.at(t)?;
    let k_star = estimation_dimension(&problem.spectrum, t, settings.b)?.k_star;
    let per_trial = run_trials(settings.trials, settings.master_seed, settings.parallelism, |id, seed| {
        let batch = draw_batch(problem, settings.n, seed, settings.design)?;
        let decomposition = SpectralDecomposition::new(&batch)?;
        let fit = decomposition.fit(filter, t)?;
        let risk = excess_risk(fit.beta_hat.as_slice(), problem, k_star)?;
        let omega = match decomposition.sample_covariance() {
            Some(cov) => omega_statistic(cov, &problem.spectrum, t, settings.box_tol)?,
            None => omega_statistic(&batch.sample_covariance(), &problem.spectrum, t, settings.box_tol)?,
        };
        Ok(TrialResult {
            trial_id: id,
            seed,
            excess_risk: risk.total,
            risk_head: risk.head,
            risk_tail: risk.tail,
            omega_holds: omega.holds,
            omega_value: omega.value,
        })
    })?;
    let risks: Vec<f64> = per_trial.iter().map(|r| r.excess_risk).collect();
    let holds = per_trial.iter().filter(|r| r.omega_holds).count();
    Ok(MonteCarloSummary {
        k_star,
        median: nearest_rank(&risks, 0.5),
        q10: nearest_rank(&risks, 0.1),
        q90: nearest_rank(&risks, 0.9),
        omega_frequency: holds as f64 / per_trial.len() as f64,
        per_trial,
    })
}

/// Nearest-rank quantile: the `⌈qn⌉`-th smallest value.
pub fn nearest_rank(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// CSV header for per-trial output.
pub const TRIAL_CSV_HEADER: &str = "trial_id,excess_risk,risk_head,risk_tail,omega_holds";

impl TrialResult {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.trial_id, self.excess_risk, self.risk_head, self.risk_tail, self.omega_holds
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{make_power_spectrum, SignalModel, SpectrumModel};
    use proptest::prelude::*;

    fn tp(t: f64) -> TuningParameter {
        TuningParameter::new(t).unwrap()
    }

    fn problem(p: usize, noise: f64, seed: u64) -> RegressionProblem {
        let s = make_power_spectrum(1.5, p).unwrap();
        let mut rng = SeedKey::from(seed).rng(9);
        let beta: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        RegressionProblem::new(s, SignalModel::new(beta), noise).unwrap()
    }

    fn null_problem(p: usize) -> RegressionProblem {
        let s = make_power_spectrum(2.0, p).unwrap();
        RegressionProblem::new(s, SignalModel::new(vec![0.0; p]), 0.0).unwrap()
    }

    #[test]
    fn draw_null_problem_gives_zero_response() {
        let b = draw_batch(&null_problem(5), 20, 3, Design::Gaussian).unwrap();
        assert!(b.response.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn draw_is_deterministic() {
        let pr = problem(6, 0.5, 1);
        for design in [Design::Gaussian, Design::Rademacher] {
            let a = draw_batch(&pr, 30, 11, design).unwrap();
            let b = draw_batch(&pr, 30, 11, design).unwrap();
            assert_eq!(a, b);
            let c = draw_batch(&pr, 30, 12, design).unwrap();
            assert_ne!(a.design, c.design);
        }
    }

    #[test]
    fn rademacher_entries_are_scaled_signs() {
        let pr = problem(4, 0.0, 2);
        let b = draw_batch(&pr, 50, 5, Design::Rademacher).unwrap();
        for (j, col) in b.design.column_iter().enumerate() {
            let s = pr.eigenvalues()[j].sqrt();
            assert!(col.iter().all(|&v| v == s || v == -s));
        }
    }

    #[test]
    fn gaussian_column_variance_converges() {
        let s = SpectrumModel::explicit(vec![1.0]).unwrap();
        let pr = RegressionProblem::new(s, SignalModel::new(vec![0.0]), 0.0).unwrap();
        let b = draw_batch(&pr, 100_000, 42, Design::Gaussian).unwrap();
        let var = b.design.iter().map(|v| v * v).sum::<f64>() / 1e5;
        assert!((var - 1.0).abs() < 0.02, "sample variance {var}");
    }

    #[test]
    fn zero_response_gives_zero_fit() {
        let pr = null_problem(8);
        let b = draw_batch(&pr, 5, 1, Design::Gaussian).unwrap();
        for f in [FilterSpec::ridge(), FilterSpec::gradient_flow(), FilterSpec::pcr(0.5).unwrap()] {
            let fit = fit_spectral(&b, &f, tp(4.0)).unwrap();
            assert_eq!(fit.route, Route::Dual);
            assert!(fit.beta_hat.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn ridge_fit_matches_normal_equations() {
        let pr = problem(10, 0.3, 4);
        let b = draw_batch(&pr, 40, 8, Design::Gaussian).unwrap();
        let t = 7.0;
        let fit = fit_spectral(&b, &FilterSpec::ridge(), tp(t)).unwrap();
        assert_eq!(fit.route, Route::Primal);
        let lhs = b.sample_covariance() + DMatrix::identity(10, 10) / t;
        let rhs = b.design.tr_mul(&b.response) / 40.0;
        let direct = lhs.clone().cholesky().unwrap().solve(&rhs);
        assert!((&fit.beta_hat - direct).amax() < 1e-10);
        assert!((lhs * &fit.beta_hat - rhs).amax() < 1e-10);
    }

    #[test]
    fn gradient_descent_fit_matches_iterations() {
        let pr = problem(12, 0.2, 5);
        let b = draw_batch(&pr, 9, 2, Design::Gaussian).unwrap();
        let eta = 0.1;
        let cov = b.sample_covariance();
        let rhs = b.design.tr_mul(&b.response) / 9.0;
        let mut beta = DVector::zeros(12);
        for steps in 1..=40 {
            beta = &beta - eta * (&cov * &beta - &rhs);
            let fit = fit_spectral(&b, &FilterSpec::gradient_descent(eta).unwrap(), tp(steps as f64)).unwrap();
            assert!((&fit.beta_hat - &beta).amax() < 1e-8, "step {steps}");
        }
    }

    #[test]
    fn excess_risk_examples() {
        let s = SpectrumModel::explicit(vec![1.0, 0.25]).unwrap();
        let pr = RegressionProblem::new(s, SignalModel::new(vec![0.5, -1.0]), 1.0).unwrap();
        let r = excess_risk(&[0.5, -1.0], &pr, 1).unwrap();
        assert_eq!(r.total, 0.0);
        let r = excess_risk(&[0.0, 0.0], &pr, 1).unwrap();
        assert!((r.total - pr.signal_norm().powi(2)).abs() < 1e-15);
        let r = excess_risk(&[1.5, 1.0], &pr, 1).unwrap();
        assert_eq!((r.total, r.head, r.tail), (2.0, 1.0, 1.0));
        assert!(excess_risk(&[1.0], &pr, 1).is_err());
    }

    #[test]
    fn monte_carlo_basic_contracts() {
        let settings = MonteCarloSettings {
            n: 20,
            trials: 1,
            master_seed: 3,
            parallelism: 1,
            design: Design::Gaussian,
            b: 0.5,
            box_tol: 0.1,
        };
        let pr = problem(6, 0.4, 9);
        let s = run_monte_carlo(&pr, &FilterSpec::ridge(), tp(5.0), &settings).unwrap();
        assert_eq!(s.median, s.per_trial[0].excess_risk);

        let s = run_monte_carlo(&null_problem(6), &FilterSpec::gradient_flow(), tp(5.0), &MonteCarloSettings { trials: 8, ..settings }).unwrap();
        assert!(s.per_trial.iter().all(|r| r.excess_risk == 0.0));
        assert!(run_monte_carlo(&pr, &FilterSpec::ridge(), tp(5.0), &MonteCarloSettings { trials: 0, ..settings }).is_err());
    }

    #[test]
    fn monte_carlo_independent_of_parallelism() {
        let pr = problem(15, 0.5, 10);
        let base = MonteCarloSettings {
            n: 25,
            trials: 24,
            master_seed: 77,
            parallelism: 1,
            design: Design::Gaussian,
            b: 0.5,
            box_tol: 0.1,
        };
        let a = run_monte_carlo(&pr, &FilterSpec::gradient_flow(), tp(6.0), &base).unwrap();
        let b = run_monte_carlo(&pr, &FilterSpec::gradient_flow(), tp(6.0), &MonteCarloSettings { parallelism: 8, ..base }).unwrap();
        assert_eq!(a, b);
        assert!(a.per_trial.windows(2).all(|w| w[0].trial_id < w[1].trial_id));
    }

    #[test]
    fn trial_errors_carry_trial_id() {
        let err = run_trials(5, 0, 1, |id, _| {
            if id == 3 {
                Err(invalid("x", "boom"))
            } else {
                Ok(id)
            }
        })
        .unwrap_err();
        assert!(matches!(err, FsdError::Trial { trial_id: 3, .. }));
    }

    #[test]
    fn nearest_rank_quantiles() {
        let v = [5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(nearest_rank(&v, 0.5), 3.0);
        assert_eq!(nearest_rank(&v, 0.1), 1.0);
        assert_eq!(nearest_rank(&v, 0.9), 5.0);
        assert_eq!(nearest_rank(&[2.5], 0.5), 2.5);
        assert_eq!(nearest_rank(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.0);
    }

    fn all_filters() -> Vec<(FilterSpec, f64)> {
        vec![
            (FilterSpec::gradient_flow(), 5.0),
            (FilterSpec::ridge(), 5.0),
            (FilterSpec::gradient_descent(0.07).unwrap(), 9.0),
            (FilterSpec::pcr(0.5).unwrap(), 5.0),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn fit_is_linear_in_response(n in 2usize..30, p in 2usize..30, seed in 0u64..1000, c in -3.0f64..3.0) {
            let pr = problem(p, 1.0, seed);
            let b1 = draw_batch(&pr, n, seed, Design::Gaussian).unwrap();
            let b2 = draw_batch(&pr, n, seed + 1, Design::Gaussian).unwrap();
            let y2 = b2.response.clone();
            let sum = b1.with_response(&b1.response + &y2).unwrap();
            let scaled = b1.with_response(&b1.response * c).unwrap();
            let other = b1.with_response(y2).unwrap();
            for (f, t) in all_filters() {
                let t = tp(t);
                let f1 = fit_spectral(&b1, &f, t).unwrap().beta_hat;
                let f2 = fit_spectral(&other, &f, t).unwrap().beta_hat;
                let fs = fit_spectral(&sum, &f, t).unwrap().beta_hat;
                let fc = fit_spectral(&scaled, &f, t).unwrap().beta_hat;
                prop_assert!((&fs - (&f1 + &f2)).amax() <= 1e-10 * (1.0 + fs.amax()));
                prop_assert!((&fc - &f1 * c).amax() <= 1e-10 * (1.0 + fc.amax()));
            }
        }

        #[test]
        fn primal_and_dual_routes_agree(n in 2usize..40, p in 2usize..40, seed in 0u64..1000) {
            prop_assume!(n != p);
            let pr = problem(p, 0.7, seed);
            let b = draw_batch(&pr, n, seed, Design::Gaussian).unwrap();
            for (f, t) in all_filters() {
                let a = fit_spectral_with_route(&b, &f, tp(t), Route::Primal).unwrap().beta_hat;
                let d = fit_spectral_with_route(&b, &f, tp(t), Route::Dual).unwrap().beta_hat;
                prop_assert!((&a - &d).norm() <= 1e-8, "{} {}", f, (&a - &d).norm());
            }
        }

        #[test]
        fn risk_split_is_exact(p in 1usize..40, k in 1usize..40, seed in 0u64..1000) {
            let pr = problem(p, 1.0, seed);
            let mut rng = SeedKey::from(seed).rng(3);
            let est: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            let r = excess_risk(&est, &pr, k).unwrap();
            prop_assert_eq!(r.head + r.tail, r.total);
        }
    }
}
