//! Deterministic feature-space-decomposition quantities.
//!
//! The feature space is split at the estimation dimension `k*` into a head
//! `J* = {1, …, k*}` where estimation happens and a tail that only absorbs
//! noise. Everything here works in the eigenbasis of `Σ`, so projections are
//! index ranges and operator norms of diagonal products are maxima over
//! entries.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{invalid, FsdError, Result};
use crate::filters::{FilterSpec, TuningParameter};
use crate::linalg::{scale_symmetric, symmetric_op_norm, SymmetricEigen};
use crate::spectra::{RegressionProblem, SpectrumModel};

/// Default split constant `b`.
pub const DEFAULT_B: f64 = 0.5;

/// Upper limit (exclusive) on the concentration tolerance `□`.
pub const BOX_LIMIT: f64 = 1.0 / 9.0;

/// Default tolerance rule `□ = min(0.1, 1/log(e·t))`.
pub fn default_box(t: TuningParameter) -> f64 {
    0.1f64.min(1.0 / (1.0 + t.value().ln()))
}

pub(crate) fn check_b(b: f64) -> Result<()> {
    if b > 0.0 && b < 1.0 {
        Ok(())
    } else {
        Err(invalid("b", format!("split constant must satisfy 0 < b < 1, got {b}")))
    }
}

pub(crate) fn check_box(box_tol: f64) -> Result<()> {
    if box_tol > 0.0 && box_tol < BOX_LIMIT {
        Ok(())
    } else {
        Err(invalid("box", format!("tolerance □ must lie in (0, 1/9), got {box_tol}")))
    }
}

/// `k* = min{k ∈ [p] : σ_{k+1} ≤ b/t}` with `σ_{p+1} = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimationDimension {
    pub k_star: usize,
    pub threshold: f64,
    pub b: f64,
    pub t: f64,
    /// `σ_1 ≤ b/t`: the minimum over `[p]` is forced to 1 although no
    /// eigenvalue clears the threshold.
    pub degenerate: bool,
}

impl EstimationDimension {
    /// Number of head eigenvalues strictly above the threshold.
    pub fn certified_head(&self) -> usize {
        if self.degenerate {
            0
        } else {
            self.k_star
        }
    }
}

pub fn estimation_dimension(spectrum: &SpectrumModel, t: TuningParameter, b: f64) -> Result<EstimationDimension> {
    check_b(b)?;
    let threshold = b * t.inverse();
    let above = spectrum.eigenvalues().partition_point(|&s| s > threshold);
    Ok(EstimationDimension {
        k_star: above.max(1),
        threshold,
        b,
        t: t.value(),
        degenerate: above == 0,
    })
}

/// Ridge-specific dimension `k** = min{k : σ_{k+1}N ≤ b(Tr Σ_{k+1:p} + N/t)}`, reported only.
pub fn ridge_estimation_dimension(spectrum: &SpectrumModel, t: TuningParameter, b: f64, n: usize) -> Result<usize> {
    check_b(b)?;
    let e = spectrum.eigenvalues();
    let p = e.len();
    let n = n as f64;
    let mut suffix = vec![0.0; p + 1];
    for j in (0..p).rev() {
        suffix[j] = suffix[j + 1] + e[j];
    }
    // Tr(Σ_{k+1:p}) = suffix[k] with 0-based storage.
    Ok((1..=p)
        .find(|&k| spectrum.sigma(k + 1) * n <= b * (suffix[k] + n * t.inverse()))
        .unwrap_or(p))
}

/// `Tr(Σ(Σ + t⁻¹I)⁻¹)`.
pub fn effective_rank(spectrum: &SpectrumModel, t: TuningParameter) -> f64 {
    let t_inv = t.inverse();
    spectrum.eigenvalues().iter().map(|&s| s / (s + t_inv)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveRankBracket {
    pub lower: f64,
    pub upper: f64,
    pub effective_rank: f64,
    pub k_star: usize,
    pub tail_trace: f64,
}

impl EffectiveRankBracket {
    pub fn contains(&self) -> bool {
        let slack = 1e-12 * self.upper.max(1.0);
        self.lower <= self.effective_rank + slack && self.effective_rank <= self.upper + slack
    }
}

/// `bk*/(1+b) + t·Tr(Σ_tail)/(1+b) ≤ eff_rank ≤ k* + t·Tr(Σ_tail)`.
///
/// For a degenerate split the head is empty and the tail is the whole spectrum.
pub fn effective_rank_bracket(spectrum: &SpectrumModel, t: TuningParameter, b: f64) -> Result<EffectiveRankBracket> {
    let dim = estimation_dimension(spectrum, t, b)?;
    let head = dim.certified_head();
    let tail_trace: f64 = spectrum.eigenvalues()[head..].iter().sum();
    let tv = t.value();
    Ok(EffectiveRankBracket {
        lower: (b * head as f64 + tv * tail_trace) / (1.0 + b),
        upper: head as f64 + tv * tail_trace,
        effective_rank: effective_rank(spectrum, t),
        k_star: dim.k_star,
        tail_trace,
    })
}

/// The four terms of the rate `r(V_J*, V_J*^c)` plus the slack term of the upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBreakdown {
    pub k_star: usize,
    pub threshold: f64,
    pub t: f64,
    pub box_tol: f64,
    /// `‖Σ_J^{1/2} ψ_t(Σ) β*_J‖₂`
    pub bias_head: f64,
    /// `σ_ξ √(|J|/N)`
    pub var_head: f64,
    /// `‖Σ_{J^c}^{1/2} β*_{J^c}‖₂`
    pub align_tail: f64,
    /// `σ_ξ t √(Tr(Σ_{J^c}²)/N)`
    pub var_tail: f64,
    /// `(□/t) ‖Σ_J^{-1/2} β*_J‖₂`
    pub slack: f64,
    pub total: f64,
}

pub fn rate_breakdown(
    problem: &RegressionProblem,
    filter: &FilterSpec,
    t: TuningParameter,
    b: f64,
    n: usize,
    box_tol: f64,
) -> Result<RateBreakdown> {
    if n == 0 {
        return Err(invalid("n", "sample size must be at least 1"));
    }
    check_box(box_tol)?;
    let dim = estimation_dimension(&problem.spectrum, t, b)?;
    let f = filter.at(t)?;
    let k = dim.k_star;
    let sigma = problem.eigenvalues();
    let beta = problem.beta();
    let nf = n as f64;
    let tv = t.value();

    let mut bias_sq = 0.0;
    let mut inv_sq = 0.0;
    for (j, (&s, &c)) in sigma[..k].iter().zip(&beta[..k]).enumerate() {
        let r = f.psi(s);
        bias_sq += s * r * r * c * c;
        if c != 0.0 {
            if s == 0.0 {
                return Err(FsdError::InfiniteHeadNorm { index: j + 1, value: c });
            }
            inv_sq += c * c / s;
        }
    }
    let align_sq: f64 = sigma[k..].iter().zip(&beta[k..]).map(|(s, c)| s * c * c).sum();
    let tail_sq_trace: f64 = sigma[k..].iter().map(|s| s * s).sum();

    let bias_head = bias_sq.sqrt();
    let var_head = problem.noise_std * (k as f64 / nf).sqrt();
    let align_tail = align_sq.sqrt();
    let var_tail = problem.noise_std * tv * (tail_sq_trace / nf).sqrt();
    Ok(RateBreakdown {
        k_star: k,
        threshold: dim.threshold,
        t: tv,
        box_tol,
        bias_head,
        var_head,
        align_tail,
        var_tail,
        slack: box_tol / tv * inv_sq.sqrt(),
        total: bias_head + var_head + align_tail + var_tail,
    })
}

/// Whether the slack is dominated by the rate: `slack ≤ c2 · total`.
pub fn matching_condition(
    problem: &RegressionProblem,
    filter: &FilterSpec,
    t: TuningParameter,
    b: f64,
    n: usize,
    box_tol: f64,
    c2: f64,
) -> Result<bool> {
    if !(c2 > 0.0 && c2.is_finite()) {
        return Err(invalid("c2", format!("matching constant must be positive, got {c2}")));
    }
    let r = rate_breakdown(problem, filter, t, b, n, box_tol)?;
    Ok(r.slack <= c2 * r.total)
}

/// `‖Σ_t^{-1/2}(Σ̂ - Σ)Σ_t^{-1/2}‖_op` against the tolerance `□`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaStatistic {
    pub value: f64,
    pub box_tol: f64,
    pub holds: bool,
}

pub fn omega_statistic(
    sample_cov: &DMatrix<f64>,
    spectrum: &SpectrumModel,
    t: TuningParameter,
    box_tol: f64,
) -> Result<OmegaStatistic> {
    omega_statistic_diag(sample_cov, spectrum.eigenvalues(), t, box_tol)
}

/// As [`omega_statistic`] for a diagonal `Σ = diag(sigma)` in any coordinate order.
pub fn omega_statistic_diag(
    sample_cov: &DMatrix<f64>,
    sigma: &[f64],
    t: TuningParameter,
    box_tol: f64,
) -> Result<OmegaStatistic> {
    check_square(sample_cov, sigma.len())?;
    let t_inv = t.inverse();
    let scale: Vec<f64> = sigma.iter().map(|s| 1.0 / (s + t_inv).sqrt()).collect();
    let mut diff = sample_cov.clone();
    for (j, s) in sigma.iter().enumerate() {
        diff[(j, j)] -= s;
    }
    let value = symmetric_op_norm(scale_symmetric(&diff, &scale))?;
    Ok(OmegaStatistic {
        value,
        box_tol,
        holds: value <= box_tol,
    })
}

fn check_square(m: &DMatrix<f64>, p: usize) -> Result<()> {
    if m.nrows() != p || m.ncols() != p {
        return Err(FsdError::DimensionMismatch {
            context: "sample covariance vs spectrum dimension",
            expected: p,
            actual: if m.nrows() != p { m.nrows() } else { m.ncols() },
        });
    }
    Ok(())
}

/// Operator-norm quantities that are deterministic consequences of the
/// concentration event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaConsequences {
    /// `‖Σ̂‖_op`
    pub sample_op_norm: f64,
    /// `4(σ_1 + t⁻¹)`
    pub sample_op_bound: f64,
    /// `‖Σ_t^{1/2} Σ̂_t^{-1/2}‖_op²`
    pub change_of_norm: f64,
}

impl OmegaConsequences {
    pub const CHANGE_OF_NORM_BOUND: f64 = 2.0;

    pub fn sample_op_holds(&self) -> bool {
        self.sample_op_norm <= self.sample_op_bound
    }

    pub fn change_of_norm_holds(&self) -> bool {
        self.change_of_norm <= Self::CHANGE_OF_NORM_BOUND
    }
}

pub fn omega_consequences(
    sample_cov: &DMatrix<f64>,
    spectrum: &SpectrumModel,
    t: TuningParameter,
) -> Result<OmegaConsequences> {
    let sigma = spectrum.eigenvalues();
    check_square(sample_cov, sigma.len())?;
    let t_inv = t.inverse();
    let shifted = sample_cov + DMatrix::identity(sigma.len(), sigma.len()) * t_inv;
    let eig = SymmetricEigen::new(shifted)?;
    let inv = eig.apply(|l| 1.0 / l);
    let scale: Vec<f64> = sigma.iter().map(|s| (s + t_inv).sqrt()).collect();
    // ‖Σ_t^{1/2} Σ̂_t^{-1/2}‖² = λ_max(Σ_t^{1/2} Σ̂_t^{-1} Σ_t^{1/2}).
    let change_of_norm = SymmetricEigen::new(scale_symmetric(&inv, &scale))?.max();
    Ok(OmegaConsequences {
        sample_op_norm: eig.max() - t_inv,
        sample_op_bound: 4.0 * (spectrum.sigma(1) + t_inv),
        change_of_norm,
    })
}

/// PCR spectral-gap margin `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PcrTheta {
    pub theta: f64,
    pub k_star: usize,
    /// `b/t - (σ_{k*+1} + □(σ_{k*+1} + t⁻¹))`
    pub lower_margin: f64,
    /// `σ_{k*} - □(σ_{k*} + t⁻¹) - b/t`
    pub upper_margin: f64,
}

impl PcrTheta {
    pub fn applicable(&self) -> bool {
        self.theta > 0.0
    }
}

pub fn pcr_theta(spectrum: &SpectrumModel, t: TuningParameter, b: f64, box_tol: f64) -> Result<PcrTheta> {
    if !(0.0..BOX_LIMIT).contains(&box_tol) {
        return Err(invalid("box", format!("tolerance □ must lie in [0, 1/9), got {box_tol}")));
    }
    let dim = estimation_dimension(spectrum, t, b)?;
    let t_inv = t.inverse();
    let head = spectrum.sigma(dim.k_star);
    let next = spectrum.sigma(dim.k_star + 1);
    let lower_margin = dim.threshold - (next + box_tol * (next + t_inv));
    let upper_margin = (head - box_tol * (head + t_inv)) - dim.threshold;
    Ok(PcrTheta {
        theta: lower_margin.min(upper_margin),
        k_star: dim.k_star,
        lower_margin,
        upper_margin,
    })
}

/// Measured operator norms of the diagonal comparisons between `Σ_t` and the
/// head/tail blocks, with any violated bound listed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormBoundsReport {
    pub k_star: usize,
    /// `‖Σ^{1/2} Σ_t^{-1/2}‖`
    pub full: f64,
    /// `‖Σ_J^{1/2} Σ_t^{-1/2}‖`
    pub head: f64,
    /// `‖Σ_{J^c}^{1/2} Σ_t^{-1/2}‖`, bounded by `√(b/(1+b))`
    pub tail: f64,
    pub tail_bound: f64,
    /// `‖Σ_J^{-1/2} Σ_t^{1/2}‖`, bounded by `√((1+b)/b)`
    pub head_inverse: f64,
    pub head_inverse_bound: f64,
    /// Smallest head eigenvalue `σ_{k*}`; must dominate `b/t`.
    pub head_floor: f64,
    pub threshold: f64,
    pub violations: Vec<String>,
}

pub fn deterministic_norm_bounds(spectrum: &SpectrumModel, t: TuningParameter, b: f64) -> Result<NormBoundsReport> {
    let dim = estimation_dimension(spectrum, t, b)?;
    let head_len = dim.certified_head();
    let t_inv = t.inverse();
    let sigma = spectrum.eigenvalues();
    let ratio = |s: f64| (s / (s + t_inv)).sqrt();
    let max_of = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, f64::max);

    let full = max_of(&mut sigma.iter().map(|&s| ratio(s)));
    let head = max_of(&mut sigma[..head_len].iter().map(|&s| ratio(s)));
    let tail = max_of(&mut sigma[head_len..].iter().map(|&s| ratio(s)));
    let head_inverse = max_of(&mut sigma[..head_len].iter().map(|&s| ((s + t_inv) / s).sqrt()));
    let head_floor = if head_len > 0 { sigma[head_len - 1] } else { f64::INFINITY };

    let tail_bound = (b / (1.0 + b)).sqrt();
    let head_inverse_bound = ((1.0 + b) / b).sqrt();
    let tol = 1e-12;
    let mut violations = Vec::new();
    if head > full * (1.0 + tol) {
        violations.push(format!("head ratio {head} exceeds full ratio {full}"));
    }
    if full > 1.0 + tol {
        violations.push(format!("full ratio {full} exceeds 1"));
    }
    if tail > tail_bound * (1.0 + tol) {
        violations.push(format!("tail ratio {tail} exceeds √(b/(1+b)) = {tail_bound}"));
    }
    if head_inverse > head_inverse_bound * (1.0 + tol) {
        violations.push(format!(
            "inverse head ratio {head_inverse} exceeds √((1+b)/b) = {head_inverse_bound}"
        ));
    }
    if head_len > 0 && head_floor < dim.threshold {
        violations.push(format!("σ_k* = {head_floor} below threshold {}", dim.threshold));
    }
    Ok(NormBoundsReport {
        k_star: dim.k_star,
        full,
        head,
        tail,
        tail_bound,
        head_inverse,
        head_inverse_bound,
        head_floor,
        threshold: dim.threshold,
        violations,
    })
}
