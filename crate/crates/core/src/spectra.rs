//! Covariance spectra and signal vectors, expressed in the eigenbasis of the
//! population covariance (taken as the standard basis).
//!
//! All indices in the public API are 1-based when they refer to eigenvalue
//! positions (`σ_1 ≥ σ_2 ≥ …`) and 0-based when they index a `Vec`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, FsdError, Result};

/// Largest ambient dimension a multi-plateau spectrum may expand to by default.
pub const MAX_DIMENSION: usize = 1 << 24;

/// Default offset from the boundary of the Hölder source class.
pub const DEFAULT_SOURCE_OFFSET: f64 = 0.01;

/// Structured family a spectrum was generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumFamily {
    Explicit,
    Power {
        alpha: f64,
    },
    Plateau {
        k: usize,
        sigma: f64,
        epsilon: f64,
    },
    Multiplateau {
        d: usize,
        levels: usize,
        /// Cumulative shell sizes `M_0, …, M_L`.
        boundaries: Vec<usize>,
    },
}

/// Nonincreasing eigenvalues `σ_1 ≥ … ≥ σ_p ≥ 0` with `σ_1 ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumModel {
    eigenvalues: Vec<f64>,
    family: SpectrumFamily,
}

impl SpectrumModel {
    /// Validates an explicit eigenvalue list.
    pub fn explicit(eigenvalues: Vec<f64>) -> Result<Self> {
        Self::with_family(eigenvalues, SpectrumFamily::Explicit)
    }

    pub(crate) fn with_family(eigenvalues: Vec<f64>, family: SpectrumFamily) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(FsdError::InvalidSpectrum("spectrum must have p ≥ 1 entries".into()));
        }
        for (j, &v) in eigenvalues.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(FsdError::InvalidSpectrum(format!(
                    "eigenvalue σ_{} = {v} is not a finite nonnegative number",
                    j + 1
                )));
            }
        }
        if let Some(j) = eigenvalues.windows(2).position(|w| w[1] > w[0]) {
            return Err(FsdError::InvalidSpectrum(format!(
                "eigenvalues must be nonincreasing: σ_{} = {} < σ_{} = {}",
                j + 1,
                eigenvalues[j],
                j + 2,
                eigenvalues[j + 1]
            )));
        }
        if eigenvalues[0] > 1.0 {
            return Err(FsdError::InvalidSpectrum(format!(
                "operator norm σ_1 = {} exceeds 1",
                eigenvalues[0]
            )));
        }
        Ok(Self { eigenvalues, family })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn family(&self) -> &SpectrumFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `σ_j` with the convention `σ_{p+1} = 0` (1-based).
    pub fn sigma(&self, j: usize) -> f64 {
        debug_assert!(j >= 1);
        self.eigenvalues.get(j - 1).copied().unwrap_or(0.0)
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Shell boundaries `M_0..=M_L` for multi-plateau spectra.
    pub fn shell_boundaries(&self) -> Option<&[usize]> {
        match &self.family {
            SpectrumFamily::Multiplateau { boundaries, .. } => Some(boundaries),
            _ => None,
        }
    }
}

/// `σ_j = j^{-α}` for `j = 1..=p`.
pub fn make_power_spectrum(alpha: f64, p: usize) -> Result<SpectrumModel> {
    if !(alpha.is_finite() && alpha > 1.0) {
        return Err(invalid("alpha", format!("power decay needs α > 1, got {alpha}")));
    }
    if p == 0 {
        return Err(invalid("p", "dimension must be at least 1"));
    }
    let eigenvalues = (1..=p).map(|j| (j as f64).powf(-alpha)).collect();
    SpectrumModel::with_family(eigenvalues, SpectrumFamily::Power { alpha })
}

/// `k` eigenvalues equal to `sigma` followed by `p - k` equal to `epsilon`.
pub fn make_plateau_spectrum(k: usize, sigma: f64, epsilon: f64, p: usize) -> Result<SpectrumModel> {
    if !(epsilon > 0.0 && epsilon < sigma && sigma <= 1.0) {
        return Err(invalid(
            "epsilon",
            format!("plateau model needs 0 < ε < σ ≤ 1, got σ = {sigma}, ε = {epsilon}"),
        ));
    }
    if k == 0 || k >= p {
        return Err(invalid("k", format!("plateau model needs 1 ≤ k < p, got k = {k}, p = {p}")));
    }
    let mut eigenvalues = vec![sigma; k];
    eigenvalues.resize(p, epsilon);
    SpectrumModel::with_family(eigenvalues, SpectrumFamily::Plateau { k, sigma, epsilon })
}

/// Multi-plateau spectrum with `σ_j = d^{-ℓ}` on shell `ℓ`, shells of size `C(d+ℓ-1, ℓ)`.
pub fn make_multiplateau_spectrum(d: usize, levels: usize) -> Result<SpectrumModel> {
    make_multiplateau_spectrum_with_limit(d, levels, MAX_DIMENSION)
}

pub fn make_multiplateau_spectrum_with_limit(
    d: usize,
    levels: usize,
    max_dim: usize,
) -> Result<SpectrumModel> {
    if d < 2 {
        return Err(invalid("d", format!("multi-plateau spectrum needs d ≥ 2, got {d}")));
    }
    if levels < 1 {
        return Err(invalid("levels", "multi-plateau spectrum needs L ≥ 1"));
    }
    let mut boundaries = Vec::with_capacity(levels + 1);
    let mut total: usize = 0;
    for level in 0..=levels {
        let size = binomial(d + level - 1, level)
            .and_then(|c| usize::try_from(c).ok())
            .ok_or_else(|| overflow(d, levels, max_dim))?;
        total = total
            .checked_add(size)
            .filter(|&m| m <= max_dim)
            .ok_or_else(|| overflow(d, levels, max_dim))?;
        boundaries.push(total);
    }
    let mut eigenvalues = Vec::with_capacity(total);
    let mut start = 0;
    for (level, &end) in boundaries.iter().enumerate() {
        let value = (d as f64).powi(-(level as i32));
        eigenvalues.extend(std::iter::repeat(value).take(end - start));
        start = end;
    }
    SpectrumModel::with_family(
        eigenvalues,
        SpectrumFamily::Multiplateau {
            d,
            levels,
            boundaries,
        },
    )
}

fn overflow(d: usize, levels: usize, max_dim: usize) -> FsdError {
    invalid(
        "levels",
        format!("multi-plateau spectrum (d = {d}, L = {levels}) exceeds the maximum dimension {max_dim}"),
    )
}

/// Exact `C(n, r)` with overflow detection.
fn binomial(n: usize, r: usize) -> Option<u128> {
    let r = r.min(n.saturating_sub(r));
    let mut acc: u128 = 1;
    for i in 0..r {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Coefficients `⟨β*, e_j⟩` of the true parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    pub coefficients: Vec<f64>,
    /// Cached `‖Σ^{1/2}β*‖₂` for the spectrum the signal was built against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_cache: Option<f64>,
}

impl SignalModel {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self {
            coefficients,
            norm_cache: None,
        }
    }

    fn paired(coefficients: Vec<f64>, spectrum: &SpectrumModel) -> Self {
        let norm = weighted_norm(spectrum.eigenvalues(), &coefficients);
        Self {
            coefficients,
            norm_cache: Some(norm),
        }
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }
}

/// `‖Σ^{1/2}v‖₂` for diagonal `Σ`.
pub fn weighted_norm(eigenvalues: &[f64], v: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .zip(v)
        .map(|(s, c)| s * c * c)
        .sum::<f64>()
        .sqrt()
}

/// Signal at distance `δ` inside the Hölder source class of smoothness `s`:
/// `β* = Σ^{(s-1)/2} w` with `w_j = j^{-1/2-δ}`.
pub fn make_sobolev_signal(spectrum: &SpectrumModel, s: f64, delta: f64) -> Result<SignalModel> {
    let alpha = match spectrum.family() {
        SpectrumFamily::Power { alpha } => *alpha,
        other => {
            return Err(FsdError::FamilyMismatch(format!(
                "Sobolev signal needs a power-decay spectrum, got {other:?}"
            )))
        }
    };
    if !(s.is_finite() && s >= 1.0) {
        return Err(invalid("s", format!("source smoothness needs s ≥ 1, got {s}")));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid("delta", format!("source offset needs δ > 0, got {delta}")));
    }
    let exponent = -alpha * (s - 1.0) / 2.0 - 0.5 - delta;
    let coefficients = (1..=spectrum.dim())
        .map(|j| (j as f64).powf(exponent))
        .collect();
    Ok(SignalModel::paired(coefficients, spectrum))
}

/// Closed-form bound `1 + 1/(2δ)` on the squared source norm of [`make_sobolev_signal`].
pub fn sobolev_source_norm_bound(delta: f64) -> f64 {
    1.0 + 1.0 / (2.0 * delta)
}

/// Signal equal to `magnitude` on shell `ℓ₀` of a multi-plateau spectrum, zero elsewhere.
pub fn make_shell_signal(spectrum: &SpectrumModel, shell: usize, magnitude: f64) -> Result<SignalModel> {
    let boundaries = spectrum.shell_boundaries().ok_or_else(|| {
        FsdError::FamilyMismatch("shell signal needs a multi-plateau spectrum".into())
    })?;
    let levels = boundaries.len() - 1;
    if shell < 1 || shell > levels {
        return Err(invalid(
            "shell",
            format!("shell index must lie in 1..={levels}, got {shell}"),
        ));
    }
    let (lo, hi) = (boundaries[shell - 1], boundaries[shell]);
    let mut coefficients = vec![0.0; spectrum.dim()];
    coefficients[lo..hi].iter_mut().for_each(|c| *c = magnitude);
    Ok(SignalModel::paired(coefficients, spectrum))
}

/// Signal equal to `magnitude` on the first `count` coordinates (the plateau head).
pub fn make_head_signal(spectrum: &SpectrumModel, count: usize, magnitude: f64) -> Result<SignalModel> {
    if count == 0 || count > spectrum.dim() {
        return Err(invalid(
            "count",
            format!("head size must lie in 1..={}, got {count}", spectrum.dim()),
        ));
    }
    let mut coefficients = vec![0.0; spectrum.dim()];
    coefficients[..count].iter_mut().for_each(|c| *c = magnitude);
    Ok(SignalModel::paired(coefficients, spectrum))
}

/// The triple `(Σ, β*, σ_ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub spectrum: SpectrumModel,
    pub signal: SignalModel,
    pub noise_std: f64,
}

impl RegressionProblem {
    pub fn new(spectrum: SpectrumModel, signal: SignalModel, noise_std: f64) -> Result<Self> {
        if signal.dim() != spectrum.dim() {
            return Err(FsdError::DimensionMismatch {
                context: "signal length vs spectrum dimension",
                expected: spectrum.dim(),
                actual: signal.dim(),
            });
        }
        if let Some(j) = signal.coefficients.iter().position(|c| !c.is_finite()) {
            return Err(invalid("coefficients", format!("coefficient {} is not finite", j + 1)));
        }
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(invalid("noise_std", format!("σ_ξ must be finite and ≥ 0, got {noise_std}")));
        }
        Ok(Self {
            spectrum,
            signal,
            noise_std,
        })
    }

    pub fn dim(&self) -> usize {
        self.spectrum.dim()
    }

    pub fn beta(&self) -> &[f64] {
        &self.signal.coefficients
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.spectrum.eigenvalues()
    }

    /// `‖Σ^{1/2}β*‖₂`, the excess risk (square root) of the null estimator.
    pub fn signal_norm(&self) -> f64 {
        weighted_norm(self.eigenvalues(), self.beta())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ProblemDocument::from(self)).expect("problem serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProblemDocument =
            serde_json::from_str(text).map_err(|e| FsdError::Config(format!("problem document: {e}")))?;
        doc.try_into()
    }
}

/// On-disk form of a [`RegressionProblem`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub eigenvalues: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub noise_std: f64,
    #[serde(default = "explicit_family")]
    pub family: SpectrumFamily,
}

fn explicit_family() -> SpectrumFamily {
    SpectrumFamily::Explicit
}

impl From<&RegressionProblem> for ProblemDocument {
    fn from(problem: &RegressionProblem) -> Self {
        Self {
            eigenvalues: problem.spectrum.eigenvalues.clone(),
            coefficients: problem.signal.coefficients.clone(),
            noise_std: problem.noise_std,
            family: problem.spectrum.family.clone(),
        }
    }
}

impl TryFrom<ProblemDocument> for RegressionProblem {
    type Error = FsdError;

    fn try_from(doc: ProblemDocument) -> Result<Self> {
        if let SpectrumFamily::Multiplateau { boundaries, .. } = &doc.family {
            let ok = boundaries.windows(2).all(|w| w[0] < w[1])
                && boundaries.last() == Some(&doc.eigenvalues.len());
            if !ok {
                return Err(FsdError::InvalidSpectrum(
                    "multi-plateau boundaries must increase and end at p".into(),
                ));
            }
        }
        let spectrum = SpectrumModel::with_family(doc.eigenvalues, doc.family)?;
        let signal = SignalModel::paired(doc.coefficients, &spectrum);
        RegressionProblem::new(spectrum, signal, doc.noise_std)
    }
}
