//! JSON experiment configuration.
//!
//! Every field has a fixed default so a resolved config serializes to a
//! complete document; parsing that document yields the same config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, FsdError, Result};
use crate::experiments::{PlateauScenario, SingleIndexSetup, SobolevSetup, DEFAULT_GRID_POINTS};
use crate::filters::{FilterKind, FilterSpec, TuningParameter};
use crate::fsd::{check_b, default_box, BOX_LIMIT, DEFAULT_B};
use crate::simulate::Design;
use crate::spectra::{
    make_power_spectrum, make_sobolev_signal, RegressionProblem, SignalModel, SpectrumModel,
    DEFAULT_SOURCE_OFFSET,
};

/// Regression problem, inline or by reference to a problem document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Explicit {
        eigenvalues: Vec<f64>,
        coefficients: Vec<f64>,
        #[serde(default = "one_f64")]
        noise_std: f64,
    },
    /// Path to a problem document (see [`crate::spectra::ProblemDocument`]).
    File { path: PathBuf },
    /// `k` eigenvalues `σ`, the rest `ε`; signal `α*` on the first `k` coordinates.
    Plateau {
        k: usize,
        sigma: f64,
        epsilon: f64,
        p: usize,
        alpha_star: f64,
        #[serde(default = "one_f64")]
        noise_std: f64,
    },
    /// Multi-plateau spectrum with a signal on one shell.
    Multiplateau {
        d: usize,
        levels: usize,
        information_exponent: usize,
        #[serde(default = "one_f64")]
        magnitude: f64,
        #[serde(default = "one_f64")]
        noise_std: f64,
    },
    /// `σ_j = j^{-α}` with a source-condition signal of smoothness `s`.
    Sobolev {
        alpha: f64,
        s: f64,
        #[serde(default = "default_delta")]
        delta: f64,
        /// Truncation; `max(32N, 4096)` when absent.
        #[serde(default)]
        p: Option<usize>,
        #[serde(default = "one_f64")]
        noise_std: f64,
    },
}

impl ProblemSpec {
    /// Materializes the problem; `n` fixes the default Sobolev truncation.
    pub fn build(&self, n: Option<usize>) -> Result<RegressionProblem> {
        match self {
            ProblemSpec::Explicit { eigenvalues, coefficients, noise_std } => RegressionProblem::new(
                SpectrumModel::explicit(eigenvalues.clone())?,
                SignalModel::new(coefficients.clone()),
                *noise_std,
            ),
            ProblemSpec::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|source| FsdError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                RegressionProblem::from_json(&text)
            }
            ProblemSpec::Plateau { .. } => self.plateau(n.unwrap_or(1))?.problem(),
            ProblemSpec::Multiplateau { .. } => self.single_index(n.unwrap_or(1), DEFAULT_B)?.problem(),
            ProblemSpec::Sobolev { alpha, s, delta, p, noise_std } => {
                let p = p.unwrap_or_else(|| (32 * n.unwrap_or(1)).max(4096));
                let spectrum = make_power_spectrum(*alpha, p)?;
                let signal = make_sobolev_signal(&spectrum, *s, *delta)?;
                RegressionProblem::new(spectrum, signal, *noise_std)
            }
        }
    }

    pub fn plateau(&self, n: usize) -> Result<PlateauScenario> {
        match *self {
            ProblemSpec::Plateau { k, sigma, epsilon, p, alpha_star, noise_std } => Ok(PlateauScenario {
                k,
                sigma,
                epsilon,
                p,
                alpha_star,
                noise_std,
                n,
            }),
            _ => Err(kind_mismatch("plateau", self)),
        }
    }

    pub fn single_index(&self, n: usize, b: f64) -> Result<SingleIndexSetup> {
        match *self {
            ProblemSpec::Multiplateau { d, levels, information_exponent, magnitude, noise_std } => {
                Ok(SingleIndexSetup { d, levels, information_exponent, magnitude, noise_std, n, b })
            }
            _ => Err(kind_mismatch("multiplateau", self)),
        }
    }

    pub fn sobolev(&self, b: f64) -> Result<SobolevSetup> {
        match *self {
            ProblemSpec::Sobolev { alpha, s, delta, p, noise_std } => Ok(SobolevSetup { alpha, s, delta, noise_std, b, dim: p }),
            _ => Err(kind_mismatch("sobolev", self)),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ProblemSpec::Explicit { .. } => "explicit",
            ProblemSpec::File { .. } => "file",
            ProblemSpec::Plateau { .. } => "plateau",
            ProblemSpec::Multiplateau { .. } => "multiplateau",
            ProblemSpec::Sobolev { .. } => "sobolev",
        }
    }
}

fn kind_mismatch(expected: &str, spec: &ProblemSpec) -> FsdError {
    FsdError::Config(format!("this command needs a `{expected}` problem, got `{}`", spec.kind()))
}

/// Log-spaced tuning grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for `<command>.json` and `<command>.csv`; nothing is written when absent.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// What goes to stdout.
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    #[serde(default = "FilterSpec::gradient_flow")]
    pub filter: FilterSpec,
    /// Second filter for `compare`.
    #[serde(default = "FilterSpec::ridge")]
    pub compare_with: FilterSpec,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub t_grid: Option<GridSpec>,
    #[serde(default = "default_b")]
    pub b: f64,
    /// Concentration tolerance; the default rule `min(0.1, 1/(1 + ln t))` when absent.
    #[serde(default, rename = "box")]
    pub box_tol: Option<f64>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub n_grid: Option<Vec<usize>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "one_usize")]
    pub parallelism: usize,
    #[serde(default)]
    pub design: Design,
    /// Constant of the matching condition `slack ≤ c2 · rate`.
    #[serde(default = "one_f64")]
    pub c2: f64,
    /// Allowed `max/min` of the risk-to-rate ratio across `n_grid`.
    #[serde(default = "default_band")]
    pub band: f64,
    /// Also simulate risks in `sobolev`.
    #[serde(default)]
    pub monte_carlo: bool,
    #[serde(default)]
    pub output: OutputSpec,
}

fn one_f64() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_delta() -> f64 {
    DEFAULT_SOURCE_OFFSET
}
fn default_points() -> usize {
    DEFAULT_GRID_POINTS
}
fn default_b() -> f64 {
    DEFAULT_B
}
fn default_trials() -> usize {
    64
}
fn default_band() -> f64 {
    4.0
}

impl ExperimentConfig {
    /// Config with the given problem and every other field at its default.
    pub fn with_problem(problem: ProblemSpec) -> Self {
        Self {
            problem,
            filter: FilterSpec::gradient_flow(),
            compare_with: FilterSpec::ridge(),
            t: None,
            t_grid: None,
            b: DEFAULT_B,
            box_tol: None,
            n: None,
            n_grid: None,
            trials: default_trials(),
            master_seed: 0,
            parallelism: 1,
            design: Design::Gaussian,
            c2: 1.0,
            band: default_band(),
            monte_carlo: false,
            output: OutputSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_b(self.b)?;
        if let Some(t) = self.t {
            let t = TuningParameter::new(t)?;
            self.filter.at(t)?;
            self.compare_with.at(t)?;
        }
        if let Some(g) = self.t_grid {
            TuningParameter::new(g.lo)?;
            if !(g.hi >= g.lo && g.hi.is_finite()) {
                return Err(invalid("t_grid", format!("need lo ≤ hi, got [{}, {}]", g.lo, g.hi)));
            }
            if g.points == 0 {
                return Err(invalid("t_grid", "grid needs at least one point"));
            }
        }
        if let Some(b) = self.box_tol {
            if !(b > 0.0 && b < BOX_LIMIT) {
                return Err(invalid("box", format!("tolerance □ must lie in (0, 1/9), got {b}")));
            }
        }
        if self.n == Some(0) {
            return Err(invalid("n", "sample size must be at least 1"));
        }
        if let Some(g) = &self.n_grid {
            if g.is_empty() || g.contains(&0) {
                return Err(invalid("n_grid", "sample sizes must be a nonempty list of positive integers"));
            }
        }
        if self.trials == 0 {
            return Err(invalid("trials", "at least one trial is required"));
        }
        if self.parallelism == 0 {
            return Err(invalid("parallelism", "at least one thread is required"));
        }
        if !(self.c2 > 0.0 && self.c2.is_finite()) {
            return Err(invalid("c2", format!("matching constant must be positive, got {}", self.c2)));
        }
        if !(self.band >= 1.0 && self.band.is_finite()) {
            return Err(invalid("band", format!("ratio band must be ≥ 1, got {}", self.band)));
        }
        Ok(())
    }

    pub fn require_t(&self) -> Result<TuningParameter> {
        let t = self.t.ok_or_else(|| FsdError::Config("this command needs `t`".into()))?;
        TuningParameter::new(t)
    }

    pub fn require_n(&self) -> Result<usize> {
        self.n.ok_or_else(|| FsdError::Config("this command needs `n`".into()))
    }

    pub fn require_n_grid(&self) -> Result<&[usize]> {
        self.n_grid
            .as_deref()
            .ok_or_else(|| FsdError::Config("this command needs `n_grid`".into()))
    }

    pub fn require_t_grid(&self) -> Result<GridSpec> {
        self.t_grid.ok_or_else(|| FsdError::Config("this command needs `t_grid`".into()))
    }

    /// The configured `□`, or the default rule at `t`.
    pub fn resolved_box(&self, t: TuningParameter) -> f64 {
        self.box_tol.unwrap_or_else(|| default_box(t))
    }

    /// Whether the filter takes integer `t` (gradient descent).
    pub fn integer_t(&self) -> bool {
        matches!(self.filter.kind, FilterKind::GradientDescent { .. })
    }
}

/// Parses and validates a config document.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| FsdError::Config(format!("config: {e}")))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| FsdError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text).map_err(|e| match e {
        FsdError::Config(m) => FsdError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Inline JSON when the argument starts with `{`, a file path otherwise.
pub fn parse_config(path_or_inline: &str) -> Result<ExperimentConfig> {
    if path_or_inline.trim_start().starts_with('{') {
        parse_config_str(path_or_inline)
    } else {
        load_config(Path::new(path_or_inline))
    }
}
