//! Filter functions `φ_t` and residuals `ψ_t(x) = 1 - xφ_t(x)` of the
//! supported spectral methods, together with their sandwich constants
//! `c₁/(x + t⁻¹) ≤ φ_t(x) ≤ C₁/(x + t⁻¹)`.
//!
//! Heavy-ball and Nesterov acceleration are not offered: their filters have no
//! closed form. The qualification order of each family is documented on
//! [`FilterKind`] but not computed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, FsdError, Result};

/// Right end of the interval on which the sandwich bounds are certified.
pub const SANDWICH_MAX_X: f64 = 8.0;

/// Supported filter families.
///
/// Qualification: ridge saturates at order 1 (source smoothness 2 in the
/// excess-risk exponent); gradient flow, gradient descent and PCR have
/// infinite qualification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterKind {
    GradientFlow,
    Ridge,
    /// Gradient descent with step size `eta`, `t` counts iterations.
    GradientDescent { eta: f64 },
    /// Principal component regression keeping eigenvalues `≥ b/t`.
    Pcr { b: f64 },
}

/// A filter family with its documented sandwich constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub kind: FilterKind,
    /// Lower sandwich constant; `None` when no lower bound is certified (PCR).
    pub c1: Option<f64>,
    /// Upper sandwich constant.
    pub c1_upper: f64,
    /// Interval of `x` on which the sandwich is certified.
    pub sandwich_domain: (f64, f64),
}

impl FilterSpec {
    pub fn gradient_flow() -> Self {
        Self {
            kind: FilterKind::GradientFlow,
            c1: Some(1.0),
            c1_upper: 2.0,
            sandwich_domain: (0.0, f64::INFINITY),
        }
    }

    pub fn ridge() -> Self {
        Self {
            kind: FilterKind::Ridge,
            c1: Some(1.0),
            c1_upper: 1.0,
            sandwich_domain: (0.0, f64::INFINITY),
        }
    }

    pub fn gradient_descent(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 0.125) {
            return Err(invalid(
                "eta",
                format!("gradient descent step size must satisfy 0 < η < 1/8, got {eta}"),
            ));
        }
        Ok(Self {
            kind: FilterKind::GradientDescent { eta },
            c1: Some(eta / 2.0),
            c1_upper: 2.0,
            sandwich_domain: (0.0, SANDWICH_MAX_X),
        })
    }

    pub fn pcr(b: f64) -> Result<Self> {
        if !(b > 0.0 && b < 1.0) {
            return Err(invalid("b", format!("PCR threshold must satisfy 0 < b < 1, got {b}")));
        }
        Ok(Self {
            kind: FilterKind::Pcr { b },
            c1: None,
            c1_upper: (b + 1.0) / b,
            sandwich_domain: (0.0, f64::INFINITY),
        })
    }

    /// Binds the filter to a tuning parameter, validating `t` for the family.
    pub fn at(&self, t: TuningParameter) -> Result<BoundFilter> {
        let t = t.value();
        let steps = match self.kind {
            FilterKind::GradientDescent { .. } => {
                if t.fract() != 0.0 || t > i32::MAX as f64 {
                    return Err(FsdError::NonIntegerSteps(t));
                }
                t as i32
            }
            _ => 0,
        };
        Ok(BoundFilter {
            kind: self.kind,
            t,
            steps,
        })
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FilterKind::GradientFlow => write!(f, "gf"),
            FilterKind::Ridge => write!(f, "ridge"),
            FilterKind::GradientDescent { eta } => write!(f, "gd:{eta}"),
            FilterKind::Pcr { b } => write!(f, "pcr:{b}"),
        }
    }
}

impl FromStr for FilterSpec {
    type Err = FsdError;

    /// Parses `gf`, `ridge`, `gd:<eta>` or `pcr:<b>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let number = |name: &'static str| -> Result<f64> {
            let a = arg.ok_or_else(|| invalid(name, format!("filter `{s}` needs a parameter")))?;
            a.trim()
                .parse::<f64>()
                .map_err(|_| invalid(name, format!("cannot parse `{a}` as a number")))
        };
        match (head.to_ascii_lowercase().as_str(), arg) {
            ("gf", None) => Ok(Self::gradient_flow()),
            ("ridge", None) => Ok(Self::ridge()),
            ("gd", _) => Self::gradient_descent(number("eta")?),
            ("pcr", _) => Self::pcr(number("b")?),
            _ => Err(invalid(
                "filter",
                format!("unknown filter `{s}` (expected gf | ridge | gd:<eta> | pcr:<b>)"),
            )),
        }
    }
}

impl Serialize for FilterSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FilterSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The tuning parameter `t ≥ 1` (inverse regularization strength).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct TuningParameter(f64);

impl TuningParameter {
    pub fn new(t: f64) -> Result<Self> {
        if t.is_finite() && t >= 1.0 {
            Ok(Self(t))
        } else {
            Err(invalid("t", format!("tuning parameter must be finite and ≥ 1, got {t}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn inverse(self) -> f64 {
        1.0 / self.0
    }
}

/// A filter evaluated at a fixed, validated `t`.
#[derive(Debug, Clone, Copy)]
pub struct BoundFilter {
    kind: FilterKind,
    t: f64,
    steps: i32,
}

impl BoundFilter {
    pub fn t(&self) -> f64 {
        self.t
    }

    /// `φ_t(x)`; negative inputs (roundoff from an eigensolver) are treated as 0.
    pub fn phi(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        let t = self.t;
        match self.kind {
            FilterKind::GradientFlow => {
                if x == 0.0 {
                    t
                } else {
                    -(-t * x).exp_m1() / x
                }
            }
            FilterKind::Ridge => 1.0 / (x + 1.0 / t),
            FilterKind::GradientDescent { eta } => {
                if x == 0.0 {
                    eta * t
                } else if eta * x < 1.0 {
                    -(t * (-eta * x).ln_1p()).exp_m1() / x
                } else {
                    (1.0 - (1.0 - eta * x).powi(self.steps)) / x
                }
            }
            FilterKind::Pcr { b } => {
                if x > 0.0 && x >= b / t {
                    1.0 / x
                } else {
                    0.0
                }
            }
        }
    }

    /// `ψ_t(x) = 1 - xφ_t(x)`.
    pub fn psi(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        let t = self.t;
        match self.kind {
            FilterKind::GradientFlow => (-t * x).exp(),
            FilterKind::Ridge => 1.0 / (x * t + 1.0),
            FilterKind::GradientDescent { eta } => (1.0 - eta * x).powi(self.steps),
            FilterKind::Pcr { b } => {
                if x > 0.0 && x >= b / t {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

/// `φ_t(x)` for a single point.
pub fn filter_eval(spec: &FilterSpec, t: TuningParameter, x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(spec.at(t)?.phi(x))
}

/// `ψ_t(x)` for a single point.
pub fn residual_eval(spec: &FilterSpec, t: TuningParameter, x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(spec.at(t)?.psi(x))
}

fn check_x(x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(invalid("x", format!("filters are evaluated at x ≥ 0, got {x}")))
    }
}

/// Outcome of a sandwich sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichReport {
    /// Largest amount by which `φ_t` leaves `[c₁/(x+t⁻¹), C₁/(x+t⁻¹)]`.
    pub max_violation: f64,
    /// Point at which the largest violation occurred.
    pub worst_x: f64,
    pub lower_checked: bool,
}

/// Measures how far `φ_t` leaves its documented sandwich on a grid in `[0, 8]`.
pub fn sandwich_check(spec: &FilterSpec, t: TuningParameter, grid: &[f64]) -> Result<SandwichReport> {
    if grid.is_empty() {
        return Err(invalid("grid", "sandwich grid must be nonempty"));
    }
    if let Some(&x) = grid.iter().find(|&&x| !(0.0..=SANDWICH_MAX_X).contains(&x)) {
        return Err(invalid("grid", format!("grid point {x} lies outside [0, 8]")));
    }
    let f = spec.at(t)?;
    let t_inv = t.inverse();
    let mut report = SandwichReport {
        max_violation: 0.0,
        worst_x: grid[0],
        lower_checked: spec.c1.is_some(),
    };
    for &x in grid {
        let phi = f.phi(x);
        let ridge = 1.0 / (x + t_inv);
        let mut v = (phi - spec.c1_upper * ridge).max(0.0);
        if let Some(c1) = spec.c1 {
            v = v.max(c1 * ridge - phi);
        }
        if v > report.max_violation {
            report.max_violation = v;
            report.worst_x = x;
        }
    }
    Ok(report)
}

/// `n` equally spaced points covering `[0, 8]`.
pub fn sandwich_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| SANDWICH_MAX_X * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
