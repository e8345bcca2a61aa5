//! Candidate occupation-number families evaluated on log-log coordinates.
//!
//! All three families share the parameter triple `(T, mu, c)` and are
//! evaluated at `x = ln(income)`, returning `y = ln(cumulative percent)`:
//!
//! * Fermi-Dirac:     `c / (exp((x - mu) / T) + 1)`
//! * Bose-Einstein:   `c / (exp((x - mu) / T) - 1)`
//! * Boltzmann-Gibbs: `c * exp(-(x - mu) / T)`
//!
//! For Boltzmann-Gibbs only the product `c * exp(mu / T)` is identifiable.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default half-width of the Bose-Einstein pole exclusion band, in x units.
pub const DEFAULT_POLE_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelFamily {
    FermiDirac,
    BoseEinstein,
    BoltzmannGibbs,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [
        ModelFamily::FermiDirac,
        ModelFamily::BoseEinstein,
        ModelFamily::BoltzmannGibbs,
    ];

    /// Short tag used on the command line and in file names.
    pub fn short(self) -> &'static str {
        match self {
            ModelFamily::FermiDirac => "fd",
            ModelFamily::BoseEinstein => "be",
            ModelFamily::BoltzmannGibbs => "bg",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ModelFamily::FermiDirac => "Fermi-Dirac",
            ModelFamily::BoseEinstein => "Bose-Einstein",
            ModelFamily::BoltzmannGibbs => "Boltzmann-Gibbs",
        };
        f.write_str(name)
    }
}

impl FromStr for ModelFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fd" | "fermi-dirac" | "fermidirac" => Ok(ModelFamily::FermiDirac),
            "be" | "bose-einstein" | "boseeinstein" => Ok(ModelFamily::BoseEinstein),
            "bg" | "boltzmann-gibbs" | "boltzmanngibbs" => Ok(ModelFamily::BoltzmannGibbs),
            other => Err(format!("unknown model family `{other}`")),
        }
    }
}

/// Temperature, chemical potential and degeneracy amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Width in ln-income units, `> 0`.
    pub t: f64,
    /// Midpoint in ln-income units.
    pub mu: f64,
    /// Left asymptote in ln-percent units, `> 0`.
    pub c: f64,
}

impl ModelParams {
    pub fn new(t: f64, mu: f64, c: f64) -> Self {
        Self { t, mu, c }
    }

    pub fn is_valid(&self) -> bool {
        self.t > 0.0 && self.c > 0.0 && self.t.is_finite() && self.c.is_finite() && self.mu.is_finite()
    }
}

/// Partial derivatives of a model value with respect to `(T, mu, c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradient {
    pub d_t: f64,
    pub d_mu: f64,
    pub d_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ModelError {
    #[error("Bose-Einstein evaluated at its pole: |x - mu| = {distance:e} < {guard:e}")]
    Pole { distance: f64, guard: f64 },
}

/// Evaluates a family with the default pole guard.
pub fn eval(family: ModelFamily, params: &ModelParams, x: f64) -> Result<f64, ModelError> {
    eval_guarded(family, params, x, DEFAULT_POLE_GUARD)
}

pub fn eval_guarded(
    family: ModelFamily,
    params: &ModelParams,
    x: f64,
    pole_guard: f64,
) -> Result<f64, ModelError> {
    let ModelParams { t, mu, c } = *params;
    let u = (x - mu) / t;
    match family {
        ModelFamily::FermiDirac => Ok(c * logistic_tail(u)),
        ModelFamily::BoseEinstein => {
            check_pole(x, mu, pole_guard)?;
            Ok(c / u.exp_m1())
        }
        ModelFamily::BoltzmannGibbs => Ok(c * (-u).exp()),
    }
}

/// Closed-form gradient with the default pole guard.
pub fn gradient(family: ModelFamily, params: &ModelParams, x: f64) -> Result<Gradient, ModelError> {
    gradient_guarded(family, params, x, DEFAULT_POLE_GUARD)
}

pub fn gradient_guarded(
    family: ModelFamily,
    params: &ModelParams,
    x: f64,
    pole_guard: f64,
) -> Result<Gradient, ModelError> {
    let ModelParams { t, mu, c } = *params;
    let u = (x - mu) / t;
    // `slope` is -dy/du; dy/dmu = slope / T and dy/dT = slope * u / T.
    let (d_c, slope) = match family {
        ModelFamily::FermiDirac => {
            let s = logistic_tail(u);
            (s, c * s * logistic_tail(-u))
        }
        ModelFamily::BoseEinstein => {
            check_pole(x, mu, pole_guard)?;
            // e^u / (e^u - 1)^2 written with q = e^{-|u|} to avoid overflow.
            let q = (-u.abs()).exp();
            let core = q / (1.0 - q).powi(2);
            (1.0 / u.exp_m1(), c * core)
        }
        ModelFamily::BoltzmannGibbs => {
            let e = (-u).exp();
            (e, c * e)
        }
    };
    Ok(Gradient {
        d_t: slope * u / t,
        d_mu: slope / t,
        d_c,
    })
}

/// `1 / (exp(u) + 1)` without overflow for large `|u|`.
fn logistic_tail(u: f64) -> f64 {
    if u > 0.0 {
        let e = (-u).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + u.exp())
    }
}

fn check_pole(x: f64, mu: f64, guard: f64) -> Result<(), ModelError> {
    let distance = (x - mu).abs();
    if distance < guard {
        Err(ModelError::Pole { distance, guard })
    } else {
        Ok(())
    }
}
