//! Spatially varying coefficient profiles (recirculation `beta(x)` for the
//! transport problem, reaction `lambda(x)` for reaction-diffusion).

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::grid::Grid1D;

/// `amplitude * cos(gamma * arccos(x))`, the scaled Chebyshev profile.
///
/// Fails for `x` outside `[0, 1]`.
pub fn beta_chebyshev(x: f64, gamma: f64, amplitude: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Input(format!("profile position {x} lies outside [0, 1]")));
    }
    Ok(chebyshev_unchecked(x, gamma, amplitude))
}

fn chebyshev_unchecked(x: f64, gamma: f64, amplitude: f64) -> f64 {
    amplitude * (gamma * x.clamp(-1.0, 1.0).acos()).cos()
}

/// A coefficient on `[0, 1]` that can be evaluated off-grid and integrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coefficient {
    Chebyshev {
        amplitude: f64,
        gamma: f64,
    },
    Constant {
        value: f64,
    },
    /// Uniform samples over `[0, 1]`, linearly interpolated between nodes.
    Sampled {
        values: Vec<f64>,
    },
}

impl Coefficient {
    pub fn chebyshev(amplitude: f64, gamma: f64) -> Self {
        Coefficient::Chebyshev { amplitude, gamma }
    }

    pub fn constant(value: f64) -> Self {
        Coefficient::Constant { value }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Coefficient::Chebyshev { amplitude, gamma } => {
                if !amplitude.is_finite() || !gamma.is_finite() {
                    return Err(Error::Config("Chebyshev profile parameters must be finite".into()));
                }
            }
            Coefficient::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::Config("constant profile must be finite".into()));
                }
            }
            Coefficient::Sampled { values } => {
                if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config("sampled profile needs at least 2 finite values".into()));
                }
            }
        }
        Ok(())
    }

    /// Value at `x`; positions are clamped into `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Coefficient::Chebyshev { amplitude, gamma } => chebyshev_unchecked(x, *gamma, *amplitude),
            Coefficient::Constant { value } => *value,
            Coefficient::Sampled { values } => {
                let (j, w) = locate(values.len(), x);
                if w == 0.0 {
                    values[j]
                } else {
                    (1.0 - w) * values[j] + w * values[j + 1]
                }
            }
        }
    }

    /// `int_0^x f(s) ds`, exact for every variant.
    pub fn integral(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            Coefficient::Chebyshev { amplitude, gamma } => {
                amplitude * (chebyshev_primitive(*gamma, FRAC_PI_2) - chebyshev_primitive(*gamma, x.acos()))
            }
            Coefficient::Constant { value } => value * x,
            Coefficient::Sampled { values } => {
                let h = 1.0 / (values.len() - 1) as f64;
                let (j, w) = locate(values.len(), x);
                let whole: f64 = values.windows(2).take(j).map(|p| 0.5 * (p[0] + p[1]) * h).sum();
                if w == 0.0 {
                    whole
                } else {
                    let end = (1.0 - w) * values[j] + w * values[j + 1];
                    whole + 0.5 * (values[j] + end) * w * h
                }
            }
        }
    }

    pub fn sample(&self, grid: &Grid1D) -> Vec<f64> {
        grid.points().map(|x| self.eval(x)).collect()
    }
}

// With x = cos(t): int cos(g t) sin(t) dt = 1/2 [cos((g-1)t)/(g-1) - cos((g+1)t)/(g+1)].
fn chebyshev_primitive(gamma: f64, theta: f64) -> f64 {
    let term = |a: f64| if a == 0.0 { 0.0 } else { (a * theta).cos() / a };
    0.5 * (term(gamma - 1.0) - term(gamma + 1.0))
}

// Index of the left node and the fractional offset for a uniform table on [0, 1].
fn locate(len: usize, x: f64) -> (usize, f64) {
    let cells = (len - 1) as f64;
    let s = x.clamp(0.0, 1.0) * cells;
    let j = (s.floor() as usize).min(len - 2);
    let w = s - j as f64;
    if w >= 1.0 {
        (j + 1, 0.0)
    } else {
        (j, w)
    }
}
