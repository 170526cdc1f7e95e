//! Environment configuration.
//!
//! A configuration document names a `problem` and overrides any subset of the
//! per-problem defaults; nested tables merge key by key. Tagged sub-objects
//! (`coefficient`, `initial`, `reference`) are replaced wholesale when the
//! document gives a `kind`. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::control::adjoint::CostWeights;
use crate::error::{Error, Result};
use crate::profile::Coefficient;
use crate::solver::ns2d::{Edge, FluidParams, PoissonSettings, Schedule};
use crate::solver::BoundaryKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Hyperbolic,
    Parabolic,
    NavierStokes,
}

impl Problem {
    pub fn is_1d(self) -> bool {
        !matches!(self, Problem::NavierStokes)
    }
}

impl std::fmt::Display for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Problem::Hyperbolic => "hyperbolic",
            Problem::Parabolic => "parabolic",
            Problem::NavierStokes => "navier_stokes",
        })
    }
}

/// Where the input acts. `x0`/`x1` apply to 1D problems, edges to the cavity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActuationEdge {
    X0,
    X1,
    Top,
    Bottom,
    Left,
    Right,
}

impl ActuationEdge {
    pub fn as_2d(self) -> Option<Edge> {
        match self {
            ActuationEdge::Top => Some(Edge::Top),
            ActuationEdge::Bottom => Some(Edge::Bottom),
            ActuationEdge::Left => Some(Edge::Left),
            ActuationEdge::Right => Some(Edge::Right),
            ActuationEdge::X0 | ActuationEdge::X1 => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuationSpec {
    pub edge: ActuationEdge,
    pub kind: BoundaryKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingMode {
    FullState,
    /// Gradient at the actuated end under Dirichlet actuation, value under Neumann.
    Collocated,
    AntiCollocatedValue,
    AntiCollocatedGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    None,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma: f64,
    /// Noise stream seed; derived from the episode seed when absent.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingSpec {
    pub mode: SensingMode,
    #[serde(default)]
    pub noise: NoiseSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    pub horizon: f64,
    pub dt_control: f64,
    pub dt_pde: f64,
    pub action_lo: f64,
    pub action_hi: f64,
    /// State L2 norm above which the episode is truncated.
    pub blowup_threshold: f64,
}

impl EpisodeConfig {
    /// Number of control steps in a full episode.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt_control).round() as usize
    }

    /// Solver steps per control step.
    pub fn substeps(&self) -> usize {
        (self.dt_control / self.dt_pde).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("episode.{name} must be positive, got {v}")))
            }
        };
        positive("horizon", self.horizon)?;
        positive("dt_control", self.dt_control)?;
        positive("dt_pde", self.dt_pde)?;
        positive("blowup_threshold", self.blowup_threshold)?;
        if self.dt_pde > self.dt_control * (1.0 + 1e-9) {
            return Err(Error::Config(format!(
                "episode.dt_pde ({}) exceeds episode.dt_control ({})",
                self.dt_pde, self.dt_control
            )));
        }
        let divides = |big: f64, small: f64| {
            let r = big / small;
            (r - r.round()).abs() <= 1e-9 * r.max(1.0)
        };
        if !divides(self.horizon, self.dt_control) {
            return Err(Error::Config("episode.dt_control must divide episode.horizon".into()));
        }
        if !divides(self.dt_control, self.dt_pde) {
            return Err(Error::Config("episode.dt_pde must divide episode.dt_control".into()));
        }
        if !(self.action_lo < self.action_hi) || !self.action_lo.is_finite() || !self.action_hi.is_finite() {
            return Err(Error::Config(format!(
                "action bounds must satisfy lo < hi, got [{}, {}]",
                self.action_lo, self.action_hi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `u(x, 0) = c` with `c ~ Uniform(lo, hi)` drawn from the episode seed.
    RandomConstant {
        lo: f64,
        hi: f64,
    },
    Constant {
        value: f64,
    },
    /// One value per grid point.
    Profile {
        values: Vec<f64>,
    },
    /// Velocity and pressure identically zero (the only choice for the cavity).
    Rest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardSpec1D {
    /// Terminal bonus.
    pub sigma: f64,
    /// Divisor of the accumulated absolute action.
    pub eta: f64,
    /// Terminal L2 threshold above which the bonus is withheld.
    pub zeta: f64,
}

impl Default for RewardSpec1D {
    fn default() -> Self {
        Self { sigma: 300.0, eta: 1000.0, zeta: 20.0 }
    }
}

/// Fully resolved environment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub problem: Problem,
    /// Grid points along x (and y for the cavity).
    pub nx: usize,
    pub ny: usize,
    pub episode: EpisodeConfig,
    pub actuation: ActuationSpec,
    pub sensing: SensingSpec,
    /// `beta` for the transport problem, `lambda` for reaction-diffusion. Unused by the cavity.
    pub coefficient: Coefficient,
    pub initial: InitialCondition,
    pub reward: RewardSpec1D,
    /// Tracking-reward weights of the cavity.
    pub tracking: CostWeights,
    pub fluid: FluidParams,
    pub poisson: PoissonSettings,
    /// Lid schedule that generates the cavity reference trajectory.
    pub reference: Schedule,
}

impl EnvConfig {
    pub fn defaults(problem: Problem) -> Self {
        let common = |problem, nx, episode, coefficient| EnvConfig {
            problem,
            nx,
            ny: 1,
            episode,
            actuation: ActuationSpec { edge: ActuationEdge::X1, kind: BoundaryKind::Dirichlet },
            sensing: SensingSpec { mode: SensingMode::FullState, noise: NoiseSpec::default() },
            coefficient,
            initial: InitialCondition::RandomConstant { lo: 1.0, hi: 10.0 },
            reward: RewardSpec1D::default(),
            tracking: CostWeights::default(),
            fluid: FluidParams::default(),
            poisson: PoissonSettings::default(),
            reference: Schedule::default(),
        };
        match problem {
            Problem::Hyperbolic => common(
                problem,
                101,
                EpisodeConfig {
                    horizon: 5.0,
                    dt_control: 0.01,
                    dt_pde: 1e-4,
                    action_lo: -20.0,
                    action_hi: 20.0,
                    blowup_threshold: 1e4,
                },
                Coefficient::chebyshev(5.0, 7.35),
            ),
            Problem::Parabolic => common(
                problem,
                201,
                EpisodeConfig {
                    horizon: 1.0,
                    dt_control: 1e-3,
                    dt_pde: 1e-5,
                    action_lo: -20.0,
                    action_hi: 20.0,
                    blowup_threshold: 1e4,
                },
                Coefficient::chebyshev(50.0, 8.0),
            ),
            Problem::NavierStokes => {
                let mut c = common(
                    problem,
                    21,
                    EpisodeConfig {
                        horizon: 0.2,
                        dt_control: 1e-3,
                        dt_pde: 1e-3,
                        action_lo: -10.0,
                        action_hi: 10.0,
                        blowup_threshold: 1e4,
                    },
                    Coefficient::constant(0.0),
                );
                c.ny = 21;
                c.actuation = ActuationSpec { edge: ActuationEdge::Top, kind: BoundaryKind::Dirichlet };
                c.initial = InitialCondition::Rest;
                c
            }
        }
    }

    /// Merge a JSON document onto the defaults of the problem it names.
    pub fn from_value(doc: Value) -> Result<Self> {
        let obj = doc.as_object().ok_or_else(|| Error::Config("configuration must be a table/object".into()))?;
        let problem: Problem = match obj.get("problem") {
            Some(p) => serde_json::from_value(p.clone()).map_err(|e| Error::Config(format!("problem: {e}")))?,
            None => return Err(Error::Config("configuration is missing the `problem` key".into())),
        };
        let mut base = serde_json::to_value(Self::defaults(problem))?;
        merge(&mut base, &doc);
        let cfg: EnvConfig = serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(s)?)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        Self::from_value(toml::from_str::<Value>(s)?)
    }

    /// Reads JSON or TOML, chosen by extension (`.toml` means TOML, anything else JSON).
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "toml") {
            Self::from_toml_str(&text)
        } else {
            Self::from_json_str(&text)
        }
    }

    /// Checks numerical settings and the sensing/actuation pairing.
    pub fn validate(&self) -> Result<()> {
        self.episode.validate()?;
        let unsupported = |what: String| Err(Error::Config(format!("unsupported configuration: {what}")));
        let noise = &self.sensing.noise;
        if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
            return Err(Error::Config(format!("sensing.noise.sigma must be >= 0, got {}", noise.sigma)));
        }
        let r = &self.reward;
        if !(r.sigma > 0.0 && r.eta > 0.0 && r.zeta > 0.0) {
            return Err(Error::Config("reward.sigma, reward.eta and reward.zeta must be positive".into()));
        }
        if !(self.tracking.gamma >= 0.0) {
            return Err(Error::Config("tracking.gamma must be >= 0".into()));
        }
        match self.problem {
            Problem::Hyperbolic | Problem::Parabolic => {
                self.coefficient.validate()?;
                if self.nx < 3 {
                    return Err(Error::Config(format!("nx must be at least 3, got {}", self.nx)));
                }
                match self.actuation.edge {
                    ActuationEdge::X1 => {}
                    ActuationEdge::X0 => {
                        return unsupported(format!(
                            "{} problem with actuation at x = 0 (actuation is only available at x = 1)",
                            self.problem
                        ))
                    }
                    e => return unsupported(format!("{} problem with 2D actuation edge {e:?}", self.problem)),
                }
                if self.problem == Problem::Parabolic && self.sensing.mode == SensingMode::AntiCollocatedValue {
                    return unsupported(
                        "parabolic problem with anti-collocated value sensing (u(0, t) is pinned to zero)".into(),
                    );
                }
                match &self.initial {
                    InitialCondition::RandomConstant { lo, hi } if !(lo <= hi && lo.is_finite() && hi.is_finite()) => {
                        return Err(Error::Config(format!("initial range [{lo}, {hi}] is invalid")))
                    }
                    InitialCondition::Profile { values } if values.len() != self.nx => {
                        return Err(Error::Config(format!(
                            "initial profile has {} values, grid has {}",
                            values.len(),
                            self.nx
                        )))
                    }
                    InitialCondition::Rest => {
                        return Err(Error::Config("`rest` initial condition is only used by the cavity".into()))
                    }
                    _ => {}
                }
            }
            Problem::NavierStokes => {
                self.fluid.validate()?;
                if self.nx < 5 || self.ny < 5 {
                    return Err(Error::Config(format!(
                        "cavity grid must be at least 5x5, got {}x{}",
                        self.nx, self.ny
                    )));
                }
                if self.actuation.edge.as_2d().is_none() {
                    return unsupported(format!("navier_stokes problem with 1D actuation {:?}", self.actuation.edge));
                }
                if self.actuation.kind != BoundaryKind::Dirichlet {
                    return unsupported("navier_stokes problem with Neumann actuation".into());
                }
                if self.sensing.mode != SensingMode::FullState {
                    return unsupported(format!("navier_stokes problem with {:?} sensing", self.sensing.mode));
                }
                if self.initial != InitialCondition::Rest {
                    return unsupported("navier_stokes problem must start from rest".into());
                }
            }
        }
        Ok(())
    }
}

/// Recursive merge of `patch` into `base`. Objects carrying `kind` replace the base object.
fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) if !p.contains_key("kind") => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for p in [Problem::Hyperbolic, Problem::Parabolic, Problem::NavierStokes] {
            EnvConfig::defaults(p).validate().unwrap();
        }
        assert_eq!(EnvConfig::defaults(Problem::Hyperbolic).episode.substeps(), 100);
        assert_eq!(EnvConfig::defaults(Problem::Parabolic).episode.steps(), 1000);
    }

    #[test]
    fn partial_override_merges() {
        let c = EnvConfig::from_json_str(r#"{"problem":"hyperbolic","episode":{"horizon":2.0},"nx":51}"#).unwrap();
        assert_eq!(c.episode.horizon, 2.0);
        assert_eq!(c.episode.dt_control, 0.01);
        assert_eq!(c.nx, 51);
        let c = EnvConfig::from_json_str(r#"{"problem":"parabolic","coefficient":{"kind":"constant","value":3.0}}"#)
            .unwrap();
        assert_eq!(c.coefficient, Coefficient::constant(3.0));
    }

    #[test]
    fn toml_and_json_agree() {
        let a = EnvConfig::from_toml_str("problem = \"parabolic\"\n[initial]\nkind = \"constant\"\nvalue = 10.0\n")
            .unwrap();
        let b =
            EnvConfig::from_json_str(r#"{"problem":"parabolic","initial":{"kind":"constant","value":10.0}}"#).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = EnvConfig::from_json_str(r#"{"problem":"hyperbolic","episode":{"horizn":2.0}}"#).unwrap_err();
        assert!(e.to_string().contains("horizn"), "{e}");
        let e = EnvConfig::from_json_str(r#"{"problem":"hyperbolic","colour":1}"#).unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
    }

    #[test]
    fn unsupported_pairs_rejected() {
        let bad = [
            r#"{"problem":"parabolic","sensing":{"mode":"anti_collocated_value"}}"#,
            r#"{"problem":"hyperbolic","actuation":{"edge":"x0","kind":"dirichlet"}}"#,
            r#"{"problem":"navier_stokes","sensing":{"mode":"collocated"}}"#,
            r#"{"problem":"navier_stokes","actuation":{"edge":"top","kind":"neumann"}}"#,
            r#"{"problem":"hyperbolic","episode":{"dt_pde":0.02}}"#,
            r#"{"problem":"hyperbolic","episode":{"action_lo":5.0,"action_hi":-5.0}}"#,
        ];
        for doc in bad {
            assert!(matches!(EnvConfig::from_json_str(doc), Err(Error::Config(_))), "{doc}");
        }
        let ok = [
            r#"{"problem":"hyperbolic","sensing":{"mode":"anti_collocated_value"}}"#,
            r#"{"problem":"parabolic","sensing":{"mode":"anti_collocated_gradient"},"actuation":{"edge":"x1","kind":"neumann"}}"#,
            r#"{"problem":"navier_stokes","actuation":{"edge":"left","kind":"dirichlet"}}"#,
        ];
        for doc in ok {
            EnvConfig::from_json_str(doc).unwrap();
        }
    }

    #[test]
    fn serialization_round_trip() {
        let c = EnvConfig::defaults(Problem::NavierStokes);
        let back: EnvConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
