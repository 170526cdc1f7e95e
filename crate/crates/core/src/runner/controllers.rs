use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::pipe::PipeController;
use crate::control::adjoint::{optimize, ControlSchedule, CostBreakdown, OptimizeSettings};
use crate::control::backstepping::{hyperbolic_feedback, parabolic_feedback, KernelSettings, LinearFeedback};
use crate::env::{EnvConfig, Problem, SensingMode};
use crate::error::{Error, Result};
use crate::grid::{Grid1D, Grid2D};
use crate::solver::ns2d::{make_reference, NsSolver};
use crate::solver::BoundaryKind;

/// Maps an observation to an action, one control step at a time.
pub trait Controller: Send {
    fn act(&mut self, t: f64, observation: &[f64]) -> Result<f64>;
}

fn default_timeout() -> u64 {
    10_000
}

fn default_iters() -> OptimizeSettings {
    OptimizeSettings::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    /// Always 0 (open loop).
    Zero,
    Constant {
        value: f64,
    },
    /// Full-state backstepping feedback for the 1D plants.
    Backstepping {
        #[serde(default)]
        kernel: KernelSettings,
    },
    /// Open-loop lid schedule optimized by the adjoint method before the episode.
    Adjoint {
        #[serde(default)]
        initial: f64,
        #[serde(default = "default_iters")]
        optimize: OptimizeSettings,
    },
    /// External process speaking the line protocol.
    Pipe {
        command: String,
        #[serde(default = "default_timeout")]
        timeout_ms: u64,
    },
}

impl ControllerSpec {
    pub fn default_for(problem: Problem) -> Self {
        match problem {
            Problem::NavierStokes => ControllerSpec::Adjoint { initial: 0.0, optimize: OptimizeSettings::default() },
            _ => ControllerSpec::Backstepping { kernel: KernelSettings::default() },
        }
    }

    /// Parses a command-line id: `zero`, `open_loop`, `constant:<v>`, `backstepping`, `adjoint` or `pipe`.
    pub fn from_id(id: &str, pipe: Option<&str>) -> Result<Self> {
        let spec = match id {
            "zero" | "open_loop" => ControllerSpec::Zero,
            "backstepping" => ControllerSpec::Backstepping { kernel: KernelSettings::default() },
            "adjoint" => ControllerSpec::Adjoint { initial: 0.0, optimize: OptimizeSettings::default() },
            "pipe" => ControllerSpec::Pipe {
                command: pipe.ok_or_else(|| Error::Config("controller `pipe` needs --pipe <cmd>".into()))?.to_string(),
                timeout_ms: default_timeout(),
            },
            other => match other.strip_prefix("constant:") {
                Some(v) => ControllerSpec::Constant {
                    value: v.parse().map_err(|_| Error::Config(format!("bad constant controller value `{v}`")))?,
                },
                None => return Err(Error::Config(format!("unknown controller `{other}`"))),
            },
        };
        Ok(spec)
    }

    /// Does the expensive, episode-independent work (kernels, schedule optimization).
    pub fn prepare(&self, env: &EnvConfig) -> Result<PreparedController> {
        match self {
            ControllerSpec::Zero => Ok(PreparedController::Constant(0.0)),
            ControllerSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::Config("constant controller value must be finite".into()));
                }
                Ok(PreparedController::Constant(*value))
            }
            ControllerSpec::Backstepping { kernel } => {
                if !env.problem.is_1d() {
                    return Err(Error::Config("backstepping is only available for the 1D problems".into()));
                }
                if env.sensing.mode != SensingMode::FullState || env.actuation.kind != BoundaryKind::Dirichlet {
                    return Err(Error::Config("backstepping needs full-state sensing and Dirichlet actuation".into()));
                }
                let grid = Grid1D::new(env.nx)?;
                let fb = match env.problem {
                    Problem::Hyperbolic => hyperbolic_feedback(&env.coefficient, grid, kernel)?,
                    _ => parabolic_feedback(&env.coefficient, grid, kernel)?,
                };
                Ok(PreparedController::Feedback(fb))
            }
            ControllerSpec::Adjoint { initial, optimize: settings } => {
                if env.problem != Problem::NavierStokes {
                    return Err(Error::Config("the adjoint controller is only available for navier_stokes".into()));
                }
                let ep = &env.episode;
                let grid = Grid2D::new(env.nx, env.ny)?;
                let edge = env.actuation.edge.as_2d().expect("validated");
                let speed = ep.action_lo.abs().max(ep.action_hi.abs());
                let solver = NsSolver::new(grid, env.fluid, ep.dt_pde, env.poisson, edge, speed)?;
                let reference = make_reference(&env.reference, &solver, ep.dt_control, ep.horizon)?;
                let init = ControlSchedule::constant(*initial, reference.len(), ep.dt_control);
                let res = optimize(&init, &reference, &solver, &env.tracking, settings)?;
                log::info!(
                    "adjoint schedule: cost {:.6e} -> {:.6e} in {} iterations{}",
                    res.history[0].total,
                    res.history.last().expect("non-empty").total,
                    res.history.len() - 1,
                    if res.stalled { " (line search stalled)" } else { "" }
                );
                Ok(PreparedController::Schedule {
                    values: Arc::new(res.schedule.values),
                    history: Arc::new(res.history),
                    dt_control: ep.dt_control,
                })
            }
            ControllerSpec::Pipe { command, timeout_ms } => {
                Ok(PreparedController::Pipe { command: command.clone(), timeout_ms: *timeout_ms })
            }
        }
    }
}

/// Controller data shared by every episode of a run or suite.
#[derive(Debug, Clone)]
pub enum PreparedController {
    Constant(f64),
    Feedback(Arc<LinearFeedback>),
    Schedule { values: Arc<Vec<f64>>, history: Arc<Vec<CostBreakdown>>, dt_control: f64 },
    Pipe { command: String, timeout_ms: u64 },
}

impl PreparedController {
    pub fn instantiate(&self) -> Result<Box<dyn Controller>> {
        Ok(match self {
            PreparedController::Constant(v) => Box::new(ConstantController(*v)),
            PreparedController::Feedback(fb) => Box::new(FeedbackController(fb.clone())),
            PreparedController::Schedule { values, .. } => {
                Box::new(ScheduleController { values: values.clone(), k: 0 })
            }
            PreparedController::Pipe { command, timeout_ms } => Box::new(PipeController::spawn(command, *timeout_ms)?),
        })
    }

    /// Writes controller-specific files: `feedback.csv` for backstepping,
    /// `schedule.csv` (t,U) and `cost_history.csv` for the adjoint schedule.
    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        match self {
            PreparedController::Feedback(fb) => fb.write_csv(std::fs::File::create(dir.join("feedback.csv"))?),
            PreparedController::Schedule { values, history, dt_control } => {
                let mut s = String::from("t,U\n");
                for (k, u) in values.iter().enumerate() {
                    s.push_str(&format!("{},{}\n", k as f64 * dt_control, u));
                }
                std::fs::write(dir.join("schedule.csv"), s)?;
                let mut h = String::from("iter,tracking,control,total\n");
                for (i, c) in history.iter().enumerate() {
                    h.push_str(&format!("{i},{},{},{}\n", c.tracking, c.control, c.total));
                }
                std::fs::write(dir.join("cost_history.csv"), h)?;
                Ok(())
            }
            PreparedController::Constant(_) | PreparedController::Pipe { .. } => Ok(()),
        }
    }
}

pub struct ConstantController(pub f64);

impl Controller for ConstantController {
    fn act(&mut self, _t: f64, _obs: &[f64]) -> Result<f64> {
        Ok(self.0)
    }
}

/// `U = trapezoid(w u)` on the observed full state.
pub struct FeedbackController(pub Arc<LinearFeedback>);

impl Controller for FeedbackController {
    fn act(&mut self, _t: f64, obs: &[f64]) -> Result<f64> {
        self.0.apply(obs)
    }
}

/// Replays a precomputed schedule; the last value is held if the episode runs longer.
pub struct ScheduleController {
    values: Arc<Vec<f64>>,
    k: usize,
}

impl Controller for ScheduleController {
    fn act(&mut self, _t: f64, _obs: &[f64]) -> Result<f64> {
        let v = self.values.get(self.k).or(self.values.last()).copied().unwrap_or(0.0);
        self.k += 1;
        Ok(v)
    }
}
