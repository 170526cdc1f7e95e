//! Episodic environments over the three plants.
//!
//! An [`Env`] owns one solver and one state. [`Env::reset`] draws the initial
//! condition from the seed and [`Env::step`] clips the action, holds it over
//! all solver substeps of one control interval and returns a [`StepOutcome`].
//! Cavity observations and states are flattened with `u` first and then `v`,
//! each in row-major `(i, j)` order.

pub mod config;
pub mod reward;
pub mod sensing;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use config::{
    ActuationEdge, ActuationSpec, EnvConfig, EpisodeConfig, InitialCondition, NoiseKind, NoiseSpec, Problem,
    RewardSpec1D, SensingMode, SensingSpec,
};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, Grid2D};
use crate::solver::hyperbolic::{HyperbolicSolver, HyperbolicState};
use crate::solver::ns2d::{make_reference, NSState, NsSolver, ReferenceTrajectory};
use crate::solver::parabolic::{ParabolicSolver, ParabolicState};
use sensing::NoiseRng;

/// Box-shaped space: every entry lies in `[low, high]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxSpace {
    pub low: f64,
    pub high: f64,
    pub shape: Vec<usize>,
}

/// Diagnostics attached to every step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// L2 norm of the state after the step.
    pub l2: f64,
    /// Action after clipping.
    pub applied_action: f64,
    /// Full state after the step, flattened.
    pub state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// The horizon was reached.
    pub terminated: bool,
    /// The blow-up guard fired.
    pub truncated: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
enum Plant {
    Hyperbolic { solver: HyperbolicSolver, state: HyperbolicState },
    Parabolic { solver: ParabolicSolver, state: ParabolicState },
    Cavity { solver: NsSolver, state: NSState, reference: Arc<ReferenceTrajectory> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Fresh,
    Running,
    Finished,
}

/// One environment instance. Not shared between threads while stepping.
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    plant: Plant,
    noise_rng: NoiseRng,
    steps: usize,
    substeps: usize,
    step_index: usize,
    effort: f64,
    quadratic_cost: f64,
    phase: Phase,
}

impl Env {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let ep = &config.episode;
        let plant = match config.problem {
            Problem::Hyperbolic => {
                let grid = Grid1D::new(config.nx)?;
                let solver = HyperbolicSolver::new(grid, &config.coefficient, ep.dt_pde, config.actuation.kind)?;
                Plant::Hyperbolic { solver, state: HyperbolicState { u: vec![0.0; config.nx], t: 0.0 } }
            }
            Problem::Parabolic => {
                let grid = Grid1D::new(config.nx)?;
                let solver = ParabolicSolver::new(grid, &config.coefficient, ep.dt_pde, config.actuation.kind)?;
                Plant::Parabolic { solver, state: ParabolicState { u: vec![0.0; config.nx], t: 0.0 } }
            }
            Problem::NavierStokes => {
                let grid = Grid2D::new(config.nx, config.ny)?;
                let edge = config.actuation.edge.as_2d().expect("validated");
                let speed = ep.action_lo.abs().max(ep.action_hi.abs());
                let solver = NsSolver::new(grid, config.fluid, ep.dt_pde, config.poisson, edge, speed)?;
                let reference = make_reference(&config.reference, &solver, ep.dt_control, ep.horizon)?;
                Plant::Cavity { state: NSState::at_rest(&grid), solver, reference: Arc::new(reference) }
            }
        };
        Ok(Self {
            steps: ep.steps(),
            substeps: ep.substeps(),
            config,
            plant,
            noise_rng: NoiseRng::seed_from_u64(0),
            step_index: 0,
            effort: 0.0,
            quadratic_cost: 0.0,
            phase: Phase::Fresh,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn action_space(&self) -> BoxSpace {
        BoxSpace { low: self.config.episode.action_lo, high: self.config.episode.action_hi, shape: vec![1] }
    }

    pub fn observation_space(&self) -> BoxSpace {
        let shape = match self.config.problem {
            Problem::NavierStokes => vec![2 * self.config.nx * self.config.ny],
            _ => vec![sensing::observation_len_1d(self.config.nx, self.config.sensing.mode)],
        };
        BoxSpace { low: f64::NEG_INFINITY, high: f64::INFINITY, shape }
    }

    /// Control steps in a full episode.
    pub fn episode_steps(&self) -> usize {
        self.steps
    }

    /// Control steps taken since the last reset.
    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.config.episode.dt_control
    }

    pub fn is_finished(&self) -> bool {
        self.phase == Phase::Finished
    }

    /// Reference trajectory of the cavity task.
    pub fn reference(&self) -> Option<&Arc<ReferenceTrajectory>> {
        match &self.plant {
            Plant::Cavity { reference, .. } => Some(reference),
            _ => None,
        }
    }

    /// Running `sum (|u|^2 + U^2) dt_control` over the episode so far.
    pub fn quadratic_cost(&self) -> f64 {
        self.quadratic_cost
    }

    /// The raw state, flattened.
    pub fn state(&self) -> Vec<f64> {
        match &self.plant {
            Plant::Hyperbolic { state, .. } => state.u.clone(),
            Plant::Parabolic { state, .. } => state.u.clone(),
            Plant::Cavity { state, .. } => flatten(&state.fields.u, &state.fields.v),
        }
    }

    /// L2 norm of the current state.
    pub fn state_l2(&self) -> f64 {
        match &self.plant {
            Plant::Hyperbolic { solver, state } => solver.grid().l2_norm(&state.u),
            Plant::Parabolic { solver, state } => solver.grid().l2_norm(&state.u),
            Plant::Cavity { solver, state, .. } => {
                solver.grid().l2_norm_sq(state.fields.u.iter().chain(state.fields.v.iter())).sqrt()
            }
        }
    }

    /// Starts a new episode and returns the first observation.
    pub fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nx = self.config.nx;
        let init = match &self.config.initial {
            InitialCondition::RandomConstant { lo, hi } => {
                let c = if lo == hi { *lo } else { rng.random_range(*lo..*hi) };
                vec![c; nx]
            }
            InitialCondition::Constant { value } => vec![*value; nx],
            InitialCondition::Profile { values } => values.clone(),
            InitialCondition::Rest => Vec::new(),
        };
        match &mut self.plant {
            Plant::Hyperbolic { state, .. } => *state = HyperbolicState { u: init, t: 0.0 },
            Plant::Parabolic { state, .. } => *state = ParabolicState { u: init, t: 0.0 },
            Plant::Cavity { solver, state, .. } => *state = NSState::at_rest(solver.grid()),
        }
        self.noise_rng = match self.config.sensing.noise.seed {
            Some(s) => NoiseRng::seed_from_u64(s),
            None => {
                let mut r = NoiseRng::seed_from_u64(seed);
                r.set_stream(1);
                r
            }
        };
        self.step_index = 0;
        self.effort = 0.0;
        self.quadratic_cost = 0.0;
        self.phase = Phase::Running;
        self.observe()
    }

    fn observe(&mut self) -> Result<Vec<f64>> {
        let mut obs = match &self.plant {
            Plant::Hyperbolic { solver, state } => {
                sensing::measure_1d(&state.u, solver.grid(), self.config.sensing.mode, self.config.actuation.kind)?
            }
            Plant::Parabolic { solver, state } => {
                sensing::measure_1d(&state.u, solver.grid(), self.config.sensing.mode, self.config.actuation.kind)?
            }
            Plant::Cavity { state, .. } => flatten(&state.fields.u, &state.fields.v),
        };
        sensing::add_noise(&mut obs, &self.config.sensing.noise, &mut self.noise_rng)?;
        Ok(obs)
    }

    /// Advances one control interval.
    pub fn step(&mut self, action: f64) -> Result<StepOutcome> {
        match self.phase {
            Phase::Fresh => return Err(Error::State("step called before reset".into())),
            Phase::Finished => return Err(Error::State("episode already finished; call reset".into())),
            Phase::Running => {}
        }
        if !action.is_finite() {
            return Err(Error::Input(format!("action must be finite, got {action}")));
        }
        let ep = self.config.episode;
        let applied = action.clamp(ep.action_lo, ep.action_hi);
        let k = self.step_index;
        let sub = self.substeps;
        let (reward, finite) = match &mut self.plant {
            Plant::Hyperbolic { solver, state } => {
                let prev = state.u.clone();
                for _ in 0..sub {
                    solver.step(state, applied);
                }
                let finite = state.u.iter().all(|x| x.is_finite());
                (reward::reward_step(&prev, &state.u, solver.grid())?, finite)
            }
            Plant::Parabolic { solver, state } => {
                let prev = state.u.clone();
                for _ in 0..sub {
                    solver.step(state, applied);
                }
                let finite = state.u.iter().all(|x| x.is_finite());
                (reward::reward_step(&prev, &state.u, solver.grid())?, finite)
            }
            Plant::Cavity { solver, state, reference } => {
                let mut finite = true;
                for _ in 0..sub {
                    match solver.step(state, applied) {
                        Ok((next, _)) => *state = next,
                        Err(Error::BlowUp { .. }) => {
                            finite = false;
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                }
                let frame = &reference.frames[k];
                let r = reward::reward_ns(
                    (&state.fields.u, &state.fields.v),
                    (&frame.u, &frame.v),
                    applied,
                    &self.config.tracking,
                    solver.grid(),
                )?;
                (r, finite)
            }
        };
        self.step_index += 1;
        self.effort += applied.abs();
        let l2 = self.state_l2();
        self.quadratic_cost += (l2 * l2 + applied * applied) * ep.dt_control;
        let at_horizon = self.step_index >= self.steps;
        let blown = !finite || !l2.is_finite() || l2 > ep.blowup_threshold;
        let (terminated, truncated) = if !finite || !l2.is_finite() {
            (false, true)
        } else if at_horizon {
            (true, false)
        } else {
            (false, blown)
        };
        let mut reward = reward;
        if terminated && self.config.problem.is_1d() {
            reward += reward::terminal_from_parts(l2, self.effort, &self.config.reward);
        }
        if terminated || truncated {
            self.phase = Phase::Finished;
        }
        let observation = self.observe()?;
        Ok(StepOutcome {
            observation,
            reward,
            terminated,
            truncated,
            info: StepInfo { l2, applied_action: applied, state: self.state() },
        })
    }
}

fn flatten(u: &ndarray::Array2<f64>, v: &ndarray::Array2<f64>) -> Vec<f64> {
    u.iter().chain(v.iter()).copied().collect()
}
