use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{NSState, NsSolver};
use crate::error::{Error, Result};

/// Lid speed as a function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// `intercept + slope * t`.
    Linear {
        intercept: f64,
        slope: f64,
    },
    Constant {
        value: f64,
    },
    /// One value per control step; the last value is held past the end.
    Values {
        values: Vec<f64>,
    },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Linear { intercept: 3.0, slope: -5.0 }
    }
}

impl Schedule {
    /// Lid speed for control step `k` starting at time `t`.
    pub fn value(&self, k: usize, t: f64) -> f64 {
        match self {
            Schedule::Linear { intercept, slope } => intercept + slope * t,
            Schedule::Constant { value } => *value,
            Schedule::Values { values } => values.get(k).or(values.last()).copied().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityFrame {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
}

/// Velocity fields produced by a known lid schedule, one frame per control step.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub dt_control: f64,
    /// Lid speed applied during each control step.
    pub controls: Vec<f64>,
    /// `frames[k]` is the field at the end of control step `k`.
    pub frames: Vec<VelocityFrame>,
}

impl ReferenceTrajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Number of solver substeps per control step, if `dt_control` is a whole multiple of `dt`.
pub fn substeps(dt_control: f64, dt: f64) -> Result<usize> {
    let r = dt_control / dt;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > 1e-9 * r {
        return Err(Error::Config(format!("control step {dt_control} is not a multiple of solver step {dt}")));
    }
    Ok(n as usize)
}

/// Roll the solver out from rest under `schedule`, storing the field after every control step.
pub fn make_reference(
    schedule: &Schedule,
    solver: &NsSolver,
    dt_control: f64,
    horizon: f64,
) -> Result<ReferenceTrajectory> {
    let sub = substeps(dt_control, solver.dt())?;
    let steps = (horizon / dt_control).round() as usize;
    let mut state = NSState::at_rest(solver.grid());
    let mut controls = Vec::with_capacity(steps);
    let mut frames = Vec::with_capacity(steps);
    for k in 0..steps {
        let lid = schedule.value(k, k as f64 * dt_control);
        for _ in 0..sub {
            state = solver
                .step(&state, lid)
                .map_err(|e| match e {
                    Error::BlowUp { what, .. } => Error::BlowUp { step: k, what: format!("reference rollout: {what}") },
                    other => other,
                })?
                .0;
        }
        controls.push(lid);
        frames.push(VelocityFrame { u: state.fields.u.clone(), v: state.fields.v.clone() });
    }
    Ok(ReferenceTrajectory { dt_control, controls, frames })
}
