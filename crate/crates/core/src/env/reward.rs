//! Rewards for the 1D stabilization tasks and the cavity tracking task.
//!
//! All norms are the rectangle-rule L2 norm of [`crate::grid`].

use ndarray::Array2;

use super::config::RewardSpec1D;
use crate::control::adjoint::CostWeights;
use crate::error::{Error, Result};
use crate::grid::{Grid1D, Grid2D};

/// `-|next - prev|`.
pub fn reward_step(prev: &[f64], next: &[f64], grid: &Grid1D) -> Result<f64> {
    Ok(-grid.l2_distance(prev, next)?)
}

/// Terminal bonus: zero if `|final| > zeta`, else `sigma - sum|a| / eta - |final|`.
pub fn reward_terminal(final_state: &[f64], actions: &[f64], spec: &RewardSpec1D, grid: &Grid1D) -> Result<f64> {
    grid.check_len(final_state)?;
    let norm = grid.l2_norm(final_state);
    let effort: f64 = actions.iter().map(|a| a.abs()).sum();
    Ok(terminal_from_parts(norm, effort, spec))
}

pub(crate) fn terminal_from_parts(norm: f64, effort: f64, spec: &RewardSpec1D) -> f64 {
    if norm > spec.zeta {
        0.0
    } else {
        spec.sigma - effort / spec.eta - norm
    }
}

/// `-1/2 |next - ref|^2 - gamma/2 (a - a_ref)^2` over both velocity components.
pub fn reward_ns(
    next: (&Array2<f64>, &Array2<f64>),
    reference: (&Array2<f64>, &Array2<f64>),
    action: f64,
    weights: &CostWeights,
    grid: &Grid2D,
) -> Result<f64> {
    let shape = grid.shape();
    for a in [next.0, next.1, reference.0, reference.1] {
        if a.dim() != shape {
            return Err(Error::Input(format!("field shape {:?} does not match grid {:?}", a.dim(), shape)));
        }
    }
    let du = next.0 - reference.0;
    let dv = next.1 - reference.1;
    let track = grid.l2_norm_sq(du.iter().chain(dv.iter()));
    Ok(-0.5 * track - 0.5 * weights.gamma * (action - weights.u_ref).powi(2))
}
