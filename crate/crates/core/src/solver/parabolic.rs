//! Explicit scheme for the reaction-diffusion PDE
//!
//! ```text
//! u_t = u_xx + lambda(x) u,   u(0, t) = 0
//! ```
//!
//! with Dirichlet or Neumann actuation at `x = 1`. Each step updates the
//! interior with the centered second difference, pins `u_0 = 0`, then sets the
//! last point from the boundary input.

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::profile::Coefficient;
use crate::solver::{BoundaryKind, BOUND_SLACK};

#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicState {
    pub u: Vec<f64>,
    pub t: f64,
}

/// One explicit step of the reaction-diffusion scheme; no stability checks.
pub fn parabolic_step(
    state: &ParabolicState,
    lambda: &[f64],
    control: f64,
    boundary: BoundaryKind,
    dt: f64,
    dx: f64,
) -> ParabolicState {
    let mut next = state.clone();
    advance_in_place(&mut next.u, lambda, control, boundary, dt, dx);
    next.t += dt;
    next
}

#[inline]
fn advance_in_place(u: &mut [f64], lambda: &[f64], control: f64, boundary: BoundaryKind, dt: f64, dx: f64) {
    let n = u.len() - 1;
    let inv_dx2 = 1.0 / (dx * dx);
    let mut left = u[0];
    for j in 1..n {
        let centre = u[j];
        u[j] = centre + dt * ((left - 2.0 * centre + u[j + 1]) * inv_dx2 + lambda[j] * centre);
        left = centre;
    }
    u[0] = 0.0;
    u[n] = boundary.boundary_value(u[n - 1], control, dx);
}

#[derive(Debug, Clone)]
pub struct ParabolicSolver {
    grid: Grid1D,
    lambda: Vec<f64>,
    dt: f64,
    boundary: BoundaryKind,
}

impl ParabolicSolver {
    /// Rejects `dt > dx^2 / 2`.
    pub fn new(grid: Grid1D, lambda: &Coefficient, dt: f64, boundary: BoundaryKind) -> Result<Self> {
        lambda.validate()?;
        let bound = 0.5 * grid.dx() * grid.dx();
        if !(dt > 0.0) || dt > bound * (1.0 + BOUND_SLACK) {
            return Err(Error::Config(format!(
                "reaction-diffusion step dt = {dt} violates the stability bound dt <= dx^2/2 = {bound}"
            )));
        }
        Ok(Self { grid, lambda: lambda.sample(&grid), dt, boundary })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.boundary
    }

    pub fn step(&self, state: &mut ParabolicState, control: f64) {
        advance_in_place(&mut state.u, &self.lambda, control, self.boundary, self.dt, self.grid.dx());
        state.t += self.dt;
    }
}
