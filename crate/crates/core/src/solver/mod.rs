//! Explicit finite-difference integrators for the three benchmark PDEs.

pub mod hyperbolic;
pub mod ns2d;
pub mod parabolic;

use serde::{Deserialize, Serialize};

/// How a scalar boundary input acts on the actuated end of a 1D domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// `u(1, t) = U(t)`
    Dirichlet,
    /// `u_x(1, t) = U(t)`, imposed with a one-sided difference.
    Neumann,
}

impl BoundaryKind {
    /// Value of the last grid point given the already updated neighbour.
    #[inline]
    pub(crate) fn boundary_value(self, neighbour: f64, control: f64, dx: f64) -> f64 {
        match self {
            BoundaryKind::Dirichlet => control,
            BoundaryKind::Neumann => neighbour + dx * control,
        }
    }
}

// Relative slack for stability bounds so that e.g. dt == dx passes.
pub(crate) const BOUND_SLACK: f64 = 1e-12;
