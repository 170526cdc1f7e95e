//! First-order upwind scheme for the transport PDE with recirculation
//!
//! ```text
//! u_t = u_x + beta(x) u(0, t),   x in [0, 1)
//! ```
//!
//! actuated at `x = 1`. The update is fully explicit:
//! `u_j <- u_j + dt ((u_{j+1} - u_j)/dx + beta_j u_0)` for `j < N`, after which
//! the last point is set from the boundary input.

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::profile::Coefficient;
use crate::solver::{BoundaryKind, BOUND_SLACK};

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicState {
    pub u: Vec<f64>,
    pub t: f64,
}

/// One explicit upwind step. `beta` holds the profile sampled on the grid.
///
/// Pure counterpart of [`HyperbolicSolver::step`]; performs no stability checks.
pub fn hyperbolic_step(
    state: &HyperbolicState,
    beta: &[f64],
    control: f64,
    boundary: BoundaryKind,
    dt: f64,
    dx: f64,
) -> HyperbolicState {
    let mut next = state.clone();
    advance_in_place(&mut next.u, beta, control, boundary, dt, dx);
    next.t += dt;
    next
}

#[inline]
fn advance_in_place(u: &mut [f64], beta: &[f64], control: f64, boundary: BoundaryKind, dt: f64, dx: f64) {
    let n = u.len() - 1;
    let u0 = u[0];
    // ascending sweep: u[j + 1] still holds the old value when u[j] is updated
    for j in 0..n {
        u[j] += dt * ((u[j + 1] - u[j]) / dx + beta[j] * u0);
    }
    u[n] = boundary.boundary_value(u[n - 1], control, dx);
}

/// Transport solver bound to a grid, a sampled `beta` and a time step.
#[derive(Debug, Clone)]
pub struct HyperbolicSolver {
    grid: Grid1D,
    beta: Vec<f64>,
    dt: f64,
    boundary: BoundaryKind,
}

impl HyperbolicSolver {
    /// Rejects `dt > dx` (CFL number above one).
    pub fn new(grid: Grid1D, beta: &Coefficient, dt: f64, boundary: BoundaryKind) -> Result<Self> {
        beta.validate()?;
        if !(dt > 0.0) || dt > grid.dx() * (1.0 + BOUND_SLACK) {
            return Err(Error::Config(format!(
                "transport step dt = {dt} violates the CFL bound dt <= dx = {}",
                grid.dx()
            )));
        }
        Ok(Self { grid, beta: beta.sample(&grid), dt, boundary })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.boundary
    }

    pub fn step(&self, state: &mut HyperbolicState, control: f64) {
        advance_in_place(&mut state.u, &self.beta, control, self.boundary, self.dt, self.grid.dx());
        state.t += self.dt;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid5() -> Grid1D {
        Grid1D::new(5).unwrap()
    }

    #[test]
    fn cfl_one_is_an_exact_shift() {
        let g = grid5();
        let s = HyperbolicState { u: vec![1.0, 2.0, 3.0, 4.0, 5.0], t: 0.0 };
        let next = hyperbolic_step(&s, &[0.0; 5], 9.0, BoundaryKind::Dirichlet, g.dx(), g.dx());
        assert_eq!(next.u, vec![2.0, 3.0, 4.0, 5.0, 9.0]);
        assert!((next.t - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let g = Grid1D::new(51).unwrap();
        let solver = HyperbolicSolver::new(g, &Coefficient::constant(0.0), 1e-3, BoundaryKind::Dirichlet).unwrap();
        let mut s = HyperbolicState { u: vec![0.0; 51], t: 0.0 };
        for _ in 0..100 {
            solver.step(&mut s, 0.0);
        }
        assert!(s.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn neumann_boundary_uses_one_sided_difference() {
        let g = grid5();
        let s = HyperbolicState { u: vec![1.0; 5], t: 0.0 };
        let next = hyperbolic_step(&s, &[0.0; 5], 2.0, BoundaryKind::Neumann, 0.1, g.dx());
        assert!((next.u[4] - (next.u[3] + 0.25 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn cfl_violation_rejected_at_construction() {
        let g = Grid1D::new(101).unwrap();
        let err = HyperbolicSolver::new(g, &Coefficient::constant(0.0), 0.02, BoundaryKind::Dirichlet);
        assert!(matches!(err, Err(Error::Config(_))));
        assert!(HyperbolicSolver::new(g, &Coefficient::constant(0.0), g.dx(), BoundaryKind::Dirichlet).is_ok());
    }

    #[test]
    fn open_loop_blows_up() {
        let g = Grid1D::new(101).unwrap();
        let solver =
            HyperbolicSolver::new(g, &Coefficient::chebyshev(5.0, 7.35), 1e-4, BoundaryKind::Dirichlet).unwrap();
        let mut s = HyperbolicState { u: vec![10.0; 101], t: 0.0 };
        for _ in 0..50_000 {
            solver.step(&mut s, 0.0);
        }
        assert!(g.l2_norm(&s.u) > 100.0, "final norm {}", g.l2_norm(&s.u));
    }

    #[test]
    fn first_order_convergence_to_exact_transport() {
        // u0(x) = sin^2(pi x / 2) shifted left; exact u(x, t) = u0(min(x + t, 1)) with u(1, t) = u0(1) = 1
        let u0 = |x: f64| (std::f64::consts::FRAC_PI_2 * x).sin().powi(2);
        let t_end = 0.5;
        let mut errors = Vec::new();
        for &nx in &[51usize, 101, 201, 401] {
            let g = Grid1D::new(nx).unwrap();
            let dt = 0.5 * g.dx();
            let solver = HyperbolicSolver::new(g, &Coefficient::constant(0.0), dt, BoundaryKind::Dirichlet).unwrap();
            let mut s = HyperbolicState { u: g.points().map(u0).collect(), t: 0.0 };
            let steps = (t_end / dt).round() as usize;
            for _ in 0..steps {
                solver.step(&mut s, 1.0);
            }
            let err = g.points().zip(&s.u).map(|(x, v)| (v - u0((x + t_end).min(1.0))).abs()).fold(0.0, f64::max);
            errors.push(err);
        }
        for w in errors.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate > 0.8 && rate < 1.3, "observed order {rate}, errors {errors:?}");
        }
    }

    proptest! {
        #[test]
        fn step_is_linear(
            a in prop::collection::vec(-10.0f64..10.0, 11),
            b in prop::collection::vec(-10.0f64..10.0, 11),
            ca in -5.0f64..5.0, cb in -5.0f64..5.0,
            alpha in -3.0f64..3.0, gamma in -3.0f64..3.0,
        ) {
            let g = Grid1D::new(11).unwrap();
            let beta = Coefficient::chebyshev(5.0, 7.35).sample(&g);
            for kind in [BoundaryKind::Dirichlet, BoundaryKind::Neumann] {
                let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + gamma * y).collect();
                let lhs = hyperbolic_step(&HyperbolicState { u: combo, t: 0.0 }, &beta, alpha * ca + gamma * cb, kind, 0.01, g.dx());
                let ra = hyperbolic_step(&HyperbolicState { u: a.clone(), t: 0.0 }, &beta, ca, kind, 0.01, g.dx());
                let rb = hyperbolic_step(&HyperbolicState { u: b.clone(), t: 0.0 }, &beta, cb, kind, 0.01, g.dx());
                for j in 0..11 {
                    let rhs = alpha * ra.u[j] + gamma * rb.u[j];
                    prop_assert!((lhs.u[j] - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
                }
            }
        }
    }
}
