//! 2D incompressible Navier-Stokes on the unit square with a controlled lid.
//!
//! Fields are stored as `(nx, ny)` arrays indexed `[i, j]` with `x = i dx`,
//! `y = j dy`. One step is predictor, boundary conditions, pressure solve,
//! corrector, boundary conditions.
//!
//! The predictor is the explicit centered scheme
//!
//! ```text
//! u*_ij = u_ij + dt nu (d2x u + d2y u)_ij - dt (u_ij dcx u + v_ij dcy u)_ij
//! ```
//!
//! and likewise for `v`. The pressure iteration is sometimes written as
//! `p <- [(p_e + p_w) dy^2 + (p_n + p_s) dx^2] / (2(dx^2 + dy^2)) + rho div(u*) dx^2 dy^2`,
//! which neither scales with `dt` nor enforces continuity. Here the right-hand
//! side is `(rho/dt) div(u*)` and the operator is the one the corrector
//! actually applies (see [`projection`]), so the corrected field is
//! divergence-free to the solver tolerance.

mod projection;
mod reference;

pub use projection::{IterativeSolve, PoissonSettings, ANCHOR};
pub use reference::{make_reference, substeps as reference_substeps, ReferenceTrajectory, Schedule, VelocityFrame};

pub(crate) use projection::Projection;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid2D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluidParams {
    /// Kinematic viscosity.
    pub nu: f64,
    pub rho: f64,
}

impl Default for FluidParams {
    fn default() -> Self {
        Self { nu: 0.1, rho: 1.0 }
    }
}

impl FluidParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Config(format!("viscosity must be positive, got {}", self.nu)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!("density must be positive, got {}", self.rho)));
        }
        Ok(())
    }
}

/// Velocity and pressure on the full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub p: Array2<f64>,
}

impl Field2D {
    pub fn zeros(grid: &Grid2D) -> Self {
        let s = grid.shape();
        Self { u: Array2::zeros(s), v: Array2::zeros(s), p: Array2::zeros(s) }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(self.v.iter()).chain(self.p.iter()).all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NSState {
    pub fields: Field2D,
    pub t: f64,
}

impl NSState {
    pub fn at_rest(grid: &Grid2D) -> Self {
        Self { fields: Field2D::zeros(grid), t: 0.0 }
    }

    /// `0.5 * sum(u^2 + v^2) dx dy`.
    pub fn kinetic_energy(&self, grid: &Grid2D) -> f64 {
        0.5 * grid.l2_norm_sq(self.fields.u.iter().chain(self.fields.v.iter()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    /// `y = 1`.
    #[default]
    Top,
    /// `y = 0`.
    Bottom,
    /// `x = 0`.
    Left,
    /// `x = 1`.
    Right,
}

/// Uniform tangential velocity imposed on one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidControl {
    pub value: f64,
    pub edge: Edge,
}

impl LidControl {
    pub fn top(value: f64) -> Self {
        Self { value, edge: Edge::Top }
    }
}

/// Indices of the nodes on `edge`, corners included.
pub(crate) fn edge_nodes(grid: &Grid2D, edge: Edge) -> Vec<(usize, usize)> {
    let (nx, ny) = grid.shape();
    match edge {
        Edge::Top => (0..nx).map(|i| (i, ny - 1)).collect(),
        Edge::Bottom => (0..nx).map(|i| (i, 0)).collect(),
        Edge::Left => (0..ny).map(|j| (0, j)).collect(),
        Edge::Right => (0..ny).map(|j| (nx - 1, j)).collect(),
    }
}

/// No-slip on every edge, then the controlled edge (corners included) gets the lid speed.
pub fn apply_velocity_bc(u: &mut Array2<f64>, v: &mut Array2<f64>, control: LidControl) {
    let (nx, ny) = u.dim();
    for i in 0..nx {
        for j in [0, ny - 1] {
            u[[i, j]] = 0.0;
            v[[i, j]] = 0.0;
        }
    }
    for j in 0..ny {
        for i in [0, nx - 1] {
            u[[i, j]] = 0.0;
            v[[i, j]] = 0.0;
        }
    }
    match control.edge {
        Edge::Top => u.column_mut(ny - 1).fill(control.value),
        Edge::Bottom => u.column_mut(0).fill(control.value),
        Edge::Left => v.row_mut(0).fill(control.value),
        Edge::Right => v.row_mut(nx - 1).fill(control.value),
    }
}

/// Explicit centered diffusion and advection at interior nodes; boundary values are copied.
pub fn ns_predictor(
    u: &Array2<f64>,
    v: &Array2<f64>,
    params: &FluidParams,
    dt: f64,
    grid: &Grid2D,
) -> (Array2<f64>, Array2<f64>) {
    let (nx, ny) = grid.shape();
    let (dx, dy) = (grid.dx(), grid.dy());
    let (idx2, idy2) = (1.0 / (dx * dx), 1.0 / (dy * dy));
    let (h2x, h2y) = (0.5 / dx, 0.5 / dy);
    let nu = params.nu;
    let mut us = u.clone();
    let mut vs = v.clone();
    for i in 1..nx - 1 {
        for j in 1..ny - 1 {
            let (uc, vc) = (u[[i, j]], v[[i, j]]);
            let lap_u =
                (u[[i - 1, j]] - 2.0 * uc + u[[i + 1, j]]) * idx2 + (u[[i, j - 1]] - 2.0 * uc + u[[i, j + 1]]) * idy2;
            let lap_v =
                (v[[i - 1, j]] - 2.0 * vc + v[[i + 1, j]]) * idx2 + (v[[i, j - 1]] - 2.0 * vc + v[[i, j + 1]]) * idy2;
            let adv_u = uc * (u[[i + 1, j]] - u[[i - 1, j]]) * h2x + vc * (u[[i, j + 1]] - u[[i, j - 1]]) * h2y;
            let adv_v = uc * (v[[i + 1, j]] - v[[i - 1, j]]) * h2x + vc * (v[[i, j + 1]] - v[[i, j - 1]]) * h2y;
            us[[i, j]] = uc + dt * nu * lap_u - dt * adv_u;
            vs[[i, j]] = vc + dt * nu * lap_v - dt * adv_v;
        }
    }
    (us, vs)
}

/// Centered divergence at interior nodes (zero on the boundary).
pub fn divergence(u: &Array2<f64>, v: &Array2<f64>, grid: &Grid2D) -> Array2<f64> {
    Projection::new(grid).divergence(u, v)
}

/// Largest absolute interior divergence.
pub fn max_divergence(u: &Array2<f64>, v: &Array2<f64>, grid: &Grid2D) -> f64 {
    divergence(u, v, grid).iter().fold(0.0f64, |m, d| m.max(d.abs()))
}

/// Solve for the pressure that makes the corrected field divergence-free.
///
/// Non-convergence is not an error: the best iterate is returned with its
/// residual and `converged = false`.
pub fn ns_pressure_solve(
    u_star: &Array2<f64>,
    v_star: &Array2<f64>,
    params: &FluidParams,
    dt: f64,
    grid: &Grid2D,
    settings: &PoissonSettings,
    warm: Option<&Array2<f64>>,
) -> IterativeSolve {
    let op = Projection::new(grid);
    let rhs = op.divergence(u_star, v_star) * (params.rho / dt);
    op.solve(&rhs, warm, settings, false, true)
}

/// Subtract the centered pressure gradient at interior nodes. Boundary values pass through.
pub fn ns_corrector(
    u_star: &Array2<f64>,
    v_star: &Array2<f64>,
    p: &Array2<f64>,
    params: &FluidParams,
    dt: f64,
    grid: &Grid2D,
) -> (Array2<f64>, Array2<f64>) {
    let (gx, gy) = Projection::new(grid).gradient(p);
    let s = dt / params.rho;
    (u_star - &(gx * s), v_star - &(gy * s))
}

/// Per-step solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub poisson_iterations: usize,
    pub poisson_residual: f64,
    pub poisson_converged: bool,
    pub max_divergence: f64,
}

/// One full projection step. Returns a blow-up error if any entry becomes non-finite.
pub fn ns_step(
    state: &NSState,
    control: LidControl,
    params: &FluidParams,
    dt: f64,
    grid: &Grid2D,
    poisson: &PoissonSettings,
) -> Result<(NSState, StepReport)> {
    let f = &state.fields;
    let (mut us, mut vs) = ns_predictor(&f.u, &f.v, params, dt, grid);
    apply_velocity_bc(&mut us, &mut vs, control);
    let solve = ns_pressure_solve(&us, &vs, params, dt, grid, poisson, Some(&f.p));
    let (mut u, mut v) = ns_corrector(&us, &vs, &solve.x, params, dt, grid);
    apply_velocity_bc(&mut u, &mut v, control);
    let report = StepReport {
        poisson_iterations: solve.iterations,
        poisson_residual: solve.residual,
        poisson_converged: solve.converged,
        max_divergence: max_divergence(&u, &v, grid),
    };
    let next = NSState { fields: Field2D { u, v, p: solve.x }, t: state.t + dt };
    if !next.fields.is_finite() {
        return Err(Error::BlowUp {
            step: (next.t / dt).round() as usize,
            what: "non-finite velocity or pressure".into(),
        });
    }
    Ok((next, report))
}

/// Bundles grid, fluid parameters and step settings.
#[derive(Debug, Clone)]
pub struct NsSolver {
    grid: Grid2D,
    params: FluidParams,
    dt: f64,
    poisson: PoissonSettings,
    edge: Edge,
}

impl NsSolver {
    /// `expected_speed` is the largest lid speed anticipated; it only feeds the stability warning.
    pub fn new(
        grid: Grid2D,
        params: FluidParams,
        dt: f64,
        poisson: PoissonSettings,
        edge: Edge,
        expected_speed: f64,
    ) -> Result<Self> {
        params.validate()?;
        if grid.nx() < 5 || grid.ny() < 5 {
            return Err(Error::Config(format!("2D grid needs at least 5x5 nodes, got {}x{}", grid.nx(), grid.ny())));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if poisson.max_iters == 0 || !(poisson.omega > 0.0 && poisson.omega <= 1.0) || !(poisson.tol > 0.0) {
            return Err(Error::Config(format!("invalid pressure solver settings {poisson:?}")));
        }
        let h = grid.dx().min(grid.dy());
        let diffusive = h * h / (4.0 * params.nu);
        let advective = if expected_speed > 0.0 { h / expected_speed } else { f64::INFINITY };
        if dt > diffusive.min(advective) {
            log::warn!("dt = {dt} exceeds the explicit stability estimate {}", diffusive.min(advective));
        }
        Ok(Self { grid, params, dt, poisson, edge })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn params(&self) -> &FluidParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn poisson(&self) -> &PoissonSettings {
        &self.poisson
    }

    pub fn edge(&self) -> Edge {
        self.edge
    }

    pub fn step(&self, state: &NSState, lid: f64) -> Result<(NSState, StepReport)> {
        ns_step(state, LidControl { value: lid, edge: self.edge }, &self.params, self.dt, &self.grid, &self.poisson)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cavity() -> Grid2D {
        Grid2D::new(21, 21).unwrap()
    }

    fn smooth_random(grid: &Grid2D, seed: u64) -> (Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = Array2::from_shape_fn(grid.shape(), |(i, j)| {
            let (x, y) = (grid.x(i), grid.y(j));
            c[0] * (2.0 * x).sin() * (3.0 * y).cos() + c[1] * x * y + c[2] * (y * y) + c[3]
        });
        let v = Array2::from_shape_fn(grid.shape(), |(i, j)| {
            let (x, y) = (grid.x(i), grid.y(j));
            c[4] * (x + 2.0 * y).cos() + c[5] * x * x + c[6] * (4.0 * x * y).sin() + c[7]
        });
        (u, v)
    }

    #[test]
    fn predictor_fixed_points() {
        let g = cavity();
        let p = FluidParams::default();
        let z = Array2::zeros(g.shape());
        let (us, vs) = ns_predictor(&z, &z, &p, 1e-3, &g);
        assert!(us.iter().chain(vs.iter()).all(|&x| x == 0.0));
        let c = Array2::from_elem(g.shape(), 1.7);
        let (us, vs) = ns_predictor(&c, &z, &p, 1e-3, &g);
        assert!(us.iter().all(|&x| (x - 1.7).abs() < 1e-14));
        assert!(vs.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn predictor_matches_transliteration() {
        let g = Grid2D::new(9, 11).unwrap();
        let p = FluidParams { nu: 0.07, rho: 1.0 };
        let dt = 1e-3;
        let mut u = Array2::<f64>::zeros(g.shape());
        let mut v = Array2::<f64>::zeros(g.shape());
        for i in 3..6 {
            for j in 4..7 {
                u[[i, j]] = 1.0 + (i * j) as f64 * 0.1;
                v[[i, j]] = -0.5 + i as f64 * 0.2 - j as f64 * 0.05;
            }
        }
        let (us, vs) = ns_predictor(&u, &v, &p, dt, &g);
        let (dx, dy) = (g.dx(), g.dy());
        for i in 1..8 {
            for j in 1..10 {
                let eu = u[[i, j]]
                    + dt * (p.nu
                        * ((u[[i - 1, j]] - 2.0 * u[[i, j]] + u[[i + 1, j]]) / dx.powi(2)
                            + (u[[i, j - 1]] - 2.0 * u[[i, j]] + u[[i, j + 1]]) / dy.powi(2)))
                    - dt * (u[[i, j]] * (u[[i + 1, j]] - u[[i - 1, j]]) / (2.0 * dx)
                        + v[[i, j]] * (u[[i, j + 1]] - u[[i, j - 1]]) / (2.0 * dy));
                let ev = v[[i, j]]
                    + dt * (p.nu
                        * ((v[[i - 1, j]] - 2.0 * v[[i, j]] + v[[i + 1, j]]) / dx.powi(2)
                            + (v[[i, j - 1]] - 2.0 * v[[i, j]] + v[[i, j + 1]]) / dy.powi(2)))
                    - dt * (u[[i, j]] * (v[[i + 1, j]] - v[[i - 1, j]]) / (2.0 * dx)
                        + v[[i, j]] * (v[[i, j + 1]] - v[[i, j - 1]]) / (2.0 * dy));
                assert!((us[[i, j]] - eu).abs() < 1e-14, "u at ({i},{j})");
                assert!((vs[[i, j]] - ev).abs() < 1e-14, "v at ({i},{j})");
            }
        }
    }

    #[test]
    fn boundary_conditions() {
        let g = cavity();
        let mut u = Array2::from_elem(g.shape(), 5.0);
        let mut v = Array2::from_elem(g.shape(), -3.0);
        apply_velocity_bc(&mut u, &mut v, LidControl::top(2.0));
        for i in 0..21 {
            assert_eq!(u[[i, 20]], 2.0);
            assert_eq!(v[[i, 20]], 0.0);
            assert_eq!(u[[i, 0]], 0.0);
        }
        for j in 0..20 {
            assert_eq!(u[[0, j]], 0.0);
            assert_eq!(v[[20, j]], 0.0);
        }
        assert_eq!(u[[10, 10]], 5.0);
        let (u1, v1) = (u.clone(), v.clone());
        apply_velocity_bc(&mut u, &mut v, LidControl::top(2.0));
        assert_eq!(u, u1);
        assert_eq!(v, v1);

        for edge in [Edge::Bottom, Edge::Left, Edge::Right] {
            let mut u = Array2::from_elem(g.shape(), 1.0);
            let mut v = Array2::from_elem(g.shape(), 1.0);
            apply_velocity_bc(&mut u, &mut v, LidControl { value: 4.0, edge });
            for (i, j) in edge_nodes(&g, edge) {
                let (tangential, normal) = match edge {
                    Edge::Top | Edge::Bottom => (u[[i, j]], v[[i, j]]),
                    Edge::Left | Edge::Right => (v[[i, j]], u[[i, j]]),
                };
                assert_eq!(tangential, 4.0);
                assert_eq!(normal, 0.0);
            }
        }
    }

    #[test]
    fn pressure_zero_for_zero_rhs() {
        let g = cavity();
        let z = Array2::zeros(g.shape());
        let s = ns_pressure_solve(&z, &z, &FluidParams::default(), 1e-3, &g, &PoissonSettings::default(), None);
        assert!(s.x.iter().all(|&p| p == 0.0));
        assert!(s.converged);
    }

    #[test]
    fn corrector_on_linear_pressure() {
        let g = cavity();
        let (us, vs) = smooth_random(&g, 3);
        let p = Array2::from_shape_fn(g.shape(), |(i, _)| g.x(i));
        let params = FluidParams { nu: 0.1, rho: 2.0 };
        let dt = 1e-3;
        let (u, v) = ns_corrector(&us, &vs, &p, &params, dt, &g);
        for i in 1..20 {
            for j in 1..20 {
                assert!((u[[i, j]] - (us[[i, j]] - dt / params.rho)).abs() < 1e-13);
                assert!((v[[i, j]] - vs[[i, j]]).abs() < 1e-15);
            }
        }
        let c = Array2::from_elem(g.shape(), 3.0);
        let (u, v) = ns_corrector(&us, &vs, &c, &params, dt, &g);
        assert_eq!(u, us);
        assert_eq!(v, vs);
    }

    #[test]
    fn projection_removes_divergence() {
        let g = cavity();
        let params = FluidParams::default();
        let dt = 1e-3;
        for seed in 0..5 {
            let (mut us, mut vs) = smooth_random(&g, seed);
            apply_velocity_bc(&mut us, &mut vs, LidControl::top(3.0));
            let before = max_divergence(&us, &vs, &g);
            let s = ns_pressure_solve(&us, &vs, &params, dt, &g, &PoissonSettings::default(), None);
            assert_eq!(s.x[ANCHOR], 0.0);
            let (u, v) = ns_corrector(&us, &vs, &s.x, &params, dt, &g);
            let after = max_divergence(&u, &v, &g);
            assert!(after <= 1e-3, "seed {seed}: divergence {before} -> {after}");
        }
    }

    /// Pressure whose gradient is prescribed analytically is recovered to second order.
    #[test]
    fn manufactured_pressure() {
        let exact = |x: f64, y: f64| (std::f64::consts::PI * x).cos() * (std::f64::consts::PI * y).cos();
        let pi = std::f64::consts::PI;
        let mut errs = Vec::new();
        for n in [11usize, 21, 41] {
            let g = Grid2D::new(n, n).unwrap();
            let params = FluidParams::default();
            let dt = 1.0;
            // u* = (dt/rho) grad p, so the projection must hand back p
            let us = Array2::from_shape_fn(g.shape(), |(i, j)| -pi * (pi * g.x(i)).sin() * (pi * g.y(j)).cos());
            let vs = Array2::from_shape_fn(g.shape(), |(i, j)| -pi * (pi * g.x(i)).cos() * (pi * g.y(j)).sin());
            let settings = PoissonSettings { max_iters: 200_000, tol: 1e-12, omega: 0.8 };
            let s = ns_pressure_solve(&us, &vs, &params, dt, &g, &settings, None);
            let anchor = exact(g.x(1), g.y(1));
            let mut err = 0.0f64;
            for i in 1..n - 1 {
                for j in 1..n - 1 {
                    err = err.max((s.x[[i, j]] - (exact(g.x(i), g.y(j)) - anchor)).abs());
                }
            }
            errs.push(err);
        }
        assert!(errs[2] < 0.05, "{errs:?}");
        assert!(errs[1] / errs[2] > 3.0, "not second order: {errs:?}");
    }

    #[test]
    fn residual_non_increasing() {
        let g = Grid2D::new(11, 11).unwrap();
        let (mut us, mut vs) = smooth_random(&g, 9);
        apply_velocity_bc(&mut us, &mut vs, LidControl::top(1.0));
        let params = FluidParams::default();
        let mut last = f64::INFINITY;
        for k in [1usize, 5, 20, 80, 320] {
            let s = ns_pressure_solve(
                &us,
                &vs,
                &params,
                1e-3,
                &g,
                &PoissonSettings { max_iters: k, tol: 0.0, omega: 0.8 },
                None,
            );
            assert!(s.residual <= last * (1.0 + 1e-12), "k={k}: {} > {last}", s.residual);
            last = s.residual;
        }
    }

    #[test]
    fn quiescent_fixed_point() {
        let g = cavity();
        let solver =
            NsSolver::new(g, FluidParams::default(), 1e-3, PoissonSettings::default(), Edge::Top, 10.0).unwrap();
        let s0 = NSState::at_rest(&g);
        let (s1, _) = solver.step(&s0, 0.0).unwrap();
        assert_eq!(s1.fields, s0.fields);
        assert_eq!(s1.t, 1e-3);
    }

    #[test]
    fn lid_driven_startup() {
        let g = cavity();
        let solver =
            NsSolver::new(g, FluidParams::default(), 1e-3, PoissonSettings::default(), Edge::Top, 1.0).unwrap();
        let mut s = NSState::at_rest(&g);
        let mut ke = s.kinetic_energy(&g);
        for k in 0..20 {
            let (next, rep) = solver.step(&s, 1.0).unwrap();
            let e = next.kinetic_energy(&g);
            assert!(e > ke && e.is_finite(), "step {k}: {ke} -> {e}");
            assert!(rep.max_divergence <= 1e-3, "step {k}: {}", rep.max_divergence);
            assert_eq!(next.fields.p[ANCHOR], 0.0);
            ke = e;
            s = next;
        }
    }

    #[test]
    fn rejects_bad_settings() {
        let g = cavity();
        assert!(NsSolver::new(g, FluidParams { nu: 0.0, rho: 1.0 }, 1e-3, PoissonSettings::default(), Edge::Top, 1.0)
            .is_err());
        let bad = PoissonSettings { max_iters: 0, ..PoissonSettings::default() };
        assert!(NsSolver::new(g, FluidParams::default(), 1e-3, bad, Edge::Top, 1.0).is_err());
        assert!(NsSolver::new(
            Grid2D::new(4, 9).unwrap(),
            FluidParams::default(),
            1e-3,
            PoissonSettings::default(),
            Edge::Top,
            1.0
        )
        .is_err());
    }
}
