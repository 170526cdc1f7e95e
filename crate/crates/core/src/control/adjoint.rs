//! Adjoint-based lid control for the cavity tracking problem.
//!
//! The cost is
//!
//! ```text
//! J(U) = 1/2 sum_k |u_k - u_ref,k|^2 dt_c + gamma/2 sum_k (U_k - U_ref)^2 dt_c
//! ```
//!
//! with `|.|` the rectangle-rule L2 norm over both velocity components and
//! `u_k` the field at the end of control step `k`.
//!
//! [`AdjointForm::Transposed`] (the default) propagates the costate through
//! the exact transpose of the discrete step: boundary overwrite, projection
//! (via a transposed pressure solve for the adjoint pressure `mu`) and the
//! linearized centered predictor. Its gradient matches finite differences of
//! [`evaluate_cost`] to solver precision. The lid sensitivity it produces is
//! dominated by `nu` times the discrete wall-normal derivative of the
//! tangential costate, so `g = 0` is the discrete form of the stationarity
//! condition `U = U_ref - (nu/gamma) int d(lambda_1)/dn`.
//!
//! [`AdjointForm::Printed`] integrates the continuous costate equation
//! `d(lambda)/dt = -(G + G^T) u - nu lap(lambda) - grad(mu) + (u - u_ref)` with
//! `G = grad(lambda)` backward in time, then reads the gradient from the
//! wall-normal derivative. It is kept for comparison; it does not agree with
//! finite differences.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::ns2d::{
    edge_nodes, Edge, NSState, NsSolver, PoissonSettings, Projection, ReferenceTrajectory, VelocityFrame,
};

/// One lid speed per control step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    pub values: Vec<f64>,
    pub dt_control: f64,
}

impl ControlSchedule {
    pub fn constant(value: f64, steps: usize, dt_control: f64) -> Self {
        Self { values: vec![value; steps], dt_control }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check(&self, reference: &ReferenceTrajectory) -> Result<()> {
        if self.values.len() != reference.len() {
            return Err(Error::Input(format!(
                "schedule has {} steps, reference has {}",
                self.values.len(),
                reference.len()
            )));
        }
        if (self.dt_control - reference.dt_control).abs() > 1e-12 * reference.dt_control {
            return Err(Error::Input("schedule and reference use different control steps".into()));
        }
        if let Some(k) = self.values.iter().position(|u| !u.is_finite()) {
            return Err(Error::Input(format!("schedule entry {k} is not finite")));
        }
        Ok(())
    }
}

/// Control-cost weight and target lid speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    pub gamma: f64,
    pub u_ref: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { gamma: 0.1, u_ref: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub tracking: f64,
    pub control: f64,
    pub total: f64,
}

/// Velocity at every solver step, the initial state included.
#[derive(Debug, Clone)]
pub struct ForwardTrajectory {
    pub states: Vec<VelocityFrame>,
    pub substeps: usize,
}

impl ForwardTrajectory {
    /// Field at the end of control step `k`.
    pub fn frame(&self, k: usize) -> &VelocityFrame {
        &self.states[(k + 1) * self.substeps]
    }
}

pub fn rollout(schedule: &ControlSchedule, solver: &NsSolver) -> Result<ForwardTrajectory> {
    let sub = crate::solver::ns2d::reference_substeps(schedule.dt_control, solver.dt())?;
    let mut state = NSState::at_rest(solver.grid());
    let mut states = Vec::with_capacity(schedule.len() * sub + 1);
    states.push(VelocityFrame { u: state.fields.u.clone(), v: state.fields.v.clone() });
    for (k, &lid) in schedule.values.iter().enumerate() {
        for _ in 0..sub {
            state = solver
                .step(&state, lid)
                .map_err(|e| match e {
                    Error::BlowUp { what, .. } => Error::BlowUp { step: k, what },
                    other => other,
                })?
                .0;
            states.push(VelocityFrame { u: state.fields.u.clone(), v: state.fields.v.clone() });
        }
    }
    Ok(ForwardTrajectory { states, substeps: sub })
}

fn cost_of(
    traj: &ForwardTrajectory,
    schedule: &ControlSchedule,
    reference: &ReferenceTrajectory,
    solver: &NsSolver,
    weights: &CostWeights,
) -> CostBreakdown {
    let grid = solver.grid();
    let dt = schedule.dt_control;
    let mut tracking = 0.0;
    for (k, r) in reference.frames.iter().enumerate() {
        let f = traj.frame(k);
        let du = &f.u - &r.u;
        let dv = &f.v - &r.v;
        tracking += 0.5 * grid.l2_norm_sq(du.iter().chain(dv.iter())) * dt;
    }
    let control: f64 = schedule.values.iter().map(|u| 0.5 * weights.gamma * (u - weights.u_ref).powi(2) * dt).sum();
    CostBreakdown { tracking, control, total: tracking + control }
}

pub fn evaluate_cost(
    schedule: &ControlSchedule,
    reference: &ReferenceTrajectory,
    solver: &NsSolver,
    weights: &CostWeights,
) -> Result<CostBreakdown> {
    schedule.check(reference)?;
    let traj = rollout(schedule, solver)?;
    Ok(cost_of(&traj, schedule, reference, solver, weights))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjointForm {
    /// Exact transpose of the discrete forward step.
    #[default]
    Transposed,
    /// Continuous costate equation as commonly printed, discretized explicitly.
    Printed,
}

/// Costate at the start of each control step, plus the lid sensitivities.
#[derive(Debug, Clone)]
pub struct AdjointState {
    /// `(lambda_u, lambda_v)` at the start of control step `k`.
    pub lam: Vec<(Array2<f64>, Array2<f64>)>,
    /// Adjoint pressure from the last solve in control step `k`.
    pub mu: Vec<Array2<f64>>,
    /// Derivative of the tracking term with respect to `U_k`, per unit control time.
    pub lid_sensitivity: Vec<f64>,
    pub form: AdjointForm,
}

/// Pressure-solve settings for the backward sweep. Tolerances are relative to the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdjointSettings {
    pub form: AdjointForm,
    pub poisson: PoissonSettings,
}

impl Default for AdjointSettings {
    fn default() -> Self {
        Self { form: AdjointForm::Transposed, poisson: PoissonSettings { max_iters: 20_000, tol: 1e-10, omega: 0.8 } }
    }
}

/// Solve with the right-hand side normalized to unit max-norm, then scale back.
fn solve_scaled(
    op: &Projection,
    rhs: &Array2<f64>,
    settings: &PoissonSettings,
    transpose: bool,
    anchor: bool,
) -> Array2<f64> {
    let scale = rhs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Array2::zeros(rhs.dim());
    }
    let r = rhs / scale;
    op.solve(&r, None, settings, transpose, anchor).x * scale
}

/// `Pi^T (lu, lv)`: the transpose of `x -> x - G M A^+ D x`. Returns the adjoint pressure.
fn projection_transpose(
    op: &Projection,
    lu: &mut Array2<f64>,
    lv: &mut Array2<f64>,
    settings: &PoissonSettings,
) -> Array2<f64> {
    let q = op.gradient_transpose(lu, lv);
    let mut r = q;
    // mirror transpose folds edge entries into the adjacent interior row
    let (nx, ny) = r.dim();
    for j in 1..ny - 1 {
        r[[1, j]] += r[[0, j]];
        r[[nx - 2, j]] += r[[nx - 1, j]];
    }
    for i in 1..nx - 1 {
        r[[i, 1]] += r[[i, 0]];
        r[[i, ny - 2]] += r[[i, ny - 1]];
    }
    op.zero_boundary(&mut r);
    let w = solve_scaled(op, &r, settings, true, false);
    let (fx, fy) = op.divergence_transpose(&w);
    *lu -= &fx;
    *lv -= &fy;
    w
}

/// Transpose of the linearized predictor at state `(u, v)` applied to interior `(zu, zv)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn predictor_transpose(
    u: &Array2<f64>,
    v: &Array2<f64>,
    zu: &Array2<f64>,
    zv: &Array2<f64>,
    nu: f64,
    dt: f64,
    dx: f64,
    dy: f64,
) -> (Array2<f64>, Array2<f64>) {
    let (nx, ny) = u.dim();
    let (cx, cy) = (dt * nu / (dx * dx), dt * nu / (dy * dy));
    let (hx, hy) = (dt * 0.5 / dx, dt * 0.5 / dy);
    let mut lu = Array2::zeros((nx, ny));
    let mut lv = Array2::zeros((nx, ny));
    for i in 1..nx - 1 {
        for j in 1..ny - 1 {
            let (a, b) = (zu[[i, j]], zv[[i, j]]);
            let (uc, vc) = (u[[i, j]], v[[i, j]]);
            lu[[i, j]] += a * (1.0 - 2.0 * cx - 2.0 * cy);
            lv[[i, j]] += b * (1.0 - 2.0 * cx - 2.0 * cy);
            lu[[i + 1, j]] += a * cx;
            lu[[i - 1, j]] += a * cx;
            lu[[i, j + 1]] += a * cy;
            lu[[i, j - 1]] += a * cy;
            lv[[i + 1, j]] += b * cx;
            lv[[i - 1, j]] += b * cx;
            lv[[i, j + 1]] += b * cy;
            lv[[i, j - 1]] += b * cy;

            let (ux, uy) = ((u[[i + 1, j]] - u[[i - 1, j]]) * hx, (u[[i, j + 1]] - u[[i, j - 1]]) * hy);
            let (vx, vy) = ((v[[i + 1, j]] - v[[i - 1, j]]) * hx, (v[[i, j + 1]] - v[[i, j - 1]]) * hy);
            lu[[i, j]] -= a * ux + b * vx;
            lv[[i, j]] -= a * uy + b * vy;
            lu[[i + 1, j]] -= a * uc * hx;
            lu[[i - 1, j]] += a * uc * hx;
            lu[[i, j + 1]] -= a * vc * hy;
            lu[[i, j - 1]] += a * vc * hy;
            lv[[i + 1, j]] -= b * uc * hx;
            lv[[i - 1, j]] += b * uc * hx;
            lv[[i, j + 1]] -= b * vc * hy;
            lv[[i, j - 1]] += b * vc * hy;
        }
    }
    (lu, lv)
}

fn tangential_sum(edge: Edge, solver: &NsSolver, lu: &Array2<f64>, lv: &Array2<f64>) -> f64 {
    let f = match edge {
        Edge::Top | Edge::Bottom => lu,
        Edge::Left | Edge::Right => lv,
    };
    edge_nodes(solver.grid(), edge).into_iter().map(|ij| f[ij]).sum()
}

/// Integrate the costate backward from zero along `forward`.
pub fn solve_adjoint(
    forward: &ForwardTrajectory,
    reference: &ReferenceTrajectory,
    solver: &NsSolver,
    settings: &AdjointSettings,
) -> Result<AdjointState> {
    let sub = forward.substeps;
    let steps = reference.len();
    if forward.states.len() != steps * sub + 1 {
        return Err(Error::Input("forward trajectory does not match the reference length".into()));
    }
    match settings.form {
        AdjointForm::Transposed => transposed_sweep(forward, reference, solver, settings),
        AdjointForm::Printed => printed_sweep(forward, reference, solver, settings),
    }
}

fn transposed_sweep(
    forward: &ForwardTrajectory,
    reference: &ReferenceTrajectory,
    solver: &NsSolver,
    settings: &AdjointSettings,
) -> Result<AdjointState> {
    let grid = solver.grid();
    let op = Projection::new(grid);
    let sub = forward.substeps;
    let steps = reference.len();
    let weight = reference.dt_control * grid.dx() * grid.dy();
    let shape = grid.shape();
    let mut lu = Array2::<f64>::zeros(shape);
    let mut lv = Array2::<f64>::zeros(shape);
    let mut lam = vec![(Array2::zeros(shape), Array2::zeros(shape)); steps];
    let mut mu = vec![Array2::zeros(shape); steps];
    let mut lid = vec![0.0; steps];
    for n in (0..steps * sub).rev() {
        let k = n / sub;
        if (n + 1) % sub == 0 {
            let x = &forward.states[n + 1];
            let r = &reference.frames[k];
            lu.zip_mut_with(&(&x.u - &r.u), |l, d| *l += weight * d);
            lv.zip_mut_with(&(&x.v - &r.v), |l, d| *l += weight * d);
        }
        let w = projection_transpose(&op, &mut lu, &mut lv, &settings.poisson);
        lid[k] += tangential_sum(solver.edge(), solver, &lu, &lv);
        op.zero_boundary(&mut lu);
        op.zero_boundary(&mut lv);
        let x = &forward.states[n];
        let (nu_, nv_) =
            predictor_transpose(&x.u, &x.v, &lu, &lv, solver.params().nu, solver.dt(), grid.dx(), grid.dy());
        lu = nu_;
        lv = nv_;
        if !(lu.iter().all(|x| x.is_finite()) && lv.iter().all(|x| x.is_finite())) {
            return Err(Error::BlowUp { step: k, what: "non-finite costate in backward sweep".into() });
        }
        if n % sub == 0 {
            lam[k] = (lu.clone(), lv.clone());
            mu[k] = w;
        }
    }
    let lid_sensitivity = lid.into_iter().map(|s| s / reference.dt_control).collect();
    Ok(AdjointState { lam, mu, lid_sensitivity, form: AdjointForm::Transposed })
}

fn printed_sweep(
    forward: &ForwardTrajectory,
    reference: &ReferenceTrajectory,
    solver: &NsSolver,
    settings: &AdjointSettings,
) -> Result<AdjointState> {
    let grid = solver.grid();
    let op = Projection::new(grid);
    let (nx, ny) = grid.shape();
    let (dx, dy) = (grid.dx(), grid.dy());
    let (hx, hy) = (0.5 / dx, 0.5 / dy);
    let nu = solver.params().nu;
    let dt = solver.dt();
    let sub = forward.substeps;
    let steps = reference.len();
    let shape = grid.shape();
    let mut lu = Array2::<f64>::zeros(shape);
    let mut lv = Array2::<f64>::zeros(shape);
    let mut lam = vec![(Array2::zeros(shape), Array2::zeros(shape)); steps];
    let mut mu = vec![Array2::zeros(shape); steps];
    let mut lid = vec![0.0; steps];
    for n in (0..steps * sub).rev() {
        let k = n / sub;
        let x = &forward.states[n + 1];
        let r = &reference.frames[k];
        let mut nu_ = lu.clone();
        let mut nv_ = lv.clone();
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                let (uc, vc) = (x.u[[i, j]], x.v[[i, j]]);
                let l1x = (lu[[i + 1, j]] - lu[[i - 1, j]]) * hx;
                let l1y = (lu[[i, j + 1]] - lu[[i, j - 1]]) * hy;
                let l2x = (lv[[i + 1, j]] - lv[[i - 1, j]]) * hx;
                let l2y = (lv[[i, j + 1]] - lv[[i, j - 1]]) * hy;
                // (G u)_a = sum_b dl_a/dx_b u_b, (G^T u)_a = sum_b dl_b/dx_a u_b
                let gu1 = l1x * uc + l1y * vc + l1x * uc + l2x * vc;
                let gu2 = l2x * uc + l2y * vc + l1y * uc + l2y * vc;
                let lap1 = (lu[[i + 1, j]] - 2.0 * lu[[i, j]] + lu[[i - 1, j]]) / (dx * dx)
                    + (lu[[i, j + 1]] - 2.0 * lu[[i, j]] + lu[[i, j - 1]]) / (dy * dy);
                let lap2 = (lv[[i + 1, j]] - 2.0 * lv[[i, j]] + lv[[i - 1, j]]) / (dx * dx)
                    + (lv[[i, j + 1]] - 2.0 * lv[[i, j]] + lv[[i, j - 1]]) / (dy * dy);
                // stepping backward: lambda(t - dt) = lambda(t) - dt * d(lambda)/dt
                nu_[[i, j]] += dt * (gu1 + nu * lap1 - (uc - r.u[[i, j]]));
                nv_[[i, j]] += dt * (gu2 + nu * lap2 - (vc - r.v[[i, j]]));
            }
        }
        op.zero_boundary(&mut nu_);
        op.zero_boundary(&mut nv_);
        let rhs = op.divergence(&nu_, &nv_);
        let m = solve_scaled(&op, &rhs, &settings.poisson, false, true);
        let mut mm = m.clone();
        op.mirror(&mut mm);
        let (gx, gy) = op.gradient(&mm);
        nu_ -= &gx;
        nv_ -= &gy;
        op.zero_boundary(&mut nu_);
        op.zero_boundary(&mut nv_);
        lu = nu_;
        lv = nv_;
        if !(lu.iter().all(|x| x.is_finite()) && lv.iter().all(|x| x.is_finite())) {
            return Err(Error::BlowUp { step: k, what: "non-finite costate in backward sweep".into() });
        }
        lid[k] += dt * nu * normal_derivative(solver.edge(), &lu, &lv, dx, dy);
        if n % sub == 0 {
            lam[k] = (lu.clone(), lv.clone());
            mu[k] = m;
        }
    }
    let lid_sensitivity = lid.into_iter().map(|s| s / reference.dt_control).collect();
    Ok(AdjointState { lam, mu, lid_sensitivity, form: AdjointForm::Printed })
}

/// Trapezoid line integral along `edge` of the one-sided derivative of the
/// tangential costate, taken in the direction of increasing normal coordinate.
fn normal_derivative(edge: Edge, lu: &Array2<f64>, lv: &Array2<f64>, dx: f64, dy: f64) -> f64 {
    let (nx, ny) = lu.dim();
    let line = |vals: Vec<f64>, h: f64| crate::grid::trapezoid(&vals, h);
    match edge {
        Edge::Top => line((0..nx).map(|i| (lu[[i, ny - 1]] - lu[[i, ny - 2]]) / dy).collect(), dx),
        Edge::Bottom => line((0..nx).map(|i| (lu[[i, 1]] - lu[[i, 0]]) / dy).collect(), dx),
        Edge::Left => line((0..ny).map(|j| (lv[[1, j]] - lv[[0, j]]) / dx).collect(), dy),
        Edge::Right => line((0..ny).map(|j| (lv[[nx - 1, j]] - lv[[nx - 2, j]]) / dx).collect(), dy),
    }
}

/// `g_k = gamma (U_k - U_ref) + lid sensitivity`, so `dJ/dU_k = g_k dt_control`.
pub fn control_gradient(adjoint: &AdjointState, schedule: &ControlSchedule, weights: &CostWeights) -> Vec<f64> {
    schedule.values.iter().zip(&adjoint.lid_sensitivity).map(|(u, s)| weights.gamma * (u - weights.u_ref) + s).collect()
}

/// Cost and gradient density in one forward/backward pass.
pub fn cost_and_gradient(
    schedule: &ControlSchedule,
    reference: &ReferenceTrajectory,
    solver: &NsSolver,
    weights: &CostWeights,
    settings: &AdjointSettings,
) -> Result<(CostBreakdown, Vec<f64>)> {
    schedule.check(reference)?;
    let traj = rollout(schedule, solver)?;
    let cost = cost_of(&traj, schedule, reference, solver, weights);
    let adj = solve_adjoint(&traj, reference, solver, settings)?;
    Ok((cost, control_gradient(&adj, schedule, weights)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSettings {
    pub iters: usize,
    /// Initial step applied to the gradient density.
    pub step: f64,
    pub max_halvings: usize,
    pub adjoint: AdjointSettings,
}

impl Default for OptimizeSettings {
    fn default() -> Self {
        Self { iters: 20, step: 50.0, max_halvings: 20, adjoint: AdjointSettings::default() }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub schedule: ControlSchedule,
    /// Cost of the initial schedule followed by every accepted iterate.
    pub history: Vec<CostBreakdown>,
    /// The line search ran out of halvings before `iters` was reached.
    pub stalled: bool,
}

/// Gradient descent with backtracking: the step is halved until the cost decreases.
///
/// An accepted step is doubled for the next iteration.
pub fn optimize(
    initial: &ControlSchedule,
    reference: &ReferenceTrajectory,
    solver: &NsSolver,
    weights: &CostWeights,
    settings: &OptimizeSettings,
) -> Result<OptimizeResult> {
    if settings.iters == 0 {
        return Err(Error::Config("optimizer needs at least one iteration".into()));
    }
    let mut schedule = initial.clone();
    let (mut cost, mut grad) = cost_and_gradient(&schedule, reference, solver, weights, &settings.adjoint)?;
    let mut history = vec![cost];
    let mut step = settings.step;
    let mut stalled = false;
    for it in 0..settings.iters {
        let mut accepted = None;
        for _ in 0..=settings.max_halvings {
            let trial = ControlSchedule {
                values: schedule.values.iter().zip(&grad).map(|(u, g)| u - step * g).collect(),
                dt_control: schedule.dt_control,
            };
            match evaluate_cost(&trial, reference, solver, weights) {
                Ok(c) if c.total < cost.total => {
                    accepted = Some(trial);
                    break;
                }
                Ok(_) | Err(Error::BlowUp { .. }) => step *= 0.5,
                Err(e) => return Err(e),
            }
        }
        match accepted {
            Some(next) => {
                schedule = next;
                let (c, g) = cost_and_gradient(&schedule, reference, solver, weights, &settings.adjoint)?;
                log::debug!("optimizer iteration {it}: cost {} step {step}", c.total);
                cost = c;
                grad = g;
                history.push(cost);
                step *= 2.0;
            }
            None => {
                stalled = true;
                break;
            }
        }
    }
    Ok(OptimizeResult { schedule, history, stalled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;
    use crate::solver::ns2d::{make_reference, FluidParams, Schedule};

    fn tight() -> PoissonSettings {
        PoissonSettings { max_iters: 100_000, tol: 1e-12, omega: 0.8 }
    }

    fn small_solver() -> NsSolver {
        NsSolver::new(Grid2D::new(11, 11).unwrap(), FluidParams::default(), 1e-3, tight(), Edge::Top, 3.0).unwrap()
    }

    fn bumpy(shape: (usize, usize), s: f64) -> Array2<f64> {
        Array2::from_shape_fn(shape, |(i, j)| ((i as f64 + 0.3) * s).sin() + ((j as f64) * 0.7 * s).cos())
    }

    fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn projection_transpose_is_consistent() {
        let g = Grid2D::new(11, 9).unwrap();
        let op = Projection::new(&g);
        let s = tight();
        let (xu, xv) = (bumpy(g.shape(), 0.9), bumpy(g.shape(), 1.3));
        let (zu, zv) = (bumpy(g.shape(), 2.1), bumpy(g.shape(), 0.4));
        // forward projection applied to a field whose boundary is left as is
        let p = op.solve(&op.divergence(&xu, &xv), None, &s, false, true).x;
        let (gx, gy) = op.gradient(&p);
        let (pu, pv) = (&xu - &gx, &xv - &gy);
        let (mut tu, mut tv) = (zu.clone(), zv.clone());
        projection_transpose(&op, &mut tu, &mut tv, &s);
        let lhs = dot(&pu, &zu) + dot(&pv, &zv);
        let rhs = dot(&xu, &tu) + dot(&xv, &tv);
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn predictor_transpose_is_consistent() {
        let g = Grid2D::new(9, 8).unwrap();
        let p = FluidParams::default();
        let (u, v) = (bumpy(g.shape(), 0.8), bumpy(g.shape(), 1.1));
        let (du, dv) = (bumpy(g.shape(), 1.7), bumpy(g.shape(), 0.3));
        let op = Projection::new(&g);
        let (mut zu, mut zv) = (bumpy(g.shape(), 2.3), bumpy(g.shape(), 0.6));
        op.zero_boundary(&mut zu);
        op.zero_boundary(&mut zv);
        let eps = 1e-3;
        let (ap, bp) = crate::solver::ns2d::ns_predictor(&(&u + &(&du * eps)), &(&v + &(&dv * eps)), &p, 1e-3, &g);
        let (am, bm) = crate::solver::ns2d::ns_predictor(&(&u - &(&du * eps)), &(&v - &(&dv * eps)), &p, 1e-3, &g);
        let lhs = (dot(&(&ap - &am), &zu) + dot(&(&bp - &bm), &zv)) / (2.0 * eps);
        let (tu, tv) = predictor_transpose(&u, &v, &zu, &zv, p.nu, 1e-3, g.dx(), g.dy());
        let rhs = dot(&du, &tu) + dot(&dv, &tv);
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs(), "{lhs} vs {rhs}");
    }

    fn problem(steps: usize) -> (NsSolver, ReferenceTrajectory) {
        let s = small_solver();
        let r = make_reference(&Schedule::default(), &s, 1e-3, steps as f64 * 1e-3).unwrap();
        (s, r)
    }

    #[test]
    fn zero_residual_gives_zero_costate() {
        let (s, r) = problem(5);
        let sched = ControlSchedule { values: r.controls.clone(), dt_control: 1e-3 };
        let traj = rollout(&sched, &s).unwrap();
        let adj = solve_adjoint(&traj, &r, &s, &AdjointSettings::default()).unwrap();
        assert!(adj.lam.iter().all(|(a, b)| a.iter().chain(b.iter()).all(|&x| x == 0.0)));
        assert!(adj.mu.iter().all(|m| m.iter().all(|&x| x == 0.0)));
        let w = CostWeights { gamma: 0.1, u_ref: 2.0 };
        let g = control_gradient(&adj, &ControlSchedule::constant(3.0, 5, 1e-3), &w);
        assert!(g.iter().all(|&x| (x - 0.1).abs() < 1e-15));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (s, r) = problem(20);
        let w = CostWeights::default();
        let sched =
            ControlSchedule { values: (0..20).map(|k| 1.0 + 0.5 * (k as f64 * 0.4).sin()).collect(), dt_control: 1e-3 };
        let (_, g) = cost_and_gradient(&sched, &r, &s, &w, &AdjointSettings::default()).unwrap();
        let eps = 1e-4;
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..20 {
            let mut p = sched.clone();
            p.values[k] += eps;
            let mut m = sched.clone();
            m.values[k] -= eps;
            let fd = (evaluate_cost(&p, &r, &s, &w).unwrap().total - evaluate_cost(&m, &r, &s, &w).unwrap().total)
                / (2.0 * eps);
            num += (g[k] * 1e-3 - fd).powi(2);
            den += fd * fd;
        }
        let rel = (num / den).sqrt();
        assert!(rel < 1e-4, "relative error {rel}");
    }

    #[test]
    fn optimize_descends() {
        let (s, r) = problem(20);
        let w = CostWeights::default();
        let init = ControlSchedule::constant(0.0, 20, 1e-3);
        let settings = OptimizeSettings { iters: 5, ..OptimizeSettings::default() };
        let res = optimize(&init, &r, &s, &w, &settings).unwrap();
        assert!(res.history.windows(2).all(|p| p[1].total <= p[0].total));
        assert!(res.history.last().unwrap().total < res.history[0].total);
    }
}
