//! Backstepping boundary feedback for the two 1D plants.
//!
//! Transport plant: the kernel solves the Volterra equation
//! `k(x) = -beta(x) + int_0^x beta(x - y) k(y) dy` and the feedback is
//! `U = int_0^1 k(1 - y) u(y) dy`.
//!
//! Reaction-diffusion plant: the kernel solves
//! `k_xx - k_yy = lambda(y) k` on `0 <= y <= x <= 1` with `k(x, 0) = 0` and
//! `k(x, x) = -1/2 int_0^x lambda`. In `xi = x + y`, `eta = x - y` this becomes
//!
//! ```text
//! G(xi, eta) = -1/4 int_eta^xi lambda(s/2) ds
//!              + 1/4 int_eta^xi int_0^eta lambda((tau - s)/2) G(tau, s) ds dtau
//! ```
//!
//! which is solved by successive approximation with trapezoid quadrature on
//! the lattice of step `dx` in both `xi` and `eta`. Both boundary identities
//! hold exactly on that lattice. The feedback is `U = int_0^1 k(1, y) u(y) dy`.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{trapezoid, Grid1D};
use crate::profile::Coefficient;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSettings {
    /// Stop when successive iterates differ by less than this (max norm).
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for KernelSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 200 }
    }
}

impl KernelSettings {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::Config(format!("invalid kernel settings {self:?}")));
        }
        Ok(())
    }
}

/// `U = trapezoid(w_j u_j)`: the sampled feedback law both kernels reduce to.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFeedback {
    grid: Grid1D,
    weights: Vec<f64>,
}

impl LinearFeedback {
    pub fn new(grid: Grid1D, weights: Vec<f64>) -> Result<Self> {
        grid.check_len(&weights)?;
        Ok(Self { grid, weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn apply(&self, u: &[f64]) -> Result<f64> {
        self.grid.check_len(u)?;
        let n = u.len();
        let mut s: f64 = self.weights.iter().zip(u).map(|(w, x)| w * x).sum();
        s -= 0.5 * (self.weights[0] * u[0] + self.weights[n - 1] * u[n - 1]);
        Ok(s * self.grid.dx())
    }

    /// Two columns `y,weight`; values are written in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "y,weight")?;
        for (j, k) in self.weights.iter().enumerate() {
            writeln!(w, "{},{}", self.grid.x(j), k)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut weights = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let field = line
                .split(',')
                .nth(1)
                .ok_or_else(|| Error::Parse(format!("feedback csv line {}: expected two columns", n + 1)))?;
            let k: f64 = field.trim().parse().map_err(|e| Error::Parse(format!("feedback csv line {}: {e}", n + 1)))?;
            weights.push(k);
        }
        let grid = Grid1D::new(weights.len())?;
        Self::new(grid, weights)
    }
}

/// Solution of the transport kernel equation on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicKernel {
    grid: Grid1D,
    k: Vec<f64>,
    iterations: usize,
    residual: f64,
}

impl HyperbolicKernel {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// `k(x_i)`.
    pub fn values(&self) -> &[f64] {
        &self.k
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Max-norm fixed-point residual of the returned kernel.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Weights `k(1 - y_j)`, read by index reversal.
    pub fn feedback(&self) -> LinearFeedback {
        let w: Vec<f64> = self.k.iter().rev().copied().collect();
        LinearFeedback { grid: self.grid, weights: w }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,k")?;
        for (i, k) in self.k.iter().enumerate() {
            writeln!(w, "{},{}", self.grid.x(i), k)?;
        }
        Ok(())
    }
}

/// `-beta(x_i) + trapezoid_j beta_{i-j} k_j` for every `i`.
fn volterra_map(beta: &[f64], k: &[f64], dx: f64, out: &mut [f64]) {
    for i in 0..beta.len() {
        let mut s = 0.0;
        if i > 0 {
            for j in 0..=i {
                s += beta[i - j] * k[j];
            }
            s -= 0.5 * (beta[i] * k[0] + beta[0] * k[i]);
        }
        out[i] = -beta[i] + dx * s;
    }
}

pub fn solve_kernel_hyperbolic(
    beta: &Coefficient,
    grid: Grid1D,
    settings: &KernelSettings,
) -> Result<HyperbolicKernel> {
    settings.validate()?;
    beta.validate()?;
    let b = beta.sample(&grid);
    let dx = grid.dx();
    let mut k: Vec<f64> = b.iter().map(|v| -v).collect();
    let mut next = vec![0.0; k.len()];
    let mut change = f64::INFINITY;
    for iter in 1..=settings.max_iters {
        volterra_map(&b, &k, dx, &mut next);
        change = max_diff(&k, &next);
        std::mem::swap(&mut k, &mut next);
        if !change.is_finite() {
            break;
        }
        if change < settings.tol {
            volterra_map(&b, &k, dx, &mut next);
            let residual = max_diff(&k, &next);
            return Ok(HyperbolicKernel { grid, k, iterations: iter, residual });
        }
    }
    Err(Error::Convergence { iterations: settings.max_iters, residual: change })
}

/// `U = int_0^1 k(1 - y) u(y) dy` by the trapezoid rule.
pub fn control_hyperbolic(kernel: &HyperbolicKernel, u: &[f64]) -> Result<f64> {
    kernel.grid.check_len(u)?;
    let n = u.len() - 1;
    let prod: Vec<f64> = (0..=n).map(|j| kernel.k[n - j] * u[j]).collect();
    Ok(trapezoid(&prod, kernel.grid.dx()))
}

/// Kernel of the reaction-diffusion plant, stored on the `(xi, eta)` lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicKernel {
    grid: Grid1D,
    /// `g[p][q] = G(p dx, q dx)` for `q <= min(p, 2N - p)`.
    g: Vec<Vec<f64>>,
    iterations: usize,
    change: f64,
}

impl ParabolicKernel {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// `k(x_i, y_j)` for `j <= i`.
    pub fn k(&self, i: usize, j: usize) -> f64 {
        assert!(j <= i && i < self.grid.nx(), "kernel index ({i}, {j}) outside the triangle");
        self.g[i + j][i - j]
    }

    /// `k(1, y_j)` for every grid point.
    pub fn top_row(&self) -> Vec<f64> {
        let n = self.grid.nx() - 1;
        (0..=n).map(|j| self.g[n + j][n - j]).collect()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Max-norm difference between the last two iterates.
    pub fn last_change(&self) -> f64 {
        self.change
    }

    pub fn feedback(&self) -> LinearFeedback {
        LinearFeedback { grid: self.grid, weights: self.top_row() }
    }

    /// Max over interior nodes of `|k_xx - k_yy - lambda(y) k|` with centered second differences.
    pub fn goursat_residual(&self, lambda: &Coefficient) -> f64 {
        let n = self.grid.nx() - 1;
        let dx = self.grid.dx();
        let mut worst = 0.0f64;
        for i in 1..n {
            for j in 1..i {
                let c = self.k(i, j);
                let kxx = self.k(i + 1, j) - 2.0 * c + self.k(i - 1, j);
                let kyy = self.k(i, j + 1) - 2.0 * c + self.k(i, j - 1);
                let r = (kxx - kyy) / (dx * dx) - lambda.eval(self.grid.x(j)) * c;
                worst = worst.max(r.abs());
            }
        }
        worst
    }

    pub fn write_csv_top<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "y,k")?;
        for (j, k) in self.top_row().iter().enumerate() {
            writeln!(w, "{},{}", self.grid.x(j), k)?;
        }
        Ok(())
    }

    /// Long format `x,y,k` over the lower triangle.
    pub fn write_csv_full<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,k")?;
        for i in 0..self.grid.nx() {
            for j in 0..=i {
                writeln!(w, "{},{},{}", self.grid.x(i), self.grid.x(j), self.k(i, j))?;
            }
        }
        Ok(())
    }
}

pub fn solve_kernel_parabolic(
    lambda: &Coefficient,
    grid: Grid1D,
    settings: &KernelSettings,
) -> Result<ParabolicKernel> {
    settings.validate()?;
    lambda.validate()?;
    let n = grid.nx() - 1;
    let m = 2 * n;
    let h = grid.dx();
    let len = |p: usize| p.min(m - p) + 1;
    // lambda at y = r h / 2, r = tau - s in lattice units
    let lam: Vec<f64> = (0..=m).map(|r| lambda.eval(0.5 * r as f64 * h)).collect();
    let f: Vec<f64> = (0..=m).map(|r| lambda.integral(0.5 * r as f64 * h)).collect();
    let g0: Vec<Vec<f64>> = (0..=m).map(|p| (0..len(p)).map(|q| -0.5 * (f[p] - f[q])).collect()).collect();

    let mut g = g0.clone();
    let mut s: Vec<Vec<f64>> = (0..=m).map(|p| vec![0.0; len(p)]).collect();
    let mut change = f64::INFINITY;
    for iter in 1..=settings.max_iters {
        // S(a, q) = int_0^{q h} lambda((a - b) h / 2) G(a, b) db
        for a in 0..=m {
            let row = &g[a];
            let sa = &mut s[a];
            sa[0] = 0.0;
            let mut prev = lam[a] * row[0];
            for q in 1..row.len() {
                let cur = lam[a - q] * row[q];
                sa[q] = sa[q - 1] + 0.5 * h * (prev + cur);
                prev = cur;
            }
        }
        let mut next = g0.clone();
        change = 0.0;
        for q in 0..=n {
            let mut acc = 0.0;
            for p in q + 1..=m - q {
                acc += 0.5 * h * (s[p - 1][q] + s[p][q]);
                next[p][q] += 0.25 * acc;
            }
        }
        for (a, b) in g.iter().zip(&next) {
            change = change.max(max_diff(a, b));
        }
        g = next;
        if !change.is_finite() {
            break;
        }
        if change < settings.tol {
            return Ok(ParabolicKernel { grid, g, iterations: iter, change });
        }
    }
    Err(Error::Convergence { iterations: settings.max_iters, residual: change })
}

/// `U = int_0^1 k(1, y) u(y) dy` by the trapezoid rule.
pub fn control_parabolic(kernel: &ParabolicKernel, u: &[f64]) -> Result<f64> {
    kernel.feedback().apply(u)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Plant {
    Hyperbolic,
    Parabolic,
}

type CacheKey = (Plant, String, usize, u64, usize);

fn cache() -> &'static Mutex<HashMap<CacheKey, LinearFeedback>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, LinearFeedback>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(plant: Plant, coef: &Coefficient, grid: Grid1D, settings: &KernelSettings) -> Result<Arc<LinearFeedback>> {
    let key = (plant, serde_json::to_string(coef)?, grid.nx(), settings.tol.to_bits(), settings.max_iters);
    if let Some(hit) = cache().lock().expect("kernel cache poisoned").get(&key) {
        return Ok(Arc::new(hit.clone()));
    }
    let fb = match plant {
        Plant::Hyperbolic => solve_kernel_hyperbolic(coef, grid, settings)?.feedback(),
        Plant::Parabolic => solve_kernel_parabolic(coef, grid, settings)?.feedback(),
    };
    cache().lock().expect("kernel cache poisoned").insert(key, fb.clone());
    Ok(Arc::new(fb))
}

/// Feedback weights for the transport plant, computed once per (profile, grid, settings).
pub fn hyperbolic_feedback(beta: &Coefficient, grid: Grid1D, settings: &KernelSettings) -> Result<Arc<LinearFeedback>> {
    cached(Plant::Hyperbolic, beta, grid, settings)
}

/// Feedback weights for the reaction-diffusion plant, computed once per (profile, grid, settings).
pub fn parabolic_feedback(
    lambda: &Coefficient,
    grid: Grid1D,
    settings: &KernelSettings,
) -> Result<Arc<LinearFeedback>> {
    cached(Plant::Parabolic, lambda, grid, settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coefficient_gives_zero_kernels() {
        let g = Grid1D::new(51).unwrap();
        let z = Coefficient::constant(0.0);
        let kh = solve_kernel_hyperbolic(&z, g, &KernelSettings::default()).unwrap();
        assert!(kh.values().iter().all(|&k| k == 0.0));
        let kp = solve_kernel_parabolic(&z, g, &KernelSettings::default()).unwrap();
        assert!(kp.top_row().iter().all(|&k| k == 0.0));
        assert_eq!(control_parabolic(&kp, &[1.0; 51]).unwrap(), 0.0);
    }

    #[test]
    fn constant_beta_matches_exponential() {
        let g = Grid1D::new(1001).unwrap();
        for b in [0.5, 1.0, 2.0] {
            let k = solve_kernel_hyperbolic(&Coefficient::constant(b), g, &KernelSettings::default()).unwrap();
            assert_eq!(k.values()[0], -b);
            let err = (0..1001).map(|i| (k.values()[i] + b * (b * g.x(i)).exp()).abs()).fold(0.0, f64::max);
            assert!(err < 1e-4, "b={b}: {err}");
            assert!(k.residual() < 1e-9);
        }
    }

    #[test]
    fn hyperbolic_control_quadrature() {
        let g = Grid1D::new(11).unwrap();
        let k = HyperbolicKernel { grid: g, k: vec![-1.0; 11], iterations: 0, residual: 0.0 };
        assert!((control_hyperbolic(&k, &[1.0; 11]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(control_hyperbolic(&k, &[0.0; 11]).unwrap(), 0.0);
        assert!(control_hyperbolic(&k, &[0.0; 10]).is_err());
        let fb = k.feedback();
        let u: Vec<f64> = (0..11).map(|j| (j as f64).sin()).collect();
        assert!((fb.apply(&u).unwrap() - control_hyperbolic(&k, &u).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn non_convergence_is_reported() {
        let g = Grid1D::new(101).unwrap();
        let err = solve_kernel_hyperbolic(
            &Coefficient::chebyshev(5.0, 7.35),
            g,
            &KernelSettings { tol: 1e-12, max_iters: 2 },
        );
        assert!(matches!(err, Err(Error::Convergence { iterations: 2, .. })));
    }

    #[test]
    fn parabolic_boundary_identities_hold_exactly() {
        let g = Grid1D::new(101).unwrap();
        let lam = Coefficient::chebyshev(50.0, 8.0);
        let k = solve_kernel_parabolic(&lam, g, &KernelSettings::default()).unwrap();
        for i in 0..101 {
            assert_eq!(k.k(i, 0), 0.0);
            assert!((k.k(i, i) + 0.5 * lam.integral(g.x(i))).abs() < 1e-12);
        }
    }

    #[test]
    fn goursat_residual_is_second_order() {
        let lam = Coefficient::chebyshev(20.0, 3.0);
        let r: Vec<f64> = [41usize, 81]
            .iter()
            .map(|&n| {
                let g = Grid1D::new(n).unwrap();
                solve_kernel_parabolic(&lam, g, &KernelSettings::default()).unwrap().goursat_residual(&lam)
            })
            .collect();
        assert!(r[1] < r[0] / 3.0, "{r:?}");
    }

    #[test]
    fn feedback_csv_round_trip() {
        let g = Grid1D::new(101).unwrap();
        let fb = solve_kernel_hyperbolic(&Coefficient::chebyshev(5.0, 7.35), g, &KernelSettings::default())
            .unwrap()
            .feedback();
        let mut buf = Vec::new();
        fb.write_csv(&mut buf).unwrap();
        let back = LinearFeedback::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, fb);
    }

    #[test]
    fn cache_returns_identical_weights() {
        let g = Grid1D::new(101).unwrap();
        let lam = Coefficient::chebyshev(50.0, 8.0);
        let a = parabolic_feedback(&lam, g, &KernelSettings::default()).unwrap();
        let b = parabolic_feedback(&lam, g, &KernelSettings::default()).unwrap();
        assert_eq!(*a, *b);
    }
}
