//! Discrete pressure projection on the collocated grid.
//!
//! The Poisson operator is assembled as the exact composition of the discrete
//! operators the corrector uses: `A = D . G . M`, where `M` extends interior
//! pressure to the boundary by mirroring (homogeneous Neumann), `G` is the
//! centered gradient evaluated at interior nodes and `D` is the centered
//! divergence at interior nodes. Solving `A p = (rho/dt) D u*` therefore makes
//! the corrected velocity discretely divergence-free up to the solver
//! tolerance. The compact five-point Laplacian does not have this property on
//! a collocated grid (its residual divergence near the lid corners is O(1)).
//!
//! Each map has an explicit transpose so the adjoint solver can run the same
//! projection backwards.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::grid::Grid2D;

/// Interior cell whose pressure is pinned to zero to fix the gauge.
pub const ANCHOR: (usize, usize) = (1, 1);

/// Iteration controls for the weighted-Jacobi pressure solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoissonSettings {
    pub max_iters: usize,
    /// Stop once the largest single-node update falls below this.
    pub tol: f64,
    /// Jacobi relaxation weight in (0, 1].
    pub omega: f64,
}

impl Default for PoissonSettings {
    fn default() -> Self {
        Self { max_iters: 2000, tol: 1e-5, omega: 0.8 }
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct IterativeSolve {
    /// Solution on the full grid (boundary entries filled per the operator).
    pub x: Array2<f64>,
    pub iterations: usize,
    /// Max-norm residual `|b - A x|` over interior nodes after the last sweep.
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Projection {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

impl Projection {
    pub(crate) fn new(grid: &Grid2D) -> Self {
        Self { nx: grid.nx(), ny: grid.ny(), hx: 0.5 / grid.dx(), hy: 0.5 / grid.dy() }
    }

    #[inline]
    fn interior_x(&self, i: usize) -> bool {
        i >= 1 && i + 1 < self.nx
    }

    #[inline]
    fn interior_y(&self, j: usize) -> bool {
        j >= 1 && j + 1 < self.ny
    }

    /// Copy the adjacent interior values onto the edges (corners are unused).
    pub(crate) fn mirror(&self, p: &mut Array2<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        for j in 1..ny - 1 {
            p[[0, j]] = p[[1, j]];
            p[[nx - 1, j]] = p[[nx - 2, j]];
        }
        for i in 1..nx - 1 {
            p[[i, 0]] = p[[i, 1]];
            p[[i, ny - 1]] = p[[i, ny - 2]];
        }
        p[[0, 0]] = p[[1, 1]];
        p[[nx - 1, 0]] = p[[nx - 2, 1]];
        p[[0, ny - 1]] = p[[1, ny - 2]];
        p[[nx - 1, ny - 1]] = p[[nx - 2, ny - 2]];
    }

    /// Transpose of [`Self::mirror`] viewed as a map from interior values to the full grid.
    fn mirror_transpose(&self, q: &Array2<f64>) -> Array2<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut out = Array2::zeros((nx, ny));
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                out[[i, j]] = q[[i, j]];
            }
        }
        for j in 1..ny - 1 {
            out[[1, j]] += q[[0, j]];
            out[[nx - 2, j]] += q[[nx - 1, j]];
        }
        for i in 1..nx - 1 {
            out[[i, 1]] += q[[i, 0]];
            out[[i, ny - 2]] += q[[i, ny - 1]];
        }
        out
    }

    /// Centered gradient at interior nodes; zero on the boundary.
    pub(crate) fn gradient(&self, p: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        let mut gx = Array2::zeros((nx, ny));
        let mut gy = Array2::zeros((nx, ny));
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                gx[[i, j]] = (p[[i + 1, j]] - p[[i - 1, j]]) * self.hx;
                gy[[i, j]] = (p[[i, j + 1]] - p[[i, j - 1]]) * self.hy;
            }
        }
        (gx, gy)
    }

    pub(crate) fn gradient_transpose(&self, fx: &Array2<f64>, fy: &Array2<f64>) -> Array2<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut q = Array2::zeros((nx, ny));
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                let ax = fx[[i, j]] * self.hx;
                let ay = fy[[i, j]] * self.hy;
                q[[i + 1, j]] += ax;
                q[[i - 1, j]] -= ax;
                q[[i, j + 1]] += ay;
                q[[i, j - 1]] -= ay;
            }
        }
        q
    }

    /// Centered divergence at interior nodes; zero on the boundary.
    pub(crate) fn divergence(&self, u: &Array2<f64>, v: &Array2<f64>) -> Array2<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut d = Array2::zeros((nx, ny));
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                d[[i, j]] = (u[[i + 1, j]] - u[[i - 1, j]]) * self.hx + (v[[i, j + 1]] - v[[i, j - 1]]) * self.hy;
            }
        }
        d
    }

    pub(crate) fn divergence_transpose(&self, s: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        let mut fx = Array2::zeros((nx, ny));
        let mut fy = Array2::zeros((nx, ny));
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                let sx = s[[i, j]] * self.hx;
                let sy = s[[i, j]] * self.hy;
                fx[[i + 1, j]] += sx;
                fx[[i - 1, j]] -= sx;
                fy[[i, j + 1]] += sy;
                fy[[i, j - 1]] -= sy;
            }
        }
        (fx, fy)
    }

    /// `A p` at interior nodes; `p` must already be mirrored.
    pub(crate) fn apply(&self, p: &Array2<f64>) -> Array2<f64> {
        let (gx, gy) = self.gradient(p);
        self.divergence(&gx, &gy)
    }

    /// `A^T s` at interior nodes.
    pub(crate) fn apply_transpose(&self, s: &Array2<f64>) -> Array2<f64> {
        let (mut fx, mut fy) = self.divergence_transpose(s);
        self.zero_boundary(&mut fx);
        self.zero_boundary(&mut fy);
        let q = self.gradient_transpose(&fx, &fy);
        self.mirror_transpose(&q)
    }

    pub(crate) fn zero_boundary(&self, f: &mut Array2<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        for i in 0..nx {
            f[[i, 0]] = 0.0;
            f[[i, ny - 1]] = 0.0;
        }
        for j in 0..ny {
            f[[0, j]] = 0.0;
            f[[nx - 1, j]] = 0.0;
        }
    }

    /// Diagonal of `A` (identical for `A^T`). The mirror never feeds a node back into its own row.
    fn diagonal(&self, i: usize, j: usize) -> f64 {
        let cx = self.interior_x(i + 1) as u8 + self.interior_x(i - 1) as u8;
        let cy = self.interior_y(j + 1) as u8 + self.interior_y(j - 1) as u8;
        -(cx as f64) * self.hx * self.hx - (cy as f64) * self.hy * self.hy
    }

    /// Weighted Jacobi for `A x = b` (or `A^T x = b` when `transpose`).
    ///
    /// With `anchor` set, the gauge is fixed after every sweep by subtracting the
    /// value at [`ANCHOR`]; the result is mirrored onto the boundary.
    pub(crate) fn solve(
        &self,
        b: &Array2<f64>,
        warm: Option<&Array2<f64>>,
        settings: &PoissonSettings,
        transpose: bool,
        anchor: bool,
    ) -> IterativeSolve {
        let (nx, ny) = (self.nx, self.ny);
        let mut x = match warm {
            Some(w) => w.clone(),
            None => Array2::zeros((nx, ny)),
        };
        if anchor {
            self.pin(&mut x);
        }
        self.mirror(&mut x);
        let mut iterations = 0;
        let mut converged = false;
        let omega = settings.omega;
        while iterations < settings.max_iters.max(1) {
            let ax = if transpose { self.apply_transpose(&x) } else { self.apply(&x) };
            let mut largest = 0.0f64;
            for i in 1..nx - 1 {
                for j in 1..ny - 1 {
                    let step = omega * (b[[i, j]] - ax[[i, j]]) / self.diagonal(i, j);
                    x[[i, j]] += step;
                    largest = largest.max(step.abs());
                }
            }
            if anchor {
                self.pin(&mut x);
            }
            self.mirror(&mut x);
            iterations += 1;
            if largest < settings.tol {
                converged = true;
                break;
            }
            if !largest.is_finite() {
                break;
            }
        }
        let ax = if transpose { self.apply_transpose(&x) } else { self.apply(&x) };
        let mut residual = 0.0f64;
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                residual = residual.max((b[[i, j]] - ax[[i, j]]).abs());
            }
        }
        IterativeSolve { x, iterations, residual, converged }
    }

    fn pin(&self, x: &mut Array2<f64>) {
        let shift = x[ANCHOR];
        if shift != 0.0 {
            for i in 1..self.nx - 1 {
                for j in 1..self.ny - 1 {
                    x[[i, j]] -= shift;
                }
            }
        }
        x[ANCHOR] = 0.0;
    }
}
