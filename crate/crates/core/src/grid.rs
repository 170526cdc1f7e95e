//! Uniform grids on the unit interval and the unit square, plus the discrete
//! L2 norms used by rewards and metrics.
//!
//! All norms use the rectangle rule `sqrt(sum f_j^2 * dx)` over every grid
//! point, boundary points included.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when checking that a spacing matches an integer point count.
const SPACING_SLACK: f64 = 1e-9;

/// Uniform grid `x_j = j * dx`, `j = 0..nx`, on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    nx: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(nx: usize) -> Result<Self> {
        if nx < 3 {
            return Err(Error::Config(format!("1D grid needs at least 3 points, got {nx}")));
        }
        Ok(Self { nx, dx: 1.0 / (nx - 1) as f64 })
    }

    /// Grid whose spacing is `dx`; `1/dx` must be an integer.
    pub fn from_spacing(dx: f64) -> Result<Self> {
        let cells = points_for_spacing(dx)?;
        Self::new(cells + 1)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nx).map(move |j| self.x(j))
    }

    pub fn l2_norm(&self, f: &[f64]) -> f64 {
        (f.iter().map(|v| v * v).sum::<f64>() * self.dx).sqrt()
    }

    pub fn l2_distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.check_len(a)?;
        self.check_len(b)?;
        let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        Ok((s * self.dx).sqrt())
    }

    /// Composite trapezoid rule of samples on this grid.
    pub fn trapezoid(&self, f: &[f64]) -> f64 {
        trapezoid(f, self.dx)
    }

    pub fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.nx {
            return Err(Error::Input(format!("field has {} values but the grid has {} points", f.len(), self.nx)));
        }
        Ok(())
    }
}

/// Uniform grid on `[0, 1] x [0, 1]`; `i` indexes x and `j` indexes y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::Config(format!("2D grid needs at least 3x3 points, got {nx}x{ny}")));
        }
        Ok(Self { nx, ny, dx: 1.0 / (nx - 1) as f64, dy: 1.0 / (ny - 1) as f64 })
    }

    pub fn from_spacing(dx: f64, dy: f64) -> Result<Self> {
        Self::new(points_for_spacing(dx)? + 1, points_for_spacing(dy)? + 1)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy
    }

    /// Rectangle-rule `sum f^2 dx dy` over the whole grid (squared norm).
    pub fn l2_norm_sq<'a>(&self, f: impl IntoIterator<Item = &'a f64>) -> f64 {
        f.into_iter().map(|v| v * v).sum::<f64>() * self.dx * self.dy
    }
}

fn points_for_spacing(dx: f64) -> Result<usize> {
    if !(dx > 0.0 && dx < 1.0) {
        return Err(Error::Config(format!("spacing must lie in (0, 1), got {dx}")));
    }
    let cells = (1.0 / dx).round();
    if ((1.0 / cells) - dx).abs() > SPACING_SLACK * dx {
        return Err(Error::Config(format!("1/{dx} is not an integer cell count")));
    }
    Ok(cells as usize)
}

pub fn trapezoid(f: &[f64], h: f64) -> f64 {
    match f.len() {
        0 | 1 => 0.0,
        n => h * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n - 1])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_is_exact_reciprocal() {
        let g = Grid1D::new(101).unwrap();
        assert_eq!(g.dx(), 1.0 / 100.0);
        assert_eq!(Grid1D::from_spacing(0.005).unwrap().nx(), 201);
        assert!(Grid1D::from_spacing(0.3).is_err());
        assert!(Grid1D::new(2).is_err());
    }

    #[test]
    fn unit_field_norm_uses_rectangle_rule() {
        let g = Grid1D::new(101).unwrap();
        let ones = vec![1.0; 101];
        assert!((g.l2_norm(&ones) - (101.0f64 * 0.01).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn trapezoid_of_constant() {
        assert!((trapezoid(&[2.0; 11], 0.1) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn grid2d_shape() {
        let g = Grid2D::from_spacing(0.05, 0.05).unwrap();
        assert_eq!(g.shape(), (21, 21));
        assert!(Grid2D::new(2, 5).is_err());
    }
}
