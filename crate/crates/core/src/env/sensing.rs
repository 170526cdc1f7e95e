use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{NoiseKind, NoiseSpec, SensingMode};
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::solver::BoundaryKind;

/// Noise-free measurement of a 1D state.
pub fn measure_1d(u: &[f64], grid: &Grid1D, mode: SensingMode, actuation: BoundaryKind) -> Result<Vec<f64>> {
    grid.check_len(u)?;
    let n = u.len() - 1;
    let dx = grid.dx();
    Ok(match mode {
        SensingMode::FullState => u.to_vec(),
        SensingMode::Collocated => match actuation {
            BoundaryKind::Dirichlet => vec![(u[n] - u[n - 1]) / dx],
            BoundaryKind::Neumann => vec![u[n]],
        },
        SensingMode::AntiCollocatedValue => vec![u[0]],
        SensingMode::AntiCollocatedGradient => vec![(u[1] - u[0]) / dx],
    })
}

/// Length of the observation vector for a 1D grid of `nx` points.
pub fn observation_len_1d(nx: usize, mode: SensingMode) -> usize {
    match mode {
        SensingMode::FullState => nx,
        _ => 1,
    }
}

/// Adds sensor noise in place. `None` and zero-sigma Gaussian leave the values untouched.
pub fn add_noise<R: Rng>(obs: &mut [f64], noise: &NoiseSpec, rng: &mut R) -> Result<()> {
    if noise.kind == NoiseKind::None || noise.sigma == 0.0 {
        return Ok(());
    }
    let dist = Normal::new(0.0, noise.sigma).map_err(|e| Error::Config(format!("noise: {e}")))?;
    for o in obs.iter_mut() {
        *o += dist.sample(rng);
    }
    Ok(())
}

pub(crate) type NoiseRng = ChaCha8Rng;
