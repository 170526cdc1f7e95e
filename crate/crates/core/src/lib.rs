//! Boundary-control benchmark environments for PDEs.
//!
//! Three plants are provided: a 1D transport equation with a recirculation
//! term, a 1D reaction-diffusion equation and a 2D incompressible
//! Navier-Stokes cavity with a controlled lid. Each is wrapped in an
//! episodic environment ([`env`]) with configurable sensing, actuation,
//! noise and rewards. [`control`] holds the model-based baselines and
//! [`runner`] drives episodes, suites and external controllers.

pub mod control;
pub mod env;
pub mod error;
pub mod grid;
pub mod profile;
pub mod runner;
pub mod solver;

pub use error::{Error, Result};
