//! Episode driver, suites, trajectory export and external controllers.

pub mod controllers;
pub mod episode;
pub mod manifest;
pub mod pipe;
pub mod suite;

pub use controllers::{Controller, ControllerSpec, PreparedController};
pub use episode::{run_episode, write_outputs, EpisodeMetrics, Trajectory, TrajectoryRow};
pub use manifest::RunManifest;
pub use suite::{run_suite, SuiteReport};
