use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::controllers::Controller;
use crate::env::{Env, Problem};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub seed: u64,
    pub total_reward: f64,
    /// Sum of the state L2 norm over the initial state and every control step.
    pub summed_l2: f64,
    pub final_l2: f64,
    pub steps: usize,
    pub terminated: bool,
    pub truncated: bool,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    /// Applied action; absent on the initial row.
    pub action: Option<f64>,
    pub reward: Option<f64>,
    pub l2: f64,
    pub state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub problem: Problem,
    pub shape: (usize, usize),
    pub rows: Vec<TrajectoryRow>,
}

/// Runs one episode from `reset(seed)` until it terminates or truncates.
pub fn run_episode(env: &mut Env, controller: &mut dyn Controller, seed: u64) -> Result<(EpisodeMetrics, Trajectory)> {
    let start = Instant::now();
    let mut obs = env.reset(seed)?;
    let cfg = env.config();
    let shape = (cfg.nx, cfg.ny);
    let problem = cfg.problem;
    let mut rows = vec![TrajectoryRow { t: 0.0, action: None, reward: None, l2: env.state_l2(), state: env.state() }];
    let mut total_reward = 0.0;
    let mut summed_l2 = rows[0].l2;
    let (mut terminated, mut truncated) = (false, false);
    while !env.is_finished() {
        let action = controller.act(env.time(), &obs)?;
        let out = env.step(action)?;
        total_reward += out.reward;
        summed_l2 += out.info.l2;
        terminated = out.terminated;
        truncated = out.truncated;
        rows.push(TrajectoryRow {
            t: env.time(),
            action: Some(out.info.applied_action),
            reward: Some(out.reward),
            l2: out.info.l2,
            state: out.info.state,
        });
        obs = out.observation;
    }
    let metrics = EpisodeMetrics {
        seed,
        total_reward,
        summed_l2,
        final_l2: rows.last().expect("non-empty").l2,
        steps: rows.len() - 1,
        terminated,
        truncated,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((metrics, Trajectory { problem, shape, rows }))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Trajectory {
    /// One row per control step: `t,action,reward,l2` then the state values (1D only).
    pub fn to_csv(&self) -> String {
        let one_d = self.problem.is_1d();
        let mut s = String::from("t,action,reward,l2");
        if one_d {
            for j in 0..self.shape.0 {
                let _ = write!(s, ",u_{j}");
            }
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{},{},{},{}", r.t, opt(r.action), opt(r.reward), r.l2);
            if one_d {
                for v in &r.state {
                    let _ = write!(s, ",{v}");
                }
            }
            s.push('\n');
        }
        s
    }

    /// Cavity frame `k` as `i,j,x,y,u,v`.
    pub fn frame_csv(&self, k: usize) -> String {
        let (nx, ny) = self.shape;
        let state = &self.rows[k].state;
        let (dx, dy) = (1.0 / (nx - 1) as f64, 1.0 / (ny - 1) as f64);
        let mut s = String::from("i,j,x,y,u,v\n");
        for i in 0..nx {
            for j in 0..ny {
                let idx = i * ny + j;
                let _ =
                    writeln!(s, "{i},{j},{},{},{},{}", i as f64 * dx, j as f64 * dy, state[idx], state[nx * ny + idx]);
            }
        }
        s
    }
}

/// Writes `trajectory.csv`, `metrics.json` and, for the cavity, `frames/frame_NNNNN.csv`.
pub fn write_outputs(dir: &Path, metrics: &EpisodeMetrics, traj: &Trajectory, frame_stride: usize) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trajectory.csv"), traj.to_csv())?;
    fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(metrics)?)?;
    if !traj.problem.is_1d() {
        let frames = dir.join("frames");
        fs::create_dir_all(&frames)?;
        for k in (0..traj.rows.len()).step_by(frame_stride.max(1)) {
            fs::write(frames.join(format!("frame_{k:05}.csv")), traj.frame_csv(k))?;
        }
    }
    Ok(())
}
