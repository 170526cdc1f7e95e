use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{run_episode, EpisodeMetrics};
use super::manifest::RunManifest;
use crate::env::Env;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub episodes: Vec<EpisodeMetrics>,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_summed_l2: f64,
    pub std_summed_l2: f64,
    pub truncated: usize,
}

/// Sample mean and standard deviation (zero for a single value).
fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl SuiteReport {
    pub fn from_episodes(episodes: Vec<EpisodeMetrics>) -> Self {
        let rewards: Vec<f64> = episodes.iter().map(|m| m.total_reward).collect();
        let l2: Vec<f64> = episodes.iter().map(|m| m.summed_l2).collect();
        let (mean_reward, std_reward) = mean_std(&rewards);
        let (mean_summed_l2, std_summed_l2) = mean_std(&l2);
        let truncated = episodes.iter().filter(|m| m.truncated).count();
        Self { episodes, mean_reward, std_reward, mean_summed_l2, std_summed_l2, truncated }
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>8} {:>14} {:>14} {:>12} {:>6}", "seed", "reward", "summed_l2", "final_l2", "trunc");
        for m in &self.episodes {
            let _ = writeln!(
                s,
                "{:>8} {:>14.4} {:>14.4} {:>12.4e} {:>6}",
                m.seed, m.total_reward, m.summed_l2, m.final_l2, m.truncated
            );
        }
        let _ = writeln!(s, "mean reward    {:.4} (std {:.4})", self.mean_reward, self.std_reward);
        let _ = writeln!(s, "mean summed_l2 {:.4} (std {:.4})", self.mean_summed_l2, self.std_summed_l2);
        let _ = writeln!(s, "truncated      {}/{}", self.truncated, self.episodes.len());
        s
    }
}

/// Runs `episodes` episodes with seeds `seed_base..seed_base + episodes` in parallel.
///
/// Configuration and controller preparation happen once, before any episode runs.
pub fn run_suite(manifest: &RunManifest, episodes: usize, seed_base: u64) -> Result<SuiteReport> {
    if episodes == 0 {
        return Err(crate::Error::Config("a suite needs at least one episode".into()));
    }
    let template = Env::new(manifest.env.clone())?;
    let prepared = manifest.controller.prepare(&manifest.env)?;
    let results: Vec<Result<EpisodeMetrics>> = (0..episodes as u64)
        .into_par_iter()
        .map(|i| {
            let mut env = template.clone();
            let mut ctrl = prepared.instantiate()?;
            run_episode(&mut env, ctrl.as_mut(), seed_base + i).map(|(m, _)| m)
        })
        .collect();
    let episodes = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport::from_episodes(episodes))
}
