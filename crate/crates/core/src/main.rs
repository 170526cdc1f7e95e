use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pdebc::control::backstepping::{solve_kernel_hyperbolic, solve_kernel_parabolic, KernelSettings, LinearFeedback};
use pdebc::env::{Env, Problem};
use pdebc::error::{Error, Result};
use pdebc::grid::{Grid1D, Grid2D};
use pdebc::runner::pipe::{Observation, Reply};
use pdebc::runner::{run_episode, run_suite, write_outputs, ControllerSpec, RunManifest};
use pdebc::solver::ns2d::{make_reference, NsSolver};

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BLOWUP: u8 = 3;
const EXIT_PROTOCOL: u8 = 4;

#[derive(Parser)]
#[command(name = "pdebc", version, about = "PDE boundary-control environments and baseline controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Manifest or environment document (JSON, or TOML with a .toml extension).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ControllerArgs {
    /// Seed (episode seed for `run`, first seed for `suite`).
    #[arg(long)]
    seed: Option<u64>,
    /// zero | open_loop | constant:<value> | backstepping | adjoint | pipe
    #[arg(long)]
    controller: Option<String>,
    /// Shell command of an external controller (implies --controller pipe).
    #[arg(long)]
    pipe: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write trajectory.csv and metrics.json.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ctrl: ControllerArgs,
    },
    /// Run many seeded episodes and report mean and standard deviation.
    Suite {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ctrl: ControllerArgs,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
    },
    /// Build the cavity reference trajectory.
    Reference {
        #[command(flatten)]
        common: Common,
    },
    /// Solve and dump the backstepping kernel of a 1D problem.
    Kernel {
        #[command(flatten)]
        common: Common,
        /// Also write the whole triangle for the reaction-diffusion kernel.
        #[arg(long)]
        full: bool,
    },
    /// Act as a pipe controller applying the feedback weights in a CSV file.
    #[command(hide = true)]
    FeedbackChild {
        #[arg(long)]
        weights: PathBuf,
    },
}

fn load(common: &Common, ctrl: Option<&ControllerArgs>) -> Result<RunManifest> {
    let mut m = RunManifest::from_path(&common.config)?;
    if let Some(c) = ctrl {
        if let Some(seed) = c.seed {
            m.seed = seed;
        }
        let id = match (&c.controller, &c.pipe) {
            (Some(id), _) => Some(id.as_str()),
            (None, Some(_)) => Some("pipe"),
            (None, None) => None,
        };
        if let Some(id) = id {
            m.controller = ControllerSpec::from_id(id, c.pipe.as_deref())?;
        }
    }
    if let Some(out) = &common.out {
        m.out_dir = Some(out.clone());
    }
    Ok(m)
}

/// Prints a summary line; a closed stdout is not an error since every result is also on disk.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn out_dir(m: &RunManifest) -> PathBuf {
    m.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn cmd_run(common: Common, ctrl: ControllerArgs) -> Result<u8> {
    let m = load(&common, Some(&ctrl))?;
    let mut env = Env::new(m.env.clone())?;
    let prepared = m.controller.prepare(&m.env)?;
    let mut controller = prepared.instantiate()?;
    let (metrics, traj) = run_episode(&mut env, controller.as_mut(), m.seed)?;
    let dir = out_dir(&m);
    write_outputs(&dir, &metrics, &traj, m.frame_stride)?;
    prepared.write_artifacts(&dir)?;
    std::fs::write(dir.join("manifest.json"), m.to_json()?)?;
    emit(&serde_json::to_string_pretty(&metrics)?);
    Ok(if metrics.truncated { EXIT_BLOWUP } else { 0 })
}

fn cmd_suite(common: Common, ctrl: ControllerArgs, episodes: usize) -> Result<u8> {
    let m = load(&common, Some(&ctrl))?;
    let report = run_suite(&m, episodes, m.seed)?;
    let dir = out_dir(&m);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("suite.json"), serde_json::to_string_pretty(&report)?)?;
    let table = report.table();
    std::fs::write(dir.join("suite.txt"), &table)?;
    emit(table.trim_end());
    Ok(0)
}

fn cmd_reference(common: Common) -> Result<u8> {
    let m = load(&common, None)?;
    let env = &m.env;
    if env.problem != Problem::NavierStokes {
        return Err(Error::Config("`reference` needs a navier_stokes configuration".into()));
    }
    let ep = &env.episode;
    let grid = Grid2D::new(env.nx, env.ny)?;
    let edge = env.actuation.edge.as_2d().expect("validated");
    let solver =
        NsSolver::new(grid, env.fluid, ep.dt_pde, env.poisson, edge, ep.action_hi.abs().max(ep.action_lo.abs()))?;
    let r = make_reference(&env.reference, &solver, ep.dt_control, ep.horizon)?;
    let dir = out_dir(&m);
    let frames = dir.join("frames");
    std::fs::create_dir_all(&frames)?;
    let mut controls = String::from("k,t,U\n");
    for (k, u) in r.controls.iter().enumerate() {
        controls.push_str(&format!("{k},{},{u}\n", k as f64 * ep.dt_control));
    }
    std::fs::write(dir.join("controls.csv"), controls)?;
    for (k, f) in r.frames.iter().enumerate() {
        let mut s = String::from("i,j,x,y,u,v\n");
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                s.push_str(&format!("{i},{j},{},{},{},{}\n", grid.x(i), grid.y(j), f.u[[i, j]], f.v[[i, j]]));
            }
        }
        std::fs::write(frames.join(format!("frame_{:05}.csv", k + 1)), s)?;
    }
    emit(&format!("wrote {} reference frames to {}", r.len(), dir.display()));
    Ok(0)
}

fn cmd_kernel(common: Common, full: bool) -> Result<u8> {
    let m = load(&common, None)?;
    let env = &m.env;
    let settings = match &m.controller {
        ControllerSpec::Backstepping { kernel } => *kernel,
        _ => KernelSettings::default(),
    };
    let grid = Grid1D::new(env.nx)?;
    let dir = out_dir(&m);
    std::fs::create_dir_all(&dir)?;
    let file = |name: &str| -> Result<std::fs::File> { Ok(std::fs::File::create(dir.join(name))?) };
    let feedback = match env.problem {
        Problem::Hyperbolic => {
            let k = solve_kernel_hyperbolic(&env.coefficient, grid, &settings)?;
            k.write_csv(file("kernel.csv")?)?;
            emit(&format!("kernel converged in {} iterations, residual {:e}", k.iterations(), k.residual()));
            k.feedback()
        }
        Problem::Parabolic => {
            let k = solve_kernel_parabolic(&env.coefficient, grid, &settings)?;
            k.write_csv_top(file("kernel.csv")?)?;
            if full {
                k.write_csv_full(file("kernel_full.csv")?)?;
            }
            emit(&format!(
                "kernel converged in {} iterations, interior residual {:e}",
                k.iterations(),
                k.goursat_residual(&env.coefficient)
            ));
            k.feedback()
        }
        Problem::NavierStokes => return Err(Error::Config("`kernel` needs a 1D configuration".into())),
    };
    feedback.write_csv(file("feedback.csv")?)?;
    Ok(0)
}

fn cmd_feedback_child(weights: &Path) -> Result<u8> {
    let fb = LinearFeedback::read_csv(std::io::BufReader::new(std::fs::File::open(weights)?))?;
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line?;
        let obs: Observation = serde_json::from_str(&line).map_err(|e| Error::Protocol(e.to_string()))?;
        let action = fb.apply(&obs.obs)?;
        writeln!(stdout, "{}", serde_json::to_string(&Reply { action })?)?;
        stdout.flush()?;
    }
    Ok(0)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse(_) => EXIT_CONFIG,
        Error::BlowUp { .. } => EXIT_BLOWUP,
        Error::Protocol(_) => EXIT_PROTOCOL,
        _ => EXIT_OTHER,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { common, ctrl } => cmd_run(common, ctrl),
        Command::Suite { common, ctrl, episodes } => cmd_suite(common, ctrl, episodes),
        Command::Reference { common } => cmd_reference(common),
        Command::Kernel { common, full } => cmd_kernel(common, full),
        Command::FeedbackChild { weights } => cmd_feedback_child(&weights),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
