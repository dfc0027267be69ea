//! `wgqed`: trajectories, error sweeps, relaxation fits, bound states and
//! correlation kernels from a TOML configuration.
//!
//! Exit status: 0 on success, 2 for an invalid configuration (message
//! anchored at `file:line`), 3 when a computation fails.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wgqed::analysis::{fit_relaxation_with, run_sweep};
use wgqed::config::{
    boundstate_header, fit_header, kernel_job_header, simulate_header, ConfigFile,
};
use wgqed::dynamics::{bound_states, uniform_grid};
use wgqed::io::{fmt_f64, read_table, write_header, write_kernel, write_trajectory};
use wgqed::simulate::simulate;
use wgqed::Error;

#[derive(Parser)]
#[command(name = "wgqed", version, about = "Two-level atoms in a coupled-resonator waveguide")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output file (default: the path in the configuration, else stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver and write the trajectory.
    Simulate(Common),
    /// Error metric between two solvers over an (L, omega_S) grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Concurrent cells.
        #[arg(long)]
        workers: Option<usize>,
        /// Skip cells already in the checkpoint file.
        #[arg(long)]
        resume: bool,
    },
    /// Fit the relaxation model to a trajectory column.
    Fit(Common),
    /// Bound states outside the band.
    Boundstate(Common),
    /// Sample a correlation kernel.
    Kernel(Common),
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    fn config(e: Error) -> Self {
        Failure::Config(e.to_string())
    }

    fn run(e: Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| Failure::Config(format!("{}: cannot create: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn finish(mut w: Box<dyn Write>) -> Result<(), Failure> {
    w.flush().map_err(|e| Failure::Numerical(format!("write failed: {e}")))
}

fn cmd_simulate(c: &Common) -> Result<(), Failure> {
    let cfg = ConfigFile::load(&c.config).map_err(Failure::config)?;
    let job = cfg.simulate_job().map_err(Failure::config)?;
    let out = simulate(&job.spec).map_err(Failure::run)?;
    let mut header = simulate_header(&job);
    header.push(("representation".into(), out.representation.clone()));
    if let Some(m) = out.min_eigenvalue {
        header.push(("min_eigenvalue".into(), fmt_f64(m)));
    }
    let mut w = open_output(c.output.as_deref().or(job.output.as_deref()))?;
    write_trajectory(&mut w, &header, &out, job.populations).map_err(Failure::run)?;
    finish(w)
}

fn cmd_sweep(c: &Common, workers: Option<usize>, resume: bool) -> Result<(), Failure> {
    let cfg = ConfigFile::load(&c.config).map_err(Failure::config)?;
    let mut job = cfg.sweep_job().map_err(Failure::config)?;
    if let Some(n) = workers {
        if n == 0 {
            return Err(Failure::Config("--workers must be at least 1".into()));
        }
        job.config.workers = n;
    }
    let output = c.output.clone().or(job.output.clone());
    let checkpoint = job.checkpoint.clone().or_else(|| output.as_ref().map(|o| o.with_extension("checkpoint")));
    if resume && checkpoint.is_none() {
        return Err(Failure::Config(format!(
            "{}: --resume needs [sweep] checkpoint or an output path",
            c.config.display()
        )));
    }
    let table = run_sweep(&job.config, checkpoint.as_deref(), resume).map_err(|e| match e {
        Error::Config(_) => Failure::config(e),
        other => Failure::run(other),
    })?;
    let failed = table.cells.iter().filter(|c| c.value.is_nan()).count();
    if failed > 0 {
        log::warn!("{failed} of {} cells failed; see the status column", table.cells.len());
    }
    let mut w = open_output(output.as_deref())?;
    table.write(&mut w).map_err(Failure::run)?;
    finish(w)
}

fn cmd_fit(c: &Common) -> Result<(), Failure> {
    let cfg = ConfigFile::load(&c.config).map_err(Failure::config)?;
    let job = cfg.fit_job().map_err(Failure::config)?;
    let table = read_table(&job.input).map_err(Failure::config)?;
    let t = table.column("t").map_err(Failure::config)?;
    let y = table.column(&job.column).map_err(Failure::config)?;
    let initial = match (job.initial, y.first()) {
        (Some(i), _) => i,
        (None, Some(&y0)) => y0,
        (None, None) => return Err(Failure::Config(format!("{}: no data rows", job.input.display()))),
    };
    let mut header = fit_header(&job, initial);
    header.extend(table.header.iter().map(|(k, v)| (format!("input.{k}"), v.clone())));
    let mut rows = Vec::new();
    for &model in &job.models {
        let r = fit_relaxation_with(model, &t, &y, initial).map_err(Failure::run)?;
        if !r.converged {
            log::warn!("{} fit did not converge (sigma {:e})", model.name(), r.rmsd);
        }
        rows.push(
            [
                model.name().to_string(),
                fmt_f64(r.s1),
                fmt_f64(r.s2),
                fmt_f64(r.a),
                fmt_f64(r.b),
                fmt_f64(r.lambda1),
                fmt_f64(r.lambda2),
                fmt_f64(r.p_ss),
                fmt_f64(r.rmsd),
                r.n_points.to_string(),
                r.converged.to_string(),
            ]
            .join(","),
        );
    }
    let mut w = open_output(c.output.as_deref().or(job.output.as_deref()))?;
    let io = |e: io::Error| Failure::Numerical(format!("write failed: {e}"));
    write_header(&mut w, &header).map_err(Failure::run)?;
    writeln!(w, "model,s1,s2,a,b,lambda1,lambda2,p_ss,sigma,n_points,converged").map_err(io)?;
    for r in rows {
        writeln!(w, "{r}").map_err(io)?;
    }
    finish(w)
}

fn cmd_boundstate(c: &Common) -> Result<(), Failure> {
    let cfg = ConfigFile::load(&c.config).map_err(Failure::config)?;
    let job = cfg.boundstate_job().map_err(Failure::config)?;
    let result = bound_states(&job.params, job.n_atoms, job.l).map_err(Failure::run)?;
    let mut w = open_output(c.output.as_deref().or(job.output.as_deref()))?;
    let io = |e: io::Error| Failure::Numerical(format!("write failed: {e}"));
    write_header(&mut w, &boundstate_header(&job)).map_err(Failure::run)?;
    writeln!(w, "branch,parity,energy,atomic_weight,residual").map_err(io)?;
    for s in &result.states {
        let parity = s.parity.map_or("none".to_string(), |p| format!("{p:?}").to_lowercase());
        let branch = format!("{:?}", s.branch).to_lowercase();
        writeln!(w, "{branch},{parity},{},{},{}", fmt_f64(s.energy), fmt_f64(s.atomic_weight), fmt_f64(s.residual))
            .map_err(io)?;
    }
    finish(w)
}

fn cmd_kernel(c: &Common) -> Result<(), Failure> {
    let cfg = ConfigFile::load(&c.config).map_err(Failure::config)?;
    let job = cfg.kernel_job().map_err(Failure::config)?;
    let grid = uniform_grid(job.t_max, job.dt);
    let alpha = job.kernel.series(&job.params, job.l, &grid).map_err(Failure::run)?;
    let mut w = open_output(c.output.as_deref().or(job.output.as_deref()))?;
    write_kernel(&mut w, &kernel_job_header(&job), &grid, &alpha).map_err(Failure::run)?;
    finish(w)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => cmd_simulate(c),
        Command::Sweep { common, workers, resume } => cmd_sweep(common, *workers, *resume),
        Command::Fit(c) => cmd_fit(c),
        Command::Boundstate(c) => cmd_boundstate(c),
        Command::Kernel(c) => cmd_kernel(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
