//! `multilayer` command line: Green's functions of layered media, FD
//! comparison, model charts and polynomial internal boundaries.

mod config;
mod output;
mod transform;

use clap::{Parser, Subcommand};
use config::{read_json, Overrides, RunConfig};
use multilayer::analytic::{strip_green, StripProblem};
use multilayer::fd::{fd_solve, interpolate, FdGrid};
use multilayer::laplace::stehfest_weights;
use multilayer::layered::greens_function;
use output::Table;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<multilayer::Error> for CliError {
    fn from(e: multilayer::Error) -> Self {
        if e.is_input_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "multilayer", version, about = "Multilayer heat-equation solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// CSV destination (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of layers for domain + sigma profiles
    #[arg(long)]
    layers: Option<usize>,
    /// Gaver-Stehfest order m
    #[arg(long)]
    stehfest: Option<usize>,
    /// Finite-difference nodes
    #[arg(long = "fd-nx")]
    fd_nx: Option<usize>,
    /// Finite-difference time steps
    #[arg(long = "fd-nt")]
    fd_nt: Option<usize>,
}

#[derive(clap::Args, Debug, Clone)]
struct ParamsArgs {
    /// JSON parameter file
    #[arg(long)]
    config: PathBuf,
    /// CSV destination (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Green's function u(T, x) of a layered medium
    Green(Common),
    /// Multilayer against finite differences (and the closed form when sigma is constant)
    Compare(Common),
    /// Sample a model chart: dupire, bk, bk-zcb, verhulst or divergent
    Transform {
        #[arg(value_enum)]
        kind: transform::Kind,
        #[command(flatten)]
        args: ParamsArgs,
    },
    /// Polynomial internal boundaries between two external ones
    Boundaries(ParamsArgs),
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg: RunConfig = read_json(&common.config)?;
    cfg.apply(&Overrides {
        out: common.out.clone(),
        layers: common.layers,
        stehfest: common.stehfest,
        fd_nx: common.fd_nx,
        fd_nt: common.fd_nt,
    });
    Ok(cfg)
}

fn millis(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn cmd_green(common: &Common) -> Result<(), CliError> {
    let cfg = load(common)?;
    let problem = cfg.greens_problem()?;
    let xs = cfg.abscissas(problem.medium.left(), problem.medium.right())?;
    let start = Instant::now();
    let scheme = stehfest_weights(cfg.solver.m)?;
    let weights_ms = millis(start);
    let start = Instant::now();
    let field = greens_function(&problem, &scheme, &xs)?;
    let solve_ms = millis(start);
    let mut table = Table::new(&["x", "u"]);
    for (x, u) in field.xs.iter().zip(&field.values) {
        table.push(vec![*x, *u]);
    }
    table.emit(cfg.output.as_deref())?;
    eprintln!("weights_ms={weights_ms:.3} solve_ms={solve_ms:.3}");
    Ok(())
}

fn cmd_compare(common: &Common) -> Result<(), CliError> {
    let cfg = load(common)?;
    let problem = cfg.greens_problem()?;
    let fd_cfg = cfg.fd()?;
    let (y0, yn) = (problem.medium.left(), problem.medium.right());
    let xs = cfg.abscissas(y0, yn)?;
    let grid = FdGrid::for_problem(&problem, fd_cfg.nx, fd_cfg.nt).map_err(|e| CliError::Config(format!("fd: {e}")))?;

    let start = Instant::now();
    let scheme = stehfest_weights(cfg.solver.m)?;
    let weights_ms = millis(start);
    let start = Instant::now();
    let ml = greens_function(&problem, &scheme, &xs)?;
    let ml_ms = millis(start);
    let start = Instant::now();
    let fd = fd_solve(&problem, &grid)?;
    let fd_ms = millis(start);

    let analytic = if problem.medium.is_homogeneous() {
        Some(StripProblem::new(y0, yn, problem.medium.sigmas()[0], problem.x0, problem.t)?)
    } else {
        None
    };
    let mut header = vec!["x", "u_ml", "u_fd"];
    if analytic.is_some() {
        header.push("u_analytic");
    }
    header.extend(["rel_diff_pct", "rel_diff_local_pct"]);
    let mut table = Table::new(&header);
    let peak = ml.peak();
    for (x, u_ml) in xs.iter().zip(&ml.values) {
        let u_fd = interpolate(&grid.xs, &fd.values, *x);
        let mut row = vec![*x, *u_ml, u_fd];
        if let Some(a) = &analytic {
            row.push(strip_green(a, *x)?);
        }
        row.push(100.0 * (u_fd - u_ml) / peak);
        row.push(if *u_ml != 0.0 { 100.0 * (u_fd - u_ml) / u_ml.abs() } else { 0.0 });
        table.push(row);
    }
    table.emit(cfg.output.as_deref())?;
    eprintln!("weights_ms={weights_ms:.3} ml_solve_ms={ml_ms:.3} fd_solve_ms={fd_ms:.3}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Green(c) => cmd_green(&c),
        Command::Compare(c) => cmd_compare(&c),
        Command::Transform { kind, args } => transform::cmd_transform(kind, &args.config, args.out.as_deref()),
        Command::Boundaries(args) => transform::cmd_boundaries(&args.config, args.out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
