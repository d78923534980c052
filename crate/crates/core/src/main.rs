use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hyperlorentz::billiard::{simulate_annealed, SimConfig};
use hyperlorentz::flight::{simulate_flight, FlightConfig};
use hyperlorentz::hypgeo::{Direction, Point, State};
use hyperlorentz::lab::{export_trajectory, replica_rng, run_experiment, ExperimentConfig, ExperimentKind, Model};
use hyperlorentz::Error;

#[derive(Parser)]
#[command(name = "hyperlorentz", version, about = "Lorentz gas and random flights on the hyperbolic plane")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Free path lengths against the exponential law.
    FreePath(RunArgs),
    /// Distance to the nearest Poisson point.
    NearestNeighbor(RunArgs),
    /// First-collision deflection angles against the limiting cross-section.
    Deflection(RunArgs),
    /// Monte Carlo area of a geodesic tube.
    TubeMc(RunArgs),
    /// Lorentz versus random-flight displacement as r shrinks.
    BgConvergence(RunArgs),
    /// Event counts and deflections of the random flight.
    FlightBaseline(RunArgs),
    /// Simulate one path and write it as CSV.
    Export(ExportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Obstacle radii, comma separated.
    #[arg(long = "r", value_delimiter = ',', default_value = "0.5")]
    r: Vec<f64>,
    #[arg(long, default_value_t = 2.0)]
    t: f64,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to $HYPERLORENTZ_WORKERS, else the number of CPUs.
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for report.json and tables; the report is printed either way.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathKind {
    Lorentz,
    Flight,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "lorentz")]
    kind: PathKind,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long = "r", default_value_t = 0.1)]
    r: f64,
    #[arg(long, default_value_t = 10.0)]
    t: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
}

fn default_workers() -> Result<usize, Error> {
    match std::env::var("HYPERLORENTZ_WORKERS") {
        Ok(v) => v
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("HYPERLORENTZ_WORKERS is not a count: {v:?}"))),
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn experiment_config(kind: ExperimentKind, a: RunArgs) -> Result<ExperimentConfig, Error> {
    let workers = match a.workers {
        Some(w) => w,
        None => default_workers()?,
    };
    let cfg = ExperimentConfig {
        experiment: kind,
        sigma: a.sigma,
        r_levels: a.r,
        t: a.t,
        samples: a.samples,
        seed: a.seed,
        workers,
        output_dir: a.out,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn export(a: &ExportArgs) -> Result<(), Error> {
    let s0 = State::new(Point::i(), Direction::up());
    let mut rng = replica_rng(a.seed, 0xE0, 0);
    let traj = match a.kind {
        PathKind::Lorentz => {
            if a.r.is_nan() || a.r <= 0.0 {
                return Err(Error::InvalidArgument(format!("r must be > 0, got {}", a.r)));
            }
            let lambda = a.sigma / (2.0 * a.r.sinh());
            simulate_annealed(&s0, lambda, a.r, a.t, &SimConfig::default(), &mut rng)?
        }
        PathKind::Flight => simulate_flight(&s0, &FlightConfig::new(a.sigma, a.t)?, &mut rng)?,
    };
    export_trajectory(&traj, a.model, &a.out, a.dt)
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::InvalidArgument(_) | Error::InvalidPoint { .. } => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Export(a) => {
            return match export(&a) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(&e),
            }
        }
        Command::FreePath(a) => (ExperimentKind::FreePath, a),
        Command::NearestNeighbor(a) => (ExperimentKind::NearestNeighbor, a),
        Command::Deflection(a) => (ExperimentKind::Deflection, a),
        Command::TubeMc(a) => (ExperimentKind::TubeMc, a),
        Command::BgConvergence(a) => (ExperimentKind::BgConvergence, a),
        Command::FlightBaseline(a) => (ExperimentKind::FlightBaseline, a),
    };
    let cfg = match experiment_config(kind, args) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    match run_experiment(&cfg).and_then(|r| r.to_json()) {
        Ok(json) => {
            println!("{json}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
