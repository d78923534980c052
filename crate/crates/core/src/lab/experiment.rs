//! Experiment definitions and the replica-parallel runner.
//!
//! Every experiment draws `samples` independent replicas, replica `i` on the
//! stream [`replica_rng`]`(seed, tag, i)`. Replica results are collected in
//! index order and reduced sequentially, so a [`Report`] depends only on the
//! configuration, never on the number of workers.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::replica_rng;
use super::stats::{
    bootstrap_w1_half_width, kendall_tau, ks_statistic, mean_with_half_width, sample_variance, wasserstein1, Histogram,
};
use crate::billiard::{
    first_collision_annealed, free_path_annealed, in_vertical_tube, simulate_annealed, tube_area,
    vertical_tube_enclosing_ball, SimConfig,
};
use crate::error::{Error, Result};
use crate::flight::{deflection_cdf, flight_displacement, simulate_flight, FlightConfig};
use crate::hypgeo::{ball_area, hyp_distance, Direction, Point, State};
use crate::obstacles::{expected_t1, nearest_neighbor_tail, sample_nearest_distance, sample_uniform_in_ball};

/// Rejection samples handled by one tube-mc replica.
pub const TUBE_BLOCK: usize = 1 << 16;
/// Bootstrap resamples behind each Wasserstein half-width.
pub const BOOTSTRAP_REPS: usize = 200;
const DEFLECTION_BINS: usize = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    FreePath,
    NearestNeighbor,
    Deflection,
    TubeMc,
    BgConvergence,
    FlightBaseline,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::FreePath => "free-path",
            ExperimentKind::NearestNeighbor => "nearest-neighbor",
            ExperimentKind::Deflection => "deflection",
            ExperimentKind::TubeMc => "tube-mc",
            ExperimentKind::BgConvergence => "bg-convergence",
            ExperimentKind::FlightBaseline => "flight-baseline",
        }
    }

    fn uses_r(self) -> bool {
        !matches!(self, ExperimentKind::FlightBaseline)
    }

    fn tag(self) -> u64 {
        match self {
            ExperimentKind::FreePath => 1,
            ExperimentKind::NearestNeighbor => 2,
            ExperimentKind::Deflection => 3,
            ExperimentKind::TubeMc => 4,
            ExperimentKind::BgConvergence => 5,
            ExperimentKind::FlightBaseline => 6,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Total cross-section `2λ sinh r`; the intensity is derived from it.
    pub sigma: f64,
    pub r_levels: Vec<f64>,
    /// Time horizon (censoring time for free-path and deflection).
    pub t: f64,
    pub samples: usize,
    pub seed: u64,
    pub workers: usize,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.samples < 1 {
            return bad("samples must be >= 1".into());
        }
        if self.workers < 1 {
            return bad("workers must be >= 1".into());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be > 0, got {}", self.sigma));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return bad(format!("t must be > 0, got {}", self.t));
        }
        if self.experiment.uses_r() {
            if self.r_levels.is_empty() {
                return bad(format!("{} needs at least one r level", self.experiment));
            }
            if let Some(r) = self.r_levels.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
                return bad(format!("r levels must be > 0, got {r}"));
            }
        }
        if self.experiment == ExperimentKind::BgConvergence && self.r_levels.windows(2).any(|w| w[1] >= w[0]) {
            return bad("bg-convergence r levels must be strictly decreasing".into());
        }
        Ok(())
    }

    /// Obstacle intensity for radius `r` at the configured cross-section.
    pub fn lambda(&self, r: f64) -> f64 {
        self.sigma / (2.0 * r.sinh())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub sigma: f64,
    pub r_levels: Vec<f64>,
    pub t: f64,
    pub samples: usize,
}

/// One statistic. `r` and `lambda` are absent for statistics that do not
/// depend on an obstacle level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStat {
    pub r: Option<f64>,
    pub lambda: Option<f64>,
    pub stat_name: String,
    pub value: f64,
    pub half_width: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: ExperimentKind,
    pub params: Params,
    pub levels: Vec<LevelStat>,
    pub seed: u64,
    /// Wall-clock seconds; kept out of `report.json` so that file is
    /// reproducible, and written to `timing.json` instead.
    #[serde(skip)]
    pub elapsed_s: f64,
}

impl Report {
    /// First statistic with the given name at level `r` (`None` for level-free ones).
    pub fn stat(&self, r: Option<f64>, name: &str) -> Option<&LevelStat> {
        self.levels.iter().find(|l| l.r == r && l.stat_name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Extra table written next to the report, e.g. a histogram.
struct Table {
    file: &'static str,
    header: &'static str,
    rows: Vec<String>,
}

struct Runner {
    pool: rayon::ThreadPool,
    seed: u64,
    samples: usize,
}

impl Runner {
    /// `f(i, rng)` for `i in 0..n`, results in index order.
    fn replicate<T, F>(&self, tag: u64, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize, &mut ChaCha8Rng) -> Result<T> + Sync,
    {
        let seed = self.seed;
        self.pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|i| f(i, &mut replica_rng(seed, tag, i as u64)))
                .collect()
        })
    }
}

fn level_tag(kind: ExperimentKind, level: usize) -> u64 {
    (kind.tag() << 32) | level as u64
}

fn start_state() -> State {
    State::new(Point::i(), Direction::up())
}

fn stat(r: Option<f64>, lambda: Option<f64>, name: &str, value: f64, half_width: Option<f64>, n: usize) -> LevelStat {
    LevelStat { r, lambda, stat_name: name.to_string(), value, half_width, n }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Half-width of the 95% null band for Kendall's tau under independence.
fn kendall_null_half_width(n: usize) -> f64 {
    let n = n as f64;
    1.96 * (2.0 * (2.0 * n + 5.0) / (9.0 * n * (n - 1.0))).sqrt()
}

/// Runs the experiment and, if `output_dir` is set, writes `report.json`,
/// `levels.csv`, `timing.json` and any experiment-specific tables there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let runner = Runner { pool, seed: cfg.seed, samples: cfg.samples };
    let started = Instant::now();
    let (levels, tables) = match cfg.experiment {
        ExperimentKind::FreePath => free_path(cfg, &runner)?,
        ExperimentKind::NearestNeighbor => nearest_neighbor(cfg, &runner)?,
        ExperimentKind::Deflection => deflection(cfg, &runner)?,
        ExperimentKind::TubeMc => tube_mc(cfg, &runner)?,
        ExperimentKind::BgConvergence => bg_convergence(cfg, &runner)?,
        ExperimentKind::FlightBaseline => flight_baseline(cfg, &runner)?,
    };
    let report = Report {
        experiment: cfg.experiment,
        params: Params { sigma: cfg.sigma, r_levels: cfg.r_levels.clone(), t: cfg.t, samples: cfg.samples },
        levels,
        seed: cfg.seed,
        elapsed_s: started.elapsed().as_secs_f64(),
    };
    if let Some(dir) = &cfg.output_dir {
        write_outputs(dir, &report, &tables)?;
    }
    Ok(report)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_outputs(dir: &Path, report: &Report, tables: &[Table]) -> Result<()> {
    write_file(&dir.join("report.json"), &(report.to_json()? + "\n"))?;
    let mut csv = String::from("r,lambda,stat_name,value,half_width,n\n");
    for l in &report.levels {
        csv += &format!(
            "{},{},{},{},{},{}\n",
            opt(l.r),
            opt(l.lambda),
            l.stat_name,
            l.value,
            opt(l.half_width),
            l.n
        );
    }
    write_file(&dir.join("levels.csv"), &csv)?;
    let timing = serde_json::json!({ "experiment": report.experiment, "elapsed_s": report.elapsed_s });
    write_file(&dir.join("timing.json"), &(serde_json::to_string_pretty(&timing)? + "\n"))?;
    for t in tables {
        let mut body = String::from(t.header);
        body.push('\n');
        for row in &t.rows {
            body += row;
            body.push('\n');
        }
        write_file(&dir.join(t.file), &body)?;
    }
    Ok(())
}

type Outcome = Result<(Vec<LevelStat>, Vec<Table>)>;

fn free_path(cfg: &ExperimentConfig, run: &Runner) -> Outcome {
    let s0 = start_state();
    let mut out = Vec::new();
    for (k, &r) in cfg.r_levels.iter().enumerate() {
        let lambda = cfg.lambda(r);
        let paths = run.replicate(level_tag(cfg.experiment, k), run.samples, |_, rng| {
            free_path_annealed(&s0, lambda, r, cfg.t, rng)
        })?;
        let n = paths.len();
        let censored = paths.iter().filter(|p| p.censored).count();
        let times: Vec<f64> = paths.iter().map(|p| p.time).collect();
        let (mean, hw) = mean_with_half_width(&times)?;
        let sigma = cfg.sigma;
        let ks = ks_statistic(&sorted(times), |x| -(-sigma * x).exp_m1())?;
        let (r, l) = (Some(r), Some(lambda));
        out.push(stat(r, l, "mean", mean, Some(hw), n));
        out.push(stat(r, l, "mean_exact", 1.0 / sigma, None, n));
        out.push(stat(r, l, "ks", ks, None, n));
        out.push(stat(r, l, "censored_fraction", censored as f64 / n as f64, None, n));
    }
    Ok((out, Vec::new()))
}

fn nearest_neighbor(cfg: &ExperimentConfig, run: &Runner) -> Outcome {
    let mut out = Vec::new();
    for (k, &r) in cfg.r_levels.iter().enumerate() {
        let lambda = cfg.lambda(r);
        let t1 = run.replicate(level_tag(cfg.experiment, k), run.samples, |_, rng| {
            sample_nearest_distance(lambda, rng)
        })?;
        let n = t1.len();
        let (mean, hw) = mean_with_half_width(&t1)?;
        let ks = ks_statistic(&sorted(t1), |x| 1.0 - nearest_neighbor_tail(x, lambda, 1))?;
        let (r, l) = (Some(r), Some(lambda));
        out.push(stat(r, l, "mean_t1", mean, Some(hw), n));
        out.push(stat(r, l, "mean_t1_exact", expected_t1(lambda)?, None, n));
        out.push(stat(r, l, "ks", ks, None, n));
    }
    Ok((out, Vec::new()))
}

fn deflection(cfg: &ExperimentConfig, run: &Runner) -> Outcome {
    let s0 = start_state();
    let mut out = Vec::new();
    let mut hist = Table {
        file: "deflection_histogram.csv",
        header: "r,bin_lo,bin_hi,count,density,reference_density",
        rows: Vec::new(),
    };
    for (k, &r) in cfg.r_levels.iter().enumerate() {
        let lambda = cfg.lambda(r);
        let hits = run.replicate(level_tag(cfg.experiment, k), run.samples, |_, rng| {
            first_collision_annealed(&s0, lambda, r, cfg.t, rng)
        })?;
        let hits: Vec<_> = hits.into_iter().flatten().collect();
        let n = hits.len();
        let (r, l) = (Some(r), Some(lambda));
        out.push(stat(r, l, "censored_fraction", 1.0 - n as f64 / run.samples as f64, None, run.samples));
        if n == 0 {
            continue;
        }
        let betas: Vec<f64> = hits.iter().map(|e| e.deflection).collect();
        let taus: Vec<f64> = hits.iter().map(|e| e.time).collect();
        let (mean, hw) = mean_with_half_width(&betas)?;
        out.push(stat(r, l, "mean_deflection", mean, Some(hw), n));
        if n >= 2 {
            let tau = kendall_tau(&taus, &betas)?;
            out.push(stat(r, l, "kendall_tau_time_deflection", tau, Some(kendall_null_half_width(n)), n));
        }
        let h = Histogram::new(&betas, 0.0, std::f64::consts::TAU, DEFLECTION_BINS);
        for (a, b, c, d) in h.rows(n) {
            let reference = (deflection_cdf(b) - deflection_cdf(a)) / (b - a);
            hist.rows.push(format!("{},{a},{b},{c},{d},{reference}", r.unwrap()));
        }
        let ks = ks_statistic(&sorted(betas), deflection_cdf)?;
        out.push(stat(r, l, "ks", ks, None, n));
    }
    Ok((out, vec![hist]))
}

fn tube_mc(cfg: &ExperimentConfig, run: &Runner) -> Outcome {
    let mut out = Vec::new();
    let blocks = run.samples.div_ceil(TUBE_BLOCK);
    for (k, &r) in cfg.r_levels.iter().enumerate() {
        let t = cfg.t;
        let (center, radius) = vertical_tube_enclosing_ball(t, r);
        let hits = run.replicate(level_tag(cfg.experiment, k), blocks, |b, rng| {
            let size = TUBE_BLOCK.min(run.samples - b * TUBE_BLOCK);
            let mut inside = 0u64;
            for _ in 0..size {
                if in_vertical_tube(sample_uniform_in_ball(center, radius, rng)?, t, r) {
                    inside += 1;
                }
            }
            Ok(inside)
        })?;
        let n = run.samples;
        let p = hits.iter().sum::<u64>() as f64 / n as f64;
        let area = ball_area(radius)?;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let exact = tube_area(t, r)?;
        let (r, l) = (Some(r), None);
        out.push(stat(r, l, "tube_area", area * p, Some(1.96 * area * se), n));
        out.push(stat(r, l, "tube_area_exact", exact, None, n));
    }
    Ok((out, Vec::new()))
}

fn bg_convergence(cfg: &ExperimentConfig, run: &Runner) -> Outcome {
    let s0 = start_state();
    let t = cfg.t;
    let flight_cfg = FlightConfig::new(cfg.sigma, t)?;
    let flight = run.replicate(level_tag(cfg.experiment, 1 << 16), run.samples, |_, rng| {
        flight_displacement(&simulate_flight(&s0, &flight_cfg, rng)?, t)
    })?;
    let mut out = Vec::new();
    let n = flight.len();
    let (fm, fhw) = mean_with_half_width(&flight)?;
    out.push(stat(None, None, "mean_displacement_flight", fm, Some(fhw), n));
    let sim = SimConfig::default();
    for (k, &r) in cfg.r_levels.iter().enumerate() {
        let lambda = cfg.lambda(r);
        let runs = run.replicate(level_tag(cfg.experiment, k), run.samples, |_, rng| {
            let traj = simulate_annealed(&s0, lambda, r, t, &sim, rng)?;
            let end = traj.position_at(t)?;
            Ok((hyp_distance(s0.point, end.point), traj.recollisions() > 0))
        })?;
        let lorentz: Vec<f64> = runs.iter().map(|x| x.0).collect();
        let recollided = runs.iter().filter(|x| x.1).count();
        let w1 = wasserstein1(&lorentz, &flight)?;
        let mut boot_rng = replica_rng(run.seed, level_tag(cfg.experiment, (1 << 17) + k), 0);
        let w1_hw = bootstrap_w1_half_width(&lorentz, &flight, BOOTSTRAP_REPS, &mut boot_rng)?;
        let (lm, lhw) = mean_with_half_width(&lorentz)?;
        let (r, l) = (Some(r), Some(lambda));
        out.push(stat(r, l, "w1", w1, Some(w1_hw), n));
        out.push(stat(r, l, "mean_displacement_lorentz", lm, Some(lhw), n));
        out.push(stat(r, l, "recollision_fraction", recollided as f64 / n as f64, None, n));
    }
    Ok((out, Vec::new()))
}

fn flight_baseline(cfg: &ExperimentConfig, run: &Runner) -> Outcome {
    let s0 = start_state();
    let flight_cfg = FlightConfig::new(cfg.sigma, cfg.t)?;
    let runs = run.replicate(level_tag(cfg.experiment, 0), run.samples, |_, rng| {
        let traj = simulate_flight(&s0, &flight_cfg, rng)?;
        Ok(traj.events.iter().map(|e| e.deflection).collect::<Vec<_>>())
    })?;
    let counts: Vec<f64> = runs.iter().map(|d| d.len() as f64).collect();
    let n = counts.len();
    let (mean, hw) = mean_with_half_width(&counts)?;
    let var = if n > 1 { sample_variance(&counts, mean) } else { 0.0 };
    let expected = cfg.sigma * cfg.t;
    let mut out = vec![
        stat(None, None, "count_mean", mean, Some(hw), n),
        stat(None, None, "count_variance", var, None, n),
        stat(None, None, "count_expected", expected, None, n),
    ];
    let betas: Vec<f64> = runs.into_iter().flatten().collect();
    if !betas.is_empty() {
        let m = betas.len();
        out.push(stat(None, None, "deflection_ks", ks_statistic(&sorted(betas), deflection_cdf)?, None, m));
    }
    Ok((out, Vec::new()))
}
