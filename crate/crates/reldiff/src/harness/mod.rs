//! Config-driven experiment runner.
//!
//! Every experiment simulates paths on a rayon pool, collects per-path results
//! in path order and reduces them on one thread, so reports do not depend on
//! the worker count.

pub mod config;
mod experiments;
pub mod registry;
pub mod report;

use crate::framebundle::{write_trajectory_csv, BundleError, BundlePoint, IntegratorParams, NoiseSpec, ProcessSpec, Trajectory};
use crate::processes::{make_process, Preset};
use crate::rng::derive_seed;
use crate::stats::hits::{write_hits_csv, HitRecord};
use crate::stats::StatsError;
use config::{ConfigError, ExperimentConfig};
use rayon::prelude::*;
use report::RunReport;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

pub use config::Scale;
pub use registry::{list_experiments, ExperimentInfo};
pub use report::CheckRecord;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("runtime failure: {0}")]
    Runtime(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl From<BundleError> for HarnessError {
    fn from(e: BundleError) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

impl From<crate::manifold::GeometryError> for HarnessError {
    fn from(e: crate::manifold::GeometryError) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

impl From<StatsError> for HarnessError {
    fn from(e: StatsError) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

/// Rows of `hits.csv` kept per plane.
pub const MAX_HIT_ROWS: usize = 100_000;
/// Paths stored in `trajectories.csv`.
pub const STORED_PATHS: usize = 4;

/// Everything an experiment may read or produce.
pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub report: RunReport,
    pub trajectories: Vec<Trajectory>,
    /// `(file stem, records)`.
    pub hits: Vec<(String, Vec<HitRecord>)>,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        let config = report::to_value(cfg);
        Self {
            cfg,
            report: RunReport::new(&cfg.experiment, cfg.seed, config),
            trajectories: Vec::new(),
            hits: Vec::new(),
        }
    }

    fn pick<T: Copy>(&self, over: Option<T>, full: T, smoke: T) -> T {
        over.unwrap_or(if self.cfg.is_smoke() { smoke } else { full })
    }

    pub fn paths(&self, full: usize, smoke: usize) -> usize {
        self.pick(self.cfg.paths, full, smoke)
    }

    pub fn dt(&self, full: f64, smoke: f64) -> f64 {
        self.pick(self.cfg.dt, full, smoke)
    }

    pub fn steps(&self, full: usize, smoke: usize) -> usize {
        self.pick(self.cfg.n_steps, full, smoke)
    }

    /// Independent master seed for one named stream of the experiment.
    pub fn seed(&self, tag: &str) -> u64 {
        derive_seed(self.cfg.seed, &format!("{}/{tag}", self.cfg.experiment))
    }

    pub fn name(&self) -> String {
        self.cfg.experiment.clone()
    }

    /// The configured preset, or `default`.
    pub fn process(&self, default: Preset, noise: NoiseSpec, integrator: IntegratorParams) -> Result<ProcessSpec, HarnessError> {
        Ok(make_process(self.cfg.process.unwrap_or(default), noise, integrator)?)
    }

    /// Per-path map in path order.
    pub fn par_map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        (0..n as u64).into_par_iter().map(f).collect()
    }

    /// Re-simulates the first few paths for `trajectories.csv`.
    pub fn store_paths(&mut self, spec: &ProcessSpec, e0: &BundlePoint, n_steps: usize, n_paths: usize) {
        let k = n_paths.min(STORED_PATHS);
        self.trajectories.extend(self.par_map(k, |id| spec.simulate_path(e0, n_steps, id)));
    }

    pub fn store_hits(&mut self, stem: &str, mut hits: Vec<HitRecord>) {
        hits.truncate(MAX_HIT_ROWS);
        self.hits.push((stem.into(), hits));
    }

    pub fn check(&mut self, c: CheckRecord) {
        self.report.checks.push(c);
    }

    pub fn stat(&mut self, key: &str, value: impl serde::Serialize) {
        self.report.stat(key, value);
    }
}

/// Result of one run. `wall_seconds` is kept out of the report so that the
/// report is a pure function of the configuration.
pub struct RunOutcome {
    pub report: RunReport,
    pub wall_seconds: f64,
    pub workers: usize,
    pub trajectories: Vec<Trajectory>,
    pub hits: Vec<(String, Vec<HitRecord>)>,
}

impl RunOutcome {
    /// 0 pass, 1 check failure, 3 runtime failure.
    pub fn exit_code(&self) -> i32 {
        match (&self.report.error, self.report.pass) {
            (Some(_), _) => 3,
            (None, true) => 0,
            (None, false) => 1,
        }
    }
}

/// Worker count: config, then `RELDIFF_WORKERS`, then all cores.
pub fn resolve_workers(cfg: &ExperimentConfig) -> usize {
    cfg.workers
        .or_else(|| std::env::var("RELDIFF_WORKERS").ok().and_then(|v| v.parse().ok()))
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Output directory: config, then `RELDIFF_OUT/<experiment>`, then `reldiff-out/<experiment>`.
pub fn resolve_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| {
        let base = std::env::var_os("RELDIFF_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("reldiff-out"));
        base.join(&cfg.experiment)
    })
}

/// Validates the configuration and runs the experiment on a fresh pool.
/// Failures inside the experiment end up in `report.error`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome, HarnessError> {
    cfg.validate()?;
    let info = registry::find(&cfg.experiment).ok_or_else(|| ConfigError::UnknownExperiment(cfg.experiment.clone()))?;
    let workers = resolve_workers(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let start = Instant::now();
    let mut cx = Ctx::new(cfg);
    let result = pool.install(|| (info.run)(&mut cx));
    if let Err(e) = result {
        cx.report.error = Some(e.to_string());
    }
    cx.report.finalize();
    Ok(RunOutcome {
        report: cx.report,
        wall_seconds: start.elapsed().as_secs_f64(),
        workers,
        trajectories: cx.trajectories,
        hits: cx.hits,
    })
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, HarnessError> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

/// Writes `report.json`, `timing.json`, `trajectories.csv` and one
/// `<stem>.csv` per hit set.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path) -> Result<(), HarnessError> {
    let io_err = |path: &Path| {
        let p = path.display().to_string();
        move |source| HarnessError::Io { path: p, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("report.json");
    fs::write(&path, outcome.report.to_json()).map_err(io_err(&path))?;
    let mut timing = serde_json::Map::new();
    timing.insert("wall_seconds".into(), outcome.wall_seconds.into());
    timing.insert("workers".into(), outcome.workers.into());
    let path = dir.join("timing.json");
    fs::write(&path, report::canonical_json(&timing.into())).map_err(io_err(&path))?;
    let path = dir.join("trajectories.csv");
    let mut w = create(&path)?;
    write_trajectory_csv(&mut w, &outcome.trajectories)
        .and_then(|_| w.flush())
        .map_err(io_err(&path))?;
    for (stem, hits) in &outcome.hits {
        let path = dir.join(format!("{stem}.csv"));
        let mut w = create(&path)?;
        write_hits_csv(&mut w, hits).and_then(|_| w.flush()).map_err(io_err(&path))?;
    }
    Ok(())
}
