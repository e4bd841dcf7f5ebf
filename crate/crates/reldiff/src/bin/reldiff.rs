//! `reldiff run | list | validate`.

use clap::{Args, Parser, Subcommand};
use reldiff::harness::config::{ExperimentConfig, Scale};
use reldiff::harness::{list_experiments, resolve_out_dir, run_experiment, write_outputs, HarnessError};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "reldiff", version, about = "Relativistic diffusion experiments on the frame bundle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write report.json, timing.json and CSV outputs.
    Run(Overrides),
    /// List registered experiments.
    List,
    /// Check a configuration without running it.
    Validate(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// TOML configuration file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Run at smoke-test scale.
    #[arg(long)]
    smoke: bool,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match (&self.config, &self.experiment) {
            (Some(path), _) => ExperimentConfig::from_file(path)?,
            (None, Some(name)) => ExperimentConfig::new(name),
            (None, None) => {
                return Err(reldiff::harness::config::ConfigError::Field {
                    field: "experiment".into(),
                    message: "pass --config or --experiment".into(),
                }
                .into())
            }
        };
        if let Some(e) = &self.experiment {
            cfg.experiment = e.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.paths.is_some() {
            cfg.paths = self.paths;
        }
        if self.dt.is_some() {
            cfg.dt = self.dt;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        if self.smoke {
            cfg.scale = Scale::Smoke;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn code(c: u8) -> ExitCode {
    ExitCode::from(c)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::List => {
            for e in list_experiments() {
                let _ = writeln!(out, "{:<26} {}  [{}]", e.name, e.description, e.anchor);
            }
            code(0)
        }
        Command::Validate(o) => match o.resolve() {
            Ok(cfg) => {
                let _ = writeln!(out, "ok: {} ({:?} scale, seed {})", cfg.experiment, cfg.scale, cfg.seed);
                code(0)
            }
            Err(e) => {
                eprintln!("config error: {e}");
                code(2)
            }
        },
        Command::Run(o) => {
            let cfg = match o.resolve() {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return code(2);
                }
            };
            let outcome = match run_experiment(&cfg) {
                Ok(r) => r,
                Err(HarnessError::Config(e)) => {
                    eprintln!("config error: {e}");
                    return code(2);
                }
                Err(e) => {
                    eprintln!("{e}");
                    return code(3);
                }
            };
            let dir = resolve_out_dir(&cfg);
            if let Err(e) = write_outputs(&outcome, &dir) {
                eprintln!("{e}");
                return code(3);
            }
            for c in &outcome.report.checks {
                let verdict = if c.pass { "PASS" } else { "FAIL" };
                let _ = writeln!(out, "{verdict} {} {} = {:.6e} (tolerance {:.3e})", c.experiment, c.statistic, c.value, c.tolerance);
            }
            if let Some(err) = &outcome.report.error {
                eprintln!("runtime failure: {err}");
            }
            let _ = writeln!(out, "report: {}", dir.join("report.json").display());
            code(outcome.exit_code() as u8)
        }
    }
}
