#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

use clap::{Parser, Subcommand};

use crate::commands::{Failure, Outcome};
use crate::config::{ExperimentConfig, RawConfig};
use crate::report::{write_report, Metadata};

/// Random connection model laboratory.
#[derive(Parser, Debug)]
#[command(name = "rcmlab", version)]
struct Cli {
    /// Experiment config file (`key = value` lines, `[section]` headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set run.m=500`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, env = "RCMLAB_WORKERS", global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// csv, json or both.
    #[arg(long, global = true)]
    format: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-replication counts of isolated target vertices and truncation errors.
    Simulate {
        /// Also write the point and edge lists of this replication.
        #[arg(long)]
        dump_rep: Option<u64>,
    },
    /// Exact means, variances and limits by quadrature.
    Moments,
    /// Kolmogorov-Smirnov distance of the standardized isolated count to N(0,1).
    CltTest,
    /// How the truncation error collapses as the connection range grows.
    TruncationDemo,
    /// Variance per unit intensity against its limit.
    VarianceGrowth,
    /// Covariance of the component-size field and its box-variance limit.
    CovarianceField {
        /// Also certify the block-based variance lower bound (d = 2 only).
        #[arg(long)]
        lower_bound: bool,
    },
    /// Martingale-difference variance identity on random finite spaces.
    MartingaleCheck,
    /// Every acceptance criterion, one PASS/FAIL line each.
    VerifyAll,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Moments => "moments",
            Command::CltTest => "clt-test",
            Command::TruncationDemo => "truncation-demo",
            Command::VarianceGrowth => "variance-growth",
            Command::CovarianceField { .. } => "covariance-field",
            Command::MartingaleCheck => "martingale-check",
            Command::VerifyAll => "verify-all",
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut raw = match &cli.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            RawConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RawConfig::defaults(),
    };
    // dedicated flags behave like trailing --set entries
    let mut overrides = cli.overrides.clone();
    if let Some(s) = cli.seed {
        overrides.push(format!("run.seed={s}"));
    }
    if let Some(w) = cli.workers {
        overrides.push(format!("run.workers={w}"));
    }
    if let Some(d) = &cli.out_dir {
        overrides.push(format!("output.dir={}", d.display()));
    }
    if let Some(f) = &cli.format {
        overrides.push(format!("output.format={f}"));
    }
    raw.apply_overrides(&overrides).map_err(|e| e.to_string())?;
    ExperimentConfig::from_raw(&raw).map_err(|e| e.to_string())
}

fn run(cli: &Cli, cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    match &cli.command {
        Command::Simulate { dump_rep } => commands::simulate(cfg, *dump_rep),
        Command::Moments => commands::moments(cfg),
        Command::CltTest => commands::clt_test(cfg),
        Command::TruncationDemo => commands::truncation_demo(cfg),
        Command::VarianceGrowth => commands::variance_growth(cfg),
        Command::CovarianceField { lower_bound } => commands::covariance(cfg, *lower_bound),
        Command::MartingaleCheck => commands::martingale(cfg),
        Command::VerifyAll => commands::verify_all(cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let started = SystemTime::now();
    let clock = Instant::now();
    let outcome = match run(&cli, &cfg) {
        Ok(o) => o,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let mut meta = Metadata::new(cli.command.name(), started, clock.elapsed(), cfg.workers);
    meta.timings = outcome.timings;
    match write_report(
        &cfg.out_dir,
        &outcome.report,
        &meta,
        cfg.format.csv(),
        cfg.format.json(),
    ) {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: writing {}: {e}", cfg.out_dir.display());
            return ExitCode::from(1);
        }
    }
    match outcome.report.passed {
        Some(false) => {
            eprintln!("{}: FAIL", outcome.report.name);
            ExitCode::from(1)
        }
        Some(true) => {
            eprintln!("{}: PASS", outcome.report.name);
            ExitCode::SUCCESS
        }
        None => ExitCode::SUCCESS,
    }
}
