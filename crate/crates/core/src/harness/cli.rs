use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;

use super::config::ExperimentConfig;
use super::experiments::run_experiment;
use super::report::write_csv;
use crate::error::{Error, Result};
use crate::limits::{solve_ht_limit, solve_lt_limit, RateFunction};
use crate::methods::{ccp_oracle, cvar_solve, sample_size_rule, scenario_solve, MethodResult};
use crate::rng::derive_seed;
use crate::sampler::TailModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    LtLimit,
    HtLimit,
    Oracle,
    Cvar,
    Scenario,
    Experiment,
    SampleSize,
}

#[derive(Debug, Parser)]
#[command(name = "rarecc", version, about = "Rare-event chance-constrained linear programs")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON configuration file.
    pub config: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed, overriding `experiment.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replications, overriding `experiment.replications`.
    #[arg(long)]
    pub reps: Option<usize>,
}

/// Parses `argv`, runs the command and returns the process exit code:
/// 0 on success, 2 for usage and configuration errors, 1 otherwise.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rarecc: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

pub fn run(args: &Args) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(reps) = args.reps {
        if reps == 0 {
            return Err(Error::Config("--reps must be at least 1".into()));
        }
        cfg.replications = reps;
    }
    let out = args.out.as_deref();
    match args.command {
        Command::Experiment => {
            let rows = run_experiment(&cfg)?;
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf)?;
            emit(out, &buf)
        }
        Command::LtLimit => {
            let TailModel::Light(m) = &cfg.tail else {
                return Err(Error::Config("lt-limit needs a light tail".into()));
            };
            emit_json(out, &solve_lt_limit(&RateFunction::new(m.clone()), &cfg.problem)?)
        }
        Command::HtLimit => {
            let TailModel::Heavy(m) = &cfg.tail else {
                return Err(Error::Config("ht-limit needs a heavy tail".into()));
            };
            emit_json(out, &solve_ht_limit(m, &cfg.problem)?)
        }
        Command::Oracle => {
            let r = ccp_oracle(&cfg.problem, &cfg.tail, cfg.delta_grid[0], cfg.budget, cfg.master_seed)?;
            emit_json(out, &validated(&cfg, r)?)
        }
        Command::Cvar => {
            let (r, _) = cvar_solve(&cfg.problem, &cfg.tail, cfg.delta_grid[0], cfg.budget, cfg.master_seed)?;
            emit_json(out, &validated(&cfg, r)?)
        }
        Command::Scenario => {
            let k = cfg.k_grid[0];
            let radius = if cfg.scaled { cfg.tail.scale_for_samples(k)? } else { 1.0 };
            let batch = cfg.tail.sample(cfg.master_seed, k)?;
            let sol = scenario_solve(&cfg.problem, &batch, radius)?;
            let r = sol.into_method_result(cfg.delta_grid[0], cfg.master_seed, k);
            emit_json(out, &validated(&cfg, r)?)
        }
        Command::SampleSize => {
            #[derive(Serialize)]
            struct SampleSize {
                delta: f64,
                beta_conf: f64,
                dim: usize,
                k: u64,
            }
            let delta = cfg.delta_grid[0];
            let dim = cfg.dim.unwrap_or(cfg.problem.m());
            let k = sample_size_rule(delta, cfg.beta_conf, dim)?;
            emit_json(out, &SampleSize { delta, beta_conf: cfg.beta_conf, dim, k })
        }
    }
}

fn validated(cfg: &ExperimentConfig, mut r: MethodResult) -> Result<MethodResult> {
    if let Some(budget) = cfg.validation_budget {
        r.validate(&cfg.problem, &cfg.tail, budget, derive_seed(cfg.master_seed, &[u64::MAX]))?;
    }
    Ok(r)
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value).map_err(|e| Error::Solver(e.to_string()))?;
    text.push(b'\n');
    emit(out, &text)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}
