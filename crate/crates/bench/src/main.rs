use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use proxsvrg_bench::{cmd_diagnose, cmd_gen, cmd_grid, cmd_phase, cmd_run, BenchError, ExperimentConfig, Outcome};

#[derive(Parser)]
#[command(name = "proxsvrg", version, about = "Proximal SVRG experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset and its ground truth.
    Gen(Flags),
    /// Run the configured solvers against a reference solution.
    Run(Flags),
    /// Tune the step size of the constant-rate solvers over 2/2^k, k = 0..12.
    Grid(Flags),
    /// Report convergence constants, the lambda bound, cone and RSC checks.
    Diagnose(Flags),
    /// Fit decay factors over the sparsity levels in `phase_r`.
    Phase(Flags),
}

/// Flags override the config file; `--set` overrides both.
#[derive(Args)]
struct Flags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Repeatable; replaces the configured solver list.
    #[arg(long = "solver")]
    solvers: Vec<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Budget in effective passes.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_name = "on|off")]
    normalize: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    timing: bool,
    /// Any config key, as `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl Flags {
    fn resolve(&self) -> Result<ExperimentConfig, BenchError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let mut pairs: Vec<(&str, String)> = Vec::new();
        let mut opt = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k, v));
            }
        };
        opt("out", self.out.as_ref().map(|p| p.display().to_string()));
        opt("seed", self.seed.map(|v| v.to_string()));
        opt("m", self.m.map(|v| v.to_string()));
        opt("beta", self.beta.map(|v| v.to_string()));
        opt("lambda", self.lambda.map(|v| v.to_string()));
        opt("rho", self.rho.map(|v| v.to_string()));
        opt("epochs", self.epochs.map(|v| v.to_string()));
        opt("normalize", self.normalize.clone());
        opt("workers", self.workers.map(|v| v.to_string()));
        if !self.solvers.is_empty() {
            pairs.push(("solvers", self.solvers.join(",")));
        }
        if self.timing {
            pairs.push(("timing", "on".into()));
        }
        for (k, v) in pairs {
            cfg.set(k, &v)?;
        }
        for s in &self.sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| BenchError::validation(format!("--set expects key=value, got `{s}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<Outcome, BenchError> {
    let (flags, f): (&Flags, fn(&ExperimentConfig) -> Result<Outcome, BenchError>) = match &cli.command {
        Command::Gen(a) => (a, cmd_gen),
        Command::Run(a) => (a, cmd_run),
        Command::Grid(a) => (a, cmd_grid),
        Command::Diagnose(a) => (a, cmd_diagnose),
        Command::Phase(a) => (a, cmd_phase),
    };
    let cfg = flags.resolve()?;
    log::info!("config hash {}", cfg.hash());
    f(&cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(out) => {
            for line in &out.summary {
                println!("{line}");
            }
            for a in &out.artifacts {
                println!("wrote {}", a.display());
            }
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
