//! `griddy` command-line runner.
//!
//! Each subcommand resolves an [`ExperimentConfig`] (file, then environment,
//! then flags), runs one pipeline and writes its artifacts into the output
//! directory. Every CSV and SVG gets a `.meta.json` sidecar holding the
//! resolved config and seed; JSON artifacts embed them directly.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 parse error, 3 invalid config.

mod config;
mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::norm::Norm;

pub use config::{
    ChainSection, ExperimentConfig, OutputConfig, SamplerConfig, SamplerKind, StudyConfig, TargetConfig, TARGET_NAMES,
};
pub use run::{reproduce_config, run_acf, run_grid_study, run_kernel_verify, run_sample, RunSummary, SEED_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(#[from] crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "griddy",
    version,
    about = "Gibbs, Griddy Gibbs and Metropolized Griddy Gibbs experiments",
    after_help = "Environment:\n  GRIDDY_SEED  seed override; beats the config file, loses to --seed"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one chain and write samples.csv and summary.json.
    Sample(RunArgs),
    /// Discretize kernels and write report.json and sweep.csv.
    KernelVerify(RunArgs),
    /// ECDF error against the knot count: table.csv, study.json, plot.svg.
    GridStudy(RunArgs),
    /// Autocorrelation per sampler: acf.csv, acf.json, acf.svg.
    Acf(RunArgs),
    /// Canned beta-mixture grid study (chain length 1e5, n = 6..81).
    #[command(name = "reproduce-6-1", alias = "reproduce")]
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML experiment config; every section is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    /// Output directory (`output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// `target.name`.
    #[arg(long)]
    target: Option<String>,
    /// `sampler.kind`: gibbs, griddy or metropolized.
    #[arg(long)]
    sampler: Option<SamplerKind>,
    /// `sampler.n`, knots per axis.
    #[arg(long)]
    n: Option<usize>,
    /// `sampler.scheme`: pc, pl or poly:k.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    eps_rel: Option<f64>,
    #[arg(long)]
    m_rel: Option<f64>,
    /// Disable clamping (`sampler.clamp = false`).
    #[arg(long)]
    no_clamp: bool,
    #[arg(long)]
    n_steps: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// `study.ns`, comma separated.
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    /// `study.states`, cells per axis.
    #[arg(long)]
    states: Option<usize>,
    /// `study.p`, comma separated (`inf` allowed).
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<Norm>>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    max_lag: Option<usize>,
    /// `study.samplers` for `acf`, comma separated.
    #[arg(long, value_delimiter = ',')]
    samplers: Option<Vec<SamplerKind>>,
    #[arg(long)]
    chains: Option<usize>,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Chain length per knot count.
    #[arg(long)]
    n_steps: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
}

impl RunArgs {
    fn resolve(self) -> Result<ExperimentConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_path(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag { c.$($field).+ = v; })*
            };
        }
        set!(
            seed => chain.seed,
            out => output.dir,
            target => target.name,
            sampler => sampler.kind,
            n => sampler.n,
            scheme => sampler.scheme,
            eps_rel => sampler.eps_rel,
            m_rel => sampler.m_rel,
            n_steps => chain.n_steps,
            ns => study.ns,
            states => study.states,
            p => study.p,
            replicates => study.replicates,
            max_lag => study.max_lag,
            samplers => study.samplers,
            chains => study.chains,
        );
        if self.burn_in.is_some() {
            c.chain.burn_in = self.burn_in;
        }
        if self.no_clamp {
            c.sampler.clamp = false;
        }
        c.validate()?;
        Ok(c)
    }
}

fn dispatch(command: Command) -> Result<RunSummary, CliError> {
    match command {
        Command::Sample(a) => run_sample(&a.resolve()?),
        Command::KernelVerify(a) => run_kernel_verify(&a.resolve()?),
        Command::GridStudy(a) => run_grid_study(&a.resolve()?, "grid-study"),
        Command::Acf(a) => run_acf(&a.resolve()?),
        Command::Reproduce(a) => {
            let mut c = reproduce_config();
            if let Some(s) = a.seed {
                c.chain.seed = s;
            }
            if let Some(o) = a.out {
                c.output.dir = o;
            }
            if let Some(n) = a.n_steps {
                c.chain.n_steps = n;
            }
            if let Some(r) = a.replicates {
                c.study.replicates = r;
            }
            c.validate()?;
            run_grid_study(&c, "reproduce-6-1")
        }
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. Errors go to stderr, the summary line to stdout.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("griddy: {e}");
            e.exit_code()
        }
    }
}
