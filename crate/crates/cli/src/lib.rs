//! Command-line front end: argument parsing, run configuration, the worker
//! pool and the output writers. The simulation itself lives in `evmchaos-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use evmchaos_core::Mode;

use crate::config::RunConfig;
use crate::output::Meta;

/// Why a run stopped. Usage problems exit with 1, numerical and I/O failures with 2.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<evmchaos_core::Error> for Failure {
    fn from(e: evmchaos_core::Error) -> Self {
        match e {
            e @ (evmchaos_core::Error::InvalidParams(_) | evmchaos_core::Error::UnsupportedRegime { .. }) => {
                Self::Usage(e.to_string())
            }
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(format!("I/O error: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::Runtime(format!("CSV error: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(name = "evmchaos", version, about = "Kicked damped oscillator: classical map and quantum expectation-values map")]
pub struct Cli {
    /// JSON run configuration; command-line flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "EVMCHAOS_THREADS", value_name = "N")]
    pub threads: Option<usize>,

    /// Leave the wall time out of output headers, making whole files reproducible.
    #[arg(long, global = true)]
    pub omit_timing: bool,

    #[command(flatten)]
    pub model: ModelArgs,

    #[command(subcommand)]
    pub command: Command,
}

/// Model parameters shared by every subcommand.
#[derive(Args, Debug, Default, Clone)]
pub struct ModelArgs {
    /// classical or quantum
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    #[arg(long, global = true)]
    pub hbar: Option<f64>,
    #[arg(long, global = true)]
    pub kbt: Option<f64>,
    #[arg(long = "omega-c", global = true)]
    pub omega_c: Option<f64>,
}

impl ModelArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        let p = &mut cfg.params;
        set(&mut p.gamma, self.gamma);
        set(&mut p.tau, self.tau);
        set(&mut p.hbar, self.hbar);
        set(&mut p.kbt, self.kbt);
        set(&mut p.omega_c, self.omega_c);
    }
}

pub(crate) fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Post-transient Q samples of an ensemble of orbits over a V0 grid.
    Bifurcation(commands::diagram::BifurcationArgs),
    /// Post-transient (Q, P) points of one orbit.
    Attractor(commands::diagram::AttractorArgs),
    /// Largest Lyapunov exponent over a V0 grid.
    Lyapunov(commands::lyapunov::LyapunovArgs),
    /// Hopf or chaos threshold inside a V0 bracket.
    Threshold(commands::threshold::ThresholdArgs),
    /// Thresholds along a grid of kbt, hbar or omega_c values.
    Sweep(commands::threshold::SweepArgs),
    /// Log-log fit of the threshold shift against the sweep axis.
    Scaling(commands::threshold::ScalingArgs),
    /// Noise kernels over frequency, or bath moments over a parameter grid.
    NoiseTable(commands::noise::NoiseTableArgs),
    /// Density matrix on a position grid from first and second moments.
    Reconstruct(commands::reconstruct::ReconstructArgs),
    /// Quick numerical self-checks.
    Selftest(commands::selftest::SelftestArgs),
}

/// State handed to every command.
pub struct Context {
    pub config: RunConfig,
    started: Instant,
    omit_timing: bool,
}

impl Context {
    pub fn meta(&self, command: &'static str, notes: Vec<String>) -> Meta {
        Meta {
            command,
            config: self.config.clone(),
            wall_time: (!self.omit_timing).then(|| self.started.elapsed().as_secs_f64()),
            notes,
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("evmchaos: {f}");
            f.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), Failure> {
    let mut config = config::load(cli.config.as_deref())?;
    cli.model.apply(&mut config);
    config.params.validate()?;
    let mut ctx = Context {
        config,
        started: Instant::now(),
        omit_timing: cli.omit_timing,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure::Runtime(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Bifurcation(a) => commands::diagram::bifurcation(a, &mut ctx),
        Command::Attractor(a) => commands::diagram::attractor(a, &mut ctx),
        Command::Lyapunov(a) => commands::lyapunov::run(a, &mut ctx),
        Command::Threshold(a) => commands::threshold::threshold(a, &mut ctx),
        Command::Sweep(a) => commands::threshold::sweep(a, &mut ctx),
        Command::Scaling(a) => commands::threshold::scaling(a, &mut ctx),
        Command::NoiseTable(a) => commands::noise::run(a, &mut ctx),
        Command::Reconstruct(a) => commands::reconstruct::run(a, &mut ctx),
        Command::Selftest(a) => commands::selftest::run(a, &mut ctx),
    })
}
