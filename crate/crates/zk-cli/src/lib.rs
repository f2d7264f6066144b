//! Experiment runner: every module of the laboratory behind one binary with
//! reproducible, file-driven configuration.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 on numerical
//! failures (non-convergence).

mod commands;
mod config;

use std::path::PathBuf;
use std::sync::Once;

use clap::{Parser, Subcommand, ValueEnum};

pub use config::Config;

#[derive(Debug, Parser)]
#[command(name = "zk-lab", about = "cylinder flow laboratory", disable_version_flag = true)]
struct Cli {
    /// Declarative config file (TOML, one table per subcommand).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV tables and dumps.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the flow and track conserved quantities.
    Simulate,
    /// Evaluate norms on a field or trajectory dump.
    Norms,
    /// Classification census over sampled frequency triples.
    Classify,
    /// Statistical verification sweeps for one lemma family.
    VerifyLemma {
        #[arg(value_enum)]
        lemma: Lemma,
    },
    /// Bilinear-estimate failure scan.
    Counterexample {
        #[arg(value_enum)]
        case: CxCase,
    },
    /// Randomized-data census: variance oracle and smoothing run.
    RandomExperiment,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Lemma {
    Localization,
    Coro,
    Sweden,
    Abounds,
    Bilinear,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CxCase {
    X,
    Y,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io: {e}"))
    }
}

static POOL: Once = Once::new();

fn init_threads(cfg: &Config) {
    let n = std::env::var("ZK_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(cfg.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    POOL.call_once(|| {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    });
}

pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = std::iter::once("zk-lab".to_string())
        .chain(args.into_iter().map(Into::into))
        .collect();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            eprint!("{e}");
            return 1;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let Some(path) = &cli.config else {
        return Err(CliError::Config("missing --config PATH".into()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: Config =
        toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    init_threads(&cfg);
    std::fs::create_dir_all(&cli.out)?;
    // echo the resolved configuration for provenance
    let echoed = toml::to_string_pretty(&cfg)
        .map_err(|e| CliError::Config(format!("cannot echo config: {e}")))?;
    std::fs::write(cli.out.join("resolved_config.toml"), echoed)?;

    let seed = cfg.seed.unwrap_or(0);
    match &cli.command {
        Command::Simulate => commands::simulate(&cfg, &cli.out),
        Command::Norms => commands::norms(&cfg, &cli.out),
        Command::Classify => commands::classify_cmd(&cfg, &cli.out, seed),
        Command::VerifyLemma { lemma } => commands::verify_lemma(&cfg, &cli.out, seed, *lemma),
        Command::Counterexample { case } => commands::counterexample(&cfg, &cli.out, *case),
        Command::RandomExperiment => commands::random_experiment(&cfg, &cli.out, seed),
    }
}
