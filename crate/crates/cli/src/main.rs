//! `wugs`: batch and reproduction runs over Word Usage Graph projects.
//!
//! Every command writes its results and a `manifest.json` (seed, effective
//! configuration, configuration hash, version) under `--out`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "wugs", version, about = "Word Usage Graph annotation pipeline")]
pub struct Cli {
    /// Directory for all outputs.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Flat key-value config file (TOML syntax).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed; overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override one setting, e.g. `--set anneal.k_max=4`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a project from TSV files, or append judgments to one.
    Ingest {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        usages: Option<PathBuf>,
        #[arg(long)]
        senses: Option<PathBuf>,
        #[arg(long)]
        judgments: Option<PathBuf>,
        /// Allowed groupings; by default those found in the usages.
        #[arg(long, value_delimiter = ',')]
        periods: Vec<u32>,
        /// Annotator roster; by default those found in the judgments.
        #[arg(long, value_delimiter = ',')]
        annotators: Vec<String>,
        /// Project id; by default the directory name.
        #[arg(long)]
        id: Option<String>,
    },
    /// Close the open round and sample the next batch.
    Sample {
        #[arg(long)]
        project: PathBuf,
        /// Give up tasks that are still open.
        #[arg(long)]
        expire: bool,
    },
    /// Cluster the current graphs.
    Cluster {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        lemma: Option<String>,
    },
    /// Agreement, judgment distributions and per-lemma status.
    Stats {
        #[arg(long)]
        project: PathBuf,
    },
    /// Graded and binary change per lemma.
    Change {
        #[arg(long)]
        project: PathBuf,
    },
    /// Accuracy under judgment perturbation, on a project lemma or on
    /// planted graphs.
    Robustness {
        #[arg(long, requires = "lemma")]
        project: Option<PathBuf>,
        #[arg(long)]
        lemma: Option<String>,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0,0.05,0.1,0.15,0.2,0.25,0.3,0.4,0.5,0.75,1"
        )]
        fractions: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 10)]
        graphs: usize,
        #[arg(long, default_value_t = 150)]
        usages: usize,
        #[arg(long, default_value_t = 3)]
        senses: usize,
        /// Share of pairs judged in each planted graph.
        #[arg(long, default_value_t = 0.1)]
        density: f64,
    },
    /// Run the round-based pipeline against simulated annotators.
    Simulate {
        #[arg(long, default_value_t = 100)]
        usages: usize,
        #[arg(long, default_value_t = 2)]
        senses: usize,
        /// Share of usages in the first period.
        #[arg(long, default_value_t = 0.5)]
        split: f64,
        /// Probability of an off-by-one judgment; overrides `noise.p_deviate`.
        #[arg(long)]
        noise: Option<f64>,
        /// Probability of a 0 judgment; overrides `noise.p_zero`.
        #[arg(long)]
        p_zero: Option<f64>,
        #[arg(long, default_value_t = 6)]
        rounds: u32,
        #[arg(long, default_value_t = 4)]
        annotators: usize,
    },
    /// Serve the annotation API for a project.
    Serve {
        #[arg(long)]
        project: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: std::net::SocketAddr,
    },
    /// Graph JSON and TSV files of a project.
    Export {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        lemma: Option<String>,
    },
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Data(_) => "data",
            Failure::Internal(_) => "internal",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<wugs::Error> for Failure {
    fn from(e: wugs::Error) -> Self {
        match e {
            wugs::Error::InvalidConfig(m) => Failure::Usage(m),
            other => Failure::Data(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = std::panic::catch_unwind(|| run(&cli))
        .unwrap_or_else(|_| Err(Failure::Internal("unexpected panic".into())));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = serde_json::json!({ "error": f.kind(), "message": f.message() });
            eprintln!("{msg}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let mut settings = Settings::load(cli.config.as_deref(), &cli.set).map_err(Failure::Usage)?;
    if let Some(seed) = cli.seed {
        settings.seed = seed;
    }
    commands::dispatch(cli, &cli.command, &settings)
}
