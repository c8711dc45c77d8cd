use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use catbox_core::bench::{run_study, BenchError, StudyConfig};
use catbox_core::{Campaign, CampaignConfig, CampaignError, MixedPoint, SearchSpace};
use clap::{Parser, Subcommand};
use thiserror::Error;

/// Mixed categorical/continuous Bayesian optimization from the shell.
#[derive(Debug, Parser)]
#[command(name = "catbox", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create a campaign file and print its initial design.
    Init {
        /// Search space JSON.
        #[arg(long)]
        space: PathBuf,
        /// Engine config JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the next point to evaluate and record it as pending.
    Suggest {
        #[arg(long)]
        campaign: PathBuf,
    },
    /// Record an observation and refit the surrogate.
    Tell {
        #[arg(long)]
        campaign: PathBuf,
        /// Point JSON, e.g. '{"cat":[1],"con":[0.5]}'.
        #[arg(long)]
        point: String,
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
        /// Expected iteration index; rejects retried submissions.
        #[arg(long)]
        iteration: Option<u64>,
    },
    /// Run a benchmark study and write its CSV set.
    RunBench {
        #[arg(long)]
        study: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the campaign history as CSV.
    Export {
        #[arg(long)]
        campaign: PathBuf,
        #[arg(long)]
        csv: PathBuf,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("invalid point: {0}")]
    Point(serde_json::Error),
    #[error(transparent)]
    Campaign(#[from] CampaignError),
    #[error(transparent)]
    Bench(#[from] BenchError),
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|source| CliError::Json { path: path.into(), source })
}

/// Temp file next to `path`, then rename over it.
fn write_atomic(path: &Path, body: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.into(), source };
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(body.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn load(path: &Path) -> Result<Campaign, CliError> {
    Ok(Campaign::from_json(&read(path)?)?)
}

fn save(path: &Path, campaign: &Campaign) -> Result<(), CliError> {
    write_atomic(path, &(campaign.to_json() + "\n"))
}

fn to_line<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("value serializes")
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Init { space, config, seed, out } => {
            let space: SearchSpace = read_json(&space)?;
            let mut config: CampaignConfig = match config {
                Some(p) => read_json(&p)?,
                None => CampaignConfig::default(),
            };
            if let Some(s) = seed {
                config.suggest.seed = s;
            }
            let campaign = Campaign::new(space, config)?;
            save(&out, &campaign)?;
            println!("{}", to_line(&campaign.initial_design));
        }
        Command::Suggest { campaign: path } => {
            let mut campaign = load(&path)?;
            let s = campaign.suggest()?;
            save(&path, &campaign)?;
            println!("{}", to_line(&s.point));
        }
        Command::Tell { campaign: path, point, y, iteration } => {
            let mut campaign = load(&path)?;
            let point: MixedPoint = serde_json::from_str(&point).map_err(CliError::Point)?;
            campaign.tell_at(point, y, iteration)?;
            campaign.refit()?;
            save(&path, &campaign)?;
            let inc = campaign.incumbent.as_ref().expect("history is non-empty");
            println!("{}", to_line(&serde_json::json!({"n_observations": campaign.history.len(), "incumbent": inc})));
        }
        Command::RunBench { study, out } => {
            let config: StudyConfig = read_json(&study)?;
            let result = run_study(&config)?;
            for path in result.write(&out)? {
                println!("{}", path.display());
            }
        }
        Command::Export { campaign, csv } => {
            let campaign = load(&campaign)?;
            write_atomic(&csv, &campaign.history_csv())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("catbox: {msg}");
            ExitCode::FAILURE
        }
    }
}
