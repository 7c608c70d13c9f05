//! Command-line front end: configuration presets, subcommand dispatch, and
//! the SVG rating plots.

mod commands;
mod config;
mod plot;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{describe_eval, read_roster, write_atomic};
pub use config::{
    apply_file, apply_key, apply_override, preset, render, search_params, ConfigError, RunConfig,
    PRESET_NAMES,
};
pub use plot::{merged_csv, read_series, render_svg, PlotError, Series};

use crate::chess::Variant;
use crate::net::load_checkpoint;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Validation(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Chess(#[from] crate::chess::ChessError),
    #[error(transparent)]
    Train(#[from] crate::selfplay::TrainError),
    #[error(transparent)]
    Checkpoint(#[from] crate::net::CheckpointError),
    #[error(transparent)]
    Table(#[from] crate::elo::TableError),
    #[error(transparent)]
    Rating(#[from] crate::elo::RatingError),
    #[error(transparent)]
    Matchmaking(#[from] crate::elo::MatchmakingError),
    #[error(transparent)]
    PgnIo(#[from] crate::elo::PgnIoError),
    #[error(transparent)]
    Plot(#[from] plot::PlotError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Exit codes: 1 usage/config, 2 validation failure, 3 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Chess(_) | CliError::Rating(_) | CliError::Table(_) => 1,
            CliError::Plot(e) => match e {
                PlotError::Io { .. } => 3,
                _ => 1,
            },
            CliError::Checkpoint(e) => match e {
                crate::net::CheckpointError::Io { .. } => 3,
                _ => 1,
            },
            CliError::Train(e) => match e {
                crate::selfplay::TrainError::Io { .. } => 3,
                _ => 1,
            },
            CliError::Matchmaking(_) | CliError::PgnIo(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> CliError {
        match e {
            ConfigError::Io { path, source } => CliError::Io { path, source },
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "gateau",
    about = "Graph-attention chess: self-play training, search, and Elo evaluation for 8x8 and 5x5 boards",
    version
)]
pub struct Cli {
    /// Worker threads for self-play and matches (0 = all cores). The
    /// GATEAU_THREADS environment variable overrides this flag.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// Named preset to start from.
    #[arg(long, default_value = "alg1-defaults")]
    pub preset: String,
    /// Configuration file applied on top of the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Board variant override (chess | gardner).
    #[arg(long)]
    pub variant: Option<String>,
    /// Master seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Individual overrides, e.g. --set train.batch_size=64.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the self-play training loop from scratch (resumable).
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for checkpoints, window, and metrics.
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
    },
    /// Continue training from an existing checkpoint, possibly on the
    /// other board size.
    Finetune {
        #[command(flatten)]
        config: ConfigArgs,
        /// Checkpoint to start from.
        #[arg(long)]
        from: PathBuf,
        #[arg(long, default_value = "runs/finetune")]
        out: PathBuf,
    },
    /// Rating tournament over a roster of checkpoints.
    Rate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Roster file: one `checkpoint path,label` per line.
        #[arg(long)]
        roster: PathBuf,
        #[arg(long, default_value = "runs/rate")]
        out: PathBuf,
        /// Existing match store to extend (defaults to OUT/matches.csv).
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Render rating curves with two-sigma bands as SVG.
    Plot {
        /// Ratings CSV inputs.
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "elo.svg")]
        out: PathBuf,
        /// Also write the merged CSV here.
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Count legal-move tree leaves at a fixed depth.
    Perft {
        #[arg(long, default_value = "startpos")]
        fen: String,
        #[arg(long)]
        depth: u32,
        #[arg(long, default_value = "chess")]
        variant: String,
    },
    /// Dump a position's node/edge feature matrices as CSV.
    Encode {
        #[arg(long, default_value = "startpos")]
        fen: String,
        #[arg(long, default_value = "chess")]
        variant: String,
        #[arg(long, default_value = "encoded")]
        out: PathBuf,
    },
    /// Play self-play games and optionally store PGN plus frames.
    Selfplay {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 1)]
        games: u32,
        /// Checkpoint to play with (otherwise a fresh network).
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference verification of every gradient path.
    Gradcheck {
        /// Random seeds per primitive.
        #[arg(long, default_value_t = 100)]
        seeds: usize,
    },
    /// Configuration utilities.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Subcommand, Debug)]
pub enum ConfigAction {
    /// Print a fully resolved configuration.
    Show {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn parse_variant(name: &str) -> Result<Variant, CliError> {
    Variant::from_name(name)
        .ok_or_else(|| CliError::Usage(format!("unknown variant '{name}' (chess | gardner)")))
}

/// Resolves preset + file + flag overrides into a run configuration.
pub fn resolve_config(args: &ConfigArgs, threads: usize) -> Result<RunConfig, CliError> {
    let mut config = preset(&args.preset)?;
    if let Some(path) = &args.config {
        apply_file(&mut config, path)?;
    }
    if let Some(variant) = &args.variant {
        config.train.variant = parse_variant(variant)?;
    }
    if let Some(seed) = args.seed {
        config.train.seed = seed;
        config.train.search.seed = seed;
    }
    for setting in &args.sets {
        apply_override(&mut config, setting)?;
    }
    config.train.threads = match std::env::var("GATEAU_THREADS") {
        Ok(v) => v
            .parse()
            .map_err(|_| CliError::Config(format!("GATEAU_THREADS='{v}' is not a number")))?,
        Err(_) => threads,
    };
    if config.train.threads == 0 {
        config.train.threads = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1);
    }
    Ok(config)
}

/// Executes a parsed command line. Returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { config, out } => {
            let config = resolve_config(&config, cli.threads)?;
            commands::cmd_train(&config, None, &out)
        }
        Command::Finetune { config, from, out } => {
            let config = resolve_config(&config, cli.threads)?;
            let initial = load_checkpoint(&from)?;
            commands::cmd_train(&config, Some(initial), &out)
        }
        Command::Rate {
            config,
            roster,
            out,
            store,
        } => {
            let config = resolve_config(&config, cli.threads)?;
            commands::cmd_rate(&config, &roster, &out, store.as_deref())
        }
        Command::Plot {
            inputs,
            out,
            csv_out,
        } => {
            if inputs.is_empty() {
                return Err(CliError::Usage("plot needs at least one input CSV".into()));
            }
            commands::cmd_plot(&inputs, &out, csv_out.as_deref())
        }
        Command::Perft {
            fen,
            depth,
            variant,
        } => commands::cmd_perft(&fen, depth, parse_variant(&variant)?),
        Command::Encode { fen, variant, out } => {
            commands::cmd_encode(&fen, parse_variant(&variant)?, &out)
        }
        Command::Selfplay {
            config,
            games,
            ckpt,
            out,
        } => {
            let config = resolve_config(&config, cli.threads)?;
            commands::cmd_selfplay(&config, ckpt.as_deref(), games, out.as_deref())
        }
        Command::Gradcheck { seeds } => commands::cmd_gradcheck(seeds),
        Command::Config { action } => match action {
            ConfigAction::Show { config } => {
                let config = resolve_config(&config, cli.threads)?;
                print!("{}", render(&config));
                Ok(())
            }
        },
    }
}
