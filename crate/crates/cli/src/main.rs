//! `objex`: synthesize datasets, train and fit the extractor, extract
//! objects, render productions and evaluate methods.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "objex", version, about = "Audio object extraction from 5.1 mixes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Master seed (overrides the config file).
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads for per-excerpt work.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize an evaluation set.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_objects: Option<usize>,
        /// Number of excerpts.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Render a production directory to 2.0, 5.1, 7.1 and 9.1 WAVs.
    Render {
        #[command(flatten)]
        common: Common,
        /// Production directory (obj_#.wav, obj_#.csv, bed.wav).
        #[arg(long)]
        input: PathBuf,
    },
    /// Supervised training on procedural scenes.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_objects: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Unsupervised fit of a fresh network to one 5.1 WAV.
    Fit {
        #[command(flatten)]
        common: Common,
        /// 5.1 WAV to fit.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        n_objects: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Fine-tune a supervised checkpoint on one 5.1 WAV.
    Finetune {
        #[command(flatten)]
        common: Common,
        /// 5.1 WAV to fit.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Extract objects and bed from one 5.1 WAV with a trained checkpoint.
    Extract {
        #[command(flatten)]
        common: Common,
        /// 5.1 WAV to process.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Score methods on a dataset against baselines and mask oracles.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Dataset directory written by `synth`.
        #[arg(long)]
        dataset: PathBuf,
        /// Method outputs as NAME=DIR, where DIR holds one production
        /// directory per excerpt. Repeatable.
        #[arg(long = "method", value_name = "NAME=DIR")]
        methods: Vec<String>,
        /// Skip the ideal-binary-mask oracles.
        #[arg(long)]
        no_oracles: bool,
    },
    /// Dump mel spectrograms and trajectories of an excerpt or production
    /// directory as CSV.
    Plotdata {
        #[command(flatten)]
        common: Common,
        /// Excerpt or production directory.
        #[arg(long)]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { commands::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.code())
        }
    }
}
