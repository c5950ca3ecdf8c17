use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flowembed::exec::configure_threads;
use flowembed::model::FieldLossKind;
use flowembed::{Error, Exec};

mod commands;
mod config;

use commands::{Context, EvalInputs};
use config::RunConfig;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

/// Learned embeddings of polynomial dynamical systems.
#[derive(Parser, Debug)]
#[command(name = "flowembed", version)]
struct Cli {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Train without dividing the loss by the local speed.
    #[arg(long, global = true)]
    no_fp_norm: bool,
    /// Sparsity weight (training) or lasso penalty (lasso).
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true, default_value = "out")]
    output: PathBuf,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true, env = "P2V_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a dataset.
    Generate,
    /// Train an encoder-decoder.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Write the embedding of every sample.
    Embed {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Decode every sample back to a polynomial field.
    Reconstruct {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Per-sample sparse regression baseline.
    Lasso {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Run an evaluation experiment.
    Eval {
        /// recon-table, noise-sweep, sparsity-sweep, homoclinic, classify or
        /// resolution; defaults to the configured experiment.
        experiment: Option<String>,
        /// Model checkpoint; repeat for sparsity-sweep.
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        /// Model trained without normalization, for homoclinic.
        #[arg(long)]
        baseline_checkpoint: Option<PathBuf>,
        /// Evaluation data; sampled from the configuration when absent.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::parse(&std::fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if cli.no_fp_norm {
        config.train.loss = FieldLossKind::Unnormalized;
    }
    if let Some(b) = cli.beta {
        match cli.command {
            Command::Lasso { .. } => config.lasso.beta = b,
            _ => config.train.beta = b,
        }
    }
    config.validate()?;
    let exec = match cli.threads {
        Some(0) => return Err(Error::Config("--threads must be positive".into())),
        Some(1) => Exec::Sequential,
        Some(t) => {
            configure_threads(t).map_err(Error::Config)?;
            Exec::Parallel
        }
        None => Exec::Parallel,
    };
    let ctx = Context { config, output: cli.output, exec };
    match cli.command {
        Command::Generate => commands::generate(&ctx),
        Command::Train { dataset, resume } => commands::train_cmd(&ctx, &dataset, resume.as_deref()),
        Command::Embed { checkpoint, dataset } => commands::embed(&ctx, &checkpoint, &dataset),
        Command::Reconstruct { checkpoint, dataset } => commands::reconstruct(&ctx, &checkpoint, &dataset),
        Command::Lasso { dataset } => commands::lasso(&ctx, &dataset),
        Command::Eval { experiment, checkpoint, baseline_checkpoint, dataset } => {
            let name = experiment.unwrap_or_else(|| ctx.config.experiment.clone());
            let inputs = EvalInputs {
                checkpoints: &checkpoint,
                baseline: baseline_checkpoint.as_deref(),
                dataset: dataset.as_deref(),
            };
            commands::eval(&ctx, &name, &inputs)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
