//! `xcn`: train, evaluate and inspect XCrossNet models.

mod config;
mod error;
mod score;
mod source;
mod tools;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use xcrossnet::data::DenseTransform;

use crate::config::{parse_widths, read_config_file, resolve, synth_preset, Overrides};
use crate::error::CliError;
use crate::source::{DataArg, CHECKPOINT_FILE};

/// Exit status after Ctrl-C, once the final checkpoint is written.
const INTERRUPTED_EXIT: u8 = 130;

#[derive(Parser)]
#[command(name = "xcn", version, about = "XCrossNet click-through-rate models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes checkpoint, log, resolved config and vocabulary.
    Train(Box<TrainArgs>),
    /// Print AUC and Logloss of a checkpoint on a dataset.
    Eval(ScoreArgs),
    /// Write one predicted probability per input row.
    Predict {
        #[command(flatten)]
        score: ScoreArgs,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic and finite-difference gradients on a small model.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic task as TSV files.
    Synth(SynthArgs),
    /// Print topology, parameter counts and balance index.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// TOML run configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Synthetic preset to train on: default, linear or null.
    #[arg(long)]
    synth: Option<String>,
    /// Seed of the synthetic data generator.
    #[arg(long)]
    synth_seed: Option<u64>,
    /// Training TSV (optionally .gz).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Validation TSV; without it the tail of --data is held out.
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long)]
    valid_fraction: Option<f64>,
    /// Dense columns per TSV row.
    #[arg(long)]
    num_dense: Option<usize>,
    /// Categorical columns per TSV row.
    #[arg(long)]
    num_sparse: Option<usize>,
    /// log or identity.
    #[arg(long)]
    dense_transform: Option<DenseTransform>,
    #[arg(long)]
    min_freq: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Seeds initialization and shuffling.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    #[arg(long)]
    product_units: Option<usize>,
    #[arg(long)]
    cross_depth: Option<usize>,
    /// Comma-separated hidden widths, e.g. 400,400.
    #[arg(long)]
    mlp_widths: Option<String>,
    /// Print the resolved configuration as TOML and exit without training.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct ScoreArgs {
    /// Checkpoint file; defaults to model.ckpt inside --run-dir.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// A training output directory: scores its validation split.
    #[arg(long, conflicts_with_all = ["data", "synth"])]
    run_dir: Option<PathBuf>,
    /// TSV file to score.
    #[arg(long, conflicts_with = "synth")]
    data: Option<PathBuf>,
    /// Vocabulary for --data; defaults to vocab.json next to the checkpoint.
    #[arg(long, requires = "data")]
    vocab: Option<PathBuf>,
    /// Synthetic preset to regenerate.
    #[arg(long)]
    synth: Option<String>,
    #[arg(long, requires = "synth")]
    synth_seed: Option<u64>,
    /// Score the synthetic training split instead of validation.
    #[arg(long, requires = "synth")]
    train_split: bool,
}

#[derive(Args)]
struct GradcheckArgs {
    /// TOML model configuration (same keys as the checkpoint's model section).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    batch_size: usize,
    /// Corrupt one group's analytic gradient.
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "default")]
    preset: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_valid: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Compress the TSV files.
    #[arg(long)]
    gzip: bool,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long, conflicts_with = "config")]
    checkpoint: Option<PathBuf>,
    /// TOML run configuration; without either flag the full-scale defaults are shown.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn init_threads() -> Result<(), CliError> {
    let n = match std::env::var("XCN_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("XCN_THREADS must be a non-negative integer, got '{v}'")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("XCN_THREADS: {e}")))
}

fn data_arg(args: &ScoreArgs) -> Result<(DataArg, PathBuf), CliError> {
    let checkpoint = match (&args.checkpoint, &args.run_dir) {
        (Some(c), _) => c.clone(),
        (None, Some(d)) => d.join(CHECKPOINT_FILE),
        (None, None) => return Err(CliError::Usage("--checkpoint <PATH> or --run-dir <DIR> is required".into())),
    };
    let arg = if let Some(d) = &args.run_dir {
        DataArg::RunDir(d.clone())
    } else if let Some(p) = &args.data {
        DataArg::File {
            path: p.clone(),
            vocab: args.vocab.clone(),
        }
    } else if let Some(name) = &args.synth {
        let mut spec = synth_preset(name)?;
        if let Some(s) = args.synth_seed {
            spec.seed = s;
        }
        let flags = Overrides {
            synth: Some(spec),
            ..Overrides::default()
        };
        DataArg::Synth {
            config: Box::new(resolve(None, &flags)?),
            train_split: args.train_split,
        }
    } else {
        return Err(CliError::Usage("no data to score (pass --run-dir, --data or --synth)".into()));
    };
    Ok((arg, checkpoint))
}

fn train_cmd(args: TrainArgs) -> Result<ExitCode, CliError> {
    let file = args.config.as_deref().map(read_config_file).transpose()?;
    let flags = Overrides {
        synth: args.synth.as_deref().map(synth_preset).transpose()?,
        synth_seed: args.synth_seed,
        data: args.data,
        valid: args.valid,
        valid_fraction: args.valid_fraction,
        num_dense: args.num_dense,
        num_sparse: args.num_sparse,
        dense_transform: args.dense_transform,
        min_freq: args.min_freq,
        out: args.out,
        checkpoint_every: args.checkpoint_every,
        epochs: args.epochs,
        batch_size: args.batch_size,
        lr: args.lr,
        lambda: args.lambda,
        seed: args.seed,
        eval_every: args.eval_every,
        embedding_dim: args.embedding_dim,
        product_units: args.product_units,
        cross_depth: args.cross_depth,
        mlp_widths: args
            .mlp_widths
            .as_deref()
            .map(parse_widths)
            .transpose()
            .map_err(|e| CliError::Usage(format!("--mlp-widths: {e}")))?,
    };
    let cfg = resolve(file, &flags)?;
    if args.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(ExitCode::SUCCESS);
    }

    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    ctrlc::set_handler(move || {
        if flag.swap(true, Ordering::SeqCst) {
            // Second Ctrl-C: give up without waiting for the checkpoint.
            std::process::exit(i32::from(INTERRUPTED_EXIT));
        }
        eprintln!("interrupt received: finishing the current step and writing a checkpoint");
    })
    .map_err(|e| CliError::Io(format!("cannot install Ctrl-C handler: {e}")))?;

    let summary = train::run(&cfg, stop)?;
    println!("checkpoint={}", cfg.output.dir.join(CHECKPOINT_FILE).display());
    println!("steps={}", summary.steps);
    println!("interrupted={}", summary.interrupted);
    if let Some(r) = &summary.report {
        println!("{r}");
    }
    if let Some(b) = summary.bayes_auc {
        println!("bayes_auc={b}");
    }
    Ok(if summary.interrupted {
        ExitCode::from(INTERRUPTED_EXIT)
    } else {
        ExitCode::SUCCESS
    })
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    init_threads()?;
    match cli.command {
        Command::Train(args) => train_cmd(*args),
        Command::Eval(args) => {
            let (data, checkpoint) = data_arg(&args)?;
            println!("{}", score::eval(&checkpoint, &data)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Predict { score: args, out } => {
            let (data, checkpoint) = data_arg(&args)?;
            let n = score::predict(&checkpoint, &data, &out)?;
            println!("predictions={n}");
            println!("out={}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Gradcheck(args) => tools::gradcheck(args.config.as_deref(), args.seed, args.batch_size, args.inject_fault),
        Command::Synth(args) => {
            tools::synth(&args.preset, args.seed, args.n_train, args.n_valid, &args.out, args.gzip)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Inspect(args) => {
            tools::inspect(args.checkpoint.as_deref(), args.config.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
