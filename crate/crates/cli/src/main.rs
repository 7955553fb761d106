use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tagrec_core::config::PipelineConfig;
use tagrec_core::factorization::{LossKind, MetadataMode};
use tagrec_core::features::FeatureKind;
use tagrec_core::{pipeline, Error, Result};

/// Tag-aware hybrid recommendation: document encoder, factorization models
/// and Recall@K evaluation.
#[derive(Parser)]
#[command(name = "tagrec", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (TOML). Built-in defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the config (split, encoder and factorization).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Output directory: the dataset directory for `ingest`, the artifacts
    /// directory otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Convert raw inputs into the canonical dataset and print its statistics.
    Ingest,
    /// Build and write an item feature matrix.
    Features {
        #[arg(long, value_parser = parse_kind, default_value = "tags")]
        kind: FeatureKind,
    },
    /// Train the document encoder on tag prediction.
    TrainEncoder {
        /// Checkpoint path (default: <artifacts>/encoder.json).
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Export document embeddings for every item.
    Embed {
        #[arg(long)]
        encoder: Option<PathBuf>,
        /// Embeddings path (default: <artifacts>/embeddings.txt).
        #[arg(long)]
        embeddings_out: Option<PathBuf>,
    },
    /// Train a factorization model.
    TrainMf {
        #[arg(long)]
        model_out: Option<PathBuf>,
        #[arg(long, value_parser = parse_loss)]
        loss: Option<LossKind>,
        #[arg(long, value_parser = parse_kind)]
        item_features: Option<FeatureKind>,
        #[arg(long, value_parser = parse_metadata)]
        metadata: Option<MetadataMode>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Row label used in comparison reports.
        #[arg(long)]
        name: Option<String>,
    },
    /// Compare checkpoints by Recall@K with paired t-tests against a baseline.
    Evaluate {
        #[arg(required = true)]
        checkpoints: Vec<PathBuf>,
    },
    /// Print the top-k unseen items for a user.
    Recommend {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        user: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
}

fn parse_kind(s: &str) -> std::result::Result<FeatureKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_metadata(s: &str) -> std::result::Result<MetadataMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_loss(s: &str) -> std::result::Result<LossKind, String> {
    match s {
        "bpr" => Ok(LossKind::Bpr),
        "warp" => Ok(LossKind::Warp),
        other => Err(format!("unknown loss {other:?} (expected bpr or warp)")),
    }
}

fn load_config(common: &Common, ingest: bool) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.split.seed = seed;
        cfg.encoder.seed = seed;
        cfg.mf.seed = seed;
    }
    cfg.encoder.threads = common.threads;
    if let Some(out) = &common.out {
        if ingest {
            cfg.paths.dataset = out.clone();
        } else {
            cfg.paths.artifacts = out.clone();
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn or_default(path: Option<PathBuf>, default: impl FnOnce() -> PathBuf) -> PathBuf {
    path.unwrap_or_else(default)
}

fn run(cli: Cli) -> Result<()> {
    pipeline::init_threads(cli.common.threads)?;
    let ingest = matches!(cli.command, Command::Ingest);
    let mut cfg = load_config(&cli.common, ingest)?;
    match cli.command {
        Command::Ingest => {
            let stats = pipeline::ingest(&cfg)?;
            println!("{}", stats.summary_line());
            println!("{} raw tags", stats.n_tags);
        }
        Command::Features { kind } => {
            let path = pipeline::features(&cfg, kind)?;
            println!("{}", path.display());
        }
        Command::TrainEncoder { model_out } => {
            let out = or_default(model_out, || pipeline::encoder_path(&cfg));
            let ckpt = pipeline::train_encoder_stage(&cfg, &out)?;
            if let Some(last) = ckpt.epoch_log.last() {
                println!("epoch {} mean BCE {:.6}", last.epoch, last.mean_loss);
            }
            println!("{}", out.display());
        }
        Command::Embed {
            encoder,
            embeddings_out,
        } => {
            let encoder = or_default(encoder, || pipeline::encoder_path(&cfg));
            let out = or_default(embeddings_out, || pipeline::embeddings_path(&cfg));
            let emb = pipeline::embed(&cfg, &encoder, &out)?;
            println!(
                "{} vectors of dimension {} -> {}",
                emb.n_items(),
                emb.dim(),
                out.display()
            );
        }
        Command::TrainMf {
            model_out,
            loss,
            item_features,
            metadata,
            embeddings,
            name,
        } => {
            let mf = &mut cfg.mf;
            mf.loss = loss.unwrap_or(mf.loss);
            mf.item_features = item_features.unwrap_or(mf.item_features);
            mf.metadata = metadata.unwrap_or(mf.metadata);
            mf.embeddings = embeddings.or(mf.embeddings.take());
            mf.name = name.or(mf.name.take());
            if mf.metadata != MetadataMode::None && mf.embeddings.is_none() {
                let default = pipeline::embeddings_path(&cfg);
                cfg.mf.embeddings = Some(default);
            }
            let out = or_default(model_out, || {
                let slug = cfg
                    .mf
                    .display_name()
                    .to_lowercase()
                    .replace(" + ", "-")
                    .replace(' ', "-");
                cfg.paths.artifacts.join(format!("mf-{slug}.json"))
            });
            let ckpt = pipeline::train_mf(&cfg, &out)?;
            for (i, run) in ckpt.runs.iter().enumerate() {
                if let Some(last) = run.epoch_log.last() {
                    println!("split {i}: epoch {} mean loss {:.6}", last.epoch, last.mean_loss);
                }
            }
            println!("{}", out.display());
        }
        Command::Evaluate { checkpoints } => {
            let out = cfg.paths.artifacts.clone();
            let report = pipeline::evaluate_checkpoints(&cfg, &checkpoints, &out)?;
            print!("{}", report.comparison.to_table());
        }
        Command::Recommend { checkpoint, user, k } => {
            for (rank, rec) in pipeline::recommend(&cfg, &checkpoint, user, k)?.iter().enumerate() {
                println!(
                    "{}\t{}\t{:.6}\t{}",
                    rank + 1,
                    rec.item,
                    rec.score,
                    rec.title.as_deref().unwrap_or("")
                );
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Numeric(_) => 4,
        Error::Io { .. } | Error::Parse { .. } | Error::Data(_) | Error::Dimension(_) => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
