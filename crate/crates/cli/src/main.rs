//! `mosaic` — adaptive multi-image preprocessing pipeline CLI.
//!
//! Subcommands mirror the pipeline stages: `plan` solves the tile budget and
//! grid per image, `tile` writes the crops, `encode` turns tiles into
//! shuffled feature tensors, `sequence` assembles the interleaved token
//! layout, `datagen` builds instruction data, `annotate` augments instances
//! with generated rationales, and `eval` scores predictions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use mosaic_cli::commands;
use mosaic_cli::config::{self, Overrides};
use mosaic_cli::error::CliError;

#[derive(Parser)]
#[command(
    name = "mosaic",
    version,
    about = "Adaptive multi-image preprocessing pipeline"
)]
struct Cli {
    /// TOML config file; also settable via MOSAIC_CONFIG.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the tile allocation and grid plan for a set of images.
    Plan(PlanArgs),
    /// Pad, resize, and split images into tiles per the manifest.
    Tile(TileArgs),
    /// Encode tiles into pixel-shuffled FTEN feature tensors.
    Encode(EncodeArgs),
    /// Assemble the interleaved token sequence and check the budget.
    Sequence(SequenceArgs),
    /// Instruction-data construction pipelines.
    #[command(subcommand)]
    Datagen(DatagenCommand),
    /// Augment instances with generated rationales via an annotation endpoint.
    Annotate(AnnotateArgs),
    /// Score predictions with ANLS or exact match.
    Eval(EvalArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// Image files or directories of images; repeatable.
    #[arg(long = "images", required = true, num_args = 1.., value_name = "PATH")]
    images: Vec<PathBuf>,
    /// Global sub-image tile budget M.
    #[arg(long)]
    budget: Option<usize>,
    /// Tile resolution v in pixels.
    #[arg(long = "v", value_name = "PIXELS")]
    tile_resolution: Option<u32>,
    /// Output manifest path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct TileArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Directory for the tile PNGs.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Worker threads for per-image work (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Pixel-shuffle factor n (perfect square).
    #[arg(long = "shuffle", value_name = "N")]
    shuffle: Option<usize>,
    /// Directory for the FTEN tensor files.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Worker threads for per-image work (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SequenceArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Interleaved text inserts, JSONL of {"position": N, "text": "..."}.
    #[arg(long, value_name = "FILE")]
    text: Option<PathBuf>,
    /// LM sequence budget.
    #[arg(long = "max-tokens")]
    max_tokens: Option<usize>,
    /// Output sequence file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum DatagenCommand {
    /// Combine single-image instances into multi-image multi-turn samples.
    Assemble(AssembleArgs),
    /// Split and render tables as images.
    Tables(TablesArgs),
    /// Remove duplicate instances by content hash.
    Dedup(DedupArgs),
}

#[derive(Args)]
struct AssembleArgs {
    /// Input single-image instances (JSONL).
    #[arg(long, value_name = "FILE")]
    instances: PathBuf,
    /// Images per assembled sample.
    #[arg(short = 'k', long, value_parser = clap::value_parser!(u8).range(2..=4))]
    k: u8,
    #[arg(long)]
    seed: u64,
    /// Number of samples to assemble.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct TablesArgs {
    /// Input tables (JSONL of {"header": [...], "rows": [[...]], "style_id": N}).
    #[arg(long, value_name = "FILE")]
    tables: PathBuf,
    /// Split each table into two sub-tables before rendering.
    #[arg(long)]
    split: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the rendered PNGs.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct DedupArgs {
    #[arg(long, value_name = "FILE")]
    instances: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct AnnotateArgs {
    /// Input instances (JSONL).
    #[arg(long, value_name = "FILE")]
    instances: PathBuf,
    /// Rationale prompt template file; overrides the built-in skeleton.
    #[arg(long, value_name = "FILE")]
    template: Option<PathBuf>,
    /// Endpoint config (TOML with an [endpoint] section).
    #[arg(long = "endpoint-config", value_name = "FILE")]
    endpoint_config: Option<PathBuf>,
    /// Output augmented instances (JSONL).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Failure log (JSONL); defaults next to --out.
    #[arg(long, value_name = "FILE")]
    failures: Option<PathBuf>,
    /// Raw response log (JSONL) for offline re-parsing.
    #[arg(long = "raw-log", value_name = "FILE")]
    raw_log: Option<PathBuf>,
    /// Export N seeded-random augmented instances for manual review.
    #[arg(long = "review-sample", value_name = "N")]
    review_sample: Option<usize>,
    #[arg(long = "review-out", value_name = "FILE")]
    review_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predictions, JSONL of {"id": ..., "prediction": ..., "golds": [...]}.
    #[arg(long, value_name = "FILE")]
    predictions: PathBuf,
    #[arg(long, value_enum, default_value = "anls")]
    metric: commands::eval::MetricArg,
    /// ANLS threshold.
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Report output (JSON).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = config::load_config_file(cli.config.as_deref())?;
    match cli.command {
        Command::Plan(args) => {
            let settings = config::resolve(
                &file,
                &Overrides {
                    budget: args.budget,
                    tile_resolution: args.tile_resolution,
                    ..Overrides::default()
                },
            )?;
            commands::plan::run(&args.images, &args.out, &settings)
        }
        Command::Tile(args) => {
            let settings = config::resolve(
                &file,
                &Overrides {
                    workers: args.workers,
                    ..Overrides::default()
                },
            )?;
            commands::tile::run(&args.manifest, &args.out, &settings)
        }
        Command::Encode(args) => {
            let settings = config::resolve(
                &file,
                &Overrides {
                    shuffle_factor: args.shuffle,
                    workers: args.workers,
                    ..Overrides::default()
                },
            )?;
            commands::encode::run(&args.manifest, &args.out, &settings)
        }
        Command::Sequence(args) => {
            let settings = config::resolve(
                &file,
                &Overrides {
                    max_tokens: args.max_tokens,
                    ..Overrides::default()
                },
            )?;
            commands::sequence::run(&args.manifest, args.text.as_deref(), &args.out, &settings)
        }
        Command::Datagen(cmd) => match cmd {
            DatagenCommand::Assemble(args) => commands::datagen::assemble(
                &args.instances,
                args.k as usize,
                args.seed,
                args.count,
                &args.out,
            ),
            DatagenCommand::Tables(args) => {
                commands::datagen::tables(&args.tables, args.split, args.seed, &args.out)
            }
            DatagenCommand::Dedup(args) => commands::datagen::dedup(&args.instances, &args.out),
        },
        Command::Annotate(args) => {
            let settings = config::resolve(&file, &Overrides::default())?;
            let endpoint = match args.endpoint_config.as_deref() {
                Some(path) => {
                    let endpoint_file = config::load_config_file(Some(path))?;
                    endpoint_file.endpoint.ok_or_else(|| {
                        CliError::usage(format!("{} has no [endpoint] section", path.display()))
                    })?
                }
                None => settings.endpoint.clone(),
            };
            commands::annotate::run(commands::annotate::AnnotateParams {
                instances: &args.instances,
                template: args.template.as_deref(),
                endpoint,
                out: &args.out,
                failures: args.failures.as_deref(),
                raw_log: args.raw_log.as_deref(),
                review_sample: args.review_sample,
                review_out: args.review_out.as_deref(),
            })
        }
        Command::Eval(args) => {
            commands::eval::run(&args.predictions, args.metric, args.tau, &args.out)
        }
    }
}
