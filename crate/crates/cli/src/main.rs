//! `wam`: one entry point for every pipeline phase.
//!
//! Each subcommand reads its inputs from and writes its outputs under the
//! `--out` root (`region/`, `data/`, `pretrain/`, `grid/`, `finetune/`,
//! `evaluate/`, `baselines/`, `maps/`) and refreshes `artifacts.json`.
//! Settings resolve as command-line flag, then `--config` file, then the
//! built-in desk defaults.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use wam::dataset::IngestConfig;
use wam::geodata::LABEL_NAMES;
use wam::pipeline::{self, TEST_FILE, UNLABELLED_FILE};
use wam::training::{
    grid_search, mae, mae_csv, read_mae_csv, read_predictions, RunConfig, TransferMode, GRID_BINS, GRID_LRS,
};

#[derive(Parser, Debug)]
#[command(name = "wam", version, about = "Wildfire assessment pipeline")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML run configuration; missing keys take desk defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed applied to every phase.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Artifact root.
    #[arg(long, global = true, default_value = "wam-out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic region: grids, manifest and fire table.
    SynthData,
    /// Fuse samples and fit normalization statistics.
    Ingest {
        /// Region manifest (default: <out>/region/manifest.toml).
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Fire table (default: <out>/region/fires.csv).
        #[arg(long)]
        fires: Option<PathBuf>,
    },
    /// Masked-patch pretraining on the unlabelled samples.
    Pretrain {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        train: TrainFlags,
        /// Sample directory (default: <out>/data).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Pretraining accuracy over learning rates × bin counts.
    GridSearch {
        #[arg(long, value_delimiter = ',')]
        lrs: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        bins: Option<Vec<usize>>,
        #[arg(long)]
        encoder: Option<String>,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Transfer a pretrained checkpoint to the regression task.
    Finetune {
        /// frozen | finetune
        #[arg(long)]
        mode: Option<TransferMode>,
        /// Pretrained checkpoint (default: <out>/pretrain/pretrain.ckpt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Test-split MAE of a checkpoint or of a predictions file.
    Evaluate {
        /// Transferred checkpoint (default: <out>/finetune/<mode>.ckpt).
        #[arg(long, conflicts_with = "predictions")]
        checkpoint: Option<PathBuf>,
        /// CSV with one column per label, rows in test-split order.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Tree baselines on summary features, alongside network errors.
    Baselines {
        /// Network MAE table (default: <out>/evaluate/mae.csv when present).
        #[arg(long)]
        networks: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Regional assessment rasters from a transferred checkpoint.
    Mapgen {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Region manifest (default: <out>/region/manifest.toml).
        #[arg(long)]
        region: Option<PathBuf>,
        /// ISO date (default: latest date with samples).
        #[arg(long)]
        date: Option<NaiveDate>,
        /// pgm | csv
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Every phase in sequence.
    Run,
}

#[derive(Args, Debug, Default)]
struct ModelFlags {
    /// Encoder name (residual | sequential).
    #[arg(long)]
    encoder: Option<String>,
    /// Intensity bins per channel.
    #[arg(long)]
    bins: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
}

fn load_config(g: &Global) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::desk(),
    };
    if let Some(seed) = g.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn or_default(flag: Option<PathBuf>, out: &Path, rel: &str) -> PathBuf {
    flag.unwrap_or_else(|| out.join(rel))
}

fn require(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        bail!(
            "{what} not found at {} (run the earlier phase or pass its path)",
            path.display()
        );
    }
    Ok(())
}

fn write_config(cfg: &RunConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("config.toml");
    std::fs::write(&path, cfg.to_toml()).with_context(|| format!("writing {}", path.display()))
}

fn label_line(values: &[f64]) -> String {
    LABEL_NAMES
        .iter()
        .zip(values)
        .map(|(n, v)| format!("{n}={v:.4}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut cfg = load_config(g)?;
    let out = &g.out;
    match cli.command {
        Command::SynthData => {
            cfg.validate()?;
            let dir = out.join("region");
            let fires = pipeline::synth_data(&cfg.synth, &dir)?;
            eprintln!(
                "synthetic region (seed {}) with {fires} fires written to {}",
                cfg.synth.seed,
                dir.display()
            );
        }
        Command::Ingest { manifest, fires } => {
            cfg.validate()?;
            let manifest = or_default(manifest, out, "region/manifest.toml");
            let fires = or_default(fires, out, "region/fires.csv");
            require(&manifest, "region manifest")?;
            require(&fires, "fire table")?;
            let ingest = IngestConfig {
                window: cfg.synth.window,
                unlabelled: cfg.data.unlabelled,
                train_fraction: cfg.data.train_fraction,
                seed: cfg.data.seed,
            };
            let dir = out.join("data");
            let got = pipeline::ingest_region(&manifest, &fires, &ingest, &dir)?;
            eprintln!(
                "{} unlabelled, {} train, {} test samples written to {}",
                got.unlabelled.len(),
                got.train.len(),
                got.test.len(),
                dir.display()
            );
        }
        Command::Pretrain { model, train, data } => {
            apply_model(&mut cfg, &model);
            apply_pretrain(&mut cfg, &train);
            cfg.validate()?;
            let data = or_default(data, out, "data");
            require(&data.join(UNLABELLED_FILE), "unlabelled samples")?;
            let dir = out.join("pretrain");
            let (_, report) = pipeline::run_pretrain(&data, &cfg, &dir)?;
            write_config(&cfg, &dir)?;
            eprintln!(
                "pretrained {} encoder with {} bins: best masked-bin accuracy {:.4} at epoch {}",
                cfg.model.encoder, cfg.model.bins, report.best_accuracy, report.best_epoch
            );
        }
        Command::GridSearch {
            lrs,
            bins,
            encoder,
            train,
            data,
        } => {
            apply_model(&mut cfg, &ModelFlags { encoder, bins: None });
            apply_pretrain(&mut cfg, &train);
            cfg.validate()?;
            let data = or_default(data, out, "data");
            require(&data.join(UNLABELLED_FILE), "unlabelled samples")?;
            let unlabelled = pipeline::load_dataset(&data, UNLABELLED_FILE)?;
            let lrs = lrs.unwrap_or_else(|| GRID_LRS.to_vec());
            let bins = bins.unwrap_or_else(|| GRID_BINS.to_vec());
            let table = grid_search(
                &cfg.model.model_config()?,
                &unlabelled.inputs(),
                &lrs,
                &bins,
                &cfg.pretrain,
                cfg.model.seed,
            )?;
            let dir = out.join("grid");
            write_config(&cfg, &dir)?;
            std::fs::write(dir.join("grid.csv"), table.to_csv())?;
            eprintln!(
                "{} grid cells written to {}",
                table.cells(),
                dir.join("grid.csv").display()
            );
        }
        Command::Finetune {
            mode,
            checkpoint,
            train,
            data,
        } => {
            if let Some(m) = mode {
                cfg.finetune.mode = m;
            }
            apply_finetune(&mut cfg, &train);
            cfg.validate()?;
            let checkpoint = or_default(checkpoint, out, "pretrain/pretrain.ckpt");
            require(&checkpoint, "pretrained checkpoint")?;
            let data = or_default(data, out, "data");
            let dir = out.join("finetune");
            let (_, report) = pipeline::run_finetune(&checkpoint, &data, &cfg.finetune, &dir)?;
            write_config(&cfg, &dir)?;
            eprintln!(
                "{} transfer: best validation MAE (min-max units) {:.4} at epoch {}",
                cfg.finetune.mode.name(),
                report.best_mae,
                report.best_epoch
            );
        }
        Command::Evaluate {
            checkpoint,
            predictions,
            data,
        } => {
            let data = or_default(data, out, "data");
            require(&data.join(TEST_FILE), "test samples")?;
            let dir = out.join("evaluate");
            let errors = match predictions {
                Some(p) => {
                    let pred = read_predictions(&p)?;
                    let truth = pipeline::load_dataset(&data, TEST_FILE)?.labels()?;
                    if pred.len() != truth.len() {
                        bail!(
                            "{} has {} rows but the test split has {} samples",
                            p.display(),
                            pred.len(),
                            truth.len()
                        );
                    }
                    let errors = mae(&pred, &truth)?;
                    let name = p
                        .file_stem()
                        .map_or("predictions".into(), |s| s.to_string_lossy().into_owned());
                    std::fs::create_dir_all(&dir)?;
                    std::fs::write(dir.join("mae.csv"), mae_csv(&[(name, errors)]))?;
                    errors
                }
                None => {
                    let default = format!("finetune/{}.ckpt", cfg.finetune.mode.name());
                    let checkpoint = or_default(checkpoint, out, &default);
                    require(&checkpoint, "transferred checkpoint")?;
                    pipeline::run_evaluate(&checkpoint, &data, &dir)?
                }
            };
            eprintln!("test MAE: {}", label_line(&errors));
        }
        Command::Baselines { networks, data } => {
            let data = or_default(data, out, "data");
            require(&data.join(TEST_FILE), "test samples")?;
            let networks = match networks {
                Some(p) => read_mae_csv(&p)?,
                None => {
                    let p = out.join("evaluate/mae.csv");
                    if p.exists() {
                        read_mae_csv(&p)?
                    } else {
                        Vec::new()
                    }
                }
            };
            let table = pipeline::run_baselines(&data, cfg.data.seed, &networks, &out.join("baselines"))?;
            for (name, v) in table.baselines.iter().chain(&table.networks) {
                eprintln!("{name:>10}: {}", label_line(v));
            }
        }
        Command::Mapgen {
            checkpoint,
            region,
            date,
            format,
            stride,
        } => {
            if let Some(f) = format {
                cfg.mapgen.format = f;
            }
            if let Some(s) = stride {
                cfg.mapgen.stride = s;
            }
            if date.is_some() {
                cfg.mapgen.date = date;
            }
            cfg.validate()?;
            let default = format!("finetune/{}.ckpt", cfg.finetune.mode.name());
            let checkpoint = or_default(checkpoint, out, &default);
            require(&checkpoint, "transferred checkpoint")?;
            let region = or_default(region, out, "region/manifest.toml");
            require(&region, "region manifest")?;
            let dir = out.join("maps");
            let rasters = pipeline::run_mapgen(
                &checkpoint,
                &region,
                cfg.mapgen.date,
                cfg.mapgen.format.parse()?,
                cfg.mapgen.stride,
                &dir,
            )?;
            for r in &rasters {
                match r.range() {
                    Some((lo, hi)) => eprintln!("{} on {}: range [{lo:.4}, {hi:.4}]", r.name(), r.date),
                    None => eprintln!("{} on {}: no defined cells", r.name(), r.date),
                }
            }
        }
        Command::Run => {
            let summary = pipeline::run_all(&cfg, out)?;
            eprintln!(
                "pretrain accuracy {:.4}, transfer validation MAE {:.4}",
                summary.pretrain.best_accuracy, summary.finetune.best_mae
            );
            eprintln!("test MAE: {}", label_line(&summary.test_mae));
            eprintln!("{} artifacts indexed in {}", summary.artifacts.len(), out.display());
            return Ok(());
        }
    }
    let artifacts = pipeline::write_artifact_index(out)?;
    eprintln!("{} artifacts indexed in {}", artifacts.len(), out.display());
    Ok(())
}

fn apply_model(cfg: &mut RunConfig, flags: &ModelFlags) {
    if let Some(e) = &flags.encoder {
        cfg.model.encoder = e.clone();
    }
    if let Some(b) = flags.bins {
        cfg.model.bins = b;
    }
}

fn apply_pretrain(cfg: &mut RunConfig, flags: &TrainFlags) {
    if let Some(e) = flags.epochs {
        cfg.pretrain.epochs = e;
    }
    if let Some(lr) = flags.lr {
        cfg.pretrain.lr = lr;
    }
    if let Some(b) = flags.batch {
        cfg.pretrain.batch = b;
    }
}

fn apply_finetune(cfg: &mut RunConfig, flags: &TrainFlags) {
    if let Some(e) = flags.epochs {
        cfg.finetune.epochs = e;
    }
    if let Some(lr) = flags.lr {
        cfg.finetune.lr = lr;
    }
    if let Some(b) = flags.batch {
        cfg.finetune.batch = b;
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
