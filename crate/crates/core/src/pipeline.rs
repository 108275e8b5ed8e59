//! Phase runners over an artifact directory, shared by the command line
//! and the end-to-end tests.
//!
//! Layout under the output root:
//! `region/` grids, manifest and fires; `data/` fused samples and
//! statistics; `pretrain/`, `finetune/` checkpoints and metric logs;
//! `evaluate/` errors and predictions; `baselines/` the comparison table;
//! `maps/` rasters; `artifacts.json` the index of everything written.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{feature_matrix, BaselineRegistry, MultiOutput, ResultsTable};
use crate::dataset::{ingest, read_fires, Dataset, IngestConfig, Ingested};
use crate::geodata::{load_region, NormalizationStats, NUM_LABELS};
use crate::mapgen::{emit, predict_raster, AssessmentRaster, RasterFormat};
use crate::models::ModelState;
use crate::synth::{World, WorldConfig};
use crate::training::{
    evaluate_mae, finetune, mae, predict_dataset, pretrain, write_predictions, FinetuneConfig, FinetuneReport,
    PretrainReport, RunConfig,
};
use crate::{Result, WamError};

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| WamError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| WamError::io(path, e))
}

/// Generates a synthetic region under `dir`; returns the fire count.
pub fn synth_data(config: &WorldConfig, dir: &Path) -> Result<usize> {
    let world = World::generate(config.clone())?;
    let store = world.store()?;
    let fires = world.fires(&store)?;
    create_dir(dir)?;
    world.write(dir, &fires)?;
    Ok(fires.len())
}

pub const UNLABELLED_FILE: &str = "unlabelled.wsmp";
pub const TRAIN_FILE: &str = "train.wsmp";
pub const TEST_FILE: &str = "test.wsmp";
pub const STATS_FILE: &str = "stats.json";

/// Fuses samples for a region and fire table and stores them under `dir`.
pub fn ingest_region(manifest: &Path, fires: &Path, config: &IngestConfig, dir: &Path) -> Result<Ingested> {
    let (_, store) = load_region(manifest)?;
    let fires = read_fires(fires)?;
    let out = ingest(&store, &fires, config)?;
    create_dir(dir)?;
    out.unlabelled.save(&dir.join(UNLABELLED_FILE))?;
    out.train.save(&dir.join(TRAIN_FILE))?;
    out.test.save(&dir.join(TEST_FILE))?;
    write_text(&dir.join(STATS_FILE), &out.stats.to_json())?;
    Ok(out)
}

pub fn load_stats(dir: &Path) -> Result<NormalizationStats> {
    let path = dir.join(STATS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| WamError::io(&path, e))?;
    NormalizationStats::from_json(&text).map_err(|e| match e {
        WamError::Parse { msg, .. } => WamError::parse(path.display().to_string(), msg),
        other => other,
    })
}

pub fn load_dataset(dir: &Path, file: &str) -> Result<Dataset> {
    Dataset::load(&dir.join(file))
}

/// Pretrains a fresh model on the unlabelled samples in `data`.
pub fn run_pretrain(data: &Path, run: &RunConfig, dir: &Path) -> Result<(ModelState, PretrainReport)> {
    let unlabelled = load_dataset(data, UNLABELLED_FILE)?;
    let mut state = ModelState::new(run.model.model_config()?, run.model.seed)?;
    check_window(&state, &unlabelled)?;
    create_dir(dir)?;
    let ckpt = dir.join("pretrain.ckpt");
    let report = pretrain(&mut state, &unlabelled.inputs(), &run.pretrain, Some(ckpt.clone()))?;
    state.save(&ckpt)?;
    report.log.write(&dir.join("pretrain_log.csv"))?;
    Ok((state, report))
}

fn check_window(state: &ModelState, ds: &Dataset) -> Result<()> {
    if ds.window != state.config.input_size {
        return Err(WamError::Config(format!(
            "samples are {0}×{0} but the model expects {1}×{1}",
            ds.window, state.config.input_size
        )));
    }
    Ok(())
}

/// Transfers a pretrained checkpoint to the regression task.
pub fn run_finetune(
    checkpoint: &Path,
    data: &Path,
    config: &FinetuneConfig,
    dir: &Path,
) -> Result<(ModelState, FinetuneReport)> {
    let mut state = ModelState::load(checkpoint)?;
    let train = load_dataset(data, TRAIN_FILE)?;
    check_window(&state, &train)?;
    let stats = load_stats(data)?;
    create_dir(dir)?;
    let name = config.mode.name();
    let ckpt = dir.join(format!("{name}.ckpt"));
    let report = finetune(&mut state, &train, &stats, config, Some(ckpt.clone()))?;
    state.save(&ckpt)?;
    report.log.write(&dir.join(format!("{name}_log.csv")))?;
    Ok((state, report))
}

/// Scores a transferred checkpoint on the test split.
pub fn run_evaluate(checkpoint: &Path, data: &Path, dir: &Path) -> Result<[f64; NUM_LABELS]> {
    let state = ModelState::load(checkpoint)?;
    let test = load_dataset(data, TEST_FILE)?;
    check_window(&state, &test)?;
    let pred = predict_dataset(&state, &test, 64)?;
    let errors = mae(&pred, &test.labels()?)?;
    create_dir(dir)?;
    write_predictions(&dir.join("predictions.csv"), &pred)?;
    let name = checkpoint
        .file_stem()
        .map_or("model".into(), |s| s.to_string_lossy().into_owned());
    write_text(&dir.join("mae.csv"), &crate::training::mae_csv(&[(name, errors)]))?;
    Ok(errors)
}

/// Fits every registered baseline on the train split and scores the test
/// split; networks are added as extra columns.
pub fn run_baselines(
    data: &Path,
    seed: u64,
    networks: &[(String, [f64; NUM_LABELS])],
    dir: &Path,
) -> Result<ResultsTable> {
    let train = load_dataset(data, TRAIN_FILE)?;
    let test = load_dataset(data, TEST_FILE)?;
    let table = baseline_table(&train, &test, &BaselineRegistry::default(), seed)?;
    let table = ResultsTable {
        networks: networks.to_vec(),
        ..table
    };
    create_dir(dir)?;
    write_text(&dir.join("results.csv"), &table.to_csv())?;
    let params: Vec<String> = BaselineRegistry::default()
        .iter()
        .map(|r| format!("{},{}", r.name(), r.describe()))
        .collect();
    write_text(
        &dir.join("hyperparameters.csv"),
        &format!("method,settings\n{}\n", params.join("\n")),
    )?;
    Ok(table)
}

/// Baseline test MAE per registered method.
pub fn baseline_table(train: &Dataset, test: &Dataset, registry: &BaselineRegistry, seed: u64) -> Result<ResultsTable> {
    let xtr = feature_matrix(&train.inputs())?;
    let ytr = train.labels()?;
    let xte = feature_matrix(&test.inputs())?;
    let yte = test.labels()?;
    let baselines = registry
        .iter()
        .map(|r| {
            let fitted = MultiOutput::fit(r, &xtr, &ytr, seed)?;
            Ok((r.name().to_string(), mae(&fitted.predict_all(&xte), &yte)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResultsTable {
        baselines,
        networks: Vec::new(),
    })
}

/// Renders every label raster for a region and date into `dir`.
pub fn run_mapgen(
    checkpoint: &Path,
    manifest: &Path,
    date: Option<NaiveDate>,
    format: RasterFormat,
    stride: usize,
    dir: &Path,
) -> Result<Vec<AssessmentRaster>> {
    let state = ModelState::load(checkpoint)?;
    let (info, store) = load_region(manifest)?;
    let source = info.synthetic.as_ref().map(|s| s.note.as_str());
    let date = match date {
        Some(d) => d,
        None => *store
            .sample_dates()
            .last()
            .ok_or_else(|| WamError::Config("region has no date with samples".into()))?,
    };
    let rasters = predict_raster(&state, &store, date, stride)?;
    for r in &rasters {
        emit(r, format, source, dir)?;
    }
    Ok(rasters)
}

/// One written file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

pub const ARTIFACTS_FILE: &str = "artifacts.json";

fn walk(root: &Path, dir: &Path, out: &mut Vec<Artifact>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| WamError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| WamError::io(dir, e)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(root, &p, out)?;
        } else {
            let rel = p
                .strip_prefix(root)
                .expect("walked under root")
                .to_string_lossy()
                .replace('\\', "/");
            if rel == ARTIFACTS_FILE {
                continue;
            }
            let bytes = std::fs::read(&p).map_err(|e| WamError::io(&p, e))?;
            let digest = Sha256::digest(&bytes);
            out.push(Artifact {
                path: rel,
                bytes: bytes.len() as u64,
                sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            });
        }
    }
    Ok(())
}

/// Indexes every file under `root` into `artifacts.json`.
pub fn write_artifact_index(root: &Path) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    let json = serde_json::to_string_pretty(&out).expect("artifact list serializes");
    write_text(&root.join(ARTIFACTS_FILE), &json)?;
    Ok(out)
}

/// Summary of [`run_all`].
#[derive(Clone, Debug)]
pub struct PipelineSummary {
    pub pretrain: PretrainReport,
    pub finetune: FinetuneReport,
    pub test_mae: [f64; NUM_LABELS],
    pub table: ResultsTable,
    pub artifacts: Vec<Artifact>,
}

/// Synthesis, ingestion, pretraining, transfer, evaluation, baselines and
/// map generation in sequence under `root`.
pub fn run_all(run: &RunConfig, root: &Path) -> Result<PipelineSummary> {
    run.validate()?;
    let region = root.join("region");
    synth_data(&run.synth, &region)?;
    let data = root.join("data");
    let ingest_cfg = IngestConfig {
        window: run.synth.window,
        unlabelled: run.data.unlabelled,
        train_fraction: run.data.train_fraction,
        seed: run.data.seed,
    };
    ingest_region(
        &region.join("manifest.toml"),
        &region.join("fires.csv"),
        &ingest_cfg,
        &data,
    )?;
    let (_, pre) = run_pretrain(&data, run, &root.join("pretrain"))?;
    let ft_dir = root.join("finetune");
    let (state, ft) = run_finetune(&root.join("pretrain/pretrain.ckpt"), &data, &run.finetune, &ft_dir)?;
    let ckpt = ft_dir.join(format!("{}.ckpt", run.finetune.mode.name()));
    let test_mae = run_evaluate(&ckpt, &data, &root.join("evaluate"))?;
    debug_assert_eq!(evaluate_mae(&state, &load_dataset(&data, TEST_FILE)?)?, test_mae);
    let table = run_baselines(
        &data,
        run.data.seed,
        &[(run.finetune.mode.name().to_string(), test_mae)],
        &root.join("baselines"),
    )?;
    run_mapgen(
        &ckpt,
        &region.join("manifest.toml"),
        run.mapgen.date,
        run.mapgen.format.parse()?,
        run.mapgen.stride,
        &root.join("maps"),
    )?;
    let artifacts = write_artifact_index(root)?;
    Ok(PipelineSummary {
        pretrain: pre,
        finetune: ft,
        test_mae,
        table,
        artifacts,
    })
}
