use wam::dataset::{ingest, IngestConfig, Ingested};
use wam::models::{ModelConfig, ModelState};
use wam::synth::{World, WorldConfig};
use wam::training::*;

fn data(seed: u64) -> Ingested {
    let mut cfg = WorldConfig::desk(seed);
    cfg.region.lat.count = 48;
    cfg.region.lon.count = 48;
    cfg.fires = 60;
    cfg.last_day = chrono::NaiveDate::from_ymd_opt(2021, 6, 30).unwrap();
    let world = World::generate(cfg).unwrap();
    let store = world.store().unwrap();
    let fires = world.fires(&store).unwrap();
    ingest(
        &store,
        &fires,
        &IngestConfig {
            window: 32,
            unlabelled: 48,
            train_fraction: 0.7,
            seed,
        },
    )
    .unwrap()
}

fn quick_pretrain() -> PretrainConfig {
    PretrainConfig {
        epochs: 3,
        batch: 8,
        val_fraction: 0.25,
        ..PretrainConfig::default()
    }
}

#[test]
fn pretraining_is_reproducible() {
    let d = data(1);
    let run = || {
        let mut m = ModelState::new(ModelConfig::desk("sequential", 16), 5).unwrap();
        let r = pretrain(&mut m, &d.unlabelled.inputs(), &quick_pretrain(), None).unwrap();
        (r.log.to_csv(), m.to_bytes())
    };
    assert_eq!(run(), run());
}

#[test]
fn checkpoints_follow_strict_improvements() {
    let d = data(2);
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("m.ckpt");
    let mut m = ModelState::new(ModelConfig::desk("sequential", 16), 5).unwrap();
    let cfg = PretrainConfig {
        epochs: 6,
        ..quick_pretrain()
    };
    let r = pretrain(&mut m, &d.unlabelled.inputs(), &cfg, Some(ckpt.clone())).unwrap();
    let mut best = f64::NEG_INFINITY;
    for rec in &r.log.records {
        assert_eq!(rec.saved, rec.metric > best, "epoch {}", rec.epoch);
        best = best.max(rec.metric);
    }
    assert_eq!(r.best_accuracy, best);
    let saved = ModelState::load(&ckpt).unwrap();
    assert_eq!(saved.to_bytes(), m.to_bytes());
    assert_eq!(saved.monitor.unwrap().epoch, r.best_epoch);
}

#[test]
fn patience_stops_training() {
    let d = data(3);
    let mut m = ModelState::new(ModelConfig::desk("sequential", 4), 5).unwrap();
    let cfg = PretrainConfig {
        epochs: 40,
        patience: 2,
        lr: 1e-9,
        ..quick_pretrain()
    };
    let r = pretrain(&mut m, &d.unlabelled.inputs(), &cfg, None).unwrap();
    assert!(r.log.records.len() < 40);
    let tail = &r.log.records[r.log.records.len() - 2..];
    assert!(tail.iter().all(|rec| !rec.saved));
}

#[test]
fn frozen_transfer_leaves_the_encoder_untouched() {
    let d = data(4);
    let mut m = ModelState::new(ModelConfig::desk("residual", 16), 5).unwrap();
    pretrain(
        &mut m,
        &d.unlabelled.inputs(),
        &PretrainConfig {
            epochs: 1,
            ..quick_pretrain()
        },
        None,
    )
    .unwrap();
    let before: Vec<Vec<u8>> = m
        .encoder_params()
        .iter()
        .map(|&id| m.params.get(id).value.to_le_bytes())
        .collect();
    let norms = m.norms.clone();
    let cfg = FinetuneConfig {
        mode: TransferMode::Frozen,
        epochs: 3,
        batch: 8,
        ..FinetuneConfig::default()
    };
    let r = finetune(&mut m, &d.train, &d.stats, &cfg, None).unwrap();
    assert!(r.best_mae.is_finite());
    let after: Vec<Vec<u8>> = m
        .encoder_params()
        .iter()
        .map(|&id| m.params.get(id).value.to_le_bytes())
        .collect();
    assert_eq!(before, after);
    assert_eq!(format!("{norms:?}"), format!("{:?}", m.norms));
    assert!(m.stats.is_some());
}

#[test]
fn finetune_moves_the_encoder_and_evaluates() {
    let d = data(5);
    let mut m = ModelState::new(ModelConfig::desk("sequential", 16), 5).unwrap();
    pretrain(
        &mut m,
        &d.unlabelled.inputs(),
        &PretrainConfig {
            epochs: 1,
            ..quick_pretrain()
        },
        None,
    )
    .unwrap();
    let id = m.encoder_params()[0];
    let before = m.params.get(id).value.clone();
    let cfg = FinetuneConfig {
        epochs: 2,
        batch: 8,
        ..FinetuneConfig::default()
    };
    finetune(&mut m, &d.train, &d.stats, &cfg, None).unwrap();
    assert_ne!(m.params.get(id).value, before);
    let errors = evaluate_mae(&m, &d.test).unwrap();
    assert!(errors.iter().all(|e| e.is_finite() && *e >= 0.0));
    let pred = predict_dataset(&m, &d.test, 7).unwrap();
    assert_eq!(mae(&pred, &d.test.labels().unwrap()).unwrap(), errors);
}

#[test]
fn grid_search_fills_every_cell() {
    let d = data(6);
    let inputs = d.unlabelled.inputs();
    let cfg = PretrainConfig {
        epochs: 1,
        max_samples: 8,
        ..quick_pretrain()
    };
    let base = ModelConfig::desk("sequential", 4);
    let table = grid_search(&base, &inputs[..16], &GRID_LRS, &GRID_BINS, &cfg, 1).unwrap();
    assert_eq!(table.cells(), 25);
    let csv = table.to_csv();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("learning_rate,bins_4,bins_8,bins_16,bins_32,bins_64\n"));
}
