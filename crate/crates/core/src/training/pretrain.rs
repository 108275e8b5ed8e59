use std::path::PathBuf;

use rand::seq::SliceRandom;
use wam_grad::ops::sparse_categorical_xent;
use wam_grad::{Adam, Tape, Tensor};

use super::{EpochRecord, MetricLog, PretrainConfig};
use crate::mim::{masked_hits, partition_and_mask, PatchTask};
use crate::models::{ModelState, Monitor};
use crate::seeds::{self, stream};
use crate::{Result, WamError};

/// Outcome of [`pretrain`]; the model is left at its best evaluation.
#[derive(Clone, Debug)]
pub struct PretrainReport {
    pub log: MetricLog,
    pub best_accuracy: f64,
    pub best_epoch: usize,
}

/// Stacks sample tensors into a (batch, h, w, c) tensor.
pub(crate) fn stack(items: &[&Tensor]) -> Result<Tensor> {
    Ok(Tensor::stack(items)?)
}

fn task_for(x: &Tensor, state: &ModelState, p: f64, rng: &mut rand_chacha::ChaCha8Rng) -> Result<PatchTask> {
    partition_and_mask(x, state.config.patch, p, &state.config.binning, rng)
}

/// Masked-patch accuracy of the model over prepared tasks, in batches.
pub fn evaluate_tasks(state: &ModelState, tasks: &[PatchTask], batch: usize) -> Result<f64> {
    let mut hits = 0;
    let mut total = 0;
    for chunk in tasks.chunks(batch.max(1)) {
        let x = stack(&chunk.iter().map(|t| &t.masked_input).collect::<Vec<_>>())?;
        let logits = state.patch_logits(&x)?;
        let targets: Vec<u32> = chunk.iter().flat_map(|t| t.targets.iter().copied()).collect();
        let mask: Vec<bool> = chunk.iter().flat_map(|t| t.position_mask()).collect();
        let (h, n) = masked_hits(logits.data(), state.config.bins(), &targets, &mask)?;
        hits += h;
        total += n;
    }
    if total == 0 {
        return Err(WamError::EmptyEvaluation);
    }
    Ok(hits as f64 / total as f64)
}

/// Seeded hold-out: (training indices, validation indices).
pub(crate) fn holdout(n: usize, fraction: f64, seed: u64, id: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeds::rng(seed, &[stream::SPLIT, id]));
    let val = ((fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let (v, t) = idx.split_at(val);
    let (mut t, mut v) = (t.to_vec(), v.to_vec());
    t.sort_unstable();
    v.sort_unstable();
    (t, v)
}

/// Masked-patch pretraining of the encoder and patch decoder with Adam.
///
/// A seeded hold-out slice with fixed masks is scored after every epoch;
/// strict improvements are kept (and written to `checkpoint` when given),
/// and training stops after `patience` evaluations without one.
pub fn pretrain(
    state: &mut ModelState,
    data: &[&Tensor],
    config: &PretrainConfig,
    checkpoint: Option<PathBuf>,
) -> Result<PretrainReport> {
    config.validate()?;
    if data.len() < 2 {
        return Err(WamError::Config("pretraining needs at least two samples".into()));
    }
    let seed = config.seed;
    let (train_idx, val_idx) = holdout(data.len(), config.val_fraction, seed, 1);
    let val_tasks = val_idx
        .iter()
        .map(|&i| {
            task_for(
                data[i],
                state,
                config.mask_prob,
                &mut seeds::rng(seed, &[stream::MASK_VAL, i as u64]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ids = state.encoder_params();
    ids.extend(state.decoder_params());
    let adam = Adam::new(config.lr);
    let mut log = MetricLog::new("masked_accuracy", true);
    let mut best: Option<(f64, usize, crate::models::Snapshot)> = None;
    let mut stale = 0;
    let mut batch_id = 0usize;
    for epoch in 1..=config.epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut seeds::rng(seed, &[stream::SHUFFLE, epoch as u64]));
        if config.max_samples > 0 {
            order.truncate(config.max_samples);
        }
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch) {
            let tasks = chunk
                .iter()
                .map(|&i| {
                    let mut rng = seeds::rng(seed, &[stream::MASK_TRAIN, epoch as u64, i as u64]);
                    task_for(data[i], state, config.mask_prob, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let x = stack(&tasks.iter().map(|t| &t.masked_input).collect::<Vec<_>>())?;
            let targets: Vec<u32> = tasks.iter().flat_map(|t| t.targets.iter().copied()).collect();
            let mask: Vec<bool> = tasks.iter().flat_map(|t| t.position_mask()).collect();
            let mut tape = Tape::new();
            let xv = tape.constant(x);
            let z = state.encode_train(&mut tape, xv, true)?;
            let logits = state.decode(&mut tape, z, true)?;
            let loss = sparse_categorical_xent(&mut tape, logits, &targets, &mask)?;
            let lv = tape.value(loss).data()[0] as f64;
            if !lv.is_finite() {
                return Err(WamError::Divergence {
                    phase: "pretrain",
                    batch: batch_id,
                });
            }
            let grads = tape.backward(loss)?;
            state.params.accumulate(&grads)?;
            adam.step(&mut state.params, &ids).map_err(|e| match e {
                wam_grad::GradError::NonFiniteGradient(_) => WamError::Divergence {
                    phase: "pretrain",
                    batch: batch_id,
                },
                other => other.into(),
            })?;
            loss_sum += lv;
            batches += 1;
            batch_id += 1;
        }
        let acc = evaluate_tasks(state, &val_tasks, config.batch)?;
        let improved = log.improves(best.as_ref().map(|b| b.0), acc);
        log.records.push(EpochRecord {
            epoch,
            loss: loss_sum / batches as f64,
            metric: acc,
            saved: improved,
        });
        if improved {
            stale = 0;
            state.monitor = Some(Monitor {
                metric: log.metric.clone(),
                value: acc,
                epoch,
            });
            if let Some(path) = &checkpoint {
                state.save(path)?;
            }
            best = Some((acc, epoch, state.snapshot()));
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    let (best_accuracy, best_epoch, snap) = best.ok_or(WamError::EmptyEvaluation)?;
    state.restore(snap);
    state.monitor = Some(Monitor {
        metric: log.metric.clone(),
        value: best_accuracy,
        epoch: best_epoch,
    });
    Ok(PretrainReport {
        log,
        best_accuracy,
        best_epoch,
    })
}
