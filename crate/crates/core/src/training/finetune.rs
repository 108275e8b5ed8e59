use std::path::PathBuf;

use rand::seq::SliceRandom;
use wam_grad::ops::mse;
use wam_grad::{Adam, Tape, Tensor};

use super::pretrain::{holdout, stack};
use super::{EpochRecord, FinetuneConfig, MetricLog, TransferMode};
use crate::dataset::Dataset;
use crate::geodata::NormalizationStats;
use crate::models::{ModelState, Monitor};
use crate::seeds::{self, stream};
use crate::{Result, WamError};

#[derive(Clone, Debug)]
pub struct FinetuneReport {
    pub log: MetricLog,
    /// Mean over labels of the validation MAE in min-max label space.
    pub best_mae: f64,
    pub best_epoch: usize,
}

/// Label-space targets of a set of labelled samples.
fn scaled_targets(ds: &Dataset, idx: &[usize], stats: &NormalizationStats) -> Result<Vec<Vec<f32>>> {
    let mm = stats
        .labels
        .as_ref()
        .ok_or_else(|| WamError::Config("normalization statistics carry no label ranges".into()))?;
    idx.iter()
        .map(|&i| {
            let y = ds.samples[i]
                .label
                .ok_or_else(|| WamError::Config("transfer training needs labelled samples".into()))?;
            Ok(mm.apply_all(&y).into_iter().map(|v| v as f32).collect())
        })
        .collect()
}

fn mean_abs(pred: &Tensor, target: &[Vec<f32>]) -> f64 {
    let k = pred.shape()[1];
    let mut acc = 0.0;
    for (row, t) in pred.data().chunks(k).zip(target) {
        acc += row.iter().zip(t).map(|(p, q)| (p - q).abs() as f64).sum::<f64>();
    }
    acc / (target.len() * k) as f64
}

/// Inference-mode latents of the listed samples.
fn latents(state: &ModelState, inputs: &[&Tensor], batch: usize) -> Result<Vec<Tensor>> {
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(batch.max(1)) {
        let z = state.latent(&stack(chunk)?)?;
        let per = z.len() / chunk.len();
        let shape = &z.shape()[1..];
        for row in z.data().chunks(per) {
            out.push(Tensor::new(shape, row.to_vec())?);
        }
    }
    Ok(out)
}

/// Trains the regression head (and, in finetune mode, the encoder) on
/// min-max scaled labels with an MSE loss; the validation MAE selects the
/// kept weights.
pub fn finetune(
    state: &mut ModelState,
    train: &Dataset,
    stats: &NormalizationStats,
    config: &FinetuneConfig,
    checkpoint: Option<PathBuf>,
) -> Result<FinetuneReport> {
    config.validate()?;
    if train.len() < 2 {
        return Err(WamError::Config("transfer training needs at least two samples".into()));
    }
    stats.check_channels()?;
    state.stats = Some(stats.clone());
    state.reset_moments();
    let seed = config.seed;
    let (fit_idx, val_idx) = holdout(train.len(), config.val_fraction, seed, 2);
    let fit_y = scaled_targets(train, &fit_idx, stats)?;
    let val_y = scaled_targets(train, &val_idx, stats)?;
    let inputs = train.inputs();
    let frozen = config.mode == TransferMode::Frozen;
    let ids = if frozen {
        state.head_params()
    } else {
        let mut ids = state.encoder_params();
        ids.extend(state.head_params());
        ids
    };
    // a frozen encoder is a fixed feature map, so its latents are computed once
    let (fit_z, val_z) = if frozen {
        let pick = |idx: &[usize]| idx.iter().map(|&i| inputs[i]).collect::<Vec<_>>();
        (
            Some(latents(state, &pick(&fit_idx), config.batch)?),
            Some(latents(state, &pick(&val_idx), config.batch)?),
        )
    } else {
        (None, None)
    };
    let adam = Adam::new(config.lr);
    let mut log = MetricLog::new("val_mae", false);
    let mut best: Option<(f64, usize, crate::models::Snapshot)> = None;
    let mut stale = 0;
    let mut batch_id = 0usize;
    let positions: Vec<usize> = (0..fit_idx.len()).collect();
    for epoch in 1..=config.epochs {
        let mut order = positions.clone();
        order.shuffle(&mut seeds::rng(seed, &[stream::SHUFFLE, 1000 + epoch as u64]));
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch) {
            let target: Vec<f32> = chunk.iter().flat_map(|&p| fit_y[p].iter().copied()).collect();
            let target = Tensor::new(&[chunk.len(), fit_y[0].len()], target)?;
            let mut drop_rng = seeds::rng(seed, &[stream::DROPOUT, batch_id as u64]);
            let mut tape = Tape::new();
            let z = match &fit_z {
                Some(cached) => tape.constant(stack(&chunk.iter().map(|&p| &cached[p]).collect::<Vec<_>>())?),
                None => {
                    let x = stack(&chunk.iter().map(|&p| inputs[fit_idx[p]]).collect::<Vec<_>>())?;
                    let xv = tape.constant(x);
                    state.encode_train(&mut tape, xv, true)?
                }
            };
            let y = state.regress(&mut tape, z, true, Some(&mut drop_rng))?;
            let loss = mse(&mut tape, y, &target)?;
            let lv = tape.value(loss).data()[0] as f64;
            if !lv.is_finite() {
                return Err(WamError::Divergence {
                    phase: "finetune",
                    batch: batch_id,
                });
            }
            let grads = tape.backward(loss)?;
            state.params.accumulate(&grads)?;
            adam.step(&mut state.params, &ids).map_err(|e| match e {
                wam_grad::GradError::NonFiniteGradient(_) => WamError::Divergence {
                    phase: "finetune",
                    batch: batch_id,
                },
                other => other.into(),
            })?;
            loss_sum += lv;
            batches += 1;
            batch_id += 1;
        }
        let pred = match &val_z {
            Some(cached) => {
                let mut rows = Vec::new();
                for chunk in cached.chunks(config.batch) {
                    rows.push(state.regress_latent(&stack(&chunk.iter().collect::<Vec<_>>())?)?);
                }
                Tensor::new(
                    &[cached.len(), val_y[0].len()],
                    rows.into_iter().flat_map(|t| t.into_data()).collect(),
                )?
            }
            None => {
                let mut rows = Vec::new();
                for chunk in val_idx.chunks(config.batch) {
                    rows.push(
                        state.predict_normalized(&stack(&chunk.iter().map(|&i| inputs[i]).collect::<Vec<_>>())?)?,
                    );
                }
                Tensor::new(
                    &[val_idx.len(), val_y[0].len()],
                    rows.into_iter().flat_map(|t| t.into_data()).collect(),
                )?
            }
        };
        let mae = mean_abs(&pred, &val_y);
        let improved = log.improves(best.as_ref().map(|b| b.0), mae);
        log.records.push(EpochRecord {
            epoch,
            loss: loss_sum / batches as f64,
            metric: mae,
            saved: improved,
        });
        if improved {
            stale = 0;
            state.monitor = Some(Monitor {
                metric: log.metric.clone(),
                value: mae,
                epoch,
            });
            if let Some(path) = &checkpoint {
                state.save(path)?;
            }
            best = Some((mae, epoch, state.snapshot()));
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    let (best_mae, best_epoch, snap) = best.ok_or(WamError::EmptyEvaluation)?;
    state.restore(snap);
    state.monitor = Some(Monitor {
        metric: log.metric.clone(),
        value: best_mae,
        epoch: best_epoch,
    });
    Ok(FinetuneReport {
        log,
        best_mae,
        best_epoch,
    })
}
