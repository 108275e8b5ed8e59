use std::fmt::Write as _;

use super::{pretrain, PretrainConfig};
use crate::mim::BinningScheme;
use crate::models::{ModelConfig, ModelState};
use crate::seeds;
use crate::Result;
use wam_grad::Tensor;

pub const GRID_LRS: [f64; 5] = [5e-5, 1e-4, 2e-4, 5e-4, 1e-3];
pub const GRID_BINS: [usize; 5] = BinningScheme::SUPPORTED;

/// Masked accuracy per (learning rate, bins) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct GridTable {
    pub lrs: Vec<f64>,
    pub bins: Vec<usize>,
    /// `accuracy[i][j]` for `lrs[i]` and `bins[j]`.
    pub accuracy: Vec<Vec<f64>>,
}

impl GridTable {
    pub fn cells(&self) -> usize {
        self.accuracy.iter().map(Vec::len).sum()
    }

    /// Rows are learning rates, columns bin counts.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("learning_rate");
        for b in &self.bins {
            write!(out, ",bins_{b}").expect("string write");
        }
        out.push('\n');
        for (lr, row) in self.lrs.iter().zip(&self.accuracy) {
            write!(out, "{lr:e}").expect("string write");
            for a in row {
                write!(out, ",{a}").expect("string write");
            }
            out.push('\n');
        }
        out
    }
}

/// Pretrains one model per cell on the same data and seed.
pub fn grid_search(
    base: &ModelConfig,
    data: &[&Tensor],
    lrs: &[f64],
    bins: &[usize],
    config: &PretrainConfig,
    model_seed: u64,
) -> Result<GridTable> {
    let mut accuracy = Vec::new();
    for (i, &lr) in lrs.iter().enumerate() {
        let mut row = Vec::new();
        for (j, &k) in bins.iter().enumerate() {
            let mut cfg = base.clone();
            cfg.binning = BinningScheme::uniform(k, base.binning.lo[0], base.binning.hi[0], base.channels)?;
            let mut state = ModelState::new(cfg, model_seed)?;
            let pc = PretrainConfig {
                lr,
                seed: seeds::derive(config.seed, &[(i * bins.len() + j) as u64]),
                ..config.clone()
            };
            row.push(pretrain(&mut state, data, &pc, None)?.best_accuracy);
        }
        accuracy.push(row);
    }
    Ok(GridTable {
        lrs: lrs.to_vec(),
        bins: bins.to_vec(),
        accuracy,
    })
}
