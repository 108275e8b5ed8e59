//! Masked-patch objective: patch partition, masking, binned patch-mean
//! targets and masked accuracy.

use rand::Rng;
use serde::{Deserialize, Serialize};
use wam_grad::Tensor;

use crate::{Result, WamError};

/// Equal-width quantization of patch means, one value range per channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinningScheme {
    pub bins: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BinningScheme {
    pub const SUPPORTED: [usize; 5] = [4, 8, 16, 32, 64];

    /// Same range `[lo, hi]` on every channel.
    pub fn uniform(bins: usize, lo: f64, hi: f64, channels: usize) -> Result<Self> {
        let s = BinningScheme {
            bins,
            lo: vec![lo; channels],
            hi: vec![hi; channels],
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(WamError::Config(format!(
                "bins must be at least 2, found {}",
                self.bins
            )));
        }
        if self.lo.len() != self.hi.len() {
            return Err(WamError::Config("binning ranges disagree in length".into()));
        }
        if let Some(c) = (0..self.lo.len()).find(|&c| !(self.hi[c] > self.lo[c])) {
            return Err(WamError::Config(format!("binning range of channel {c} is empty")));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.lo.len()
    }

    /// Bin of a value on channel `c`; values outside the range are clamped.
    pub fn bin(&self, c: usize, value: f64) -> u32 {
        let t = (value - self.lo[c]) / (self.hi[c] - self.lo[c]) * self.bins as f64;
        let b = t.floor().max(0.0) as usize;
        b.min(self.bins - 1) as u32
    }
}

/// Side of the square patch grid for a square input.
pub fn patch_grid(size: usize, patch: usize) -> Result<usize> {
    if patch == 0 || !size.is_multiple_of(patch) {
        return Err(WamError::Config(format!(
            "input extent {size} is not divisible by patch size {patch}"
        )));
    }
    Ok(size / patch)
}

fn hwc(x: &Tensor) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [h, w, c] if h == w => Ok((h, w, c)),
        _ => Err(WamError::Config(format!(
            "expected a square (height, width, channels) tensor, found {:?}",
            x.shape()
        ))),
    }
}

/// Independent Bernoulli(p) mask over `cells` patches, redrawn until at
/// least one patch is masked.
pub fn draw_mask<R: Rng + ?Sized>(cells: usize, p: f64, rng: &mut R) -> Result<Vec<bool>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(WamError::Config(format!(
            "mask probability must lie in (0, 1], found {p}"
        )));
    }
    loop {
        let mask: Vec<bool> = (0..cells).map(|_| rng.gen::<f64>() < p).collect();
        if mask.iter().any(|&m| m) {
            return Ok(mask);
        }
    }
}

/// Copy of `x` with every masked patch zeroed on all channels.
pub fn apply_mask(x: &Tensor, patch: usize, mask: &[bool]) -> Result<Tensor> {
    let (h, w, c) = hwc(x)?;
    let g = patch_grid(h, patch)?;
    if mask.len() != g * g {
        return Err(WamError::Config(format!(
            "mask has {} cells, expected {}",
            mask.len(),
            g * g
        )));
    }
    let mut out = x.clone();
    let data = out.data_mut();
    for (cell, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let (gy, gx) = (cell / g, cell % g);
        for r in gy * patch..(gy + 1) * patch {
            let start = (r * w + gx * patch) * c;
            data[start..start + patch * c].iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Ok(out)
}

/// Mean of every (patch, channel), ordered (gy, gx, c).
pub fn patch_means(x: &Tensor, patch: usize) -> Result<Vec<f64>> {
    let (h, w, c) = hwc(x)?;
    let g = patch_grid(h, patch)?;
    let data = x.data();
    let mut out = vec![0.0f64; g * g * c];
    for gy in 0..g {
        for gx in 0..g {
            let acc = &mut out[(gy * g + gx) * c..(gy * g + gx + 1) * c];
            for r in gy * patch..(gy + 1) * patch {
                for col in gx * patch..(gx + 1) * patch {
                    let px = &data[(r * w + col) * c..(r * w + col + 1) * c];
                    for (a, &v) in acc.iter_mut().zip(px) {
                        *a += v as f64;
                    }
                }
            }
            let n = (patch * patch) as f64;
            acc.iter_mut().for_each(|a| *a /= n);
        }
    }
    Ok(out)
}

/// Bin index of every patch-channel mean, ordered (gy, gx, c).
pub fn patch_bin_targets(x: &Tensor, patch: usize, scheme: &BinningScheme) -> Result<Vec<u32>> {
    let c = hwc(x)?.2;
    if scheme.channels() != c {
        return Err(WamError::Config(format!(
            "binning scheme covers {} channels, tensor has {c}",
            scheme.channels()
        )));
    }
    Ok(patch_means(x, patch)?
        .iter()
        .enumerate()
        .map(|(i, &m)| scheme.bin(i % c, m))
        .collect())
}

/// Masking and binning artifacts of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchTask {
    pub grid: usize,
    /// Row-major over the patch grid; true means masked.
    pub mask: Vec<bool>,
    /// Ordered (gy, gx, c).
    pub targets: Vec<u32>,
    pub masked_input: Tensor,
}

impl PatchTask {
    /// Patch mask repeated over channels, aligned with `targets`.
    pub fn position_mask(&self) -> Vec<bool> {
        let c = self.targets.len() / self.mask.len();
        self.mask.iter().flat_map(|&m| std::iter::repeat_n(m, c)).collect()
    }
}

pub fn partition_and_mask<R: Rng + ?Sized>(
    x: &Tensor,
    patch: usize,
    p: f64,
    scheme: &BinningScheme,
    rng: &mut R,
) -> Result<PatchTask> {
    let (h, _, _) = hwc(x)?;
    let grid = patch_grid(h, patch)?;
    let mask = draw_mask(grid * grid, p, rng)?;
    Ok(PatchTask {
        grid,
        targets: patch_bin_targets(x, patch, scheme)?,
        masked_input: apply_mask(x, patch, &mask)?,
        mask,
    })
}

/// Index of the largest logit; the lowest index wins ties.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of selected positions whose arg-max class equals the target.
/// `logits` holds `targets.len()` rows of `classes` values.
pub fn masked_accuracy(logits: &[f32], classes: usize, targets: &[u32], mask: &[bool]) -> Result<f64> {
    let (hits, total) = masked_hits(logits, classes, targets, mask)?;
    Ok(hits as f64 / total as f64)
}

/// Correct and selected counts behind [`masked_accuracy`].
pub fn masked_hits(logits: &[f32], classes: usize, targets: &[u32], mask: &[bool]) -> Result<(usize, usize)> {
    if logits.len() != targets.len() * classes || mask.len() != targets.len() {
        return Err(WamError::Config(format!(
            "accuracy over {} logits, {} targets and {} mask entries with {classes} classes",
            logits.len(),
            targets.len(),
            mask.len()
        )));
    }
    let mut hits = 0;
    let mut total = 0;
    for ((row, &t), &m) in logits.chunks(classes).zip(targets).zip(mask) {
        if m {
            total += 1;
            hits += usize::from(argmax(row) == t as usize);
        }
    }
    if total == 0 {
        return Err(WamError::Grad(wam_grad::GradError::NoSupervisedPositions));
    }
    Ok((hits, total))
}
