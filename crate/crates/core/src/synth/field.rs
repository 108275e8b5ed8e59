use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Result, WamError};

/// Gaussian taps with standard deviation `sigma`, scaled so their squares
/// sum to one (unit output variance from unit white noise).
fn kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let w: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    w.into_iter().map(|v| v / norm).collect()
}

/// Smooth stationary random field on a `rows × cols` lattice, row-major.
///
/// White noise on a padded lattice is smoothed by a separable Gaussian kernel
/// of width `correlation / 2` cells, so the autocorrelation at a lag of
/// `correlation` cells is `exp(-1)`. Marginal variance is one.
pub fn random_field(rows: usize, cols: usize, correlation: f64, seed: u64) -> Result<Vec<f64>> {
    if !(correlation > 0.0 && correlation.is_finite()) {
        return Err(WamError::Config(format!(
            "correlation length must be positive, found {correlation}"
        )));
    }
    let k = kernel(correlation / 2.0);
    let r = k.len() / 2;
    let (pr, pc) = (rows + 2 * r, cols + 2 * r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..pr * pc).map(|_| StandardNormal.sample(&mut rng)).collect();
    // horizontal pass, keeping only the output columns
    let mut horiz = vec![0.0; pr * cols];
    for i in 0..pr {
        let src = &noise[i * pc..(i + 1) * pc];
        for j in 0..cols {
            horiz[i * cols + j] = k.iter().zip(&src[j..j + k.len()]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for (t, &w) in k.iter().enumerate() {
            let src = &horiz[(i + t) * cols..(i + t + 1) * cols];
            for (o, &v) in out[i * cols..(i + 1) * cols].iter_mut().zip(src) {
                *o += w * v;
            }
        }
    }
    Ok(out)
}
