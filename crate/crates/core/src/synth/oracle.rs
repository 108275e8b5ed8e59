//! Ground-truth label function of the synthetic world.
//!
//! Every label is a smooth positive function of per-channel window means
//! (`m`) and standard deviations (`s`) of the raw fused window. Means are
//! first standardized with the nominal constants of [`NOMINAL`]:
//! `z_c = (m_c - mu_c) / sigma_c`, heterogeneity is `h_c = s_c / sigma_c`,
//! and wind is `w = (sqrt(m_u10² + m_v10²) - 4) / 2.5`.
//!
//! ```text
//! burnt_area_m        = 800 · exp(0.6 w − 0.5 z_gi + 0.3 z_ssr)
//! control_time_min    =  90 · exp(0.4 w − 0.3 z_gi + 0.3 z_d2m)
//! extinction_time_min = 300 · exp(0.5 w + 0.3 z_str − 0.4 z_gi + 0.3 h_u10)
//! human_units         =   6 · softplus(1 + 0.8 w − 0.6 z_gi)
//! heavy_units         =   2 · softplus(0.5 w + 0.7 z_ssrd − 0.4 z_tco3)
//! aerial_units        = 1.5 · softplus(0.9 w + 0.5 z_strd − 0.5 z_gi)
//! ```
//!
//! With noise level `sigma_n > 0` each label is multiplied by an independent
//! `exp(sigma_n · e − sigma_n² / 2)`, `e ~ N(0, 1)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geodata::{NUM_CHANNELS, NUM_LABELS};

/// Nominal (mean, scale) per channel used to standardize window means.
pub const NOMINAL: [(f64, f64); NUM_CHANNELS] = [
    (4.0, 2.5),
    (1.0, 2.5),
    (0.26, 0.12),
    (0.0, 3.0),
    (0.0, 2.0e6),
    (0.0, 8.0e5),
    (0.0, 1.2e6),
    (0.0, 2.0e6),
    (0.0, 2.0e-4),
];

/// Per-channel mean and population standard deviation of a raw
/// channel-last window.
pub fn window_stats(raw: &[f64]) -> ([f64; NUM_CHANNELS], [f64; NUM_CHANNELS]) {
    let n = (raw.len() / NUM_CHANNELS) as f64;
    let mut mean = [0.0; NUM_CHANNELS];
    for px in raw.chunks(NUM_CHANNELS) {
        for c in 0..NUM_CHANNELS {
            mean[c] += px[c];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [0.0; NUM_CHANNELS];
    for px in raw.chunks(NUM_CHANNELS) {
        for c in 0..NUM_CHANNELS {
            var[c] += (px[c] - mean[c]).powi(2);
        }
    }
    (mean, var.map(|v| (v / n).sqrt()))
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Noise-free labels from window statistics.
pub fn oracle_from_stats(mean: &[f64; NUM_CHANNELS], std: &[f64; NUM_CHANNELS]) -> [f64; NUM_LABELS] {
    let z = |c: usize| (mean[c] - NOMINAL[c].0) / NOMINAL[c].1;
    let h = |c: usize| std[c] / NOMINAL[c].1;
    let w = ((mean[0] * mean[0] + mean[1] * mean[1]).sqrt() - 4.0) / 2.5;
    let (gi, d2m, ssr, str_, strd, ssrd, tco3) = (z(2), z(3), z(4), z(5), z(6), z(7), z(8));
    [
        800.0 * (0.6 * w - 0.5 * gi + 0.3 * ssr).exp(),
        90.0 * (0.4 * w - 0.3 * gi + 0.3 * d2m).exp(),
        300.0 * (0.5 * w + 0.3 * str_ - 0.4 * gi + 0.3 * h(0)).exp(),
        6.0 * softplus(1.0 + 0.8 * w - 0.6 * gi),
        2.0 * softplus(0.5 * w + 0.7 * ssrd - 0.4 * tco3),
        1.5 * softplus(0.9 * w + 0.5 * strd - 0.5 * gi),
    ]
}

/// Labels of a raw window, with multiplicative log-normal noise.
pub fn oracle_labels<R: Rng + ?Sized>(raw: &[f64], noise: f64, rng: &mut R) -> [f64; NUM_LABELS] {
    let (m, s) = window_stats(raw);
    let mut y = oracle_from_stats(&m, &s);
    if noise > 0.0 {
        for v in &mut y {
            let e: f64 = StandardNormal.sample(rng);
            *v *= (noise * e - noise * noise / 2.0).exp();
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn zero_noise_is_deterministic_and_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let raw: Vec<f64> = (0..4 * NUM_CHANNELS)
            .map(|i| {
                let (mu, sigma) = NOMINAL[i % NUM_CHANNELS];
                mu + sigma * rng.gen_range(-2.0..2.0)
            })
            .collect();
        let a = oracle_labels(&raw, 0.0, &mut ChaCha8Rng::seed_from_u64(1));
        let b = oracle_labels(&raw, 0.0, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(a, b);
        assert!(a.iter().all(|&v| v > 0.0), "{a:?}");
        let noisy = oracle_labels(&raw, 0.2, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(noisy.iter().all(|&v| v > 0.0));
        assert_ne!(noisy, a);
    }

    #[test]
    fn stats_of_constant_window() {
        let raw: Vec<f64> = (0..8 * NUM_CHANNELS).map(|i| (i % NUM_CHANNELS) as f64).collect();
        let (m, s) = window_stats(&raw);
        assert_eq!(m[4], 4.0);
        assert_eq!(s, [0.0; NUM_CHANNELS]);
    }
}
