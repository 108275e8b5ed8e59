use wam_grad::Tensor;

use crate::geodata::NUM_CHANNELS;
use crate::{Result, WamError};

pub const STATS_PER_CHANNEL: usize = 3;
pub const NUM_FEATURES: usize = NUM_CHANNELS * STATS_PER_CHANNEL;

/// Per channel mean, population standard deviation and center value of a
/// (w, w, channels) tensor, laid out channel by channel.
pub fn summarize(x: &Tensor) -> Result<[f64; NUM_FEATURES]> {
    let [h, w, c] = x.shape()[..] else {
        return Err(WamError::Config(format!(
            "expected a (h, w, c) sample, found {:?}",
            x.shape()
        )));
    };
    if c != NUM_CHANNELS || h == 0 || w == 0 {
        return Err(WamError::Config(format!(
            "expected a (h, w, {NUM_CHANNELS}) sample, found {:?}",
            x.shape()
        )));
    }
    let d = x.data();
    let n = (h * w) as f64;
    let mut out = [0.0; NUM_FEATURES];
    for ch in 0..c {
        let values = || d.iter().skip(ch).step_by(c).map(|&v| v as f64);
        let mean = values().sum::<f64>() / n;
        let var = values().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let center = d[((h / 2) * w + w / 2) * c + ch] as f64;
        out[ch * STATS_PER_CHANNEL..(ch + 1) * STATS_PER_CHANNEL].copy_from_slice(&[mean, var.sqrt(), center]);
    }
    Ok(out)
}

/// Feature rows of a set of samples.
pub fn feature_matrix(inputs: &[&Tensor]) -> Result<Vec<Vec<f64>>> {
    inputs.iter().map(|x| summarize(x).map(|f| f.to_vec())).collect()
}
