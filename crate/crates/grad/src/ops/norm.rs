use crate::{GradError, Result, Scalar, Tape, Tensor, Var};

/// Per-channel moving statistics of a batch-norm layer.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats<T = f32> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub initialized: bool,
    pub momentum: T,
    pub eps: T,
}

impl<T: Scalar> RunningStats<T> {
    pub const MOMENTUM: f64 = 0.9;
    pub const EPS: f64 = 1e-5;

    pub fn new(channels: usize) -> Self {
        RunningStats {
            mean: vec![T::zero(); channels],
            var: vec![T::one(); channels],
            initialized: false,
            momentum: T::of(Self::MOMENTUM),
            eps: T::of(Self::EPS),
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

pub enum NormMode<'a, T> {
    /// Normalize with batch statistics and fold them into the running ones.
    Train(&'a mut RunningStats<T>),
    /// Normalize with the running statistics.
    Infer(&'a RunningStats<T>),
}

/// Batch normalization over every axis but the last.
pub fn batch_norm<T: Scalar>(tape: &mut Tape<T>, x: Var, gamma: Var, beta: Var, mode: NormMode<'_, T>) -> Result<Var> {
    let c = tape.value(x).channels();
    if tape.shape(gamma) != [c] {
        return Err(GradError::shape("batch_norm", &[c], tape.shape(gamma)));
    }
    if tape.shape(beta) != [c] {
        return Err(GradError::shape("batch_norm", &[c], tape.shape(beta)));
    }
    let stats_channels = match &mode {
        NormMode::Train(s) => s.channels(),
        NormMode::Infer(s) => s.channels(),
    };
    if stats_channels != c {
        return Err(GradError::shape("batch_norm", &[c], &[stats_channels]));
    }
    let xv = tape.value(x);
    let n = xv.len() / c;
    let (mean, var, train, eps) = match mode {
        NormMode::Train(stats) => {
            let mut sum = vec![0.0f64; c];
            for row in xv.data().chunks(c) {
                for (s, &v) in sum.iter_mut().zip(row) {
                    *s += v.as_f64();
                }
            }
            let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
            let mut sq = vec![0.0f64; c];
            for row in xv.data().chunks(c) {
                for ((s, &v), m) in sq.iter_mut().zip(row).zip(&mean) {
                    let d = v.as_f64() - m;
                    *s += d * d;
                }
            }
            let var: Vec<T> = sq.iter().map(|s| T::of(s / n as f64)).collect();
            let mean: Vec<T> = mean.into_iter().map(T::of).collect();
            let mom = stats.momentum;
            for ch in 0..c {
                stats.mean[ch] = mom * stats.mean[ch] + (T::one() - mom) * mean[ch];
                stats.var[ch] = mom * stats.var[ch] + (T::one() - mom) * var[ch];
            }
            stats.initialized = true;
            (mean, var, true, stats.eps)
        }
        NormMode::Infer(stats) => {
            if !stats.initialized {
                return Err(GradError::UninitializedRunningStats);
            }
            (stats.mean.clone(), stats.var.clone(), false, stats.eps)
        }
    };
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let gv = tape.value(gamma).data();
    let bv = tape.value(beta).data();
    let mut xhat = Vec::with_capacity(xv.len());
    let mut out = Vec::with_capacity(xv.len());
    for row in xv.data().chunks(c) {
        for ch in 0..c {
            let h = (row[ch] - mean[ch]) * inv_std[ch];
            xhat.push(h);
            out.push(gv[ch] * h + bv[ch]);
        }
    }
    let shape = xv.shape().to_vec();
    let out = Tensor::new(&shape, out)?;

    Ok(tape.push(
        out,
        &[x, gamma, beta],
        Box::new(move |ctx| {
            let dy = ctx.grad_out.data();
            let gv = ctx.inputs[1].data();
            let mut dgamma = vec![T::zero(); c];
            let mut dbeta = vec![T::zero(); c];
            for (row, hrow) in dy.chunks(c).zip(xhat.chunks(c)) {
                for ch in 0..c {
                    dgamma[ch] = dgamma[ch] + row[ch] * hrow[ch];
                    dbeta[ch] = dbeta[ch] + row[ch];
                }
            }
            let dx = ctx.needs[0].then(|| {
                let mut dx = Vec::with_capacity(dy.len());
                if train {
                    let nt = T::of(n as f64);
                    for (row, hrow) in dy.chunks(c).zip(xhat.chunks(c)) {
                        for ch in 0..c {
                            // sums of dxhat and dxhat·xhat are gamma·dbeta and gamma·dgamma
                            let dh = row[ch] * gv[ch];
                            let v = (nt * dh - gv[ch] * dbeta[ch] - hrow[ch] * gv[ch] * dgamma[ch]) * inv_std[ch] / nt;
                            dx.push(v);
                        }
                    }
                } else {
                    for row in dy.chunks(c) {
                        for ch in 0..c {
                            dx.push(row[ch] * gv[ch] * inv_std[ch]);
                        }
                    }
                }
                Tensor::new(&shape, dx).expect("input shape")
            });
            vec![
                dx,
                Some(Tensor::new(&[c], dgamma).expect("gamma shape")),
                Some(Tensor::new(&[c], dbeta).expect("beta shape")),
            ]
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(x: Tensor<f64>, gamma: f64, beta: f64, stats: &mut RunningStats<f64>) -> Tensor<f64> {
        let c = x.channels();
        let mut tape = Tape::new();
        let xv = tape.constant(x);
        let g = tape.constant(Tensor::full(&[c], gamma));
        let b = tape.constant(Tensor::full(&[c], beta));
        let y = batch_norm(&mut tape, xv, g, b, NormMode::Train(stats)).unwrap();
        tape.value(y).clone()
    }

    #[test]
    fn train_mode_standardizes_each_channel() {
        let x = Tensor::from_fn(&[2, 3, 3, 2], |i| ((i * 7919) % 23) as f64 * 0.3 - 2.0);
        let mut stats = RunningStats::new(2);
        let y = run(x, 1.0, 0.0, &mut stats);
        for ch in 0..2 {
            let vals: Vec<f64> = y.data().iter().skip(ch).step_by(2).copied().collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-5);
            // eps = 1e-5 shrinks the variance by var/(var+eps)
            assert!((var - 1.0).abs() < 1e-5, "var {var}");
        }
        assert!(stats.initialized);
    }

    #[test]
    fn zero_gamma_collapses_to_beta() {
        let x = Tensor::from_fn(&[1, 2, 2, 3], |i| i as f64);
        let mut stats = RunningStats::new(3);
        let y = run(x, 0.0, 0.75, &mut stats);
        assert!(y.data().iter().all(|&v| v == 0.75));
    }

    #[test]
    fn infer_before_training_is_rejected() {
        let stats = RunningStats::<f32>::new(1);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[1, 1, 1, 1]));
        let g = tape.constant(Tensor::full(&[1], 1.0));
        let b = tape.constant(Tensor::zeros(&[1]));
        let err = batch_norm(&mut tape, x, g, b, NormMode::Infer(&stats)).unwrap_err();
        assert_eq!(err.to_string(), "batch_norm: uninitialized running statistics");
    }

    #[test]
    fn running_stats_follow_momentum() {
        let x = Tensor::new(&[4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut stats = RunningStats::new(1);
        run(x, 1.0, 0.0, &mut stats);
        assert!((stats.mean[0] - 0.1 * 2.5).abs() < 1e-12);
        assert!((stats.var[0] - (0.9 + 0.1 * 1.25)).abs() < 1e-12);
    }
}
