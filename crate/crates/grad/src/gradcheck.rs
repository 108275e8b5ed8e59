//! Central finite-difference checks of tape gradients.
//!
//! The numeric side only evaluates the forward function, so it is independent
//! of every backward closure it checks.

use crate::{Result, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    /// Finite-difference step.
    pub h: f64,
    /// Allowed relative error.
    pub tolerance: f64,
    /// Magnitudes below this are compared absolutely.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            h: 1e-5,
            tolerance: 1e-4,
            floor: 1e-3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (input index, element index, analytic, numeric) of the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self, cfg: &GradCheckConfig) -> bool {
        self.max_rel_error <= cfg.tolerance
    }
}

pub fn relative_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Compares the tape gradient of the scalar `f(inputs)` against central
/// differences for every element of every input.
pub fn check<F>(inputs: &[Tensor<f64>], cfg: &GradCheckConfig, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<Tensor<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| grads.get(v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();

    let eval = |perturbed: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::no_grad();
        let vars: Vec<Var> = perturbed.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).data()[0])
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    let mut work = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        for j in 0..input.len() {
            let orig = input.data()[j];
            work[i].data_mut()[j] = orig + cfg.h;
            let plus = eval(&work)?;
            work[i].data_mut()[j] = orig - cfg.h;
            let minus = eval(&work)?;
            work[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.h);
            let a = analytic[i].data()[j];
            let err = relative_error(a, numeric, cfg.floor);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                if err >= report.max_rel_error {
                    report.worst = Some((i, j, a, numeric));
                }
            }
        }
    }
    Ok(report)
}

/// Outcome of checking one operation over many random instances.
#[derive(Clone, Debug)]
pub struct OpCheck {
    pub op: &'static str,
    pub instances: usize,
    pub max_rel_error: f64,
}

pub mod suite {
    //! Randomized gradient checks for every differentiable operation.

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::{check, GradCheckConfig, OpCheck};
    use crate::ops::{self, NormMode, RunningStats};
    use crate::{Result, Tensor};

    fn random(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0) * scale)
    }

    fn projection(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
        random(rng, shape, 1.0)
    }

    fn run_op(
        op: &'static str,
        instances: usize,
        seed: u64,
        _cfg: &GradCheckConfig,
        mut one: impl FnMut(&mut ChaCha8Rng) -> Result<f64>,
    ) -> Result<OpCheck> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..instances {
            worst = worst.max(one(&mut rng)?);
        }
        Ok(OpCheck {
            op,
            instances,
            max_rel_error: worst,
        })
    }

    /// Runs every operation check with `instances` random instances each.
    pub fn run_all(instances: usize, seed: u64) -> Result<Vec<OpCheck>> {
        let cfg = GradCheckConfig::default();
        let c = &cfg;
        let mut out = Vec::new();

        out.push(run_op("conv2d_same", instances, seed, c, |rng| {
            let k = if rng.gen_bool(0.5) { 3 } else { 1 };
            let cin = rng.gen_range(1..=2);
            let cout = rng.gen_range(1..=2);
            let (h, w) = (rng.gen_range(2..=4), rng.gen_range(2..=4));
            let batch = rng.gen_range(1..=2);
            let x = random(rng, &[batch, h, w, cin], 1.0);
            let kern = random(rng, &[k, k, cin, cout], 1.0);
            let b = random(rng, &[cout], 1.0);
            let shape = [x.shape()[0], h, w, cout];
            let p = projection(rng, &shape);
            Ok(check(&[x, kern, b], c, |t, v| {
                let y = ops::conv2d_same(t, v[0], v[1], v[2])?;
                ops::weighted_sum(t, y, p.clone())
            })?
            .max_rel_error)
        })?);

        // The fixed example: 3×3×2×2 kernel on a 4×4×2 input.
        out.push(run_op(
            "conv2d_same[3x3x2x2 on 4x4x2]",
            instances,
            seed + 1,
            c,
            |rng| {
                let x = random(rng, &[1, 4, 4, 2], 1.0);
                let kern = random(rng, &[3, 3, 2, 2], 1.0);
                let b = random(rng, &[2], 1.0);
                let p = projection(rng, &[1, 4, 4, 2]);
                Ok(check(&[x, kern, b], c, |t, v| {
                    let y = ops::conv2d_same(t, v[0], v[1], v[2])?;
                    ops::weighted_sum(t, y, p.clone())
                })?
                .max_rel_error)
            },
        )?);

        out.push(run_op("batch_norm[train]", instances, seed + 2, c, |rng| {
            let ch = rng.gen_range(1..=3);
            let x = random(rng, &[2, 3, 2, ch], 2.0);
            let g = random(rng, &[ch], 1.5);
            let b = random(rng, &[ch], 1.0);
            let p = projection(rng, &[2, 3, 2, ch]);
            Ok(check(&[x, g, b], c, |t, v| {
                let mut stats = RunningStats::new(ch);
                let y = ops::batch_norm(t, v[0], v[1], v[2], NormMode::Train(&mut stats))?;
                ops::weighted_sum(t, y, p.clone())
            })?
            .max_rel_error)
        })?);

        out.push(run_op("batch_norm[infer]", instances, seed + 3, c, |rng| {
            let ch = rng.gen_range(1..=3);
            let x = random(rng, &[2, 2, 2, ch], 2.0);
            let g = random(rng, &[ch], 1.5);
            let b = random(rng, &[ch], 1.0);
            let p = projection(rng, &[2, 2, 2, ch]);
            let mut stats = RunningStats::new(ch);
            stats.mean = (0..ch).map(|_| rng.gen_range(-0.5..0.5)).collect();
            stats.var = (0..ch).map(|_| rng.gen_range(0.5..2.0)).collect();
            stats.initialized = true;
            Ok(check(&[x, g, b], c, |t, v| {
                let y = ops::batch_norm(t, v[0], v[1], v[2], NormMode::Infer(&stats))?;
                ops::weighted_sum(t, y, p.clone())
            })?
            .max_rel_error)
        })?);

        out.push(run_op("relu", instances, seed + 4, c, |rng| {
            let x = random(rng, &[3, 5], 1.0);
            let p = projection(rng, &[3, 5]);
            Ok(check(&[x], c, |t, v| {
                let y = ops::relu(t, v[0]);
                ops::weighted_sum(t, y, p.clone())
            })?
            .max_rel_error)
        })?);

        out.push(run_op("gelu", instances, seed + 5, c, |rng| {
            let x = random(rng, &[3, 5], 3.0);
            let p = projection(rng, &[3, 5]);
            Ok(check(&[x], c, |t, v| {
                let y = ops::gelu(t, v[0]);
                ops::weighted_sum(t, y, p.clone())
            })?
            .max_rel_error)
        })?);

        out.push(run_op("max_pool2", instances, seed + 6, c, |rng| {
            let ch = rng.gen_range(1..=2);
            let x = random(rng, &[1, 4, 4, ch], 1.0);
            let p = projection(rng, &[1, 2, 2, ch]);
            Ok(check(&[x], c, |t, v| {
                let y = ops::max_pool2(t, v[0])?;
                ops::weighted_sum(t, y, p.clone())
            })?
            .max_rel_error)
        })?);

        out.push(run_op("avg_pool", instances, seed + 7, c, |rng| {
            let x = random(rng, &[2, 4, 4, 2], 1.0);
            let p = projection(rng, &[2, 2, 2, 2]);
            Ok(check(&[x], c, |t, v| {
                let y = ops::avg_pool(t, v[0], 2)?;
                ops::weighted_sum(t, y, p.clone())
            })?
            .max_rel_error)
        })?);

        out.push(run_op("dense", instances, seed + 8, c, |rng| {
            let (rows, inp, outp) = (rng.gen_range(1..=3), rng.gen_range(1..=5), rng.gen_range(1..=4));
            let x = random(rng, &[rows, inp], 1.0);
            let w = random(rng, &[inp, outp], 1.0);
            let b = random(rng, &[outp], 1.0);
            let p = projection(rng, &[rows, outp]);
            Ok(check(&[x, w, b], c, |t, v| {
                let y = ops::dense(t, v[0], v[1], v[2])?;
                ops::weighted_sum(t, y, p.clone())
            })?
            .max_rel_error)
        })?);

        out.push(run_op("dropout[train]", instances, seed + 9, c, |rng| {
            let x = random(rng, &[4, 6], 1.0);
            let p = projection(rng, &[4, 6]);
            let mask_seed: u64 = rng.gen();
            Ok(check(&[x], c, |t, v| {
                let mut r = ChaCha8Rng::seed_from_u64(mask_seed);
                let y = ops::dropout(t, v[0], 0.5, Some(&mut r))?;
                ops::weighted_sum(t, y, p.clone())
            })?
            .max_rel_error)
        })?);

        out.push(run_op("sparse_categorical_xent", instances, seed + 10, c, |rng| {
            let (n, k) = (rng.gen_range(2..=6), rng.gen_range(2..=8));
            let logits = random(rng, &[n, k], 3.0);
            let targets: Vec<u32> = (0..n).map(|_| rng.gen_range(0..k as u32)).collect();
            let mut mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            mask[0] = true;
            Ok(check(&[logits], c, |t, v| {
                ops::sparse_categorical_xent(t, v[0], &targets, &mask)
            })?
            .max_rel_error)
        })?);

        out.push(run_op("mse", instances, seed + 11, c, |rng| {
            let pred = random(rng, &[3, 6], 1.0);
            let target = random(rng, &[3, 6], 1.0);
            Ok(check(&[pred], c, |t, v| ops::mse(t, v[0], &target))?.max_rel_error)
        })?);

        out.push(run_op("add+reshape", instances, seed + 12, c, |rng| {
            let a = random(rng, &[2, 6], 1.0);
            let b = random(rng, &[2, 6], 1.0);
            let p = projection(rng, &[3, 4]);
            Ok(check(&[a, b], c, |t, v| {
                let s = ops::add(t, v[0], v[1])?;
                let r = ops::reshape(t, s, &[3, 4])?;
                ops::weighted_sum(t, r, p.clone())
            })?
            .max_rel_error)
        })?);

        // A composed chain exercising the encoder block pattern end to end.
        out.push(run_op("conv+bn+gelu+pool chain", instances, seed + 13, c, |rng| {
            let x = random(rng, &[2, 4, 4, 2], 1.0);
            let kern = random(rng, &[3, 3, 2, 3], 0.7);
            let b = random(rng, &[3], 0.3);
            let g = random(rng, &[3], 1.0);
            let be = random(rng, &[3], 0.5);
            let p = projection(rng, &[2, 2, 2, 3]);
            Ok(check(&[x, kern, b, g, be], c, |t, v| {
                let mut stats = RunningStats::new(3);
                let y = ops::conv2d_same(t, v[0], v[1], v[2])?;
                let y = ops::batch_norm(t, y, v[3], v[4], NormMode::Train(&mut stats))?;
                let y = ops::gelu(t, y);
                let y = ops::max_pool2(t, y)?;
                ops::weighted_sum(t, y, p.clone())
            })?
            .max_rel_error)
        })?);

        Ok(out)
    }
}
