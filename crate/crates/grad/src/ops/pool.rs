use crate::{GradError, Result, Scalar, Tape, Tensor, Var};

/// 2×2 max pooling with stride 2. Ties go to the first element in row-major
/// order, which also receives the whole gradient.
pub fn max_pool2<T: Scalar>(tape: &mut Tape<T>, x: Var) -> Result<Var> {
    let (b, h, w, c) = tape.value(x).nhwc()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(GradError::config(
            "max_pool2",
            format!("spatial extents must be even, found {h}×{w}"),
        ));
    }
    let (oh, ow) = (h / 2, w / 2);
    let xv = tape.value(x).data();
    let mut out = Vec::with_capacity(b * oh * ow * c);
    let mut argmax = Vec::with_capacity(b * oh * ow * c);
    for n in 0..b {
        for y in 0..oh {
            for xx in 0..ow {
                for ch in 0..c {
                    let mut best_idx = ((n * h + 2 * y) * w + 2 * xx) * c + ch;
                    let mut best = xv[best_idx];
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = ((n * h + 2 * y + dy) * w + 2 * xx + dx) * c + ch;
                        if xv[idx] > best {
                            best = xv[idx];
                            best_idx = idx;
                        }
                    }
                    out.push(best);
                    argmax.push(best_idx as u32);
                }
            }
        }
    }
    let in_shape = tape.shape(x).to_vec();
    let out = Tensor::new(&[b, oh, ow, c], out)?;
    Ok(tape.push(
        out,
        &[x],
        Box::new(move |ctx| {
            let mut dx = Tensor::zeros(&in_shape);
            let d = dx.data_mut();
            for (&g, &i) in ctx.grad_out.data().iter().zip(&argmax) {
                d[i as usize] = d[i as usize] + g;
            }
            vec![Some(dx)]
        }),
    ))
}

/// Non-overlapping average pooling by an integer factor (factor 1 is a
/// pass-through).
pub fn avg_pool<T: Scalar>(tape: &mut Tape<T>, x: Var, factor: usize) -> Result<Var> {
    let (b, h, w, c) = tape.value(x).nhwc()?;
    if factor == 0 || h % factor != 0 || w % factor != 0 {
        return Err(GradError::config(
            "avg_pool",
            format!("factor {factor} does not divide {h}×{w}"),
        ));
    }
    let (oh, ow) = (h / factor, w / factor);
    let scale = T::one() / T::of((factor * factor) as f64);
    let xv = tape.value(x).data();
    let mut out = vec![T::zero(); b * oh * ow * c];
    for n in 0..b {
        for y in 0..h {
            for xx in 0..w {
                let src = ((n * h + y) * w + xx) * c;
                let dst = ((n * oh + y / factor) * ow + xx / factor) * c;
                for ch in 0..c {
                    out[dst + ch] = out[dst + ch] + xv[src + ch];
                }
            }
        }
    }
    out.iter_mut().for_each(|v| *v = *v * scale);
    let in_shape = tape.shape(x).to_vec();
    let out = Tensor::new(&[b, oh, ow, c], out)?;
    Ok(tape.push(
        out,
        &[x],
        Box::new(move |ctx| {
            let g = ctx.grad_out.data();
            let dx = Tensor::from_fn(&in_shape, |i| {
                let ch = i % c;
                let xx = (i / c) % w;
                let y = (i / (c * w)) % h;
                let n = i / (c * w * h);
                g[((n * oh + y / factor) * ow + xx / factor) * c + ch] * scale
            });
            vec![Some(dx)]
        }),
    ))
}
