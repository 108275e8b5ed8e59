use rayon::prelude::*;

use crate::linalg::gemm;
use crate::{GradError, Result, Scalar, Tape, Tensor, Var};

#[derive(Clone, Copy)]
struct Geometry {
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
    k: usize,
}

impl Geometry {
    fn pixels(&self) -> usize {
        self.h * self.w
    }

    fn patch(&self) -> usize {
        self.k * self.k * self.cin
    }
}

/// Unfolds one (h, w, cin) image into rows of k×k×cin zero-padded patches.
fn im2col<T: Scalar>(g: Geometry, img: &[T], col: &mut [T]) {
    let pad = (g.k / 2) as isize;
    let patch = g.patch();
    for y in 0..g.h {
        for x in 0..g.w {
            let row = &mut col[(y * g.w + x) * patch..(y * g.w + x + 1) * patch];
            for ky in 0..g.k {
                let sy = y as isize + ky as isize - pad;
                for kx in 0..g.k {
                    let sx = x as isize + kx as isize - pad;
                    let dst = &mut row[(ky * g.k + kx) * g.cin..(ky * g.k + kx + 1) * g.cin];
                    if sy < 0 || sx < 0 || sy >= g.h as isize || sx >= g.w as isize {
                        dst.iter_mut().for_each(|v| *v = T::zero());
                    } else {
                        let src = (sy as usize * g.w + sx as usize) * g.cin;
                        dst.copy_from_slice(&img[src..src + g.cin]);
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch rows back onto the image.
fn col2im<T: Scalar>(g: Geometry, col: &[T], img: &mut [T]) {
    let pad = (g.k / 2) as isize;
    let patch = g.patch();
    img.iter_mut().for_each(|v| *v = T::zero());
    for y in 0..g.h {
        for x in 0..g.w {
            let row = &col[(y * g.w + x) * patch..(y * g.w + x + 1) * patch];
            for ky in 0..g.k {
                let sy = y as isize + ky as isize - pad;
                if sy < 0 || sy >= g.h as isize {
                    continue;
                }
                for kx in 0..g.k {
                    let sx = x as isize + kx as isize - pad;
                    if sx < 0 || sx >= g.w as isize {
                        continue;
                    }
                    let src = &row[(ky * g.k + kx) * g.cin..(ky * g.k + kx + 1) * g.cin];
                    let dst = (sy as usize * g.w + sx as usize) * g.cin;
                    for (d, &s) in img[dst..dst + g.cin].iter_mut().zip(src) {
                        *d = *d + s;
                    }
                }
            }
        }
    }
}

/// Stride-1 convolution with zero "same" padding.
///
/// `x` is (batch, h, w, cin), `kernel` is (k, k, cin, cout) with odd k and
/// `bias` is (cout).
pub fn conv2d_same<T: Scalar>(tape: &mut Tape<T>, x: Var, kernel: Var, bias: Var) -> Result<Var> {
    let (b, h, w, cin) = tape.value(x).nhwc()?;
    let kshape = tape.shape(kernel).to_vec();
    let [k, k2, kin, cout] = kshape[..] else {
        return Err(GradError::shape("conv2d_same", &[0, 0, cin, 0], &kshape));
    };
    if k != k2 || k % 2 == 0 {
        return Err(GradError::config(
            "conv2d_same",
            format!("kernel must be square with odd extent, found {kshape:?}"),
        ));
    }
    if kin != cin {
        return Err(GradError::shape("conv2d_same", &[k, k, cin, cout], &kshape));
    }
    if tape.shape(bias) != [cout] {
        return Err(GradError::shape("conv2d_same", &[cout], tape.shape(bias)));
    }
    let g = Geometry { h, w, cin, cout, k };

    let xv = tape.value(x).data();
    let kv = tape.value(kernel).data();
    let bv = tape.value(bias).data();
    let mut out = vec![T::zero(); b * g.pixels() * cout];
    out.par_chunks_mut(g.pixels() * cout).enumerate().for_each(|(n, dst)| {
        let img = &xv[n * g.pixels() * cin..(n + 1) * g.pixels() * cin];
        let mut col = vec![T::zero(); g.pixels() * g.patch()];
        im2col(g, img, &mut col);
        for row in dst.chunks_mut(cout) {
            row.copy_from_slice(bv);
        }
        gemm(false, false, g.pixels(), cout, g.patch(), &col, kv, T::one(), dst);
    });
    let out = Tensor::new(&[b, h, w, cout], out)?;

    Ok(tape.push(
        out,
        &[x, kernel, bias],
        Box::new(move |ctx| {
            let dy = ctx.grad_out.data();
            let xv = ctx.inputs[0].data();
            let kv = ctx.inputs[1].data();
            let per_out = g.pixels() * g.cout;
            let per_in = g.pixels() * g.cin;

            let dx = ctx.needs[0].then(|| {
                let mut dx = vec![T::zero(); b * per_in];
                dx.par_chunks_mut(per_in).enumerate().for_each(|(n, dst)| {
                    let mut dcol = vec![T::zero(); g.pixels() * g.patch()];
                    gemm(
                        false,
                        true,
                        g.pixels(),
                        g.patch(),
                        g.cout,
                        &dy[n * per_out..(n + 1) * per_out],
                        kv,
                        T::zero(),
                        &mut dcol,
                    );
                    col2im(g, &dcol, dst);
                });
                Tensor::new(ctx.inputs[0].shape(), dx).expect("input shape")
            });

            let dk = ctx.needs[1].then(|| {
                // Sequential accumulation keeps the sum order fixed.
                let mut dk = vec![T::zero(); g.patch() * g.cout];
                let mut col = vec![T::zero(); g.pixels() * g.patch()];
                for n in 0..b {
                    im2col(g, &xv[n * per_in..(n + 1) * per_in], &mut col);
                    gemm(
                        true,
                        false,
                        g.patch(),
                        g.cout,
                        g.pixels(),
                        &col,
                        &dy[n * per_out..(n + 1) * per_out],
                        T::one(),
                        &mut dk,
                    );
                }
                Tensor::new(ctx.inputs[1].shape(), dk).expect("kernel shape")
            });

            let db = ctx.needs[2].then(|| {
                let mut db = vec![T::zero(); g.cout];
                for row in dy.chunks(g.cout) {
                    for (d, &v) in db.iter_mut().zip(row) {
                        *d = *d + v;
                    }
                }
                Tensor::new(&[g.cout], db).expect("bias shape")
            });
            vec![dx, dk, db]
        }),
    ))
}
