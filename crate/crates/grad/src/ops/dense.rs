use crate::linalg::gemm;
use crate::{GradError, Result, Scalar, Tape, Tensor, Var};

/// Affine map `x · w + b` for `x` of shape (rows, in), `w` (in, out), `b` (out).
pub fn dense<T: Scalar>(tape: &mut Tape<T>, x: Var, w: Var, b: Var) -> Result<Var> {
    let [rows, inp] = tape.shape(x)[..] else {
        return Err(GradError::config(
            "dense",
            format!("input must be rank 2, found {:?}", tape.shape(x)),
        ));
    };
    let [win, out] = tape.shape(w)[..] else {
        return Err(GradError::shape("dense", &[inp, 0], tape.shape(w)));
    };
    if win != inp {
        return Err(GradError::shape("dense", &[inp, out], tape.shape(w)));
    }
    if tape.shape(b) != [out] {
        return Err(GradError::shape("dense", &[out], tape.shape(b)));
    }
    let mut y = Vec::with_capacity(rows * out);
    for _ in 0..rows {
        y.extend_from_slice(tape.value(b).data());
    }
    gemm(
        false,
        false,
        rows,
        out,
        inp,
        tape.value(x).data(),
        tape.value(w).data(),
        T::one(),
        &mut y,
    );
    let y = Tensor::new(&[rows, out], y)?;
    Ok(tape.push(
        y,
        &[x, w, b],
        Box::new(move |ctx| {
            let dy = ctx.grad_out.data();
            let dx = ctx.needs[0].then(|| {
                let mut dx = vec![T::zero(); rows * inp];
                gemm(
                    false,
                    true,
                    rows,
                    inp,
                    out,
                    dy,
                    ctx.inputs[1].data(),
                    T::zero(),
                    &mut dx,
                );
                Tensor::new(&[rows, inp], dx).expect("input shape")
            });
            let dw = ctx.needs[1].then(|| {
                let mut dw = vec![T::zero(); inp * out];
                gemm(
                    true,
                    false,
                    inp,
                    out,
                    rows,
                    ctx.inputs[0].data(),
                    dy,
                    T::zero(),
                    &mut dw,
                );
                Tensor::new(&[inp, out], dw).expect("weight shape")
            });
            let db = ctx.needs[2].then(|| {
                let mut db = vec![T::zero(); out];
                for row in dy.chunks(out) {
                    for (d, &v) in db.iter_mut().zip(row) {
                        *d = *d + v;
                    }
                }
                Tensor::new(&[out], db).expect("bias shape")
            });
            vec![dx, dw, db]
        }),
    ))
}
