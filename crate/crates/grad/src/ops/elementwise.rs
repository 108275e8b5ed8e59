use crate::{GradError, Result, Scalar, Tape, Tensor, Var};

pub fn add<T: Scalar>(tape: &mut Tape<T>, a: Var, b: Var) -> Result<Var> {
    let out = tape.value(a).zip_map(tape.value(b), |x, y| x + y)?;
    Ok(tape.push(
        out,
        &[a, b],
        Box::new(|ctx| vec![Some(ctx.grad_out.clone()), Some(ctx.grad_out.clone())]),
    ))
}

pub fn reshape<T: Scalar>(tape: &mut Tape<T>, x: Var, shape: &[usize]) -> Result<Var> {
    let src_shape = tape.shape(x).to_vec();
    let out = tape.value(x).clone().reshape(shape)?;
    Ok(tape.push(
        out,
        &[x],
        Box::new(move |ctx| {
            vec![Some(
                ctx.grad_out
                    .clone()
                    .reshape(&src_shape)
                    .expect("reshape backward preserves length"),
            )]
        }),
    ))
}

/// `sum(x ⊙ w)` for a constant weight tensor; turns any output into a scalar
/// for gradient checks.
pub fn weighted_sum<T: Scalar>(tape: &mut Tape<T>, x: Var, weights: Tensor<T>) -> Result<Var> {
    if tape.shape(x) != weights.shape() {
        return Err(GradError::shape("weighted_sum", weights.shape(), tape.shape(x)));
    }
    let s = tape
        .value(x)
        .data()
        .iter()
        .zip(weights.data())
        .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
    Ok(tape.push(
        Tensor::scalar(s),
        &[x],
        Box::new(move |ctx| {
            let g = ctx.grad_out.data()[0];
            vec![Some(weights.map(|w| w * g))]
        }),
    ))
}
