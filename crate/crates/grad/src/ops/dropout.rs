use rand::Rng;

use crate::{GradError, Result, Scalar, Tape, Var};

/// Inverted dropout. In training each element is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`; inference is identity.
pub fn dropout<T: Scalar, R: Rng + ?Sized>(tape: &mut Tape<T>, x: Var, rate: f64, rng: Option<&mut R>) -> Result<Var> {
    if !(0.0..1.0).contains(&rate) {
        return Err(GradError::config(
            "dropout",
            format!("rate must lie in [0, 1), found {rate}"),
        ));
    }
    let Some(rng) = rng else {
        return Ok(x);
    };
    if rate == 0.0 {
        return Ok(x);
    }
    let scale = T::of(1.0 / (1.0 - rate));
    let keep: Vec<T> = (0..tape.value(x).len())
        .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { scale })
        .collect();
    let mut out = tape.value(x).clone();
    for (v, &k) in out.data_mut().iter_mut().zip(&keep) {
        *v = *v * k;
    }
    Ok(tape.push(
        out,
        &[x],
        Box::new(move |ctx| {
            let mut g = ctx.grad_out.clone();
            for (v, &k) in g.data_mut().iter_mut().zip(&keep) {
                *v = *v * k;
            }
            vec![Some(g)]
        }),
    ))
}
