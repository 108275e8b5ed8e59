use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::{Scalar, Tape, Var};

pub fn relu<T: Scalar>(tape: &mut Tape<T>, x: Var) -> Var {
    let out = tape.value(x).map(|v| if v > T::zero() { v } else { T::zero() });
    tape.push(
        out,
        &[x],
        Box::new(|ctx| {
            let g = ctx
                .grad_out
                .zip_map(ctx.inputs[0], |g, x| if x > T::zero() { g } else { T::zero() })
                .expect("same shape");
            vec![Some(g)]
        }),
    )
}

/// `x · Φ(x)` with the exact Gaussian CDF.
pub fn gelu_scalar<T: Scalar>(x: T) -> T {
    let half = T::of(0.5);
    x * half * (T::one() + (x * T::of(FRAC_1_SQRT_2)).erf())
}

fn gelu_grad<T: Scalar>(x: T) -> T {
    let half = T::of(0.5);
    let cdf = half * (T::one() + (x * T::of(FRAC_1_SQRT_2)).erf());
    let pdf = (-(x * x) * half).exp() * T::of(1.0 / (2.0 * PI).sqrt());
    cdf + x * pdf
}

pub fn gelu<T: Scalar>(tape: &mut Tape<T>, x: Var) -> Var {
    let out = tape.value(x).map(gelu_scalar);
    tape.push(
        out,
        &[x],
        Box::new(|ctx| {
            let g = ctx
                .grad_out
                .zip_map(ctx.inputs[0], |g, x| g * gelu_grad(x))
                .expect("same shape");
            vec![Some(g)]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    #[test]
    fn relu_values() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::new(&[2], vec![-2.0, 3.0]).unwrap());
        let y = relu(&mut tape, x);
        assert_eq!(tape.value(y).data(), &[0.0, 3.0]);
    }

    #[test]
    fn gelu_reference_points() {
        assert_eq!(gelu_scalar(0.0f64), 0.0);
        // Φ(1) = 0.841344746...
        assert!((gelu_scalar(1.0f64) - 0.841345).abs() < 1e-5);
        assert!((gelu_scalar(1.0f32) - 0.841345).abs() < 1e-5);
    }
}
