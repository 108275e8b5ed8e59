use crate::{GradError, ParamId, ParamSet, Result, Scalar};

/// Bias-corrected Adam.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Updates the listed parameters from their accumulated gradients, then
    /// zeroes those gradients. Nothing is modified if any gradient is
    /// non-finite.
    pub fn step<T: Scalar>(&self, set: &mut ParamSet<T>, ids: &[ParamId]) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(GradError::config(
                "adam",
                format!("learning rate {} must be positive", self.lr),
            ));
        }
        for &id in ids {
            if !set.get(id).grad.is_finite() {
                return Err(GradError::NonFiniteGradient(set.name(id).to_string()));
            }
        }
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let eps = T::of(self.eps);
        for &id in ids {
            let p = set.get_mut(id);
            p.step += 1;
            let t = p.step as i32;
            let step_size = T::of(self.lr / (1.0 - self.beta1.powi(t)));
            let v_corr = T::of(1.0 / (1.0 - self.beta2.powi(t)));
            let grads = p.grad.data().to_vec();
            let m = p.m.data_mut();
            for (mi, &g) in m.iter_mut().zip(&grads) {
                *mi = b1 * *mi + (T::one() - b1) * g;
            }
            let v = p.v.data_mut();
            for (vi, &g) in v.iter_mut().zip(&grads) {
                *vi = b2 * *vi + (T::one() - b2) * g * g;
            }
            let (value, m, v) = (p.value.data_mut(), p.m.data(), p.v.data());
            for ((w, &mi), &vi) in value.iter_mut().zip(m).zip(v) {
                *w = *w - step_size * mi / ((vi * v_corr).sqrt() + eps);
            }
            p.zero_grad();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    #[test]
    fn first_step_moves_by_lr() {
        let mut set = ParamSet::<f64>::new();
        let id = set.add("w", Tensor::new(&[2], vec![1.0, 1.0]).unwrap());
        set.get_mut(id).grad = Tensor::new(&[2], vec![0.3, -7.0]).unwrap();
        Adam::new(1e-3).step(&mut set, &[id]).unwrap();
        let w = set.get(id).value.data();
        assert!((w[0] - (1.0 - 1e-3)).abs() < 1e-8);
        assert!((w[1] - (1.0 + 1e-3)).abs() < 1e-8);
        assert!(set.get(id).grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn zero_gradient_still_counts_a_step() {
        let mut set = ParamSet::<f32>::new();
        let id = set.add("w", Tensor::full(&[3], 2.0));
        Adam::new(0.1).step(&mut set, &[id]).unwrap();
        assert_eq!(set.get(id).value.data(), &[2.0, 2.0, 2.0]);
        assert_eq!(set.get(id).step, 1);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut set = ParamSet::<f32>::new();
        let ok = set.add("fine", Tensor::full(&[1], 2.0));
        let bad = set.add("encoder.block0.conv0.kernel", Tensor::full(&[1], 2.0));
        set.get_mut(ok).grad = Tensor::full(&[1], 1.0);
        set.get_mut(bad).grad = Tensor::full(&[1], f32::NAN);
        let err = Adam::new(0.1).step(&mut set, &[ok, bad]).unwrap_err();
        assert!(err.to_string().contains("encoder.block0.conv0.kernel"));
        assert_eq!(set.get(ok).value.data(), &[2.0]);
        assert_eq!(set.get(ok).step, 0);
    }

    #[test]
    fn converges_on_quadratic() {
        // f(w) = (w0 - 1.5)^2 + 4 (w1 + 0.5)^2, minimum at (1.5, -0.5)
        let mut set = ParamSet::<f64>::new();
        let id = set.add("w", Tensor::zeros(&[2]));
        let adam = Adam::new(0.05);
        for _ in 0..200 {
            let w = set.get(id).value.data().to_vec();
            set.get_mut(id).grad = Tensor::new(&[2], vec![2.0 * (w[0] - 1.5), 8.0 * (w[1] + 0.5)]).unwrap();
            adam.step(&mut set, &[id]).unwrap();
        }
        let w = set.get(id).value.data();
        assert!((w[0] - 1.5).abs() < 1e-3 && (w[1] + 0.5).abs() < 1e-3, "{w:?}");
    }
}
