use crate::{GradError, Result, Scalar, Tape, Tensor, Var};

/// Mean over the selected rows of `-log softmax(logits)[target]`.
///
/// `logits` is viewed as (positions, classes) with classes on the last axis;
/// `targets` and `mask` hold one entry per position.
pub fn sparse_categorical_xent<T: Scalar>(
    tape: &mut Tape<T>,
    logits: Var,
    targets: &[u32],
    mask: &[bool],
) -> Result<Var> {
    let lv = tape.value(logits);
    let k = lv.channels();
    let positions = lv.len() / k;
    if targets.len() != positions || mask.len() != positions {
        return Err(GradError::shape(
            "sparse_categorical_xent",
            &[positions],
            &[targets.len(), mask.len()],
        ));
    }
    if let Some(&t) = targets.iter().find(|&&t| t as usize >= k) {
        return Err(GradError::config(
            "sparse_categorical_xent",
            format!("target {t} outside [0, {k})"),
        ));
    }
    let selected = mask.iter().filter(|&&m| m).count();
    if selected == 0 {
        return Err(GradError::NoSupervisedPositions);
    }
    let mut probs = vec![T::zero(); lv.len()];
    let mut total = 0.0f64;
    for (p, row) in lv.data().chunks(k).enumerate() {
        if !mask[p] {
            continue;
        }
        let max = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut z = T::zero();
        for (q, &v) in probs[p * k..(p + 1) * k].iter_mut().zip(row) {
            *q = (v - max).exp();
            z = z + *q;
        }
        for q in &mut probs[p * k..(p + 1) * k] {
            *q = *q / z;
        }
        let t = targets[p] as usize;
        total += (z.ln() - (row[t] - max)).as_f64();
    }
    let scale = T::one() / T::of(selected as f64);
    let targets = targets.to_vec();
    let mask = mask.to_vec();
    let shape = lv.shape().to_vec();
    Ok(tape.push(
        Tensor::scalar(T::of(total / selected as f64)),
        &[logits],
        Box::new(move |ctx| {
            let g = ctx.grad_out.data()[0] * scale;
            let mut d = probs.clone();
            for p in 0..mask.len() {
                let row = &mut d[p * k..(p + 1) * k];
                if mask[p] {
                    row[targets[p] as usize] = row[targets[p] as usize] - T::one();
                    row.iter_mut().for_each(|v| *v = *v * g);
                }
            }
            vec![Some(Tensor::new(&shape, d).expect("logit shape"))]
        }),
    ))
}

/// Mean squared error against a constant target.
pub fn mse<T: Scalar>(tape: &mut Tape<T>, pred: Var, target: &Tensor<T>) -> Result<Var> {
    if tape.shape(pred) != target.shape() {
        return Err(GradError::shape("mse", target.shape(), tape.shape(pred)));
    }
    let diff = tape.value(pred).zip_map(target, |p, t| p - t)?;
    let n = T::of(diff.len() as f64);
    let loss = diff.data().iter().fold(T::zero(), |a, &d| a + d * d) / n;
    Ok(tape.push(
        Tensor::scalar(loss),
        &[pred],
        Box::new(move |ctx| {
            let g = ctx.grad_out.data()[0] * T::of(2.0) / n;
            vec![Some(diff.map(|d| d * g))]
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_k() {
        let mut tape = Tape::<f64>::new();
        let l = tape.constant(Tensor::zeros(&[5, 64]));
        let loss = sparse_categorical_xent(&mut tape, l, &[0, 3, 9, 63, 1], &[true; 5]).unwrap();
        assert!((tape.value(loss).data()[0] - 64f64.ln()).abs() < 1e-12);
        assert!((64f64.ln() - 4.1589).abs() < 1e-4);
    }

    #[test]
    fn margin_drives_loss_to_zero() {
        let mut last = f64::INFINITY;
        for margin in [1.0, 5.0, 20.0, 50.0] {
            let mut tape = Tape::<f64>::new();
            let l = tape.constant(Tensor::from_fn(&[1, 4], |i| if i == 2 { margin } else { 0.0 }));
            let loss = sparse_categorical_xent(&mut tape, l, &[2], &[true]).unwrap();
            let v = tape.value(loss).data()[0];
            assert!(v < last);
            last = v;
        }
        assert!(last < 1e-20);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let mut tape = Tape::<f32>::new();
        let l = tape.constant(Tensor::zeros(&[2, 4]));
        let err = sparse_categorical_xent(&mut tape, l, &[0, 1], &[false, false]).unwrap_err();
        assert_eq!(err, GradError::NoSupervisedPositions);
        assert!(err.to_string().contains("no supervised positions"));
    }

    #[test]
    fn unmasked_positions_get_no_gradient() {
        let mut tape = Tape::<f64>::new();
        let l = tape.input(Tensor::from_fn(&[2, 3], |i| i as f64));
        let loss = sparse_categorical_xent(&mut tape, l, &[0, 1], &[true, false]).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(&g.get(l).unwrap().data()[3..], &[0.0, 0.0, 0.0]);
    }
}
