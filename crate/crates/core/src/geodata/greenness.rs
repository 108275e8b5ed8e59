use crate::{Result, WamError};

/// `(2G - B - R) / (2G + B + R)` per pixel. Pixels with a zero denominator
/// are missing and come back as NaN.
pub fn greenness_index(red: &[f64], green: &[f64], blue: &[f64]) -> Result<Vec<f64>> {
    if red.len() != green.len() || red.len() != blue.len() {
        return Err(WamError::InvalidGrid(format!(
            "reflectance bands differ in size: red {}, green {}, blue {}",
            red.len(),
            green.len(),
            blue.len()
        )));
    }
    Ok(red
        .iter()
        .zip(green)
        .zip(blue)
        .map(|((&r, &g), &b)| {
            let den = 2.0 * g + b + r;
            if den == 0.0 {
                f64::NAN
            } else {
                (2.0 * g - b - r) / den
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn reference_pixels() {
        let gi = greenness_index(&[1.0, 0.0, 1.0, 0.0], &[1.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(&gi[..3], &[0.0, 1.0, -1.0]);
        assert!(gi[3].is_nan());
    }

    #[test]
    fn band_size_mismatch() {
        assert!(greenness_index(&[1.0], &[1.0, 2.0], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn bounded_for_non_negative_reflectance(r in 0.0f64..1.0, g in 0.0f64..1.0, b in 0.0f64..1.0) {
            let gi = greenness_index(&[r], &[g], &[b]).unwrap()[0];
            prop_assert!(gi.is_nan() || (-1.0..=1.0).contains(&gi));
        }
    }
}
