use super::StftTensor;
use crate::{Error, Result};

/// Scale every bin by a real mask in `[0, 1]` laid out like the tensor.
pub fn apply_mask(s: &StftTensor, mask: &[f64]) -> Result<StftTensor> {
    let mut out = s.clone();
    apply_mask_in_place(&mut out, mask)?;
    Ok(out)
}

pub fn apply_mask_in_place(s: &mut StftTensor, mask: &[f64]) -> Result<()> {
    if mask.len() != s.data().len() {
        return Err(Error::shape(format!(
            "mask has {} values, tensor {:?}",
            mask.len(),
            s.shape()
        )));
    }
    if let Some(i) = mask.iter().position(|m| !(0.0..=1.0).contains(m)) {
        return Err(Error::invalid(format!("mask value {} at {i} outside [0, 1]", mask[i])));
    }
    for (z, m) in s.data_mut().iter_mut().zip(mask) {
        *z *= *m;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::Complex64;
    use proptest::prelude::*;

    fn sample() -> StftTensor {
        let data = (0..24)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos()))
            .collect();
        StftTensor::from_data(2, 3, 4, data).unwrap()
    }

    #[test]
    fn identity_zero_half() {
        let s = sample();
        assert_eq!(apply_mask(&s, &[1.0; 24]).unwrap(), s);
        assert!(apply_mask(&s, &[0.0; 24]).unwrap().data().iter().all(|z| z.norm() == 0.0));
        let h = apply_mask(&s, &[0.5; 24]).unwrap();
        for (a, b) in h.data().iter().zip(s.data()) {
            assert_eq!(a.norm(), b.norm() * 0.5);
            if b.norm() > 0.0 {
                assert!((a.arg() - b.arg()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn errors() {
        let s = sample();
        assert!(matches!(apply_mask(&s, &[1.0; 3]), Err(Error::Shape(_))));
        let mut m = vec![0.5; 24];
        m[5] = 1.5;
        assert!(matches!(apply_mask(&s, &m), Err(Error::Validation(_))));
    }

    proptest! {
        #[test]
        fn masking_never_increases_magnitude(mask in proptest::collection::vec(0.0f64..=1.0, 24)) {
            let s = sample();
            let out = apply_mask(&s, &mask).unwrap();
            for (a, b) in out.data().iter().zip(s.data()) {
                prop_assert!(a.norm() <= b.norm());
            }
        }
    }
}
