use crate::dsp::{magnitude, Complex64, StftTensor};
use crate::Result;

/// Magnitude-domain L1: mean over every bin of `||pred| − |ref||`.
pub fn recon_loss(pred: &StftTensor, reference: &StftTensor) -> Result<f64> {
    pred.ensure_shape(reference)?;
    let n = pred.data().len().max(1) as f64;
    Ok(pred
        .data()
        .iter()
        .zip(reference.data())
        .map(|(p, r)| (magnitude(*p) - magnitude(*r)).abs())
        .sum::<f64>()
        / n)
}

/// Adds `scale · ∂recon/∂pred` into `grad`. Bins with `|pred| == |ref|` or
/// `pred == 0` contribute zero.
pub fn recon_loss_backward(pred: &StftTensor, reference: &StftTensor, scale: f64, grad: &mut [Complex64]) {
    let n = pred.data().len().max(1) as f64;
    let s = scale / n;
    for ((g, p), r) in grad.iter_mut().zip(pred.data()).zip(reference.data()) {
        let m = magnitude(*p);
        if m == 0.0 {
            continue;
        }
        let diff = m - magnitude(*r);
        if diff != 0.0 {
            *g += p * (diff.signum() * s / m);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(seed: u64) -> StftTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..2 * 3 * 5)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        StftTensor::from_data(2, 3, 5, data).unwrap()
    }

    #[test]
    fn identity_zero_and_symmetry() {
        let a = random(1);
        let b = random(2);
        assert_eq!(recon_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(recon_loss(&a, &b).unwrap(), recon_loss(&b, &a).unwrap());
        let z = StftTensor::zeros(2, 3, 5);
        assert!((recon_loss(&a, &z).unwrap() - a.mean_magnitude()).abs() < 1e-15);
        assert!(recon_loss(&a, &StftTensor::zeros(1, 3, 5)).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let a = random(3);
        let b = random(4);
        let mut g = vec![Complex64::new(0.0, 0.0); a.data().len()];
        recon_loss_backward(&a, &b, 1.0, &mut g);
        let h = 1e-6;
        for i in 0..a.data().len() {
            for (k, unit) in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)].into_iter().enumerate() {
                let mut p = a.clone();
                p.data_mut()[i] += unit * h;
                let lp = recon_loss(&p, &b).unwrap();
                p.data_mut()[i] -= unit * (2.0 * h);
                let lm = recon_loss(&p, &b).unwrap();
                let fd = (lp - lm) / (2.0 * h);
                let an = if k == 0 { g[i].re } else { g[i].im };
                assert!((fd - an).abs() < 1e-4 * an.abs().max(1e-3), "{fd} vs {an}");
            }
        }
    }
}
