use crate::model::ParamStore;
use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moments for every parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors.iter().map(|t| vec![0.0; t.value.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// Bias-corrected Adam update from the gradients stored in `params`.
pub fn adam_step(params: &mut ParamStore, state: &mut AdamState, lr: f64) -> Result<()> {
    if state.m.len() != params.tensors.len()
        || state.m.iter().zip(&params.tensors).any(|(m, t)| m.len() != t.value.len())
    {
        return Err(Error::shape("optimizer state does not match parameters"));
    }
    if let Some(t) = params.tensors.iter().find(|t| t.grad.iter().any(|g| !g.is_finite())) {
        return Err(Error::Divergence(format!("non-finite gradient in {}", t.name)));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for ((tensor, m), v) in params.tensors.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        for (((p, g), mi), vi) in tensor.value.iter_mut().zip(&tensor.grad).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = BETA1 * *mi + (1.0 - BETA1) * g;
            *vi = BETA2 * *vi + (1.0 - BETA2) * g * g;
            *p -= lr * (*mi / c1) / ((*vi / c2).sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

/// Rescale gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(params: &mut ParamStore, max_norm: f64) -> f64 {
    let norm = params.grad_norm();
    if max_norm > 0.0 && norm > max_norm {
        params.scale_grads(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, MaskNetConfig};

    fn store() -> ParamStore {
        init_params(&MaskNetConfig { base_channels: 2, depth: 1, ..Default::default() }).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = store();
        let before = p.clone();
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &mut s, 1e-3).unwrap();
        assert_eq!(s.step, 1);
        assert_eq!(p.flat_values(), before.flat_values());
    }

    #[test]
    fn first_step_moves_by_lr() {
        // At t = 1, m̂ = g and v̂ = g², so the step is lr · g / (|g| + ε).
        let mut p = store();
        let before = p.flat_values();
        for (i, t) in p.tensors.iter_mut().enumerate() {
            for (j, g) in t.grad.iter_mut().enumerate() {
                *g = if (i + j) % 2 == 0 { 0.37 } else { -2.5e-3 };
            }
        }
        let grads = p.flat_grads();
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &mut s, 2e-4).unwrap();
        for ((a, b), g) in p.flat_values().iter().zip(&before).zip(&grads) {
            let expected = 2e-4 * g / (g.abs() + ADAM_EPS);
            assert!(((b - a) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut p = store();
        p.tensors[0].grad[0] = f64::NAN;
        let mut s = AdamState::new(&p);
        assert!(matches!(adam_step(&mut p, &mut s, 1e-3), Err(Error::Divergence(_))));
        assert_eq!(s.step, 0);
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut p = store();
        p.tensors.iter_mut().for_each(|t| t.grad.iter_mut().for_each(|g| *g = 1.0));
        let n = p.num_params() as f64;
        assert!((clip_grad_norm(&mut p, 5.0) - n.sqrt()).abs() < 1e-12);
        assert!((p.grad_norm() - 5.0).abs() < 1e-12);
        let before = p.flat_grads();
        clip_grad_norm(&mut p, 10.0);
        assert_eq!(before, p.flat_grads());
    }
}
