use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bias-corrected Adam moments for a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] -= lr * mh / (vh.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = AdamState::new(3);
        let mut p = vec![1.0, 1.0, 1.0];
        adam_step(&mut s, &mut p, &[0.5, -2.0, 1e-3], 1e-3).unwrap();
        for (v, sign) in p.iter().zip([-1.0, 1.0, -1.0]) {
            let d = v - 1.0;
            assert_eq!(d.signum(), sign);
            assert!(d.abs() <= 1e-3 && d.abs() >= 0.999e-3, "{d}");
        }
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut s = AdamState::new(2);
        let mut p = vec![0.3, -0.7];
        adam_step(&mut s, &mut p, &[0.0, 0.0], 1e-3).unwrap();
        assert_eq!(p, vec![0.3, -0.7]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn minimizes_squared_norm() {
        let mut s = AdamState::new(4);
        let mut w = vec![1.0; 4];
        for _ in 0..200 {
            let g: Vec<f64> = w.iter().map(|v| 2.0 * v).collect();
            adam_step(&mut s, &mut w, &g, 0.05).unwrap();
        }
        assert!(crate::numeric::norm(&w) < 1e-2, "{w:?}");
    }
}
