//! Adam with bias correction.

use super::{Gradients, ModelSpec, Parameters, Tensor};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(spec: &ModelSpec) -> Self {
        let zeros = Parameters::zeros(spec).tensors;
        AdamState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update of every parameter tensor.
pub fn adam_step(params: &mut Parameters, grads: &Gradients, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);

    for ((p, g), (m, v)) in params
        .tensors
        .iter_mut()
        .zip(&grads.tensors)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = ADAM_BETA1 * m.data[i] + (1.0 - ADAM_BETA1) * gi;
            v.data[i] = ADAM_BETA2 * v.data[i] + (1.0 - ADAM_BETA2) * gi * gi;
            let m_hat = m.data[i] / bc1;
            let v_hat = v.data[i] / bc2;
            p.data[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Model, ModelSpec};

    fn tiny() -> (Model, AdamState) {
        let spec = ModelSpec::new(6, 4);
        (Model::init(spec, 1), AdamState::new(&spec))
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let (mut model, mut state) = tiny();
        let before = model.params.clone();
        let grads = Gradients::zeros(&model.spec);
        adam_step(&mut model.params, &grads, &mut state, 1e-3);
        assert_eq!(model.params, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_with_unit_gradient_moves_by_lr() {
        // bias-corrected first step: m_hat = g, v_hat = g^2, so the update
        // is lr * g / (|g| + eps) = lr for g = 1
        let (mut model, mut state) = tiny();
        let before = model.params.tensors[0].data[0];
        let mut grads = Gradients::zeros(&model.spec);
        grads.tensors[0].data[0] = 1.0;
        let lr = 1e-3;
        adam_step(&mut model.params, &grads, &mut state, lr);
        let delta = model.params.tensors[0].data[0] - before;
        assert!((delta + lr).abs() < lr * 1e-6, "delta {}", delta);
    }

    #[test]
    fn step_counter_increments_once_per_call() {
        let (mut model, mut state) = tiny();
        let grads = Gradients::zeros(&model.spec);
        for want in 1..=5 {
            adam_step(&mut model.params, &grads, &mut state, 1e-3);
            assert_eq!(state.step, want);
        }
    }

    #[test]
    fn constant_gradient_tracks_hand_iteration() {
        // iterate the update recurrences directly on one scalar and compare
        let (mut model, mut state) = tiny();
        let g = 0.37;
        let lr = 0.01;
        let mut grads = Gradients::zeros(&model.spec);
        grads.tensors[2].data[5] = g;
        let p0 = model.params.tensors[2].data[5];

        let (mut m, mut v, mut p) = (0.0f64, 0.0f64, p0);
        for t in 1..=7 {
            m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g;
            v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = m / (1.0 - ADAM_BETA1.powi(t));
            let v_hat = v / (1.0 - ADAM_BETA2.powi(t));
            p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            adam_step(&mut model.params, &grads, &mut state, lr);
            assert!((model.params.tensors[2].data[5] - p).abs() < 1e-15);
        }
    }
}
