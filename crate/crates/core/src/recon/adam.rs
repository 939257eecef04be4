//! Bias-corrected Adam over the flat field parameter vector.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    /// Learning rate of the hash tables.
    pub lr_tables: f64,
    /// Learning rate of the MLP weights and biases.
    pub lr_mlp: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr_tables: 1e-2,
            lr_mlp: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr_tables >= 0.0
            && self.lr_mlp >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("optimizer: invalid Adam settings {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// One Adam step over `params[range]` with a single learning rate. The step
/// counter must already be advanced.
fn update(params: &mut [f32], grads: &[f64], state: &mut AdamState, range: Range<usize>, lr: f64, cfg: &AdamConfig) {
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in range {
        let g = grads[i];
        let m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        let v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        state.m[i] = m;
        state.v[i] = v;
        let delta = lr * (m / c1) / ((v / c2).sqrt() + cfg.epsilon);
        params[i] = (params[i] as f64 - delta) as f32;
    }
}

/// Single-group Adam step.
pub fn adam_step(params: &mut [f32], grads: &[f64], state: &mut AdamState, lr: f64, cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    update(params, grads, state, 0..params.len(), lr, cfg);
}

/// Adam step with one learning rate per parameter range; parameters outside
/// every range are left untouched.
pub fn adam_step_groups(
    params: &mut [f32],
    grads: &[f64],
    state: &mut AdamState,
    groups: &[(Range<usize>, f64)],
    cfg: &AdamConfig,
) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    for (range, lr) in groups {
        update(params, grads, state, range.clone(), *lr, cfg);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamConfig::default();
        let mut p = [0.5f32, -1.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[1.0, -3.0], &mut s, 0.01, &cfg);
        let expected = 0.01 / (1.0 + 1e-8);
        assert!((p[0] as f64 - (0.5 - expected)).abs() < 1e-7);
        assert!((p[1] as f64 - (-1.0 + expected)).abs() < 1e-7);
    }

    #[test]
    fn zero_gradient_is_a_no_op_and_updates_are_symmetric() {
        let cfg = AdamConfig::default();
        let mut p = [0.25f32, 0.25, 0.25];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &[0.0, 0.7, 0.7], &mut s, 0.01, &cfg);
        assert_eq!(p[0], 0.25);
        assert_eq!(p[1], p[2]);
    }

    #[test]
    fn matches_reference_recursion() {
        // independent scalar recursion written from the update rule
        let cfg = AdamConfig::default();
        let grads = [0.3, -0.1, 0.5, 0.0, 2.0];
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 1.0f64);
        let mut p = [1.0f32];
        let mut s = AdamState::new(1);
        for (t, g) in grads.iter().enumerate() {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t as i32 + 1));
            let vh = v / (1.0 - 0.999f64.powi(t as i32 + 1));
            x -= 0.05 * mh / (vh.sqrt() + 1e-8);
            adam_step(&mut p, &[*g], &mut s, 0.05, &cfg);
        }
        assert!((p[0] as f64 - x).abs() < 1e-6);
    }

    #[test]
    fn groups_use_their_own_rates() {
        let cfg = AdamConfig::default();
        let mut p = [0.0f32; 4];
        let mut s = AdamState::new(4);
        adam_step_groups(&mut p, &[1.0; 4], &mut s, &[(0..2, 0.1), (2..3, 0.001)], &cfg);
        assert!((p[0] + 0.1).abs() < 1e-6 && (p[2] + 0.001).abs() < 1e-7);
        assert_eq!(p[3], 0.0);
    }
}
