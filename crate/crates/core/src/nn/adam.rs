use serde::{Deserialize, Serialize};

use crate::error::{GcsError, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Where weight decay enters the update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    /// Subtracted from the parameter after the adaptive step (AdamW).
    #[default]
    Decoupled,
    /// Added to the gradient as an L2 term before the moment updates.
    Coupled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(parameters: usize) -> Self {
        AdamState {
            m: vec![0.0; parameters],
            v: vec![0.0; parameters],
            step: 0,
        }
    }

    /// One bias-corrected Adam update. Decay applies only where
    /// `decay_mask` is true (all parameters when `None`).
    pub fn step(
        &mut self,
        params: &mut [f64],
        grads: &[f64],
        decay_mask: Option<&[bool]>,
        learning_rate: f64,
        weight_decay: f64,
        mode: DecayMode,
    ) -> Result<()> {
        let n = self.m.len();
        if params.len() != n || grads.len() != n || decay_mask.is_some_and(|m| m.len() != n) {
            return Err(GcsError::DimensionMismatch {
                expected: n,
                found: params.len().min(grads.len()),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        for i in 0..n {
            let decay = match decay_mask {
                Some(mask) if !mask[i] => 0.0,
                _ => weight_decay,
            };
            let g = match mode {
                DecayMode::Coupled => grads[i] + decay * params[i],
                DecayMode::Decoupled => grads[i],
            };
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            let mut update = m_hat / (v_hat.sqrt() + EPSILON);
            if mode == DecayMode::Decoupled {
                update += decay * params[i];
            }
            params[i] -= learning_rate * update;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_scalar_quadratic() {
        let mut theta = [0.0];
        let mut state = AdamState::new(1);
        for _ in 0..5000 {
            let g = [2.0 * (theta[0] - 3.0)];
            state
                .step(&mut theta, &g, None, 0.01, 0.0, DecayMode::Decoupled)
                .unwrap();
        }
        assert!((theta[0] - 3.0).abs() < 1e-3, "{}", theta[0]);
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut p = [1.5, -2.0];
        let mut state = AdamState::new(2);
        state
            .step(&mut p, &[0.0, 0.0], None, 0.1, 0.0, DecayMode::Decoupled)
            .unwrap();
        assert_eq!(p, [1.5, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [0.003, -250.0] {
            let mut p = [0.0];
            let mut state = AdamState::new(1);
            state
                .step(&mut p, &[g], None, 0.001, 0.0, DecayMode::Decoupled)
                .unwrap();
            assert!((p[0] + 0.001 * g.signum()).abs() < 1e-8);
        }
    }

    #[test]
    fn decoupled_decay_skips_masked_entries() {
        let mut p = [2.0, 2.0];
        let mut state = AdamState::new(2);
        state
            .step(
                &mut p,
                &[0.0, 0.0],
                Some(&[true, false]),
                0.01,
                1.0,
                DecayMode::Decoupled,
            )
            .unwrap();
        assert!((p[0] - (2.0 - 0.01 * 2.0)).abs() < 1e-15);
        assert_eq!(p[1], 2.0);
    }

    #[test]
    fn coupled_decay_acts_through_gradient() {
        let mut p = [2.0];
        let mut state = AdamState::new(1);
        state
            .step(&mut p, &[0.0], None, 0.01, 1.0, DecayMode::Coupled)
            .unwrap();
        // bias-corrected first step has unit magnitude
        assert!((p[0] - 1.99).abs() < 1e-8);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut state = AdamState::new(2);
        assert!(state
            .step(
                &mut [0.0],
                &[0.0, 0.0],
                None,
                0.1,
                0.0,
                DecayMode::Decoupled
            )
            .is_err());
    }
}
