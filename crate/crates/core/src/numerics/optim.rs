use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::model::ParamVector;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Per-round learning rate `eta0 * decay^round`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningSchedule {
    pub eta0: f64,
    pub decay: f64,
}

impl Default for LearningSchedule {
    fn default() -> Self {
        LearningSchedule {
            eta0: 1e-4,
            decay: 0.5,
        }
    }
}

impl LearningSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::config(format!(
                "eta0 must be positive, got {}",
                self.eta0
            )));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::config(format!(
                "decay must lie in (0, 1], got {}",
                self.decay
            )));
        }
        Ok(())
    }

    pub fn learning_rate(&self, round: usize) -> f64 {
        let exp = i32::try_from(round).unwrap_or(i32::MAX);
        self.eta0 * self.decay.powi(exp)
    }
}

/// Adam moments over the trainable slice of a parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
        }
    }

    pub fn for_params(params: &ParamVector) -> Self {
        AdamState::new(params.len())
    }
}

/// One bias-corrected Adam update of the trainable scalars. The gradient
/// is checked for finiteness before anything is modified.
pub fn adam_step(
    params: &mut ParamVector,
    grad: &[f64],
    state: &mut AdamState,
    eta: f64,
) -> Result<()> {
    if grad.len() != params.len() || state.first_moment.len() != params.len() {
        return Err(Error::Shape(format!(
            "gradient/state length {}/{} does not match {} parameters",
            grad.len(),
            state.first_moment.len(),
            params.len()
        )));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Precondition(format!(
            "learning rate must be positive, got {eta}"
        )));
    }
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NumericFault { index });
    }

    state.step_count += 1;
    let t = i32::try_from(state.step_count).unwrap_or(i32::MAX);
    let bias1 = 1.0 - state.beta1.powi(t);
    let bias2 = 1.0 - state.beta2.powi(t);
    let start = params.frozen_len();
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);

    let values = params.values_mut();
    for i in start..values.len() {
        let g = grad[i];
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        values[i] -= eta * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
