//! Differentiable classifier, the proximal training loss, and Adam.

mod loss;
mod model;
mod optim;
mod samples;

pub use loss::{
    forward, mean_nll, nll_loss, proximal_term, total_loss_and_grad, LossAndGrad, LossConfig,
    PROB_FLOOR,
};
pub use model::{Activation, ModelSpec, ParamVector};
pub use optim::{adam_step, AdamState, LearningSchedule, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use samples::Samples;
