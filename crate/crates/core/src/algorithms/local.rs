use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::numerics::{
    adam_step, total_loss_and_grad, AdamState, LossConfig, ParamVector, Samples,
};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTraining {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss: LossConfig,
}

#[derive(Debug, Clone)]
pub struct LocalOutcome {
    pub model: ParamVector,
    /// Optimizer steps taken: `epochs * ceil(n / batch_size)`.
    pub steps: usize,
    /// Mean minibatch NLL over the final epoch (0 when no epoch ran).
    pub nll: f64,
    /// Proximal term of the returned model against the anchor.
    pub proximal: f64,
}

/// One local training session: `epochs` passes over `data` in shuffled
/// minibatches, fresh Adam state, starting from `start` and penalized
/// towards `anchor`.
pub fn train_local(
    start: &ParamVector,
    anchor: &ParamVector,
    data: &Samples,
    opts: &LocalTraining,
    rng: &mut SimRng,
) -> Result<LocalOutcome> {
    if data.is_empty() {
        return Err(Error::config(
            "local training needs a non-empty train split",
        ));
    }
    if opts.batch_size == 0 {
        return Err(Error::config("batch_size must be positive"));
    }
    start.check_compatible(anchor)?;
    let mut model = start.clone();
    let mut state = AdamState::for_params(&model);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut steps = 0;
    let mut nll = 0.0;
    for _ in 0..opts.epochs {
        order.shuffle(rng);
        let mut epoch_nll = 0.0;
        let mut batches = 0;
        for rows in order.chunks(opts.batch_size) {
            let g = total_loss_and_grad(&model, anchor, data, rows, &opts.loss)?;
            adam_step(&mut model, &g.grad, &mut state, opts.learning_rate)?;
            epoch_nll += g.nll;
            batches += 1;
            steps += 1;
        }
        nll = epoch_nll / batches as f64;
    }
    let proximal = 0.5 * opts.loss.mu * model.squared_distance(anchor)?;
    Ok(LocalOutcome {
        model,
        steps,
        nll,
        proximal,
    })
}
