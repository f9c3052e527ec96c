use crate::error::{Error, Result};
use crate::numerics::model::ParamVector;
use crate::numerics::samples::Samples;

/// Smallest probability fed to the logarithm in [`nll_loss`].
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossConfig {
    /// Proximal penalty factor.
    pub mu: f64,
    /// Coupled L2 coefficient added to the gradient of trainable scalars.
    pub weight_decay: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            mu: 1.0,
            weight_decay: 1e-5,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::config(format!(
                "mu must be a finite value >= 0, got {}",
                self.mu
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config(format!(
                "weight_decay must be a finite value >= 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Per-layer values kept from a forward pass for backpropagation.
struct Trace {
    /// `inputs[l]` is the input to layer `l`; the last entry holds the
    /// softmax output.
    activations: Vec<Vec<f64>>,
    /// Pre-activations of hidden layers.
    pre: Vec<Vec<f64>>,
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

fn forward_trace(params: &ParamVector, x: &[f64]) -> Trace {
    let spec = params.spec();
    let layers = spec.num_layers();
    let mut activations = Vec::with_capacity(layers + 1);
    let mut pre = Vec::with_capacity(layers.saturating_sub(1));
    activations.push(x.to_vec());
    for l in 0..layers {
        let (w, b) = params.layer(l);
        let fan_in = spec.layer_sizes[l];
        let input = activations.last().unwrap();
        let mut z: Vec<f64> = b
            .iter()
            .enumerate()
            .map(|(o, &bias)| {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                bias + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        if l + 1 == layers {
            softmax_in_place(&mut z);
            activations.push(z);
        } else {
            let a = z.iter().map(|v| v.max(0.0)).collect();
            pre.push(z);
            activations.push(a);
        }
    }
    Trace { activations, pre }
}

/// Class probabilities for one feature vector.
pub fn forward(params: &ParamVector, features: &[f64]) -> Result<Vec<f64>> {
    let expected = params.spec().input_dim();
    if features.len() != expected {
        return Err(Error::InputShape {
            expected,
            actual: features.len(),
        });
    }
    Ok(forward_trace(params, features).activations.pop().unwrap())
}

/// Negative log-likelihood of `label`, with probabilities floored at
/// [`PROB_FLOOR`].
pub fn nll_loss(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or_else(|| {
        Error::Precondition(format!(
            "label {label} out of range for {} classes",
            probs.len()
        ))
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Mean NLL of a model over a sample set.
pub fn mean_nll(params: &ParamVector, samples: &Samples) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Precondition("empty batch".into()));
    }
    let mut total = 0.0;
    for i in 0..samples.len() {
        total += nll_loss(&forward(params, samples.row(i))?, samples.label(i))?;
    }
    Ok(total / samples.len() as f64)
}

/// `(mu / 2) * ||w - w_prev||^2`
pub fn proximal_term(w: &ParamVector, w_prev: &ParamVector, mu: f64) -> Result<f64> {
    Ok(0.5 * mu * w.squared_distance(w_prev)?)
}

#[derive(Debug, Clone)]
pub struct LossAndGrad {
    pub nll: f64,
    pub proximal: f64,
    /// `nll + proximal`; the weight-decay term contributes to `grad` only.
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Mean NLL plus proximal term over `rows` of `samples`, with the gradient
/// restricted to trainable scalars. Frozen entries of `grad` are exactly 0.
pub fn total_loss_and_grad(
    params: &ParamVector,
    anchor: &ParamVector,
    samples: &Samples,
    rows: &[usize],
    cfg: &LossConfig,
) -> Result<LossAndGrad> {
    if rows.is_empty() {
        return Err(Error::Precondition("empty batch".into()));
    }
    params.check_compatible(anchor)?;
    let spec = params.spec();
    if samples.dim() != spec.input_dim() {
        return Err(Error::InputShape {
            expected: spec.input_dim(),
            actual: samples.dim(),
        });
    }
    let classes = spec.num_classes();
    let layers = spec.num_layers();
    let first_trainable = spec.frozen_layers;
    let mut grad = vec![0.0; params.len()];
    let mut nll = 0.0;

    for &r in rows {
        let label = samples.label(r);
        if label >= classes {
            return Err(Error::Precondition(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        let trace = forward_trace(params, samples.row(r));
        let probs = &trace.activations[layers];
        nll += nll_loss(probs, label)?;

        let mut delta: Vec<f64> = probs.clone();
        delta[label] -= 1.0;
        for l in (first_trainable..layers).rev() {
            let fan_in = spec.layer_sizes[l];
            let off = spec.layer_offset(l);
            let input = &trace.activations[l];
            let (gw, gb) =
                grad[off..off + spec.layer_param_count(l)].split_at_mut(fan_in * delta.len());
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (g, &a) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(input) {
                    *g += d * a;
                }
                gb[o] += d;
            }
            if l > first_trainable {
                let (w, _) = params.layer(l);
                let pre = &trace.pre[l - 1];
                let mut back = vec![0.0; fan_in];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (acc, &wv) in back.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                        *acc += d * wv;
                    }
                }
                for (b, &z) in back.iter_mut().zip(pre) {
                    if z <= 0.0 {
                        *b = 0.0;
                    }
                }
                delta = back;
            }
        }
    }

    let n = rows.len() as f64;
    nll /= n;
    let frozen = spec.frozen_len();
    grad[frozen..].iter_mut().for_each(|g| *g /= n);

    let proximal = if cfg.mu != 0.0 {
        proximal_term(params, anchor, cfg.mu)?
    } else {
        0.0
    };
    if cfg.mu != 0.0 || cfg.weight_decay != 0.0 {
        let w = params.trainable();
        let a = anchor.trainable();
        for ((g, &wi), &ai) in grad[frozen..].iter_mut().zip(w).zip(a) {
            *g += cfg.mu * (wi - ai) + cfg.weight_decay * wi;
        }
    }

    Ok(LossAndGrad {
        nll,
        proximal,
        loss: nll + proximal,
        grad,
    })
}
