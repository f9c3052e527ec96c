//! Independent reference implementation of the training objective, shared
//! by the gradient tests and the acceptance suite.

use std::sync::Arc;

use fedpc::numerics::{total_loss_and_grad, LossConfig, ModelSpec, ParamVector, Samples};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Plain nested-loop MLP forward pass, ReLU hidden layers, softmax head.
pub fn naive_probs(sizes: &[usize], w: &[f64], x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    let mut off = 0;
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let mut z = vec![0.0; n_out];
        for o in 0..n_out {
            let mut s = w[off + n_in * n_out + o];
            for i in 0..n_in {
                s += w[off + o * n_in + i] * a[i];
            }
            z[o] = s;
        }
        off += n_in * n_out + n_out;
        if l + 2 < sizes.len() {
            a = z
                .into_iter()
                .map(|v| if v > 0.0 { v } else { 0.0 })
                .collect();
        } else {
            let m = z.iter().cloned().fold(f64::MIN, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            a = e.into_iter().map(|v| v / s).collect();
        }
    }
    a
}

/// Mean NLL + (mu/2)||w - anchor||^2 + (wd/2)||w_trainable||^2.
#[allow(clippy::too_many_arguments)]
pub fn objective(
    sizes: &[usize],
    frozen: usize,
    w: &[f64],
    anchor: &[f64],
    xs: &[Vec<f64>],
    ys: &[usize],
    mu: f64,
    wd: f64,
) -> f64 {
    let nll: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| -naive_probs(sizes, w, x)[y].ln())
        .sum::<f64>()
        / xs.len() as f64;
    let prox: f64 = w.iter().zip(anchor).map(|(a, b)| (a - b) * (a - b)).sum();
    let l2: f64 = w[frozen..].iter().map(|v| v * v).sum();
    nll + 0.5 * mu * prox + 0.5 * wd * l2
}

pub struct Draw {
    pub sizes: Vec<usize>,
    pub frozen_layers: usize,
    pub params: Vec<f64>,
    pub anchor: Vec<f64>,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<usize>,
    pub mu: f64,
    pub wd: f64,
}

pub fn draw(rng: &mut ChaCha8Rng, max_params: usize) -> Draw {
    loop {
        let hidden = rng.gen_range(0..=2);
        let mut sizes = vec![rng.gen_range(1..=4)];
        for _ in 0..hidden {
            sizes.push(rng.gen_range(1..=5));
        }
        sizes.push(rng.gen_range(2..=4));
        let spec = ModelSpec::new(sizes.clone(), 0).unwrap();
        let n = spec.total_params();
        if n > max_params {
            continue;
        }
        let frozen_layers = rng.gen_range(0..spec.num_layers());
        let frozen_len = ModelSpec::new(sizes.clone(), frozen_layers)
            .unwrap()
            .frozen_len();
        let params: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let anchor: Vec<f64> = params
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                if i < frozen_len {
                    p
                } else {
                    p + rng.gen_range(-0.5..0.5)
                }
            })
            .collect();
        let xs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..sizes[0]).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let classes = *sizes.last().unwrap();
        let ys = (0..4).map(|_| rng.gen_range(0..classes)).collect();
        return Draw {
            sizes,
            frozen_layers,
            params,
            anchor,
            xs,
            ys,
            mu: rng.gen_range(0.0..2.0),
            wd: rng.gen_range(0.0..0.1),
        };
    }
}

/// Largest per-component relative error |a - n| / max(|a|, |n|), with
/// components where both sides are below 1e-7 compared absolutely.
pub fn check_draw(d: &Draw) -> (f64, bool) {
    let spec = Arc::new(ModelSpec::new(d.sizes.clone(), d.frozen_layers).unwrap());
    let p = ParamVector::from_values(Arc::clone(&spec), d.params.clone()).unwrap();
    let a = ParamVector::from_values(Arc::clone(&spec), d.anchor.clone()).unwrap();
    let mut samples = Samples::empty(d.sizes[0]);
    for (x, &y) in d.xs.iter().zip(&d.ys) {
        samples.push(x, y);
    }
    let cfg = LossConfig {
        mu: d.mu,
        weight_decay: d.wd,
    };
    let rows: Vec<usize> = (0..samples.len()).collect();
    let g = total_loss_and_grad(&p, &a, &samples, &rows, &cfg).unwrap();
    let frozen = spec.frozen_len();
    let frozen_zero = g.grad[..frozen].iter().all(|&v| v == 0.0);

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in frozen..d.params.len() {
        let mut plus = d.params.clone();
        let mut minus = d.params.clone();
        plus[i] += h;
        minus[i] -= h;
        let f = |w: &[f64]| objective(&d.sizes, frozen, w, &d.anchor, &d.xs, &d.ys, d.mu, d.wd);
        let numeric = (f(&plus) - f(&minus)) / (2.0 * h);
        let analytic = g.grad[i];
        let scale = analytic.abs().max(numeric.abs());
        let err = if scale < 1e-7 {
            (analytic - numeric).abs()
        } else {
            (analytic - numeric).abs() / scale
        };
        worst = worst.max(err);
    }
    (worst, frozen_zero)
}
