use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{ClientDataset, Federation};
use crate::error::{Error, Result};
use crate::numerics::{forward, total_loss_and_grad, LossConfig, ParamVector, Samples};
use crate::rng::{rng_for, stream};

/// Top-1 accuracy; ties go to the lowest class index.
pub fn accuracy(model: &ParamVector, samples: &Samples) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Evaluation(
            "accuracy of an empty evaluation set".into(),
        ));
    }
    let mut correct = 0usize;
    for i in 0..samples.len() {
        let probs = forward(model, samples.row(i))?;
        let mut best = 0;
        for (c, &p) in probs.iter().enumerate().skip(1) {
            if p > probs[best] {
                best = c;
            }
        }
        if best == samples.label(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Which model each training client is evaluated with.
#[derive(Debug, Clone, Copy)]
pub enum ModelView<'a> {
    /// Personalized models of visited clients (P2P and independent runs).
    Personal(&'a BTreeMap<usize, ParamVector>),
    /// One server model shared by everyone (C2S runs).
    Global(&'a ParamVector),
}

impl<'a> ModelView<'a> {
    fn model_for(&self, client: usize) -> Option<&'a ParamVector> {
        match *self {
            ModelView::Personal(map) => map.get(&client),
            ModelView::Global(g) => Some(g),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientAccuracy {
    pub client_id: usize,
    pub accuracy: f64,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricI {
    pub per_client: Vec<ClientAccuracy>,
    pub mean: Option<f64>,
    pub unvisited: Vec<usize>,
}

/// Each training client's model on its own local test split.
pub fn metric_i(view: ModelView<'_>, federation: &Federation) -> Result<MetricI> {
    let mut per_client = Vec::new();
    let mut unvisited = Vec::new();
    for client in federation.training() {
        match view.model_for(client.client_id) {
            Some(model) => per_client.push(ClientAccuracy {
                client_id: client.client_id,
                accuracy: accuracy(model, &client.test)?,
            }),
            None => unvisited.push(client.client_id),
        }
    }
    Ok(MetricI {
        mean: mean(per_client.iter().map(|c| c.accuracy)),
        per_client,
        unvisited,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MetricIIMode {
    /// Mean over every ordered pair of distinct visited clients.
    #[default]
    AllPairs,
    /// One seeded-random visited client's model on every other client.
    RandomModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricII {
    pub mean: Option<f64>,
    /// Number of (model, test split) evaluations averaged into `mean`.
    pub evaluations: usize,
    pub same_vehicle_mean: Option<f64>,
    pub cross_vehicle_mean: Option<f64>,
}

/// Cross-client generalization. For a shared global model this is the
/// model's mean accuracy over all training clients' test splits.
pub fn metric_ii(
    view: ModelView<'_>,
    federation: &Federation,
    mode: MetricIIMode,
    seed: u64,
) -> Result<MetricII> {
    if let ModelView::Global(g) = view {
        let accs = federation
            .training()
            .map(|c| accuracy(g, &c.test))
            .collect::<Result<Vec<_>>>()?;
        return Ok(MetricII {
            evaluations: accs.len(),
            mean: mean(accs),
            same_vehicle_mean: None,
            cross_vehicle_mean: None,
        });
    }

    let visited: Vec<&ClientDataset> = federation
        .training()
        .filter(|c| view.model_for(c.client_id).is_some())
        .collect();
    let holders: Vec<&ClientDataset> = match mode {
        MetricIIMode::AllPairs => visited.clone(),
        MetricIIMode::RandomModel if visited.is_empty() => Vec::new(),
        MetricIIMode::RandomModel => {
            use rand::Rng;
            let pick = rng_for(seed, &[stream::METRIC_PICK]).gen_range(0..visited.len());
            vec![visited[pick]]
        }
    };

    let mut all = Vec::new();
    let mut same = Vec::new();
    let mut cross = Vec::new();
    for owner in &holders {
        let model = view.model_for(owner.client_id).expect("visited");
        for other in &visited {
            if other.client_id == owner.client_id {
                continue;
            }
            let acc = accuracy(model, &other.test)?;
            all.push(acc);
            if other.vehicle_id == owner.vehicle_id {
                same.push(acc);
            } else {
                cross.push(acc);
            }
        }
    }
    Ok(MetricII {
        evaluations: all.len(),
        mean: mean(all),
        same_vehicle_mean: mean(same),
        cross_vehicle_mean: mean(cross),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientCurve {
    pub client_id: usize,
    /// Accuracy after k = 0..=K personalization steps.
    pub accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewClientCurve {
    pub steps: usize,
    pub learning_rate: f64,
    pub per_client: Vec<ClientCurve>,
    pub mean: Vec<f64>,
}

/// New-client accuracy after `k` full-batch gradient-descent steps on the
/// new client's train split, for k = 0..=`steps`. `model` is not modified.
pub fn metric_iii(
    model: &ParamVector,
    new_clients: &[&ClientDataset],
    steps: usize,
    learning_rate: f64,
) -> Result<NewClientCurve> {
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::config(format!(
            "personalization learning rate must be positive, got {learning_rate}"
        )));
    }
    let plain = LossConfig {
        mu: 0.0,
        weight_decay: 0.0,
    };
    let mut per_client = Vec::with_capacity(new_clients.len());
    for client in new_clients {
        let mut local = model.clone();
        let rows: Vec<usize> = (0..client.train.len()).collect();
        let mut curve = Vec::with_capacity(steps + 1);
        curve.push(accuracy(&local, &client.test)?);
        for _ in 0..steps {
            let g = total_loss_and_grad(&local, model, &client.train, &rows, &plain)?;
            if let Some(index) = g.grad.iter().position(|v| !v.is_finite()) {
                return Err(Error::NumericFault { index });
            }
            let start = local.frozen_len();
            for (w, d) in local.trainable_mut().iter_mut().zip(&g.grad[start..]) {
                *w -= learning_rate * d;
            }
            curve.push(accuracy(&local, &client.test)?);
        }
        per_client.push(ClientCurve {
            client_id: client.client_id,
            accuracy: curve,
        });
    }
    let mean = (0..=steps)
        .map(|k| mean(per_client.iter().map(|c| c.accuracy[k])).unwrap_or(0.0))
        .collect();
    Ok(NewClientCurve {
        steps,
        learning_rate,
        per_client,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ModelSpec;
    use std::sync::Arc;

    fn linear(w: Vec<f64>) -> ParamVector {
        let spec = Arc::new(ModelSpec::new(vec![2, 2], 0).unwrap());
        ParamVector::from_values(spec, w).unwrap()
    }

    fn separable() -> Samples {
        let mut s = Samples::empty(2);
        s.push(&[1.0, 0.0], 0);
        s.push(&[2.0, 0.1], 0);
        s.push(&[0.0, 1.0], 1);
        s.push(&[0.2, 3.0], 1);
        s
    }

    #[test]
    fn uniform_model_ties_go_to_class_zero() {
        let spec = Arc::new(ModelSpec::new(vec![2, 4], 0).unwrap());
        let zero = ParamVector::zeros(spec);
        let mut s = Samples::empty(2);
        for (i, l) in [0, 1, 2, 3, 0, 1, 2, 3].into_iter().enumerate() {
            s.push(&[i as f64, 1.0], l);
        }
        assert_eq!(accuracy(&zero, &s).unwrap(), 0.25);
        let mut skew = Samples::empty(2);
        for l in [0, 0, 0, 1] {
            skew.push(&[1.0, 1.0], l);
        }
        assert_eq!(accuracy(&zero, &skew).unwrap(), 0.75);
    }

    #[test]
    fn perfect_and_adversarial() {
        let perfect = linear(vec![5.0, 0.0, 0.0, 5.0, 0.0, 0.0]);
        let s = separable();
        assert_eq!(accuracy(&perfect, &s).unwrap(), 1.0);
        let mut flipped = Samples::empty(2);
        for i in 0..s.len() {
            flipped.push(s.row(i), 1 - s.label(i));
        }
        assert_eq!(accuracy(&perfect, &flipped).unwrap(), 0.0);
        assert!(accuracy(&perfect, &Samples::empty(2)).is_err());
    }

    #[test]
    fn zero_steps_gives_single_point() {
        let m = linear(vec![5.0, 0.0, 0.0, 5.0, 0.0, 0.0]);
        let c = ClientDataset {
            client_id: 4,
            vehicle_id: 0,
            train: separable(),
            test: separable(),
        };
        let curve = metric_iii(&m, &[&c], 0, 1e-3).unwrap();
        assert_eq!(curve.mean, vec![1.0]);
        let curve = metric_iii(&m, &[&c], 3, 1e-3).unwrap();
        assert_eq!(curve.mean.len(), 4);
        assert_eq!(curve.per_client[0].accuracy.len(), 4);
        assert!(metric_iii(&m, &[&c], 3, 0.0).is_err());
    }
}
