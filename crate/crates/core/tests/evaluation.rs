use std::collections::BTreeMap;
use std::sync::Arc;

use fedpc::algorithms::{
    run, train_local, Algorithm, DataSource, LocalTraining, ModelConfig, RunConfig,
};
use fedpc::data::{generate_federation, Federation, FederationConfig};
use fedpc::evaluation::{
    accuracy, build_ledger, metric_i, metric_ii, metric_iii, CommPattern, MetricIIMode,
    MetricsReport, ModelView,
};
use fedpc::numerics::{LossConfig, ModelSpec, ParamVector, Samples};
use fedpc::rng::rng_for;
use fedpc::topology::gossip_schedule;

fn federation(seed: u64, dispersion: f64) -> Federation {
    generate_federation(&FederationConfig {
        num_vehicles: 2,
        drivers_per_vehicle: 4,
        classes: 3,
        feature_dim: 6,
        samples_per_client_per_class: 60,
        driver_dispersion: dispersion,
        seed,
        ..FederationConfig::default()
    })
    .unwrap()
}

fn fit(start: &ParamVector, data: &Samples, seed: u64) -> ParamVector {
    let opts = LocalTraining {
        epochs: 10,
        batch_size: 16,
        learning_rate: 1e-2,
        loss: LossConfig {
            mu: 0.0,
            weight_decay: 0.0,
        },
    };
    train_local(start, start, data, &opts, &mut rng_for(seed, &[]))
        .unwrap()
        .model
}

fn personal_models(fed: &Federation, seed: u64) -> BTreeMap<usize, ParamVector> {
    let spec = Arc::new(ModelSpec::new(vec![6, 8, 3], 0).unwrap());
    let start = ParamVector::glorot(spec, &mut rng_for(seed, &[0]));
    fed.training()
        .map(|c| (c.client_id, fit(&start, &c.train, seed)))
        .collect()
}

#[test]
fn accuracy_by_hand() {
    // Identity logits over two inputs: predicts the larger coordinate.
    let spec = Arc::new(ModelSpec::new(vec![2, 2], 0).unwrap());
    let model = ParamVector::from_values(spec, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
    let mut s = Samples::empty(2);
    s.push(&[2.0, 1.0], 0);
    s.push(&[0.0, 3.0], 1);
    s.push(&[5.0, 0.0], 1);
    s.push(&[1.0, 1.0], 0); // tie goes to class 0
    assert_eq!(accuracy(&model, &s).unwrap(), 0.75);
    assert!(accuracy(&model, &Samples::empty(2)).is_err());
}

#[test]
fn means_are_arithmetic_means_and_accuracies_are_probabilities() {
    let fed = federation(1, 1.0);
    let models = personal_models(&fed, 1);
    let m1 = metric_i(ModelView::Personal(&models), &fed).unwrap();
    let accs: Vec<f64> = m1.per_client.iter().map(|c| c.accuracy).collect();
    assert!(accs.iter().all(|a| (0.0..=1.0).contains(a)));
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!((m1.mean.unwrap() - mean).abs() <= 1e-12);
    assert!(m1.unvisited.is_empty());
}

#[test]
fn metric_ii_counts_ordered_pairs_of_visited_clients() {
    let fed = federation(2, 1.0);
    let mut models = personal_models(&fed, 2);
    for keep in [models.len(), 4, 2] {
        while models.len() > keep {
            let last = *models.keys().next_back().unwrap();
            models.remove(&last);
        }
        let m2 = metric_ii(
            ModelView::Personal(&models),
            &fed,
            MetricIIMode::AllPairs,
            0,
        )
        .unwrap();
        assert_eq!(m2.evaluations, keep * (keep - 1));
        let m1 = metric_i(ModelView::Personal(&models), &fed).unwrap();
        assert_eq!(m1.unvisited.len(), fed.split.training_clients.len() - keep);
        let single = metric_ii(
            ModelView::Personal(&models),
            &fed,
            MetricIIMode::RandomModel,
            3,
        )
        .unwrap();
        assert_eq!(single.evaluations, keep - 1);
    }
}

#[test]
fn evaluation_leaves_models_untouched() {
    let fed = federation(3, 1.0);
    let models = personal_models(&fed, 3);
    let before: Vec<u64> = models.values().map(ParamVector::digest).collect();
    let first = models.values().next().unwrap();
    let digest = first.digest();
    metric_i(ModelView::Personal(&models), &fed).unwrap();
    metric_ii(
        ModelView::Personal(&models),
        &fed,
        MetricIIMode::AllPairs,
        0,
    )
    .unwrap();
    metric_ii(ModelView::Global(first), &fed, MetricIIMode::AllPairs, 0).unwrap();
    let new: Vec<_> = fed.test_clients().collect();
    metric_iii(first, &new, 5, 1e-3).unwrap();
    let after: Vec<u64> = models.values().map(ParamVector::digest).collect();
    assert_eq!(before, after);
    assert_eq!(first.digest(), digest);
}

#[test]
fn metric_iii_curve_shape() {
    let fed = federation(4, 1.0);
    let models = personal_models(&fed, 4);
    let model = models.values().next().unwrap();
    let new: Vec<_> = fed.test_clients().collect();
    let zero = metric_iii(model, &new, 0, 1e-3).unwrap();
    assert!(zero.per_client.iter().all(|c| c.accuracy.len() == 1));
    assert_eq!(zero.mean.len(), 1);
    let five = metric_iii(model, &new, 5, 1e-3).unwrap();
    assert_eq!(five.mean.len(), 6);
    assert_eq!(five.mean[0], zero.mean[0]);
    assert!(metric_iii(model, &new, 3, 0.0).is_err());
}

#[test]
fn new_client_from_a_known_distribution_matches_the_pair_accuracy() {
    // Zero driver dispersion: every driver of a vehicle shares one
    // distribution, so a new client is a fresh draw of a training client's.
    let fed = federation(5, 0.0);
    let models = personal_models(&fed, 5);
    for new in fed.test_clients() {
        let peer = fed
            .training()
            .find(|c| c.vehicle_id == new.vehicle_id)
            .expect("same-vehicle training client");
        let owner = fed
            .training()
            .find(|c| c.client_id != peer.client_id)
            .unwrap();
        let model = &models[&owner.client_id];
        let pair = accuracy(model, &peer.test).unwrap();
        let curve = metric_iii(model, &[new], 0, 1e-3).unwrap();
        assert!(
            (curve.mean[0] - pair).abs() <= 0.1,
            "new client {} vs pair {}",
            curve.mean[0],
            pair
        );
    }
}

#[test]
fn ledger_bytes_are_conserved() {
    let spec = ModelSpec::new(vec![16, 32, 32, 4], 1).unwrap();
    let ids: Vec<usize> = (0..8).collect();
    let schedule = gossip_schedule(&ids, 5, 11).unwrap();
    for pattern in [
        CommPattern::PeerToPeer(&schedule),
        CommPattern::ClientServer {
            rounds: 5,
            clients: 8,
        },
        CommPattern::Isolated { rounds: 5 },
    ] {
        let ledger = build_ledger(pattern, &spec);
        let per_round: u64 = (0..5).map(|r| ledger.round_bytes(r)).sum();
        assert_eq!(ledger.total_bytes(), per_round);
        assert_eq!(
            ledger.payload_bytes_per_model,
            4 * spec.trainable_len() as u64
        );
    }
    let p2p = build_ledger(CommPattern::PeerToPeer(&schedule), &spec);
    assert_eq!(p2p.total_transfers(), 40);
    assert_eq!(
        build_ledger(CommPattern::Isolated { rounds: 5 }, &spec).total_bytes(),
        0
    );
}

#[test]
fn freezing_37_percent_cuts_payload_by_37_percent() {
    // 407 of 1100 scalars sit in the frozen first layer.
    let spec = ModelSpec::new(vec![10, 37, 16, 5], 1).unwrap();
    assert_eq!((spec.frozen_len(), spec.total_params()), (407, 1100));
    let ledger = build_ledger(CommPattern::Isolated { rounds: 1 }, &spec);
    assert_eq!(ledger.full_model_bytes, 4400);
    assert_eq!(
        ledger.payload_bytes_per_model * 100,
        63 * ledger.full_model_bytes
    );
}

#[test]
fn report_round_trips_through_json_and_csv() {
    let cfg = RunConfig {
        algorithm: Algorithm::Fedpc,
        rounds: 2,
        local_epochs: 1,
        batch_size: 32,
        model: ModelConfig {
            hidden: vec![8],
            ..ModelConfig::default()
        },
        data: DataSource::Synthetic(FederationConfig {
            num_vehicles: 2,
            drivers_per_vehicle: 3,
            classes: 3,
            feature_dim: 6,
            samples_per_client_per_class: 20,
            ..FederationConfig::default()
        }),
        ..RunConfig::default()
    };
    let report = run(&cfg).unwrap().report;
    let text = report.to_json().unwrap();
    assert_eq!(MetricsReport::from_json(&text).unwrap(), report);
    let mut csv = Vec::new();
    report.write_rounds_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
}
