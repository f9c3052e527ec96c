use rand::seq::SliceRandom;

use crate::data::{ClientDataset, ClientPool, FederationSplit};
use crate::error::{Error, Result};
use crate::numerics::Samples;
use crate::rng::{rng_for, stream};

/// Size of the 0.2 side of a split: `floor(n / 5)`, at least 1.
pub fn test_count(n: usize) -> usize {
    (n / 5).max(1)
}

/// Client-level 0.8/0.2 partition. Both lists come back sorted.
pub fn split_clients(client_ids: &[usize], seed: u64) -> Result<FederationSplit> {
    if client_ids.len() < 2 {
        return Err(Error::config(format!(
            "need at least 2 clients to split, got {}",
            client_ids.len()
        )));
    }
    let mut sorted = client_ids.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config("duplicate client ids"));
    }
    let mut shuffled = sorted;
    shuffled.shuffle(&mut rng_for(seed, &[stream::CLIENT_SPLIT]));
    let n_test = test_count(shuffled.len());
    let mut test_clients = shuffled[..n_test].to_vec();
    let mut training_clients = shuffled[n_test..].to_vec();
    test_clients.sort_unstable();
    training_clients.sort_unstable();
    Ok(FederationSplit {
        training_clients,
        test_clients,
    })
}

/// Stratified 0.8/0.2 split of one client's samples.
///
/// Rows of each class are shuffled, then classes are interleaved
/// round-robin and the tail of that order becomes the test split. With at
/// least two rows per class every class keeps a training row. Both splits
/// keep the original row order.
pub fn split_samples(samples: &Samples, seed: u64) -> Result<(Samples, Samples)> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::config(format!(
            "need at least 2 samples to split, got {n}"
        )));
    }
    let classes = samples.labels().iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in samples.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = rng_for(seed, &[stream::SAMPLE_SPLIT]);
    for rows in &mut by_class {
        rows.shuffle(&mut rng);
    }
    let depth = by_class.iter().map(Vec::len).max().unwrap_or(0);
    let order: Vec<usize> = (0..depth)
        .flat_map(|k| by_class.iter().filter_map(move |rows| rows.get(k).copied()))
        .collect();
    let n_test = test_count(n);
    let mut train_rows = order[..n - n_test].to_vec();
    let mut test_rows = order[n - n_test..].to_vec();
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok((samples.select(&train_rows), samples.select(&test_rows)))
}

/// Client-level split, then a per-client sample split, all from `seed`.
pub fn double_split(
    pools: Vec<ClientPool>,
    seed: u64,
) -> Result<(FederationSplit, Vec<ClientDataset>)> {
    let ids: Vec<usize> = pools.iter().map(|p| p.client_id).collect();
    let split = split_clients(&ids, seed)?;
    let clients = pools
        .into_iter()
        .map(|p| {
            let client_seed = crate::rng::derive_seed(seed, &[p.client_id as u64]);
            let (train, test) = split_samples(&p.samples, client_seed)?;
            Ok(ClientDataset {
                client_id: p.client_id,
                vehicle_id: p.vehicle_id,
                train,
                test,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((split, clients))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_split_sizes() {
        for (n, train, test) in [(26, 21, 5), (35, 28, 7), (2, 1, 1), (12, 10, 2)] {
            let ids: Vec<usize> = (0..n).collect();
            let s = split_clients(&ids, 9).unwrap();
            assert_eq!(s.training_clients.len(), train, "n = {n}");
            assert_eq!(s.test_clients.len(), test, "n = {n}");
        }
    }

    #[test]
    fn client_split_rejects_single_client() {
        assert!(matches!(split_clients(&[3], 0), Err(Error::Config(_))));
    }

    #[test]
    fn sample_split_keeps_every_class_in_train() {
        let mut s = Samples::empty(1);
        for i in 0..10 {
            s.push(&[i as f64], i % 5);
        }
        let (train, test) = split_samples(&s, 4).unwrap();
        assert_eq!(test.len(), 2);
        assert_eq!(train.len(), 8);
        assert!(train.class_counts(5).iter().all(|&c| c >= 1));
        let mut all: Vec<f64> = train
            .features()
            .iter()
            .chain(test.features())
            .copied()
            .collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());
    }
}
