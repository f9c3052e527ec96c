use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{double_split, ClientPool, Federation};
use crate::error::{Error, Result};
use crate::numerics::Samples;
use crate::rng::{derive_seed, rng_for, stream, SimRng};

fn default_class_separation() -> f64 {
    6.0
}

/// Shape of a synthetic federation: `num_vehicles` clusters of clients
/// (system heterogeneity), each holding `drivers_per_vehicle` clients with
/// their own offset (statistical heterogeneity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederationConfig {
    pub num_vehicles: usize,
    pub drivers_per_vehicle: usize,
    pub classes: usize,
    pub feature_dim: usize,
    pub samples_per_client_per_class: usize,
    /// Pairwise distance between vehicle centroids.
    pub cluster_separation: f64,
    /// Norm of each driver's offset from its vehicle centroid.
    pub driver_dispersion: f64,
    /// Pairwise distance between the shared class means.
    #[serde(default = "default_class_separation")]
    pub class_separation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for FederationConfig {
    fn default() -> Self {
        FederationConfig {
            num_vehicles: 3,
            drivers_per_vehicle: 4,
            classes: 4,
            feature_dim: 16,
            samples_per_client_per_class: 250,
            cluster_separation: 6.0,
            driver_dispersion: 1.0,
            class_separation: default_class_separation(),
            noise_sigma: 0.5,
            seed: 0,
        }
    }
}

impl FederationConfig {
    pub fn num_clients(&self) -> usize {
        self.num_vehicles * self.drivers_per_vehicle
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_vehicles", self.num_vehicles),
            ("drivers_per_vehicle", self.drivers_per_vehicle),
            ("classes", self.classes),
            ("feature_dim", self.feature_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if self.num_clients() < 2 {
            return Err(Error::config(
                "num_vehicles * drivers_per_vehicle must be at least 2",
            ));
        }
        if self.samples_per_client_per_class < 2 {
            return Err(Error::config(
                "samples_per_client_per_class must be at least 2 so every class survives the local split",
            ));
        }
        if !(self.cluster_separation > 0.0 && self.cluster_separation.is_finite()) {
            return Err(Error::config("cluster_separation must be positive"));
        }
        if !(self.driver_dispersion >= 0.0 && self.driver_dispersion < self.cluster_separation) {
            return Err(Error::config(
                "driver_dispersion must satisfy 0 <= driver_dispersion < cluster_separation",
            ));
        }
        if !(self.class_separation > 0.0 && self.class_separation.is_finite()) {
            return Err(Error::config("class_separation must be positive"));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("noise_sigma must be positive"));
        }
        if self.feature_dim < self.num_vehicles.max(self.classes) {
            return Err(Error::config(format!(
                "feature_dim = {} is too small to hold {} equidistant vehicle centroids and {} class means",
                self.feature_dim, self.num_vehicles, self.classes
            )));
        }
        Ok(())
    }
}

fn gaussian_vec(rng: &mut SimRng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `count` orthonormal vectors by Gram-Schmidt over Gaussian draws.
fn orthonormal(rng: &mut SimRng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = gaussian_vec(rng, dim);
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let n = norm(&v);
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    basis
}

/// Scale orthonormal vectors so every pair sits `distance` apart.
fn equidistant(rng: &mut SimRng, count: usize, dim: usize, distance: f64) -> Vec<Vec<f64>> {
    let scale = distance / std::f64::consts::SQRT_2;
    orthonormal(rng, count, dim)
        .into_iter()
        .map(|v| v.into_iter().map(|x| x * scale).collect())
        .collect()
}

/// Draw every client's sample pool. Client ids run vehicle-major:
/// client `v * drivers_per_vehicle + d` is driver `d` of vehicle `v`.
pub fn generate_pools(cfg: &FederationConfig) -> Result<Vec<ClientPool>> {
    cfg.validate()?;
    let dim = cfg.feature_dim;
    let mut rng = rng_for(cfg.seed, &[stream::FEDERATION]);
    let vehicle_centroids = equidistant(&mut rng, cfg.num_vehicles, dim, cfg.cluster_separation);
    let class_means = equidistant(&mut rng, cfg.classes, dim, cfg.class_separation);

    let mut pools = Vec::with_capacity(cfg.num_clients());
    for (v, centroid) in vehicle_centroids.iter().enumerate() {
        for d in 0..cfg.drivers_per_vehicle {
            let client_id = v * cfg.drivers_per_vehicle + d;
            let mut crng = rng_for(
                derive_seed(cfg.seed, &[stream::FEDERATION]),
                &[client_id as u64],
            );
            let mut offset = gaussian_vec(&mut crng, dim);
            let n = norm(&offset);
            offset
                .iter_mut()
                .for_each(|x| *x *= cfg.driver_dispersion / n);

            let mut samples = Samples::empty(dim);
            let mut row = vec![0.0; dim];
            for _ in 0..cfg.samples_per_client_per_class {
                for (c, mean) in class_means.iter().enumerate() {
                    for j in 0..dim {
                        let noise: f64 = crng.sample(StandardNormal);
                        row[j] = centroid[j] + offset[j] + mean[j] + cfg.noise_sigma * noise;
                    }
                    samples.push(&row, c);
                }
            }
            pools.push(ClientPool {
                client_id,
                vehicle_id: v,
                samples,
            });
        }
    }
    Ok(pools)
}

/// Generate the federation and apply the double split, all seeded by
/// `cfg.seed`.
pub fn generate_federation(cfg: &FederationConfig) -> Result<Federation> {
    let pools = generate_pools(cfg)?;
    let (split, clients) = double_split(pools, cfg.seed)?;
    Ok(Federation {
        clients,
        split,
        classes: cfg.classes,
        feature_dim: cfg.feature_dim,
    })
}
