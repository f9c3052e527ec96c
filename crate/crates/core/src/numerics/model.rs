use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

/// Shape of a fully connected classifier.
///
/// `layer_sizes` lists the input width, every hidden width, and the class
/// count. The first `frozen_layers` weight layers never train and are left
/// out of transmitted payloads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub layer_sizes: Vec<usize>,
    pub frozen_layers: usize,
    #[serde(default)]
    pub activation: Activation,
}

impl ModelSpec {
    pub fn new(layer_sizes: Vec<usize>, frozen_layers: usize) -> Result<Self> {
        let spec = ModelSpec {
            layer_sizes,
            frozen_layers,
            activation: Activation::Relu,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::config(
                "layer_sizes needs at least an input and an output width",
            ));
        }
        if let Some(pos) = self.layer_sizes.iter().position(|&w| w == 0) {
            return Err(Error::config(format!(
                "layer_sizes[{pos}] must be at least 1"
            )));
        }
        if self.frozen_layers >= self.num_layers() {
            return Err(Error::config(format!(
                "frozen_layers = {} leaves no trainable layer out of {}",
                self.frozen_layers,
                self.num_layers()
            )));
        }
        Ok(())
    }

    /// Number of weight layers.
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn layer_param_count(&self, layer: usize) -> usize {
        let (fan_in, fan_out) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
        fan_in * fan_out + fan_out
    }

    /// Offset of `layer`'s first weight in the flat parameter array.
    pub fn layer_offset(&self, layer: usize) -> usize {
        (0..layer).map(|l| self.layer_param_count(l)).sum()
    }

    pub fn total_params(&self) -> usize {
        self.layer_offset(self.num_layers())
    }

    pub fn frozen_len(&self) -> usize {
        self.layer_offset(self.frozen_layers)
    }

    pub fn trainable_len(&self) -> usize {
        self.total_params() - self.frozen_len()
    }
}

/// Flat model parameters in canonical order: for each layer, the weight
/// matrix row-major as `[out][in]`, then the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    spec: Arc<ModelSpec>,
}

impl ParamVector {
    pub fn zeros(spec: Arc<ModelSpec>) -> Self {
        ParamVector {
            values: vec![0.0; spec.total_params()],
            spec,
        }
    }

    pub fn from_values(spec: Arc<ModelSpec>, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.total_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                spec.total_params(),
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericFault { index });
        }
        Ok(ParamVector { values, spec })
    }

    /// Uniform Glorot initialization, biases zero.
    pub fn glorot<R: Rng + ?Sized>(spec: Arc<ModelSpec>, rng: &mut R) -> Self {
        let mut values = Vec::with_capacity(spec.total_params());
        for layer in 0..spec.num_layers() {
            let (fan_in, fan_out) = (spec.layer_sizes[layer], spec.layer_sizes[layer + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            values.extend((0..fan_in * fan_out).map(|_| rng.gen_range(-limit..=limit)));
            values.extend(std::iter::repeat_n(0.0, fan_out));
        }
        ParamVector { values, spec }
    }

    /// Re-draw every layer from `first_layer` onward with Glorot init.
    pub fn reinit_from_layer<R: Rng + ?Sized>(&mut self, first_layer: usize, rng: &mut R) {
        let spec = Arc::clone(&self.spec);
        for layer in first_layer..spec.num_layers() {
            let (fan_in, fan_out) = (spec.layer_sizes[layer], spec.layer_sizes[layer + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let off = spec.layer_offset(layer);
            for w in &mut self.values[off..off + fan_in * fan_out] {
                *w = rng.gen_range(-limit..=limit);
            }
            for b in &mut self.values[off + fan_in * fan_out..off + spec.layer_param_count(layer)] {
                *b = 0.0;
            }
        }
    }

    pub fn spec(&self) -> &Arc<ModelSpec> {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn frozen_len(&self) -> usize {
        self.spec.frozen_len()
    }

    pub fn frozen(&self) -> &[f64] {
        &self.values[..self.frozen_len()]
    }

    pub fn trainable(&self) -> &[f64] {
        &self.values[self.frozen_len()..]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub(crate) fn trainable_mut(&mut self) -> &mut [f64] {
        let start = self.frozen_len();
        &mut self.values[start..]
    }

    /// Weight matrix and bias of one layer.
    pub(crate) fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let off = self.spec.layer_offset(layer);
        let n_w = self.spec.layer_sizes[layer] * self.spec.layer_sizes[layer + 1];
        let n = self.spec.layer_param_count(layer);
        let block = &self.values[off..off + n];
        block.split_at(n_w)
    }

    pub fn squared_distance(&self, other: &ParamVector) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    pub fn distance(&self, other: &ParamVector) -> Result<f64> {
        self.squared_distance(other).map(f64::sqrt)
    }

    pub(crate) fn check_compatible(&self, other: &ParamVector) -> Result<()> {
        if self.values.len() != other.values.len() || *self.spec != *other.spec {
            return Err(Error::Shape(format!(
                "parameter vectors differ in shape ({} vs {} scalars)",
                self.values.len(),
                other.values.len()
            )));
        }
        Ok(())
    }

    /// FNV-1a over the IEEE-754 bit patterns; equal digests mean
    /// bit-identical parameters with overwhelming probability.
    pub fn digest(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01B3;
        self.values.iter().fold(0xCBF2_9CE4_8422_2325, |h, v| {
            v.to_bits()
                .to_le_bytes()
                .iter()
                .fold(h, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
        })
    }
}
