//! Fully connected ELU network with hand-written backprop and ADAM.

mod adam;
mod surrogate;

pub use adam::{adam_step, AdamState};
pub use surrogate::{OutputScaling, Surrogate};

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HIDDEN_WIDTH: usize = 40;
pub const HIDDEN_LAYERS: usize = 3;

/// Weights and biases stored in one flat vector, layer after layer, each as
/// a row-major `out x in` weight block followed by the `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    /// Layer widths, input first.
    pub sizes: Vec<usize>,
    pub data: Vec<f64>,
}

/// Activations recorded by [`MlpParams::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of every layer (`inputs[0]` is the network input).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of every layer.
    pre: Vec<Vec<f64>>,
}

pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpParams {
    /// `input → 40 → 40 → 40 → output`.
    pub fn standard_sizes(input: usize, output: usize) -> Vec<usize> {
        let mut sizes = vec![input];
        sizes.extend(std::iter::repeat_n(HIDDEN_WIDTH, HIDDEN_LAYERS));
        sizes.push(output);
        sizes
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Dimension(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(MlpParams {
            sizes: sizes.to_vec(),
            data: vec![0.0; param_count(sizes)],
        })
    }

    /// Uniform He initialization `U(±sqrt(6 / fan_in))`, zero biases.
    pub fn he_uniform(sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        let mut params = Self::zeros(sizes)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            for v in &mut params.data[offset..offset + fan_in * fan_out] {
                *v = rng.random_range(-limit..limit);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(params)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Offsets of the weight block and bias vector of layer `l`.
    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let start = param_count(&self.sizes[..=l]);
        (start, start + self.sizes[l] * self.sizes[l + 1])
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        let (w, b) = self.layer_offsets(l);
        &self.data[w..b]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        let (_, b) = self.layer_offsets(l);
        &self.data[b..b + self.sizes[l + 1]]
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.len() < 2 || self.data.len() != param_count(&self.sizes) {
            return Err(Error::Dimension(format!(
                "parameter vector of length {} does not match layer sizes {:?}",
                self.data.len(),
                self.sizes
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(
                "non-finite network parameter".into(),
            ));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "network input has length {}, expected {}",
                input.len(),
                self.input_dim()
            )));
        }
        let last = self.n_layers() - 1;
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.n_layers()),
            pre: Vec::with_capacity(self.n_layers()),
        };
        let mut act = input.to_vec();
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = self.weights(l);
            let b = self.biases(l);
            let pre: Vec<f64> = (0..n_out)
                .map(|o| {
                    b[o] + w[o * n_in..(o + 1) * n_in]
                        .iter()
                        .zip(&act)
                        .map(|(w, a)| w * a)
                        .sum::<f64>()
                })
                .collect();
            let next = if l == last {
                pre.clone()
            } else {
                pre.iter().map(|&v| elu(v)).collect()
            };
            cache.inputs.push(act);
            cache.pre.push(pre);
            act = next;
        }
        Ok((act, cache))
    }

    /// Gradient of `⟨grad_out, forward(input)⟩` with respect to `data`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64]) -> Result<Vec<f64>> {
        if cache.inputs.len() != self.n_layers()
            || cache
                .inputs
                .iter()
                .zip(&self.sizes)
                .any(|(a, &s)| a.len() != s)
            || grad_out.len() != self.output_dim()
        {
            return Err(Error::Dimension(
                "forward cache does not match the network".into(),
            ));
        }
        let mut grads = vec![0.0; self.len()];
        let mut delta = grad_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if l != self.n_layers() - 1 {
                for (d, &p) in delta.iter_mut().zip(&cache.pre[l]) {
                    *d *= elu_grad(p);
                }
            }
            let (wo, bo) = self.layer_offsets(l);
            let input = &cache.inputs[l];
            for o in 0..n_out {
                let row = &mut grads[wo + o * n_in..wo + (o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g = delta[o] * a;
                }
                grads[bo + o] = delta[o];
            }
            if l > 0 {
                let w = self.weights(l);
                let mut prev = vec![0.0; n_in];
                for (o, &d) in delta.iter().enumerate() {
                    for (p, w) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *p += d * w;
                    }
                }
                delta = prev;
            }
        }
        Ok(grads)
    }
}
