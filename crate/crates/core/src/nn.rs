//! Minimal fully connected network with manual backprop and Adam.
//!
//! One implementation backs the actor (softmax head), the critic and
//! target-critic, and the DDQN online/target nets (linear heads).
//! Weights are stored row-major in one flat buffer per layer; training is
//! per-sample, so locality matters more than parallelism here.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeededRng;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("architecture mismatch between networks")]
    ArchitectureMismatch,
    #[error("non-finite parameter after update")]
    NonFiniteParameters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputHead {
    Linear,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub output_head: OutputHead,
}

impl MlpSpec {
    /// 3 hidden layers of 64 units.
    pub fn standard(input_dim: usize, output_dim: usize, output_head: OutputHead) -> Self {
        Self {
            input_dim,
            output_dim,
            hidden_layers: vec![64, 64, 64],
            output_head,
        }
    }

    /// (fan_in, fan_out) per layer.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.input_dim;
        for &h in &self.hidden_layers {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }
}

/// One dense layer; `weights` is row-major `[out][in]` flattened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Parameter gradients in the network's flat parameter order.
#[derive(Debug, Clone)]
pub struct Gradients {
    values: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            values: vec![0.0; net.param_count()],
        }
    }

    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (d, s) in self.values.iter_mut().zip(&other.values) {
            *d += s * scale;
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scale all gradients so the global norm does not exceed `max_norm`.
    pub fn clip_global_norm(&mut self, max_norm: f64) {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let scale = max_norm / norm;
            for v in &mut self.values {
                *v *= scale;
            }
        }
    }

    /// Flat view, ordered like [`Mlp::parameters_flat`].
    pub fn flatten(&self) -> Vec<f64> {
        self.values.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<Layer>,
    adam: AdamState,
}

impl Mlp {
    /// He-uniform initialization scaled by fan-in, biases zero.
    pub fn new(spec: MlpSpec, rng: &mut SeededRng) -> Self {
        let layers: Vec<Layer> = spec
            .layer_dims()
            .iter()
            .map(|&(fan_in, fan_out)| {
                let limit = (6.0 / fan_in as f64).sqrt();
                Layer {
                    fan_in,
                    fan_out,
                    weights: (0..fan_in * fan_out)
                        .map(|_| rng.random_range(-limit..limit))
                        .collect(),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        let count = layers.iter().map(|l| l.weights.len() + l.bias.len()).sum();
        Self {
            spec,
            layers,
            adam: AdamState {
                m: vec![0.0; count],
                v: vec![0.0; count],
                step: 0,
            },
        }
    }

    /// All-zero parameters; used by tests that need a known starting point.
    pub fn zeroed(spec: MlpSpec) -> Self {
        let mut rng = SeededRng::new(0);
        let mut net = Self::new(spec, &mut rng);
        for layer in &mut net.layers {
            layer.weights.iter_mut().for_each(|v| *v = 0.0);
            layer.bias.iter_mut().for_each(|v| *v = 0.0);
        }
        net
    }

    /// Zero the final layer's weights and biases, leaving hidden layers
    /// untouched. A zeroed head gives an exactly uniform softmax policy or an
    /// exactly constant value head at the start of training.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().expect("at least one layer");
        last.weights.iter_mut().for_each(|v| *v = 0.0);
        last.bias.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn adam_steps(&self) -> u64 {
        self.adam.step
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite()))
    }

    pub fn parameters_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_parameters_flat(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter count");
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        if input.len() != self.spec.input_dim {
            return Err(NetError::DimensionMismatch {
                expected: self.spec.input_dim,
                got: input.len(),
            });
        }
        let mut a = input.to_vec();
        let n = self.layers.len();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.bias.clone();
            for (j, zj) in z.iter_mut().enumerate() {
                let row = &layer.weights[j * layer.fan_in..(j + 1) * layer.fan_in];
                *zj += row.iter().zip(&a).map(|(w, x)| w * x).sum::<f64>();
            }
            if i < n - 1 {
                for v in &mut z {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            a = z;
        }
        Ok(match self.spec.output_head {
            OutputHead::Linear => a,
            OutputHead::Softmax => softmax(&a),
        })
    }

    /// Gradient of a scalar loss with respect to every parameter, given the
    /// gradient of that loss with respect to the network output. For a
    /// softmax head the output gradient is taken with respect to the
    /// probabilities and chained through the softmax Jacobian.
    pub fn backward(&self, input: &[f64], output_gradient: &[f64]) -> Result<Gradients, NetError> {
        if input.len() != self.spec.input_dim {
            return Err(NetError::DimensionMismatch {
                expected: self.spec.input_dim,
                got: input.len(),
            });
        }
        if output_gradient.len() != self.spec.output_dim {
            return Err(NetError::DimensionMismatch {
                expected: self.spec.output_dim,
                got: output_gradient.len(),
            });
        }

        // Forward pass keeping pre-activations and activations per layer.
        let n = self.layers.len();
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        acts.push(input.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let a = acts.last().unwrap();
            let mut z = layer.bias.clone();
            for (j, zj) in z.iter_mut().enumerate() {
                let row = &layer.weights[j * layer.fan_in..(j + 1) * layer.fan_in];
                *zj += row.iter().zip(a).map(|(w, x)| w * x).sum::<f64>();
            }
            pre.push(z.clone());
            if i < n - 1 {
                for v in &mut z {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            acts.push(z);
        }

        // dL/dz at the output layer.
        let mut delta: Vec<f64> = match self.spec.output_head {
            OutputHead::Linear => output_gradient.to_vec(),
            OutputHead::Softmax => {
                let probs = softmax(acts.last().unwrap());
                let dot: f64 = output_gradient.iter().zip(&probs).map(|(g, p)| g * p).sum();
                probs
                    .iter()
                    .zip(output_gradient)
                    .map(|(p, g)| p * (g - dot))
                    .collect()
            }
        };

        let mut values = vec![0.0; self.param_count()];
        let mut offsets: Vec<usize> = Vec::with_capacity(n);
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.weights.len() + l.bias.len();
        }

        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let a_prev = &acts[l];
            let base = offsets[l];
            for (j, &d) in delta.iter().enumerate() {
                let row = &mut values[base + j * layer.fan_in..base + (j + 1) * layer.fan_in];
                for (g, &x) in row.iter_mut().zip(a_prev) {
                    *g = d * x;
                }
            }
            values[base + layer.weights.len()..base + layer.weights.len() + layer.fan_out]
                .copy_from_slice(&delta);

            if l > 0 {
                let mut prev = vec![0.0; layer.fan_in];
                for (j, &d) in delta.iter().enumerate() {
                    let row = &layer.weights[j * layer.fan_in..(j + 1) * layer.fan_in];
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                // ReLU derivative on the previous layer's pre-activations.
                for (p, z) in prev.iter_mut().zip(&pre[l - 1]) {
                    if *z <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok(Gradients { values })
    }

    /// Bias-corrected Adam update.
    pub fn adam_step(&mut self, grads: &Gradients, config: &AdamConfig) -> Result<(), NetError> {
        if grads.values.len() != self.param_count() {
            return Err(NetError::ArchitectureMismatch);
        }
        self.adam.step += 1;
        let t = self.adam.step as f64;
        let bc1 = 1.0 - config.beta1.powf(t);
        let bc2 = 1.0 - config.beta2.powf(t);

        let mut offset = 0;
        let mut finite = true;
        for layer in &mut self.layers {
            for params in [&mut layer.weights, &mut layer.bias] {
                for w in params.iter_mut() {
                    let g = grads.values[offset];
                    let m = &mut self.adam.m[offset];
                    let v = &mut self.adam.v[offset];
                    *m = config.beta1 * *m + (1.0 - config.beta1) * g;
                    *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
                    // Flush decayed moments to zero; subnormal arithmetic
                    // stalls the whole training loop.
                    if m.abs() < 1e-32 {
                        *m = 0.0;
                    }
                    if v.abs() < 1e-64 {
                        *v = 0.0;
                    }
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *w -= config.learning_rate * m_hat / (v_hat.sqrt() + config.eps);
                    finite &= w.is_finite();
                    offset += 1;
                }
            }
        }
        if !finite {
            return Err(NetError::NonFiniteParameters);
        }
        Ok(())
    }

    pub fn second_moment_sum(&self) -> f64 {
        self.adam.v.iter().sum()
    }
}

/// target := tau * target + (1 - tau) * source, parameter-wise.
pub fn soft_update(target: &mut Mlp, source: &Mlp, tau: f64) -> Result<(), NetError> {
    if target.spec != source.spec {
        return Err(NetError::ArchitectureMismatch);
    }
    for (tl, sl) in target.layers.iter_mut().zip(&source.layers) {
        for (t, s) in tl.weights.iter_mut().zip(&sl.weights) {
            *t = tau * *t + (1.0 - tau) * s;
        }
        for (t, s) in tl.bias.iter_mut().zip(&sl.bias) {
            *t = tau * *t + (1.0 - tau) * s;
        }
    }
    Ok(())
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}
