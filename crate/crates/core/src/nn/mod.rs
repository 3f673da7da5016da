//! Small dense networks with exact reverse-mode gradients.
//!
//! Parameters live in one contiguous buffer per network: for each layer the
//! row-major `output × input` weight matrix followed by the bias vector.
//! Gradients use the same layout.

pub mod adam;
pub mod checkpoint;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{clip_by_global_norm, Adam, AdamConfig};
pub use checkpoint::Checkpoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Linear,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "linear" => Some(Activation::Linear),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
    offset: usize,
}

impl LayerShape {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.input * self.output
    }

    fn biases(&self) -> std::ops::Range<usize> {
        let w = self.offset + self.input * self.output;
        w..w + self.output
    }
}

#[derive(Debug, Clone)]
pub struct DenseNet {
    layers: Vec<LayerShape>,
    params: Vec<f64>,
    version: u64,
}

/// Equal shapes and parameters; the cache version is bookkeeping only.
impl PartialEq for DenseNet {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.params == other.params
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer followed by the final output.
    activations: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
    version: u64,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations
            .last()
            .expect("cache holds at least the input")
    }
}

impl DenseNet {
    /// Zero-initialized network. `sizes` lists every layer width including
    /// input and output; hidden layers use `hidden`, the last layer `output`.
    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        assert!(sizes.len() >= 2, "a network needs at least one layer");
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        let mut offset = 0;
        for (k, w) in sizes.windows(2).enumerate() {
            let activation = if k + 2 == sizes.len() { output } else { hidden };
            layers.push(LayerShape {
                input: w[0],
                output: w[1],
                activation,
                offset,
            });
            offset += w[0] * w[1] + w[1];
        }
        Self {
            layers,
            params: vec![0.0; offset],
            version: 0,
        }
    }

    /// He-uniform hidden layers, `±output_scale` uniform output layer, zero
    /// biases.
    pub fn init<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        output_scale: f64,
        rng: &mut R,
    ) -> Self {
        let mut net = Self::zeros(sizes, hidden, output);
        let n = net.layers.len();
        for k in 0..n {
            let layer = net.layers[k];
            let bound = if k + 1 == n {
                output_scale
            } else {
                (6.0 / layer.input as f64).sqrt()
            };
            for w in &mut net.params[layer.weights()] {
                *w = rng.random_range(-bound..=bound);
            }
        }
        net
    }

    /// Builds a network from explicit `(weights, biases, activation)` layers,
    /// weights row-major `output × input`.
    pub fn from_layers(layers: Vec<(Vec<f64>, Vec<f64>, Activation)>) -> Result<Self> {
        let mut shapes = Vec::new();
        let mut params = Vec::new();
        let mut prev_out: Option<usize> = None;
        for (w, b, activation) in layers {
            let output = b.len();
            if output == 0 || w.len() % output != 0 {
                return Err(Error::Architecture("weight/bias sizes disagree".into()));
            }
            let input = w.len() / output;
            if let Some(p) = prev_out {
                if p != input {
                    return Err(Error::Architecture(format!(
                        "layer input {input} does not chain to previous output {p}"
                    )));
                }
            }
            shapes.push(LayerShape {
                input,
                output,
                activation,
                offset: params.len(),
            });
            params.extend_from_slice(&w);
            params.extend_from_slice(&b);
            prev_out = Some(output);
        }
        if shapes.is_empty() {
            return Err(Error::Architecture("no layers".into()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(Self {
            layers: shapes,
            params,
            version: 0,
        })
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn layer_weights(&self, k: usize) -> &[f64] {
        &self.params[self.layers[k].weights()]
    }

    pub fn layer_biases(&self, k: usize) -> &[f64] {
        &self.params[self.layers[k].biases()]
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access invalidates forward caches taken before it.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn zero_grads(&self) -> Vec<f64> {
        vec![0.0; self.params.len()]
    }

    pub fn same_architecture(&self, other: &DenseNet) -> bool {
        self.layers == other.layers
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        activations.push(input.to_vec());
        for layer in &self.layers {
            let x = activations.last().unwrap();
            let w = &self.params[layer.weights()];
            let b = &self.params[layer.biases()];
            let mut z = b.to_vec();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * layer.input..(o + 1) * layer.input];
                *zo += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            }
            let y: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre_activations.push(z);
            activations.push(y);
        }
        let out = activations.last().unwrap().clone();
        Ok((
            out,
            ForwardCache {
                activations,
                pre_activations,
                version: self.version,
            },
        ))
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.0)
    }

    /// Accumulates parameter gradients of `Σ output_grad·output` into `grads`
    /// and returns the gradient with respect to the input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
        grads: &mut [f64],
    ) -> Result<Vec<f64>> {
        if cache.version != self.version || cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::Architecture("stale forward cache".into()));
        }
        if output_grad.len() != self.output_dim() {
            return Err(Error::Dimension {
                expected: self.output_dim(),
                got: output_grad.len(),
            });
        }
        if grads.len() != self.params.len() {
            return Err(Error::Dimension {
                expected: self.params.len(),
                got: grads.len(),
            });
        }
        let mut delta = output_grad.to_vec();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre_activations[k];
            let y = &cache.activations[k + 1];
            let x = &cache.activations[k];
            for o in 0..layer.output {
                delta[o] *= layer.activation.derivative(z[o], y[o]);
            }
            let w_range = layer.weights();
            let b_range = layer.biases();
            {
                let gw = &mut grads[w_range.clone()];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut gw[o * layer.input..(o + 1) * layer.input];
                    for (g, &xi) in row.iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            for (g, &d) in grads[b_range].iter_mut().zip(&delta) {
                *g += d;
            }
            let w = &self.params[w_range];
            let mut prev = vec![0.0; layer.input];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &w[o * layer.input..(o + 1) * layer.input];
                for (p, &wi) in prev.iter_mut().zip(row) {
                    *p += d * wi;
                }
            }
            delta = prev;
        }
        Ok(delta)
    }

    /// `θ_target ← τ·θ_eval + (1−τ)·θ_target`.
    pub fn soft_update(&mut self, eval: &DenseNet, tau: f64) -> Result<()> {
        if !self.same_architecture(eval) {
            return Err(Error::Architecture(
                "soft update between different shapes".into(),
            ));
        }
        for (t, &e) in self.params_mut().iter_mut().zip(&eval.params) {
            *t = tau * e + (1.0 - tau) * *t;
        }
        Ok(())
    }

    pub fn copy_from(&mut self, other: &DenseNet) -> Result<()> {
        self.soft_update(other, 1.0)
    }
}
