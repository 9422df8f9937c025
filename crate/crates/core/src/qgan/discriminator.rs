use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Image8, IMAGE_PIXELS};

/// Fully connected layer, weights stored `[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub n_in: usize,
    pub n_out: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weight: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    /// Uniform `±1/√n_in` for weights and biases.
    fn random<R: Rng>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        let mut draw = || rng.random_range(-bound..bound);
        let weight = (0..n_in * n_out).map(|_| draw()).collect();
        let bias = (0..n_out).map(|_| draw()).collect();
        Self { n_in, n_out, weight, bias }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_out)
            .map(|o| {
                let row = &self.weight[o * self.n_in..(o + 1) * self.n_in];
                self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }
}

/// Layer widths of the discriminator: 64 → 64 → 16 → 1.
pub const DISCRIMINATOR_WIDTHS: [usize; 4] = [IMAGE_PIXELS, 64, 16, 1];

/// Classical real/fake classifier with ReLU hidden layers and a sigmoid head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorModel {
    pub layers: Vec<Linear>,
}

/// Activations recorded by [`DiscriminatorModel::trace`].
pub struct DiscTrace {
    /// Input followed by each hidden activation (post-ReLU).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of every layer.
    pre: Vec<Vec<f64>>,
    pub output: f64,
}

/// Parameter gradients in the same layout as [`DiscriminatorModel::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscGrads {
    pub layers: Vec<Linear>,
}

impl DiscGrads {
    pub fn zeros_like(d: &DiscriminatorModel) -> Self {
        Self {
            layers: d.layers.iter().map(|l| Linear::zeros(l.n_in, l.n_out)).collect(),
        }
    }

    pub fn add(&mut self, other: &DiscGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.iter_mut().zip(&b.weight).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl DiscriminatorModel {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let layers = DISCRIMINATOR_WIDTHS.windows(2).map(|w| Linear::random(w[0], w[1], rng)).collect();
        Self { layers }
    }

    pub fn zeros() -> Self {
        let layers = DISCRIMINATOR_WIDTHS.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect();
        Self { layers }
    }

    /// Checks the fixed width chain and that every value is finite.
    pub fn validate(&self) -> bool {
        self.layers.len() == DISCRIMINATOR_WIDTHS.len() - 1
            && self.layers.iter().zip(DISCRIMINATOR_WIDTHS.windows(2)).all(|(l, w)| {
                l.n_in == w[0]
                    && l.n_out == w[1]
                    && l.weight.len() == w[0] * w[1]
                    && l.bias.len() == w[1]
                    && l.weight.iter().chain(&l.bias).all(|v| v.is_finite())
            })
    }

    pub fn trace(&self, x: &[f64]) -> DiscTrace {
        let mut inputs = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(inputs.last().expect("non-empty"));
            if i < last {
                inputs.push(z.iter().map(|v| v.max(0.0)).collect());
            }
            pre.push(z);
        }
        let output = sigmoid(pre[last][0]);
        DiscTrace { inputs, pre, output }
    }

    /// Probability that `image` is real.
    pub fn forward(&self, image: &Image8) -> f64 {
        self.trace(image.pixels()).output
    }

    /// Backpropagates `∂L/∂logit` and returns parameter and input gradients.
    pub fn backward(&self, trace: &DiscTrace, d_logit: f64) -> (DiscGrads, Vec<f64>) {
        let mut grads = DiscGrads::zeros_like(self);
        let mut delta = vec![d_logit];
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let x = &trace.inputs[i];
            let g = &mut grads.layers[i];
            for o in 0..layer.n_out {
                g.bias[o] = delta[o];
                for (k, xk) in x.iter().enumerate() {
                    g.weight[o * layer.n_in + k] = delta[o] * xk;
                }
            }
            let mut d_in = vec![0.0; layer.n_in];
            for o in 0..layer.n_out {
                let row = &layer.weight[o * layer.n_in..(o + 1) * layer.n_in];
                for (d, w) in d_in.iter_mut().zip(row) {
                    *d += delta[o] * w;
                }
            }
            if i > 0 {
                // ReLU of the previous layer's pre-activation.
                for (d, z) in d_in.iter_mut().zip(&trace.pre[i - 1]) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            delta = d_in;
        }
        (grads, delta)
    }

    /// Plain gradient-descent step.
    pub fn sgd_step(&mut self, grads: &DiscGrads, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            l.weight.iter_mut().zip(&g.weight).for_each(|(w, d)| *w -= lr * d);
            l.bias.iter_mut().zip(&g.bias).for_each(|(b, d)| *b -= lr * d);
        }
    }
}
