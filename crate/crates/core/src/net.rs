//! The Q-value network: a small fully connected net with rectifier hidden
//! layers and a linear output, trained by plain gradient descent on the
//! squared TD error. Forward and backward passes are written out directly so
//! the numerics stay reproducible bit for bit and checkpoints stay plain text.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("failed to read checkpoint: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse checkpoint: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

/// Four-way unrolled dot product: keeps independent accumulator chains so the
/// loop is not latency-bound, with a fixed association order.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let chunks = a.len() / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..chunks {
        let i = 4 * c;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    let mut sum = (s0 + s1) + (s2 + s3);
    for i in 4 * chunks..a.len() {
        sum += a[i] * b[i];
    }
    sum
}

/// A feed-forward Q-network.
///
/// Layer `l` maps `dims[l]` inputs to `dims[l+1]` outputs through a weight
/// matrix stored row-major (`[out][in]`) plus a bias vector. Hidden layers
/// apply the rectifier; the output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct QNet {
    dims: Vec<usize>,
    weights: Vec<Vec<f64>>, // per layer, flattened out-by-in
    biases: Vec<Vec<f64>>,
}

/// One training sample: input features, the action whose Q-value is updated,
/// and its target value.
#[derive(Debug, Clone)]
pub struct GradSample<'a> {
    pub input: &'a [f64],
    pub action: usize,
    pub target: f64,
}

/// Parameter gradients, laid out like the network itself.
#[derive(Debug, Clone)]
pub struct Grads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Grads {
    pub fn global_norm(&self) -> f64 {
        let sum: f64 = self
            .weights
            .iter()
            .chain(self.biases.iter())
            .flat_map(|block| block.iter())
            .map(|g| g * g)
            .sum();
        sum.sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for block in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for g in block.iter_mut() {
                *g *= factor;
            }
        }
    }
}

impl QNet {
    /// Random network with weights uniform in `+-sqrt(6 / (fan_in + fan_out))`
    /// and zero biases.
    pub fn new<R: rand::Rng>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "a network needs an input and an output layer");
        assert!(dims.iter().all(|&d| d > 0), "zero-width layer");
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for layer in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[layer], dims[layer + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let layer_weights = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            weights.push(layer_weights);
            biases.push(vec![0.0; fan_out]);
        }
        QNet {
            dims: dims.to_vec(),
            weights,
            biases,
        }
    }

    /// All-zero network with the given layout.
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2);
        let weights = (0..dims.len() - 1)
            .map(|l| vec![0.0; dims[l] * dims[l + 1]])
            .collect();
        let biases = (0..dims.len() - 1).map(|l| vec![0.0; dims[l + 1]]).collect();
        QNet {
            dims: dims.to_vec(),
            weights,
            biases,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_len(&self) -> usize {
        self.dims[0]
    }

    pub fn output_len(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn weight_mut(&mut self, layer: usize, out: usize, input: usize) -> &mut f64 {
        let width = self.dims[layer];
        &mut self.weights[layer][out * width + input]
    }

    pub fn bias_mut(&mut self, layer: usize, out: usize) -> &mut f64 {
        &mut self.biases[layer][out]
    }

    /// Q-values for all actions.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.input_len(), "feature length mismatch");
        let mut activation = input.to_vec();
        for layer in 0..self.num_layers() {
            activation = self.layer_forward(layer, &activation);
        }
        activation
    }

    fn layer_forward(&self, layer: usize, input: &[f64]) -> Vec<f64> {
        let (fan_in, fan_out) = (self.dims[layer], self.dims[layer + 1]);
        let last = layer == self.num_layers() - 1;
        let mut output = Vec::with_capacity(fan_out);
        for out in 0..fan_out {
            let row = &self.weights[layer][out * fan_in..(out + 1) * fan_in];
            let z = dot(row, input) + self.biases[layer][out];
            output.push(if last { z } else { z.max(0.0) });
        }
        output
    }

    /// Mean squared TD error over the batch and its parameter gradients.
    /// Only the taken action's Q-value enters the loss for each sample.
    pub fn loss_and_grads(&self, batch: &[GradSample<'_>]) -> (f64, Grads) {
        assert!(!batch.is_empty(), "empty training batch");
        let layers = self.num_layers();
        let mut grads = Grads {
            weights: self
                .weights
                .iter()
                .map(|w| vec![0.0; w.len()])
                .collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        };
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;

        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(layers + 1);
        for sample in batch {
            assert!(sample.action < self.output_len(), "action index out of range");
            activations.clear();
            activations.push(sample.input.to_vec());
            for layer in 0..layers {
                let next = self.layer_forward(layer, &activations[layer]);
                activations.push(next);
            }
            let q = activations[layers][sample.action];
            let error = q - sample.target;
            loss += scale * error * error;

            // Backward pass: delta on the output layer is zero except at the
            // taken action.
            let mut delta = vec![0.0; self.output_len()];
            delta[sample.action] = 2.0 * scale * error;
            for layer in (0..layers).rev() {
                let fan_in = self.dims[layer];
                let input = &activations[layer];
                let mut input_grad = vec![0.0; fan_in];
                for (out, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &self.weights[layer][out * fan_in..(out + 1) * fan_in];
                    let grad_row = &mut grads.weights[layer][out * fan_in..(out + 1) * fan_in];
                    for i in 0..fan_in {
                        grad_row[i] += d * input[i];
                        input_grad[i] += d * row[i];
                    }
                    grads.biases[layer][out] += d;
                }
                if layer > 0 {
                    // Rectifier derivative: pass gradient only where the
                    // activation is positive.
                    for (g, &a) in input_grad.iter_mut().zip(input) {
                        if a <= 0.0 {
                            *g = 0.0;
                        }
                    }
                }
                delta = input_grad;
            }
        }
        (loss, grads)
    }

    /// One gradient-descent step: `theta -= lr * grads`.
    pub fn apply_update(&mut self, grads: &Grads, learning_rate: f64) {
        for (weights, grad) in self.weights.iter_mut().zip(&grads.weights) {
            for (w, g) in weights.iter_mut().zip(grad) {
                *w -= learning_rate * g;
            }
        }
        for (biases, grad) in self.biases.iter_mut().zip(&grads.biases) {
            for (b, g) in biases.iter_mut().zip(grad) {
                *b -= learning_rate * g;
            }
        }
    }
}

/// A network checkpoint: the parameters plus the scenario fingerprint and
/// training seed they were produced under. Serialized as a plain JSON text
/// document with full double precision.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub net: QNet,
    pub scenario_fingerprint: String,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    layer_dims: Vec<usize>,
    /// Per layer, row-major: `weights[layer][out][in]`.
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
    scenario_fingerprint: String,
    seed: u64,
}

impl Checkpoint {
    pub fn new(net: QNet, scenario_fingerprint: impl Into<String>, seed: u64) -> Self {
        Checkpoint {
            net,
            scenario_fingerprint: scenario_fingerprint.into(),
            seed,
        }
    }

    pub fn to_json(&self) -> String {
        let doc = CheckpointDoc {
            layer_dims: self.net.dims.clone(),
            weights: self
                .net
                .weights
                .iter()
                .enumerate()
                .map(|(layer, flat)| {
                    flat.chunks(self.net.dims[layer])
                        .map(|row| row.to_vec())
                        .collect()
                })
                .collect(),
            biases: self.net.biases.clone(),
            scenario_fingerprint: self.scenario_fingerprint.clone(),
            seed: self.seed,
        };
        serde_json::to_string_pretty(&doc).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let doc: CheckpointDoc = serde_json::from_str(text)?;
        if doc.layer_dims.len() < 2 {
            return Err(CheckpointError::Malformed("fewer than two layers".into()));
        }
        let layers = doc.layer_dims.len() - 1;
        if doc.weights.len() != layers || doc.biases.len() != layers {
            return Err(CheckpointError::Malformed(
                "weight and bias counts do not match the layer dims".into(),
            ));
        }
        let mut weights = Vec::with_capacity(layers);
        for (layer, rows) in doc.weights.iter().enumerate() {
            let (fan_in, fan_out) = (doc.layer_dims[layer], doc.layer_dims[layer + 1]);
            if rows.len() != fan_out || rows.iter().any(|r| r.len() != fan_in) {
                return Err(CheckpointError::Malformed(format!(
                    "layer {layer} weight matrix is not {fan_out}x{fan_in}"
                )));
            }
            if doc.biases[layer].len() != fan_out {
                return Err(CheckpointError::Malformed(format!(
                    "layer {layer} bias vector is not length {fan_out}"
                )));
            }
            weights.push(rows.iter().flatten().copied().collect());
        }
        Ok(Checkpoint {
            net: QNet {
                dims: doc.layer_dims,
                weights,
                biases: doc.biases,
            },
            scenario_fingerprint: doc.scenario_fingerprint,
            seed: doc.seed,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::rng;
    use rand::Rng;

    fn random_batch_inputs<R: Rng>(
        rng: &mut R,
        count: usize,
        width: usize,
    ) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    /// Central finite differences over every parameter, compared to the
    /// analytic gradients through the norm-relative error.
    fn gradient_check(net: &QNet, batch: &[GradSample<'_>]) -> f64 {
        let (_, grads) = net.loss_and_grads(batch);
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        let mut probe = net.clone();
        for layer in 0..net.num_layers() {
            for index in 0..net.weights[layer].len() {
                let original = net.weights[layer][index];
                let h = 1e-6 * original.abs().max(1.0);
                probe.weights[layer][index] = original + h;
                let (plus, _) = probe.loss_and_grads(batch);
                probe.weights[layer][index] = original - h;
                let (minus, _) = probe.loss_and_grads(batch);
                probe.weights[layer][index] = original;
                analytic.push(grads.weights[layer][index]);
                numeric.push((plus - minus) / (2.0 * h));
            }
            for index in 0..net.biases[layer].len() {
                let original = net.biases[layer][index];
                let h = 1e-6 * original.abs().max(1.0);
                probe.biases[layer][index] = original + h;
                let (plus, _) = probe.loss_and_grads(batch);
                probe.biases[layer][index] = original - h;
                let (minus, _) = probe.loss_and_grads(batch);
                probe.biases[layer][index] = original;
                analytic.push(grads.biases[layer][index]);
                numeric.push((plus - minus) / (2.0 * h));
            }
        }
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n) * (a - n))
            .sum::<f64>()
            .sqrt();
        let norm_a: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let norm_n: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
        diff / norm_a.max(norm_n).max(1e-12)
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let net = QNet::zeros(&[4, 8, 3]);
        let out = net.forward(&[1.0, -2.0, 0.5, 3.0]);
        assert_eq!(out, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn identity_single_layer_passes_input_through() {
        let mut net = QNet::zeros(&[2, 2]);
        *net.weight_mut(0, 0, 0) = 1.0;
        *net.weight_mut(0, 1, 1) = 1.0;
        let out = net.forward(&[0.3, -0.7]);
        assert_eq!(out, vec![0.3, -0.7]);
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = rng(31);
        for _ in 0..5 {
            let net = QNet::new(&[6, 16, 8, 4], &mut rng);
            let inputs = random_batch_inputs(&mut rng, 6, 6);
            let batch: Vec<GradSample<'_>> = inputs
                .iter()
                .map(|input| GradSample {
                    input,
                    action: rng.gen_range(0..4),
                    target: rng.gen_range(-2.0..2.0),
                })
                .collect();
            let error = gradient_check(&net, &batch);
            assert!(error < 1e-5, "gradient check failed: {error}");
        }
    }

    #[test]
    fn matched_targets_leave_weights_unchanged() {
        let mut rng = rng(32);
        let mut net = QNet::new(&[4, 8, 3], &mut rng);
        let inputs = random_batch_inputs(&mut rng, 4, 4);
        let batch: Vec<GradSample<'_>> = inputs
            .iter()
            .map(|input| {
                let action = rng.gen_range(0..3);
                let target = net.forward(input)[action];
                GradSample { input, action, target }
            })
            .collect();
        let before = net.clone();
        let (loss, grads) = net.loss_and_grads(&batch);
        assert_eq!(loss, 0.0);
        net.apply_update(&grads, 0.1);
        for (a, b) in net.weights.iter().flatten().zip(before.weights.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_steps_descend_on_a_fixed_batch() {
        let mut rng = rng(33);
        let mut net = QNet::new(&[5, 12, 3], &mut rng);
        let inputs = random_batch_inputs(&mut rng, 3, 5);
        let samples: Vec<(usize, f64)> =
            (0..3).map(|_| (rng.gen_range(0..3), rng.gen_range(-1.0..1.0))).collect();
        let mut previous = f64::INFINITY;
        for _ in 0..50 {
            let batch: Vec<GradSample<'_>> = inputs
                .iter()
                .zip(&samples)
                .map(|(input, &(action, target))| GradSample { input, action, target })
                .collect();
            let (loss, grads) = net.loss_and_grads(&batch);
            assert!(loss < previous || loss == 0.0, "loss did not decrease: {loss} vs {previous}");
            previous = loss;
            net.apply_update(&grads, 1e-2);
        }
    }

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let mut rng = rng(34);
        let net = QNet::new(&[7, 9, 4], &mut rng);
        let checkpoint = Checkpoint::new(net.clone(), "abc123", 99);
        let json = checkpoint.to_json();
        let restored = Checkpoint::from_json(&json).unwrap();
        assert_eq!(restored.net, net);
        assert_eq!(restored.scenario_fingerprint, "abc123");
        assert_eq!(restored.seed, 99);
        // Serialization is deterministic.
        assert_eq!(json, Checkpoint::new(net, "abc123", 99).to_json());
    }

    #[test]
    fn checkpoint_rejects_mismatched_shapes() {
        let mut rng = rng(35);
        let net = QNet::new(&[3, 4, 2], &mut rng);
        let json = Checkpoint::new(net, "f", 1).to_json();
        let broken = json.replace("\"layer_dims\": [\n    3,", "\"layer_dims\": [\n    5,");
        let err = Checkpoint::from_json(&broken).unwrap_err();
        assert!(matches!(err, CheckpointError::Malformed(_)), "{err}");
    }
}
