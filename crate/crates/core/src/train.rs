//! Mini-batch SGD training of the victim classifier on softmax
//! cross-entropy, deterministic for a fixed seed.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::FeatureBatch;
use crate::error::Error;
use crate::model::{self, Activation, DenseLayer, DenseNetwork};
use crate::Result;

/// Training hyperparameters. `layer_dims` runs from the input dimension to
/// the class count; hidden layers use ReLU, the output layer is Identity.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub layer_dims: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layer_dims: vec![784, 256, 128, 10],
            epochs: 20,
            batch_size: 64,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self, data: &FeatureBatch) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::InvalidConfig("need at least input and output dims"));
        }
        if self.layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig("layer dims must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive"));
        }
        if data.dim() != self.layer_dims[0] {
            return Err(Error::InputShape {
                what: "training sample",
                expected: self.layer_dims[0],
                got: data.dim(),
            });
        }
        let classes = *self.layer_dims.last().expect("checked");
        data.validate_labels(classes)
    }
}

/// Seeded Glorot-uniform initialization: weights in
/// `+-sqrt(6 / (fan_in + fan_out))`, biases zero.
fn init_network(cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> DenseNetwork {
    let n_layers = cfg.layer_dims.len() - 1;
    let mut layers = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let in_dim = cfg.layer_dims[l];
        let out_dim = cfg.layer_dims[l + 1];
        let limit = libm::sqrt(6.0 / (in_dim + out_dim) as f64);
        let weights: Vec<f64> = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        let activation = if l + 1 == n_layers {
            Activation::Identity
        } else {
            Activation::ReLU
        };
        layers.push(
            DenseLayer::new(in_dim, out_dim, weights, vec![0.0; out_dim], activation)
                .expect("valid dims"),
        );
    }
    DenseNetwork::new(layers).expect("valid stack")
}

struct Workspace {
    /// Post-activation per layer, element 0 holding the input.
    activations: Vec<Vec<f64>>,
    /// Pre-activation per layer.
    preacts: Vec<Vec<f64>>,
    /// Accumulated weight gradients per layer.
    grad_w: Vec<Vec<f64>>,
    /// Accumulated bias gradients per layer.
    grad_b: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(net: &DenseNetwork) -> Self {
        let mut activations = vec![vec![0.0; net.input_dim()]];
        let mut preacts = Vec::new();
        let mut grad_w = Vec::new();
        let mut grad_b = Vec::new();
        for layer in net.layers() {
            activations.push(vec![0.0; layer.out_dim()]);
            preacts.push(vec![0.0; layer.out_dim()]);
            grad_w.push(vec![0.0; layer.weights().len()]);
            grad_b.push(vec![0.0; layer.out_dim()]);
        }
        Self {
            activations,
            preacts,
            grad_w,
            grad_b,
        }
    }

    fn zero_grads(&mut self) {
        for g in &mut self.grad_w {
            g.fill(0.0);
        }
        for g in &mut self.grad_b {
            g.fill(0.0);
        }
    }
}

/// Forward pass with caches, then softmax cross-entropy loss and gradient
/// accumulation into the workspace. Returns the sample loss.
fn accumulate_sample(net: &DenseNetwork, x: &[f64], label: usize, ws: &mut Workspace) -> f64 {
    ws.activations[0].copy_from_slice(x);
    for (l, layer) in net.layers().iter().enumerate() {
        let (head, tail) = ws.activations.split_at_mut(l + 1);
        let input = &head[l];
        let out = &mut tail[0];
        let z = &mut ws.preacts[l];
        for r in 0..layer.out_dim() {
            let row = &layer.weights()[r * layer.in_dim()..(r + 1) * layer.in_dim()];
            let mut acc = layer.bias()[r];
            for (w, xi) in row.iter().zip(input.iter()) {
                acc += w * xi;
            }
            z[r] = acc;
            out[r] = layer.activation().apply(acc);
        }
    }

    // Stable log-softmax.
    let logits = ws.activations.last().expect("output layer");
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = logits.iter().map(|&v| libm::exp(v - max)).sum();
    let log_z = max + libm::log(sum_exp);
    let loss = log_z - logits[label];

    // d loss / d logits = softmax - onehot.
    let mut d_out: Vec<f64> = logits
        .iter()
        .map(|&v| libm::exp(v - max) / sum_exp)
        .collect();
    d_out[label] -= 1.0;

    for l in (0..net.num_layers()).rev() {
        let layer = net.layer(l);
        let input = &ws.activations[l];
        let z = &ws.preacts[l];
        let mut d_in = vec![0.0; layer.in_dim()];
        for r in 0..layer.out_dim() {
            let dz = d_out[r] * layer.activation().grad_at(z[r]);
            if dz == 0.0 {
                continue;
            }
            ws.grad_b[l][r] += dz;
            let g_row = &mut ws.grad_w[l][r * layer.in_dim()..(r + 1) * layer.in_dim()];
            let w_row = &layer.weights()[r * layer.in_dim()..(r + 1) * layer.in_dim()];
            for c in 0..layer.in_dim() {
                g_row[c] += dz * input[c];
                d_in[c] += w_row[c] * dz;
            }
        }
        d_out = d_in;
    }

    loss
}

/// Trains a classifier and reports the mean training loss per epoch.
///
/// Epoch order, batch membership, and accumulation order are all fixed by
/// the seed, so identical inputs produce a bitwise-identical network.
pub fn train_with_stats(
    data: &FeatureBatch,
    cfg: &TrainConfig,
) -> Result<(DenseNetwork, Vec<f64>)> {
    cfg.validate(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = init_network(cfg, &mut rng);
    let mut ws = Workspace::new(&net);

    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            ws.zero_grads();
            let mut batch_loss = 0.0;
            for &idx in batch {
                batch_loss +=
                    accumulate_sample(&net, data.features.row(idx), data.labels[idx], &mut ws);
            }
            epoch_loss += batch_loss;

            let scale = cfg.learning_rate / batch.len() as f64;
            for (l, layer) in net.layers_mut().iter_mut().enumerate() {
                for (w, g) in layer.weights_mut().iter_mut().zip(&ws.grad_w[l]) {
                    *w -= scale * g;
                }
                for (b, g) in layer.bias_mut().iter_mut().zip(&ws.grad_b[l]) {
                    *b -= scale * g;
                }
            }
        }
        epoch_losses.push(epoch_loss / n as f64);
    }

    Ok((net, epoch_losses))
}

/// Trains a classifier; see [`train_with_stats`].
pub fn train(data: &FeatureBatch, cfg: &TrainConfig) -> Result<DenseNetwork> {
    train_with_stats(data, cfg).map(|(net, _)| net)
}

/// Fraction of samples whose prediction equals their label.
pub fn evaluate_accuracy(net: &DenseNetwork, data: &FeatureBatch) -> Result<f64> {
    let mut correct = 0usize;
    for i in 0..data.len() {
        if model::predict(net, data.features.row(i))? == data.labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSource, Matrix};
    use alloc::vec;

    /// Linearly separable two-class blobs in 4 dimensions.
    fn blob_data(n_per_class: usize, seed: u64) -> FeatureBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = [[2.0, 0.0, 1.0, -1.0], [-2.0, 1.0, -1.0, 1.0]];
        let n = 2 * n_per_class;
        let mut features = Matrix::zeros(n, 4);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let class = i % 2;
            let row = features.row_mut(i);
            for (j, c) in centers[class].iter().enumerate() {
                row[j] = c + rng.gen_range(-0.5..0.5);
            }
            labels.push(class);
        }
        FeatureBatch::new(features, labels, FeatureSource::Imported).unwrap()
    }

    fn blob_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            layer_dims: vec![4, 16, 2],
            epochs,
            batch_size: 16,
            learning_rate: 0.1,
            seed: 11,
        }
    }

    #[test]
    fn separable_blobs_train_to_high_accuracy() {
        let data = blob_data(100, 3);
        let net = train(&data, &blob_config(30)).unwrap();
        let acc = evaluate_accuracy(&net, &data).unwrap();
        assert!(acc >= 0.99, "train accuracy {acc}");
    }

    #[test]
    fn zero_epochs_returns_seeded_init() {
        let data = blob_data(10, 3);
        let net = train(&data, &blob_config(0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let want = init_network(&blob_config(0), &mut rng);
        assert_eq!(net, want);
    }

    #[test]
    fn training_is_bitwise_reproducible() {
        let data = blob_data(50, 9);
        let a = train(&data, &blob_config(5)).unwrap();
        let b = train(&data, &blob_config(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn epoch_losses_mostly_non_increasing() {
        let data = blob_data(100, 5);
        let (_, losses) = train_with_stats(&data, &blob_config(15)).unwrap();
        let violations = losses
            .windows(2)
            .filter(|pair| pair[1] > pair[0] + 1e-12)
            .count();
        assert!(violations <= 2, "{violations} increasing epochs: {losses:?}");
    }

    #[test]
    fn accuracy_of_identity_net_on_onehot_data() {
        let dim = 3;
        let mut w = vec![0.0; dim * dim];
        for i in 0..dim {
            w[i * dim + i] = 1.0;
        }
        let net = DenseNetwork::new(vec![DenseLayer::new(
            dim,
            dim,
            w,
            vec![0.0; dim],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();

        let mut features = Matrix::zeros(dim, dim);
        for i in 0..dim {
            features.row_mut(i)[i] = 1.0;
        }
        let data = FeatureBatch::new(features, vec![0, 1, 2], FeatureSource::Imported).unwrap();
        assert_eq!(evaluate_accuracy(&net, &data).unwrap(), 1.0);
    }

    #[test]
    fn constant_net_scores_chance_level() {
        // All-zero weights: every logit ties, predictions all land on class
        // 0, so balanced 4-class data scores exactly 25%.
        let net = DenseNetwork::new(vec![DenseLayer::new(
            2,
            4,
            vec![0.0; 8],
            vec![0.0; 4],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        let mut features = Matrix::zeros(8, 2);
        let mut labels = Vec::new();
        for i in 0..8 {
            features.row_mut(i)[0] = i as f64;
            labels.push(i % 4);
        }
        let data = FeatureBatch::new(features, labels, FeatureSource::Imported).unwrap();
        assert_eq!(evaluate_accuracy(&net, &data).unwrap(), 0.25);
    }

    #[test]
    fn rejects_label_out_of_range() {
        let mut data = blob_data(10, 3);
        data.labels[0] = 9;
        assert!(train(&data, &blob_config(1)).is_err());
    }
}
