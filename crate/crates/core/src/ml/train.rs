//! Mini-batch SGD with backpropagation.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::matrix::{axpy, Matrix};
use super::network::{Activation, DenseLayer, DenseNetwork};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Cross-entropy over a softmax output layer.
    CrossEntropy,
    /// Mean over output units of the squared error.
    MeanSquared,
}

#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Labels(&'a [usize]),
    Values(&'a Matrix),
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Labels(l) => l.len(),
            Targets::Values(m) => m.rows(),
        }
    }
}

/// Gradient of the loss with respect to one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Shuffle sample order each epoch with a permutation drawn from
    /// `(seed, epoch)` only.
    pub shuffle: bool,
    pub seed: u64,
}

fn check_targets(net: &DenseNetwork, loss: Loss, x: &Matrix, targets: Targets<'_>) -> Result<()> {
    if x.cols() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            actual: x.cols(),
            context: "training features",
        });
    }
    if targets.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            actual: targets.len(),
            context: "targets",
        });
    }
    match (loss, targets) {
        (Loss::CrossEntropy, Targets::Labels(labels)) => {
            if net.output_activation() != Activation::Softmax {
                return Err(Error::InvalidConfig("cross-entropy needs a softmax output".into()));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= net.output_dim()) {
                return Err(Error::LabelOutOfRange {
                    label: bad,
                    num_classes: net.output_dim(),
                });
            }
        }
        (Loss::MeanSquared, Targets::Values(t)) => {
            if t.cols() != net.output_dim() {
                return Err(Error::DimensionMismatch {
                    expected: net.output_dim(),
                    actual: t.cols(),
                    context: "regression targets",
                });
            }
        }
        _ => return Err(Error::InvalidConfig("loss and target kind disagree".into())),
    }
    Ok(())
}

/// Reusable per-sample buffers for forward and backward passes.
struct Scratch {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Scratch {
    fn new(net: &DenseNetwork) -> Self {
        let mut acts = vec![vec![0.0; net.input_dim()]];
        acts.extend(net.layers().iter().map(|l| vec![0.0; l.outputs()]));
        let deltas = net.layers().iter().map(|l| vec![0.0; l.outputs()]).collect();
        Self { acts, deltas }
    }
}

fn zero_grads(net: &DenseNetwork) -> Vec<LayerGrad> {
    net.layers()
        .iter()
        .map(|l| LayerGrad {
            weights: Matrix::zeros(l.outputs(), l.inputs()),
            bias: vec![0.0; l.outputs()],
        })
        .collect()
}

/// Forward and backward pass for one sample, accumulating into `grads`.
/// Returns the sample loss.
fn accumulate_sample(
    net: &DenseNetwork,
    loss: Loss,
    x: &[f64],
    targets: Targets<'_>,
    row: usize,
    s: &mut Scratch,
    grads: &mut [LayerGrad],
) -> f64 {
    let layers = net.layers();
    s.acts[0].copy_from_slice(x);
    for (l, layer) in layers.iter().enumerate() {
        let (before, after) = s.acts.split_at_mut(l + 1);
        layer.forward_into(&before[l], &mut after[0]);
    }
    let last = layers.len() - 1;
    let out = &s.acts[last + 1];
    let sample_loss = match (loss, targets) {
        (Loss::CrossEntropy, Targets::Labels(labels)) => {
            let y = labels[row];
            let d = &mut s.deltas[last];
            d.copy_from_slice(out);
            d[y] -= 1.0;
            -out[y].max(f64::MIN_POSITIVE).ln()
        }
        (Loss::MeanSquared, Targets::Values(t)) => {
            let t = t.row(row);
            let k = out.len() as f64;
            let d = &mut s.deltas[last];
            let mut sq = 0.0;
            for ((di, &o), &ti) in d.iter_mut().zip(out).zip(t) {
                let e = o - ti;
                sq += e * e;
                *di = 2.0 * e / k;
            }
            layers[last].activation.backprop(out, d);
            sq / k
        }
        _ => unreachable!("checked by check_targets"),
    };

    for l in (0..layers.len()).rev() {
        let g = &mut grads[l];
        {
            let delta = &s.deltas[l];
            let input = &s.acts[l];
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, input, g.weights.row_mut(o));
                }
                g.bias[o] += d;
            }
        }
        if l > 0 {
            let (lower, upper) = s.deltas.split_at_mut(l);
            let prev = &mut lower[l - 1];
            prev.iter_mut().for_each(|v| *v = 0.0);
            for (o, &d) in upper[0].iter().enumerate() {
                if d != 0.0 {
                    axpy(d, layers[l].weights.row(o), prev);
                }
            }
            layers[l - 1].activation.backprop(&s.acts[l], prev);
        }
    }
    sample_loss
}

/// Mean loss and mean parameter gradients over all rows of `x`.
pub fn loss_and_gradients(
    net: &DenseNetwork,
    loss: Loss,
    x: &Matrix,
    targets: Targets<'_>,
) -> Result<(f64, Vec<LayerGrad>)> {
    check_targets(net, loss, x, targets)?;
    if x.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut s = Scratch::new(net);
    let mut grads = zero_grads(net);
    let mut total = 0.0;
    for r in 0..x.rows() {
        total += accumulate_sample(net, loss, x.row(r), targets, r, &mut s, &mut grads);
    }
    let n = x.rows() as f64;
    for g in &mut grads {
        g.weights.as_mut_slice().iter_mut().for_each(|v| *v /= n);
        g.bias.iter_mut().for_each(|v| *v /= n);
    }
    Ok((total / n, grads))
}

/// Mean loss over all rows, without gradients.
pub fn mean_loss(net: &DenseNetwork, loss: Loss, x: &Matrix, targets: Targets<'_>) -> Result<f64> {
    check_targets(net, loss, x, targets)?;
    if x.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let out = net.forward(x)?;
    let mut total = 0.0;
    for r in 0..out.rows() {
        let o = out.row(r);
        total += match targets {
            Targets::Labels(l) => -o[l[r]].max(f64::MIN_POSITIVE).ln(),
            Targets::Values(t) => {
                let t = t.row(r);
                o.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / o.len() as f64
            }
        };
    }
    Ok(total / out.rows() as f64)
}

/// Trains `net` in place. Returns the running mean loss of each epoch.
pub fn fit(net: &mut DenseNetwork, loss: Loss, x: &Matrix, targets: Targets<'_>, cfg: &SgdConfig) -> Result<Vec<f64>> {
    check_targets(net, loss, x, targets)?;
    if x.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidConfig(
            "batch size and learning rate must be positive".into(),
        ));
    }
    let n = x.rows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut s = Scratch::new(net);
    let mut grads = zero_grads(net);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order = (0..n).collect();
            order.shuffle(&mut rng::stream(cfg.seed, &[tag::SHUFFLE, epoch as u64]));
        }
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            for g in grads.iter_mut() {
                g.weights.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
                g.bias.iter_mut().for_each(|v| *v = 0.0);
            }
            for &r in batch {
                total += accumulate_sample(net, loss, x.row(r), targets, r, &mut s, &mut grads);
            }
            let step = cfg.learning_rate / batch.len() as f64;
            for (layer, g) in net.layers_mut().iter_mut().zip(&grads) {
                axpy(-step, g.weights.as_slice(), layer.weights.as_mut_slice());
                axpy(-step, &g.bias, &mut layer.bias);
            }
        }
        epoch_losses.push(total / n as f64);
    }
    if net
        .layers()
        .iter()
        .any(|l| l.weights.as_slice().iter().chain(&l.bias).any(|v| !v.is_finite()))
    {
        return Err(Error::InvalidConfig(
            "training diverged to non-finite parameters".into(),
        ));
    }
    Ok(epoch_losses)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub input_dim: usize,
    /// Width of the single ReLU hidden layer; 0 gives a plain softmax
    /// regression.
    pub hidden_units: usize,
    pub num_classes: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            input_dim: 274,
            hidden_units: 80,
            num_classes: 9,
            learning_rate: 0.01,
            epochs: 1,
            batch_size: 32,
            seed: 0,
            shuffle: true,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.num_classes == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "classifier dimensions and batch size must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }

    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            shuffle: self.shuffle,
            seed: self.seed,
        }
    }
}

/// The seeded, untrained classifier for `cfg`.
pub fn init_classifier(cfg: &ClassifierConfig) -> Result<DenseNetwork> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, &[tag::INIT]);
    let layers = if cfg.hidden_units == 0 {
        vec![DenseLayer::glorot(
            cfg.input_dim,
            cfg.num_classes,
            Activation::Softmax,
            &mut rng,
        )]
    } else {
        vec![
            DenseLayer::glorot(cfg.input_dim, cfg.hidden_units, Activation::Relu, &mut rng),
            DenseLayer::glorot(cfg.hidden_units, cfg.num_classes, Activation::Softmax, &mut rng),
        ]
    };
    DenseNetwork::new(layers)
}

pub fn train_classifier(cfg: &ClassifierConfig, features: &Matrix, labels: &[usize]) -> Result<DenseNetwork> {
    let mut net = init_classifier(cfg)?;
    continue_classifier(&mut net, cfg, features, labels)?;
    Ok(net)
}

/// Further trains an existing classifier with the schedule in `cfg`.
pub fn continue_classifier(
    net: &mut DenseNetwork,
    cfg: &ClassifierConfig,
    features: &Matrix,
    labels: &[usize],
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if features.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if features.cols() != cfg.input_dim {
        return Err(Error::DimensionMismatch {
            expected: cfg.input_dim,
            actual: features.cols(),
            context: "classifier input",
        });
    }
    fit(net, Loss::CrossEntropy, features, Targets::Labels(labels), &cfg.sgd())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoencoderConfig {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Activation of the latent layer; the reconstruction layer is linear.
    pub latent_activation: Activation,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            input_dim: 50,
            latent_dim: 25,
            learning_rate: 0.01,
            epochs: 20,
            batch_size: 32,
            seed: 0,
            latent_activation: Activation::Sigmoid,
        }
    }
}

impl AutoencoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.latent_dim == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("autoencoder dimensions must be positive".into()));
        }
        if self.latent_dim > self.input_dim {
            return Err(Error::InvalidConfig("latent_dim must not exceed input_dim".into()));
        }
        if self.latent_activation == Activation::Softmax {
            return Err(Error::InvalidConfig("softmax latent layer not supported".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

pub fn init_autoencoder(cfg: &AutoencoderConfig) -> Result<DenseNetwork> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, &[tag::AUTOENCODER, tag::INIT]);
    DenseNetwork::new(vec![
        DenseLayer::glorot(cfg.input_dim, cfg.latent_dim, cfg.latent_activation, &mut rng),
        DenseLayer::glorot(cfg.latent_dim, cfg.input_dim, Activation::Identity, &mut rng),
    ])
}

/// Splits a two-layer autoencoder into (encoder, decoder).
pub fn split_autoencoder(ae: DenseNetwork) -> Result<(DenseNetwork, DenseNetwork)> {
    let mut layers = ae.into_layers();
    if layers.len() != 2 {
        return Err(Error::InvalidConfig("autoencoder must have two layers".into()));
    }
    let dec = layers.pop().expect("two layers");
    let enc = layers.pop().expect("two layers");
    Ok((DenseNetwork::new(vec![enc])?, DenseNetwork::new(vec![dec])?))
}

pub fn train_autoencoder(cfg: &AutoencoderConfig, features: &Matrix) -> Result<(DenseNetwork, DenseNetwork)> {
    cfg.validate()?;
    if features.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if features.cols() != cfg.input_dim {
        return Err(Error::DimensionMismatch {
            expected: cfg.input_dim,
            actual: features.cols(),
            context: "autoencoder input",
        });
    }
    let mut ae = init_autoencoder(cfg)?;
    let sgd = SgdConfig {
        learning_rate: cfg.learning_rate,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        shuffle: true,
        seed: rng::derive_seed(cfg.seed, &[tag::AUTOENCODER]),
    };
    fit(&mut ae, Loss::MeanSquared, features, Targets::Values(features), &sgd)?;
    split_autoencoder(ae)
}

/// Mean squared reconstruction error of `features` through the pair.
pub fn reconstruction_mse(encoder: &DenseNetwork, decoder: &DenseNetwork, features: &Matrix) -> Result<f64> {
    let z = encoder.forward(features)?;
    let xr = decoder.forward(&z)?;
    if xr.cols() != features.cols() {
        return Err(Error::DimensionMismatch {
            expected: features.cols(),
            actual: xr.cols(),
            context: "reconstruction",
        });
    }
    let n = (features.rows() * features.cols()).max(1) as f64;
    Ok(features
        .as_slice()
        .iter()
        .zip(xr.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}
