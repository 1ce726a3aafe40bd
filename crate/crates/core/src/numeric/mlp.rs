//! Dense ReLU networks trained with Adam.
//!
//! Layer weights are stored `(in_dim, out_dim)` so that a batch of row
//! vectors maps through `x.dot(&w) + b`. Hidden layers are always ReLU; the
//! output activation is chosen per network. Gradients are taken with
//! respect to output *logits* (pre-activation), which lets callers chain
//! networks together (see the CBM trainer).

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputActivation {
    Sigmoid,
    Softmax,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    BinaryCrossEntropy,
    CategoricalCrossEntropy,
    MeanSquaredError,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Input width, hidden widths, output width.
    pub layer_sizes: Vec<usize>,
    pub output: OutputActivation,
}

impl MlpSpec {
    pub fn new(input: usize, hidden: &[usize], output: usize, act: OutputActivation) -> Self {
        let mut layer_sizes = Vec::with_capacity(hidden.len() + 2);
        layer_sizes.push(input);
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(output);
        Self {
            layer_sizes,
            output: act,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub loss: Loss,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros_like(&self) -> Self {
        Self {
            weights: Array2::zeros(self.weights.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
    output: OutputActivation,
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

/// Intermediate values of a forward pass needed by `backward`.
#[derive(Clone, Debug)]
pub struct Trace {
    /// Input to each layer (the batch itself for layer 0).
    inputs: Vec<Array2<f64>>,
    /// Output-layer pre-activations.
    pub logits: Array2<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epoch_losses: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

fn activate(act: OutputActivation, logits: &Array2<f64>) -> Array2<f64> {
    match act {
        OutputActivation::Sigmoid => logits.mapv(sigmoid),
        OutputActivation::Softmax => softmax_rows(logits),
        OutputActivation::Identity => logits.clone(),
    }
}

/// Mean loss over the batch and its gradient with respect to the logits.
///
/// Cross-entropy losses are fused with their natural output activation
/// (binary cross-entropy on an identity output treats the output as
/// logits). Mean squared error is measured on the activated output.
pub fn loss_and_grad(
    loss: Loss,
    act: OutputActivation,
    logits: &Array2<f64>,
    targets: ArrayView2<'_, f64>,
) -> Result<(f64, Array2<f64>)> {
    if logits.dim() != targets.dim() {
        return Err(Error::LengthMismatch {
            expected: logits.len(),
            got: targets.len(),
        });
    }
    let (b, m) = logits.dim();
    match (loss, act) {
        (Loss::BinaryCrossEntropy, OutputActivation::Sigmoid | OutputActivation::Identity) => {
            let denom = (b * m) as f64;
            let mut value = 0.0;
            let mut grad = Array2::zeros((b, m));
            Zip::from(&mut grad)
                .and(logits)
                .and(&targets)
                .for_each(|g, &z, &y| {
                    value += softplus(z) - y * z;
                    *g = (sigmoid(z) - y) / denom;
                });
            Ok((value / denom, grad))
        }
        (Loss::CategoricalCrossEntropy, OutputActivation::Softmax) => {
            let probs = softmax_rows(logits);
            let mut value = 0.0;
            for (row, trow) in logits.rows().into_iter().zip(targets.rows()) {
                let max = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                value += row
                    .iter()
                    .zip(trow)
                    .map(|(z, y)| y * (lse - z))
                    .sum::<f64>();
            }
            let grad = (probs - &targets) / b as f64;
            Ok((value / b as f64, grad))
        }
        (Loss::MeanSquaredError, _) => {
            let out = activate(act, logits);
            let denom = (b * m) as f64;
            let diff = &out - &targets;
            let value = diff.iter().map(|d| d * d).sum::<f64>() / denom;
            let g_out = diff * (2.0 / denom);
            let grad = match act {
                OutputActivation::Identity => g_out,
                OutputActivation::Sigmoid => g_out * &out.mapv(|p| p * (1.0 - p)),
                OutputActivation::Softmax => {
                    let dot = (&g_out * &out).sum_axis(Axis(1)).insert_axis(Axis(1));
                    &out * &(g_out - &dot)
                }
            };
            Ok((value, grad))
        }
        _ => Err(Error::InvalidParameter(format!(
            "loss {loss:?} is not defined for a {act:?} output"
        ))),
    }
}

impl Mlp {
    /// He-uniform initialization: weights ~ U(−√(6/fan_in), √(6/fan_in)),
    /// zero biases.
    pub fn new(spec: &MlpSpec, seed: u64) -> Result<Self> {
        if spec.layer_sizes.len() < 2 || spec.layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidParameter(format!(
                "layer sizes {:?} must be positive with input and output",
                spec.layer_sizes
            )));
        }
        let mut r = rng(seed);
        let layers = spec
            .layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / fan_in as f64).sqrt();
                let weights =
                    Array2::from_shape_fn((fan_in, fan_out), |_| r.random_range(-limit..limit));
                Dense {
                    weights,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self {
            layers,
            output: spec.output,
        })
    }

    pub fn spec(&self) -> MlpSpec {
        MlpSpec {
            layer_sizes: self.layer_sizes(),
            output: self.output,
        }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.bias.len()));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].bias.len()
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> Trace {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = current.dot(&layer.weights);
            z += &layer.bias;
            inputs.push(current);
            if i == last {
                return Trace { inputs, logits: z };
            }
            z.mapv_inplace(|v| v.max(0.0));
            current = z;
        }
        unreachable!("network has at least one layer")
    }

    /// Output pre-activations.
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut current = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = current.dot(&layer.weights);
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            current = z;
        }
        current
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        activate(self.output, &self.logits(x))
    }

    /// Backpropagates `grad_logits` (dL/d logits) through the network,
    /// returning parameter gradients and dL/d input.
    pub fn backward(&self, trace: &Trace, grad_logits: &Array2<f64>) -> (Gradients, Array2<f64>) {
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut delta = grad_logits.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.inputs[l];
            grads.push(Dense {
                weights: input.t().dot(&delta),
                bias: delta.sum_axis(Axis(0)),
            });
            let mut upstream = delta.dot(&layer.weights.t());
            if l > 0 {
                // The input of layer l is the ReLU output of layer l − 1.
                Zip::from(&mut upstream).and(input).for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            delta = upstream;
        }
        grads.reverse();
        (Gradients { layers: grads }, delta)
    }

    /// Trains in place with Adam on shuffled mini-batches.
    pub fn fit(
        &mut self,
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
        cfg: &TrainConfig,
    ) -> Result<TrainHistory> {
        let n = x.nrows();
        if y.nrows() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: y.nrows(),
            });
        }
        if x.ncols() != self.input_dim() || y.ncols() != self.output_dim() {
            return Err(Error::InvalidParameter(format!(
                "data shape ({}, {}) does not match network {:?}",
                x.ncols(),
                y.ncols(),
                self.layer_sizes()
            )));
        }
        if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
            return Err(Error::InvalidParameter(
                "batch size and learning rate must be positive".into(),
            ));
        }
        let mut history = TrainHistory::default();
        if cfg.epochs == 0 || n == 0 {
            return Ok(history);
        }

        let mut adam = Adam::new(self, cfg.learning_rate);
        let mut shuffler = rng(derive_seed(cfg.seed, &[tag("shuffle")]));
        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut shuffler);
            let mut total = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                let xb = x.select(Axis(0), batch);
                let yb = y.select(Axis(0), batch);
                let trace = self.forward_cached(xb.view());
                let (loss, grad) = loss_and_grad(cfg.loss, self.output, &trace.logits, yb.view())?;
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch: epoch + 1 });
                }
                total += loss * batch.len() as f64;
                let (grads, _) = self.backward(&trace, &grad);
                adam.step(self, &grads);
            }
            history.epoch_losses.push(total / n as f64);
        }
        Ok(history)
    }
}

/// Initializes a network from `cfg.seed` and trains it.
pub fn mlp_train(
    spec: &MlpSpec,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    cfg: &TrainConfig,
) -> Result<Mlp> {
    let mut mlp = Mlp::new(spec, derive_seed(cfg.seed, &[tag("init")]))?;
    mlp.fit(x, y, cfg)?;
    Ok(mlp)
}

/// Adam with the usual defaults (β₁ = 0.9, β₂ = 0.999, ε = 1e-8).
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Dense>,
    v: Vec<Dense>,
}

impl Adam {
    pub fn new(model: &Mlp, lr: f64) -> Self {
        let zeros: Vec<Dense> = model.layers.iter().map(Dense::zeros_like).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, model: &mut Mlp, grads: &Gradients) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let (lr, eps) = (self.lr, self.eps);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, &g: &f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((layer, m), v), g) in model
            .layers
            .iter_mut()
            .zip(&mut self.m)
            .zip(&mut self.v)
            .zip(&grads.layers)
        {
            Zip::from(&mut layer.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .and(&g.weights)
                .for_each(update);
            Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(update);
        }
    }
}
