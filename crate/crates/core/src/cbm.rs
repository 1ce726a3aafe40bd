//! Joint concept bottleneck models on tabular data.
//!
//! The encoder `g` maps features to `k` concept logits `h`; the predictor
//! `f` maps the bottleneck (`σ(h)` or `h` itself) to a task probability.
//! Both are trained together on `task BCE + α · mean concept BCE(σ(h), c)`.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{gen_spurious_tabular, gen_tabular_toy, ConceptDataset, RepresentationSet};
use crate::error::{Error, Result};
use crate::niche::{nis, NicheConfig};
use crate::numeric::{
    auc_roc, loss_and_grad, mean, pearson, percentile_nearest_rank, std_dev, Adam, Loss, Mlp,
    MlpSpec, OutputActivation,
};
use crate::purity::{ois, ProbeConfig};
use crate::rng::{derive_seed, rng, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bottleneck {
    /// The predictor sees `σ(h)`.
    Sigmoid,
    /// The predictor sees the raw logits `h`.
    Logits,
}

impl Bottleneck {
    pub fn name(self) -> &'static str {
        match self {
            Bottleneck::Sigmoid => "sigmoid",
            Bottleneck::Logits => "logits",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 32,
            learning_rate: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CbmConfig {
    /// Input width, hidden widths, concept count.
    pub encoder_sizes: Vec<usize>,
    /// Hidden widths and output width; the input width is the concept
    /// count.
    pub predictor_sizes: Vec<usize>,
    pub bottleneck: Bottleneck,
    pub alpha: f64,
    pub train: Schedule,
}

impl CbmConfig {
    pub fn new(bottleneck: Bottleneck) -> Self {
        Self {
            encoder_sizes: vec![7, 128, 64, 3],
            predictor_sizes: vec![64, 128, 64, 1],
            bottleneck,
            alpha: 0.1,
            train: Schedule::default(),
        }
    }

    pub fn with_encoder_hidden(mut self, hidden: &[usize]) -> Self {
        let (input, k) = (self.encoder_sizes[0], self.k());
        self.encoder_sizes = std::iter::once(input)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(k))
            .collect();
        self
    }

    pub fn with_predictor_hidden(mut self, hidden: &[usize]) -> Self {
        self.predictor_sizes = hidden.iter().copied().chain(std::iter::once(1)).collect();
        self
    }

    pub fn with_input_width(mut self, width: usize) -> Self {
        self.encoder_sizes[0] = width;
        self
    }

    pub fn k(&self) -> usize {
        *self.encoder_sizes.last().expect("non-empty encoder sizes")
    }

    fn validate(&self, data: &ConceptDataset) -> Result<()> {
        if self.encoder_sizes.len() < 2 || self.predictor_sizes.is_empty() {
            return Err(Error::InvalidParameter("encoder and predictor need layers".into()));
        }
        if self.encoder_sizes.iter().chain(&self.predictor_sizes).any(|&s| s == 0) {
            return Err(Error::InvalidParameter("layer widths must be positive".into()));
        }
        if self.predictor_sizes.last() != Some(&1) {
            return Err(Error::InvalidParameter("predictor must end in one unit".into()));
        }
        if self.k() != data.k() {
            return Err(Error::InvalidParameter(format!(
                "encoder output {} does not match {} concepts",
                self.k(),
                data.k()
            )));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidParameter("alpha must be non-negative".into()));
        }
        if self.train.batch_size == 0 || !(self.train.learning_rate > 0.0) {
            return Err(Error::InvalidParameter(
                "batch size and learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CbmModel {
    pub encoder: Mlp,
    pub predictor: Mlp,
    pub config: CbmConfig,
    /// `k × 2`: nearest-rank 5th and 95th percentiles of each bottleneck
    /// unit over the training set.
    pub concept_percentiles: Array2<f64>,
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

impl CbmModel {
    pub fn k(&self) -> usize {
        self.config.k()
    }

    pub fn concept_logits(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.encoder.logits(x)
    }

    fn to_bottleneck(&self, h: Array2<f64>) -> Array2<f64> {
        match self.config.bottleneck {
            Bottleneck::Sigmoid => h.mapv(sigmoid),
            Bottleneck::Logits => h,
        }
    }

    /// What the predictor consumes.
    pub fn bottleneck(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.to_bottleneck(self.concept_logits(x))
    }

    pub fn concept_probs(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.concept_logits(x).mapv(sigmoid)
    }

    pub fn predict_from_bottleneck(&self, c_hat: ArrayView2<'_, f64>) -> Vec<f64> {
        self.predictor.forward(c_hat).column(0).to_vec()
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        self.predict_from_bottleneck(self.bottleneck(x).view())
    }

    /// Test-set bottleneck as one scalar representation per concept.
    pub fn representations(&self, data: &ConceptDataset) -> Result<RepresentationSet> {
        let x = data.features().ok_or(Error::MissingFeatures)?;
        Ok(RepresentationSet::from_scalar(self.bottleneck(x), true)?
            .with_provenance(format!("{} CBM bottleneck", self.config.bottleneck.name())))
    }

    pub fn evaluate(&self, data: &ConceptDataset) -> Result<CbmEvaluation> {
        let x = data.features().ok_or(Error::MissingFeatures)?;
        let y = data.labels().ok_or(Error::MissingLabels)?;
        let h = self.concept_logits(x);
        let task_accuracy = accuracy(&self.predict_from_bottleneck(self.to_bottleneck(h.clone()).view()), y);

        let mut accs = Vec::with_capacity(self.k());
        let mut aucs = Vec::with_capacity(self.k());
        for j in 0..self.k() {
            let c = data.concept(j);
            let col = h.column(j).to_vec();
            let hits = col.iter().zip(&c).filter(|&(&v, &t)| (v > 0.0) == (t == 1)).count();
            accs.push(hits as f64 / c.len() as f64);
            let labels: Vec<bool> = c.iter().map(|&t| t == 1).collect();
            aucs.push(auc_roc(&col, &labels)?);
        }
        Ok(CbmEvaluation {
            task_accuracy,
            concept_accuracy: mean(&accs),
            concept_auc: mean(&aucs),
            max_inter_concept_corr: max_abs_offdiag_corr(self.to_bottleneck(h).view()),
        })
    }
}

fn accuracy(probs: &[f64], labels: &[u32]) -> f64 {
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|&(&p, &y)| (p > 0.5) == (y == 1))
        .count();
    hits as f64 / labels.len() as f64
}

/// Largest `|pearson|` between two distinct columns; constant columns
/// count as uncorrelated.
pub fn max_abs_offdiag_corr(values: ArrayView2<'_, f64>) -> f64 {
    let cols: Vec<Vec<f64>> = values.axis_iter(Axis(1)).map(|c| c.to_vec()).collect();
    let mut best = 0.0f64;
    for a in 0..cols.len() {
        for b in a + 1..cols.len() {
            if let Ok(r) = pearson(&cols[a], &cols[b]) {
                best = best.max(r.abs());
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CbmEvaluation {
    pub task_accuracy: f64,
    /// Mean over concepts, thresholding `σ(h)` at 0.5.
    pub concept_accuracy: f64,
    pub concept_auc: f64,
    pub max_inter_concept_corr: f64,
}

/// Trains a joint CBM on `data` (features, concepts and labels required).
/// `seed` fixes initialization and batch order.
pub fn train_cbm(data: &ConceptDataset, cfg: &CbmConfig, seed: u64) -> Result<CbmModel> {
    let x = data.features().ok_or(Error::MissingFeatures)?;
    let y = data.labels().ok_or(Error::MissingLabels)?;
    cfg.validate(data)?;
    if x.ncols() != cfg.encoder_sizes[0] {
        return Err(Error::InvalidParameter(format!(
            "{} features but encoder expects {}",
            x.ncols(),
            cfg.encoder_sizes[0]
        )));
    }
    let k = cfg.k();
    let enc_spec = MlpSpec {
        layer_sizes: cfg.encoder_sizes.clone(),
        output: OutputActivation::Identity,
    };
    let pred_spec = MlpSpec {
        layer_sizes: std::iter::once(k).chain(cfg.predictor_sizes.iter().copied()).collect(),
        output: OutputActivation::Sigmoid,
    };
    let mut encoder = Mlp::new(&enc_spec, derive_seed(seed, &[tag("cbm-encoder")]))?;
    let mut predictor = Mlp::new(&pred_spec, derive_seed(seed, &[tag("cbm-predictor")]))?;
    let mut enc_adam = Adam::new(&encoder, cfg.train.learning_rate);
    let mut pred_adam = Adam::new(&predictor, cfg.train.learning_rate);

    let c_all = data.concepts().mapv(f64::from);
    let y_all = Array2::from_shape_fn((data.n(), 1), |(r, _)| f64::from(y[r]));
    let mut shuffler = rng(derive_seed(seed, &[tag("cbm-shuffle")]));
    let mut order: Vec<usize> = (0..data.n()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.train.epochs);

    for epoch in 0..cfg.train.epochs {
        order.shuffle(&mut shuffler);
        let mut total = 0.0;
        for batch in order.chunks(cfg.train.batch_size) {
            let xb = x.select(Axis(0), batch);
            let cb = c_all.select(Axis(0), batch);
            let yb = y_all.select(Axis(0), batch);

            let enc_trace = encoder.forward_cached(xb.view());
            let h = &enc_trace.logits;
            let c_hat = match cfg.bottleneck {
                Bottleneck::Sigmoid => h.mapv(sigmoid),
                Bottleneck::Logits => h.clone(),
            };
            let pred_trace = predictor.forward_cached(c_hat.view());
            let (task_loss, task_grad) =
                loss_and_grad(Loss::BinaryCrossEntropy, OutputActivation::Sigmoid, &pred_trace.logits, yb.view())?;
            let (concept_loss, concept_grad) =
                loss_and_grad(Loss::BinaryCrossEntropy, OutputActivation::Identity, h, cb.view())?;
            let loss = task_loss + cfg.alpha * concept_loss;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch: epoch + 1 });
            }
            total += loss * batch.len() as f64;

            let (pred_grads, mut grad_c_hat) = predictor.backward(&pred_trace, &task_grad);
            if cfg.bottleneck == Bottleneck::Sigmoid {
                Zip::from(&mut grad_c_hat).and(&c_hat).for_each(|g, &s| *g *= s * (1.0 - s));
            }
            let grad_h = grad_c_hat + concept_grad * cfg.alpha;
            let (enc_grads, _) = encoder.backward(&enc_trace, &grad_h);
            pred_adam.step(&mut predictor, &pred_grads);
            enc_adam.step(&mut encoder, &enc_grads);
        }
        epoch_losses.push(total / data.n() as f64);
    }

    let mut model = CbmModel {
        encoder,
        predictor,
        config: cfg.clone(),
        concept_percentiles: Array2::zeros((k, 2)),
        epoch_losses,
    };
    let train_bottleneck = model.bottleneck(x);
    for (j, col) in train_bottleneck.axis_iter(Axis(1)).enumerate() {
        let col = col.to_vec();
        model.concept_percentiles[[j, 0]] = percentile_nearest_rank(&col, 5.0);
        model.concept_percentiles[[j, 1]] = percentile_nearest_rank(&col, 95.0);
    }
    Ok(model)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterventionKind {
    /// `ĉ_i := c_i`; sigmoid bottlenecks only.
    GroundTruth,
    /// `ĉ_i := p5_i` or `p95_i` by the true label; logits bottlenecks only.
    Percentile,
}

impl InterventionKind {
    pub fn name(self) -> &'static str {
        match self {
            InterventionKind::GroundTruth => "ground-truth",
            InterventionKind::Percentile => "percentile",
        }
    }

    /// The policy that fits `bottleneck`.
    pub fn for_bottleneck(bottleneck: Bottleneck) -> Self {
        match bottleneck {
            Bottleneck::Sigmoid => InterventionKind::GroundTruth,
            Bottleneck::Logits => InterventionKind::Percentile,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionPolicy {
    pub kind: InterventionKind,
    pub order: Vec<usize>,
    pub count: usize,
}

impl InterventionPolicy {
    /// Intervenes on the first `count` concepts of a seeded random
    /// permutation of `0..k`.
    pub fn random(kind: InterventionKind, k: usize, count: usize, seed: u64) -> Result<Self> {
        if count > k {
            return Err(Error::InvalidParameter(format!("count {count} exceeds k = {k}")));
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng(derive_seed(seed, &[tag("intervention-order")])));
        Ok(Self { kind, order, count })
    }
}

/// Task probabilities after overwriting the policy's concepts in the
/// bottleneck.
pub fn intervene(
    model: &CbmModel,
    features: ArrayView2<'_, f64>,
    concepts: ArrayView2<'_, u32>,
    policy: &InterventionPolicy,
) -> Result<Vec<f64>> {
    let expected = InterventionKind::for_bottleneck(model.config.bottleneck);
    if policy.kind != expected {
        return Err(Error::PolicyMismatch {
            policy: policy.kind.name(),
            bottleneck: model.config.bottleneck.name(),
        });
    }
    if features.nrows() != concepts.nrows() {
        return Err(Error::LengthMismatch {
            expected: features.nrows(),
            got: concepts.nrows(),
        });
    }
    if policy.count > policy.order.len() || policy.order.iter().any(|&i| i >= model.k()) {
        return Err(Error::InvalidParameter("intervention order out of range".into()));
    }
    let mut c_hat = model.bottleneck(features);
    for &i in &policy.order[..policy.count] {
        for (v, &c) in c_hat.column_mut(i).iter_mut().zip(concepts.column(i)) {
            *v = match policy.kind {
                InterventionKind::GroundTruth => f64::from(c),
                InterventionKind::Percentile => model.concept_percentiles[[i, usize::from(c == 1)]],
            };
        }
    }
    Ok(model.predict_from_bottleneck(c_hat.view()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionCurve {
    pub counts: Vec<usize>,
    pub mean_accuracy: Vec<f64>,
    /// Half-width of a normal 95% interval over orders.
    pub ci95: Vec<f64>,
}

impl InterventionCurve {
    /// Accuracy with every concept intervened minus accuracy with none.
    pub fn gain(&self) -> f64 {
        self.mean_accuracy[self.mean_accuracy.len() - 1] - self.mean_accuracy[0]
    }
}

/// Task accuracy on `test` for `count = 0..=k`, averaged over one random
/// order per seed.
pub fn intervention_curve(
    model: &CbmModel,
    test: &ConceptDataset,
    kind: InterventionKind,
    seeds: &[u64],
) -> Result<InterventionCurve> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("intervention curve needs seeds".into()));
    }
    let x = test.features().ok_or(Error::MissingFeatures)?;
    let y = test.labels().ok_or(Error::MissingLabels)?;
    let k = model.k();
    let mut curve = InterventionCurve {
        counts: (0..=k).collect(),
        mean_accuracy: Vec::with_capacity(k + 1),
        ci95: Vec::with_capacity(k + 1),
    };
    for count in 0..=k {
        let accs = seeds
            .iter()
            .map(|&s| {
                let policy = InterventionPolicy::random(kind, k, count, s)?;
                Ok(accuracy(&intervene(model, x, test.concepts(), &policy)?, y))
            })
            .collect::<Result<Vec<_>>>()?;
        let spread = if accs.len() > 1 { std_dev(&accs) } else { 0.0 };
        curve.mean_accuracy.push(mean(&accs));
        curve.ci95.push(1.96 * spread / (accs.len() as f64).sqrt());
    }
    Ok(curve)
}

/// A train/test pair for CBM experiments.
#[derive(Clone, Debug)]
pub struct CbmData {
    pub train: ConceptDataset,
    pub test: ConceptDataset,
}

impl CbmData {
    pub const TRAIN: usize = 2000;
    pub const TEST: usize = 1000;

    /// TabularToy(δ) with 2000 training and 1000 test rows.
    pub fn tabular_toy(delta: f64, seed: u64) -> Result<Self> {
        let all = gen_tabular_toy(delta, Self::TRAIN + Self::TEST, seed)?;
        let train: Vec<usize> = (0..Self::TRAIN).collect();
        let test: Vec<usize> = (Self::TRAIN..Self::TRAIN + Self::TEST).collect();
        Ok(Self {
            train: all.subset(&train),
            test: all.subset(&test),
        })
    }
}

/// Impurity of a trained model's test-set bottleneck.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CbmImpurity {
    pub ois: f64,
    pub nis: f64,
}

pub fn cbm_impurity(
    model: &CbmModel,
    test: &ConceptDataset,
    probe: &ProbeConfig,
    niche: &NicheConfig,
    seed: u64,
) -> Result<CbmImpurity> {
    let reps = model.representations(test)?;
    Ok(CbmImpurity {
        ois: ois(&reps, test, probe, seed)?,
        nis: nis(&reps, test, niche, seed)?.nis,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Component {
    Encoder,
    Predictor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub capacity: usize,
    pub task_accuracy: f64,
    pub concept_accuracy: f64,
    pub concept_auc: f64,
    pub ois: f64,
}

/// Trains one model per capacity with the swept component's hidden layers
/// set to `[capacity, capacity / 2]` and the other component at `[128, 64]`.
pub fn capacity_sweep(
    data: &CbmData,
    component: Component,
    capacities: &[usize],
    base: &CbmConfig,
    seed: u64,
) -> Result<Vec<CapacityRow>> {
    if let Some(&c) = capacities.iter().find(|&&c| c < 2) {
        return Err(Error::InvalidParameter(format!("capacity {c} is below 2")));
    }
    capacities
        .iter()
        .map(|&capacity| {
            let swept = [capacity, capacity / 2];
            let fixed = [128, 64];
            let cfg = match component {
                Component::Encoder => base.clone().with_encoder_hidden(&swept).with_predictor_hidden(&fixed),
                Component::Predictor => base.clone().with_encoder_hidden(&fixed).with_predictor_hidden(&swept),
            };
            let model = train_cbm(&data.train, &cfg, seed)?;
            let eval = model.evaluate(&data.test)?;
            let reps = model.representations(&data.test)?;
            Ok(CapacityRow {
                capacity,
                task_accuracy: eval.task_accuracy,
                concept_accuracy: eval.concept_accuracy,
                concept_auc: eval.concept_auc,
                ois: ois(&reps, &data.test, &ProbeConfig::default(), seed)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub evaluation: CbmEvaluation,
    pub impurity: CbmImpurity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpuriousReport {
    pub corruption_prob: f64,
    pub clean: ModelReport,
    pub corrupted: ModelReport,
}

pub const DEFAULT_CORRUPTION: f64 = 0.75;

/// Trains the same CBM on TabularToy(0) with an appended uninformative
/// column and with the spurious label column, then evaluates both where
/// the extra column carries no label information.
pub fn spurious_experiment(base: &CbmConfig, corruption_prob: f64, seed: u64) -> Result<SpuriousReport> {
    let data = CbmData::tabular_toy(0.0, seed)?;
    let clean_train = gen_spurious_tabular(&data.train, 0.0, derive_seed(seed, &[tag("clean-train")]))?;
    let corrupt_train = gen_spurious_tabular(&data.train, corruption_prob, derive_seed(seed, &[tag("corrupt-train")]))?;
    let test = gen_spurious_tabular(&data.test, 0.0, derive_seed(seed, &[tag("clean-test")]))?;
    let width = test.features().expect("features").ncols();
    let cfg = base.clone().with_input_width(width);

    let report = |train: &ConceptDataset| -> Result<ModelReport> {
        let model = train_cbm(train, &cfg, seed)?;
        Ok(ModelReport {
            evaluation: model.evaluate(&test)?,
            impurity: cbm_impurity(&model, &test, &ProbeConfig::default(), &NicheConfig::default(), seed)?,
        })
    };
    Ok(SpuriousReport {
        corruption_prob,
        clean: report(&clean_train)?,
        corrupted: report(&corrupt_train)?,
    })
}
