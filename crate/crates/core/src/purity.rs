//! Purity matrices and the Oracle Impurity Score.
//!
//! Entry `(i, j)` of a purity matrix is the held-out AUC of a small probe
//! that predicts ground-truth concept `j` from representation `i`. The
//! oracle matrix is the same construction with the ground-truth labels
//! standing in for the representations, and OIS is the scaled Frobenius
//! distance between the two.

use log::warn;
use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ConceptDataset, RepresentationSet};
use crate::error::{Error, Result};
use crate::numeric::{
    auc_roc, auc_roc_ova, mlp_train, split, Loss, MlpSpec, OutputActivation, SplitSpec,
    TrainConfig,
};
use crate::rng::{derive_seed, tag};

/// Minimum sample count for any probe-based metric.
pub const MIN_SAMPLES: usize = 50;

/// Helper-classifier architecture and training schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub hidden_sizes: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub train_fraction: f64,
}

impl ProbeConfig {
    /// One hidden layer of 32 units, 25 epochs of batches of 128.
    pub fn purity_probe() -> Self {
        Self {
            hidden_sizes: vec![32],
            epochs: 25,
            batch_size: 128,
            learning_rate: 1e-3,
            train_fraction: 0.8,
        }
    }

    /// Two hidden layers of 20 units; same schedule as the purity probe.
    pub fn niche_classifier() -> Self {
        Self {
            hidden_sizes: vec![20, 20],
            ..Self::purity_probe()
        }
    }

    pub fn with_hidden(mut self, hidden: Vec<usize>) -> Self {
        self.hidden_sizes = hidden;
        self
    }
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self::purity_probe()
    }
}

/// `k × k` probe AUCs; `None` marks an entry whose held-out labels were
/// single-class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurityMatrix {
    pub values: Array2<Option<f64>>,
    pub probe_config: ProbeConfig,
    pub seed: u64,
}

impl PurityMatrix {
    pub fn k(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[[i, j]]
    }

    pub fn undefined_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

/// Shared train/test partition for probes over `n` rows.
pub(crate) fn probe_split(n: usize, fraction: f64, seed: u64, label: &str) -> Result<(Vec<usize>, Vec<usize>)> {
    split(n, SplitSpec::new(fraction, derive_seed(seed, &[tag(label)])))
}

/// Trains one probe on `inputs[train]` to predict `target`, returning the
/// held-out AUC, or `None` when the held-out labels miss a class.
pub(crate) fn probe_auc(
    inputs: ArrayView2<'_, f64>,
    target: &[u32],
    classes: usize,
    cfg: &ProbeConfig,
    (train, test): (&[usize], &[usize]),
    seed: u64,
) -> Result<Option<f64>> {
    let test_labels: Vec<u32> = test.iter().map(|&t| target[t]).collect();
    let present = (0..classes as u32).filter(|c| test_labels.contains(c)).count();
    if present < classes {
        return Ok(None);
    }

    let x_train = inputs.select(Axis(0), train);
    let x_test = inputs.select(Axis(0), test);
    let train_cfg = |loss| TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        seed,
        loss,
    };

    if classes <= 2 {
        let y = Array2::from_shape_fn((train.len(), 1), |(r, _)| f64::from(target[train[r]]));
        let spec = MlpSpec::new(inputs.ncols(), &cfg.hidden_sizes, 1, OutputActivation::Sigmoid);
        let probe = mlp_train(&spec, x_train.view(), y.view(), &train_cfg(Loss::BinaryCrossEntropy))?;
        let scores = probe.logits(x_test.view()).column(0).to_vec();
        let labels: Vec<bool> = test_labels.iter().map(|&l| l == 1).collect();
        auc_roc(&scores, &labels).map(Some)
    } else {
        let y = Array2::from_shape_fn((train.len(), classes), |(r, c)| {
            f64::from(target[train[r]] as usize == c)
        });
        let spec = MlpSpec::new(inputs.ncols(), &cfg.hidden_sizes, classes, OutputActivation::Softmax);
        let probe = mlp_train(
            &spec,
            x_train.view(),
            y.view(),
            &train_cfg(Loss::CategoricalCrossEntropy),
        )?;
        let scores = probe.forward(x_test.view());
        auc_roc_ova(scores.view(), &test_labels).map(Some)
    }
}

pub(crate) fn check_inputs(reps: &RepresentationSet, concepts: &ConceptDataset) -> Result<()> {
    reps.check_rows(concepts)?;
    if concepts.n() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            min: MIN_SAMPLES,
            got: concepts.n(),
        });
    }
    Ok(())
}

/// Purity matrix of `reps` against `concepts`.
///
/// All probes share one 80/20 split derived from `seed`; probe `(i, j)` is
/// seeded with `seed ^ (i·k + j)`, so two matrices computed from the same
/// seed use identical splits and initializations.
pub fn purity_matrix(
    reps: &RepresentationSet,
    concepts: &ConceptDataset,
    cfg: &ProbeConfig,
    seed: u64,
) -> Result<PurityMatrix> {
    check_inputs(reps, concepts)?;
    let k = concepts.k();
    if k < 2 {
        return Err(Error::InvalidParameter("purity matrix needs k >= 2".into()));
    }
    if reps.n_concepts() != k || !reps.aligned {
        return Err(Error::InvalidParameter(format!(
            "{} unaligned representations for {k} concepts; align them first",
            reps.n_concepts()
        )));
    }
    let (train, test) = probe_split(concepts.n(), cfg.train_fraction, seed, "probe-split")?;
    let targets: Vec<Vec<u32>> = (0..k).map(|j| concepts.concept(j)).collect();

    let cells: Vec<(usize, usize)> = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect();
    let values = cells
        .par_iter()
        .map(|&(i, j)| {
            probe_auc(
                reps.concept(i),
                &targets[j],
                concepts.classes(j),
                cfg,
                (&train, &test),
                seed ^ (i * k + j) as u64,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let values = Array2::from_shape_vec((k, k), values).expect("k*k entries");
    for ((i, j), v) in values.indexed_iter() {
        if v.is_none() {
            warn!("purity entry ({i}, {j}) undefined: held-out concept {j} is single-class");
        }
    }
    Ok(PurityMatrix {
        values,
        probe_config: cfg.clone(),
        seed,
    })
}

/// Purity matrix with the ground-truth concepts as representations.
pub fn oracle_matrix(concepts: &ConceptDataset, cfg: &ProbeConfig, seed: u64) -> Result<PurityMatrix> {
    purity_matrix(&RepresentationSet::from_concepts(concepts), concepts, cfg, seed)
}

/// `(2 / k_eff)·‖P − O‖_F` over entries defined in both matrices, where
/// `k_eff = √(#valid entries)` (equal to `k` when nothing is undefined).
pub fn ois_from_matrices(purity: &PurityMatrix, oracle: &PurityMatrix) -> Result<f64> {
    if purity.values.dim() != oracle.values.dim() {
        return Err(Error::LengthMismatch {
            expected: oracle.values.len(),
            got: purity.values.len(),
        });
    }
    let mut sum_sq = 0.0;
    let mut valid = 0usize;
    for (p, o) in purity.values.iter().zip(oracle.values.iter()) {
        if let (Some(p), Some(o)) = (p, o) {
            sum_sq += (p - o) * (p - o);
            valid += 1;
        }
    }
    if valid == 0 {
        return Err(Error::DegenerateLabels);
    }
    let k_eff = (valid as f64).sqrt();
    Ok(2.0 * sum_sq.sqrt() / k_eff)
}

/// OIS together with the two matrices it was computed from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OisResult {
    pub ois: f64,
    pub purity: PurityMatrix,
    pub oracle: PurityMatrix,
}

pub fn ois_detailed(
    reps: &RepresentationSet,
    concepts: &ConceptDataset,
    cfg: &ProbeConfig,
    seed: u64,
) -> Result<OisResult> {
    let purity = purity_matrix(reps, concepts, cfg, seed)?;
    let oracle = oracle_matrix(concepts, cfg, seed)?;
    let ois = ois_from_matrices(&purity, &oracle)?;
    Ok(OisResult {
        ois,
        purity,
        oracle,
    })
}

pub fn ois(
    reps: &RepresentationSet,
    concepts: &ConceptDataset,
    cfg: &ProbeConfig,
    seed: u64,
) -> Result<f64> {
    ois_detailed(reps, concepts, cfg, seed).map(|r| r.ois)
}
