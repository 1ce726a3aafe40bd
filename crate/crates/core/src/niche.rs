//! Concept niches and the Niche Impurity Score.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ConceptDataset, RepresentationSet};
use crate::error::{Error, Result};
use crate::numeric::{pearson, trapezoid};
use crate::purity::{check_inputs, probe_auc, probe_split, ProbeConfig};
use crate::rng::{derive_seed, tag};

/// How representations are assigned to a concept's niche.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Nicher {
    /// Absolute Pearson correlation, maximised over the representation's
    /// dimensions.
    #[default]
    #[serde(rename = "ccorrn")]
    CCorrN,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NicheConfig {
    pub beta_grid: Vec<f64>,
    pub nicher: Nicher,
    pub classifier: ProbeConfig,
}

impl NicheConfig {
    /// `0, 0.05, …, 1`.
    pub fn default_grid() -> Vec<f64> {
        (0..=20).map(|i| i as f64 / 20.0).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.beta_grid;
        let ascending = g.windows(2).all(|w| w[0] < w[1]);
        if g.len() < 2 || g[0] != 0.0 || g[g.len() - 1] != 1.0 || !ascending {
            return Err(Error::InvalidGrid);
        }
        Ok(())
    }
}

impl Default for NicheConfig {
    fn default() -> Self {
        Self {
            beta_grid: Self::default_grid(),
            nicher: Nicher::CCorrN,
            classifier: ProbeConfig::niche_classifier(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NicheReport {
    /// `k′ × k` nicher scores.
    pub nicher_matrix: Array2<f64>,
    /// `|grid| × k` niche impurities; `None` where held-out labels were
    /// single-class.
    pub per_beta_ni: Array2<Option<f64>>,
    pub beta_grid: Vec<f64>,
    pub nis: f64,
}

impl NicheReport {
    /// Mean defined NI per grid point.
    pub fn mean_curve(&self) -> Vec<Option<f64>> {
        self.per_beta_ni
            .axis_iter(Axis(0))
            .map(|row| {
                let defined: Vec<f64> = row.iter().flatten().copied().collect();
                (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
            })
            .collect()
    }
}

/// `k′ × k` matrix of `max_d |pearson(ĉ_i[:, d], c_j)|`. Constant columns
/// score 0.
pub fn ccorrn(reps: &RepresentationSet, concepts: &ConceptDataset) -> Result<Array2<f64>> {
    reps.check_rows(concepts)?;
    let targets: Vec<Vec<f64>> = (0..concepts.k()).map(|j| concepts.concept_f64(j)).collect();
    let mut out = Array2::zeros((reps.n_concepts(), concepts.k()));
    for i in 0..reps.n_concepts() {
        let block = reps.concept(i);
        for (j, target) in targets.iter().enumerate() {
            let mut best = 0.0f64;
            for col in block.axis_iter(Axis(1)) {
                match pearson(&col.to_vec(), target) {
                    Ok(r) => best = best.max(r.abs()),
                    Err(Error::ZeroVariance) => {}
                    Err(e) => return Err(e),
                }
            }
            out[[i, j]] = best;
        }
    }
    Ok(out)
}

/// Representations whose nicher score for concept `j` strictly exceeds
/// `beta`.
pub fn niche(nicher_matrix: ArrayView2<'_, f64>, j: usize, beta: f64) -> Vec<usize> {
    nicher_matrix
        .column(j)
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > beta)
        .map(|(i, _)| i)
        .collect()
}

/// Held-out AUC of a classifier predicting concept `j` from all
/// representations, with the representations in `masked` replaced by zeros
/// during both training and evaluation. Returns 0.5 when nothing is left
/// unmasked and `None` when the held-out labels are single-class.
pub fn niche_impurity_masked(
    reps: &RepresentationSet,
    concepts: &ConceptDataset,
    j: usize,
    masked: &[usize],
    classifier: &ProbeConfig,
    split: (&[usize], &[usize]),
    seed: u64,
) -> Result<Option<f64>> {
    if masked.len() >= reps.n_concepts() {
        return Ok(Some(0.5));
    }
    let mut x = reps.flatten();
    let d = reps.dim();
    for &i in masked {
        x.slice_mut(ndarray::s![.., i * d..(i + 1) * d]).fill(0.0);
    }
    probe_auc(
        x.view(),
        &concepts.concept(j),
        concepts.classes(j),
        classifier,
        split,
        seed,
    )
}

fn ni_seed(seed: u64, j: usize, beta: f64) -> u64 {
    derive_seed(seed, &[tag("niche-impurity"), j as u64, beta.to_bits()])
}

/// Niche impurity of concept `j` at threshold `beta`.
pub fn niche_impurity(
    reps: &RepresentationSet,
    concepts: &ConceptDataset,
    j: usize,
    beta: f64,
    cfg: &NicheConfig,
    seed: u64,
) -> Result<Option<f64>> {
    check_inputs(reps, concepts)?;
    if j >= concepts.k() {
        return Err(Error::InvalidParameter(format!("concept {j} out of range")));
    }
    let scores = ccorrn(reps, concepts)?;
    let (train, test) = probe_split(concepts.n(), cfg.classifier.train_fraction, seed, "niche-split")?;
    let masked = niche(scores.view(), j, beta);
    niche_impurity_masked(
        reps,
        concepts,
        j,
        &masked,
        &cfg.classifier,
        (&train, &test),
        ni_seed(seed, j, beta),
    )
}

/// NI for every concept and grid point, averaged over concepts and
/// integrated over the grid with the trapezoid rule. Grid points where no
/// concept has a defined NI are dropped from the integral.
pub fn nis(
    reps: &RepresentationSet,
    concepts: &ConceptDataset,
    cfg: &NicheConfig,
    seed: u64,
) -> Result<NicheReport> {
    cfg.validate()?;
    check_inputs(reps, concepts)?;
    let k = concepts.k();
    let scores = ccorrn(reps, concepts)?;
    let (train, test) = probe_split(concepts.n(), cfg.classifier.train_fraction, seed, "niche-split")?;

    let cells: Vec<(usize, usize)> = (0..cfg.beta_grid.len())
        .flat_map(|b| (0..k).map(move |j| (b, j)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(b, j)| {
            let beta = cfg.beta_grid[b];
            let masked = niche(scores.view(), j, beta);
            niche_impurity_masked(
                reps,
                concepts,
                j,
                &masked,
                &cfg.classifier,
                (&train, &test),
                ni_seed(seed, j, beta),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let per_beta_ni = Array2::from_shape_vec((cfg.beta_grid.len(), k), values).expect("grid*k entries");

    let mut report = NicheReport {
        nicher_matrix: scores,
        per_beta_ni,
        beta_grid: cfg.beta_grid.clone(),
        nis: f64::NAN,
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = report
        .mean_curve()
        .into_iter()
        .zip(&cfg.beta_grid)
        .filter_map(|(m, &b)| m.map(|m| (b, m)))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::DegenerateLabels);
    }
    report.nis = trapezoid(&xs, &ys)?;
    Ok(report)
}
