//! Synthetic concept data.
//!
//! * `gen_tabular_toy`: three Gaussian latents with equicorrelation δ,
//!   thresholded into concepts, mapped to seven non-invertible features; the
//!   task is "at least two concepts on".
//! * `gen_correlated_concepts`: k thresholded equicorrelated Gaussians.
//! * `gen_pure_reps` / `gen_impure_reps`: hand-built soft representations.
//!   Pure ones carry only their own concept; impure ones additionally encode
//!   every other concept of the sample in a sub-interval index.
//! * `gen_spurious_tabular`: appends a label-leaking feature.

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use super::dataset::{ConceptDataset, Provenance, RepresentationSet};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng, tag, Rng};

/// Scale applied to the task label in the spurious feature column.
pub const SPURIOUS_SCALE: f64 = 0.1;

const TABULAR_MAPS: &str = "f1=sin(z1)+z2; f2=z1*z3; f3=z2^2-z3; f4=cos(z2)*z1; \
                            f5=z3^2+z1; f6=tanh(z2+z3); f7=|z1|-z2*z3";

/// Lower-triangular Cholesky factor. Pivots at or below `tol` are rejected
/// when `strict`, otherwise the column is zeroed (semi-definite input).
fn cholesky(sigma: &Array2<f64>, strict: bool) -> Option<Array2<f64>> {
    let n = sigma.nrows();
    let tol = 1e-12;
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let diag = sigma[[j, j]] - (0..j).map(|p| l[[j, p]] * l[[j, p]]).sum::<f64>();
        if diag <= tol {
            if strict || diag < -1e-9 {
                return None;
            }
            continue;
        }
        let root = diag.sqrt();
        l[[j, j]] = root;
        for i in j + 1..n {
            let s = sigma[[i, j]] - (0..j).map(|p| l[[i, p]] * l[[j, p]]).sum::<f64>();
            l[[i, j]] = s / root;
        }
    }
    Some(l)
}

fn equicorrelation(k: usize, rho: f64) -> Array2<f64> {
    Array2::from_shape_fn((k, k), |(i, j)| if i == j { 1.0 } else { rho })
}

/// `n × k` draws from N(0, LLᵀ).
fn sample_gaussian(n: usize, chol: &Array2<f64>, r: &mut Rng) -> Array2<f64> {
    let k = chol.nrows();
    let white = Array2::from_shape_fn((n, k), |_| StandardNormal.sample(r));
    white.dot(&chol.t())
}

/// The seven fixed TabularToy feature maps of a latent triple.
pub fn tabular_features(z: [f64; 3]) -> [f64; 7] {
    let [z1, z2, z3] = z;
    [
        z1.sin() + z2,
        z1 * z3,
        z2 * z2 - z3,
        z2.cos() * z1,
        z3 * z3 + z1,
        (z2 + z3).tanh(),
        z1.abs() - z2 * z3,
    ]
}

/// TabularToy(δ): concepts `c_j = 1(z_j > 0)`, features from the fixed maps,
/// label `y = 1(Σ c_j ≥ 2)`.
pub fn gen_tabular_toy(delta: f64, n: usize, seed: u64) -> Result<ConceptDataset> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "delta {delta} outside [0, 1]"
        )));
    }
    if n < 10 {
        return Err(Error::TooFewSamples { min: 10, got: n });
    }
    let chol = cholesky(&equicorrelation(3, delta), false)
        .ok_or_else(|| Error::InvalidParameter("covariance is not PSD".into()))?;
    let mut r = rng(derive_seed(seed, &[tag("tabular-toy")]));
    let z = sample_gaussian(n, &chol, &mut r);

    let concepts = z.mapv(|v| u32::from(v > 0.0));
    let mut features = Array2::zeros((n, 7));
    for (row, mut out) in z.rows().into_iter().zip(features.rows_mut()) {
        let f = tabular_features([row[0], row[1], row[2]]);
        out.iter_mut().zip(f).for_each(|(o, v)| *o = v);
    }
    let labels = concepts
        .rows()
        .into_iter()
        .map(|c| u32::from(c.sum() >= 2))
        .collect();
    Ok(ConceptDataset::new(concepts)?
        .with_labels(labels)?
        .with_features(features)?
        .with_provenance(Provenance::new(
            "tabular-toy",
            json!({ "delta": delta, "n": n, "maps": TABULAR_MAPS }),
            Some(seed),
        )))
}

/// Binary concepts `c_j = 1(z_j ≥ 0)` with `z ~ N(0, Σ)`, Σ having unit
/// diagonal and `offdiag` elsewhere.
pub fn gen_correlated_concepts(
    n: usize,
    k: usize,
    offdiag: f64,
    seed: u64,
) -> Result<ConceptDataset> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if n == 0 {
        return Err(Error::TooFewSamples { min: 1, got: 0 });
    }
    let chol = cholesky(&equicorrelation(k, offdiag), true).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "off-diagonal {offdiag} makes the {k}x{k} covariance non positive-definite"
        ))
    })?;
    let mut r = rng(derive_seed(seed, &[tag("correlated-concepts")]));
    let z = sample_gaussian(n, &chol, &mut r);
    Ok(ConceptDataset::new(z.mapv(|v| u32::from(v >= 0.0)))?.with_provenance(
        Provenance::new(
            "correlated-concepts",
            json!({ "n": n, "k": k, "offdiag": offdiag }),
            Some(seed),
        ),
    ))
}

fn require_binary(data: &ConceptDataset) -> Result<()> {
    if data.is_binary() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "soft representations need binary concepts".into(),
        ))
    }
}

/// `ĉ_j ~ U[0.95, 1)` when `c_j = 1`, else `U[0, 0.05)`.
pub fn gen_pure_reps(data: &ConceptDataset, seed: u64) -> Result<RepresentationSet> {
    require_binary(data)?;
    let mut r = rng(derive_seed(seed, &[tag("pure-reps")]));
    let values = data.concepts().mapv(|c| {
        let base = if c == 1 { 0.95 } else { 0.0 };
        base + 0.05 * r.random::<f64>()
    });
    Ok(RepresentationSet::from_scalar(values, true)?.with_provenance("pure soft representations"))
}

/// Sub-interval of the on/off band that encodes concept `j` of `row`.
///
/// Both bands are tiled into `2^(k−1)` equal half-open pieces; the piece
/// index is the remaining concepts read as a binary number, lowest concept
/// index most significant.
pub fn impure_interval(row: &[u32], j: usize) -> (f64, f64) {
    let k = row.len();
    let index = row
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != j)
        .fold(0usize, |acc, (_, &c)| (acc << 1) | c as usize);
    let width = 0.05 / (1usize << (k - 1)) as f64;
    let base = if row[j] == 1 { 0.95 } else { 0.0 };
    let lo = base + index as f64 * width;
    (lo, lo + width)
}

pub fn gen_impure_reps(data: &ConceptDataset, seed: u64) -> Result<RepresentationSet> {
    require_binary(data)?;
    let k = data.k();
    if !(2..=16).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "impure representations need 2 <= k <= 16, got {k}"
        )));
    }
    let mut r = rng(derive_seed(seed, &[tag("impure-reps")]));
    let mut values = Array2::zeros((data.n(), k));
    for (row, mut out) in data.concepts().rows().into_iter().zip(values.rows_mut()) {
        let row = row.to_vec();
        for (j, o) in out.iter_mut().enumerate() {
            let (lo, hi) = impure_interval(&row, j);
            let v = lo + (hi - lo) * r.random::<f64>();
            // Rounding must not close the interval.
            *o = if v < hi { v } else { lo };
        }
    }
    Ok(RepresentationSet::from_scalar(values, true)?
        .with_provenance("impure soft representations"))
}

/// Appends a column equal to `0.1·y` with probability `corruption_prob`,
/// otherwise `0.1·y′` for `y′` drawn uniformly from the observed labels.
pub fn gen_spurious_tabular(
    data: &ConceptDataset,
    corruption_prob: f64,
    seed: u64,
) -> Result<ConceptDataset> {
    if !(0.0..=1.0).contains(&corruption_prob) {
        return Err(Error::InvalidParameter(format!(
            "corruption probability {corruption_prob} outside [0, 1]"
        )));
    }
    let labels = data.labels().ok_or(Error::MissingLabels)?;
    let features = data.features().ok_or(Error::MissingFeatures)?;
    let values: Vec<u32> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();

    let mut r = rng(derive_seed(seed, &[tag("spurious")]));
    let column: Vec<f64> = labels
        .iter()
        .map(|&y| {
            let shown = if r.random::<f64>() < corruption_prob {
                y
            } else {
                values[r.random_range(0..values.len())]
            };
            SPURIOUS_SCALE * f64::from(shown)
        })
        .collect();

    let mut extended = Array2::zeros((data.n(), features.ncols() + 1));
    extended
        .slice_mut(ndarray::s![.., ..features.ncols()])
        .assign(&features);
    extended
        .column_mut(features.ncols())
        .assign(&ndarray::Array1::from(column));

    let mut params = json!({ "corruption_prob": corruption_prob, "base": data.provenance });
    params["scale"] = json!(SPURIOUS_SCALE);
    let out = data.clone().with_features(extended)?;
    Ok(out.with_provenance(Provenance::new("spurious-tabular", params, Some(seed))))
}
