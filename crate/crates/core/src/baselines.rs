//! Disentanglement baselines: Mutual Information Gap and Separated
//! Attribute Predictability.

use log::warn;
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{ConceptDataset, RepresentationSet};
use crate::error::{Error, Result};
use crate::numeric::{entropy, histogram_mi, mean};
use crate::purity::probe_split;

pub const DEFAULT_BINS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineScores {
    pub mig: f64,
    pub sap: f64,
}

pub fn baselines(reps: &RepresentationSet, concepts: &ConceptDataset, seed: u64) -> Result<BaselineScores> {
    Ok(BaselineScores {
        mig: mig(reps, concepts, DEFAULT_BINS)?,
        sap: sap(reps, concepts, seed)?,
    })
}

fn top_two_gap(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| b.total_cmp(a));
    values[0] - values[1]
}

fn check(reps: &RepresentationSet, concepts: &ConceptDataset) -> Result<()> {
    reps.check_rows(concepts)?;
    if reps.n_concepts() < 2 {
        return Err(Error::InvalidParameter("need at least two representations".into()));
    }
    Ok(())
}

/// Mean over concepts of the gap between the two largest
/// `I(ĉ_i; c_j)` values, normalised by `H(c_j)`, with `bins` equal-width
/// bins per representation dimension (multi-dimensional representations
/// use their most informative dimension). Concepts with zero entropy are
/// skipped.
pub fn mig(reps: &RepresentationSet, concepts: &ConceptDataset, bins: usize) -> Result<f64> {
    check(reps, concepts)?;
    let mut gaps = Vec::new();
    for j in 0..concepts.k() {
        let c = concepts.concept(j);
        let h = entropy(&c);
        if h <= 1e-12 {
            warn!("MIG: concept {j} is constant and was skipped");
            continue;
        }
        let mut mis = Vec::with_capacity(reps.n_concepts());
        for i in 0..reps.n_concepts() {
            let mut best = f64::NEG_INFINITY;
            for col in reps.concept(i).axis_iter(Axis(1)) {
                best = best.max(histogram_mi(&col.to_vec(), &c, bins)?);
            }
            mis.push(best);
        }
        gaps.push(top_two_gap(mis) / h);
    }
    if gaps.is_empty() {
        return Err(Error::DegenerateLabels);
    }
    Ok(mean(&gaps))
}

/// SAP from a `k′ × k` importance matrix (rows are representations).
pub fn sap_from_importance(importance: ArrayView2<'_, f64>) -> Result<f64> {
    if importance.nrows() < 2 || importance.ncols() == 0 {
        return Err(Error::InvalidParameter("importance matrix needs at least two rows".into()));
    }
    let gaps: Vec<f64> = importance.axis_iter(Axis(1)).map(|col| top_two_gap(col.to_vec())).collect();
    Ok(mean(&gaps))
}

/// One-feature threshold classifier. The threshold comes from an
/// L2-regularised logistic fit on standardised inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stump {
    slope: f64,
    intercept: f64,
    center: f64,
    scale: f64,
}

impl Stump {
    const L2: f64 = 1e-3;

    pub fn fit(x: &[f64], y: &[bool]) -> Self {
        let center = mean(x);
        let var = x.iter().map(|v| (v - center).powi(2)).sum::<f64>() / x.len() as f64;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let z: Vec<f64> = x.iter().map(|v| (v - center) / scale).collect();
        let n = x.len() as f64;

        let (mut a, mut b) = (0.0f64, 0.0f64);
        for _ in 0..100 {
            let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (Self::L2 * a, 0.0, Self::L2, 0.0, 1e-9);
            for (&zi, &yi) in z.iter().zip(y) {
                let p = 1.0 / (1.0 + (-(a * zi + b)).exp());
                let r = (p - f64::from(u8::from(yi))) / n;
                let w = p * (1.0 - p) / n;
                ga += r * zi;
                gb += r;
                haa += w * zi * zi;
                hab += w * zi;
                hbb += w;
            }
            let det = haa * hbb - hab * hab;
            if det.abs() < 1e-300 {
                break;
            }
            let da = (hbb * ga - hab * gb) / det;
            let db = (haa * gb - hab * ga) / det;
            a -= da;
            b -= db;
            if da.abs() + db.abs() < 1e-10 {
                break;
            }
        }
        Self {
            slope: a,
            intercept: b,
            center,
            scale,
        }
    }

    pub fn predict(&self, x: f64) -> bool {
        self.slope * (x - self.center) / self.scale + self.intercept > 0.0
    }
}

fn balanced_accuracy(pred: &[bool], truth: &[bool]) -> Option<f64> {
    let (mut tp, mut pos, mut tn, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        if t {
            pos += 1;
            tp += usize::from(p);
        } else {
            neg += 1;
            tn += usize::from(!p);
        }
    }
    (pos > 0 && neg > 0).then(|| 0.5 * (tp as f64 / pos as f64 + tn as f64 / neg as f64))
}

/// `k′ × k` importance matrix: `max(0, 2·(balanced accuracy − 0.5))` of a
/// held-out threshold classifier predicting binary concept `j` from the
/// first dimension of representation `i`. Concepts whose train or test
/// labels are single-class get a column of `NaN`.
pub fn sap_importance(reps: &RepresentationSet, concepts: &ConceptDataset, seed: u64) -> Result<Array2<f64>> {
    check(reps, concepts)?;
    if !concepts.is_binary() {
        return Err(Error::InvalidParameter("SAP needs binary concepts".into()));
    }
    let (train, test) = probe_split(concepts.n(), 0.8, seed, "sap-split")?;
    let mut out = Array2::from_elem((reps.n_concepts(), concepts.k()), f64::NAN);
    for j in 0..concepts.k() {
        let c = concepts.concept(j);
        let y_train: Vec<bool> = train.iter().map(|&r| c[r] == 1).collect();
        let y_test: Vec<bool> = test.iter().map(|&r| c[r] == 1).collect();
        let degenerate = |y: &[bool]| y.iter().all(|&v| v) || y.iter().all(|&v| !v);
        if degenerate(&y_train) || degenerate(&y_test) {
            warn!("SAP: concept {j} is single-class in a split and was skipped");
            continue;
        }
        for i in 0..reps.n_concepts() {
            let x = reps.concept(i).column(0).to_vec();
            let x_train: Vec<f64> = train.iter().map(|&r| x[r]).collect();
            let stump = Stump::fit(&x_train, &y_train);
            let pred: Vec<bool> = test.iter().map(|&r| stump.predict(x[r])).collect();
            let acc = balanced_accuracy(&pred, &y_test).expect("both classes present");
            out[[i, j]] = (2.0 * (acc - 0.5)).max(0.0);
        }
    }
    Ok(out)
}

pub fn sap(reps: &RepresentationSet, concepts: &ConceptDataset, seed: u64) -> Result<f64> {
    let importance = sap_importance(reps, concepts, seed)?;
    let kept: Vec<usize> = (0..importance.ncols())
        .filter(|&j| !importance[[0, j]].is_nan())
        .collect();
    if kept.is_empty() {
        return Err(Error::DegenerateLabels);
    }
    sap_from_importance(importance.select(Axis(1), &kept).view())
}
