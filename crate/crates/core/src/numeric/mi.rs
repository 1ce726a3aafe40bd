use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Plug-in entropy (nats) of a discrete sample.
pub fn entropy(y: &[u32]) -> f64 {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &v in y {
        *counts.entry(v).or_default() += 1;
    }
    let n = y.len() as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Plug-in mutual information (nats) between a continuous `x`, binned into
/// `bins` equal-width bins over its observed range, and a discrete `y`.
pub fn histogram_mi(x: &[f64], y: &[u32], bins: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if bins < 2 {
        return Err(Error::InvalidParameter("histogram needs at least 2 bins".into()));
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let bin_of = |v: f64| -> usize {
        if width > 0.0 {
            (((v - lo) / width) as usize).min(bins - 1)
        } else {
            0
        }
    };

    let classes: BTreeMap<u32, usize> = {
        let mut m = BTreeMap::new();
        for &v in y {
            let next = m.len();
            m.entry(v).or_insert(next);
        }
        m
    };
    let m = classes.len();
    let mut joint = vec![0usize; bins * m];
    for (&xv, yv) in x.iter().zip(y) {
        joint[bin_of(xv) * m + classes[yv]] += 1;
    }
    let n = x.len() as f64;
    let px: Vec<f64> = (0..bins)
        .map(|b| joint[b * m..(b + 1) * m].iter().sum::<usize>() as f64 / n)
        .collect();
    let py: Vec<f64> = (0..m)
        .map(|c| (0..bins).map(|b| joint[b * m + c]).sum::<usize>() as f64 / n)
        .collect();

    let mut mi = 0.0;
    for b in 0..bins {
        for c in 0..m {
            let count = joint[b * m + c];
            if count > 0 {
                let p = count as f64 / n;
                mi += p * (p / (px[b] * py[c])).ln();
            }
        }
    }
    Ok(mi.max(0.0))
}
