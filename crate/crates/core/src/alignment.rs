//! Matching learned representations to ground-truth concepts.

use log::warn;
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ConceptDataset, RepresentationSet};
use crate::error::{Error, Result};
use crate::purity::{check_inputs, probe_auc, probe_split, ProbeConfig};
use crate::rng::{derive_seed, tag};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMap {
    /// `mapping[j]` is the representation matched to concept `j`.
    pub mapping: Vec<usize>,
    /// `k × k′` probe AUCs used for matching.
    pub predictability: Array2<f64>,
}

/// `k × k′` matrix whose `(j, i)` entry is the held-out AUC of a probe
/// predicting concept `j` from representation `i`. Undefined entries are
/// stored as 0.
pub fn predictability_matrix(
    reps: &RepresentationSet,
    concepts: &ConceptDataset,
    cfg: &ProbeConfig,
    seed: u64,
) -> Result<Array2<f64>> {
    check_inputs(reps, concepts)?;
    let (k, kp) = (concepts.k(), reps.n_concepts());
    let (train, test) = probe_split(concepts.n(), cfg.train_fraction, seed, "align-split")?;
    let targets: Vec<Vec<u32>> = (0..k).map(|j| concepts.concept(j)).collect();
    let cells: Vec<(usize, usize)> = (0..k).flat_map(|j| (0..kp).map(move |i| (j, i))).collect();
    let values = cells
        .par_iter()
        .map(|&(j, i)| {
            let auc = probe_auc(
                reps.concept(i),
                &targets[j],
                concepts.classes(j),
                cfg,
                (&train, &test),
                derive_seed(seed, &[tag("align"), j as u64, i as u64]),
            )?;
            if auc.is_none() {
                warn!("predictability of concept {j} from representation {i} undefined");
            }
            Ok(auc.unwrap_or(0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Array2::from_shape_vec((k, kp), values).expect("k*k' entries"))
}

/// Greedy matching: repeatedly take the largest entry among unmatched rows
/// and columns; ties go to the lowest concept index, then the lowest
/// representation index.
pub fn greedy_align(predictability: ArrayView2<'_, f64>) -> Result<AlignmentMap> {
    let (k, kp) = predictability.dim();
    if kp < k {
        return Err(Error::NotEnoughRepresentations {
            concepts: k,
            reps: kp,
        });
    }
    let mut mapping = vec![usize::MAX; k];
    let mut used = vec![false; kp];
    for _ in 0..k {
        let mut best: Option<(usize, usize, f64)> = None;
        for j in (0..k).filter(|&j| mapping[j] == usize::MAX) {
            for i in (0..kp).filter(|&i| !used[i]) {
                let v = predictability[[j, i]];
                let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
                if best.is_none_or(|(_, _, b)| v > b) {
                    best = Some((j, i, v));
                }
            }
        }
        let (j, i, _) = best.expect("unmatched pair exists");
        mapping[j] = i;
        used[i] = true;
    }
    Ok(AlignmentMap {
        mapping,
        predictability: predictability.to_owned(),
    })
}

/// Aligns `reps` to `concepts`, returning the reordered (and truncated)
/// representation set along with the matching.
pub fn align(
    reps: &RepresentationSet,
    concepts: &ConceptDataset,
    cfg: &ProbeConfig,
    seed: u64,
) -> Result<(RepresentationSet, AlignmentMap)> {
    if reps.n_concepts() < concepts.k() {
        return Err(Error::NotEnoughRepresentations {
            concepts: concepts.k(),
            reps: reps.n_concepts(),
        });
    }
    let pred = predictability_matrix(reps, concepts, cfg, seed)?;
    let map = greedy_align(pred.view())?;
    Ok((reps.reorder(&map.mapping), map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_correlated_concepts, gen_pure_reps};
    use ndarray::{array, Array3, Axis};
    use proptest::prelude::*;

    #[test]
    fn greedy_takes_global_maximum_first() {
        // Row-wise greedy would give concept 0 rep 0; the global max (0.95)
        // claims rep 0 for concept 1 instead.
        let m = array![[0.9, 0.8, 0.1], [0.95, 0.2, 0.3]];
        let map = greedy_align(m.view()).unwrap();
        assert_eq!(map.mapping, vec![1, 0]);
    }

    #[test]
    fn ties_prefer_low_indices() {
        let m = array![[0.7, 0.7], [0.7, 0.7]];
        assert_eq!(greedy_align(m.view()).unwrap().mapping, vec![0, 1]);
    }

    #[test]
    fn too_few_reps_is_an_error() {
        let m = array![[0.7], [0.6]];
        assert!(matches!(
            greedy_align(m.view()),
            Err(Error::NotEnoughRepresentations { concepts: 2, reps: 1 })
        ));
    }

    #[test]
    fn recovers_shuffled_pure_reps() {
        let d = gen_correlated_concepts(500, 4, 0.25, 11).unwrap();
        let pure = gen_pure_reps(&d, 11).unwrap();
        let perm = [2usize, 0, 3, 1];
        let mut shuffled = pure.values().select(Axis(1), &perm);
        // An extra distractor representation of pure noise.
        let noise = Array3::from_shape_fn((500, 1, 1), |(r, _, _)| ((r * 7919) % 101) as f64 / 101.0);
        shuffled = ndarray::concatenate(Axis(1), &[shuffled.view(), noise.view()]).unwrap();
        let reps = RepresentationSet::new(shuffled, false).unwrap();
        let (aligned, map) = align(&reps, &d, &ProbeConfig::purity_probe(), 11).unwrap();
        assert_eq!(map.mapping, vec![1, 3, 0, 2]);
        assert!(aligned.aligned);
        assert_eq!(aligned.values(), pure.values());
    }

    proptest! {
        #[test]
        fn mapping_is_injective(values in proptest::collection::vec(0.0f64..1.0, 12), wide in any::<bool>()) {
            let (k, kp) = if wide { (3, 4) } else { (4, 3) };
            let m = Array2::from_shape_vec((k, kp), values).unwrap();
            match greedy_align(m.view()) {
                Ok(map) => {
                    let mut seen = map.mapping.clone();
                    seen.sort_unstable();
                    seen.dedup();
                    prop_assert_eq!(seen.len(), k);
                    prop_assert!(map.mapping.iter().all(|&i| i < kp));
                }
                Err(e) => {
                    prop_assert!(!wide);
                    prop_assert!(
                        matches!(e, Error::NotEnoughRepresentations { .. }),
                        "unexpected error: {e}"
                    );
                }
            }
        }
    }
}
