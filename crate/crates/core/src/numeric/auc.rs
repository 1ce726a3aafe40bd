use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// Area under the ROC curve as the normalized Mann–Whitney U statistic.
///
/// Tied scores contribute half a pair each (mid-rank convention).
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidParameter("AUC scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of 1-based mid-ranks of the positives.
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let mid_rank = (start + end + 1) as f64 / 2.0;
        let pos_in_run = order[start..end].iter().filter(|&&i| labels[i]).count();
        rank_sum += mid_rank * pos_in_run as f64;
        start = end;
    }

    let n_pos = n_pos as f64;
    let u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg as f64))
}

/// Mean one-vs-all AUC for an `n × m` score matrix and labels in `0..m`.
///
/// With two classes this is the binary AUC of the class-1 column.
pub fn auc_roc_ova(scores: ArrayView2<'_, f64>, labels: &[u32]) -> Result<f64> {
    let (n, m) = scores.dim();
    if n != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            got: n,
        });
    }
    if m < 2 {
        return Err(Error::InvalidParameter(
            "one-vs-all AUC needs at least two classes".into(),
        ));
    }
    if labels.iter().any(|&l| l as usize >= m) {
        return Err(Error::InvalidParameter(format!(
            "label outside 0..{m} in one-vs-all AUC"
        )));
    }
    if m == 2 {
        let col: Vec<f64> = scores.column(1).to_vec();
        let pos: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
        return auc_roc(&col, &pos);
    }
    let mut total = 0.0;
    for class in 0..m {
        let col: Vec<f64> = scores.column(class).to_vec();
        let pos: Vec<bool> = labels.iter().map(|&l| l as usize == class).collect();
        total += auc_roc(&col, &pos)?;
    }
    Ok(total / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    /// Pairwise count over every (positive, negative) pair.
    fn brute_force(scores: &[f64], labels: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn worked_examples() {
        let labels = [false, false, true, true];
        let scores = [0.1, 0.4, 0.35, 0.8];
        assert_eq!(brute_force(&scores, &labels), 0.75);
        assert_eq!(auc_roc(&scores, &labels).unwrap(), 0.75);

        let labels = [true, true, false, false];
        assert_eq!(auc_roc(&[0.9, 0.8, 0.1, 0.2], &labels).unwrap(), 1.0);

        let labels = [false, true, false, true];
        assert_eq!(auc_roc(&[0.5; 4], &labels).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_degenerate() {
        assert!(matches!(
            auc_roc(&[0.1, 0.2], &[true, true]),
            Err(Error::DegenerateLabels)
        ));
    }

    #[test]
    fn ova_examples() {
        let scores = array![[0.9, 0.1], [0.1, 0.9]];
        assert_eq!(auc_roc_ova(scores.view(), &[0, 1]).unwrap(), 1.0);

        let labels = [0u32, 1, 2, 2, 1, 0];
        let mut onehot = Array2::zeros((6, 3));
        for (r, &l) in labels.iter().enumerate() {
            onehot[[r, l as usize]] = 1.0;
        }
        assert_eq!(auc_roc_ova(onehot.view(), &labels).unwrap(), 1.0);

        let uniform = Array2::from_elem((6, 3), 1.0 / 3.0);
        assert_eq!(auc_roc_ova(uniform.view(), &labels).unwrap(), 0.5);

        assert!(matches!(
            auc_roc_ova(uniform.view(), &[0, 1, 1, 0, 1, 0]),
            Err(Error::DegenerateLabels)
        ));
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                // Coarse scores so that ties occur often.
                prop::collection::vec((0i32..12).prop_map(|v| v as f64 / 4.0), n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn matches_pairwise_oracle((scores, labels) in instance()) {
            let has_both = labels.iter().any(|&l| l) && labels.iter().any(|&l| !l);
            prop_assume!(has_both);
            prop_assert_eq!(auc_roc(&scores, &labels).unwrap(), brute_force(&scores, &labels));
        }

        #[test]
        fn complement_and_monotone_invariance(
            raw in prop::collection::vec(-1e3f64..1e3, 4..40),
            seed in any::<u64>(),
        ) {
            let labels: Vec<bool> = (0..raw.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let mut sorted = raw.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted.windows(2).all(|w| w[1] - w[0] > 1e-6));

            let a = auc_roc(&raw, &labels).unwrap();
            let neg: Vec<f64> = raw.iter().map(|s| -s).collect();
            let b = auc_roc(&neg, &labels).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);

            let transformed: Vec<f64> = raw.iter().map(|s| s * s * s + s).collect();
            prop_assert_eq!(auc_roc(&transformed, &labels).unwrap(), a);
        }
    }
}
