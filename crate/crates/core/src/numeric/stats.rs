use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewSamples {
            min: 2,
            got: x.len(),
        });
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Mid-ranks (1-based) with ties averaged.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            out[i] = r;
        }
        start = end;
    }
    out
}

/// Spearman rank correlation: Pearson on mid-ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson(&ranks(x), &ranks(y))
}

/// Two-sided Welch t-test p-value.
///
/// When both samples have zero variance the statistic is undefined; the
/// result is 1.0 for equal means and 0.0 otherwise.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(Error::TooFewSamples {
                min: 2,
                got: s.len(),
            });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Ok(if ma == mb { 1.0 } else { 0.0 });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::InvalidParameter(format!("t distribution: {e}")))?;
    Ok((2.0 * dist.sf(t.abs())).clamp(0.0, 1.0))
}

/// Composite trapezoid rule over a strictly ascending grid.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> Result<f64> {
    if grid.len() != values.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: values.len(),
        });
    }
    if grid.len() < 2 {
        return Err(Error::TooFewSamples {
            min: 2,
            got: grid.len(),
        });
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid);
    }
    Ok(grid
        .windows(2)
        .zip(values.windows(2))
        .map(|(g, v)| (g[1] - g[0]) * (v[0] + v[1]) / 2.0)
        .sum())
}

/// Nearest-rank percentile (`p` in percent): the smallest value with at
/// least `p`% of the sample at or below it.
pub fn percentile_nearest_rank(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        // cov = 4 / (sqrt(5) * sqrt(5)) from centered sums.
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn welch_examples() {
        assert_eq!(welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(welch_t_test(&[0.0; 3], &[1.0; 3]).unwrap(), 0.0);
        assert_eq!(welch_t_test(&[2.0; 3], &[2.0; 4]).unwrap(), 1.0);

        // Reference values from scipy.stats.ttest_ind(equal_var=False).
        let p = welch_t_test(&[2.1, 2.0, 1.9, 2.2, 1.8], &[3.1, 3.0, 2.9, 3.2, 2.8]).unwrap();
        assert!(p < 1e-3);
        assert!((p - 8.488181527628536e-06).abs() < 1e-9);
        let p = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.5], &[2.0, 3.1, 4.0, 6.0, 8.0, 9.0]).unwrap();
        assert!((p - 0.1396905587518845).abs() < 1e-9);
        let p = welch_t_test(&[0.1, 0.2, 0.15], &[0.3, 0.2, 0.25, 0.4]).unwrap();
        assert!((p - 0.04585584166130262).abs() < 1e-9);

        assert!(matches!(
            welch_t_test(&[1.0], &[1.0, 2.0]),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn trapezoid_examples() {
        assert_eq!(trapezoid(&[0.0, 0.5, 1.0], &[0.0, 1.0, 0.0]).unwrap(), 0.5);
        assert_eq!(trapezoid(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.5);
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
        let flat = vec![0.5; grid.len()];
        assert!((trapezoid(&grid, &flat).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            trapezoid(&[0.0, 0.5, 0.5], &[1.0, 1.0, 1.0]),
            Err(Error::InvalidGrid)
        ));
    }

    #[test]
    fn spearman_of_one_swap() {
        // scipy.stats.spearmanr gives -0.8 for one adjacent swap of four.
        let r = spearman(&[4.0, 16.0, 64.0, 128.0], &[0.3, 0.2, 0.21, 0.1]).unwrap();
        assert!((r + 0.8).abs() < 1e-12);
    }

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(percentile_nearest_rank(&v, 5.0), 5.0);
        assert_eq!(percentile_nearest_rank(&v, 95.0), 95.0);
        assert_eq!(percentile_nearest_rank(&[3.0], 5.0), 3.0);
    }

    proptest! {
        #[test]
        fn trapezoid_exact_on_linear(
            mut grid in prop::collection::vec(-10.0f64..10.0, 2..30),
            slope in -5.0f64..5.0,
            icpt in -5.0f64..5.0,
        ) {
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            prop_assume!(grid.len() >= 2 && grid.windows(2).all(|w| w[1] - w[0] > 1e-9));
            let vals: Vec<f64> = grid.iter().map(|g| slope * g + icpt).collect();
            let (a, b) = (grid[0], grid[grid.len() - 1]);
            let exact = slope * (b * b - a * a) / 2.0 + icpt * (b - a);
            let got = trapezoid(&grid, &vals).unwrap();
            prop_assert!((got - exact).abs() <= 1e-9 * (1.0 + exact.abs()));
        }

        #[test]
        fn pearson_symmetric_and_affine_invariant(
            xs in prop::collection::vec(-100.0f64..100.0, 3..30),
            noise in prop::collection::vec(-100.0f64..100.0, 30),
            scale in 0.1f64..10.0,
            shift in -50.0f64..50.0,
        ) {
            let ys: Vec<f64> = xs.iter().zip(&noise).map(|(x, e)| x + e).collect();
            let Ok(r) = pearson(&xs, &ys) else { return Ok(()); };
            prop_assert!((pearson(&ys, &xs).unwrap() - r).abs() < 1e-12);
            let xt: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
            prop_assert!((pearson(&xt, &ys).unwrap() - r).abs() < 1e-9);
        }
    }
}
