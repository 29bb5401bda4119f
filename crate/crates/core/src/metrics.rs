//! Error metrics: state MSE, kernel MMD, and time averages.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::filters::ParticleEnsemble;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub label: String,
    pub times: Vec<usize>,
    pub values: Vec<f64>,
}

impl MetricSeries {
    pub fn new(label: impl Into<String>, times: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        check_dim("metric series length", times.len(), values.len())?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite metric value {v}")));
        }
        Ok(Self {
            label: label.into(),
            times,
            values,
        })
    }
}

/// `|weighted mean(ensemble_t) - X_t|^2` per time.
pub fn mse(label: &str, times: &[usize], ensembles: &[ParticleEnsemble], truth: &[Vec<f64>]) -> Result<MetricSeries> {
    check_dim("ensembles vs truth", truth.len(), ensembles.len())?;
    check_dim("times vs truth", truth.len(), times.len())?;
    let values = ensembles
        .iter()
        .zip(truth)
        .map(|(e, x)| {
            check_dim("truth state", e.state_dim(), x.len())?;
            Ok(e.mean().iter().zip(x).map(|(m, x)| (m - x).powi(2)).sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    MetricSeries::new(label, times.to_vec(), values)
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean of `k(a_i, b_j)` over all pairs; samples are columns.
fn mean_kernel(a: &DMatrix<f64>, b: &DMatrix<f64>, inv_two_h2: f64) -> f64 {
    let d = a.nrows();
    let (sa, sb) = (a.as_slice(), b.as_slice());
    let mut total = 0.0;
    for x in sa.chunks_exact(d) {
        let mut row = 0.0;
        for y in sb.chunks_exact(d) {
            row += (-sq_dist(x, y) * inv_two_h2).exp();
        }
        total += row;
    }
    total / (a.ncols() * b.ncols()) as f64
}

/// Mean of `k(a_i, a_j)` over all ordered pairs, diagonal included, using
/// symmetry to halve the kernel evaluations.
fn mean_kernel_self(a: &DMatrix<f64>, inv_two_h2: f64) -> f64 {
    let (d, count) = (a.nrows(), a.ncols());
    let s = a.as_slice();
    let mut off = 0.0;
    for i in 0..count {
        let x = &s[i * d..(i + 1) * d];
        let mut row = 0.0;
        for j in (i + 1)..count {
            row += (-sq_dist(x, &s[j * d..(j + 1) * d]) * inv_two_h2).exp();
        }
        off += row;
    }
    (count as f64 + 2.0 * off) / (count * count) as f64
}

/// Precomputed self-similarity of a reference sample, so several methods can
/// be scored against the same reference at the cost of the cross term only.
#[derive(Debug, Clone)]
pub struct MmdReference {
    pub sample: DMatrix<f64>,
    pub bandwidth: f64,
    self_term: f64,
}

impl MmdReference {
    pub fn new(sample: DMatrix<f64>, bandwidth: f64) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        if sample.ncols() == 0 {
            return Err(Error::InvalidInput("empty reference sample".into()));
        }
        let self_term = mean_kernel_self(&sample, 1.0 / (2.0 * bandwidth * bandwidth));
        Ok(Self {
            sample,
            bandwidth,
            self_term,
        })
    }

    pub fn mmd(&self, other: &DMatrix<f64>) -> Result<f64> {
        check_samples(&self.sample, other)?;
        let g = 1.0 / (2.0 * self.bandwidth * self.bandwidth);
        let mmd2 = self.self_term + mean_kernel_self(other, g) - 2.0 * mean_kernel(&self.sample, other, g);
        Ok(mmd2.max(0.0).sqrt())
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("bandwidth must be > 0, got {h}")))
    }
}

fn check_samples(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.ncols() == 0 || b.ncols() == 0 {
        return Err(Error::InvalidInput("MMD needs nonempty samples".into()));
    }
    check_dim("MMD sample dimension", a.nrows(), b.nrows())
}

/// Squared biased (V-statistic) MMD with kernel `exp(-|x - x'|^2 / (2 h^2))`.
pub fn mmd_squared(a: &DMatrix<f64>, b: &DMatrix<f64>, bandwidth: f64) -> Result<f64> {
    check_bandwidth(bandwidth)?;
    check_samples(a, b)?;
    let g = 1.0 / (2.0 * bandwidth * bandwidth);
    Ok(mean_kernel_self(a, g) + mean_kernel_self(b, g) - 2.0 * mean_kernel(a, b, g))
}

pub fn mmd(a: &DMatrix<f64>, b: &DMatrix<f64>, bandwidth: f64) -> Result<f64> {
    Ok(mmd_squared(a, b, bandwidth)?.max(0.0).sqrt())
}

/// Median pairwise distance of the pooled sample (first 2000 points at most);
/// falls back to 1 when the median is zero.
pub fn median_heuristic_bandwidth(pooled: &DMatrix<f64>) -> Result<f64> {
    const MAX_POINTS: usize = 2000;
    if pooled.ncols() < 2 {
        return Err(Error::InvalidInput("median heuristic needs at least 2 samples".into()));
    }
    let count = pooled.ncols();
    // Evenly strided subsample keeps the choice deterministic.
    let keep: Vec<usize> = if count <= MAX_POINTS {
        (0..count).collect()
    } else {
        (0..MAX_POINTS).map(|k| k * count / MAX_POINTS).collect()
    };
    let d = pooled.nrows();
    let s = pooled.as_slice();
    let mut dists = Vec::with_capacity(keep.len() * (keep.len() - 1) / 2);
    for (a, &i) in keep.iter().enumerate() {
        for &j in &keep[a + 1..] {
            dists.push(sq_dist(&s[i * d..(i + 1) * d], &s[j * d..(j + 1) * d]).sqrt());
        }
    }
    let mid = dists.len() / 2;
    let (_, median, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let median = *median;
    let h = if dists.len() % 2 == 0 {
        let lower = dists[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + median)
    } else {
        median
    };
    Ok(if h > 0.0 && h.is_finite() { h } else { 1.0 })
}

/// Mean of the values at times `>= from_t`.
pub fn time_average(series: &MetricSeries, from_t: usize) -> Result<f64> {
    let tail: Vec<f64> = series
        .times
        .iter()
        .zip(&series.values)
        .filter(|(t, _)| **t >= from_t)
        .map(|(_, v)| *v)
        .collect();
    if tail.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no values of series {:?} at or after t = {from_t}",
            series.label
        )));
    }
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn row(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, v.len(), v)
    }

    #[test]
    fn mse_zero_at_truth() {
        let truth = vec![vec![1.0, 2.0], vec![-1.0, 0.5]];
        let ens: Vec<_> = truth
            .iter()
            .map(|x| ParticleEnsemble::uniform(DMatrix::from_column_slice(2, 1, x)))
            .collect();
        assert_eq!(mse("m", &[1, 2], &ens, &truth).unwrap().values, vec![0.0, 0.0]);
    }

    #[test]
    fn mse_unit_offset() {
        let e = ParticleEnsemble::uniform(DMatrix::from_column_slice(2, 1, &[4.0, -1.0]));
        let s = mse("m", &[0], &[e], &[vec![3.0, -1.0]]).unwrap();
        assert_eq!(s.values, vec![1.0]);
    }

    #[test]
    fn mse_weighted() {
        let e = ParticleEnsemble::weighted(row(&[0.0, 2.0]), vec![0.25, 0.75]).unwrap();
        let s = mse("m", &[0], &[e], &[vec![1.0]]).unwrap();
        assert_abs_diff_eq!(s.values[0], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn mmd_identical_is_zero() {
        let a = DMatrix::from_fn(2, 30, |i, j| ((i * 31 + j * 7) as f64).sin());
        assert!(mmd(&a, &a.clone(), 0.7).unwrap() < 1e-12);
    }

    #[test]
    fn mmd_singletons() {
        // h^2 = 2: k(0, 2) = exp(-4 / 4) = e^{-1}
        let m2 = mmd_squared(&row(&[0.0]), &row(&[2.0]), 2f64.sqrt()).unwrap();
        assert_abs_diff_eq!(m2, 2.0 - 2.0 * (-1f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(m2, 1.26424, epsilon = 1e-5);
    }

    #[test]
    fn mmd_rejects_bad_bandwidth() {
        assert!(mmd(&row(&[0.0]), &row(&[1.0]), 0.0).is_err());
        assert!(mmd(&row(&[0.0]), &row(&[1.0]), -1.0).is_err());
        assert!(mmd(&row(&[]), &row(&[1.0]), 1.0).is_err());
    }

    #[test]
    fn reference_matches_direct() {
        let mut rng = rng_from_seed(8);
        let a = DMatrix::from_fn(2, 40, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(2, 25, |_, _| rng.random_range(-1.0..2.0));
        let r = MmdReference::new(a.clone(), 0.9).unwrap();
        assert_abs_diff_eq!(r.mmd(&b).unwrap(), mmd(&a, &b, 0.9).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn median_heuristic_examples() {
        assert_eq!(median_heuristic_bandwidth(&row(&[0.0, 1.0])).unwrap(), 1.0);
        assert_eq!(median_heuristic_bandwidth(&row(&[0.0, 1.0, 3.0])).unwrap(), 2.0);
        assert_eq!(median_heuristic_bandwidth(&row(&[5.0, 5.0])).unwrap(), 1.0);
        assert!(median_heuristic_bandwidth(&row(&[5.0])).is_err());
    }

    #[test]
    fn median_heuristic_is_homogeneous() {
        let a = DMatrix::from_fn(3, 50, |i, j| ((i * 13 + j * 5) as f64).cos());
        let h = median_heuristic_bandwidth(&a).unwrap();
        let h3 = median_heuristic_bandwidth(&(a * 3.0)).unwrap();
        assert_abs_diff_eq!(h3, 3.0 * h, epsilon = 1e-12);
    }

    #[test]
    fn time_average_examples() {
        let s = MetricSeries::new("c", vec![0, 1, 2], vec![4.0; 3]).unwrap();
        assert_eq!(time_average(&s, 0).unwrap(), 4.0);
        let s = MetricSeries::new("c", vec![5, 6, 7], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(time_average(&s, 5).unwrap(), 2.0);
        let s = MetricSeries::new("c", vec![5, 6, 7], vec![10.0, 2.0, 4.0]).unwrap();
        assert_eq!(time_average(&s, 6).unwrap(), 3.0);
        assert!(time_average(&s, 8).is_err());
    }

    #[test]
    fn series_rejects_non_finite() {
        assert!(MetricSeries::new("x", vec![0], vec![f64::NAN]).is_err());
        assert!(MetricSeries::new("x", vec![0, 1], vec![1.0]).is_err());
    }

    fn sample(seed: u64, count: usize, shift: f64) -> DMatrix<f64> {
        let mut rng = rng_from_seed(seed);
        DMatrix::from_fn(2, count, |_, _| rng.random_range(-1.0..1.0) + shift)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn mmd_pseudometric(s1 in 0u64..1000, s2 in 0u64..1000, s3 in 0u64..1000, shift in -2.0f64..2.0, h in 0.2f64..3.0) {
            let a = sample(s1, 15, 0.0);
            let b = sample(s2, 20, shift);
            let c = sample(s3, 10, -shift);
            let ab = mmd(&a, &b, h).unwrap();
            let ba = mmd(&b, &a, h).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12);
            let ac = mmd(&a, &c, h).unwrap();
            let cb = mmd(&c, &b, h).unwrap();
            prop_assert!(ab <= ac + cb + 1e-9);
        }

        #[test]
        fn mmd_translation_invariant(s1 in 0u64..1000, s2 in 0u64..1000, dx in -5.0f64..5.0, dy in -5.0f64..5.0) {
            let a = sample(s1, 12, 0.0);
            let b = sample(s2, 9, 0.5);
            let shift = |m: &DMatrix<f64>| DMatrix::from_fn(2, m.ncols(), |i, j| m[(i, j)] + if i == 0 { dx } else { dy });
            let before = mmd_squared(&a, &b, 0.8).unwrap();
            let after = mmd_squared(&shift(&a), &shift(&b), 0.8).unwrap();
            prop_assert!((before - after).abs() <= 1e-12);
        }

        #[test]
        fn mse_permutation_invariant(seed in 0u64..1000) {
            let mut rng = rng_from_seed(seed);
            let p = DMatrix::from_fn(2, 8, |_, _| rng.random_range(-3.0..3.0));
            let mut idx: Vec<usize> = (0..8).collect();
            idx.reverse();
            idx.swap(1, 5);
            let q = DMatrix::from_fn(2, 8, |i, j| p[(i, idx[j])]);
            let truth = vec![vec![0.3, -0.2]];
            let a = mse("a", &[0], &[ParticleEnsemble::uniform(p)], &truth).unwrap().values[0];
            let b = mse("b", &[0], &[ParticleEnsemble::uniform(q)], &truth).unwrap().values[0];
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
