//! Small statistical helpers used by the experiment harnesses: goodness-of-fit
//! and two-sample chi-square tests, Wilson intervals, running moments.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Expected counts below this are pooled into a single bin.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareResult {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }
}

fn upper_tail(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive dof");
    dist.sf(statistic)
}

/// Goodness of fit of `observed` counts against the probabilities in
/// `expected`. Keys absent from `expected` are treated as probability zero
/// (any observation there makes the test fail outright).
pub fn chi_square_gof<K: Ord + Clone>(
    observed: &BTreeMap<K, u64>,
    expected: &BTreeMap<K, f64>,
) -> ChiSquareResult {
    let total: u64 = observed.values().sum();
    let total = total as f64;
    if observed.keys().any(|k| expected.get(k).is_none_or(|&p| p <= 0.0)) {
        return ChiSquareResult {
            statistic: f64::INFINITY,
            dof: 0,
            p_value: 0.0,
        };
    }
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (k, &p) in expected {
        let e = p * total;
        let o = observed.get(k).copied().unwrap_or(0) as f64;
        if e < MIN_EXPECTED {
            pooled_obs += o;
            pooled_exp += e;
        } else {
            bins.push((o, e));
        }
    }
    if pooled_exp > 0.0 {
        bins.push((pooled_obs, pooled_exp));
    }
    let statistic: f64 = bins.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len().saturating_sub(1);
    ChiSquareResult {
        statistic,
        dof,
        p_value: upper_tail(statistic, dof),
    }
}

/// Two-sample chi-square test of homogeneity on categorical counts. Sparse
/// categories (pooled expected count below [`MIN_EXPECTED`] in either sample)
/// are merged.
pub fn two_sample_chi_square<K: Ord + Clone>(
    a: &BTreeMap<K, u64>,
    b: &BTreeMap<K, u64>,
) -> ChiSquareResult {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    let (na, nb) = (na as f64, nb as f64);
    let total = na + nb;
    let mut keys: Vec<&K> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut pool_a, mut pool_b) = (0.0, 0.0);
    for k in keys {
        let oa = a.get(k).copied().unwrap_or(0) as f64;
        let ob = b.get(k).copied().unwrap_or(0) as f64;
        let row = oa + ob;
        if row * na.min(nb) / total < MIN_EXPECTED {
            pool_a += oa;
            pool_b += ob;
        } else {
            cells.push((oa, ob));
        }
    }
    if pool_a + pool_b > 0.0 {
        cells.push((pool_a, pool_b));
    }
    let mut statistic = 0.0;
    for &(oa, ob) in &cells {
        let row = oa + ob;
        let ea = row * na / total;
        let eb = row * nb / total;
        statistic += (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb;
    }
    let dof = cells.len().saturating_sub(1);
    ChiSquareResult {
        statistic,
        dof,
        p_value: upper_tail(statistic, dof),
    }
}

/// Normal quantile for two-sided 99.9% intervals.
pub const Z_999: f64 = 3.290_526_731_491_926;

/// A binomial proportion with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Proportion {
    pub fn wilson(successes: u64, trials: u64, z: f64) -> Self {
        if trials == 0 {
            return Proportion {
                successes,
                trials,
                estimate: f64::NAN,
                lower: 0.0,
                upper: 1.0,
            };
        }
        let n = trials as f64;
        let phat = successes as f64 / n;
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let centre = (phat + z2 / (2.0 * n)) / denom;
        let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        Proportion {
            successes,
            trials,
            estimate: phat,
            lower: (centre - half).max(0.0),
            upper: (centre + half).min(1.0),
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

/// Mean, sample variance and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

pub fn moments(values: &[f64]) -> Moments {
    let count = values.len();
    if count == 0 {
        return Moments {
            count,
            mean: f64::NAN,
            variance: f64::NAN,
            std_error: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / count as f64;
    let variance = if count > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64
    } else {
        0.0
    };
    Moments {
        count,
        mean,
        variance,
        std_error: (variance / count as f64).sqrt(),
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Ordinary least-squares slope and intercept of `y` on `x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gof_accepts_exact_counts_and_rejects_skew() {
        let expected: BTreeMap<u8, f64> = [(0, 0.5), (1, 0.3), (2, 0.2)].into_iter().collect();
        let good: BTreeMap<u8, u64> = [(0, 500), (1, 300), (2, 200)].into_iter().collect();
        let r = chi_square_gof(&good, &expected);
        assert!(r.statistic.abs() < 1e-12 && r.p_value > 0.99);
        let bad: BTreeMap<u8, u64> = [(0, 700), (1, 200), (2, 100)].into_iter().collect();
        assert!(!chi_square_gof(&bad, &expected).passes(0.001));
        let impossible: BTreeMap<u8, u64> = [(3, 1)].into_iter().collect();
        assert_eq!(chi_square_gof(&impossible, &expected).p_value, 0.0);
    }

    #[test]
    fn two_sample_detects_difference() {
        let a: BTreeMap<u8, u64> = [(0, 500), (1, 500)].into_iter().collect();
        let b: BTreeMap<u8, u64> = [(0, 510), (1, 490)].into_iter().collect();
        assert!(two_sample_chi_square(&a, &b).passes(0.001));
        let c: BTreeMap<u8, u64> = [(0, 700), (1, 300)].into_iter().collect();
        assert!(!two_sample_chi_square(&a, &c).passes(0.001));
    }

    #[test]
    fn wilson_interval_brackets_estimate() {
        let p = Proportion::wilson(30, 100, 1.96);
        assert!(p.lower < 0.3 && p.upper > 0.3);
        assert!((p.lower - 0.2189).abs() < 1e-3 && (p.upper - 0.3958).abs() < 1e-3);
        let all = Proportion::wilson(100, 100, Z_999);
        assert_eq!(all.upper, 1.0);
    }

    #[test]
    fn helpers() {
        let m = moments(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m.mean - 2.5).abs() < 1e-15 && (m.variance - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(compensated_sum([1e16, 1.0, -1e16]), 1.0);
        let (s, i) = least_squares(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((s - 2.0).abs() < 1e-12 && (i - 1.0).abs() < 1e-12);
    }
}
