//! Exact check of the local limit theorem for sums of lazily activated sizes.
//!
//! `S = Σ c_i ξ_i` with independent `ξ_i ~ Bernoulli(r)`. The law of `S` is
//! computed by sequential convolution and compared pointwise with the
//! Gaussian density of matching mean and variance.

use rand::Rng;
use serde::Serialize;

use crate::error::{domain, invalid, Error, Result};
use crate::inference::compensated_sum;
use crate::percolation::sample_components;
use crate::state::{omega_default, IntervalSpec, DEFAULT_VARTHETA};

/// Largest convolution table accepted by [`llt_exact_check`].
pub const MAX_TABLE_CELLS: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LltInstance {
    pub sizes: Vec<u64>,
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl LltInstance {
    pub fn new(sizes: Vec<u64>, r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(domain(format!("activation probability must lie in (0,1), got {r}")));
        }
        if sizes.is_empty() {
            return Err(invalid("instance needs at least one size"));
        }
        let sum: f64 = sizes.iter().map(|&c| c as f64).sum();
        let sum_sq: f64 = sizes.iter().map(|&c| (c as f64).powi(2)).sum();
        Ok(LltInstance {
            mu: r * sum,
            sigma: (r * (1.0 - r) * sum_sq).sqrt(),
            sizes,
            r,
        })
    }

    pub fn total(&self) -> u64 {
        self.sizes.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LltReport {
    pub m: usize,
    pub mu: f64,
    pub sigma: f64,
    /// `sup σ |Pr[S=a] - gaussian(a)|` over integers `a ∈ [μ-σ, μ+σ]`.
    pub sup_error: f64,
    pub argmax: i64,
    pub total_mass: f64,
}

/// Exact law of `S` on `0..=Σc_i`.
pub fn exact_sum_law(instance: &LltInstance) -> Result<Vec<f64>> {
    let total = instance.total();
    let cells = total + 1;
    if cells > MAX_TABLE_CELLS {
        return Err(Error::TooLarge(format!(
            "convolution table needs {cells} cells ({} MiB); limit is {MAX_TABLE_CELLS}",
            cells * 8 / (1 << 20)
        )));
    }
    let r = instance.r;
    let mut law = vec![0.0; cells as usize];
    law[0] = 1.0;
    let mut reach = 0usize;
    for &c in &instance.sizes {
        let c = c as usize;
        if c == 0 {
            continue;
        }
        // descending so law[j - c] is still the previous round's value
        for j in (0..=reach + c).rev() {
            let keep = if j <= reach { law[j] * (1.0 - r) } else { 0.0 };
            let add = if j >= c && j - c <= reach { law[j - c] * r } else { 0.0 };
            law[j] = keep + add;
        }
        reach += c;
    }
    Ok(law)
}

pub fn llt_exact_check(instance: &LltInstance) -> Result<LltReport> {
    let law = exact_sum_law(instance)?;
    let (mu, sigma) = (instance.mu, instance.sigma);
    let mut report = LltReport {
        m: instance.sizes.len(),
        mu,
        sigma,
        sup_error: 0.0,
        argmax: mu.round() as i64,
        total_mass: compensated_sum(law.iter().copied()),
    };
    if sigma == 0.0 {
        return Ok(report);
    }
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * sigma);
    let lo = (mu - sigma).ceil().max(0.0) as i64;
    let hi = ((mu + sigma).floor() as i64).min(law.len() as i64 - 1);
    for a in lo..=hi {
        let z = (a as f64 - mu) / sigma;
        let err = sigma * (law[a as usize] - norm * (-0.5 * z * z).exp()).abs();
        if err > report.sup_error {
            report.sup_error = err;
            report.argmax = a;
        }
    }
    Ok(report)
}

/// How a component-size instance was derived from a random graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceDiagnostics {
    pub n: usize,
    pub omega: f64,
    pub truncation: f64,
    pub kept: usize,
    pub dropped: usize,
    pub largest_kept: u64,
    /// Component counts in `I_k` for `k = 1..=ell`, intervals taken relative to
    /// the number of kept sizes.
    pub interval_counts: Vec<u64>,
    pub ell: u32,
}

/// Draws `G(n, 1/n)`, keeps the components of size at most `n^{2/3}/ω` and
/// wraps them as an instance with activation probability `r`.
pub fn critical_instance<R: Rng + ?Sized>(
    n: usize,
    r: f64,
    rng: &mut R,
) -> Result<(LltInstance, InstanceDiagnostics)> {
    if n < 2 {
        return Err(invalid("critical instance needs n >= 2"));
    }
    let outcome = sample_components(n, 1.0 / n as f64, rng)?;
    let (omega, truncation) = omega_default(n);
    let (kept, dropped): (Vec<u64>, Vec<u64>) = outcome
        .sizes
        .iter()
        .map(|&s| s as u64)
        .partition(|&s| s as f64 <= truncation);
    let m = kept.len();
    let largest_kept = kept.iter().copied().max().unwrap_or(0);

    let spec = IntervalSpec::new(m.max(1), DEFAULT_VARTHETA, omega)?;
    // smallest k whose interval starts below m^{1/4}
    let quarter = (m as f64).powf(0.25);
    let ell = (1..=spec.k_max.max(1))
        .find(|&k| spec.bounds(k).0 < quarter)
        .unwrap_or(spec.k_max.max(1));
    let mut interval_counts = vec![0u64; ell as usize];
    for &s in &kept {
        if let Some(k) = spec.interval_of(s as usize) {
            if k <= ell {
                interval_counts[k as usize - 1] += 1;
            }
        }
    }
    let instance = LltInstance::new(kept, r)?;
    Ok((
        instance,
        InstanceDiagnostics {
            n,
            omega,
            truncation,
            kept: m,
            dropped: dropped.len(),
            largest_kept,
            interval_counts,
            ell,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replicas::replica_rng;
    use statrs::function::factorial::ln_binomial;

    #[test]
    fn binomial_case() {
        let inst = LltInstance::new(vec![1; 100], 0.5).unwrap();
        assert!((inst.mu - 50.0).abs() < 1e-12 && (inst.sigma - 5.0).abs() < 1e-12);
        let law = exact_sum_law(&inst).unwrap();
        let exact50 = (ln_binomial(100, 50) - 100.0 * 2f64.ln()).exp();
        assert!((law[50] - exact50).abs() < 1e-14);
        assert!((law[50] - 0.07959).abs() < 1e-5);
        let rep = llt_exact_check(&inst).unwrap();
        assert!(rep.sup_error < 0.01, "{rep:?}");
        assert!((rep.total_mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_two_point_law() {
        let rep = llt_exact_check(&LltInstance::new(vec![7], 0.5).unwrap()).unwrap();
        assert!((rep.total_mass - 1.0).abs() < 1e-15);
        // no integer of [μ-σ, μ+σ] = [0, 7] except the endpoints carries mass
        assert!(rep.sup_error > 0.1);
        let zero = llt_exact_check(&LltInstance::new(vec![0, 0], 0.3).unwrap()).unwrap();
        assert_eq!(zero.sup_error, 0.0);
    }

    #[test]
    fn mixed_sizes_match_enumeration() {
        let inst = LltInstance::new(vec![1, 2, 2, 5], 0.3).unwrap();
        let law = exact_sum_law(&inst).unwrap();
        let mut brute = vec![0.0; 11];
        for mask in 0..16u32 {
            let mut s = 0;
            let mut pr = 1.0;
            for (i, &c) in inst.sizes.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    s += c as usize;
                    pr *= 0.3;
                } else {
                    pr *= 0.7;
                }
            }
            brute[s] += pr;
        }
        for (a, b) in law.iter().zip(&brute) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(LltInstance::new(vec![], 0.5).is_err());
        assert!(LltInstance::new(vec![1], 1.0).is_err());
        let huge = LltInstance::new(vec![60_000_000, 60_000_000], 0.5).unwrap();
        assert!(matches!(exact_sum_law(&huge), Err(Error::TooLarge(_))));
    }

    #[test]
    fn critical_instance_is_truncated() {
        let mut rng = replica_rng(41, 0);
        let (inst, diag) = critical_instance(10_000, 2.0 / 3.0, &mut rng).unwrap();
        assert_eq!(diag.kept + diag.dropped, inst.sizes.len() + diag.dropped);
        assert!(inst.sizes.iter().all(|&s| s as f64 <= diag.truncation));
        assert!(diag.ell >= 1);
        let rep = llt_exact_check(&inst).unwrap();
        assert!((rep.total_mass - 1.0).abs() < 1e-9);
    }
}
