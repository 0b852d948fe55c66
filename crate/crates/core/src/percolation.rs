//! Exact sampling of `G(m, p)` component structure.
//!
//! The sampler runs the breadth-first exploration process on counts only:
//! every processed vertex decides its pairs to the still-unvisited vertices
//! with one binomial draw (new members of its component) and its pairs to the
//! other discovered-but-unprocessed vertices with another (surplus edges).
//! Each of the `C(m, 2)` pairs is decided by exactly one Bernoulli(p) trial,
//! so the returned size multiset has exactly the `G(m, p)` law.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::dsu::DisjointSets;
use crate::error::{domain, Error, Result};
use crate::inference::moments;
use crate::replicas::run_replicas;

/// Binomial(trials, p) variate with the exact law (inversion / BTPE).
pub fn binomial<R: Rng + ?Sized>(rng: &mut R, trials: u64, p: f64) -> u64 {
    if trials == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return trials;
    }
    Binomial::new(trials, p)
        .expect("probability checked above")
        .sample(rng)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercolationOutcome {
    /// Component sizes in exploration order.
    pub sizes: Vec<usize>,
    /// `edges - size + 1` per component; zero exactly for trees.
    pub surpluses: Vec<u64>,
    pub m: usize,
    pub p: f64,
}

impl PercolationOutcome {
    /// Sizes in non-increasing order.
    pub fn sorted_sizes(&self) -> Vec<usize> {
        let mut s = self.sizes.clone();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    /// `k -> t_k`, the number of tree components of each size.
    pub fn tree_counts(&self) -> BTreeMap<usize, u64> {
        let mut counts = BTreeMap::new();
        for (&s, &surplus) in self.sizes.iter().zip(&self.surpluses) {
            if surplus == 0 {
                *counts.entry(s).or_insert(0) += 1;
            }
        }
        counts
    }
}

/// Samples the component sizes and surpluses of `G(m, p)`.
pub fn sample_components<R: Rng + ?Sized>(m: usize, p: f64, rng: &mut R) -> Result<PercolationOutcome> {
    if !(0.0..1.0).contains(&p) {
        return Err(domain(format!(
            "percolation needs p in [0,1), got {p}; build the complete component directly"
        )));
    }
    let mut sizes = Vec::new();
    let mut surpluses = Vec::new();
    if p == 0.0 {
        sizes.resize(m, 1);
        surpluses.resize(m, 0);
        return Ok(PercolationOutcome { sizes, surpluses, m, p });
    }
    let mut unvisited = m as u64;
    while unvisited > 0 {
        unvisited -= 1;
        let mut frontier: u64 = 1;
        let mut size: u64 = 1;
        let mut surplus: u64 = 0;
        while frontier > 0 {
            // the vertex being processed leaves the frontier
            frontier -= 1;
            if frontier > 0 {
                surplus += binomial(rng, frontier, p);
            }
            let joined = binomial(rng, unvisited, p);
            unvisited -= joined;
            frontier += joined;
            size += joined;
        }
        sizes.push(size as usize);
        surpluses.push(surplus);
    }
    Ok(PercolationOutcome { sizes, surpluses, m, p })
}

/// Largest vertex count accepted by [`exact_gnp_small`].
pub const EXACT_GNP_MAX_M: usize = 6;

/// Exact law of the sorted size multiset of `G(m, p)`, by enumeration of all
/// `2^{C(m,2)}` edge subsets.
pub fn exact_gnp_small(m: usize, p: f64) -> Result<BTreeMap<Vec<usize>, f64>> {
    if m > EXACT_GNP_MAX_M {
        return Err(Error::TooLarge(format!(
            "exact G(m,p) enumeration refuses m = {m} > {EXACT_GNP_MAX_M}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("edge probability {p} outside [0,1]")));
    }
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
        .collect();
    let e = pairs.len();
    let mut law = BTreeMap::new();
    for mask in 0u32..(1u32 << e) {
        let open = mask.count_ones() as i32;
        let weight = p.powi(open) * (1.0 - p).powi(e as i32 - open);
        if weight == 0.0 {
            continue;
        }
        let mut dsu = DisjointSets::new(m);
        for (bit, &(i, j)) in pairs.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                dsu.union(i, j);
            }
        }
        let mut sizes = dsu.set_sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        *law.entry(sizes).or_insert(0.0) += weight;
    }
    Ok(law)
}

/// Monte Carlo moments of one tree count `t_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeCountMoments {
    pub k: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

/// Mean and variance of `t_k` over `replicas` independent samples of
/// `G(n, p)`, replica `r` seeded from `(seed, r)`.
pub fn tree_count_statistics(
    n: usize,
    p: f64,
    k_list: &[usize],
    replicas: usize,
    seed: u64,
) -> Result<Vec<TreeCountMoments>> {
    if replicas == 0 {
        return Err(domain("tree count statistics need at least one replica"));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(domain(format!("edge probability {p} outside [0,1)")));
    }
    let samples = run_replicas(seed, replicas, |_, rng| {
        let outcome = sample_components(n, p, rng).expect("p checked");
        let counts = outcome.tree_counts();
        k_list
            .iter()
            .map(|k| counts.get(k).copied().unwrap_or(0) as f64)
            .collect::<Vec<f64>>()
    });
    Ok(k_list
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let column: Vec<f64> = samples.iter().map(|row| row[i]).collect();
            let m = moments(&column);
            TreeCountMoments {
                k,
                mean: m.mean,
                variance: m.variance,
                std_error: m.std_error,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::chi_square_gof;
    use crate::replicas::replica_rng;

    #[test]
    fn trivial_cases() {
        let mut rng = replica_rng(1, 0);
        let empty = sample_components(0, 0.4, &mut rng).unwrap();
        assert!(empty.sizes.is_empty());
        let isolated = sample_components(3, 0.0, &mut rng).unwrap();
        assert_eq!(isolated.sizes, vec![1, 1, 1]);
        assert_eq!(isolated.surpluses, vec![0, 0, 0]);
        assert!(sample_components(3, 1.0, &mut rng).is_err());
    }

    #[test]
    fn exact_small_laws() {
        let two = exact_gnp_small(2, 0.3).unwrap();
        assert!((two[&vec![2]] - 0.3).abs() < 1e-15);
        assert!((two[&vec![1, 1]] - 0.7).abs() < 1e-15);

        let three = exact_gnp_small(3, 0.5).unwrap();
        assert!((three[&vec![3]] - 0.5).abs() < 1e-15);
        assert!((three[&vec![2, 1]] - 0.375).abs() < 1e-15);
        assert!((three[&vec![1, 1, 1]] - 0.125).abs() < 1e-15);

        let four = exact_gnp_small(4, 0.5).unwrap();
        // 38 of the 64 graphs on 4 labelled vertices are connected
        assert!((four[&vec![4]] - 0.59375).abs() < 1e-15);

        for m in 0..=6 {
            let law = exact_gnp_small(m, 0.37).unwrap();
            assert!((law.values().sum::<f64>() - 1.0).abs() < 1e-12);
            let zero = exact_gnp_small(m, 0.0).unwrap();
            assert_eq!(zero.len(), 1);
            assert!((zero[&vec![1; m]] - 1.0).abs() < 1e-15);
        }
        assert!(exact_gnp_small(7, 0.5).is_err());
    }

    #[test]
    fn sampler_matches_enumeration() {
        let mut rng = replica_rng(2024, 0);
        for &(m, p) in &[(3usize, 0.5f64), (5, 0.2)] {
            let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
            for _ in 0..20_000 {
                let o = sample_components(m, p, &mut rng).unwrap();
                *counts.entry(o.sorted_sizes()).or_insert(0) += 1;
            }
            let exact = exact_gnp_small(m, p).unwrap();
            let r = chi_square_gof(&counts, &exact);
            assert!(r.passes(0.001), "m={m} p={p} {r:?}");
        }
    }

    #[test]
    fn outcome_invariants() {
        let mut rng = replica_rng(5, 5);
        for &(m, p) in &[(50usize, 0.05f64), (400, 0.01), (1000, 0.0005)] {
            let o = sample_components(m, p, &mut rng).unwrap();
            assert_eq!(o.sizes.iter().sum::<usize>(), m);
            assert_eq!(o.sizes.len(), o.surpluses.len());
        }
    }

    #[test]
    fn tree_counts_without_edges() {
        let stats = tree_count_statistics(50, 0.0, &[1, 2], 3, 9).unwrap();
        assert_eq!(stats[0].mean, 50.0);
        assert_eq!(stats[1].mean, 0.0);
        assert!(tree_count_statistics(50, 0.1, &[1], 0, 9).is_err());
    }

    #[test]
    fn isolated_vertex_expectation() {
        // t_1 counts isolated vertices; E[t_1] / n = (1 - p)^{n-1}
        let (n, p) = (2000usize, 1.0 / 2000.0);
        let stats = tree_count_statistics(n, p, &[1], 200, 3).unwrap();
        let expected = n as f64 * (1.0 - p).powi(n as i32 - 1);
        assert!((stats[0].mean - expected).abs() < 4.0 * stats[0].std_error + 1e-9);
    }
}
