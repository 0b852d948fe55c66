//! Exchangeable mean-field configurations and their observables.
//!
//! On the complete graph a random-cluster configuration is, up to vertex
//! relabelling, its multiset of component sizes. [`ComponentState`] keeps
//! that multiset together with stable component ids so that couplings and
//! trackers can follow individual components across steps.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{invalid, Result};

pub type ComponentId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Component {
    pub id: ComponentId,
    pub size: usize,
}

/// Component sizes with stable ids.
///
/// Components are kept in ascending id order; fresh ids come from a per-state
/// counter, so allocation order is a pure function of the step history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentState {
    components: Vec<Component>,
    n: usize,
    next_id: ComponentId,
}

impl ComponentState {
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() {
            return Err(invalid("a configuration needs at least one component"));
        }
        if let Some(pos) = sizes.iter().position(|&s| s == 0) {
            return Err(invalid(format!("component {pos} has size 0")));
        }
        let components: Vec<Component> = sizes
            .iter()
            .enumerate()
            .map(|(i, &size)| Component {
                id: i as ComponentId,
                size,
            })
            .collect();
        Ok(ComponentState {
            n: sizes.iter().sum(),
            next_id: components.len() as ComponentId,
            components,
        })
    }

    /// One component holding every vertex.
    pub fn full(n: usize) -> Result<Self> {
        Self::from_sizes(&[n])
    }

    /// All vertices isolated.
    pub fn empty(n: usize) -> Result<Self> {
        Self::from_sizes(&vec![1; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.components.iter().map(|c| c.size)
    }

    /// Sizes in non-increasing order.
    pub fn sorted_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.sizes().collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    pub fn largest(&self) -> usize {
        self.sizes().max().unwrap_or(0)
    }

    /// Sum of squared sizes.
    pub fn r1(&self) -> u64 {
        self.sizes().map(|s| (s as u64) * (s as u64)).sum()
    }

    pub fn size_of(&self, id: ComponentId) -> Option<usize> {
        self.components
            .binary_search_by_key(&id, |c| c.id)
            .ok()
            .map(|i| self.components[i].size)
    }

    pub fn contains(&self, id: ComponentId) -> bool {
        self.size_of(id).is_some()
    }

    /// Whether both states have the same size multiset.
    pub fn same_sizes(&self, other: &ComponentState) -> bool {
        self.n == other.n && self.len() == other.len() && self.sorted_sizes() == other.sorted_sizes()
    }

    /// Drops every component whose flag in `remove` is set. `remove` is
    /// aligned with [`components`](Self::components).
    pub(crate) fn remove_flagged(&mut self, remove: &[bool]) -> usize {
        debug_assert_eq!(remove.len(), self.components.len());
        let mut removed = 0;
        let mut idx = 0;
        self.components.retain(|c| {
            let drop = remove[idx];
            idx += 1;
            if drop {
                removed += c.size;
            }
            !drop
        });
        self.n -= removed;
        removed
    }

    /// Appends a component with a fresh id.
    pub(crate) fn push_fresh(&mut self, size: usize) -> ComponentId {
        debug_assert!(size > 0);
        let id = self.next_id;
        self.next_id += 1;
        self.components.push(Component { id, size });
        self.n += size;
        id
    }

    pub(crate) fn clear(&mut self) {
        self.components.clear();
        self.n = 0;
    }

    /// Checks positivity of sizes and ascending unique ids.
    pub fn check_invariants(&self) -> Result<()> {
        let mut total = 0;
        for w in self.components.windows(2) {
            if w[0].id >= w[1].id {
                return Err(crate::Error::Invariant(format!(
                    "component ids out of order: {} then {}",
                    w[0].id, w[1].id
                )));
            }
        }
        for c in &self.components {
            if c.size == 0 {
                return Err(crate::Error::Invariant(format!("component {} is empty", c.id)));
            }
            total += c.size;
        }
        if total != self.n {
            return Err(crate::Error::Invariant(format!(
                "sizes sum to {total}, expected {}",
                self.n
            )));
        }
        Ok(())
    }
}

/// The size intervals `I_k = [vartheta n^{2/3} / (2 g^{2^k}), vartheta n^{2/3} / g^{2^k}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalSpec {
    pub vartheta: f64,
    pub g_value: f64,
    pub n: usize,
    /// Largest `k` whose interval has lower endpoint at least 1 (0 if none).
    pub k_max: u32,
}

pub const DEFAULT_VARTHETA: f64 = 4.0;

impl IntervalSpec {
    pub fn new(n: usize, vartheta: f64, g_value: f64) -> Result<Self> {
        if !(vartheta > 0.0 && vartheta.is_finite()) {
            return Err(invalid(format!("vartheta must be positive, got {vartheta}")));
        }
        if !(g_value >= 2.0 && g_value.is_finite()) {
            return Err(invalid(format!(
                "g must be at least 2 for disjoint intervals, got {g_value}"
            )));
        }
        let mut spec = IntervalSpec {
            vartheta,
            g_value,
            n,
            k_max: 0,
        };
        let mut k = 0;
        while spec.bounds(k + 1).0 >= 1.0 {
            k += 1;
        }
        spec.k_max = k;
        Ok(spec)
    }

    /// Defaults used across the crate: `vartheta = 4`, `g = omega_default(n)`.
    pub fn default_for(n: usize) -> Self {
        let (omega, _) = omega_default(n.max(2));
        Self::new(n, DEFAULT_VARTHETA, omega).expect("defaults are valid")
    }

    pub fn bounds(&self, k: u32) -> (f64, f64) {
        let upper = self.vartheta * (self.n as f64).powf(2.0 / 3.0)
            / self.g_value.powf(2f64.powi(k as i32));
        (upper / 2.0, upper)
    }

    /// The `k` with `size ∈ I_k`, if any (intervals are disjoint).
    pub fn interval_of(&self, size: usize) -> Option<u32> {
        let s = size as f64;
        (1..=self.k_max).find(|&k| {
            let (lo, hi) = self.bounds(k);
            // relative slack absorbs rounding in n^{2/3}
            s >= lo * (1.0 - 1e-12) && s <= hi * (1.0 + 1e-12)
        })
    }
}

/// `max(2, ln ln ln ln n)` and `B_omega = n^{2/3} / omega`.
pub fn omega_default(n: usize) -> (f64, f64) {
    let x = n as f64;
    let iterated = x.ln().ln().ln().ln();
    let omega = if iterated.is_finite() && iterated > 2.0 {
        iterated
    } else {
        2.0
    };
    (omega, x.powf(2.0 / 3.0) / omega)
}

/// Observables of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub n: usize,
    pub components: usize,
    pub l1: usize,
    pub l2: usize,
    pub r1: u64,
    pub r2: u64,
    /// Sum of squared sizes over components of size at most the threshold.
    pub r_tilde: u64,
    pub isolated: usize,
    /// `k -> N_k` for `k = 1..=k_max`.
    pub interval_counts: BTreeMap<u32, u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree_counts: Option<BTreeMap<usize, u64>>,
}

impl StatsReport {
    /// Column names matching [`csv_fields`](Self::csv_fields).
    pub const CSV_COLUMNS: [&'static str; 8] =
        ["n", "components", "L1", "L2", "R1", "R2", "R_tilde", "isolated"];

    pub fn csv_fields(&self) -> [String; 8] {
        [
            self.n.to_string(),
            self.components.to_string(),
            self.l1.to_string(),
            self.l2.to_string(),
            self.r1.to_string(),
            self.r2.to_string(),
            self.r_tilde.to_string(),
            self.isolated.to_string(),
        ]
    }
}

/// Computes every observable in a single pass.
pub fn stats(state: &ComponentState, spec: &IntervalSpec, small_threshold: usize) -> StatsReport {
    stats_from_sizes(state.sizes(), spec, small_threshold)
}

pub fn stats_from_sizes(
    sizes: impl IntoIterator<Item = usize>,
    spec: &IntervalSpec,
    small_threshold: usize,
) -> StatsReport {
    let (mut l1, mut l2) = (0usize, 0usize);
    let (mut n, mut components, mut isolated) = (0usize, 0usize, 0usize);
    let (mut r1, mut r_tilde) = (0u64, 0u64);
    let mut interval_counts: BTreeMap<u32, u64> = (1..=spec.k_max).map(|k| (k, 0)).collect();
    for s in sizes {
        let sq = (s as u64) * (s as u64);
        n += s;
        components += 1;
        r1 += sq;
        if s <= small_threshold {
            r_tilde += sq;
        }
        if s == 1 {
            isolated += 1;
        }
        if s > l1 {
            l2 = l1;
            l1 = s;
        } else if s > l2 {
            l2 = s;
        }
        if let Some(k) = spec.interval_of(s) {
            *interval_counts.entry(k).or_insert(0) += 1;
        }
    }
    StatsReport {
        n,
        components,
        l1,
        l2,
        r1,
        r2: r1 - (l1 as u64) * (l1 as u64),
        r_tilde,
        isolated,
        interval_counts,
        tree_counts: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(n: usize) -> IntervalSpec {
        IntervalSpec::new(n, DEFAULT_VARTHETA, 2.0).unwrap()
    }

    #[test]
    fn constructors() {
        let s = ComponentState::from_sizes(&[3, 2, 1, 1]).unwrap();
        assert_eq!(s.n(), 7);
        assert_eq!(s.len(), 4);
        let full = ComponentState::full(5).unwrap();
        assert_eq!(full.sorted_sizes(), vec![5]);
        let empty = ComponentState::empty(5).unwrap();
        assert_eq!(empty.sorted_sizes(), vec![1; 5]);
        assert!(ComponentState::from_sizes(&[]).is_err());
        assert!(ComponentState::from_sizes(&[2, 0]).is_err());
        s.check_invariants().unwrap();
    }

    #[test]
    fn stats_example() {
        let s = ComponentState::from_sizes(&[3, 2, 1, 1]).unwrap();
        let r = stats(&s, &spec(7), 2);
        assert_eq!((r.l1, r.l2, r.r1, r.r2, r.r_tilde, r.isolated), (3, 2, 15, 6, 6, 2));

        let full = ComponentState::full(100).unwrap();
        let r = stats(&full, &spec(100), 2);
        assert_eq!((r.r1, r.r2, r.isolated), (10_000, 0, 0));
    }

    #[test]
    fn interval_arithmetic() {
        let spec = IntervalSpec::new(1_000_000, 1.0, 2.0).unwrap();
        let (lo, hi) = spec.bounds(1);
        assert!((lo - 1250.0).abs() < 1e-6 && (hi - 2500.0).abs() < 1e-6);
        assert_eq!(spec.interval_of(1250), Some(1));
        assert_eq!(spec.interval_of(2500), Some(1));
        assert_eq!(spec.interval_of(2501), None);
        // 10^4 / (2 * 2^8) = 19.5 >= 1, 10^4 / (2 * 2^16) < 1
        assert_eq!(spec.k_max, 3);
        assert!(IntervalSpec::new(100, 1.0, 1.5).is_err());
        assert!(IntervalSpec::new(100, 0.0, 2.0).is_err());
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega_default(1_000_000).0, 2.0);
        assert_eq!(omega_default(2).0, 2.0);
        assert_eq!(omega_default(usize::MAX).0, 2.0);
        let (omega, b) = omega_default(1_000_000);
        assert!((b - 10_000.0 / omega).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn stats_invariants(sizes in proptest::collection::vec(1usize..60, 1..40), b in 1usize..20) {
            let state = ComponentState::from_sizes(&sizes).unwrap();
            let n = state.n();
            let sp = spec(n);
            let r = stats(&state, &sp, b);
            prop_assert_eq!(r.r1, (r.l1 as u64).pow(2) + r.r2);
            prop_assert!(r.r_tilde <= r.r1);
            prop_assert!(r.r1 >= n as u64 && r.r1 <= (n as u64).pow(2));
            prop_assert_eq!(r.r1 == n as u64, sizes.iter().all(|&s| s == 1));
            prop_assert_eq!(r.r1 == (n as u64).pow(2), sizes.len() == 1);
            prop_assert!(r.interval_counts.values().sum::<u64>() <= sizes.len() as u64);

            let mut rev = sizes.clone();
            rev.reverse();
            let r_rev = stats(&ComponentState::from_sizes(&rev).unwrap(), &sp, b);
            prop_assert_eq!(r, r_rev);
        }
    }
}
