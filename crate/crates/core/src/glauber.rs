//! Heat-bath Glauber dynamics on an explicit complete graph.
//!
//! Each step picks an edge slot uniformly, decides whether it is a cut edge
//! of the current configuration, and resamples it: open with probability
//! `p / (p + q(1-p))` if it is a cut edge, `p` otherwise.

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::params::ModelParams;
use crate::state::{stats_from_sizes, ComponentState, IntervalSpec, StatsReport};

/// Vertex count cap for the explicit representation.
pub const MAX_GLAUBER_N: usize = 5000;

/// Open-edge set of the complete graph on `n` vertices. Slots follow the
/// lexicographic order of pairs `(i, j)`, `i < j`.
#[derive(Debug, Clone)]
pub struct EdgeConfig {
    n: usize,
    open: Vec<u64>,
    adjacency: Vec<Vec<u32>>,
    open_count: usize,
    labels: Option<Vec<u32>>,
}

impl PartialEq for EdgeConfig {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.open == other.open
    }
}

impl EdgeConfig {
    /// All edges closed.
    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_GLAUBER_N {
            return Err(invalid(format!(
                "Glauber state needs 1 <= n <= {MAX_GLAUBER_N}, got {n}"
            )));
        }
        let slots = n * (n - 1) / 2;
        Ok(EdgeConfig {
            n,
            open: vec![0; slots.div_ceil(64)],
            adjacency: vec![Vec::new(); n],
            open_count: 0,
            labels: None,
        })
    }

    /// All edges open.
    pub fn complete(n: usize) -> Result<Self> {
        let mut config = Self::empty(n)?;
        for slot in 0..config.slot_count() {
            config.set(slot, true);
        }
        Ok(config)
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut config = Self::empty(n)?;
        for &(i, j) in edges {
            if i == j || i >= n || j >= n {
                return Err(invalid(format!("invalid edge ({i}, {j}) for n = {n}")));
            }
            let slot = config.slot(i.min(j), i.max(j));
            config.set(slot, true);
        }
        Ok(config)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn slot_count(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    pub fn open_count(&self) -> usize {
        self.open_count
    }

    /// Slot index of the pair `i < j`.
    pub fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    /// Inverse of [`slot`](Self::slot).
    pub fn endpoints(&self, slot: usize) -> (usize, usize) {
        let n = self.n as f64;
        // largest i with offset(i) <= slot, offset(i) = i(2n - i - 1)/2
        let disc = (2.0 * n - 1.0).powi(2) - 8.0 * slot as f64;
        let mut i = (((2.0 * n - 1.0) - disc.max(0.0).sqrt()) / 2.0).floor() as usize;
        let offset = |i: usize| i * (2 * self.n - i - 1) / 2;
        while i > 0 && offset(i) > slot {
            i -= 1;
        }
        while i + 1 < self.n && offset(i + 1) <= slot {
            i += 1;
        }
        (i, slot - offset(i) + i + 1)
    }

    pub fn is_open(&self, slot: usize) -> bool {
        self.open[slot / 64] >> (slot % 64) & 1 == 1
    }

    pub fn set(&mut self, slot: usize, open: bool) {
        if self.is_open(slot) == open {
            return;
        }
        let (i, j) = self.endpoints(slot);
        if open {
            self.open[slot / 64] |= 1 << (slot % 64);
            self.adjacency[i].push(j as u32);
            self.adjacency[j].push(i as u32);
            self.open_count += 1;
        } else {
            self.open[slot / 64] &= !(1 << (slot % 64));
            let drop = |list: &mut Vec<u32>, v: usize| {
                let pos = list.iter().position(|&w| w as usize == v).expect("adjacency in sync");
                list.swap_remove(pos);
            };
            drop(&mut self.adjacency[i], j);
            drop(&mut self.adjacency[j], i);
            self.open_count -= 1;
        }
        self.labels = None;
    }

    /// Whether removing `slot` leaves its endpoints disconnected. Searches
    /// breadth-first from one endpoint, skipping the edge itself, and stops as
    /// soon as the other endpoint is reached.
    pub fn is_cut_edge(&self, slot: usize) -> bool {
        let (a, b) = self.endpoints(slot);
        let mut seen = vec![false; self.n];
        let mut queue = std::collections::VecDeque::new();
        seen[a] = true;
        queue.push_back(a);
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                let w = w as usize;
                if (v == a && w == b) || (v == b && w == a) {
                    continue;
                }
                if w == b {
                    return false;
                }
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        true
    }

    /// Vertex -> component label, recomputed lazily after any flip.
    pub fn component_labels(&mut self) -> &[u32] {
        if self.labels.is_none() {
            let mut labels = vec![u32::MAX; self.n];
            let mut next = 0u32;
            let mut stack = Vec::new();
            for s in 0..self.n {
                if labels[s] != u32::MAX {
                    continue;
                }
                labels[s] = next;
                stack.push(s);
                while let Some(v) = stack.pop() {
                    for &w in &self.adjacency[v] {
                        if labels[w as usize] == u32::MAX {
                            labels[w as usize] = next;
                            stack.push(w as usize);
                        }
                    }
                }
                next += 1;
            }
            self.labels = Some(labels);
        }
        self.labels.as_deref().expect("just computed")
    }

    pub fn component_sizes(&mut self) -> Vec<usize> {
        let labels = self.component_labels();
        let count = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        let mut sizes = vec![0; count];
        for &l in labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    pub fn component_count(&mut self) -> usize {
        self.component_sizes().len()
    }

    pub fn to_component_state(&mut self) -> ComponentState {
        ComponentState::from_sizes(&self.component_sizes()).expect("n >= 1")
    }
}

/// One heat-bath update; returns the slot that was resampled.
pub fn glauber_step<R: Rng + ?Sized>(
    config: &mut EdgeConfig,
    params: &ModelParams,
    rng: &mut R,
) -> Result<usize> {
    params.require_glauber()?;
    if config.n() != params.n() {
        return Err(invalid("configuration and parameters disagree on n"));
    }
    if config.slot_count() == 0 {
        return Err(invalid("no edges to update on a single vertex"));
    }
    let slot = rng.random_range(0..config.slot_count());
    let prob = if config.is_cut_edge(slot) {
        params.cut_edge_open_probability()
    } else {
        params.p()
    };
    let open = rng.random::<f64>() < prob;
    config.set(slot, open);
    Ok(slot)
}

/// Sample taken along a Glauber trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlauberSample {
    pub step: usize,
    pub open_edges: usize,
    pub stats: StatsReport,
}

/// Runs `steps` updates, recording a sample every `sample_every` steps
/// (and never at step 0).
pub fn glauber_trajectory<R: Rng + ?Sized>(
    config: &mut EdgeConfig,
    params: &ModelParams,
    steps: usize,
    sample_every: usize,
    spec: &IntervalSpec,
    small_threshold: usize,
    rng: &mut R,
) -> Result<Vec<GlauberSample>> {
    if sample_every == 0 {
        return Err(invalid("sample_every must be positive"));
    }
    let mut samples = Vec::with_capacity(steps / sample_every);
    for step in 1..=steps {
        glauber_step(config, params, rng)?;
        if step % sample_every == 0 {
            let sizes = config.component_sizes();
            samples.push(GlauberSample {
                step,
                open_edges: config.open_count(),
                stats: stats_from_sizes(sizes, spec, small_threshold),
            });
        }
    }
    Ok(samples)
}
