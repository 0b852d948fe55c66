//! Coupled CM dynamics for two copies of the chain.
//!
//! Components of equal size are paired by a maximal matching. Matched pairs
//! share their activation coin, unmatched components flip their own. When the
//! two copies activate the same number of vertices the percolation sub-step is
//! shared and every new component is born matched.
//!
//! Two strategies are available. [`CouplingStrategy::Plain`] samples two
//! independent percolations whenever the activated vertex counts differ.
//! [`CouplingStrategy::Corrected`] also steers the activation counts of small
//! matched size classes towards equal totals, and when the totals still differ
//! it grows the larger percolation out of the smaller one. Each copy is an
//! exact CM chain under both strategies.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use crate::cm::replace_active;
use crate::dsu::DisjointSets;
use crate::error::{invalid, Error, Result};
use crate::inference::{least_squares, median};
use crate::params::ModelParams;
use crate::percolation::{binomial, sample_components};
use crate::replicas::run_replicas;
use crate::state::{ComponentId, ComponentState, IntervalSpec};
use crate::walks::BinomialShiftCoupling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CouplingStrategy {
    Plain,
    /// Matched classes of size at most `max_class_size` absorb the activation
    /// discrepancy.
    Corrected { max_class_size: usize },
}

impl CouplingStrategy {
    /// `Corrected` with classes up to `n^{1/3}`.
    pub fn corrected_for(n: usize) -> Self {
        CouplingStrategy::Corrected {
            max_class_size: ((n as f64).cbrt().floor() as usize).max(1),
        }
    }
}

/// Matching `W_t` between the components of two copies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingState {
    /// `(x id, y id)` pairs of equal size, in ascending x id order.
    pub matching: Vec<(ComponentId, ComponentId)>,
    /// Sum of squared sizes over unmatched components of both copies.
    pub z_value: u64,
    /// `k -> N̂_k`, matched pairs whose size lies in `I_k`.
    pub matched_interval_counts: BTreeMap<u32, u64>,
    /// `A(X) - A(Y)` from the last activation.
    pub discrepancy: i64,
}

fn index_of(state: &ComponentState, id: ComponentId) -> Option<usize> {
    state.components().binary_search_by_key(&id, |c| c.id).ok()
}

fn check_same_n(x: &ComponentState, y: &ComponentState) -> Result<()> {
    if x.n() != y.n() {
        return Err(invalid(format!(
            "coupled copies need the same n, got {} and {}",
            x.n(),
            y.n()
        )));
    }
    Ok(())
}

/// Pairs the unmatched components of each size class in id order.
fn top_up(
    x: &ComponentState,
    y: &ComponentState,
    mut pairs: Vec<(ComponentId, ComponentId)>,
) -> Vec<(ComponentId, ComponentId)> {
    let mut x_used = vec![false; x.len()];
    let mut y_used = vec![false; y.len()];
    for &(a, b) in &pairs {
        x_used[index_of(x, a).expect("matched id present")] = true;
        y_used[index_of(y, b).expect("matched id present")] = true;
    }
    let mut free_y: BTreeMap<usize, Vec<ComponentId>> = BTreeMap::new();
    for (c, _) in y.components().iter().zip(&y_used).filter(|(_, &u)| !u) {
        free_y.entry(c.size).or_default().push(c.id);
    }
    let mut cursor: BTreeMap<usize, usize> = BTreeMap::new();
    for (c, _) in x.components().iter().zip(&x_used).filter(|(_, &u)| !u) {
        if let Some(list) = free_y.get(&c.size) {
            let at = cursor.entry(c.size).or_insert(0);
            if *at < list.len() {
                pairs.push((c.id, list[*at]));
                *at += 1;
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

fn finish_state(
    x: &ComponentState,
    y: &ComponentState,
    matching: Vec<(ComponentId, ComponentId)>,
    spec: &IntervalSpec,
    discrepancy: i64,
) -> CouplingState {
    let mut matched_interval_counts = BTreeMap::new();
    let mut matched_mass = 0u64;
    for &(a, _) in &matching {
        let s = x.size_of(a).expect("matched id present");
        matched_mass += 2 * (s as u64) * (s as u64);
        if let Some(k) = spec.interval_of(s) {
            *matched_interval_counts.entry(k).or_insert(0) += 1;
        }
    }
    CouplingState {
        matching,
        z_value: x.r1() + y.r1() - matched_mass,
        matched_interval_counts,
        discrepancy,
    }
}

/// Maximal matching built from scratch, pairing each size class in id order.
pub fn build_matching(x: &ComponentState, y: &ComponentState, spec: &IntervalSpec) -> Result<CouplingState> {
    check_same_n(x, y)?;
    Ok(finish_state(x, y, top_up(x, y, Vec::new()), spec, 0))
}

/// Checks equal sizes, unique ids, maximality and `z_value`.
pub fn check_matching(x: &ComponentState, y: &ComponentState, coupling: &CouplingState) -> Result<()> {
    let mut x_seen = vec![false; x.len()];
    let mut y_seen = vec![false; y.len()];
    for &(a, b) in &coupling.matching {
        let (ia, ib) = match (index_of(x, a), index_of(y, b)) {
            (Some(ia), Some(ib)) => (ia, ib),
            _ => return Err(Error::Invariant(format!("pair ({a}, {b}) names a missing component"))),
        };
        if x_seen[ia] || y_seen[ib] {
            return Err(Error::Invariant(format!("pair ({a}, {b}) reuses an id")));
        }
        x_seen[ia] = true;
        y_seen[ib] = true;
        if x.components()[ia].size != y.components()[ib].size {
            return Err(Error::Invariant(format!("pair ({a}, {b}) has unequal sizes")));
        }
    }
    let mut free: BTreeMap<usize, (u64, u64)> = BTreeMap::new();
    let mut z = 0u64;
    for (c, _) in x.components().iter().zip(&x_seen).filter(|(_, &s)| !s) {
        free.entry(c.size).or_default().0 += 1;
        z += (c.size as u64).pow(2);
    }
    for (c, _) in y.components().iter().zip(&y_seen).filter(|(_, &s)| !s) {
        free.entry(c.size).or_default().1 += 1;
        z += (c.size as u64).pow(2);
    }
    if let Some((s, _)) = free.iter().find(|(_, &(a, b))| a > 0 && b > 0) {
        return Err(Error::Invariant(format!("size class {s} is not maximally matched")));
    }
    if z != coupling.z_value {
        return Err(Error::Invariant(format!("z_value {} but unmatched mass {z}", coupling.z_value)));
    }
    Ok(())
}

/// Activation flags of both copies, aligned with their component lists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Activation {
    pub x_active: Vec<bool>,
    pub y_active: Vec<bool>,
    pub x_vertices: usize,
    pub y_vertices: usize,
}

impl Activation {
    pub fn discrepancy(&self) -> i64 {
        self.x_vertices as i64 - self.y_vertices as i64
    }
}

struct Draws<'a> {
    x: &'a ComponentState,
    y: &'a ComponentState,
    act: Activation,
}

impl<'a> Draws<'a> {
    fn new(x: &'a ComponentState, y: &'a ComponentState) -> Self {
        Draws {
            x,
            y,
            act: Activation {
                x_active: vec![false; x.len()],
                y_active: vec![false; y.len()],
                x_vertices: 0,
                y_vertices: 0,
            },
        }
    }

    fn set_x(&mut self, i: usize) {
        self.act.x_active[i] = true;
        self.act.x_vertices += self.x.components()[i].size;
    }

    fn set_y(&mut self, i: usize) {
        self.act.y_active[i] = true;
        self.act.y_vertices += self.y.components()[i].size;
    }

    /// Matched pairs first, then unmatched X, then unmatched Y, one coin each.
    /// Pairs in `reserved` are matched but left for the caller to draw.
    fn independent<R: Rng + ?Sized>(
        &mut self,
        pairs: &[(usize, usize)],
        reserved: &[(usize, usize)],
        r: f64,
        rng: &mut R,
    ) {
        let mut x_matched = vec![false; self.x.len()];
        let mut y_matched = vec![false; self.y.len()];
        for &(i, j) in reserved {
            x_matched[i] = true;
            y_matched[j] = true;
        }
        for &(i, j) in pairs {
            x_matched[i] = true;
            y_matched[j] = true;
            if coin(r, rng) {
                self.set_x(i);
                self.set_y(j);
            }
        }
        for (i, _) in x_matched.iter().enumerate().filter(|(_, &m)| !m) {
            if coin(r, rng) {
                self.set_x(i);
            }
        }
        for (j, _) in y_matched.iter().enumerate().filter(|(_, &m)| !m) {
            if coin(r, rng) {
                self.set_y(j);
            }
        }
    }
}

#[inline]
fn coin<R: Rng + ?Sized>(r: f64, rng: &mut R) -> bool {
    r >= 1.0 || rng.random::<f64>() < r
}

fn pair_indices(x: &ComponentState, y: &ComponentState, coupling: &CouplingState) -> Result<Vec<(usize, usize)>> {
    coupling
        .matching
        .iter()
        .map(|&(a, b)| match (index_of(x, a), index_of(y, b)) {
            (Some(i), Some(j)) => Ok((i, j)),
            _ => Err(invalid(format!("matching names a missing component ({a}, {b})"))),
        })
        .collect()
}

/// Matched pairs share one Bernoulli(1/q) coin; unmatched components flip
/// independently. Draw order: matched pairs, unmatched X, unmatched Y.
pub fn matched_activation<R: Rng + ?Sized>(
    x: &ComponentState,
    y: &ComponentState,
    coupling: &CouplingState,
    params: &ModelParams,
    rng: &mut R,
) -> Result<Activation> {
    params.require_cm()?;
    let pairs = pair_indices(x, y, coupling)?;
    let mut draws = Draws::new(x, y);
    draws.independent(&pairs, &[], params.activation_probability(), rng);
    Ok(draws.act)
}

/// Residual, in standard deviations of the smaller classes, that a class
/// leaves for them to absorb.
pub const CORRECTION_SLACK: f64 = 1.0;

/// Like [`matched_activation`], except that matched classes of size at most
/// `max_class_size` are drawn last, largest size first, with their activation
/// counts coupled to cancel the discrepancy accumulated so far. Unmatched
/// components are paired by size rank and each such pair shares a coin.
///
/// Within a class of `K` pairs of size `s` the counts `(N_X, N_Y)` are each
/// Binomial(K, 1/q), drawn from the maximal coupling that aims at a shift
/// `N_X - N_Y = y`. A class only takes on the part of the running
/// discrepancy that the smaller classes cannot be expected to absorb, so
/// split pairs stay small; the smallest class aims at the full remainder.
/// The activated pairs are prefixes of one
/// uniformly shuffled order, so each copy's activated set is uniform given
/// its count. Every component of each copy is therefore still activated
/// independently with probability `1/q`.
pub fn corrected_activation<R: Rng + ?Sized>(
    x: &ComponentState,
    y: &ComponentState,
    coupling: &CouplingState,
    params: &ModelParams,
    max_class_size: usize,
    rng: &mut R,
) -> Result<Activation> {
    params.require_cm()?;
    let r = params.activation_probability();
    let pairs = pair_indices(x, y, coupling)?;
    let mut free_pairs = Vec::new();
    let mut reserved = Vec::new();
    let mut classes: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for &(i, j) in &pairs {
        let s = x.components()[i].size;
        if s <= max_class_size && r < 1.0 {
            classes.entry(s).or_default().push((i, j));
            reserved.push((i, j));
        } else {
            free_pairs.push((i, j));
        }
    }
    // unmatched components are paired by size rank and share a coin too, so
    // only their size differences enter the discrepancy
    let mut x_free = vec![true; x.len()];
    let mut y_free = vec![true; y.len()];
    for &(i, j) in &pairs {
        x_free[i] = false;
        y_free[j] = false;
    }
    let by_size_desc = |state: &ComponentState, free: &[bool]| {
        let mut idx: Vec<usize> = (0..state.len()).filter(|&i| free[i]).collect();
        idx.sort_by_key(|&i| std::cmp::Reverse(state.components()[i].size));
        idx
    };
    let (xs, ys) = (by_size_desc(x, &x_free), by_size_desc(y, &y_free));
    free_pairs.extend(xs.into_iter().zip(ys));
    let mut draws = Draws::new(x, y);
    draws.independent(&free_pairs, &reserved, r, rng);
    // spread of the activated mass in all classes strictly below each size
    let mut below = BTreeMap::new();
    let mut variance = 0.0f64;
    for (&s, members) in &classes {
        below.insert(s, variance.sqrt());
        variance += (s * s) as f64 * members.len() as f64 * r * (1.0 - r);
    }
    for (&s, members) in classes.iter().rev() {
        let k = members.len() as i64;
        let residual = draws.act.discrepancy();
        // leave to the smaller classes what they can absorb; a split pair of
        // size s costs s^2 in unmatched mass
        let slack = CORRECTION_SLACK * below[&s];
        let excess = residual.abs() as f64 - slack;
        let target = if slack == 0.0 {
            -(residual as f64 / s as f64).round() as i64
        } else if excess > 0.0 {
            -residual.signum() * (excess / s as f64).round() as i64
        } else {
            0
        }
        .clamp(-k, k);
        let k = k as u64;
        let (nx, ny) = if target == 0 {
            let both = binomial(rng, k, r);
            (both, both)
        } else {
            let (a, b, _) = BinomialShiftCoupling::new(k, r, target).sample(rng);
            (a, b)
        };
        let order = index::sample(rng, members.len(), nx.max(ny) as usize);
        for (rank, m) in order.iter().enumerate() {
            let (i, j) = members[m];
            if (rank as u64) < nx {
                draws.set_x(i);
            }
            if (rank as u64) < ny {
                draws.set_y(j);
            }
        }
    }
    Ok(draws.act)
}

/// Percolation on `small + extra` vertices built on top of a percolation on
/// the first `small`. Returns the base sizes, which base components the extra
/// vertices touched, and the sizes of the merged components.
fn nested_percolation<R: Rng + ?Sized>(
    small: usize,
    extra: usize,
    p: f64,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<bool>, Vec<usize>)> {
    let base = sample_components(small, p, rng)?.sizes;
    let extra_sizes = sample_components(extra, p, rng)?.sizes;
    let mut cumulative = Vec::with_capacity(base.len());
    let mut acc = 0;
    for &s in &base {
        acc += s;
        cumulative.push(acc);
    }
    let offset = base.len();
    let mut dsu = DisjointSets::new(offset + extra_sizes.len());
    let mut touched = vec![false; base.len()];
    // extra vertices are exchangeable, so they fill the extra components in order
    for (e, &size) in extra_sizes.iter().enumerate() {
        for _ in 0..size {
            let hits = binomial(rng, small as u64, p) as usize;
            if hits == 0 {
                continue;
            }
            for v in index::sample(rng, small, hits).iter() {
                let c = cumulative.partition_point(|&end| end <= v);
                touched[c] = true;
                dsu.union(c, offset + e);
            }
        }
    }
    let mut merged: BTreeMap<usize, usize> = BTreeMap::new();
    for (c, &s) in base.iter().enumerate().filter(|(c, _)| touched[*c]) {
        *merged.entry(dsu.find(c)).or_insert(0) += s;
    }
    for (e, &s) in extra_sizes.iter().enumerate() {
        *merged.entry(dsu.find(offset + e)).or_insert(0) += s;
    }
    Ok((base, touched, merged.into_values().collect()))
}

/// What one coupled step did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoupledStepTrace {
    pub discrepancy: i64,
    /// Whether a single percolation outcome served both copies.
    pub shared: bool,
    pub z_before: u64,
    pub z_after: u64,
}

/// One coupled CM step applied in place; `coupling` must be a valid matching
/// for `(x, y)` and is updated to a valid matching for the new pair.
pub fn coupled_step_in_place<R: Rng + ?Sized>(
    x: &mut ComponentState,
    y: &mut ComponentState,
    coupling: &mut CouplingState,
    params: &ModelParams,
    strategy: CouplingStrategy,
    spec: &IntervalSpec,
    rng: &mut R,
) -> Result<CoupledStepTrace> {
    check_same_n(x, y)?;
    let act = match strategy {
        CouplingStrategy::Plain => matched_activation(x, y, coupling, params, rng)?,
        CouplingStrategy::Corrected { max_class_size } => {
            corrected_activation(x, y, coupling, params, max_class_size, rng)?
        }
    };
    let d = act.discrepancy();
    let z_before = coupling.z_value;
    // pairs whose components both stay put remain matched
    let mut pairs: Vec<(ComponentId, ComponentId)> = coupling
        .matching
        .iter()
        .copied()
        .filter(|&(a, b)| {
            !act.x_active[index_of(x, a).expect("validated")]
                && !act.y_active[index_of(y, b).expect("validated")]
        })
        .collect();
    let p = params.p();
    let shared = d == 0;
    if shared {
        let sizes = sample_components(act.x_vertices, p, rng)?.sizes;
        let xs = replace_active(x, &act.x_active, &sizes);
        let ys = replace_active(y, &act.y_active, &sizes);
        pairs.extend(xs.into_iter().zip(ys));
    } else {
        match strategy {
            CouplingStrategy::Plain => {
                let sx = sample_components(act.x_vertices, p, rng)?.sizes;
                let sy = sample_components(act.y_vertices, p, rng)?.sizes;
                replace_active(x, &act.x_active, &sx);
                replace_active(y, &act.y_active, &sy);
            }
            CouplingStrategy::Corrected { .. } => {
                let small = act.x_vertices.min(act.y_vertices);
                let extra = d.unsigned_abs() as usize;
                let (base, touched, merged) = nested_percolation(small, extra, p, rng)?;
                let mut larger: Vec<usize> = base
                    .iter()
                    .zip(&touched)
                    .filter(|(_, &t)| !t)
                    .map(|(&s, _)| s)
                    .collect();
                let untouched = larger.len();
                larger.extend(merged);
                let (small_ids, large_ids) = if d > 0 {
                    let ys = replace_active(y, &act.y_active, &base);
                    (ys, replace_active(x, &act.x_active, &larger))
                } else {
                    let xs = replace_active(x, &act.x_active, &base);
                    (xs, replace_active(y, &act.y_active, &larger))
                };
                let kept_small = small_ids
                    .iter()
                    .zip(&touched)
                    .filter(|(_, &t)| !t)
                    .map(|(&id, _)| id);
                for (s_id, &l_id) in kept_small.zip(&large_ids[..untouched]) {
                    pairs.push(if d > 0 { (l_id, s_id) } else { (s_id, l_id) });
                }
            }
        }
    }
    let matching = top_up(x, y, pairs);
    *coupling = finish_state(x, y, matching, spec, d);
    Ok(CoupledStepTrace {
        discrepancy: d,
        shared,
        z_before,
        z_after: coupling.z_value,
    })
}

/// Non-mutating form of [`coupled_step_in_place`].
pub fn coupled_percolation_step<R: Rng + ?Sized>(
    x: &ComponentState,
    y: &ComponentState,
    coupling: &CouplingState,
    params: &ModelParams,
    strategy: CouplingStrategy,
    spec: &IntervalSpec,
    rng: &mut R,
) -> Result<(ComponentState, ComponentState, CouplingState, CoupledStepTrace)> {
    let (mut x, mut y, mut c) = (x.clone(), y.clone(), coupling.clone());
    let trace = coupled_step_in_place(&mut x, &mut y, &mut c, params, strategy, spec, rng)?;
    Ok((x, y, c, trace))
}

/// Steps until the copies have equal size multisets, or `None` after
/// `max_steps`.
pub fn coalescence_time<R: Rng + ?Sized>(
    start_x: &ComponentState,
    start_y: &ComponentState,
    params: &ModelParams,
    strategy: CouplingStrategy,
    max_steps: usize,
    rng: &mut R,
) -> Result<Option<usize>> {
    let spec = IntervalSpec::default_for(params.n());
    let (mut x, mut y) = (start_x.clone(), start_y.clone());
    let mut coupling = build_matching(&x, &y, &spec)?;
    if coupling.z_value == 0 {
        return Ok(Some(0));
    }
    for step in 1..=max_steps {
        coupled_step_in_place(&mut x, &mut y, &mut coupling, params, strategy, &spec, rng)?;
        if coupling.z_value == 0 {
            return Ok(Some(step));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingTimeReport {
    pub n: usize,
    pub q: f64,
    pub lambda: f64,
    pub strategy: CouplingStrategy,
    pub max_steps: usize,
    /// Per replica; `None` if the copies had not met after `max_steps`.
    pub times: Vec<Option<usize>>,
    pub success_fraction: f64,
    /// Median over all replicas, counting failures as `+inf`.
    pub median: Option<f64>,
}

/// Runs the coupling from the worst start pair (one component vs all
/// singletons) in `replicas` independent replicas.
pub fn coupling_time_experiment(
    params: &ModelParams,
    replicas: usize,
    max_steps: usize,
    seed: u64,
    strategy: CouplingStrategy,
) -> Result<CouplingTimeReport> {
    if replicas == 0 {
        return Err(invalid("coupling experiment needs at least one replica"));
    }
    params.require_cm()?;
    let (full, empty) = crate::cm::worst_starts(params.n())?;
    let results = run_replicas(seed, replicas, |_, rng| {
        coalescence_time(&full, &empty, params, strategy, max_steps, rng)
    });
    let times = results.into_iter().collect::<Result<Vec<_>>>()?;
    let successes = times.iter().filter(|t| t.is_some()).count();
    let mut sorted: Vec<f64> = times
        .iter()
        .map(|t| t.map_or(f64::INFINITY, |v| v as f64))
        .collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let med = median(&sorted);
    Ok(CouplingTimeReport {
        n: params.n(),
        q: params.q(),
        lambda: params.lambda(),
        strategy,
        max_steps,
        success_fraction: successes as f64 / replicas as f64,
        median: med.is_finite().then_some(med),
        times,
    })
}

/// Start pair for the `Z_t` decay experiment: both copies share a CM state
/// on `n - m` vertices (burned in from all singletons), and the remaining
/// `m` vertices form triples in `X` and pairs in `Y`. `m` must be a positive
/// multiple of 6.
pub fn z_decay_start<R: Rng + ?Sized>(
    params: &ModelParams,
    m: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<(ComponentState, ComponentState)> {
    let n = params.n();
    if m == 0 || !m.is_multiple_of(6) || m >= n {
        return Err(invalid(format!("unmatched mass {m} must be a positive multiple of 6 below n = {n}")));
    }
    let body_params = ModelParams::with_edge_probability(n - m, params.q(), params.p())?;
    let mut body = ComponentState::empty(n - m)?;
    for _ in 0..burn_in {
        crate::cm::cm_step_in_place(&mut body, &body_params, rng)?;
    }
    let shared: Vec<usize> = body.sizes().collect();
    let with = |size: usize| {
        let mut sizes = shared.clone();
        sizes.extend(std::iter::repeat_n(size, m / size));
        ComponentState::from_sizes(&sizes)
    };
    Ok((with(3)?, with(2)?))
}

/// Mean of `Z_t` along coupled trajectories that have had `D = 0` at every
/// step so far.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZDecayReport {
    /// `E[Z_t]` over replicas still on the `D = 0` path, `t = 0..=steps`.
    pub mean_z: Vec<f64>,
    pub surviving: Vec<usize>,
    /// Last `t` used in the fit.
    pub fit_until: usize,
    /// Least-squares slope of `ln E[Z_t]` on `t = 0..=fit_until`.
    pub slope: f64,
    /// `ln(1 - 1/q)`.
    pub expected_slope: f64,
}

impl ZDecayReport {
    pub fn relative_error(&self) -> f64 {
        ((self.slope - self.expected_slope) / self.expected_slope).abs()
    }
}

/// Settings for [`z_decay_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZDecayConfig {
    pub unmatched_vertices: usize,
    pub burn_in: usize,
    pub replicas: usize,
    pub steps: usize,
    /// The fit stops before `E[Z_t]` falls under this fraction of `Z_0` ...
    pub min_fraction: f64,
    /// ... or fewer than this many replicas remain on the path.
    pub min_surviving: usize,
}

impl ZDecayConfig {
    pub fn new(replicas: usize) -> Self {
        ZDecayConfig {
            unmatched_vertices: 3000,
            burn_in: 30,
            replicas,
            steps: 12,
            min_fraction: 0.01,
            min_surviving: 20,
        }
    }
}

/// Follows `Z_t` from [`z_decay_start`] under the corrected coupling and fits
/// the decay rate of its mean on the `D = 0` path.
pub fn z_decay_experiment(params: &ModelParams, config: &ZDecayConfig, seed: u64) -> Result<ZDecayReport> {
    params.require_cm()?;
    if config.replicas == 0 {
        return Err(invalid("z decay needs at least one replica"));
    }
    let n = params.n();
    let spec = IntervalSpec::default_for(n);
    let strategy = CouplingStrategy::corrected_for(n);
    let runs = run_replicas(seed, config.replicas, |_, rng| -> Result<Vec<Option<u64>>> {
        let (mut x, mut y) = z_decay_start(params, config.unmatched_vertices, config.burn_in, rng)?;
        let mut coupling = build_matching(&x, &y, &spec)?;
        let mut path = vec![Some(coupling.z_value)];
        for _ in 0..config.steps {
            let trace = coupled_step_in_place(&mut x, &mut y, &mut coupling, params, strategy, &spec, rng)?;
            let on_path = path.last().is_some_and(|z| z.is_some()) && trace.discrepancy == 0;
            path.push(on_path.then_some(coupling.z_value));
        }
        Ok(path)
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut mean_z = Vec::with_capacity(config.steps + 1);
    let mut surviving = Vec::with_capacity(config.steps + 1);
    for t in 0..=config.steps {
        let alive: Vec<f64> = runs.iter().filter_map(|r| r[t]).map(|z| z as f64).collect();
        surviving.push(alive.len());
        mean_z.push(if alive.is_empty() { 0.0 } else { alive.iter().sum::<f64>() / alive.len() as f64 });
    }
    let floor = config.min_fraction * mean_z[0];
    let fit_until = (1..=config.steps)
        .take_while(|&t| surviving[t] >= config.min_surviving && mean_z[t] >= floor && mean_z[t] > 0.0)
        .last()
        .unwrap_or(0);
    if fit_until < 2 {
        return Err(Error::Domain(format!(
            "too few usable steps for a slope (surviving {surviving:?}); use more replicas or unmatched vertices"
        )));
    }
    let ts: Vec<f64> = (0..=fit_until).map(|t| t as f64).collect();
    let logs: Vec<f64> = mean_z[..=fit_until].iter().map(|z| z.ln()).collect();
    let (slope, _) = least_squares(&ts, &logs);
    Ok(ZDecayReport {
        mean_z,
        surviving,
        fit_until,
        slope,
        expected_slope: (1.0 - 1.0 / params.q()).ln(),
    })
}
