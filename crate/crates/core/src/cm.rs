//! Chayes-Machta and Swendsen-Wang steps on the mean-field configuration.
//!
//! A CM step activates every component independently with probability
//! `1/q`, discards the edges among the active vertices and re-percolates them
//! with edge probability `p = lambda/n`. On the complete graph only the
//! number of active vertices matters for the new structure, so the step is a
//! `G(A, p)` draw spliced into the inactive components.

use std::collections::BTreeSet;

use rand::Rng;
use serde::Serialize;

use crate::drift::phi;
use crate::error::{invalid, Result};
use crate::params::ModelParams;
use crate::percolation::sample_components;
use crate::state::{stats, ComponentId, ComponentState, IntervalSpec, StatsReport};

/// What happened during one CM step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepTrace {
    pub activated_ids: Vec<ComponentId>,
    /// `A(X)`, the number of activated vertices.
    pub active_vertices: usize,
    /// Whether the largest component (lowest id among ties) was activated.
    pub largest_activated: bool,
    pub new_component_ids: Vec<ComponentId>,
    /// Open edges among the activated vertices after re-percolation.
    pub new_edges: u64,
}

fn largest_index(state: &ComponentState) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, c) in state.components().iter().enumerate() {
        if best.is_none_or(|(_, s)| c.size > s) {
            best = Some((i, c.size));
        }
    }
    best.map(|(i, _)| i)
}

/// Draws one activation flag per component, in id order.
pub(crate) fn draw_activation<R: Rng + ?Sized>(state: &ComponentState, prob: f64, rng: &mut R) -> Vec<bool> {
    state
        .components()
        .iter()
        .map(|_| prob >= 1.0 || rng.random::<f64>() < prob)
        .collect()
}

/// Removes the flagged components and splices in `sizes` with fresh ids.
pub(crate) fn replace_active(
    state: &mut ComponentState,
    active: &[bool],
    sizes: &[usize],
) -> Vec<ComponentId> {
    state.remove_flagged(active);
    sizes.iter().map(|&s| state.push_fresh(s)).collect()
}

/// One CM step applied in place.
pub fn cm_step_in_place<R: Rng + ?Sized>(
    state: &mut ComponentState,
    params: &ModelParams,
    rng: &mut R,
) -> Result<StepTrace> {
    params.require_cm()?;
    if state.n() != params.n() {
        return Err(invalid(format!(
            "state has {} vertices, parameters {}",
            state.n(),
            params.n()
        )));
    }
    let active = draw_activation(state, params.activation_probability(), rng);
    let largest_activated = largest_index(state).is_some_and(|i| active[i]);
    let mut activated_ids = Vec::new();
    let mut active_vertices = 0;
    for (c, &a) in state.components().iter().zip(&active) {
        if a {
            activated_ids.push(c.id);
            active_vertices += c.size;
        }
    }
    let outcome = sample_components(active_vertices, params.p(), rng)?;
    let new_edges = outcome
        .sizes
        .iter()
        .zip(&outcome.surpluses)
        .map(|(&s, &extra)| s as u64 - 1 + extra)
        .sum();
    let new_component_ids = replace_active(state, &active, &outcome.sizes);
    Ok(StepTrace {
        activated_ids,
        active_vertices,
        largest_activated,
        new_component_ids,
        new_edges,
    })
}

/// One CM step; returns the new state and the step trace.
pub fn cm_step<R: Rng + ?Sized>(
    state: &ComponentState,
    params: &ModelParams,
    rng: &mut R,
) -> Result<(ComponentState, StepTrace)> {
    let mut next = state.clone();
    let trace = cm_step_in_place(&mut next, params, rng)?;
    Ok((next, trace))
}

/// One Swendsen-Wang step (integer `q`) applied in place: every component
/// gets a uniform colour and each colour class is re-percolated on its own.
pub fn sw_step_in_place<R: Rng + ?Sized>(
    state: &mut ComponentState,
    params: &ModelParams,
    rng: &mut R,
) -> Result<()> {
    let colours = params.integer_q()?;
    if state.n() != params.n() {
        return Err(invalid("state and parameters disagree on n"));
    }
    let mut class_mass = vec![0usize; colours];
    for c in state.components() {
        let colour = if colours == 1 { 0 } else { rng.random_range(0..colours) };
        class_mass[colour] += c.size;
    }
    state.clear();
    for mass in class_mass {
        let outcome = sample_components(mass, params.p(), rng)?;
        for s in outcome.sizes {
            state.push_fresh(s);
        }
    }
    Ok(())
}

pub fn sw_step<R: Rng + ?Sized>(
    state: &ComponentState,
    params: &ModelParams,
    rng: &mut R,
) -> Result<ComponentState> {
    let mut next = state.clone();
    sw_step_in_place(&mut next, params, rng)?;
    Ok(next)
}

/// The two extreme starting configurations: one giant component and all
/// singletons.
pub fn worst_starts(n: usize) -> Result<(ComponentState, ComponentState)> {
    if n == 0 {
        return Err(invalid("worst starts need n >= 1"));
    }
    Ok((ComponentState::full(n)?, ComponentState::empty(n)?))
}

/// Tracks the set `S(X_t)` and `Q(X_t) = sum of squared sizes outside S`.
///
/// Each step removes activated members from `S` and adds the largest newly
/// created component, ties going to the lowest fresh id.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SqTracker {
    pub s_ids: BTreeSet<ComponentId>,
    pub q_value: u64,
}

impl SqTracker {
    /// Starts with `S = ∅`, so `Q = R1`.
    pub fn new(state: &ComponentState) -> Self {
        SqTracker {
            s_ids: BTreeSet::new(),
            q_value: state.r1(),
        }
    }

    pub fn update(&mut self, state: &ComponentState, trace: &StepTrace) {
        for id in &trace.activated_ids {
            self.s_ids.remove(id);
        }
        let newest = trace
            .new_component_ids
            .iter()
            .filter_map(|&id| state.size_of(id).map(|s| (id, s)))
            .fold(None::<(ComponentId, usize)>, |best, (id, s)| match best {
                Some((_, bs)) if bs >= s => best,
                _ => Some((id, s)),
            });
        if let Some((id, _)) = newest {
            self.s_ids.insert(id);
        }
        let s_mass: u64 = self.s_squared_mass(state);
        self.q_value = state.r1() - s_mass;
    }

    pub fn s_squared_mass(&self, state: &ComponentState) -> u64 {
        self.s_ids
            .iter()
            .filter_map(|&id| state.size_of(id))
            .map(|s| (s as u64) * (s as u64))
            .sum()
    }

    /// Total number of vertices in `S`.
    pub fn s_vertices(&self, state: &ComponentState) -> usize {
        self.s_ids.iter().filter_map(|&id| state.size_of(id)).sum()
    }
}

/// Which per-step observables a trajectory records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Observers {
    pub stats: bool,
    pub sq_tracker: bool,
    pub drift_residual: bool,
    pub step_trace: bool,
}

impl Observers {
    pub const NAMES: [&'static str; 4] = ["stats", "sq_tracker", "drift_residual", "step_trace"];

    pub fn all() -> Self {
        Observers {
            stats: true,
            sq_tracker: true,
            drift_residual: true,
            step_trace: true,
        }
    }

    pub fn parse<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut obs = Observers::default();
        for name in names {
            match name.as_ref().trim() {
                "stats" => obs.stats = true,
                "sq_tracker" => obs.sq_tracker = true,
                "drift_residual" => obs.drift_residual = true,
                "step_trace" => obs.step_trace = true,
                "" => {}
                other => {
                    return Err(invalid(format!(
                        "unknown observer {other:?}; expected one of {:?}",
                        Self::NAMES
                    )))
                }
            }
        }
        Ok(obs)
    }
}

/// Snapshot of the `S`/`Q` tracker after a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqSnapshot {
    pub s_components: usize,
    pub s_vertices: usize,
    pub q_value: u64,
}

/// Record of one trajectory step. `l1` and the activation data are always
/// filled; the rest depends on the [`Observers`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryStep {
    pub step: usize,
    pub l1: usize,
    pub active_vertices: usize,
    pub largest_activated: bool,
    pub stats: Option<StatsReport>,
    pub drift_residual: Option<f64>,
    pub sq: Option<SqSnapshot>,
    pub trace: Option<StepTrace>,
}

/// Settings shared by trajectory runners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryConfig {
    pub observers: Observers,
    pub interval_spec: IntervalSpec,
    /// Threshold `B` for `R_tilde`.
    pub small_threshold: usize,
}

impl TrajectoryConfig {
    pub fn new(n: usize, observers: Observers) -> Self {
        let interval_spec = IntervalSpec::default_for(n);
        let (_, b_omega) = crate::state::omega_default(n.max(2));
        TrajectoryConfig {
            observers,
            interval_spec,
            small_threshold: (b_omega.floor() as usize).max(1),
        }
    }
}

/// Below this largest-component fraction no drift residual is recorded.
pub const DRIFT_RESIDUAL_MIN_THETA: f64 = 0.01;

/// Runs `steps` CM steps from `start`.
///
/// The drift residual `L1(X_{t+1})/n - phi(L1(X_t)/n)` is recorded only on
/// steps that activate the largest component and where `L1(X_t)/n` is at
/// least [`DRIFT_RESIDUAL_MIN_THETA`] with `phi` defined.
pub fn run_trajectory<R: Rng + ?Sized>(
    start: &ComponentState,
    params: &ModelParams,
    steps: usize,
    config: &TrajectoryConfig,
    rng: &mut R,
) -> Result<(ComponentState, Vec<TrajectoryStep>)> {
    if steps == 0 {
        return Err(invalid("a trajectory needs at least one step"));
    }
    let n = params.n() as f64;
    let obs = config.observers;
    let mut state = start.clone();
    let mut tracker = obs.sq_tracker.then(|| SqTracker::new(&state));
    let mut records = Vec::with_capacity(steps);
    for step in 1..=steps {
        let theta_before = state.largest() as f64 / n;
        let trace = cm_step_in_place(&mut state, params, rng)?;
        let l1 = state.largest();
        let drift_residual = if obs.drift_residual
            && trace.largest_activated
            && theta_before >= DRIFT_RESIDUAL_MIN_THETA
            && params.q() > 1.0
        {
            phi(theta_before, params.lambda(), params.q()).map(|v| l1 as f64 / n - v)
        } else {
            None
        };
        let sq = tracker.as_mut().map(|t| {
            t.update(&state, &trace);
            SqSnapshot {
                s_components: t.s_ids.len(),
                s_vertices: t.s_vertices(&state),
                q_value: t.q_value,
            }
        });
        records.push(TrajectoryStep {
            step,
            l1,
            active_vertices: trace.active_vertices,
            largest_activated: trace.largest_activated,
            stats: obs
                .stats
                .then(|| stats(&state, &config.interval_spec, config.small_threshold)),
            drift_residual,
            sq,
            trace: obs.step_trace.then_some(trace),
        });
    }
    Ok((state, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replicas::replica_rng;

    fn params(n: usize, q: f64, lambda: f64) -> ModelParams {
        ModelParams::new(n, q, lambda).unwrap()
    }

    #[test]
    fn worst_starts_shapes() {
        let (full, empty) = worst_starts(3).unwrap();
        assert_eq!(full.sorted_sizes(), vec![3]);
        assert_eq!(empty.sorted_sizes(), vec![1, 1, 1]);
        let (a, b) = worst_starts(1).unwrap();
        assert_eq!(a, b);
        assert_eq!(worst_starts(10).unwrap().0.r1(), 100);
        assert!(worst_starts(0).is_err());
    }

    #[test]
    fn step_conserves_vertices_and_keeps_inactive_ids() {
        let p = params(500, 1.5, 1.5);
        let mut rng = replica_rng(3, 0);
        let mut state = ComponentState::from_sizes(&[200, 100, 50, 50, 25, 25, 50]).unwrap();
        for _ in 0..50 {
            let (next, trace) = cm_step(&state, &p, &mut rng).unwrap();
            assert_eq!(next.n(), 500);
            next.check_invariants().unwrap();
            let activated: BTreeSet<_> = trace.activated_ids.iter().copied().collect();
            let active_mass: usize = trace
                .activated_ids
                .iter()
                .map(|&id| state.size_of(id).unwrap())
                .sum();
            assert_eq!(active_mass, trace.active_vertices);
            for c in state.components() {
                if !activated.contains(&c.id) {
                    assert_eq!(next.size_of(c.id), Some(c.size));
                } else {
                    assert!(!next.contains(c.id));
                }
            }
            state = next;
        }
    }

    #[test]
    fn full_state_unchanged_without_activation() {
        let p = params(50, 3.0, 1.0);
        let mut rng = replica_rng(4, 0);
        let state = ComponentState::full(50).unwrap();
        let mut unchanged = 0;
        for _ in 0..3000 {
            let (next, trace) = cm_step(&state, &p, &mut rng).unwrap();
            if trace.activated_ids.is_empty() {
                assert_eq!(next, state);
                unchanged += 1;
            }
        }
        // 1 - 1/q = 2/3
        let frac = unchanged as f64 / 3000.0;
        assert!((frac - 2.0 / 3.0).abs() < 4.0 * (2.0 / 9.0 / 3000.0f64).sqrt());
    }

    #[test]
    fn two_vertex_merge_probability() {
        // both activated (1/4), then the edge opens (p)
        let p = params(2, 2.0, 1.2);
        let mut rng = replica_rng(5, 0);
        let start = ComponentState::empty(2).unwrap();
        let trials = 200_000;
        let merged = (0..trials)
            .filter(|_| cm_step(&start, &p, &mut rng).unwrap().0.len() == 1)
            .count();
        let expect = 0.25 * 0.6;
        let se = (expect * (1.0 - expect) / trials as f64).sqrt();
        assert!(((merged as f64 / trials as f64) - expect).abs() < 4.0 * se);
    }

    #[test]
    fn sw_two_vertex_merge_probability() {
        // same colour (1/2), then the edge opens (p)
        let p = params(2, 2.0, 1.2);
        let mut rng = replica_rng(6, 0);
        let start = ComponentState::empty(2).unwrap();
        let trials = 200_000;
        let merged = (0..trials)
            .filter(|_| sw_step(&start, &p, &mut rng).unwrap().len() == 1)
            .count();
        let expect = 0.5 * 0.6;
        let se = (expect * (1.0 - expect) / trials as f64).sqrt();
        assert!(((merged as f64 / trials as f64) - expect).abs() < 4.0 * se);
        assert!(sw_step(&start, &params(2, 2.5, 1.0), &mut rng).is_err());
    }

    #[test]
    fn unit_q_requires_flag() {
        let mut rng = replica_rng(7, 0);
        let start = ComponentState::empty(10).unwrap();
        assert!(cm_step(&start, &params(10, 1.0, 1.0), &mut rng).is_err());
        let oracle = ModelParams::unit_q_oracle(10, 1.0).unwrap();
        let (_, trace) = cm_step(&start, &oracle, &mut rng).unwrap();
        assert_eq!(trace.active_vertices, 10);
    }

    #[test]
    fn sq_tracker_accounts_for_r1() {
        let p = params(2000, 1.5, 1.5);
        let mut rng = replica_rng(8, 0);
        let mut state = ComponentState::full(2000).unwrap();
        let mut tracker = SqTracker::new(&state);
        assert_eq!(tracker.q_value, state.r1());
        for _ in 0..100 {
            let trace = cm_step_in_place(&mut state, &p, &mut rng).unwrap();
            tracker.update(&state, &trace);
            assert!(tracker.s_ids.iter().all(|&id| state.contains(id)));
            assert_eq!(tracker.q_value + tracker.s_squared_mass(&state), state.r1());
        }
    }

    #[test]
    fn trajectory_records_each_step() {
        let p = params(1000, 1.5, 1.5);
        let mut rng = replica_rng(9, 0);
        let config = TrajectoryConfig::new(1000, Observers::all());
        let start = ComponentState::full(1000).unwrap();
        let (end, records) = run_trajectory(&start, &p, 20, &config, &mut rng).unwrap();
        assert_eq!(records.len(), 20);
        assert_eq!(records.last().unwrap().l1, end.largest());
        for r in &records {
            assert!(r.stats.is_some() && r.sq.is_some() && r.trace.is_some());
            if r.drift_residual.is_some() {
                assert!(r.largest_activated);
            }
        }
        assert!(run_trajectory(&start, &p, 0, &config, &mut rng).is_err());

        // one step equals cm_step under the same stream
        let mut a = replica_rng(10, 0);
        let mut b = replica_rng(10, 0);
        let (one, _) = run_trajectory(&start, &p, 1, &config, &mut a).unwrap();
        let (direct, _) = cm_step(&start, &p, &mut b).unwrap();
        assert_eq!(one, direct);
    }

    #[test]
    fn observer_names() {
        let o = Observers::parse(&["stats", "drift_residual"]).unwrap();
        assert!(o.stats && o.drift_residual && !o.sq_tracker && !o.step_trace);
        assert!(Observers::parse(&["bogus"]).is_err());
    }
}
