use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rcmf_core::cm::{cm_step_in_place, run_trajectory, Observers, TrajectoryConfig};
use rcmf_core::coupling::{build_matching, check_matching, coupled_step_in_place, CouplingStrategy};
use rcmf_core::drift::beta_root;
use rcmf_core::llt::{exact_sum_law, LltInstance};
use rcmf_core::percolation::sample_components;
use rcmf_core::replicas::replica_rng;
use rcmf_core::walks::BinomialShiftCoupling;
use rcmf_core::{ComponentState, IntervalSpec, ModelParams};

/// Two size lists padded with singletons to a common total.
fn state_pair() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    let sizes = || prop::collection::vec(1usize..12, 1..25);
    (sizes(), sizes()).prop_map(|(mut a, mut b)| {
        let (sa, sb): (usize, usize) = (a.iter().sum(), b.iter().sum());
        let target = sa.max(sb);
        a.extend(std::iter::repeat_n(1, target - sa));
        b.extend(std::iter::repeat_n(1, target - sb));
        (a, b)
    })
}

fn class_counts(state: &ComponentState) -> BTreeMap<usize, u64> {
    let mut counts = BTreeMap::new();
    for s in state.sizes() {
        *counts.entry(s).or_insert(0) += 1;
    }
    counts
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matching_is_maximal_and_reproducible((a, b) in state_pair()) {
        let (x, y) = (ComponentState::from_sizes(&a).unwrap(), ComponentState::from_sizes(&b).unwrap());
        let spec = IntervalSpec::default_for(x.n());
        let coupling = build_matching(&x, &y, &spec).unwrap();
        check_matching(&x, &y, &coupling).unwrap();
        let (cx, cy) = (class_counts(&x), class_counts(&y));
        let expected_pairs: u64 = cx.iter().map(|(s, &k)| k.min(cy.get(s).copied().unwrap_or(0))).sum();
        prop_assert_eq!(coupling.matching.len() as u64, expected_pairs);
        let again = build_matching(&x, &y, &spec).unwrap();
        prop_assert_eq!(again.z_value, coupling.z_value);
        prop_assert_eq!(again.matched_interval_counts, coupling.matched_interval_counts);
    }

    #[test]
    fn cm_step_conserves_vertices_and_inactive_ids(sizes in prop::collection::vec(1usize..30, 1..40), seed in any::<u64>()) {
        let mut state = ComponentState::from_sizes(&sizes).unwrap();
        let params = ModelParams::new(state.n(), 1.7, 2.0).unwrap();
        let before = state.clone();
        let mut rng = replica_rng(seed, 0);
        let trace = cm_step_in_place(&mut state, &params, &mut rng).unwrap();
        state.check_invariants().unwrap();
        prop_assert_eq!(state.sizes().sum::<usize>(), before.n());
        let activated: BTreeSet<u64> = trace.activated_ids.iter().copied().collect();
        let mass: usize = before.components().iter().filter(|c| activated.contains(&c.id)).map(|c| c.size).sum();
        prop_assert_eq!(mass, trace.active_vertices);
        for c in before.components().iter().filter(|c| !activated.contains(&c.id)) {
            prop_assert_eq!(state.size_of(c.id), Some(c.size));
        }
    }

    #[test]
    fn percolation_outcome_is_consistent(m in 0usize..400, p in 0.0f64..0.2, seed in any::<u64>()) {
        let mut rng = replica_rng(seed, 1);
        let outcome = sample_components(m, p, &mut rng).unwrap();
        prop_assert_eq!(outcome.sizes.iter().sum::<usize>(), m);
        prop_assert_eq!(outcome.sizes.len(), outcome.surpluses.len());
        prop_assert!(outcome.sizes.iter().all(|&s| s >= 1));
    }

    #[test]
    fn sq_tracker_accounts_for_r1(n in 50usize..3000, seed in any::<u64>()) {
        let params = ModelParams::new(n, 1.5, 1.5).unwrap();
        let config = TrajectoryConfig::new(n, Observers { sq_tracker: true, step_trace: true, ..Observers::default() });
        let mut rng = replica_rng(seed, 2);
        let start = ComponentState::full(n).unwrap();
        let mut state = start.clone();
        let (_, records) = run_trajectory(&start, &params, 15, &config, &mut rng).unwrap();
        // replay with the same stream to recover the per-step states
        let mut replay = replica_rng(seed, 2);
        let mut tracker = rcmf_core::cm::SqTracker::new(&state);
        for rec in &records {
            let trace = cm_step_in_place(&mut state, &params, &mut replay).unwrap();
            prop_assert_eq!(Some(&trace), rec.trace.as_ref());
            tracker.update(&state, &trace);
            let sq = rec.sq.unwrap();
            prop_assert_eq!(sq.q_value + tracker.s_squared_mass(&state), state.r1());
            prop_assert!(tracker.s_ids.iter().all(|&id| state.contains(id)));
        }
    }

    #[test]
    fn coupled_steps_keep_a_valid_matching((a, b) in state_pair(), seed in any::<u64>(), corrected in any::<bool>()) {
        let (mut x, mut y) = (ComponentState::from_sizes(&a).unwrap(), ComponentState::from_sizes(&b).unwrap());
        let n = x.n();
        let params = ModelParams::new(n, 1.5, 1.5).unwrap();
        let spec = IntervalSpec::default_for(n);
        let strategy = if corrected { CouplingStrategy::corrected_for(n) } else { CouplingStrategy::Plain };
        let mut coupling = build_matching(&x, &y, &spec).unwrap();
        let mut rng = replica_rng(seed, 3);
        for _ in 0..8 {
            let trace = coupled_step_in_place(&mut x, &mut y, &mut coupling, &params, strategy, &spec, &mut rng).unwrap();
            check_matching(&x, &y, &coupling).unwrap();
            prop_assert_eq!(x.sizes().sum::<usize>(), n);
            prop_assert_eq!(y.sizes().sum::<usize>(), n);
            if !corrected && trace.discrepancy == 0 {
                prop_assert!(trace.z_after <= trace.z_before);
            }
            let rebuilt = build_matching(&x, &y, &spec).unwrap();
            prop_assert_eq!(rebuilt.z_value, coupling.z_value);
        }
    }

    #[test]
    fn convolution_law_has_unit_mass(sizes in prop::collection::vec(0u64..40, 1..60), r in 0.01f64..0.99) {
        let law = exact_sum_law(&LltInstance::new(sizes, r).unwrap()).unwrap();
        prop_assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(law.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn beta_root_solves_its_equation(d in 1.001f64..30.0) {
        let b = beta_root(d).unwrap();
        prop_assert!(b > 0.0 && b < 1.0);
        prop_assert!(((-d * b).exp() - (1.0 - b)).abs() < 1e-12);
    }

    #[test]
    fn shift_coupling_success_is_one_minus_tv(m in 1u64..300, shift in -20i64..20, r in 0.05f64..0.95) {
        let coupling = BinomialShiftCoupling::new(m, r, shift);
        let success = coupling.success_probability();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&success));
        if shift == 0 {
            prop_assert!((success - 1.0).abs() < 1e-12);
        }
        let mut rng = replica_rng(m ^ shift as u64, 4);
        for _ in 0..20 {
            let (x, y, coupled) = coupling.sample(&mut rng);
            prop_assert!(x <= m && y <= m);
            if coupled {
                prop_assert_eq!(x as i64 - y as i64, shift);
            }
        }
    }
}
