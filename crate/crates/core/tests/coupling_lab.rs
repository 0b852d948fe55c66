use rcmf_core::coupling::{
    build_matching, check_matching, coupled_step_in_place, matched_activation, CouplingStrategy,
};
use rcmf_core::inference::{Proportion, Z_999};
use rcmf_core::replicas::replica_rng;
use rcmf_core::walks::{rw_difference_coupling, WalkSpec};
use rcmf_core::{ComponentState, IntervalSpec, ModelParams};

fn st(sizes: &[usize]) -> ComponentState {
    ComponentState::from_sizes(sizes).unwrap()
}

#[test]
fn discrepancy_respects_hoeffding_envelope() {
    let params = ModelParams::new(10, 1.5, 1.5).unwrap();
    let spec = IntervalSpec::default_for(10);
    let mut rng = replica_rng(31, 0);
    for (x, y) in [(st(&[5, 3, 2]), st(&[4, 4, 1, 1])), (st(&[3, 3, 2, 2]), st(&[3, 2, 2, 1, 1, 1]))] {
        let coupling = build_matching(&x, &y, &spec).unwrap();
        let z = coupling.z_value as f64;
        let draws: Vec<i64> = (0..100_000)
            .map(|_| matched_activation(&x, &y, &coupling, &params, &mut rng).unwrap().discrepancy())
            .collect();
        for eta in [0.25, 0.5, 1.0, 2.0] {
            let limit = (eta * z).sqrt();
            let hits = draws.iter().filter(|d| d.unsigned_abs() as f64 > limit).count() as u64;
            let tail = Proportion::wilson(hits, draws.len() as u64, Z_999);
            let bound = 2.0 * (-2.0 * eta).exp();
            assert!(tail.lower <= bound, "z={z} eta={eta}: {tail:?} vs {bound}");
        }
    }
}

#[test]
fn difference_coupling_success_decreases_with_target() {
    let mut rng = replica_rng(32, 0);
    let mut previous: Option<Proportion> = None;
    for d in [0, 2, 5, 10, 20, 40] {
        let spec = WalkSpec::constant(1, 400, 1, 0.5, d).unwrap();
        let report = rw_difference_coupling(&spec, 50_000, &mut rng).unwrap();
        if let Some(prev) = previous {
            assert!(
                report.success.estimate <= prev.estimate + prev.half_width() + report.success.half_width(),
                "d={d}: {:?} after {prev:?}",
                report.success
            );
        }
        previous = Some(report.success);
    }
}

#[test]
fn coupled_copies_stay_equal_once_they_meet() {
    let n = 2000;
    let params = ModelParams::new(n, 1.5, 1.5).unwrap();
    let spec = IntervalSpec::default_for(n);
    for strategy in [CouplingStrategy::Plain, CouplingStrategy::corrected_for(n)] {
        let mut rng = replica_rng(33, 0);
        let (mut x, _) = rcmf_core::cm::worst_starts(n).unwrap();
        for _ in 0..5 {
            rcmf_core::cm::cm_step_in_place(&mut x, &params, &mut rng).unwrap();
        }
        let mut y = ComponentState::from_sizes(&x.sorted_sizes()).unwrap();
        let mut coupling = build_matching(&x, &y, &spec).unwrap();
        assert_eq!(coupling.z_value, 0);
        for _ in 0..50 {
            let trace = coupled_step_in_place(&mut x, &mut y, &mut coupling, &params, strategy, &spec, &mut rng).unwrap();
            assert_eq!(trace.discrepancy, 0);
            assert_eq!(coupling.z_value, 0);
            assert!(x.same_sizes(&y));
            check_matching(&x, &y, &coupling).unwrap();
        }
    }
}
