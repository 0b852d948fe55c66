//! One function per subcommand. Each resolves its defaults back into the
//! options (so the summary echoes them), writes its tables and returns the
//! headline numbers for `summary.json`.

use rcmf_core::cm::{run_trajectory, Observers, TrajectoryConfig, TrajectoryStep};
use rcmf_core::coupling::{coupling_time_experiment, z_decay_experiment, CouplingStrategy, ZDecayConfig};
use rcmf_core::drift::{beta_root, drift_evaluate, drift_roots, find_lambda_s, theta_grid};
use rcmf_core::exact::exact_summary;
use rcmf_core::glauber::{glauber_trajectory, EdgeConfig};
use rcmf_core::inference::{median, moments};
use rcmf_core::llt::{critical_instance, llt_exact_check, LltInstance};
use rcmf_core::percolation::{sample_components, tree_count_statistics};
use rcmf_core::replicas::{configure_threads, replica_rng, run_replicas};
use rcmf_core::state::{omega_default, stats_from_sizes, DEFAULT_VARTHETA};
use rcmf_core::walks::{binomial_shift_coupling, difference_coupling_bound, rw_difference_coupling, rw_max_tail, WalkSpec};
use rcmf_core::{critical_lambda, ComponentState, IntervalSpec, ModelParams, StatsReport};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::options::{or_default, required, CoupleMode, Options, Start, Strategy};
use crate::output::{Output, Table};

fn setup_threads(opts: &mut Options, replicas: usize) -> Result<(), CliError> {
    let cores = std::thread::available_parallelism().map_or(1, |c| c.get());
    let threads = or_default(&mut opts.threads, cores.min(replicas.max(1)));
    if threads == 0 {
        return Err(CliError::Usage("--threads must be positive".into()));
    }
    configure_threads(threads).map_err(CliError::Usage)
}

/// `lambda` from `--lambda` or `--p`, never both.
fn lambda_of(opts: &Options, n: usize) -> Result<f64, CliError> {
    match (opts.lambda, opts.p) {
        (Some(lambda), None) => Ok(lambda),
        (None, Some(p)) => Ok(p * n as f64),
        (Some(_), Some(_)) => Err(CliError::Usage("give either --lambda or --p, not both".into())),
        (None, None) => Err(CliError::Usage("missing required option --lambda (or --p)".into())),
    }
}

fn model_params(opts: &mut Options) -> Result<ModelParams, CliError> {
    let n = required(&opts.n, "n")?;
    if let Some(p) = opts.p {
        if !(p > 0.0 && p < 1.0) {
            return Err(rcmf_core::Error::Domain(format!("edge probability must lie in (0,1), got {p}")).into());
        }
    }
    let lambda = lambda_of(opts, n)?;
    if opts.unit_q {
        opts.q = Some(1.0);
        return Ok(ModelParams::unit_q_oracle(n, lambda)?);
    }
    let q = required(&opts.q, "q")?;
    Ok(ModelParams::new(n, q, lambda)?)
}

fn interval_setup(opts: &mut Options, n: usize) -> Result<(IntervalSpec, usize), CliError> {
    let (omega, _) = omega_default(n.max(2));
    let vartheta = or_default(&mut opts.vartheta, DEFAULT_VARTHETA);
    let g = or_default(&mut opts.g_value, omega);
    let spec = IntervalSpec::new(n, vartheta, g)?;
    let omega_used = or_default(&mut opts.omega_override, omega);
    if !(omega_used > 0.0) {
        return Err(rcmf_core::Error::Domain(format!("omega must be positive, got {omega_used}")).into());
    }
    let threshold = ((n as f64).powf(2.0 / 3.0) / omega_used).floor().max(1.0) as usize;
    Ok((spec, threshold))
}

fn start_state(start: Start, n: usize) -> Result<ComponentState, CliError> {
    Ok(match start {
        Start::Full => ComponentState::full(n)?,
        Start::Empty => ComponentState::empty(n)?,
    })
}

fn opt<T: serde::Serialize>(v: Option<T>) -> Value {
    v.map_or(Value::Null, |x| json!(x))
}

const STATS_COLUMNS: [&str; 6] = ["L2", "R1", "R2", "R_tilde", "isolated", "components"];

fn stats_cells(s: Option<&StatsReport>) -> Vec<Value> {
    match s {
        Some(s) => vec![json!(s.l2), json!(s.r1), json!(s.r2), json!(s.r_tilde), json!(s.isolated), json!(s.components)],
        None => vec![Value::Null; STATS_COLUMNS.len()],
    }
}

fn trajectory_table(records: &[TrajectoryStep]) -> Table {
    let mut columns = vec!["step", "L1"];
    columns.extend(STATS_COLUMNS);
    columns.extend(["A", "lambda_event", "drift_residual", "S_components", "S_vertices", "Q"]);
    let mut table = Table::new(&columns);
    for rec in records {
        let mut row = vec![json!(rec.step), json!(rec.l1)];
        row.extend(stats_cells(rec.stats.as_ref()));
        row.extend([
            json!(rec.active_vertices),
            json!(u8::from(rec.largest_activated)),
            opt(rec.drift_residual),
            opt(rec.sq.map(|s| s.s_components)),
            opt(rec.sq.map(|s| s.s_vertices)),
            opt(rec.sq.map(|s| s.q_value)),
        ]);
        table.push(row);
    }
    table
}

pub fn simulate(opts: &mut Options, out: &mut Output) -> Result<Value, CliError> {
    let params = model_params(opts)?;
    params.require_cm()?;
    let n = params.n();
    let seed = opts.resolve_seed()?;
    let steps = or_default(&mut opts.steps, 100);
    let replicas = or_default(&mut opts.replicas, 1);
    let start = or_default(&mut opts.start, Start::Full);
    let names = or_default(&mut opts.observers, vec!["stats".into(), "drift_residual".into()]);
    let mut config = TrajectoryConfig::new(n, Observers::parse(&names)?);
    (config.interval_spec, config.small_threshold) = interval_setup(opts, n)?;
    setup_threads(opts, replicas)?;
    let start_state = start_state(start, n)?;
    let runs = run_replicas(seed, replicas, |_, rng| run_trajectory(&start_state, &params, steps, &config, rng));
    let mut finals = Vec::with_capacity(replicas);
    for (k, run) in runs.into_iter().enumerate() {
        let (state, records) = run?;
        state.check_invariants()?;
        out.table(&format!("trajectory_{k:04}"), &trajectory_table(&records))?;
        finals.push(json!({ "replica": k, "L1": state.largest(), "R1": state.r1(), "components": state.len() }));
    }
    Ok(json!({ "final": finals }))
}

pub fn glauber(opts: &mut Options, out: &mut Output) -> Result<Value, CliError> {
    let params = model_params(opts)?;
    let n = params.n();
    let seed = opts.resolve_seed()?;
    let slots = n * n.saturating_sub(1) / 2;
    let steps = or_default(&mut opts.steps, 10 * slots);
    let every = or_default(&mut opts.sample_every, slots.max(1));
    let replicas = or_default(&mut opts.replicas, 1);
    let start = or_default(&mut opts.start, Start::Empty);
    let (spec, threshold) = interval_setup(opts, n)?;
    setup_threads(opts, replicas)?;
    let runs = run_replicas(seed, replicas, |_, rng| {
        let mut config = match start {
            Start::Full => EdgeConfig::complete(n)?,
            Start::Empty => EdgeConfig::empty(n)?,
        };
        glauber_trajectory(&mut config, &params, steps, every, &spec, threshold, rng)
    });
    let mut finals = Vec::with_capacity(replicas);
    for (k, run) in runs.into_iter().enumerate() {
        let samples = run?;
        let mut columns = vec!["step", "open_edges", "L1"];
        columns.extend(STATS_COLUMNS);
        let mut table = Table::new(&columns);
        for s in &samples {
            let mut row = vec![json!(s.step), json!(s.open_edges), json!(s.stats.l1)];
            row.extend(stats_cells(Some(&s.stats)));
            table.push(row);
        }
        out.table(&format!("glauber_{k:04}"), &table)?;
        finals.push(json!({
            "replica": k,
            "open_edges": samples.last().map(|s| s.open_edges),
            "L1": samples.last().map(|s| s.stats.l1),
        }));
    }
    Ok(json!({ "final": finals }))
}

pub fn couple(opts: &mut Options, out: &mut Output) -> Result<Value, CliError> {
    let params = model_params(opts)?;
    let n = params.n();
    let seed = opts.resolve_seed()?;
    match or_default(&mut opts.mode, CoupleMode::Time) {
        CoupleMode::Time => {
            let replicas = or_default(&mut opts.replicas, 20);
            let max_steps = or_default(&mut opts.max_steps, (50.0 * (n as f64).ln()).ceil() as usize);
            let strategy = match or_default(&mut opts.strategy, Strategy::Corrected) {
                Strategy::Plain => CouplingStrategy::Plain,
                Strategy::Corrected => CouplingStrategy::corrected_for(n),
            };
            setup_threads(opts, replicas)?;
            let report = coupling_time_experiment(&params, replicas, max_steps, seed, strategy)?;
            let mut table = Table::new(&["replica", "steps", "coalesced"]);
            for (k, t) in report.times.iter().enumerate() {
                table.push(vec![json!(k), opt(*t), json!(u8::from(t.is_some()))]);
            }
            out.table("coupling_times", &table)?;
            Ok(json!({
                "median": report.median,
                "success_fraction": report.success_fraction,
                "max_steps": max_steps,
                "strategy": report.strategy,
            }))
        }
        CoupleMode::Zdecay => {
            let mut config = ZDecayConfig::new(or_default(&mut opts.replicas, 100));
            config.steps = or_default(&mut opts.steps, config.steps);
            config.unmatched_vertices = or_default(&mut opts.unmatched, config.unmatched_vertices);
            setup_threads(opts, config.replicas)?;
            let report = z_decay_experiment(&params, &config, seed)?;
            let mut table = Table::new(&["t", "mean_z", "surviving", "in_fit"]);
            for (t, (&z, &alive)) in report.mean_z.iter().zip(&report.surviving).enumerate() {
                table.push(vec![json!(t), json!(z), json!(alive), json!(u8::from(t <= report.fit_until))]);
            }
            out.table("z_decay", &table)?;
            Ok(json!({
                "slope": report.slope,
                "expected_slope": report.expected_slope,
                "relative_error": report.relative_error(),
                "fit_until": report.fit_until,
            }))
        }
    }
}

pub fn drift(opts: &mut Options, out: &mut Output) -> Result<Value, CliError> {
    let q = required(&opts.q, "q")?;
    let lambda = required(&opts.lambda, "lambda")?;
    let grid = or_default(&mut opts.grid, 0.01);
    if !(grid > 0.0 && grid <= 0.1) {
        return Err(rcmf_core::Error::Domain(format!("grid step must lie in (0, 0.1], got {grid}")).into());
    }
    let mut table = Table::new(&["theta", "phi", "f"]);
    for theta in theta_grid(grid) {
        let e = drift_evaluate(theta, lambda, q)?;
        table.push(vec![json!(theta), opt(e.phi_value), opt(e.drift_value)]);
    }
    out.table("drift", &table)?;
    Ok(json!({
        "roots": drift_roots(lambda, q, grid)?,
        "critical_lambda": critical_lambda(q)?,
        "lambda_s": if q > 2.0 { find_lambda_s(q).ok() } else { None },
    }))
}

pub fn exact(opts: &mut Options, out: &mut Output) -> Result<Value, CliError> {
    let params = model_params(opts)?;
    let summary = exact_summary(&params)?;
    let value = json!(summary);
    out.json_value("exact.json", &value)?;
    println!("{}", serde_json::to_string_pretty(&value).expect("plain data"));
    Ok(value)
}

pub fn llt(opts: &mut Options, out: &mut Output) -> Result<Value, CliError> {
    let (instance, diagnostics) = if let Some(m) = opts.m {
        let r = or_default(&mut opts.r, 0.5);
        (LltInstance::new(vec![1; m], r)?, Value::Null)
    } else {
        let n = required(&opts.n, "n (or --m for the binomial case)")?;
        let r = or_default(&mut opts.r, 2.0 / 3.0);
        let seed = opts.resolve_seed()?;
        let mut rng = replica_rng(seed, 0);
        let (instance, diag) = critical_instance(n, r, &mut rng)?;
        (instance, json!(diag))
    };
    let report = llt_exact_check(&instance)?;
    let mut table = Table::new(&["m", "mu", "sigma", "sup_error", "argmax", "total_mass"]);
    table.push(vec![
        json!(report.m),
        json!(report.mu),
        json!(report.sigma),
        json!(report.sup_error),
        json!(report.argmax),
        json!(report.total_mass),
    ]);
    out.table("llt", &table)?;
    Ok(json!({ "report": report, "instance": diagnostics }))
}

pub fn rw(opts: &mut Options, out: &mut Output) -> Result<Value, CliError> {
    let scale = or_default(&mut opts.scale, 1);
    let m = or_default(&mut opts.m, 400);
    let d = or_default(&mut opts.d, 0);
    let r = or_default(&mut opts.r, 0.5);
    let y = or_default(&mut opts.y, d as i64);
    let trials = or_default(&mut opts.trials, 100_000);
    let seed = opts.resolve_seed()?;
    let mut rng = replica_rng(seed, 0);

    let columns = ["test", "scale", "m", "d", "r", "y", "empirical", "ci_lower", "ci_upper", "reference", "holds"];
    let mut table = Table::new(&columns);
    let coupling_spec = WalkSpec::random_steps(m, scale, 2, r, d, &mut rng)?;
    let coupling = rw_difference_coupling(&coupling_spec, trials, &mut rng)?;
    let (delta, _) = difference_coupling_bound(&coupling_spec);
    let base = |test: &str| vec![json!(test), json!(scale), json!(m), json!(d), json!(r), json!(y)];
    let mut row = base("difference_coupling");
    row.extend([
        json!(coupling.success.estimate),
        json!(coupling.success.lower),
        json!(coupling.success.upper),
        json!(coupling.bound),
        json!(u8::from(coupling.holds)),
    ]);
    table.push(row);

    let max_spec = WalkSpec::random_steps(m, scale, 4, r, d, &mut rng)?;
    let tail = rw_max_tail(&max_spec, y, trials, &mut rng)?;
    let mut row = base("reflection");
    row.extend([
        json!(tail.max_tail.estimate),
        json!(tail.max_tail.lower),
        json!(tail.max_tail.upper),
        json!(2.0 * tail.shifted_sum_tail.estimate),
        json!(u8::from(tail.holds)),
    ]);
    table.push(row);

    let shift = u64::try_from(y).map_err(|_| CliError::Usage("binomial shift needs y >= 0".into()))?;
    let binom = binomial_shift_coupling(m as u64, r, shift, trials, &mut rng)?;
    let mut row = base("binomial_shift");
    let hw = binom.success.half_width();
    row.extend([
        json!(binom.success.estimate),
        json!(binom.success.lower),
        json!(binom.success.upper),
        json!(binom.exact_success),
        json!(u8::from((binom.success.estimate - binom.exact_success).abs() <= hw)),
    ]);
    table.push(row);
    out.table("rw", &table)?;
    Ok(json!({ "delta": delta, "difference_coupling": coupling, "reflection": tail, "binomial_shift": binom }))
}

pub fn stats(opts: &mut Options, out: &mut Output) -> Result<Value, CliError> {
    let n = required(&opts.n, "n")?;
    let lambda = lambda_of(opts, n)?;
    let p = lambda / n as f64;
    if !(p > 0.0 && p < 1.0) {
        return Err(rcmf_core::Error::Domain(format!("edge probability must lie in (0,1), got {p}")).into());
    }
    let seed = opts.resolve_seed()?;
    let replicas = or_default(&mut opts.replicas, 20);
    let k_list = or_default(&mut opts.k_list, vec![1, 2, 4, 8, 16, 32, 64]);
    let (spec, threshold) = interval_setup(opts, n)?;
    setup_threads(opts, replicas)?;

    let trees = tree_count_statistics(n, p, &k_list, replicas, seed)?;
    let mut table = Table::new(&["k", "mean", "variance", "std_error", "scaled_mean"]);
    for t in &trees {
        let scaled = t.mean * (t.k as f64).powf(2.5) / n as f64;
        table.push(vec![json!(t.k), json!(t.mean), json!(t.variance), json!(t.std_error), json!(scaled)]);
    }
    out.table("tree_counts", &table)?;

    // same seed, so these are the graphs the tree counts came from
    let samples = run_replicas(seed, replicas, |_, rng| {
        sample_components(n, p, rng).map(|o| stats_from_sizes(o.sizes, &spec, threshold))
    });
    let mut columns = vec!["replica", "L1"];
    columns.extend(STATS_COLUMNS);
    let mut table = Table::new(&columns);
    let (mut isolated, mut giant) = (Vec::new(), Vec::new());
    for (k, s) in samples.into_iter().enumerate() {
        let s = s?;
        isolated.push(s.isolated as f64 / n as f64);
        giant.push(s.l1 as f64 / n as f64);
        let mut row = vec![json!(k), json!(s.l1)];
        row.extend(stats_cells(Some(&s)));
        table.push(row);
    }
    out.table("samples", &table)?;
    let mut sorted = giant.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(json!({
        "p": p,
        "mean_isolated_fraction": moments(&isolated).mean,
        "isolated_limit": (-lambda).exp(),
        "median_l1_fraction": median(&sorted),
        "beta": if lambda > 1.0 { beta_root(lambda).ok() } else { None },
    }))
}
