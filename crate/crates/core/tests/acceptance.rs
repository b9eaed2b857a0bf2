//! Acceptance checks on the bundled fixtures, one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always printed.

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use suc_benders::clustering::{self, ClusterAssignment, ClusteringMethod};
use suc_benders::cuts::{self, Cut, CutPool, DeadBand};
use suc_benders::data::{self, ScenarioSet, SystemInstance};
use suc_benders::engine::{self, BendersConfig, IterationRecord, RunStatus};
use suc_benders::formulation::{self, CutMode, FirstStageSolution, LinkingLayout, SubproblemResult};
use suc_benders::lp::{self, SolveStatus};
use suc_benders::outer::{self, OuterConfig, SubsetPlan};
use suc_benders::report::{self, Method};

const EPS: f64 = 1e-6;
const EQUIVALENCE_REL: f64 = 2e-6;
const CUT_TOL: f64 = 1e-6;
const LB_SLACK: f64 = 1e-9;
const CHAIN_TOL: f64 = 1e-9;
const RANDOM_POINTS: usize = 100;
const EXPECTED_SECONDS: f64 = 60.0;

type Outcome = Result<String, String>;

struct Fixture {
    name: &'static str,
    instance: SystemInstance,
    scenarios: ScenarioSet,
    /// Extensive form solved to zero relative gap.
    oracle: f64,
}

struct Run {
    label: String,
    status: RunStatus,
    objective: f64,
    history: Vec<IterationRecord>,
    pool: Option<CutPool>,
    rows: usize,
    free_pairs: Option<usize>,
}

impl Run {
    fn iterations(&self) -> usize {
        self.history.len()
    }
}

fn fixture_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(file)
}

fn load(name: &'static str) -> Fixture {
    let instance = data::load_instance(fixture_path(&format!("{name}.json"))).expect("fixture instance");
    let scenarios = data::load_scenarios(fixture_path(&format!("{name}.csv")), &instance).expect("fixture scenarios");
    let ext = formulation::build_extensive(&instance, &scenarios);
    let res = lp::solve_milp(&ext.model, 0.0, &BTreeMap::new()).expect("extensive solve");
    assert_eq!(res.status, SolveStatus::Optimal, "extensive form of {name}");
    Fixture {
        name,
        instance,
        scenarios,
        oracle: res.objective,
    }
}

fn engine_run(f: &Fixture, label: &str, config: &BendersConfig) -> Run {
    let out = engine::run(&f.instance, &f.scenarios, config).unwrap_or_else(|e| panic!("{label} on {}: {e}", f.name));
    Run {
        label: label.to_string(),
        status: out.status,
        objective: out.objective,
        rows: out.state.final_master_rows(),
        history: out.state.history,
        pool: Some(out.pool),
        free_pairs: None,
    }
}

fn outer_run(f: &Fixture, subsets: usize, gamma: f64) -> Run {
    let label = format!("outer |E|={subsets} gamma={gamma}");
    let oc = OuterConfig {
        subsets,
        gamma,
        workers: 1,
    };
    let out = outer::run_outer(&f.instance, &f.scenarios, &BendersConfig::default(), &oc)
        .unwrap_or_else(|e| panic!("{label} on {}: {e}", f.name));
    let free = out.summary(&f.instance).free_count;
    Run {
        label,
        status: out.solution.status,
        objective: out.solution.objective,
        rows: out.solution.state.final_master_rows(),
        history: out.solution.state.history,
        pool: Some(out.solution.pool),
        free_pairs: Some(free),
    }
}

fn extensive_run(f: &Fixture) -> Run {
    let (rep, _) = report::run_method(&f.instance, &f.scenarios, Method::Extensive, &BendersConfig::default(), None)
        .expect("extensive method");
    Run {
        label: "extensive".into(),
        status: if rep.converged() { RunStatus::Converged } else { RunStatus::NotConverged },
        objective: rep.objective.unwrap_or(f64::NAN),
        history: Vec::new(),
        pool: None,
        rows: rep.master_rows,
        free_pairs: None,
    }
}

fn method_config(method: Method) -> BendersConfig {
    method.configure(&BendersConfig::default())
}

fn forced_clusters(k: usize) -> BendersConfig {
    let mut c = method_config(Method::Aggregated);
    c.adaptive_clusters = false;
    c.initial_clusters = k;
    c
}

/// The seven runs compared for method equivalence.
fn equivalence_runs(f: &Fixture) -> Vec<Run> {
    let mut runs = vec![extensive_run(f)];
    for m in [
        Method::SingleCut,
        Method::MultiCut,
        Method::Aggregated,
        Method::AggregatedConsolidation,
    ] {
        runs.push(engine_run(f, m.tag(), &method_config(m)));
    }
    runs.push(outer_run(f, 2, 1.0));
    runs.push(outer_run(f, 3, 1.0));
    runs
}

fn find<'a>(runs: &'a [Run], label: &str) -> &'a Run {
    runs.iter().find(|r| r.label == label).unwrap_or_else(|| panic!("no run {label}"))
}

fn verdict(failures: Vec<String>, detail: String) -> Outcome {
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", failures.join("; ")))
    }
}

fn check_equivalence(fixtures: &[(&Fixture, &[Run])], seconds: f64) -> Outcome {
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for (f, runs) in fixtures {
        for r in runs.iter() {
            let rel = (r.objective - f.oracle).abs() / f.oracle.abs().max(1.0);
            worst = worst.max(rel);
            if r.status != RunStatus::Converged || !(rel <= EQUIVALENCE_REL) {
                failures.push(format!(
                    "{} {}: {:?} objective {} vs oracle {} (rel {rel:.2e})",
                    f.name, r.label, r.status, r.objective, f.oracle
                ));
            }
        }
    }
    let runtime = if seconds < EXPECTED_SECONDS {
        format!("runtime {seconds:.1} s")
    } else {
        format!("runtime {seconds:.1} s, above the expected {EXPECTED_SECONDS} s")
    };
    verdict(
        failures,
        format!("7 methods x {} fixtures, max rel diff {worst:.2e} (tol {EQUIVALENCE_REL:.0e}); {runtime}", fixtures.len()),
    )
}

fn check_bounds(all: &[(&str, &Run)]) -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    for (fixture, r) in all {
        if r.history.is_empty() {
            continue;
        }
        checked += 1;
        for w in r.history.windows(2) {
            if w[1].lower_bound < w[0].lower_bound - LB_SLACK {
                failures.push(format!("{fixture} {}: lb fell at iteration {}", r.label, w[1].iteration));
            }
        }
        for h in &r.history {
            if h.upper_bound < h.lower_bound - EPS {
                failures.push(format!("{fixture} {}: ub < lb - eps at iteration {}", r.label, h.iteration));
            }
        }
        let last = r.history.last().expect("non-empty");
        if (last.upper_bound - last.lower_bound).abs() > EPS {
            failures.push(format!(
                "{fixture} {}: final gap {:.3e}",
                r.label,
                last.upper_bound - last.lower_bound
            ));
        }
    }
    verdict(failures, format!("{checked} Benders runs"))
}

/// First-stage point carrying only the linking values; the recourse problem
/// reads nothing else.
fn point_from_linking(instance: &SystemInstance, layout: &LinkingLayout, linking: &[f64]) -> FirstStageSolution {
    let t = instance.horizon;
    let g = instance.num_generators();
    let grid = |rows: usize, at: &dyn Fn(usize, usize) -> usize| -> Vec<Vec<f64>> {
        (0..rows).map(|i| (0..t).map(|k| linking[at(i, k)]).collect()).collect()
    };
    FirstStageSolution {
        commitment: vec![vec![false; t]; g],
        startup: vec![vec![false; t]; g],
        shutdown: vec![vec![false; t]; g],
        power: vec![vec![0.0; t]; g],
        reserve_up: grid(g, &|i, k| layout.reserve_up(i, k)),
        reserve_down: grid(g, &|i, k| layout.reserve_down(i, k)),
        wind: grid(instance.num_wind_farms(), &|i, k| layout.wind(i, k)),
        angle: vec![vec![0.0; t]; instance.num_nodes()],
        flow: grid(instance.num_lines(), &|i, k| layout.flow(i, k)),
        day_ahead_cost: 0.0,
    }
}

fn recourse_values(f: &Fixture, x: &FirstStageSolution) -> Vec<f64> {
    engine::solve_subproblems(&f.instance, &f.scenarios, x, 1)
        .expect("subproblems")
        .iter()
        .map(|r| r.objective)
        .collect()
}

fn weighted(cut: &Cut, q: &[f64]) -> f64 {
    cut.members.iter().map(|&(s, w)| w * q[s]).sum()
}

/// Feasible first-stage points: master solutions under random objective
/// perturbations of the linking and commitment columns.
fn random_points(f: &Fixture, count: usize, seed: u64) -> Vec<FirstStageSolution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let master = formulation::build_master(
        &f.instance,
        &f.scenarios.probabilities,
        CutMode::SingleCut,
        &CutPool::new(),
        f.instance.recourse_lower_bound(),
    )
    .expect("master");
    let commitment: Vec<_> = master.first.commitment.iter().flatten().copied().collect();
    (0..count)
        .map(|_| {
            let mut m = master.model.clone();
            for v in master.first.linking() {
                let c = m.var(v).objective;
                m.set_objective(v, c + rng.gen_range(-200.0..200.0));
            }
            for &v in &commitment {
                let c = m.var(v).objective;
                m.set_objective(v, c + rng.gen_range(-500.0..500.0));
            }
            let res = lp::solve_milp(&m, 1e-4, &BTreeMap::new()).expect("random master");
            assert_eq!(res.status, SolveStatus::Optimal);
            master.first.extract(&f.instance, &res.primal)
        })
        .collect()
}

fn check_cuts(fixtures: &[(&Fixture, &[Run])]) -> Outcome {
    let mut failures = Vec::new();
    let mut cut_count = 0;
    let mut worst_anchor = 0.0f64;
    let mut worst_violation = f64::NEG_INFINITY;
    for (f, runs) in fixtures {
        let layout = LinkingLayout::of(&f.instance);
        let pools: Vec<(&str, &CutPool)> = runs
            .iter()
            .filter(|r| !r.label.starts_with("outer"))
            .filter_map(|r| r.pool.as_ref().map(|p| (r.label.as_str(), p)))
            .collect();
        for (label, pool) in &pools {
            let mut q_at: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for cut in pool.cuts() {
                cut_count += 1;
                let q = q_at
                    .entry(cut.iteration)
                    .or_insert_with(|| recourse_values(f, &point_from_linking(&f.instance, &layout, &cut.anchor)));
                let diff = (cut.evaluate(&cut.anchor) - weighted(cut, q)).abs();
                worst_anchor = worst_anchor.max(diff);
                if diff > CUT_TOL {
                    failures.push(format!("{} {label}: cut of iteration {} off by {diff:.2e} at its anchor", f.name, cut.iteration));
                }
            }
        }
        for x in random_points(f, RANDOM_POINTS, 7) {
            let q = recourse_values(f, &x);
            let linking = x.linking();
            for (label, pool) in &pools {
                for cut in pool.cuts() {
                    let excess = cut.evaluate(&linking) - weighted(cut, &q);
                    worst_violation = worst_violation.max(excess);
                    if excess > CUT_TOL {
                        failures.push(format!("{} {label}: cut of iteration {} overestimates by {excess:.2e}", f.name, cut.iteration));
                    }
                }
            }
        }
    }
    failures.truncate(5);
    verdict(
        failures,
        format!(
            "{cut_count} cuts; max anchor error {worst_anchor:.1e}, max overestimate on {RANDOM_POINTS} random points/fixture {worst_violation:.1e} (tol {CUT_TOL:.0e})"
        ),
    )
}

fn same_sequence(a: &Run, b: &Run) -> Result<(), String> {
    let xs: Vec<f64> = a.history.iter().map(|h| h.master_objective).collect();
    let ys: Vec<f64> = b.history.iter().map(|h| h.master_objective).collect();
    if xs.len() != ys.len() {
        return Err(format!("{} has {} iterations, {} has {}", a.label, xs.len(), b.label, ys.len()));
    }
    match xs.iter().zip(&ys).position(|(x, y)| x != y) {
        Some(i) => Err(format!("{} and {} differ at iteration {}: {} vs {}", a.label, b.label, i + 1, xs[i], ys[i])),
        None => Ok(()),
    }
}

fn check_identities(fixtures: &[(&Fixture, &[Run])]) -> (Outcome, Vec<(&'static str, Run)>) {
    let mut failures = Vec::new();
    let mut extra = Vec::new();
    let mut lengths = Vec::new();
    for (f, runs) in fixtures {
        let one = engine_run(f, "aggregated k=1", &forced_clusters(1));
        let all = engine_run(f, "aggregated k=|Omega|", &forced_clusters(f.scenarios.len()));
        for (forced, reference) in [(&one, find(runs, "single-cut")), (&all, find(runs, "multi-cut"))] {
            match same_sequence(forced, reference) {
                Ok(()) => lengths.push(format!("{} {}={}", f.name, reference.label, reference.iterations())),
                Err(e) => failures.push(format!("{}: {e}", f.name)),
            }
        }
        extra.push((f.name, one));
        extra.push((f.name, all));
    }
    (verdict(failures, format!("exact master objective sequences ({})", lengths.join(", "))), extra)
}

/// Per-iteration subproblem results recovered from a multi-cut pool.
fn iterations_of(pool: &CutPool, n: usize) -> Vec<(Vec<f64>, Vec<SubproblemResult>)> {
    let mut by_iter: BTreeMap<usize, (Vec<f64>, Vec<Option<SubproblemResult>>)> = BTreeMap::new();
    for cut in pool.cuts() {
        let entry = by_iter.entry(cut.iteration).or_insert_with(|| (cut.anchor.clone(), vec![None; n]));
        let s = cut.members[0].0;
        entry.1[s] = Some(SubproblemResult {
            scenario: s,
            objective: cut.intercept,
            duals: cut.coefficients.clone(),
            solve_time: 0.0,
        });
    }
    by_iter
        .into_values()
        .map(|(anchor, rs)| (anchor, rs.into_iter().map(|r| r.expect("every scenario cut")).collect()))
        .collect()
}

fn master_value(f: &Fixture, mode: CutMode, pool: &CutPool) -> f64 {
    let m = formulation::build_master(
        &f.instance,
        &f.scenarios.probabilities,
        mode,
        pool,
        f.instance.recourse_lower_bound(),
    )
    .expect("master");
    let res = lp::solve_milp(&m.model, 0.0, &BTreeMap::new()).expect("master solve");
    assert_eq!(res.status, SolveStatus::Optimal);
    res.objective
}

fn check_chain(fixtures: &[(&Fixture, &[Run])]) -> Outcome {
    let mut failures = Vec::new();
    let mut states = 0;
    let mut strict = 0;
    for (f, runs) in fixtures {
        let n = f.scenarios.len();
        let layout = LinkingLayout::of(&f.instance);
        let iterations = iterations_of(find(runs, "multi-cut").pool.as_ref().expect("pool"), n);
        let (mut multi, mut clustered, mut single) = (CutPool::new(), CutPool::new(), CutPool::new());
        for (k, (anchor, results)) in iterations.iter().enumerate().take(6) {
            let iteration = k + 1;
            multi.add_per_scenario(iteration, results, &f.scenarios.probabilities, anchor);
            let features = cuts::normalize_duals(results, &layout);
            let assignment = clustering::hierarchical(&features, (n / 2).max(2)).expect("clusters");
            cuts::aggregate_and_add(&mut clustered, iteration, results, anchor, &f.scenarios.probabilities, &assignment)
                .expect("clustered cuts");
            cuts::aggregate_and_add(
                &mut single,
                iteration,
                results,
                anchor,
                &f.scenarios.probabilities,
                &ClusterAssignment::single(n),
            )
            .expect("single cuts");
            let vm = master_value(f, CutMode::MultiCut, &multi);
            let vc = master_value(f, CutMode::Aggregated, &clustered);
            let vs = master_value(f, CutMode::SingleCut, &single);
            states += 1;
            if vm > vs + CHAIN_TOL {
                strict += 1;
            }
            if vm < vc - CHAIN_TOL || vc < vs - CHAIN_TOL {
                failures.push(format!("{} after {iteration} iterations: multi {vm} clustered {vc} single {vs}", f.name));
            }
        }
    }
    verdict(failures, format!("{states} states, multi > single strictly at {strict}"))
}

fn check_ordering(runs: &[Run]) -> Outcome {
    let single = find(runs, "single-cut");
    let multi = find(runs, "multi-cut");
    let aggregated = find(runs, "aggregated");
    let mut failures = Vec::new();
    if single.iterations() < multi.iterations() {
        failures.push("single-cut needs fewer iterations than multi-cut".into());
    }
    if !(multi.rows >= aggregated.rows && aggregated.rows >= single.rows) {
        failures.push("master rows out of order".into());
    }
    verdict(
        failures,
        format!(
            "med-b iterations single {} >= multi {}; rows multi {} >= aggregated {} >= single {}",
            single.iterations(),
            multi.iterations(),
            multi.rows,
            aggregated.rows,
            single.rows
        ),
    )
}

fn check_consolidation(fixtures: &[(&Fixture, &[Run])]) -> (Outcome, Vec<(&'static str, Run)>) {
    let mut failures = Vec::new();
    let mut extra = Vec::new();
    let mut detail = Vec::new();
    for (f, runs) in fixtures {
        let off = find(runs, "aggregated");
        let mut with_kappa2 = method_config(Method::AggregatedConsolidation);
        with_kappa2.kappa = 2;
        let k2 = engine_run(f, "aggregated+consolidation kappa=2", &with_kappa2);
        let k5 = find(runs, "aggregated+consolidation");
        for (kappa, on) in [(2, &k2), (5, k5)] {
            if on.status != RunStatus::Converged || (on.objective - off.objective).abs() > 2.0 * EPS {
                failures.push(format!("{} kappa={kappa}: objective {} vs {}", f.name, on.objective, off.objective));
            }
            if on.rows > off.rows {
                failures.push(format!("{} kappa={kappa}: {} rows > {}", f.name, on.rows, off.rows));
            }
            detail.push(format!("{} kappa={kappa} {}<={}", f.name, on.rows, off.rows));
        }
        extra.push((f.name, k2));
    }
    (verdict(failures, format!("rows {}", detail.join(", "))), extra)
}

fn check_outer(f: &Fixture, runs: &[Run]) -> (Outcome, Run) {
    let full = find(runs, "outer |E|=2 gamma=1");
    let half = outer_run(f, 2, 0.5);
    let mut failures = Vec::new();
    for r in [full, &half] {
        if r.status != RunStatus::Converged || r.objective < f.oracle - EPS {
            failures.push(format!("{}: {:?} objective {} below oracle {}", r.label, r.status, r.objective, f.oracle));
        }
    }
    if (full.objective - f.oracle).abs() > 2.0 * EPS {
        failures.push(format!("gamma=1 objective {} != oracle {}", full.objective, f.oracle));
    }
    let free = full.free_pairs.unwrap_or(0);
    if free == 0 {
        failures.push("subset schedules agree everywhere; intersection not exercised".into());
    }
    let detail = format!(
        "med-b oracle {:.4}; gamma=1 {:.4} ({free} free (g,t)); gamma=0.5 {:.4}",
        f.oracle, full.objective, half.objective
    );
    (verdict(failures, detail), half)
}

fn partition(labels: &[usize]) -> Vec<Vec<usize>> {
    ClusterAssignment::from_labels(labels.to_vec(), None).members()
}

fn wcss(points: &[f64], labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for c in partition(labels) {
        let mean = c.iter().map(|&i| points[i]).sum::<f64>() / c.len() as f64;
        total += c.iter().map(|&i| (points[i] - mean).powi(2)).sum::<f64>();
    }
    total
}

fn check_clustering() -> Outcome {
    let mut failures = Vec::new();

    let figure = SubsetPlan::from_clusters(ClusterAssignment::from_labels(vec![0, 0, 1, 1, 2, 2], Some(vec![0, 2, 5])), 1.0)
        .expect("plan");
    if figure.subsets != vec![vec![0, 1, 2, 5], vec![2, 3, 0, 5], vec![4, 5, 0, 2]] {
        failures.push(format!("subset example gave {:?}", figure.subsets));
    }

    // Brute force over every 2-partition and every medoid pair of {0, 1, 10}.
    let line = [0.0, 1.0, 10.0];
    let points: Vec<Vec<f64>> = line.iter().map(|&v| vec![v]).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 1u32..(1 << 3) - 1 {
        let labels: Vec<usize> = (0..3).map(|i| (mask >> i & 1) as usize).collect();
        let cost = wcss(&line, &labels);
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, labels));
        }
    }
    let optimal = partition(&best.expect("partitions").1);
    let mut medoid_best: Option<(f64, (usize, usize))> = None;
    for a in 0..3 {
        for b in a + 1..3 {
            let cost: f64 = line.iter().map(|&v| (v - line[a]).abs().min((v - line[b]).abs())).sum();
            if medoid_best.is_none_or(|(c, _)| cost < c) {
                medoid_best = Some((cost, (a, b)));
            }
        }
    }
    let (_, (ma, mb)) = medoid_best.expect("medoid pairs");
    for (name, result) in [
        ("hierarchical", clustering::hierarchical(&points, 2)),
        ("kmeans", clustering::kmeans(&points, 2)),
        ("kmedoids", clustering::kmedoids(&points, 2)),
    ] {
        let a = result.expect("clustering");
        if a.members() != optimal {
            failures.push(format!("{name} on {{0,1,10}} gave {:?}", a.members()));
        }
        if name == "kmedoids" {
            let mut m = a.medoids.clone().unwrap_or_default();
            m.sort_unstable();
            if m != vec![ma, mb] {
                failures.push(format!("kmedoids medoids {m:?}, oracle {:?}", [ma, mb]));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cloud: Vec<Vec<f64>> = (0..24).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    for (name, run) in [
        ("hierarchical", &(|p: &[Vec<f64>]| clustering::cluster(ClusteringMethod::Hierarchical, p, 4)) as &dyn Fn(&[Vec<f64>]) -> _),
        ("kmeans", &|p: &[Vec<f64>]| clustering::cluster(ClusteringMethod::KMeans, p, 4)),
        ("kmedoids", &|p: &[Vec<f64>]| clustering::kmedoids(p, 4)),
    ] {
        let first = run(&cloud).expect("clustering");
        if (1..5).any(|_| run(&cloud).expect("clustering") != first) {
            failures.push(format!("{name} not deterministic over 5 runs"));
        }
    }
    verdict(failures, "subset example, {0,1,10} oracles for 3 algorithms, 5-run determinism".into())
}

fn check_dead_band() -> Outcome {
    let mut failures = Vec::new();
    let band = DeadBand {
        alpha: 1.0,
        zeta: 0.75,
        step: 5,
    };
    let mut expect = |what: &str, got: String, want: String| {
        if got != want {
            failures.push(format!("{what}: {got}, expected {want}"));
        }
    };
    expect("thresholds P=100", format!("{:?}", band.thresholds(100.0)), format!("{:?}", (25.0, 175.0)));
    expect("delta=10, count 5", band.adapt(10.0, 100.0, 5, 100).to_string(), "10".into());
    expect("delta=200, count 5", band.adapt(200.0, 100.0, 5, 100).to_string(), "1".into());
    expect("delta=100, count 5", band.adapt(100.0, 100.0, 5, 100).to_string(), "5".into());
    expect("clamp at |Omega|", band.adapt(10.0, 100.0, 8, 10).to_string(), "10".into());
    expect("clamp at 1", band.adapt(500.0, 100.0, 3, 10).to_string(), "1".into());
    let defaults = BendersConfig::default().dead_band();
    let (up, down) = defaults.thresholds(10_000.0);
    expect(
        "default alpha=1%, estimate 10000",
        format!("{up:.9} {down:.9}"),
        format!("{:.9} {:.9}", 25.0, 175.0),
    );
    verdict(failures, "threshold arithmetic, dead band and clamping".into())
}

fn check_normalization() -> Outcome {
    let toy = load("toy-a");
    let layout = LinkingLayout::of(&toy.instance);
    let families = layout.families();
    let dim = layout.dimension();
    let strategy = (1usize..7).prop_flat_map(move |n| {
        (
            prop::collection::vec(prop::collection::vec(-1e3f64..1e3, dim), n),
            prop::collection::vec(any::<bool>(), 4),
            -50.0f64..50.0,
        )
    });
    let mut runner = TestRunner::new(ProptestConfig {
        cases: 256,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    let outcome = runner.run(&strategy, |(mut rows, constant, level)| {
        for (family, flat) in families.iter().zip(&constant) {
            if *flat {
                for row in rows.iter_mut() {
                    for v in &mut row[family.clone()] {
                        *v = level;
                    }
                }
            }
        }
        let results: Vec<SubproblemResult> = rows
            .iter()
            .enumerate()
            .map(|(s, d)| SubproblemResult {
                scenario: s,
                objective: 0.0,
                duals: d.clone(),
                solve_time: 0.0,
            })
            .collect();
        let out = cuts::normalize_duals(&results, &layout);
        for family in &families {
            let values: Vec<f64> = rows.iter().flat_map(|r| r[family.clone()].iter().copied()).collect();
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut saw_zero = false;
            let mut saw_one = false;
            for (row, raw) in out.iter().zip(&rows) {
                for i in family.clone() {
                    let v = row[i];
                    prop_assert!((0.0..=1.0).contains(&v), "value {v} outside [0, 1]");
                    if hi > lo {
                        prop_assert!((v - (raw[i] - lo) / (hi - lo)).abs() <= 1e-12);
                        if raw[i] == lo {
                            prop_assert_eq!(v, 0.0);
                        }
                        if raw[i] == hi {
                            prop_assert_eq!(v, 1.0);
                        }
                    } else {
                        prop_assert_eq!(v, 0.0);
                    }
                    saw_zero |= v == 0.0;
                    saw_one |= v == 1.0;
                }
            }
            if hi > lo && !(saw_zero && saw_one) {
                return Err(TestCaseError::fail("extremes not mapped to 0 and 1"));
            }
        }
        Ok(())
    });
    match outcome {
        Ok(()) => Ok("256 random dual tensors: range, exact extremes, constant families".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    let mut passed = 0;
    let mut total = 0;
    let mut report = |id: u32, title: &str, outcome: Outcome| {
        total += 1;
        let line = match &outcome {
            Ok(detail) => {
                passed += 1;
                format!("PASS  [{id:>2}] {title}: {detail}")
            }
            Err(detail) => format!("FAIL  [{id:>2}] {title}: {detail}"),
        };
        println!("{line}");
        std::io::stdout().flush().ok();
    };

    let start = Instant::now();
    let toy = load("toy-a");
    let med = load("med-b");
    let toy_runs = equivalence_runs(&toy);
    let med_runs = equivalence_runs(&med);
    let seconds = start.elapsed().as_secs_f64();
    let both: [(&Fixture, &[Run]); 2] = [(&toy, &toy_runs), (&med, &med_runs)];

    report(1, "Method equivalence", guarded(|| check_equivalence(&both, seconds)));

    let (identities, forced) = check_identities(&both);
    let (consolidation, kappa2) = check_consolidation(&both);
    let (outer_outcome, half) = check_outer(&med, &med_runs);

    let mut all: Vec<(&str, &Run)> = Vec::new();
    all.extend(toy_runs.iter().map(|r| ("toy-a", r)));
    all.extend(med_runs.iter().map(|r| ("med-b", r)));
    all.extend(forced.iter().chain(&kappa2).map(|(n, r)| (*n, r)));
    all.push(("med-b", &half));
    report(2, "Bound behavior", guarded(|| check_bounds(&all)));
    report(3, "Cut tightness and validity", guarded(|| check_cuts(&both)));
    report(4, "Aggregation identities", identities);
    report(5, "Relaxation chain", guarded(|| check_chain(&both)));
    report(6, "Iteration and row ordering", guarded(|| check_ordering(&med_runs)));
    report(7, "Consolidation", consolidation);
    report(8, "Outer parallelization restriction bound", outer_outcome);
    report(9, "Clustering unit suite", guarded(check_clustering));
    report(10, "Adaptive controller unit suite", guarded(check_dead_band));
    report(11, "Normalization", guarded(check_normalization));

    println!(
        "acceptance: {passed}/{total} criteria passed in {:.1} s",
        start.elapsed().as_secs_f64()
    );
    if passed != total {
        std::process::exit(1);
    }
}
