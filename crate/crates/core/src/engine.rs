//! Benders iteration driver: master solve, parallel recourse solves, bounds,
//! convergence test and cut management.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{self, ClusterAssignment, ClusteringError, ClusteringMethod};
use crate::cuts::{self, AttributeSelector, ClusterAttribute, CutError, CutPool, DeadBand, PoolSnapshot};
use crate::data::{ScenarioSet, SystemInstance};
use crate::formulation::{
    self, build_master, CutMode, FirstStageSolution, FormulationError, LinkingLayout, SubproblemResult,
};
use crate::lp::{self, LpError, SolveStatus};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("iteration {iteration}: master problem {status:?}{}", message.as_deref().map(|m| format!(" ({m})")).unwrap_or_default())]
    Master {
        iteration: usize,
        status: SolveStatus,
        message: Option<String>,
    },
    #[error("iteration {iteration}: {source}")]
    Subproblem {
        iteration: usize,
        #[source]
        source: FormulationError,
    },
    #[error("expected {expected} subproblem results, got {found}")]
    MissingResults { expected: usize, found: usize },
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Cut(#[from] CutError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("worker pool: {0}")]
    Workers(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BendersConfig {
    pub mode: CutMode,
    /// Absolute convergence threshold on the bound gap ($).
    pub epsilon: f64,
    pub mip_gap: f64,
    /// Lower bound on every recourse estimator; derived from the instance when absent.
    pub theta_min: Option<f64>,
    pub max_iterations: usize,
    pub alpha: f64,
    pub zeta: f64,
    pub rho: usize,
    pub kappa: usize,
    pub initial_clusters: usize,
    pub clustering: ClusteringMethod,
    pub attribute: ClusterAttribute,
    pub consolidate: bool,
    /// Hold the cluster count at `initial_clusters` when false.
    pub adaptive_clusters: bool,
    pub workers: usize,
}

impl Default for BendersConfig {
    fn default() -> Self {
        BendersConfig {
            mode: CutMode::Aggregated,
            epsilon: 1e-6,
            mip_gap: 1e-6,
            theta_min: None,
            max_iterations: 500,
            alpha: 0.01,
            zeta: 0.75,
            rho: 5,
            kappa: 5,
            initial_clusters: 1,
            clustering: ClusteringMethod::Hierarchical,
            attribute: ClusterAttribute::Duals,
            consolidate: false,
            adaptive_clusters: true,
            workers: 1,
        }
    }
}

impl BendersConfig {
    pub fn with_mode(mode: CutMode) -> Self {
        BendersConfig {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self, scenarios: usize) -> Result<(), EngineError> {
        let fail = |m: String| Err(EngineError::Config(m));
        if !(self.epsilon > 0.0) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.mip_gap >= 0.0) {
            return fail(format!("mip gap must be non-negative, got {}", self.mip_gap));
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return fail(format!("zeta must lie in (0, 1), got {}", self.zeta));
        }
        if self.rho < 1 || self.kappa < 1 {
            return fail("rho and kappa must be at least 1".into());
        }
        if self.initial_clusters < 1 || self.initial_clusters > scenarios {
            return fail(format!(
                "initial clusters {} outside [1, {scenarios}]",
                self.initial_clusters
            ));
        }
        if self.workers < 1 {
            return fail("workers must be at least 1".into());
        }
        if self.theta_min.is_some_and(|t| !t.is_finite()) {
            return fail("theta_min must be finite".into());
        }
        Ok(())
    }

    pub fn dead_band(&self) -> DeadBand {
        DeadBand {
            alpha: self.alpha,
            zeta: self.zeta,
            step: self.rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub master_objective: f64,
    pub lower_bound: f64,
    pub upper_bound_candidate: f64,
    pub upper_bound: f64,
    pub gap: f64,
    pub clusters: usize,
    pub master_rows: usize,
    pub master_time: f64,
    pub max_sub_time: f64,
    pub rows_added: usize,
    pub rows_removed: usize,
    pub pool: PoolSnapshot,
}

#[derive(Debug, Clone, Default)]
pub struct BendersState {
    pub iteration: usize,
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub clusters: usize,
    pub history: Vec<IterationRecord>,
    pub incumbent: Option<FirstStageSolution>,
}

impl BendersState {
    pub fn max_master_rows(&self) -> usize {
        self.history.iter().map(|h| h.master_rows).max().unwrap_or(0)
    }

    pub fn final_master_rows(&self) -> usize {
        self.history.last().map_or(0, |h| h.master_rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RunStatus {
    Converged,
    NotConverged,
    Canceled,
}

#[derive(Debug, Clone)]
pub struct ConvergedSolution {
    pub status: RunStatus,
    /// Expected cost of the incumbent (best upper bound).
    pub objective: f64,
    pub solution: Option<FirstStageSolution>,
    pub state: BendersState,
    pub pool: CutPool,
    pub wall_time: f64,
}

/// Extra controls for a run.
#[derive(Debug, Default, Clone, Copy)]
pub struct RunOptions<'a> {
    /// Commitment decisions `(g, t)` held fixed in every master solve.
    pub fixed_commitment: Option<&'a BTreeMap<(usize, usize), bool>>,
    /// Checked between iterations; a set flag stops the run as `Canceled`.
    pub cancel: Option<&'a AtomicBool>,
}

/// `(upper bound candidate, lower bound)` of one iteration.
pub fn compute_bounds(
    day_ahead_cost: f64,
    results: &[SubproblemResult],
    probabilities: &[f64],
    master_objective: f64,
) -> Result<(f64, f64), EngineError> {
    let mut seen = vec![false; probabilities.len()];
    for r in results {
        if let Some(flag) = seen.get_mut(r.scenario) {
            *flag = true;
        }
    }
    if results.len() != probabilities.len() || seen.iter().any(|s| !s) {
        return Err(EngineError::MissingResults {
            expected: probabilities.len(),
            found: seen.iter().filter(|s| **s).count(),
        });
    }
    let recourse: f64 = results.iter().map(|r| probabilities[r.scenario] * r.objective).sum();
    Ok((day_ahead_cost + recourse, master_objective))
}

/// Running minimum of upper-bound candidates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperBound(pub f64);

impl Default for UpperBound {
    fn default() -> Self {
        UpperBound(f64::INFINITY)
    }
}

impl UpperBound {
    /// Returns true when `candidate` improves the bound.
    pub fn offer(&mut self, candidate: f64) -> bool {
        if candidate < self.0 {
            self.0 = candidate;
            true
        } else {
            false
        }
    }
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool, EngineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| EngineError::Workers(e.to_string()))
}

/// Solves every scenario's recourse problem at `x`; results are in scenario order.
pub fn solve_subproblems(
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    x: &FirstStageSolution,
    workers: usize,
) -> Result<Vec<SubproblemResult>, EngineError> {
    let pool = worker_pool(workers)?;
    Ok(solve_in(&pool, instance, scenarios, x)?)
}

fn solve_in(
    pool: &rayon::ThreadPool,
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    x: &FirstStageSolution,
) -> Result<Vec<SubproblemResult>, FormulationError> {
    pool.install(|| {
        (0..scenarios.len())
            .into_par_iter()
            .map(|s| formulation::solve_subproblem(instance, scenarios, s, x))
            .collect()
    })
}

/// Relative gap for a master solve: `mip_gap`, tightened once a bound is
/// known so the absolute slack stays below ε/10. A looser master can keep
/// returning points inside the gap and stall above ε.
fn master_gap(config: &BendersConfig, lower_bound: f64) -> f64 {
    if lower_bound.is_finite() {
        config.mip_gap.min(0.1 * config.epsilon / lower_bound.abs().max(1.0))
    } else {
        config.mip_gap
    }
}

pub fn run(
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    config: &BendersConfig,
) -> Result<ConvergedSolution, EngineError> {
    run_with(instance, scenarios, config, RunOptions::default())
}

pub fn run_with(
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    config: &BendersConfig,
    options: RunOptions<'_>,
) -> Result<ConvergedSolution, EngineError> {
    let start = Instant::now();
    let n = scenarios.len();
    config.validate(n)?;
    let theta_min = config.theta_min.unwrap_or_else(|| instance.recourse_lower_bound());
    let probabilities = &scenarios.probabilities;
    let layout = LinkingLayout::of(instance);
    let selector = AttributeSelector::new(config.attribute, layout);
    let band = config.dead_band();
    let workers = worker_pool(config.workers)?;
    let empty = BTreeMap::new();
    let fixed = options.fixed_commitment.unwrap_or(&empty);

    let mut pool = CutPool::new();
    let mut state = BendersState {
        upper_bound: f64::INFINITY,
        lower_bound: f64::NEG_INFINITY,
        clusters: match config.mode {
            CutMode::SingleCut => 1,
            CutMode::MultiCut => n,
            CutMode::Aggregated => config.initial_clusters,
        },
        ..BendersState::default()
    };
    let mut upper = UpperBound::default();
    let mut status = RunStatus::NotConverged;

    for iteration in 1..=config.max_iterations {
        if options.cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            status = RunStatus::Canceled;
            break;
        }
        state.iteration = iteration;
        let master = build_master(instance, probabilities, config.mode, &pool, theta_min)?;
        let fixings = master.commitment_fixings(fixed);
        let solved = lp::solve_milp(&master.model, master_gap(config, state.lower_bound), &fixings)?;
        if !solved.is_optimal() {
            return Err(EngineError::Master {
                iteration,
                status: solved.status,
                message: solved.message,
            });
        }
        let master_rows = solved.row_count;
        let x = master.first.extract(instance, &solved.primal);
        let previous_lower = state.lower_bound;
        state.lower_bound = state.lower_bound.max(solved.objective);

        let mut rows_removed = 0;
        if config.mode == CutMode::Aggregated {
            if config.consolidate && !pool.is_empty() {
                let priced = lp::solve_lp(&master.model.fixed_integer_relaxation(&solved.primal))?;
                if !priced.is_optimal() {
                    return Err(EngineError::Master {
                        iteration,
                        status: priced.status,
                        message: Some("cut pricing with commitments fixed".into()),
                    });
                }
                let mu: Vec<f64> = master.cut_rows.iter().map(|&r| priced.dual(r)).collect();
                rows_removed = cuts::track_and_consolidate(&mut pool, &mu, config.kappa, true)?;
            }
            if config.adaptive_clusters && iteration >= 2 {
                let delta = state.lower_bound - previous_lower;
                state.clusters = band.adapt(delta, state.upper_bound, state.clusters, n);
            }
        }

        let results = solve_in(&workers, instance, scenarios, &x)
            .map_err(|source| EngineError::Subproblem { iteration, source })?;
        let max_sub_time = results.iter().map(|r| r.solve_time).fold(0.0, f64::max);
        let (candidate, _) = compute_bounds(x.day_ahead_cost, &results, probabilities, solved.objective)?;
        if upper.offer(candidate) {
            state.incumbent = Some(x.clone());
        }
        state.upper_bound = upper.0;
        let gap = state.upper_bound - state.lower_bound;
        let converged = gap.abs() <= config.epsilon;

        let mut rows_added = 0;
        if !converged {
            let anchor = x.linking();
            rows_added = match config.mode {
                CutMode::MultiCut => pool.add_per_scenario(iteration, &results, probabilities, &anchor),
                CutMode::SingleCut => cuts::aggregate_and_add(
                    &mut pool,
                    iteration,
                    &results,
                    &anchor,
                    probabilities,
                    &ClusterAssignment::single(n),
                )?,
                CutMode::Aggregated => {
                    let assignment = match state.clusters {
                        1 => ClusterAssignment::single(n),
                        k if k == n => ClusterAssignment::singletons(n),
                        k => {
                            let features = selector.select(&results, scenarios);
                            clustering::cluster(config.clustering, &features, k)?
                        }
                    };
                    cuts::aggregate_and_add(&mut pool, iteration, &results, &anchor, probabilities, &assignment)?
                }
            };
        }

        log::debug!(
            "iteration {iteration}: lb {:.6} ub {:.6} gap {gap:.3e} clusters {} rows {master_rows}",
            state.lower_bound,
            state.upper_bound,
            state.clusters
        );
        state.history.push(IterationRecord {
            iteration,
            master_objective: solved.objective,
            lower_bound: state.lower_bound,
            upper_bound_candidate: candidate,
            upper_bound: state.upper_bound,
            gap,
            clusters: state.clusters,
            master_rows,
            master_time: solved.solve_time,
            max_sub_time,
            rows_added,
            rows_removed,
            pool: pool.snapshot(),
        });
        if converged {
            status = RunStatus::Converged;
            break;
        }
    }

    Ok(ConvergedSolution {
        status,
        objective: state.upper_bound,
        solution: state.incumbent.clone(),
        state,
        pool,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
