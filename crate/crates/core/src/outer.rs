//! Two-pass solve over scenario subsets: cluster scenarios with k-medoids,
//! solve each subset (own cluster plus the other clusters' medoids) in
//! parallel, fix the commitments every finished subset agrees on, then run
//! the full problem with those fixings.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::clustering::{self, ClusterAssignment, ClusteringError};
use crate::data::{ScenarioSet, SystemInstance};
use crate::engine::{self, BendersConfig, ConvergedSolution, EngineError, RunOptions, RunStatus};
use crate::lp::SolveStatus;

#[derive(Debug, Error)]
pub enum OuterError {
    #[error("subset count {subsets} outside [2, {scenarios}]")]
    SubsetCount { subsets: usize, scenarios: usize },
    #[error("gamma {0} outside (0, 1]")]
    Gamma(f64),
    #[error("subset plan needs medoids for every cluster")]
    MissingMedoids,
    #[error("no subset solve completed")]
    NoneCompleted,
    #[error("second pass infeasible with fixed commitments: {fixed}")]
    FixedInfeasible { fixed: String },
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetPlan {
    pub clusters: ClusterAssignment,
    /// Scenario indices of each subset: own cluster ascending, then the other
    /// clusters' medoids in cluster order.
    pub subsets: Vec<Vec<usize>>,
    pub gamma: f64,
}

impl SubsetPlan {
    pub fn from_clusters(clusters: ClusterAssignment, gamma: f64) -> Result<Self, OuterError> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(OuterError::Gamma(gamma));
        }
        let medoids = clusters.medoids.clone().ok_or(OuterError::MissingMedoids)?;
        if medoids.len() != clusters.k {
            return Err(OuterError::MissingMedoids);
        }
        let subsets = clusters
            .members()
            .into_iter()
            .enumerate()
            .map(|(e, mut own)| {
                own.extend(medoids.iter().enumerate().filter(|&(f, _)| f != e).map(|(_, &m)| m));
                own
            })
            .collect();
        Ok(SubsetPlan {
            clusters,
            subsets,
            gamma,
        })
    }

    /// Number of subset solves that must finish before the rest are canceled.
    pub fn required_completions(&self) -> usize {
        let n = self.subsets.len();
        ((self.gamma * n as f64 - 1e-12).ceil() as usize).clamp(1, n)
    }

    /// Scenario set of subset `e` with probabilities renormalized to one.
    pub fn scenario_set(&self, scenarios: &ScenarioSet, e: usize) -> ScenarioSet {
        scenarios.subset(&self.subsets[e])
    }
}

/// Clusters scenarios on their wind trajectories and builds one subset per cluster.
pub fn form_subsets(scenarios: &ScenarioSet, subsets: usize, gamma: f64) -> Result<SubsetPlan, OuterError> {
    let n = scenarios.len();
    if subsets < 2 || subsets > n {
        return Err(OuterError::SubsetCount { subsets, scenarios: n });
    }
    let features: Vec<Vec<f64>> = (0..n).map(|s| scenarios.feature_row(s)).collect();
    let clusters = clustering::kmedoids(&features, subsets)?;
    SubsetPlan::from_clusters(clusters, gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OutcomeStatus {
    Completed,
    Canceled,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsetOutcome {
    pub subset: usize,
    pub status: OutcomeStatus,
    /// Commitment `[generator][period]`, present when completed.
    pub commitment: Option<Vec<Vec<bool>>>,
    pub objective: Option<f64>,
    pub tau_s: f64,
    pub iterations: usize,
    pub max_rows: usize,
    /// Why a subset that was not canceled by the cutoff did not complete.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SubsetOutcome {
    fn canceled(subset: usize) -> Self {
        SubsetOutcome {
            subset,
            status: OutcomeStatus::Canceled,
            commitment: None,
            objective: None,
            tau_s: 0.0,
            iterations: 0,
            max_rows: 0,
            note: None,
        }
    }
}

/// Solves every subset with up to `workers` concurrent engines. Once the
/// required number of solves has completed, the others stop at their next
/// iteration boundary and are reported as canceled.
pub fn solve_subsets(
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    plan: &SubsetPlan,
    config: &BendersConfig,
    workers: usize,
) -> Result<Vec<SubsetOutcome>, OuterError> {
    let count = plan.subsets.len();
    let required = plan.required_completions();
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let completed = Mutex::new(0usize);
    let outcomes: Mutex<Vec<SubsetOutcome>> = Mutex::new((0..count).map(SubsetOutcome::canceled).collect());

    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, count) {
            scope.spawn(|| loop {
                let e = next.fetch_add(1, Ordering::SeqCst);
                if e >= count || stop.load(Ordering::SeqCst) {
                    break;
                }
                let subset = plan.scenario_set(scenarios, e);
                let start = Instant::now();
                let options = RunOptions {
                    cancel: Some(&stop),
                    ..RunOptions::default()
                };
                let run = engine::run_with(instance, &subset, config, options);
                let tau_s = start.elapsed().as_secs_f64();
                let mut outcome = SubsetOutcome::canceled(e);
                outcome.tau_s = tau_s;
                match run {
                    Ok(out) if out.status == RunStatus::Converged => {
                        let mut done = completed.lock().expect("completion counter");
                        outcome.iterations = out.state.history.len();
                        outcome.max_rows = out.state.max_master_rows();
                        if *done < required {
                            *done += 1;
                            if *done == required {
                                stop.store(true, Ordering::SeqCst);
                            }
                            outcome.status = OutcomeStatus::Completed;
                            outcome.objective = Some(out.objective);
                            outcome.commitment = out.solution.map(|x| x.commitment);
                        }
                    }
                    Ok(out) => {
                        outcome.iterations = out.state.history.len();
                        outcome.max_rows = out.state.max_master_rows();
                        if out.status == RunStatus::NotConverged {
                            outcome.note = Some("iteration limit reached".into());
                        }
                    }
                    Err(err) => {
                        log::warn!("subset {e} failed: {err}");
                        outcome.note = Some(err.to_string());
                    }
                }
                outcomes.lock().expect("outcome table")[e] = outcome;
            });
        }
    });

    let outcomes = outcomes.into_inner().expect("outcome table");
    if outcomes.iter().all(|o| o.status != OutcomeStatus::Completed) {
        return Err(OuterError::NoneCompleted);
    }
    Ok(outcomes)
}

/// Commitments `(g, t)` on which every completed outcome agrees.
pub fn intersect_commitments(outcomes: &[SubsetOutcome]) -> Result<BTreeMap<(usize, usize), bool>, OuterError> {
    let mut schedules = outcomes
        .iter()
        .filter(|o| o.status == OutcomeStatus::Completed)
        .filter_map(|o| o.commitment.as_ref());
    let first = schedules.next().ok_or(OuterError::NoneCompleted)?;
    let mut fixed: BTreeMap<(usize, usize), bool> = first
        .iter()
        .enumerate()
        .flat_map(|(g, row)| row.iter().enumerate().map(move |(t, &on)| ((g, t), on)))
        .collect();
    for schedule in schedules {
        fixed.retain(|&(g, t), on| schedule[g][t] == *on);
    }
    Ok(fixed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterConfig {
    pub subsets: usize,
    pub gamma: f64,
    /// Concurrent subset solves.
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct OuterSolution {
    pub solution: ConvergedSolution,
    pub plan: SubsetPlan,
    pub outcomes: Vec<SubsetOutcome>,
    pub fixed: BTreeMap<(usize, usize), bool>,
    /// Longest completed subset solve (s).
    pub t1: f64,
    /// Second-pass wall time (s).
    pub t2: f64,
    /// Largest master row count over every solve of both passes.
    pub max_rows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OuterSummary {
    pub subsets: Vec<SubsetOutcome>,
    #[serde(rename = "T1")]
    pub t1: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
    pub fixed_count: usize,
    pub free_count: usize,
}

impl OuterSolution {
    pub fn total_time(&self) -> f64 {
        self.t1 + self.t2
    }

    pub fn summary(&self, instance: &SystemInstance) -> OuterSummary {
        let total = instance.num_generators() * instance.horizon;
        OuterSummary {
            subsets: self.outcomes.clone(),
            t1: self.t1,
            t2: self.t2,
            fixed_count: self.fixed.len(),
            free_count: total - self.fixed.len(),
        }
    }
}

pub fn run_outer(
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    config: &BendersConfig,
    outer: &OuterConfig,
) -> Result<OuterSolution, OuterError> {
    let plan = form_subsets(scenarios, outer.subsets, outer.gamma)?;
    let outcomes = solve_subsets(instance, scenarios, &plan, config, outer.workers)?;
    let fixed = intersect_commitments(&outcomes)?;
    let t1 = outcomes
        .iter()
        .filter(|o| o.status == OutcomeStatus::Completed)
        .map(|o| o.tau_s)
        .fold(0.0, f64::max);

    let start = Instant::now();
    let options = RunOptions {
        fixed_commitment: Some(&fixed),
        ..RunOptions::default()
    };
    let solution = match engine::run_with(instance, scenarios, config, options) {
        Ok(s) => s,
        Err(EngineError::Master {
            status: SolveStatus::Infeasible,
            message,
            ..
        }) => {
            return Err(OuterError::FixedInfeasible {
                fixed: message.unwrap_or_else(|| format!("{fixed:?}")),
            })
        }
        Err(e) => return Err(e.into()),
    };
    let t2 = start.elapsed().as_secs_f64();
    let max_rows = outcomes
        .iter()
        .map(|o| o.max_rows)
        .chain([solution.state.max_master_rows()])
        .max()
        .unwrap_or(0);
    Ok(OuterSolution {
        solution,
        plan,
        outcomes,
        fixed,
        t1,
        t2,
        max_rows,
    })
}
