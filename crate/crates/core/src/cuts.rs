//! Optimality cut pool: cut construction, attribute assembly for clustering,
//! cluster aggregation, consolidation of inactive iterations and the
//! dead-band controller for the number of clusters.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::ClusterAssignment;
use crate::data::ScenarioSet;
use crate::formulation::{LinkingLayout, SubproblemResult};

/// Dual magnitude at or below which a cut row counts as inactive.
pub const INACTIVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum CutError {
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("assignment covers {found} scenarios, expected {expected}")]
    AssignmentSize { expected: usize, found: usize },
    #[error("expected {expected} cut duals, got {found}")]
    MissingDuals { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutKind {
    PerScenario,
    ClusterAggregate,
    Consolidated,
}

/// A linear under-estimator of recourse cost, stored as the row
/// `Σ weight_ω θ_ω >= intercept + coefficients · (x - anchor)`.
/// Cluster rows are divided by the cluster's probability mass, so a
/// singleton cluster yields exactly the per-scenario row.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub iteration: usize,
    pub kind: CutKind,
    /// Scenario and the weight its estimator carries in the row.
    pub members: Vec<(usize, f64)>,
    /// Probability mass of the members; multiplying the row by it gives the
    /// probability-weighted form.
    pub mass: f64,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub anchor: Vec<f64>,
}

impl Cut {
    pub fn evaluate(&self, linking: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(linking.iter().zip(&self.anchor))
                .map(|(c, (x, a))| c * (x - a))
                .sum::<f64>()
    }

    /// Right-hand side once the linking terms move to the left.
    pub fn rhs_constant(&self) -> f64 {
        self.intercept
            - self
                .coefficients
                .iter()
                .zip(&self.anchor)
                .map(|(c, a)| c * a)
                .sum::<f64>()
    }

    pub fn covers_all(&self, scenarios: usize) -> bool {
        let set: BTreeSet<usize> = self.members.iter().map(|m| m.0).collect();
        set.len() == scenarios && set.iter().all(|&s| s < scenarios)
    }

    /// Per-scenario cut `θ_ω >= Q_ω + λ_ω·(x - x̂)`.
    pub fn per_scenario(iteration: usize, result: &SubproblemResult, probability: f64, anchor: &[f64]) -> Cut {
        Cut {
            iteration,
            kind: CutKind::PerScenario,
            members: vec![(result.scenario, 1.0)],
            mass: probability,
            intercept: result.objective,
            coefficients: result.duals.clone(),
            anchor: anchor.to_vec(),
        }
    }

    /// Probability-weighted average of the scenario cuts of `members`.
    pub fn aggregate(
        iteration: usize,
        kind: CutKind,
        members: &[usize],
        results: &[SubproblemResult],
        probabilities: &[f64],
        anchor: &[f64],
    ) -> Cut {
        let mass: f64 = members.iter().map(|&s| probabilities[s]).sum();
        let mut coefficients = vec![0.0; anchor.len()];
        let mut intercept = 0.0;
        for &s in members {
            let p = probabilities[s] / mass;
            intercept += p * results[s].objective;
            for (c, d) in coefficients.iter_mut().zip(&results[s].duals) {
                *c += p * d;
            }
        }
        Cut {
            iteration,
            kind,
            members: members.iter().map(|&s| (s, probabilities[s] / mass)).collect(),
            mass,
            intercept,
            coefficients,
            anchor: anchor.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CutPool {
    cuts: Vec<Cut>,
    /// Consecutive master solves in which every cluster cut of the iteration was inactive.
    inactivity: BTreeMap<usize, usize>,
    consolidated: BTreeSet<usize>,
}

/// Counts for the trace output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolSnapshot {
    pub per_scenario: usize,
    pub cluster_aggregate: usize,
    pub consolidated: usize,
    pub consolidated_iterations: Vec<usize>,
    pub inactivity: BTreeMap<usize, usize>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn push(&mut self, cut: Cut) {
        if cut.kind == CutKind::ClusterAggregate {
            self.inactivity.entry(cut.iteration).or_insert(0);
        }
        self.cuts.push(cut);
    }

    pub fn consolidated_iterations(&self) -> &BTreeSet<usize> {
        &self.consolidated
    }

    pub fn inactivity(&self, iteration: usize) -> Option<usize> {
        self.inactivity.get(&iteration).copied()
    }

    pub fn snapshot(&self) -> PoolSnapshot {
        let count = |k: CutKind| self.cuts.iter().filter(|c| c.kind == k).count();
        PoolSnapshot {
            per_scenario: count(CutKind::PerScenario),
            cluster_aggregate: count(CutKind::ClusterAggregate),
            consolidated: count(CutKind::Consolidated),
            consolidated_iterations: self.consolidated.iter().copied().collect(),
            inactivity: self.inactivity.clone(),
        }
    }

    /// Adds one per-scenario cut for every result; returns the rows added.
    pub fn add_per_scenario(
        &mut self,
        iteration: usize,
        results: &[SubproblemResult],
        probabilities: &[f64],
        anchor: &[f64],
    ) -> usize {
        for r in results {
            self.push(Cut::per_scenario(iteration, r, probabilities[r.scenario], anchor));
        }
        results.len()
    }
}

/// Adds one aggregated cut per cluster of `assignment`; returns the rows added.
pub fn aggregate_and_add(
    pool: &mut CutPool,
    iteration: usize,
    results: &[SubproblemResult],
    anchor: &[f64],
    probabilities: &[f64],
    assignment: &ClusterAssignment,
) -> Result<usize, CutError> {
    if assignment.labels.len() != results.len() {
        return Err(CutError::AssignmentSize {
            expected: results.len(),
            found: assignment.labels.len(),
        });
    }
    let members = assignment.members();
    if let Some(c) = members.iter().position(Vec::is_empty) {
        return Err(CutError::EmptyCluster(c));
    }
    for m in &members {
        pool.push(Cut::aggregate(
            iteration,
            CutKind::ClusterAggregate,
            m,
            results,
            probabilities,
            anchor,
        ));
    }
    Ok(members.len())
}

/// Updates inactivity counters from the duals of the last master solve and
/// folds every iteration inactive for `kappa` consecutive solves into one
/// cut over all scenarios. `duals` is aligned with `pool.cuts()`.
/// Returns the number of rows removed.
pub fn track_and_consolidate(
    pool: &mut CutPool,
    duals: &[f64],
    kappa: usize,
    enabled: bool,
) -> Result<usize, CutError> {
    if !enabled {
        return Ok(0);
    }
    if duals.len() != pool.cuts.len() {
        return Err(CutError::MissingDuals {
            expected: pool.cuts.len(),
            found: duals.len(),
        });
    }
    let mut active: BTreeMap<usize, bool> = BTreeMap::new();
    for (cut, mu) in pool.cuts.iter().zip(duals) {
        if cut.kind == CutKind::ClusterAggregate {
            *active.entry(cut.iteration).or_insert(false) |= mu.abs() > INACTIVE_TOLERANCE;
        }
    }
    let mut ready = Vec::new();
    for (&k, &is_active) in &active {
        let counter = pool.inactivity.entry(k).or_insert(0);
        if is_active {
            *counter = 0;
        } else {
            *counter += 1;
            if *counter >= kappa && !pool.consolidated.contains(&k) {
                ready.push(k);
            }
        }
    }
    let mut removed = 0;
    for k in ready {
        let position = pool
            .cuts
            .iter()
            .position(|c| c.iteration == k && c.kind == CutKind::ClusterAggregate)
            .expect("iteration has cluster cuts");
        let (group, rest): (Vec<Cut>, Vec<Cut>) = std::mem::take(&mut pool.cuts)
            .into_iter()
            .partition(|c| c.iteration == k && c.kind == CutKind::ClusterAggregate);
        pool.cuts = rest;
        let mut merged = Cut {
            iteration: k,
            kind: CutKind::Consolidated,
            members: Vec::new(),
            mass: 0.0,
            intercept: 0.0,
            coefficients: vec![0.0; group[0].coefficients.len()],
            anchor: group[0].anchor.clone(),
        };
        for c in &group {
            merged.mass += c.mass;
            merged.intercept += c.mass * c.intercept;
            merged.members.extend(c.members.iter().map(|&(s, w)| (s, c.mass * w)));
            for (m, v) in merged.coefficients.iter_mut().zip(&c.coefficients) {
                *m += c.mass * v;
            }
        }
        merged.members.sort_by_key(|m| m.0);
        pool.cuts.insert(position, merged);
        pool.inactivity.remove(&k);
        pool.consolidated.insert(k);
        removed += group.len() - 1;
    }
    Ok(removed)
}

/// Scales each family of `values` to `[0, 1]` over all of its entries at once.
/// A constant family maps to 0.
fn min_max_families(rows: &mut [Vec<f64>], families: &[std::ops::Range<usize>]) {
    for range in families {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in rows.iter() {
            for &v in &row[range.clone()] {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let span = hi - lo;
        for row in rows.iter_mut() {
            for v in &mut row[range.clone()] {
                *v = if span > 0.0 { ((*v - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
            }
        }
    }
}

/// Min-max normalized fixing duals, one row per scenario.
pub fn normalize_duals(results: &[SubproblemResult], layout: &LinkingLayout) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = results.iter().map(|r| r.duals.clone()).collect();
    min_max_families(&mut rows, &layout.families());
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterAttribute {
    Duals,
    Objective,
    WindStatic,
}

/// Builds clustering feature matrices; the static wind matrix is built once.
#[derive(Debug)]
pub struct AttributeSelector {
    attribute: ClusterAttribute,
    layout: LinkingLayout,
    wind: OnceLock<Vec<Vec<f64>>>,
}

impl AttributeSelector {
    pub fn new(attribute: ClusterAttribute, layout: LinkingLayout) -> Self {
        AttributeSelector {
            attribute,
            layout,
            wind: OnceLock::new(),
        }
    }

    pub fn select(&self, results: &[SubproblemResult], scenarios: &ScenarioSet) -> Vec<Vec<f64>> {
        match self.attribute {
            ClusterAttribute::Duals => normalize_duals(results, &self.layout),
            ClusterAttribute::Objective => {
                let mut rows: Vec<Vec<f64>> = results.iter().map(|r| vec![r.objective]).collect();
                min_max_families(&mut rows, &[0..1]);
                rows
            }
            ClusterAttribute::WindStatic => self
                .wind
                .get_or_init(|| (0..scenarios.len()).map(|s| scenarios.feature_row(s)).collect())
                .clone(),
        }
    }
}

/// Dead-band controller parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeadBand {
    /// Fraction of the cost estimate taken as the target lower-bound progress.
    pub alpha: f64,
    /// Half-width of the band as a fraction of the target.
    pub zeta: f64,
    /// Clusters added or removed per adjustment.
    pub step: usize,
}

impl DeadBand {
    /// `(Δ↑, Δ↓)` around the target `alpha * cost_estimate`.
    pub fn thresholds(&self, cost_estimate: f64) -> (f64, f64) {
        let target = self.alpha * cost_estimate;
        ((1.0 - self.zeta) * target, (1.0 + self.zeta) * target)
    }

    /// Next cluster count given the lower-bound progress `delta`.
    pub fn adapt(&self, delta: f64, cost_estimate: f64, current: usize, scenarios: usize) -> usize {
        let (up, down) = self.thresholds(cost_estimate);
        let next = if delta < up {
            current.saturating_add(self.step)
        } else if delta > down {
            current.saturating_sub(self.step)
        } else {
            current
        };
        next.clamp(1, scenarios.max(1))
    }
}
