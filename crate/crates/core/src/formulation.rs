//! Model builders for the stochastic unit commitment problem: the extensive
//! form, the Benders master in its three cut modes, and the per-scenario
//! recourse subproblem with fixing rows.
//!
//! Periods are 0-based. The state before the first period is the initial
//! commitment `u0` with output `u0 * p_min` and no reserves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cuts::{Cut, CutKind, CutPool};
use crate::data::{ScenarioSet, SystemInstance};
use crate::lp::{self, LpError, ModelHandle, RowId, RowSense, SolveStatus, VarId};

const INF: f64 = f64::INFINITY;

/// Feasibility tolerance used for solution checks.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("{mode:?} master cannot hold cut from iteration {iteration} ({kind:?} over {members} scenarios)")]
    ModeMismatch {
        mode: CutMode,
        kind: CutKind,
        iteration: usize,
        members: usize,
    },
    #[error("cut dimension {found} does not match linking dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("subproblem for scenario {scenario} ended with status {status:?}; recourse should be complete")]
    SubproblemNotOptimal { scenario: usize, status: SolveStatus },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// How recourse information enters the master problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutMode {
    SingleCut,
    MultiCut,
    Aggregated,
}

/// Offsets of the four first-stage blocks that link the stages:
/// upward reserve, downward reserve, day-ahead wind and day-ahead flow,
/// each stored unit-major then period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkingLayout {
    pub generators: usize,
    pub wind_farms: usize,
    pub lines: usize,
    pub horizon: usize,
}

impl LinkingLayout {
    pub fn of(instance: &SystemInstance) -> Self {
        LinkingLayout {
            generators: instance.num_generators(),
            wind_farms: instance.num_wind_farms(),
            lines: instance.num_lines(),
            horizon: instance.horizon,
        }
    }

    pub fn dimension(&self) -> usize {
        self.horizon * (2 * self.generators + self.wind_farms + self.lines)
    }

    pub fn reserve_up(&self, g: usize, t: usize) -> usize {
        g * self.horizon + t
    }

    pub fn reserve_down(&self, g: usize, t: usize) -> usize {
        (self.generators + g) * self.horizon + t
    }

    pub fn wind(&self, j: usize, t: usize) -> usize {
        (2 * self.generators + j) * self.horizon + t
    }

    pub fn flow(&self, l: usize, t: usize) -> usize {
        (2 * self.generators + self.wind_farms + l) * self.horizon + t
    }

    /// Index ranges of the dual families `λ+`, `λ-`, `λW`, `λF`.
    pub fn families(&self) -> [std::ops::Range<usize>; 4] {
        let gt = self.generators * self.horizon;
        let jt = self.wind_farms * self.horizon;
        let lt = self.lines * self.horizon;
        [0..gt, gt..2 * gt, 2 * gt..2 * gt + jt, 2 * gt + jt..2 * gt + jt + lt]
    }
}

/// Day-ahead decisions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstStageSolution {
    pub commitment: Vec<Vec<bool>>,
    pub startup: Vec<Vec<bool>>,
    pub shutdown: Vec<Vec<bool>>,
    pub power: Vec<Vec<f64>>,
    pub reserve_up: Vec<Vec<f64>>,
    pub reserve_down: Vec<Vec<f64>>,
    pub wind: Vec<Vec<f64>>,
    pub angle: Vec<Vec<f64>>,
    pub flow: Vec<Vec<f64>>,
    pub day_ahead_cost: f64,
}

impl FirstStageSolution {
    /// The values the recourse problem depends on, in `LinkingLayout` order.
    pub fn linking(&self) -> Vec<f64> {
        self.reserve_up
            .iter()
            .chain(&self.reserve_down)
            .chain(&self.wind)
            .chain(&self.flow)
            .flatten()
            .copied()
            .collect()
    }
}

/// Recourse decisions for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondStageSolution {
    pub deploy_up: Vec<Vec<f64>>,
    pub deploy_down: Vec<Vec<f64>>,
    pub spill: Vec<Vec<f64>>,
    pub shed: Vec<Vec<f64>>,
    pub flow: Vec<Vec<f64>>,
    pub angle: Vec<Vec<f64>>,
    pub recourse_cost: f64,
}

/// Value and fixing-row duals of one scenario subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemResult {
    pub scenario: usize,
    pub objective: f64,
    /// Duals in `LinkingLayout` order: `λ+`, `λ-`, `λW`, `λF`.
    pub duals: Vec<f64>,
    pub solve_time: f64,
}

type Grid = Vec<Vec<VarId>>;

/// Column handles of the first-stage variables inside a model.
#[derive(Debug, Clone)]
pub struct FirstStageVars {
    pub commitment: Grid,
    pub startup: Grid,
    pub shutdown: Grid,
    pub power: Grid,
    pub reserve_up: Grid,
    pub reserve_down: Grid,
    pub wind: Grid,
    pub angle: Grid,
    pub flow: Grid,
}

fn grid_values(grid: &Grid, primal: &[f64]) -> Vec<Vec<f64>> {
    grid.iter()
        .map(|row| row.iter().map(|v| primal[v.0]).collect())
        .collect()
}

fn grid_flags(grid: &Grid, primal: &[f64]) -> Vec<Vec<bool>> {
    grid.iter()
        .map(|row| row.iter().map(|v| primal[v.0] > 0.5).collect())
        .collect()
}

impl FirstStageVars {
    pub fn extract(&self, instance: &SystemInstance, primal: &[f64]) -> FirstStageSolution {
        let mut sol = FirstStageSolution {
            commitment: grid_flags(&self.commitment, primal),
            startup: grid_flags(&self.startup, primal),
            shutdown: grid_flags(&self.shutdown, primal),
            power: grid_values(&self.power, primal),
            reserve_up: grid_values(&self.reserve_up, primal),
            reserve_down: grid_values(&self.reserve_down, primal),
            wind: grid_values(&self.wind, primal),
            angle: grid_values(&self.angle, primal),
            flow: grid_values(&self.flow, primal),
            day_ahead_cost: 0.0,
        };
        sol.day_ahead_cost = day_ahead_cost(instance, &sol);
        sol
    }

    /// Linking columns in `LinkingLayout` order.
    pub fn linking(&self) -> Vec<VarId> {
        self.reserve_up
            .iter()
            .chain(&self.reserve_down)
            .chain(&self.wind)
            .chain(&self.flow)
            .flatten()
            .copied()
            .collect()
    }
}

pub fn day_ahead_cost(instance: &SystemInstance, x: &FirstStageSolution) -> f64 {
    let mut cost = 0.0;
    for (g, gen) in instance.generators.iter().enumerate() {
        for t in 0..instance.horizon {
            cost += gen.energy_cost * x.power[g][t]
                + if x.startup[g][t] { gen.startup_cost } else { 0.0 }
                + gen.reserve_up_cost * x.reserve_up[g][t]
                + gen.reserve_down_cost * x.reserve_down[g][t];
        }
    }
    cost
}

/// Rows added per instance by the first-stage constraint families.
pub fn first_stage_row_count(instance: &SystemInstance) -> usize {
    let t = instance.horizon;
    let per_unit: usize = instance
        .generators
        .iter()
        .map(|g| {
            let fixed = g.enforced_initial_periods().min(t);
            fixed + 2 * (t - fixed)
        })
        .sum();
    per_unit
        + 8 * instance.num_generators() * t
        + instance.num_wind_farms() * t
        + instance.num_nodes() * t
        + 2 * instance.num_lines() * t
}

/// Rows added per scenario by the recourse constraint families.
pub fn second_stage_row_count(instance: &SystemInstance) -> usize {
    instance.horizon
        * (2 * instance.num_nodes()
            + 2 * instance.num_generators()
            + instance.num_wind_farms()
            + 2 * instance.num_lines())
}

fn grid(model: &mut ModelHandle, rows: usize, horizon: usize, mut make: impl FnMut(&mut ModelHandle, usize, usize) -> VarId) -> Grid {
    (0..rows)
        .map(|i| (0..horizon).map(|t| make(model, i, t)).collect())
        .collect()
}

fn add_first_stage(model: &mut ModelHandle, instance: &SystemInstance) -> FirstStageVars {
    let horizon = instance.horizon;
    let gens = &instance.generators;
    let ng = gens.len();
    let commitment = grid(model, ng, horizon, |m, g, t| m.add_binary(format!("u[{g},{t}]"), 0.0));
    let startup = grid(model, ng, horizon, |m, g, t| {
        m.add_binary(format!("y[{g},{t}]"), gens[g].startup_cost)
    });
    let shutdown = grid(model, ng, horizon, |m, g, t| m.add_binary(format!("z[{g},{t}]"), 0.0));
    let power = grid(model, ng, horizon, |m, g, t| {
        m.add_var(format!("p[{g},{t}]"), 0.0, INF, gens[g].energy_cost)
    });
    let reserve_up = grid(model, ng, horizon, |m, g, t| {
        m.add_var(format!("rup[{g},{t}]"), 0.0, INF, gens[g].reserve_up_cost)
    });
    let reserve_down = grid(model, ng, horizon, |m, g, t| {
        m.add_var(format!("rdn[{g},{t}]"), 0.0, INF, gens[g].reserve_down_cost)
    });
    let wind = grid(model, instance.num_wind_farms(), horizon, |m, j, t| {
        m.add_var(format!("w[{j},{t}]"), 0.0, INF, 0.0)
    });
    let angle = grid(model, instance.num_nodes(), horizon, |m, n, t| {
        if n == instance.reference_node {
            m.add_var(format!("delta[{n},{t}]"), 0.0, 0.0, 0.0)
        } else {
            m.add_var(format!("delta[{n},{t}]"), -INF, INF, 0.0)
        }
    });
    let flow = grid(model, instance.num_lines(), horizon, |m, l, t| {
        m.add_var(format!("f[{l},{t}]"), -INF, INF, 0.0)
    });
    let v = FirstStageVars {
        commitment,
        startup,
        shutdown,
        power,
        reserve_up,
        reserve_down,
        wind,
        angle,
        flow,
    };

    let (u, y, z) = (&v.commitment, &v.startup, &v.shutdown);
    let (p, rup, rdn) = (&v.power, &v.reserve_up, &v.reserve_down);

    for (g, gen) in gens.iter().enumerate() {
        let u0 = if gen.initially_on { 1.0 } else { 0.0 };
        let held = gen.enforced_initial_periods().min(horizon);
        for t in 0..held {
            model.add_row(format!("init_status[{g},{t}]"), vec![(u[g][t], 1.0)], RowSense::Eq(u0));
        }
        for t in held..horizon {
            let first = (t + 1).saturating_sub(gen.min_up);
            let mut row: Vec<_> = (first..=t).map(|k| (y[g][k], 1.0)).collect();
            row.push((u[g][t], -1.0));
            model.add_row(format!("min_up[{g},{t}]"), row, RowSense::Le(0.0));
        }
        for t in held..horizon {
            let first = (t + 1).saturating_sub(gen.min_down);
            let mut row: Vec<_> = (first..=t).map(|k| (z[g][k], 1.0)).collect();
            row.push((u[g][t], 1.0));
            model.add_row(format!("min_down[{g},{t}]"), row, RowSense::Le(1.0));
        }
        for t in 0..horizon {
            let mut row = vec![(y[g][t], 1.0), (z[g][t], -1.0), (u[g][t], -1.0)];
            let rhs = if t == 0 {
                -u0
            } else {
                row.push((u[g][t - 1], 1.0));
                0.0
            };
            model.add_row(format!("transition[{g},{t}]"), row, RowSense::Eq(rhs));
        }
        for t in 0..horizon {
            model.add_row(
                format!("one_switch[{g},{t}]"),
                vec![(y[g][t], 1.0), (z[g][t], 1.0)],
                RowSense::Le(1.0),
            );
        }
        let p0 = gen.initial_output();
        for t in 0..horizon {
            let mut row = vec![(p[g][t], 1.0), (rup[g][t], 1.0), (y[g][t], -gen.ramp_up)];
            let rhs = if t == 0 {
                p0 + gen.ramp_up * u0
            } else {
                row.extend([
                    (p[g][t - 1], -1.0),
                    (rup[g][t - 1], -1.0),
                    (u[g][t - 1], -gen.ramp_up),
                ]);
                0.0
            };
            model.add_row(format!("ramp_up[{g},{t}]"), nonzero(row), RowSense::Le(rhs));
        }
        for t in 0..horizon {
            let mut row = vec![
                (p[g][t], -1.0),
                (rdn[g][t], 1.0),
                (u[g][t], -gen.ramp_down),
                (z[g][t], -gen.ramp_down),
            ];
            let rhs = if t == 0 {
                -p0
            } else {
                row.extend([(p[g][t - 1], 1.0), (rdn[g][t - 1], -1.0)]);
                0.0
            };
            model.add_row(format!("ramp_down[{g},{t}]"), nonzero(row), RowSense::Le(rhs));
        }
        for t in 0..horizon {
            model.add_row(
                format!("p_min[{g},{t}]"),
                nonzero(vec![(p[g][t], 1.0), (rdn[g][t], -1.0), (u[g][t], -gen.p_min)]),
                RowSense::Ge(0.0),
            );
        }
        for t in 0..horizon {
            let mut row = vec![(p[g][t], 1.0), (rup[g][t], 1.0), (u[g][t], -gen.p_max)];
            if t + 1 < horizon {
                row.push((z[g][t + 1], gen.p_max - gen.ramp_down));
            }
            model.add_row(format!("p_max[{g},{t}]"), nonzero(row), RowSense::Le(0.0));
        }
        for t in 0..horizon {
            model.add_row(
                format!("reserve_up_cap[{g},{t}]"),
                vec![(rup[g][t], 1.0)],
                RowSense::Le(gen.reserve_up_max),
            );
        }
        for t in 0..horizon {
            model.add_row(
                format!("reserve_down_cap[{g},{t}]"),
                vec![(rdn[g][t], 1.0)],
                RowSense::Le(gen.reserve_down_max),
            );
        }
    }
    for (j, farm) in instance.wind_farms.iter().enumerate() {
        for t in 0..horizon {
            model.add_row(
                format!("wind_cap[{j},{t}]"),
                vec![(v.wind[j][t], 1.0)],
                RowSense::Le(farm.capacity),
            );
        }
    }
    for n in 0..instance.num_nodes() {
        for t in 0..horizon {
            let mut row: Vec<_> = instance.generators_at(n).map(|g| (p[g][t], 1.0)).collect();
            row.extend(instance.wind_farms_at(n).map(|j| (v.wind[j][t], 1.0)));
            row.extend(instance.lines_into(n).map(|l| (v.flow[l][t], 1.0)));
            row.extend(instance.lines_out_of(n).map(|l| (v.flow[l][t], -1.0)));
            model.add_row(format!("balance[{n},{t}]"), row, RowSense::Eq(instance.load[n][t]));
        }
    }
    add_network(model, instance, &v.flow, &v.angle, "da");
    v
}

fn nonzero(row: Vec<(VarId, f64)>) -> Vec<(VarId, f64)> {
    row.into_iter().filter(|(_, a)| *a != 0.0).collect()
}

fn add_network(model: &mut ModelHandle, instance: &SystemInstance, flow: &Grid, angle: &Grid, tag: &str) {
    for (l, line) in instance.lines.iter().enumerate() {
        for t in 0..instance.horizon {
            model.add_row(
                format!("{tag}_flow_cap[{l},{t}]"),
                vec![(flow[l][t], 1.0)],
                RowSense::Range(-line.capacity, line.capacity),
            );
        }
    }
    for (l, line) in instance.lines.iter().enumerate() {
        for t in 0..instance.horizon {
            model.add_row(
                format!("{tag}_flow_def[{l},{t}]"),
                vec![
                    (flow[l][t], 1.0),
                    (angle[line.from][t], -line.susceptance),
                    (angle[line.to][t], line.susceptance),
                ],
                RowSense::Eq(0.0),
            );
        }
    }
}

/// Column handles of one scenario's recourse variables.
#[derive(Debug, Clone)]
pub struct SecondStageVars {
    pub deploy_up: Grid,
    pub deploy_down: Grid,
    pub spill: Grid,
    pub shed: Grid,
    pub flow: Grid,
    pub angle: Grid,
}

impl SecondStageVars {
    pub fn extract(&self, instance: &SystemInstance, primal: &[f64]) -> SecondStageSolution {
        let mut sol = SecondStageSolution {
            deploy_up: grid_values(&self.deploy_up, primal),
            deploy_down: grid_values(&self.deploy_down, primal),
            spill: grid_values(&self.spill, primal),
            shed: grid_values(&self.shed, primal),
            flow: grid_values(&self.flow, primal),
            angle: grid_values(&self.angle, primal),
            recourse_cost: 0.0,
        };
        let mut cost = 0.0;
        for (g, gen) in instance.generators.iter().enumerate() {
            for t in 0..instance.horizon {
                cost += gen.deploy_up_price * sol.deploy_up[g][t]
                    - gen.deploy_down_price * sol.deploy_down[g][t];
            }
        }
        cost += instance.shed_cost * sol.shed.iter().flatten().sum::<f64>();
        sol.recourse_cost = cost;
        sol
    }
}

/// The first-stage columns the recourse rows refer to.
struct LinkRefs<'a> {
    reserve_up: &'a Grid,
    reserve_down: &'a Grid,
    wind: &'a Grid,
    flow: &'a Grid,
}

fn add_second_stage(
    model: &mut ModelHandle,
    instance: &SystemInstance,
    realization: &[Vec<f64>],
    link: &LinkRefs<'_>,
    weight: f64,
    tag: &str,
) -> SecondStageVars {
    let horizon = instance.horizon;
    let gens = &instance.generators;
    let ng = gens.len();
    let deploy_up = grid(model, ng, horizon, |m, g, t| {
        m.add_var(format!("{tag}_pup[{g},{t}]"), 0.0, INF, weight * gens[g].deploy_up_price)
    });
    let deploy_down = grid(model, ng, horizon, |m, g, t| {
        m.add_var(format!("{tag}_pdn[{g},{t}]"), 0.0, INF, -weight * gens[g].deploy_down_price)
    });
    let spill = grid(model, instance.num_wind_farms(), horizon, |m, j, t| {
        m.add_var(format!("{tag}_spill[{j},{t}]"), 0.0, INF, 0.0)
    });
    let shed = grid(model, instance.num_nodes(), horizon, |m, n, t| {
        m.add_var(format!("{tag}_shed[{n},{t}]"), 0.0, INF, weight * instance.shed_cost)
    });
    let flow = grid(model, instance.num_lines(), horizon, |m, l, t| {
        m.add_var(format!("{tag}_f[{l},{t}]"), -INF, INF, 0.0)
    });
    let angle = grid(model, instance.num_nodes(), horizon, |m, n, t| {
        if n == instance.reference_node {
            m.add_var(format!("{tag}_delta[{n},{t}]"), 0.0, 0.0, 0.0)
        } else {
            m.add_var(format!("{tag}_delta[{n},{t}]"), -INF, INF, 0.0)
        }
    });

    for n in 0..instance.num_nodes() {
        for t in 0..horizon {
            let mut row = Vec::new();
            for g in instance.generators_at(n) {
                row.push((deploy_up[g][t], 1.0));
                row.push((deploy_down[g][t], -1.0));
            }
            let mut rhs = 0.0;
            for j in instance.wind_farms_at(n) {
                row.push((link.wind[j][t], -1.0));
                row.push((spill[j][t], -1.0));
                rhs -= realization[j][t];
            }
            row.push((shed[n][t], 1.0));
            for l in instance.lines_into(n) {
                row.push((flow[l][t], 1.0));
                row.push((link.flow[l][t], -1.0));
            }
            for l in instance.lines_out_of(n) {
                row.push((flow[l][t], -1.0));
                row.push((link.flow[l][t], 1.0));
            }
            model.add_row(format!("{tag}_balance[{n},{t}]"), row, RowSense::Eq(rhs));
        }
    }
    for g in 0..ng {
        for t in 0..horizon {
            model.add_row(
                format!("{tag}_deploy_up[{g},{t}]"),
                vec![(deploy_up[g][t], 1.0), (link.reserve_up[g][t], -1.0)],
                RowSense::Le(0.0),
            );
        }
    }
    for g in 0..ng {
        for t in 0..horizon {
            model.add_row(
                format!("{tag}_deploy_down[{g},{t}]"),
                vec![(deploy_down[g][t], 1.0), (link.reserve_down[g][t], -1.0)],
                RowSense::Le(0.0),
            );
        }
    }
    for j in 0..instance.num_wind_farms() {
        for t in 0..horizon {
            model.add_row(
                format!("{tag}_spill_cap[{j},{t}]"),
                vec![(spill[j][t], 1.0)],
                RowSense::Le(realization[j][t]),
            );
        }
    }
    for n in 0..instance.num_nodes() {
        for t in 0..horizon {
            model.add_row(
                format!("{tag}_shed_cap[{n},{t}]"),
                vec![(shed[n][t], 1.0)],
                RowSense::Le(instance.load[n][t]),
            );
        }
    }
    add_network(model, instance, &flow, &angle, tag);
    SecondStageVars {
        deploy_up,
        deploy_down,
        spill,
        shed,
        flow,
        angle,
    }
}

/// Deterministic-equivalent MILP over all scenarios.
#[derive(Debug, Clone)]
pub struct ExtensiveModel {
    pub model: ModelHandle,
    pub first: FirstStageVars,
    pub second: Vec<SecondStageVars>,
}

pub fn build_extensive(instance: &SystemInstance, scenarios: &ScenarioSet) -> ExtensiveModel {
    let mut model = ModelHandle::new();
    let first = add_first_stage(&mut model, instance);
    let link = LinkRefs {
        reserve_up: &first.reserve_up,
        reserve_down: &first.reserve_down,
        wind: &first.wind,
        flow: &first.flow,
    };
    let second = (0..scenarios.len())
        .map(|s| {
            add_second_stage(
                &mut model,
                instance,
                &scenarios.wind[s],
                &link,
                scenarios.probabilities[s],
                &format!("s{s}"),
            )
        })
        .collect();
    ExtensiveModel { model, first, second }
}

/// Benders master: first-stage rows, recourse estimators and materialized cuts.
#[derive(Debug, Clone)]
pub struct MasterModel {
    pub model: ModelHandle,
    pub first: FirstStageVars,
    /// One estimator for `SingleCut` and for aggregated pools of all-scenario
    /// rows, one per scenario otherwise.
    pub theta: Vec<VarId>,
    /// Row of each pool cut, in pool order.
    pub cut_rows: Vec<RowId>,
}

impl MasterModel {
    /// Fixing map for commitment decisions `(g, t) -> status`.
    pub fn commitment_fixings(&self, fixed: &BTreeMap<(usize, usize), bool>) -> BTreeMap<VarId, f64> {
        fixed
            .iter()
            .map(|(&(g, t), &on)| (self.first.commitment[g][t], if on { 1.0 } else { 0.0 }))
            .collect()
    }
}

pub fn build_master(
    instance: &SystemInstance,
    probabilities: &[f64],
    mode: CutMode,
    pool: &CutPool,
    theta_min: f64,
) -> Result<MasterModel, FormulationError> {
    let mut model = ModelHandle::new();
    let first = add_first_stage(&mut model, instance);
    let n = probabilities.len();
    // An aggregated pool whose rows all span every scenario only constrains
    // Σ π θ, so the master is the single-estimator one.
    let single = match mode {
        CutMode::SingleCut => true,
        CutMode::MultiCut => false,
        CutMode::Aggregated => pool.cuts().iter().all(|c| c.covers_all(n)),
    };
    let theta: Vec<VarId> = match single {
        true => vec![model.add_var("theta", -INF, INF, 1.0)],
        false => probabilities
            .iter()
            .enumerate()
            .map(|(s, &p)| model.add_var(format!("theta[{s}]"), -INF, INF, p))
            .collect(),
    };
    for (s, &th) in theta.iter().enumerate() {
        model.add_row(format!("theta_min[{s}]"), vec![(th, 1.0)], RowSense::Ge(theta_min));
    }
    let linking = first.linking();
    let mut cut_rows = Vec::with_capacity(pool.len());
    for (i, cut) in pool.cuts().iter().enumerate() {
        if cut.coefficients.len() != linking.len() {
            return Err(FormulationError::DimensionMismatch {
                expected: linking.len(),
                found: cut.coefficients.len(),
            });
        }
        let mismatch = || FormulationError::ModeMismatch {
            mode,
            kind: cut.kind,
            iteration: cut.iteration,
            members: cut.members.len(),
        };
        if cut.members.iter().any(|&(s, _)| s >= n) {
            return Err(mismatch());
        }
        let mut row: Vec<(VarId, f64)> = match mode {
            CutMode::SingleCut => {
                if cut.kind == CutKind::PerScenario || !cut.covers_all(n) {
                    return Err(mismatch());
                }
                vec![(theta[0], 1.0)]
            }
            CutMode::MultiCut => {
                if cut.kind != CutKind::PerScenario {
                    return Err(mismatch());
                }
                cut.members.iter().map(|&(s, w)| (theta[s], w)).collect()
            }
            CutMode::Aggregated => {
                if cut.kind == CutKind::PerScenario {
                    return Err(mismatch());
                }
                if single {
                    vec![(theta[0], 1.0)]
                } else {
                    cut.members.iter().map(|&(s, w)| (theta[s], w)).collect()
                }
            }
        };
        row.extend(
            linking
                .iter()
                .zip(&cut.coefficients)
                .filter(|(_, c)| **c != 0.0)
                .map(|(&v, &c)| (v, -c)),
        );
        cut_rows.push(model.add_row(
            format!("cut[{i},k{}]", cut.iteration),
            row,
            RowSense::Ge(cut.rhs_constant()),
        ));
    }
    Ok(MasterModel {
        model,
        first,
        theta,
        cut_rows,
    })
}

/// Recourse LP for one scenario with the linking decisions held by fixing rows.
#[derive(Debug, Clone)]
pub struct SubproblemModel {
    pub scenario: usize,
    pub model: ModelHandle,
    pub second: SecondStageVars,
    /// Fixing rows in `LinkingLayout` order.
    pub fixing_rows: Vec<RowId>,
}

pub fn build_subproblem(
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    scenario: usize,
    x: &FirstStageSolution,
) -> SubproblemModel {
    let mut model = ModelHandle::new();
    let horizon = instance.horizon;
    let copy = |model: &mut ModelHandle, name: &str, rows: usize| -> Grid {
        grid(model, rows, horizon, |m, i, t| m.add_var(format!("{name}[{i},{t}]"), -INF, INF, 0.0))
    };
    let reserve_up = copy(&mut model, "rup", instance.num_generators());
    let reserve_down = copy(&mut model, "rdn", instance.num_generators());
    let wind = copy(&mut model, "w", instance.num_wind_farms());
    let flow = copy(&mut model, "f", instance.num_lines());
    let link = LinkRefs {
        reserve_up: &reserve_up,
        reserve_down: &reserve_down,
        wind: &wind,
        flow: &flow,
    };
    let second = add_second_stage(&mut model, instance, &scenarios.wind[scenario], &link, 1.0, "rt");
    let mut fixing_rows = Vec::with_capacity(LinkingLayout::of(instance).dimension());
    for (name, vars, values) in [
        ("fix_rup", &reserve_up, &x.reserve_up),
        ("fix_rdn", &reserve_down, &x.reserve_down),
        ("fix_w", &wind, &x.wind),
        ("fix_f", &flow, &x.flow),
    ] {
        for (i, row) in vars.iter().enumerate() {
            for (t, &v) in row.iter().enumerate() {
                fixing_rows.push(model.add_row(
                    format!("{name}[{i},{t}]"),
                    vec![(v, 1.0)],
                    RowSense::Eq(values[i][t]),
                ));
            }
        }
    }
    SubproblemModel {
        scenario,
        model,
        second,
        fixing_rows,
    }
}

/// Builds and solves one recourse subproblem.
pub fn solve_subproblem(
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    scenario: usize,
    x: &FirstStageSolution,
) -> Result<SubproblemResult, FormulationError> {
    let sub = build_subproblem(instance, scenarios, scenario, x);
    let result = lp::solve_lp(&sub.model)?;
    if result.status != SolveStatus::Optimal {
        return Err(FormulationError::SubproblemNotOptimal {
            scenario,
            status: result.status,
        });
    }
    Ok(SubproblemResult {
        scenario,
        objective: result.objective,
        duals: sub.fixing_rows.iter().map(|&r| result.dual(r)).collect(),
        solve_time: result.solve_time,
    })
}

/// Value of `cut` at first-stage point `x`.
pub fn evaluate_cut(cut: &Cut, x: &FirstStageSolution) -> Result<f64, FormulationError> {
    let linking = x.linking();
    if linking.len() != cut.coefficients.len() {
        return Err(FormulationError::DimensionMismatch {
            expected: cut.coefficients.len(),
            found: linking.len(),
        });
    }
    Ok(cut.evaluate(&linking))
}
