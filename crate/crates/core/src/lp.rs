//! Solver-agnostic LP/MILP model container and the HiGHS adapter behind it.
//!
//! Dual values follow a single convention regardless of backend: the dual of
//! a row is the derivative of the optimal objective with respect to the
//! row's right-hand side. For a fixing row `x = x̂` this is the subgradient
//! of the value function in `x̂`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use highs::{HighsModelStatus, RowProblem, Sense};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowSense {
    Le(f64),
    Ge(f64),
    Eq(f64),
    /// `lo <= a·x <= hi`
    Range(f64, f64),
}

impl RowSense {
    fn bounds(self) -> (f64, f64) {
        match self {
            RowSense::Le(b) => (f64::NEG_INFINITY, b),
            RowSense::Ge(b) => (b, f64::INFINITY),
            RowSense::Eq(b) => (b, b),
            RowSense::Range(lo, hi) => (lo, hi),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
    pub integer: bool,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub coefficients: Vec<(VarId, f64)>,
    pub sense: RowSense,
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("solve_lp called on a model with integer variable {0:?}")]
    IntegerInLp(String),
    #[error("fixed variable {0:?} does not exist")]
    UnknownVariable(usize),
    #[error("fixed value {value} for {name:?} violates bounds or integrality")]
    InvalidFix { name: String, value: f64 },
}

/// A minimization model: registered variables and rows, in insertion order.
#[derive(Debug, Clone, Default)]
pub struct ModelHandle {
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
    objective_offset: f64,
}

impl ModelHandle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, objective: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            objective,
            integer: false,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, objective: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            objective,
            integer: true,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coefficients: Vec<(VarId, f64)>,
        sense: RowSense,
    ) -> RowId {
        debug_assert!(coefficients.iter().all(|(v, _)| v.0 < self.vars.len()));
        self.rows.push(Constraint {
            name: name.into(),
            coefficients,
            sense,
        });
        RowId(self.rows.len() - 1)
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.vars[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    /// Holds `var` at `value` by bound tightening (no row is added).
    pub fn fix(&mut self, var: VarId, value: f64) {
        self.set_bounds(var, value, value);
    }

    pub fn set_objective(&mut self, var: VarId, coefficient: f64) {
        self.vars[var.0].objective = coefficient;
    }

    pub fn set_objective_offset(&mut self, offset: f64) {
        self.objective_offset = offset;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn row(&self, id: RowId) -> &Constraint {
        &self.rows[id.0]
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn has_integers(&self) -> bool {
        self.vars.iter().any(|v| v.integer)
    }

    /// Copy of the model with integrality dropped and integer columns fixed
    /// at `values`. Used to price rows of a MILP at its optimum.
    pub fn fixed_integer_relaxation(&self, values: &[f64]) -> ModelHandle {
        let mut lp = self.clone();
        for (i, v) in lp.vars.iter_mut().enumerate() {
            if v.integer {
                v.integer = false;
                let value = values[i].round();
                v.lower = value;
                v.upper = value;
            }
        }
        lp
    }

    /// Objective of `values` under this model.
    pub fn objective_at(&self, values: &[f64]) -> f64 {
        self.objective_offset
            + self
                .vars
                .iter()
                .zip(values)
                .map(|(v, x)| v.objective * x)
                .sum::<f64>()
    }

    /// Largest bound or row violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for r in &self.rows {
            let lhs: f64 = r.coefficients.iter().map(|(v, a)| a * values[v.0]).sum();
            let (lo, hi) = r.sense.bounds();
            worst = worst.max(lo - lhs).max(lhs - hi);
        }
        worst
    }

    /// CPLEX-style LP text for offline inspection.
    pub fn to_lp_string(&self) -> String {
        let mut out = String::from("\\ exported model\nMinimize\n obj:");
        let mut any = false;
        for (i, v) in self.vars.iter().enumerate() {
            if v.objective != 0.0 {
                write_term(&mut out, v.objective, &lp_name(&v.name, i));
                any = true;
            }
        }
        if !any {
            out.push_str(" 0");
        }
        if self.objective_offset != 0.0 {
            let _ = write!(out, " {:+}", self.objective_offset);
        }
        out.push_str("\nSubject To\n");
        for (i, r) in self.rows.iter().enumerate() {
            let mut expr = String::new();
            for (v, a) in &r.coefficients {
                write_term(&mut expr, *a, &lp_name(&self.vars[v.0].name, v.0));
            }
            if expr.is_empty() {
                expr.push_str(" 0");
            }
            let name = format!("r{i}_{}", sanitize(&r.name));
            match r.sense {
                RowSense::Le(b) => {
                    let _ = writeln!(out, " {name}:{expr} <= {b}");
                }
                RowSense::Ge(b) => {
                    let _ = writeln!(out, " {name}:{expr} >= {b}");
                }
                RowSense::Eq(b) => {
                    let _ = writeln!(out, " {name}:{expr} = {b}");
                }
                RowSense::Range(lo, hi) => {
                    let _ = writeln!(out, " {name}: {lo} <={expr} <= {hi}");
                }
            }
        }
        out.push_str("Bounds\n");
        for (i, v) in self.vars.iter().enumerate() {
            let name = lp_name(&v.name, i);
            let lo = fmt_bound(v.lower);
            let hi = fmt_bound(v.upper);
            if v.lower == v.upper {
                let _ = writeln!(out, " {name} = {}", v.lower);
            } else if v.lower.is_infinite() && v.upper.is_infinite() {
                let _ = writeln!(out, " {name} free");
            } else {
                let _ = writeln!(out, " {lo} <= {name} <= {hi}");
            }
        }
        let ints: Vec<String> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.integer)
            .map(|(i, v)| lp_name(&v.name, i))
            .collect();
        if !ints.is_empty() {
            out.push_str("General\n");
            for n in ints {
                let _ = writeln!(out, " {n}");
            }
        }
        out.push_str("End\n");
        out
    }
}

fn write_term(out: &mut String, coef: f64, name: &str) {
    let _ = write!(out, " {coef:+} {name}");
}

fn fmt_bound(b: f64) -> String {
    if b == f64::INFINITY {
        "+inf".into()
    } else if b == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{b}")
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

fn lp_name(name: &str, index: usize) -> String {
    format!("x{index}_{}", sanitize(name))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Error,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: f64,
    /// Column values by `VarId`; empty unless optimal.
    pub primal: Vec<f64>,
    /// Row duals by `RowId`; empty unless an optimal LP solve.
    pub duals: Vec<f64>,
    pub row_count: usize,
    pub solve_time: f64,
    /// Backend failure text, or the fixed-variable set when fixing made a MILP infeasible.
    pub message: Option<String>,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.primal[var.0]
    }

    pub fn dual(&self, row: RowId) -> f64 {
        self.duals[row.0]
    }
}

/// Solves a pure LP and reports row duals.
pub fn solve_lp(model: &ModelHandle) -> Result<SolveResult, LpError> {
    if let Some(v) = model.vars.iter().find(|v| v.integer) {
        return Err(LpError::IntegerInLp(v.name.clone()));
    }
    Ok(solve_with_highs(model, None))
}

/// Solves a MILP to relative gap `mip_gap`, holding `fixed` variables at
/// their given values through bound tightening.
pub fn solve_milp(
    model: &ModelHandle,
    mip_gap: f64,
    fixed: &BTreeMap<VarId, f64>,
) -> Result<SolveResult, LpError> {
    let mut working;
    let model = if fixed.is_empty() {
        model
    } else {
        working = model.clone();
        for (&id, &value) in fixed {
            let v = working
                .vars
                .get(id.0)
                .ok_or(LpError::UnknownVariable(id.0))?;
            let integral_ok = !v.integer || value.fract() == 0.0;
            if value < v.lower || value > v.upper || !integral_ok {
                return Err(LpError::InvalidFix {
                    name: v.name.clone(),
                    value,
                });
            }
            working.fix(id, value);
        }
        &working
    };
    let mut result = solve_with_highs(model, Some(mip_gap));
    result.duals.clear();
    if result.status == SolveStatus::Infeasible && !fixed.is_empty() {
        let listing: Vec<String> = fixed
            .iter()
            .map(|(id, v)| format!("{}={v}", model.vars[id.0].name))
            .collect();
        result.message = Some(format!("infeasible with fixed variables: {}", listing.join(", ")));
    }
    Ok(result)
}

const SMALL_MATRIX_VALUE: f64 = 1e-9;

fn solve_with_highs(model: &ModelHandle, mip_gap: Option<f64>) -> SolveResult {
    let start = Instant::now();
    let mut problem = RowProblem::default();
    let cols: Vec<_> = model
        .vars
        .iter()
        .map(|v| match mip_gap {
            Some(_) => problem.add_column_with_integrality(v.objective, v.lower..=v.upper, v.integer),
            None => problem.add_column(v.objective, v.lower..=v.upper),
        })
        .collect();
    for r in &model.rows {
        let (lo, hi) = r.sense.bounds();
        // HiGHS drops entries at or below this with a warning; drop them here.
        let coefs: Vec<_> = r
            .coefficients
            .iter()
            .filter(|(_, a)| a.abs() > SMALL_MATRIX_VALUE)
            .map(|(v, a)| (cols[v.0], *a))
            .collect();
        problem.add_row(lo..=hi, coefs);
    }
    let failed = |message: String| SolveResult {
        status: SolveStatus::Error,
        objective: f64::NAN,
        primal: Vec::new(),
        duals: Vec::new(),
        row_count: model.rows.len(),
        solve_time: start.elapsed().as_secs_f64(),
        message: Some(message),
    };
    let mut highs_model = match problem.try_optimise(Sense::Minimise) {
        Ok(m) => m,
        Err(e) => return failed(format!("model rejected by HiGHS: {e:?}")),
    };
    highs_model.make_quiet();
    highs_model.set_option("threads", 1);
    highs_model.set_option("random_seed", 0);
    if let Some(gap) = mip_gap {
        highs_model.set_option("mip_rel_gap", gap);
        highs_model.set_option("mip_abs_gap", 1e-9);
        // Sub-MIP heuristics dominate master solve time on cut-heavy masters.
        highs_model.set_option("mip_heuristic_run_rins", false);
        highs_model.set_option("mip_heuristic_run_rens", false);
        highs_model.set_option("mip_heuristic_run_root_reduced_cost", false);
    }
    let solved = match highs_model.try_solve() {
        Ok(s) => s,
        Err(e) => return failed(format!("HiGHS failed: {e:?}")),
    };
    let status = match solved.status() {
        HighsModelStatus::Optimal => SolveStatus::Optimal,
        HighsModelStatus::Infeasible => SolveStatus::Infeasible,
        HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => {
            SolveStatus::Unbounded
        }
        other => return failed(format!("HiGHS model status {other:?}")),
    };
    let mut result = SolveResult {
        status,
        objective: f64::NAN,
        primal: Vec::new(),
        duals: Vec::new(),
        row_count: model.rows.len(),
        solve_time: 0.0,
        message: None,
    };
    if status == SolveStatus::Optimal {
        let solution = solved.get_solution();
        result.primal = solution.columns().to_vec();
        result.duals = solution.dual_rows().to_vec();
        result.objective = solved.objective_value() + model.objective_offset;
    }
    result.solve_time = start.elapsed().as_secs_f64();
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    fn fixing_model(obj: f64, at: f64) -> (ModelHandle, VarId, RowId) {
        let mut m = ModelHandle::new();
        let x = m.add_var("x", -INF, INF, obj);
        let r = m.add_row("fix_x", vec![(x, 1.0)], RowSense::Eq(at));
        (m, x, r)
    }

    #[test]
    fn fixing_dual_is_value_function_slope() {
        let (m, x, r) = fixing_model(1.0, 3.0);
        let res = solve_lp(&m).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective - 3.0).abs() < 1e-12);
        assert!((res.value(x) - 3.0).abs() < 1e-12);
        assert!((res.dual(r) - 1.0).abs() < 1e-12);
        assert_eq!(res.row_count, 1);
    }

    #[test]
    fn constant_value_function_has_zero_dual() {
        let (m, _, r) = fixing_model(0.0, 3.0);
        let res = solve_lp(&m).unwrap();
        assert_eq!(res.objective, 0.0);
        assert_eq!(res.dual(r), 0.0);
    }

    #[test]
    fn bounded_and_unbounded() {
        let mut m = ModelHandle::new();
        let x = m.add_var("x", -INF, INF, -1.0);
        let r = m.add_row("cap", vec![(x, 1.0)], RowSense::Le(5.0));
        let res = solve_lp(&m).unwrap();
        assert!((res.objective + 5.0).abs() < 1e-12);
        assert!((res.dual(r) + 1.0).abs() < 1e-12);

        let mut m = ModelHandle::new();
        m.add_var("x", -INF, INF, -1.0);
        let res = solve_lp(&m).unwrap();
        assert_eq!(res.status, SolveStatus::Unbounded);
        assert!(res.primal.is_empty() && res.duals.is_empty());
    }

    #[test]
    fn infeasible_status() {
        let mut m = ModelHandle::new();
        let x = m.add_var("x", 0.0, 1.0, 1.0);
        m.add_row("c", vec![(x, 1.0)], RowSense::Ge(2.0));
        assert_eq!(solve_lp(&m).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn lp_rejects_integers() {
        let mut m = ModelHandle::new();
        m.add_binary("b", 1.0);
        assert!(matches!(solve_lp(&m), Err(LpError::IntegerInLp(_))));
    }

    #[test]
    fn milp_binary_and_fixing() {
        let mut m = ModelHandle::new();
        let x = m.add_binary("x", 1.0);
        let res = solve_milp(&m, 1e-6, &BTreeMap::new()).unwrap();
        assert_eq!(res.objective, 0.0);
        assert!(res.duals.is_empty());
        let res = solve_milp(&m, 1e-6, &BTreeMap::from([(x, 1.0)])).unwrap();
        assert_eq!(res.objective, 1.0);
        assert_eq!(res.row_count, 0);
    }

    #[test]
    fn milp_fix_validation_and_infeasible_echo() {
        let mut m = ModelHandle::new();
        let x = m.add_binary("x", 1.0);
        let y = m.add_binary("y", 1.0);
        m.add_row("one", vec![(x, 1.0), (y, 1.0)], RowSense::Eq(1.0));
        assert!(matches!(
            solve_milp(&m, 0.0, &BTreeMap::from([(x, 0.5)])),
            Err(LpError::InvalidFix { .. })
        ));
        assert!(matches!(
            solve_milp(&m, 0.0, &BTreeMap::from([(VarId(9), 0.0)])),
            Err(LpError::UnknownVariable(9))
        ));
        let res = solve_milp(&m, 0.0, &BTreeMap::from([(x, 1.0), (y, 1.0)])).unwrap();
        assert_eq!(res.status, SolveStatus::Infeasible);
        let msg = res.message.unwrap();
        assert!(msg.contains("x=1") && msg.contains("y=1"), "{msg}");
    }

    #[test]
    fn finite_difference_matches_dual() {
        // min 2a + 5b  s.t.  a + b >= d,  a <= 4,  fixing d = x̂
        let build = |xhat: f64| {
            let mut m = ModelHandle::new();
            let a = m.add_var("a", 0.0, 4.0, 2.0);
            let b = m.add_var("b", 0.0, INF, 5.0);
            let d = m.add_var("d", -INF, INF, 0.0);
            m.add_row("cover", vec![(a, 1.0), (b, 1.0), (d, -1.0)], RowSense::Ge(0.0));
            let fix = m.add_row("fix", vec![(d, 1.0)], RowSense::Eq(xhat));
            (m, fix)
        };
        let h = 1e-4;
        for xhat in [1.0, 3.0, 6.0, 10.0] {
            let (m, fix) = build(xhat);
            let base = solve_lp(&m).unwrap();
            let (m2, _) = build(xhat + h);
            let bumped = solve_lp(&m2).unwrap();
            let fd = (bumped.objective - base.objective) / h;
            assert!((fd - base.dual(fix)).abs() <= 1e-3, "x̂={xhat}: fd {fd} vs {}", base.dual(fix));
        }
    }

    #[test]
    fn identical_models_give_identical_primal() {
        let build = || {
            let mut m = ModelHandle::new();
            let x = m.add_var("x", 0.0, 10.0, 1.0);
            let y = m.add_var("y", 0.0, 10.0, 1.0);
            m.add_row("c", vec![(x, 1.0), (y, 1.0)], RowSense::Ge(4.0));
            m
        };
        let a = solve_lp(&build()).unwrap();
        let b = solve_lp(&build()).unwrap();
        assert_eq!(a.primal, b.primal);
    }

    #[test]
    fn fixed_integer_relaxation_prices_rows() {
        let mut m = ModelHandle::new();
        let u = m.add_binary("u", 10.0);
        let p = m.add_var("p", 0.0, INF, 1.0);
        let cap = m.add_row("cap", vec![(p, 1.0), (u, -50.0)], RowSense::Le(0.0));
        let dem = m.add_row("dem", vec![(p, 1.0)], RowSense::Ge(20.0));
        let res = solve_milp(&m, 0.0, &BTreeMap::new()).unwrap();
        assert!((res.objective - 30.0).abs() < 1e-9);
        let lp = m.fixed_integer_relaxation(&res.primal);
        let priced = solve_lp(&lp).unwrap();
        assert!((priced.objective - 30.0).abs() < 1e-9);
        assert!(priced.dual(cap).abs() < 1e-9);
        assert!((priced.dual(dem) - 1.0).abs() < 1e-9);
        assert!(m.max_violation(&res.primal) < 1e-9);
    }

    #[test]
    fn lp_export_mentions_every_row_and_integer() {
        let mut m = ModelHandle::new();
        let u = m.add_binary("u[g1,1]", 3.0);
        let f = m.add_var("flow", -INF, INF, 0.0);
        m.add_row("lim", vec![(f, 1.0)], RowSense::Range(-5.0, 5.0));
        m.add_row("link", vec![(f, 1.0), (u, -2.0)], RowSense::Le(0.0));
        let text = m.to_lp_string();
        assert!(text.starts_with("\\ exported model\nMinimize"));
        assert!(text.contains("-5 <= +1 x1_flow <= 5"), "{text}");
        assert!(text.contains("x1_flow free"));
        assert!(text.contains("General\n x0_u_g1_1_"));
        assert!(text.trim_end().ends_with("End"));
    }
}
