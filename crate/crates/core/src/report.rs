//! Run reports, method dispatch, iteration traces and comparison tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ScenarioSet, SystemInstance};
use crate::engine::{self, BendersConfig, IterationRecord, RunStatus};
use crate::formulation::{build_extensive, CutMode};
use crate::lp;
use crate::outer::{self, OuterConfig, OuterSummary};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("comparison needs at least two reports, got {0}")]
    TooFewReports(usize),
    #[error("reports cover different instances: {0:?}")]
    MixedInstances(Vec<String>),
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("extensive form solve ended {0:?}")]
    Extensive(lp::SolveStatus),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
    #[error(transparent)]
    Outer(#[from] outer::OuterError),
    #[error(transparent)]
    Lp(#[from] lp::LpError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "extensive")]
    Extensive,
    #[serde(rename = "single-cut")]
    SingleCut,
    #[serde(rename = "multi-cut")]
    MultiCut,
    #[serde(rename = "aggregated")]
    Aggregated,
    #[serde(rename = "aggregated+consolidation")]
    AggregatedConsolidation,
    #[serde(rename = "outer")]
    Outer,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Extensive,
        Method::SingleCut,
        Method::MultiCut,
        Method::Aggregated,
        Method::AggregatedConsolidation,
        Method::Outer,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Extensive => "extensive",
            Method::SingleCut => "single-cut",
            Method::MultiCut => "multi-cut",
            Method::Aggregated => "aggregated",
            Method::AggregatedConsolidation => "aggregated+consolidation",
            Method::Outer => "outer",
        }
    }

    /// Engine configuration for this method derived from `base`.
    pub fn configure(self, base: &BendersConfig) -> BendersConfig {
        let mut config = base.clone();
        match self {
            Method::SingleCut => config.mode = CutMode::SingleCut,
            Method::MultiCut => config.mode = CutMode::MultiCut,
            Method::Aggregated => config.mode = CutMode::Aggregated,
            Method::AggregatedConsolidation => {
                config.mode = CutMode::Aggregated;
                config.consolidate = true;
            }
            Method::Extensive | Method::Outer => {}
        }
        config
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| ReportError::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterMetrics {
    #[serde(rename = "T1")]
    pub t1: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
    #[serde(rename = "T")]
    pub total: f64,
    pub max_rows: usize,
    pub fixed_count: usize,
    pub free_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub instance: String,
    pub method: Method,
    /// `converged`, `not-converged` or `canceled`.
    pub status: String,
    pub objective: Option<f64>,
    pub wall_time_s: f64,
    pub iterations: usize,
    pub master_rows: usize,
    pub config: BendersConfig,
    pub trace_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub outer: Option<OuterMetrics>,
}

impl RunReport {
    pub fn converged(&self) -> bool {
        self.status == "converged"
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn status_tag(status: RunStatus) -> &'static str {
    match status {
        RunStatus::Converged => "converged",
        RunStatus::NotConverged => "not-converged",
        RunStatus::Canceled => "canceled",
    }
}

/// Everything a method run produces besides the report itself.
#[derive(Debug, Clone, Default)]
pub struct MethodArtifacts {
    pub history: Vec<IterationRecord>,
    pub outer: Option<OuterSummary>,
}

pub fn run_method(
    instance: &SystemInstance,
    scenarios: &ScenarioSet,
    method: Method,
    base: &BendersConfig,
    outer_config: Option<&OuterConfig>,
) -> Result<(RunReport, MethodArtifacts), ReportError> {
    let config = method.configure(base);
    let start = Instant::now();
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        instance: instance.name.clone(),
        method,
        status: String::new(),
        objective: None,
        wall_time_s: 0.0,
        iterations: 0,
        master_rows: 0,
        config: config.clone(),
        trace_path: None,
        outer: None,
    };
    let mut artifacts = MethodArtifacts::default();
    match method {
        Method::Extensive => {
            let ext = build_extensive(instance, scenarios);
            let mut res = lp::solve_milp(&ext.model, config.mip_gap, &BTreeMap::new())?;
            if !res.is_optimal() {
                return Err(ReportError::Extensive(res.status));
            }
            // Same absolute accuracy the Benders masters are held to.
            let tight = 0.1 * config.epsilon / res.objective.abs().max(1.0);
            if tight < config.mip_gap {
                res = lp::solve_milp(&ext.model, tight, &BTreeMap::new())?;
                if !res.is_optimal() {
                    return Err(ReportError::Extensive(res.status));
                }
            }
            report.status = "converged".into();
            report.objective = Some(res.objective);
            report.iterations = 1;
            report.master_rows = res.row_count;
        }
        Method::Outer => {
            let outer_config = outer_config.copied().unwrap_or(OuterConfig {
                subsets: 2,
                gamma: 1.0,
                workers: config.workers,
            });
            let out = outer::run_outer(instance, scenarios, &config, &outer_config)?;
            let summary = out.summary(instance);
            report.outer = Some(OuterMetrics {
                t1: out.t1,
                t2: out.t2,
                total: out.total_time(),
                max_rows: out.max_rows,
                fixed_count: summary.fixed_count,
                free_count: summary.free_count,
            });
            fill_from_run(&mut report, &out.solution);
            artifacts.history = out.solution.state.history.clone();
            artifacts.outer = Some(summary);
        }
        _ => {
            let out = engine::run(instance, scenarios, &config)?;
            fill_from_run(&mut report, &out);
            artifacts.history = out.state.history.clone();
        }
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((report, artifacts))
}

fn fill_from_run(report: &mut RunReport, out: &engine::ConvergedSolution) {
    report.status = status_tag(out.status).into();
    report.objective = (out.status == RunStatus::Converged).then_some(out.objective);
    report.iterations = out.state.history.len();
    report.master_rows = out.state.final_master_rows();
}

#[derive(Debug, Serialize)]
struct TraceLine {
    iter: usize,
    lb: f64,
    ub: f64,
    gap: f64,
    clusters: usize,
    master_rows: usize,
    master_time_s: f64,
    max_sub_time_s: f64,
}

/// One JSON object per iteration.
pub fn write_trace(history: &[IterationRecord], mut out: impl Write) -> std::io::Result<()> {
    for h in history {
        let line = TraceLine {
            iter: h.iteration,
            lb: h.lower_bound,
            ub: h.upper_bound,
            gap: h.gap,
            clusters: h.clusters,
            master_rows: h.master_rows,
            master_time_s: h.master_time,
            max_sub_time_s: h.max_sub_time,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Pool snapshots, one JSON object per iteration.
pub fn write_pool_snapshots(history: &[IterationRecord], mut out: impl Write) -> std::io::Result<()> {
    for h in history {
        serde_json::to_writer(&mut out, &serde_json::json!({ "iter": h.iteration, "pool": h.pool }))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Path of the pool snapshot file that accompanies a trace file.
pub fn pool_snapshot_path(trace: &Path) -> PathBuf {
    let mut name = trace.file_stem().unwrap_or_default().to_os_string();
    name.push(".pool.jsonl");
    trace.with_file_name(name)
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    std::fs::write(path, contents).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub objective: Option<f64>,
    pub wall_time_s: f64,
    pub master_rows: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub instance: String,
    pub rows: Vec<ComparisonRow>,
    /// Largest pairwise objective difference among converged reports.
    pub max_difference: f64,
    pub tolerance: f64,
    pub disagreement: bool,
    #[serde(skip)]
    pub text: String,
}

impl Comparison {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }
}

/// Tabulates reports on one instance; objectives further apart than
/// `2 * epsilon` set the disagreement flag.
pub fn emit_comparison_table(reports: &[RunReport], epsilon: f64) -> Result<Comparison, ReportError> {
    if reports.len() < 2 {
        return Err(ReportError::TooFewReports(reports.len()));
    }
    let mut names: Vec<String> = reports.iter().map(|r| r.instance.clone()).collect();
    names.dedup();
    if names.len() > 1 {
        return Err(ReportError::MixedInstances(names));
    }
    let objectives: Vec<f64> = reports.iter().filter_map(|r| r.objective).collect();
    let max_difference = match (
        objectives.iter().copied().reduce(f64::max),
        objectives.iter().copied().reduce(f64::min),
    ) {
        (Some(hi), Some(lo)) => hi - lo,
        _ => 0.0,
    };
    let tolerance = 2.0 * epsilon;
    let disagreement = max_difference > tolerance || objectives.len() < reports.len();

    let mut text = String::new();
    let _ = writeln!(text, "{:<26} {:>18} {:>10} {:>8} {:>6}", "method", "exp. cost", "time (s)", "rows", "iters");
    for r in reports {
        let cost = r.objective.map_or_else(|| "-".to_string(), |o| format!("{o:.2}"));
        let _ = writeln!(
            text,
            "{:<26} {:>18} {:>10.3} {:>8} {:>6}",
            r.method.tag(),
            cost,
            r.wall_time_s,
            r.master_rows,
            r.iterations
        );
    }
    if disagreement {
        let _ = writeln!(text, "DISAGREEMENT: objectives differ by {max_difference:.3e} (tolerance {tolerance:.1e})");
    }
    Ok(Comparison {
        instance: names.remove(0),
        rows: reports
            .iter()
            .map(|r| ComparisonRow {
                method: r.method,
                objective: r.objective,
                wall_time_s: r.wall_time_s,
                master_rows: r.master_rows,
                iterations: r.iterations,
            })
            .collect(),
        max_difference,
        tolerance,
        disagreement,
        text,
    })
}
