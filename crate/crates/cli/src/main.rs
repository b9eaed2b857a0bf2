//! `suc`: solve a stochastic unit commitment instance with one method, or
//! compare several methods on the same instance.
//!
//! Exit codes: 0 converged (and, for `compare`, all objectives agree),
//! 2 not converged or disagreement, 1 input or solver error.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use suc_benders::clustering::ClusteringMethod;
use suc_benders::cuts::ClusterAttribute;
use suc_benders::data::{load_instance, load_scenarios};
use suc_benders::engine::BendersConfig;
use suc_benders::outer::OuterConfig;
use suc_benders::report::{self, Method, MethodArtifacts, RunReport};

#[derive(Parser)]
#[command(name = "suc", version, about = "Adaptive Benders decomposition for stochastic unit commitment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve with a single method and write its report.
    Solve {
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[command(flatten)]
        common: Common,
    },
    /// Run several methods and print a comparison table.
    Compare {
        /// Comma-separated method names, or `all`.
        #[arg(long, default_value = "all")]
        methods: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Clustering {
    Hierarchical,
    Kmeans,
}

#[derive(Clone, Copy, ValueEnum)]
enum Attribute {
    Duals,
    Objective,
    Wind,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    scenarios: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long = "mip-gap", default_value_t = 1e-6)]
    mip_gap: f64,
    #[arg(long = "theta-min", allow_hyphen_values = true)]
    theta_min: Option<f64>,
    #[arg(long, default_value_t = 0.75)]
    zeta: f64,
    #[arg(long, default_value_t = 5)]
    rho: usize,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    #[arg(long, default_value_t = 5)]
    kappa: usize,
    #[arg(long = "init-clusters", default_value_t = 1)]
    init_clusters: usize,
    #[arg(long, value_enum, default_value_t = Clustering::Hierarchical)]
    clustering: Clustering,
    #[arg(long, value_enum, default_value_t = Attribute::Duals)]
    attribute: Attribute,
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    consolidate: bool,
    #[arg(long, default_value_t = 2)]
    subsets: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// JSON-lines iteration trace; pool snapshots go to `<stem>.pool.jsonl`.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Report JSON destination; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long = "max-iters", default_value_t = 500)]
    max_iters: usize,
}

impl Common {
    fn config(&self) -> BendersConfig {
        BendersConfig {
            epsilon: self.eps,
            mip_gap: self.mip_gap,
            theta_min: self.theta_min,
            max_iterations: self.max_iters,
            alpha: self.alpha,
            zeta: self.zeta,
            rho: self.rho,
            kappa: self.kappa,
            initial_clusters: self.init_clusters,
            clustering: match self.clustering {
                Clustering::Hierarchical => ClusteringMethod::Hierarchical,
                Clustering::Kmeans => ClusteringMethod::KMeans,
            },
            attribute: match self.attribute {
                Attribute::Duals => ClusterAttribute::Duals,
                Attribute::Objective => ClusterAttribute::Objective,
                Attribute::Wind => ClusterAttribute::WindStatic,
            },
            consolidate: self.consolidate,
            workers: self.workers,
            ..BendersConfig::default()
        }
    }

    fn outer(&self) -> OuterConfig {
        OuterConfig {
            subsets: self.subsets,
            gamma: self.gamma,
            workers: self.workers,
        }
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

fn parse_methods(s: &str) -> Result<Vec<Method>, String> {
    if s == "all" {
        return Ok(Method::ALL.to_vec());
    }
    s.split(',').map(|m| parse_method(m.trim())).collect()
}

type Failure = Box<dyn std::error::Error>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Solve { method, common } => solve(method, &common),
        Command::Compare { methods, common } => compare(&parse_methods(&methods)?, &common),
    }
}

fn run_one(method: Method, common: &Common, trace: Option<&Path>) -> Result<RunReport, Failure> {
    let instance = load_instance(&common.instance)?;
    let scenarios = load_scenarios(&common.scenarios, &instance)?;
    let (mut report, artifacts) = report::run_method(&instance, &scenarios, method, &common.config(), Some(&common.outer()))?;
    if let Some(path) = trace {
        write_trace(path, &artifacts)?;
        report.trace_path = Some(path.display().to_string());
    }
    Ok(report)
}

fn write_trace(path: &Path, artifacts: &MethodArtifacts) -> Result<(), Failure> {
    report::write_trace(&artifacts.history, BufWriter::new(File::create(path)?))?;
    let pool = report::pool_snapshot_path(path);
    report::write_pool_snapshots(&artifacts.history, BufWriter::new(File::create(pool)?))?;
    if let Some(summary) = &artifacts.outer {
        let outer = path.with_extension("outer.json");
        report::write_file(&outer, &serde_json::to_string_pretty(summary)?)?;
    }
    Ok(())
}

fn emit(path: Option<&Path>, json: &str) -> Result<(), Failure> {
    match path {
        Some(p) => report::write_file(p, json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn solve(method: Method, common: &Common) -> Result<ExitCode, Failure> {
    let report = run_one(method, common, common.trace.as_deref())?;
    emit(common.report.as_deref(), &report.to_json())?;
    Ok(if report.converged() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn compare(methods: &[Method], common: &Common) -> Result<ExitCode, Failure> {
    let mut reports = Vec::with_capacity(methods.len());
    for &method in methods {
        let trace = common.trace.as_ref().map(|t| {
            let stem = t.file_stem().unwrap_or_default().to_string_lossy();
            t.with_file_name(format!("{stem}.{}.jsonl", method.tag()))
        });
        reports.push(run_one(method, common, trace.as_deref())?);
    }
    let table = report::emit_comparison_table(&reports, common.eps)?;
    print!("{}", table.text);
    if let Some(path) = &common.report {
        let json = serde_json::json!({ "comparison": table, "reports": reports });
        report::write_file(path, &serde_json::to_string_pretty(&json)?)?;
    }
    let all_converged = reports.iter().all(RunReport::converged);
    Ok(if all_converged && !table.disagreement { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
