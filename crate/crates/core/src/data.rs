//! Power-system instance and wind scenario data.
//!
//! Instances are read from a JSON document with a `meta` header block
//! (name, horizon, reference node and units) and scenarios from a long
//! format CSV (`scenario,farm,period,value_mw[,probability]`). Periods
//! are 1-based in files and 0-based everywhere in memory.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the scenario probability sum.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid value at {path}: {message}")]
    Validation { path: String, message: String },
    #[error("{path} references unknown {kind} id {id:?}")]
    Referential {
        path: String,
        kind: &'static str,
        id: String,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("scenario probabilities sum to {sum}, expected 1")]
    ProbabilitySum { sum: f64 },
    #[error(
        "scenario {scenario:?}, farm {farm:?}, period {period}: {value} MW exceeds installed capacity {capacity} MW"
    )]
    CapacityExceeded {
        scenario: String,
        farm: String,
        period: usize,
        value: f64,
        capacity: f64,
    },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> DataError {
    DataError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub id: String,
    pub node: usize,
    /// Energy cost, $/MWh.
    pub energy_cost: f64,
    /// Start-up cost, $.
    pub startup_cost: f64,
    /// Upward reserve capacity cost, $/MW.
    pub reserve_up_cost: f64,
    /// Downward reserve capacity cost, $/MW.
    pub reserve_down_cost: f64,
    /// Upward deployment price, $/MWh.
    pub deploy_up_price: f64,
    /// Downward deployment price, $/MWh.
    pub deploy_down_price: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub reserve_up_max: f64,
    pub reserve_down_max: f64,
    pub min_up: usize,
    pub min_down: usize,
    pub initially_on: bool,
    pub initial_on_periods: usize,
    pub initial_off_periods: usize,
}

impl Generator {
    /// Number of leading periods in which the commitment is held at its initial status.
    pub fn enforced_initial_periods(&self) -> usize {
        self.initial_on_periods + self.initial_off_periods
    }

    /// Output before the first period: at technical minimum if initially on.
    pub fn initial_output(&self) -> f64 {
        if self.initially_on {
            self.p_min
        } else {
            0.0
        }
    }

    fn initial_status(&self) -> f64 {
        if self.initially_on {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: String,
    pub from: usize,
    pub to: usize,
    /// Susceptance in p.u.
    pub susceptance: f64,
    /// Thermal capacity, MW.
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindFarm {
    pub id: String,
    pub node: usize,
    pub capacity: f64,
}

/// Static data of a stochastic unit commitment instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemInstance {
    pub name: String,
    pub horizon: usize,
    pub reference_node: usize,
    pub nodes: Vec<String>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub wind_farms: Vec<WindFarm>,
    /// Demand in MW, indexed `[node][period]`.
    pub load: Vec<Vec<f64>>,
    /// Load shedding penalty, $/MWh.
    pub shed_cost: f64,
    pub units: Units,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub power: String,
    pub energy_price: String,
    pub cost: String,
    pub time: String,
}

impl Default for Units {
    fn default() -> Self {
        Units {
            power: "MW".into(),
            energy_price: "$/MWh".into(),
            cost: "$".into(),
            time: "h".into(),
        }
    }
}

impl SystemInstance {
    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn num_wind_farms(&self) -> usize {
        self.wind_farms.len()
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn generators_at(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.generators
            .iter()
            .enumerate()
            .filter(move |(_, g)| g.node == node)
            .map(|(i, _)| i)
    }

    pub fn wind_farms_at(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.wind_farms
            .iter()
            .enumerate()
            .filter(move |(_, w)| w.node == node)
            .map(|(i, _)| i)
    }

    /// Lines whose flow enters `node` (the node is the `to` end).
    pub fn lines_into(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.lines
            .iter()
            .enumerate()
            .filter(move |(_, l)| l.to == node)
            .map(|(i, _)| i)
    }

    /// Lines whose flow leaves `node` (the node is the `from` end).
    pub fn lines_out_of(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.lines
            .iter()
            .enumerate()
            .filter(move |(_, l)| l.from == node)
            .map(|(i, _)| i)
    }

    /// Length of a first-stage linking vector `[r+, r-, w, f]`, each block period-major per unit.
    pub fn linking_dimension(&self) -> usize {
        self.horizon * (2 * self.num_generators() + self.num_wind_farms() + self.num_lines())
    }

    /// Provable lower bound on any scenario's recourse cost: the only
    /// negative terms are downward deployments bounded by the reserve offers.
    pub fn recourse_lower_bound(&self) -> f64 {
        -(self.horizon as f64)
            * self
                .generators
                .iter()
                .map(|g| g.deploy_down_price * g.reserve_down_max)
                .sum::<f64>()
    }

    pub fn from_json_str(text: &str) -> Result<Self, DataError> {
        let raw: RawInstance =
            serde_json::from_str(text).map_err(|e| DataError::Parse(e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("instance serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    fn from_raw(raw: RawInstance) -> Result<Self, DataError> {
        let horizon = raw.meta.horizon;
        if horizon < 1 {
            return Err(invalid("meta.horizon", "horizon must be at least 1"));
        }
        if raw.nodes.is_empty() {
            return Err(invalid("nodes", "at least one node is required"));
        }
        let mut node_index = HashMap::new();
        for (i, n) in raw.nodes.iter().enumerate() {
            if node_index.insert(n.clone(), i).is_some() {
                return Err(invalid(format!("nodes[{i}]"), format!("duplicate node id {n:?}")));
            }
        }
        let lookup = |path: String, id: &str| -> Result<usize, DataError> {
            node_index
                .get(id)
                .copied()
                .ok_or_else(|| DataError::Referential {
                    path,
                    kind: "node",
                    id: id.to_string(),
                })
        };
        let reference_node = lookup("meta.ref_node".into(), &raw.meta.ref_node)?;

        let mut lines = Vec::with_capacity(raw.lines.len());
        for (i, l) in raw.lines.iter().enumerate() {
            let path = format!("lines[{i}]");
            let from = lookup(format!("{path}.from"), &l.from)?;
            let to = lookup(format!("{path}.to"), &l.to)?;
            if from == to {
                return Err(invalid(path, "line endpoints must differ"));
            }
            if !(l.capacity > 0.0) {
                return Err(invalid(format!("{path}.capacity"), "capacity must be positive"));
            }
            if !(l.susceptance > 0.0) {
                return Err(invalid(
                    format!("{path}.susceptance"),
                    "susceptance must be positive",
                ));
            }
            lines.push(Line {
                id: l.id.clone(),
                from,
                to,
                susceptance: l.susceptance,
                capacity: l.capacity,
            });
        }

        let mut generators = Vec::with_capacity(raw.generators.len());
        for (i, g) in raw.generators.iter().enumerate() {
            let path = format!("generators[{i}]");
            let node = lookup(format!("{path}.node"), &g.node)?;
            if !(0.0 <= g.p_min && g.p_min <= g.p_max) {
                return Err(invalid(
                    path,
                    format!("generator {:?} needs 0 <= p_min <= p_max", g.id),
                ));
            }
            for (name, v) in [
                ("ramp_up", g.ramp_up),
                ("ramp_down", g.ramp_down),
                ("reserve_up_max", g.reserve_up_max),
                ("reserve_down_max", g.reserve_down_max),
            ] {
                if !(v >= 0.0) {
                    return Err(invalid(
                        format!("{path}.{name}"),
                        format!("generator {:?}: must be non-negative", g.id),
                    ));
                }
            }
            if g.min_up < 1 || g.min_down < 1 {
                return Err(invalid(
                    path,
                    format!("generator {:?}: min up/down times must be >= 1", g.id),
                ));
            }
            if g.u0 > 1 {
                return Err(invalid(format!("{path}.u0"), "initial status must be 0 or 1"));
            }
            if !(g.deploy_down_price <= g.cost && g.cost <= g.deploy_up_price) {
                warn!(
                    "generator {:?}: deployment prices are not bracketing the energy cost",
                    g.id
                );
            }
            generators.push(Generator {
                id: g.id.clone(),
                node,
                energy_cost: g.cost,
                startup_cost: g.startup_cost,
                reserve_up_cost: g.reserve_up_cost,
                reserve_down_cost: g.reserve_down_cost,
                deploy_up_price: g.deploy_up_price,
                deploy_down_price: g.deploy_down_price,
                p_min: g.p_min,
                p_max: g.p_max,
                ramp_up: g.ramp_up,
                ramp_down: g.ramp_down,
                reserve_up_max: g.reserve_up_max,
                reserve_down_max: g.reserve_down_max,
                min_up: g.min_up,
                min_down: g.min_down,
                initially_on: g.u0 == 1,
                initial_on_periods: g.initial_on_periods,
                initial_off_periods: g.initial_off_periods,
            });
        }

        let mut wind_farms = Vec::with_capacity(raw.wind_farms.len());
        for (i, w) in raw.wind_farms.iter().enumerate() {
            let path = format!("wind_farms[{i}]");
            let node = lookup(format!("{path}.node"), &w.node)?;
            if !(w.capacity >= 0.0) {
                return Err(invalid(format!("{path}.capacity"), "capacity must be non-negative"));
            }
            wind_farms.push(WindFarm {
                id: w.id.clone(),
                node,
                capacity: w.capacity,
            });
        }

        let mut load = vec![vec![0.0; horizon]; raw.nodes.len()];
        for (i, entry) in raw.load.iter().enumerate() {
            let path = format!("load[{i}]");
            let node = lookup(format!("{path}.node"), &entry.node)?;
            if entry.period < 1 || entry.period > horizon {
                return Err(invalid(
                    format!("{path}.period"),
                    format!("period {} outside 1..={horizon}", entry.period),
                ));
            }
            if !(entry.mw >= 0.0) {
                return Err(invalid(format!("{path}.mw"), "load must be non-negative"));
            }
            load[node][entry.period - 1] += entry.mw;
        }
        if !(raw.shed_cost >= 0.0) {
            return Err(invalid("shed_cost", "shedding penalty must be non-negative"));
        }

        let instance = SystemInstance {
            name: raw.meta.name,
            horizon,
            reference_node,
            nodes: raw.nodes,
            lines,
            generators,
            wind_farms,
            load,
            shed_cost: raw.shed_cost,
            units: raw.meta.units,
        };
        instance.check_connected()?;
        Ok(instance)
    }

    fn check_connected(&self) -> Result<(), DataError> {
        let n = self.num_nodes();
        let mut adjacency = vec![Vec::new(); n];
        for l in &self.lines {
            adjacency[l.from].push(l.to);
            adjacency[l.to].push(l.from);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([self.reference_node]);
        seen[self.reference_node] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(invalid(
                "lines",
                format!("network is not connected: node {:?} unreachable", self.nodes[i]),
            )),
            None => Ok(()),
        }
    }

    fn to_raw(&self) -> RawInstance {
        let node = |i: usize| self.nodes[i].clone();
        let mut load = Vec::new();
        for (n, row) in self.load.iter().enumerate() {
            for (t, &mw) in row.iter().enumerate() {
                if mw != 0.0 {
                    load.push(RawLoad {
                        node: node(n),
                        period: t + 1,
                        mw,
                    });
                }
            }
        }
        RawInstance {
            meta: RawMeta {
                name: self.name.clone(),
                horizon: self.horizon,
                ref_node: node(self.reference_node),
                units: self.units.clone(),
            },
            nodes: self.nodes.clone(),
            lines: self
                .lines
                .iter()
                .map(|l| RawLine {
                    id: l.id.clone(),
                    from: node(l.from),
                    to: node(l.to),
                    susceptance: l.susceptance,
                    capacity: l.capacity,
                })
                .collect(),
            generators: self
                .generators
                .iter()
                .map(|g| RawGenerator {
                    id: g.id.clone(),
                    node: node(g.node),
                    cost: g.energy_cost,
                    startup_cost: g.startup_cost,
                    reserve_up_cost: g.reserve_up_cost,
                    reserve_down_cost: g.reserve_down_cost,
                    deploy_up_price: g.deploy_up_price,
                    deploy_down_price: g.deploy_down_price,
                    p_min: g.p_min,
                    p_max: g.p_max,
                    ramp_up: g.ramp_up,
                    ramp_down: g.ramp_down,
                    reserve_up_max: g.reserve_up_max,
                    reserve_down_max: g.reserve_down_max,
                    min_up: g.min_up,
                    min_down: g.min_down,
                    u0: g.initial_status() as u8,
                    initial_on_periods: g.initial_on_periods,
                    initial_off_periods: g.initial_off_periods,
                })
                .collect(),
            wind_farms: self
                .wind_farms
                .iter()
                .map(|w| RawWindFarm {
                    id: w.id.clone(),
                    node: node(w.node),
                    capacity: w.capacity,
                })
                .collect(),
            load,
            shed_cost: self.shed_cost,
        }
    }
}

/// Reads and validates an instance file.
pub fn load_instance(path: impl AsRef<Path>) -> Result<SystemInstance, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    SystemInstance::from_json_str(&text)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    meta: RawMeta,
    nodes: Vec<String>,
    #[serde(default)]
    lines: Vec<RawLine>,
    generators: Vec<RawGenerator>,
    #[serde(default)]
    wind_farms: Vec<RawWindFarm>,
    #[serde(default)]
    load: Vec<RawLoad>,
    shed_cost: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeta {
    name: String,
    horizon: usize,
    ref_node: String,
    #[serde(default)]
    units: Units,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    id: String,
    from: String,
    to: String,
    susceptance: f64,
    capacity: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerator {
    id: String,
    node: String,
    cost: f64,
    startup_cost: f64,
    reserve_up_cost: f64,
    reserve_down_cost: f64,
    deploy_up_price: f64,
    deploy_down_price: f64,
    p_min: f64,
    p_max: f64,
    ramp_up: f64,
    ramp_down: f64,
    reserve_up_max: f64,
    reserve_down_max: f64,
    min_up: usize,
    min_down: usize,
    u0: u8,
    initial_on_periods: usize,
    initial_off_periods: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWindFarm {
    id: String,
    node: String,
    capacity: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoad {
    node: String,
    period: usize,
    mw: f64,
}

/// Wind realizations and their probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub ids: Vec<String>,
    pub probabilities: Vec<f64>,
    /// Realized wind in MW, indexed `[scenario][farm][period]`.
    pub wind: Vec<Vec<Vec<f64>>>,
}

impl ScenarioSet {
    /// Builds a validated scenario set. `None` probabilities means equiprobable.
    pub fn new(
        instance: &SystemInstance,
        ids: Vec<String>,
        wind: Vec<Vec<Vec<f64>>>,
        probabilities: Option<Vec<f64>>,
    ) -> Result<Self, DataError> {
        if ids.is_empty() {
            return Err(DataError::DimensionMismatch("no scenarios".into()));
        }
        if wind.len() != ids.len() {
            return Err(DataError::DimensionMismatch(format!(
                "{} scenario ids but {} wind blocks",
                ids.len(),
                wind.len()
            )));
        }
        for (s, block) in wind.iter().enumerate() {
            if block.len() != instance.num_wind_farms() {
                return Err(DataError::DimensionMismatch(format!(
                    "scenario {:?} has {} farms, instance has {}",
                    ids[s],
                    block.len(),
                    instance.num_wind_farms()
                )));
            }
            for (j, series) in block.iter().enumerate() {
                if series.len() != instance.horizon {
                    return Err(DataError::DimensionMismatch(format!(
                        "scenario {:?}, farm {:?}: {} periods, horizon is {}",
                        ids[s],
                        instance.wind_farms[j].id,
                        series.len(),
                        instance.horizon
                    )));
                }
                let cap = instance.wind_farms[j].capacity;
                for (t, &v) in series.iter().enumerate() {
                    if !(v >= 0.0 && v <= cap) {
                        return Err(DataError::CapacityExceeded {
                            scenario: ids[s].clone(),
                            farm: instance.wind_farms[j].id.clone(),
                            period: t + 1,
                            value: v,
                            capacity: cap,
                        });
                    }
                }
            }
        }
        let probabilities = match probabilities {
            None => vec![1.0 / ids.len() as f64; ids.len()],
            Some(p) => {
                if p.len() != ids.len() {
                    return Err(DataError::DimensionMismatch(format!(
                        "{} probabilities for {} scenarios",
                        p.len(),
                        ids.len()
                    )));
                }
                if let Some(i) = p.iter().position(|&v| !(v > 0.0)) {
                    return Err(invalid(
                        format!("probability[{}]", ids[i]),
                        "probabilities must be positive",
                    ));
                }
                let sum: f64 = p.iter().sum();
                if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                    return Err(DataError::ProbabilitySum { sum });
                }
                p
            }
        };
        Ok(ScenarioSet {
            ids,
            probabilities,
            wind,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Flattened `[farm][period]` realization of one scenario.
    pub fn feature_row(&self, scenario: usize) -> Vec<f64> {
        self.wind[scenario].iter().flatten().copied().collect()
    }

    /// Restriction to `members` with probabilities renormalized to sum to one.
    pub fn subset(&self, members: &[usize]) -> ScenarioSet {
        let total: f64 = members.iter().map(|&s| self.probabilities[s]).sum();
        ScenarioSet {
            ids: members.iter().map(|&s| self.ids[s].clone()).collect(),
            probabilities: members
                .iter()
                .map(|&s| self.probabilities[s] / total)
                .collect(),
            wind: members.iter().map(|&s| self.wind[s].clone()).collect(),
        }
    }

    pub fn to_csv_string(&self, instance: &SystemInstance) -> String {
        let mut out = String::from("scenario,farm,period,value_mw,probability\n");
        for (s, id) in self.ids.iter().enumerate() {
            let mut first = true;
            for (j, farm) in instance.wind_farms.iter().enumerate() {
                for t in 0..instance.horizon {
                    let prob = if first {
                        format!("{}", self.probabilities[s])
                    } else {
                        String::new()
                    };
                    first = false;
                    out.push_str(&format!(
                        "{id},{},{},{},{prob}\n",
                        farm.id,
                        t + 1,
                        self.wind[s][j][t]
                    ));
                }
            }
        }
        out
    }

    pub fn from_csv_str(text: &str, instance: &SystemInstance) -> Result<Self, DataError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| DataError::Parse(e.to_string()))?
            .clone();
        let column = |name: &str| headers.iter().position(|h| h == name);
        let (Some(c_scen), Some(c_farm), Some(c_period), Some(c_value)) = (
            column("scenario"),
            column("farm"),
            column("period"),
            column("value_mw"),
        ) else {
            return Err(DataError::Parse(
                "header must contain scenario,farm,period,value_mw".into(),
            ));
        };
        let c_prob = column("probability");

        let farm_index: HashMap<&str, usize> = instance
            .wind_farms
            .iter()
            .enumerate()
            .map(|(i, w)| (w.id.as_str(), i))
            .collect();
        let mut order: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut values: Vec<BTreeMap<(usize, usize), f64>> = Vec::new();
        let mut probs: Vec<Option<f64>> = Vec::new();

        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| DataError::Parse(e.to_string()))?;
            let row = line + 2;
            let field = |c: usize| record.get(c).unwrap_or("");
            let scen = field(c_scen).to_string();
            let s = *index.entry(scen.clone()).or_insert_with(|| {
                order.push(scen.clone());
                values.push(BTreeMap::new());
                probs.push(None);
                order.len() - 1
            });
            let farm = field(c_farm);
            let j = *farm_index.get(farm).ok_or_else(|| {
                DataError::DimensionMismatch(format!("row {row}: unknown wind farm {farm:?}"))
            })?;
            let period: usize = field(c_period)
                .parse()
                .map_err(|_| DataError::Parse(format!("row {row}: bad period")))?;
            if period < 1 || period > instance.horizon {
                return Err(DataError::DimensionMismatch(format!(
                    "row {row}: period {period} outside 1..={}",
                    instance.horizon
                )));
            }
            let value: f64 = field(c_value)
                .parse()
                .map_err(|_| DataError::Parse(format!("row {row}: bad value_mw")))?;
            if values[s].insert((j, period - 1), value).is_some() {
                return Err(DataError::DimensionMismatch(format!(
                    "row {row}: duplicate entry for scenario {scen:?}, farm {farm:?}, period {period}"
                )));
            }
            if let Some(c) = c_prob {
                let text = field(c);
                if !text.is_empty() {
                    let p: f64 = text
                        .parse()
                        .map_err(|_| DataError::Parse(format!("row {row}: bad probability")))?;
                    match probs[s] {
                        Some(prev) if prev != p => {
                            return Err(DataError::Parse(format!(
                                "row {row}: conflicting probability for scenario {scen:?}"
                            )))
                        }
                        _ => probs[s] = Some(p),
                    }
                }
            }
        }

        let expected = instance.num_wind_farms() * instance.horizon;
        let mut wind = Vec::with_capacity(order.len());
        for (s, map) in values.iter().enumerate() {
            if map.len() != expected {
                return Err(DataError::DimensionMismatch(format!(
                    "scenario {:?} has {} farm-period values, expected {expected}",
                    order[s],
                    map.len()
                )));
            }
            let mut block = vec![vec![0.0; instance.horizon]; instance.num_wind_farms()];
            for (&(j, t), &v) in map {
                block[j][t] = v;
            }
            wind.push(block);
        }

        let probabilities = if probs.iter().all(Option::is_none) {
            None
        } else if probs.iter().all(Option::is_some) {
            Some(probs.into_iter().map(Option::unwrap).collect())
        } else {
            return Err(DataError::Parse(
                "probability column must be filled for every scenario or none".into(),
            ));
        };
        ScenarioSet::new(instance, order, wind, probabilities)
    }
}

/// Reads and validates a scenario CSV against `instance`.
pub fn load_scenarios(
    path: impl AsRef<Path>,
    instance: &SystemInstance,
) -> Result<ScenarioSet, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioSet::from_csv_str(&text, instance)
}
