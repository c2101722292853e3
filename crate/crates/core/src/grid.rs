//! Static grid description, operating snapshots and the JSON case format.
//!
//! A case file is a single JSON document:
//!
//! ```text
//! { "version": 1, "slack_bus": 0,
//!   "buses":      [{"id": 0, "load_mw": 0.0}, ...],
//!   "branches":   [{"id": 0, "from": 0, "to": 1, "x_pu": 0.1, "limit_mw": 150.0}, ...],
//!   "generators": [{"id": 0, "bus": 0, "pmax_mw": 200.0, "pmin_mw": 0.0, "cost": 1.0}, ...] }
//! ```
//!
//! Unknown keys are rejected. `pmin_mw` defaults to 0 and `cost` to 1.0.
//! All powers are MW on a fixed 100 MVA base.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// System MVA base used for the per-unit reactances.
pub const BASE_MVA: f64 = 100.0;

/// Generator cost used when a case file omits it.
pub const DEFAULT_GEN_COST: f64 = 1.0;

const CASE_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseError {
    #[error("case syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid case: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, CaseError> {
    Err(CaseError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: usize,
    /// MW, before any scaling.
    pub base_load: f64,
    /// Ids of the generators connected at this bus.
    pub generators: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: usize,
    pub from_bus: usize,
    pub to_bus: usize,
    /// Series reactance in per unit.
    pub reactance: f64,
    /// Long-term flow limit in MW.
    pub flow_limit: f64,
}

impl Branch {
    pub fn touches(&self, bus: usize) -> bool {
        self.from_bus == bus || self.to_bus == bus
    }

    pub fn shares_bus_with(&self, other: &Branch) -> bool {
        self.touches(other.from_bus) || self.touches(other.to_bus)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub id: usize,
    pub bus: usize,
    pub capacity_max: f64,
    pub capacity_min: f64,
    /// $/MWh.
    pub cost: f64,
}

/// Immutable grid description. Construct through [`Network::new`] or
/// [`parse_case`] so that every invariant has been checked.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    generators: Vec<Generator>,
    slack_bus: usize,
}

impl Network {
    /// Builds and validates a network. Bus generator lists are rebuilt from
    /// the generator table, so callers may leave them empty.
    pub fn new(
        mut buses: Vec<Bus>,
        branches: Vec<Branch>,
        generators: Vec<Generator>,
        slack_bus: usize,
    ) -> Result<Self, CaseError> {
        if buses.is_empty() {
            return invalid("network has no buses");
        }
        for (i, bus) in buses.iter().enumerate() {
            if bus.id != i {
                return invalid(format!("bus ids must be dense 0..{}; found {} at position {i}", buses.len() - 1, bus.id));
            }
            if !(bus.base_load.is_finite() && bus.base_load >= 0.0) {
                return invalid(format!("bus {i}: load must be >= 0"));
            }
        }
        let n = buses.len();
        if slack_bus >= n {
            return invalid(format!("slack bus {slack_bus} does not exist"));
        }
        for (i, br) in branches.iter().enumerate() {
            if br.id != i {
                return invalid(format!("branch ids must be dense 0..{}; found {} at position {i}", branches.len().saturating_sub(1), br.id));
            }
            if br.from_bus >= n || br.to_bus >= n {
                return invalid(format!("branch {i}: endpoint bus does not exist"));
            }
            if br.from_bus == br.to_bus {
                return invalid(format!("branch {i}: from and to bus must differ"));
            }
            if !(br.reactance.is_finite() && br.reactance > 0.0) {
                return invalid(format!("branch {i}: reactance must be > 0"));
            }
            if !(br.flow_limit.is_finite() && br.flow_limit > 0.0) {
                return invalid(format!("branch {i}: flow limit must be > 0"));
            }
        }
        for bus in buses.iter_mut() {
            bus.generators.clear();
        }
        for (i, g) in generators.iter().enumerate() {
            if g.id != i {
                return invalid(format!("generator ids must be dense; found {} at position {i}", g.id));
            }
            if g.bus >= n {
                return invalid(format!("generator {i}: bus {} does not exist", g.bus));
            }
            if !(g.capacity_max.is_finite() && g.capacity_max > 0.0) {
                return invalid(format!("generator {i}: pmax must be > 0"));
            }
            if !(g.capacity_min.is_finite() && g.capacity_min >= 0.0) {
                return invalid(format!("generator {i}: pmin must be >= 0"));
            }
            if g.capacity_min > g.capacity_max {
                return invalid(format!("generator {i}: pmin must not exceed pmax"));
            }
            if !(g.cost.is_finite() && g.cost >= 0.0) {
                return invalid(format!("generator {i}: cost must be >= 0"));
            }
            buses[g.bus].generators.push(i);
        }
        let all = vec![true; branches.len()];
        if crate::powerflow::islands(n, &branches, &all).count() != 1 {
            return invalid("network graph is disconnected");
        }
        Ok(Network {
            buses,
            branches,
            generators,
            slack_bus,
        })
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn slack_bus(&self) -> usize {
        self.slack_bus
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn base_loads(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.base_load).collect()
    }

    pub fn total_base_load(&self) -> f64 {
        self.buses.iter().map(|b| b.base_load).sum()
    }

    pub fn total_capacity(&self) -> f64 {
        self.generators.iter().map(|g| g.capacity_max).sum()
    }

    /// Copy of this network with a new per-branch limit vector.
    pub fn with_flow_limits(&self, limits: &[f64]) -> Result<Network, CaseError> {
        if limits.len() != self.branches.len() {
            return invalid("flow limit vector has the wrong length");
        }
        let mut branches = self.branches.clone();
        for (br, &lim) in branches.iter_mut().zip(limits) {
            br.flow_limit = lim;
        }
        Network::new(self.buses.clone(), branches, self.generators.clone(), self.slack_bus)
    }
}

/// A dispatch snapshot owned by one cascade run.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingState {
    pub in_service: Vec<bool>,
    /// Served load per bus, MW.
    pub load: Vec<f64>,
    pub gen_output: Vec<f64>,
    /// Signed branch flow, MW, positive from `from_bus` to `to_bus`.
    pub flow: Vec<f64>,
    /// Cumulative load shed since the initial dispatch, MW.
    pub shed_so_far: f64,
}

impl OperatingState {
    /// All branches in service, no generation and no flows.
    pub fn idle(net: &Network, load: Vec<f64>) -> Self {
        OperatingState {
            in_service: vec![true; net.n_branches()],
            load,
            gen_output: vec![0.0; net.generators().len()],
            flow: vec![0.0; net.n_branches()],
            shed_so_far: 0.0,
        }
    }

    pub fn n_out_of_service(&self) -> usize {
        self.in_service.iter().filter(|s| !**s).count()
    }

    /// Net injection (generation minus load) per bus, MW.
    pub fn injections(&self, net: &Network) -> Vec<f64> {
        let mut inj: Vec<f64> = self.load.iter().map(|l| -l).collect();
        for (g, p) in net.generators().iter().zip(&self.gen_output) {
            inj[g.bus] += p;
        }
        inj
    }
}

/// Multiplies every bus load by `factor_global` and its own per-bus factor.
pub fn scale_loads(net: &Network, factor_global: f64, factors_per_bus: &[f64]) -> Result<Network, CaseError> {
    if factors_per_bus.len() != net.n_buses() {
        return invalid(format!(
            "expected {} per-bus load factors, got {}",
            net.n_buses(),
            factors_per_bus.len()
        ));
    }
    if !(factor_global.is_finite() && factor_global > 0.0) {
        return invalid("load scaling factor must be > 0");
    }
    if let Some(i) = factors_per_bus.iter().position(|f| !(f.is_finite() && *f > 0.0)) {
        return invalid(format!("load scaling factor for bus {i} must be > 0"));
    }
    let mut out = net.clone();
    for (bus, f) in out.buses.iter_mut().zip(factors_per_bus) {
        bus.base_load *= factor_global * f;
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    version: u32,
    slack_bus: usize,
    buses: Vec<BusRecord>,
    branches: Vec<BranchRecord>,
    generators: Vec<GenRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusRecord {
    id: usize,
    load_mw: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchRecord {
    id: usize,
    from: usize,
    to: usize,
    x_pu: f64,
    limit_mw: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenRecord {
    id: usize,
    bus: usize,
    pmax_mw: f64,
    #[serde(default)]
    pmin_mw: f64,
    #[serde(default = "default_cost")]
    cost: f64,
}

fn default_cost() -> f64 {
    DEFAULT_GEN_COST
}

/// Parses and validates a JSON case file.
pub fn parse_case(text: &str) -> Result<Network, CaseError> {
    let file: CaseFile = serde_json::from_str(text).map_err(|e| CaseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.version != CASE_VERSION {
        return invalid(format!("unsupported case version {}", file.version));
    }

    let mut bus_records = file.buses;
    bus_records.sort_by_key(|b| b.id);
    let buses = bus_records
        .into_iter()
        .map(|b| Bus {
            id: b.id,
            base_load: b.load_mw,
            generators: Vec::new(),
        })
        .collect();

    let mut branch_records = file.branches;
    branch_records.sort_by_key(|b| b.id);
    let branches = branch_records
        .into_iter()
        .map(|b| Branch {
            id: b.id,
            from_bus: b.from,
            to_bus: b.to,
            reactance: b.x_pu,
            flow_limit: b.limit_mw,
        })
        .collect();

    let mut gen_records = file.generators;
    gen_records.sort_by_key(|g| g.id);
    let generators = gen_records
        .into_iter()
        .map(|g| Generator {
            id: g.id,
            bus: g.bus,
            capacity_max: g.pmax_mw,
            capacity_min: g.pmin_mw,
            cost: g.cost,
        })
        .collect();

    Network::new(buses, branches, generators, file.slack_bus)
}

/// Writes a network as a pretty-printed case file; defaults are emitted explicitly.
pub fn serialize_case(net: &Network) -> String {
    let file = CaseFile {
        version: CASE_VERSION,
        slack_bus: net.slack_bus,
        buses: net
            .buses
            .iter()
            .map(|b| BusRecord {
                id: b.id,
                load_mw: b.base_load,
            })
            .collect(),
        branches: net
            .branches
            .iter()
            .map(|b| BranchRecord {
                id: b.id,
                from: b.from_bus,
                to: b.to_bus,
                x_pu: b.reactance,
                limit_mw: b.flow_limit,
            })
            .collect(),
        generators: net
            .generators
            .iter()
            .map(|g| GenRecord {
                id: g.id,
                bus: g.bus,
                pmax_mw: g.capacity_max,
                pmin_mw: g.capacity_min,
                cost: g.cost,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("case serialization cannot fail")
}
