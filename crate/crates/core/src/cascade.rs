//! OPA-style cascade simulation: a random branch outage followed by relay
//! trips to a fixpoint, islanding, and a minimum-shed re-dispatch.
//!
//! The random-outage tree is explored depth first up to `R` outages; one
//! *attempt* is one call to [`propagate`] on a candidate branch. Relay trips
//! inside a propagation are not counted.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dispatch::{self, DispatchError};
use crate::grid::{Network, OperatingState};
use crate::powerflow::{islands, solve_dcpf, BALANCE_TOL_MW};
use crate::DEFAULT_BETA;

/// Shedding below this many MW is treated as none.
pub const SHED_TOL_MW: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RelayMode {
    /// Trip every branch above the threshold after each power flow.
    #[default]
    Simultaneous,
    /// Trip only the most overloaded branch (lowest id on ties).
    SequentialWorstFirst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeConfig {
    /// Relay threshold as a multiple of the long-term flow limit.
    pub beta: f64,
    pub relay_mode: RelayMode,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            beta: DEFAULT_BETA,
            relay_mode: RelayMode::Simultaneous,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    RandomOutage,
    RelayTrip,
    IslandShed,
    Redispatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeEvent {
    pub kind: EventKind,
    pub branch: Option<usize>,
    pub shed_mw: f64,
}

impl CascadeEvent {
    fn new(kind: EventKind, branch: Option<usize>, shed_mw: f64) -> Self {
        CascadeEvent { kind, branch, shed_mw }
    }
}

/// One node of the random-outage tree.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadePath {
    pub random_outages: Vec<usize>,
    /// Events of every propagation along the path, in order.
    pub events: Vec<CascadeEvent>,
    /// Sum of `shed_mw` over `events`.
    pub total_shed: f64,
    pub final_state: OperatingState,
}

impl CascadePath {
    /// Load shed by the last random outage and everything it triggered.
    pub fn last_step_shed(&self) -> f64 {
        let start = self
            .events
            .iter()
            .rposition(|e| e.kind == EventKind::RandomOutage)
            .unwrap_or(0);
        self.events[start..].iter().map(|e| e.shed_mw).sum()
    }

    /// Whether the last outage of this path caused load shedding.
    pub fn sheds(&self) -> bool {
        self.last_step_shed() > SHED_TOL_MW
    }

    pub fn to_record(&self) -> PathRecord {
        PathRecord {
            outages: self.random_outages.clone(),
            events: self.events.clone(),
            total_shed: self.total_shed,
        }
    }
}

/// JSON-lines form of a [`CascadePath`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathRecord {
    pub outages: Vec<usize>,
    pub events: Vec<CascadeEvent>,
    pub total_shed: f64,
}

/// Serializes paths as JSON lines.
pub fn write_paths_jsonl(paths: &[CascadePath]) -> String {
    let mut out = String::new();
    for p in paths {
        out.push_str(&serde_json::to_string(&p.to_record()).expect("path record serializes"));
        out.push('\n');
    }
    out
}

pub fn read_paths_jsonl(text: &str) -> Result<Vec<PathRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Operating point before any random outage: the minimum-cost dispatch, or
/// the minimum-shed dispatch when no shed-free one exists.
pub fn initial_state(net: &Network, loads: &[f64]) -> Result<OperatingState, DispatchError> {
    let mut state = OperatingState::idle(net, loads.to_vec());
    let r = match dispatch::dcopf_initial(net, loads) {
        Ok(r) => r,
        Err(DispatchError::InfeasibleWithNoShed) => dispatch::redispatch_min_shed(net, &state.in_service, loads)?,
        Err(e) => return Err(e),
    };
    for (l, s) in state.load.iter_mut().zip(&r.shed) {
        *l -= s;
    }
    state.shed_so_far = r.total_shed();
    state.gen_output = r.gen_output;
    state.flow = r.flow;
    Ok(state)
}

/// Opens `branch` and runs relay trips, islanding and re-dispatch.
pub fn propagate(
    net: &Network,
    state: &OperatingState,
    branch: usize,
    cfg: &CascadeConfig,
) -> Result<(OperatingState, Vec<CascadeEvent>), DispatchError> {
    assert!(state.in_service[branch], "branch {branch} is already out of service");
    let mut next = state.clone();
    let mut events = vec![CascadeEvent::new(EventKind::RandomOutage, Some(branch), 0.0)];
    next.in_service[branch] = false;

    loop {
        balance_islands(net, &mut next, &mut events);
        next.flow = solve_dcpf(net, &next)?.flow;
        let ratio = |k: usize| next.flow[k].abs() / net.branches()[k].flow_limit;
        let over: Vec<usize> = (0..net.n_branches())
            .filter(|&k| next.in_service[k] && ratio(k) > cfg.beta)
            .collect();
        if over.is_empty() {
            break;
        }
        let trips = match cfg.relay_mode {
            RelayMode::Simultaneous => over,
            RelayMode::SequentialWorstFirst => {
                let worst = over
                    .iter()
                    .copied()
                    .fold(over[0], |w, k| if ratio(k) > ratio(w) { k } else { w });
                vec![worst]
            }
        };
        for k in trips {
            next.in_service[k] = false;
            events.push(CascadeEvent::new(EventKind::RelayTrip, Some(k), 0.0));
        }
    }

    let r = dispatch::redispatch_min_shed(net, &next.in_service, &next.load)?;
    let shed = r.total_shed();
    for (l, s) in next.load.iter_mut().zip(&r.shed) {
        *l = (*l - s).max(0.0);
    }
    next.gen_output = r.gen_output;
    next.flow = r.flow;
    events.push(CascadeEvent::new(EventKind::Redispatch, None, shed));

    let step: f64 = events.iter().map(|e| e.shed_mw).sum();
    next.shed_so_far += step;
    Ok((next, events))
}

/// Restores per-island balance after a topology change: islands without
/// generation lose all load; elsewhere generation follows load, shedding the
/// part that exceeds the island's capacity.
fn balance_islands(net: &Network, state: &mut OperatingState, events: &mut Vec<CascadeEvent>) {
    let isl = islands(net.n_buses(), net.branches(), &state.in_service);
    let gens = net.generators();
    for (id, members) in isl.members.iter().enumerate() {
        let island_gens: Vec<usize> = gens.iter().filter(|g| isl.of_bus[g.bus] == id).map(|g| g.id).collect();
        let load: f64 = members.iter().map(|&b| state.load[b]).sum();
        let generation: f64 = island_gens.iter().map(|&g| state.gen_output[g]).sum();
        if (generation - load).abs() <= BALANCE_TOL_MW * 1e-3 {
            continue;
        }
        let capacity: f64 = island_gens.iter().map(|&g| gens[g].capacity_max).sum();
        let mut target = load;
        if load > capacity {
            let keep = capacity / load;
            let mut shed = 0.0;
            for &b in members {
                let served = state.load[b] * keep;
                shed += state.load[b] - served;
                state.load[b] = served;
            }
            target = capacity;
            if shed > SHED_TOL_MW {
                events.push(CascadeEvent::new(EventKind::IslandShed, None, shed));
            }
        }
        if island_gens.is_empty() {
            continue;
        }
        if target >= generation {
            let headroom: f64 = island_gens.iter().map(|&g| gens[g].capacity_max - state.gen_output[g]).sum();
            if headroom > 0.0 {
                let rise = target - generation;
                for &g in &island_gens {
                    state.gen_output[g] += rise * (gens[g].capacity_max - state.gen_output[g]) / headroom;
                }
            }
        } else {
            let scale = target / generation;
            for &g in &island_gens {
                state.gen_output[g] *= scale;
            }
        }
    }
}

/// Produces the order in which branches are tried from a state.
pub trait BranchOrder {
    fn order(&mut self, net: &Network, state: &OperatingState) -> Vec<usize>;
}

impl<F> BranchOrder for F
where
    F: FnMut(&Network, &OperatingState) -> Vec<usize>,
{
    fn order(&mut self, net: &Network, state: &OperatingState) -> Vec<usize> {
        self(net, state)
    }
}

/// In-service branches by ascending id.
pub fn natural_order(_: &Network, state: &OperatingState) -> Vec<usize> {
    (0..state.in_service.len()).filter(|&k| state.in_service[k]).collect()
}

/// Outcome of exploring the random-outage tree.
#[derive(Debug, Clone)]
pub struct Exploration {
    /// Every leaf and every shedding node, in discovery order.
    pub paths: Vec<CascadePath>,
    pub attempts: usize,
    pub root: OperatingState,
}

impl Exploration {
    pub fn shedding_paths(&self) -> impl Iterator<Item = &CascadePath> {
        self.paths.iter().filter(|p| p.sheds())
    }

    pub fn shedding_set(&self) -> HashSet<Vec<usize>> {
        self.shedding_paths().map(|p| p.random_outages.clone()).collect()
    }
}

/// Depth-first explorer with an optional attempt budget.
pub struct Explorer<'a> {
    net: &'a Network,
    cfg: CascadeConfig,
    max_outages: usize,
    budget: Option<usize>,
    attempts: usize,
    expanded: HashSet<Vec<usize>>,
    paths: Vec<CascadePath>,
}

impl<'a> Explorer<'a> {
    pub fn new(net: &'a Network, max_outages: usize, budget: Option<usize>, cfg: CascadeConfig) -> Self {
        Explorer {
            net,
            cfg,
            max_outages,
            budget,
            attempts: 0,
            expanded: HashSet::new(),
            paths: Vec::new(),
        }
    }

    /// Explores from `root`; `on_attempt` sees every propagated node.
    pub fn run(
        mut self,
        root: OperatingState,
        order: &mut dyn BranchOrder,
        on_attempt: &mut dyn FnMut(usize, &CascadePath),
    ) -> Result<Exploration, DispatchError> {
        let root_path = CascadePath {
            random_outages: vec![],
            events: vec![],
            total_shed: 0.0,
            final_state: root.clone(),
        };
        self.expand(&root_path, order, on_attempt)?;
        Ok(Exploration {
            paths: self.paths,
            attempts: self.attempts,
            root,
        })
    }

    fn exhausted(&self) -> bool {
        self.budget.is_some_and(|b| self.attempts >= b)
    }

    fn expand(
        &mut self,
        node: &CascadePath,
        order: &mut dyn BranchOrder,
        on_attempt: &mut dyn FnMut(usize, &CascadePath),
    ) -> Result<(), DispatchError> {
        if node.random_outages.len() >= self.max_outages || !self.expanded.insert(node.random_outages.clone()) {
            return Ok(());
        }
        let state = &node.final_state;
        for k in order.order(self.net, state) {
            if self.exhausted() {
                return Ok(());
            }
            if !state.in_service[k] {
                continue;
            }
            self.attempts += 1;
            let (next, events) = propagate(self.net, state, k, &self.cfg)?;
            let mut outages = node.random_outages.clone();
            outages.push(k);
            let mut all_events = node.events.clone();
            all_events.extend(events);
            let child = CascadePath {
                random_outages: outages,
                total_shed: all_events.iter().map(|e| e.shed_mw).sum(),
                events: all_events,
                final_state: next,
            };
            on_attempt(self.attempts, &child);
            let leaf = child.random_outages.len() >= self.max_outages;
            if leaf || child.sheds() {
                self.paths.push(child.clone());
            }
            if !leaf {
                self.expand(&child, order, on_attempt)?;
            }
        }
        Ok(())
    }
}

/// Runs the full OPA exploration with up to `max_outages` random failures.
pub fn run_opa(
    net: &Network,
    initial_loads: &[f64],
    max_outages: usize,
    order: &mut dyn BranchOrder,
    cfg: &CascadeConfig,
) -> Result<Exploration, DispatchError> {
    let root = initial_state(net, initial_loads)?;
    Explorer::new(net, max_outages, None, *cfg).run(root, order, &mut |_, _| {})
}
