//! DC power flow, island detection, nodal reactance and line outage
//! distribution factors.
//!
//! Every island is grounded at its own reference bus: the network slack bus
//! when it lies in the island, otherwise the lowest-numbered bus.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::grid::{Branch, Network, OperatingState, BASE_MVA};

/// Per-island power balance tolerance, MW.
pub const BALANCE_TOL_MW: f64 = 1e-6;

/// Threshold on `|1 - X_k^k / x_k|` below which branch `k` is a bridge.
pub const BRIDGE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerFlowError {
    #[error("island {island} is unbalanced by {imbalance_mw:.6} MW")]
    UnbalancedIsland { island: usize, imbalance_mw: f64 },
    #[error("island {island} has a singular susceptance matrix")]
    Singular { island: usize },
    #[error("injection vector has length {got}, expected {expected}")]
    Shape { got: usize, expected: usize },
}

/// Partition of buses into connected components of the in-service graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Islands {
    /// Island index of every bus.
    pub of_bus: Vec<usize>,
    /// Buses of each island, ascending. Islands are ordered by their smallest bus.
    pub members: Vec<Vec<usize>>,
}

impl Islands {
    pub fn count(&self) -> usize {
        self.members.len()
    }

    /// Island of a branch, judged by its from-bus.
    pub fn of_branch(&self, br: &Branch) -> usize {
        self.of_bus[br.from_bus]
    }
}

/// Connected components over the in-service branches.
pub fn islands(n_buses: usize, branches: &[Branch], in_service: &[bool]) -> Islands {
    let mut adj = vec![Vec::new(); n_buses];
    for (br, &on) in branches.iter().zip(in_service) {
        if on {
            adj[br.from_bus].push(br.to_bus);
            adj[br.to_bus].push(br.from_bus);
        }
    }
    let mut of_bus = vec![usize::MAX; n_buses];
    let mut members = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n_buses {
        if of_bus[start] != usize::MAX {
            continue;
        }
        let id = members.len();
        let mut group = vec![start];
        of_bus[start] = id;
        stack.push(start);
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if of_bus[v] == usize::MAX {
                    of_bus[v] = id;
                    group.push(v);
                    stack.push(v);
                }
            }
        }
        group.sort_unstable();
        members.push(group);
    }
    Islands { of_bus, members }
}

/// Reference bus used to ground an island.
pub fn island_reference(net: &Network, members: &[usize]) -> usize {
    if members.contains(&net.slack_bus()) {
        net.slack_bus()
    } else {
        members[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcSolution {
    /// Radians; zero at each island's reference bus.
    pub angles: Vec<f64>,
    /// MW per branch, zero when out of service.
    pub flow: Vec<f64>,
    pub islands: Islands,
}

/// Solves the DC power flow for the injections implied by `state`.
pub fn solve_dcpf(net: &Network, state: &OperatingState) -> Result<DcSolution, PowerFlowError> {
    solve_injections(net, &state.in_service, &state.injections(net))
}

/// Solves the DC power flow for explicit bus injections (MW, generation positive).
pub fn solve_injections(net: &Network, in_service: &[bool], injections_mw: &[f64]) -> Result<DcSolution, PowerFlowError> {
    let n = net.n_buses();
    if injections_mw.len() != n {
        return Err(PowerFlowError::Shape {
            got: injections_mw.len(),
            expected: n,
        });
    }
    let isl = islands(n, net.branches(), in_service);
    let mut angles = vec![0.0; n];
    for (id, members) in isl.members.iter().enumerate() {
        let imbalance: f64 = members.iter().map(|&b| injections_mw[b]).sum();
        if imbalance.abs() > BALANCE_TOL_MW {
            return Err(PowerFlowError::UnbalancedIsland {
                island: id,
                imbalance_mw: imbalance,
            });
        }
        if members.len() == 1 {
            continue;
        }
        let grounded = GroundedIsland::new(net, in_service, &isl, id)?;
        let rhs = DVector::from_iterator(
            grounded.free.len(),
            grounded.free.iter().map(|&b| injections_mw[b] / BASE_MVA),
        );
        let theta = grounded.factor.solve(&rhs);
        for (local, &bus) in grounded.free.iter().enumerate() {
            angles[bus] = theta[local];
        }
    }
    let flow = branch_flows(net, in_service, &angles);
    Ok(DcSolution {
        angles,
        flow,
        islands: isl,
    })
}

/// Branch flows in MW from bus angles.
pub fn branch_flows(net: &Network, in_service: &[bool], angles: &[f64]) -> Vec<f64> {
    net.branches()
        .iter()
        .zip(in_service)
        .map(|(br, &on)| {
            if on {
                (angles[br.from_bus] - angles[br.to_bus]) / br.reactance * BASE_MVA
            } else {
                0.0
            }
        })
        .collect()
}

/// Cholesky factor of one island's susceptance matrix with the reference
/// row and column removed.
struct GroundedIsland {
    free: Vec<usize>,
    factor: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl GroundedIsland {
    fn new(net: &Network, in_service: &[bool], isl: &Islands, id: usize) -> Result<Self, PowerFlowError> {
        let members = &isl.members[id];
        let reference = island_reference(net, members);
        let free: Vec<usize> = members.iter().copied().filter(|&b| b != reference).collect();
        let mut local = vec![usize::MAX; net.n_buses()];
        for (i, &b) in free.iter().enumerate() {
            local[b] = i;
        }
        let m = free.len();
        let mut b = DMatrix::<f64>::zeros(m, m);
        for (br, &on) in net.branches().iter().zip(in_service) {
            if !on || isl.of_bus[br.from_bus] != id {
                continue;
            }
            let y = 1.0 / br.reactance;
            let (i, j) = (local[br.from_bus], local[br.to_bus]);
            if i != usize::MAX {
                b[(i, i)] += y;
            }
            if j != usize::MAX {
                b[(j, j)] += y;
            }
            if i != usize::MAX && j != usize::MAX {
                b[(i, j)] -= y;
                b[(j, i)] -= y;
            }
        }
        let factor = b.cholesky().ok_or(PowerFlowError::Singular { island: id })?;
        Ok(GroundedIsland { free, factor })
    }
}

/// Slack-grounded nodal reactance matrix, block diagonal over islands.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalReactance {
    /// N x N, per unit. Rows and columns of each island's reference bus are zero,
    /// and entries across islands are zero.
    pub x: DMatrix<f64>,
    pub islands: Islands,
}

/// Inverts each island's grounded susceptance matrix.
pub fn nodal_reactance(net: &Network, in_service: &[bool]) -> Result<NodalReactance, PowerFlowError> {
    let n = net.n_buses();
    let isl = islands(n, net.branches(), in_service);
    let mut x = DMatrix::<f64>::zeros(n, n);
    for id in 0..isl.count() {
        if isl.members[id].len() == 1 {
            continue;
        }
        let grounded = GroundedIsland::new(net, in_service, &isl, id)?;
        let inv = grounded.factor.inverse();
        for (a, &ba) in grounded.free.iter().enumerate() {
            for (b, &bb) in grounded.free.iter().enumerate() {
                x[(ba, bb)] = inv[(a, b)];
            }
        }
    }
    // symmetrize away round-off from the triangular solves
    let x = (&x + x.transpose()) * 0.5;
    Ok(NodalReactance { x, islands: isl })
}

impl NodalReactance {
    /// `M_m^T X M_k` for branches `m` and `k`.
    pub fn transfer(&self, bm: &Branch, bk: &Branch) -> f64 {
        let x = &self.x;
        x[(bm.from_bus, bk.from_bus)] - x[(bm.from_bus, bk.to_bus)] - x[(bm.to_bus, bk.from_bus)]
            + x[(bm.to_bus, bk.to_bus)]
    }

    /// Flow on `br` (MW) per MW injected at `bus` and withdrawn at the island reference.
    pub fn ptdf(&self, br: &Branch, bus: usize) -> f64 {
        (self.x[(br.from_bus, bus)] - self.x[(br.to_bus, bus)]) / br.reactance
    }
}

/// Line outage distribution factors for one topology.
#[derive(Debug, Clone, PartialEq)]
pub struct LodfTable {
    pub nodal_reactance: NodalReactance,
    /// `d[(m, k)]`: extra flow on `m`, as a fraction of the pre-outage flow on `k`,
    /// after `k` is opened. Zero for out-of-service branches, bridge columns and
    /// pairs in different islands; `d[(k, k)] = -1` for in-service non-bridges.
    pub d: DMatrix<f64>,
    pub bridge: Vec<bool>,
    /// `1 - X_k^k / x_k` per branch (0 when out of service).
    pub denominator: Vec<f64>,
    pub in_service: Vec<bool>,
}

pub fn lodf(net: &Network, in_service: &[bool]) -> Result<LodfTable, PowerFlowError> {
    let nr = nodal_reactance(net, in_service)?;
    let branches = net.branches();
    let l = branches.len();
    let mut d = DMatrix::<f64>::zeros(l, l);
    let mut bridge = vec![false; l];
    let mut denominator = vec![0.0; l];
    for k in 0..l {
        if !in_service[k] {
            continue;
        }
        let bk = &branches[k];
        let den = 1.0 - nr.transfer(bk, bk) / bk.reactance;
        denominator[k] = den;
        if den.abs() < BRIDGE_TOL {
            bridge[k] = true;
            continue;
        }
        for m in 0..l {
            if !in_service[m] {
                continue;
            }
            d[(m, k)] = if m == k {
                -1.0
            } else {
                let bm = &branches[m];
                nr.transfer(bm, bk) / bm.reactance / den
            };
        }
    }
    Ok(LodfTable {
        nodal_reactance: nr,
        d,
        bridge,
        denominator,
        in_service: in_service.to_vec(),
    })
}

impl LodfTable {
    /// Predicted flows after opening non-bridge branch `k`.
    pub fn post_outage_flows(&self, flow: &[f64], k: usize) -> Vec<f64> {
        flow.iter()
            .enumerate()
            .map(|(m, &f)| if m == k || !self.in_service[m] { 0.0 } else { f + self.d[(m, k)] * flow[k] })
            .collect()
    }
}

/// Physical vulnerability `y^P` of every branch.
///
/// For in-service `k` this is the worst post-outage loading ratio
/// `|L_m + D_m^k L_k| / L_m^max` over the other in-service branches, or `beta`
/// when `k` is a bridge. Out-of-service branches get `-inf`.
pub fn physical_vulnerability(net: &Network, state: &OperatingState, table: &LodfTable, beta: f64) -> Vec<f64> {
    let branches = net.branches();
    (0..branches.len())
        .map(|k| {
            if !state.in_service[k] {
                return f64::NEG_INFINITY;
            }
            if table.bridge[k] {
                return beta;
            }
            let lk = state.flow[k];
            branches
                .iter()
                .enumerate()
                .filter(|(m, _)| *m != k && state.in_service[*m])
                .map(|(m, bm)| (state.flow[m] + table.d[(m, k)] * lk).abs() / bm.flow_limit)
                .fold(0.0, f64::max)
        })
        .collect()
}
