//! Per-island DC dispatch: the initial minimum-cost dispatch and the
//! load-shedding re-dispatch that follows every disturbance.
//!
//! Both are linear programs over generator outputs, bus shedding and branch
//! flows, with flows tied to injections through the island's PTDFs.

use thiserror::Error;

use crate::grid::Network;
use crate::lp::{LinearProgram, LpError, Relation};
use crate::powerflow::{self, nodal_reactance, NodalReactance, PowerFlowError};

/// Weight of generation cost relative to shed load in the re-dispatch objective.
pub const COST_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispatchError {
    #[error("no dispatch serves every load within branch limits")]
    InfeasibleWithNoShed,
    #[error("dispatch LP failed: {0}")]
    Lp(#[from] LpError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error("load vector has length {got}, expected {expected}")]
    Shape { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Serve all load at least cost.
    MinCost,
    /// Shed as little as possible, then minimize cost.
    MinShed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchResult {
    pub gen_output: Vec<f64>,
    /// MW shed per bus.
    pub shed: Vec<f64>,
    pub flow: Vec<f64>,
    pub objective: f64,
}

impl DispatchResult {
    pub fn total_shed(&self) -> f64 {
        self.shed.iter().sum()
    }
}

/// Minimum-cost dispatch of the intact network with no shedding.
pub fn dcopf_initial(net: &Network, loads: &[f64]) -> Result<DispatchResult, DispatchError> {
    let in_service = vec![true; net.n_branches()];
    dispatch(net, &in_service, loads, Objective::MinCost)
}

/// Minimum-shed re-dispatch of every island of the given topology.
pub fn redispatch_min_shed(net: &Network, in_service: &[bool], loads: &[f64]) -> Result<DispatchResult, DispatchError> {
    dispatch(net, in_service, loads, Objective::MinShed)
}

pub fn dispatch(net: &Network, in_service: &[bool], loads: &[f64], objective: Objective) -> Result<DispatchResult, DispatchError> {
    if loads.len() != net.n_buses() {
        return Err(DispatchError::Shape {
            got: loads.len(),
            expected: net.n_buses(),
        });
    }
    let nr = nodal_reactance(net, in_service)?;
    let mut result = DispatchResult {
        gen_output: vec![0.0; net.generators().len()],
        shed: vec![0.0; net.n_buses()],
        flow: vec![0.0; net.n_branches()],
        objective: 0.0,
    };
    for island in 0..nr.islands.count() {
        let problem = IslandProblem::new(net, in_service, &nr, island, loads, objective);
        let obj = match problem.solve(true) {
            Ok(obj) => obj,
            Err(DispatchError::InfeasibleWithNoShed) if objective == Objective::MinShed => {
                // minimum outputs cannot be absorbed; release them
                problem.solve(false)?
            }
            Err(e) => return Err(e),
        }
        .write_into(&problem, &mut result);
        result.objective += obj;
    }
    let injections: Vec<f64> = {
        let mut inj: Vec<f64> = loads.iter().zip(&result.shed).map(|(l, s)| s - l).collect();
        for (g, p) in net.generators().iter().zip(&result.gen_output) {
            inj[g.bus] += p;
        }
        inj
    };
    result.flow = powerflow::solve_injections(net, in_service, &injections)?.flow;
    Ok(result)
}

struct IslandProblem<'a> {
    net: &'a Network,
    nr: &'a NodalReactance,
    buses: Vec<usize>,
    gens: Vec<usize>,
    branches: Vec<usize>,
    loads: &'a [f64],
    objective: Objective,
}

struct IslandSolution {
    gen: Vec<f64>,
    shed: Vec<f64>,
    objective: f64,
}

impl IslandSolution {
    fn write_into(self, p: &IslandProblem, out: &mut DispatchResult) -> f64 {
        for (&g, v) in p.gens.iter().zip(&self.gen) {
            out.gen_output[g] = *v;
        }
        for (&b, v) in p.buses.iter().zip(&self.shed) {
            out.shed[b] = *v;
        }
        self.objective
    }
}

impl<'a> IslandProblem<'a> {
    fn new(
        net: &'a Network,
        in_service: &[bool],
        nr: &'a NodalReactance,
        island: usize,
        loads: &'a [f64],
        objective: Objective,
    ) -> Self {
        let buses = nr.islands.members[island].clone();
        let gens = net
            .generators()
            .iter()
            .filter(|g| nr.islands.of_bus[g.bus] == island)
            .map(|g| g.id)
            .collect();
        let branches = net
            .branches()
            .iter()
            .filter(|b| in_service[b.id] && nr.islands.of_bus[b.from_bus] == island)
            .map(|b| b.id)
            .collect();
        IslandProblem {
            net,
            nr,
            buses,
            gens,
            branches,
            loads,
            objective,
        }
    }

    fn solve(&self, honour_minimums: bool) -> Result<IslandSolution, DispatchError> {
        let total_load: f64 = self.buses.iter().map(|&b| self.loads[b]).sum();
        let gens = self.net.generators();
        if self.gens.is_empty() {
            return match self.objective {
                Objective::MinShed => Ok(IslandSolution {
                    gen: vec![],
                    shed: self.buses.iter().map(|&b| self.loads[b]).collect(),
                    objective: total_load,
                }),
                Objective::MinCost if total_load > 0.0 => Err(DispatchError::InfeasibleWithNoShed),
                Objective::MinCost => Ok(IslandSolution {
                    gen: vec![],
                    shed: vec![0.0; self.buses.len()],
                    objective: 0.0,
                }),
            };
        }

        let ng = self.gens.len();
        let nb = self.buses.len();
        let nl = self.branches.len();
        let mut lp = LinearProgram::new(ng + nb + nl);
        let (gen_var, shed_var, flow_var) = (0, ng, ng + nb);

        let mut bus_local = vec![usize::MAX; self.net.n_buses()];
        for (i, &b) in self.buses.iter().enumerate() {
            bus_local[b] = i;
        }

        for (i, &g) in self.gens.iter().enumerate() {
            let gen = &gens[g];
            let lo = if honour_minimums { gen.capacity_min } else { 0.0 };
            lp.set_bounds(gen_var + i, lo, gen.capacity_max);
            let w = match self.objective {
                Objective::MinCost => 1.0,
                Objective::MinShed => COST_EPSILON,
            };
            lp.set_cost(gen_var + i, w * gen.cost);
        }
        for (i, &b) in self.buses.iter().enumerate() {
            let cap = match self.objective {
                Objective::MinCost => 0.0,
                Objective::MinShed => self.loads[b],
            };
            lp.set_bounds(shed_var + i, 0.0, cap);
            lp.set_cost(shed_var + i, 1.0);
        }

        let mut balance: Vec<(usize, f64)> = (0..ng + nb).map(|j| (j, 1.0)).collect();
        balance.shrink_to_fit();
        lp.add_row(balance, Relation::Eq, total_load);

        let branches = self.net.branches();
        for (k, &br_id) in self.branches.iter().enumerate() {
            let br = &branches[br_id];
            let lim = br.flow_limit;
            lp.set_bounds(flow_var + k, -lim, lim);
            let ptdf: Vec<f64> = self.buses.iter().map(|&b| self.nr.ptdf(br, b)).collect();
            let mut coefs = vec![(flow_var + k, 1.0)];
            for (i, &g) in self.gens.iter().enumerate() {
                let p = ptdf[bus_local[gens[g].bus]];
                if p != 0.0 {
                    coefs.push((gen_var + i, -p));
                }
            }
            let mut rhs = 0.0;
            for (i, &b) in self.buses.iter().enumerate() {
                if ptdf[i] != 0.0 {
                    coefs.push((shed_var + i, -ptdf[i]));
                    rhs -= ptdf[i] * self.loads[b];
                }
            }
            lp.add_row(coefs, Relation::Eq, rhs);
        }

        let sol = match lp.solve() {
            Ok(sol) => sol,
            Err(LpError::Infeasible) => return Err(DispatchError::InfeasibleWithNoShed),
            Err(e) => return Err(e.into()),
        };
        let gen = sol.x[gen_var..gen_var + ng].to_vec();
        let shed: Vec<f64> = sol.x[shed_var..shed_var + nb]
            .iter()
            .map(|&s| if s < 1e-9 { 0.0 } else { s })
            .collect();
        let mut solution = IslandSolution {
            gen,
            shed,
            objective: sol.objective,
        };
        self.rebalance(&mut solution, total_load);
        Ok(solution)
    }

    /// Removes LP round-off from the island balance by nudging the generator
    /// with the most headroom in the needed direction.
    fn rebalance(&self, sol: &mut IslandSolution, total_load: f64) {
        let served = total_load - sol.shed.iter().sum::<f64>();
        let mismatch = served - sol.gen.iter().sum::<f64>();
        if mismatch == 0.0 {
            return;
        }
        let gens = self.net.generators();
        let pick = (0..sol.gen.len()).max_by(|&a, &b| {
            let room = |i: usize| {
                let g = &gens[self.gens[i]];
                if mismatch > 0.0 {
                    g.capacity_max - sol.gen[i]
                } else {
                    sol.gen[i]
                }
            };
            room(a).total_cmp(&room(b)).then(b.cmp(&a))
        });
        if let Some(i) = pick {
            sol.gen[i] += mismatch;
        }
    }
}
