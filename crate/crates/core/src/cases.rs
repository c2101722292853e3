//! Built-in cases and a seeded synthetic grid generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{parse_case, Branch, Bus, Generator, Network, OperatingState};
use crate::powerflow;

/// Four buses: a triangle 0-1-2 fed by one 200 MW unit at bus 0, and a
/// radial branch 2-3 serving 100 MW.
pub const TOY4_JSON: &str = include_str!("../data/toy4.json");

/// IEEE RTS-79: 24 buses, 38 branches, 2850 MW peak load, 3405 MW installed.
/// Identical units at a bus are aggregated.
pub const RTS79_JSON: &str = include_str!("../data/rts79.json");

pub fn toy4() -> Network {
    parse_case(TOY4_JSON).expect("built-in toy4 case is valid")
}

pub fn rts79() -> Network {
    parse_case(RTS79_JSON).expect("built-in RTS-79 case is valid")
}

/// Resolves `builtin:toy4` / `builtin:rts79`.
pub fn builtin(name: &str) -> Option<Network> {
    match name {
        "toy4" => Some(toy4()),
        "rts79" => Some(rts79()),
        _ => None,
    }
}

/// Parameters for [`synthetic_grid`].
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub buses: usize,
    /// Branches beyond the spanning tree.
    pub extra_branches: usize,
    /// Branch limits are drawn as this range times the proportional-dispatch flow.
    pub limit_margin: (f64, f64),
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(buses: usize, extra_branches: usize, seed: u64) -> Self {
        SyntheticSpec {
            buses,
            extra_branches,
            limit_margin: (1.15, 1.8),
            seed,
        }
    }
}

/// Random connected grid whose proportional dispatch respects every limit,
/// so the intact system always has a no-shed dispatch.
pub fn synthetic_grid(spec: &SyntheticSpec) -> Network {
    assert!(spec.buses >= 2, "a synthetic grid needs at least two buses");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.buses;

    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 1..n {
        let lo = i.saturating_sub(4);
        edges.push((rng.random_range(lo..i), i));
    }
    let mut attempts = 0;
    while edges.len() < n - 1 + spec.extra_branches && attempts < 100 * (spec.extra_branches + 1) {
        attempts += 1;
        let a = rng.random_range(0..n);
        let span = rng.random_range(1..=6.min(n - 1));
        let b = (a + span) % n;
        let key = (a.min(b), a.max(b));
        if a != b && !edges.iter().any(|&(x, y)| (x.min(y), x.max(y)) == key) {
            edges.push(key);
        }
    }

    let buses: Vec<Bus> = (0..n)
        .map(|id| Bus {
            id,
            base_load: if rng.random_bool(0.7) { rng.random_range(20.0..120.0) } else { 0.0 },
            generators: vec![],
        })
        .collect();
    let total_load: f64 = buses.iter().map(|b| b.base_load).sum::<f64>().max(1.0);

    let n_gen = (n / 4).max(1);
    let mut gen_buses: Vec<usize> = Vec::new();
    while gen_buses.len() < n_gen {
        let b = rng.random_range(0..n);
        if !gen_buses.contains(&b) {
            gen_buses.push(b);
        }
    }
    gen_buses.sort_unstable();
    let shares: Vec<f64> = gen_buses.iter().map(|_| rng.random_range(0.5..1.5)).collect();
    let share_sum: f64 = shares.iter().sum();
    let generators: Vec<Generator> = gen_buses
        .iter()
        .zip(&shares)
        .enumerate()
        .map(|(id, (&bus, s))| Generator {
            id,
            bus,
            capacity_max: 1.35 * total_load * s / share_sum,
            capacity_min: 0.0,
            cost: rng.random_range(5.0..60.0),
        })
        .collect();

    let branches: Vec<Branch> = edges
        .iter()
        .enumerate()
        .map(|(id, &(f, t))| Branch {
            id,
            from_bus: f,
            to_bus: t,
            reactance: rng.random_range(0.05..0.3),
            flow_limit: 1e6,
        })
        .collect();
    let slack = gen_buses[0];
    let draft = Network::new(buses, branches, generators, slack).expect("synthetic grid is connected");

    // proportional dispatch sets the limit scale
    let cap = draft.total_capacity();
    let mut state = OperatingState::idle(&draft, draft.base_loads());
    let served = draft.total_base_load();
    state.gen_output = draft.generators().iter().map(|g| served * g.capacity_max / cap).collect();
    let flows = powerflow::solve_dcpf(&draft, &state).expect("balanced proportional dispatch").flow;
    let mean = flows.iter().map(|f| f.abs()).sum::<f64>() / flows.len() as f64;
    let limits: Vec<f64> = flows
        .iter()
        .map(|f| {
            let margin = rng.random_range(spec.limit_margin.0..spec.limit_margin.1);
            (f.abs() * margin).max(0.3 * mean + 10.0)
        })
        .collect();
    draft.with_flow_limits(&limits).expect("positive limits")
}
