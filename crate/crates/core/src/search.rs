//! Guided online search over the random-outage tree and training-data
//! generation.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cascade::{initial_state, propagate, CascadeConfig, CascadePath, Exploration, Explorer, SHED_TOL_MW};
use crate::dispatch::{dcopf_initial, DispatchError};
use crate::gcn::{build_line_graph, extract_features, GcnError, GcnModel, HopBasis, TrainingSample};
use crate::grid::{scale_loads, serialize_case, Network, OperatingState};
use crate::powerflow::{lodf, physical_vulnerability, PowerFlowError};

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("the GCN strategy needs a trained model")]
    MissingModel,
    #[error(transparent)]
    Model(#[from] GcnError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Rand,
    Pfw,
    Lodf,
    Gcn,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [StrategyKind::Rand, StrategyKind::Pfw, StrategyKind::Lodf, StrategyKind::Gcn];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Rand => "rand",
            StrategyKind::Pfw => "pfw",
            StrategyKind::Lodf => "lodf",
            StrategyKind::Gcn => "gcn",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rand" | "random" => Ok(StrategyKind::Rand),
            "pfw" => Ok(StrategyKind::Pfw),
            "lodf" => Ok(StrategyKind::Lodf),
            "gcn" => Ok(StrategyKind::Gcn),
            other => Err(format!("unknown strategy '{other}' (expected rand, pfw, lodf or gcn)")),
        }
    }
}

/// A trained model bound to the network it will score.
#[derive(Debug, Clone)]
pub struct GcnGuide {
    pub model: GcnModel,
    pub hops: HopBasis,
}

impl GcnGuide {
    pub fn new(model: GcnModel, net: &Network) -> Result<Self, GcnError> {
        let lg = build_line_graph(net);
        if lg.hash != model.graph_hash {
            return Err(GcnError::GraphMismatch {
                expected: model.graph_hash,
                got: lg.hash,
            });
        }
        let hops = HopBasis::new(&lg, model.hyper.k_hops);
        Ok(GcnGuide { model, hops })
    }
}

#[derive(Debug, Clone)]
pub enum Strategy {
    Rand { seed: u64 },
    Pfw,
    Lodf,
    Gcn(Box<GcnGuide>),
}

impl Strategy {
    pub fn kind(&self) -> StrategyKind {
        match self {
            Strategy::Rand { .. } => StrategyKind::Rand,
            Strategy::Pfw => StrategyKind::Pfw,
            Strategy::Lodf => StrategyKind::Lodf,
            Strategy::Gcn(_) => StrategyKind::Gcn,
        }
    }

    pub fn build(kind: StrategyKind, seed: u64, guide: Option<&GcnGuide>) -> Result<Self, SearchError> {
        Ok(match kind {
            StrategyKind::Rand => Strategy::Rand { seed },
            StrategyKind::Pfw => Strategy::Pfw,
            StrategyKind::Lodf => Strategy::Lodf,
            StrategyKind::Gcn => Strategy::Gcn(Box::new(guide.ok_or(SearchError::MissingModel)?.clone())),
        })
    }
}

/// In-service branches sorted by descending key, ties by ascending id.
fn descending(state: &OperatingState, key: &[f64]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..key.len()).filter(|&k| state.in_service[k]).collect();
    ids.sort_by(|&a, &b| key[b].total_cmp(&key[a]).then(a.cmp(&b)));
    ids
}

fn vulnerability(net: &Network, state: &OperatingState, beta: f64) -> Result<Vec<f64>, SearchError> {
    let table = lodf(net, &state.in_service)?;
    Ok(physical_vulnerability(net, state, &table, beta))
}

/// Ranks the in-service branches of `state` for the next disconnection.
/// `rng` is only drawn from by the random strategy.
pub fn order_branches(
    strategy: &Strategy,
    net: &Network,
    state: &OperatingState,
    beta: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>, SearchError> {
    match strategy {
        Strategy::Rand { .. } => {
            let mut ids: Vec<usize> = (0..state.in_service.len()).filter(|&k| state.in_service[k]).collect();
            ids.shuffle(rng);
            Ok(ids)
        }
        Strategy::Pfw => {
            let flow: Vec<f64> = state.flow.iter().map(|f| f.abs()).collect();
            Ok(descending(state, &flow))
        }
        Strategy::Lodf => Ok(descending(state, &vulnerability(net, state, beta)?)),
        Strategy::Gcn(guide) => {
            let x = extract_features(net, state, beta);
            let (labels, p) = guide.model.predict(&guide.hops, &x)?;
            let mut first: Vec<usize> = (0..labels.len()).filter(|&k| labels[k] && state.in_service[k]).collect();
            first.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
            let taken: HashSet<usize> = first.iter().copied().collect();
            let rest = descending(state, &vulnerability(net, state, beta)?);
            first.extend(rest.into_iter().filter(|k| !taken.contains(k)));
            Ok(first)
        }
    }
}

/// Adapts a strategy to the explorer's ordering callback, parking the first
/// error so the search can report it.
struct Orderer<'a> {
    strategy: &'a Strategy,
    beta: f64,
    rng: ChaCha8Rng,
    error: Option<SearchError>,
}

impl crate::cascade::BranchOrder for Orderer<'_> {
    fn order(&mut self, net: &Network, state: &OperatingState) -> Vec<usize> {
        if self.error.is_some() {
            return Vec::new();
        }
        match order_branches(self.strategy, net, state, self.beta, &mut self.rng) {
            Ok(v) => v,
            Err(e) => {
                self.error = Some(e);
                Vec::new()
            }
        }
    }
}

/// Shedding paths found as a function of search attempts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchCurve {
    pub strategy: StrategyKind,
    /// `(attempt, found)` after every attempt.
    pub points: Vec<(usize, usize)>,
    /// Size of the exhaustive reference set, when known.
    pub total: Option<usize>,
}

impl SearchCurve {
    pub fn attempts(&self) -> usize {
        self.points.last().map_or(0, |p| p.0)
    }

    pub fn found(&self) -> usize {
        self.points.last().map_or(0, |p| p.1)
    }

    /// First attempt at which `n` paths had been found.
    pub fn attempts_to_find(&self, n: usize) -> Option<usize> {
        if n == 0 {
            return Some(0);
        }
        self.points.iter().find(|p| p.1 >= n).map(|p| p.0)
    }

    /// Attempts needed to find every path of the reference set.
    pub fn attempts_to_complete(&self) -> Option<usize> {
        self.attempts_to_find(self.total?)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("attempt,found\n");
        for (a, f) in &self.points {
            s.push_str(&format!("{a},{f}\n"));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub exploration: Exploration,
    pub curve: SearchCurve,
}

/// Depth-first search to `max_outages` random failures ordered by `strategy`,
/// stopping after `budget` attempts when one is given.
pub fn online_search(
    net: &Network,
    loads: &[f64],
    strategy: &Strategy,
    max_outages: usize,
    budget: Option<usize>,
    cfg: &CascadeConfig,
) -> Result<SearchOutcome, SearchError> {
    if budget == Some(0) {
        return Err(SearchError::ZeroBudget);
    }
    let root = initial_state(net, loads)?;
    let seed = match strategy {
        Strategy::Rand { seed } => *seed,
        _ => 0,
    };
    let mut orderer = Orderer {
        strategy,
        beta: cfg.beta,
        rng: ChaCha8Rng::seed_from_u64(seed),
        error: None,
    };
    let mut points = Vec::new();
    let mut found = 0usize;
    let exploration = Explorer::new(net, max_outages, budget, *cfg).run(
        root,
        &mut orderer,
        &mut |attempt, path: &CascadePath| {
            if path.sheds() {
                found += 1;
            }
            points.push((attempt, found));
        },
    )?;
    if let Some(e) = orderer.error {
        return Err(e);
    }
    Ok(SearchOutcome {
        exploration,
        curve: SearchCurve {
            strategy: strategy.kind(),
            points,
            total: None,
        },
    })
}

/// Shedding sequences of an exhaustive search, stored so curves can be
/// recomputed without re-simulating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExhaustiveReference {
    pub key: String,
    pub attempts: usize,
    pub shedding: Vec<Vec<usize>>,
}

/// Digest identifying an exhaustive search input.
pub fn reference_key(net: &Network, loads: &[f64], max_outages: usize, cfg: &CascadeConfig) -> String {
    let mut h = Sha256::new();
    h.update(serialize_case(net).as_bytes());
    for l in loads {
        h.update(l.to_le_bytes());
    }
    h.update(format!("R={max_outages};beta={};mode={:?}", cfg.beta, cfg.relay_mode).as_bytes());
    h.finalize()[..12].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn exhaustive_reference(
    net: &Network,
    loads: &[f64],
    max_outages: usize,
    cfg: &CascadeConfig,
) -> Result<ExhaustiveReference, SearchError> {
    let out = online_search(net, loads, &Strategy::Pfw, max_outages, None, cfg)?;
    let mut shedding: Vec<Vec<usize>> = out.exploration.shedding_set().into_iter().collect();
    shedding.sort();
    Ok(ExhaustiveReference {
        key: reference_key(net, loads, max_outages, cfg),
        attempts: out.exploration.attempts,
        shedding,
    })
}

/// Parameters of [`generate_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// Load draws; each contributes one sample per state above the depth limit.
    pub n_scenarios: usize,
    pub max_outages: usize,
    pub band: [f64; 2],
    pub scale: f64,
    pub seed: u64,
    pub beta: f64,
}

impl DatasetConfig {
    pub fn new(n_scenarios: usize, seed: u64) -> Self {
        DatasetConfig {
            n_scenarios,
            max_outages: 2,
            band: [0.9, 1.1],
            scale: 1.1,
            seed,
            beta: crate::DEFAULT_BETA,
        }
    }
}

/// Summary written next to a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n_scenarios: usize,
    pub n_samples: usize,
    pub skipped: usize,
    pub positive_rate: f64,
    pub seed: u64,
    pub band: [f64; 2],
    pub scale: f64,
    pub max_outages: usize,
    pub beta: f64,
    /// Samples per number of outages already applied.
    pub depth_mix: Vec<usize>,
    pub graph_hash: String,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<TrainingSample>,
    pub meta: DatasetMeta,
}

/// Labels every branch of `state`: does opening it shed more load?
pub fn label_state(
    net: &Network,
    state: &OperatingState,
    cfg: &CascadeConfig,
) -> Result<(Vec<bool>, Vec<OperatingState>), DispatchError> {
    let mut labels = vec![false; net.n_branches()];
    let mut children = Vec::new();
    for k in (0..labels.len()).filter(|&k| state.in_service[k]) {
        let (next, _) = propagate(net, state, k, cfg)?;
        labels[k] = next.shed_so_far - state.shed_so_far > SHED_TOL_MW;
        children.push(next);
    }
    Ok((labels, children))
}

fn scenario_samples(
    net: &Network,
    config: &DatasetConfig,
    graph_hash: &str,
    index: usize,
) -> Result<Option<Vec<(usize, TrainingSample)>>, DispatchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let factors: Vec<f64> = (0..net.n_buses()).map(|_| rng.random_range(config.band[0]..=config.band[1])).collect();
    let scaled = scale_loads(net, config.scale, &factors).expect("positive load factors");
    let loads = scaled.base_loads();
    let dispatch = match dcopf_initial(net, &loads) {
        Ok(d) => d,
        Err(DispatchError::InfeasibleWithNoShed) => return Ok(None),
        Err(e) => return Err(e),
    };
    let cfg = CascadeConfig {
        beta: config.beta,
        ..CascadeConfig::default()
    };
    let mut root = OperatingState::idle(net, loads);
    root.gen_output = dispatch.gen_output;
    root.flow = dispatch.flow;

    let mut out = Vec::new();
    let mut frontier = vec![root];
    for depth in 0..config.max_outages {
        let mut next_frontier = Vec::new();
        for state in &frontier {
            let (labels, children) = label_state(net, state, &cfg)?;
            out.push((
                depth,
                TrainingSample {
                    graph_hash: graph_hash.to_string(),
                    features: extract_features(net, state, config.beta),
                    labels,
                    mask: state.in_service.clone(),
                },
            ));
            if depth + 1 < config.max_outages {
                next_frontier.extend(children);
            }
        }
        frontier = next_frontier;
    }
    Ok(Some(out))
}

/// Labelled samples for every state with fewer than `max_outages` random
/// outages, over `n_scenarios` random load draws. Scenario `i` draws from
/// its own random stream, so output does not depend on `jobs`.
pub fn generate_dataset(net: &Network, config: &DatasetConfig, jobs: usize) -> Result<Dataset, SearchError> {
    let graph_hash = build_line_graph(net).hash;
    let run = |i: usize| scenario_samples(net, config, &graph_hash, i);
    let per_scenario: Vec<_> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| (0..config.n_scenarios).into_par_iter().map(run).collect())
    } else {
        (0..config.n_scenarios).map(run).collect()
    };

    let mut samples = Vec::new();
    let mut skipped = 0;
    let mut depth_mix = vec![0; config.max_outages];
    for r in per_scenario {
        match r? {
            None => skipped += 1,
            Some(list) => {
                for (depth, s) in list {
                    depth_mix[depth] += 1;
                    samples.push(s);
                }
            }
        }
    }
    let masked: usize = samples.iter().map(TrainingSample::n_masked).sum();
    let positive: usize = samples.iter().map(TrainingSample::n_positive).sum();
    let meta = DatasetMeta {
        n_scenarios: config.n_scenarios,
        n_samples: samples.len(),
        skipped,
        positive_rate: if masked == 0 { 0.0 } else { positive as f64 / masked as f64 },
        seed: config.seed,
        band: config.band,
        scale: config.scale,
        max_outages: config.max_outages,
        beta: config.beta,
        depth_mix,
        graph_hash,
    };
    Ok(Dataset { samples, meta })
}
