//! Cascading-failure search on DC power networks guided by a graph
//! convolutional network, with layer-wise relevance explanations.
//!
//! The pipeline: [`dispatch::dcopf_initial`] sets the operating point,
//! [`cascade::propagate`] runs relay trips, islanding and re-dispatch after a
//! branch outage, [`search::generate_dataset`] labels which outages shed load,
//! [`gcn::train`] fits the classifier on the network's line graph, and
//! [`search::online_search`] uses it (plus LODF screening) to order the
//! depth-first outage search. [`lrp::explain`] attributes a positive
//! prediction to input features.

pub mod cascade;
pub mod cases;
pub mod dispatch;
pub mod gcn;
pub mod grid;
pub mod lp;
pub mod lrp;
pub mod powerflow;
pub mod search;

pub use cascade::{propagate, run_opa, CascadeConfig, CascadeEvent, CascadePath, EventKind, RelayMode};
pub use dispatch::{dcopf_initial, redispatch_min_shed, DispatchError, DispatchResult};
pub use gcn::{FeatureMatrix, GcnModel, Hyper, LineGraph, TrainingSample};
pub use grid::{parse_case, scale_loads, serialize_case, Branch, Bus, CaseError, Generator, Network, OperatingState};
pub use lrp::{conservation_audit, explain, RelevanceReport};
pub use powerflow::{lodf, nodal_reactance, physical_vulnerability, solve_dcpf, DcSolution, LodfTable};
pub use search::{generate_dataset, online_search, order_branches, SearchCurve, Strategy, StrategyKind};

/// Default relay threshold as a multiple of the long-term branch limit.
pub const DEFAULT_BETA: f64 = 1.1;
