//! Graph convolutional classifier over the branch line graph.
//!
//! Each branch is a node; the model predicts, per node, whether opening that
//! branch from the current state leads to load shedding.

mod features;
mod graph;
mod io;
mod metrics;
mod model;
mod train;

pub use features::{extract_features, FeatureFamily, FeatureMatrix, N_FEATURES};
pub use graph::{build_line_graph, HopBasis, LineGraph};
pub use io::{model_from_json, model_to_json, read_samples_jsonl, write_samples_jsonl, MODEL_VERSION};
pub use metrics::{evaluate, Confusion};
pub use model::{loss, Dense, FeatureScale, ForwardCache, GcnModel, GraphConv, Hyper, Parameters, NORMAL, SHED};
pub use train::{mean_loss, train, Adam, TrainingSample, Trained};

#[derive(Debug, thiserror::Error)]
pub enum GcnError {
    #[error("model was trained on line graph {expected}, got {got}")]
    GraphMismatch { expected: String, got: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("inconsistent training samples: {0}")]
    InconsistentSamples(String),
    #[error("malformed model or dataset: {0}")]
    Format(String),
}
