use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::grid::{Network, OperatingState};

/// Number of input features per line-graph node.
pub const N_FEATURES: usize = 4;

/// Column order of [`FeatureMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFamily {
    /// 1 when the branch is out of service.
    Topology,
    /// `|L_k| / (beta L_k^max)`.
    Protection,
    /// `|L_k|`, MW.
    BranchFlow,
    /// Larger of the two endpoint bus loads, MW.
    BusLoad,
}

impl FeatureFamily {
    pub const ALL: [FeatureFamily; N_FEATURES] = [
        FeatureFamily::Topology,
        FeatureFamily::Protection,
        FeatureFamily::BranchFlow,
        FeatureFamily::BusLoad,
    ];

    pub fn column(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureFamily::Topology => "topology",
            FeatureFamily::Protection => "protection",
            FeatureFamily::BranchFlow => "branch_flow",
            FeatureFamily::BusLoad => "bus_load",
        }
    }
}

/// `L x 4` model input in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(pub DMatrix<f64>);

impl FeatureMatrix {
    pub fn n_nodes(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, node: usize, family: FeatureFamily) -> f64 {
        self.0[(node, family.column())]
    }
}

impl Serialize for FeatureMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<[f64; N_FEATURES]> = (0..self.0.nrows())
            .map(|i| std::array::from_fn(|c| self.0[(i, c)]))
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FeatureMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows: Vec<[f64; N_FEATURES]> = Vec::deserialize(d)?;
        Ok(FeatureMatrix(DMatrix::from_fn(rows.len(), N_FEATURES, |i, c| rows[i][c])))
    }
}

/// Builds the four-family input for every branch of a solved state.
pub fn extract_features(net: &Network, state: &OperatingState, beta: f64) -> FeatureMatrix {
    let branches = net.branches();
    FeatureMatrix(DMatrix::from_fn(branches.len(), N_FEATURES, |k, c| {
        let br = &branches[k];
        let on = state.in_service[k];
        let flow = if on { state.flow[k].abs() } else { 0.0 };
        match FeatureFamily::ALL[c] {
            FeatureFamily::Topology => {
                if on {
                    0.0
                } else {
                    1.0
                }
            }
            FeatureFamily::Protection => flow / (beta * br.flow_limit),
            FeatureFamily::BranchFlow => flow,
            FeatureFamily::BusLoad => state.load[br.from_bus].max(state.load[br.to_bus]),
        }
    }))
}
