use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::grid::Network;

/// Branch-to-node mapping of a power network: one node per branch, two nodes
/// adjacent when their branches share a bus.
#[derive(Debug, Clone, PartialEq)]
pub struct LineGraph {
    /// 0/1 adjacency, symmetric with a zero diagonal.
    pub adjacency: DMatrix<f64>,
    /// `D^-1/2 A D^-1/2`; rows and columns of isolated nodes are zero.
    pub normalized: DMatrix<f64>,
    /// Stable digest of the adjacency structure.
    pub hash: String,
}

pub fn build_line_graph(net: &Network) -> LineGraph {
    let branches = net.branches();
    let l = branches.len();
    let mut adjacency = DMatrix::<f64>::zeros(l, l);
    for i in 0..l {
        for j in i + 1..l {
            if branches[i].shares_bus_with(&branches[j]) {
                adjacency[(i, j)] = 1.0;
                adjacency[(j, i)] = 1.0;
            }
        }
    }
    let inv_sqrt: Vec<f64> = (0..l)
        .map(|i| {
            let d = adjacency.row(i).sum();
            if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }
        })
        .collect();
    let normalized = DMatrix::from_fn(l, l, |i, j| adjacency[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    let hash = adjacency_hash(&adjacency);
    LineGraph {
        adjacency,
        normalized,
        hash,
    }
}

fn adjacency_hash(a: &DMatrix<f64>) -> String {
    let mut h = Sha256::new();
    h.update(format!("linegraph;{};", a.nrows()).as_bytes());
    for i in 0..a.nrows() {
        for j in i + 1..a.ncols() {
            if a[(i, j)] != 0.0 {
                h.update(format!("{i}-{j};").as_bytes());
            }
        }
    }
    let digest = h.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

impl LineGraph {
    pub fn n_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_nodes()).filter(move |&j| self.adjacency[(i, j)] != 0.0)
    }

    /// Hop distance from `source` to every node (`usize::MAX` when unreachable).
    pub fn hop_distances(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n_nodes()];
        dist[source] = 0;
        let mut frontier = vec![source];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for &u in &frontier {
                for v in self.neighbours(u) {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        dist
    }
}

/// Powers `Ā^0 = I, Ā^1, ..., Ā^K` of a line graph's normalized adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct HopBasis {
    pub powers: Vec<DMatrix<f64>>,
    pub graph_hash: String,
}

impl HopBasis {
    pub fn new(graph: &LineGraph, k_hops: usize) -> Self {
        let l = graph.n_nodes();
        let mut powers = vec![DMatrix::<f64>::identity(l, l)];
        for k in 1..=k_hops {
            powers.push(&powers[k - 1] * &graph.normalized);
        }
        HopBasis {
            powers,
            graph_hash: graph.hash.clone(),
        }
    }

    pub fn k_hops(&self) -> usize {
        self.powers.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.powers[0].nrows()
    }
}
