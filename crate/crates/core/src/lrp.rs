//! Layer-wise relevance propagation with the z⁺ rule.
//!
//! The shedding logit of one node is redistributed backwards onto the
//! `L x 4` input. At every redistribution step a neuron's relevance is split
//! in proportion to its positive input contributions `max(x_i w_ij, 0)`.
//! The positive part of the neuron's bias joins the denominator, so the share
//! the bias would claim is not passed down and shows up as a deficit.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::gcn::{FeatureFamily, FeatureMatrix, GcnError, GcnModel, GraphConv, HopBasis, N_FEATURES, SHED};

/// Relevance bookkeeping for one redistribution step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerAudit {
    pub layer: &'static str,
    pub relevance_in: f64,
    pub relevance_out: f64,
    /// Share claimed by positive biases.
    pub bias_absorbed: f64,
    /// Relevance of neurons whose denominator was zero.
    pub dropped: f64,
}

impl LayerAudit {
    pub fn deficit(&self) -> f64 {
        self.bias_absorbed + self.dropped
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceReport {
    pub target_branch: usize,
    /// The decomposed shedding logit.
    pub target_value: f64,
    /// Set when the target logit is not positive; scores are then all zero.
    pub negative_target: bool,
    /// `L x 4` input relevance.
    pub scores: DMatrix<f64>,
    pub audit: Vec<LayerAudit>,
}

impl RelevanceReport {
    pub fn group(&self, family: FeatureFamily) -> f64 {
        self.scores.column(family.column()).sum()
    }

    pub fn grouped(&self) -> [(FeatureFamily, f64); N_FEATURES] {
        FeatureFamily::ALL.map(|f| (f, self.group(f)))
    }

    /// Largest family; ties go to the earlier column.
    pub fn dominant_family(&self) -> FeatureFamily {
        let g = self.grouped();
        g.iter().fold(g[0], |best, cur| if cur.1 > best.1 { *cur } else { best }).0
    }

    /// `(node, family, score)` in descending score order, ties by node then column.
    pub fn top_inputs(&self, n: usize) -> Vec<(usize, FeatureFamily, f64)> {
        let mut all: Vec<_> = (0..self.scores.nrows())
            .flat_map(|i| FeatureFamily::ALL.map(|f| (i, f, self.scores[(i, f.column())])))
            .filter(|t| t.2 > 0.0)
            .collect();
        all.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.column().cmp(&b.1.column())));
        all.truncate(n);
        all
    }

    /// Relevance totals from the target down to the input.
    pub fn layer_sums(&self) -> Vec<f64> {
        let mut sums = vec![self.target_value.max(0.0)];
        sums.extend(self.audit.iter().map(|a| a.relevance_out));
        sums
    }

    pub fn to_json(&self) -> String {
        let groups: serde_json::Map<String, serde_json::Value> =
            self.grouped().iter().map(|(f, v)| (f.name().to_string(), (*v).into())).collect();
        let top: Vec<_> = self
            .top_inputs(20)
            .into_iter()
            .map(|(node, f, score)| serde_json::json!({"node": node, "feature": f.name(), "score": score}))
            .collect();
        let report = serde_json::json!({
            "branch": self.target_branch,
            "target": self.target_value,
            "flags": if self.negative_target { vec!["NEGATIVE_TARGET"] } else { vec![] },
            "groups": groups,
            "top_inputs": top,
            "deficit_per_layer": self.audit.iter().map(LayerAudit::deficit).collect::<Vec<_>>(),
            "layers": self.audit,
        });
        serde_json::to_string_pretty(&report).expect("report serializes")
    }

    /// One row per line-graph node with the four family scores.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node");
        for f in FeatureFamily::ALL {
            out.push(',');
            out.push_str(f.name());
        }
        out.push('\n');
        for i in 0..self.scores.nrows() {
            out.push_str(&i.to_string());
            for c in 0..N_FEATURES {
                out.push_str(&format!(",{}", self.scores[(i, c)]));
            }
            out.push('\n');
        }
        out
    }
}

/// Redistributes `r_out` (L x F) over the inputs `x` (L x C) of a graph
/// convolution whose effective weight from `(i, c)` to `(j, f)` is
/// `sum_k w_k[c, f] Ā^k[j, i]`.
fn conv_relevance(
    layer: &GraphConv,
    hops: &HopBasis,
    x: &DMatrix<f64>,
    r_out: &DMatrix<f64>,
    name: &'static str,
) -> (DMatrix<f64>, LayerAudit) {
    let l = x.nrows();
    let (c_in, f_out) = (layer.c_in(), layer.f_out());
    let filter = |c: usize, f: usize| {
        let mut g = DMatrix::<f64>::zeros(l, l);
        for (a, w) in hops.powers.iter().zip(&layer.weights) {
            g += a * w[(c, f)];
        }
        g
    };
    let active: Vec<(usize, usize)> = (0..f_out)
        .flat_map(|f| (0..l).map(move |j| (j, f)))
        .filter(|&(j, f)| r_out[(j, f)] > 0.0)
        .collect();

    let mut den = DMatrix::<f64>::zeros(l, f_out);
    for c in 0..c_in {
        for f in 0..f_out {
            let g = filter(c, f);
            for &(j, ff) in active.iter().filter(|a| a.1 == f) {
                den[(j, ff)] += (0..l).map(|i| (x[(i, c)] * g[(j, i)]).max(0.0)).sum::<f64>();
            }
        }
    }

    let mut audit = LayerAudit {
        layer: name,
        relevance_in: r_out.sum(),
        relevance_out: 0.0,
        bias_absorbed: 0.0,
        dropped: 0.0,
    };
    // per-neuron scale R_j / (sum z⁺ + b⁺)
    let mut share = DMatrix::<f64>::zeros(l, f_out);
    for &(j, f) in &active {
        let b = layer.bias[f].max(0.0);
        if den[(j, f)] > 0.0 {
            let total = den[(j, f)] + b;
            share[(j, f)] = r_out[(j, f)] / total;
            audit.bias_absorbed += r_out[(j, f)] * b / total;
        } else {
            audit.dropped += r_out[(j, f)];
        }
    }

    let mut r_in = DMatrix::<f64>::zeros(l, c_in);
    for c in 0..c_in {
        for f in 0..f_out {
            let g = filter(c, f);
            for &(j, ff) in active.iter().filter(|a| a.1 == f) {
                let s = share[(j, ff)];
                if s == 0.0 {
                    continue;
                }
                for i in 0..l {
                    let z = (x[(i, c)] * g[(j, i)]).max(0.0);
                    r_in[(i, c)] += z * s;
                }
            }
        }
    }
    audit.relevance_out = r_in.sum();
    (r_in, audit)
}

/// Decomposes the shedding logit at `branch` onto the model inputs.
pub fn explain(model: &GcnModel, hops: &HopBasis, x: &FeatureMatrix, branch: usize) -> Result<RelevanceReport, GcnError> {
    let cache = model.forward(hops, x)?;
    let l = x.n_nodes();
    if branch >= l {
        return Err(GcnError::Shape(format!("branch {branch} out of range for {l} nodes")));
    }
    let target = cache.logits[(branch, SHED)];
    if target <= 0.0 {
        return Ok(RelevanceReport {
            target_branch: branch,
            target_value: target,
            negative_target: true,
            scores: DMatrix::zeros(l, N_FEATURES),
            audit: Vec::new(),
        });
    }
    let k = model.hyper.k_hops;
    let trimmed = HopBasis {
        powers: hops.powers[..=k].to_vec(),
        graph_hash: hops.graph_hash.clone(),
    };

    // fully connected output onto the hidden units of node `branch`
    let fc = &model.params.fc;
    let f2 = model.hyper.f2;
    let z: Vec<f64> = (0..f2).map(|f| (cache.h2[(branch, f)] * fc.weights[(f, SHED)]).max(0.0)).collect();
    let den: f64 = z.iter().sum();
    let b = fc.bias[SHED].max(0.0);
    let mut r_h2 = DMatrix::<f64>::zeros(l, f2);
    let mut fc_audit = LayerAudit {
        layer: "fc",
        relevance_in: target,
        relevance_out: 0.0,
        bias_absorbed: 0.0,
        dropped: 0.0,
    };
    if den > 0.0 {
        for f in 0..f2 {
            r_h2[(branch, f)] = z[f] * target / (den + b);
        }
        fc_audit.bias_absorbed = target * b / (den + b);
    } else {
        fc_audit.dropped = target;
    }
    fc_audit.relevance_out = r_h2.sum();

    // ReLU layers hand relevance to their pre-activations unchanged
    let (r_h1, conv2_audit) = conv_relevance(&model.params.conv2, &trimmed, &cache.h1, &r_h2, "conv2");
    let (scores, conv1_audit) = conv_relevance(&model.params.conv1, &trimmed, &cache.input, &r_h1, "conv1");

    Ok(RelevanceReport {
        target_branch: branch,
        target_value: target,
        negative_target: false,
        scores,
        audit: vec![fc_audit, conv2_audit, conv1_audit],
    })
}

/// Per-step relevance totals and deficits of a report.
pub fn conservation_audit(report: &RelevanceReport) -> &[LayerAudit] {
    &report.audit
}
