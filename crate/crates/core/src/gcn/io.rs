use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::model::{Dense, FeatureScale, GcnModel, GraphConv, Hyper, Parameters};
use super::train::TrainingSample;
use super::GcnError;

pub const MODEL_VERSION: u32 = 1;
const LOSS_REDUCTION: &str = "mean over masked nodes, then mean over the batch";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    hyper: Hyper,
    graph_hash: String,
    layers: Vec<LayerRecord>,
    fc: FcRecord,
    feature_scale: FeatureScale,
    loss_reduction: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    /// `w[c][f][k]`.
    w: Vec<Vec<Vec<f64>>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FcRecord {
    /// `w[f][class]`.
    w: Vec<[f64; 2]>,
    b: [f64; 2],
}

fn layer_record(l: &GraphConv) -> LayerRecord {
    LayerRecord {
        w: (0..l.c_in())
            .map(|c| (0..l.f_out()).map(|f| l.weights.iter().map(|w| w[(c, f)]).collect()).collect())
            .collect(),
        b: l.bias.clone(),
    }
}

fn layer_from(r: &LayerRecord, hops: usize, c_in: usize, f_out: usize, name: &str) -> Result<GraphConv, GcnError> {
    let bad = || GcnError::Format(format!("{name} does not match the hyperparameters"));
    if r.w.len() != c_in || r.b.len() != f_out {
        return Err(bad());
    }
    let mut weights = vec![DMatrix::zeros(c_in, f_out); hops];
    for (c, row) in r.w.iter().enumerate() {
        if row.len() != f_out {
            return Err(bad());
        }
        for (f, ks) in row.iter().enumerate() {
            if ks.len() != hops {
                return Err(bad());
            }
            for (k, v) in ks.iter().enumerate() {
                weights[k][(c, f)] = *v;
            }
        }
    }
    Ok(GraphConv {
        weights,
        bias: r.b.clone(),
    })
}

pub fn model_to_json(model: &GcnModel) -> String {
    let p = &model.params;
    let file = ModelFile {
        version: MODEL_VERSION,
        hyper: model.hyper.clone(),
        graph_hash: model.graph_hash.clone(),
        layers: vec![layer_record(&p.conv1), layer_record(&p.conv2)],
        fc: FcRecord {
            w: (0..p.fc.weights.nrows()).map(|f| [p.fc.weights[(f, 0)], p.fc.weights[(f, 1)]]).collect(),
            b: p.fc.bias,
        },
        feature_scale: model.feature_scale,
        loss_reduction: LOSS_REDUCTION.to_string(),
    };
    serde_json::to_string_pretty(&file).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<GcnModel, GcnError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| GcnError::Format(e.to_string()))?;
    if file.version != MODEL_VERSION {
        return Err(GcnError::Format(format!("unsupported model version {}", file.version)));
    }
    if file.layers.len() != 2 {
        return Err(GcnError::Format(format!("expected 2 graph layers, found {}", file.layers.len())));
    }
    let h = &file.hyper;
    let hops = h.k_hops + 1;
    let conv1 = layer_from(&file.layers[0], hops, super::N_FEATURES, h.f1, "layer 1")?;
    let conv2 = layer_from(&file.layers[1], hops, h.f1, h.f2, "layer 2")?;
    if file.fc.w.len() != h.f2 {
        return Err(GcnError::Format("fc does not match the hyperparameters".into()));
    }
    let fc = Dense {
        weights: DMatrix::from_fn(h.f2, 2, |f, j| file.fc.w[f][j]),
        bias: file.fc.b,
    };
    Ok(GcnModel {
        hyper: file.hyper,
        graph_hash: file.graph_hash,
        params: Parameters { conv1, conv2, fc },
        feature_scale: file.feature_scale,
    })
}

pub fn write_samples_jsonl<W: Write>(mut w: W, samples: &[TrainingSample]) -> std::io::Result<()> {
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_samples_jsonl<R: BufRead>(r: R) -> Result<Vec<TrainingSample>, GcnError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| GcnError::Format(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: TrainingSample =
            serde_json::from_str(&line).map_err(|e| GcnError::Format(format!("line {}: {e}", i + 1)))?;
        if s.labels.iter().zip(&s.mask).any(|(y, m)| *y && !*m) {
            return Err(GcnError::Format(format!("line {}: positive label on a masked-out branch", i + 1)));
        }
        out.push(s);
    }
    Ok(out)
}
