use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureMatrix;
use super::graph::HopBasis;
use super::model::{loss, GcnModel, Hyper, Parameters};
use super::GcnError;

/// One labelled search state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSample {
    pub graph_hash: String,
    pub features: FeatureMatrix,
    /// `true` when opening that branch from this state leads to shedding.
    pub labels: Vec<bool>,
    /// Branches that contribute to the loss; out-of-service ones are excluded.
    pub mask: Vec<bool>,
}

impl TrainingSample {
    pub fn n_positive(&self) -> usize {
        self.labels.iter().zip(&self.mask).filter(|(y, m)| **y && **m).count()
    }

    pub fn n_masked(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Fresh initializations tried when the second layer dies in epoch one.
pub const MAX_RESTARTS: usize = 3;

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: GcnModel,
    /// Mean per-sample loss of each epoch.
    pub loss_trace: Vec<f64>,
    /// Initializations discarded because every second-layer unit went silent.
    pub restarts: usize,
}

fn check_samples(samples: &[TrainingSample], hops: &HopBasis) -> Result<(), GcnError> {
    for (i, s) in samples.iter().enumerate() {
        if s.graph_hash != hops.graph_hash {
            return Err(GcnError::InconsistentSamples(format!(
                "sample {i} was built on graph {} but training uses {}",
                s.graph_hash, hops.graph_hash
            )));
        }
        let l = hops.n_nodes();
        if s.features.n_nodes() != l || s.labels.len() != l || s.mask.len() != l {
            return Err(GcnError::Shape(format!("sample {i} does not have {l} nodes")));
        }
    }
    Ok(())
}

/// True when some second-layer unit is active on some sample.
fn second_layer_alive(model: &GcnModel, hops: &HopBasis, samples: &[TrainingSample]) -> Result<bool, GcnError> {
    for s in samples {
        if model.forward(hops, &s.features)?.h2.iter().any(|v| *v > 0.0) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Mini-batch Adam on the weighted NLL; the batch gradient is the mean of
/// per-sample gradients.
///
/// A narrow second layer can go entirely silent during the first epoch,
/// after which no gradient reaches the graph layers and the model is stuck
/// at a constant output. Training then restarts from the next
/// initialization stream, at most [`MAX_RESTARTS`] times.
pub fn train(samples: &[TrainingSample], hops: &HopBasis, hyper: &Hyper) -> Result<Trained, GcnError> {
    check_samples(samples, hops)?;
    if hyper.batch == 0 {
        return Err(GcnError::Shape("batch size must be positive".into()));
    }
    let mut restarts = 0;
    loop {
        let last = restarts == MAX_RESTARTS;
        let (model, loss_trace, dead) = train_once(samples, hops, hyper, restarts as u64, !last)?;
        if !dead {
            return Ok(Trained {
                model,
                loss_trace,
                restarts,
            });
        }
        restarts += 1;
    }
}

fn train_once(
    samples: &[TrainingSample],
    hops: &HopBasis,
    hyper: &Hyper,
    init_stream: u64,
    stop_if_dead: bool,
) -> Result<(GcnModel, Vec<f64>, bool), GcnError> {
    let mut model = GcnModel::with_init_stream(hyper.clone(), hops.graph_hash.clone(), init_stream);
    let (w1, w2) = hyper.loss_weights();
    let mut theta = model.params.to_vec();
    let mut adam = Adam::new(theta.len(), hyper.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut loss_trace = Vec::with_capacity(hyper.epochs);

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hyper.batch) {
            let mut grad = Parameters::zeros(hyper);
            for &i in batch {
                let s = &samples[i];
                let cache = model.forward(hops, &s.features)?;
                epoch_loss += loss(&cache.probs, &s.labels, &s.mask, w1, w2);
                grad.add_assign(&model.backward(hops, &cache, &s.labels, &s.mask, w1, w2));
            }
            grad.scale(1.0 / batch.len() as f64);
            adam.step(&mut theta, &grad.to_vec());
            model.params.set_from_slice(&theta);
        }
        loss_trace.push(if samples.is_empty() { 0.0 } else { epoch_loss / samples.len() as f64 });
        if stop_if_dead && epoch == 0 && !samples.is_empty() && !second_layer_alive(&model, hops, samples)? {
            return Ok((model, loss_trace, true));
        }
    }
    Ok((model, loss_trace, false))
}

/// Mean loss of a model over a sample set.
pub fn mean_loss(model: &GcnModel, hops: &HopBasis, samples: &[TrainingSample]) -> Result<f64, GcnError> {
    let (w1, w2) = model.hyper.loss_weights();
    let mut total = 0.0;
    for s in samples {
        let cache = model.forward(hops, &s.features)?;
        total += loss(&cache.probs, &s.labels, &s.mask, w1, w2);
    }
    Ok(if samples.is_empty() { 0.0 } else { total / samples.len() as f64 })
}
