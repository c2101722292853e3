use serde::{Deserialize, Serialize};

use super::graph::HopBasis;
use super::model::GcnModel;
use super::train::TrainingSample;
use super::GcnError;

/// Confusion counts with shedding as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    /// Normal, predicted normal.
    pub a: u64,
    /// Normal, predicted shedding.
    pub b: u64,
    /// Shedding, predicted normal.
    pub c: u64,
    /// Shedding, predicted shedding.
    pub d: u64,
}

impl Confusion {
    pub fn from_predictions(predictions: &[bool], labels: &[bool]) -> Self {
        assert_eq!(predictions.len(), labels.len(), "prediction/label length mismatch");
        let mut m = Confusion::default();
        for (&p, &y) in predictions.iter().zip(labels) {
            m.record(p, y);
        }
        m
    }

    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (actual, predicted) {
            (false, false) => self.a += 1,
            (false, true) => self.b += 1,
            (true, false) => self.c += 1,
            (true, true) => self.d += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn total_accuracy(&self) -> Option<f64> {
        ratio(self.a + self.d, self.total())
    }

    pub fn hit_rate(&self) -> Option<f64> {
        ratio(self.d, self.b + self.d)
    }

    pub fn cover_rate(&self) -> Option<f64> {
        ratio(self.d, self.c + self.d)
    }

    /// Fraction of actual positives.
    pub fn base_rate(&self) -> Option<f64> {
        ratio(self.c + self.d, self.total())
    }
}

fn ratio(n: u64, d: u64) -> Option<f64> {
    (d > 0).then(|| n as f64 / d as f64)
}

/// Confusion over the masked-in nodes of every sample.
pub fn evaluate(model: &GcnModel, hops: &HopBasis, samples: &[TrainingSample]) -> Result<Confusion, GcnError> {
    let mut m = Confusion::default();
    for s in samples {
        let (pred, _) = model.predict(hops, &s.features)?;
        for k in (0..pred.len()).filter(|&k| s.mask[k]) {
            m.record(pred[k], s.labels[k]);
        }
    }
    Ok(m)
}
