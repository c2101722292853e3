use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{FeatureMatrix, N_FEATURES};
use super::graph::HopBasis;
use super::GcnError;
use crate::grid::BASE_MVA;

/// Column of the shedding class in logits and probabilities.
pub const SHED: usize = 0;
/// Column of the normal class.
pub const NORMAL: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyper {
    pub k_hops: usize,
    pub f1: usize,
    pub f2: usize,
    /// Loss weight ratio `w1 / w2`; `w2` is fixed at 1.
    pub w_ratio: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            k_hops: 3,
            f1: 16,
            f2: 4,
            w_ratio: 20.0,
            lr: 0.005,
            epochs: 20,
            batch: 32,
            seed: 0,
        }
    }
}

impl Hyper {
    pub fn loss_weights(&self) -> (f64, f64) {
        (self.w_ratio, 1.0)
    }

    /// Trainable scalars; depends on the hyperparameters only.
    pub fn parameter_count(&self) -> usize {
        let hops = self.k_hops + 1;
        hops * N_FEATURES * self.f1 + self.f1 + hops * self.f1 * self.f2 + self.f2 + self.f2 * 2 + 2
    }
}

/// Divisors applied to raw features before the first layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureScale {
    pub topology: f64,
    pub protection: f64,
    pub branch_flow_mw: f64,
    pub bus_load_mw: f64,
}

impl Default for FeatureScale {
    fn default() -> Self {
        FeatureScale {
            topology: 1.0,
            protection: 1.0,
            branch_flow_mw: BASE_MVA,
            bus_load_mw: BASE_MVA,
        }
    }
}

impl FeatureScale {
    pub fn divisors(&self) -> [f64; N_FEATURES] {
        [self.topology, self.protection, self.branch_flow_mw, self.bus_load_mw]
    }

    pub fn apply(&self, x: &FeatureMatrix) -> DMatrix<f64> {
        let d = self.divisors();
        DMatrix::from_fn(x.0.nrows(), x.0.ncols(), |i, c| x.0[(i, c)] / d[c])
    }
}

/// Polynomial graph filter layer: `Y = sum_k Ā^k X W_k + 1 b^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphConv {
    /// One `C_in x F_out` matrix per hop, so `weights[k][(c, f)] = w_cfk`.
    pub weights: Vec<DMatrix<f64>>,
    pub bias: Vec<f64>,
}

impl GraphConv {
    fn zeros(hops: usize, c_in: usize, f_out: usize) -> Self {
        GraphConv {
            weights: vec![DMatrix::zeros(c_in, f_out); hops],
            bias: vec![0.0; f_out],
        }
    }

    pub fn c_in(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn f_out(&self) -> usize {
        self.bias.len()
    }

    fn apply(&self, propagated: &[DMatrix<f64>]) -> DMatrix<f64> {
        let l = propagated[0].nrows();
        let mut y = DMatrix::from_fn(l, self.f_out(), |_, f| self.bias[f]);
        for (p, w) in propagated.iter().zip(&self.weights) {
            y += p * w;
        }
        y
    }
}

/// Per-node dense layer `z = W^T h + b`, shared across nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `F2 x 2`.
    pub weights: DMatrix<f64>,
    pub bias: [f64; 2],
}

/// Everything trainable; also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub conv1: GraphConv,
    pub conv2: GraphConv,
    pub fc: Dense,
}

impl Parameters {
    pub fn zeros(h: &Hyper) -> Self {
        let hops = h.k_hops + 1;
        Parameters {
            conv1: GraphConv::zeros(hops, N_FEATURES, h.f1),
            conv2: GraphConv::zeros(hops, h.f1, h.f2),
            fc: Dense {
                weights: DMatrix::zeros(h.f2, 2),
                bias: [0.0; 2],
            },
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)`; biases start at zero so no unit
    /// of the narrow second layer begins switched off.
    pub fn random(h: &Hyper, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Parameters::zeros(h);
        let hops = (h.k_hops + 1) as f64;
        let bounds = [
            1.0 / (hops * N_FEATURES as f64).sqrt(),
            1.0 / (hops * h.f1 as f64).sqrt(),
            1.0 / (h.f2 as f64).sqrt(),
        ];
        p.visit_mut(|group, v| {
            let a = bounds[group];
            *v = rng.random_range(-a..=a);
        });
        p.conv1.bias.fill(0.0);
        p.conv2.bias.fill(0.0);
        p.fc.bias = [0.0; 2];
        p
    }

    /// Visits every scalar in a fixed order, tagging its layer (0, 1, 2).
    fn visit_mut(&mut self, mut f: impl FnMut(usize, &mut f64)) {
        for (g, layer) in [&mut self.conv1, &mut self.conv2].into_iter().enumerate() {
            for w in &mut layer.weights {
                for r in 0..w.nrows() {
                    for c in 0..w.ncols() {
                        f(g, &mut w[(r, c)]);
                    }
                }
            }
            for b in &mut layer.bias {
                f(g, b);
            }
        }
        let w = &mut self.fc.weights;
        for r in 0..w.nrows() {
            for c in 0..w.ncols() {
                f(2, &mut w[(r, c)]);
            }
        }
        for b in &mut self.fc.bias {
            f(2, b);
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.clone().visit_mut(|_, v| out.push(*v));
        out
    }

    pub fn set_from_slice(&mut self, values: &[f64]) {
        let mut it = values.iter();
        self.visit_mut(|_, v| *v = *it.next().expect("parameter slice too short"));
        assert!(it.next().is_none(), "parameter slice too long");
    }

    pub fn len(&self) -> usize {
        self.to_vec().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scale(&mut self, s: f64) {
        self.visit_mut(|_, v| *v *= s);
    }

    pub fn add_assign(&mut self, other: &Parameters) {
        let o = other.to_vec();
        let mut it = o.iter();
        self.visit_mut(|_, v| *v += it.next().unwrap());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub hyper: Hyper,
    pub graph_hash: String,
    pub params: Parameters,
    pub feature_scale: FeatureScale,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Scaled input, `L x C`.
    pub input: DMatrix<f64>,
    /// `Ā^k X` for each hop.
    pub input_hops: Vec<DMatrix<f64>>,
    pub pre1: DMatrix<f64>,
    pub h1: DMatrix<f64>,
    /// `Ā^k H1` for each hop.
    pub h1_hops: Vec<DMatrix<f64>>,
    pub pre2: DMatrix<f64>,
    pub h2: DMatrix<f64>,
    pub logits: DMatrix<f64>,
    /// Row-wise softmax of `logits`; column [`SHED`] is the shedding class.
    pub probs: DMatrix<f64>,
}

fn relu(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| v.max(0.0))
}

fn softmax_rows(z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut p = z.clone();
    for mut row in p.row_iter_mut() {
        let m = row.max();
        row.apply(|v| *v = (*v - m).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

impl GcnModel {
    pub fn new(hyper: Hyper, graph_hash: impl Into<String>) -> Self {
        Self::with_init_stream(hyper, graph_hash, 0)
    }

    /// Initialization drawn from stream `stream` of the seed's generator.
    pub fn with_init_stream(hyper: Hyper, graph_hash: impl Into<String>, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        rng.set_stream(stream);
        let params = Parameters::random(&hyper, &mut rng);
        GcnModel {
            hyper,
            graph_hash: graph_hash.into(),
            params,
            feature_scale: FeatureScale::default(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    fn check(&self, hops: &HopBasis, x: &FeatureMatrix) -> Result<(), GcnError> {
        if hops.graph_hash != self.graph_hash {
            return Err(GcnError::GraphMismatch {
                expected: self.graph_hash.clone(),
                got: hops.graph_hash.clone(),
            });
        }
        if hops.k_hops() < self.hyper.k_hops {
            return Err(GcnError::Shape(format!(
                "hop basis has K={} but the model needs K={}",
                hops.k_hops(),
                self.hyper.k_hops
            )));
        }
        if x.0.nrows() != hops.n_nodes() || x.0.ncols() != N_FEATURES {
            return Err(GcnError::Shape(format!(
                "feature matrix is {}x{}, expected {}x{}",
                x.0.nrows(),
                x.0.ncols(),
                hops.n_nodes(),
                N_FEATURES
            )));
        }
        Ok(())
    }

    pub fn forward(&self, hops: &HopBasis, x: &FeatureMatrix) -> Result<ForwardCache, GcnError> {
        self.check(hops, x)?;
        let k = self.hyper.k_hops;
        let input = self.feature_scale.apply(x);
        let input_hops: Vec<_> = hops.powers[..=k].iter().map(|a| a * &input).collect();
        let pre1 = self.params.conv1.apply(&input_hops);
        let h1 = relu(&pre1);
        let h1_hops: Vec<_> = hops.powers[..=k].iter().map(|a| a * &h1).collect();
        let pre2 = self.params.conv2.apply(&h1_hops);
        let h2 = relu(&pre2);
        let fc = &self.params.fc;
        let mut logits = &h2 * &fc.weights;
        for mut row in logits.row_iter_mut() {
            row[0] += fc.bias[0];
            row[1] += fc.bias[1];
        }
        let probs = softmax_rows(&logits);
        Ok(ForwardCache {
            input,
            input_hops,
            pre1,
            h1,
            h1_hops,
            pre2,
            h2,
            logits,
            probs,
        })
    }

    /// Argmax labels (strictly `p_shed > 0.5`) and the shedding probabilities.
    pub fn predict(&self, hops: &HopBasis, x: &FeatureMatrix) -> Result<(Vec<bool>, Vec<f64>), GcnError> {
        let cache = self.forward(hops, x)?;
        let p: Vec<f64> = cache.probs.column(SHED).iter().copied().collect();
        Ok((p.iter().map(|&v| v > 0.5).collect(), p))
    }

    /// Gradient of [`loss`] with respect to every parameter.
    pub fn backward(
        &self,
        hops: &HopBasis,
        cache: &ForwardCache,
        labels: &[bool],
        mask: &[bool],
        w1: f64,
        w2: f64,
    ) -> Parameters {
        let mut g = Parameters::zeros(&self.hyper);
        let n = mask.iter().filter(|m| **m).count();
        if n == 0 {
            return g;
        }
        let l = cache.probs.nrows();
        let k = self.hyper.k_hops;

        let mut dz = DMatrix::<f64>::zeros(l, 2);
        for i in (0..l).filter(|&i| mask[i]) {
            let (target, w) = if labels[i] { (SHED, w1) } else { (NORMAL, w2) };
            let c = w / n as f64;
            for j in 0..2 {
                let y = if j == target { 1.0 } else { 0.0 };
                dz[(i, j)] = c * (cache.probs[(i, j)] - y);
            }
        }

        g.fc.weights = cache.h2.transpose() * &dz;
        g.fc.bias = [dz.column(0).sum(), dz.column(1).sum()];
        let dh2 = &dz * self.params.fc.weights.transpose();
        let dpre2 = dh2.zip_map(&cache.pre2, |d, p| if p > 0.0 { d } else { 0.0 });

        conv_backward(&mut g.conv2, &cache.h1_hops, &dpre2);
        let mut dh1 = DMatrix::<f64>::zeros(l, self.hyper.f1);
        for (a, w) in hops.powers[..=k].iter().zip(&self.params.conv2.weights) {
            // Ā^k is symmetric
            dh1 += a * (&dpre2 * w.transpose());
        }
        let dpre1 = dh1.zip_map(&cache.pre1, |d, p| if p > 0.0 { d } else { 0.0 });
        conv_backward(&mut g.conv1, &cache.input_hops, &dpre1);
        g
    }
}

fn conv_backward(g: &mut GraphConv, propagated: &[DMatrix<f64>], dy: &DMatrix<f64>) {
    for (gw, p) in g.weights.iter_mut().zip(propagated) {
        *gw = p.transpose() * dy;
    }
    for (f, b) in g.bias.iter_mut().enumerate() {
        *b = dy.column(f).sum();
    }
}

/// Weighted negative log-likelihood averaged over masked-in nodes.
pub fn loss(probs: &DMatrix<f64>, labels: &[bool], mask: &[bool], w1: f64, w2: f64) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for i in (0..probs.nrows()).filter(|&i| mask[i]) {
        n += 1;
        total -= if labels[i] {
            w1 * probs[(i, SHED)].ln()
        } else {
            w2 * probs[(i, NORMAL)].ln()
        };
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::gcn::graph::{build_line_graph, LineGraph};

    fn small_graph() -> LineGraph {
        let net = cases::synthetic_grid(&cases::SyntheticSpec::new(8, 4, 3));
        build_line_graph(&net)
    }

    fn random_features(l: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureMatrix(DMatrix::from_fn(l, N_FEATURES, |_, c| match c {
            0 => f64::from(rng.random_bool(0.2) as u8),
            1 => rng.random_range(0.0..1.2),
            _ => rng.random_range(0.0..300.0),
        }))
    }

    fn small_hyper(k: usize) -> Hyper {
        Hyper {
            k_hops: k,
            f1: 5,
            f2: 3,
            seed: 11,
            ..Hyper::default()
        }
    }

    #[test]
    fn zero_model_gives_even_odds() {
        let lg = small_graph();
        let h = small_hyper(2);
        let mut m = GcnModel::new(h.clone(), lg.hash.clone());
        m.params = Parameters::zeros(&h);
        let hops = HopBasis::new(&lg, 2);
        let c = m.forward(&hops, &random_features(lg.n_nodes(), 1)).unwrap();
        assert!(c.probs.iter().all(|p| *p == 0.5));
        let (labels, _) = m.predict(&hops, &random_features(lg.n_nodes(), 1)).unwrap();
        assert!(labels.iter().all(|y| !y));
    }

    #[test]
    fn forced_shed_bias_predicts_all_positive() {
        let lg = small_graph();
        let h = small_hyper(1);
        let mut m = GcnModel::new(h.clone(), lg.hash.clone());
        m.params.fc.weights.fill(0.0);
        m.params.fc.bias = [5.0, -5.0];
        let (labels, _) = m.predict(&HopBasis::new(&lg, 1), &random_features(lg.n_nodes(), 2)).unwrap();
        assert!(labels.iter().all(|y| *y));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let lg = small_graph();
        let m = GcnModel::new(small_hyper(3), lg.hash.clone());
        let c = m.forward(&HopBasis::new(&lg, 3), &random_features(lg.n_nodes(), 3)).unwrap();
        for row in c.probs.row_iter() {
            assert!((row.sum() - 1.0).abs() <= 1e-12);
            assert!(row.iter().all(|p| *p > 0.0));
        }
    }

    #[test]
    fn graph_hash_mismatch_is_rejected() {
        let lg = small_graph();
        let m = GcnModel::new(small_hyper(1), "other");
        let err = m.forward(&HopBasis::new(&lg, 1), &random_features(lg.n_nodes(), 0));
        assert!(matches!(err, Err(GcnError::GraphMismatch { .. })));
    }

    #[test]
    fn feature_shape_is_checked() {
        let lg = small_graph();
        let m = GcnModel::new(small_hyper(1), lg.hash.clone());
        let err = m.forward(&HopBasis::new(&lg, 1), &random_features(lg.n_nodes() + 1, 0));
        assert!(matches!(err, Err(GcnError::Shape(_))));
    }

    /// Straight-line evaluation with explicit per-(c, f) filters `G_cf`.
    fn dense_oracle(m: &GcnModel, lg: &LineGraph, x: &DMatrix<f64>) -> DMatrix<f64> {
        let l = lg.n_nodes();
        let mut powers = vec![DMatrix::<f64>::identity(l, l)];
        for k in 1..=m.hyper.k_hops {
            powers.push(&powers[k - 1] * &lg.normalized);
        }
        let layer = |conv: &GraphConv, input: &DMatrix<f64>| {
            let mut out = DMatrix::<f64>::zeros(l, conv.f_out());
            for f in 0..conv.f_out() {
                let mut y = nalgebra::DVector::from_element(l, conv.bias[f]);
                for c in 0..conv.c_in() {
                    let mut g = DMatrix::<f64>::zeros(l, l);
                    for (k, a) in powers.iter().enumerate() {
                        g += a * conv.weights[k][(c, f)];
                    }
                    y += g * input.column(c);
                }
                out.set_column(f, &y.map(|v| v.max(0.0)));
            }
            out
        };
        let h1 = layer(&m.params.conv1, x);
        let h2 = layer(&m.params.conv2, &h1);
        let mut p = DMatrix::<f64>::zeros(l, 2);
        for i in 0..l {
            let z: Vec<f64> = (0..2)
                .map(|j| m.params.fc.bias[j] + (0..m.hyper.f2).map(|f| h2[(i, f)] * m.params.fc.weights[(f, j)]).sum::<f64>())
                .collect();
            let e0 = z[0].exp();
            let e1 = z[1].exp();
            p[(i, 0)] = e0 / (e0 + e1);
            p[(i, 1)] = e1 / (e0 + e1);
        }
        p
    }

    #[test]
    fn forward_matches_dense_oracle() {
        let lg = small_graph();
        for seed in 0..4 {
            let h = Hyper { seed, ..small_hyper(3) };
            let m = GcnModel::new(h, lg.hash.clone());
            let x = random_features(lg.n_nodes(), seed + 100);
            let got = m.forward(&HopBasis::new(&lg, 3), &x).unwrap().probs;
            let want = dense_oracle(&m, &lg, &m.feature_scale.apply(&x));
            assert!((got - want).amax() < 1e-12);
        }
    }

    #[test]
    fn hop_zero_model_is_node_local() {
        let lg = small_graph();
        let m = GcnModel::new(small_hyper(0), lg.hash.clone());
        let hops = HopBasis::new(&lg, 0);
        let x = random_features(lg.n_nodes(), 5);
        let base = m.forward(&hops, &x).unwrap().probs;
        let mut y = x.clone();
        y.0[(3, 2)] += 250.0;
        y.0[(3, 1)] += 0.5;
        let moved = m.forward(&hops, &y).unwrap().probs;
        for i in (0..lg.n_nodes()).filter(|&i| i != 3) {
            assert_eq!(base.row(i), moved.row(i));
        }
    }

    #[test]
    fn loss_closed_forms() {
        let half = DMatrix::from_element(5, 2, 0.5);
        let l = loss(&half, &[false; 5], &[true; 5], 20.0, 1.0);
        assert!((l - 2f64.ln()).abs() < 1e-15);

        // hand-computed weighted mean, masked node excluded
        let p = DMatrix::from_row_slice(4, 2, &[0.8, 0.2, 0.3, 0.7, 0.1, 0.9, 0.6, 0.4]);
        let labels = [true, true, false, false];
        let mask = [true, true, true, false];
        let want = -(20.0 * 0.8f64.ln() + 20.0 * 0.3f64.ln() + 0.9f64.ln()) / 3.0;
        assert!((loss(&p, &labels, &mask, 20.0, 1.0) - want).abs() < 1e-14);

        let confident = DMatrix::from_row_slice(2, 2, &[1.0 - 1e-15, 1e-15, 1e-15, 1.0 - 1e-15]);
        assert!(loss(&confident, &[true, false], &[true, true], 20.0, 1.0) < 1e-12);
        assert_eq!(loss(&half, &[false; 5], &[false; 5], 20.0, 1.0), 0.0);
    }

    #[test]
    fn parameter_count_matches_formula() {
        for (k, f1, f2) in [(0, 1, 1), (3, 16, 4), (2, 7, 5)] {
            let h = Hyper { k_hops: k, f1, f2, ..Hyper::default() };
            let m = GcnModel::new(h.clone(), "g");
            let want = (k + 1) * 4 * f1 + f1 + (k + 1) * f1 * f2 + f2 + f2 * 2 + 2;
            assert_eq!(m.parameter_count(), want);
            assert_eq!(h.parameter_count(), want);
        }
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let h = Hyper::default();
        let a = GcnModel::new(h.clone(), "g");
        assert_eq!(a, GcnModel::new(h.clone(), "g"));
        assert_ne!(a.params, GcnModel::new(Hyper { seed: 1, ..h }, "g").params);
        let bound = 1.0 / ((4 * 4) as f64).sqrt();
        assert!(a.params.conv1.weights.iter().all(|w| w.amax() <= bound));
    }

    pub(crate) fn gradient_check(lg: &LineGraph, h: &Hyper, seed: u64) -> f64 {
        let m = GcnModel::new(h.clone(), lg.hash.clone());
        let hops = HopBasis::new(lg, h.k_hops);
        let x = random_features(lg.n_nodes(), seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<bool> = (0..lg.n_nodes()).map(|_| rng.random_bool(0.3)).collect();
        let mask: Vec<bool> = (0..lg.n_nodes()).map(|_| rng.random_bool(0.85)).collect();
        let (w1, w2) = h.loss_weights();
        let cache = m.forward(&hops, &x).unwrap();
        let grad = m.backward(&hops, &cache, &labels, &mask, w1, w2).to_vec();
        let theta = m.params.to_vec();
        let eval = |t: &[f64]| {
            let mut mm = m.clone();
            mm.params.set_from_slice(t);
            loss(&mm.forward(&hops, &x).unwrap().probs, &labels, &mask, w1, w2)
        };
        let step = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..theta.len() {
            let mut plus = theta.clone();
            plus[i] += step;
            let mut minus = theta.clone();
            minus[i] -= step;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * step);
            let scale = grad[i].abs().max(fd.abs());
            if scale > 1e-9 {
                worst = worst.max((grad[i] - fd).abs() / scale);
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        let lg = small_graph();
        for seed in 0..3 {
            let err = gradient_check(&lg, &Hyper { seed, ..small_hyper(2) }, seed);
            assert!(err < 1e-5, "relative error {err}");
        }
    }

    #[test]
    fn zero_mask_and_weight_scaling() {
        let lg = small_graph();
        let h = small_hyper(2);
        let m = GcnModel::new(h.clone(), lg.hash.clone());
        let hops = HopBasis::new(&lg, 2);
        let x = random_features(lg.n_nodes(), 9);
        let cache = m.forward(&hops, &x).unwrap();
        let l = lg.n_nodes();
        let labels: Vec<bool> = (0..l).map(|i| i % 3 == 0).collect();
        let none = m.backward(&hops, &cache, &labels, &vec![false; l], 20.0, 1.0);
        assert!(none.to_vec().iter().all(|g| *g == 0.0));

        let once = m.backward(&hops, &cache, &labels, &vec![true; l], 20.0, 1.0).to_vec();
        let twice = m.backward(&hops, &cache, &labels, &vec![true; l], 40.0, 2.0).to_vec();
        for (a, b) in once.iter().zip(&twice) {
            assert!((2.0 * a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }
}
