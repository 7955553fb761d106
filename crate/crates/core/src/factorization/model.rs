use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::encoder::sigmoid;
use crate::evaluation::Scorer;
use crate::features::{DenseItemEmbeddings, FeatureMatrix};
use crate::{Error, Result};

/// How a dense item embedding enters the score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetadataMode {
    #[serde(rename = "none")]
    None,
    /// Linear map of the embedding added to the item bias.
    #[serde(rename = "bias")]
    Bias,
    /// As `Bias`, plus a learned projection of the embedding added to the item vector.
    #[serde(rename = "bias+factors")]
    BiasFactors,
}

impl std::str::FromStr for MetadataMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(MetadataMode::None),
            "bias" => Ok(MetadataMode::Bias),
            "bias+factors" => Ok(MetadataMode::BiasFactors),
            other => Err(Error::Config(format!("unknown metadata mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseChannel {
    /// Embedding → bias weights, length `dim_dense`.
    pub bias_weights: Array1<f64>,
    pub intercept: f64,
    /// `dim_dense × d`, present in `bias+factors` mode.
    pub factors: Option<Array2<f64>>,
}

impl DenseChannel {
    fn zeros(dim: usize, d: usize, mode: MetadataMode) -> Self {
        DenseChannel {
            bias_weights: Array1::zeros(dim),
            intercept: 0.0,
            factors: (mode == MetadataMode::BiasFactors).then(|| Array2::zeros((dim, d))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
struct Accumulators {
    user_vectors: Array2<f64>,
    item_vectors: Array2<f64>,
    item_biases: Array1<f64>,
    dense_bias: Array1<f64>,
    intercept: f64,
    dense_factors: Option<Array2<f64>>,
}

/// Latent vectors and biases per feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationModel {
    pub d: usize,
    pub user_vectors: Array2<f64>,
    pub item_vectors: Array2<f64>,
    pub item_biases: Array1<f64>,
    pub dense: Option<DenseChannel>,
    #[serde(skip)]
    accum: Accumulators,
}

/// Feature rows a model is scored against.
#[derive(Clone, Copy, Debug)]
pub struct FeatureSet<'a> {
    pub users: &'a FeatureMatrix,
    pub items: &'a FeatureMatrix,
    pub dense: Option<&'a DenseItemEmbeddings>,
}

impl<'a> FeatureSet<'a> {
    pub fn new(users: &'a FeatureMatrix, items: &'a FeatureMatrix, dense: Option<&'a DenseItemEmbeddings>) -> Self {
        FeatureSet { users, items, dense }
    }

    pub fn n_users(&self) -> usize {
        self.users.n_items
    }

    pub fn n_items(&self) -> usize {
        self.items.n_items
    }
}

/// Pairwise objective of a (user, positive, negative) triplet as a function of
/// δ = s_pos − s_neg.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairLoss {
    /// −ln σ(δ)
    Bpr,
    /// weight · max(0, 1 − δ)
    Warp { weight: f64 },
}

impl PairLoss {
    pub fn value(self, delta: f64) -> f64 {
        match self {
            PairLoss::Bpr => -log_sigmoid(delta),
            PairLoss::Warp { weight } => weight * (1.0 - delta).max(0.0),
        }
    }

    /// dL/dδ
    pub fn slope(self, delta: f64) -> f64 {
        match self {
            PairLoss::Bpr => -sigmoid(-delta),
            PairLoss::Warp { weight } => {
                if delta < 1.0 {
                    -weight
                } else {
                    0.0
                }
            }
        }
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Gradient of a triplet objective restricted to the parameters it touches.
#[derive(Clone, Debug, PartialEq)]
pub struct TripletGradient {
    pub user_rows: Vec<(u32, Array1<f64>)>,
    /// (feature, vector gradient, bias gradient)
    pub item_rows: Vec<(u32, Array1<f64>, f64)>,
    pub dense_bias: Option<(Array1<f64>, f64)>,
    pub dense_factors: Option<Array2<f64>>,
}

impl TripletGradient {
    pub fn is_finite(&self) -> bool {
        self.user_rows.iter().all(|(_, g)| g.iter().all(|v| v.is_finite()))
            && self
                .item_rows
                .iter()
                .all(|(_, g, b)| b.is_finite() && g.iter().all(|v| v.is_finite()))
            && self
                .dense_bias
                .as_ref()
                .map_or(true, |(w, c)| c.is_finite() && w.iter().all(|v| v.is_finite()))
            && self
                .dense_factors
                .as_ref()
                .map_or(true, |p| p.iter().all(|v| v.is_finite()))
    }
}

/// Item-side coefficients c_g = w_g(pos) − w_g(neg) over the union of both rows.
fn merge_item_rows(pos: &[(u32, f64)], neg: &[(u32, f64)]) -> Vec<(u32, f64)> {
    let mut out = Vec::with_capacity(pos.len() + neg.len());
    let (mut i, mut j) = (0, 0);
    while i < pos.len() || j < neg.len() {
        match (pos.get(i), neg.get(j)) {
            (Some(&(fp, wp)), Some(&(fn_, wn))) if fp == fn_ => {
                out.push((fp, wp - wn));
                i += 1;
                j += 1;
            }
            (Some(&(fp, wp)), Some(&(fn_, _))) if fp < fn_ => {
                out.push((fp, wp));
                i += 1;
            }
            (Some(&(fp, wp)), None) => {
                out.push((fp, wp));
                i += 1;
            }
            (_, Some(&(fn_, wn))) => {
                out.push((fn_, -wn));
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

impl FactorizationModel {
    /// Latent vectors ~ N(0, (1/d)²); biases and dense projections start at zero.
    pub fn new<R: Rng>(
        d: usize,
        n_user_features: usize,
        n_item_features: usize,
        dense_dim: Option<usize>,
        mode: MetadataMode,
        rng: &mut R,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("latent dimension must be positive".into()));
        }
        let dense = match (mode, dense_dim) {
            (MetadataMode::None, _) => None,
            (_, Some(dim)) => Some(DenseChannel::zeros(dim, d, mode)),
            (_, None) => {
                return Err(Error::Config(
                    "dense metadata mode requires an embedding dimension".into(),
                ))
            }
        };
        let normal = Normal::new(0.0, 1.0 / d as f64).expect("valid std");
        let user_vectors = Array2::from_shape_simple_fn((n_user_features, d), || normal.sample(rng));
        let item_vectors = Array2::from_shape_simple_fn((n_item_features, d), || normal.sample(rng));
        let mut model = FactorizationModel {
            d,
            user_vectors,
            item_vectors,
            item_biases: Array1::zeros(n_item_features),
            dense,
            accum: Accumulators::default(),
        };
        model.reset_accumulators();
        Ok(model)
    }

    /// Sets every Adagrad accumulator to 1.
    pub fn reset_accumulators(&mut self) {
        self.accum = Accumulators {
            user_vectors: Array2::ones(self.user_vectors.dim()),
            item_vectors: Array2::ones(self.item_vectors.dim()),
            item_biases: Array1::ones(self.item_biases.dim()),
            dense_bias: self
                .dense
                .as_ref()
                .map_or_else(|| Array1::zeros(0), |c| Array1::ones(c.bias_weights.dim())),
            intercept: 1.0,
            dense_factors: self
                .dense
                .as_ref()
                .and_then(|c| c.factors.as_ref())
                .map(|p| Array2::ones(p.dim())),
        };
    }

    pub fn n_user_features(&self) -> usize {
        self.user_vectors.nrows()
    }

    pub fn n_item_features(&self) -> usize {
        self.item_vectors.nrows()
    }

    pub fn mode(&self) -> MetadataMode {
        match &self.dense {
            None => MetadataMode::None,
            Some(c) if c.factors.is_some() => MetadataMode::BiasFactors,
            Some(_) => MetadataMode::Bias,
        }
    }

    pub fn dense_dim(&self) -> Option<usize> {
        self.dense.as_ref().map(|c| c.bias_weights.len())
    }

    pub fn all_finite(&self) -> bool {
        let dense_ok = self.dense.as_ref().map_or(true, |c| {
            c.intercept.is_finite()
                && c.bias_weights.iter().all(|v| v.is_finite())
                && c.factors.as_ref().map_or(true, |p| p.iter().all(|v| v.is_finite()))
        });
        dense_ok
            && self.user_vectors.iter().all(|v| v.is_finite())
            && self.item_vectors.iter().all(|v| v.is_finite())
            && self.item_biases.iter().all(|v| v.is_finite())
    }

    /// Checks that `fs` has the feature spaces this model was built for.
    pub fn check_features(&self, fs: &FeatureSet) -> Result<()> {
        if fs.users.n_features != self.n_user_features() || fs.items.n_features != self.n_item_features() {
            return Err(Error::Dimension(format!(
                "model has {} user / {} item features, data provides {} / {}",
                self.n_user_features(),
                self.n_item_features(),
                fs.users.n_features,
                fs.items.n_features
            )));
        }
        match (self.dense_dim(), fs.dense) {
            (None, _) => Ok(()),
            (Some(dim), Some(e)) if e.dim() == dim && e.n_items() == fs.n_items() => Ok(()),
            (Some(dim), Some(e)) => Err(Error::Dimension(format!(
                "model expects {dim}-dimensional embeddings for {} items, got {} × {}",
                fs.n_items(),
                e.n_items(),
                e.dim()
            ))),
            (Some(_), None) => Err(Error::Config(
                "model uses dense metadata but no embeddings were given".into(),
            )),
        }
    }

    fn dense_row<'f>(&self, fs: &FeatureSet<'f>, item: usize) -> Option<ArrayView1<'f, f64>> {
        match (&self.dense, fs.dense) {
            (Some(_), Some(e)) => Some(e.row(item)),
            _ => None,
        }
    }

    /// q_i
    pub fn user_representation(&self, fs: &FeatureSet, user: usize) -> Array1<f64> {
        let mut q = Array1::zeros(self.d);
        for &(f, w) in fs.users.row(user) {
            q.scaled_add(w, &self.user_vectors.row(f as usize));
        }
        q
    }

    /// (p_j, b_j)
    pub fn item_representation(&self, fs: &FeatureSet, item: usize) -> (Array1<f64>, f64) {
        let mut p = Array1::zeros(self.d);
        let mut b = 0.0;
        for &(g, w) in fs.items.row(item) {
            p.scaled_add(w, &self.item_vectors.row(g as usize));
            b += w * self.item_biases[g as usize];
        }
        if let (Some(c), Some(e)) = (&self.dense, self.dense_row(fs, item)) {
            b += c.bias_weights.dot(&e) + c.intercept;
            if let Some(proj) = &c.factors {
                p += &proj.t().dot(&e);
            }
        }
        (p, b)
    }

    fn check_index(&self, fs: &FeatureSet, user: usize, item: usize) -> Result<()> {
        if user >= fs.n_users() || item >= fs.n_items() {
            return Err(Error::Data(format!(
                "({user}, {item}) outside {} users × {} items",
                fs.n_users(),
                fs.n_items()
            )));
        }
        Ok(())
    }

    /// Raw score s = q_i · p_j + b_j.
    pub fn score(&self, fs: &FeatureSet, user: usize, item: usize) -> Result<f64> {
        self.check_index(fs, user, item)?;
        let q = self.user_representation(fs, user);
        let (p, b) = self.item_representation(fs, item);
        Ok(q.dot(&p) + b)
    }

    /// σ(s)
    pub fn predict_proba(&self, fs: &FeatureSet, user: usize, item: usize) -> Result<f64> {
        self.score(fs, user, item).map(sigmoid)
    }

    /// Triplet objective: pairwise loss of δ = s_pos − s_neg plus λ‖θ‖² over
    /// the parameters the triplet touches.
    pub fn triplet_objective(
        &self,
        fs: &FeatureSet,
        user: usize,
        pos: usize,
        neg: usize,
        loss: PairLoss,
        lambda: f64,
    ) -> f64 {
        let q = self.user_representation(fs, user);
        let (pp, bp) = self.item_representation(fs, pos);
        let (pn, bn) = self.item_representation(fs, neg);
        let delta = q.dot(&pp) + bp - q.dot(&pn) - bn;
        let mut reg = 0.0;
        for &(f, _) in fs.users.row(user) {
            reg += self
                .user_vectors
                .row(f as usize)
                .dot(&self.user_vectors.row(f as usize));
        }
        for (g, _) in merge_item_rows(fs.items.row(pos), fs.items.row(neg)) {
            let g = g as usize;
            reg += self.item_vectors.row(g).dot(&self.item_vectors.row(g)) + self.item_biases[g].powi(2);
        }
        if let Some(c) = &self.dense {
            reg += c.bias_weights.dot(&c.bias_weights) + c.intercept * c.intercept;
            if let Some(p) = &c.factors {
                reg += p.iter().map(|v| v * v).sum::<f64>();
            }
        }
        loss.value(delta) + lambda * reg
    }

    /// Analytic gradient of [`triplet_objective`](Self::triplet_objective).
    /// Also returns δ.
    pub fn triplet_gradient(
        &self,
        fs: &FeatureSet,
        user: usize,
        pos: usize,
        neg: usize,
        loss: PairLoss,
        lambda: f64,
    ) -> (TripletGradient, f64) {
        let q = self.user_representation(fs, user);
        let (pp, bp) = self.item_representation(fs, pos);
        let (pn, bn) = self.item_representation(fs, neg);
        let delta = q.dot(&pp) + bp - q.dot(&pn) - bn;
        let slope = loss.slope(delta);
        let two_lambda = 2.0 * lambda;

        let p_diff = &pp - &pn;
        let user_rows = fs
            .users
            .row(user)
            .iter()
            .map(|&(f, w)| {
                let mut g = &p_diff * (slope * w);
                g.scaled_add(two_lambda, &self.user_vectors.row(f as usize));
                (f, g)
            })
            .collect();
        let item_rows = merge_item_rows(fs.items.row(pos), fs.items.row(neg))
            .into_iter()
            .map(|(g, c)| {
                let gi = g as usize;
                let mut gv = &q * (slope * c);
                gv.scaled_add(two_lambda, &self.item_vectors.row(gi));
                let gb = slope * c + two_lambda * self.item_biases[gi];
                (g, gv, gb)
            })
            .collect();
        let (dense_bias, dense_factors) = match (&self.dense, self.dense_row(fs, pos), self.dense_row(fs, neg)) {
            (Some(c), Some(ep), Some(en)) => {
                let e_diff = &ep - &en;
                let mut gw = &e_diff * slope;
                gw.scaled_add(two_lambda, &c.bias_weights);
                let gc = two_lambda * c.intercept;
                let gp = c.factors.as_ref().map(|proj| {
                    let mut gp = proj * two_lambda;
                    for (k, &ek) in e_diff.iter().enumerate() {
                        if ek != 0.0 {
                            gp.row_mut(k).scaled_add(slope * ek, &q);
                        }
                    }
                    gp
                });
                (Some((gw, gc)), gp)
            }
            _ => (None, None),
        };
        (
            TripletGradient {
                user_rows,
                item_rows,
                dense_bias,
                dense_factors,
            },
            delta,
        )
    }

    /// Adagrad step: θ ← θ − lr · g / √G with G accumulating g².
    pub fn apply_gradient(&mut self, grad: &TripletGradient, learning_rate: f64) {
        fn step(theta: &mut f64, acc: &mut f64, g: f64, lr: f64) {
            *acc += g * g;
            *theta -= lr * g / acc.sqrt();
        }
        for (f, g) in &grad.user_rows {
            let f = *f as usize;
            let mut theta = self.user_vectors.row_mut(f);
            let mut acc = self.accum.user_vectors.row_mut(f);
            for k in 0..self.d {
                step(&mut theta[k], &mut acc[k], g[k], learning_rate);
            }
        }
        for (gidx, gv, gb) in &grad.item_rows {
            let gi = *gidx as usize;
            let mut theta = self.item_vectors.row_mut(gi);
            let mut acc = self.accum.item_vectors.row_mut(gi);
            for k in 0..self.d {
                step(&mut theta[k], &mut acc[k], gv[k], learning_rate);
            }
            step(
                &mut self.item_biases[gi],
                &mut self.accum.item_biases[gi],
                *gb,
                learning_rate,
            );
        }
        if let Some(c) = self.dense.as_mut() {
            if let Some((gw, gc)) = &grad.dense_bias {
                for k in 0..gw.len() {
                    step(
                        &mut c.bias_weights[k],
                        &mut self.accum.dense_bias[k],
                        gw[k],
                        learning_rate,
                    );
                }
                step(&mut c.intercept, &mut self.accum.intercept, *gc, learning_rate);
            }
            if let (Some(proj), Some(gp), Some(acc)) = (
                c.factors.as_mut(),
                &grad.dense_factors,
                self.accum.dense_factors.as_mut(),
            ) {
                ndarray::Zip::from(proj)
                    .and(acc)
                    .and(gp)
                    .for_each(|t, a, &g| step(t, a, g, learning_rate));
            }
        }
    }

    /// Precomputes item representations for repeated scoring.
    pub fn bind<'a>(&'a self, fs: FeatureSet<'a>) -> Result<BoundModel<'a>> {
        self.check_features(&fs)?;
        let n = fs.n_items();
        let mut item_vectors = Array2::zeros((n, self.d));
        let mut item_bias = Array1::zeros(n);
        for j in 0..n {
            let (p, b) = self.item_representation(&fs, j);
            item_vectors.row_mut(j).assign(&p);
            item_bias[j] = b;
        }
        Ok(BoundModel {
            model: self,
            features: fs,
            item_vectors,
            item_bias,
        })
    }
}

/// A model together with its features, with item representations cached.
pub struct BoundModel<'a> {
    model: &'a FactorizationModel,
    features: FeatureSet<'a>,
    item_vectors: Array2<f64>,
    item_bias: Array1<f64>,
}

impl BoundModel<'_> {
    pub fn model(&self) -> &FactorizationModel {
        self.model
    }

    pub fn n_users(&self) -> usize {
        self.features.n_users()
    }
}

impl Scorer for BoundModel<'_> {
    fn n_items(&self) -> usize {
        self.item_bias.len()
    }

    fn score_items(&self, user: usize, out: &mut [f64]) {
        let q = self.model.user_representation(&self.features, user);
        let scores = self.item_vectors.dot(&q) + &self.item_bias;
        out.copy_from_slice(scores.as_slice().expect("contiguous"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::build_identity_features;

    #[test]
    fn merge_coefficients() {
        let pos = [(0, 1.0), (3, 0.5), (7, 1.0)];
        let neg = [(1, 1.0), (3, 0.25), (9, 2.0)];
        assert_eq!(
            merge_item_rows(&pos, &neg),
            vec![(0, 1.0), (1, -1.0), (3, 0.25), (7, 1.0), (9, -2.0)]
        );
        assert_eq!(merge_item_rows(&[], &neg), vec![(1, -1.0), (3, -0.25), (9, -2.0)]);
    }

    #[test]
    fn zero_model_scores_zero() {
        let users = build_identity_features(2).unwrap();
        let items = build_identity_features(3).unwrap();
        let fs = FeatureSet::new(&users, &items, None);
        let mut m = FactorizationModel::new(4, 2, 3, None, MetadataMode::None, &mut crate::rng::seeded(1)).unwrap();
        m.user_vectors.fill(0.0);
        m.item_vectors.fill(0.0);
        assert_eq!(m.score(&fs, 1, 2).unwrap(), 0.0);
        assert_eq!(m.predict_proba(&fs, 1, 2).unwrap(), 0.5);
        assert!(m.score(&fs, 2, 0).is_err());
        assert!(m.score(&fs, 0, 3).is_err());
    }

    #[test]
    fn hand_set_identity_score() {
        let users = build_identity_features(1).unwrap();
        let items = build_identity_features(1).unwrap();
        let fs = FeatureSet::new(&users, &items, None);
        let mut m = FactorizationModel::new(2, 1, 1, None, MetadataMode::None, &mut crate::rng::seeded(1)).unwrap();
        m.user_vectors.row_mut(0).assign(&ndarray::array![1.0, 0.0]);
        m.item_vectors.row_mut(0).assign(&ndarray::array![2.0, 0.0]);
        m.item_biases[0] = 0.5;
        assert_eq!(m.score(&fs, 0, 0).unwrap(), 2.5);
        m.item_biases[0] = 3f64.ln() - 2.0;
        assert!((m.predict_proba(&fs, 0, 0).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn pair_losses() {
        assert!((PairLoss::Bpr.slope(0.0) + 0.5).abs() < 1e-15);
        assert!(PairLoss::Bpr.slope(50.0).abs() < 1e-20);
        assert!((PairLoss::Bpr.value(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(PairLoss::Bpr.value(-800.0).is_finite());
        let w = PairLoss::Warp { weight: 2.0 };
        assert_eq!(w.value(0.25), 1.5);
        assert_eq!(w.value(3.0), 0.0);
        assert_eq!(w.slope(0.25), -2.0);
        assert_eq!(w.slope(1.5), 0.0);
    }

    #[test]
    fn dense_mode_requires_dimension() {
        let r = FactorizationModel::new(4, 1, 1, None, MetadataMode::Bias, &mut crate::rng::seeded(1));
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
