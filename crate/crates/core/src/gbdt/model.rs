use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tree::{TreeBuilder, TreeNode};
use super::{GbdtError, GbdtParams, Result};
use crate::telemetry::{feature_names, Dataset, TelemetryRecord};

/// Row-major feature matrix with binary targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    values: Vec<f64>,
    labels: Vec<f64>,
    n_features: usize,
    feature_names: Vec<String>,
}

impl TrainingSet {
    pub fn new(rows: &[Vec<f64>], labels: &[u8], feature_names: Vec<String>) -> Result<Self> {
        let n_features = feature_names.len();
        if rows.len() != labels.len() {
            return Err(GbdtError::Training(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut values = Vec::with_capacity(rows.len() * n_features);
        for row in rows {
            if row.len() != n_features {
                return Err(GbdtError::Arity {
                    expected: n_features,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(GbdtError::Training(format!("label {bad} is not 0/1")));
        }
        Ok(Self {
            values,
            labels: labels.iter().map(|&l| f64::from(l)).collect(),
            n_features,
            feature_names,
        })
    }

    pub fn from_dataset(dataset: &Dataset) -> Self {
        let mut values = Vec::with_capacity(dataset.len() * crate::telemetry::NUM_FEATURES);
        let mut labels = Vec::with_capacity(dataset.len());
        for r in dataset.records() {
            values.extend_from_slice(&r.features);
            labels.push(r.label.as_f64());
        }
        Self {
            values,
            labels,
            n_features: crate::telemetry::NUM_FEATURES,
            feature_names: feature_names(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.n_features..(r + 1) * self.n_features]
    }

    pub fn value(&self, r: usize, feature: usize) -> f64 {
        self.values[r * self.n_features + feature]
    }

    pub fn label(&self, r: usize) -> f64 {
        self.labels[r]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logistic loss of raw score `score` against target `y ∈ {0, 1}`.
pub fn log_loss(y: f64, score: f64) -> f64 {
    let softplus = score.max(0.0) + (-score.abs()).exp().ln_1p();
    softplus - y * score
}

fn mean_log_loss(data: &TrainingSet, scores: &[f64]) -> f64 {
    let total: f64 = (0..data.len())
        .map(|r| log_loss(data.label(r), scores[r]))
        .sum();
    total / data.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    pub trees: Vec<TreeNode>,
    pub learning_rate: f64,
    /// Prior log-odds.
    pub base_score: f64,
    pub feature_names: Vec<String>,
    pub params: GbdtParams,
    /// Mean training log-loss at the prior and after each tree.
    pub loss_history: Vec<f64>,
}

impl GbdtModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn check_arity(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features() {
            return Err(GbdtError::Arity {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        Ok(())
    }

    /// Raw log-odds score; `row` must have `n_features()` entries.
    pub fn raw_score_unchecked(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        self.base_score + self.learning_rate * sum
    }

    pub fn raw_score(&self, row: &[f64]) -> Result<f64> {
        self.check_arity(row)?;
        Ok(self.raw_score_unchecked(row))
    }

    /// Anomaly probability, clamped to the open interval (0, 1).
    pub fn predict_proba(&self, row: &[f64]) -> Result<f64> {
        let p = sigmoid(self.raw_score(row)?);
        Ok(p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
    }

    pub fn predict_record(&self, record: &TelemetryRecord) -> Result<f64> {
        self.predict_proba(&record.features)
    }

    pub fn classify(&self, row: &[f64], threshold: f64) -> Result<u8> {
        Ok(u8::from(self.predict_proba(row)? >= threshold))
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(TreeNode::depth).max().unwrap_or(0)
    }
}

/// Incremental booster: one [`Trainer::boost_round`] call adds one tree.
pub struct Trainer<'a> {
    data: &'a TrainingSet,
    params: GbdtParams,
    sorted: Vec<Vec<u32>>,
    scores: Vec<f64>,
    grad: Vec<f64>,
    hess: Vec<f64>,
    model: GbdtModel,
    rng: ChaCha8Rng,
}

impl<'a> Trainer<'a> {
    pub fn new(data: &'a TrainingSet, params: GbdtParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if data.is_empty() {
            return Err(GbdtError::Training("empty training set".into()));
        }
        let positives = (0..data.len()).filter(|&r| data.label(r) == 1.0).count();
        if positives == 0 || positives == data.len() {
            return Err(GbdtError::Training(
                "training set must contain both classes".into(),
            ));
        }
        let prior = positives as f64 / data.len() as f64;
        let base_score = (prior / (1.0 - prior)).ln();

        let sorted = (0..data.n_features())
            .map(|f| {
                let mut idx: Vec<u32> = (0..data.len() as u32).collect();
                idx.sort_by(|&a, &b| {
                    data.value(a as usize, f)
                        .total_cmp(&data.value(b as usize, f))
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        let scores = vec![base_score; data.len()];
        let initial_loss = mean_log_loss(data, &scores);
        Ok(Self {
            data,
            params,
            sorted,
            scores,
            grad: vec![0.0; data.len()],
            hess: vec![0.0; data.len()],
            model: GbdtModel {
                trees: Vec::new(),
                learning_rate: params.learning_rate,
                base_score,
                feature_names: data.feature_names().to_vec(),
                params,
                loss_history: vec![initial_loss],
            },
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn rounds(&self) -> usize {
        self.model.trees.len()
    }

    pub fn model(&self) -> &GbdtModel {
        &self.model
    }

    pub fn finish(self) -> GbdtModel {
        self.model
    }

    /// Current training log-loss.
    pub fn loss(&self) -> f64 {
        *self
            .model
            .loss_history
            .last()
            .expect("history starts with prior loss")
    }

    /// Fits one tree to the current gradients and returns the new training loss.
    pub fn boost_round(&mut self) -> f64 {
        let n = self.data.len();
        for r in 0..n {
            let p = sigmoid(self.scores[r]);
            self.grad[r] = p - self.data.label(r);
            self.hess[r] = (p * (1.0 - p)).max(1e-16);
        }
        let in_sample = self.sample_rows();
        let grown = TreeBuilder::new(
            self.data,
            &self.sorted,
            &self.grad,
            &self.hess,
            &self.params,
        )
        .grow(&in_sample);

        let lr = self.params.learning_rate;
        let values: Vec<f64> = grown
            .leaf_rows
            .iter()
            .zip(&grown.leaf_stats)
            .map(|(rows, &(g, h))| {
                let newton = -g / (h + self.params.lambda_l2);
                safeguard_leaf(self.data, &self.scores, rows, newton, lr)
            })
            .collect();
        // Leaf values apply to every row that lands in the leaf, sampled or not.
        let tree = grown.into_node(&values);
        for r in 0..n {
            self.scores[r] += lr * tree.predict(self.data.row(r));
        }
        self.model.trees.push(tree);
        let loss = mean_log_loss(self.data, &self.scores);
        self.model.loss_history.push(loss);
        loss
    }

    fn sample_rows(&mut self) -> Vec<bool> {
        let n = self.data.len();
        if self.params.subsample >= 1.0 {
            return vec![true; n];
        }
        let k = ((n as f64) * self.params.subsample).ceil().max(1.0) as usize;
        let mut mask = vec![false; n];
        for i in sample(&mut self.rng, n, k.min(n)) {
            mask[i] = true;
        }
        mask
    }
}

/// Halves the Newton step until the leaf's own loss does not increase, so the
/// training loss is non-increasing tree over tree.
fn safeguard_leaf(data: &TrainingSet, scores: &[f64], rows: &[u32], newton: f64, lr: f64) -> f64 {
    let leaf_loss = |v: f64| -> f64 {
        rows.iter()
            .map(|&r| log_loss(data.label(r as usize), scores[r as usize] + lr * v))
            .sum()
    };
    let base = leaf_loss(0.0);
    let mut v = newton;
    for _ in 0..60 {
        if !v.is_finite() {
            return 0.0;
        }
        if leaf_loss(v) <= base {
            return v;
        }
        v *= 0.5;
    }
    0.0
}

/// Trains `params.num_trees` rounds of boosting.
pub fn train(data: &TrainingSet, params: GbdtParams, seed: u64) -> Result<GbdtModel> {
    let mut trainer = Trainer::new(data, params, seed)?;
    for _ in 0..params.num_trees {
        trainer.boost_round();
    }
    Ok(trainer.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_feature(xs: &[f64], ys: &[u8]) -> TrainingSet {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        TrainingSet::new(&rows, ys, vec!["x".into()]).unwrap()
    }

    #[test]
    fn separable_stump_is_perfect() {
        let xs = [-3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
        let ys = [0, 0, 0, 0, 1, 1, 1, 1];
        let data = one_feature(&xs, &ys);
        let params = GbdtParams {
            num_trees: 1,
            max_depth: 1,
            min_samples_leaf: 1,
            learning_rate: 1.0,
            ..GbdtParams::default()
        };
        let model = train(&data, params, 0).unwrap();
        assert_eq!(model.trees.len(), 1);
        for (x, y) in xs.iter().zip(ys) {
            assert_eq!(model.classify(&[*x], 0.5).unwrap(), y);
        }
        match &model.trees[0] {
            TreeNode::Split { threshold, .. } => assert_eq!(*threshold, -0.25),
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn single_class_is_training_error() {
        let data = one_feature(&[1.0, 2.0], &[1, 1]);
        assert!(matches!(
            train(&data, GbdtParams::default(), 0),
            Err(GbdtError::Training(_))
        ));
    }

    #[test]
    fn zero_tree_model_is_prior() {
        let model = GbdtModel {
            trees: vec![],
            learning_rate: 0.1,
            base_score: 0.7,
            feature_names: vec!["a".into()],
            params: GbdtParams::default(),
            loss_history: vec![],
        };
        assert_eq!(model.predict_proba(&[3.0]).unwrap(), sigmoid(0.7));
        assert_eq!(
            model.predict_proba(&[1.0, 2.0]),
            Err(GbdtError::Arity {
                expected: 1,
                got: 2
            })
        );
    }

    #[test]
    fn probability_stays_open_interval() {
        let model = GbdtModel {
            trees: vec![TreeNode::Leaf { value: 1e6 }],
            learning_rate: 1.0,
            base_score: 0.0,
            feature_names: vec!["a".into()],
            params: GbdtParams::default(),
            loss_history: vec![],
        };
        let p = model.predict_proba(&[0.0]).unwrap();
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn log_loss_matches_naive_formula() {
        for &(y, s) in &[(1.0, 0.3), (0.0, -2.0), (1.0, -4.0), (0.0, 5.0)] {
            let p = sigmoid(s);
            let naive = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            assert!((log_loss(y, s) - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn newton_overshoot_is_backtracked() {
        // Confidently wrong scores make the raw Newton step overshoot.
        let data = one_feature(&[0.0; 4], &[1, 1, 0, 0]);
        let scores = [-8.0, -8.0, -8.0, -8.0];
        let rows = [0, 1, 2, 3];
        let v = safeguard_leaf(&data, &scores, &rows, 1000.0, 1.0);
        let before: f64 = (0..4).map(|r| log_loss(data.label(r), scores[r])).sum();
        let after: f64 = (0..4).map(|r| log_loss(data.label(r), scores[r] + v)).sum();
        assert!(v < 1000.0);
        assert!(after <= before);
    }

    #[test]
    fn depth_never_exceeds_limit() {
        let xs: Vec<f64> = (0..64).map(|i| ((i * 37) % 64) as f64).collect();
        let ys: Vec<u8> = (0..64).map(|i| u8::from((i * 7) % 5 < 2)).collect();
        let data = one_feature(&xs, &ys);
        let params = GbdtParams {
            num_trees: 10,
            max_depth: 3,
            min_samples_leaf: 1,
            ..GbdtParams::default()
        };
        let model = train(&data, params, 0).unwrap();
        assert!(model.max_depth() <= 3);
    }
}
