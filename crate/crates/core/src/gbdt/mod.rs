//! Gradient-boosted decision trees for binary anomaly classification.
//!
//! Trees are fit to the gradients of the logistic loss with exact greedy
//! split search; leaves take a Newton step. The module also provides gain
//! importance, exact Shapley attribution, evaluation metrics and inference
//! latency measurement.

mod explain;
mod io;
mod latency;
mod metrics;
mod model;
mod tree;

pub use explain::{feature_importance, shap_values, ShapValues};
pub use io::{read_model, write_model, MODEL_FORMAT_HEADER};
pub use latency::{
    latency_stats, measure_inference_latency, measure_latency_with, LatencyStats, Stopwatch,
    WallClock,
};
pub use metrics::{evaluate, Confusion, Metrics};
pub use model::{log_loss, sigmoid, train, GbdtModel, Trainer, TrainingSet};
pub use tree::{SplitCandidate, TreeNode};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GbdtError {
    #[error("training error: {0}")]
    Training(String),
    #[error("input error: expected {expected} features, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("model format error at line {line}: {message}")]
    Format { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, GbdtError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbdtParams {
    pub num_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub learning_rate: f64,
    pub min_gain_to_split: f64,
    /// L2 penalty on leaf values, added to the hessian sum.
    pub lambda_l2: f64,
    /// Fraction of rows sampled (without replacement) per tree.
    pub subsample: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            num_trees: 100,
            max_depth: 4,
            min_samples_leaf: 5,
            learning_rate: 0.1,
            min_gain_to_split: 1e-6,
            lambda_l2: 1.0,
            subsample: 1.0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GbdtError::Params(m.to_string()));
        if self.num_trees == 0 {
            return bad("num_trees must be positive");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be positive");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if !(self.min_gain_to_split >= 0.0) {
            return bad("min_gain_to_split must be non-negative");
        }
        if !(self.lambda_l2 >= 0.0) {
            return bad("lambda_l2 must be non-negative");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must lie in (0, 1]");
        }
        Ok(())
    }
}
