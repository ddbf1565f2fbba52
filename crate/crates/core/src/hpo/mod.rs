//! Hyperparameter search: a univariate tree-structured Parzen estimator
//! sampler, a median-rule pruner and the sequential study loop.

mod objective;
mod pruner;
mod space;
mod study;
mod tpe;

pub use objective::{default_gbdt_space, gbdt_objective, params_from_point, GbdtObjectiveConfig};
pub use pruner::MedianPruner;
pub use space::{Distribution, Point, SearchSpace};
pub use study::{
    optimize, optimize_random, write_study_log, Reporter, Sampler, Study, TrialOutcome,
};
pub use tpe::{suggest, TpeConfig};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HpoError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no completed trials")]
    NoCompletedTrials,
    #[error("objective failed: {0}")]
    Objective(String),
}

pub type Result<T> = std::result::Result<T, HpoError>;

#[derive(Debug, Clone, PartialEq)]
pub enum TrialState {
    Running,
    Complete(f64),
    Pruned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub id: usize,
    pub params: Point,
    /// `(step, validation loss)` in report order.
    pub intermediate_values: Vec<(usize, f64)>,
    pub state: TrialState,
}

impl Trial {
    pub fn new(id: usize, params: Point) -> Self {
        Self {
            id,
            params,
            intermediate_values: Vec::new(),
            state: TrialState::Running,
        }
    }

    pub fn final_loss(&self) -> Option<f64> {
        match self.state {
            TrialState::Complete(v) => Some(v),
            _ => None,
        }
    }

    pub fn value_at(&self, step: usize) -> Option<f64> {
        self.intermediate_values
            .iter()
            .rev()
            .find(|(s, _)| *s == step)
            .map(|(_, v)| *v)
    }
}
