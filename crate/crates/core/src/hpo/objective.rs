use super::space::{Distribution, Point, SearchSpace};
use super::study::{Reporter, TrialOutcome};
use super::{HpoError, Result};
use crate::gbdt::{log_loss, GbdtParams, Trainer, TrainingSet};

/// Tuned parameters and their ranges.
pub fn default_gbdt_space() -> SearchSpace {
    SearchSpace::new()
        .with("num_trees", Distribution::IntRange { lo: 20, hi: 200 })
        .with("max_depth", Distribution::IntRange { lo: 2, hi: 6 })
        .with(
            "learning_rate",
            Distribution::LogUniform { lo: 0.01, hi: 0.5 },
        )
        .with("min_samples_leaf", Distribution::IntRange { lo: 1, hi: 50 })
}

/// Overlays the tuned entries of `point` on `base`.
pub fn params_from_point(point: &Point, base: GbdtParams) -> GbdtParams {
    let mut p = base;
    for (k, &v) in point {
        match k.as_str() {
            "num_trees" => p.num_trees = v.round().max(1.0) as usize,
            "max_depth" => p.max_depth = v.round().max(1.0) as usize,
            "min_samples_leaf" => p.min_samples_leaf = v.round().max(1.0) as usize,
            "learning_rate" => p.learning_rate = v,
            "min_gain_to_split" => p.min_gain_to_split = v,
            "lambda_l2" => p.lambda_l2 = v,
            "subsample" => p.subsample = v,
            _ => {}
        }
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbdtObjectiveConfig {
    /// Boosting rounds between intermediate reports.
    pub report_every: usize,
    pub base: GbdtParams,
    pub seed: u64,
}

impl Default for GbdtObjectiveConfig {
    fn default() -> Self {
        Self {
            report_every: 10,
            base: GbdtParams::default(),
            seed: 0,
        }
    }
}

fn validation_loss(trainer: &Trainer<'_>, valid: &TrainingSet) -> f64 {
    let model = trainer.model();
    let total: f64 = (0..valid.len())
        .map(|r| log_loss(valid.label(r), model.raw_score_unchecked(valid.row(r))))
        .sum();
    total / valid.len() as f64
}

/// Objective minimizing held-out log-loss; reports every `report_every`
/// rounds so the pruner can stop weak configurations early.
pub fn gbdt_objective<'a>(
    train: &'a TrainingSet,
    valid: &'a TrainingSet,
    config: GbdtObjectiveConfig,
) -> impl FnMut(&Point, &mut Reporter<'_>) -> Result<TrialOutcome> + 'a {
    move |point, reporter| {
        if valid.is_empty() {
            return Err(HpoError::Objective("empty validation set".into()));
        }
        let params = params_from_point(point, config.base);
        let mut trainer = Trainer::new(train, params, config.seed)
            .map_err(|e| HpoError::Objective(e.to_string()))?;
        let every = config.report_every.max(1);
        while trainer.rounds() < params.num_trees {
            trainer.boost_round();
            if trainer.rounds() % every == 0 {
                let step = trainer.rounds() / every;
                if reporter.report(step, validation_loss(&trainer, valid)) {
                    return Ok(TrialOutcome::Pruned);
                }
            }
        }
        Ok(TrialOutcome::Complete(validation_loss(&trainer, valid)))
    }
}
