use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, ExperimentError, Result, Scenario};
use crate::gbdt::{train, GbdtModel, GbdtParams, TrainingSet};
use crate::hpo::{
    default_gbdt_space, gbdt_objective, params_from_point, GbdtObjectiveConfig, Study, Trial,
};
use crate::telemetry::{
    generate_synthetic, inject_collective, inject_sparse, load_csv, reference_stats,
    AnomalyPattern, AnomalySpec, Dataset,
};

/// Clean synthetic training rows.
pub fn clean_training_dataset(s: &Scenario) -> Result<Dataset> {
    Ok(generate_synthetic(
        &reference_stats(),
        s.telemetry.train_rows,
        derive_seed(s.seed, "train", 0),
    )?)
}

/// The two injections that label the training set: sparse first, then one
/// collective window starting at `collective_start`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingInjection {
    pub sparse: AnomalySpec,
    pub collective: AnomalySpec,
    pub collective_start: usize,
}

impl TrainingInjection {
    pub fn for_rows(s: &Scenario, rows: usize) -> Result<Self> {
        let det = &s.detection;
        let len = det.train_collective_length;
        if len > rows {
            return Err(ExperimentError::Config(format!(
                "train_collective_length {len} exceeds the {rows} training rows"
            )));
        }
        Ok(Self {
            sparse: AnomalySpec {
                pattern: AnomalyPattern::Sparse {
                    density: det.train_sparse_density,
                },
                injection_values: s.injection_values.clone(),
                seed: derive_seed(s.seed, "train-sparse", 0),
            },
            collective: AnomalySpec {
                pattern: AnomalyPattern::Collective {
                    window_len: len,
                    feature_fraction: det.feature_fraction,
                },
                injection_values: s.injection_values.clone(),
                seed: derive_seed(s.seed, "train-collective", 0),
            },
            collective_start: ChaCha8Rng::seed_from_u64(derive_seed(
                s.seed,
                "train-collective-start",
                0,
            ))
            .random_range(0..=rows - len),
        })
    }

    pub fn apply(&self, clean: &Dataset) -> Result<Dataset> {
        let with_sparse = inject_sparse(clean, &self.sparse)?;
        Ok(inject_collective(
            &with_sparse,
            &self.collective,
            self.collective_start,
        )?)
    }
}

/// Synthetic training set with one sparse and one collective injection.
pub fn training_dataset(s: &Scenario) -> Result<Dataset> {
    let clean = clean_training_dataset(s)?;
    TrainingInjection::for_rows(s, clean.len())?.apply(&clean)
}

/// Clean test set: the configured CSV, or a fresh synthetic draw.
pub fn test_dataset(s: &Scenario) -> Result<Dataset> {
    match &s.telemetry.test_csv {
        Some(path) => Ok(load_csv(path)?),
        None => Ok(generate_synthetic(
            &reference_stats(),
            s.telemetry.test_rows,
            derive_seed(s.seed, "test", 0),
        )?),
    }
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub params: GbdtParams,
    pub trials: Vec<Trial>,
}

/// TPE search with median pruning on a held-out split of `train`. With a
/// zero trial budget the scenario's parameters are returned unchanged.
pub fn tune(s: &Scenario, train: &Dataset) -> Result<TuneOutcome> {
    if s.hpo.trials == 0 {
        return Ok(TuneOutcome {
            params: s.params,
            trials: Vec::new(),
        });
    }
    let (fit, valid) =
        train.split_holdout(s.hpo.validation_fraction, derive_seed(s.seed, "holdout", 0));
    let fit = TrainingSet::from_dataset(&fit);
    let valid = TrainingSet::from_dataset(&valid);
    let config = GbdtObjectiveConfig {
        report_every: s.hpo.report_every,
        base: s.params,
        seed: derive_seed(s.seed, "hpo-train", 0),
    };
    let mut study = Study::new(default_gbdt_space(), derive_seed(s.seed, "hpo", 0));
    let best = study.optimize(gbdt_objective(&fit, &valid, config), s.hpo.trials)?;
    let params = params_from_point(&best.params, s.params);
    log::info!(
        "best trial {} with validation log-loss {:?}",
        best.id,
        best.final_loss()
    );
    Ok(TuneOutcome {
        params,
        trials: study.trials,
    })
}

pub fn train_model(s: &Scenario, train_set: &Dataset, params: GbdtParams) -> Result<GbdtModel> {
    Ok(train(
        &TrainingSet::from_dataset(train_set),
        params,
        derive_seed(s.seed, "model", 0),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Scenario {
        let mut s = Scenario::default_scenario();
        s.telemetry.train_rows = 600;
        s.telemetry.test_rows = 400;
        s.detection.train_collective_length = 20;
        s
    }

    #[test]
    fn training_labels_from_both_injectors() {
        let s = small();
        let ds = training_dataset(&s).unwrap();
        let n = ds.anomaly_count();
        // 30 sparse rows plus a 20-row window, minus any overlap.
        assert!((30..=50).contains(&n), "{n}");
        assert!(n >= 20);
        assert_eq!(ds, training_dataset(&s).unwrap());
    }

    #[test]
    fn zero_budget_keeps_params() {
        let mut s = small();
        s.hpo.trials = 0;
        let out = tune(&s, &training_dataset(&s).unwrap()).unwrap();
        assert_eq!(out.params, s.params);
        assert!(out.trials.is_empty());
    }

    #[test]
    fn window_longer_than_dataset_rejected() {
        let mut s = small();
        s.detection.train_collective_length = 601;
        assert!(matches!(
            training_dataset(&s),
            Err(ExperimentError::Config(_))
        ));
    }
}
