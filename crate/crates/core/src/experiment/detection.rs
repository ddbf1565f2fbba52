use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, ExperimentError, Result, Scenario};
use crate::gbdt::{evaluate, Confusion, GbdtModel, Metrics};
use crate::telemetry::{inject_collective, inject_sparse, AnomalyPattern, AnomalySpec, Dataset};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectionConfig {
    Sparse { density: f64 },
    Collective { window_len: usize },
}

impl DetectionConfig {
    pub fn pattern(&self) -> &'static str {
        match self {
            DetectionConfig::Sparse { .. } => "sparse",
            DetectionConfig::Collective { .. } => "collective",
        }
    }

    pub fn level(&self) -> String {
        match self {
            DetectionConfig::Sparse { density } => density.to_string(),
            DetectionConfig::Collective { window_len } => window_len.to_string(),
        }
    }
}

/// One evaluated configuration. `seed == None` marks the mean over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRow {
    pub config: DetectionConfig,
    pub seed: Option<u64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

impl DetectionRow {
    fn from_metrics(config: DetectionConfig, seed: u64, m: &Metrics) -> Self {
        Self {
            config,
            seed: Some(seed),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            confusion: m.confusion,
        }
    }

    /// Arithmetic means of the per-seed ratios, summed in seed order;
    /// confusion counts are totals.
    fn mean_of(config: DetectionConfig, rows: &[DetectionRow]) -> Self {
        let n = rows.len() as f64;
        let mean = |f: fn(&DetectionRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let mut confusion = Confusion::default();
        for r in rows {
            confusion.tp += r.confusion.tp;
            confusion.fp += r.confusion.fp;
            confusion.tn += r.confusion.tn;
            confusion.fn_ += r.confusion.fn_;
        }
        Self {
            config,
            seed: None,
            precision: mean(|r| r.precision),
            recall: mean(|r| r.recall),
            f1: mean(|r| r.f1),
            confusion,
        }
    }
}

fn inject(
    s: &Scenario,
    test: &Dataset,
    config: DetectionConfig,
    seed: u64,
    slot: u64,
) -> Result<Dataset> {
    let values = s.injection_values.clone();
    match config {
        DetectionConfig::Sparse { density } => {
            let spec = AnomalySpec {
                pattern: AnomalyPattern::Sparse { density },
                injection_values: values,
                seed: derive_seed(seed, "sparse", slot),
            };
            Ok(inject_sparse(test, &spec)?)
        }
        DetectionConfig::Collective { window_len } => {
            if window_len > test.len() {
                return Err(ExperimentError::Config(format!(
                    "collective length {window_len} exceeds the {}-row test set",
                    test.len()
                )));
            }
            let spec = AnomalySpec {
                pattern: AnomalyPattern::Collective {
                    window_len,
                    feature_fraction: s.detection.feature_fraction,
                },
                injection_values: values,
                seed: derive_seed(seed, "collective", slot),
            };
            let start = ChaCha8Rng::seed_from_u64(derive_seed(seed, "collective-start", slot))
                .random_range(0..=test.len() - window_len);
            Ok(inject_collective(test, &spec, start)?)
        }
    }
}

/// For every configured density and window length, injects into a fresh copy
/// of `test` once per seed and evaluates `model`. Each configuration group is
/// its per-seed rows followed by their mean row.
pub fn run_detection_experiment(
    s: &Scenario,
    model: &GbdtModel,
    test: &Dataset,
) -> Result<Vec<DetectionRow>> {
    let det = &s.detection;
    let configs: Vec<DetectionConfig> = det
        .sparse_densities
        .iter()
        .map(|&density| DetectionConfig::Sparse { density })
        .chain(
            det.collective_lengths
                .iter()
                .map(|&window_len| DetectionConfig::Collective { window_len }),
        )
        .collect();
    let mut rows = Vec::new();
    for (slot, config) in configs.into_iter().enumerate() {
        let mut group = Vec::with_capacity(det.seeds.len());
        for &seed in &det.seeds {
            let injected = inject(s, test, config, seed, slot as u64)?;
            let metrics = evaluate(model, &injected, det.threshold)?;
            group.push(DetectionRow::from_metrics(config, seed, &metrics));
        }
        let mean = DetectionRow::mean_of(config, &group);
        rows.extend(group);
        rows.push(mean);
    }
    Ok(rows)
}
