//! Vehicle telemetry schema, dataset statistics, synthetic generation and
//! anomaly injection.
//!
//! A dataset is an ordered list of [`TelemetryRecord`]s, each carrying the ten
//! engine/powertrain features in canonical order plus a binary anomaly label.

mod csv_io;
mod inject;
mod stats;
mod synth;

pub use csv_io::{load_csv, read_csv, write_csv, write_csv_file};
pub use inject::{
    inject_collective, inject_sparse, table_two_injection_values, AnomalyPattern, AnomalySpec,
};
pub use stats::{quantile, summarize, reference_stats, FeatureStat, FeatureStats};
pub use synth::{generate_synthetic, QuantileProfile};

use std::fmt;

use thiserror::Error;

/// Number of telemetry features per record.
pub const NUM_FEATURES: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum TelemetryError {
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema error: unknown columns [{}]; missing features [{}]", unknown.join(", "), missing.join(", "))]
    Schema {
        unknown: Vec<String>,
        missing: Vec<String>,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("bounds error: {0}")]
    Bounds(String),
    #[error("invalid anomaly spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, TelemetryError>;

/// The ten monitored features, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    AcceleratorPedalPosition,
    BrakePressure,
    ScrCatalystEfficiency,
    EngineOilTemperature,
    EngineTorque,
    FuelConsumption,
    FuelLevel,
    NormedLoadValue,
    OilFillLevel,
    TimeSinceEngineStart,
}

impl Feature {
    pub const ALL: [Feature; NUM_FEATURES] = [
        Feature::AcceleratorPedalPosition,
        Feature::BrakePressure,
        Feature::ScrCatalystEfficiency,
        Feature::EngineOilTemperature,
        Feature::EngineTorque,
        Feature::FuelConsumption,
        Feature::FuelLevel,
        Feature::NormedLoadValue,
        Feature::OilFillLevel,
        Feature::TimeSinceEngineStart,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Feature> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::AcceleratorPedalPosition => "accelerator_pedal_position",
            Feature::BrakePressure => "brake_pressure",
            Feature::ScrCatalystEfficiency => "scr_catalyst_efficiency",
            Feature::EngineOilTemperature => "engine_oil_temperature",
            Feature::EngineTorque => "engine_torque",
            Feature::FuelConsumption => "fuel_consumption",
            Feature::FuelLevel => "fuel_level",
            Feature::NormedLoadValue => "normed_load_value",
            Feature::OilFillLevel => "oil_fill_level",
            Feature::TimeSinceEngineStart => "time_since_engine_start",
        }
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        Self::ALL.iter().copied().find(|f| f.name() == name)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Canonical feature names in column order.
pub fn feature_names() -> Vec<String> {
    Feature::ALL.iter().map(|f| f.name().to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Label {
    #[default]
    Normal,
    Anomalous,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Normal),
            1 => Some(Label::Anomalous),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Label::Normal => 0,
            Label::Anomalous => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_u8())
    }

    pub fn is_anomalous(self) -> bool {
        self == Label::Anomalous
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRecord {
    /// Milliseconds since scenario start.
    pub timestamp_ms: u64,
    pub features: [f64; NUM_FEATURES],
    pub label: Label,
}

impl TelemetryRecord {
    pub fn new(timestamp_ms: u64, features: [f64; NUM_FEATURES]) -> Self {
        Self {
            timestamp_ms,
            features,
            label: Label::Normal,
        }
    }

    pub fn get(&self, feature: Feature) -> f64 {
        self.features[feature.index()]
    }
}

/// An ordered telemetry dataset with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    records: Vec<TelemetryRecord>,
}

impl Dataset {
    pub fn new(records: Vec<TelemetryRecord>) -> Result<Self> {
        for (i, pair) in records.windows(2).enumerate() {
            if pair[1].timestamp_ms <= pair[0].timestamp_ms {
                return Err(TelemetryError::Domain(format!(
                    "timestamps must strictly increase (record {} has {} after {})",
                    i + 1,
                    pair[1].timestamp_ms,
                    pair[0].timestamp_ms
                )));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[TelemetryRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TelemetryRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn column(&self, feature: Feature) -> Vec<f64> {
        self.records.iter().map(|r| r.get(feature)).collect()
    }

    pub fn anomaly_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.label.is_anomalous())
            .count()
    }

    /// Features whose value never changes across the dataset.
    pub fn constant_features(&self) -> Vec<Feature> {
        let Some(first) = self.records.first() else {
            return Vec::new();
        };
        Feature::ALL
            .iter()
            .copied()
            .filter(|f| self.records.iter().all(|r| r.get(*f) == first.get(*f)))
            .collect()
    }

    /// Splits off a seeded random holdout of `fraction` of the rows, keeping
    /// both parts in time order.
    pub fn split_holdout(&self, fraction: f64, seed: u64) -> (Dataset, Dataset) {
        use rand::seq::index::sample;
        use rand::SeedableRng;

        let n = self.records.len();
        let holdout_n = ((n as f64) * fraction).round() as usize;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut is_holdout = vec![false; n];
        for i in sample(&mut rng, n, holdout_n.min(n)) {
            is_holdout[i] = true;
        }
        let (mut train, mut holdout) = (Vec::new(), Vec::new());
        for (rec, h) in self.records.iter().zip(is_holdout) {
            if h {
                holdout.push(rec.clone());
            } else {
                train.push(rec.clone());
            }
        }
        (Dataset { records: train }, Dataset { records: holdout })
    }

    pub(crate) fn records_mut(&mut self) -> &mut [TelemetryRecord] {
        &mut self.records
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_names_round_trip() {
        for f in Feature::ALL {
            assert_eq!(Feature::from_name(f.name()), Some(f));
            assert_eq!(Feature::from_index(f.index()), Some(f));
        }
        assert_eq!(Feature::from_name("rpm"), None);
    }

    #[test]
    fn rejects_non_increasing_timestamps() {
        let r = |t| TelemetryRecord::new(t, [0.0; NUM_FEATURES]);
        assert!(Dataset::new(vec![r(0), r(1)]).is_ok());
        assert!(matches!(
            Dataset::new(vec![r(5), r(5)]),
            Err(TelemetryError::Domain(_))
        ));
    }

    #[test]
    fn holdout_partitions_rows() {
        let recs = (0..100)
            .map(|i| TelemetryRecord::new(i, [i as f64; NUM_FEATURES]))
            .collect();
        let ds = Dataset::new(recs).unwrap();
        let (train, hold) = ds.split_holdout(0.2, 3);
        assert_eq!(hold.len(), 20);
        assert_eq!(train.len(), 80);
        assert!(Dataset::new(train.into_records()).is_ok());
    }
}
