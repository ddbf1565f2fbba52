//! Synthetic anomaly injection: isolated single-feature faults (sparse) and
//! contiguous multi-feature windows (collective).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Feature, Label, Result, TelemetryError, NUM_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnomalyPattern {
    Sparse {
        density: f64,
    },
    Collective {
        window_len: usize,
        feature_fraction: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalySpec {
    pub pattern: AnomalyPattern,
    pub injection_values: BTreeMap<Feature, f64>,
    pub seed: u64,
}

/// Out-of-range injection value per feature.
pub fn table_two_injection_values() -> BTreeMap<Feature, f64> {
    use Feature::*;
    BTreeMap::from([
        (AcceleratorPedalPosition, 200.0),
        (BrakePressure, 2000.0),
        (ScrCatalystEfficiency, 2.0),
        (EngineOilTemperature, 250.0),
        (EngineTorque, 700.0),
        (FuelConsumption, 70.0),
        (FuelLevel, 100.0),
        (NormedLoadValue, 200.0),
        (OilFillLevel, 200.0),
        (TimeSinceEngineStart, -100.0),
    ])
}

impl AnomalySpec {
    pub fn sparse(density: f64, seed: u64) -> Self {
        Self {
            pattern: AnomalyPattern::Sparse { density },
            injection_values: table_two_injection_values(),
            seed,
        }
    }

    /// Collective pattern over half of the features.
    pub fn collective(window_len: usize, seed: u64) -> Self {
        Self {
            pattern: AnomalyPattern::Collective {
                window_len,
                feature_fraction: 0.5,
            },
            injection_values: table_two_injection_values(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.injection_values.is_empty() {
            return Err(TelemetryError::InvalidSpec("no injection values".into()));
        }
        if let Some((f, _)) = self.injection_values.iter().find(|(_, v)| !v.is_finite()) {
            return Err(TelemetryError::InvalidSpec(format!(
                "injection value for {f} is not finite"
            )));
        }
        match self.pattern {
            AnomalyPattern::Sparse { density } => {
                if !(density > 0.0 && density < 1.0) {
                    return Err(TelemetryError::InvalidSpec(format!(
                        "density {density} outside (0, 1)"
                    )));
                }
            }
            AnomalyPattern::Collective {
                window_len,
                feature_fraction,
            } => {
                if window_len == 0 {
                    return Err(TelemetryError::InvalidSpec(
                        "window_len must be >= 1".into(),
                    ));
                }
                if !(feature_fraction > 0.0 && feature_fraction <= 1.0) {
                    return Err(TelemetryError::InvalidSpec(format!(
                        "feature_fraction {feature_fraction} outside (0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parses the plain `key = value` format written by [`AnomalySpec::to_text`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| TelemetryError::Parse {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            kv.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
        }
        let num = |key: &str| -> Result<Option<f64>> {
            kv.get(key)
                .map(|(line, v)| {
                    v.parse::<f64>().map_err(|_| TelemetryError::Parse {
                        line: *line,
                        message: format!("{key}: {v:?} is not a number"),
                    })
                })
                .transpose()
        };
        let required = |key: &str| -> Result<f64> {
            num(key)?.ok_or_else(|| TelemetryError::InvalidSpec(format!("missing key {key}")))
        };

        let pattern = match kv.get("pattern").map(|(_, v)| v.as_str()) {
            Some("sparse") => AnomalyPattern::Sparse {
                density: required("density")?,
            },
            Some("collective") => AnomalyPattern::Collective {
                window_len: required("window_len")? as usize,
                feature_fraction: num("feature_fraction")?.unwrap_or(0.5),
            },
            Some(other) => {
                return Err(TelemetryError::InvalidSpec(format!(
                    "unknown pattern {other:?}"
                )))
            }
            None => return Err(TelemetryError::InvalidSpec("missing key pattern".into())),
        };
        let seed = kv
            .get("seed")
            .map(|(line, v)| {
                v.parse::<u64>().map_err(|_| TelemetryError::Parse {
                    line: *line,
                    message: format!("seed: {v:?} is not an unsigned integer"),
                })
            })
            .transpose()?
            .unwrap_or(0);

        let reserved = [
            "pattern",
            "density",
            "window_len",
            "feature_fraction",
            "seed",
        ];
        let mut injection_values = BTreeMap::new();
        for (key, (line, v)) in &kv {
            if reserved.contains(&key.as_str()) {
                continue;
            }
            let f = Feature::from_name(key).ok_or_else(|| TelemetryError::Schema {
                unknown: vec![key.clone()],
                missing: vec![],
            })?;
            let value = v.parse::<f64>().map_err(|_| TelemetryError::Parse {
                line: *line,
                message: format!("{key}: {v:?} is not a number"),
            })?;
            injection_values.insert(f, value);
        }
        if injection_values.is_empty() {
            injection_values = table_two_injection_values();
        }
        let spec = AnomalySpec {
            pattern,
            injection_values,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match self.pattern {
            AnomalyPattern::Sparse { density } => {
                let _ = writeln!(s, "pattern = sparse");
                let _ = writeln!(s, "density = {density}");
            }
            AnomalyPattern::Collective {
                window_len,
                feature_fraction,
            } => {
                let _ = writeln!(s, "pattern = collective");
                let _ = writeln!(s, "window_len = {window_len}");
                let _ = writeln!(s, "feature_fraction = {feature_fraction}");
            }
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        for (f, v) in &self.injection_values {
            let _ = writeln!(s, "{} = {v}", f.name());
        }
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| TelemetryError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }
}

/// Overwrites one random feature in `⌊density·n⌋` distinct random rows and
/// labels them anomalous.
pub fn inject_sparse(dataset: &Dataset, spec: &AnomalySpec) -> Result<Dataset> {
    let AnomalyPattern::Sparse { density } = spec.pattern else {
        return Err(TelemetryError::InvalidSpec(
            "inject_sparse requires a sparse pattern".into(),
        ));
    };
    spec.validate()?;
    let n = dataset.len();
    let count = (density * n as f64).floor() as usize;
    if count < 1 {
        return Err(TelemetryError::Domain(
            "density too low for dataset size".into(),
        ));
    }
    let targets: Vec<(Feature, f64)> = spec
        .injection_values
        .iter()
        .map(|(f, v)| (*f, *v))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = sample(&mut rng, n, count).into_vec();
    rows.sort_unstable();

    let mut out = dataset.clone();
    let records = out.records_mut();
    for row in rows {
        let (feature, value) = targets[rng.random_range(0..targets.len())];
        records[row].features[feature.index()] = value;
        records[row].label = Label::Anomalous;
    }
    Ok(out)
}

/// Overwrites a seeded subset of `⌊feature_fraction·10⌋` features across the
/// window `[start_index, start_index + window_len)` and labels it anomalous.
pub fn inject_collective(
    dataset: &Dataset,
    spec: &AnomalySpec,
    start_index: usize,
) -> Result<Dataset> {
    let AnomalyPattern::Collective {
        window_len,
        feature_fraction,
    } = spec.pattern
    else {
        return Err(TelemetryError::InvalidSpec(
            "inject_collective requires a collective pattern".into(),
        ));
    };
    spec.validate()?;
    let end = start_index
        .checked_add(window_len)
        .filter(|&e| e <= dataset.len())
        .ok_or_else(|| {
            TelemetryError::Bounds(format!(
                "window [{start_index}, {start_index}+{window_len}) exceeds dataset of {} rows",
                dataset.len()
            ))
        })?;
    let k = (feature_fraction * NUM_FEATURES as f64).floor() as usize;
    let candidates: Vec<(Feature, f64)> = spec
        .injection_values
        .iter()
        .map(|(f, v)| (*f, *v))
        .collect();
    if k == 0 || k > candidates.len() {
        return Err(TelemetryError::InvalidSpec(format!(
            "cannot select {k} features from {} injection values",
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let chosen: Vec<(Feature, f64)> = sample(&mut rng, candidates.len(), k)
        .into_iter()
        .map(|i| candidates[i])
        .collect();

    let mut out = dataset.clone();
    for rec in &mut out.records_mut()[start_index..end] {
        for (f, v) in &chosen {
            rec.features[f.index()] = *v;
        }
        rec.label = Label::Anomalous;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{generate_synthetic, reference_stats};

    fn base(n: usize) -> Dataset {
        generate_synthetic(&reference_stats(), n, 5).unwrap()
    }

    fn changed_features(a: &Dataset, b: &Dataset, row: usize) -> Vec<Feature> {
        Feature::ALL
            .iter()
            .copied()
            .filter(|f| a.records()[row].get(*f) != b.records()[row].get(*f))
            .collect()
    }

    #[test]
    fn injection_values_are_out_of_range() {
        let stats = reference_stats();
        for (f, v) in table_two_injection_values() {
            let s = stats.get(f);
            assert!(
                v > s.max || v < s.min,
                "{f}: {v} within [{}, {}]",
                s.min,
                s.max
            );
        }
        assert!(table_two_injection_values()[&Feature::EngineTorque] > 392.90);
        assert!(table_two_injection_values()[&Feature::TimeSinceEngineStart] < 0.0);
    }

    #[test]
    fn sparse_ten_percent_of_test_set() {
        let ds = base(9487);
        let out = inject_sparse(&ds, &AnomalySpec::sparse(0.10, 1)).unwrap();
        assert_eq!(out.anomaly_count(), 948);
        let table = table_two_injection_values();
        for (i, r) in out.records().iter().enumerate() {
            let changed = changed_features(&ds, &out, i);
            if r.label.is_anomalous() {
                assert_eq!(changed.len(), 1);
                assert_eq!(r.get(changed[0]), table[&changed[0]]);
            } else {
                assert!(changed.is_empty());
            }
        }
    }

    #[test]
    fn sparse_untouched_rows_are_original_minus_selected() {
        let ds = base(500);
        let out = inject_sparse(&ds, &AnomalySpec::sparse(0.05, 8)).unwrap();
        let selected: Vec<usize> = (0..ds.len())
            .filter(|&i| out.records()[i].label.is_anomalous())
            .collect();
        let mut expected: Vec<_> = ds
            .records()
            .iter()
            .enumerate()
            .filter(|(i, _)| !selected.contains(i))
            .map(|(_, r)| r.clone())
            .collect();
        let mut untouched: Vec<_> = out
            .records()
            .iter()
            .filter(|r| !r.label.is_anomalous())
            .cloned()
            .collect();
        let key = |r: &crate::telemetry::TelemetryRecord| r.timestamp_ms;
        expected.sort_by_key(key);
        untouched.sort_by_key(key);
        assert_eq!(expected, untouched);
    }

    #[test]
    fn sparse_density_too_low() {
        let ds = base(50);
        let err = inject_sparse(&ds, &AnomalySpec::sparse(0.01, 1)).unwrap_err();
        assert_eq!(
            err,
            TelemetryError::Domain("density too low for dataset size".into())
        );
    }

    #[test]
    fn collective_window_of_hundred() {
        let ds = base(1000);
        let out = inject_collective(&ds, &AnomalySpec::collective(100, 4), 300).unwrap();
        assert_eq!(out.anomaly_count(), 100);
        let labels: Vec<bool> = out
            .records()
            .iter()
            .map(|r| r.label.is_anomalous())
            .collect();
        assert!(labels[300..400].iter().all(|&l| l));
        assert!(labels[..300].iter().chain(&labels[400..]).all(|&l| !l));
        let first = changed_features(&ds, &out, 300);
        assert_eq!(first.len(), 5);
        for row in 300..400 {
            assert_eq!(changed_features(&ds, &out, row), first);
        }
    }

    #[test]
    fn collective_single_row() {
        let ds = base(20);
        let out = inject_collective(&ds, &AnomalySpec::collective(1, 2), 19).unwrap();
        assert_eq!(out.anomaly_count(), 1);
        assert_eq!(changed_features(&ds, &out, 19).len(), 5);
    }

    #[test]
    fn collective_out_of_bounds() {
        let ds = base(20);
        assert!(matches!(
            inject_collective(&ds, &AnomalySpec::collective(10, 2), 11),
            Err(TelemetryError::Bounds(_))
        ));
    }

    #[test]
    fn pattern_mismatch_rejected() {
        let ds = base(20);
        assert!(inject_sparse(&ds, &AnomalySpec::collective(3, 1)).is_err());
        assert!(inject_collective(&ds, &AnomalySpec::sparse(0.5, 1), 0).is_err());
    }

    #[test]
    fn spec_text_round_trip() {
        let spec = AnomalySpec::collective(100, 77);
        let back = AnomalySpec::parse(&spec.to_text()).unwrap();
        assert_eq!(back, spec);
        let sparse = AnomalySpec::parse("pattern = sparse\ndensity = 0.05\nseed = 3\n").unwrap();
        assert_eq!(sparse.injection_values, table_two_injection_values());
        assert!(AnomalySpec::parse("pattern = sparse\ndensity = 0.05\nrpm = 3\n").is_err());
        assert!(AnomalySpec::parse("pattern = sparse\ndensity = 1.5\n").is_err());
    }

    #[test]
    fn seeded_injection_is_reproducible() {
        let ds = base(300);
        let a = inject_sparse(&ds, &AnomalySpec::sparse(0.1, 42)).unwrap();
        let b = inject_sparse(&ds, &AnomalySpec::sparse(0.1, 42)).unwrap();
        assert_eq!(a, b);
    }
}
