use super::{Dataset, Feature, Result, TelemetryError, NUM_FEATURES};

/// Summary statistics for one feature column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureStat {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl FeatureStat {
    pub fn is_ordered(&self) -> bool {
        self.min <= self.q25
            && self.q25 <= self.median
            && self.median <= self.q75
            && self.q75 <= self.max
            && self.std >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub per_feature: [FeatureStat; NUM_FEATURES],
}

impl FeatureStats {
    pub fn get(&self, feature: Feature) -> &FeatureStat {
        &self.per_feature[feature.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for f in Feature::ALL {
            let s = self.get(f);
            if !s.is_ordered() || !s.mean.is_finite() {
                return Err(TelemetryError::Domain(format!(
                    "statistics for {f} are not ordered min <= q25 <= median <= q75 <= max"
                )));
            }
        }
        Ok(())
    }
}

/// Quantile `p` of already-sorted data, by linear interpolation between order
/// statistics at fractional rank `(n - 1) * p`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn column_stat(mut values: Vec<f64>) -> FeatureStat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    values.sort_by(f64::total_cmp);
    FeatureStat {
        mean,
        std,
        min: values[0],
        q25: quantile(&values, 0.25),
        median: quantile(&values, 0.5),
        q75: quantile(&values, 0.75),
        max: values[values.len() - 1],
    }
}

/// Sample statistics for every feature. Std uses the `n - 1` denominator.
pub fn summarize(dataset: &Dataset) -> Result<FeatureStats> {
    if dataset.is_empty() {
        return Err(TelemetryError::Domain(
            "cannot summarize an empty dataset".into(),
        ));
    }
    let per_feature = Feature::ALL.map(|f| column_stat(dataset.column(f)));
    Ok(FeatureStats { per_feature })
}

const fn stat(
    mean: f64,
    std: f64,
    min: f64,
    q25: f64,
    median: f64,
    q75: f64,
    max: f64,
) -> FeatureStat {
    FeatureStat {
        mean,
        std,
        min,
        q25,
        median,
        q75,
        max,
    }
}

/// Published statistics of the 9,487-record vehicle test set, in canonical
/// feature order.
pub fn reference_stats() -> FeatureStats {
    FeatureStats {
        per_feature: [
            stat(16.93, 9.62, 0.00, 14.90, 14.90, 14.90, 86.30),
            stat(1.61, 29.29, 0.00, 0.00, 0.00, 0.00, 655.33),
            stat(0.76, 0.25, 0.00, 0.64, 0.88, 0.92, 0.98),
            stat(9.65, 28.59, 0.00, 0.00, 0.00, 0.00, 113.20),
            stat(38.75, 45.51, 0.00, 25.80, 28.60, 32.40, 392.90),
            stat(0.69, 3.45, 0.00, 0.00, 0.00, 0.00, 29.0),
            stat(2.47, 7.58, 0.00, 0.00, 0.00, 0.00, 28.0),
            stat(29.68, 15.80, 0.00, 23.80, 25.70, 28.70, 97.70),
            stat(70.23, 10.35, 0.00, 67.23, 71.51, 73.93, 92.09),
            stat(470.17, 1634.49, 0.00, 0.00, 0.00, 0.00, 10190.0),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::TelemetryRecord;

    fn dataset_of(rows: &[[f64; NUM_FEATURES]]) -> Dataset {
        Dataset::new(
            rows.iter()
                .enumerate()
                .map(|(i, f)| TelemetryRecord::new(i as u64, *f))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_rows_have_zero_spread() {
        let row = [3.0; NUM_FEATURES];
        let s = summarize(&dataset_of(&[row, row, row])).unwrap();
        for st in s.per_feature {
            assert_eq!(st.std, 0.0);
            assert_eq!(st.min, 3.0);
            assert_eq!(st.q25, 3.0);
            assert_eq!(st.median, 3.0);
            assert_eq!(st.q75, 3.0);
            assert_eq!(st.max, 3.0);
        }
    }

    #[test]
    fn one_to_four_mean_and_median() {
        let rows: Vec<_> = (1..=4).map(|v| [v as f64; NUM_FEATURES]).collect();
        let s = summarize(&dataset_of(&rows)).unwrap();
        let st = s.get(Feature::EngineTorque);
        assert_eq!(st.mean, 2.5);
        assert_eq!(st.median, 2.5);
        // rank (n-1)*p = 0.75 and 2.25
        assert_eq!(st.q25, 1.75);
        assert_eq!(st.q75, 3.25);
        // sample variance of 1..4 is 5/3
        assert!((st.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn empty_dataset_is_domain_error() {
        assert!(matches!(
            summarize(&Dataset::default()),
            Err(TelemetryError::Domain(_))
        ));
    }

    #[test]
    fn published_stats_are_ordered() {
        reference_stats().validate().unwrap();
    }
}
