//! Synthetic telemetry matching the reference feature statistics.
//!
//! Each feature is sampled independently through a piecewise quantile
//! function anchored at the published min/quartiles/max. The two outer
//! segments are power curves whose exponents are solved in closed form so the
//! distribution mean equals the published mean; the inner segments are
//! linear. Repeated quartiles (e.g. `q25 = q50 = q75 = 0`) collapse the inner
//! segments into a point mass, which is how the heavy zero masses in the
//! source data are reproduced.
//!
//! Uniform variates are stratified (one per `1/n` slice, randomly permuted per
//! feature) so sample moments track the targets closely even for heavy tails.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NUM_FEATURES;
use super::{Dataset, Feature, FeatureStat, FeatureStats, Result, TelemetryError, TelemetryRecord};

const EXP_MIN: f64 = 1e-3;
const EXP_MAX: f64 = 1e3;

/// Milliseconds between consecutive synthetic records (1 Hz sampling).
pub const SYNTHETIC_PERIOD_MS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileProfile {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub lower_exponent: f64,
    pub upper_exponent: f64,
}

impl QuantileProfile {
    /// Fits tail exponents so that the distribution mean matches `stat.mean`
    /// as closely as the quartile skeleton allows.
    pub fn fit(stat: &FeatureStat) -> Self {
        let mut p = QuantileProfile {
            min: stat.min,
            q25: stat.q25,
            median: stat.median,
            q75: stat.q75,
            max: stat.max,
            lower_exponent: 1.0,
            upper_exponent: 1.0,
        };
        let base = p.mean();
        let inner = p.inner_mean();
        if stat.mean < base {
            // Pull the upper tail down first, then push the lower tail out.
            let upper_target = stat.mean - p.lower_mean() - inner;
            p.upper_exponent = solve_upper(p.q75, p.max, upper_target).clamp(1.0, EXP_MAX);
            if p.mean() > stat.mean {
                let lower_target = stat.mean - p.upper_mean() - inner;
                p.lower_exponent = solve_lower(p.min, p.q25, lower_target).clamp(EXP_MIN, 1.0);
            }
        } else if stat.mean > base {
            let lower_target = stat.mean - p.upper_mean() - inner;
            p.lower_exponent = solve_lower(p.min, p.q25, lower_target).clamp(1.0, EXP_MAX);
            if p.mean() < stat.mean {
                let upper_target = stat.mean - p.lower_mean() - inner;
                p.upper_exponent = solve_upper(p.q75, p.max, upper_target).clamp(EXP_MIN, 1.0);
            }
        }
        p
    }

    pub fn value_at(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let v = if u < 0.25 {
            self.q25 - (self.q25 - self.min) * ((0.25 - u) / 0.25).powf(self.lower_exponent)
        } else if u < 0.5 {
            self.q25 + (self.median - self.q25) * (u - 0.25) / 0.25
        } else if u < 0.75 {
            self.median + (self.q75 - self.median) * (u - 0.5) / 0.25
        } else {
            self.q75 + (self.max - self.q75) * ((u - 0.75) / 0.25).powf(self.upper_exponent)
        };
        v.clamp(self.min, self.max)
    }

    fn lower_mean(&self) -> f64 {
        0.25 * (self.q25 - (self.q25 - self.min) / (self.lower_exponent + 1.0))
    }

    fn inner_mean(&self) -> f64 {
        0.125 * (self.q25 + self.median) + 0.125 * (self.median + self.q75)
    }

    fn upper_mean(&self) -> f64 {
        0.25 * (self.q75 + (self.max - self.q75) / (self.upper_exponent + 1.0))
    }

    /// Mean of the distribution defined by this quantile function.
    pub fn mean(&self) -> f64 {
        self.lower_mean() + self.inner_mean() + self.upper_mean()
    }
}

// Upper segment mean is 0.25 * (q75 + span / (k + 1)).
fn solve_upper(q75: f64, max: f64, target: f64) -> f64 {
    let span = max - q75;
    let excess = 4.0 * target - q75;
    if span <= 0.0 {
        return 1.0;
    }
    if excess <= 0.0 {
        return EXP_MAX;
    }
    span / excess - 1.0
}

// Lower segment mean is 0.25 * (q25 - span / (k + 1)).
fn solve_lower(min: f64, q25: f64, target: f64) -> f64 {
    let span = q25 - min;
    let deficit = q25 - 4.0 * target;
    if span <= 0.0 {
        return 1.0;
    }
    if deficit <= 0.0 {
        return EXP_MAX;
    }
    span / deficit - 1.0
}

/// Generates `n` records at 1 Hz whose per-feature marginals follow `stats`.
/// Deterministic in `seed`; every value lies within the feature's `[min, max]`.
pub fn generate_synthetic(stats: &FeatureStats, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(TelemetryError::Domain("n must be at least 1".into()));
    }
    stats.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(NUM_FEATURES);
    for f in Feature::ALL {
        let profile = QuantileProfile::fit(stats.get(f));
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        let column = strata
            .into_iter()
            .map(|s| {
                let u = (s as f64 + rng.random::<f64>()) / n as f64;
                profile.value_at(u)
            })
            .collect();
        columns.push(column);
    }
    let records = (0..n)
        .map(|i| {
            let features = std::array::from_fn(|j| columns[j][i]);
            TelemetryRecord::new(i as u64 * SYNTHETIC_PERIOD_MS, features)
        })
        .collect();
    Dataset::new(records)
}
