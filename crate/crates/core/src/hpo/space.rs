use std::collections::BTreeMap;

use rand::Rng;

use super::{HpoError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    /// Inclusive integer range.
    IntRange {
        lo: i64,
        hi: i64,
    },
    LogUniform {
        lo: f64,
        hi: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Distribution::IntRange { lo, hi } => lo < hi,
            Distribution::LogUniform { lo, hi } => lo > 0.0 && lo < hi && hi.is_finite(),
            Distribution::Uniform { lo, hi } => lo < hi && lo.is_finite() && hi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(HpoError::Domain(format!("invalid distribution {self:?}")))
        }
    }

    /// Bounds of the internal (continuous, possibly log) sampling scale.
    pub(crate) fn internal_bounds(&self) -> (f64, f64) {
        match *self {
            // Widen by half a unit so rounding gives every integer equal mass.
            Distribution::IntRange { lo, hi } => (lo as f64 - 0.5, hi as f64 + 0.5),
            Distribution::LogUniform { lo, hi } => (lo.ln(), hi.ln()),
            Distribution::Uniform { lo, hi } => (lo, hi),
        }
    }

    pub(crate) fn to_internal(&self, value: f64) -> f64 {
        match self {
            Distribution::LogUniform { .. } => value.ln(),
            _ => value,
        }
    }

    pub(crate) fn from_internal(&self, x: f64) -> f64 {
        match *self {
            Distribution::IntRange { lo, hi } => x.round().clamp(lo as f64, hi as f64),
            Distribution::LogUniform { lo, hi } => x.exp().clamp(lo, hi),
            Distribution::Uniform { lo, hi } => x.clamp(lo, hi),
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        match *self {
            Distribution::IntRange { lo, hi } => {
                value.fract() == 0.0 && value >= lo as f64 && value <= hi as f64
            }
            Distribution::LogUniform { lo, hi } | Distribution::Uniform { lo, hi } => {
                value >= lo && value <= hi
            }
        }
    }

    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = self.internal_bounds();
        self.from_internal(rng.random_range(lo..hi))
    }
}

/// A sampled configuration, keyed by parameter name.
pub type Point = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchSpace {
    params: BTreeMap<String, Distribution>,
}

impl SearchSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, dist: Distribution) -> Self {
        self.params.insert(name.to_string(), dist);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(HpoError::Domain("search space is empty".into()));
        }
        self.params.values().try_for_each(Distribution::validate)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Distribution)> {
        self.params.iter()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn contains(&self, point: &Point) -> bool {
        point.len() == self.params.len()
            && self
                .params
                .iter()
                .all(|(k, d)| point.get(k).is_some_and(|v| d.contains(*v)))
    }

    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Point {
        self.params
            .iter()
            .map(|(k, d)| (k.clone(), d.sample_uniform(rng)))
            .collect()
    }
}
