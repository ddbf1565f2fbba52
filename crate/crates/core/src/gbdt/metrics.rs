use super::{GbdtError, GbdtModel, Result};
use crate::telemetry::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, actual: bool, predicted: bool) {
        match (actual, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Precision/recall/F1. An undefined ratio (zero denominator) is reported as
/// 0 with its `*_defined` flag cleared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_defined: bool,
    pub recall_defined: bool,
    pub confusion: Confusion,
}

impl Metrics {
    pub fn from_confusion(c: Confusion) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                (0.0, false)
            } else {
                (num as f64 / den as f64, true)
            }
        };
        let (precision, precision_defined) = ratio(c.tp, c.tp + c.fp);
        let (recall, recall_defined) = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
            precision_defined,
            recall_defined,
            confusion: c,
        }
    }
}

pub fn evaluate(model: &GbdtModel, dataset: &Dataset, threshold: f64) -> Result<Metrics> {
    if dataset.is_empty() {
        return Err(GbdtError::Domain(
            "cannot evaluate on an empty dataset".into(),
        ));
    }
    let mut c = Confusion::default();
    for r in dataset.records() {
        let predicted = model.classify(&r.features, threshold)? == 1;
        c.record(r.label.is_anomalous(), predicted);
    }
    Ok(Metrics::from_confusion(c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let m = Metrics::from_confusion(Confusion {
            tp: 4,
            fp: 0,
            tn: 10,
            fn_: 0,
        });
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_computed_confusion() {
        let m = Metrics::from_confusion(Confusion {
            tp: 1,
            fp: 1,
            tn: 0,
            fn_: 0,
        });
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 1.0);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn no_positive_predictions_flags_precision() {
        let m = Metrics::from_confusion(Confusion {
            tp: 0,
            fp: 0,
            tn: 5,
            fn_: 2,
        });
        assert!(!m.precision_defined);
        assert!(m.recall_defined);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }
}
