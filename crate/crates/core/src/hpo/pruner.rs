use super::{Trial, TrialState};

/// Stops a trial whose intermediate value is strictly worse (higher) than the
/// median of other finished trials at the same step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianPruner {
    /// Pruning is disabled for steps below this.
    pub n_warmup_steps: usize,
}

impl Default for MedianPruner {
    fn default() -> Self {
        Self { n_warmup_steps: 5 }
    }
}

impl MedianPruner {
    pub fn should_prune(&self, trial: &Trial, history: &[Trial], step: usize) -> bool {
        if step < self.n_warmup_steps {
            return false;
        }
        let Some(value) = trial.value_at(step) else {
            return false;
        };
        if value.is_nan() {
            return true;
        }
        let mut peers: Vec<f64> = history
            .iter()
            .filter(|t| t.id != trial.id)
            .filter(|t| matches!(t.state, TrialState::Complete(_) | TrialState::Pruned))
            .filter_map(|t| t.value_at(step))
            .filter(|v| !v.is_nan())
            .collect();
        if peers.is_empty() {
            return false;
        }
        peers.sort_by(f64::total_cmp);
        let median = crate::telemetry::quantile(&peers, 0.5);
        value > median
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpo::Point;

    fn finished(id: usize, values: &[f64]) -> Trial {
        Trial {
            id,
            params: Point::new(),
            intermediate_values: values
                .iter()
                .enumerate()
                .map(|(i, v)| (i + 1, *v))
                .collect(),
            state: TrialState::Complete(*values.last().unwrap()),
        }
    }

    fn running(id: usize, values: &[f64]) -> Trial {
        Trial {
            state: TrialState::Running,
            ..finished(id, values)
        }
    }

    #[test]
    fn first_trial_never_pruned() {
        let p = MedianPruner { n_warmup_steps: 0 };
        let t = running(0, &[9.0, 9.0, 9.0]);
        assert!(!p.should_prune(&t, &[], 3));
    }

    #[test]
    fn value_at_median_is_kept() {
        let p = MedianPruner { n_warmup_steps: 0 };
        let history = vec![
            finished(0, &[1.0, 1.0, 0.5]),
            finished(1, &[1.0, 1.0, 0.7]),
            finished(2, &[1.0, 1.0, 0.9]),
        ];
        assert!(!p.should_prune(&running(3, &[1.0, 1.0, 0.7]), &history, 3));
        assert!(p.should_prune(&running(3, &[1.0, 1.0, 0.71]), &history, 3));
    }

    #[test]
    fn worse_than_all_history_after_warmup() {
        let p = MedianPruner { n_warmup_steps: 2 };
        let history = vec![finished(0, &[0.9, 0.6, 0.4]), finished(1, &[0.8, 0.5, 0.3])];
        let t = running(2, &[1.0, 0.9, 0.8]);
        assert!(p.should_prune(&t, &history, 3));
        // inside warm-up
        assert!(!p.should_prune(&t, &history, 1));
        // default warm-up of 5 steps blocks step 3
        assert!(!MedianPruner::default().should_prune(&t, &history, 3));
    }

    #[test]
    fn running_peers_are_ignored() {
        let p = MedianPruner { n_warmup_steps: 0 };
        let history = vec![running(0, &[0.1])];
        assert!(!p.should_prune(&running(1, &[5.0]), &history, 1));
    }
}
