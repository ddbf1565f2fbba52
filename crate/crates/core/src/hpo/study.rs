use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::pruner::MedianPruner;
use super::space::{Point, SearchSpace};
use super::tpe::{suggest, TpeConfig};
use super::{HpoError, Result, Trial, TrialState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrialOutcome {
    Complete(f64),
    Pruned,
}

/// Handed to the objective so it can report intermediate losses.
pub struct Reporter<'a> {
    trial: &'a mut Trial,
    history: &'a [Trial],
    pruner: Option<&'a MedianPruner>,
}

impl Reporter<'_> {
    /// Records `value` at `step`; returns true when the trial should stop.
    pub fn report(&mut self, step: usize, value: f64) -> bool {
        self.trial.intermediate_values.push((step, value));
        self.pruner
            .is_some_and(|p| p.should_prune(self.trial, self.history, step))
    }

    pub fn trial_id(&self) -> usize {
        self.trial.id
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler {
    Tpe(TpeConfig),
    Random,
}

#[derive(Debug, Clone)]
pub struct Study {
    pub space: SearchSpace,
    pub sampler: Sampler,
    pub pruner: Option<MedianPruner>,
    pub seed: u64,
    pub trials: Vec<Trial>,
}

// splitmix64 finalizer: decorrelates per-trial seeds.
fn trial_seed(seed: u64, id: usize) -> u64 {
    let mut z = seed
        ^ (id as u64)
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Study {
    pub fn new(space: SearchSpace, seed: u64) -> Self {
        Self {
            space,
            sampler: Sampler::Tpe(TpeConfig::default()),
            pruner: Some(MedianPruner::default()),
            seed,
            trials: Vec::new(),
        }
    }

    pub fn with_sampler(mut self, sampler: Sampler) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn with_pruner(mut self, pruner: Option<MedianPruner>) -> Self {
        self.pruner = pruner;
        self
    }

    fn next_point(&self, id: usize) -> Result<Point> {
        let seed = trial_seed(self.seed, id);
        match &self.sampler {
            Sampler::Tpe(cfg) => suggest(&self.trials, &self.space, seed, cfg),
            Sampler::Random => {
                self.space.validate()?;
                Ok(self
                    .space
                    .sample_uniform(&mut ChaCha8Rng::seed_from_u64(seed)))
            }
        }
    }

    /// Runs `n_trials` more trials sequentially.
    pub fn optimize<F>(&mut self, mut objective: F, n_trials: usize) -> Result<&Trial>
    where
        F: FnMut(&Point, &mut Reporter<'_>) -> Result<TrialOutcome>,
    {
        if n_trials == 0 {
            return Err(HpoError::Domain("n_trials must be at least 1".into()));
        }
        for _ in 0..n_trials {
            let id = self.trials.len();
            let params = self.next_point(id)?;
            let mut trial = Trial::new(id, params.clone());
            let outcome = {
                let mut reporter = Reporter {
                    trial: &mut trial,
                    history: &self.trials,
                    pruner: self.pruner.as_ref(),
                };
                objective(&params, &mut reporter)?
            };
            trial.state = match outcome {
                TrialOutcome::Complete(loss) => TrialState::Complete(loss),
                TrialOutcome::Pruned if !trial.intermediate_values.is_empty() => TrialState::Pruned,
                TrialOutcome::Pruned => {
                    return Err(HpoError::Objective(
                        "trial pruned without reporting an intermediate value".into(),
                    ))
                }
            };
            log::debug!("trial {id}: {:?}", trial.state);
            self.trials.push(trial);
        }
        self.best_trial()
    }

    /// Completed trial with the lowest final loss (earliest on ties).
    pub fn best_trial(&self) -> Result<&Trial> {
        self.trials
            .iter()
            .filter_map(|t| t.final_loss().filter(|l| !l.is_nan()).map(|l| (t, l)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.id.cmp(&b.0.id)))
            .map(|(t, _)| t)
            .ok_or(HpoError::NoCompletedTrials)
    }
}

/// TPE study with median pruning; returns the best completed trial.
pub fn optimize<F>(objective: F, space: &SearchSpace, n_trials: usize, seed: u64) -> Result<Trial>
where
    F: FnMut(&Point, &mut Reporter<'_>) -> Result<TrialOutcome>,
{
    let mut study = Study::new(space.clone(), seed);
    study.optimize(objective, n_trials).cloned()
}

/// Pure random search baseline without pruning.
pub fn optimize_random<F>(
    objective: F,
    space: &SearchSpace,
    n_trials: usize,
    seed: u64,
) -> Result<Trial>
where
    F: FnMut(&Point, &mut Reporter<'_>) -> Result<TrialOutcome>,
{
    let mut study = Study::new(space.clone(), seed)
        .with_sampler(Sampler::Random)
        .with_pruner(None);
    study.optimize(objective, n_trials).cloned()
}

/// Append-only study log: `trial_id,params,state,final_loss`.
pub fn write_study_log<W: Write>(
    trials: &[Trial],
    mut w: W,
    with_header: bool,
) -> std::io::Result<()> {
    if with_header {
        writeln!(w, "trial_id,params,state,final_loss")?;
    }
    for t in trials {
        let params: Vec<String> = t.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let (state, loss) = match t.state {
            TrialState::Running => ("running", String::new()),
            TrialState::Complete(l) => ("complete", l.to_string()),
            TrialState::Pruned => ("pruned", String::new()),
        };
        writeln!(w, "{},{},{},{}", t.id, params.join(";"), state, loss)?;
    }
    Ok(())
}
