//! Univariate tree-structured Parzen estimator.
//!
//! Completed trials are split at the γ loss quantile into a "good" and a
//! "bad" set. For every parameter a truncated Gaussian mixture is fit to each
//! set (one kernel per observation plus a broad prior kernel, Scott-rule
//! bandwidth); candidates are drawn from the good mixture and the one
//! maximizing `l(x) / g(x)` is returned.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::space::{Point, SearchSpace};
use super::{Result, Trial};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpeConfig {
    /// Fraction of completed trials treated as good.
    pub gamma: f64,
    /// Completed trials required before the model replaces random sampling.
    pub n_startup: usize,
    /// Candidates drawn from the good density per parameter.
    pub n_ei_candidates: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            n_startup: 10,
            n_ei_candidates: 24,
        }
    }
}

struct Parzen {
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    /// Probability mass of each kernel inside `[lo, hi]`.
    masses: Vec<f64>,
    lo: f64,
    hi: f64,
}

fn std_normal() -> Normal {
    Normal::standard()
}

impl Parzen {
    fn fit(observations: &[f64], lo: f64, hi: f64) -> Self {
        let range = hi - lo;
        let n = observations.len();
        let mut mus: Vec<f64> = observations.to_vec();
        let bandwidth = if n >= 2 {
            let mean = mus.iter().sum::<f64>() / n as f64;
            let var = mus.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            1.059 * var.sqrt() * (n as f64).powf(-0.2)
        } else {
            0.0
        };
        let floor = range / (100.0f64).min(1.0 + n as f64);
        let bandwidth = bandwidth.clamp(floor, range);
        let mut sigmas = vec![bandwidth; n];
        // prior kernel
        mus.push(0.5 * (lo + hi));
        sigmas.push(range);

        let z = std_normal();
        let masses = mus
            .iter()
            .zip(&sigmas)
            .map(|(&m, &s)| (z.cdf((hi - m) / s) - z.cdf((lo - m) / s)).max(1e-300))
            .collect();
        Self {
            mus,
            sigmas,
            masses,
            lo,
            hi,
        }
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let z = std_normal();
        let k = self.mus.len() as f64;
        let density: f64 = self
            .mus
            .iter()
            .zip(&self.sigmas)
            .zip(&self.masses)
            .map(|((&m, &s), &mass)| z.pdf((x - m) / s) / (s * mass))
            .sum::<f64>()
            / k;
        density.max(1e-300).ln()
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let z = std_normal();
        let k = rng.random_range(0..self.mus.len());
        let (m, s) = (self.mus[k], self.sigmas[k]);
        let a = z.cdf((self.lo - m) / s);
        let b = z.cdf((self.hi - m) / s);
        let u = a + (b - a) * rng.random::<f64>();
        let x = m + s * z.inverse_cdf(u.clamp(1e-300, 1.0 - 1e-16));
        if x.is_finite() {
            x.clamp(self.lo, self.hi)
        } else {
            m.clamp(self.lo, self.hi)
        }
    }
}

/// Proposes the next configuration given the trial history.
pub fn suggest(
    history: &[Trial],
    space: &SearchSpace,
    seed: u64,
    config: &TpeConfig,
) -> Result<Point> {
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut completed: Vec<(&Trial, f64)> = history
        .iter()
        .filter_map(|t| t.final_loss().map(|l| (t, l)))
        .filter(|(t, _)| space.contains(&t.params))
        .collect();
    if completed.len() < config.n_startup.max(2) {
        return Ok(space.sample_uniform(&mut rng));
    }
    completed.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.id.cmp(&b.0.id)));
    let n_good =
        ((config.gamma * completed.len() as f64).ceil() as usize).clamp(1, completed.len() - 1);
    let (good, bad) = completed.split_at(n_good);

    let mut point = Point::new();
    for (name, dist) in space.iter() {
        let (lo, hi) = dist.internal_bounds();
        let obs = |set: &[(&Trial, f64)]| -> Vec<f64> {
            set.iter()
                .map(|(t, _)| dist.to_internal(t.params[name]))
                .collect()
        };
        let l = Parzen::fit(&obs(good), lo, hi);
        let g = Parzen::fit(&obs(bad), lo, hi);
        let mut best: Option<(f64, f64)> = None;
        for _ in 0..config.n_ei_candidates.max(1) {
            let x = l.sample(&mut rng);
            let score = l.log_pdf(x) - g.log_pdf(x);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((x, score));
            }
        }
        let (x, _) = best.expect("at least one candidate");
        point.insert(name.clone(), dist.from_internal(x));
    }
    Ok(point)
}
