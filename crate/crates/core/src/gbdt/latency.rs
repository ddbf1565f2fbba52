use std::io::Write;
use std::time::Instant;

use super::{GbdtError, GbdtModel, Result};
use crate::telemetry::Dataset;

/// Monotonic time source in seconds.
pub trait Stopwatch {
    fn now(&mut self) -> f64;
}

pub struct WallClock {
    origin: Instant,
}

impl Default for WallClock {
    fn default() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Stopwatch for WallClock {
    fn now(&mut self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

/// Per-prediction latency summary in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub samples: usize,
    pub mean: f64,
    pub std: f64,
    pub p50: f64,
    pub p99: f64,
}

impl LatencyStats {
    pub const CSV_HEADER: &'static str = "metric,samples,mean_s,std_s,p50_s,p99_s";

    pub fn write_csv_row<W: Write>(&self, metric: &str, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{metric},{},{},{},{},{}",
            self.samples, self.mean, self.std, self.p50, self.p99
        )
    }
}

/// Mean, sample std and interpolated percentiles of `samples`.
pub fn latency_stats(samples: &[f64]) -> Result<LatencyStats> {
    if samples.is_empty() {
        return Err(GbdtError::Domain("no latency samples".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std = if samples.len() > 1 {
        (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(LatencyStats {
        samples: samples.len(),
        mean,
        std,
        p50: crate::telemetry::quantile(&sorted, 0.50),
        p99: crate::telemetry::quantile(&sorted, 0.99),
    })
}

/// Times every `predict_proba` call individually over `repetitions` passes of
/// `dataset`. One untimed warm-up pass precedes measurement.
pub fn measure_latency_with<S: Stopwatch>(
    model: &GbdtModel,
    dataset: &Dataset,
    repetitions: usize,
    stopwatch: &mut S,
) -> Result<LatencyStats> {
    if repetitions == 0 {
        return Err(GbdtError::Domain("repetitions must be at least 1".into()));
    }
    if dataset.is_empty() {
        return Err(GbdtError::Domain("cannot time an empty dataset".into()));
    }
    let mut sink = 0.0;
    for r in dataset.records() {
        sink += model.predict_proba(&r.features)?;
    }
    let mut samples = Vec::with_capacity(repetitions * dataset.len());
    for _ in 0..repetitions {
        for r in dataset.records() {
            let start = stopwatch.now();
            let p = model.predict_proba(&r.features)?;
            let end = stopwatch.now();
            sink += p;
            samples.push(end - start);
        }
    }
    std::hint::black_box(sink);
    latency_stats(&samples)
}

pub fn measure_inference_latency(
    model: &GbdtModel,
    dataset: &Dataset,
    repetitions: usize,
) -> Result<LatencyStats> {
    measure_latency_with(model, dataset, repetitions, &mut WallClock::default())
}
