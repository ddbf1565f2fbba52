use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::ExperimentError;
use crate::edge::{HopDelays, LatencyProfile, StartupDelay};
use crate::gbdt::GbdtParams;
use crate::netsim::{
    load_trace, MobilityTrace, NetworkConfig, SimTime, Topology, TopologyConfig, UplinkConfig,
};
use crate::orchestrator::{OrchestratorConfig, QueuePolicy};
use crate::telemetry::{table_two_injection_values, Feature};

pub const DEFAULT_SCENARIO: &str = include_str!("../../scenarios/default.toml");

fn secs(field: &str, v: f64) -> Result<SimTime, ExperimentError> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(ExperimentError::Config(format!(
            "{field} must be a non-negative number of seconds, got {v}"
        )));
    }
    Ok(SimTime::from_secs_f64(v))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetrySection {
    pub train_rows: usize,
    pub test_rows: usize,
    /// Optional real dataset replacing the synthetic test set.
    #[serde(default)]
    pub test_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    pub threshold: f64,
    pub seeds: Vec<u64>,
    pub sparse_densities: Vec<f64>,
    pub collective_lengths: Vec<usize>,
    pub feature_fraction: f64,
    pub train_sparse_density: f64,
    pub train_collective_length: usize,
    /// Overrides for the default injection values, keyed by feature name.
    #[serde(default)]
    pub injection_values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub num_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub learning_rate: f64,
    pub min_gain_to_split: f64,
    pub lambda_l2: f64,
    pub subsample: f64,
}

impl From<ModelSection> for GbdtParams {
    fn from(m: ModelSection) -> Self {
        GbdtParams {
            num_trees: m.num_trees,
            max_depth: m.max_depth,
            min_samples_leaf: m.min_samples_leaf,
            learning_rate: m.learning_rate,
            min_gain_to_split: m.min_gain_to_split,
            lambda_l2: m.lambda_l2,
            subsample: m.subsample,
        }
    }
}

/// `params` as a TOML table body, the same keys as the scenario `[model]`
/// section.
pub fn params_to_toml(p: &GbdtParams) -> String {
    format!(
        "num_trees = {}\nmax_depth = {}\nmin_samples_leaf = {}\nlearning_rate = {:?}\nmin_gain_to_split = {:?}\nlambda_l2 = {:?}\nsubsample = {:?}\n",
        p.num_trees, p.max_depth, p.min_samples_leaf, p.learning_rate, p.min_gain_to_split, p.lambda_l2, p.subsample
    )
}

pub fn params_from_toml(text: &str) -> Result<GbdtParams, ExperimentError> {
    let m: ModelSection =
        toml::from_str(text).map_err(|e| ExperimentError::Config(format!("parameters: {e}")))?;
    let p = GbdtParams::from(m);
    p.validate()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HpoSection {
    /// Zero disables tuning.
    pub trials: usize,
    pub report_every: usize,
    pub validation_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub delivery_latency_s: f64,
    pub session_id: u64,
    /// Zero disables uplink traffic.
    pub uplink_period_s: f64,
    pub uplink_tail_s: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSection {
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub period_s: Option<f64>,
    #[serde(default)]
    pub handovers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartupSection {
    pub mean_s: f64,
    pub std_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencySection {
    pub teardown_s: f64,
    pub radio_to_upf_s: f64,
    pub upf_to_mediator_s: f64,
    pub mediator_to_inference_s: f64,
    pub inference: StartupSection,
    pub mediator: StartupSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrchestratorSection {
    pub service_id: String,
    pub poll_interval_s: f64,
    pub max_polls: u32,
    pub action_delay_s: f64,
    pub queue_policy: String,
    pub include_mediator: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MigrationSection {
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    seed: u64,
    output_dir: PathBuf,
    telemetry: TelemetrySection,
    detection: DetectionSection,
    model: ModelSection,
    hpo: HpoSection,
    network: NetworkSection,
    trace: TraceSection,
    latency: LatencySection,
    orchestrator: OrchestratorSection,
    migration: MigrationSection,
    topology: TopologyConfig,
}

/// A validated experiment description. Relative paths resolve against the
/// scenario file's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub telemetry: TelemetrySection,
    pub detection: DetectionSection,
    pub injection_values: BTreeMap<Feature, f64>,
    pub params: GbdtParams,
    pub hpo: HpoSection,
    pub network: NetworkConfig,
    pub trace: MobilityTrace,
    pub latency: LatencyProfile,
    pub hops: HopDelays,
    pub orchestrator: OrchestratorConfig,
    pub service_id: String,
    pub migration_runs: usize,
    pub topology: Topology,
}

impl Scenario {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ExperimentError> {
        let raw: RawScenario =
            toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        Self::from_raw(raw, base_dir)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            ExperimentError::Config(m) => {
                ExperimentError::Config(format!("{}: {m}", path.display()))
            }
            other => other,
        })
    }

    /// The built-in two-node scenario; relative paths resolve against the
    /// working directory.
    pub fn default_scenario() -> Self {
        Self::from_toml(DEFAULT_SCENARIO, Path::new(".")).expect("built-in scenario is valid")
    }

    fn from_raw(raw: RawScenario, base: &Path) -> Result<Self, ExperimentError> {
        let cfg = |m: String| ExperimentError::Config(m);
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };

        let topology = Topology::new(raw.topology).map_err(|e| cfg(e.to_string()))?;

        let mut telemetry = raw.telemetry;
        if telemetry.train_rows == 0 || telemetry.test_rows == 0 {
            return Err(cfg("telemetry row counts must be positive".into()));
        }
        if let Some(p) = telemetry.test_csv.as_mut() {
            *p = resolve(p);
            if !p.is_file() {
                return Err(cfg(format!("test_csv {} does not exist", p.display())));
            }
        }

        let det = raw.detection;
        if !(det.threshold > 0.0 && det.threshold < 1.0) {
            return Err(cfg(format!(
                "threshold {} must lie in (0, 1)",
                det.threshold
            )));
        }
        if let Some(d) = det
            .sparse_densities
            .iter()
            .chain([&det.train_sparse_density])
            .find(|d| !(**d > 0.0 && **d < 1.0))
        {
            return Err(cfg(format!("density {d} must lie in (0, 1)")));
        }
        if det.collective_lengths.contains(&0) || det.train_collective_length == 0 {
            return Err(cfg("collective lengths must be at least 1".into()));
        }
        if !(det.feature_fraction > 0.0 && det.feature_fraction <= 1.0) {
            return Err(cfg(format!(
                "feature_fraction {} must lie in (0, 1]",
                det.feature_fraction
            )));
        }
        if det.seeds.is_empty()
            && !(det.sparse_densities.is_empty() && det.collective_lengths.is_empty())
        {
            return Err(cfg("detection needs at least one seed".into()));
        }
        let mut injection_values = table_two_injection_values();
        for (name, v) in &det.injection_values {
            let f = Feature::from_name(name)
                .ok_or_else(|| cfg(format!("unknown feature {name:?} in injection_values")))?;
            injection_values.insert(f, *v);
        }

        let params = GbdtParams::from(raw.model);
        params.validate().map_err(|e| cfg(e.to_string()))?;

        let hpo = raw.hpo;
        if !(hpo.validation_fraction > 0.0 && hpo.validation_fraction < 1.0)
            || hpo.report_every == 0
        {
            return Err(cfg(
                "hpo needs validation_fraction in (0, 1) and report_every >= 1".into(),
            ));
        }

        let n = raw.network;
        let uplink_period = secs("uplink_period_s", n.uplink_period_s)?;
        let network = NetworkConfig {
            delivery_latency: secs("delivery_latency_s", n.delivery_latency_s)?,
            session_id: n.session_id,
            uplink: (uplink_period > SimTime::ZERO).then_some(UplinkConfig {
                period: uplink_period,
                tail: secs("uplink_tail_s", n.uplink_tail_s)?,
            }),
        };

        let trace = match (&raw.trace.file, raw.trace.period_s, raw.trace.handovers) {
            (Some(file), None, None) => {
                let path = resolve(file);
                if !path.is_file() {
                    return Err(cfg(format!("trace file {} does not exist", path.display())));
                }
                load_trace(&path).map_err(|e| cfg(format!("{}: {e}", path.display())))?
            }
            (None, Some(period), Some(handovers)) => {
                let ids: Vec<_> = topology
                    .radio_nodes()
                    .iter()
                    .map(|r| r.id.clone())
                    .collect();
                MobilityTrace::alternating(&ids, secs("trace.period_s", period)?, handovers)
                    .map_err(|e| cfg(e.to_string()))?
            }
            _ => {
                return Err(cfg(
                    "trace needs either `file` or both `period_s` and `handovers`".into(),
                ))
            }
        };
        trace
            .validate_against(&topology)
            .map_err(|e| cfg(e.to_string()))?;

        let l = raw.latency;
        let startup = |s: StartupSection| {
            StartupDelay::new(s.mean_s, s.std_s).map_err(|e| cfg(e.to_string()))
        };
        let latency = LatencyProfile {
            inference: startup(l.inference)?,
            mediator: startup(l.mediator)?,
            teardown: secs("teardown_s", l.teardown_s)?,
        };
        let hops = HopDelays {
            radio_to_upf: secs("radio_to_upf_s", l.radio_to_upf_s)?,
            upf_to_mediator: secs("upf_to_mediator_s", l.upf_to_mediator_s)?,
            mediator_to_inference: secs("mediator_to_inference_s", l.mediator_to_inference_s)?,
        };

        let o = raw.orchestrator;
        let queue_policy = match o.queue_policy.as_str() {
            "serialize" => QueuePolicy::Serialize,
            "drop" => QueuePolicy::DropInFlight,
            other => {
                return Err(cfg(format!(
                    "unknown queue_policy {other:?} (serialize | drop)"
                )))
            }
        };
        let orchestrator = OrchestratorConfig {
            poll_interval: secs("poll_interval_s", o.poll_interval_s)?,
            max_polls: o.max_polls,
            action_delay: secs("action_delay_s", o.action_delay_s)?,
            queue_policy,
            include_mediator: o.include_mediator,
        };
        orchestrator.validate().map_err(|e| cfg(e.to_string()))?;
        if o.service_id.is_empty() {
            return Err(cfg("service_id must not be empty".into()));
        }

        Ok(Self {
            seed: raw.seed,
            output_dir: resolve(&raw.output_dir),
            telemetry,
            detection: det,
            injection_values,
            params,
            hpo,
            network,
            trace,
            latency,
            hops,
            orchestrator,
            service_id: o.service_id,
            migration_runs: raw.migration.runs,
            topology,
        })
    }
}
