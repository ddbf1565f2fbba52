use super::{derive_seed, ExperimentError, Result, Scenario};
use crate::edge::{DataPlane, EdgeRuntime, Mediator, MessageOutcome, PlacementEntry, ServiceId};
use crate::gbdt::GbdtModel;
use crate::netsim::{run, EventLog, MobilityTrace, NetworkConfig, SimTime, VirtualClock};
use crate::orchestrator::{
    MigrationOutcome, MigrationRecord, MigrationStore, MonitoringSystem, Orchestrator,
};
use crate::telemetry::TelemetryRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variant {
    WithMediator,
    WithoutMediator,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::WithMediator, Variant::WithoutMediator];

    pub fn name(self) -> &'static str {
        match self {
            Variant::WithMediator => "with_mediator",
            Variant::WithoutMediator => "without_mediator",
        }
    }

    pub fn from_name(name: &str) -> Option<Variant> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }

    pub fn include_mediator(self) -> bool {
        self == Variant::WithMediator
    }
}

/// The scenario trace cut at its first TAI change.
pub fn single_handover_trace(s: &Scenario) -> Result<MobilityTrace> {
    let atts = s.trace.attachments();
    let first = &atts[0];
    let tai0 = s.topology.tai_of(&first.radio_node)?;
    for a in &atts[1..] {
        if s.topology.tai_of(&a.radio_node)? != tai0 {
            return Ok(MobilityTrace::new(vec![first.clone(), a.clone()])?);
        }
    }
    Err(ExperimentError::Config(
        "scenario trace contains no TAI change".into(),
    ))
}

fn orchestrator(
    s: &Scenario,
    include_mediator: bool,
    seed: u64,
    trace: &MobilityTrace,
) -> Result<Orchestrator> {
    let runtime = EdgeRuntime::new(
        s.topology.edge_nodes().iter().map(|e| e.id.clone()),
        s.latency,
        seed,
    )?;
    let config = crate::orchestrator::OrchestratorConfig {
        include_mediator,
        ..s.orchestrator
    };
    let mut o = Orchestrator::new(
        ServiceId::new(s.service_id.clone()),
        &s.topology,
        runtime,
        config,
    )?;
    let first = trace.first();
    let home = s
        .topology
        .edge_for_tai(s.topology.tai_of(&first.radio_node)?)?
        .clone();
    o.bootstrap(&home, first.time)?;
    Ok(o)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MigrationExperiment {
    pub variant: Variant,
    pub records: Vec<MigrationRecord>,
}

/// `n_runs` independent single-handover migrations, each with its own
/// startup-delay stream.
pub fn run_migration_experiment(
    s: &Scenario,
    n_runs: usize,
    variant: Variant,
) -> Result<MigrationExperiment> {
    let trace = single_handover_trace(s)?;
    let network = NetworkConfig {
        uplink: None,
        ..s.network
    };
    let mut records = Vec::with_capacity(n_runs);
    for i in 0..n_runs {
        let orch = orchestrator(
            s,
            variant.include_mediator(),
            derive_seed(s.seed, variant.name(), i as u64),
            &trace,
        )?;
        let mut system = MonitoringSystem::new(orch, &s.topology);
        run(
            &mut VirtualClock::new(),
            &s.topology,
            &trace,
            &network,
            &mut [&mut system],
        )?;
        let got = system.orchestrator.records();
        if got.len() != 1 {
            return Err(ExperimentError::Runtime(format!(
                "run {i}: expected one migration, got {}",
                got.len()
            )));
        }
        records.push(got[0].clone());
    }
    Ok(MigrationExperiment { variant, records })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MigrationSummary {
    pub variant: Variant,
    pub runs: usize,
    pub mean_s: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    pub high_level_mean_s: f64,
    pub low_level_mean_s: f64,
    pub timeouts: usize,
}

impl MigrationSummary {
    pub const CSV_HEADER: &'static str =
        "variant,runs,mean_s,std_s,min_s,max_s,high_level_mean_s,low_level_mean_s,timeouts";
}

pub fn summarize_migrations(
    variant: Variant,
    records: &[MigrationRecord],
) -> Result<MigrationSummary> {
    if records.is_empty() {
        return Err(ExperimentError::Config(
            "no migration runs to summarize".into(),
        ));
    }
    let totals: Vec<f64> = records.iter().map(|r| r.total().as_secs_f64()).collect();
    let n = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / n;
    let std = if totals.len() > 1 {
        (totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let avg = |f: fn(&MigrationRecord) -> SimTime| {
        records.iter().map(|r| f(r).as_secs_f64()).sum::<f64>() / n
    };
    Ok(MigrationSummary {
        variant,
        runs: records.len(),
        mean_s: mean,
        std_s: std,
        min_s: totals.iter().copied().fold(f64::INFINITY, f64::min),
        max_s: totals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        high_level_mean_s: avg(|r| r.high_level_time),
        low_level_mean_s: avg(|r| r.low_level_time),
        timeouts: records
            .iter()
            .filter(|r| r.outcome == MigrationOutcome::Timeout)
            .count(),
    })
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub events: EventLog,
    pub records: Vec<MigrationRecord>,
    pub placements: Vec<PlacementEntry>,
    pub outcomes: Vec<MessageOutcome>,
    pub mediator: Mediator,
    pub mapping_errors: usize,
}

/// Full closed loop over the scenario trace with telemetry flowing through
/// the data plane. `stream` is replayed cyclically as uplink payload.
pub fn run_simulation(
    s: &Scenario,
    model: &GbdtModel,
    stream: &[TelemetryRecord],
    inference_time: SimTime,
    include_mediator: bool,
    store: Option<MigrationStore>,
) -> Result<SimulationOutput> {
    let mut orch = orchestrator(
        s,
        include_mediator,
        derive_seed(s.seed, "simulate", 0),
        &s.trace,
    )?;
    if let Some(store) = store {
        orch = orch.with_store(store);
    }
    let mut plane = DataPlane::new(
        ServiceId::new(s.service_id.clone()),
        model,
        s.hops,
        inference_time,
    );
    plane.threshold = s.detection.threshold;
    let mut system = MonitoringSystem::new(orch, &s.topology).with_data_plane(plane, stream);
    let events = run(
        &mut VirtualClock::new(),
        &s.topology,
        &s.trace,
        &s.network,
        &mut [&mut system],
    )?;
    let mapping_errors = system.orchestrator.mapping_errors;
    let plane = system.data_plane.take().expect("attached above");
    let (runtime, records) = system.orchestrator.into_parts();
    Ok(SimulationOutput {
        events,
        records,
        placements: runtime.placement_log(),
        outcomes: plane.outcomes,
        mediator: plane.mediator,
        mapping_errors,
    })
}
