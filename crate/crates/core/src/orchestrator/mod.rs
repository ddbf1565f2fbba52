//! Closed-loop migration controller driven by handover notifications.

mod store;
mod system;

pub use store::{load_records, read_records, write_records, MigrationStore, MIGRATION_LOG_HEADER};
pub use system::MonitoringSystem;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::edge::{DeploymentId, EdgeError, EdgeRuntime, ServiceId, ServiceKind, ServiceStatus};
use crate::netsim::{EdgeNodeId, PlmnId, SimTime, SmContextEvent, TaiId, Topology, VirtualClock};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("no edge node mapped for PLMN {plmn} / TAI {tai}")]
    Unmapped { plmn: PlmnId, tai: TaiId },
    #[error("relocation target {0} already hosts the service")]
    SameNode(EdgeNodeId),
    #[error("service not InSync {polls} polls after request at {request_time} s")]
    PollTimeout { request_time: SimTime, polls: u32 },
    #[error("invalid orchestrator config: {0}")]
    Config(String),
    #[error(transparent)]
    Edge(#[from] EdgeError),
    #[error("migration log {path}: {message}")]
    Store { path: String, message: String },
    #[error("migration log line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// `(plmn, tai)` to edge node, derived from the topology's TAI to UPF to edge
/// chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaiEdgeMap(BTreeMap<(PlmnId, TaiId), EdgeNodeId>);

impl TaiEdgeMap {
    pub fn from_topology(topology: &Topology) -> Self {
        Self(
            topology
                .tais()
                .iter()
                .map(|t| {
                    let edge = topology.edge_for_tai(&t.tai).expect("validated topology");
                    ((t.plmn.clone(), t.tai.clone()), edge.clone())
                })
                .collect(),
        )
    }

    pub fn get(&self, plmn: &PlmnId, tai: &TaiId) -> Result<&EdgeNodeId, OrchestratorError> {
        self.0
            .get(&(plmn.clone(), tai.clone()))
            .ok_or_else(|| OrchestratorError::Unmapped {
                plmn: plmn.clone(),
                tai: tai.clone(),
            })
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(PlmnId, TaiId), &EdgeNodeId)> {
        self.0.iter()
    }
}

/// Step 1: event to target edge node.
pub fn map_event<'m>(
    event: &SmContextEvent,
    map: &'m TaiEdgeMap,
) -> Result<&'m EdgeNodeId, OrchestratorError> {
    map.get(&event.plmn, &event.new_tai)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Placement {
    OnNode(EdgeNodeId, ServiceStatus),
    Absent,
}

/// Step 2: where the service lives at `at`.
pub fn verify_status(service_id: &ServiceId, runtime: &EdgeRuntime, at: SimTime) -> Placement {
    match runtime.placement_of(service_id, at) {
        Some((_, node, status)) => Placement::OnNode(node.clone(), status),
        None => Placement::Absent,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueuePolicy {
    /// Notifications arriving mid-migration wait for it to finish.
    Serialize,
    /// Notifications arriving mid-migration are discarded.
    DropInFlight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrchestratorConfig {
    pub poll_interval: SimTime,
    pub max_polls: u32,
    /// Time from receiving a notification to issuing the relocation.
    pub action_delay: SimTime,
    pub queue_policy: QueuePolicy,
    pub include_mediator: bool,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            poll_interval: SimTime::from_millis(500),
            max_polls: 600,
            action_delay: SimTime::ZERO,
            queue_policy: QueuePolicy::Serialize,
            include_mediator: true,
        }
    }
}

impl OrchestratorConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.poll_interval == SimTime::ZERO {
            return Err(OrchestratorError::Config(
                "poll interval must be positive".into(),
            ));
        }
        if self.max_polls == 0 {
            return Err(OrchestratorError::Config(
                "max polls must be at least 1".into(),
            ));
        }
        if self.action_delay > self.poll_interval {
            return Err(OrchestratorError::Config(format!(
                "action delay {} s exceeds the poll interval {} s",
                self.action_delay, self.poll_interval
            )));
        }
        Ok(())
    }

    pub fn components(&self) -> &'static [ServiceKind] {
        if self.include_mediator {
            &[ServiceKind::Inference, ServiceKind::Mediator]
        } else {
            &[ServiceKind::Inference]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MigrationOutcome {
    Completed,
    Timeout,
}

impl MigrationOutcome {
    pub fn name(self) -> &'static str {
        match self {
            MigrationOutcome::Completed => "completed",
            MigrationOutcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MigrationRecord {
    pub event_time: SimTime,
    pub request_time: SimTime,
    /// First poll that saw InSync, or the last poll on timeout.
    pub in_sync_time: SimTime,
    pub source: Option<EdgeNodeId>,
    pub target: EdgeNodeId,
    /// Orchestrator's own time: reaction delay plus polling overshoot.
    pub high_level_time: SimTime,
    /// Platform startup time.
    pub low_level_time: SimTime,
    pub outcome: MigrationOutcome,
}

impl MigrationRecord {
    pub fn total(&self) -> SimTime {
        self.in_sync_time - self.request_time
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HandleOutcome {
    NoOp,
    Migrated(MigrationRecord),
}

/// Serialized control loop owning the edge runtime.
#[derive(Debug)]
pub struct Orchestrator {
    pub service_id: ServiceId,
    pub config: OrchestratorConfig,
    map: TaiEdgeMap,
    runtime: EdgeRuntime,
    current: Option<DeploymentId>,
    records: Vec<MigrationRecord>,
    store: Option<MigrationStore>,
    busy_until: SimTime,
    pub mapping_errors: usize,
    pub dropped_notifications: usize,
}

impl Orchestrator {
    pub fn new(
        service_id: ServiceId,
        topology: &Topology,
        runtime: EdgeRuntime,
        config: OrchestratorConfig,
    ) -> Result<Self, OrchestratorError> {
        config.validate()?;
        Ok(Self {
            service_id,
            config,
            map: TaiEdgeMap::from_topology(topology),
            runtime,
            current: None,
            records: Vec::new(),
            store: None,
            busy_until: SimTime::ZERO,
            mapping_errors: 0,
            dropped_notifications: 0,
        })
    }

    /// Every completed record is also appended to `store`.
    pub fn with_store(mut self, store: MigrationStore) -> Self {
        self.store = Some(store);
        self
    }

    pub fn map(&self) -> &TaiEdgeMap {
        &self.map
    }

    pub fn runtime(&self) -> &EdgeRuntime {
        &self.runtime
    }

    pub fn runtime_mut(&mut self) -> &mut EdgeRuntime {
        &mut self.runtime
    }

    pub fn records(&self) -> &[MigrationRecord] {
        &self.records
    }

    pub fn into_parts(self) -> (EdgeRuntime, Vec<MigrationRecord>) {
        (self.runtime, self.records)
    }

    pub fn current_node(&self) -> Option<&EdgeNodeId> {
        self.current.map(|d| &self.runtime.deployments()[d.0].node)
    }

    /// Places the service InSync on `node` before the scenario starts.
    pub fn bootstrap(&mut self, node: &EdgeNodeId, at: SimTime) -> Result<(), OrchestratorError> {
        let dep = self
            .runtime
            .bootstrap(&self.service_id, node, at, self.config.components())?;
        self.current = Some(dep);
        Ok(())
    }

    /// Applies the queue policy, then handles the event. Mapping errors are
    /// logged and leave placement untouched.
    pub fn on_notification<E>(
        &mut self,
        delivered_at: SimTime,
        event: &SmContextEvent,
        clock: &mut VirtualClock<E>,
    ) -> Result<HandleOutcome, OrchestratorError> {
        if self.config.queue_policy == QueuePolicy::DropInFlight && delivered_at < self.busy_until {
            self.dropped_notifications += 1;
            log::info!(
                "dropping notification for {} delivered mid-migration",
                event.new_tai
            );
            return Ok(HandleOutcome::NoOp);
        }
        match self.handle_event(event, clock) {
            Err(e @ OrchestratorError::Unmapped { .. }) => {
                self.mapping_errors += 1;
                log::warn!("{e}");
                Err(e)
            }
            other => other,
        }
    }

    /// Steps 1 to 5: map, verify, relocate, poll, account.
    pub fn handle_event<E>(
        &mut self,
        event: &SmContextEvent,
        clock: &mut VirtualClock<E>,
    ) -> Result<HandleOutcome, OrchestratorError> {
        let received = clock.now();
        let target = map_event(event, &self.map)?.clone();
        if let Placement::OnNode(node, _) = verify_status(&self.service_id, &self.runtime, received)
        {
            if node == target {
                return Ok(HandleOutcome::NoOp);
            }
        }
        clock.advance_to(received + self.config.action_delay);
        let source = self.current_node().cloned();
        let request_time = self.relocate(&target, clock)?;
        let dep = self.current.expect("relocate sets the deployment");
        let (in_sync_time, outcome) = match self.poll_until_in_sync(dep, request_time, clock) {
            Ok(t) => (t, MigrationOutcome::Completed),
            Err(OrchestratorError::PollTimeout { .. }) => (clock.now(), MigrationOutcome::Timeout),
            Err(e) => return Err(e),
        };
        let ready = self
            .runtime
            .deployment_ready_at(dep)
            .filter(|_| outcome == MigrationOutcome::Completed)
            .unwrap_or(in_sync_time);
        let record = MigrationRecord {
            event_time: event.time,
            request_time,
            in_sync_time,
            source,
            target,
            high_level_time: (request_time - received) + (in_sync_time - ready),
            low_level_time: ready - request_time,
            outcome,
        };
        if outcome == MigrationOutcome::Timeout {
            log::warn!(
                "migration to {} timed out at {} s",
                record.target,
                in_sync_time
            );
        }
        if let Some(store) = self.store.as_mut() {
            store.append(&record)?;
        }
        self.busy_until = in_sync_time;
        self.records.push(record.clone());
        Ok(HandleOutcome::Migrated(record))
    }

    /// Step 3: stop at the source, start at the target. Returns the request
    /// time.
    pub fn relocate<E>(
        &mut self,
        target: &EdgeNodeId,
        clock: &VirtualClock<E>,
    ) -> Result<SimTime, OrchestratorError> {
        let now = clock.now();
        if self.current_node() == Some(target)
            && self
                .runtime
                .service_status_on(&self.service_id, target, now)
                .is_some_and(ServiceStatus::is_live)
        {
            return Err(OrchestratorError::SameNode(target.clone()));
        }
        if let Some(dep) = self.current {
            if self
                .runtime
                .deployment_status(dep, now)
                .is_some_and(ServiceStatus::is_live)
            {
                self.runtime.terminate_deployment(dep, now)?;
            }
        }
        let components = self.config.components();
        self.runtime
            .deploy_service(&self.service_id, target, now, components)?;
        self.current = Some(DeploymentId(self.runtime.deployments().len() - 1));
        Ok(now)
    }

    /// Step 4: checks at `request + k * interval`, k = 1, 2, ..., advancing
    /// the clock to each poll.
    pub fn poll_until_in_sync<E>(
        &self,
        dep: DeploymentId,
        request_time: SimTime,
        clock: &mut VirtualClock<E>,
    ) -> Result<SimTime, OrchestratorError> {
        for k in 1..=self.config.max_polls {
            let t = request_time + self.config.poll_interval.mul(u64::from(k));
            clock.advance_to(t);
            if self.runtime.deployment_status(dep, t) == Some(ServiceStatus::InSync) {
                return Ok(t);
            }
        }
        Err(OrchestratorError::PollTimeout {
            request_time,
            polls: self.config.max_polls,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edge::{LatencyProfile, StartupDelay};

    fn event(new_tai: &str, t: SimTime) -> SmContextEvent {
        SmContextEvent {
            time: t,
            plmn: "00101".into(),
            old_tai: "tai1".into(),
            new_tai: new_tai.into(),
            session_id: 1,
        }
    }

    fn orchestrator(inference_s: f64, include_mediator: bool) -> Orchestrator {
        let topo = Topology::two_node();
        let profile = LatencyProfile {
            inference: StartupDelay::new(inference_s, 0.0).unwrap(),
            mediator: StartupDelay::new(0.0, 0.0).unwrap(),
            teardown: SimTime::ZERO,
        };
        let rt =
            EdgeRuntime::new(topo.edge_nodes().iter().map(|e| e.id.clone()), profile, 1).unwrap();
        let config = OrchestratorConfig {
            include_mediator,
            ..OrchestratorConfig::default()
        };
        let mut o = Orchestrator::new("monitor".into(), &topo, rt, config).unwrap();
        o.bootstrap(&"edge1".into(), SimTime::ZERO).unwrap();
        o
    }

    #[test]
    fn map_matches_topology_composition() {
        let topo = Topology::two_node();
        let map = TaiEdgeMap::from_topology(&topo);
        assert_eq!(map.len(), topo.tais().len());
        for ((plmn, tai), edge) in map.iter() {
            let upf = topo.nearest_upf(tai).unwrap();
            assert_eq!(Some(edge), topo.edge_for_upf(upf));
            assert_eq!(&topo.tracking_area(tai).unwrap().plmn, plmn);
        }
        assert!(matches!(
            map_event(&event("tai7", SimTime::ZERO), &map),
            Err(OrchestratorError::Unmapped { .. })
        ));
    }

    #[test]
    fn same_node_is_noop() {
        let mut o = orchestrator(24.3, false);
        let mut clock: VirtualClock<()> = VirtualClock::new();
        clock.advance_to(SimTime::from_millis(10_000));
        let out = o
            .handle_event(&event("tai1", SimTime::from_millis(9_950)), &mut clock)
            .unwrap();
        assert_eq!(out, HandleOutcome::NoOp);
        assert!(o.records().is_empty());
        assert_eq!(clock.now(), SimTime::from_millis(10_000));
    }

    #[test]
    fn readiness_rounds_up_to_poll_grid() {
        let mut o = orchestrator(24.3, false);
        let mut clock: VirtualClock<()> = VirtualClock::new();
        clock.advance_to(SimTime::from_millis(10_000));
        let HandleOutcome::Migrated(r) = o
            .handle_event(&event("tai2", SimTime::from_millis(9_950)), &mut clock)
            .unwrap()
        else {
            panic!()
        };
        assert_eq!(r.request_time, SimTime::from_millis(10_000));
        assert_eq!(r.total(), SimTime::from_millis(24_500));
        assert_eq!(r.low_level_time, SimTime::from_millis(24_300));
        assert_eq!(r.high_level_time, SimTime::from_millis(200));
        assert_eq!(r.source, Some("edge1".into()));
        assert_eq!(r.target.as_str(), "edge2");
        assert_eq!(clock.now(), r.in_sync_time);
        assert_eq!(o.current_node().unwrap().as_str(), "edge2");
    }

    #[test]
    fn readiness_on_tick_is_that_tick() {
        let mut o = orchestrator(24.5, true);
        let mut clock: VirtualClock<()> = VirtualClock::new();
        let HandleOutcome::Migrated(r) = o
            .handle_event(&event("tai2", SimTime::ZERO), &mut clock)
            .unwrap()
        else {
            panic!()
        };
        assert_eq!(r.total(), SimTime::from_millis(24_500));
        assert_eq!(r.high_level_time, SimTime::ZERO);
    }

    #[test]
    fn stalled_target_times_out_at_five_minutes() {
        let mut o = orchestrator(1.0, false);
        o.runtime_mut().set_stalled(&"edge2".into(), true);
        let mut clock: VirtualClock<()> = VirtualClock::new();
        let HandleOutcome::Migrated(r) = o
            .handle_event(&event("tai2", SimTime::ZERO), &mut clock)
            .unwrap()
        else {
            panic!()
        };
        assert_eq!(r.outcome, MigrationOutcome::Timeout);
        assert_eq!(r.total(), SimTime::from_millis(300_000));
    }

    #[test]
    fn poll_timeout_error() {
        let mut o = orchestrator(1.0, false);
        o.runtime_mut().set_stalled(&"edge2".into(), true);
        let clock: VirtualClock<()> = VirtualClock::new();
        let request = o.relocate(&"edge2".into(), &clock).unwrap();
        let dep = DeploymentId(o.runtime().deployments().len() - 1);
        let mut clock = clock;
        let err = o.poll_until_in_sync(dep, request, &mut clock).unwrap_err();
        assert!(matches!(
            err,
            OrchestratorError::PollTimeout { polls: 600, .. }
        ));
        assert_eq!(clock.now(), SimTime::from_millis(300_000));
    }

    #[test]
    fn unknown_tai_leaves_placement() {
        let mut o = orchestrator(1.0, false);
        let mut clock: VirtualClock<()> = VirtualClock::new();
        let err = o
            .on_notification(SimTime::ZERO, &event("tai9", SimTime::ZERO), &mut clock)
            .unwrap_err();
        assert!(matches!(err, OrchestratorError::Unmapped { .. }));
        assert_eq!(o.mapping_errors, 1);
        assert_eq!(o.current_node().unwrap().as_str(), "edge1");
        assert_eq!(o.runtime().deployments().len(), 1);
    }

    #[test]
    fn relocate_to_current_node_is_contract_violation() {
        let mut o = orchestrator(1.0, false);
        let clock: VirtualClock<()> = VirtualClock::new();
        assert!(matches!(
            o.relocate(&"edge1".into(), &clock),
            Err(OrchestratorError::SameNode(_))
        ));
    }

    #[test]
    fn mid_migration_status_is_target_deploying() {
        let mut o = orchestrator(30.0, false);
        let clock: VirtualClock<()> = VirtualClock::new();
        o.relocate(&"edge2".into(), &clock).unwrap();
        assert_eq!(
            verify_status(&"monitor".into(), o.runtime(), SimTime::from_millis(10_000)),
            Placement::OnNode("edge2".into(), ServiceStatus::Deploying)
        );
        assert_eq!(
            verify_status(&"other".into(), o.runtime(), SimTime::ZERO),
            Placement::Absent
        );
    }

    #[test]
    fn config_rejects_long_action_delay() {
        let cfg = OrchestratorConfig {
            action_delay: SimTime::from_millis(600),
            ..OrchestratorConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
