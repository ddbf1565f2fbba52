use super::{HandleOutcome, Orchestrator, OrchestratorError};
use crate::edge::{route_and_infer, DataPlane, ObuMessage};
use crate::netsim::{Scheduled, SimEvent, Subscriber, SubscriberError, Topology, VirtualClock};
use crate::telemetry::TelemetryRecord;

/// The deployed monitoring loop: the orchestrator consumes handover
/// notifications while uplink telemetry flows through the data plane.
pub struct MonitoringSystem<'a> {
    pub orchestrator: Orchestrator,
    pub data_plane: Option<DataPlane<'a>>,
    topology: &'a Topology,
    /// Replayed cyclically, one record per uplink message.
    stream: &'a [TelemetryRecord],
}

impl<'a> MonitoringSystem<'a> {
    pub fn new(orchestrator: Orchestrator, topology: &'a Topology) -> Self {
        Self {
            orchestrator,
            data_plane: None,
            topology,
            stream: &[],
        }
    }

    pub fn with_data_plane(mut self, plane: DataPlane<'a>, stream: &'a [TelemetryRecord]) -> Self {
        self.data_plane = Some(plane);
        self.stream = stream;
        self
    }
}

impl Subscriber for MonitoringSystem<'_> {
    fn on_event(
        &mut self,
        item: &Scheduled<SimEvent>,
        clock: &mut VirtualClock<SimEvent>,
    ) -> Result<(), SubscriberError> {
        match &item.event {
            SimEvent::SmContext(ev) => {
                match self.orchestrator.on_notification(item.time, ev, clock) {
                    Ok(HandleOutcome::NoOp) | Ok(HandleOutcome::Migrated(_)) => Ok(()),
                    // Logged by the orchestrator; placement is unchanged.
                    Err(OrchestratorError::Unmapped { .. }) => Ok(()),
                    Err(e) => Err(SubscriberError::new(e.to_string())),
                }
            }
            SimEvent::Uplink(up) => {
                let (Some(plane), false) = (self.data_plane.as_mut(), self.stream.is_empty())
                else {
                    return Ok(());
                };
                let record = self.stream[(up.msg_id % self.stream.len() as u64) as usize].clone();
                let msg = ObuMessage::new(up.msg_id, up.time, record);
                // Gaps and drops are recorded in the plane's outcome log.
                let _ = route_and_infer(
                    plane,
                    &msg,
                    &up.tai,
                    self.topology,
                    self.orchestrator.runtime(),
                );
                Ok(())
            }
        }
    }
}
