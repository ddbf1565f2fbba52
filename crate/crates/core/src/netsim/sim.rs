use std::io::Write;

use super::{
    detect_handovers, MobilityTrace, NetsimError, Scheduled, SimEvent, SimTime, Topology,
    UplinkEvent, VirtualClock,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UplinkConfig {
    pub period: SimTime,
    /// Messages keep flowing this long after the last attachment.
    pub tail: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkConfig {
    /// Core to orchestrator notification latency.
    pub delivery_latency: SimTime,
    pub session_id: u64,
    pub uplink: Option<UplinkConfig>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            delivery_latency: SimTime::from_millis(50),
            session_id: 1,
            uplink: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct SubscriberError(pub String);

impl SubscriberError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

/// Receives every delivered event. The clock is handed over so a subscriber
/// can spend virtual time (busy work) or schedule follow-up events.
pub trait Subscriber {
    fn on_event(
        &mut self,
        event: &Scheduled<SimEvent>,
        clock: &mut VirtualClock<SimEvent>,
    ) -> Result<(), SubscriberError>;
}

impl<F> Subscriber for F
where
    F: FnMut(&Scheduled<SimEvent>, &mut VirtualClock<SimEvent>) -> Result<(), SubscriberError>,
{
    fn on_event(
        &mut self,
        event: &Scheduled<SimEvent>,
        clock: &mut VirtualClock<SimEvent>,
    ) -> Result<(), SubscriberError> {
        self(event, clock)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedEvent {
    pub seq: u64,
    pub delivered_at: SimTime,
    /// Clock reading when subscribers saw it; later than `delivered_at` when a
    /// subscriber was busy.
    pub handled_at: SimTime,
    pub event: SimEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventLog(pub Vec<LoggedEvent>);

impl EventLog {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LoggedEvent> {
        self.0.iter()
    }

    pub fn sm_context_count(&self) -> usize {
        self.0
            .iter()
            .filter(|e| matches!(e.event, SimEvent::SmContext(_)))
            .count()
    }

    pub const CSV_HEADER: &'static str =
        "seq,origin_s,delivered_s,handled_s,kind,plmn,old_tai,new_tai,session_id,msg_id,radio_node";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for e in &self.0 {
            write!(
                w,
                "{},{},{},{},{},",
                e.seq,
                e.event.origin_time(),
                e.delivered_at,
                e.handled_at,
                e.event.kind()
            )?;
            match &e.event {
                SimEvent::SmContext(s) => writeln!(
                    w,
                    "{},{},{},{},,",
                    s.plmn, s.old_tai, s.new_tai, s.session_id
                )?,
                SimEvent::Uplink(u) => writeln!(w, ",,{},,{},{}", u.tai, u.msg_id, u.radio_node)?,
            }
        }
        Ok(())
    }
}

/// Schedules handover notifications (and optional uplink traffic) on the
/// clock, then delivers everything to `subscribers` in order until the queue
/// drains.
pub fn run(
    clock: &mut VirtualClock<SimEvent>,
    topology: &Topology,
    trace: &MobilityTrace,
    config: &NetworkConfig,
    subscribers: &mut [&mut dyn Subscriber],
) -> Result<EventLog, NetsimError> {
    trace.validate_against(topology)?;
    let handovers = detect_handovers(trace, topology, config.session_id)?;

    let mut plan: Vec<(SimTime, SimEvent)> = handovers
        .into_iter()
        .map(|e| (e.time + config.delivery_latency, SimEvent::SmContext(e)))
        .collect();
    if let Some(up) = config.uplink.filter(|u| u.period > SimTime::ZERO) {
        let end = trace.last().time + up.tail;
        let mut t = trace.first().time;
        let mut msg_id = 0;
        while t <= end {
            let att = trace
                .attached_at(t)
                .expect("t starts at the first attachment");
            plan.push((
                t,
                SimEvent::Uplink(UplinkEvent {
                    msg_id,
                    time: t,
                    radio_node: att.radio_node.clone(),
                    tai: topology.tai_of(&att.radio_node)?.clone(),
                }),
            ));
            msg_id += 1;
            t += up.period;
        }
    }
    // Stable sort keeps emission order among equal delivery times.
    plan.sort_by_key(|(t, _)| *t);
    for (t, ev) in plan {
        clock.schedule_at(t, ev).map_err(|now| {
            NetsimError::Trace(format!("event at {t} s precedes the clock ({now} s)"))
        })?;
    }

    let mut log = EventLog::default();
    while let Some(item) = clock.pop() {
        let handled_at = clock.now();
        for sub in subscribers.iter_mut() {
            sub.on_event(&item, clock)
                .map_err(|e| NetsimError::Subscriber {
                    seq: item.seq,
                    time: item.time,
                    kind: item.event.kind(),
                    message: e.0,
                })?;
        }
        log.0.push(LoggedEvent {
            seq: item.seq,
            delivered_at: item.time,
            handled_at,
            event: item.event,
        });
    }
    Ok(log)
}
