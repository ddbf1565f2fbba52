use super::{MobilityTrace, NetsimError, PlmnId, RadioNodeId, SimTime, TaiId, Topology};

/// Session-management context notification raised on a TAI change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmContextEvent {
    pub time: SimTime,
    pub plmn: PlmnId,
    pub old_tai: TaiId,
    pub new_tai: TaiId,
    pub session_id: u64,
}

/// One periodic OBU telemetry message entering the user plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UplinkEvent {
    pub msg_id: u64,
    pub time: SimTime,
    pub radio_node: RadioNodeId,
    pub tai: TaiId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimEvent {
    SmContext(SmContextEvent),
    Uplink(UplinkEvent),
}

impl SimEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            SimEvent::SmContext(_) => "sm_context",
            SimEvent::Uplink(_) => "uplink",
        }
    }

    /// When the event happened in the network, before delivery latency.
    pub fn origin_time(&self) -> SimTime {
        match self {
            SimEvent::SmContext(e) => e.time,
            SimEvent::Uplink(e) => e.time,
        }
    }
}

/// One event per consecutive pair of attachments in different TAIs.
pub fn detect_handovers(
    trace: &MobilityTrace,
    topology: &Topology,
    session_id: u64,
) -> Result<Vec<SmContextEvent>, NetsimError> {
    let mut out = Vec::new();
    let mut prev = topology.tai_of(&trace.first().radio_node)?;
    for a in &trace.attachments()[1..] {
        let tai = topology.tai_of(&a.radio_node)?;
        if tai != prev {
            let area = topology.tracking_area(tai).expect("validated topology");
            out.push(SmContextEvent {
                time: a.time,
                plmn: area.plmn.clone(),
                old_tai: prev.clone(),
                new_tai: tai.clone(),
                session_id,
            });
        }
        prev = tai;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::{Attachment, TopologyConfig};

    fn three_cells() -> Topology {
        let text = r#"
            radio_nodes = [
              { id = "a", tai = "tai1" },
              { id = "b", tai = "tai2" },
              { id = "c", tai = "tai1" },
            ]
            tais = [
              { tai = "tai1", plmn = "00101", upf = "u1" },
              { tai = "tai2", plmn = "00102", upf = "u2" },
            ]
            edge_nodes = [
              { id = "e1", upf = "u1" },
              { id = "e2", upf = "u2" },
            ]
        "#;
        Topology::new(toml::from_str::<TopologyConfig>(text).unwrap()).unwrap()
    }

    fn trace(nodes: &[&str]) -> MobilityTrace {
        MobilityTrace::new(
            nodes
                .iter()
                .enumerate()
                .map(|(i, n)| Attachment {
                    time: SimTime::from_millis(1000 * i as u64),
                    radio_node: (*n).into(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn alternating_gives_two_events() {
        let events = detect_handovers(&trace(&["a", "b", "a"]), &three_cells(), 7).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].old_tai.as_str(), "tai1");
        assert_eq!(events[0].new_tai.as_str(), "tai2");
        assert_eq!(events[0].plmn.as_str(), "00102");
        assert_eq!(events[1].time, SimTime::from_millis(2000));
        assert_eq!(events[1].session_id, 7);
    }

    #[test]
    fn intra_tai_changes_are_silent() {
        assert!(
            detect_handovers(&trace(&["a", "c", "a", "c"]), &three_cells(), 1)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn events_never_repeat_tai() {
        let events =
            detect_handovers(&trace(&["a", "c", "b", "b", "c"]), &three_cells(), 1).unwrap();
        assert_eq!(events.len(), 2);
        assert!(events.iter().all(|e| e.old_tai != e.new_tai));
    }
}
