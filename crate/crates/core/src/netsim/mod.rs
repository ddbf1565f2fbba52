//! Discrete-event network model: topology, mobility traces, handover
//! detection and the event loop over a virtual clock.

mod clock;
mod events;
mod sim;
mod time;
mod topology;
mod trace;

pub use clock::{Scheduled, VirtualClock};
pub use events::{detect_handovers, SimEvent, SmContextEvent, UplinkEvent};
pub use sim::{
    run, EventLog, LoggedEvent, NetworkConfig, Subscriber, SubscriberError, UplinkConfig,
};
pub use time::SimTime;
pub use topology::{
    build_topology, nearest_upf, EdgeNode, EdgeNodeId, PlmnId, Position, RadioNode, RadioNodeId,
    TaiId, Topology, TopologyConfig, TrackingArea, UpfId,
};
pub use trace::{load_trace, read_trace, write_trace, Attachment, MobilityTrace, TRACE_CSV_HEADER};

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NetsimError {
    #[error("invalid topology: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("scenario: {0}")]
    Config(String),
    #[error("unknown TAI {0}")]
    UnknownTai(TaiId),
    #[error("unknown radio node {0}")]
    UnknownRadioNode(RadioNodeId),
    #[error("trace: {0}")]
    Trace(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("subscriber failed on event #{seq} ({kind} at {time} s): {message}")]
    Subscriber {
        seq: u64,
        time: SimTime,
        kind: &'static str,
        message: String,
    },
}

impl NetsimError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        NetsimError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}
