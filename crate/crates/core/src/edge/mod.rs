//! Simulated edge runtime: service lifecycles on edge nodes, the Mediator
//! adapter and the user-plane inference path.

mod dataplane;
mod mediator;
mod runtime;

pub use dataplane::{
    route_and_infer, write_gap_log, DataPlane, HopDelays, InferenceResponse, MessageOutcome,
    Outcome,
};
pub use mediator::{mediator_adapt, InferenceRequest, Mediator, ObuMessage};
pub use runtime::{
    write_placement_log, Deployment, DeploymentId, EdgeRuntime, InstanceId, LatencyProfile,
    PlacementEntry, ServiceInstance, StartupDelay,
};

use std::fmt;

use thiserror::Error;

use crate::netsim::{EdgeNodeId, SimTime};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ServiceId(pub String);

impl ServiceId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }
}

impl fmt::Display for ServiceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ServiceId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ServiceKind {
    Mediator,
    Inference,
}

impl ServiceKind {
    pub fn name(self) -> &'static str {
        match self {
            ServiceKind::Mediator => "mediator",
            ServiceKind::Inference => "inference",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ServiceStatus {
    Deploying,
    InSync,
    Terminating,
    Terminated,
}

impl ServiceStatus {
    pub fn name(self) -> &'static str {
        match self {
            ServiceStatus::Deploying => "deploying",
            ServiceStatus::InSync => "in_sync",
            ServiceStatus::Terminating => "terminating",
            ServiceStatus::Terminated => "terminated",
        }
    }

    /// Forward-only lifecycle. Deploying may be cancelled straight into
    /// Terminating.
    pub fn can_transition_to(self, next: ServiceStatus) -> bool {
        use ServiceStatus::*;
        matches!(
            (self, next),
            (Deploying, InSync)
                | (Deploying, Terminating)
                | (InSync, Terminating)
                | (Terminating, Terminated)
        )
    }

    pub fn is_live(self) -> bool {
        matches!(self, ServiceStatus::Deploying | ServiceStatus::InSync)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EdgeError {
    #[error("{kind:?} instance of {service} already live on {node}")]
    Conflict {
        service: ServiceId,
        kind: ServiceKind,
        node: EdgeNodeId,
    },
    #[error("instance {instance} is {status:?}, cannot {op}")]
    State {
        instance: u64,
        status: Option<ServiceStatus>,
        op: &'static str,
    },
    #[error("unknown edge node {0}")]
    UnknownNode(EdgeNodeId),
    #[error("unknown instance {0}")]
    UnknownInstance(u64),
    #[error("adaptation failed: {0}")]
    Adaptation(String),
    #[error("invalid latency profile: {0}")]
    Profile(String),
    #[error("inference: {0}")]
    Inference(String),
    #[error("time {at} is before the instance was requested")]
    Time { at: SimTime },
}
