use std::io::Write;

use super::{EdgeError, EdgeRuntime, Mediator, ObuMessage, ServiceId, ServiceStatus};
use crate::gbdt::{measure_inference_latency, GbdtModel};
use crate::netsim::{EdgeNodeId, SimTime, TaiId, Topology};
use crate::telemetry::{Dataset, Label};

/// One-way network delays on the local breakout path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HopDelays {
    pub radio_to_upf: SimTime,
    pub upf_to_mediator: SimTime,
    pub mediator_to_inference: SimTime,
}

impl HopDelays {
    pub fn total(&self) -> SimTime {
        self.radio_to_upf + self.upf_to_mediator + self.mediator_to_inference
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceResponse {
    pub probability: f64,
    pub label: Label,
    pub inference_time: SimTime,
    /// Hops plus inference.
    pub total_latency: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Served(InferenceResponse),
    /// No InSync service on the node the vehicle's TAI breaks out to.
    ServiceGap,
    Dropped(String),
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Served(_) => "served",
            Outcome::ServiceGap => "service_gap",
            Outcome::Dropped(_) => "dropped",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageOutcome {
    /// Arrival at the edge node.
    pub time: SimTime,
    pub msg_id: u64,
    pub node: EdgeNodeId,
    pub outcome: Outcome,
}

/// Inference path for one monitored service.
#[derive(Debug, Clone)]
pub struct DataPlane<'m> {
    pub service_id: ServiceId,
    pub model: &'m GbdtModel,
    pub hops: HopDelays,
    /// Per-record model latency, measured natively.
    pub inference_time: SimTime,
    pub threshold: f64,
    pub mediator: Mediator,
    pub outcomes: Vec<MessageOutcome>,
}

impl<'m> DataPlane<'m> {
    pub fn new(
        service_id: ServiceId,
        model: &'m GbdtModel,
        hops: HopDelays,
        inference_time: SimTime,
    ) -> Self {
        Self {
            service_id,
            model,
            hops,
            inference_time,
            threshold: 0.5,
            mediator: Mediator::default(),
            outcomes: Vec::new(),
        }
    }

    /// Uses the mean of a native timing run over `sample` as inference time.
    pub fn measured(
        service_id: ServiceId,
        model: &'m GbdtModel,
        hops: HopDelays,
        sample: &Dataset,
        repetitions: usize,
    ) -> Result<Self, EdgeError> {
        let stats = measure_inference_latency(model, sample, repetitions)
            .map_err(|e| EdgeError::Inference(e.to_string()))?;
        Ok(Self::new(
            service_id,
            model,
            hops,
            SimTime::from_secs_f64(stats.mean),
        ))
    }

    pub fn gap_count(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| o.outcome == Outcome::ServiceGap)
            .count()
    }

    pub fn served_count(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o.outcome, Outcome::Served(_)))
            .count()
    }
}

/// Sends `msg` from a vehicle in `tai` through the TAI's UPF to the Mediator
/// and inference service on the attached edge node. Every message gets an
/// outcome entry; a missing InSync service is a service-gap failure.
pub fn route_and_infer(
    plane: &mut DataPlane<'_>,
    msg: &ObuMessage,
    tai: &TaiId,
    topology: &Topology,
    runtime: &EdgeRuntime,
) -> Result<InferenceResponse, EdgeError> {
    let node = topology
        .edge_for_tai(tai)
        .map_err(|e| EdgeError::Inference(e.to_string()))?
        .clone();
    let arrival = msg.time + plane.hops.radio_to_upf + plane.hops.upf_to_mediator;
    let mut record = |outcome: Outcome| {
        plane.outcomes.push(MessageOutcome {
            time: arrival,
            msg_id: msg.msg_id,
            node: node.clone(),
            outcome,
        })
    };

    if runtime.service_status_on(&plane.service_id, &node, arrival) != Some(ServiceStatus::InSync) {
        record(Outcome::ServiceGap);
        return Err(EdgeError::Inference(format!(
            "service gap: {} not in sync on {node} at {arrival} s",
            plane.service_id
        )));
    }
    let request = match plane.mediator.adapt(msg) {
        Ok(r) => r,
        Err(e) => {
            plane.outcomes.push(MessageOutcome {
                time: arrival,
                msg_id: msg.msg_id,
                node,
                outcome: Outcome::Dropped(e.to_string()),
            });
            return Err(e);
        }
    };
    let probability = plane
        .model
        .predict_proba(&request.features)
        .map_err(|e| EdgeError::Inference(e.to_string()))?;
    let label = if probability >= plane.threshold {
        Label::Anomalous
    } else {
        Label::Normal
    };
    let response = InferenceResponse {
        probability,
        label,
        inference_time: plane.inference_time,
        total_latency: plane.hops.total() + plane.inference_time,
    };
    plane.outcomes.push(MessageOutcome {
        time: arrival,
        msg_id: msg.msg_id,
        node,
        outcome: Outcome::Served(response),
    });
    Ok(response)
}

pub fn write_gap_log<W: Write>(outcomes: &[MessageOutcome], mut w: W) -> std::io::Result<()> {
    writeln!(w, "time_s,message_id,outcome,node,latency_s")?;
    for o in outcomes {
        let latency = match &o.outcome {
            Outcome::Served(r) => r.total_latency.to_string(),
            _ => String::new(),
        };
        writeln!(
            w,
            "{},{},{},{},{}",
            o.time,
            o.msg_id,
            o.outcome.name(),
            o.node,
            latency
        )?;
    }
    Ok(())
}
