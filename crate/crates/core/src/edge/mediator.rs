use super::EdgeError;
use crate::netsim::SimTime;
use crate::telemetry::{Feature, TelemetryRecord, NUM_FEATURES};

/// Telemetry as sent by the on-board unit: `name=value` pairs joined by `;`
/// in whatever order the vehicle emits them.
#[derive(Debug, Clone, PartialEq)]
pub struct ObuMessage {
    pub msg_id: u64,
    pub time: SimTime,
    pub record: TelemetryRecord,
    pub raw: String,
}

impl ObuMessage {
    pub fn new(msg_id: u64, time: SimTime, record: TelemetryRecord) -> Self {
        let raw = encode(&record, &Feature::ALL);
        Self {
            msg_id,
            time,
            record,
            raw,
        }
    }

    /// Encodes fields in `order` (must list features, may omit some).
    pub fn with_field_order(
        msg_id: u64,
        time: SimTime,
        record: TelemetryRecord,
        order: &[Feature],
    ) -> Self {
        let raw = encode(&record, order);
        Self {
            msg_id,
            time,
            record,
            raw,
        }
    }
}

fn encode(record: &TelemetryRecord, order: &[Feature]) -> String {
    order
        .iter()
        .map(|&f| format!("{}={:?}", f.name(), record.get(f)))
        .collect::<Vec<_>>()
        .join(";")
}

/// Feature vector in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceRequest {
    pub features: [f64; NUM_FEATURES],
}

pub fn mediator_adapt(msg: &ObuMessage) -> Result<InferenceRequest, EdgeError> {
    let mut values: [Option<f64>; NUM_FEATURES] = [None; NUM_FEATURES];
    for field in msg.raw.split(';').map(str::trim).filter(|f| !f.is_empty()) {
        let (name, value) = field
            .split_once('=')
            .ok_or_else(|| EdgeError::Adaptation(format!("malformed field {field:?}")))?;
        let feature = Feature::from_name(name.trim())
            .ok_or_else(|| EdgeError::Adaptation(format!("unknown feature {:?}", name.trim())))?;
        let v: f64 = value
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| {
                EdgeError::Adaptation(format!(
                    "bad value for {}: {:?}",
                    feature.name(),
                    value.trim()
                ))
            })?;
        if values[feature.index()].replace(v).is_some() {
            return Err(EdgeError::Adaptation(format!(
                "duplicate feature {}",
                feature.name()
            )));
        }
    }
    let missing: Vec<&str> = Feature::ALL
        .iter()
        .filter(|f| values[f.index()].is_none())
        .map(|f| f.name())
        .collect();
    if !missing.is_empty() {
        return Err(EdgeError::Adaptation(format!(
            "missing {}",
            missing.join(", ")
        )));
    }
    Ok(InferenceRequest {
        features: values.map(|v| v.expect("checked above")),
    })
}

/// Stateful adapter that counts what it drops.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Mediator {
    pub adapted: u64,
    pub dropped: u64,
}

impl Mediator {
    pub fn adapt(&mut self, msg: &ObuMessage) -> Result<InferenceRequest, EdgeError> {
        let res = mediator_adapt(msg);
        match res {
            Ok(_) => self.adapted += 1,
            Err(ref e) => {
                self.dropped += 1;
                log::debug!("mediator dropped message {}: {e}", msg.msg_id);
            }
        }
        res
    }
}
