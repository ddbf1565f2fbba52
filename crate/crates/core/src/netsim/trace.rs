use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NetsimError, RadioNodeId, SimTime, Topology};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attachment {
    pub time: SimTime,
    pub radio_node: RadioNodeId,
}

/// Pre-resolved cell attachments of the vehicle, ordered by time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MobilityTrace(Vec<Attachment>);

impl MobilityTrace {
    pub fn new(attachments: Vec<Attachment>) -> Result<Self, NetsimError> {
        if attachments.is_empty() {
            return Err(NetsimError::Trace("trace is empty".into()));
        }
        for (i, w) in attachments.windows(2).enumerate() {
            if w[1].time <= w[0].time {
                return Err(NetsimError::Trace(format!(
                    "attachment {} at {} s is not after {} s",
                    i + 1,
                    w[1].time,
                    w[0].time
                )));
            }
        }
        Ok(Self(attachments))
    }

    pub fn attachments(&self) -> &[Attachment] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> &Attachment {
        &self.0[0]
    }

    pub fn last(&self) -> &Attachment {
        self.0.last().expect("trace is never empty")
    }

    /// Attachment in force at `t`, if the vehicle is attached yet.
    pub fn attached_at(&self, t: SimTime) -> Option<&Attachment> {
        let idx = self.0.partition_point(|a| a.time <= t);
        idx.checked_sub(1).map(|i| &self.0[i])
    }

    pub fn validate_against(&self, topology: &Topology) -> Result<(), NetsimError> {
        let unknown: Vec<String> = self
            .0
            .iter()
            .filter(|a| topology.radio_node(&a.radio_node).is_none())
            .map(|a| {
                format!(
                    "trace references unknown radio node {} at {} s",
                    a.radio_node, a.time
                )
            })
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(NetsimError::Validation(unknown))
        }
    }

    /// Cycles through `nodes` starting at time zero, dwelling `period` at
    /// each, for `handovers + 1` attachments.
    pub fn alternating(
        nodes: &[RadioNodeId],
        period: SimTime,
        handovers: usize,
    ) -> Result<Self, NetsimError> {
        if nodes.is_empty() || period == SimTime::ZERO {
            return Err(NetsimError::Trace(
                "alternating trace needs nodes and a positive period".into(),
            ));
        }
        Self::new(
            (0..=handovers)
                .map(|i| Attachment {
                    time: period.mul(i as u64),
                    radio_node: nodes[i % nodes.len()].clone(),
                })
                .collect(),
        )
    }

    /// `steps` attachments to uniformly drawn radio nodes (repeats allowed),
    /// with dwell times uniform in `[min_dwell, max_dwell]`.
    pub fn random(
        topology: &Topology,
        steps: usize,
        min_dwell: SimTime,
        max_dwell: SimTime,
        seed: u64,
    ) -> Result<Self, NetsimError> {
        if steps == 0 || min_dwell == SimTime::ZERO || max_dwell < min_dwell {
            return Err(NetsimError::Trace(
                "random trace needs steps > 0 and 0 < min_dwell <= max_dwell".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = topology.radio_nodes();
        let mut t = SimTime::ZERO;
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let node = &nodes[rng.random_range(0..nodes.len())];
            out.push(Attachment {
                time: t,
                radio_node: node.id.clone(),
            });
            t += SimTime(rng.random_range(min_dwell.0..=max_dwell.0));
        }
        Self::new(out)
    }
}

pub const TRACE_CSV_HEADER: [&str; 2] = ["time_s", "radio_node_id"];

pub fn read_trace<R: Read>(reader: R) -> Result<MobilityTrace, NetsimError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| NetsimError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != TRACE_CSV_HEADER {
        return Err(NetsimError::Parse {
            line: 1,
            message: format!("expected header {}", TRACE_CSV_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| NetsimError::Parse {
            line,
            message: e.to_string(),
        })?;
        let time: SimTime = rec[0]
            .parse()
            .map_err(|message| NetsimError::Parse { line, message })?;
        out.push(Attachment {
            time,
            radio_node: RadioNodeId(rec[1].to_string()),
        });
    }
    MobilityTrace::new(out)
}

pub fn load_trace(path: &Path) -> Result<MobilityTrace, NetsimError> {
    let file = std::fs::File::open(path).map_err(|e| NetsimError::io(path, e))?;
    read_trace(file)
}

pub fn write_trace<W: Write>(trace: &MobilityTrace, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", TRACE_CSV_HEADER.join(","))?;
    for a in trace.attachments() {
        writeln!(w, "{},{}", a.time, a.radio_node)?;
    }
    Ok(())
}
