use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use super::{MigrationOutcome, MigrationRecord, OrchestratorError};
use crate::netsim::{EdgeNodeId, SimTime};

pub const MIGRATION_LOG_HEADER: &str =
    "event_time,request_time,in_sync_time,source,target,high_level_s,low_level_s,total_s,outcome";

fn format_record(r: &MigrationRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        r.event_time,
        r.request_time,
        r.in_sync_time,
        r.source.as_ref().map(|s| s.as_str()).unwrap_or(""),
        r.target,
        r.high_level_time,
        r.low_level_time,
        r.total(),
        r.outcome.name()
    )
}

fn parse_record(line: &str, lineno: usize) -> Result<MigrationRecord, OrchestratorError> {
    let err = |message: String| OrchestratorError::Parse {
        line: lineno,
        message,
    };
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 9 {
        return Err(err(format!("expected 9 fields, found {}", fields.len())));
    }
    let time = |i: usize| fields[i].parse::<SimTime>().map_err(err);
    let record = MigrationRecord {
        event_time: time(0)?,
        request_time: time(1)?,
        in_sync_time: time(2)?,
        source: (!fields[3].is_empty()).then(|| EdgeNodeId::new(fields[3])),
        target: EdgeNodeId::new(fields[4]),
        high_level_time: time(5)?,
        low_level_time: time(6)?,
        outcome: match fields[8] {
            "completed" => MigrationOutcome::Completed,
            "timeout" => MigrationOutcome::Timeout,
            other => return Err(err(format!("unknown outcome {other:?}"))),
        },
    };
    if record.in_sync_time < record.request_time {
        return Err(err("in_sync_time precedes request_time".into()));
    }
    if record.total() != time(7)? {
        return Err(err(
            "total_s disagrees with in_sync_time - request_time".into()
        ));
    }
    Ok(record)
}

pub fn write_records<W: Write>(records: &[MigrationRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{MIGRATION_LOG_HEADER}")?;
    for r in records {
        writeln!(w, "{}", format_record(r))?;
    }
    Ok(())
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<MigrationRecord>, OrchestratorError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| OrchestratorError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if i == 0 {
            if line != MIGRATION_LOG_HEADER {
                return Err(OrchestratorError::Parse {
                    line: 1,
                    message: "missing migration log header".into(),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        out.push(parse_record(&line, i + 1)?);
    }
    Ok(out)
}

pub fn load_records(path: &Path) -> Result<Vec<MigrationRecord>, OrchestratorError> {
    let file = File::open(path).map_err(|e| OrchestratorError::Store {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    read_records(file)
}

/// Append-only migration log held under an exclusive advisory lock for the
/// lifetime of the handle.
#[derive(Debug)]
pub struct MigrationStore {
    path: PathBuf,
    file: File,
}

impl MigrationStore {
    pub fn open(path: &Path) -> Result<Self, OrchestratorError> {
        let store_err = |message: String| OrchestratorError::Store {
            path: path.display().to_string(),
            message,
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .read(true)
            .open(path)
            .map_err(|e| store_err(e.to_string()))?;
        file.try_lock().map_err(|e| match e {
            std::fs::TryLockError::WouldBlock => store_err("locked by another writer".into()),
            std::fs::TryLockError::Error(e) => store_err(e.to_string()),
        })?;
        let len = file.metadata().map_err(|e| store_err(e.to_string()))?.len();
        if len == 0 {
            writeln!(file, "{MIGRATION_LOG_HEADER}").map_err(|e| store_err(e.to_string()))?;
            file.sync_data().map_err(|e| store_err(e.to_string()))?;
        }
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &MigrationRecord) -> Result<(), OrchestratorError> {
        writeln!(self.file, "{}", format_record(record))
            .and_then(|_| self.file.sync_data())
            .map_err(|e| OrchestratorError::Store {
                path: self.path.display().to_string(),
                message: e.to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(i: u64) -> MigrationRecord {
        MigrationRecord {
            event_time: SimTime::from_millis(60_000 * i),
            request_time: SimTime::from_millis(60_000 * i + 50),
            in_sync_time: SimTime::from_millis(60_000 * i + 50 + 500 * (40 + i)),
            source: (i > 0).then(|| EdgeNodeId::new("edge1")),
            target: EdgeNodeId::new("edge2"),
            high_level_time: SimTime::from_micros(123_457),
            low_level_time: SimTime::from_micros(500_000 * (40 + i) - 123_457),
            outcome: if i % 7 == 3 {
                MigrationOutcome::Timeout
            } else {
                MigrationOutcome::Completed
            },
        }
    }

    #[test]
    fn write_reload_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("migrations.csv");
        let records: Vec<_> = (0..100).map(record).collect();
        {
            let mut store = MigrationStore::open(&path).unwrap();
            for r in &records {
                store.append(r).unwrap();
            }
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 101);
        assert_eq!(load_records(&path).unwrap(), records);
        // Reopening appends after the existing rows.
        MigrationStore::open(&path)
            .unwrap()
            .append(&record(100))
            .unwrap();
        assert_eq!(load_records(&path).unwrap().len(), 101);
    }

    #[test]
    fn second_writer_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("migrations.csv");
        let _first = MigrationStore::open(&path).unwrap();
        let err = MigrationStore::open(&path).unwrap_err();
        assert!(err.to_string().contains("locked"), "{err}");
    }

    #[test]
    fn inconsistent_total_rejected() {
        let mut buf = Vec::new();
        write_records(&[record(1)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut fields: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        fields[7] = "1.000000";
        let bad = fields.join(",");
        let bad_log = format!("{MIGRATION_LOG_HEADER}\n{bad}\n");
        assert!(matches!(
            read_records(bad_log.as_bytes()),
            Err(OrchestratorError::Parse { line: 2, .. })
        ));
    }
}
