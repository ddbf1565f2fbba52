//! Telemetry CSV: header of canonical feature names (any order), optional
//! `timestamp_ms` and `label` columns. Output is always canonical order.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::synth::SYNTHETIC_PERIOD_MS;
use super::{Dataset, Feature, Label, Result, TelemetryError, TelemetryRecord, NUM_FEATURES};

const TIMESTAMP_COLUMN: &str = "timestamp_ms";
const LABEL_COLUMN: &str = "label";

enum Column {
    Feature(usize),
    Timestamp,
    Label,
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| TelemetryError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let ds = read_csv(file)?;
    let constant = ds.constant_features();
    if !constant.is_empty() {
        let names: Vec<_> = constant.iter().map(|f| f.name()).collect();
        log::warn!("{}: constant columns {}", path.display(), names.join(", "));
    }
    Ok(ds)
}

pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| TelemetryError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();

    let mut columns = Vec::with_capacity(headers.len());
    let mut unknown = Vec::new();
    let mut seen = [false; NUM_FEATURES];
    for h in headers.iter() {
        if let Some(f) = Feature::from_name(h) {
            seen[f.index()] = true;
            columns.push(Column::Feature(f.index()));
        } else if h == TIMESTAMP_COLUMN {
            columns.push(Column::Timestamp);
        } else if h == LABEL_COLUMN {
            columns.push(Column::Label);
        } else {
            unknown.push(h.to_string());
        }
    }
    let missing: Vec<String> = Feature::ALL
        .iter()
        .filter(|f| !seen[f.index()])
        .map(|f| f.name().to_string())
        .collect();
    if !unknown.is_empty() || !missing.is_empty() {
        return Err(TelemetryError::Schema { unknown, missing });
    }

    let mut records = Vec::new();
    for (row_idx, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| TelemetryError::Parse {
            line: row_idx + 2,
            message: e.to_string(),
        })?;
        let line = row
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(row_idx + 2);
        if row.len() != columns.len() {
            return Err(TelemetryError::Parse {
                line,
                message: format!("expected {} values, found {}", columns.len(), row.len()),
            });
        }
        let mut features = [0.0; NUM_FEATURES];
        let mut timestamp = row_idx as u64 * SYNTHETIC_PERIOD_MS;
        let mut label = Label::Normal;
        for (col, field) in columns.iter().zip(row.iter()) {
            let bad = |what: &str| TelemetryError::Parse {
                line,
                message: format!("invalid {what} value {field:?}"),
            };
            match col {
                Column::Feature(i) => {
                    features[*i] = field.parse::<f64>().map_err(|_| bad("numeric"))?;
                    if !features[*i].is_finite() {
                        return Err(bad("finite"));
                    }
                }
                Column::Timestamp => timestamp = field.parse().map_err(|_| bad("timestamp"))?,
                Column::Label => {
                    label = field
                        .parse::<u8>()
                        .ok()
                        .and_then(Label::from_u8)
                        .ok_or_else(|| bad("label"))?
                }
            }
        }
        records.push(TelemetryRecord {
            timestamp_ms: timestamp,
            features,
            label,
        });
    }
    Dataset::new(records)
}

pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let io_err = |e: csv::Error| TelemetryError::Io {
        path: "<writer>".into(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![TIMESTAMP_COLUMN.to_string()];
    header.extend(Feature::ALL.iter().map(|f| f.name().to_string()));
    header.push(LABEL_COLUMN.to_string());
    w.write_record(&header).map_err(io_err)?;
    for r in dataset.records() {
        let mut row = Vec::with_capacity(NUM_FEATURES + 2);
        row.push(r.timestamp_ms.to_string());
        row.extend(r.features.iter().map(|v| v.to_string()));
        row.push(r.label.as_u8().to_string());
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|e| TelemetryError::Io {
        path: "<writer>".into(),
        message: e.to_string(),
    })
}

pub fn write_csv_file(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| TelemetryError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    write_csv(dataset, std::io::BufWriter::new(file))
}
