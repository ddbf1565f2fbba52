use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use super::{DetectionConfig, DetectionRow, ExperimentError, MigrationSummary, Result, Variant};
use crate::edge::{MessageOutcome, Outcome};
use crate::gbdt::{Confusion, LatencyStats};

pub const REPORT_FILES: [&str; 5] = [
    "detection.csv",
    "latency.csv",
    "migration_summary.csv",
    "gap_summary.csv",
    "report.txt",
];

const DETECTION_HEADER: &str = "pattern,level,seed,precision,recall,f1,tp,fp,tn,fn";
const GAP_HEADER: &str = "messages,served,service_gaps,dropped";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GapStats {
    pub messages: usize,
    pub served: usize,
    pub service_gaps: usize,
    pub dropped: usize,
}

impl GapStats {
    pub fn from_outcomes(outcomes: &[MessageOutcome]) -> Self {
        let mut g = GapStats {
            messages: outcomes.len(),
            ..Default::default()
        };
        for o in outcomes {
            match o.outcome {
                Outcome::Served(_) => g.served += 1,
                Outcome::ServiceGap => g.service_gaps += 1,
                Outcome::Dropped(_) => g.dropped += 1,
            }
        }
        g
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub detection: Vec<DetectionRow>,
    pub inference: Option<LatencyStats>,
    pub migration: Vec<MigrationSummary>,
    pub gaps: Option<GapStats>,
}

pub fn write_detection_csv<W: Write>(rows: &[DetectionRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{DETECTION_HEADER}")?;
    for r in rows {
        let seed = r.seed.map_or_else(|| "mean".to_string(), |s| s.to_string());
        let c = &r.confusion;
        writeln!(
            w,
            "{},{},{seed},{},{},{},{},{},{},{}",
            r.config.pattern(),
            r.config.level(),
            r.precision,
            r.recall,
            r.f1,
            c.tp,
            c.fp,
            c.tn,
            c.fn_
        )?;
    }
    Ok(())
}

fn write_latency_csv<W: Write>(stats: Option<&LatencyStats>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", LatencyStats::CSV_HEADER)?;
    if let Some(s) = stats {
        s.write_csv_row("inference", &mut w)?;
    }
    Ok(())
}

fn write_migration_csv<W: Write>(rows: &[MigrationSummary], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", MigrationSummary::CSV_HEADER)?;
    for m in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            m.variant.name(),
            m.runs,
            m.mean_s,
            m.std_s,
            m.min_s,
            m.max_s,
            m.high_level_mean_s,
            m.low_level_mean_s,
            m.timeouts
        )?;
    }
    Ok(())
}

fn write_gap_csv<W: Write>(gaps: Option<&GapStats>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{GAP_HEADER}")?;
    if let Some(g) = gaps {
        writeln!(
            w,
            "{},{},{},{}",
            g.messages, g.served, g.service_gaps, g.dropped
        )?;
    }
    Ok(())
}

fn summary_text(r: &Report) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "detection");
    let means: Vec<_> = r.detection.iter().filter(|d| d.seed.is_none()).collect();
    if means.is_empty() {
        let _ = writeln!(t, "  (none)");
    }
    for d in means {
        let _ = writeln!(
            t,
            "  {:<10} {:>6}  precision {:.4}  recall {:.4}  f1 {:.4}",
            d.config.pattern(),
            d.config.level(),
            d.precision,
            d.recall,
            d.f1
        );
    }
    let _ = writeln!(t, "inference latency");
    match &r.inference {
        Some(s) => {
            let _ = writeln!(
                t,
                "  {} samples  mean {:.6} s  std {:.6} s  p99 {:.6} s",
                s.samples, s.mean, s.std, s.p99
            );
        }
        None => {
            let _ = writeln!(t, "  (none)");
        }
    }
    let _ = writeln!(t, "migration");
    if r.migration.is_empty() {
        let _ = writeln!(t, "  (none)");
    }
    for m in &r.migration {
        let _ = writeln!(
            t,
            "  {:<16} {} runs  mean {:.3} s  std {:.3} s  timeouts {}",
            m.variant.name(),
            m.runs,
            m.mean_s,
            m.std_s,
            m.timeouts
        );
    }
    let _ = writeln!(t, "service gaps");
    match &r.gaps {
        Some(g) => {
            let _ = writeln!(
                t,
                "  {} messages  {} served  {} gaps  {} dropped",
                g.messages, g.served, g.service_gaps, g.dropped
            );
        }
        None => {
            let _ = writeln!(t, "  (none)");
        }
    }
    t
}

/// Writes every file in [`REPORT_FILES`] into `dir`. Sections that were not
/// run produce header-only CSVs.
pub fn emit_report(report: &Report, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut buf = Vec::new();
    write_detection_csv(&report.detection, &mut buf)?;
    fs::write(dir.join(REPORT_FILES[0]), &buf)?;
    buf.clear();
    write_latency_csv(report.inference.as_ref(), &mut buf)?;
    fs::write(dir.join(REPORT_FILES[1]), &buf)?;
    buf.clear();
    write_migration_csv(&report.migration, &mut buf)?;
    fs::write(dir.join(REPORT_FILES[2]), &buf)?;
    buf.clear();
    write_gap_csv(report.gaps.as_ref(), &mut buf)?;
    fs::write(dir.join(REPORT_FILES[3]), &buf)?;
    fs::write(dir.join(REPORT_FILES[4]), summary_text(report))?;
    Ok(())
}

fn data_lines<R: BufRead>(r: R, header: &str, what: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut lines = r.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim_end() == header => {}
        _ => {
            return Err(ExperimentError::Config(format!(
                "{what}: expected header {header}"
            )))
        }
    }
    let cols = header.split(',').count();
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.trim_end().split(',').map(str::to_string).collect();
        if fields.len() != cols {
            return Err(ExperimentError::Config(format!(
                "{what} line {}: expected {cols} fields, got {}",
                i + 1,
                fields.len()
            )));
        }
        out.push((i + 1, fields));
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(what: &str, line: usize, field: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| ExperimentError::Config(format!("{what} line {line}: cannot parse {field:?}")))
}

pub fn read_detection_csv<R: BufRead>(r: R) -> Result<Vec<DetectionRow>> {
    const W: &str = "detection.csv";
    data_lines(r, DETECTION_HEADER, W)?
        .into_iter()
        .map(|(n, f)| {
            let config = match f[0].as_str() {
                "sparse" => DetectionConfig::Sparse {
                    density: parse(W, n, &f[1])?,
                },
                "collective" => DetectionConfig::Collective {
                    window_len: parse(W, n, &f[1])?,
                },
                other => {
                    return Err(ExperimentError::Config(format!(
                        "{W} line {n}: unknown pattern {other}"
                    )))
                }
            };
            let seed = if f[2] == "mean" {
                None
            } else {
                Some(parse(W, n, &f[2])?)
            };
            Ok(DetectionRow {
                config,
                seed,
                precision: parse(W, n, &f[3])?,
                recall: parse(W, n, &f[4])?,
                f1: parse(W, n, &f[5])?,
                confusion: Confusion {
                    tp: parse(W, n, &f[6])?,
                    fp: parse(W, n, &f[7])?,
                    tn: parse(W, n, &f[8])?,
                    fn_: parse(W, n, &f[9])?,
                },
            })
        })
        .collect()
}

pub fn read_latency_csv<R: BufRead>(r: R) -> Result<Option<LatencyStats>> {
    const W: &str = "latency.csv";
    let rows = data_lines(r, LatencyStats::CSV_HEADER, W)?;
    let Some((n, f)) = rows.into_iter().find(|(_, f)| f[0] == "inference") else {
        return Ok(None);
    };
    Ok(Some(LatencyStats {
        samples: parse(W, n, &f[1])?,
        mean: parse(W, n, &f[2])?,
        std: parse(W, n, &f[3])?,
        p50: parse(W, n, &f[4])?,
        p99: parse(W, n, &f[5])?,
    }))
}

pub fn read_migration_summary_csv<R: BufRead>(r: R) -> Result<Vec<MigrationSummary>> {
    const W: &str = "migration_summary.csv";
    data_lines(r, MigrationSummary::CSV_HEADER, W)?
        .into_iter()
        .map(|(n, f)| {
            let variant = Variant::from_name(&f[0]).ok_or_else(|| {
                ExperimentError::Config(format!("{W} line {n}: unknown variant {}", f[0]))
            })?;
            Ok(MigrationSummary {
                variant,
                runs: parse(W, n, &f[1])?,
                mean_s: parse(W, n, &f[2])?,
                std_s: parse(W, n, &f[3])?,
                min_s: parse(W, n, &f[4])?,
                max_s: parse(W, n, &f[5])?,
                high_level_mean_s: parse(W, n, &f[6])?,
                low_level_mean_s: parse(W, n, &f[7])?,
                timeouts: parse(W, n, &f[8])?,
            })
        })
        .collect()
}

pub fn read_gap_csv<R: BufRead>(r: R) -> Result<Option<GapStats>> {
    const W: &str = "gap_summary.csv";
    let rows = data_lines(r, GAP_HEADER, W)?;
    let Some((n, f)) = rows.into_iter().next() else {
        return Ok(None);
    };
    Ok(Some(GapStats {
        messages: parse(W, n, &f[0])?,
        served: parse(W, n, &f[1])?,
        service_gaps: parse(W, n, &f[2])?,
        dropped: parse(W, n, &f[3])?,
    }))
}

impl Report {
    /// Reads back the CSVs written by [`emit_report`]. A missing file leaves
    /// its section empty.
    pub fn load(dir: &Path) -> Result<Report> {
        let open = |name: &str| -> Result<Option<std::io::BufReader<fs::File>>> {
            let path = dir.join(name);
            match fs::File::open(&path) {
                Ok(f) => Ok(Some(std::io::BufReader::new(f))),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
                Err(e) => Err(ExperimentError::Config(format!("{}: {e}", path.display()))),
            }
        };
        let mut report = Report::default();
        if let Some(r) = open(REPORT_FILES[0])? {
            report.detection = read_detection_csv(r)?;
        }
        if let Some(r) = open(REPORT_FILES[1])? {
            report.inference = read_latency_csv(r)?;
        }
        if let Some(r) = open(REPORT_FILES[2])? {
            report.migration = read_migration_summary_csv(r)?;
        }
        if let Some(r) = open(REPORT_FILES[3])? {
            report.gaps = read_gap_csv(r)?;
        }
        Ok(report)
    }
}
