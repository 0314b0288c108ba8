use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{StatsError, SweepResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Columns: `offered_qps,achieved_qps,mean_ms,p95_ms,p99_ms`, one
/// `<instance>_p99_ms` column per instance in name order, then `saturated`.
pub fn write_csv<W: Write>(result: &SweepResult, writer: W) -> Result<(), StatsError> {
    let tiers: BTreeSet<&String> = result.points.iter().flat_map(|p| p.tier_p99_ms.keys()).collect();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["offered_qps", "achieved_qps", "mean_ms", "p95_ms", "p99_ms"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(tiers.iter().map(|t| format!("{t}_p99_ms")));
    header.push("saturated".into());
    w.write_record(&header)?;
    for p in &result.points {
        let mut row = vec![
            p.offered_qps.to_string(),
            p.achieved_qps.to_string(),
            opt(p.mean_ms),
            opt(p.p95_ms),
            opt(p.p99_ms),
        ];
        row.extend(tiers.iter().map(|t| opt(p.tier_p99_ms.get(*t).copied().flatten())));
        row.push(p.saturated.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(result: &SweepResult, mut writer: W) -> Result<(), StatsError> {
    serde_json::to_writer_pretty(&mut writer, result)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read>(reader: R) -> Result<SweepResult, StatsError> {
    Ok(serde_json::from_reader(reader)?)
}

/// Writes `result` to `path`, or to stdout when `path` is `None`.
pub fn export(result: &SweepResult, format: OutputFormat, path: Option<&Path>) -> Result<(), StatsError> {
    let mut buf = Vec::new();
    match format {
        OutputFormat::Csv => write_csv(result, &mut buf)?,
        OutputFormat::Json => write_json(result, &mut buf)?,
    }
    match path {
        Some(p) => fs::write(p, buf)?,
        None => io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}
