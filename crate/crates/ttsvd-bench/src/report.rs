//! Step by phase report rows in CSV or JSON.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use ttsvd::{Phase, RunLog};

use crate::error::CliResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// One phase of one step. Field order is the column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub variant: String,
    pub shape: String,
    /// Empty when ranks are uncapped.
    pub rmax: Option<u64>,
    pub eps: f64,
    pub phase: String,
    pub step: u64,
    pub seconds: f64,
    pub flops: u64,
    pub bytes: u64,
    pub rank: u64,
}

pub const COLUMNS: [&str; 10] = [
    "variant", "shape", "rmax", "eps", "phase", "step", "seconds", "flops", "bytes", "rank",
];

pub fn rows_from_log(variant: &str, shape: &str, rmax: Option<usize>, eps: f64, log: &RunLog) -> Vec<Row> {
    let mut rows = Vec::with_capacity(log.steps.len() * Phase::ALL.len());
    for (s, step) in log.steps.iter().enumerate() {
        for p in Phase::ALL {
            let rec = step.phase(p);
            rows.push(Row {
                variant: variant.to_string(),
                shape: shape.to_string(),
                rmax: rmax.map(|r| r as u64),
                eps,
                phase: p.as_str().to_string(),
                step: s as u64 + 1,
                seconds: rec.seconds,
                flops: rec.counters.flops,
                bytes: rec.counters.bytes,
                rank: step.rank as u64,
            });
        }
    }
    rows
}

pub fn write_rows(rows: &[Row], format: Format, out: impl Write) -> CliResult<()> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(COLUMNS)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn read_rows(format: Format, input: impl Read) -> CliResult<Vec<Row>> {
    Ok(match format {
        Format::Csv => csv::Reader::from_reader(input)
            .deserialize()
            .collect::<Result<_, _>>()?,
        Format::Json => serde_json::from_reader(input)?,
    })
}
