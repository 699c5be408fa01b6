use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::CliError;

/// First line of every CSV report; bump the version when columns change.
pub const CSV_HEADER_COMMENT: &str = "# snowsim report v1";

/// One aggregate row: means over the trials of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub config_hash: String,
    pub n: usize,
    pub c: usize,
    pub b: usize,
    pub k: u32,
    pub a: u32,
    /// Empty for Slush.
    pub beta: Option<u32>,
    pub adversary: String,
    pub trials: u64,
    pub rounds: f64,
    pub per_node_iters: f64,
    pub per_node_iters_sd: f64,
    /// Trials in which two correct nodes decided differently.
    pub violations: u64,
    pub messages: f64,
}

/// Per-trial outcome of a Slush or Snow run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub c: usize,
    pub rounds: u64,
    pub per_node_iters: f64,
    pub unanimous_at: Option<u64>,
    pub decided: usize,
    pub violation: bool,
    pub messages: u64,
    pub final_reds: usize,
}

pub fn write_csv<W: Write>(mut w: W, rows: &[ReportRow]) -> Result<(), CliError> {
    writeln!(w, "{CSV_HEADER_COMMENT}").map_err(CliError::io)?;
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    out.flush().map_err(CliError::io)
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<ReportRow>, CliError> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(r)
        .deserialize()
        .collect::<Result<Vec<ReportRow>, _>>()
        .map_err(|e| CliError::Config(format!("report: {e}")))
}

pub fn write_json_lines<W: Write, T: Serialize>(mut w: W, items: &[T]) -> Result<(), CliError> {
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| CliError::Internal(e.to_string()))?;
        writeln!(w).map_err(CliError::io)?;
    }
    w.flush().map_err(CliError::io)
}
