//! Verdict and table serialization: JSON verdicts, RFC-4180 CSV tables.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::OutputFormat;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Hypothesis of the underlying statement unmet; nothing to verify.
    Skip,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    /// How `measured` relates to `threshold` for a pass: "<=", ">=", "report".
    pub comparison: &'static str,
    pub status: CheckStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckRecord {
    pub fn le(name: impl Into<String>, measured: f64, threshold: f64) -> CheckRecord {
        CheckRecord {
            name: name.into(),
            measured,
            threshold,
            comparison: "<=",
            status: if measured <= threshold { CheckStatus::Pass } else { CheckStatus::Fail },
            note: None,
        }
    }

    pub fn ge(name: impl Into<String>, measured: f64, threshold: f64) -> CheckRecord {
        CheckRecord {
            name: name.into(),
            measured,
            threshold,
            comparison: ">=",
            status: if measured >= threshold { CheckStatus::Pass } else { CheckStatus::Fail },
            note: None,
        }
    }

    pub fn report(name: impl Into<String>, measured: f64) -> CheckRecord {
        CheckRecord {
            name: name.into(),
            measured,
            threshold: f64::NAN,
            comparison: "report",
            status: CheckStatus::Pass,
            note: None,
        }
    }

    pub fn skip(name: impl Into<String>, measured: f64, note: impl Into<String>) -> CheckRecord {
        CheckRecord {
            name: name.into(),
            measured,
            threshold: f64::NAN,
            comparison: "report",
            status: CheckStatus::Skip,
            note: Some(note.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> CheckRecord {
        self.note = Some(note.into());
        self
    }
}

/// Outcome of one verification command. `overall` is the conjunction of the
/// per-check passes; skipped checks do not fail the run.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteVerdict {
    pub command: String,
    pub timestamp_unix: u64,
    pub overall: bool,
    pub checks: Vec<CheckRecord>,
}

impl SuiteVerdict {
    pub fn new(command: impl Into<String>, checks: Vec<CheckRecord>) -> SuiteVerdict {
        let overall = checks.iter().all(|c| c.status != CheckStatus::Fail);
        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        SuiteVerdict { command: command.into(), timestamp_unix, overall, checks }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualRow {
    pub variant: String,
    pub n: usize,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityRow {
    /// "r" for the radius ladder, "epsilon" for the shifted family.
    pub kind: &'static str,
    pub value: f64,
    pub min_eig: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelRow {
    pub i: usize,
    pub j: usize,
    pub x_i: f64,
    pub x_j: f64,
    pub block_row: usize,
    pub block_col: usize,
    pub re: f64,
    pub im: f64,
}

/// The tabular payload of a command, written to `--out`.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Table {
    Residuals(Vec<ResidualRow>),
    Positivity(Vec<PositivityRow>),
    Kernel(Vec<KernelRow>),
}

impl Table {
    pub fn is_empty(&self) -> bool {
        match self {
            Table::Residuals(rows) => rows.is_empty(),
            Table::Positivity(rows) => rows.is_empty(),
            Table::Kernel(rows) => rows.is_empty(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        match self {
            Table::Residuals(rows) => {
                w.write_record(["variant", "N", "residual", "order"])?;
                for r in rows {
                    w.write_record([
                        r.variant.clone(),
                        r.n.to_string(),
                        format_float(r.residual),
                        r.order.map(format_float).unwrap_or_default(),
                    ])?;
                }
            }
            Table::Positivity(rows) => {
                w.write_record(["kind", "value", "min_eig", "pass"])?;
                for r in rows {
                    w.write_record([
                        r.kind.to_string(),
                        format_float(r.value),
                        format_float(r.min_eig),
                        r.pass.to_string(),
                    ])?;
                }
            }
            Table::Kernel(rows) => {
                w.write_record(["i", "j", "x_i", "x_j", "block_row", "block_col", "re", "im"])?;
                for r in rows {
                    w.write_record([
                        r.i.to_string(),
                        r.j.to_string(),
                        format_float(r.x_i),
                        format_float(r.x_j),
                        r.block_row.to_string(),
                        r.block_col.to_string(),
                        format_float(r.re),
                        format_float(r.im),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_to(&self, path: &Path, format: OutputFormat) -> Result<()> {
        match format {
            OutputFormat::Csv => {
                let file = std::fs::File::create(path)?;
                self.write_csv(file)
            }
            OutputFormat::Json => {
                let text = serde_json::to_string_pretty(self)?;
                std::fs::write(path, text)?;
                Ok(())
            }
        }
    }
}

fn format_float(v: f64) -> String {
    // round-trippable, diff-friendly
    format!("{v:.17e}")
}
