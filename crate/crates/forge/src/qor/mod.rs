//! Quality-of-result evaluation: the evaluator contract, the resource
//! usage metric, part descriptions, a deterministic analytic backend, and
//! the adapter that drives an external synthesis tool.

mod analytic;
mod external;
mod report;

pub use analytic::{analytic_evaluate, AnalyticBackend};
pub use external::ExternalBackend;
pub use report::{parse_report, render_report};

use thiserror::Error;

use crate::analyzer::KernelInfo;
use crate::pragma::PragmaConfig;
use crate::source::SourceUnit;

/// Synthesis outcome for one design.
#[derive(Debug, Clone, PartialEq)]
pub enum ReportStatus {
    Ok,
    Failed(String),
}

/// Latency, resource, and timing figures for one synthesized design.
/// Numeric fields are meaningful only when `status` is `Ok`.
#[derive(Debug, Clone, PartialEq)]
pub struct QoRReport {
    pub best_case_latency: u64,
    pub worst_case_latency: u64,
    pub bram_18k: u64,
    pub lut: u64,
    pub dsp: u64,
    pub ff: u64,
    pub target_clock_period: f64,
    pub estimated_clock_period: f64,
    pub status: ReportStatus,
}

impl QoRReport {
    pub fn failed(reason: impl Into<String>) -> Self {
        Self {
            best_case_latency: 0,
            worst_case_latency: 0,
            bram_18k: 0,
            lut: 0,
            dsp: 0,
            ff: 0,
            target_clock_period: 0.0,
            estimated_clock_period: 0.0,
            status: ReportStatus::Failed(reason.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ReportStatus::Ok
    }
}

/// A target device: resource budget and default clock.
#[derive(Debug, Clone, PartialEq)]
pub struct PartSpec {
    pub name: String,
    pub avail_bram_18k: u64,
    pub avail_lut: u64,
    pub avail_dsp: u64,
    pub avail_ff: u64,
    pub clock_ns: f64,
}

#[derive(Debug, Error)]
pub enum QoRError {
    #[error("part '{part}' has no nonzero resource budget")]
    NoResources { part: String },
    #[error("malformed synthesis report at byte {offset}: {message}")]
    MalformedReport { offset: u64, message: String },
    #[error("synthesis backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed part catalog line {line}: {message}")]
    MalformedCatalog { line: usize, message: String },
}

/// One design evaluation. `unit` is the already-annotated source; backends
/// may synthesize it or model it. Implementations must be safe to call
/// from several worker threads at once.
pub trait Evaluator: Send + Sync {
    fn evaluate(
        &self,
        unit: &SourceUnit,
        info: &KernelInfo,
        config: &PragmaConfig,
        part: &PartSpec,
    ) -> Result<QoRReport, QoRError>;
}

/// Average usage ratio over the resource kinds the part actually offers:
/// mean of used/available across BRAM_18K, FF, LUT, and DSP, skipping
/// kinds whose availability is zero.
pub fn compute_aru(report: &QoRReport, part: &PartSpec) -> Result<f64, QoRError> {
    assert!(report.is_ok(), "resource usage of a failed report is undefined");
    let pairs = [
        (report.bram_18k, part.avail_bram_18k),
        (report.ff, part.avail_ff),
        (report.lut, part.avail_lut),
        (report.dsp, part.avail_dsp),
    ];
    let mut sum = 0.0;
    let mut n = 0u32;
    for (used, avail) in pairs {
        if avail != 0 {
            sum += used as f64 / avail as f64;
            n += 1;
        }
    }
    if n == 0 {
        return Err(QoRError::NoResources { part: part.name.clone() });
    }
    Ok(sum / n as f64)
}

/// The two devices the toolkit knows out of the box.
pub fn default_catalog() -> Vec<PartSpec> {
    vec![
        PartSpec {
            name: "xcu280-fsvh2892-2L-e".to_string(),
            avail_bram_18k: 4032,
            avail_lut: 1_303_680,
            avail_dsp: 9024,
            avail_ff: 2_607_360,
            clock_ns: 10.0,
        },
        PartSpec {
            name: "xczu9eg-ffvb1156-2-e".to_string(),
            avail_bram_18k: 1824,
            avail_lut: 274_080,
            avail_dsp: 2520,
            avail_ff: 548_160,
            clock_ns: 10.0,
        },
    ]
}

pub fn find_part<'a>(catalog: &'a [PartSpec], name: &str) -> Option<&'a PartSpec> {
    catalog.iter().find(|p| p.name == name)
}

/// Parse a line-delimited part catalog: each non-empty, non-`#` line is
/// `part_name bram lut dsp ff clock_ns`.
pub fn parse_catalog(text: &str) -> Result<Vec<PartSpec>, QoRError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |message: &str| QoRError::MalformedCatalog {
            line: i + 1,
            message: message.to_string(),
        };
        if fields.len() != 6 {
            return Err(bad("expected 6 fields: part_name bram lut dsp ff clock_ns"));
        }
        let num = |s: &str, what: &str| {
            s.parse::<u64>().map_err(|_| bad(&format!("{what} must be a nonnegative integer")))
        };
        let part = PartSpec {
            name: fields[0].to_string(),
            avail_bram_18k: num(fields[1], "bram")?,
            avail_lut: num(fields[2], "lut")?,
            avail_dsp: num(fields[3], "dsp")?,
            avail_ff: num(fields[4], "ff")?,
            clock_ns: fields[5]
                .parse::<f64>()
                .ok()
                .filter(|c| c.is_finite() && *c > 0.0)
                .ok_or_else(|| bad("clock_ns must be a positive number"))?,
        };
        if part.avail_bram_18k == 0 && part.avail_lut == 0 && part.avail_dsp == 0 && part.avail_ff == 0
        {
            return Err(bad("at least one resource budget must be nonzero"));
        }
        out.push(part);
    }
    Ok(out)
}
