//! Dataset record emission and loading.
//!
//! Records follow a fixed 24-key JSON schema, key order included, so
//! emitted files diff cleanly. The historical misspelling of the
//! "Avialable_*" budget keys is part of that schema and is preserved
//! verbatim; `normalized_value` maps them to corrected names in memory
//! for consumers that want them, without ever changing what is written.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{DesignPoint, ParetoSet, StrategyLabel};
use crate::pragma::{count_pragma_lines, extract_config, PragmaConfig};
use crate::qor::{compute_aru, PartSpec, QoRError, QoRReport, ReportStatus};
use crate::source::{SourceError, SourceFile, SourceUnit};

/// The record keys, in emission order.
pub const RECORD_KEYS: [&str; 24] = [
    "File Path",
    "Part",
    "Avialable_BRAM_18K",
    "Avialable_LUT",
    "Avialable_DSP",
    "Avialable_FF",
    "TargetClockPeriod",
    "EstimatedClockPeriod",
    "Best-caseLatency",
    "Worst-caseLatency",
    "BRAM_18K",
    "LUT",
    "DSP",
    "FF",
    "design_id",
    "algo_name",
    "source_name",
    "is_pareto",
    "is_kernel",
    "code_length",
    "pragma_number",
    "top_function_name",
    "latency-resource-strategy",
    "source_code",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub file_name: String,
    pub file_content: String,
}

/// One design in the published record schema. Field declaration order is
/// the serialization order and matches `RECORD_KEYS`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignRecord {
    #[serde(rename = "File Path")]
    pub file_path: String,
    #[serde(rename = "Part")]
    pub part: String,
    #[serde(rename = "Avialable_BRAM_18K")]
    pub avail_bram_18k: u64,
    #[serde(rename = "Avialable_LUT")]
    pub avail_lut: u64,
    #[serde(rename = "Avialable_DSP")]
    pub avail_dsp: u64,
    #[serde(rename = "Avialable_FF")]
    pub avail_ff: u64,
    #[serde(rename = "TargetClockPeriod")]
    pub target_clock_period: f64,
    #[serde(rename = "EstimatedClockPeriod")]
    pub estimated_clock_period: f64,
    #[serde(rename = "Best-caseLatency")]
    pub best_case_latency: u64,
    #[serde(rename = "Worst-caseLatency")]
    pub worst_case_latency: u64,
    #[serde(rename = "BRAM_18K")]
    pub bram_18k: u64,
    #[serde(rename = "LUT")]
    pub lut: u64,
    #[serde(rename = "DSP")]
    pub dsp: u64,
    #[serde(rename = "FF")]
    pub ff: u64,
    pub design_id: String,
    pub algo_name: String,
    pub source_name: String,
    pub is_pareto: bool,
    pub is_kernel: bool,
    pub code_length: u64,
    pub pragma_number: u64,
    pub top_function_name: String,
    #[serde(rename = "latency-resource-strategy")]
    pub strategy: String,
    pub source_code: Vec<SourceEntry>,
}

/// Instruction-tuning pair: plain kernel in, annotated design out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinetunePair {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("record metadata incomplete, missing: {}", missing.join(", "))]
    IncompleteMeta { missing: Vec<&'static str> },
    #[error("record {index}: schema violation at key {key:?}")]
    SchemaViolation { index: usize, key: String },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("front of {points} designs has {labels} labels")]
    UnlabeledFront { points: usize, labels: usize },
    #[error("no records")]
    EmptyInput,
    #[error(transparent)]
    Qor(#[from] QoRError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Identity of one design within the dataset tree, supplied by the
/// pipeline that produced it.
#[derive(Debug, Clone)]
pub struct RecordMeta {
    pub file_path: String,
    pub design_id: String,
    pub algo_name: String,
    pub source_name: String,
    pub top_function: String,
    pub is_pareto: bool,
    /// Tertile label of a Pareto member; `None` for non-Pareto designs.
    pub strategy: Option<StrategyLabel>,
}

/// Dataset path of one design, mirroring the "File Path" convention.
pub fn design_path(source_name: &str, algo_name: &str, design_id: &str) -> String {
    format!("{source_name}/{algo_name}/design_{design_id}")
}

/// The strategy string written into records: a labeled Pareto member
/// maps to its latency/resource trade name, everything else to "none".
pub fn strategy_string(label: Option<StrategyLabel>) -> &'static str {
    match label {
        Some(StrategyLabel::HighResourceLowLatency) => "low-latency-high-resource",
        Some(StrategyLabel::Medium) => "medium-latency-medium-resource",
        Some(StrategyLabel::LowResourceHighLatency) => "high-latency-low-resource",
        None => "none",
    }
}

/// Build the record for one successfully evaluated design.
pub fn to_record(
    point: &DesignPoint,
    part: &PartSpec,
    meta: &RecordMeta,
) -> Result<DesignRecord, DatasetError> {
    assert!(point.report.is_ok(), "records exist only for successful designs");

    let mut missing = Vec::new();
    for (name, value) in [
        ("File Path", &meta.file_path),
        ("design_id", &meta.design_id),
        ("algo_name", &meta.algo_name),
        ("source_name", &meta.source_name),
        ("top_function_name", &meta.top_function),
    ] {
        if value.is_empty() {
            missing.push(name);
        }
    }
    if meta.is_pareto && meta.strategy.is_none() {
        missing.push("latency-resource-strategy");
    }
    if !missing.is_empty() {
        return Err(DatasetError::IncompleteMeta { missing });
    }

    let source_code: Vec<SourceEntry> = point
        .source
        .files()
        .iter()
        .map(|f| SourceEntry {
            file_name: f.name.clone(),
            file_content: f.content.clone(),
        })
        .collect();
    let code_length = source_code
        .iter()
        .map(|e| e.file_content.chars().count() as u64)
        .sum();

    Ok(DesignRecord {
        file_path: meta.file_path.clone(),
        part: part.name.clone(),
        avail_bram_18k: part.avail_bram_18k,
        avail_lut: part.avail_lut,
        avail_dsp: part.avail_dsp,
        avail_ff: part.avail_ff,
        target_clock_period: point.report.target_clock_period,
        estimated_clock_period: point.report.estimated_clock_period,
        best_case_latency: point.report.best_case_latency,
        worst_case_latency: point.report.worst_case_latency,
        bram_18k: point.report.bram_18k,
        lut: point.report.lut,
        dsp: point.report.dsp,
        ff: point.report.ff,
        design_id: meta.design_id.clone(),
        algo_name: meta.algo_name.clone(),
        source_name: meta.source_name.clone(),
        is_pareto: meta.is_pareto,
        // The pragma-free design is the kernel itself.
        is_kernel: point.config.pragma_count() == 0,
        code_length,
        pragma_number: count_pragma_lines(&point.source) as u64,
        top_function_name: meta.top_function.clone(),
        strategy: strategy_string(if meta.is_pareto { meta.strategy } else { None }).to_string(),
        source_code,
    })
}

/// Records as a single JSON array, 4-space indentation, trailing newline.
pub fn render_records(records: &[DesignRecord]) -> String {
    let mut buf = Vec::new();
    let fmt = serde_json::ser::PrettyFormatter::with_indent(b"    ");
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    records
        .serialize(&mut ser)
        .expect("in-memory serialization cannot fail");
    let mut text = String::from_utf8(buf).expect("serializer emits UTF-8");
    text.push('\n');
    text
}

/// Write a record array to `path` through a temp file in the same
/// directory, so readers never observe a half-written array.
pub fn write_records(path: &Path, records: &[DesignRecord]) -> io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, render_records(records))?;
    fs::rename(&tmp, path)
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let before: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    before + column.saturating_sub(1)
}

fn parse_error(text: &str, err: &serde_json::Error) -> DatasetError {
    DatasetError::Parse {
        offset: byte_offset(text, err.line(), err.column()),
        message: err.to_string(),
    }
}

/// Rebuild the evaluated view of a record: latency and resources from
/// the record fields, usage ratio recomputed against the recorded
/// budgets, pragmas re-extracted from the sources when they analyze.
fn point_from_record(record: &DesignRecord) -> Result<DesignPoint, DatasetError> {
    let part = PartSpec {
        name: record.part.clone(),
        avail_bram_18k: record.avail_bram_18k,
        avail_lut: record.avail_lut,
        avail_dsp: record.avail_dsp,
        avail_ff: record.avail_ff,
        clock_ns: record.target_clock_period,
    };
    let report = QoRReport {
        best_case_latency: record.best_case_latency,
        worst_case_latency: record.worst_case_latency,
        bram_18k: record.bram_18k,
        lut: record.lut,
        dsp: record.dsp,
        ff: record.ff,
        target_clock_period: record.target_clock_period,
        estimated_clock_period: record.estimated_clock_period,
        status: ReportStatus::Ok,
    };
    let aru = compute_aru(&report, &part)?;
    let files: Vec<SourceFile> = record
        .source_code
        .iter()
        .map(|e| SourceFile::new(e.file_name.clone(), e.file_content.clone()))
        .collect();
    let unit = SourceUnit::new(files)?.with_top_hint(record.top_function_name.clone());
    // Sources from outside this toolchain may not analyze; the record
    // is still loadable, just without a reconstructed configuration.
    let config = extract_config(&unit)
        .map(|e| e.config)
        .unwrap_or(PragmaConfig { decisions: Vec::new() });
    Ok(DesignPoint {
        config,
        latency: record.worst_case_latency,
        aru,
        report,
        source: unit,
    })
}

/// Parse a record-array text into records and their evaluated views.
pub fn parse_records(text: &str) -> Result<Vec<(DesignRecord, DesignPoint)>, DatasetError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
    let items = value.as_array().ok_or_else(|| DatasetError::Parse {
        offset: 0,
        message: "expected a top-level JSON array of records".into(),
    })?;
    for (index, item) in items.iter().enumerate() {
        let obj = item.as_object().ok_or_else(|| DatasetError::Parse {
            offset: 0,
            message: format!("record {index} is not an object"),
        })?;
        if let Some(key) = RECORD_KEYS.iter().find(|k| !obj.contains_key(**k)) {
            return Err(DatasetError::SchemaViolation {
                index,
                key: (*key).to_string(),
            });
        }
        if let Some(key) = obj.keys().find(|k| !RECORD_KEYS.contains(&k.as_str())) {
            return Err(DatasetError::SchemaViolation {
                index,
                key: key.clone(),
            });
        }
    }
    let records: Vec<DesignRecord> =
        serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
    records
        .into_iter()
        .map(|r| point_from_record(&r).map(|p| (r, p)))
        .collect()
}

/// Load a record array from disk.
pub fn load_records(path: &Path) -> Result<Vec<(DesignRecord, DesignPoint)>, DatasetError> {
    parse_records(&fs::read_to_string(path)?)
}

/// The record as a JSON value with the misspelled budget keys renamed to
/// "Available_*". In-memory convenience only; files keep the published
/// spelling.
pub fn normalized_value(record: &DesignRecord) -> serde_json::Value {
    let value = serde_json::to_value(record).expect("records serialize");
    let serde_json::Value::Object(map) = value else {
        unreachable!("a record serializes to an object");
    };
    let renamed = map.into_iter().map(|(k, v)| {
        let k = match k.as_str() {
            "Avialable_BRAM_18K" => "Available_BRAM_18K".to_string(),
            "Avialable_LUT" => "Available_LUT".to_string(),
            "Avialable_DSP" => "Available_DSP".to_string(),
            "Avialable_FF" => "Available_FF".to_string(),
            _ => k,
        };
        (k, v)
    });
    serde_json::Value::Object(renamed.collect())
}

fn concat_sources(unit: &SourceUnit) -> String {
    unit.files().iter().map(|f| f.content.as_str()).collect()
}

/// Instruction text for each tertile label.
pub fn instruction_for(label: StrategyLabel) -> &'static str {
    match label {
        StrategyLabel::LowResourceHighLatency => {
            "optimize for low resource usage and high latency."
        }
        StrategyLabel::Medium => "optimize for balanced resource usage and latency.",
        StrategyLabel::HighResourceLowLatency => {
            "optimize for high resource usage and low latency."
        }
    }
}

/// One pair per Pareto member: the unannotated kernel as input, the
/// member's annotated sources as output, instruction chosen by its
/// label. `labels` must be parallel to `front.points`.
pub fn emit_finetune_pairs(
    kernel: &SourceUnit,
    front: &ParetoSet,
    labels: &[StrategyLabel],
) -> Result<Vec<FinetunePair>, DatasetError> {
    if labels.len() != front.points.len() {
        return Err(DatasetError::UnlabeledFront {
            points: front.points.len(),
            labels: labels.len(),
        });
    }
    let input = concat_sources(kernel);
    Ok(front
        .points
        .iter()
        .zip(labels)
        .map(|(point, &label)| FinetunePair {
            instruction: instruction_for(label).to_string(),
            input: input.clone(),
            output: concat_sources(&point.source),
        })
        .collect())
}

/// Pairs as line-delimited JSON, one compact object per line.
pub fn render_finetune_pairs(pairs: &[FinetunePair]) -> String {
    pairs
        .iter()
        .map(|p| {
            let mut line = serde_json::to_string(p).expect("pairs serialize");
            line.push('\n');
            line
        })
        .collect()
}

/// Corpus-level aggregates over a record list.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    /// Designs per kernel, keyed `source_name/algo_name`.
    pub designs_per_kernel: BTreeMap<String, usize>,
    pub mean_pragmas: f64,
    pub mean_code_length: f64,
    pub pareto_count: usize,
    pub total: usize,
}

pub fn corpus_stats(records: &[DesignRecord]) -> Result<CorpusStats, DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::EmptyInput);
    }
    let mut designs_per_kernel: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        *designs_per_kernel
            .entry(format!("{}/{}", r.source_name, r.algo_name))
            .or_default() += 1;
    }
    let n = records.len() as f64;
    Ok(CorpusStats {
        designs_per_kernel,
        mean_pragmas: records.iter().map(|r| r.pragma_number as f64).sum::<f64>() / n,
        mean_code_length: records.iter().map(|r| r.code_length as f64).sum::<f64>() / n,
        pareto_count: records.iter().filter(|r| r.is_pareto).count(),
        total: records.len(),
    })
}

/// Human-readable stats summary for terminal output.
pub fn render_stats(stats: &CorpusStats) -> String {
    let mut out = String::new();
    out.push_str(&format!("designs {}\n", stats.total));
    out.push_str(&format!("kernels {}\n", stats.designs_per_kernel.len()));
    for (kernel, count) in &stats.designs_per_kernel {
        out.push_str(&format!("  {kernel} {count}\n"));
    }
    out.push_str(&format!("pareto_designs {}\n", stats.pareto_count));
    out.push_str(&format!("mean_pragmas {:.3}\n", stats.mean_pragmas));
    out.push_str(&format!("mean_code_length {:.1}\n", stats.mean_code_length));
    out
}
