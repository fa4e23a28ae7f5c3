//! Deterministic closed-form stand-in for an external synthesis tool.
//!
//! The figures follow a fixed structural model of the kernel (statement
//! counts, trip counts, access counts); they are reproducible across runs
//! and platforms, which is what the rest of the pipeline needs from a
//! desk-scale backend. Fidelity to real synthesis is out of scope.

use crate::analyzer::{ArrayInfo, KernelInfo, LoopInfo, TripCount};
use crate::pragma::{PartitionKind, PragmaConfig, Setting, SiteKey};
use crate::qor::{Evaluator, PartSpec, QoRError, QoRReport, ReportStatus};
use crate::source::SourceUnit;

/// Loops whose iteration count cannot be determined statically are
/// modeled with this many iterations.
pub const UNKNOWN_TRIP_COUNT_MODEL: u64 = 16;

/// Bits per block-RAM tile.
const BRAM_BITS: u64 = 18_432;

pub struct AnalyticBackend;

impl Evaluator for AnalyticBackend {
    fn evaluate(
        &self,
        _unit: &SourceUnit,
        info: &KernelInfo,
        config: &PragmaConfig,
        part: &PartSpec,
    ) -> Result<QoRReport, QoRError> {
        Ok(analytic_evaluate(info, config, part))
    }
}

fn modeled_trips(l: &LoopInfo) -> u64 {
    match l.trip_count {
        TripCount::Known(tc) => tc,
        TripCount::Unknown => UNKNOWN_TRIP_COUNT_MODEL,
    }
}

fn unroll_factor(config: &PragmaConfig, l: &LoopInfo) -> u64 {
    let key = SiteKey::LoopUnroll { function: l.function.clone(), loop_id: l.id.clone() };
    match config.setting(&key) {
        Some(Setting::Unroll { factor }) => factor,
        _ => 1,
    }
}

fn is_pipelined(config: &PragmaConfig, l: &LoopInfo) -> bool {
    let key = SiteKey::LoopPipeline { function: l.function.clone(), loop_id: l.id.clone() };
    config.setting(&key) == Some(Setting::On)
}

/// Bank count of an array under the configuration: the product of the
/// per-dimension split factors (1 when a dimension is untouched, the
/// extent when it is completely partitioned).
fn bank_count(config: &PragmaConfig, a: &ArrayInfo) -> u64 {
    let mut banks = 1u64;
    for (i, &extent) in a.dims.iter().enumerate() {
        let key = SiteKey::ArrayPartition { array: a.reference.clone(), dim: (i + 1) as u32 };
        let split = match config.setting(&key) {
            Some(Setting::Partition { kind: PartitionKind::Complete, .. }) => extent,
            Some(Setting::Partition { factor, .. }) => factor,
            _ => 1,
        };
        banks = banks.saturating_mul(split.max(1));
    }
    banks
}

/// Initiation interval of a pipelined loop: each iteration issues its
/// array accesses against dual-ported banks, so the most contended array
/// sets the pace.
fn initiation_interval(info: &KernelInfo, config: &PragmaConfig, l: &LoopInfo, u: u64) -> u64 {
    let mut ii = 1u64;
    for (array, count) in &l.array_accesses {
        let Some(a) = info.array(array) else { continue };
        let ports = 2 * bank_count(config, a);
        let demand = count.saturating_mul(u);
        ii = ii.max(demand.div_ceil(ports));
    }
    ii
}

fn loop_latency(info: &KernelInfo, config: &PragmaConfig, l: &LoopInfo) -> u64 {
    let u = unroll_factor(config, l);
    let iterations = modeled_trips(l).div_ceil(u);
    if is_pipelined(config, l) {
        let ii = initiation_interval(info, config, l, u);
        l.body_stmt_count
            .saturating_add(iterations.saturating_sub(1).saturating_mul(ii))
    } else {
        let mut per_iteration = l.body_stmt_count;
        for c in &l.children {
            per_iteration = per_iteration.saturating_add(loop_latency(info, config, c));
        }
        iterations.saturating_mul(per_iteration)
    }
}

/// Model a design's quality of result. Pure: identical inputs give
/// identical reports. `config` must be valid for `info`.
pub fn analytic_evaluate(info: &KernelInfo, config: &PragmaConfig, part: &PartSpec) -> QoRReport {
    assert!(part.clock_ns > 0.0, "part clock must be positive");

    let mut latency = 0u64;
    let mut stmt_units = 0u64;
    let mut dsp = 0u64;
    for f in &info.functions {
        latency = latency.saturating_add(f.outside_stmt_count);
        stmt_units = stmt_units.saturating_add(f.outside_stmt_count);
        dsp = dsp.saturating_add(f.outside_multiply_count);
        for l in &f.loops {
            latency = latency.saturating_add(loop_latency(info, config, l));
        }
        for l in f.all_loops() {
            let u = unroll_factor(config, l);
            stmt_units = stmt_units.saturating_add(l.body_stmt_count.saturating_mul(u));
            dsp = dsp.saturating_add(l.multiply_stmt_count.saturating_mul(u));
        }
    }

    let lut = 10u64.max(stmt_units.saturating_mul(10));
    let ff = lut * 4 / 5;

    let mut bram = 0u64;
    for a in &info.arrays {
        let bits = a.total_elements().saturating_mul(a.element_bits);
        let tiles = 1u64.max(bits.div_ceil(BRAM_BITS));
        bram = bram.saturating_add(bank_count(config, a).saturating_mul(tiles));
    }

    QoRReport {
        best_case_latency: latency,
        worst_case_latency: latency,
        bram_18k: bram,
        lut,
        dsp,
        ff,
        target_clock_period: part.clock_ns,
        estimated_clock_period: 0.35 * part.clock_ns,
        status: ReportStatus::Ok,
    }
}
