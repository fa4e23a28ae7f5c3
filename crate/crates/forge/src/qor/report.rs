//! Reading and writing synthesis reports in the vendor's XML layout.

use quick_xml::events::Event;
use quick_xml::Reader;

use crate::qor::{QoRError, QoRReport, ReportStatus};

const BEST: &[&str] = &["profile", "PerformanceEstimates", "SummaryOfOverallLatency", "Best-caseLatency"];
const WORST: &[&str] = &["profile", "PerformanceEstimates", "SummaryOfOverallLatency", "Worst-caseLatency"];
const EST_CLOCK: &[&str] = &["profile", "PerformanceEstimates", "SummaryOfTimingAnalysis", "EstimatedClockPeriod"];
const TARGET_CLOCK: &[&str] = &["profile", "PerformanceEstimates", "SummaryOfTimingAnalysis", "TargetClockPeriod"];
const BRAM: &[&str] = &["profile", "AreaEstimates", "Resources", "BRAM_18K"];
const LUT: &[&str] = &["profile", "AreaEstimates", "Resources", "LUT"];
const DSP: &[&str] = &["profile", "AreaEstimates", "Resources", "DSP"];
const FF: &[&str] = &["profile", "AreaEstimates", "Resources", "FF"];

#[derive(Default)]
struct Extracted {
    best: Option<u64>,
    worst: Option<u64>,
    est_clock: Option<f64>,
    target_clock: Option<f64>,
    bram: Option<u64>,
    lut: Option<u64>,
    dsp: Option<u64>,
    ff: Option<u64>,
}

/// Parse a synthesis report. Unknown elements are ignored; a report that
/// parses but lacks resource or latency figures comes back FAILED rather
/// than erroring, mirroring how the vendor tool degrades on kernels it
/// cannot schedule.
pub fn parse_report(text: &str) -> Result<QoRReport, QoRError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);

    let mut path: Vec<String> = Vec::new();
    let mut got = Extracted::default();
    loop {
        match reader.read_event() {
            Err(e) => {
                return Err(QoRError::MalformedReport {
                    offset: reader.error_position(),
                    message: e.to_string(),
                })
            }
            Ok(Event::Start(e)) => {
                path.push(String::from_utf8_lossy(e.name().as_ref()).into_owned());
            }
            Ok(Event::End(_)) => {
                path.pop();
            }
            Ok(Event::Text(t)) => {
                let value = t.unescape().map_err(|e| QoRError::MalformedReport {
                    offset: reader.error_position(),
                    message: e.to_string(),
                })?;
                record(&mut got, &path, value.trim());
            }
            Ok(Event::Eof) => {
                if !path.is_empty() {
                    return Err(QoRError::MalformedReport {
                        offset: reader.buffer_position(),
                        message: format!("unexpected end of file inside <{}>", path.join("/")),
                    });
                }
                break;
            }
            Ok(_) => {}
        }
    }

    let (Some(bram), Some(lut), Some(dsp), Some(ff)) = (got.bram, got.lut, got.dsp, got.ff) else {
        return Ok(QoRReport::failed("no resources"));
    };
    let (Some(best), Some(worst)) = (got.best, got.worst) else {
        let mut r = QoRReport::failed("no latency");
        (r.bram_18k, r.lut, r.dsp, r.ff) = (bram, lut, dsp, ff);
        return Ok(r);
    };
    let (Some(est_clock), Some(target_clock)) = (got.est_clock, got.target_clock) else {
        let mut r = QoRReport::failed("no timing");
        (r.bram_18k, r.lut, r.dsp, r.ff) = (bram, lut, dsp, ff);
        (r.best_case_latency, r.worst_case_latency) = (best, worst);
        return Ok(r);
    };
    Ok(QoRReport {
        best_case_latency: best,
        worst_case_latency: worst,
        bram_18k: bram,
        lut,
        dsp,
        ff,
        target_clock_period: target_clock,
        estimated_clock_period: est_clock,
        status: ReportStatus::Ok,
    })
}

fn record(got: &mut Extracted, path: &[String], value: &str) {
    // Values the tool could not compute ("undef") count as absent.
    let at = |target: &[&str]| path.len() == target.len() && path.iter().zip(target).all(|(a, b)| a == b);
    if at(BEST) {
        got.best = value.parse().ok();
    } else if at(WORST) {
        got.worst = value.parse().ok();
    } else if at(EST_CLOCK) {
        got.est_clock = value.parse().ok().filter(|v: &f64| v.is_finite() && *v > 0.0);
    } else if at(TARGET_CLOCK) {
        got.target_clock = value.parse().ok().filter(|v: &f64| v.is_finite() && *v > 0.0);
    } else if at(BRAM) {
        got.bram = value.parse().ok();
    } else if at(LUT) {
        got.lut = value.parse().ok();
    } else if at(DSP) {
        got.dsp = value.parse().ok();
    } else if at(FF) {
        got.ff = value.parse().ok();
    }
}

/// Serialize an OK report into the same element layout `parse_report`
/// reads; the two functions invert each other.
pub fn render_report(report: &QoRReport) -> String {
    assert!(report.is_ok(), "only successful reports have a full serialization");
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <profile>\n\
         \x20   <PerformanceEstimates>\n\
         \x20       <SummaryOfTimingAnalysis>\n\
         \x20           <EstimatedClockPeriod>{est}</EstimatedClockPeriod>\n\
         \x20           <TargetClockPeriod>{target}</TargetClockPeriod>\n\
         \x20       </SummaryOfTimingAnalysis>\n\
         \x20       <SummaryOfOverallLatency>\n\
         \x20           <Best-caseLatency>{best}</Best-caseLatency>\n\
         \x20           <Worst-caseLatency>{worst}</Worst-caseLatency>\n\
         \x20       </SummaryOfOverallLatency>\n\
         \x20   </PerformanceEstimates>\n\
         \x20   <AreaEstimates>\n\
         \x20       <Resources>\n\
         \x20           <BRAM_18K>{bram}</BRAM_18K>\n\
         \x20           <LUT>{lut}</LUT>\n\
         \x20           <DSP>{dsp}</DSP>\n\
         \x20           <FF>{ff}</FF>\n\
         \x20       </Resources>\n\
         \x20   </AreaEstimates>\n\
         </profile>\n",
        est = report.estimated_clock_period,
        target = report.target_clock_period,
        best = report.best_case_latency,
        worst = report.worst_case_latency,
        bram = report.bram_18k,
        lut = report.lut,
        dsp = report.dsp,
        ff = report.ff,
    )
}
