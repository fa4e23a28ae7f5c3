//! Trade-off analysis over evaluated designs: Pareto extraction in the
//! (latency, resource-usage) plane, distance-to-reference scoring,
//! resource-tertile strategy labels, and prediction-error utilities.

use std::fmt::Write as _;

use thiserror::Error;

use crate::pragma::PragmaConfig;
use crate::qor::QoRReport;
use crate::source::SourceUnit;

/// One evaluated design: its configuration, its annotated sources, and
/// the two objectives every comparison here runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    pub config: PragmaConfig,
    /// Worst-case cycle latency.
    pub latency: u64,
    /// Average resource usage ratio, nonnegative.
    pub aru: f64,
    pub report: QoRReport,
    pub source: SourceUnit,
}

/// The non-dominated subset of one kernel's evaluated designs.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoSet {
    pub kernel_id: String,
    /// Sorted by ascending latency; coincident points keep input order.
    pub points: Vec<DesignPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyLabel {
    HighResourceLowLatency,
    Medium,
    LowResourceHighLatency,
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("metric input must be non-empty")]
    EmptyInput,
    #[error("the {which} set is empty")]
    EmptySet { which: &'static str },
    #[error("distance is undefined against a point with zero latency or zero resource usage")]
    ZeroDenominator,
    #[error("prediction and actual lists differ in length ({predicted} vs {actual})")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("relative error is undefined for actual value 0 at index {index}")]
    ZeroActual { index: usize },
}

/// `a` dominates `b` when it is at least as good on both objectives and
/// strictly better on one.
pub fn dominates(a: &DesignPoint, b: &DesignPoint) -> bool {
    a.latency <= b.latency
        && a.aru <= b.aru
        && (a.latency < b.latency || a.aru < b.aru)
}

/// Extract the non-dominated subset. Points tied on both objectives all
/// survive together. Output is sorted by ascending latency (input order
/// within exact ties).
pub fn pareto_front(
    kernel_id: impl Into<String>,
    designs: &[DesignPoint],
) -> Result<ParetoSet, MetricsError> {
    if designs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut order: Vec<usize> = (0..designs.len()).collect();
    order.sort_by(|&a, &b| {
        designs[a]
            .latency
            .cmp(&designs[b].latency)
            .then(designs[a].aru.total_cmp(&designs[b].aru))
            .then(a.cmp(&b))
    });

    // One pass over latency groups: a point survives iff it has the
    // minimal usage of its latency group and beats every faster point's
    // usage strictly.
    let mut points = Vec::new();
    let mut best_faster = f64::INFINITY;
    let mut g = 0;
    while g < order.len() {
        let mut end = g;
        while end < order.len() && designs[order[end]].latency == designs[order[g]].latency {
            end += 1;
        }
        let group_min = designs[order[g]].aru;
        if group_min < best_faster {
            for &i in &order[g..end] {
                if designs[i].aru == group_min {
                    points.push(i);
                }
            }
            best_faster = group_min;
        }
        g = end;
    }
    // Ties within a group were emitted in sorted-index order already; keep
    // overall emission order, which is ascending latency.
    points.sort_by(|&a, &b| designs[a].latency.cmp(&designs[b].latency).then(a.cmp(&b)));
    Ok(ParetoSet {
        kernel_id: kernel_id.into(),
        points: points.into_iter().map(|i| designs[i].clone()).collect(),
    })
}

/// Normalized distance from `gamma` to `omega`, in percent: the worst of
/// the two per-objective relative gaps, clamped at zero. The denominators
/// come from `omega`.
pub fn delta(gamma: &DesignPoint, omega: &DesignPoint) -> Result<f64, MetricsError> {
    if omega.latency == 0 || omega.aru == 0.0 {
        return Err(MetricsError::ZeroDenominator);
    }
    let dl = (gamma.latency as f64 - omega.latency as f64) / omega.latency as f64;
    let dr = (gamma.aru - omega.aru) / omega.aru;
    Ok(dl.max(dr).max(0.0) * 100.0)
}

fn mean_min_distance(
    reference: &ParetoSet,
    predicted: &ParetoSet,
    distance: impl Fn(&DesignPoint, &DesignPoint) -> Result<f64, MetricsError>,
) -> Result<f64, MetricsError> {
    if reference.points.is_empty() {
        return Err(MetricsError::EmptySet { which: "reference" });
    }
    if predicted.points.is_empty() {
        return Err(MetricsError::EmptySet { which: "predicted" });
    }
    let mut sum = 0.0;
    for gamma in &reference.points {
        let mut best = f64::INFINITY;
        for omega in &predicted.points {
            best = best.min(distance(gamma, omega)?);
        }
        sum += best;
    }
    Ok(sum / reference.points.len() as f64)
}

/// Adjusted distance to reference set, in percent: the mean over the
/// reference front of the distance to the nearest predicted point.
pub fn adrs(reference: &ParetoSet, predicted: &ParetoSet) -> Result<f64, MetricsError> {
    mean_min_distance(reference, predicted, delta)
}

/// Textbook-oriented variant: per-objective gaps are measured relative to
/// the reference point instead. Never the default; callers must opt in.
pub fn adrs_classic(reference: &ParetoSet, predicted: &ParetoSet) -> Result<f64, MetricsError> {
    mean_min_distance(reference, predicted, |gamma, omega| {
        if gamma.latency == 0 || gamma.aru == 0.0 {
            return Err(MetricsError::ZeroDenominator);
        }
        let dl = (omega.latency as f64 - gamma.latency as f64) / gamma.latency as f64;
        let dr = (omega.aru - gamma.aru) / gamma.aru;
        Ok(dl.max(dr).max(0.0) * 100.0)
    })
}

pub fn average_adrs(per_kernel: &[f64]) -> Result<f64, MetricsError> {
    if per_kernel.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(per_kernel.iter().sum::<f64>() / per_kernel.len() as f64)
}

/// Label each front member by its resource-usage tertile: the heaviest
/// third trades resources for latency, the lightest third the reverse.
/// Returned labels parallel `front.points`. Fronts smaller than three
/// points are all medium.
pub fn tertile_labels(front: &ParetoSet) -> Result<Vec<StrategyLabel>, MetricsError> {
    let n = front.points.len();
    if n == 0 {
        return Err(MetricsError::EmptyInput);
    }
    if n < 3 {
        return Ok(vec![StrategyLabel::Medium; n]);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let pa = &front.points[a];
        let pb = &front.points[b];
        pb.aru
            .total_cmp(&pa.aru)
            .then(pa.latency.cmp(&pb.latency))
            .then_with(|| pa.config.canonical_text().cmp(&pb.config.canonical_text()))
    });
    let mut labels = vec![StrategyLabel::Medium; n];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = if rank < n / 3 {
            StrategyLabel::HighResourceLowLatency
        } else if rank < 2 * n / 3 {
            StrategyLabel::Medium
        } else {
            StrategyLabel::LowResourceHighLatency
        };
    }
    Ok(labels)
}

/// Mean absolute percentage error (as a fraction, not percent).
pub fn mape(predicted: &[f64], actual: &[f64]) -> Result<f64, MetricsError> {
    check_paired(predicted, actual)?;
    let mut sum = 0.0;
    for (i, (p, a)) in predicted.iter().zip(actual).enumerate() {
        if *a == 0.0 {
            return Err(MetricsError::ZeroActual { index: i });
        }
        sum += ((p - a) / a).abs();
    }
    Ok(sum / predicted.len() as f64)
}

/// Root of the mean squared error.
pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64, MetricsError> {
    check_paired(predicted, actual)?;
    let sum: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok((sum / predicted.len() as f64).sqrt())
}

fn check_paired(predicted: &[f64], actual: &[f64]) -> Result<(), MetricsError> {
    if predicted.len() != actual.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

/// Per-kernel front-comparison summary, one line per kernel plus the
/// grand mean: `kernel_id, |reference|, |predicted|, adrs_percent`.
pub fn render_adrs_report(rows: &[(String, usize, usize, f64)]) -> String {
    let mut out = String::new();
    for (kernel, reference, predicted, score) in rows {
        writeln!(out, "{kernel}, {reference}, {predicted}, {score}").expect("string write");
    }
    let mean = if rows.is_empty() {
        0.0
    } else {
        rows.iter().map(|r| r.3).sum::<f64>() / rows.len() as f64
    };
    writeln!(out, "average_adrs {mean}").expect("string write");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pragma::{PragmaDecision, Setting, SiteKey};
    use crate::qor::{QoRReport, ReportStatus};
    use proptest::prelude::*;

    fn pt(latency: u64, aru: f64) -> DesignPoint {
        pt_named(latency, aru, "d")
    }

    /// `name` only matters where label tie-breaking reaches the canonical
    /// config order.
    fn pt_named(latency: u64, aru: f64, name: &str) -> DesignPoint {
        DesignPoint {
            config: PragmaConfig {
                decisions: vec![PragmaDecision {
                    site: SiteKey::FunctionInline { function: name.to_string() },
                    setting: Setting::Off,
                }],
            },
            latency,
            aru,
            report: QoRReport {
                best_case_latency: latency,
                worst_case_latency: latency,
                bram_18k: 0,
                lut: 0,
                dsp: 0,
                ff: 0,
                target_clock_period: 10.0,
                estimated_clock_period: 3.5,
                status: ReportStatus::Ok,
            },
            source: SourceUnit::single("k.c", "void top(int x) { x = x; }\n"),
        }
    }

    fn front(points: &[(u64, f64)]) -> ParetoSet {
        ParetoSet {
            kernel_id: "k".into(),
            points: points.iter().map(|&(l, a)| pt(l, a)).collect(),
        }
    }

    fn coords(set: &ParetoSet) -> Vec<(u64, f64)> {
        set.points.iter().map(|p| (p.latency, p.aru)).collect()
    }

    /// Quadratic dominance check, independent of the sweep under test.
    fn oracle_front(designs: &[DesignPoint]) -> Vec<(u64, f64)> {
        let mut out: Vec<(u64, f64)> = designs
            .iter()
            .enumerate()
            .filter(|(i, p)| {
                !designs
                    .iter()
                    .enumerate()
                    .any(|(j, q)| j != *i && dominates(q, p))
            })
            .map(|(_, p)| (p.latency, p.aru))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        out
    }

    #[test]
    fn single_point_is_its_own_front() {
        let designs = [pt(100, 0.5)];
        let set = pareto_front("k", &designs).unwrap();
        assert_eq!(coords(&set), [(100, 0.5)]);
    }

    #[test]
    fn dominated_points_drop_out() {
        let designs = [pt(100, 0.5), pt(200, 0.2), pt(150, 0.6), pt(300, 0.1)];
        let set = pareto_front("k", &designs).unwrap();
        assert_eq!(coords(&set), [(100, 0.5), (200, 0.2), (300, 0.1)]);
    }

    #[test]
    fn coincident_points_all_survive() {
        let designs = [pt(100, 0.5), pt(100, 0.5), pt(100, 0.5)];
        let set = pareto_front("k", &designs).unwrap();
        assert_eq!(set.points.len(), 3);
    }

    #[test]
    fn equal_latency_keeps_only_the_lightest() {
        let designs = [pt(100, 0.5), pt(100, 0.4), pt(100, 0.4), pt(90, 0.9)];
        let set = pareto_front("k", &designs).unwrap();
        assert_eq!(coords(&set), [(90, 0.9), (100, 0.4), (100, 0.4)]);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(pareto_front("k", &[]).unwrap_err(), MetricsError::EmptyInput);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(delta(&pt(100, 0.1), &pt(100, 0.1)).unwrap(), 0.0);
        assert!((delta(&pt(100, 0.1), &pt(80, 0.1)).unwrap() - 25.0).abs() < 1e-12);
        assert_eq!(delta(&pt(100, 0.1), &pt(120, 0.1)).unwrap(), 0.0);
        assert_eq!(
            delta(&pt(100, 0.1), &pt(0, 0.1)).unwrap_err(),
            MetricsError::ZeroDenominator
        );
        assert_eq!(
            delta(&pt(100, 0.1), &pt(80, 0.0)).unwrap_err(),
            MetricsError::ZeroDenominator
        );
    }

    #[test]
    fn reference_distance_examples() {
        let g = front(&[(100, 0.1)]);
        assert_eq!(adrs(&g, &g).unwrap(), 0.0);
        assert!((adrs(&g, &front(&[(80, 0.1)])).unwrap() - 25.0).abs() < 1e-12);
        let two = front(&[(100, 0.2), (200, 0.1)]);
        let one = front(&[(100, 0.2)]);
        assert!((adrs(&two, &one).unwrap() - 50.0).abs() < 1e-12);
        assert_eq!(
            adrs(&front(&[]), &one).unwrap_err(),
            MetricsError::EmptySet { which: "reference" }
        );
        assert_eq!(
            adrs(&one, &front(&[])).unwrap_err(),
            MetricsError::EmptySet { which: "predicted" }
        );
    }

    #[test]
    fn classic_orientation_measures_regressions_instead() {
        // The predicted point is strictly worse; the printed form sees no
        // gap while the classic form does.
        let reference = front(&[(80, 0.1)]);
        let predicted = front(&[(100, 0.1)]);
        assert_eq!(adrs(&reference, &predicted).unwrap(), 0.0);
        assert!((adrs_classic(&reference, &predicted).unwrap() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn average_is_the_arithmetic_mean() {
        assert_eq!(average_adrs(&[0.0]).unwrap(), 0.0);
        assert_eq!(average_adrs(&[25.0, 75.0]).unwrap(), 50.0);
        assert_eq!(average_adrs(&[]).unwrap_err(), MetricsError::EmptyInput);
    }

    #[test]
    fn tertiles_split_two_two_two() {
        let f = front(&[(10, 0.6), (20, 0.5), (30, 0.4), (40, 0.3), (50, 0.2), (60, 0.1)]);
        let labels = tertile_labels(&f).unwrap();
        use StrategyLabel::*;
        assert_eq!(
            labels,
            [
                HighResourceLowLatency,
                HighResourceLowLatency,
                Medium,
                Medium,
                LowResourceHighLatency,
                LowResourceHighLatency
            ]
        );
    }

    #[test]
    fn tertiles_split_two_two_three() {
        let f = front(&[
            (10, 0.7),
            (20, 0.6),
            (30, 0.5),
            (40, 0.4),
            (50, 0.3),
            (60, 0.2),
            (70, 0.1),
        ]);
        let labels = tertile_labels(&f).unwrap();
        use StrategyLabel::*;
        let count = |l: StrategyLabel| labels.iter().filter(|&&x| x == l).count();
        assert_eq!(count(HighResourceLowLatency), 2);
        assert_eq!(count(Medium), 2);
        assert_eq!(count(LowResourceHighLatency), 3);
    }

    #[test]
    fn tiny_fronts_are_all_medium() {
        assert_eq!(
            tertile_labels(&front(&[(10, 0.5)])).unwrap(),
            [StrategyLabel::Medium]
        );
        assert_eq!(
            tertile_labels(&front(&[(10, 0.5), (20, 0.1)])).unwrap(),
            [StrategyLabel::Medium; 2]
        );
    }

    #[test]
    fn label_ties_break_on_latency_then_config_text() {
        // Three points share one usage level; latency orders them. The
        // final pair is fully tied, so the config text decides.
        let mut f = ParetoSet {
            kernel_id: "k".into(),
            points: vec![
                pt_named(30, 0.5, "c"),
                pt_named(10, 0.5, "a"),
                pt_named(20, 0.5, "b"),
            ],
        };
        use StrategyLabel::*;
        assert_eq!(
            tertile_labels(&f).unwrap(),
            [LowResourceHighLatency, HighResourceLowLatency, Medium]
        );
        f.points = vec![
            pt_named(10, 0.5, "b"),
            pt_named(10, 0.5, "a"),
            pt_named(20, 0.5, "c"),
        ];
        assert_eq!(
            tertile_labels(&f).unwrap(),
            [Medium, HighResourceLowLatency, LowResourceHighLatency]
        );
    }

    #[test]
    fn prediction_error_examples() {
        assert_eq!(mape(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[1.0, 2.0], &[1.0, 4.0]).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(mape(&[2.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(
            mape(&[1.0], &[1.0, 2.0]).unwrap_err(),
            MetricsError::LengthMismatch { predicted: 1, actual: 2 }
        );
        assert_eq!(
            mape(&[1.0], &[0.0]).unwrap_err(),
            MetricsError::ZeroActual { index: 0 }
        );
        assert_eq!(rmse(&[], &[]).unwrap_err(), MetricsError::EmptyInput);
    }

    #[test]
    fn report_lines_and_summary() {
        let text = render_adrs_report(&[
            ("gemm".into(), 4, 3, 12.5),
            ("fir".into(), 2, 2, 0.0),
        ]);
        assert_eq!(text, "gemm, 4, 3, 12.5\nfir, 2, 2, 0\naverage_adrs 6.25\n");
    }

    proptest! {
        #[test]
        fn sweep_matches_quadratic_oracle(
            raw in prop::collection::vec((0u64..50, 0u32..50), 1..120)
        ) {
            let designs: Vec<DesignPoint> =
                raw.iter().map(|&(l, a)| pt(l, a as f64 / 10.0)).collect();
            let set = pareto_front("k", &designs).unwrap();
            let mut got = coords(&set);
            got.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            prop_assert_eq!(got, oracle_front(&designs));
        }

        #[test]
        fn dropping_a_dominated_point_changes_nothing(
            raw in prop::collection::vec((0u64..20, 0u32..20), 2..60)
        ) {
            let designs: Vec<DesignPoint> =
                raw.iter().map(|&(l, a)| pt(l, a as f64 / 10.0)).collect();
            let full = pareto_front("k", &designs).unwrap();
            let dominated: Vec<usize> = (0..designs.len())
                .filter(|&i| designs.iter().enumerate().any(|(j, q)| j != i && dominates(q, &designs[i])))
                .collect();
            for &drop in &dominated {
                let remaining: Vec<DesignPoint> = designs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != drop)
                    .map(|(_, p)| p.clone())
                    .collect();
                let thinned = pareto_front("k", &remaining).unwrap();
                prop_assert_eq!(coords(&thinned), coords(&full));
            }
        }

        #[test]
        fn self_distance_is_zero(
            raw in prop::collection::vec((1u64..100, 1u32..100), 1..20)
        ) {
            let f = front(&raw.iter().map(|&(l, a)| (l, a as f64 / 10.0)).collect::<Vec<_>>());
            prop_assert_eq!(adrs(&f, &f).unwrap(), 0.0);
        }

        #[test]
        fn widening_the_predicted_set_never_raises_the_score(
            base in prop::collection::vec((1u64..100, 1u32..100), 1..10),
            extra in prop::collection::vec((1u64..100, 1u32..100), 1..10),
            reference in prop::collection::vec((1u64..100, 1u32..100), 1..10),
        ) {
            let to_front = |raw: &[(u64, u32)]| {
                front(&raw.iter().map(|&(l, a)| (l, a as f64 / 10.0)).collect::<Vec<_>>())
            };
            let narrow = to_front(&base);
            let mut widened_raw = base.clone();
            widened_raw.extend_from_slice(&extra);
            let wide = to_front(&widened_raw);
            let g = to_front(&reference);
            prop_assert!(adrs(&g, &wide).unwrap() <= adrs(&g, &narrow).unwrap() + 1e-9);
        }

        #[test]
        fn labels_ignore_a_uniform_usage_rescale(
            raw in prop::collection::vec((1u64..100, 1u32..100), 3..20),
            scale in 1u32..50,
        ) {
            let mut named: Vec<DesignPoint> = raw
                .iter()
                .enumerate()
                .map(|(i, &(l, a))| pt_named(l, a as f64 / 10.0, &format!("f{i:02}")))
                .collect();
            let f = ParetoSet { kernel_id: "k".into(), points: named.clone() };
            let before = tertile_labels(&f).unwrap();
            for p in &mut named {
                p.aru *= scale as f64;
            }
            let scaled = ParetoSet { kernel_id: "k".into(), points: named };
            prop_assert_eq!(tertile_labels(&scaled).unwrap(), before);
        }
    }
}
