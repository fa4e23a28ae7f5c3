//! Batch pipelines over kernel directories.
//!
//! A run discovers kernels under a search directory, pushes each through
//! analyze -> explore -> evaluate -> label -> emit, and tracks per-kernel
//! status in a manifest that survives interruption: a rerun skips
//! kernels already DONE and retries the rest.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::analyzer::{analyze, AnalyzeError, KernelInfo};
use crate::bayes::{cost, evaluate_design, explore_bayesian, EvalOutcome, ExploreError, ExplorerBudget};
use crate::dataset::{design_path, to_record, write_records, DatasetError, DesignRecord, RecordMeta};
use crate::design_space::{build_design_tree, enumerate_designs, EnumerationBudget};
use crate::metrics::{pareto_front, tertile_labels, DesignPoint, MetricsError, StrategyLabel};
use crate::qor::{AnalyticBackend, Evaluator, ExternalBackend, PartSpec};
use crate::source::{SourceFile, SourceUnit};

/// File extensions that mark a directory entry as kernel source.
const SOURCE_EXTENSIONS: [&str; 6] = ["c", "h", "cc", "cpp", "cxx", "hpp"];

/// One discovered kernel: the directory name doubles as the algorithm
/// name in emitted records.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub name: String,
    pub unit: SourceUnit,
}

/// How a job explores the design space.
#[derive(Debug, Clone)]
pub enum Mode {
    Full(EnumerationBudget),
    Bayes(ExplorerBudget),
}

/// Which evaluator scores designs.
#[derive(Debug, Clone)]
pub enum BackendChoice {
    Analytic,
    /// Shell command template run per design; see the external adapter.
    External { template: String, timeout: Duration },
}

/// Everything needed to process one kernel.
#[derive(Debug, Clone)]
pub struct Job {
    pub kernel: Kernel,
    pub source_name: String,
    pub mode: Mode,
    pub backend: BackendChoice,
    pub part: PartSpec,
    pub output_root: PathBuf,
}

impl Job {
    pub fn kernel_id(&self) -> String {
        format!("{}/{}", self.source_name, self.kernel.name)
    }
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("no kernels under {}", .0.display())]
    NoKernels(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Analyze(#[from] AnalyzeError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Kernels found under a search directory, plus the subdirectories that
/// held sources but no function to synthesize.
pub struct Discovery {
    pub kernels: Vec<Kernel>,
    /// (directory name, reason) pairs worth a warning.
    pub skipped: Vec<(String, String)>,
}

/// Each immediate subdirectory with at least one recognized source file
/// becomes one kernel, in lexicographic directory order. Directories
/// whose sources parse but define no function are skipped with a
/// warning; broken sources stay in, so their failure lands in the
/// manifest rather than silently vanishing.
pub fn discover_kernels(search_dir: &Path) -> Result<Discovery, OrchestratorError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(search_dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();

    let mut kernels = Vec::new();
    let mut skipped = Vec::new();
    for dir in dirs {
        let name = match dir.file_name() {
            Some(n) => n.to_string_lossy().into_owned(),
            None => continue,
        };
        let mut sources: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| SOURCE_EXTENSIONS.contains(&e))
            })
            .collect();
        if sources.is_empty() {
            continue;
        }
        sources.sort();
        let files: Vec<SourceFile> = sources
            .iter()
            .map(|p| {
                let file_name = p.file_name().unwrap().to_string_lossy().into_owned();
                fs::read_to_string(p).map(|content| SourceFile::new(file_name, content))
            })
            .collect::<Result<_, _>>()?;
        let unit = SourceUnit::new(files).expect("directory listing yields unique names");
        match analyze(&unit) {
            Err(AnalyzeError::MissingTop(d)) => skipped.push((name, d.to_string())),
            _ => kernels.push(Kernel { name, unit }),
        }
    }
    if kernels.is_empty() {
        return Err(OrchestratorError::NoKernels(search_dir.to_path_buf()));
    }
    Ok(Discovery { kernels, skipped })
}

/// Counters and artifacts left behind by one kernel's pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub kernel_dir: PathBuf,
    pub records: usize,
    pub failed_designs: usize,
}

fn log_line(
    log: &mut fs::File,
    id: usize,
    text: &str,
    outcome: &str,
    secs: f64,
) -> std::io::Result<()> {
    writeln!(log, "{id}, {text}, {outcome}, {secs:.3}")?;
    log.flush()
}

/// Evaluate every enumerated design in depth-first order; the vector
/// index of each surviving configuration is its design id.
fn evaluate_full(
    unit: &SourceUnit,
    info: &KernelInfo,
    backend: &dyn Evaluator,
    part: &PartSpec,
    budget: &EnumerationBudget,
    log: &mut fs::File,
) -> Result<(Vec<(usize, DesignPoint)>, usize), PipelineError> {
    let tree = build_design_tree(info);
    let walk = enumerate_designs(&tree, budget);
    let mut points = Vec::new();
    let mut failed = 0;
    for (id, config) in walk.designs.iter().enumerate() {
        let started = Instant::now();
        let outcome = evaluate_design(unit, info, config, backend, part)?;
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            EvalOutcome::Valid(dp) => {
                let c = cost(&dp.report, part).map_err(ExploreError::from)?;
                log_line(log, id, &config.canonical_text(), &c.to_string(), secs)?;
                points.push((id, dp));
            }
            EvalOutcome::Failed { reason } => {
                failed += 1;
                log_line(log, id, &config.canonical_text(), "FAILED", secs)?;
                let _ = reason;
            }
        }
    }
    Ok((points, failed))
}

/// Evaluate the pragma-free baseline, then hand the rest of the budget
/// to the model-guided explorer. The baseline is design 0; explored
/// designs take ids in first-evaluation order.
fn evaluate_bayes(
    unit: &SourceUnit,
    info: &KernelInfo,
    backend: &dyn Evaluator,
    part: &PartSpec,
    budget: &ExplorerBudget,
    log: &mut fs::File,
) -> Result<(Vec<(usize, DesignPoint)>, usize), PipelineError> {
    let tree = build_design_tree(info);
    let baseline = tree.config(&tree.options().iter().map(|o| o[0]).collect::<Vec<_>>());
    let baseline_text = baseline.canonical_text();

    let mut points = Vec::new();
    let mut failed = 0;
    let started = Instant::now();
    let outcome = evaluate_design(unit, info, &baseline, backend, part)?;
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        EvalOutcome::Valid(dp) => {
            let c = cost(&dp.report, part).map_err(ExploreError::from)?;
            writeln!(log, "0, 0, {baseline_text}, {c}, {secs:.3}")?;
            log.flush()?;
            points.push((0, dp));
        }
        EvalOutcome::Failed { .. } => {
            failed += 1;
            writeln!(log, "0, 0, {baseline_text}, FAILED, {secs:.3}")?;
            log.flush()?;
        }
    }

    let explored = explore_bayesian(unit, info, backend, part, budget, log)?;
    let mut next_id = 1;
    for dp in explored {
        if dp.config.canonical_text() == baseline_text {
            continue;
        }
        points.push((next_id, dp));
        next_id += 1;
    }
    Ok((points, failed))
}

/// Run one kernel end to end, leaving `designs.json`, `run.log`,
/// `metrics.txt`, and one annotated source directory per design under
/// `<output_root>/<source_name>/<kernel>/`.
pub fn run_pipeline(job: &Job) -> Result<PipelineOutput, PipelineError> {
    let kernel_dir = job
        .output_root
        .join(&job.source_name)
        .join(&job.kernel.name);
    fs::create_dir_all(&kernel_dir)?;

    let (_, info) = analyze(&job.kernel.unit)?;
    let external;
    let backend: &dyn Evaluator = match &job.backend {
        BackendChoice::Analytic => &AnalyticBackend,
        BackendChoice::External { template, timeout } => {
            external = ExternalBackend::new(kernel_dir.join("synth"), template.clone())
                .with_timeout(*timeout);
            &external
        }
    };

    let mut log = fs::File::create(kernel_dir.join("run.log"))?;
    let (points, failed_designs) = match &job.mode {
        Mode::Full(budget) => {
            evaluate_full(&job.kernel.unit, &info, backend, &job.part, budget, &mut log)?
        }
        Mode::Bayes(budget) => {
            evaluate_bayes(&job.kernel.unit, &info, backend, &job.part, budget, &mut log)?
        }
    };

    let kernel_id = job.kernel_id();
    let mut labeled: BTreeMap<String, StrategyLabel> = BTreeMap::new();
    if !points.is_empty() {
        let designs: Vec<DesignPoint> = points.iter().map(|(_, p)| p.clone()).collect();
        let front = pareto_front(kernel_id.clone(), &designs)?;
        let labels = tertile_labels(&front)?;
        for (point, label) in front.points.iter().zip(labels) {
            labeled.insert(point.config.canonical_text(), label);
        }
    }

    let mut records: Vec<DesignRecord> = Vec::with_capacity(points.len());
    for (id, point) in &points {
        let label = labeled.get(&point.config.canonical_text()).copied();
        let meta = RecordMeta {
            file_path: design_path(&job.source_name, &job.kernel.name, &id.to_string()),
            design_id: id.to_string(),
            algo_name: job.kernel.name.clone(),
            source_name: job.source_name.clone(),
            top_function: info.top_function.clone(),
            is_pareto: label.is_some(),
            strategy: label,
        };
        records.push(to_record(point, &job.part, &meta)?);

        let design_dir = kernel_dir.join(format!("design_{id}"));
        fs::create_dir_all(&design_dir)?;
        for f in point.source.files() {
            fs::write(design_dir.join(&f.name), &f.content)?;
        }
    }
    write_records(&kernel_dir.join("designs.json"), &records)?;

    let mut metrics = String::new();
    metrics.push_str(&format!("kernel {kernel_id}\n"));
    metrics.push_str(&format!("designs {}\n", records.len()));
    metrics.push_str(&format!("failed {failed_designs}\n"));
    metrics.push_str(&format!("pareto {}\n", labeled.len()));
    for (name, label) in [
        ("low-latency-high-resource", StrategyLabel::HighResourceLowLatency),
        ("medium-latency-medium-resource", StrategyLabel::Medium),
        ("high-latency-low-resource", StrategyLabel::LowResourceHighLatency),
    ] {
        let count = labeled.values().filter(|&&l| l == label).count();
        metrics.push_str(&format!("{name} {count}\n"));
    }
    if let Some(best) = points.iter().map(|(_, p)| p.latency).min() {
        metrics.push_str(&format!("best_latency {best}\n"));
    }
    fs::write(kernel_dir.join("metrics.txt"), metrics)?;

    Ok(PipelineOutput {
        kernel_dir,
        records: records.len(),
        failed_designs,
    })
}

/// Per-kernel progress of a batch run.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelStatus {
    Pending,
    Done { designs: usize, secs: f64 },
    Failed { reason: String },
}

/// The run ledger: one status per discovered kernel.
#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    pub statuses: BTreeMap<String, KernelStatus>,
}

impl RunManifest {
    pub fn failed_count(&self) -> usize {
        self.statuses
            .values()
            .filter(|s| matches!(s, KernelStatus::Failed { .. }))
            .count()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (kernel, status) in &self.statuses {
            let line = match status {
                KernelStatus::Pending => format!("{kernel}\tPENDING\t0\t0.000"),
                KernelStatus::Done { designs, secs } => {
                    format!("{kernel}\tDONE\t{designs}\t{secs:.3}")
                }
                KernelStatus::Failed { reason } => {
                    let flat = reason.replace(['\t', '\n'], " ");
                    format!("{kernel}\tFAILED\t0\t0.000\t{flat}")
                }
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Self {
        let mut statuses = BTreeMap::new();
        for line in text.lines() {
            let fields: Vec<&str> = line.splitn(5, '\t').collect();
            if fields.len() < 4 {
                continue;
            }
            let status = match fields[1] {
                "DONE" => KernelStatus::Done {
                    designs: fields[2].parse().unwrap_or(0),
                    secs: fields[3].parse().unwrap_or(0.0),
                },
                "FAILED" => KernelStatus::Failed {
                    reason: fields.get(4).unwrap_or(&"").to_string(),
                },
                _ => KernelStatus::Pending,
            };
            statuses.insert(fields[0].to_string(), status);
        }
        RunManifest { statuses }
    }
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> std::io::Result<()> {
    let tmp = path.with_extension("tsv.tmp");
    fs::write(&tmp, manifest.render())?;
    fs::rename(&tmp, path)
}

/// Run jobs with at most `max_workers` in flight, recording each
/// completion in the manifest file as it happens. Kernels marked DONE
/// in an existing manifest at `manifest_path` are skipped, which is
/// what lets an interrupted batch resume. Job failures become manifest
/// entries; they never stop the other jobs.
pub fn schedule(
    jobs: &[Job],
    max_workers: usize,
    manifest_path: &Path,
) -> Result<RunManifest, OrchestratorError> {
    assert!(max_workers >= 1, "need at least one worker");

    let previous = match fs::read_to_string(manifest_path) {
        Ok(text) => RunManifest::parse(&text),
        Err(_) => RunManifest::default(),
    };

    let mut manifest = RunManifest::default();
    let mut queue: VecDeque<usize> = VecDeque::new();
    for (i, job) in jobs.iter().enumerate() {
        let id = job.kernel_id();
        match previous.statuses.get(&id) {
            Some(done @ KernelStatus::Done { .. }) => {
                manifest.statuses.insert(id, done.clone());
            }
            _ => {
                manifest.statuses.insert(id, KernelStatus::Pending);
                queue.push_back(i);
            }
        }
    }
    write_manifest(manifest_path, &manifest)?;

    let shared = Mutex::new((manifest, queue));
    std::thread::scope(|scope| {
        for _ in 0..max_workers.min(jobs.len()) {
            scope.spawn(|| loop {
                let next = {
                    let mut guard = shared.lock().expect("scheduler lock");
                    guard.1.pop_front()
                };
                let Some(index) = next else { break };
                let job = &jobs[index];
                let started = Instant::now();
                let status = match run_pipeline(job) {
                    Ok(output) => KernelStatus::Done {
                        designs: output.records,
                        secs: started.elapsed().as_secs_f64(),
                    },
                    Err(e) => KernelStatus::Failed {
                        reason: e.to_string(),
                    },
                };
                let mut guard = shared.lock().expect("scheduler lock");
                guard.0.statuses.insert(job.kernel_id(), status);
                // Manifest write failures must not kill the worker; the
                // final render below still reflects the true state.
                let _ = write_manifest(manifest_path, &guard.0);
            });
        }
    });

    let (manifest, _) = shared.into_inner().expect("scheduler lock");
    write_manifest(manifest_path, &manifest)?;
    Ok(manifest)
}
