//! `forge`: batch design-space exploration over kernel directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use forge::analyzer::analyze;
use forge::bayes::ExplorerBudget;
use forge::dataset::{
    corpus_stats, emit_finetune_pairs, load_records, normalized_value, render_finetune_pairs,
    render_stats, DesignRecord,
};
use forge::design_space::{build_design_tree, DesignLimit, EnumerationBudget};
use forge::metrics::{
    adrs, adrs_classic, pareto_front, render_adrs_report, DesignPoint, ParetoSet, StrategyLabel,
};
use forge::orchestrator::{discover_kernels, schedule, BackendChoice, Job, Kernel, Mode};
use forge::qor::{default_catalog, find_part, PartSpec};

#[derive(Parser)]
#[command(name = "forge", about = "HLS pragma design-space exploration toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report each kernel's pragma sites and design-space size.
    Analyze(AnalyzeArgs),
    /// Exhaustively enumerate and evaluate every legal configuration.
    FullDse(FullArgs),
    /// Model-guided exploration under a fixed evaluation budget.
    BayesDse(BayesArgs),
    /// Recompute Pareto fronts of emitted datasets and check stored flags.
    Pareto(DataArgs),
    /// Score predicted fronts against reference fronts.
    Adrs(AdrsArgs),
    /// Write instruction/input/output fine-tuning pairs from labeled fronts.
    EmitPairs(DataArgs),
    /// Aggregate corpus statistics over emitted datasets.
    Stats(StatsArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Directory whose immediate subdirectories each hold one kernel.
    #[arg(long = "search_dir")]
    search_dir: PathBuf,
    /// Line-oriented `key = value` file; entries override flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DseArgs {
    /// Directory whose immediate subdirectories each hold one kernel.
    #[arg(long = "search_dir")]
    search_dir: PathBuf,
    /// Output root for datasets, run logs, and the manifest.
    #[arg(long = "data_path")]
    data_path: PathBuf,
    /// Kernel jobs processed concurrently.
    #[arg(long = "max_workers", default_value_t = 1)]
    max_workers: usize,
    /// Target FPGA part, resolved against the built-in catalog.
    #[arg(long, default_value = "xczu9eg-ffvb1156-2-e")]
    part: String,
    /// `analytic`, or a shell command template for an external evaluator.
    #[arg(long, default_value = "analytic")]
    backend: String,
    /// Per-design wall-clock limit for external evaluation, in seconds.
    #[arg(long, default_value_t = 600)]
    timeout: u64,
    /// Line-oriented `key = value` file; entries override flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct FullArgs {
    #[command(flatten)]
    common: DseArgs,
    /// Cap on enumerated designs per kernel; 0 lifts the cap.
    #[arg(long = "max-designs", default_value_t = 100_000)]
    max_designs: usize,
}

#[derive(Args)]
struct BayesArgs {
    #[command(flatten)]
    common: DseArgs,
    /// Guided evaluations after the random warm-up.
    #[arg(long = "bayesian_opt_number", default_value_t = 40)]
    bayesian_opt_number: usize,
    /// Base seed; restart r draws from seed + r.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DataArgs {
    /// Root holding `<source>/<kernel>/designs.json` datasets.
    #[arg(long = "data_path")]
    data_path: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct AdrsArgs {
    /// Root of the predicted datasets.
    #[arg(long = "data_path")]
    data_path: PathBuf,
    /// Root of the reference datasets to score against.
    #[arg(long)]
    reference: PathBuf,
    /// Score with the mean-over-reference variant instead of the default.
    #[arg(long)]
    classic: bool,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Also write `designs.normalized.json` with corrected key spellings.
    #[arg(long = "normalize-keys")]
    normalize_keys: bool,
}

type BoxError = Box<dyn std::error::Error>;

/// `key = value` per line; `#` starts a comment. Returned in file order.
fn read_config(path: &Path) -> Result<Vec<(String, String)>, BoxError> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("config {}: {e}", path.display()))?;
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("config {}:{}: expected `key = value`", path.display(), n + 1).into());
        };
        entries.push((key.trim().replace('-', "_"), value.trim().to_string()));
    }
    Ok(entries)
}

/// Apply config entries through a per-command setter; unknown keys warn.
fn apply_config(
    config: &Option<PathBuf>,
    mut set: impl FnMut(&str, &str) -> Result<bool, BoxError>,
) -> Result<(), BoxError> {
    let Some(path) = config else { return Ok(()) };
    for (key, value) in read_config(path)? {
        if !set(&key, value.as_str())? {
            eprintln!("warning: config key `{key}` not used by this command");
        }
    }
    Ok(())
}

fn parsed<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, BoxError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("config key `{key}`: {e}").into())
}

impl DseArgs {
    fn set(&mut self, key: &str, value: &str) -> Result<bool, BoxError> {
        match key {
            "search_dir" => self.search_dir = value.into(),
            "data_path" => self.data_path = value.into(),
            "max_workers" => self.max_workers = parsed(key, value)?,
            "part" => self.part = value.to_string(),
            "backend" => self.backend = value.to_string(),
            "timeout" => self.timeout = parsed(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn resolve_part(&self) -> Result<PartSpec, BoxError> {
        let catalog = default_catalog();
        find_part(&catalog, &self.part).cloned().ok_or_else(|| {
            let known: Vec<&str> = catalog.iter().map(|p| p.name.as_str()).collect();
            format!("unknown part `{}`; known: {}", self.part, known.join(", ")).into()
        })
    }

    fn backend_choice(&self) -> BackendChoice {
        if self.backend == "analytic" {
            BackendChoice::Analytic
        } else {
            BackendChoice::External {
                template: self.backend.clone(),
                timeout: Duration::from_secs(self.timeout),
            }
        }
    }

    /// Builds one job per discovered kernel; the search directory's own
    /// name becomes the dataset's source name.
    fn jobs(&self, mode: &Mode) -> Result<Vec<Job>, BoxError> {
        let part = self.resolve_part()?;
        let discovery = discover_kernels(&self.search_dir)?;
        for (name, reason) in &discovery.skipped {
            eprintln!("warning: skipping {name}: {reason}");
        }
        let source_name = self
            .search_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "kernels".to_string());
        Ok(discovery
            .kernels
            .into_iter()
            .map(|kernel| Job {
                kernel,
                source_name: source_name.clone(),
                mode: mode.clone(),
                backend: self.backend_choice(),
                part: part.clone(),
                output_root: self.data_path.clone(),
            })
            .collect())
    }
}

/// Run the jobs and report; the exit code says whether every kernel
/// finished.
fn run_batch(args: &DseArgs, mode: Mode) -> Result<ExitCode, BoxError> {
    let jobs = args.jobs(&mode)?;
    fs::create_dir_all(&args.data_path)?;
    let manifest_path = args.data_path.join("run_manifest.tsv");
    let manifest = schedule(&jobs, args.max_workers.max(1), &manifest_path)?;
    print!("{}", manifest.render());
    let failed = manifest.failed_count();
    if failed > 0 {
        eprintln!("{failed} kernel(s) failed; see {}", manifest_path.display());
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_analyze(mut args: AnalyzeArgs) -> Result<ExitCode, BoxError> {
    apply_config(&args.config.clone(), |k, v| {
        Ok(match k {
            "search_dir" => {
                args.search_dir = v.into();
                true
            }
            _ => false,
        })
    })?;
    let discovery = discover_kernels(&args.search_dir)?;
    for (name, reason) in &discovery.skipped {
        eprintln!("warning: skipping {name}: {reason}");
    }
    for Kernel { name, unit } in &discovery.kernels {
        match analyze(unit) {
            Ok((_, info)) => {
                let tree = build_design_tree(&info);
                println!(
                    "{name}\ttop={}\tsites={}\tdesigns={}",
                    info.top_function,
                    tree.sites().len(),
                    tree.leaf_count()
                );
            }
            Err(e) => println!("{name}\tERROR\t{e}"),
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_full(mut args: FullArgs) -> Result<ExitCode, BoxError> {
    let config = args.common.config.clone();
    apply_config(&config, |k, v| {
        if k == "max_designs" {
            args.max_designs = parsed(k, v)?;
            return Ok(true);
        }
        args.common.set(k, v)
    })?;
    let budget = EnumerationBudget {
        max_designs: match args.max_designs {
            0 => DesignLimit::Unbounded,
            n => DesignLimit::Bounded(n),
        },
        prune_equivalent: true,
    };
    run_batch(&args.common, Mode::Full(budget))
}

fn cmd_bayes(mut args: BayesArgs) -> Result<ExitCode, BoxError> {
    let config = args.common.config.clone();
    apply_config(&config, |k, v| {
        match k {
            "bayesian_opt_number" => args.bayesian_opt_number = parsed(k, v)?,
            "seed" => args.seed = parsed(k, v)?,
            _ => return args.common.set(k, v),
        }
        Ok(true)
    })?;
    let budget = ExplorerBudget {
        n_calls: args.bayesian_opt_number,
        seed: args.seed,
        ..ExplorerBudget::default()
    };
    run_batch(&args.common, Mode::Bayes(budget))
}

/// Datasets under a root: every `designs.json` two levels down, as
/// (source/kernel, path) in lexicographic order.
fn find_datasets(root: &Path) -> Result<Vec<(String, PathBuf)>, BoxError> {
    let mut found = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == "designs.json") {
                let kernel = path
                    .parent()
                    .and_then(|p| p.strip_prefix(root).ok())
                    .map(|p| p.to_string_lossy().replace('\\', "/"))
                    .unwrap_or_default();
                found.push((kernel, path));
            }
        }
    }
    if found.is_empty() {
        return Err(format!("no designs.json under {}", root.display()).into());
    }
    found.sort();
    Ok(found)
}

fn cmd_pareto(args: DataArgs) -> Result<ExitCode, BoxError> {
    for (kernel, path) in find_datasets(&args.data_path)? {
        let loaded = load_records(&path)?;
        let points: Vec<DesignPoint> = loaded.iter().map(|(_, p)| p.clone()).collect();
        let front = pareto_front(kernel.clone(), &points)?;
        let mismatches = loaded
            .iter()
            .zip(&points)
            .filter(|((record, _), point)| {
                let on_front = front
                    .points
                    .iter()
                    .any(|f| f.config.canonical_text() == point.config.canonical_text());
                record.is_pareto != on_front
            })
            .count();
        println!(
            "{kernel}\tdesigns={}\tfront={}\tflag_mismatches={mismatches}",
            points.len(),
            front.points.len()
        );
    }
    Ok(ExitCode::SUCCESS)
}

/// Front of one stored dataset, recomputed from its evaluated points.
fn stored_front(kernel: &str, path: &Path) -> Result<ParetoSet, BoxError> {
    let points: Vec<DesignPoint> = load_records(path)?.into_iter().map(|(_, p)| p).collect();
    Ok(pareto_front(kernel, &points)?)
}

fn cmd_adrs(args: AdrsArgs) -> Result<ExitCode, BoxError> {
    let reference: BTreeMap<String, PathBuf> = find_datasets(&args.reference)?.into_iter().collect();
    let score = if args.classic { adrs_classic } else { adrs };
    let mut rows = Vec::new();
    for (kernel, predicted_path) in find_datasets(&args.data_path)? {
        let Some(reference_path) = reference.get(&kernel) else {
            eprintln!("warning: {kernel} has no reference dataset");
            continue;
        };
        let reference_front = stored_front(&kernel, reference_path)?;
        let predicted_front = stored_front(&kernel, &predicted_path)?;
        let value = score(&reference_front, &predicted_front)?;
        rows.push((
            kernel,
            reference_front.points.len(),
            predicted_front.points.len(),
            value,
        ));
    }
    if rows.is_empty() {
        return Err("no kernel present in both datasets".into());
    }
    print!("{}", render_adrs_report(&rows));
    Ok(ExitCode::SUCCESS)
}

fn label_from_strategy(s: &str) -> Option<StrategyLabel> {
    match s {
        "low-latency-high-resource" => Some(StrategyLabel::HighResourceLowLatency),
        "medium-latency-medium-resource" => Some(StrategyLabel::Medium),
        "high-latency-low-resource" => Some(StrategyLabel::LowResourceHighLatency),
        _ => None,
    }
}

fn cmd_emit_pairs(args: DataArgs) -> Result<ExitCode, BoxError> {
    let out_path = args.data_path.join("finetune_pairs.jsonl");
    let mut out = String::new();
    let mut emitted = 0usize;
    for (kernel, path) in find_datasets(&args.data_path)? {
        let loaded = load_records(&path)?;
        let Some((_, baseline)) = loaded.iter().find(|(r, _)| r.is_kernel) else {
            eprintln!("warning: {kernel} has no pragma-free baseline record; skipped");
            continue;
        };
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (record, point) in &loaded {
            if !record.is_pareto {
                continue;
            }
            let Some(label) = label_from_strategy(&record.strategy) else {
                eprintln!(
                    "warning: {kernel}: Pareto record {} lacks a strategy; skipped",
                    record.design_id
                );
                continue;
            };
            points.push(point.clone());
            labels.push(label);
        }
        let front = ParetoSet {
            kernel_id: kernel.clone(),
            points,
        };
        let pairs = emit_finetune_pairs(&baseline.source, &front, &labels)?;
        emitted += pairs.len();
        out.push_str(&render_finetune_pairs(&pairs));
    }
    fs::write(&out_path, out)?;
    println!("{emitted} pairs written to {}", out_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_stats(args: StatsArgs) -> Result<ExitCode, BoxError> {
    let mut records: Vec<DesignRecord> = Vec::new();
    for (_, path) in find_datasets(&args.data.data_path)? {
        let loaded = load_records(&path)?;
        if args.normalize_keys {
            let normalized: Vec<serde_json::Value> =
                loaded.iter().map(|(r, _)| normalized_value(r)).collect();
            let text = serde_json::to_string_pretty(&normalized)? + "\n";
            fs::write(path.with_file_name("designs.normalized.json"), text)?;
        }
        records.extend(loaded.into_iter().map(|(r, _)| r));
    }
    let stats = corpus_stats(&records)?;
    print!("{}", render_stats(&stats));
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> Result<ExitCode, BoxError> {
    match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::FullDse(args) => cmd_full(args),
        Command::BayesDse(args) => cmd_bayes(args),
        Command::Pareto(args) => cmd_pareto(args),
        Command::Adrs(args) => cmd_adrs(args),
        Command::EmitPairs(args) => cmd_emit_pairs(args),
        Command::Stats(args) => cmd_stats(args),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
