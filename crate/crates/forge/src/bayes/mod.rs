//! Model-guided design-space exploration.
//!
//! Instead of walking every legal configuration, the explorer evaluates a
//! random batch, fits a Gaussian-process surrogate to the observed costs,
//! and repeatedly evaluates the configuration with the highest expected
//! improvement. Restarts are independent; the result is the union of all
//! valid evaluations, deduplicated by configuration.

pub mod gp;

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analyzer::KernelInfo;
use crate::design_space::{
    build_design_tree, enumerate_designs, DesignLimit, DesignTree, EnumerationBudget,
};
use crate::metrics::DesignPoint;
use crate::pragma::{insert_pragmas, PragmaConfig, PragmaError, Setting};
use crate::qor::{compute_aru, Evaluator, PartSpec, QoRError, QoRReport, ReportStatus};
use crate::source::SourceUnit;
use self::gp::{expected_improvement, surrogate_fit, Surrogate, DEFAULT_NOISE};

/// Floor applied to the usage ratio inside the cost, so an all-zero
/// design still has a finite score.
const MIN_ARU: f64 = 1e-6;

/// Largest legal space that gets a full acquisition scan; bigger spaces
/// fall back to scoring this many uniform samples.
pub const FULL_SCAN_LIMIT: usize = 10_000;

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error(transparent)]
    Pragma(#[from] PragmaError),
    #[error(transparent)]
    Qor(#[from] QoRError),
    #[error("every legal configuration has already been evaluated")]
    SpaceExhausted,
    #[error("run log write failed: {0}")]
    Log(#[from] std::io::Error),
}

fn cost_value(latency: u64, aru: f64) -> f64 {
    let l = (latency.max(1) as f64).log10();
    let r = aru.max(MIN_ARU).log10();
    l.hypot(r)
}

/// Scalar minimization objective: distance from the origin in
/// (log10 worst-case latency, log10 usage ratio) space. Latency is
/// floored at one cycle and the ratio at `MIN_ARU`.
///
/// The report must be a successful one; failed evaluations have no cost.
pub fn cost(report: &QoRReport, part: &PartSpec) -> Result<f64, QoRError> {
    let aru = compute_aru(report, part)?;
    Ok(cost_value(report.worst_case_latency, aru))
}

/// The legal configuration space seen as a box `[0, 1]^d`, one dimension
/// per pragma site, with each option list mapped onto an evenly spaced
/// grid in declaration order.
pub struct SearchSpace {
    tree: DesignTree,
}

impl SearchSpace {
    pub fn new(info: &KernelInfo) -> Self {
        SearchSpace {
            tree: build_design_tree(info),
        }
    }

    pub fn tree(&self) -> &DesignTree {
        &self.tree
    }

    pub fn dims(&self) -> usize {
        self.tree.sites().len()
    }

    /// Number of legal configurations.
    pub fn legal_count(&self) -> u128 {
        self.tree.leaf_count()
    }

    /// Map a configuration to its grid point: option index `i` out of
    /// `k` becomes `i / (k - 1)`, or 0 for a single-option site.
    pub fn encode(&self, config: &PragmaConfig) -> Vec<f64> {
        self.tree
            .sites()
            .iter()
            .zip(self.tree.options())
            .map(|(site, opts)| {
                let setting = config
                    .setting(&site.key)
                    .expect("configuration covers every site");
                let i = opts
                    .iter()
                    .position(|o| *o == setting)
                    .expect("setting drawn from the option list");
                if opts.len() == 1 {
                    0.0
                } else {
                    i as f64 / (opts.len() - 1) as f64
                }
            })
            .collect()
    }

    /// Inverse of `encode` by nearest grid point; coordinates outside
    /// `[0, 1]` clamp to the ends of the option list.
    pub fn decode(&self, point: &[f64]) -> PragmaConfig {
        assert_eq!(point.len(), self.dims(), "one coordinate per site");
        let settings: Vec<Setting> = point
            .iter()
            .zip(self.tree.options())
            .map(|(&x, opts)| {
                let k = opts.len();
                let i = (x.clamp(0.0, 1.0) * (k - 1) as f64).round() as usize;
                opts[i.min(k - 1)].clone()
            })
            .collect();
        self.tree.config(&settings)
    }

    /// A random legal configuration, drawn site by site with the option
    /// lists already narrowed by earlier choices.
    pub fn random_legal<R: Rng>(&self, rng: &mut R) -> PragmaConfig {
        let mut settings: Vec<Setting> = Vec::with_capacity(self.dims());
        for idx in 0..self.dims() {
            let opts = self.tree.constrained_options(idx, &settings);
            settings.push(opts[rng.gen_range(0..opts.len())].clone());
        }
        self.tree.config(&settings)
    }

    /// A legal configuration drawn uniformly, by rejection from the full
    /// option product. Falls back to the sequential draw if rejection
    /// keeps missing, so the call always terminates.
    pub fn sample_uniform_legal<R: Rng>(&self, rng: &mut R) -> PragmaConfig {
        for _ in 0..10_000 {
            let settings: Vec<Setting> = self
                .tree
                .options()
                .iter()
                .map(|opts| opts[rng.gen_range(0..opts.len())].clone())
                .collect();
            if self.tree.satisfies_r1(&settings) {
                return self.tree.config(&settings);
            }
        }
        self.random_legal(rng)
    }

    /// Every legal configuration, or `None` when there are more than
    /// `cap` of them.
    pub fn legal_configs(&self, cap: usize) -> Option<Vec<PragmaConfig>> {
        let walk = enumerate_designs(
            &self.tree,
            &EnumerationBudget {
                max_designs: DesignLimit::Bounded(cap),
                prune_equivalent: false,
            },
        );
        if walk.truncated {
            None
        } else {
            Some(walk.designs)
        }
    }
}

/// How much work one exploration run spends.
#[derive(Debug, Clone)]
pub struct ExplorerBudget {
    /// Independent restarts; results are merged across them.
    pub n_opt: usize,
    /// Random evaluations that seed the surrogate, per restart.
    pub n_init: usize,
    /// Model-guided evaluations per restart.
    pub n_calls: usize,
    /// Base RNG seed; restart `i` runs on `seed + i`.
    pub seed: u64,
}

impl Default for ExplorerBudget {
    fn default() -> Self {
        ExplorerBudget {
            n_opt: 1,
            n_init: 20,
            n_calls: 40,
            seed: 0,
        }
    }
}

/// One evaluated configuration, with its encoded point and cost; the
/// cost is absent when the backend reported a failure.
pub struct Observation {
    pub config: PragmaConfig,
    pub point: Vec<f64>,
    pub cost: Option<f64>,
}

/// Pick the next configuration to evaluate: the expected-improvement
/// argmax over the legal space (scanned exhaustively when it has at most
/// `FULL_SCAN_LIMIT` members, otherwise over that many uniform samples),
/// with exact ties broken by lowest canonical text. An argmax that has
/// already been evaluated is replaced by a fresh random legal
/// configuration, so the proposal is never a duplicate.
pub fn propose_next<R: Rng>(
    surrogate: &Surrogate,
    space: &SearchSpace,
    best: f64,
    evaluated: &BTreeSet<String>,
    rng: &mut R,
) -> Result<PragmaConfig, ExploreError> {
    if space.legal_count() <= FULL_SCAN_LIMIT as u128 {
        let all = space
            .legal_configs(FULL_SCAN_LIMIT)
            .expect("count fits the scan limit");
        let fresh: Vec<&PragmaConfig> = all
            .iter()
            .filter(|c| !evaluated.contains(&c.canonical_text()))
            .collect();
        if fresh.is_empty() {
            return Err(ExploreError::SpaceExhausted);
        }
        let winner = argmax_ei(surrogate, space, best, &all);
        if !evaluated.contains(&winner.canonical_text()) {
            return Ok(winner);
        }
        Ok(fresh[rng.gen_range(0..fresh.len())].clone())
    } else {
        let candidates: Vec<PragmaConfig> = (0..FULL_SCAN_LIMIT)
            .map(|_| space.sample_uniform_legal(rng))
            .collect();
        let winner = argmax_ei(surrogate, space, best, &candidates);
        if !evaluated.contains(&winner.canonical_text()) {
            return Ok(winner);
        }
        // In a space this large the unevaluated mass dominates, so a
        // rejection loop ends almost immediately.
        loop {
            let c = space.sample_uniform_legal(rng);
            if !evaluated.contains(&c.canonical_text()) {
                return Ok(c);
            }
        }
    }
}

fn argmax_ei(
    surrogate: &Surrogate,
    space: &SearchSpace,
    best: f64,
    candidates: &[PragmaConfig],
) -> PragmaConfig {
    let mut top: Option<(f64, String, &PragmaConfig)> = None;
    for c in candidates {
        let ei = expected_improvement(surrogate, &space.encode(c), best);
        let text = c.canonical_text();
        let take = match &top {
            None => true,
            Some((top_ei, top_text, _)) => ei > *top_ei || (ei == *top_ei && text < *top_text),
        };
        if take {
            top = Some((ei, text, c));
        }
    }
    top.expect("candidate list is non-empty").2.clone()
}

/// Outcome of pushing one configuration through a backend.
pub enum EvalOutcome {
    Valid(DesignPoint),
    Failed { reason: String },
}

/// Annotate the sources with `config`, run the backend, and package a
/// successful report as a design point carrying the annotated sources.
pub fn evaluate_design(
    unit: &SourceUnit,
    info: &KernelInfo,
    config: &PragmaConfig,
    backend: &dyn Evaluator,
    part: &PartSpec,
) -> Result<EvalOutcome, ExploreError> {
    let annotated = insert_pragmas(unit, info, config)?;
    let report = backend.evaluate(&annotated, info, config, part)?;
    match &report.status {
        ReportStatus::Failed(reason) => Ok(EvalOutcome::Failed {
            reason: reason.clone(),
        }),
        ReportStatus::Ok => {
            let aru = compute_aru(&report, part)?;
            Ok(EvalOutcome::Valid(DesignPoint {
                config: config.clone(),
                latency: report.worst_case_latency,
                aru,
                report,
                source: annotated,
            }))
        }
    }
}

struct Session<'a> {
    unit: &'a SourceUnit,
    info: &'a KernelInfo,
    backend: &'a dyn Evaluator,
    part: &'a PartSpec,
    space: &'a SearchSpace,
    log: &'a mut dyn Write,
    found: Vec<DesignPoint>,
    seen: BTreeSet<String>,
}

impl Session<'_> {
    /// Evaluate one configuration, append its run-log record, and fold
    /// the outcome into the restart state and the merged result set.
    fn evaluate(
        &mut self,
        restart: usize,
        iteration: usize,
        config: PragmaConfig,
        observations: &mut Vec<Observation>,
        evaluated: &mut BTreeSet<String>,
    ) -> Result<(), ExploreError> {
        let started = Instant::now();
        let outcome = evaluate_design(self.unit, self.info, &config, self.backend, self.part)?;
        let secs = started.elapsed().as_secs_f64();
        let text = config.canonical_text();
        let point = self.space.encode(&config);
        match outcome {
            EvalOutcome::Valid(dp) => {
                let c = cost(&dp.report, self.part)?;
                writeln!(self.log, "{restart}, {iteration}, {text}, {c}, {secs:.3}")?;
                observations.push(Observation {
                    config,
                    point,
                    cost: Some(c),
                });
                if self.seen.insert(text.clone()) {
                    self.found.push(dp);
                }
            }
            EvalOutcome::Failed { .. } => {
                writeln!(self.log, "{restart}, {iteration}, {text}, FAILED, {secs:.3}")?;
                observations.push(Observation {
                    config,
                    point,
                    cost: None,
                });
            }
        }
        self.log.flush()?;
        evaluated.insert(text);
        Ok(())
    }
}

fn random_unevaluated<R: Rng>(
    space: &SearchSpace,
    evaluated: &BTreeSet<String>,
    rng: &mut R,
) -> Option<PragmaConfig> {
    if evaluated.len() as u128 >= space.legal_count() {
        return None;
    }
    loop {
        let c = space.random_legal(rng);
        if !evaluated.contains(&c.canonical_text()) {
            return Some(c);
        }
    }
}

/// Run the full exploration: `n_opt` restarts of `n_init` random draws
/// followed by `n_calls` fit/propose/evaluate rounds each.
///
/// Every evaluation appends one record to `log` immediately, `restart,
/// iteration, canonical text, cost or FAILED, wall seconds` (both
/// counters starting at 1), so an aborted run leaves everything it
/// learned behind. Failed evaluations consume budget but never reach
/// the surrogate. A restart that exhausts the legal space stops early.
/// The result is every valid design found, deduplicated by
/// configuration in first-evaluation order.
pub fn explore_bayesian(
    unit: &SourceUnit,
    info: &KernelInfo,
    backend: &dyn Evaluator,
    part: &PartSpec,
    budget: &ExplorerBudget,
    log: &mut dyn Write,
) -> Result<Vec<DesignPoint>, ExploreError> {
    assert!(budget.n_opt >= 1, "at least one restart");
    assert!(budget.n_init >= 1, "at least one random draw per restart");

    let space = SearchSpace::new(info);
    let mut session = Session {
        unit,
        info,
        backend,
        part,
        space: &space,
        log,
        found: Vec::new(),
        seen: BTreeSet::new(),
    };

    for restart in 0..budget.n_opt {
        let mut rng = ChaCha8Rng::seed_from_u64(budget.seed.wrapping_add(restart as u64));
        let mut observations: Vec<Observation> = Vec::new();
        let mut evaluated: BTreeSet<String> = BTreeSet::new();
        let mut iteration = 0usize;
        let mut warned_flat = false;

        for _ in 0..budget.n_init {
            iteration += 1;
            let config = space.random_legal(&mut rng);
            session.evaluate(restart + 1, iteration, config, &mut observations, &mut evaluated)?;
        }

        for _ in 0..budget.n_calls {
            iteration += 1;
            let scored: Vec<&Observation> =
                observations.iter().filter(|o| o.cost.is_some()).collect();
            let config = if scored.is_empty() {
                // Every draw so far failed; without a single cost there
                // is nothing to model, so stay random.
                match random_unevaluated(&space, &evaluated, &mut rng) {
                    Some(c) => c,
                    None => break,
                }
            } else {
                let points: Vec<Vec<f64>> = scored.iter().map(|o| o.point.clone()).collect();
                let costs: Vec<f64> = scored.iter().map(|o| o.cost.unwrap()).collect();
                let surrogate = surrogate_fit(&points, &costs, DEFAULT_NOISE);
                if surrogate.degenerate && !warned_flat {
                    warned_flat = true;
                    writeln!(
                        session.log,
                        "# restart {}: every observed cost is identical; acquisition is flat",
                        restart + 1
                    )?;
                }
                let best = costs.iter().cloned().fold(f64::INFINITY, f64::min);
                match propose_next(&surrogate, &space, best, &evaluated, &mut rng) {
                    Ok(c) => c,
                    Err(ExploreError::SpaceExhausted) => break,
                    Err(e) => return Err(e),
                }
            };
            session.evaluate(restart + 1, iteration, config, &mut observations, &mut evaluated)?;
        }
    }

    Ok(session.found)
}
