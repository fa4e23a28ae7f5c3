//! Directive vocabulary, legal sites, configuration validity, and the
//! source rewriter that turns a configuration into annotated code.
//!
//! A kernel's tunable surface is a fixed, ordered list of sites: unroll and
//! pipeline per loop, partition per array dimension, inline and pipeline
//! per function. A configuration assigns every site exactly one setting;
//! `OFF` everywhere is the unmodified baseline.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::analyzer::{
    self, pragma_contexts, AnalyzeError, ArrayAnchor, ArrayRef, KernelInfo, TripCount,
};
use crate::source::{Diagnostic, Location, SourceUnit};

/// Identity of one tunable site.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SiteKey {
    LoopUnroll { function: String, loop_id: String },
    LoopPipeline { function: String, loop_id: String },
    ArrayPartition { array: ArrayRef, dim: u32 },
    FunctionInline { function: String },
    FunctionPipeline { function: String },
}

impl SiteKey {
    /// Stable text form used in manifests and logs, e.g.
    /// `loop:mm:L0.1:unroll` or `array:mm:buf:d2` (scope empty for
    /// file-scope arrays).
    pub fn canonical(&self) -> String {
        match self {
            SiteKey::LoopUnroll { function, loop_id } => {
                format!("loop:{function}:{loop_id}:unroll")
            }
            SiteKey::LoopPipeline { function, loop_id } => {
                format!("loop:{function}:{loop_id}:pipeline")
            }
            SiteKey::ArrayPartition { array, dim } => {
                format!("array:{}:{}:d{dim}", array.scope(), array.name)
            }
            SiteKey::FunctionInline { function } => format!("fn:{function}:inline"),
            SiteKey::FunctionPipeline { function } => format!("fn:{function}:pipeline"),
        }
    }
}

impl fmt::Display for SiteKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// One tunable site with the location its directive lines anchor to.
/// For partition sites on declared arrays the anchor is the declaration;
/// the rewriter places the line just after the declaration's `;`.
#[derive(Debug, Clone, PartialEq)]
pub struct PragmaSite {
    pub key: SiteKey,
    pub location: Location,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PartitionKind {
    Cyclic,
    Block,
    Complete,
}

impl PartitionKind {
    pub fn text(self) -> &'static str {
        match self {
            PartitionKind::Cyclic => "cyclic",
            PartitionKind::Block => "block",
            PartitionKind::Complete => "complete",
        }
    }
}

/// The setting chosen at a site. `On` covers pipeline and inline toggles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Setting {
    Off,
    On,
    Unroll { factor: u64 },
    /// `factor` is meaningless (and zero) for `Complete`.
    Partition { kind: PartitionKind, factor: u64 },
}

impl Setting {
    pub fn complete() -> Self {
        Setting::Partition {
            kind: PartitionKind::Complete,
            factor: 0,
        }
    }

    pub fn is_off(self) -> bool {
        self == Setting::Off
    }

    /// Stable text form: `off`, `on`, `u4`, `cyclic2`, `block8`, `complete`.
    pub fn canonical(self) -> String {
        match self {
            Setting::Off => "off".to_string(),
            Setting::On => "on".to_string(),
            Setting::Unroll { factor } => format!("u{factor}"),
            Setting::Partition { kind: PartitionKind::Complete, .. } => "complete".to_string(),
            Setting::Partition { kind, factor } => format!("{}{factor}", kind.text()),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PragmaDecision {
    pub site: SiteKey,
    pub setting: Setting,
}

/// A full assignment: one decision per site, in site enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct PragmaConfig {
    pub decisions: Vec<PragmaDecision>,
}

impl PragmaConfig {
    pub fn all_off(sites: &[PragmaSite]) -> Self {
        Self {
            decisions: sites
                .iter()
                .map(|s| PragmaDecision {
                    site: s.key.clone(),
                    setting: Setting::Off,
                })
                .collect(),
        }
    }

    pub fn setting(&self, site: &SiteKey) -> Option<Setting> {
        self.decisions
            .iter()
            .find(|d| &d.site == site)
            .map(|d| d.setting)
    }

    /// Replace the decision at `site`; panics if the site is absent.
    pub fn set(&mut self, site: &SiteKey, setting: Setting) {
        let d = self
            .decisions
            .iter_mut()
            .find(|d| &d.site == site)
            .unwrap_or_else(|| panic!("config has no site {site}"));
        d.setting = setting;
    }

    pub fn with(mut self, site: &SiteKey, setting: Setting) -> Self {
        self.set(site, setting);
        self
    }

    /// Number of non-OFF decisions, which equals the number of directive
    /// lines the rewriter will emit.
    pub fn pragma_count(&self) -> usize {
        self.decisions.iter().filter(|d| !d.setting.is_off()).count()
    }

    /// Canonical one-line text: `key=value` pairs in site order.
    pub fn canonical_text(&self) -> String {
        self.decisions
            .iter()
            .map(|d| format!("{}={}", d.site.canonical(), d.setting.canonical()))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Enumerate every tunable site of a kernel in the fixed deterministic
/// order: per function in source order, loops in preorder (unroll before
/// pipeline at each loop), then the function's arrays in declaration order
/// with dimensions ascending, then inline (non-top only) and pipeline for
/// the function itself; file-scope arrays come last.
pub fn enumerate_sites(info: &KernelInfo) -> Vec<PragmaSite> {
    let mut sites = Vec::new();
    for f in &info.functions {
        for l in f.all_loops() {
            sites.push(PragmaSite {
                key: SiteKey::LoopUnroll {
                    function: f.name.clone(),
                    loop_id: l.id.clone(),
                },
                location: l.body_start.clone(),
            });
            sites.push(PragmaSite {
                key: SiteKey::LoopPipeline {
                    function: f.name.clone(),
                    loop_id: l.id.clone(),
                },
                location: l.body_start.clone(),
            });
        }
        for a in info.arrays_of(&f.name) {
            for dim in 1..=a.dims.len() as u32 {
                sites.push(PragmaSite {
                    key: SiteKey::ArrayPartition {
                        array: a.reference.clone(),
                        dim,
                    },
                    location: a.definition.clone(),
                });
            }
        }
        if f.name != info.top_function {
            sites.push(PragmaSite {
                key: SiteKey::FunctionInline {
                    function: f.name.clone(),
                },
                location: f.body_start.clone(),
            });
        }
        sites.push(PragmaSite {
            key: SiteKey::FunctionPipeline {
                function: f.name.clone(),
            },
            location: f.body_start.clone(),
        });
    }
    for a in info.global_arrays() {
        for dim in 1..=a.dims.len() as u32 {
            sites.push(PragmaSite {
                key: SiteKey::ArrayPartition {
                    array: a.reference.clone(),
                    dim,
                },
                location: a.definition.clone(),
            });
        }
    }
    sites
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// The config has no decision for a site of the kernel.
    MissingDecision { site: SiteKey },
    /// The config mentions a site the kernel does not have.
    UnknownSite { site: SiteKey },
    /// Several decisions name the same site.
    DuplicateDecision { site: SiteKey },
    /// The setting's family does not fit the site's kind.
    KindMismatch { site: SiteKey, setting: Setting },
    NonPowerOfTwoFactor { site: SiteKey, factor: u64 },
    /// Unroll factor above the loop's trip count.
    FactorExceedsTripCount { site: SiteKey, factor: u64, trip_count: u64 },
    /// Partition factor not strictly below the dimension extent.
    FactorExceedsExtent { site: SiteKey, factor: u64, extent: u64 },
    /// Unrolling a loop whose iteration count is not compile-time known.
    UnrollOnUnknownTripCount { site: SiteKey },
    /// Partitioning a dimension of extent 1.
    PartitionOfUnitDimension { site: SiteKey },
    /// Rule R1: a loop with a pipelined ancestor loop must not be unrolled.
    UnrollUnderPipelinedAncestor {
        function: String,
        loop_id: String,
        ancestor: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingDecision { site } => write!(f, "no decision for site {site}"),
            Violation::UnknownSite { site } => write!(f, "no such site: {site}"),
            Violation::DuplicateDecision { site } => {
                write!(f, "several decisions for site {site}")
            }
            Violation::KindMismatch { site, setting } => {
                write!(f, "setting '{setting}' does not fit site {site}")
            }
            Violation::NonPowerOfTwoFactor { site, factor } => {
                write!(f, "factor {factor} at {site} is not a power of two (>= 2)")
            }
            Violation::FactorExceedsTripCount { site, factor, trip_count } => {
                write!(f, "unroll factor {factor} exceeds trip count {trip_count} at {site}")
            }
            Violation::FactorExceedsExtent { site, factor, extent } => {
                write!(
                    f,
                    "partition factor {factor} must be below the extent {extent} at {site}"
                )
            }
            Violation::UnrollOnUnknownTripCount { site } => {
                write!(f, "cannot unroll {site}: trip count is unknown")
            }
            Violation::PartitionOfUnitDimension { site } => {
                write!(f, "cannot partition {site}: dimension extent is 1")
            }
            Violation::UnrollUnderPipelinedAncestor { function, loop_id, ancestor } => {
                write!(
                    f,
                    "loop {loop_id} in '{function}' must not be unrolled while its ancestor {ancestor} is pipelined"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn is_power_of_two(n: u64) -> bool {
    n >= 2 && n.is_power_of_two()
}

/// Check a configuration against the kernel structure. Violations are
/// data, not errors; an empty report means the configuration is legal.
pub fn validate_config(config: &PragmaConfig, info: &KernelInfo) -> ValidityReport {
    let sites = enumerate_sites(info);
    let mut violations = Vec::new();

    let mut seen: BTreeMap<&SiteKey, usize> = BTreeMap::new();
    for d in &config.decisions {
        *seen.entry(&d.site).or_default() += 1;
    }
    for (site, n) in &seen {
        if *n > 1 {
            violations.push(Violation::DuplicateDecision { site: (*site).clone() });
        }
        if !sites.iter().any(|s| &s.key == *site) {
            violations.push(Violation::UnknownSite { site: (*site).clone() });
        }
    }
    for s in &sites {
        if !seen.contains_key(&s.key) {
            violations.push(Violation::MissingDecision { site: s.key.clone() });
        }
    }

    for d in &config.decisions {
        let site = d.site.clone();
        match (&d.site, d.setting) {
            (_, Setting::Off) => {}
            (SiteKey::LoopUnroll { function, loop_id }, Setting::Unroll { factor }) => {
                let Some(l) = info.find_loop(function, loop_id) else { continue };
                if !is_power_of_two(factor) {
                    violations.push(Violation::NonPowerOfTwoFactor { site, factor });
                } else {
                    match l.trip_count {
                        TripCount::Known(tc) => {
                            if factor > tc {
                                violations.push(Violation::FactorExceedsTripCount {
                                    site,
                                    factor,
                                    trip_count: tc,
                                });
                            }
                        }
                        TripCount::Unknown => {
                            violations.push(Violation::UnrollOnUnknownTripCount { site });
                        }
                    }
                }
            }
            (SiteKey::LoopPipeline { .. }, Setting::On)
            | (SiteKey::FunctionInline { .. }, Setting::On)
            | (SiteKey::FunctionPipeline { .. }, Setting::On) => {}
            (SiteKey::ArrayPartition { array, dim }, Setting::Partition { kind, factor }) => {
                let Some(a) = info.array(array) else { continue };
                let Some(&extent) = a.dims.get((*dim - 1) as usize) else { continue };
                if extent == 1 {
                    violations.push(Violation::PartitionOfUnitDimension { site });
                } else if kind != PartitionKind::Complete {
                    if !is_power_of_two(factor) {
                        violations.push(Violation::NonPowerOfTwoFactor { site, factor });
                    } else if factor >= extent {
                        violations.push(Violation::FactorExceedsExtent { site, factor, extent });
                    }
                }
            }
            (_, setting) => {
                violations.push(Violation::KindMismatch { site, setting });
            }
        }
    }

    // Rule R1: unrolling below a pipelined ancestor loop is illegal. Loop
    // ids encode the nesting path, so ancestry is a prefix relation.
    for d in &config.decisions {
        let SiteKey::LoopUnroll { function, loop_id } = &d.site else { continue };
        if d.setting.is_off() {
            continue;
        }
        for ancestor in ancestor_ids(loop_id) {
            let pipelined = config.setting(&SiteKey::LoopPipeline {
                function: function.clone(),
                loop_id: ancestor.clone(),
            });
            if pipelined == Some(Setting::On) {
                violations.push(Violation::UnrollUnderPipelinedAncestor {
                    function: function.clone(),
                    loop_id: loop_id.clone(),
                    ancestor,
                });
            }
        }
    }

    ValidityReport { violations }
}

/// Proper ancestors of a path-shaped loop id: `L0.1.2` → [`L0.1`, `L0`].
pub fn ancestor_ids(loop_id: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut id = loop_id;
    while let Some(pos) = id.rfind('.') {
        id = &id[..pos];
        out.push(id.to_string());
    }
    out
}

#[derive(Debug, Error)]
pub enum PragmaError {
    #[error("configuration is invalid: {0}")]
    InvalidConfig(ValidityReport),
    #[error(transparent)]
    Analyze(#[from] AnalyzeError),
    /// A `#pragma HLS` line whose text does not parse as a known directive.
    #[error("{0}")]
    Unparseable(Diagnostic),
    /// A directive that cannot be tied to any site of the kernel.
    #[error("{0}")]
    Unbound(Diagnostic),
    /// Two directives resolve to the same site.
    #[error("{0}")]
    Conflict(Diagnostic),
    /// Two directive lines landed on one location with no defined order;
    /// the fixed kind order should make this unreachable.
    #[error("two directives target the same location with no defined order")]
    InsertionConflict,
}

/// Render the directive line (without trailing newline) for a non-OFF
/// decision.
fn directive_line(site: &SiteKey, setting: Setting) -> String {
    match (site, setting) {
        (SiteKey::LoopUnroll { .. }, Setting::Unroll { factor }) => {
            format!("#pragma HLS unroll factor={factor}")
        }
        (SiteKey::LoopPipeline { .. }, Setting::On)
        | (SiteKey::FunctionPipeline { .. }, Setting::On) => "#pragma HLS pipeline".to_string(),
        (SiteKey::FunctionInline { .. }, Setting::On) => "#pragma HLS inline".to_string(),
        (SiteKey::ArrayPartition { array, dim }, Setting::Partition { kind, factor }) => {
            match kind {
                PartitionKind::Complete => format!(
                    "#pragma HLS array_partition variable={} type=complete dim={dim}",
                    array.name
                ),
                _ => format!(
                    "#pragma HLS array_partition variable={} type={} factor={factor} dim={dim}",
                    array.name,
                    kind.text()
                ),
            }
        }
        _ => unreachable!("directive_line called on a mismatched decision"),
    }
}

/// Emission priority inside one shared insertion point. Function inline
/// precedes function pipeline precedes array partitions; loop pipeline
/// precedes loop unroll.
fn emission_priority(site: &SiteKey) -> u8 {
    match site {
        SiteKey::FunctionInline { .. } => 0,
        SiteKey::FunctionPipeline { .. } => 1,
        SiteKey::ArrayPartition { .. } => 2,
        SiteKey::LoopPipeline { .. } => 0,
        SiteKey::LoopUnroll { .. } => 1,
    }
}

/// Materialize a configuration into annotated sources. Directive lines are
/// inserted at column zero; all original bytes are preserved in order, so
/// deleting the inserted lines restores the input exactly.
pub fn insert_pragmas(
    unit: &SourceUnit,
    info: &KernelInfo,
    config: &PragmaConfig,
) -> Result<SourceUnit, PragmaError> {
    let report = validate_config(config, info);
    if !report.is_ok() {
        return Err(PragmaError::InvalidConfig(report));
    }

    struct Insertion {
        file: String,
        at: usize,
        priority: u8,
        line: String,
    }

    let mut insertions: Vec<Insertion> = Vec::new();
    for d in &config.decisions {
        if d.setting.is_off() {
            continue;
        }
        let (file, at) = match &d.site {
            SiteKey::LoopUnroll { function, loop_id }
            | SiteKey::LoopPipeline { function, loop_id } => {
                let l = info
                    .find_loop(function, loop_id)
                    .expect("validated config references a known loop");
                token_anchor(unit, &l.body_start)
            }
            SiteKey::FunctionInline { function } | SiteKey::FunctionPipeline { function } => {
                let f = info
                    .function(function)
                    .expect("validated config references a known function");
                token_anchor(unit, &f.body_start)
            }
            SiteKey::ArrayPartition { array, .. } => {
                let a = info
                    .array(array)
                    .expect("validated config references a known array");
                match &a.anchor {
                    ArrayAnchor::FunctionBody => {
                        let scope = a
                            .reference
                            .function
                            .as_deref()
                            .expect("parameter arrays have a function scope");
                        let f = info.function(scope).expect("array scope is a unit function");
                        token_anchor(unit, &f.body_start)
                    }
                    ArrayAnchor::AfterDecl { offset } => {
                        decl_anchor(unit, &a.definition.file, *offset)
                    }
                }
            }
        };
        insertions.push(Insertion {
            file,
            at,
            priority: emission_priority(&d.site),
            line: directive_line(&d.site, d.setting),
        });
    }

    // Group lines landing on one insertion point, ordered by priority and
    // then by site order (the iteration order above, kept by stable sort).
    let mut groups: BTreeMap<(String, usize), Vec<(u8, String)>> = BTreeMap::new();
    for ins in insertions {
        groups
            .entry((ins.file, ins.at))
            .or_default()
            .push((ins.priority, ins.line));
    }

    let mut out = unit.clone();
    let mut per_file: BTreeMap<String, Vec<(usize, Vec<String>)>> = BTreeMap::new();
    for ((file, at), mut lines) in groups {
        lines.sort_by_key(|(p, _)| *p);
        per_file
            .entry(file)
            .or_default()
            .push((at, lines.into_iter().map(|(_, l)| l).collect()));
    }
    for (file, mut spots) in per_file {
        let content = &mut out
            .file_mut(&file)
            .expect("anchors name unit files")
            .content;
        spots.sort_by_key(|(at, _)| std::cmp::Reverse(*at));
        for (at, lines) in spots {
            let needs_break = at > 0 && content.as_bytes()[at - 1] != b'\n';
            let mut block = String::new();
            if needs_break {
                block.push('\n');
            }
            for l in lines {
                block.push_str(&l);
                block.push('\n');
            }
            content.insert_str(at, &block);
        }
    }
    Ok(out)
}

/// Insertion point for a directive attached to the token at `loc`: the
/// start of the token's line when only whitespace precedes it, otherwise
/// the token itself (the rewriter then breaks the line there).
fn token_anchor(unit: &SourceUnit, loc: &Location) -> (String, usize) {
    let content = &unit.file(&loc.file).expect("location names a unit file").content;
    let bytes = content.as_bytes();
    let line_start = content[..loc.offset]
        .rfind('\n')
        .map(|p| p + 1)
        .unwrap_or(0);
    let only_ws = bytes[line_start..loc.offset]
        .iter()
        .all(|b| *b == b' ' || *b == b'\t');
    if only_ws {
        (loc.file.clone(), line_start)
    } else {
        (loc.file.clone(), loc.offset)
    }
}

/// Insertion point just after a declaration's `;` at byte `offset`:
/// directly behind the newline when one follows, else at the offset with a
/// line break supplied by the rewriter.
fn decl_anchor(unit: &SourceUnit, file: &str, offset: usize) -> (String, usize) {
    let content = &unit.file(file).expect("anchor names a unit file").content;
    if content.as_bytes().get(offset) == Some(&b'\n') {
        (file.to_string(), offset + 1)
    } else {
        (file.to_string(), offset)
    }
}

/// Count `#pragma HLS` lines across a unit; the dataset writer reports
/// this as the design's pragma number.
pub fn count_pragma_lines(unit: &SourceUnit) -> usize {
    unit.files()
        .iter()
        .map(|f| {
            f.content
                .lines()
                .filter(|l| l.trim_start().starts_with("#pragma HLS"))
                .count()
        })
        .sum()
}

/// Result of reading the directives back out of an annotated unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub config: PragmaConfig,
    pub info: KernelInfo,
}

#[derive(Debug, PartialEq)]
enum ParsedDirective {
    Unroll { factor: u64 },
    Pipeline,
    Inline,
    Partition {
        variable: String,
        kind: PartitionKind,
        factor: Option<u64>,
        dim: u32,
    },
    /// A pragma that is not an HLS directive; transparent to extraction.
    Foreign,
}

fn parse_directive(text: &str) -> Result<ParsedDirective, String> {
    let mut words = text.split_whitespace();
    match words.next() {
        Some("HLS") => {}
        _ => return Ok(ParsedDirective::Foreign),
    }
    let Some(name) = words.next() else {
        return Err("missing directive name after 'HLS'".to_string());
    };
    let mut args: Vec<(String, String)> = Vec::new();
    for w in words {
        let Some((k, v)) = w.split_once('=') else {
            return Err(format!("malformed argument '{w}' (expected key=value)"));
        };
        args.push((k.to_string(), v.to_string()));
    }
    let take = |key: &str, args: &mut Vec<(String, String)>| -> Option<String> {
        let pos = args.iter().position(|(k, _)| k == key)?;
        Some(args.remove(pos).1)
    };
    let mut args = args;
    let parsed = match name {
        "unroll" => {
            let factor = take("factor", &mut args)
                .ok_or_else(|| "unroll requires factor=<n>".to_string())?
                .parse::<u64>()
                .map_err(|_| "unroll factor must be a positive integer".to_string())?;
            ParsedDirective::Unroll { factor }
        }
        "pipeline" => ParsedDirective::Pipeline,
        "inline" => ParsedDirective::Inline,
        "array_partition" => {
            let variable = take("variable", &mut args)
                .ok_or_else(|| "array_partition requires variable=<name>".to_string())?;
            let kind = match take("type", &mut args).as_deref() {
                Some("cyclic") => PartitionKind::Cyclic,
                Some("block") => PartitionKind::Block,
                Some("complete") => PartitionKind::Complete,
                Some(other) => return Err(format!("unknown partition type '{other}'")),
                None => return Err("array_partition requires type=<t>".to_string()),
            };
            let factor = match take("factor", &mut args) {
                Some(f) => Some(
                    f.parse::<u64>()
                        .map_err(|_| "partition factor must be a positive integer".to_string())?,
                ),
                None => None,
            };
            let dim = take("dim", &mut args)
                .ok_or_else(|| "array_partition requires dim=<d>".to_string())?
                .parse::<u32>()
                .map_err(|_| "partition dim must be a positive integer".to_string())?;
            match (kind, factor) {
                (PartitionKind::Complete, Some(_)) => {
                    return Err("complete partition takes no factor".to_string())
                }
                (PartitionKind::Complete, None) | (_, Some(_)) => {}
                (_, None) => return Err("cyclic/block partition requires factor=<n>".to_string()),
            }
            ParsedDirective::Partition {
                variable,
                kind,
                factor,
                dim,
            }
        }
        other => return Err(format!("unknown directive '{other}'")),
    };
    if let Some((k, _)) = args.first() {
        return Err(format!("unsupported argument '{k}' for '{name}'"));
    }
    Ok(parsed)
}

/// Read the directive lines of an annotated unit back into the full
/// configuration over the kernel's sites (unmentioned sites are OFF).
///
/// This inverts `insert_pragmas` exactly; it also accepts hand-annotated
/// units as long as every directive binds to a known site.
pub fn extract_config(unit: &SourceUnit) -> Result<Extraction, PragmaError> {
    let tree = analyzer::parse_source(unit)?;
    let info = analyzer::extract_info(&tree, unit.top_hint())?;
    let sites = enumerate_sites(&info);
    let mut found: BTreeMap<SiteKey, (Setting, Location)> = BTreeMap::new();

    for ctx in pragma_contexts(&tree) {
        let parsed = parse_directive(&ctx.text).map_err(|msg| {
            PragmaError::Unparseable(Diagnostic::new(ctx.location.clone(), "pragma", msg))
        })?;
        let (key, setting) = match parsed {
            ParsedDirective::Foreign => continue,
            ParsedDirective::Unroll { factor } => {
                let Some(loop_id) = ctx.loop_id.clone() else {
                    return Err(PragmaError::Unbound(Diagnostic::new(
                        ctx.location.clone(),
                        "pragma",
                        "unroll directive outside any loop body".to_string(),
                    )));
                };
                (
                    SiteKey::LoopUnroll {
                        function: ctx.function.clone(),
                        loop_id,
                    },
                    Setting::Unroll { factor },
                )
            }
            ParsedDirective::Pipeline => match ctx.loop_id.clone() {
                Some(loop_id) => (
                    SiteKey::LoopPipeline {
                        function: ctx.function.clone(),
                        loop_id,
                    },
                    Setting::On,
                ),
                None => (
                    SiteKey::FunctionPipeline {
                        function: ctx.function.clone(),
                    },
                    Setting::On,
                ),
            },
            ParsedDirective::Inline => (
                SiteKey::FunctionInline {
                    function: ctx.function.clone(),
                },
                Setting::On,
            ),
            ParsedDirective::Partition {
                variable,
                kind,
                factor,
                dim,
            } => {
                let Some(a) = info.resolve_array(&ctx.function, &variable) else {
                    return Err(PragmaError::Unbound(Diagnostic::new(
                        ctx.location.clone(),
                        "pragma",
                        format!("array_partition names unknown array '{variable}'"),
                    )));
                };
                (
                    SiteKey::ArrayPartition {
                        array: a.reference.clone(),
                        dim,
                    },
                    Setting::Partition {
                        kind,
                        factor: factor.unwrap_or(0),
                    },
                )
            }
        };
        if !sites.iter().any(|s| s.key == key) {
            return Err(PragmaError::Unbound(Diagnostic::new(
                ctx.location.clone(),
                "pragma",
                format!("directive does not match any site: {key}"),
            )));
        }
        if let Some((_, first)) = found.get(&key) {
            return Err(PragmaError::Conflict(Diagnostic::new(
                ctx.location.clone(),
                "pragma",
                format!("site {key} already set at {first}"),
            )));
        }
        found.insert(key, (setting, ctx.location.clone()));
    }

    let decisions = sites
        .iter()
        .map(|s| PragmaDecision {
            site: s.key.clone(),
            setting: found.get(&s.key).map(|(v, _)| *v).unwrap_or(Setting::Off),
        })
        .collect();
    Ok(Extraction {
        config: PragmaConfig { decisions },
        info,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::analyze;
    use crate::source::SourceFile;

    fn setup(src: &str) -> (SourceUnit, KernelInfo, Vec<PragmaSite>) {
        let unit = SourceUnit::single("k.c", src);
        let (_, info) = analyze(&unit).expect("analyze");
        let sites = enumerate_sites(&info);
        (unit, info, sites)
    }

    const TOY: &str = "void top(int a[4]) {\n    for (int i = 0; i < 4; i++) {\n        a[i] = a[i] * 2;\n    }\n}\n";

    #[test]
    fn four_sites_for_single_loop_single_array_kernel() {
        let (_, _, sites) = setup(TOY);
        let keys: Vec<String> = sites.iter().map(|s| s.key.canonical()).collect();
        assert_eq!(
            keys,
            [
                "loop:top:L0:unroll",
                "loop:top:L0:pipeline",
                "array:top:a:d1",
                "fn:top:pipeline",
            ]
        );
    }

    #[test]
    fn zero_structure_kernel_has_only_function_pipeline() {
        let (_, _, sites) = setup("void top(int x) {\n    x = x + 1;\n}\n");
        let keys: Vec<String> = sites.iter().map(|s| s.key.canonical()).collect();
        assert_eq!(keys, ["fn:top:pipeline"]);
    }

    #[test]
    fn two_d_array_contributes_one_site_per_dimension() {
        let (_, _, sites) = setup("void top(int m[4][8]) {\n    m[0][0] = 1;\n}\n");
        let partition: Vec<String> = sites
            .iter()
            .filter(|s| matches!(s.key, SiteKey::ArrayPartition { .. }))
            .map(|s| s.key.canonical())
            .collect();
        assert_eq!(partition, ["array:top:m:d1", "array:top:m:d2"]);
    }

    #[test]
    fn helper_functions_get_inline_sites_but_top_does_not() {
        let src = "void helper(int a[4]) {\n    a[0] = 1;\n}\nvoid top(int a[4]) {\n    helper(a);\n}\n";
        let (_, _, sites) = setup(src);
        let keys: Vec<String> = sites.iter().map(|s| s.key.canonical()).collect();
        assert_eq!(
            keys,
            [
                "array:helper:a:d1",
                "fn:helper:inline",
                "fn:helper:pipeline",
                "array:top:a:d1",
                "fn:top:pipeline",
            ]
        );
    }

    #[test]
    fn all_off_config_is_valid_baseline() {
        let (_, info, sites) = setup(TOY);
        let config = PragmaConfig::all_off(&sites);
        assert!(validate_config(&config, &info).is_ok());
        assert_eq!(config.pragma_count(), 0);
    }

    #[test]
    fn r1_flags_unroll_under_pipelined_ancestor() {
        let src = "void top(int a[4][4]) {\n    for (int i = 0; i < 4; i++) {\n        for (int j = 0; j < 4; j++) {\n            a[i][j] = 0;\n        }\n    }\n}\n";
        let (_, info, sites) = setup(src);
        let config = PragmaConfig::all_off(&sites)
            .with(
                &SiteKey::LoopPipeline { function: "top".into(), loop_id: "L0".into() },
                Setting::On,
            )
            .with(
                &SiteKey::LoopUnroll { function: "top".into(), loop_id: "L0.0".into() },
                Setting::Unroll { factor: 2 },
            );
        let report = validate_config(&config, &info);
        assert_eq!(
            report.violations,
            vec![Violation::UnrollUnderPipelinedAncestor {
                function: "top".into(),
                loop_id: "L0.0".into(),
                ancestor: "L0".into(),
            }]
        );
        // Pipelining the loop itself alongside its own unroll stays legal.
        let own = PragmaConfig::all_off(&sites)
            .with(
                &SiteKey::LoopPipeline { function: "top".into(), loop_id: "L0.0".into() },
                Setting::On,
            )
            .with(
                &SiteKey::LoopUnroll { function: "top".into(), loop_id: "L0.0".into() },
                Setting::Unroll { factor: 2 },
            );
        assert!(validate_config(&own, &info).is_ok());
    }

    #[test]
    fn factor_rules_are_enforced() {
        let (_, info, sites) = setup(TOY);
        let unroll = SiteKey::LoopUnroll { function: "top".into(), loop_id: "L0".into() };
        let part = SiteKey::ArrayPartition { array: ArrayRef::local("top", "a"), dim: 1 };

        let cfg = PragmaConfig::all_off(&sites).with(&unroll, Setting::Unroll { factor: 3 });
        assert_eq!(
            validate_config(&cfg, &info).violations,
            vec![Violation::NonPowerOfTwoFactor { site: unroll.clone(), factor: 3 }]
        );

        let cfg = PragmaConfig::all_off(&sites).with(&unroll, Setting::Unroll { factor: 8 });
        assert_eq!(
            validate_config(&cfg, &info).violations,
            vec![Violation::FactorExceedsTripCount { site: unroll.clone(), factor: 8, trip_count: 4 }]
        );

        let cfg = PragmaConfig::all_off(&sites).with(
            &part,
            Setting::Partition { kind: PartitionKind::Cyclic, factor: 4 },
        );
        assert_eq!(
            validate_config(&cfg, &info).violations,
            vec![Violation::FactorExceedsExtent { site: part.clone(), factor: 4, extent: 4 }]
        );

        let cfg = PragmaConfig::all_off(&sites).with(&part, Setting::On);
        assert_eq!(
            validate_config(&cfg, &info).violations,
            vec![Violation::KindMismatch { site: part.clone(), setting: Setting::On }]
        );
    }

    #[test]
    fn unknown_trip_count_forbids_unroll() {
        let src = "void top(int a[8], int n) {\n    for (int i = 0; i < n; i++) {\n        a[i] = 0;\n    }\n}\n";
        let (_, info, sites) = setup(src);
        let unroll = SiteKey::LoopUnroll { function: "top".into(), loop_id: "L0".into() };
        let cfg = PragmaConfig::all_off(&sites).with(&unroll, Setting::Unroll { factor: 2 });
        assert_eq!(
            validate_config(&cfg, &info).violations,
            vec![Violation::UnrollOnUnknownTripCount { site: unroll }]
        );
    }

    #[test]
    fn missing_and_unknown_sites_are_flagged() {
        let (_, info, sites) = setup(TOY);
        let mut config = PragmaConfig::all_off(&sites);
        config.decisions.remove(0);
        config.decisions.push(PragmaDecision {
            site: SiteKey::FunctionInline { function: "ghost".into() },
            setting: Setting::Off,
        });
        let report = validate_config(&config, &info);
        assert!(report
            .violations
            .contains(&Violation::MissingDecision {
                site: SiteKey::LoopUnroll { function: "top".into(), loop_id: "L0".into() }
            }));
        assert!(report
            .violations
            .contains(&Violation::UnknownSite {
                site: SiteKey::FunctionInline { function: "ghost".into() }
            }));
    }

    #[test]
    fn insert_all_off_is_identity() {
        let (unit, info, sites) = setup(TOY);
        let out = insert_pragmas(&unit, &info, &PragmaConfig::all_off(&sites)).unwrap();
        assert_eq!(out, unit);
    }

    #[test]
    fn insert_unroll_lands_on_first_body_line() {
        let (unit, info, sites) = setup(TOY);
        let config = PragmaConfig::all_off(&sites).with(
            &SiteKey::LoopUnroll { function: "top".into(), loop_id: "L0".into() },
            Setting::Unroll { factor: 2 },
        );
        let out = insert_pragmas(&unit, &info, &config).unwrap();
        let lines: Vec<&str> = out.files()[0].content.lines().collect();
        assert_eq!(lines[2], "#pragma HLS unroll factor=2");
        // Original lines survive byte-identically around the insertion.
        assert_eq!(lines[1], "    for (int i = 0; i < 4; i++) {");
        assert_eq!(lines[3], "        a[i] = a[i] * 2;");
        // Independent re-analysis recovers the factor.
        let ext = extract_config(&out).unwrap();
        assert_eq!(
            ext.config.setting(&SiteKey::LoopUnroll {
                function: "top".into(),
                loop_id: "L0".into()
            }),
            Some(Setting::Unroll { factor: 2 })
        );
    }

    #[test]
    fn insert_partition_lands_after_declaration() {
        let src = "void top(int n) {\n    int buf[8];\n    for (int i = 0; i < 8; i++) {\n        buf[i] = n;\n    }\n}\n";
        let (unit, info, sites) = setup(src);
        let config = PragmaConfig::all_off(&sites).with(
            &SiteKey::ArrayPartition { array: ArrayRef::local("top", "buf"), dim: 1 },
            Setting::Partition { kind: PartitionKind::Cyclic, factor: 2 },
        );
        let out = insert_pragmas(&unit, &info, &config).unwrap();
        let lines: Vec<&str> = out.files()[0].content.lines().collect();
        assert_eq!(lines[1], "    int buf[8];");
        assert_eq!(
            lines[2],
            "#pragma HLS array_partition variable=buf type=cyclic factor=2 dim=1"
        );
        let ext = extract_config(&out).unwrap();
        assert_eq!(ext.config.pragma_count(), 1);
    }

    #[test]
    fn shared_anchor_emission_order_is_pinned() {
        let src = "void helper(short xs[16]) {\n    xs[0] = 1;\n}\nvoid top(short xs[16]) {\n    helper(xs);\n}\n";
        let (unit, info, sites) = setup(src);
        let config = PragmaConfig::all_off(&sites)
            .with(
                &SiteKey::ArrayPartition { array: ArrayRef::local("helper", "xs"), dim: 1 },
                Setting::complete(),
            )
            .with(&SiteKey::FunctionInline { function: "helper".into() }, Setting::On)
            .with(&SiteKey::FunctionPipeline { function: "helper".into() }, Setting::On);
        let out = insert_pragmas(&unit, &info, &config).unwrap();
        let lines: Vec<&str> = out.files()[0].content.lines().collect();
        assert_eq!(
            &lines[1..4],
            [
                "#pragma HLS inline",
                "#pragma HLS pipeline",
                "#pragma HLS array_partition variable=xs type=complete dim=1",
            ]
        );
    }

    #[test]
    fn loop_anchor_emits_pipeline_before_unroll() {
        let (unit, info, sites) = setup(TOY);
        let config = PragmaConfig::all_off(&sites)
            .with(
                &SiteKey::LoopUnroll { function: "top".into(), loop_id: "L0".into() },
                Setting::Unroll { factor: 4 },
            )
            .with(
                &SiteKey::LoopPipeline { function: "top".into(), loop_id: "L0".into() },
                Setting::On,
            );
        let out = insert_pragmas(&unit, &info, &config).unwrap();
        let lines: Vec<&str> = out.files()[0].content.lines().collect();
        assert_eq!(lines[2], "#pragma HLS pipeline");
        assert_eq!(lines[3], "#pragma HLS unroll factor=4");
        assert_eq!(count_pragma_lines(&out), config.pragma_count());
    }

    #[test]
    fn deleting_directive_lines_restores_the_input() {
        let src = "void top(int a[8]) {\n    int t[4];\n    for (int i = 0; i < 8; i++) {\n        if (i < 4) { t[i % 4] = a[i]; }\n        a[i] = t[i % 4] + 1;\n    }\n}\n";
        let (unit, info, sites) = setup(src);
        let config = PragmaConfig::all_off(&sites)
            .with(
                &SiteKey::LoopPipeline { function: "top".into(), loop_id: "L0".into() },
                Setting::On,
            )
            .with(
                &SiteKey::ArrayPartition { array: ArrayRef::local("top", "a"), dim: 1 },
                Setting::Partition { kind: PartitionKind::Block, factor: 2 },
            )
            .with(
                &SiteKey::ArrayPartition { array: ArrayRef::local("top", "t"), dim: 1 },
                Setting::complete(),
            )
            .with(&SiteKey::FunctionPipeline { function: "top".into() }, Setting::On);
        let out = insert_pragmas(&unit, &info, &config).unwrap();
        let stripped: String = out.files()[0]
            .content
            .lines()
            .filter(|l| !l.starts_with("#pragma HLS"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert_eq!(stripped, src);
        assert_eq!(count_pragma_lines(&out), 4);
    }

    #[test]
    fn extract_inverts_insert_for_a_mixed_config() {
        let src = "void helper(int b[16]) {\n    for (int i = 0; i < 16; i++) {\n        b[i] = b[i] + 1;\n    }\n}\nvoid top(int a[16][2], int b[16]) {\n    helper(b);\n    for (int i = 0; i < 16; i++) {\n        for (int j = 0; j < 2; j++) {\n            a[i][j] = b[i];\n        }\n    }\n}\n";
        let (unit, info, sites) = setup(src);
        let config = PragmaConfig::all_off(&sites)
            .with(
                &SiteKey::LoopUnroll { function: "helper".into(), loop_id: "L0".into() },
                Setting::Unroll { factor: 8 },
            )
            .with(&SiteKey::FunctionInline { function: "helper".into() }, Setting::On)
            .with(
                &SiteKey::LoopPipeline { function: "top".into(), loop_id: "L0".into() },
                Setting::On,
            )
            .with(
                &SiteKey::ArrayPartition { array: ArrayRef::local("top", "a"), dim: 2 },
                Setting::complete(),
            )
            .with(
                &SiteKey::ArrayPartition { array: ArrayRef::local("top", "b"), dim: 1 },
                Setting::Partition { kind: PartitionKind::Cyclic, factor: 4 },
            );
        let annotated = insert_pragmas(&unit, &info, &config).unwrap();
        let ext = extract_config(&annotated).unwrap();
        assert_eq!(ext.config, config);
        assert!(validate_config(&ext.config, &ext.info).is_ok());
    }

    #[test]
    fn extract_recovers_file_scope_partition_directives() {
        // Partition lines for global arrays land at file scope, outside
        // every function body; extraction must still bind them.
        let src = "int lut_table[16];\n\nvoid top(int a[4]) {\n    for (int i = 0; i < 4; i++) {\n        a[i] = a[i] + lut_table[i];\n    }\n}\n";
        let (unit, info, sites) = setup(src);
        let config = PragmaConfig::all_off(&sites).with(
            &SiteKey::ArrayPartition { array: ArrayRef::global("lut_table"), dim: 1 },
            Setting::Partition { kind: PartitionKind::Block, factor: 2 },
        );
        let annotated = insert_pragmas(&unit, &info, &config).unwrap();
        let text = &annotated.files()[0].content;
        assert!(
            text.contains("int lut_table[16];\n#pragma HLS array_partition variable=lut_table type=block factor=2 dim=1\n"),
            "{text}"
        );
        let ext = extract_config(&annotated).unwrap();
        assert_eq!(ext.config, config);
    }

    #[test]
    fn extraction_rejects_duplicates_and_unbound_directives() {
        let dup = SourceUnit::single(
            "k.c",
            "void top(int a[4]) {\n    for (int i = 0; i < 4; i++) {\n#pragma HLS unroll factor=2\n#pragma HLS unroll factor=4\n        a[i] = 0;\n    }\n}\n",
        );
        assert!(matches!(extract_config(&dup), Err(PragmaError::Conflict(_))));

        let unbound = SourceUnit::single(
            "k.c",
            "void top(int a[4]) {\n#pragma HLS unroll factor=2\n    a[0] = 1;\n}\n",
        );
        assert!(matches!(extract_config(&unbound), Err(PragmaError::Unbound(_))));

        let bad_dim = SourceUnit::single(
            "k.c",
            "void top(int a[4]) {\n#pragma HLS array_partition variable=a type=cyclic factor=2 dim=3\n    a[0] = 1;\n}\n",
        );
        assert!(matches!(extract_config(&bad_dim), Err(PragmaError::Unbound(_))));
    }

    #[test]
    fn foreign_pragmas_are_transparent() {
        let unit = SourceUnit::single(
            "k.c",
            "void top(int a[4]) {\n#pragma once\n    for (int i = 0; i < 4; i++) {\n        a[i] = 0;\n    }\n}\n",
        );
        let ext = extract_config(&unit).unwrap();
        assert_eq!(ext.config.pragma_count(), 0);
    }

    #[test]
    fn multi_file_insertion_touches_the_right_file() {
        let unit = SourceUnit::new(vec![
            SourceFile::new(
                "top.c",
                "#include \"helper.c\"\nvoid top(int a[8]) {\n    helper(a);\n}\n",
            ),
            SourceFile::new(
                "helper.c",
                "void helper(int a[8]) {\n    for (int i = 0; i < 8; i++) {\n        a[i] = i;\n    }\n}\n",
            ),
        ])
        .unwrap();
        let (_, info) = analyze(&unit).expect("analyze");
        let sites = enumerate_sites(&info);
        let config = PragmaConfig::all_off(&sites).with(
            &SiteKey::LoopPipeline { function: "helper".into(), loop_id: "L0".into() },
            Setting::On,
        );
        let out = insert_pragmas(&unit, &info, &config).unwrap();
        assert_eq!(out.file("top.c"), unit.file("top.c"));
        assert!(out.file("helper.c").unwrap().content.contains("#pragma HLS pipeline"));
        let ext = extract_config(&out).unwrap();
        assert_eq!(ext.config, config);
    }

    #[test]
    fn canonical_config_text_lists_decisions_in_site_order() {
        let (_, _, sites) = setup(TOY);
        let config = PragmaConfig::all_off(&sites).with(
            &SiteKey::LoopUnroll { function: "top".into(), loop_id: "L0".into() },
            Setting::Unroll { factor: 2 },
        );
        assert_eq!(
            config.canonical_text(),
            "loop:top:L0:unroll=u2 loop:top:L0:pipeline=off array:top:a:d1=off fn:top:pipeline=off"
        );
    }
}
