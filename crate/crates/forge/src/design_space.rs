//! The design tree over a kernel's tunable sites and the exhaustive
//! depth-first enumeration of its legal configurations.
//!
//! Option lists are fixed per site; the nesting rule (no unroll beneath a
//! pipelined ancestor loop) is enforced during traversal, so every
//! enumerated leaf is a valid configuration. Oversized trees can
//! additionally be pruned down to configurations whose unroll factors
//! agree with the partition factors of the arrays the loop indexes.

use std::fmt::Write as _;

use crate::analyzer::{KernelInfo, TripCount};
use crate::pragma::{
    ancestor_ids, enumerate_sites, PartitionKind, PragmaConfig, PragmaDecision, PragmaSite,
    Setting, SiteKey,
};

/// All powers of two `f` with `2 <= f <= n`, ascending.
pub fn generate_factors(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut f = 2u64;
    while f <= n {
        out.push(f);
        f *= 2;
    }
    out
}

/// The option list of one site, OFF always first.
///
/// Loop unroll offers the factors up to the trip count (none when the trip
/// count is unknown). A partition site of extent E offers cyclic and block
/// at each factor strictly below E, then complete; an extent-1 dimension
/// keeps its site but OFF is its only option.
pub fn site_options(site: &SiteKey, info: &KernelInfo) -> Vec<Setting> {
    match site {
        SiteKey::LoopUnroll { function, loop_id } => {
            let mut opts = vec![Setting::Off];
            let l = info
                .find_loop(function, loop_id)
                .expect("site references a known loop");
            if let TripCount::Known(tc) = l.trip_count {
                opts.extend(generate_factors(tc).into_iter().map(|factor| Setting::Unroll { factor }));
            }
            opts
        }
        SiteKey::LoopPipeline { .. }
        | SiteKey::FunctionInline { .. }
        | SiteKey::FunctionPipeline { .. } => vec![Setting::Off, Setting::On],
        SiteKey::ArrayPartition { array, dim } => {
            let a = info.array(array).expect("site references a known array");
            let extent = a.dims[(*dim - 1) as usize];
            let mut opts = vec![Setting::Off];
            if extent > 1 {
                for factor in generate_factors(extent) {
                    if factor < extent {
                        opts.push(Setting::Partition { kind: PartitionKind::Cyclic, factor });
                        opts.push(Setting::Partition { kind: PartitionKind::Block, factor });
                    }
                }
                opts.push(Setting::complete());
            }
            opts
        }
    }
}

/// The full decision structure of a kernel: sites in enumeration order,
/// their option lists, and the cross-site constraint tables.
#[derive(Debug, Clone)]
pub struct DesignTree {
    sites: Vec<PragmaSite>,
    options: Vec<Vec<Setting>>,
    /// Per site: for an unroll site, the indices of the pipeline sites of
    /// its proper ancestor loops (always earlier in site order).
    ancestor_pipelines: Vec<Vec<usize>>,
    /// Per site: for a partition site, the indices of the unroll sites of
    /// loops whose induction variable indexes this array dimension.
    bound_unrolls: Vec<Vec<usize>>,
}

/// Trees whose leaf count exceeds this are "oversized": the
/// equivalent-factor pruning rule applies to them when requested.
pub const PRUNE_TRIGGER: u128 = 4096;

impl DesignTree {
    pub fn sites(&self) -> &[PragmaSite] {
        &self.sites
    }

    pub fn options(&self) -> &[Vec<Setting>] {
        &self.options
    }

    pub fn site_index(&self, key: &SiteKey) -> Option<usize> {
        self.sites.iter().position(|s| &s.key == key)
    }

    /// Assemble a configuration from one setting per site, in site order.
    pub fn config(&self, settings: &[Setting]) -> PragmaConfig {
        assert_eq!(settings.len(), self.sites.len(), "one setting per site");
        PragmaConfig {
            decisions: self
                .sites
                .iter()
                .zip(settings)
                .map(|(s, &setting)| PragmaDecision { site: s.key.clone(), setting })
                .collect(),
        }
    }

    /// The options open at site `idx` given the settings already chosen
    /// for earlier sites: the full list, or just OFF for an unroll site
    /// under a pipelined ancestor. Entries of `chosen` at or past `idx`
    /// are ignored.
    pub fn constrained_options(&self, idx: usize, chosen: &[Setting]) -> &[Setting] {
        let pipelined = self.ancestor_pipelines[idx].iter().any(|&p| chosen[p] == Setting::On);
        if pipelined {
            &self.options[idx][..1]
        } else {
            &self.options[idx]
        }
    }

    /// Whether a full assignment respects the nesting rule: a loop with a
    /// pipelined ancestor keeps unroll OFF.
    pub fn satisfies_r1(&self, settings: &[Setting]) -> bool {
        self.ancestor_pipelines.iter().enumerate().all(|(i, pipes)| {
            settings[i].is_off() || pipes.iter().all(|&p| settings[p] != Setting::On)
        })
    }

    /// Number of legal leaves (nesting rule applied, no pruning), without
    /// enumerating them. Saturates at `u128::MAX`.
    pub fn leaf_count(&self) -> u128 {
        // Unroll option counts depend on whether an ancestor pipeline is
        // ON, so loops multiply per nest with that flag threaded through;
        // all other sites contribute independent factors.
        fn loop_product(tree: &DesignTree, unroll_idx: usize, ancestor_on: bool) -> u128 {
            let unroll_opts = if ancestor_on {
                1
            } else {
                tree.options[unroll_idx].len() as u128
            };
            let children = tree.children_of(unroll_idx);
            let mut off_branch = 1u128;
            let mut on_branch = 1u128;
            for c in children {
                off_branch = off_branch.saturating_mul(loop_product(tree, c, ancestor_on));
                on_branch = on_branch.saturating_mul(loop_product(tree, c, true));
            }
            unroll_opts.saturating_mul(off_branch.saturating_add(on_branch))
        }

        let mut total = 1u128;
        for (i, site) in self.sites.iter().enumerate() {
            match &site.key {
                SiteKey::LoopUnroll { loop_id, .. } => {
                    if !loop_id.contains('.') {
                        total = total.saturating_mul(loop_product(self, i, false));
                    }
                }
                SiteKey::LoopPipeline { .. } => {}
                _ => total = total.saturating_mul(self.options[i].len() as u128),
            }
        }
        total
    }

    /// Unroll-site indices of the direct child loops of the loop at
    /// `unroll_idx` (an unroll site).
    fn children_of(&self, unroll_idx: usize) -> Vec<usize> {
        let SiteKey::LoopUnroll { function, loop_id } = &self.sites[unroll_idx].key else {
            unreachable!("children_of takes an unroll site");
        };
        let prefix = format!("{loop_id}.");
        self.sites
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match &s.key {
                SiteKey::LoopUnroll { function: f, loop_id: id }
                    if f == function
                        && id.starts_with(&prefix)
                        && !id[prefix.len()..].contains('.') =>
                {
                    Some(i)
                }
                _ => None,
            })
            .collect()
    }
}

/// Build the design tree for a kernel. Pure; the same kernel always yields
/// the same tree.
pub fn build_design_tree(info: &KernelInfo) -> DesignTree {
    let sites = enumerate_sites(info);
    let options: Vec<Vec<Setting>> = sites.iter().map(|s| site_options(&s.key, info)).collect();

    let index_of = |key: &SiteKey| sites.iter().position(|s| &s.key == key);

    let mut ancestor_pipelines = vec![Vec::new(); sites.len()];
    let mut bound_unrolls = vec![Vec::new(); sites.len()];
    for (i, site) in sites.iter().enumerate() {
        let SiteKey::LoopUnroll { function, loop_id } = &site.key else { continue };
        for ancestor in ancestor_ids(loop_id) {
            let pipe = SiteKey::LoopPipeline { function: function.clone(), loop_id: ancestor };
            ancestor_pipelines[i].push(index_of(&pipe).expect("ancestor loop has a pipeline site"));
        }
        let l = info.find_loop(function, loop_id).expect("unroll site references a known loop");
        for (array, dim) in &l.indexed_dims {
            let part = SiteKey::ArrayPartition { array: array.clone(), dim: *dim };
            let j = index_of(&part).expect("indexed dimension has a partition site");
            bound_unrolls[j].push(i);
        }
    }

    DesignTree { sites, options, ancestor_pipelines, bound_unrolls }
}

/// How far an enumeration may run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignLimit {
    Bounded(usize),
    Unbounded,
}

/// Enumeration controls. The default caps a kernel at 100,000 designs
/// (large spaces must opt into `Unbounded` explicitly) and enables
/// equivalent-factor pruning, which only fires on oversized trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationBudget {
    pub max_designs: DesignLimit,
    pub prune_equivalent: bool,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        Self { max_designs: DesignLimit::Bounded(100_000), prune_equivalent: true }
    }
}

impl EnumerationBudget {
    pub fn unbounded() -> Self {
        Self { max_designs: DesignLimit::Unbounded, ..Self::default() }
    }
}

/// Result of an enumeration walk.
#[derive(Debug, Clone)]
pub struct Enumeration {
    /// Legal configurations in depth-first order; index is the design id.
    pub designs: Vec<PragmaConfig>,
    /// True when the walk stopped at the budget with leaves still unseen.
    pub truncated: bool,
    /// True when the equivalent-factor rule filtered the walk.
    pub pruned: bool,
    /// Legal leaf count of the unpruned tree.
    pub total_leaves: u128,
}

/// Enumerate legal configurations in deterministic depth-first order:
/// sites in enumeration order, options in their listed order, so the
/// all-OFF baseline is always design 0.
pub fn enumerate_designs(tree: &DesignTree, budget: &EnumerationBudget) -> Enumeration {
    let total_leaves = tree.leaf_count();
    let prune = budget.prune_equivalent && total_leaves > PRUNE_TRIGGER;
    let cap = match budget.max_designs {
        DesignLimit::Bounded(n) => {
            assert!(n >= 1, "bounded budget must allow at least one design");
            n
        }
        DesignLimit::Unbounded => usize::MAX,
    };

    struct Walk<'a> {
        tree: &'a DesignTree,
        prune: bool,
        cap: usize,
        settings: Vec<Setting>,
        out: Vec<PragmaConfig>,
        truncated: bool,
    }

    impl Walk<'_> {
        /// Returns false to unwind the whole walk once the cap is hit.
        fn descend(&mut self, idx: usize) -> bool {
            if idx == self.tree.sites.len() {
                if self.out.len() == self.cap {
                    self.truncated = true;
                    return false;
                }
                self.out.push(self.tree.config(&self.settings));
                return true;
            }
            let pipelined_ancestor = self.tree.ancestor_pipelines[idx]
                .iter()
                .any(|&p| self.settings[p] == Setting::On);
            let n_opts = if pipelined_ancestor { 1 } else { self.tree.options[idx].len() };
            for &opt in &self.tree.options[idx][..n_opts] {
                if self.prune && !self.pair_ok(idx, opt) {
                    continue;
                }
                self.settings[idx] = opt;
                if !self.descend(idx + 1) {
                    return false;
                }
            }
            self.settings[idx] = Setting::Off;
            true
        }

        /// Equivalent-factor rule at a partition site: every loop indexing
        /// this dimension must either be unrolled by exactly the partition
        /// factor (cyclic or block) or stay OFF together with it.
        fn pair_ok(&self, idx: usize, opt: Setting) -> bool {
            self.tree.bound_unrolls[idx].iter().all(|&u| match (self.settings[u], opt) {
                (Setting::Off, Setting::Off) => true,
                (Setting::Unroll { factor }, Setting::Partition { kind, factor: pf }) => {
                    kind != PartitionKind::Complete && pf == factor
                }
                _ => false,
            })
        }
    }

    let mut walk = Walk {
        tree,
        prune,
        cap,
        settings: vec![Setting::Off; tree.sites.len()],
        out: Vec::new(),
        truncated: false,
    };
    walk.descend(0);
    Enumeration {
        designs: walk.out,
        truncated: walk.truncated,
        pruned: prune,
        total_leaves,
    }
}

/// One line per design: `design_<k>` and the canonical configuration text,
/// tab-separated.
pub fn render_manifest(designs: &[PragmaConfig]) -> String {
    let mut out = String::new();
    for (k, d) in designs.iter().enumerate() {
        writeln!(out, "design_{k}\t{}", d.canonical_text()).expect("string write");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::analyze;
    use crate::pragma::validate_config;
    use crate::source::SourceUnit;
    use proptest::prelude::*;

    fn tree_for(src: &str) -> (KernelInfo, DesignTree) {
        let unit = SourceUnit::single("k.c", src);
        let (_, info) = analyze(&unit).expect("analyze");
        let tree = build_design_tree(&info);
        (info, tree)
    }

    /// Product enumeration with independent legality filtering; the walk
    /// under test must match this exactly, order included.
    fn oracle(tree: &DesignTree, info: &KernelInfo, pair_rule: bool) -> Vec<PragmaConfig> {
        let n = tree.sites().len();
        let mut idx = vec![0usize; n];
        let mut out = Vec::new();
        loop {
            let settings: Vec<Setting> =
                (0..n).map(|i| tree.options()[i][idx[i]]).collect();
            let config = tree.config(&settings);
            let legal = validate_config(&config, info).is_ok();
            if legal && (!pair_rule || oracle_pairs_ok(&config, info)) {
                out.push(config);
            }
            // Odometer: rightmost site fastest, matching depth-first order.
            let mut i = n;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < tree.options()[i].len() {
                    break;
                }
                idx[i] = 0;
            }
        }
    }

    fn oracle_pairs_ok(config: &PragmaConfig, info: &KernelInfo) -> bool {
        info.functions.iter().all(|f| {
            f.all_loops().all(|l| {
                let unroll = config
                    .setting(&SiteKey::LoopUnroll {
                        function: f.name.clone(),
                        loop_id: l.id.clone(),
                    })
                    .unwrap();
                l.indexed_dims.iter().all(|(array, dim)| {
                    let part = config
                        .setting(&SiteKey::ArrayPartition { array: array.clone(), dim: *dim })
                        .unwrap();
                    match (unroll, part) {
                        (Setting::Off, Setting::Off) => true,
                        (
                            Setting::Unroll { factor },
                            Setting::Partition { kind, factor: pf },
                        ) => kind != PartitionKind::Complete && pf == factor,
                        _ => false,
                    }
                })
            })
        })
    }

    const TOY: &str = "void top(int a[4]) {\n    for (int i = 0; i < 4; i++) {\n        a[i] = a[i] * 2;\n    }\n}\n";

    const NESTED: &str = "void top(int x) {\n    for (int i = 0; i < 4; i++) {\n        for (int j = 0; j < 4; j++) {\n            x = x + 1;\n        }\n    }\n}\n";

    #[test]
    fn factor_lists_are_powers_of_two_up_to_n() {
        assert_eq!(generate_factors(8), [2, 4, 8]);
        assert_eq!(generate_factors(1), Vec::<u64>::new());
        assert_eq!(generate_factors(6), [2, 4]);
        assert_eq!(generate_factors(2), [2]);
    }

    #[test]
    fn option_lists_follow_the_fixed_order() {
        let (info, tree) = tree_for(TOY);
        let texts: Vec<Vec<String>> = tree
            .sites()
            .iter()
            .map(|s| {
                site_options(&s.key, &info)
                    .iter()
                    .map(|o| o.canonical())
                    .collect()
            })
            .collect();
        assert_eq!(
            texts,
            vec![
                vec!["off", "u2", "u4"],
                vec!["off", "on"],
                vec!["off", "cyclic2", "block2", "complete"],
                vec!["off", "on"],
            ]
        );
    }

    #[test]
    fn unit_extent_dimension_offers_only_off() {
        let (info, tree) = tree_for("void top(int a[1][8]) {\n    a[0][0] = 1;\n}\n");
        let d1 = tree
            .sites()
            .iter()
            .find(|s| matches!(&s.key, SiteKey::ArrayPartition { dim: 1, .. }))
            .unwrap();
        assert_eq!(site_options(&d1.key, &info), vec![Setting::Off]);
    }

    #[test]
    fn unknown_trip_count_loop_offers_no_unroll_factors() {
        let (info, tree) = tree_for(
            "void top(int a[8], int n) {\n    for (int i = 0; i < n; i++) {\n        a[i % 8] = i;\n    }\n}\n",
        );
        let unroll = &tree.sites()[0];
        assert!(matches!(unroll.key, SiteKey::LoopUnroll { .. }));
        assert_eq!(site_options(&unroll.key, &info), vec![Setting::Off]);
    }

    #[test]
    fn single_loop_with_array_enumerates_the_full_product() {
        let (info, tree) = tree_for(TOY);
        let e = enumerate_designs(&tree, &EnumerationBudget::unbounded());
        assert_eq!(e.designs, oracle(&tree, &info, false));
        assert_eq!(tree.leaf_count(), e.designs.len() as u128);
        assert!(!e.truncated);
        assert!(!e.pruned);
        // With the function site held OFF the space is the documented 24.
        let fn_pipe = SiteKey::FunctionPipeline { function: "top".into() };
        let held = e
            .designs
            .iter()
            .filter(|d| d.setting(&fn_pipe) == Some(Setting::Off))
            .count();
        assert_eq!(held, 24);
        assert_eq!(e.designs[0].pragma_count(), 0);
        for d in &e.designs {
            assert!(validate_config(d, &info).is_ok());
        }
    }

    #[test]
    fn nesting_rule_shapes_the_nested_loop_space() {
        let (info, tree) = tree_for(NESTED);
        let e = enumerate_designs(&tree, &EnumerationBudget::unbounded());
        assert_eq!(e.designs, oracle(&tree, &info, false));
        let fn_pipe = SiteKey::FunctionPipeline { function: "top".into() };
        let held = e
            .designs
            .iter()
            .filter(|d| d.setting(&fn_pipe) == Some(Setting::Off))
            .count();
        // Outer pipelining forbids inner unroll: 3*2 + 3*(2*3) leaves.
        assert_eq!(held, 24);
        assert_eq!(tree.leaf_count(), 48);
        let inner_unrolled_under_pipeline = e.designs.iter().any(|d| {
            d.setting(&SiteKey::LoopPipeline { function: "top".into(), loop_id: "L0".into() })
                == Some(Setting::On)
                && d.setting(&SiteKey::LoopUnroll {
                    function: "top".into(),
                    loop_id: "L0.0".into(),
                }) != Some(Setting::Off)
        });
        assert!(!inner_unrolled_under_pipeline);
    }

    #[test]
    fn bounded_walk_is_a_prefix_and_flags_truncation() {
        let (_, tree) = tree_for(TOY);
        let full = enumerate_designs(&tree, &EnumerationBudget::unbounded());
        let ten = enumerate_designs(
            &tree,
            &EnumerationBudget { max_designs: DesignLimit::Bounded(10), prune_equivalent: true },
        );
        assert!(ten.truncated);
        assert_eq!(ten.designs.len(), 10);
        assert_eq!(ten.designs[..], full.designs[..10]);
        let exact = enumerate_designs(
            &tree,
            &EnumerationBudget {
                max_designs: DesignLimit::Bounded(full.designs.len()),
                prune_equivalent: true,
            },
        );
        assert!(!exact.truncated);
        assert_eq!(exact.designs, full.designs);
    }

    const WIDE: &str = "void top(int a[8]) {\n    for (int i = 0; i < 8; i++) {\n        a[i] = a[i] + 1;\n    }\n    for (int j = 0; j < 8; j++) {\n        int t = j * 2;\n    }\n    for (int k = 0; k < 8; k++) {\n        int s = k + 1;\n    }\n}\n";

    #[test]
    fn oversized_tree_keeps_only_matched_unroll_partition_factors() {
        let (info, tree) = tree_for(WIDE);
        assert_eq!(tree.leaf_count(), 6144);
        let unpruned = enumerate_designs(
            &tree,
            &EnumerationBudget { max_designs: DesignLimit::Unbounded, prune_equivalent: false },
        );
        assert_eq!(unpruned.designs.len(), 6144);
        assert!(!unpruned.pruned);

        let pruned = enumerate_designs(&tree, &EnumerationBudget::unbounded());
        assert!(pruned.pruned);
        assert_eq!(pruned.designs, oracle(&tree, &info, true));
        let unroll = SiteKey::LoopUnroll { function: "top".into(), loop_id: "L0".into() };
        let part = tree
            .sites()
            .iter()
            .find(|s| matches!(s.key, SiteKey::ArrayPartition { .. }))
            .unwrap()
            .key
            .clone();
        for d in &pruned.designs {
            match (d.setting(&unroll).unwrap(), d.setting(&part).unwrap()) {
                (Setting::Off, Setting::Off) => {}
                (Setting::Unroll { factor }, Setting::Partition { kind, factor: pf }) => {
                    assert_ne!(kind, PartitionKind::Complete);
                    assert_eq!(factor, pf);
                    assert!(factor == 2 || factor == 4);
                }
                other => panic!("pruned walk kept a mismatched pair: {other:?}"),
            }
        }
        assert_eq!(pruned.designs.len(), 1280);
        assert_eq!(pruned.designs[0].pragma_count(), 0);
    }

    #[test]
    fn small_trees_are_never_pruned_even_when_requested() {
        let (info, tree) = tree_for(TOY);
        let e = enumerate_designs(&tree, &EnumerationBudget::unbounded());
        assert!(!e.pruned);
        // Mismatched pairs (e.g. unroll without partition) survive intact.
        assert_eq!(e.designs, oracle(&tree, &info, false));
    }

    #[test]
    fn enumeration_is_deterministic() {
        let (_, tree) = tree_for(WIDE);
        let a = enumerate_designs(&tree, &EnumerationBudget::default());
        let b = enumerate_designs(&tree, &EnumerationBudget::default());
        assert_eq!(a.designs, b.designs);
        assert_eq!(a.truncated, b.truncated);
    }

    #[test]
    fn adding_a_site_preserves_existing_configurations() {
        let (_, small) = tree_for(TOY);
        let grown_src = "void top(int a[4]) {\n    int b[2];\n    b[0] = 0;\n    for (int i = 0; i < 4; i++) {\n        a[i] = a[i] * 2 + b[0];\n    }\n}\n";
        let (_, grown) = tree_for(grown_src);
        let small_keys: Vec<SiteKey> =
            small.sites().iter().map(|s| s.key.clone()).collect();
        let project = |d: &PragmaConfig| {
            small_keys
                .iter()
                .map(|k| format!("{k}={}", d.setting(k).unwrap()))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let old: std::collections::BTreeSet<String> = enumerate_designs(
            &small,
            &EnumerationBudget::unbounded(),
        )
        .designs
        .iter()
        .map(|d| d.canonical_text())
        .collect();
        let projected: std::collections::BTreeSet<String> = enumerate_designs(
            &grown,
            &EnumerationBudget::unbounded(),
        )
        .designs
        .iter()
        .map(project)
        .collect();
        assert!(old.is_subset(&projected));
    }

    #[test]
    fn manifest_lists_ids_and_canonical_text() {
        let (_, tree) = tree_for(TOY);
        let e = enumerate_designs(&tree, &EnumerationBudget::unbounded());
        let manifest = render_manifest(&e.designs);
        let lines: Vec<&str> = manifest.lines().collect();
        assert_eq!(lines.len(), e.designs.len());
        assert_eq!(
            lines[0],
            "design_0\tloop:top:L0:unroll=off loop:top:L0:pipeline=off array:top:a:d1=off fn:top:pipeline=off"
        );
        let (id, text) = lines[7].split_once('\t').unwrap();
        assert_eq!(id, "design_7");
        assert_eq!(text, e.designs[7].canonical_text());
    }

    proptest! {
        #[test]
        fn any_bound_yields_a_prefix_of_the_unbounded_walk(cap in 1usize..60) {
            let (_, tree) = tree_for(TOY);
            let full = enumerate_designs(&tree, &EnumerationBudget::unbounded());
            let bounded = enumerate_designs(
                &tree,
                &EnumerationBudget {
                    max_designs: DesignLimit::Bounded(cap),
                    prune_equivalent: true,
                },
            );
            let expect = cap.min(full.designs.len());
            prop_assert_eq!(bounded.designs.len(), expect);
            prop_assert_eq!(&bounded.designs[..], &full.designs[..expect]);
            prop_assert_eq!(bounded.truncated, cap < full.designs.len());
        }
    }
}
