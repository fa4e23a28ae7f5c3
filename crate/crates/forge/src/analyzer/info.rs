//! Structural analysis over a parsed tree: loop forests with trip counts,
//! array inventories, call-graph-based top detection, and the counters the
//! cost model consumes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::analyzer::ast::*;
use crate::analyzer::AnalyzeError;
use crate::source::{Diagnostic, Location};

/// Compile-time iteration count of a counted loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripCount {
    Known(u64),
    Unknown,
}

impl TripCount {
    pub fn known(self) -> Option<u64> {
        match self {
            TripCount::Known(n) => Some(n),
            TripCount::Unknown => None,
        }
    }
}

/// Identity of an array: its name plus the function that declares it, or
/// `None` for file-scope arrays.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArrayRef {
    pub function: Option<String>,
    pub name: String,
}

impl ArrayRef {
    pub fn local(function: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            function: Some(function.into()),
            name: name.into(),
        }
    }

    pub fn global(name: impl Into<String>) -> Self {
        Self {
            function: None,
            name: name.into(),
        }
    }

    /// Scope part used in canonical configuration keys; empty for globals.
    pub fn scope(&self) -> &str {
        self.function.as_deref().unwrap_or("")
    }
}

impl fmt::Display for ArrayRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.function {
            Some(func) => write!(f, "{func}:{}", self.name),
            None => write!(f, "{}", self.name),
        }
    }
}

/// Where directive lines for an array go.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArrayAnchor {
    /// Parameter arrays: directives go at the start of the owning function
    /// body.
    FunctionBody,
    /// Declared arrays: directives go right after the declaration's `;`,
    /// at the given byte offset.
    AfterDecl { offset: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayInfo {
    pub reference: ArrayRef,
    /// Extent per dimension, outermost first; every extent is at least 1.
    pub dims: Vec<u64>,
    pub element_bits: u64,
    /// Location of the declaring identifier.
    pub definition: Location,
    pub anchor: ArrayAnchor,
}

impl ArrayInfo {
    pub fn total_elements(&self) -> u64 {
        self.dims.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopInfo {
    /// Function-scoped path id: `L2` is the third top-level loop, `L2.0`
    /// its first nested loop.
    pub id: String,
    pub function: String,
    pub trip_count: TripCount,
    pub header_location: Location,
    /// First token position inside the loop body.
    pub body_start: Location,
    pub induction_var: Option<String>,
    /// Expression statements and initialized declarations directly in this
    /// loop's body (nested loop bodies excluded), floored at 1.
    pub body_stmt_count: u64,
    /// How many of those statements contain a multiplication.
    pub multiply_stmt_count: u64,
    /// Static array access counts per iteration of this loop, nested loop
    /// bodies excluded. One subscript chain counts once.
    pub array_accesses: Vec<(ArrayRef, u64)>,
    /// `(array, dim)` pairs (1-based dim) anywhere in the loop's subtree
    /// whose subscript mentions this loop's induction variable.
    pub indexed_dims: Vec<(ArrayRef, u32)>,
    pub children: Vec<LoopInfo>,
}

impl LoopInfo {
    pub fn iter(&self) -> LoopIter<'_> {
        LoopIter { stack: vec![self] }
    }
}

pub struct LoopIter<'a> {
    stack: Vec<&'a LoopInfo>,
}

impl<'a> Iterator for LoopIter<'a> {
    type Item = &'a LoopInfo;

    fn next(&mut self) -> Option<&'a LoopInfo> {
        let next = self.stack.pop()?;
        for child in next.children.iter().rev() {
            self.stack.push(child);
        }
        Some(next)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionInfo {
    pub name: String,
    pub location: Location,
    /// First token position inside the function body.
    pub body_start: Location,
    /// Top-level loops in source order; children nest inside.
    pub loops: Vec<LoopInfo>,
    /// Statements outside any loop, same counting rule as loop bodies.
    pub outside_stmt_count: u64,
    pub outside_multiply_count: u64,
}

impl FunctionInfo {
    pub fn all_loops(&self) -> impl Iterator<Item = &LoopInfo> {
        self.loops.iter().flat_map(LoopInfo::iter)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelInfo {
    pub functions: Vec<FunctionInfo>,
    pub top_function: String,
    /// Parameter and local arrays grouped per function in source order,
    /// followed by file-scope arrays.
    pub arrays: Vec<ArrayInfo>,
}

impl KernelInfo {
    pub fn function(&self, name: &str) -> Option<&FunctionInfo> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn array(&self, reference: &ArrayRef) -> Option<&ArrayInfo> {
        self.arrays.iter().find(|a| &a.reference == reference)
    }

    /// Resolve a name used inside `function`: local/parameter arrays win
    /// over file-scope arrays.
    pub fn resolve_array(&self, function: &str, name: &str) -> Option<&ArrayInfo> {
        self.arrays
            .iter()
            .find(|a| a.reference.name == name && a.reference.scope() == function)
            .or_else(|| {
                self.arrays
                    .iter()
                    .find(|a| a.reference.name == name && a.reference.function.is_none())
            })
    }

    pub fn arrays_of<'a>(&'a self, function: &'a str) -> impl Iterator<Item = &'a ArrayInfo> + 'a {
        self.arrays
            .iter()
            .filter(move |a| a.reference.scope() == function)
    }

    pub fn global_arrays(&self) -> impl Iterator<Item = &ArrayInfo> {
        self.arrays.iter().filter(|a| a.reference.function.is_none())
    }

    pub fn find_loop(&self, function: &str, id: &str) -> Option<&LoopInfo> {
        self.function(function)?.all_loops().find(|l| l.id == id)
    }
}

/// A directive line found in a parsed unit, with the syntactic context it
/// binds to: its function and, when it sits inside a loop body (nested
/// blocks and branch arms included, nested loop bodies excluded), the
/// innermost enclosing loop. File-scope directives carry an empty
/// function name, matching the empty scope of global arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct PragmaContext {
    pub text: String,
    pub location: Location,
    pub function: String,
    pub loop_id: Option<String>,
}

/// Collect every directive line with its binding context, in source order.
/// Loop ids here match `extract_info` exactly.
pub fn pragma_contexts(tree: &SyntaxTree) -> Vec<PragmaContext> {
    fn walk(
        block: &Block,
        function: &str,
        enclosing: Option<&str>,
        prefix: &str,
        count: &mut usize,
        out: &mut Vec<PragmaContext>,
    ) {
        for stmt in &block.stmts {
            match stmt {
                Stmt::Pragma(p) => out.push(PragmaContext {
                    text: p.text.clone(),
                    location: p.loc.clone(),
                    function: function.to_string(),
                    loop_id: enclosing.map(str::to_string),
                }),
                Stmt::For(l) => {
                    let id = if prefix == "L" {
                        format!("L{count}")
                    } else {
                        format!("{prefix}.{count}")
                    };
                    *count += 1;
                    let mut child_count = 0;
                    walk(&l.body, function, Some(&id), &id, &mut child_count, out);
                }
                Stmt::Block(b) => walk(b, function, enclosing, prefix, count, out),
                Stmt::If(i) => {
                    walk(&i.then_branch, function, enclosing, prefix, count, out);
                    if let Some(e) = &i.else_branch {
                        walk(e, function, enclosing, prefix, count, out);
                    }
                }
                _ => {}
            }
        }
    }
    let mut out = Vec::new();
    for item in &tree.items {
        match item {
            Item::Pragma(p) => out.push(PragmaContext {
                text: p.text.clone(),
                location: p.loc.clone(),
                function: String::new(),
                loop_id: None,
            }),
            Item::Function(f) => {
                let mut count = 0;
                walk(&f.body, &f.name, None, "L", &mut count, &mut out);
            }
            Item::Global(_) => {}
        }
    }
    out
}

/// Extract the induction variable of a loop from its init, falling back to
/// the step expression for headers like `for (; i < n; i++)`.
pub fn induction_var(l: &ForLoop) -> Option<String> {
    match &l.init {
        ForInit::Decl { name, .. } => return Some(name.clone()),
        ForInit::Expr(Expr::Assign { op: AssignOp::Assign, target, .. }) => {
            if let Expr::Ident(n, _) = target.as_ref() {
                return Some(n.clone());
            }
        }
        _ => {}
    }
    match l.step.as_ref()? {
        Expr::Postfix { operand, .. } | Expr::Unary { operand, .. } => match operand.as_ref() {
            Expr::Ident(n, _) => Some(n.clone()),
            _ => None,
        },
        Expr::Assign { target, .. } => match target.as_ref() {
            Expr::Ident(n, _) => Some(n.clone()),
            _ => None,
        },
        _ => None,
    }
}

/// Iteration count for the canonical header `for (i = A; i < B; i += S)`
/// with compile-time constant `A`, `B`, `S >= 1`: `ceil((B - A) / S)`.
/// Anything non-canonical or non-positive is `Unknown`.
pub fn infer_trip_count(l: &ForLoop, macros: &BTreeMap<String, i64>) -> TripCount {
    let Some(var) = induction_var(l) else {
        return TripCount::Unknown;
    };
    let start = match &l.init {
        ForInit::Decl { name, value, .. } if *name == var => value.const_eval(macros),
        ForInit::Expr(Expr::Assign { op: AssignOp::Assign, target, value, .. }) => {
            match target.as_ref() {
                Expr::Ident(n, _) if *n == var => value.const_eval(macros),
                _ => None,
            }
        }
        _ => None,
    };
    let bound = match &l.cond {
        Some(Expr::Binary { op: BinOp::Lt, lhs, rhs, .. }) => match lhs.as_ref() {
            Expr::Ident(n, _) if *n == var => rhs.const_eval(macros),
            _ => None,
        },
        _ => None,
    };
    let stride = match &l.step {
        Some(Expr::Postfix { op: PostfixOp::PostInc, operand, .. })
        | Some(Expr::Unary { op: UnaryOp::PreInc, operand, .. }) => match operand.as_ref() {
            Expr::Ident(n, _) if *n == var => Some(1),
            _ => None,
        },
        Some(Expr::Assign { op: AssignOp::Add, target, value, .. }) => match target.as_ref() {
            Expr::Ident(n, _) if *n == var => value.const_eval(macros),
            _ => None,
        },
        Some(Expr::Assign { op: AssignOp::Assign, target, value, .. }) => {
            let Expr::Ident(n, _) = target.as_ref() else {
                return TripCount::Unknown;
            };
            if *n != var {
                return TripCount::Unknown;
            }
            match value.as_ref() {
                Expr::Binary { op: BinOp::Add, lhs, rhs, .. } => match (lhs.as_ref(), rhs.as_ref()) {
                    (Expr::Ident(m, _), s) if *m == var => s.const_eval(macros),
                    (s, Expr::Ident(m, _)) if *m == var => s.const_eval(macros),
                    _ => None,
                },
                _ => None,
            }
        }
        _ => None,
    };
    match (start, bound, stride) {
        (Some(a), Some(b), Some(s)) if s >= 1 && b > a => {
            let span = (b - a) as u64;
            TripCount::Known(span.div_ceil(s as u64))
        }
        _ => TripCount::Unknown,
    }
}

pub fn extract_info(tree: &SyntaxTree, top_hint: Option<&str>) -> Result<KernelInfo, AnalyzeError> {
    let macros = tree.macro_table();

    let mut names = BTreeSet::new();
    for f in tree.functions() {
        if !names.insert(f.name.clone()) {
            return Err(AnalyzeError::Syntax(Diagnostic::new(
                f.name_loc.clone(),
                "syntax",
                format!("duplicate definition of function '{}'", f.name),
            )));
        }
    }

    check_recursion(tree)?;
    let top_function = detect_top(tree, top_hint)?;

    let mut arrays = Vec::new();
    for f in tree.functions() {
        collect_function_arrays(f, &macros, &mut arrays)?;
    }
    for g in tree.globals() {
        if !g.dims.is_empty() {
            let dims = eval_dims(&g.dims, &g.name_loc, &macros)?;
            check_element_type(g.ty, &g.name_loc)?;
            arrays.push(ArrayInfo {
                reference: ArrayRef::global(&g.name),
                dims,
                element_bits: g.ty.bits(),
                definition: g.name_loc.clone(),
                anchor: ArrayAnchor::AfterDecl { offset: g.end_offset },
            });
        }
    }
    for (i, a) in arrays.iter().enumerate() {
        if arrays[..i].iter().any(|b| b.reference == a.reference) {
            return Err(AnalyzeError::Unsupported(Diagnostic::new(
                a.definition.clone(),
                "unsupported",
                format!("duplicate array name '{}' in one scope", a.reference.name),
            )));
        }
    }

    let mut functions = Vec::new();
    for f in tree.functions() {
        let mut ctx = LoopCollector {
            function: &f.name,
            macros: &macros,
            arrays: &arrays,
        };
        let loops = ctx.collect_block(&f.body, "L");
        let (outside_stmt_count, outside_multiply_count) = count_outside(&f.body);
        functions.push(FunctionInfo {
            name: f.name.clone(),
            location: f.name_loc.clone(),
            body_start: f.body.body_start.clone(),
            loops,
            outside_stmt_count,
            outside_multiply_count,
        });
    }

    Ok(KernelInfo {
        functions,
        top_function,
        arrays,
    })
}

fn detect_top(tree: &SyntaxTree, top_hint: Option<&str>) -> Result<String, AnalyzeError> {
    let unit_loc = tree
        .functions()
        .next()
        .map(|f| f.name_loc.clone())
        .unwrap_or_else(|| Location::new("<unit>", 1, 1, 0));
    if let Some(hint) = top_hint {
        if tree.function(hint).is_some() {
            return Ok(hint.to_string());
        }
        return Err(AnalyzeError::MissingTop(Diagnostic::new(
            unit_loc,
            "missing-top",
            format!("requested top function '{hint}' is not defined in the unit"),
        )));
    }
    let defined: BTreeSet<&str> = tree.functions().map(|f| f.name.as_str()).collect();
    if defined.is_empty() {
        return Err(AnalyzeError::MissingTop(Diagnostic::new(
            unit_loc,
            "missing-top",
            "unit defines no functions".to_string(),
        )));
    }
    let mut called = BTreeSet::new();
    for f in tree.functions() {
        walk_block_exprs(&f.body, &mut |e| {
            if let Expr::Call { name, .. } = e {
                if defined.contains(name.as_str()) {
                    called.insert(name.clone());
                }
            }
        });
    }
    let candidates: Vec<&str> = tree
        .functions()
        .map(|f| f.name.as_str())
        .filter(|n| !called.contains(*n))
        .collect();
    match candidates.as_slice() {
        [single] => Ok(single.to_string()),
        _ => Err(AnalyzeError::AmbiguousTop(Diagnostic::new(
            unit_loc,
            "ambiguous-top",
            if candidates.is_empty() {
                "cannot determine the top function: every function is called".to_string()
            } else {
                format!(
                    "cannot determine the top function; candidates: {}",
                    candidates.join(", ")
                )
            },
        ))),
    }
}

fn check_recursion(tree: &SyntaxTree) -> Result<(), AnalyzeError> {
    let defined: BTreeSet<&str> = tree.functions().map(|f| f.name.as_str()).collect();
    let mut callees: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for f in tree.functions() {
        let mut set = BTreeSet::new();
        walk_block_exprs(&f.body, &mut |e| {
            if let Expr::Call { name, .. } = e {
                if defined.contains(name.as_str()) {
                    set.insert(name.clone());
                }
            }
        });
        callees.insert(&f.name, set);
    }
    // Iterative DFS with colors over the call graph.
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    fn visit<'a>(
        node: &'a str,
        callees: &'a BTreeMap<&str, BTreeSet<String>>,
        state: &mut BTreeMap<&'a str, u8>,
    ) -> Option<String> {
        match state.get(node) {
            Some(1) => return Some(node.to_string()),
            Some(2) => return None,
            _ => {}
        }
        state.insert(node, 1);
        if let Some(next) = callees.get(node) {
            for callee in next {
                if let Some((key, _)) = callees.get_key_value(callee.as_str()) {
                    if let Some(cycle) = visit(key, callees, state) {
                        return Some(cycle);
                    }
                }
            }
        }
        state.insert(node, 2);
        None
    }
    let roots: Vec<&str> = callees.keys().copied().collect();
    for root in roots {
        if let Some(name) = visit(root, &callees, &mut state) {
            let f = tree.function(&name).unwrap();
            return Err(AnalyzeError::Unsupported(Diagnostic::new(
                f.name_loc.clone(),
                "unsupported",
                format!("recursive call cycle involving '{name}'"),
            )));
        }
    }
    Ok(())
}

fn collect_function_arrays(
    f: &FunctionDef,
    macros: &BTreeMap<String, i64>,
    out: &mut Vec<ArrayInfo>,
) -> Result<(), AnalyzeError> {
    for p in &f.params {
        if p.dims.is_empty() {
            continue;
        }
        let dims = eval_dims(&p.dims, &p.name_loc, macros)?;
        check_element_type(p.ty, &p.name_loc)?;
        out.push(ArrayInfo {
            reference: ArrayRef::local(&f.name, &p.name),
            dims,
            element_bits: p.ty.bits(),
            definition: p.name_loc.clone(),
            anchor: ArrayAnchor::FunctionBody,
        });
    }
    let mut decls = Vec::new();
    collect_decls(&f.body, &mut decls);
    for d in decls {
        if d.dims.is_empty() {
            continue;
        }
        let dims = eval_dims(&d.dims, &d.name_loc, macros)?;
        check_element_type(d.ty, &d.name_loc)?;
        out.push(ArrayInfo {
            reference: ArrayRef::local(&f.name, &d.name),
            dims,
            element_bits: d.ty.bits(),
            definition: d.name_loc.clone(),
            anchor: ArrayAnchor::AfterDecl { offset: d.end_offset },
        });
    }
    Ok(())
}

fn check_element_type(ty: ScalarType, loc: &Location) -> Result<(), AnalyzeError> {
    if ty.base == BaseTy::Void {
        return Err(AnalyzeError::Syntax(Diagnostic::new(
            loc.clone(),
            "syntax",
            "array of void is not a valid type".to_string(),
        )));
    }
    Ok(())
}

fn eval_dims(
    dims: &[Expr],
    loc: &Location,
    macros: &BTreeMap<String, i64>,
) -> Result<Vec<u64>, AnalyzeError> {
    dims.iter()
        .map(|d| match d.const_eval(macros) {
            Some(v) if v >= 1 => Ok(v as u64),
            Some(_) => Err(AnalyzeError::Syntax(Diagnostic::new(
                loc.clone(),
                "syntax",
                "array extent must be positive".to_string(),
            ))),
            None => Err(AnalyzeError::Unsupported(Diagnostic::new(
                loc.clone(),
                "unsupported",
                "array extent is not a compile-time constant".to_string(),
            ))),
        })
        .collect()
}

fn collect_decls<'a>(block: &'a Block, out: &mut Vec<&'a VarDecl>) {
    for stmt in &block.stmts {
        match stmt {
            Stmt::Decl(d) => out.push(d),
            Stmt::Block(b) => collect_decls(b, out),
            Stmt::For(f) => collect_decls(&f.body, out),
            Stmt::If(i) => {
                collect_decls(&i.then_branch, out);
                if let Some(e) = &i.else_branch {
                    collect_decls(e, out);
                }
            }
            _ => {}
        }
    }
}

/// Apply `f` to every expression in a block, recursively.
fn walk_block_exprs(block: &Block, f: &mut impl FnMut(&Expr)) {
    for stmt in &block.stmts {
        match stmt {
            Stmt::Expr(e) => walk_expr(e, f),
            Stmt::Return(Some(e), _) => walk_expr(e, f),
            Stmt::Decl(d) => {
                for dim in &d.dims {
                    walk_expr(dim, f);
                }
                if let Some(init) = &d.init {
                    walk_init(init, f);
                }
            }
            Stmt::Block(b) => walk_block_exprs(b, f),
            Stmt::If(i) => {
                walk_expr(&i.cond, f);
                walk_block_exprs(&i.then_branch, f);
                if let Some(e) = &i.else_branch {
                    walk_block_exprs(e, f);
                }
            }
            Stmt::For(l) => {
                match &l.init {
                    ForInit::Decl { value, .. } => walk_expr(value, f),
                    ForInit::Expr(e) => walk_expr(e, f),
                    ForInit::Empty => {}
                }
                if let Some(c) = &l.cond {
                    walk_expr(c, f);
                }
                if let Some(s) = &l.step {
                    walk_expr(s, f);
                }
                walk_block_exprs(&l.body, f);
            }
            _ => {}
        }
    }
}

fn walk_init(init: &Initializer, f: &mut impl FnMut(&Expr)) {
    match init {
        Initializer::Expr(e) => walk_expr(e, f),
        Initializer::List(items) => {
            for i in items {
                walk_init(i, f);
            }
        }
    }
}

fn walk_expr(e: &Expr, f: &mut impl FnMut(&Expr)) {
    f(e);
    match e {
        Expr::Index { base, index, .. } => {
            walk_expr(base, f);
            walk_expr(index, f);
        }
        Expr::Call { args, .. } => {
            for a in args {
                walk_expr(a, f);
            }
        }
        Expr::Unary { operand, .. } | Expr::Postfix { operand, .. } => walk_expr(operand, f),
        Expr::Binary { lhs, rhs, .. } => {
            walk_expr(lhs, f);
            walk_expr(rhs, f);
        }
        Expr::Assign { target, value, .. } => {
            walk_expr(target, f);
            walk_expr(value, f);
        }
        Expr::Ternary {
            cond,
            then_expr,
            else_expr,
            ..
        } => {
            walk_expr(cond, f);
            walk_expr(then_expr, f);
            walk_expr(else_expr, f);
        }
        _ => {}
    }
}

struct LoopCollector<'a> {
    function: &'a str,
    macros: &'a BTreeMap<String, i64>,
    arrays: &'a [ArrayInfo],
}

impl LoopCollector<'_> {
    /// Collect loops of a block in source order; nested blocks and branch
    /// arms are transparent, nested loops become children.
    fn collect_block(&mut self, block: &Block, prefix: &str) -> Vec<LoopInfo> {
        let mut loops = Vec::new();
        self.scan_stmts(block, prefix, &mut loops);
        loops
    }

    fn scan_stmts(&mut self, block: &Block, prefix: &str, out: &mut Vec<LoopInfo>) {
        for stmt in &block.stmts {
            match stmt {
                Stmt::For(l) => {
                    let id = if prefix == "L" {
                        format!("L{}", out.len())
                    } else {
                        format!("{prefix}.{}", out.len())
                    };
                    out.push(self.loop_info(l, id));
                }
                Stmt::Block(b) => self.scan_stmts(b, prefix, out),
                Stmt::If(i) => {
                    self.scan_stmts(&i.then_branch, prefix, out);
                    if let Some(e) = &i.else_branch {
                        self.scan_stmts(e, prefix, out);
                    }
                }
                _ => {}
            }
        }
    }

    fn loop_info(&mut self, l: &ForLoop, id: String) -> LoopInfo {
        let induction = induction_var(l);
        let children = self.collect_block(&l.body, &id);

        let mut stmt_count = 0u64;
        let mut multiply_count = 0u64;
        let mut accesses: Vec<(ArrayRef, u64)> = Vec::new();
        count_own_body(
            &l.body,
            &mut |e: &Expr| self.record_accesses(e, &mut accesses),
            &mut stmt_count,
            &mut multiply_count,
        );

        let mut indexed: Vec<(ArrayRef, u32)> = Vec::new();
        if let Some(var) = &induction {
            walk_block_exprs(&l.body, &mut |e| {
                if let Some((array, dims)) = self.subscript_chain(e) {
                    for (dim, idx_expr) in dims.iter().enumerate() {
                        if mentions_var(idx_expr, var) {
                            let entry = (array.clone(), (dim + 1) as u32);
                            if !indexed.contains(&entry) {
                                indexed.push(entry);
                            }
                        }
                    }
                }
            });
        }

        LoopInfo {
            id,
            function: self.function.to_string(),
            trip_count: infer_trip_count(l, self.macros),
            header_location: l.header_loc.clone(),
            body_start: l.body.body_start.clone(),
            induction_var: induction,
            body_stmt_count: stmt_count.max(1),
            multiply_stmt_count: multiply_count,
            array_accesses: accesses,
            indexed_dims: indexed,
            children,
        }
    }

    /// If `e` is the root of a complete subscript chain on a known array,
    /// return the array and the subscript expressions outermost-dim first.
    fn subscript_chain<'e>(&self, e: &'e Expr) -> Option<(ArrayRef, Vec<&'e Expr>)> {
        if !matches!(e, Expr::Index { .. }) {
            return None;
        }
        let mut subs = Vec::new();
        let mut cur = e;
        loop {
            match cur {
                Expr::Index { base, index, .. } => {
                    subs.push(index.as_ref());
                    cur = base.as_ref();
                }
                Expr::Ident(name, _) => {
                    subs.reverse();
                    let info = self
                        .arrays
                        .iter()
                        .find(|a| a.reference.name == *name && a.reference.scope() == self.function)
                        .or_else(|| {
                            self.arrays
                                .iter()
                                .find(|a| a.reference.name == *name && a.reference.function.is_none())
                        })?;
                    return Some((info.reference.clone(), subs));
                }
                _ => return None,
            }
        }
    }

    /// Count subscript chains in an expression. Descends into subscript
    /// expressions but not into a chain's own base, so `a[i][j]` counts one
    /// access to `a` while `a[b[i]]` counts one access to each.
    fn record_accesses(&self, e: &Expr, accesses: &mut Vec<(ArrayRef, u64)>) {
        if let Some((array, subs)) = self.subscript_chain(e) {
            match accesses.iter_mut().find(|(a, _)| *a == array) {
                Some((_, n)) => *n += 1,
                None => accesses.push((array, 1)),
            }
            for s in subs {
                self.record_accesses(s, accesses);
            }
            return;
        }
        match e {
            Expr::Index { base, index, .. } => {
                // Subscript on something that is not a known array.
                self.record_accesses(base, accesses);
                self.record_accesses(index, accesses);
            }
            Expr::Call { args, .. } => {
                for a in args {
                    self.record_accesses(a, accesses);
                }
            }
            Expr::Unary { operand, .. } | Expr::Postfix { operand, .. } => {
                self.record_accesses(operand, accesses)
            }
            Expr::Binary { lhs, rhs, .. } => {
                self.record_accesses(lhs, accesses);
                self.record_accesses(rhs, accesses);
            }
            Expr::Assign { target, value, .. } => {
                self.record_accesses(target, accesses);
                self.record_accesses(value, accesses);
            }
            Expr::Ternary {
                cond,
                then_expr,
                else_expr,
                ..
            } => {
                self.record_accesses(cond, accesses);
                self.record_accesses(then_expr, accesses);
                self.record_accesses(else_expr, accesses);
            }
            _ => {}
        }
    }
}

fn mentions_var(e: &Expr, var: &str) -> bool {
    let mut found = false;
    walk_expr(e, &mut |x| {
        if let Expr::Ident(n, _) = x {
            if n == var {
                found = true;
            }
        }
    });
    found
}

/// Walk statements that belong to a loop's own body: nested blocks and
/// branch arms are included, nested `for` bodies are not. Counts the
/// statements and multiplies, and hands each statement-level expression to
/// `on_expr` exactly once.
fn count_own_body(
    block: &Block,
    on_expr: &mut impl FnMut(&Expr),
    stmt_count: &mut u64,
    multiply_count: &mut u64,
) {
    for stmt in &block.stmts {
        match stmt {
            Stmt::Expr(e) => {
                *stmt_count += 1;
                if has_multiply(e) {
                    *multiply_count += 1;
                }
                on_expr(e);
            }
            Stmt::Decl(d) => {
                if let Some(Initializer::Expr(init)) = &d.init {
                    *stmt_count += 1;
                    if has_multiply(init) {
                        *multiply_count += 1;
                    }
                    on_expr(init);
                }
            }
            Stmt::Block(b) => count_own_body(b, on_expr, stmt_count, multiply_count),
            Stmt::If(i) => {
                on_expr(&i.cond);
                count_own_body(&i.then_branch, on_expr, stmt_count, multiply_count);
                if let Some(e) = &i.else_branch {
                    count_own_body(e, on_expr, stmt_count, multiply_count);
                }
            }
            Stmt::Return(Some(e), _) => {
                on_expr(e);
            }
            _ => {}
        }
    }
}

fn has_multiply(e: &Expr) -> bool {
    let mut found = false;
    walk_expr(e, &mut |x| match x {
        Expr::Binary { op: BinOp::Mul, .. } | Expr::Assign { op: AssignOp::Mul, .. } => {
            found = true
        }
        _ => {}
    });
    found
}

fn count_outside(body: &Block) -> (u64, u64) {
    let mut stmts = 0;
    let mut muls = 0;
    count_own_body(body, &mut |_| {}, &mut stmts, &mut muls);
    (stmts, muls)
}
