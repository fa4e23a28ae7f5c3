//! Syntax tree for the restricted C subset, plus a renderer that turns a
//! tree back into compilable text.
//!
//! Every node keeps the location of its defining token so later passes can
//! rewrite the original files byte-accurately instead of re-printing them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::source::Location;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseTy {
    Void,
    Char,
    Short,
    Int,
    Long,
    LongLong,
    Float,
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalarType {
    pub base: BaseTy,
    pub unsigned: bool,
}

impl ScalarType {
    pub fn new(base: BaseTy, unsigned: bool) -> Self {
        Self { base, unsigned }
    }

    /// Storage width used for memory footprint estimates (LP64 model).
    pub fn bits(&self) -> u64 {
        match self.base {
            BaseTy::Void => 0,
            BaseTy::Char => 8,
            BaseTy::Short => 16,
            BaseTy::Int | BaseTy::Float => 32,
            BaseTy::Long | BaseTy::LongLong | BaseTy::Double => 64,
        }
    }

    pub fn render(&self) -> String {
        let base = match self.base {
            BaseTy::Void => "void",
            BaseTy::Char => "char",
            BaseTy::Short => "short",
            BaseTy::Int => "int",
            BaseTy::Long => "long",
            BaseTy::LongLong => "long long",
            BaseTy::Float => "float",
            BaseTy::Double => "double",
        };
        if self.unsigned {
            format!("unsigned {base}")
        } else {
            base.to_string()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Plus,
    Not,
    BitNot,
    PreInc,
    PreDec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostfixOp {
    PostInc,
    PostDec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Shl,
    Shr,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitXor,
    BitOr,
    And,
    Or,
}

impl BinOp {
    pub fn text(self) -> &'static str {
        use BinOp::*;
        match self {
            Add => "+",
            Sub => "-",
            Mul => "*",
            Div => "/",
            Rem => "%",
            Shl => "<<",
            Shr => ">>",
            Lt => "<",
            Gt => ">",
            Le => "<=",
            Ge => ">=",
            Eq => "==",
            Ne => "!=",
            BitAnd => "&",
            BitXor => "^",
            BitOr => "|",
            And => "&&",
            Or => "||",
        }
    }

    /// Binding strength; higher binds tighter. Mirrors C operator precedence.
    pub fn precedence(self) -> u8 {
        use BinOp::*;
        match self {
            Mul | Div | Rem => 10,
            Add | Sub => 9,
            Shl | Shr => 8,
            Lt | Gt | Le | Ge => 7,
            Eq | Ne => 6,
            BitAnd => 5,
            BitXor => 4,
            BitOr => 3,
            And => 2,
            Or => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOp {
    Assign,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Shl,
    Shr,
    BitAnd,
    BitOr,
    BitXor,
}

impl AssignOp {
    pub fn text(self) -> &'static str {
        use AssignOp::*;
        match self {
            Assign => "=",
            Add => "+=",
            Sub => "-=",
            Mul => "*=",
            Div => "/=",
            Rem => "%=",
            Shl => "<<=",
            Shr => ">>=",
            BitAnd => "&=",
            BitOr => "|=",
            BitXor => "^=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    IntLit(i64, Location),
    FloatLit(String, Location),
    Ident(String, Location),
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
        loc: Location,
    },
    Call {
        name: String,
        args: Vec<Expr>,
        loc: Location,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
        loc: Location,
    },
    Postfix {
        op: PostfixOp,
        operand: Box<Expr>,
        loc: Location,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        loc: Location,
    },
    Assign {
        op: AssignOp,
        target: Box<Expr>,
        value: Box<Expr>,
        loc: Location,
    },
    Ternary {
        cond: Box<Expr>,
        then_expr: Box<Expr>,
        else_expr: Box<Expr>,
        loc: Location,
    },
}

impl Expr {
    pub fn location(&self) -> &Location {
        match self {
            Expr::IntLit(_, l)
            | Expr::FloatLit(_, l)
            | Expr::Ident(_, l)
            | Expr::Index { loc: l, .. }
            | Expr::Call { loc: l, .. }
            | Expr::Unary { loc: l, .. }
            | Expr::Postfix { loc: l, .. }
            | Expr::Binary { loc: l, .. }
            | Expr::Assign { loc: l, .. }
            | Expr::Ternary { loc: l, .. } => l,
        }
    }

    /// Constant-fold an integer expression using a macro table for names.
    /// Returns `None` for anything non-constant, including division by zero.
    pub fn const_eval(&self, macros: &BTreeMap<String, i64>) -> Option<i64> {
        match self {
            Expr::IntLit(v, _) => Some(*v),
            Expr::Ident(name, _) => macros.get(name).copied(),
            Expr::Unary { op, operand, .. } => {
                let v = operand.const_eval(macros)?;
                match op {
                    UnaryOp::Neg => v.checked_neg(),
                    UnaryOp::Plus => Some(v),
                    UnaryOp::BitNot => Some(!v),
                    UnaryOp::Not => Some(i64::from(v == 0)),
                    UnaryOp::PreInc | UnaryOp::PreDec => None,
                }
            }
            Expr::Binary { op, lhs, rhs, .. } => {
                let a = lhs.const_eval(macros)?;
                let b = rhs.const_eval(macros)?;
                match op {
                    BinOp::Add => a.checked_add(b),
                    BinOp::Sub => a.checked_sub(b),
                    BinOp::Mul => a.checked_mul(b),
                    BinOp::Div => a.checked_div(b),
                    BinOp::Rem => a.checked_rem(b),
                    BinOp::Shl => (0..64).contains(&b).then(|| a.wrapping_shl(b as u32)),
                    BinOp::Shr => (0..64).contains(&b).then(|| a.wrapping_shr(b as u32)),
                    _ => None,
                }
            }
            _ => None,
        }
    }

    fn render_prec(&self, out: &mut String, parent_prec: u8) {
        match self {
            Expr::IntLit(v, _) => {
                let _ = write!(out, "{v}");
            }
            Expr::FloatLit(t, _) => out.push_str(t),
            Expr::Ident(n, _) => out.push_str(n),
            Expr::Index { base, index, .. } => {
                base.render_prec(out, 11);
                out.push('[');
                index.render_prec(out, 0);
                out.push(']');
            }
            Expr::Call { name, args, .. } => {
                out.push_str(name);
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    a.render_prec(out, 0);
                }
                out.push(')');
            }
            Expr::Unary { op, operand, .. } => {
                out.push_str(match op {
                    UnaryOp::Neg => "-",
                    UnaryOp::Plus => "+",
                    UnaryOp::Not => "!",
                    UnaryOp::BitNot => "~",
                    UnaryOp::PreInc => "++",
                    UnaryOp::PreDec => "--",
                });
                operand.render_prec(out, 11);
            }
            Expr::Postfix { op, operand, .. } => {
                operand.render_prec(out, 11);
                out.push_str(match op {
                    PostfixOp::PostInc => "++",
                    PostfixOp::PostDec => "--",
                });
            }
            Expr::Binary { op, lhs, rhs, .. } => {
                let prec = op.precedence();
                let need_parens = prec < parent_prec;
                if need_parens {
                    out.push('(');
                }
                lhs.render_prec(out, prec);
                let _ = write!(out, " {} ", op.text());
                // Right operand parenthesized at equal precedence keeps
                // left-associative structure intact.
                rhs.render_prec(out, prec + 1);
                if need_parens {
                    out.push(')');
                }
            }
            Expr::Assign { op, target, value, .. } => {
                if parent_prec > 0 {
                    out.push('(');
                }
                target.render_prec(out, 11);
                let _ = write!(out, " {} ", op.text());
                value.render_prec(out, 0);
                if parent_prec > 0 {
                    out.push(')');
                }
            }
            Expr::Ternary {
                cond,
                then_expr,
                else_expr,
                ..
            } => {
                if parent_prec > 0 {
                    out.push('(');
                }
                cond.render_prec(out, 1);
                out.push_str(" ? ");
                then_expr.render_prec(out, 0);
                out.push_str(" : ");
                else_expr.render_prec(out, 0);
                if parent_prec > 0 {
                    out.push(')');
                }
            }
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_prec(&mut out, 0);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initializer {
    Expr(Expr),
    List(Vec<Initializer>),
}

impl Initializer {
    fn render(&self, out: &mut String) {
        match self {
            Initializer::Expr(e) => e.render_prec(out, 1),
            Initializer::List(items) => {
                out.push('{');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.render(out);
                }
                out.push('}');
            }
        }
    }
}

/// A single declarator. Multi-declarator statements are split into one
/// `VarDecl` each during parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub ty: ScalarType,
    pub name: String,
    pub name_loc: Location,
    /// One extent expression per array dimension; empty for scalars.
    pub dims: Vec<Expr>,
    pub init: Option<Initializer>,
    /// Byte offset one past the terminating `;` of the declaration statement.
    pub end_offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PragmaLine {
    /// Directive text with the `#pragma` prefix stripped, e.g.
    /// `HLS unroll factor=4`.
    pub text: String,
    pub loc: Location,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForInit {
    Empty,
    Decl {
        ty: ScalarType,
        name: String,
        name_loc: Location,
        value: Expr,
    },
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForLoop {
    /// Location of the `for` keyword.
    pub header_loc: Location,
    pub init: ForInit,
    pub cond: Option<Expr>,
    pub step: Option<Expr>,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IfStmt {
    pub loc: Location,
    pub cond: Expr,
    pub then_branch: Block,
    pub else_branch: Option<Block>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Decl(VarDecl),
    Expr(Expr),
    For(Box<ForLoop>),
    If(Box<IfStmt>),
    Return(Option<Expr>, Location),
    Break(Location),
    Continue(Location),
    Block(Block),
    Pragma(PragmaLine),
    Empty(Location),
}

/// A statement sequence. Braceless single-statement bodies are normalized
/// into a `Block` with `braced == false` so directive attachment and
/// rewriting treat all bodies uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub braced: bool,
    /// First token position inside the body: after `{` for braced blocks,
    /// the first statement token otherwise. Directive lines inserted for
    /// this body go immediately before this position.
    pub body_start: Location,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub ty: ScalarType,
    pub name: String,
    pub name_loc: Location,
    pub dims: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub ret: ScalarType,
    pub name: String,
    pub name_loc: Location,
    pub params: Vec<Param>,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Function(FunctionDef),
    Global(VarDecl),
    /// A file-scope directive line, e.g. a partition pragma following a
    /// global array's declaration.
    Pragma(PragmaLine),
}

/// A parsed source unit: include expansion already applied, macros
/// collected, all files merged into one item sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntaxTree {
    pub items: Vec<Item>,
    /// Object-like integer macros in definition order.
    pub macro_defs: Vec<(String, i64, Location)>,
}

impl SyntaxTree {
    pub fn macro_table(&self) -> BTreeMap<String, i64> {
        self.macro_defs
            .iter()
            .map(|(n, v, _)| (n.clone(), *v))
            .collect()
    }

    pub fn functions(&self) -> impl Iterator<Item = &FunctionDef> {
        self.items.iter().filter_map(|i| match i {
            Item::Function(f) => Some(f),
            _ => None,
        })
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions().find(|f| f.name == name)
    }

    pub fn globals(&self) -> impl Iterator<Item = &VarDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Global(g) => Some(g),
            _ => None,
        })
    }

    /// Render the whole tree as one self-contained C file.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, value, _) in &self.macro_defs {
            let _ = writeln!(out, "#define {name} {value}");
        }
        if !self.macro_defs.is_empty() {
            out.push('\n');
        }
        for (i, item) in self.items.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            match item {
                Item::Global(decl) => {
                    render_decl(&mut out, decl, 0);
                }
                Item::Pragma(p) => {
                    let _ = writeln!(out, "#pragma {}", p.text);
                }
                Item::Function(f) => {
                    let _ = write!(out, "{} {}(", f.ret.render(), f.name);
                    for (j, p) in f.params.iter().enumerate() {
                        if j > 0 {
                            out.push_str(", ");
                        }
                        let _ = write!(out, "{} {}", p.ty.render(), p.name);
                        for d in &p.dims {
                            let _ = write!(out, "[{}]", d.render());
                        }
                    }
                    out.push_str(") ");
                    render_block(&mut out, &f.body, 0, true);
                    out.push('\n');
                }
            }
        }
        out
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn render_decl(out: &mut String, decl: &VarDecl, level: usize) {
    indent(out, level);
    let _ = write!(out, "{} {}", decl.ty.render(), decl.name);
    for d in &decl.dims {
        let _ = write!(out, "[{}]", d.render());
    }
    if let Some(init) = &decl.init {
        out.push_str(" = ");
        init.render(out);
    }
    out.push_str(";\n");
}

fn render_block(out: &mut String, block: &Block, level: usize, force_braces: bool) {
    if block.braced || force_braces || block.stmts.len() != 1 {
        out.push_str("{\n");
        for stmt in &block.stmts {
            render_stmt(out, stmt, level + 1);
        }
        indent(out, level);
        out.push('}');
    } else {
        out.push('\n');
        render_stmt(out, &block.stmts[0], level + 1);
        // The caller owns the trailing layout; braceless bodies end with
        // the statement's own newline.
    }
}

fn render_stmt(out: &mut String, stmt: &Stmt, level: usize) {
    match stmt {
        Stmt::Decl(d) => render_decl(out, d, level),
        Stmt::Expr(e) => {
            indent(out, level);
            let _ = writeln!(out, "{};", e.render());
        }
        Stmt::Return(Some(e), _) => {
            indent(out, level);
            let _ = writeln!(out, "return {};", e.render());
        }
        Stmt::Return(None, _) => {
            indent(out, level);
            out.push_str("return;\n");
        }
        Stmt::Break(_) => {
            indent(out, level);
            out.push_str("break;\n");
        }
        Stmt::Continue(_) => {
            indent(out, level);
            out.push_str("continue;\n");
        }
        Stmt::Empty(_) => {
            indent(out, level);
            out.push_str(";\n");
        }
        Stmt::Pragma(p) => {
            // Directive lines always start at column zero.
            let _ = writeln!(out, "#pragma {}", p.text);
        }
        Stmt::Block(b) => {
            indent(out, level);
            render_block(out, b, level, true);
            out.push('\n');
        }
        Stmt::If(ifs) => {
            indent(out, level);
            let _ = write!(out, "if ({}) ", ifs.cond.render());
            render_if_arm(out, &ifs.then_branch, level);
            if let Some(else_b) = &ifs.else_branch {
                indent(out, level);
                out.push_str("else ");
                render_if_arm(out, else_b, level);
            }
        }
        Stmt::For(f) => {
            indent(out, level);
            out.push_str("for (");
            match &f.init {
                ForInit::Empty => {}
                ForInit::Decl { ty, name, value, .. } => {
                    let _ = write!(out, "{} {} = {}", ty.render(), name, value.render());
                }
                ForInit::Expr(e) => out.push_str(&e.render()),
            }
            out.push_str("; ");
            if let Some(c) = &f.cond {
                out.push_str(&c.render());
            }
            out.push_str("; ");
            if let Some(s) = &f.step {
                out.push_str(&s.render());
            }
            out.push_str(") ");
            render_block(out, &f.body, level, false);
            if f.body.braced || f.body.stmts.len() != 1 {
                out.push('\n');
            }
        }
    }
}

fn render_if_arm(out: &mut String, block: &Block, level: usize) {
    render_block(out, block, level, true);
    out.push('\n');
}
