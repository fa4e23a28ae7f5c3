//! Recursive-descent parser for the restricted C subset, plus unit-level
//! include expansion.
//!
//! The accepted language covers what synthesizable kernels in this corpus
//! use: function definitions, counted `for` loops, `if`/`else`, returns,
//! fixed-size array declarations, scalar arithmetic, and calls between
//! functions of the same unit. Everything outside that surface is rejected
//! with an `unsupported` diagnostic rather than silently misparsed.

use std::collections::BTreeSet;

use crate::analyzer::ast::*;
use crate::analyzer::lexer::{LexItem, Lexer, Punct, Tok, Token};
use crate::analyzer::AnalyzeError;
use crate::source::{Diagnostic, Location, SourceUnit};

/// Words that belong to full C but not to this subset. Seeing one is a
/// structured rejection, not a syntax error.
const UNSUPPORTED_WORDS: &[&str] = &[
    "while", "do", "goto", "switch", "case", "default", "struct", "union", "enum", "typedef",
    "sizeof",
];

const QUALIFIERS: &[&str] = &["const", "volatile", "register", "static", "restrict", "inline"];

const TYPE_WORDS: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "unsigned", "signed",
];

pub fn parse_source(unit: &SourceUnit) -> Result<SyntaxTree, AnalyzeError> {
    let (tokens, macro_defs) = build_stream(unit)?;
    let eof_loc = tokens
        .last()
        .map(|t| {
            let mut l = t.loc.clone();
            l.col += 1;
            l.offset += 1;
            l
        })
        .unwrap_or_else(|| Location::new(&unit.files()[0].name, 1, 1, 0));
    let mut parser = Parser {
        toks: tokens,
        pos: 0,
        eof_loc,
    };
    let items = parser.parse_unit()?;
    Ok(SyntaxTree { items, macro_defs })
}

/// Lex every file, then splice quoted includes that name other unit files.
///
/// Roots are the files no other unit file includes (falling back to every
/// file when the include graph is cyclic), expanded in unit order with
/// include-once semantics, so each file's tokens appear exactly once.
fn build_stream(
    unit: &SourceUnit,
) -> Result<(Vec<Token>, Vec<(String, i64, Location)>), AnalyzeError> {
    let mut lexed: Vec<(String, Vec<LexItem>)> = Vec::new();
    for file in unit.files() {
        let items = Lexer::new(&file.name, &file.content)
            .lex()
            .map_err(diag_to_error)?;
        lexed.push((file.name.clone(), items));
    }

    let mut included = BTreeSet::new();
    for (_, items) in &lexed {
        for item in items {
            if let LexItem::Include { name, .. } = item {
                if lexed.iter().any(|(n, _)| n == name) {
                    included.insert(name.clone());
                }
            }
        }
    }

    let mut tokens = Vec::new();
    let mut macro_defs: Vec<(String, i64, Location)> = Vec::new();
    let mut done = BTreeSet::new();

    fn expand(
        name: &str,
        lexed: &[(String, Vec<LexItem>)],
        done: &mut BTreeSet<String>,
        tokens: &mut Vec<Token>,
        macro_defs: &mut Vec<(String, i64, Location)>,
    ) {
        if !done.insert(name.to_string()) {
            return;
        }
        let Some((_, items)) = lexed.iter().find(|(n, _)| n == name) else {
            return;
        };
        for item in items {
            match item {
                LexItem::Tok(t) => tokens.push(t.clone()),
                LexItem::Include { name: inc, .. } => {
                    expand(inc, lexed, done, tokens, macro_defs);
                }
                LexItem::Define { name, value, loc } => {
                    if let Some(v) = value {
                        match macro_defs.iter_mut().find(|(n, _, _)| n == name) {
                            Some(entry) => entry.1 = *v,
                            None => macro_defs.push((name.clone(), *v, loc.clone())),
                        }
                    }
                }
            }
        }
    }

    let roots: Vec<&str> = lexed
        .iter()
        .map(|(n, _)| n.as_str())
        .filter(|n| !included.contains(*n))
        .collect();
    for root in roots {
        expand(root, &lexed, &mut done, &mut tokens, &mut macro_defs);
    }
    // A cyclic include graph has no roots; cover any file left over.
    for (name, _) in &lexed {
        if !done.contains(name) {
            expand(name, &lexed, &mut done, &mut tokens, &mut macro_defs);
        }
    }
    Ok((tokens, macro_defs))
}

fn diag_to_error(d: Diagnostic) -> AnalyzeError {
    if d.code == "unsupported" {
        AnalyzeError::Unsupported(d)
    } else {
        AnalyzeError::Syntax(d)
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof_loc: Location,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&Token> {
        self.toks.get(self.pos + n)
    }

    fn here(&self) -> Location {
        self.peek().map(|t| t.loc.clone()).unwrap_or_else(|| self.eof_loc.clone())
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_punct(&self, p: Punct) -> bool {
        matches!(self.peek(), Some(Token { kind: Tok::Punct(q), .. }) if *q == p)
    }

    fn peek_word(&self) -> Option<&str> {
        match self.peek() {
            Some(Token { kind: Tok::Ident(w), .. }) => Some(w.as_str()),
            _ => None,
        }
    }

    fn describe(&self, tok: Option<&Token>) -> String {
        match tok.map(|t| &t.kind) {
            None => "end of input".to_string(),
            Some(Tok::Ident(w)) => format!("'{w}'"),
            Some(Tok::Int(v)) => format!("'{v}'"),
            Some(Tok::Float(v)) => format!("'{v}'"),
            Some(Tok::Punct(p)) => format!("'{}'", p.text()),
            Some(Tok::Pragma(_)) => "'#pragma'".to_string(),
        }
    }

    fn syntax(&self, loc: Location, message: String) -> AnalyzeError {
        AnalyzeError::Syntax(Diagnostic::new(loc, "syntax", message))
    }

    fn unsupported(&self, loc: Location, message: String) -> AnalyzeError {
        AnalyzeError::Unsupported(Diagnostic::new(loc, "unsupported", message))
    }

    fn err_expected(&self, what: &str) -> AnalyzeError {
        let found = self.describe(self.peek());
        self.syntax(self.here(), format!("expected {what}, found {found}"))
    }

    fn expect_punct(&mut self, p: Punct) -> Result<Token, AnalyzeError> {
        if self.at_punct(p) {
            Ok(self.bump().unwrap())
        } else {
            Err(self.err_expected(&format!("'{}'", p.text())))
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Location), AnalyzeError> {
        match self.peek() {
            Some(Token { kind: Tok::Ident(w), loc }) => {
                if UNSUPPORTED_WORDS.contains(&w.as_str()) {
                    return Err(self.unsupported(
                        loc.clone(),
                        format!("'{w}' is not part of the supported subset"),
                    ));
                }
                let out = (w.clone(), loc.clone());
                self.bump();
                Ok(out)
            }
            _ => Err(self.err_expected("identifier")),
        }
    }

    fn check_unsupported_word(&self) -> Result<(), AnalyzeError> {
        if let Some(w) = self.peek_word() {
            if UNSUPPORTED_WORDS.contains(&w) {
                return Err(self.unsupported(
                    self.here(),
                    format!("'{w}' is not part of the supported subset"),
                ));
            }
        }
        Ok(())
    }

    fn at_type_start(&self) -> bool {
        // Qualifiers may precede the base type; look past them.
        let mut n = 0;
        loop {
            match self.peek_at(n) {
                Some(Token { kind: Tok::Ident(w), .. }) if QUALIFIERS.contains(&w.as_str()) => {
                    n += 1
                }
                Some(Token { kind: Tok::Ident(w), .. }) => {
                    return TYPE_WORDS.contains(&w.as_str())
                }
                _ => return false,
            }
        }
    }

    fn parse_type(&mut self) -> Result<ScalarType, AnalyzeError> {
        let loc = self.here();
        let mut unsigned = false;
        let mut signed_seen = false;
        let mut longs = 0u8;
        let mut base: Option<BaseTy> = None;
        let mut any = false;
        loop {
            let Some(word) = self.peek_word() else { break };
            match word {
                w if QUALIFIERS.contains(&w) => {
                    self.bump();
                }
                "unsigned" => {
                    unsigned = true;
                    any = true;
                    self.bump();
                }
                "signed" => {
                    signed_seen = true;
                    any = true;
                    self.bump();
                }
                "long" if base.is_none() && longs < 2 => {
                    longs += 1;
                    any = true;
                    self.bump();
                }
                "int" if longs > 0 || base == Some(BaseTy::Short) => {
                    // Redundant `int` in `long int` / `short int`.
                    self.bump();
                }
                "void" | "char" | "short" | "int" | "float" | "double"
                    if base.is_none() && longs == 0 =>
                {
                    base = Some(match word {
                        "void" => BaseTy::Void,
                        "char" => BaseTy::Char,
                        "short" => BaseTy::Short,
                        "int" => BaseTy::Int,
                        "float" => BaseTy::Float,
                        _ => BaseTy::Double,
                    });
                    any = true;
                    self.bump();
                }
                _ => break,
            }
        }
        if longs > 0 {
            return Ok(ScalarType::new(
                if longs >= 2 { BaseTy::LongLong } else { BaseTy::Long },
                unsigned,
            ));
        }
        match base {
            Some(b) => Ok(ScalarType::new(b, unsigned)),
            None if unsigned || signed_seen => Ok(ScalarType::new(BaseTy::Int, unsigned)),
            None if any => Err(self.syntax(loc, "incomplete type name".into())),
            None => Err(self.err_expected("type name")),
        }
    }

    fn parse_unit(&mut self) -> Result<Vec<Item>, AnalyzeError> {
        let mut items = Vec::new();
        while let Some(tok) = self.peek() {
            if let Tok::Pragma(text) = &tok.kind {
                items.push(Item::Pragma(PragmaLine {
                    text: text.clone(),
                    loc: tok.loc.clone(),
                }));
                self.bump();
                continue;
            }
            if self.at_punct(Punct::Semi) {
                self.bump();
                continue;
            }
            self.check_unsupported_word()?;
            if !self.at_type_start() {
                return Err(self.err_expected("type name at file scope"));
            }
            let ty = self.parse_type()?;
            let (name, name_loc) = self.expect_ident()?;
            if self.at_punct(Punct::LParen) {
                if let Some(f) = self.parse_function_rest(ty, name, name_loc)? {
                    items.push(Item::Function(f));
                }
            } else {
                let decls = self.parse_declarators(ty, name, name_loc)?;
                items.extend(decls.into_iter().map(Item::Global));
            }
        }
        Ok(items)
    }

    /// Parse params and body after the function name. Returns `None` for a
    /// bare prototype, which contributes no structure.
    fn parse_function_rest(
        &mut self,
        ret: ScalarType,
        name: String,
        name_loc: Location,
    ) -> Result<Option<FunctionDef>, AnalyzeError> {
        self.expect_punct(Punct::LParen)?;
        let mut params = Vec::new();
        if !self.at_punct(Punct::RParen) {
            if self.peek_word() == Some("void") && matches!(self.peek_at(1), Some(Token { kind: Tok::Punct(Punct::RParen), .. })) {
                self.bump();
            } else {
                loop {
                    self.check_unsupported_word()?;
                    if !self.at_type_start() {
                        return Err(self.err_expected("parameter type"));
                    }
                    let ty = self.parse_type()?;
                    if self.at_punct(Punct::Star) {
                        return Err(self.unsupported(
                            self.here(),
                            "pointer parameters are not supported; use sized arrays".into(),
                        ));
                    }
                    let (pname, ploc) = if matches!(self.peek(), Some(Token { kind: Tok::Ident(_), .. })) {
                        self.expect_ident()?
                    } else {
                        // Unnamed parameter: legal in prototypes only.
                        (String::new(), self.here())
                    };
                    let mut dims = Vec::new();
                    while self.at_punct(Punct::LBracket) {
                        let bracket_loc = self.here();
                        self.bump();
                        if self.at_punct(Punct::RBracket) {
                            return Err(self.unsupported(
                                bracket_loc,
                                "unsized array parameters are not supported".into(),
                            ));
                        }
                        dims.push(self.parse_expr()?);
                        self.expect_punct(Punct::RBracket)?;
                    }
                    params.push(Param {
                        ty,
                        name: pname,
                        name_loc: ploc,
                        dims,
                    });
                    if self.at_punct(Punct::Comma) {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
        }
        self.expect_punct(Punct::RParen)?;
        if self.at_punct(Punct::Semi) {
            self.bump();
            return Ok(None);
        }
        if !self.at_punct(Punct::LBrace) {
            return Err(self.err_expected("'{' to open the function body"));
        }
        for p in &params {
            if p.name.is_empty() {
                return Err(
                    self.syntax(name_loc.clone(), format!("unnamed parameter in definition of '{name}'"))
                );
            }
        }
        let body = self.parse_braced_block()?;
        Ok(Some(FunctionDef {
            ret,
            name,
            name_loc,
            params,
            body,
        }))
    }

    fn parse_declarators(
        &mut self,
        ty: ScalarType,
        first_name: String,
        first_loc: Location,
    ) -> Result<Vec<VarDecl>, AnalyzeError> {
        let mut partial = Vec::new();
        let mut name = first_name;
        let mut name_loc = first_loc;
        loop {
            let mut dims = Vec::new();
            while self.at_punct(Punct::LBracket) {
                self.bump();
                dims.push(self.parse_expr()?);
                self.expect_punct(Punct::RBracket)?;
            }
            let init = if self.at_punct(Punct::Assign) {
                self.bump();
                Some(self.parse_initializer()?)
            } else {
                None
            };
            partial.push((name, name_loc, dims, init));
            if self.at_punct(Punct::Comma) {
                self.bump();
                let (n, l) = self.expect_ident()?;
                name = n;
                name_loc = l;
            } else {
                break;
            }
        }
        let semi = self.expect_punct(Punct::Semi)?;
        let end_offset = semi.loc.offset + 1;
        Ok(partial
            .into_iter()
            .map(|(name, name_loc, dims, init)| VarDecl {
                ty,
                name,
                name_loc,
                dims,
                init,
                end_offset,
            })
            .collect())
    }

    fn parse_initializer(&mut self) -> Result<Initializer, AnalyzeError> {
        if self.at_punct(Punct::LBrace) {
            self.bump();
            let mut items = Vec::new();
            if !self.at_punct(Punct::RBrace) {
                loop {
                    items.push(self.parse_initializer()?);
                    if self.at_punct(Punct::Comma) {
                        self.bump();
                        if self.at_punct(Punct::RBrace) {
                            break;
                        }
                    } else {
                        break;
                    }
                }
            }
            self.expect_punct(Punct::RBrace)?;
            Ok(Initializer::List(items))
        } else {
            Ok(Initializer::Expr(self.parse_expr()?))
        }
    }

    fn parse_braced_block(&mut self) -> Result<Block, AnalyzeError> {
        self.expect_punct(Punct::LBrace)?;
        let body_start = self.here();
        let mut stmts = Vec::new();
        loop {
            if self.at_punct(Punct::RBrace) {
                self.bump();
                break;
            }
            if self.peek().is_none() {
                return Err(self.err_expected("'}'"));
            }
            stmts.push(self.parse_stmt()?);
        }
        Ok(Block {
            stmts,
            braced: true,
            body_start,
        })
    }

    /// A loop or branch body: either a braced block or a single statement,
    /// optionally preceded by directive lines that belong to the construct.
    fn parse_body_block(&mut self) -> Result<Block, AnalyzeError> {
        if self.at_punct(Punct::LBrace) {
            return self.parse_braced_block();
        }
        let body_start = self.here();
        let mut stmts = Vec::new();
        while let Some(Token { kind: Tok::Pragma(_), .. }) = self.peek() {
            stmts.push(self.parse_stmt()?);
        }
        stmts.push(self.parse_stmt()?);
        Ok(Block {
            stmts,
            braced: false,
            body_start,
        })
    }

    fn parse_stmt(&mut self) -> Result<Stmt, AnalyzeError> {
        let loc = self.here();
        if let Some(Token { kind: Tok::Pragma(text), loc }) = self.peek() {
            let p = PragmaLine {
                text: text.clone(),
                loc: loc.clone(),
            };
            self.bump();
            return Ok(Stmt::Pragma(p));
        }
        if self.at_punct(Punct::Semi) {
            self.bump();
            return Ok(Stmt::Empty(loc));
        }
        if self.at_punct(Punct::LBrace) {
            return Ok(Stmt::Block(self.parse_braced_block()?));
        }
        match self.peek_word() {
            Some("for") => return self.parse_for(),
            Some("if") => return self.parse_if(),
            Some("return") => {
                self.bump();
                if self.at_punct(Punct::Semi) {
                    self.bump();
                    return Ok(Stmt::Return(None, loc));
                }
                let e = self.parse_expr()?;
                self.expect_punct(Punct::Semi)?;
                return Ok(Stmt::Return(Some(e), loc));
            }
            Some("break") => {
                self.bump();
                self.expect_punct(Punct::Semi)?;
                return Ok(Stmt::Break(loc));
            }
            Some("continue") => {
                self.bump();
                self.expect_punct(Punct::Semi)?;
                return Ok(Stmt::Continue(loc));
            }
            _ => {}
        }
        self.check_unsupported_word()?;
        if self.at_type_start() {
            let ty = self.parse_type()?;
            let (name, name_loc) = self.expect_ident()?;
            let decls = self.parse_declarators(ty, name, name_loc)?;
            if decls.len() == 1 {
                let mut decls = decls;
                return Ok(Stmt::Decl(decls.pop().unwrap()));
            }
            // Multi-declarator statements keep block structure through an
            // anonymous sub-sequence; they are rare in kernels.
            let body_start = decls[0].name_loc.clone();
            return Ok(Stmt::Block(Block {
                stmts: decls.into_iter().map(Stmt::Decl).collect(),
                braced: false,
                body_start,
            }));
        }
        let e = self.parse_expr()?;
        self.expect_punct(Punct::Semi)?;
        Ok(Stmt::Expr(e))
    }

    fn parse_for(&mut self) -> Result<Stmt, AnalyzeError> {
        let header_loc = self.here();
        self.bump(); // for
        self.expect_punct(Punct::LParen)?;
        let init = if self.at_punct(Punct::Semi) {
            self.bump();
            ForInit::Empty
        } else if self.at_type_start() {
            let ty = self.parse_type()?;
            let (name, name_loc) = self.expect_ident()?;
            self.expect_punct(Punct::Assign)?;
            let value = self.parse_expr()?;
            self.reject_comma()?;
            self.expect_punct(Punct::Semi)?;
            ForInit::Decl {
                ty,
                name,
                name_loc,
                value,
            }
        } else {
            let e = self.parse_expr()?;
            self.reject_comma()?;
            self.expect_punct(Punct::Semi)?;
            ForInit::Expr(e)
        };
        let cond = if self.at_punct(Punct::Semi) {
            None
        } else {
            Some(self.parse_expr()?)
        };
        self.expect_punct(Punct::Semi)?;
        let step = if self.at_punct(Punct::RParen) {
            None
        } else {
            let e = self.parse_expr()?;
            self.reject_comma()?;
            Some(e)
        };
        self.expect_punct(Punct::RParen)?;
        let body = self.parse_body_block()?;
        Ok(Stmt::For(Box::new(ForLoop {
            header_loc,
            init,
            cond,
            step,
            body,
        })))
    }

    fn reject_comma(&self) -> Result<(), AnalyzeError> {
        if self.at_punct(Punct::Comma) {
            Err(self.unsupported(self.here(), "the comma operator is not supported".into()))
        } else {
            Ok(())
        }
    }

    fn parse_if(&mut self) -> Result<Stmt, AnalyzeError> {
        let loc = self.here();
        self.bump(); // if
        self.expect_punct(Punct::LParen)?;
        let cond = self.parse_expr()?;
        self.expect_punct(Punct::RParen)?;
        let then_branch = self.parse_body_block()?;
        let else_branch = if self.peek_word() == Some("else") {
            self.bump();
            if self.peek_word() == Some("if") {
                // `else if` chains nest through a synthetic block.
                let nested_loc = self.here();
                let nested = self.parse_if()?;
                Some(Block {
                    stmts: vec![nested],
                    braced: false,
                    body_start: nested_loc,
                })
            } else {
                Some(self.parse_body_block()?)
            }
        } else {
            None
        };
        Ok(Stmt::If(Box::new(IfStmt {
            loc,
            cond,
            then_branch,
            else_branch,
        })))
    }

    // Expressions: precedence climbing. Assignment is right-associative
    // and lowest; the comma operator does not exist in this subset.

    fn parse_expr(&mut self) -> Result<Expr, AnalyzeError> {
        let lhs = self.parse_ternary()?;
        let op = match self.peek() {
            Some(Token { kind: Tok::Punct(p), .. }) => match p {
                Punct::Assign => Some(AssignOp::Assign),
                Punct::PlusAssign => Some(AssignOp::Add),
                Punct::MinusAssign => Some(AssignOp::Sub),
                Punct::StarAssign => Some(AssignOp::Mul),
                Punct::SlashAssign => Some(AssignOp::Div),
                Punct::PercentAssign => Some(AssignOp::Rem),
                Punct::ShlAssign => Some(AssignOp::Shl),
                Punct::ShrAssign => Some(AssignOp::Shr),
                Punct::AmpAssign => Some(AssignOp::BitAnd),
                Punct::PipeAssign => Some(AssignOp::BitOr),
                Punct::CaretAssign => Some(AssignOp::BitXor),
                _ => None,
            },
            _ => None,
        };
        if let Some(op) = op {
            let loc = self.here();
            if !matches!(lhs, Expr::Ident(..) | Expr::Index { .. }) {
                return Err(self.syntax(loc, "assignment target must be a variable or array element".into()));
            }
            self.bump();
            let value = self.parse_expr()?;
            return Ok(Expr::Assign {
                op,
                target: Box::new(lhs),
                value: Box::new(value),
                loc,
            });
        }
        Ok(lhs)
    }

    fn parse_ternary(&mut self) -> Result<Expr, AnalyzeError> {
        let cond = self.parse_binary(1)?;
        if self.at_punct(Punct::Question) {
            let loc = self.here();
            self.bump();
            let then_expr = self.parse_expr()?;
            self.expect_punct(Punct::Colon)?;
            let else_expr = self.parse_ternary()?;
            return Ok(Expr::Ternary {
                cond: Box::new(cond),
                then_expr: Box::new(then_expr),
                else_expr: Box::new(else_expr),
                loc,
            });
        }
        Ok(cond)
    }

    fn binop_at(&self) -> Option<BinOp> {
        match self.peek() {
            Some(Token { kind: Tok::Punct(p), .. }) => match p {
                Punct::Plus => Some(BinOp::Add),
                Punct::Minus => Some(BinOp::Sub),
                Punct::Star => Some(BinOp::Mul),
                Punct::Slash => Some(BinOp::Div),
                Punct::Percent => Some(BinOp::Rem),
                Punct::Shl => Some(BinOp::Shl),
                Punct::Shr => Some(BinOp::Shr),
                Punct::Lt => Some(BinOp::Lt),
                Punct::Gt => Some(BinOp::Gt),
                Punct::Le => Some(BinOp::Le),
                Punct::Ge => Some(BinOp::Ge),
                Punct::Eq => Some(BinOp::Eq),
                Punct::Ne => Some(BinOp::Ne),
                Punct::Amp => Some(BinOp::BitAnd),
                Punct::Caret => Some(BinOp::BitXor),
                Punct::Pipe => Some(BinOp::BitOr),
                Punct::AndAnd => Some(BinOp::And),
                Punct::OrOr => Some(BinOp::Or),
                _ => None,
            },
            _ => None,
        }
    }

    fn parse_binary(&mut self, min_prec: u8) -> Result<Expr, AnalyzeError> {
        let mut lhs = self.parse_unary()?;
        while let Some(op) = self.binop_at() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let loc = self.here();
            self.bump();
            let rhs = self.parse_binary(prec + 1)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                loc,
            };
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, AnalyzeError> {
        let loc = self.here();
        let op = match self.peek() {
            Some(Token { kind: Tok::Punct(p), .. }) => match p {
                Punct::Minus => Some(UnaryOp::Neg),
                Punct::Plus => Some(UnaryOp::Plus),
                Punct::Not => Some(UnaryOp::Not),
                Punct::Tilde => Some(UnaryOp::BitNot),
                Punct::Inc => Some(UnaryOp::PreInc),
                Punct::Dec => Some(UnaryOp::PreDec),
                Punct::Star => {
                    return Err(self.unsupported(loc, "pointer dereference is not supported".into()))
                }
                Punct::Amp => {
                    return Err(self.unsupported(loc, "address-of is not supported".into()))
                }
                _ => None,
            },
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let operand = self.parse_unary()?;
            return Ok(Expr::Unary {
                op,
                operand: Box::new(operand),
                loc,
            });
        }
        self.parse_postfix()
    }

    fn parse_postfix(&mut self) -> Result<Expr, AnalyzeError> {
        let mut e = self.parse_primary()?;
        loop {
            if self.at_punct(Punct::LBracket) {
                let loc = self.here();
                self.bump();
                let index = self.parse_expr()?;
                self.expect_punct(Punct::RBracket)?;
                e = Expr::Index {
                    base: Box::new(e),
                    index: Box::new(index),
                    loc,
                };
            } else if self.at_punct(Punct::LParen) {
                let loc = self.here();
                let Expr::Ident(name, _) = &e else {
                    return Err(self.unsupported(loc, "indirect calls are not supported".into()));
                };
                let name = name.clone();
                self.bump();
                let mut args = Vec::new();
                if !self.at_punct(Punct::RParen) {
                    loop {
                        args.push(self.parse_expr()?);
                        if self.at_punct(Punct::Comma) {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect_punct(Punct::RParen)?;
                e = Expr::Call { name, args, loc };
            } else if self.at_punct(Punct::Inc) {
                let loc = self.here();
                self.bump();
                e = Expr::Postfix {
                    op: PostfixOp::PostInc,
                    operand: Box::new(e),
                    loc,
                };
            } else if self.at_punct(Punct::Dec) {
                let loc = self.here();
                self.bump();
                e = Expr::Postfix {
                    op: PostfixOp::PostDec,
                    operand: Box::new(e),
                    loc,
                };
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn parse_primary(&mut self) -> Result<Expr, AnalyzeError> {
        let loc = self.here();
        match self.peek() {
            Some(Token { kind: Tok::Int(v), .. }) => {
                let v = *v;
                self.bump();
                Ok(Expr::IntLit(v, loc))
            }
            Some(Token { kind: Tok::Float(t), .. }) => {
                let t = t.clone();
                self.bump();
                Ok(Expr::FloatLit(t, loc))
            }
            Some(Token { kind: Tok::Ident(_), .. }) => {
                self.check_unsupported_word()?;
                let (name, loc) = self.expect_ident()?;
                Ok(Expr::Ident(name, loc))
            }
            Some(Token { kind: Tok::Punct(Punct::LParen), .. }) => {
                self.bump();
                let e = self.parse_expr()?;
                self.expect_punct(Punct::RParen)?;
                Ok(e)
            }
            _ => Err(self.err_expected("an expression")),
        }
    }
}
