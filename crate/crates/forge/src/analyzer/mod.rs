//! Restricted-C front end: lexing, parsing, include expansion, and
//! structural analysis of kernels.
//!
//! The accepted subset is what synthesizable kernels are written in:
//! function definitions, counted `for` loops, `if`/`else`, returns, scalar
//! arithmetic, fixed-size arrays, calls between unit functions, quoted
//! includes, and object-like integer macros. Constructs outside the subset
//! fail with a structured diagnostic instead of a guess.

pub mod ast;
mod info;
mod lexer;
mod parser;

use thiserror::Error;

use crate::source::{Diagnostic, SourceError};

pub use info::{
    extract_info, induction_var, infer_trip_count, pragma_contexts, ArrayAnchor, ArrayInfo,
    ArrayRef, FunctionInfo, KernelInfo, LoopInfo, PragmaContext, TripCount,
};
pub use parser::parse_source;

#[derive(Debug, Error)]
pub enum AnalyzeError {
    /// Malformed input: rendered as `file:line:col: syntax: message`.
    #[error("{0}")]
    Syntax(Diagnostic),
    /// Valid C outside the supported subset.
    #[error("{0}")]
    Unsupported(Diagnostic),
    /// No hint given and call-graph roots are not unique.
    #[error("{0}")]
    AmbiguousTop(Diagnostic),
    /// The requested top function does not exist, or the unit is empty.
    #[error("{0}")]
    MissingTop(Diagnostic),
    #[error(transparent)]
    Source(#[from] SourceError),
}

impl AnalyzeError {
    pub fn diagnostic(&self) -> Option<&Diagnostic> {
        match self {
            AnalyzeError::Syntax(d)
            | AnalyzeError::Unsupported(d)
            | AnalyzeError::AmbiguousTop(d)
            | AnalyzeError::MissingTop(d) => Some(d),
            AnalyzeError::Source(_) => None,
        }
    }
}

/// Parse a unit and extract kernel structure in one step.
pub fn analyze(unit: &crate::source::SourceUnit) -> Result<(ast::SyntaxTree, KernelInfo), AnalyzeError> {
    let tree = parse_source(unit)?;
    let info = extract_info(&tree, unit.top_hint())?;
    Ok((tree, info))
}
