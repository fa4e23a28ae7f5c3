//! Source-unit representation shared by the analyzer and the rewriter.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One named file inside a source unit. `name` is a bare file name, not a
/// path; units are flat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub name: String,
    pub content: String,
}

impl SourceFile {
    pub fn new(name: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            content: content.into(),
        }
    }
}

/// A kernel as a set of files plus an optional explicit top-function name.
///
/// File order is meaningful: it breaks ties when several files could serve
/// as the root of include expansion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    files: Vec<SourceFile>,
    top_hint: Option<String>,
}

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("source unit has no files")]
    Empty,
    #[error("duplicate file name in source unit: {0}")]
    DuplicateFile(String),
}

impl SourceUnit {
    pub fn new(files: Vec<SourceFile>) -> Result<Self, SourceError> {
        if files.is_empty() {
            return Err(SourceError::Empty);
        }
        for (i, f) in files.iter().enumerate() {
            if files[..i].iter().any(|g| g.name == f.name) {
                return Err(SourceError::DuplicateFile(f.name.clone()));
            }
        }
        Ok(Self {
            files,
            top_hint: None,
        })
    }

    pub fn with_top_hint(mut self, top: impl Into<String>) -> Self {
        self.top_hint = Some(top.into());
        self
    }

    pub fn single(name: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            files: vec![SourceFile::new(name, content)],
            top_hint: None,
        }
    }

    pub fn files(&self) -> &[SourceFile] {
        &self.files
    }

    pub fn top_hint(&self) -> Option<&str> {
        self.top_hint.as_deref()
    }

    pub fn file(&self, name: &str) -> Option<&SourceFile> {
        self.files.iter().find(|f| f.name == name)
    }

    pub fn file_mut(&mut self, name: &str) -> Option<&mut SourceFile> {
        self.files.iter_mut().find(|f| f.name == name)
    }
}

/// A position in a unit file. `line` and `col` are 1-based; `offset` is the
/// byte offset into the file content, used by the pragma rewriter.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Location {
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub offset: usize,
}

impl Location {
    pub fn new(file: impl Into<String>, line: u32, col: u32, offset: usize) -> Self {
        Self {
            file: file.into(),
            line,
            col,
            offset,
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col)
    }
}

/// A machine-readable problem report tied to a source position.
///
/// Rendered as `file:line:col: code: message`, one line per diagnostic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub location: Location,
    pub code: &'static str,
    pub message: String,
}

impl Diagnostic {
    pub fn new(location: Location, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            location,
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.location, self.code, self.message)
    }
}
