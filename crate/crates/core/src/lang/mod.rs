//! MiniC front end: lexer, parser, pretty printer, and project manifests.

mod ast;
mod lexer;
mod manifest;
mod parser;
mod printer;

use std::fmt;

pub use ast::{Ast, Attrs, EntityId, IntWidth, MiniCType, Node, NodeKind, SourceLocation};
pub use manifest::{Manifest, ManifestError, Project};
pub use parser::{parse, parse_project};
pub use printer::pretty_print;

/// Token spans of a source file as (line, first col, last col).
pub(crate) fn token_spans(src: &str, file: &str) -> Result<Vec<(u32, u32, u32)>, ParseError> {
    Ok(lexer::tokenize(src, file)?
        .into_iter()
        .filter(|t| t.tok != lexer::Tok::Eof)
        .map(|t| (t.line, t.col, t.end_col))
        .collect())
}

/// First syntax error in a file; parsing does not recover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub loc: SourceLocation,
    pub expected: Vec<String>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.loc, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}
