//! Lexer, parser, AST and pretty-printer for TTM model files.

pub mod ast;
pub mod lexer;
pub mod ltl;
mod parser;
pub mod printer;
mod validate;

use std::fmt;

use serde::Serialize;

pub use ast::*;
pub use ltl::{parse_ltl, parse_property_file, LtlFormula};
pub(crate) use parser::is_implicit_module;
pub use validate::const_eval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DiagnosticKind {
    SyntaxError,
    DuplicateName,
    UnknownReference,
    BoundError,
    UnknownAtom,
    ArityError,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A positioned error message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
    pub span: Span,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, message: impl Into<String>, span: Span) -> Self {
        Diagnostic {
            kind,
            message: message.into(),
            span,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.span, self.kind, self.message)
    }
}

impl std::error::Error for Diagnostic {}

/// Parses and validates a model file.
pub fn parse(source: &str) -> Result<SourceModel, Vec<Diagnostic>> {
    let model = parse_unchecked(source).map_err(|d| vec![d])?;
    let diags = validate::validate(&model);
    if diags.is_empty() {
        Ok(model)
    } else {
        Err(diags)
    }
}

/// Parses without the well-formedness checks of [`parse`].
pub fn parse_unchecked(source: &str) -> Result<SourceModel, Diagnostic> {
    let mut parser = parser::Parser::new(source, parser::ExprMode::Model)?;
    parser.parse_model()
}
