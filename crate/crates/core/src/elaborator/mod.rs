//! Instantiation, composition, synchronous-event resolution and flattening.

mod compile;
mod compose;
mod dump;
mod flatten;
pub mod model;
mod sync;

use std::fmt;

use serde::Serialize;

use crate::syntax::Span;

pub use compile::{fold_const, PropertyScope};
pub use compose::{combine_modes, compose, iterated_compose, BoundArg, Composite, GlobalRef, Instance};
pub use dump::{dump, render_expr};
pub use flatten::{
    build_dependency_graphs, flatten, flatten_source, flatten_with, instantiate, DependencyGraphs,
    FlattenOptions, SyncSet,
};
pub use model::*;
pub use sync::{order_projections, OrderedAction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ElabErrorKind {
    MissingBinding,
    ModeMismatch,
    UnknownDependency,
    ModeConflict,
    NameCollision,
    EmptyIteration,
    CyclicModuleDependency,
    CyclicEventDependency,
    SyncTargetNotFound,
    CircularDataFlow,
    DoubleAssignment,
    MergedBoundEmpty,
    UnknownReference,
    TypeError,
    BoundError,
    /// The source did not parse.
    Syntax,
}

impl fmt::Display for ElabErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{span}: {kind}: {message}")]
pub struct ElabError {
    pub kind: ElabErrorKind,
    pub message: String,
    pub span: Span,
}

impl ElabError {
    pub fn new(kind: ElabErrorKind, message: impl Into<String>, span: Span) -> Self {
        ElabError {
            kind,
            message: message.into(),
            span,
        }
    }
}

/// Qualifies `name` with an instance prefix; the implicit instance has none.
pub(crate) fn qualify(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}
