//! Shared loading for the benchmarks.

use std::path::PathBuf;

use ttm_core::elaborator::{flatten, FlatModel};
use ttm_core::syntax::{parse, SourceModel};

pub fn model_text(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(format!("{name}.ttm"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn load(name: &str) -> (SourceModel, FlatModel) {
    let src = parse(&model_text(name)).unwrap_or_else(|d| panic!("{name}: {d:?}"));
    let flat = flatten(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
    (src, flat)
}
