#![allow(dead_code)]

pub mod micro;
pub mod naive;

use std::path::PathBuf;

use ttm_core::checker::{Formula, Lasso, Obligation, ObligationKind};
use ttm_core::elaborator::{flatten, FlatModel};
use ttm_core::lts::{Lts, Transition};
use ttm_core::syntax::{parse, SourceModel};

pub fn model_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(format!("{name}.ttm"))
}

pub fn source(name: &str) -> SourceModel {
    let text = std::fs::read_to_string(model_path(name)).unwrap();
    parse(&text).unwrap_or_else(|d| panic!("{name}: {d:?}"))
}

pub fn load(name: &str) -> (SourceModel, FlatModel) {
    let src = source(name);
    let m = flatten(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
    (src, m)
}

/// Checks a counterexample without the checker's own validation: every
/// step replays through `Lts::step`, the cycle closes, every obligation is
/// met on the cycle, and the formula is false on the lasso.
pub fn audit_lasso(lts: &Lts, obligations: &[Obligation], f: &Formula, l: &Lasso) -> Result<(), String> {
    if l.cycle.is_empty() {
        return Err("empty cycle".into());
    }
    let steps: Vec<_> = l.prefix.iter().chain(&l.cycle).collect();
    if steps[0].config != lts.initial().unwrap() {
        return Err("does not start in the initial configuration".into());
    }
    for (i, s) in steps.iter().enumerate() {
        let next = steps.get(i + 1).map_or(&l.cycle[0].config, |n| &n.config);
        let succ = lts.step(&s.config, s.transition).map_err(|e| format!("step {i}: {e}"))?;
        if !succ.contains(next) {
            return Err(format!("step {i}: {} does not reach the next configuration", lts.label(s.transition)));
        }
    }
    for o in obligations {
        let ev = &lts.model.events[o.event as usize];
        let enabled: Vec<bool> = l
            .cycle
            .iter()
            .map(|s| lts.clock(&s.config, o.event as usize, o.fair as usize) >= ev.l as i32)
            .collect();
        let taken = l
            .cycle
            .iter()
            .any(|s| matches!(s.transition, Transition::Event { event, fair, .. } if event == o.event && fair == o.fair));
        let ok = match o.kind {
            ObligationKind::Justice => taken || enabled.iter().any(|e| !e),
            ObligationKind::Compassion => taken || enabled.iter().all(|e| !e),
        };
        if !ok {
            return Err(format!("{:?} of {} violated on the cycle", o.kind, ev.id));
        }
    }
    let configs: Vec<_> = steps.iter().map(|s| &s.config).collect();
    let vals: Vec<Vec<bool>> = configs
        .iter()
        .map(|c| f.atoms.iter().map(|a| a.eval(lts, c).unwrap()).collect())
        .collect();
    if f.ltl.holds_on_lasso(configs.len(), l.prefix.len(), &|i, a| vals[i][a as usize]) {
        return Err("formula holds on the lasso".into());
    }
    Ok(())
}
