//! Well-formedness checks that need no elaboration.

use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::{Diagnostic, DiagnosticKind};

/// Evaluates an integer expression built from literals and named constants.
pub fn const_eval(expr: &Expr, lookup: &dyn Fn(&str) -> Option<i64>) -> Option<i64> {
    match expr {
        Expr::Int(n) => Some(*n),
        Expr::Name {
            name,
            primed: false,
            ..
        } => lookup(name),
        Expr::Unary {
            op: UnOp::Neg,
            arg,
        } => const_eval(arg, lookup).map(|v| -v),
        Expr::Binary { op, lhs, rhs } => {
            let (a, b) = (const_eval(lhs, lookup)?, const_eval(rhs, lookup)?);
            match op {
                BinOp::Add => a.checked_add(b),
                BinOp::Sub => a.checked_sub(b),
                BinOp::Mul => a.checked_mul(b),
                BinOp::Div if b != 0 => Some(a.div_euclid(b)),
                BinOp::Mod if b != 0 => Some(a.rem_euclid(b)),
                _ => None,
            }
        }
        _ => None,
    }
}

struct Checker {
    diags: Vec<Diagnostic>,
    constants: HashMap<String, i64>,
}

impl Checker {
    fn unique<'a>(&mut self, what: &str, items: impl IntoIterator<Item = (&'a str, Span)>) {
        let mut seen = HashSet::new();
        for (name, span) in items {
            if !seen.insert(name) {
                self.diags.push(Diagnostic::new(
                    DiagnosticKind::DuplicateName,
                    format!("{what} `{name}` declared more than once"),
                    span,
                ));
            }
        }
    }

    fn eval(&self, e: &Expr) -> Option<i64> {
        const_eval(e, &|n| self.constants.get(n).copied())
    }

    fn event(&mut self, e: &EventDecl) {
        let lower = e.lower.as_ref().and_then(|l| self.eval(l));
        let upper = e.upper.as_ref().and_then(|u| self.eval(u));
        if let (Some(l), Some(u)) = (lower, upper) {
            if l > u {
                self.diags.push(Diagnostic::new(
                    DiagnosticKind::BoundError,
                    format!("event `{}`: lower bound {l} exceeds upper bound {u}", e.name),
                    e.span,
                ));
            }
        }
        if let Some(l) = lower {
            if l < 0 {
                self.diags.push(Diagnostic::new(
                    DiagnosticKind::BoundError,
                    format!("event `{}`: negative lower bound", e.name),
                    e.span,
                ));
            }
        }
        if e.upper.is_some() && e.fairness != Fairness::Spontaneous {
            self.diags.push(Diagnostic::new(
                DiagnosticKind::BoundError,
                format!(
                    "event `{}`: `{}` needs an unbounded upper bound (`*`)",
                    e.name, e.fairness
                ),
                e.span,
            ));
        }
        let indices = e.fair_indices.iter().chain(&e.demonic_indices);
        self.unique(
            "index",
            indices.map(|i| (i.name.as_str(), e.span)).collect::<Vec<_>>(),
        );
    }

    fn timer(&mut self, t: &TimerDecl) {
        if self.eval(&t.lower).is_some_and(|l| l != 0) {
            self.diags.push(Diagnostic::new(
                DiagnosticKind::BoundError,
                format!("timer `{}` must be declared as `0 .. b`", t.name),
                t.span,
            ));
        }
        if self.eval(&t.bound).is_some_and(|b| b < 0) {
            self.diags.push(Diagnostic::new(
                DiagnosticKind::BoundError,
                format!("timer `{}` has a negative bound", t.name),
                t.span,
            ));
        }
    }

    fn composition(&mut self, c: &CompositionExpr, known: &HashSet<&str>, modules: &HashSet<&str>) {
        match c {
            CompositionExpr::Instance(name, span) => {
                if !known.contains(name.as_str()) {
                    self.diags.push(Diagnostic::new(
                        DiagnosticKind::UnknownReference,
                        format!("unknown instance `{name}`"),
                        *span,
                    ));
                }
            }
            CompositionExpr::Parallel(parts) => {
                for p in parts {
                    self.composition(p, known, modules);
                }
            }
            CompositionExpr::Iterated { template, .. } => {
                if !modules.contains(template.module.as_str()) {
                    self.diags.push(Diagnostic::new(
                        DiagnosticKind::UnknownReference,
                        format!("unknown module `{}`", template.module),
                        template.span,
                    ));
                }
            }
        }
    }
}

pub(crate) fn validate(model: &SourceModel) -> Vec<Diagnostic> {
    let mut ck = Checker {
        diags: Vec::new(),
        constants: HashMap::new(),
    };
    for c in &model.constants {
        if let Some(v) = ck.eval(&c.value) {
            ck.constants.insert(c.name.clone(), v);
        }
    }
    ck.unique(
        "declaration",
        model
            .constants
            .iter()
            .map(|c| (c.name.as_str(), c.span))
            .chain(model.types.iter().map(|t| (t.name.as_str(), t.span)))
            .chain(model.predicates.iter().map(|p| (p.name.as_str(), p.span)))
            .chain(model.globals.iter().map(|g| (g.name.as_str(), g.span)))
            .collect::<Vec<_>>(),
    );
    ck.unique(
        "module",
        model.modules.iter().map(|m| (m.name.as_str(), m.span)).collect::<Vec<_>>(),
    );
    ck.unique(
        "instance",
        model
            .instances
            .iter()
            .map(|i| (i.name.as_str(), i.span))
            .chain(model.aliases.iter().map(|a| (a.name.as_str(), a.span)))
            .collect::<Vec<_>>(),
    );
    ck.unique(
        "property",
        model
            .properties
            .iter()
            .map(|p| (p.name.as_str(), p.span))
            .collect::<Vec<_>>(),
    );

    let module_names: HashSet<&str> = model.modules.iter().map(|m| m.name.as_str()).collect();
    for m in &model.modules {
        ck.unique(
            &format!("event of module `{}`", m.name),
            m.events.iter().map(|e| (e.name.as_str(), e.span)).collect::<Vec<_>>(),
        );
        ck.unique(
            &format!("depends slot of module `{}`", m.name),
            m.depends.iter().map(|d| (d.slot.as_str(), d.span)).collect::<Vec<_>>(),
        );
        ck.unique(
            &format!("variable of module `{}`", m.name),
            m.interface
                .iter()
                .map(|v| (v.name.as_str(), v.span))
                .chain(m.locals.iter().map(|v| (v.name.as_str(), v.span)))
                .chain(m.timers.iter().map(|t| (t.name.as_str(), t.span)))
                .collect::<Vec<_>>(),
        );
        for d in &m.depends {
            if !module_names.contains(d.module.as_str()) {
                ck.diags.push(Diagnostic::new(
                    DiagnosticKind::UnknownReference,
                    format!("unknown module `{}`", d.module),
                    d.span,
                ));
            }
        }
        for t in &m.timers {
            ck.timer(t);
        }
        for e in &m.events {
            ck.event(e);
        }
    }
    for i in &model.instances {
        if !module_names.contains(i.module.as_str()) {
            ck.diags.push(Diagnostic::new(
                DiagnosticKind::UnknownReference,
                format!("unknown module `{}`", i.module),
                i.span,
            ));
        }
    }
    let mut known: HashSet<&str> = model.instances.iter().map(|i| i.name.as_str()).collect();
    for a in &model.aliases {
        ck.composition(&a.expr, &known, &module_names);
        known.insert(a.name.as_str());
    }
    if let Some(system) = &model.system {
        ck.composition(system, &known, &module_names);
    }
    ck.diags.sort_by_key(|d| (d.span.start, d.span.line));
    ck.diags
}
