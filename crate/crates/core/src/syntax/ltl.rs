//! Temporal property parsing and name checking.

use std::collections::HashSet;

use super::ast::*;
use super::parser::{ExprMode, Parser};
use super::{Diagnostic, DiagnosticKind};

/// What a property may refer to. Implemented by the flattened model.
pub trait Namespace {
    /// State variables, including arrays and queues.
    fn is_variable(&self, name: &str) -> bool;
    fn is_timer(&self, name: &str) -> bool;
    /// `(fair, demonic)` index counts of an event.
    fn event_arity(&self, name: &str) -> Option<(usize, usize)>;
    /// Named constants and enumeration symbols.
    fn is_value(&self, name: &str) -> bool;
    fn is_set(&self, name: &str) -> bool;
    fn predicate_arity(&self, name: &str) -> Option<usize>;
    /// Values of a fair index called `name` in some event, used to infer free
    /// property parameters.
    fn fair_index_values(&self, name: &str) -> Option<Vec<Expr>>;
}

/// A checked property: a formula plus the parameters it is instantiated over.
#[derive(Debug, Clone, PartialEq)]
pub struct LtlFormula {
    pub expr: Expr,
    pub params: Vec<IndexDecl>,
}

/// Parses `text` as a temporal formula and resolves its names.
pub fn parse_ltl(
    text: &str,
    scope: &dyn Namespace,
    params: &[IndexDecl],
) -> Result<LtlFormula, Vec<Diagnostic>> {
    let expr = parse_formula(text).map_err(|d| vec![d])?;
    let mut ck = Resolver {
        scope,
        bound: params.iter().map(|p| p.name.clone()).collect(),
        inferred: Vec::new(),
        diags: Vec::new(),
    };
    for p in params {
        ck.set(&p.set);
    }
    ck.expr(&expr);
    if !ck.diags.is_empty() {
        return Err(ck.diags);
    }
    let mut all = params.to_vec();
    all.extend(ck.inferred);
    Ok(LtlFormula { expr, params: all })
}

/// [`parse_ltl`] on a property declared in a model file, with diagnostics
/// positioned in that file.
pub fn parse_property(
    prop: &PropertySource,
    scope: &dyn Namespace,
) -> Result<LtlFormula, Vec<Diagnostic>> {
    parse_ltl(&prop.text, scope, &prop.params).map_err(|diags| {
        diags
            .into_iter()
            .map(|mut d| {
                d.span = shift(d.span, prop.span);
                d
            })
            .collect()
    })
}

fn shift(span: Span, base: Span) -> Span {
    Span {
        line: span.line + base.line - 1,
        col: if span.line == 1 {
            span.col + base.col - 1
        } else {
            span.col
        },
        start: span.start + base.start,
        end: span.end + base.start,
    }
}

/// Syntax-only parse of a formula.
pub fn parse_formula(text: &str) -> Result<Expr, Diagnostic> {
    let mut parser = Parser::new(text, ExprMode::Property)?;
    let expr = parser.expr()?;
    if !parser.at_eof() {
        return Err(parser.trailing_error());
    }
    Ok(expr)
}

/// Parses a sidecar property file: one `name [(params)] : formula` per line.
/// Blank lines and `--` / `//` comment lines are skipped.
pub fn parse_property_file(text: &str) -> Result<Vec<PropertySource>, Vec<Diagnostic>> {
    let mut out = Vec::new();
    let mut diags = Vec::new();
    let mut offset = 0usize;
    for (lineno, line) in text.split_inclusive('\n').enumerate() {
        let trimmed = line.trim();
        let base = Span::new(lineno as u32 + 1, 1, offset, offset);
        offset += line.len();
        if trimmed.is_empty() || trimmed.starts_with("--") || trimmed.starts_with("//") {
            continue;
        }
        let parsed = Parser::new(line.trim_end(), ExprMode::Property)
            .and_then(|mut p| p.property_line());
        match parsed {
            Ok(mut prop) => {
                prop.span = shift(prop.span, base);
                out.push(prop);
            }
            Err(mut d) => {
                d.span = shift(d.span, base);
                diags.push(d);
            }
        }
    }
    if diags.is_empty() {
        Ok(out)
    } else {
        Err(diags)
    }
}

struct Resolver<'a> {
    scope: &'a dyn Namespace,
    bound: Vec<String>,
    inferred: Vec<IndexDecl>,
    diags: Vec<Diagnostic>,
}

impl Resolver<'_> {
    fn unknown(&mut self, what: &str, name: &str, span: Span) {
        self.diags.push(Diagnostic::new(
            DiagnosticKind::UnknownAtom,
            format!("unknown {what} `{name}`"),
            span,
        ));
    }

    fn set(&mut self, set: &SetExpr) {
        match set {
            SetExpr::Named(name, span) => {
                if !self.scope.is_set(name) {
                    self.unknown("set", name, *span);
                }
            }
            SetExpr::Range(lo, hi) => {
                self.expr(lo);
                self.expr(hi);
            }
            SetExpr::Literal(items) => items.iter().for_each(|e| self.expr(e)),
            SetExpr::Bool => {}
        }
    }

    fn name(&mut self, name: &str, span: Span) {
        if self.bound.iter().any(|b| b == name)
            || self.scope.is_variable(name)
            || self.scope.is_timer(name)
            || self.scope.is_value(name)
        {
            return;
        }
        if let Some((fair, _)) = self.scope.event_arity(name) {
            if fair != 0 {
                self.diags.push(Diagnostic::new(
                    DiagnosticKind::ArityError,
                    format!("event `{name}` takes {fair} index values, got 0"),
                    span,
                ));
            }
            return;
        }
        if let Some(values) = self.scope.fair_index_values(name) {
            self.bound.push(name.to_string());
            self.inferred.push(IndexDecl {
                name: name.to_string(),
                set: SetExpr::Literal(values),
            });
            return;
        }
        self.unknown("name", name, span);
    }

    fn expr(&mut self, e: &Expr) {
        match e {
            Expr::Int(_) | Expr::Bool(_) => {}
            Expr::Name {
                name, primed, span, ..
            } => {
                if *primed {
                    self.diags.push(Diagnostic::new(
                        DiagnosticKind::SyntaxError,
                        "primed names are not allowed in properties",
                        *span,
                    ));
                }
                self.name(name, *span);
            }
            Expr::Index { base, index } => {
                self.expr(base);
                self.expr(index);
            }
            Expr::Unary { arg, .. } | Expr::Temporal { arg, .. } => self.expr(arg),
            Expr::Binary { lhs, rhs, .. } | Expr::Until { lhs, rhs } => {
                self.expr(lhs);
                self.expr(rhs);
            }
            Expr::Method { target, .. } => self.expr(target),
            Expr::Mono { timer, span } => {
                if !self.scope.is_timer(timer) {
                    self.unknown("timer", timer, *span);
                }
            }
            Expr::Fold { var, set, body, .. } => {
                self.set(set);
                self.bound.push(var.clone());
                self.expr(body);
                self.bound.pop();
            }
            Expr::Quant { vars, set, body, .. } => {
                self.set(set);
                let n = self.bound.len();
                self.bound.extend(vars.iter().cloned());
                self.expr(body);
                self.bound.truncate(n);
            }
            Expr::Apply {
                name, args, span, ..
            } => {
                args.iter().for_each(|a| self.expr(a));
                if let Some((fair, demonic)) = self.scope.event_arity(name) {
                    if args.len() != fair && args.len() != fair + demonic {
                        let expected = if demonic == 0 {
                            format!("{fair}")
                        } else {
                            format!("{fair} or {}", fair + demonic)
                        };
                        self.diags.push(Diagnostic::new(
                            DiagnosticKind::ArityError,
                            format!(
                                "event `{name}` takes {expected} index values, got {}",
                                args.len()
                            ),
                            *span,
                        ));
                    }
                } else if let Some(n) = self.scope.predicate_arity(name) {
                    if args.len() != n {
                        self.diags.push(Diagnostic::new(
                            DiagnosticKind::ArityError,
                            format!("predicate `{name}` takes {n} arguments, got {}", args.len()),
                            *span,
                        ));
                    }
                } else {
                    self.unknown("event or predicate", name, *span);
                }
            }
        }
    }
}

/// Names bound by quantifiers or parameters are not atoms.
pub fn free_names(e: &Expr) -> HashSet<String> {
    let mut out = HashSet::new();
    fn go(e: &Expr, bound: &mut Vec<String>, out: &mut HashSet<String>) {
        match e {
            Expr::Name { name, .. } if !bound.contains(name) => {
                out.insert(name.clone());
            }
            Expr::Fold { var, body, .. } => {
                bound.push(var.clone());
                go(body, bound, out);
                bound.pop();
            }
            Expr::Quant { vars, body, .. } => {
                let n = bound.len();
                bound.extend(vars.iter().cloned());
                go(body, bound, out);
                bound.truncate(n);
            }
            Expr::Index { base, index } => {
                go(base, bound, out);
                go(index, bound, out);
            }
            Expr::Unary { arg, .. } | Expr::Temporal { arg, .. } => go(arg, bound, out),
            Expr::Binary { lhs, rhs, .. } | Expr::Until { lhs, rhs } => {
                go(lhs, bound, out);
                go(rhs, bound, out);
            }
            Expr::Method { target, .. } => go(target, bound, out),
            Expr::Apply { args, .. } => args.iter().for_each(|a| go(a, bound, out)),
            _ => {}
        }
    }
    go(e, &mut Vec::new(), &mut out);
    out
}
