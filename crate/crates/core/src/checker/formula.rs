//! Property formulas: quantifier expansion, atoms and negation normal form.

use std::collections::HashMap;
use std::fmt;

use crate::elaborator::{FExpr, FlatEvent, FlatModel, Kind, PropertyScope};
use crate::lts::eval::{Env, EvalError};
use crate::lts::{Lts, Transition};
use crate::syntax::{BinOp, Expr, SetExpr, TemporalOp, UnOp};

use super::CheckError;

/// Name bindings of quantified variables and property parameters.
pub type Bindings = Vec<(String, Kind, i32)>;

fn value_expr(model: &FlatModel, kind: Kind, v: i32) -> Expr {
    match kind {
        Kind::Bool => Expr::Bool(v != 0),
        Kind::Sym => Expr::name(model.render(Kind::Sym, v)),
        Kind::Int if v < 0 => Expr::Unary {
            op: UnOp::Neg,
            arg: Box::new(Expr::Int(-(v as i64))),
        },
        Kind::Int => Expr::Int(v as i64),
    }
}

fn set_error(set: &SetExpr, e: crate::elaborator::ElabError) -> CheckError {
    match set {
        SetExpr::Named(name, _) => CheckError::UnknownSet(name.clone()),
        _ => CheckError::Elab(e),
    }
}

fn conj(items: Vec<Expr>, op: BinOp, unit: bool) -> Expr {
    items
        .into_iter()
        .reduce(|a, b| Expr::binary(op, a, b))
        .unwrap_or(Expr::Bool(unit))
}

/// All valuations of `vars`, each ranging over `values`.
fn tuples(n: usize, values: &[i32]) -> Vec<Vec<i32>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t| {
                values.iter().map(move |&v| {
                    let mut t = t.clone();
                    t.push(v);
                    t
                })
            })
            .collect();
    }
    out
}

/// Replaces quantifiers by finite conjunctions and disjunctions, substitutes
/// bound names by their values, and spells out event atoms that omit their
/// demonic indices as a disjunction over all demonic valuations.
pub fn expand_quantifiers(f: &Expr, model: &FlatModel, bindings: &Bindings) -> Result<Expr, CheckError> {
    let scope = PropertyScope::new(model);
    let mut env: Vec<(String, Option<(Kind, i32)>)> =
        bindings.iter().map(|(n, k, v)| (n.clone(), Some((*k, *v)))).collect();
    expand(f, model, &scope, &mut env)
}

fn known(env: &[(String, Option<(Kind, i32)>)]) -> Bindings {
    let mut out: Bindings = Vec::new();
    for (n, b) in env {
        out.retain(|(m, _, _)| m != n);
        if let Some((k, v)) = b {
            out.push((n.clone(), *k, *v));
        }
    }
    out
}

fn expand(
    f: &Expr,
    model: &FlatModel,
    scope: &PropertyScope,
    env: &mut Vec<(String, Option<(Kind, i32)>)>,
) -> Result<Expr, CheckError> {
    let rec = |e: &Expr, env: &mut Vec<_>| expand(e, model, scope, env).map(Box::new);
    Ok(match f {
        Expr::Int(_) | Expr::Bool(_) | Expr::Mono { .. } => f.clone(),
        Expr::Name { name, .. } => match env.iter().rev().find(|(n, _)| n == name) {
            Some((_, Some((k, v)))) => value_expr(model, *k, *v),
            _ => f.clone(),
        },
        Expr::Index { base, index } => Expr::Index {
            base: rec(base, env)?,
            index: rec(index, env)?,
        },
        Expr::Unary { op, arg } => Expr::Unary {
            op: *op,
            arg: rec(arg, env)?,
        },
        Expr::Binary { op, lhs, rhs } => Expr::Binary {
            op: *op,
            lhs: rec(lhs, env)?,
            rhs: rec(rhs, env)?,
        },
        Expr::Method { target, method } => Expr::Method {
            target: rec(target, env)?,
            method: *method,
        },
        Expr::Temporal { op, arg } => Expr::Temporal {
            op: *op,
            arg: rec(arg, env)?,
        },
        Expr::Until { lhs, rhs } => Expr::Until {
            lhs: rec(lhs, env)?,
            rhs: rec(rhs, env)?,
        },
        Expr::Fold {
            conjunction,
            var,
            set,
            body,
        } => {
            let set = expand_set(set, model, scope, env)?;
            env.push((var.clone(), None));
            let body = rec(body, env);
            env.pop();
            Expr::Fold {
                conjunction: *conjunction,
                var: var.clone(),
                set,
                body: body?,
            }
        }
        Expr::Quant {
            forall,
            vars,
            set,
            body,
        } => {
            let dom = scope.domain(set, &known(env)).map_err(|e| set_error(set, e))?;
            let mut parts = Vec::new();
            for t in tuples(vars.len(), &dom.values) {
                for (n, v) in vars.iter().zip(&t) {
                    env.push((n.clone(), Some((dom.kind, *v))));
                }
                let part = expand(body, model, scope, env);
                env.truncate(env.len() - vars.len());
                parts.push(part?);
            }
            if *forall {
                conj(parts, BinOp::And, true)
            } else {
                conj(parts, BinOp::Or, false)
            }
        }
        Expr::Apply {
            name,
            args,
            explicit_call,
            span,
        } => {
            let args: Vec<Expr> = args
                .iter()
                .map(|a| expand(a, model, scope, env))
                .collect::<Result<_, _>>()?;
            let apply = |args: Vec<Expr>| Expr::Apply {
                name: name.clone(),
                args,
                explicit_call: *explicit_call,
                span: *span,
            };
            match model.event_index(name).map(|e| &model.events[e]) {
                Some(ev) if !ev.d_ind.is_empty() && args.len() == ev.f_ind.len() => {
                    let mut vals = vec![0; ev.d_ind.len()];
                    let parts = (0..ev.demonic_count())
                        .map(|r| {
                            FlatEvent::valuation(&ev.d_ind, r, &mut vals);
                            let mut full = args.clone();
                            full.extend(
                                ev.d_ind
                                    .iter()
                                    .zip(&vals)
                                    .map(|(p, &v)| value_expr(model, p.domain.kind, v)),
                            );
                            apply(full)
                        })
                        .collect();
                    conj(parts, BinOp::Or, false)
                }
                _ => apply(args),
            }
        }
    })
}

fn expand_set(
    set: &SetExpr,
    model: &FlatModel,
    scope: &PropertyScope,
    env: &mut Vec<(String, Option<(Kind, i32)>)>,
) -> Result<SetExpr, CheckError> {
    Ok(match set {
        SetExpr::Range(lo, hi) => SetExpr::Range(
            Box::new(expand(lo, model, scope, env)?),
            Box::new(expand(hi, model, scope, env)?),
        ),
        SetExpr::Literal(items) => SetExpr::Literal(
            items
                .iter()
                .map(|e| expand(e, model, scope, env))
                .collect::<Result<_, _>>()?,
        ),
        SetExpr::Named(..) | SetExpr::Bool => set.clone(),
    })
}

/// Parameter valuations of a property: one checking instance each.
pub fn instantiations(params: &[crate::syntax::IndexDecl], model: &FlatModel) -> Result<Vec<Bindings>, CheckError> {
    let scope = PropertyScope::new(model);
    let mut out: Vec<Bindings> = vec![vec![]];
    for p in params {
        let dom = scope.domain(&p.set, &[]).map_err(|e| set_error(&p.set, e))?;
        out = out
            .into_iter()
            .flat_map(|b| {
                dom.values.iter().map(move |&v| {
                    let mut b = b.clone();
                    b.push((p.name.clone(), dom.kind, v));
                    b
                })
            })
            .collect();
    }
    Ok(out)
}

// ---- atoms --------------------------------------------------------------

/// A proposition evaluated on single configurations.
#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    /// A boolean expression over state and timers; `slots` locals for folds.
    State { expr: FExpr, slots: u32, text: String },
    /// `mono(t)`.
    Mono(u32),
    /// The last transition is an occurrence of the event with this fair
    /// valuation (and demonic valuation, when given).
    Event { event: u32, fair: u32, demonic: Option<u32> },
}

impl Atom {
    pub fn eval(&self, lts: &Lts, c: &[i32]) -> Result<bool, EvalError> {
        match self {
            Atom::State { expr, slots, .. } => {
                let state = lts.state(c);
                let mut locals = vec![0; (*slots).max(1) as usize];
                let mut env = Env {
                    model: &lts.model,
                    pre: state,
                    post: state,
                    timers: lts.timers(c),
                    locals: &mut locals,
                };
                Ok(env.eval(expr)? != 0)
            }
            Atom::Mono(t) => Ok(lts.mono(c, *t as usize)),
            Atom::Event { event, fair, demonic } => Ok(match lts.last(c) {
                Some(Transition::Event {
                    event: e,
                    fair: f,
                    demonic: d,
                }) => e == *event && f == *fair && demonic.is_none_or(|x| x == d),
                _ => false,
            }),
        }
    }

    pub fn render(&self, lts: &Lts) -> String {
        match self {
            Atom::State { text, .. } => text.clone(),
            Atom::Mono(t) => format!("mono({})", lts.model.timers[*t as usize].name),
            Atom::Event { event, fair, demonic } => {
                let ev = &lts.model.events[*event as usize];
                let mut args = lts.fair_values(*event, *fair);
                if let Some(d) = demonic {
                    args.extend(lts.demonic_values(*event, *d));
                }
                if args.is_empty() {
                    ev.id.clone()
                } else {
                    format!("{}({})", ev.id, args.join(", "))
                }
            }
        }
    }
}

/// A temporal formula over numbered atoms.
#[derive(Debug, Clone, PartialEq)]
pub enum Ltl {
    True,
    False,
    Atom(u32),
    Not(Box<Ltl>),
    And(Box<Ltl>, Box<Ltl>),
    Or(Box<Ltl>, Box<Ltl>),
    Until(Box<Ltl>, Box<Ltl>),
    Always(Box<Ltl>),
    Eventually(Box<Ltl>),
}

impl Ltl {
    pub fn not(a: Ltl) -> Ltl {
        match a {
            Ltl::True => Ltl::False,
            Ltl::False => Ltl::True,
            Ltl::Not(a) => *a,
            a => Ltl::Not(Box::new(a)),
        }
    }

    pub fn and(a: Ltl, b: Ltl) -> Ltl {
        match (a, b) {
            (Ltl::False, _) | (_, Ltl::False) => Ltl::False,
            (Ltl::True, x) | (x, Ltl::True) => x,
            (a, b) => Ltl::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn or(a: Ltl, b: Ltl) -> Ltl {
        match (a, b) {
            (Ltl::True, _) | (_, Ltl::True) => Ltl::True,
            (Ltl::False, x) | (x, Ltl::False) => x,
            (a, b) => Ltl::Or(Box::new(a), Box::new(b)),
        }
    }

    pub fn always(a: Ltl) -> Ltl {
        Ltl::Always(Box::new(a))
    }

    pub fn eventually(a: Ltl) -> Ltl {
        Ltl::Eventually(Box::new(a))
    }

    pub fn until(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Until(Box::new(a), Box::new(b))
    }

    /// Number of operators and atoms.
    pub fn size(&self) -> usize {
        match self {
            Ltl::True | Ltl::False | Ltl::Atom(_) => 1,
            Ltl::Not(a) | Ltl::Always(a) | Ltl::Eventually(a) => 1 + a.size(),
            Ltl::And(a, b) | Ltl::Or(a, b) | Ltl::Until(a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Truth of the formula at position 0 of the infinite word
    /// `w[0] .. w[n-1] (w[k] .. w[n-1])^ω`; `val(i, a)` gives atom `a` at
    /// position `i`.
    pub fn holds_on_lasso(&self, n: usize, k: usize, val: &dyn Fn(usize, u32) -> bool) -> bool {
        assert!(k < n, "loop start outside the word");
        self.positions(n, k, val)[0]
    }

    fn positions(&self, n: usize, k: usize, val: &dyn Fn(usize, u32) -> bool) -> Vec<bool> {
        let next = |i: usize| if i + 1 == n { k } else { i + 1 };
        // Least (`init` false) or greatest (`init` true) fixpoint of
        // x[i] = now[i] || (keep[i] && x[next i]), resp. with && for `init`.
        let fix = |now: &[bool], keep: &[bool], least: bool| {
            let mut x = vec![!least; n];
            loop {
                let mut changed = false;
                for i in (0..n).rev() {
                    let v = if least {
                        now[i] || (keep[i] && x[next(i)])
                    } else {
                        now[i] && x[next(i)]
                    };
                    if v != x[i] {
                        x[i] = v;
                        changed = true;
                    }
                }
                if !changed {
                    return x;
                }
            }
        };
        match self {
            Ltl::True => vec![true; n],
            Ltl::False => vec![false; n],
            Ltl::Atom(a) => (0..n).map(|i| val(i, *a)).collect(),
            Ltl::Not(a) => a.positions(n, k, val).into_iter().map(|b| !b).collect(),
            Ltl::And(a, b) | Ltl::Or(a, b) => {
                let x = a.positions(n, k, val);
                let y = b.positions(n, k, val);
                let and = matches!(self, Ltl::And(..));
                x.iter().zip(&y).map(|(p, q)| if and { *p && *q } else { *p || *q }).collect()
            }
            Ltl::Until(a, b) => fix(&b.positions(n, k, val), &a.positions(n, k, val), true),
            Ltl::Eventually(a) => fix(&a.positions(n, k, val), &vec![true; n], true),
            Ltl::Always(a) => fix(&a.positions(n, k, val), &[], false),
        }
    }
}

/// A quantifier-free property ready for checking.
#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    pub ltl: Ltl,
    pub atoms: Vec<Atom>,
}

impl Formula {
    /// Translates a quantifier-free property. Maximal temporal-free
    /// subexpressions become single state atoms.
    pub fn compile(model: &FlatModel, e: &Expr) -> Result<Formula, CheckError> {
        let scope = PropertyScope::new(model);
        let mut tr = Translator {
            model,
            scope: &scope,
            atoms: Vec::new(),
        };
        let ltl = tr.ltl(e)?;
        Ok(Formula { ltl, atoms: tr.atoms })
    }

    /// `p` when the formula is `[]p` with `p` a state atom.
    pub fn as_invariant(&self) -> Option<&Atom> {
        match &self.ltl {
            Ltl::Always(a) => match **a {
                Ltl::Atom(i) if matches!(self.atoms[i as usize], Atom::State { .. }) => Some(&self.atoms[i as usize]),
                _ => None,
            },
            _ => None,
        }
    }

    /// Atom values of every configuration of `lts` in `configs`, as bit
    /// rows of `words` u64 each.
    pub fn atom_rows<'c>(
        &self,
        lts: &Lts,
        configs: impl Iterator<Item = &'c [i32]>,
    ) -> Result<AtomRows, CheckError> {
        let words = self.atoms.len().div_ceil(64).max(1);
        let mut bits = Vec::new();
        for c in configs {
            let start = bits.len();
            bits.resize(start + words, 0u64);
            for (i, a) in self.atoms.iter().enumerate() {
                if a.eval(lts, c).map_err(|e| CheckError::Eval(e, a.render(lts)))? {
                    bits[start + i / 64] |= 1 << (i % 64);
                }
            }
        }
        Ok(AtomRows { words, bits })
    }

    pub fn render(&self, lts: &Lts) -> String {
        fn go(f: &Ltl, atoms: &[Atom], lts: &Lts) -> String {
            match f {
                Ltl::True => "true".into(),
                Ltl::False => "false".into(),
                Ltl::Atom(a) => atoms[*a as usize].render(lts),
                Ltl::Not(a) => format!("!{}", go(a, atoms, lts)),
                Ltl::And(a, b) => format!("({} && {})", go(a, atoms, lts), go(b, atoms, lts)),
                Ltl::Or(a, b) => format!("({} || {})", go(a, atoms, lts), go(b, atoms, lts)),
                Ltl::Until(a, b) => format!("({} U {})", go(a, atoms, lts), go(b, atoms, lts)),
                Ltl::Always(a) => format!("[]{}", go(a, atoms, lts)),
                Ltl::Eventually(a) => format!("<>{}", go(a, atoms, lts)),
            }
        }
        go(&self.ltl, &self.atoms, lts)
    }
}

/// Per-configuration atom bits.
#[derive(Debug, Clone)]
pub struct AtomRows {
    words: usize,
    bits: Vec<u64>,
}

impl AtomRows {
    pub fn get(&self, config: usize, atom: u32) -> bool {
        let a = atom as usize;
        self.bits[config * self.words + a / 64] >> (a % 64) & 1 == 1
    }
}

struct Translator<'a> {
    model: &'a FlatModel,
    scope: &'a PropertyScope,
    atoms: Vec<Atom>,
}

impl Translator<'_> {
    fn atom(&mut self, a: Atom) -> Ltl {
        let i = match self.atoms.iter().position(|x| *x == a) {
            Some(i) => i,
            None => {
                self.atoms.push(a);
                self.atoms.len() - 1
            }
        };
        Ltl::Atom(i as u32)
    }

    /// True when `e` is a plain state predicate.
    fn is_state(&self, e: &Expr) -> bool {
        let mut ok = true;
        e.walk(&mut |x| match x {
            Expr::Temporal { .. } | Expr::Until { .. } | Expr::Quant { .. } | Expr::Mono { .. } => ok = false,
            Expr::Apply { name, .. } if self.model.event_index(name).is_some() => ok = false,
            Expr::Name { name, .. } if self.is_event_name(name) => ok = false,
            _ => {}
        });
        ok
    }

    fn is_event_name(&self, name: &str) -> bool {
        self.model.var_index(name).is_none()
            && self.model.timer_index(name).is_none()
            && self.model.event_index(name).is_some()
    }

    fn ltl(&mut self, e: &Expr) -> Result<Ltl, CheckError> {
        if self.is_state(e) {
            let (expr, slots) = self.scope.predicate(e, &[]).map_err(CheckError::Elab)?;
            return Ok(match expr {
                FExpr::Const(0) => Ltl::False,
                FExpr::Const(_) => Ltl::True,
                expr => {
                    let text = crate::elaborator::render_expr(self.model, &expr, &[]);
                    self.atom(Atom::State { expr, slots, text })
                }
            });
        }
        Ok(match e {
            Expr::Unary { op: UnOp::Not, arg } => Ltl::not(self.ltl(arg)?),
            Expr::Binary { op, lhs, rhs } if matches!(op, BinOp::And | BinOp::Or | BinOp::Implies) => {
                let a = self.ltl(lhs)?;
                let b = self.ltl(rhs)?;
                match op {
                    BinOp::And => Ltl::and(a, b),
                    BinOp::Or => Ltl::or(a, b),
                    _ => Ltl::or(Ltl::not(a), b),
                }
            }
            Expr::Temporal { op, arg } => {
                let a = self.ltl(arg)?;
                match op {
                    TemporalOp::Always => Ltl::always(a),
                    TemporalOp::Eventually => Ltl::eventually(a),
                }
            }
            Expr::Until { lhs, rhs } => Ltl::until(self.ltl(lhs)?, self.ltl(rhs)?),
            Expr::Mono { timer, .. } => {
                let t = self
                    .model
                    .timer_index(timer)
                    .ok_or_else(|| CheckError::Unsupported(format!("unknown timer `{timer}`")))?;
                self.atom(Atom::Mono(t as u32))
            }
            Expr::Name { name, .. } if self.is_event_name(name) => self.event_atom(name, &[])?,
            Expr::Apply { name, args, .. } if self.model.event_index(name).is_some() => self.event_atom(name, args)?,
            Expr::Quant { .. } => {
                let flat = expand_quantifiers(e, self.model, &vec![])?;
                self.ltl(&flat)?
            }
            Expr::Fold {
                conjunction,
                var,
                set,
                body,
            } => {
                let q = Expr::Quant {
                    forall: *conjunction,
                    vars: vec![var.clone()],
                    set: set.clone(),
                    body: body.clone(),
                };
                self.ltl(&q)?
            }
            _ => {
                return Err(CheckError::Unsupported(
                    "temporal operators, event atoms and mono() may only be combined with !, &&, || and =>".into(),
                ))
            }
        })
    }

    fn event_atom(&mut self, name: &str, args: &[Expr]) -> Result<Ltl, CheckError> {
        let e = self.model.event_index(name).expect("event");
        let ev = &self.model.events[e];
        let nf = ev.f_ind.len();
        if args.len() != nf && args.len() != nf + ev.d_ind.len() {
            return Err(CheckError::Unsupported(format!(
                "event `{name}` takes {nf} or {} index values",
                nf + ev.d_ind.len()
            )));
        }
        let mut vals = Vec::new();
        for a in args {
            let (_, v) = self.scope.value(a, &[]).map_err(CheckError::Elab)?;
            vals.push(v);
        }
        let Some(fair) = FlatEvent::rank(&ev.f_ind, &vals[..nf]) else {
            // A value outside the index set never occurs.
            return Ok(Ltl::False);
        };
        let demonic = if args.len() > nf {
            match FlatEvent::rank(&ev.d_ind, &vals[nf..]) {
                Some(d) => Some(d as u32),
                None => return Ok(Ltl::False),
            }
        } else {
            None
        };
        Ok(self.atom(Atom::Event {
            event: e as u32,
            fair: fair as u32,
            demonic,
        }))
    }
}

// ---- negation normal form --------------------------------------------------

/// Formulas in negation normal form, hash-consed in an arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Nnf {
    True,
    False,
    Lit(u32, bool),
    And(u32, u32),
    Or(u32, u32),
    Next(u32),
    Until(u32, u32),
    Release(u32, u32),
}

#[derive(Debug, Clone, Default)]
pub struct Arena {
    pub nodes: Vec<Nnf>,
    index: HashMap<Nnf, u32>,
}

impl Arena {
    pub fn add(&mut self, n: Nnf) -> u32 {
        if let Some(&i) = self.index.get(&n) {
            return i;
        }
        let i = self.nodes.len() as u32;
        self.nodes.push(n);
        self.index.insert(n, i);
        i
    }

    pub fn find(&self, n: Nnf) -> Option<u32> {
        self.index.get(&n).copied()
    }

    /// Adds `f` (negated when `neg`) in negation normal form.
    pub fn nnf(&mut self, f: &Ltl, neg: bool) -> u32 {
        let node = match f {
            Ltl::True | Ltl::False => {
                if matches!(f, Ltl::True) != neg {
                    Nnf::True
                } else {
                    Nnf::False
                }
            }
            Ltl::Atom(a) => Nnf::Lit(*a, !neg),
            Ltl::Not(a) => return self.nnf(a, !neg),
            Ltl::And(a, b) | Ltl::Or(a, b) => {
                let x = self.nnf(a, neg);
                let y = self.nnf(b, neg);
                if matches!(f, Ltl::And(..)) != neg {
                    Nnf::And(x, y)
                } else {
                    Nnf::Or(x, y)
                }
            }
            Ltl::Until(a, b) => {
                let x = self.nnf(a, neg);
                let y = self.nnf(b, neg);
                if neg {
                    Nnf::Release(x, y)
                } else {
                    Nnf::Until(x, y)
                }
            }
            Ltl::Always(a) | Ltl::Eventually(a) => {
                let x = self.nnf(a, neg);
                if matches!(f, Ltl::Always(_)) != neg {
                    Nnf::Release(self.add(Nnf::False), x)
                } else {
                    Nnf::Until(self.add(Nnf::True), x)
                }
            }
        };
        self.add(node)
    }
}

impl fmt::Display for Ltl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ltl::True => f.write_str("true"),
            Ltl::False => f.write_str("false"),
            Ltl::Atom(a) => write!(f, "p{a}"),
            Ltl::Not(a) => write!(f, "!{a}"),
            Ltl::And(a, b) => write!(f, "({a} && {b})"),
            Ltl::Or(a, b) => write!(f, "({a} || {b})"),
            Ltl::Until(a, b) => write!(f, "({a} U {b})"),
            Ltl::Always(a) => write!(f, "[]{a}"),
            Ltl::Eventually(a) => write!(f, "<>{a}"),
        }
    }
}
