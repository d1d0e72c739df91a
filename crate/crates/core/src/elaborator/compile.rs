//! Name resolution and type checking of expressions and statements.

use std::collections::HashMap;

use indexmap::IndexMap;

use super::model::*;
use super::{ElabError, ElabErrorKind};
use crate::syntax::{
    BinOp, Expr, Init, LValue, Mode, PredicateDecl, QueueMethod, SetExpr, SourceModel, Span,
    Stmt, TypeExpr, UnOp,
};

/// Top-level declarations shared by every instance.
#[derive(Debug, Clone, Default)]
pub(crate) struct Globals {
    pub symbols: Vec<String>,
    pub sym_index: HashMap<String, i32>,
    pub constants: IndexMap<String, (Kind, i32)>,
    pub sets: IndexMap<String, Domain>,
    pub predicates: Vec<PredicateDecl>,
}

impl Globals {
    pub fn build(model: &SourceModel) -> Result<Globals, ElabError> {
        let mut g = Globals {
            predicates: model.predicates.clone(),
            ..Default::default()
        };
        let const_names: Vec<&str> = model.constants.iter().map(|c| c.name.as_str()).collect();
        // Bare names in literal sets of type declarations introduce symbols.
        for t in &model.types {
            if let SetExpr::Literal(items) = &t.set {
                for item in items {
                    if let Expr::Name {
                        name,
                        primed: false,
                        ..
                    } = item
                    {
                        if !const_names.contains(&name.as_str()) {
                            g.intern(name);
                        }
                    }
                }
            }
        }
        let empty = Names::default();
        for c in &model.constants {
            let mut cx = Compiler::new(&g, &empty);
            let (e, kind) = cx.expr(&c.value)?;
            let v = fold_const(&e).ok_or_else(|| {
                ElabError::new(
                    ElabErrorKind::TypeError,
                    format!("constant `{}` is not a compile-time value", c.name),
                    c.span,
                )
            })?;
            g.constants.insert(c.name.clone(), (kind, v));
        }
        for t in &model.types {
            let mut cx = Compiler::new(&g, &empty);
            let d = cx.domain(&t.set)?;
            g.sets.insert(t.name.clone(), d);
        }
        Ok(g)
    }

    pub fn intern(&mut self, name: &str) -> i32 {
        if let Some(&i) = self.sym_index.get(name) {
            return i;
        }
        let i = self.symbols.len() as i32;
        self.symbols.push(name.to_string());
        self.sym_index.insert(name.to_string(), i);
        i
    }
}

/// What a name means inside one instance or at global level.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Bound {
    Var(u32),
    /// An interface slot bound to one element of a global array.
    Elem(u32, i32),
    Const(Kind, i32),
    Timer(u32),
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Names {
    pub map: HashMap<String, Bound>,
    /// Declared modes of interface slots, for write checks.
    pub modes: HashMap<String, Mode>,
    pub var_types: Vec<VarType>,
}

impl Names {
    fn var_type(&self, v: u32) -> &VarType {
        &self.var_types[v as usize]
    }
}

#[derive(Debug, Clone)]
enum EnvEntry {
    Slot(u32, Kind),
    Subst(FExpr, Kind),
}

pub(crate) struct Compiler<'a> {
    g: &'a Globals,
    names: &'a Names,
    env: Vec<(String, EnvEntry)>,
    pub next_slot: u32,
    pub max_slot: u32,
    pub allow_primed: bool,
    /// Next `if` statement id; ids are unique across a compound event.
    pub if_counter: u32,
}

fn err(kind: ElabErrorKind, msg: impl Into<String>, span: Span) -> ElabError {
    ElabError::new(kind, msg, span)
}

fn span_of(e: &Expr, fallback: Span) -> Span {
    e.span().unwrap_or(fallback)
}

impl<'a> Compiler<'a> {
    pub fn new(g: &'a Globals, names: &'a Names) -> Self {
        Compiler {
            g,
            names,
            env: Vec::new(),
            next_slot: 0,
            max_slot: 0,
            allow_primed: false,
            if_counter: 0,
        }
    }

    /// Binds `name` to a fresh local slot.
    pub fn push_slot(&mut self, name: &str, kind: Kind) -> u32 {
        let slot = self.next_slot;
        self.next_slot += 1;
        self.max_slot = self.max_slot.max(self.next_slot);
        self.env.push((name.to_string(), EnvEntry::Slot(slot, kind)));
        slot
    }

    /// Binds `name` to an existing slot.
    pub fn bind_slot(&mut self, name: &str, slot: u32, kind: Kind) {
        self.max_slot = self.max_slot.max(slot + 1);
        self.env.push((name.to_string(), EnvEntry::Slot(slot, kind)));
    }

    pub fn bind_value(&mut self, name: &str, kind: Kind, v: i32) {
        self.env
            .push((name.to_string(), EnvEntry::Subst(FExpr::Const(v), kind)));
    }

    pub fn pop(&mut self, n: usize) {
        self.env.truncate(self.env.len() - n);
    }

    fn lookup_env(&self, name: &str) -> Option<(FExpr, Kind)> {
        self.env.iter().rev().find(|(n, _)| n == name).map(|(_, e)| match e {
            EnvEntry::Slot(s, k) => (FExpr::Local(*s), *k),
            EnvEntry::Subst(e, k) => (e.clone(), *k),
        })
    }

    // ---- sets -----------------------------------------------------------

    pub fn domain(&mut self, set: &SetExpr) -> Result<Domain, ElabError> {
        match set {
            SetExpr::Bool => Ok(Domain::bool()),
            SetExpr::Named(name, span) => self.g.sets.get(name).cloned().ok_or_else(|| {
                err(
                    ElabErrorKind::UnknownReference,
                    format!("unknown set `{name}`"),
                    *span,
                )
            }),
            SetExpr::Range(lo, hi) => {
                let lo = self.const_int(lo)?;
                let hi = self.const_int(hi)?;
                Ok(if lo > hi {
                    Domain {
                        kind: Kind::Int,
                        values: vec![],
                    }
                } else {
                    Domain::range(lo, hi)
                })
            }
            SetExpr::Literal(items) => {
                let mut kind = None;
                let mut values = Vec::new();
                for item in items {
                    let (e, k) = self.expr(item)?;
                    let sp = span_of(item, Span::default());
                    let v = fold_const(&e).ok_or_else(|| {
                        err(ElabErrorKind::TypeError, "set elements must be constants", sp)
                    })?;
                    if kind.is_some_and(|kd| kd != k) {
                        return Err(err(
                            ElabErrorKind::TypeError,
                            "set elements must all have the same type",
                            sp,
                        ));
                    }
                    kind = Some(k);
                    if !values.contains(&v) {
                        values.push(v);
                    }
                }
                Ok(Domain {
                    kind: kind.unwrap_or(Kind::Int),
                    values,
                })
            }
        }
    }

    pub fn const_int(&mut self, e: &Expr) -> Result<i32, ElabError> {
        let (f, k) = self.expr(e)?;
        let sp = span_of(e, Span::default());
        if k != Kind::Int {
            return Err(err(ElabErrorKind::TypeError, "expected an integer", sp));
        }
        fold_const(&f)
            .ok_or_else(|| err(ElabErrorKind::TypeError, "expected a constant integer", sp))
    }

    pub fn const_value(&mut self, e: &Expr) -> Result<(Kind, i32), ElabError> {
        let (f, k) = self.expr(e)?;
        let v = fold_const(&f).ok_or_else(|| {
            err(
                ElabErrorKind::TypeError,
                "expected a constant",
                span_of(e, Span::default()),
            )
        })?;
        Ok((k, v))
    }

    pub fn var_type(&mut self, t: &TypeExpr, span: Span) -> Result<VarType, ElabError> {
        match t {
            TypeExpr::Set(s) => Ok(VarType::Scalar(self.nonempty(s, span)?)),
            TypeExpr::Array { index, elem } => {
                let index = self.nonempty(index, span)?;
                let TypeExpr::Set(elem) = &**elem else {
                    return Err(err(
                        ElabErrorKind::TypeError,
                        "array elements must be scalar",
                        span,
                    ));
                };
                let elem = self.nonempty(elem, span)?;
                Ok(VarType::Array { index, elem })
            }
            TypeExpr::Queue { elem, capacity } => {
                let TypeExpr::Set(elem) = &**elem else {
                    return Err(err(
                        ElabErrorKind::TypeError,
                        "queue elements must be scalar",
                        span,
                    ));
                };
                let elem = self.nonempty(elem, span)?;
                let cap = self.const_int(capacity)?;
                if cap < 1 {
                    return Err(err(
                        ElabErrorKind::BoundError,
                        "queue capacity must be positive",
                        span,
                    ));
                }
                Ok(VarType::Queue {
                    elem,
                    capacity: cap as usize,
                })
            }
        }
    }

    fn nonempty(&mut self, s: &SetExpr, span: Span) -> Result<Domain, ElabError> {
        let d = self.domain(s)?;
        if d.is_empty() {
            return Err(err(ElabErrorKind::TypeError, "empty type", span));
        }
        Ok(d)
    }

    pub fn initial(&mut self, ty: &VarType, init: Option<&Init>, span: Span) -> Result<Vec<i32>, ElabError> {
        let check = |d: &Domain, (k, v): (Kind, i32)| -> Result<i32, ElabError> {
            if k != d.kind || !d.contains(v) {
                return Err(err(
                    ElabErrorKind::TypeError,
                    "initial value outside the declared type",
                    span,
                ));
            }
            Ok(v)
        };
        match ty {
            VarType::Scalar(d) => match init {
                None => Ok(vec![d.values[0]]),
                Some(Init::Value(e)) => {
                    let cv = self.const_value(e)?;
                    Ok(vec![check(d, cv)?])
                }
                Some(Init::List(_)) => Err(err(
                    ElabErrorKind::TypeError,
                    "list initialiser for a scalar",
                    span,
                )),
            },
            VarType::Array { index, elem } => match init {
                None => Ok(vec![elem.values[0]; index.len()]),
                Some(Init::Value(e)) => {
                    let cv = self.const_value(e)?;
                    Ok(vec![check(elem, cv)?; index.len()])
                }
                Some(Init::List(items)) => {
                    if items.len() != index.len() {
                        return Err(err(
                            ElabErrorKind::TypeError,
                            format!("expected {} initial values", index.len()),
                            span,
                        ));
                    }
                    items
                        .iter()
                        .map(|e| {
                            let cv = self.const_value(e)?;
                            check(elem, cv)
                        })
                        .collect()
                }
            },
            VarType::Queue { elem, capacity } => {
                let mut slots = vec![0; 1 + capacity];
                slots[1..].fill(elem.values[0]);
                match init {
                    None => Ok(slots),
                    Some(Init::List(items)) if items.len() <= *capacity => {
                        slots[0] = items.len() as i32;
                        for (i, e) in items.iter().enumerate() {
                            let cv = self.const_value(e)?;
                            slots[1 + i] = check(elem, cv)?;
                        }
                        Ok(slots)
                    }
                    _ => Err(err(
                        ElabErrorKind::TypeError,
                        "queues are initialised with a list no longer than their capacity",
                        span,
                    )),
                }
            }
        }
    }

    // ---- expressions ----------------------------------------------------

    fn resolve(&self, name: &str, primed: bool, span: Span) -> Result<(FExpr, Kind), ElabError> {
        if let Some(r) = self.lookup_env(name) {
            if primed {
                return Err(err(
                    ElabErrorKind::TypeError,
                    format!("index `{name}` cannot be primed"),
                    span,
                ));
            }
            return Ok(r);
        }
        if let Some(b) = self.names.map.get(name) {
            return match b {
                Bound::Var(v) => match self.names.var_type(*v) {
                    VarType::Scalar(d) => Ok((FExpr::Var { var: *v, primed }, d.kind)),
                    _ => Err(err(
                        ElabErrorKind::TypeError,
                        format!("`{name}` is an array or queue, not a value"),
                        span,
                    )),
                },
                Bound::Elem(v, i) => Ok((
                    FExpr::Elem {
                        var: *v,
                        index: Box::new(FExpr::Const(*i)),
                        primed,
                    },
                    self.names.var_type(*v).elem().kind,
                )),
                Bound::Const(k, v) if !primed => Ok((FExpr::Const(*v), *k)),
                Bound::Timer(t) if !primed => Ok((FExpr::Timer(*t), Kind::Int)),
                _ => Err(err(
                    ElabErrorKind::TypeError,
                    format!("`{name}` cannot be primed"),
                    span,
                )),
            };
        }
        if primed {
            return Err(err(
                ElabErrorKind::UnknownReference,
                format!("`{name}` is not a variable"),
                span,
            ));
        }
        if let Some(&(k, v)) = self.g.constants.get(name) {
            return Ok((FExpr::Const(v), k));
        }
        if let Some(&s) = self.g.sym_index.get(name) {
            return Ok((FExpr::Const(s), Kind::Sym));
        }
        Err(err(
            ElabErrorKind::UnknownReference,
            format!("unknown name `{name}`"),
            span,
        ))
    }

    fn collection(&self, e: &Expr) -> Option<(u32, bool, Span)> {
        if let Expr::Name { name, primed, span } = e {
            if self.lookup_env(name).is_none() {
                if let Some(Bound::Var(v)) = self.names.map.get(name) {
                    return Some((*v, *primed, *span));
                }
            }
        }
        None
    }

    fn check_primed(&self, primed: bool, span: Span) -> Result<(), ElabError> {
        if primed && !self.allow_primed {
            return Err(err(
                ElabErrorKind::TypeError,
                "primed variables may only appear in actions",
                span,
            ));
        }
        Ok(())
    }

    pub fn bool_expr(&mut self, e: &Expr) -> Result<FExpr, ElabError> {
        let (f, k) = self.expr(e)?;
        if k != Kind::Bool {
            return Err(err(
                ElabErrorKind::TypeError,
                format!("expected a boolean, found {k}"),
                span_of(e, Span::default()),
            ));
        }
        Ok(f)
    }

    pub fn expr(&mut self, e: &Expr) -> Result<(FExpr, Kind), ElabError> {
        let here = span_of(e, Span::default());
        match e {
            Expr::Int(n) => {
                let v = i32::try_from(*n).map_err(|_| {
                    err(ElabErrorKind::TypeError, "integer literal out of range", here)
                })?;
                Ok((FExpr::Const(v), Kind::Int))
            }
            Expr::Bool(b) => Ok((FExpr::Const(*b as i32), Kind::Bool)),
            Expr::Name { name, primed, span } => {
                self.check_primed(*primed, *span)?;
                self.resolve(name, *primed, *span)
            }
            Expr::Index { base, index } => {
                let Some((var, primed, span)) = self.collection(base) else {
                    return Err(err(ElabErrorKind::TypeError, "only arrays can be indexed", here));
                };
                self.check_primed(primed, span)?;
                let VarType::Array { index: dom, elem } = self.names.var_type(var).clone() else {
                    return Err(err(ElabErrorKind::TypeError, "only arrays can be indexed", span));
                };
                let (i, k) = self.expr(index)?;
                if k != dom.kind {
                    return Err(err(
                        ElabErrorKind::TypeError,
                        format!("array index must be {}, found {k}", dom.kind),
                        span_of(index, span),
                    ));
                }
                if let Some(v) = fold_const(&i) {
                    if !dom.contains(v) {
                        return Err(err(ElabErrorKind::TypeError, "array index out of range", span));
                    }
                }
                Ok((
                    FExpr::Elem {
                        var,
                        index: Box::new(i),
                        primed,
                    },
                    elem.kind,
                ))
            }
            Expr::Method { target, method } => {
                let Some((var, primed, span)) = self.collection(target) else {
                    return Err(err(ElabErrorKind::TypeError, "queue operation on a non-queue", here));
                };
                self.check_primed(primed, span)?;
                let VarType::Queue { elem, .. } = self.names.var_type(var) else {
                    return Err(err(ElabErrorKind::TypeError, "queue operation on a non-queue", span));
                };
                Ok(match method {
                    QueueMethod::Count => (FExpr::QueueLen { var, primed }, Kind::Int),
                    QueueMethod::First => (FExpr::QueueFirst { var, primed }, elem.kind),
                })
            }
            Expr::Unary { op, arg } => {
                let (a, k) = self.expr(arg)?;
                match op {
                    UnOp::Not if k == Kind::Bool => Ok((
                        match a {
                            FExpr::Const(v) => FExpr::Const(1 - v),
                            a => FExpr::Not(Box::new(a)),
                        },
                        Kind::Bool,
                    )),
                    UnOp::Neg if k == Kind::Int => Ok((
                        match a {
                            FExpr::Const(v) => FExpr::Const(-v),
                            a => FExpr::Neg(Box::new(a)),
                        },
                        Kind::Int,
                    )),
                    _ => Err(err(ElabErrorKind::TypeError, format!("operand has type {k}"), here)),
                }
            }
            Expr::Binary { op, lhs, rhs } => {
                let (a, ka) = self.expr(lhs)?;
                let (b, kb) = self.expr(rhs)?;
                let ok = match op {
                    BinOp::And | BinOp::Or | BinOp::Implies => ka == Kind::Bool && kb == Kind::Bool,
                    BinOp::Eq | BinOp::Ne => ka == kb,
                    _ => ka == Kind::Int && kb == Kind::Int,
                };
                if !ok {
                    return Err(err(
                        ElabErrorKind::TypeError,
                        format!("`{}` applied to {ka} and {kb}", op.symbol()),
                        here,
                    ));
                }
                let kind = match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod => Kind::Int,
                    _ => Kind::Bool,
                };
                let e = FExpr::Bin(*op, Box::new(a), Box::new(b));
                Ok((fold_const(&e).map(FExpr::Const).unwrap_or(e), kind))
            }
            Expr::Fold {
                conjunction,
                var,
                set,
                body,
            } => {
                let domain = self.domain(set)?;
                let saved = self.next_slot;
                let slot = self.push_slot(var, domain.kind);
                let body = self.bool_expr(body);
                self.pop(1);
                self.next_slot = saved;
                Ok((
                    FExpr::Fold {
                        conj: *conjunction,
                        slot,
                        domain: domain.values,
                        body: Box::new(body?),
                    },
                    Kind::Bool,
                ))
            }
            Expr::Apply { name, args, span, .. } => self.apply(name, args, *span),
            Expr::Mono { span, .. } => Err(err(
                ElabErrorKind::TypeError,
                "temporal construct outside a property",
                *span,
            )),
            Expr::Temporal { .. } | Expr::Until { .. } | Expr::Quant { .. } => Err(err(
                ElabErrorKind::TypeError,
                "temporal construct outside a property",
                here,
            )),
        }
    }

    fn apply(&mut self, name: &str, args: &[Expr], span: Span) -> Result<(FExpr, Kind), ElabError> {
        let Some(pred) = self.g.predicates.iter().find(|p| p.name == name) else {
            return Err(err(
                ElabErrorKind::UnknownReference,
                format!("unknown predicate `{name}`"),
                span,
            ));
        };
        if pred.params.len() != args.len() {
            return Err(err(
                ElabErrorKind::TypeError,
                format!("`{name}` takes {} arguments", pred.params.len()),
                span,
            ));
        }
        let mut bound = Vec::new();
        for ((pname, pset), arg) in pred.params.iter().zip(args) {
            let dom = self.domain(pset)?;
            let (a, k) = self.expr(arg)?;
            if k != dom.kind {
                return Err(err(
                    ElabErrorKind::TypeError,
                    format!("argument `{pname}` of `{name}` must be {}", dom.kind),
                    span_of(arg, span),
                ));
            }
            bound.push((pname.clone(), EnvEntry::Subst(a, k)));
        }
        // The body sees only its parameters and top-level names.
        let empty = Names::default();
        let mut inner = Compiler::new(self.g, &empty);
        inner.env = bound;
        inner.next_slot = self.next_slot;
        inner.max_slot = self.max_slot;
        let body = inner.bool_expr(&pred.body)?;
        self.max_slot = self.max_slot.max(inner.max_slot);
        Ok((body, Kind::Bool))
    }

    // ---- statements -----------------------------------------------------

    fn target(&mut self, lv: &LValue) -> Result<Target, ElabError> {
        if self.lookup_env(&lv.var).is_some() {
            return Err(err(
                ElabErrorKind::TypeError,
                format!("cannot assign to index `{}`", lv.var),
                lv.span,
            ));
        }
        if self.names.modes.get(&lv.var) == Some(&Mode::In) {
            return Err(err(
                ElabErrorKind::ModeMismatch,
                format!("assignment to `in` variable `{}`", lv.var),
                lv.span,
            ));
        }
        let bound = self.names.map.get(&lv.var).cloned();
        match (bound, &lv.index) {
            (Some(Bound::Var(v)), None) => match self.names.var_type(v) {
                VarType::Scalar(_) => Ok(Target::Scalar(v)),
                VarType::Array { .. } => Ok(Target::WholeArray(v)),
                VarType::Queue { .. } => Err(err(
                    ElabErrorKind::TypeError,
                    "queues change only through Enqueue/Dequeue",
                    lv.span,
                )),
            },
            (Some(Bound::Var(v)), Some(index)) => {
                let VarType::Array { index: dom, .. } = self.names.var_type(v).clone() else {
                    return Err(err(ElabErrorKind::TypeError, "only arrays can be indexed", lv.span));
                };
                let (i, k) = self.expr(index)?;
                if k != dom.kind {
                    return Err(err(ElabErrorKind::TypeError, "array index has the wrong type", lv.span));
                }
                Ok(Target::Elem(v, i))
            }
            (Some(Bound::Elem(v, i)), None) => Ok(Target::Elem(v, FExpr::Const(i))),
            (Some(_), _) | (None, _) => Err(err(
                ElabErrorKind::UnknownReference,
                format!("`{}` is not an assignable variable", lv.var),
                lv.span,
            )),
        }
    }

    fn target_domain(&self, t: &Target) -> Domain {
        self.names.var_type(t.var()).elem().clone()
    }

    fn queue(&self, lv: &LValue) -> Result<u32, ElabError> {
        if self.names.modes.get(&lv.var) == Some(&Mode::In) {
            return Err(err(
                ElabErrorKind::ModeMismatch,
                format!("update of `in` variable `{}`", lv.var),
                lv.span,
            ));
        }
        match self.names.map.get(&lv.var) {
            Some(Bound::Var(v)) if matches!(self.names.var_type(*v), VarType::Queue { .. }) => Ok(*v),
            _ => Err(err(
                ElabErrorKind::TypeError,
                format!("`{}` is not a queue", lv.var),
                lv.span,
            )),
        }
    }

    /// Flattens statements into guarded writes.
    pub fn stmts(
        &mut self,
        list: &[Stmt],
        conds: &mut Vec<FExpr>,
        path: &mut Vec<(u32, u32)>,
        member: u32,
        out: &mut Vec<GuardedWrite>,
    ) -> Result<(), ElabError> {
        for s in list {
            let (write, span) = match s {
                Stmt::Skip => continue,
                Stmt::Assign { target, value } => {
                    let t = self.target(target)?;
                    if matches!(t, Target::WholeArray(_)) {
                        return Err(err(
                            ElabErrorKind::TypeError,
                            "whole arrays can only be assigned with `::`",
                            target.span,
                        ));
                    }
                    let (v, k) = self.expr(value)?;
                    let dom = self.target_domain(&t);
                    if k != dom.kind {
                        return Err(err(
                            ElabErrorKind::TypeError,
                            format!("assigning {k} to a {} variable", dom.kind),
                            target.span,
                        ));
                    }
                    (Write::Assign { target: t, value: v }, target.span)
                }
                Stmt::Choose { target, set } => {
                    let t = self.target(target)?;
                    let d = self.domain(set)?;
                    let dom = self.target_domain(&t);
                    if d.is_empty() {
                        return Err(err(ElabErrorKind::TypeError, "empty choice set", target.span));
                    }
                    if d.kind != dom.kind || !d.values.iter().all(|v| dom.contains(*v)) {
                        return Err(err(
                            ElabErrorKind::TypeError,
                            "choice set is not within the variable's type",
                            target.span,
                        ));
                    }
                    (
                        Write::Choose {
                            target: t,
                            domain: d.values,
                        },
                        target.span,
                    )
                }
                Stmt::Enqueue { target, value } => {
                    let var = self.queue(target)?;
                    let (v, k) = self.expr(value)?;
                    if k != self.names.var_type(var).elem().kind {
                        return Err(err(ElabErrorKind::TypeError, "enqueued value has the wrong type", target.span));
                    }
                    (Write::Enqueue { var, value: v }, target.span)
                }
                Stmt::Dequeue { target } => {
                    let var = self.queue(target)?;
                    (Write::Dequeue { var }, target.span)
                }
                Stmt::If {
                    branches,
                    otherwise,
                    ..
                } => {
                    let id = self.if_counter;
                    self.if_counter += 1;
                    let mut compiled = Vec::new();
                    for (i, (cond, body)) in branches.iter().enumerate() {
                        let c = self.bool_expr(cond)?;
                        let depth = conds.len();
                        conds.extend(compiled.iter().map(|p: &FExpr| FExpr::Not(Box::new(p.clone()))));
                        conds.push(c.clone());
                        path.push((id, i as u32));
                        self.stmts(body, conds, path, member, out)?;
                        path.pop();
                        conds.truncate(depth);
                        compiled.push(c);
                    }
                    let depth = conds.len();
                    conds.extend(compiled.iter().map(|p| FExpr::Not(Box::new(p.clone()))));
                    path.push((id, branches.len() as u32));
                    self.stmts(otherwise, conds, path, member, out)?;
                    path.pop();
                    conds.truncate(depth);
                    continue;
                }
            };
            out.push(GuardedWrite {
                conds: conds.clone(),
                path: path.clone(),
                write,
                member,
                span,
            });
        }
        Ok(())
    }
}

/// Evaluates an expression with no free state, if possible.
pub fn fold_const(e: &FExpr) -> Option<i32> {
    match e {
        FExpr::Const(v) => Some(*v),
        FExpr::Not(a) => Some(1 - fold_const(a)?),
        FExpr::Neg(a) => fold_const(a)?.checked_neg(),
        FExpr::Bin(op, a, b) => {
            let x = fold_const(a)?;
            let y = fold_const(b)?;
            crate::lts::eval::binop(*op, x, y).ok()
        }
        _ => None,
    }
}

/// Resolves property expressions against a flat model: every variable and
/// timer by its qualified name, plus constants, symbols, sets and
/// predicates.
pub struct PropertyScope {
    g: Globals,
    names: Names,
}

impl PropertyScope {
    pub fn new(model: &FlatModel) -> PropertyScope {
        let mut names = Names::default();
        for (i, v) in model.vars.iter().enumerate() {
            names.map.insert(v.name.clone(), Bound::Var(i as u32));
            names.var_types.push(v.ty.clone());
        }
        for (i, t) in model.timers.iter().enumerate() {
            names.map.insert(t.name.clone(), Bound::Timer(i as u32));
        }
        let g = Globals {
            symbols: model.symbols.clone(),
            sym_index: model
                .symbols
                .iter()
                .enumerate()
                .map(|(i, s)| (s.clone(), i as i32))
                .collect(),
            constants: model.constants.clone(),
            sets: model.sets.clone(),
            predicates: model.predicates.clone(),
        };
        PropertyScope { g, names }
    }

    /// A boolean state predicate and the number of local slots its folds
    /// need. `bindings` fix quantified names to values.
    pub fn predicate(&self, e: &Expr, bindings: &[(String, Kind, i32)]) -> Result<(FExpr, u32), ElabError> {
        let mut cx = Compiler::new(&self.g, &self.names);
        for (n, k, v) in bindings {
            cx.bind_value(n, *k, *v);
        }
        let f = cx.bool_expr(e)?;
        Ok((f, cx.max_slot))
    }

    pub fn value(&self, e: &Expr, bindings: &[(String, Kind, i32)]) -> Result<(Kind, i32), ElabError> {
        let mut cx = Compiler::new(&self.g, &self.names);
        for (n, k, v) in bindings {
            cx.bind_value(n, *k, *v);
        }
        cx.const_value(e)
    }

    pub fn domain(&self, set: &SetExpr, bindings: &[(String, Kind, i32)]) -> Result<Domain, ElabError> {
        let mut cx = Compiler::new(&self.g, &self.names);
        for (n, k, v) in bindings {
            cx.bind_value(n, *k, *v);
        }
        cx.domain(set)
    }
}
