//! The flattened module instance `(V, s0, T, t0, E)`.

use std::fmt;

use indexmap::IndexMap;
use serde::Serialize;

use crate::syntax::{BinOp, Expr, Fairness, Mode, PredicateDecl, Span};

/// Values are stored as `i32` everywhere in the engine; the kind says how to
/// read one back. Booleans are 0/1 and symbols index [`FlatModel::symbols`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Bool,
    Int,
    Sym,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Bool => "bool",
            Kind::Int => "int",
            Kind::Sym => "symbol",
        })
    }
}

/// A finite, ordered set of values of one kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Domain {
    pub kind: Kind,
    pub values: Vec<i32>,
}

impl Domain {
    pub fn bool() -> Self {
        Domain {
            kind: Kind::Bool,
            values: vec![0, 1],
        }
    }

    pub fn range(lo: i32, hi: i32) -> Self {
        Domain {
            kind: Kind::Int,
            values: (lo..=hi).collect(),
        }
    }

    pub fn contains(&self, v: i32) -> bool {
        self.position(v).is_some()
    }

    /// Position of `v` in the domain order.
    pub fn position(&self, v: i32) -> Option<usize> {
        let first = *self.values.first()?;
        // Integer ranges are by far the common case.
        if self.kind == Kind::Int {
            let i = v.checked_sub(first)?;
            if i >= 0 && (i as usize) < self.values.len() && self.values[i as usize] == v {
                return Some(i as usize);
            }
        }
        self.values.iter().position(|&x| x == v)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VarType {
    Scalar(Domain),
    Array { index: Domain, elem: Domain },
    Queue { elem: Domain, capacity: usize },
}

impl VarType {
    /// Number of state slots: arrays are one slot per element, queues store
    /// their length followed by `capacity` element slots.
    pub fn width(&self) -> usize {
        match self {
            VarType::Scalar(_) => 1,
            VarType::Array { index, .. } => index.len(),
            VarType::Queue { capacity, .. } => 1 + capacity,
        }
    }

    pub fn elem(&self) -> &Domain {
        match self {
            VarType::Scalar(d) => d,
            VarType::Array { elem, .. } | VarType::Queue { elem, .. } => elem,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatVar {
    pub name: String,
    pub ty: VarType,
    /// `None` for instance locals; otherwise the combined interface mode.
    pub mode: Option<Mode>,
    /// Initial slot values (see [`VarType::width`]).
    pub init: Vec<i32>,
    /// First state slot of this variable.
    pub offset: usize,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatTimer {
    pub name: String,
    pub bound: i32,
    pub init: i32,
    pub span: Span,
}

/// A resolved expression. `Local` slots hold event indices (fair ones first,
/// then demonic ones) followed by fold and quantifier variables.
#[derive(Debug, Clone, PartialEq)]
pub enum FExpr {
    Const(i32),
    Var { var: u32, primed: bool },
    Elem { var: u32, index: Box<FExpr>, primed: bool },
    QueueLen { var: u32, primed: bool },
    QueueFirst { var: u32, primed: bool },
    Timer(u32),
    Local(u32),
    Not(Box<FExpr>),
    Neg(Box<FExpr>),
    Bin(BinOp, Box<FExpr>, Box<FExpr>),
    Fold { conj: bool, slot: u32, domain: Vec<i32>, body: Box<FExpr> },
}

impl FExpr {
    pub fn and(a: FExpr, b: FExpr) -> FExpr {
        match (&a, &b) {
            (FExpr::Const(1), _) => b,
            (_, FExpr::Const(1)) => a,
            _ => FExpr::Bin(BinOp::And, Box::new(a), Box::new(b)),
        }
    }

    /// Visits every sub-expression.
    pub fn walk(&self, f: &mut dyn FnMut(&FExpr)) {
        f(self);
        match self {
            FExpr::Elem { index, .. } => index.walk(f),
            FExpr::Not(a) | FExpr::Neg(a) => a.walk(f),
            FExpr::Bin(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            FExpr::Fold { body, .. } => body.walk(f),
            _ => {}
        }
    }

    /// Variables read, with whether the read is primed.
    pub fn reads(&self) -> Vec<(u32, bool)> {
        let mut out = Vec::new();
        self.walk(&mut |e| match e {
            FExpr::Var { var, primed }
            | FExpr::Elem { var, primed, .. }
            | FExpr::QueueLen { var, primed }
            | FExpr::QueueFirst { var, primed } => out.push((*var, *primed)),
            _ => {}
        });
        out
    }

    pub fn is_const(&self) -> Option<i32> {
        match self {
            FExpr::Const(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Scalar(u32),
    Elem(u32, FExpr),
    /// Every element of an array (demonic choice only).
    WholeArray(u32),
}

impl Target {
    pub fn var(&self) -> u32 {
        match self {
            Target::Scalar(v) | Target::Elem(v, _) | Target::WholeArray(v) => *v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Write {
    Assign { target: Target, value: FExpr },
    Choose { target: Target, domain: Vec<i32> },
    Enqueue { var: u32, value: FExpr },
    Dequeue { var: u32 },
}

impl Write {
    pub fn var(&self) -> u32 {
        match self {
            Write::Assign { target, .. } | Write::Choose { target, .. } => target.var(),
            Write::Enqueue { var, .. } | Write::Dequeue { var } => *var,
        }
    }

    /// Expressions evaluated by the write (value and element index).
    pub fn operands(&self) -> Vec<&FExpr> {
        let mut out = Vec::new();
        match self {
            Write::Assign { target, value } => {
                out.push(value);
                if let Target::Elem(_, i) = target {
                    out.push(i);
                }
            }
            Write::Choose { target, .. } => {
                if let Target::Elem(_, i) = target {
                    out.push(i);
                }
            }
            Write::Enqueue { value, .. } => out.push(value),
            Write::Dequeue { .. } => {}
        }
        out
    }
}

/// One write of an action together with the `if` branches it sits under.
#[derive(Debug, Clone, PartialEq)]
pub struct GuardedWrite {
    /// Conjunction of branch conditions.
    pub conds: Vec<FExpr>,
    /// `(if-statement id, branch number)` pairs, outermost first.
    pub path: Vec<(u32, u32)>,
    pub write: Write,
    /// Index of the member event that contributed the write.
    pub member: u32,
    pub span: Span,
}

impl GuardedWrite {
    /// Two writes are exclusive when they sit in different branches of the
    /// same `if`.
    pub fn exclusive_with(&self, other: &GuardedWrite) -> bool {
        self.path.iter().any(|(id, br)| {
            other
                .path
                .iter()
                .any(|(id2, br2)| id == id2 && br != br2)
        })
    }
}

/// All writes to one variable, applied in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub var: u32,
    pub writes: Vec<GuardedWrite>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexParam {
    pub name: String,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatEvent {
    pub id: String,
    pub f_ind: Vec<IndexParam>,
    pub d_ind: Vec<IndexParam>,
    pub l: u32,
    /// `None` is unbounded.
    pub u: Option<u32>,
    pub fair: Fairness,
    pub guard: FExpr,
    pub start: Vec<u32>,
    pub stop: Vec<u32>,
    pub action: Vec<Projection>,
    /// Qualified names of the events merged into this one.
    pub members: Vec<String>,
    /// Local slots needed to evaluate guard and action.
    pub env_size: u32,
    pub span: Span,
}

impl FlatEvent {
    /// Number of fair-index valuations.
    pub fn fair_count(&self) -> usize {
        self.f_ind.iter().map(|i| i.domain.len()).product()
    }

    pub fn demonic_count(&self) -> usize {
        self.d_ind.iter().map(|i| i.domain.len()).product()
    }

    /// Writes the `rank`-th valuation (row-major, first index slowest) of
    /// `params` into `out`.
    pub fn valuation(params: &[IndexParam], mut rank: usize, out: &mut [i32]) {
        for (i, p) in params.iter().enumerate().rev() {
            let n = p.domain.len();
            out[i] = p.domain.values[rank % n];
            rank /= n;
        }
    }

    /// Inverse of [`FlatEvent::valuation`].
    pub fn rank(params: &[IndexParam], values: &[i32]) -> Option<usize> {
        let mut rank = 0;
        for (p, v) in params.iter().zip(values) {
            rank = rank * p.domain.len() + p.domain.position(*v)?;
        }
        Some(rank)
    }
}

/// Edges of the module, event and per-sync-set action graphs.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Graphs {
    pub modules: Vec<(String, String)>,
    pub events: Vec<(String, String)>,
    pub sync_sets: Vec<SyncSetInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncSetInfo {
    pub members: Vec<String>,
    pub compound: String,
    /// Instances of the connected module component the set arose from.
    pub component: Vec<String>,
    /// Action-graph edges `(v1, v2)`: v1's new value needs v2's.
    pub action_edges: Vec<(String, String)>,
    pub projection_order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatModel {
    pub symbols: Vec<String>,
    pub constants: IndexMap<String, (Kind, i32)>,
    pub sets: IndexMap<String, Domain>,
    pub predicates: Vec<PredicateDecl>,
    pub vars: Vec<FlatVar>,
    pub timers: Vec<FlatTimer>,
    pub events: Vec<FlatEvent>,
    pub graphs: Graphs,
}

impl FlatModel {
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn timer_index(&self, name: &str) -> Option<usize> {
        self.timers.iter().position(|t| t.name == name)
    }

    pub fn event_index(&self, id: &str) -> Option<usize> {
        self.events.iter().position(|e| e.id == id)
    }

    pub fn symbol(&self, name: &str) -> Option<i32> {
        self.symbols.iter().position(|s| s == name).map(|i| i as i32)
    }

    /// Total number of state slots.
    pub fn state_width(&self) -> usize {
        self.vars.iter().map(|v| v.ty.width()).sum()
    }

    pub fn render(&self, kind: Kind, v: i32) -> String {
        match kind {
            Kind::Bool => (v != 0).to_string(),
            Kind::Int => v.to_string(),
            Kind::Sym => self
                .symbols
                .get(v as usize)
                .cloned()
                .unwrap_or_else(|| format!("#{v}")),
        }
    }

    pub fn to_json_value(&self, kind: Kind, v: i32) -> serde_json::Value {
        match kind {
            Kind::Bool => serde_json::Value::Bool(v != 0),
            Kind::Int => serde_json::Value::from(v),
            Kind::Sym => serde_json::Value::String(self.render(kind, v)),
        }
    }
}

impl crate::syntax::ltl::Namespace for FlatModel {
    fn is_variable(&self, name: &str) -> bool {
        self.var_index(name).is_some()
    }

    fn is_timer(&self, name: &str) -> bool {
        self.timer_index(name).is_some()
    }

    fn event_arity(&self, name: &str) -> Option<(usize, usize)> {
        let e = &self.events[self.event_index(name)?];
        Some((e.f_ind.len(), e.d_ind.len()))
    }

    fn is_value(&self, name: &str) -> bool {
        self.constants.contains_key(name)
            || self.symbol(name).is_some()
            || name == "true"
            || name == "false"
    }

    fn is_set(&self, name: &str) -> bool {
        self.sets.contains_key(name)
    }

    fn predicate_arity(&self, name: &str) -> Option<usize> {
        self.predicates
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.params.len())
    }

    fn fair_index_values(&self, name: &str) -> Option<Vec<Expr>> {
        let param = self
            .events
            .iter()
            .flat_map(|e| &e.f_ind)
            .find(|p| p.name == name || p.name.rsplit('.').next() == Some(name))?;
        Some(
            param
                .domain
                .values
                .iter()
                .map(|&v| match param.domain.kind {
                    Kind::Sym => Expr::name(self.render(Kind::Sym, v)),
                    Kind::Bool => Expr::Bool(v != 0),
                    Kind::Int if v < 0 => Expr::Unary {
                        op: crate::syntax::UnOp::Neg,
                        arg: Box::new(Expr::Int(-(v as i64))),
                    },
                    Kind::Int => Expr::Int(v as i64),
                })
                .collect(),
        )
    }
}
