//! Abstract syntax of TTM model files.

use std::fmt;

use serde::Serialize;

/// Source location of a syntax element.
///
/// Spans never participate in structural equality: two ASTs that differ only
/// in where they were parsed from compare equal.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(line: u32, col: u32, start: usize, end: usize) -> Self {
        Span {
            line,
            col,
            start,
            end,
        }
    }

    pub fn to(self, other: Span) -> Span {
        Span {
            end: other.end.max(self.end),
            ..self
        }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    In,
    Out,
    Share,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::In => "in",
            Mode::Out => "out",
            Mode::Share => "share",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Fairness {
    Spontaneous,
    Just,
    Compassionate,
}

impl fmt::Display for Fairness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fairness::Spontaneous => "spontaneous",
            Fairness::Just => "just",
            Fairness::Compassionate => "compassionate",
        })
    }
}

/// A finite set of values: a named type, an integer range or a literal list.
#[derive(Debug, Clone, PartialEq)]
pub enum SetExpr {
    Named(String, Span),
    Range(Box<Expr>, Box<Expr>),
    Literal(Vec<Expr>),
    Bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TypeExpr {
    Set(SetExpr),
    Array {
        index: SetExpr,
        elem: Box<TypeExpr>,
    },
    Queue {
        elem: Box<TypeExpr>,
        capacity: Expr,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BinOp {
    Implies,
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Implies => "=>",
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
        }
    }

    /// Binding strength; larger binds tighter. `Until` sits at 4.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Implies => 1,
            BinOp::Or => 2,
            BinOp::And => 3,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 5,
            BinOp::Add | BinOp::Sub => 6,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QueueMethod {
    Count,
    First,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TemporalOp {
    Always,
    Eventually,
}

/// Expressions of the model language. The temporal variants (`Temporal`,
/// `Until`, `Quant`, `Mono`) are only produced when parsing properties.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Name {
        name: String,
        primed: bool,
        span: Span,
    },
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
    },
    Unary {
        op: UnOp,
        arg: Box<Expr>,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// `&& i : S @ body` / `|| i : S @ body`
    Fold {
        conjunction: bool,
        var: String,
        set: SetExpr,
        body: Box<Expr>,
    },
    /// `call(f, args)`, `f(args)`, or (in properties) an event atom `e(x)`.
    Apply {
        name: String,
        args: Vec<Expr>,
        explicit_call: bool,
        span: Span,
    },
    Method {
        target: Box<Expr>,
        method: QueueMethod,
    },
    Mono {
        timer: String,
        span: Span,
    },
    Temporal {
        op: TemporalOp,
        arg: Box<Expr>,
    },
    Until {
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Quant {
        forall: bool,
        vars: Vec<String>,
        set: SetExpr,
        body: Box<Expr>,
    },
}

impl Expr {
    pub fn name(name: impl Into<String>) -> Expr {
        Expr::Name {
            name: name.into(),
            primed: false,
            span: Span::default(),
        }
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn not(arg: Expr) -> Expr {
        Expr::Unary {
            op: UnOp::Not,
            arg: Box::new(arg),
        }
    }

    /// Best-effort source position: the first named leaf.
    pub fn span(&self) -> Option<Span> {
        match self {
            Expr::Name { span, .. } | Expr::Apply { span, .. } | Expr::Mono { span, .. } => {
                Some(*span)
            }
            Expr::Int(_) | Expr::Bool(_) => None,
            Expr::Index { base, index } => base.span().or_else(|| index.span()),
            Expr::Unary { arg, .. } | Expr::Temporal { arg, .. } => arg.span(),
            Expr::Binary { lhs, rhs, .. } | Expr::Until { lhs, rhs } => {
                lhs.span().or_else(|| rhs.span())
            }
            Expr::Fold { body, .. } | Expr::Quant { body, .. } => body.span(),
            Expr::Method { target, .. } => target.span(),
        }
    }

    /// True when the expression contains any temporal construct.
    pub fn is_temporal(&self) -> bool {
        match self {
            Expr::Temporal { .. } | Expr::Until { .. } => true,
            Expr::Quant { body, .. } => body.is_temporal(),
            Expr::Unary { arg, .. } => arg.is_temporal(),
            Expr::Binary { lhs, rhs, .. } => lhs.is_temporal() || rhs.is_temporal(),
            _ => false,
        }
    }

    /// Visits every sub-expression, outermost first.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Name { .. } | Expr::Mono { .. } => {}
            Expr::Index { base, index } => {
                base.walk(f);
                index.walk(f);
            }
            Expr::Unary { arg, .. } | Expr::Temporal { arg, .. } => arg.walk(f),
            Expr::Binary { lhs, rhs, .. } | Expr::Until { lhs, rhs } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            Expr::Fold { set, body, .. } | Expr::Quant { set, body, .. } => {
                set.walk(f);
                body.walk(f);
            }
            Expr::Apply { args, .. } => args.iter().for_each(|a| a.walk(f)),
            Expr::Method { target, .. } => target.walk(f),
        }
    }
}

impl SetExpr {
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        match self {
            SetExpr::Named(..) | SetExpr::Bool => {}
            SetExpr::Range(lo, hi) => {
                lo.walk(f);
                hi.walk(f);
            }
            SetExpr::Literal(items) => items.iter().for_each(|e| e.walk(f)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LValue {
    pub var: String,
    pub index: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Assign {
        target: LValue,
        value: Expr,
    },
    /// `v :: S` picks any value of `S` (every element independently when `v`
    /// is an array).
    Choose {
        target: LValue,
        set: SetExpr,
    },
    Enqueue {
        target: LValue,
        value: Expr,
    },
    Dequeue {
        target: LValue,
    },
    If {
        branches: Vec<(Expr, Vec<Stmt>)>,
        otherwise: Vec<Stmt>,
        span: Span,
    },
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Value(Expr),
    List(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub ty: TypeExpr,
    pub init: Option<Init>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceDecl {
    pub mode: Mode,
    pub name: String,
    pub ty: TypeExpr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimerDecl {
    pub name: String,
    pub lower: Expr,
    pub bound: Expr,
    pub init: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependsDecl {
    pub slot: String,
    pub module: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexDecl {
    pub name: String,
    pub set: SetExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncClause {
    /// Qualified `slot.event` names.
    pub members: Vec<(String, String, Span)>,
    pub compound: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventDecl {
    pub name: String,
    pub fair_indices: Vec<IndexDecl>,
    pub demonic_indices: Vec<IndexDecl>,
    pub lower: Option<Expr>,
    /// `None` is an unbounded (`*`) upper bound.
    pub upper: Option<Expr>,
    pub fairness: Fairness,
    pub guard: Expr,
    pub start: Vec<String>,
    pub stop: Vec<String>,
    pub action: Vec<Stmt>,
    pub sync: Option<SyncClause>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleDecl {
    pub name: String,
    pub interface: Vec<InterfaceDecl>,
    pub locals: Vec<VarDecl>,
    pub timers: Vec<TimerDecl>,
    pub depends: Vec<DependsDecl>,
    pub events: Vec<EventDecl>,
    pub span: Span,
}

/// The actual argument of an interface slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub mode: Mode,
    pub value: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceDecl {
    pub name: String,
    pub module: String,
    pub bindings: Vec<Binding>,
    pub with: Vec<(String, String)>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CompositionExpr {
    Instance(String, Span),
    Parallel(Vec<CompositionExpr>),
    /// `|| i : S @ Module(bindings) with ... end`
    Iterated {
        var: String,
        set: SetExpr,
        template: Box<InstanceDecl>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AliasDecl {
    pub name: String,
    pub expr: CompositionExpr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub value: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeDecl {
    pub name: String,
    pub set: SetExpr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredicateDecl {
    pub name: String,
    pub params: Vec<(String, SetExpr)>,
    pub body: Expr,
    pub span: Span,
}

/// A named property as written; parsed on demand by `parse_ltl`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertySource {
    pub name: String,
    /// Free parameters: each instantiation is checked separately.
    pub params: Vec<IndexDecl>,
    pub text: String,
    /// Position of the first character of `text` in the enclosing file.
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SourceModel {
    pub constants: Vec<ConstDecl>,
    pub types: Vec<TypeDecl>,
    pub predicates: Vec<PredicateDecl>,
    pub globals: Vec<VarDecl>,
    pub modules: Vec<ModuleDecl>,
    pub instances: Vec<InstanceDecl>,
    pub aliases: Vec<AliasDecl>,
    pub system: Option<CompositionExpr>,
    pub properties: Vec<PropertySource>,
}

impl SourceModel {
    pub fn module(&self, name: &str) -> Option<&ModuleDecl> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn instance(&self, name: &str) -> Option<&InstanceDecl> {
        self.instances.iter().find(|i| i.name == name)
    }

    pub fn property(&self, name: &str) -> Option<&PropertySource> {
        self.properties.iter().find(|p| p.name == name)
    }
}
