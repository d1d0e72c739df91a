//! Pretty-printer. Output reparses to a structurally identical AST.

use std::fmt::Write;

use super::ast::*;
use super::is_implicit_module;

pub fn print_model(model: &SourceModel) -> String {
    let mut out = String::new();
    for c in &model.constants {
        let _ = writeln!(out, "const {} = {};", c.name, expr(&c.value));
    }
    for t in &model.types {
        let _ = writeln!(out, "type {} = {};", t.name, set(&t.set));
    }
    for p in &model.predicates {
        let params: Vec<String> = p
            .params
            .iter()
            .map(|(n, s)| format!("{n} : {}", set(s)))
            .collect();
        let _ = writeln!(
            out,
            "predicate {}({}) = {};",
            p.name,
            params.join(", "),
            expr(&p.body)
        );
    }
    if !model.globals.is_empty() {
        out.push_str("\nglobals\n");
        for v in &model.globals {
            var_decl(&mut out, v);
        }
        out.push_str("end\n");
    }
    for m in &model.modules {
        out.push('\n');
        module(&mut out, m);
    }
    if !model.instances.is_empty() {
        out.push_str("\ninstances\n");
        let items: Vec<String> = model
            .instances
            .iter()
            .map(|i| format!("  {} = {}", i.name, instance_body(i)))
            .collect();
        out.push_str(&items.join(";\n"));
        out.push_str("\nend\n");
    }
    for a in &model.aliases {
        let _ = writeln!(out, "{} ::= {};", a.name, composition(&a.expr));
    }
    if let Some(system) = &model.system {
        let _ = writeln!(out, "system = {};", composition(system));
    }
    if !model.properties.is_empty() {
        out.push_str("\nproperties\n");
        for p in &model.properties {
            let _ = writeln!(out, "  {}{} : {};", p.name, index_groups(&p.params, &[]), p.text);
        }
        out.push_str("end\n");
    }
    out
}

fn var_decl(out: &mut String, v: &VarDecl) {
    let _ = write!(out, "  {} : {}", v.name, type_expr(&v.ty));
    match &v.init {
        Some(Init::Value(e)) => {
            let _ = write!(out, " := {}", expr(e));
        }
        Some(Init::List(items)) => {
            let items: Vec<String> = items.iter().map(expr).collect();
            let _ = write!(out, " := [{}]", items.join(", "));
        }
        None => {}
    }
    out.push_str(";\n");
}

fn timer_decl(out: &mut String, t: &TimerDecl) {
    let _ = write!(out, "  {} : {} .. {}", t.name, expr(&t.lower), expr(&t.bound));
    if let Some(init) = &t.init {
        let _ = write!(out, " := {}", expr(init));
    }
    out.push_str(";\n");
}

fn module(out: &mut String, m: &ModuleDecl) {
    let implicit = is_implicit_module(&m.name)
        && m.interface.is_empty()
        && m.locals.is_empty()
        && m.depends.is_empty();
    if implicit {
        if !m.timers.is_empty() {
            out.push_str("timers\n");
            for t in &m.timers {
                timer_decl(out, t);
            }
            out.push_str("end\n");
        }
        for e in &m.events {
            out.push_str("event ");
            event(out, e);
        }
        return;
    }
    let _ = writeln!(out, "module {}", m.name);
    if !m.interface.is_empty() {
        out.push_str("interface\n");
        for v in &m.interface {
            let _ = writeln!(out, "  {} {} : {};", v.mode, v.name, type_expr(&v.ty));
        }
    }
    if !m.locals.is_empty() {
        out.push_str("locals\n");
        for v in &m.locals {
            var_decl(out, v);
        }
    }
    if !m.timers.is_empty() {
        out.push_str("timers\n");
        for t in &m.timers {
            timer_decl(out, t);
        }
    }
    if !m.depends.is_empty() {
        out.push_str("depends\n");
        for d in &m.depends {
            let _ = writeln!(out, "  {} : {};", d.slot, d.module);
        }
    }
    if !m.events.is_empty() {
        out.push_str("events\n");
        for e in &m.events {
            out.push_str("  ");
            event(out, e);
        }
    }
    out.push_str("end\n");
}

fn index_groups(fair: &[IndexDecl], demonic: &[IndexDecl]) -> String {
    if fair.is_empty() && demonic.is_empty() {
        return String::new();
    }
    let groups: Vec<String> = fair
        .iter()
        .map(|i| format!("{} : fair {}", i.name, set(&i.set)))
        .chain(demonic.iter().map(|i| format!("{} : {}", i.name, set(&i.set))))
        .collect();
    format!("({})", groups.join("; "))
}

fn event(out: &mut String, e: &EventDecl) {
    out.push_str(&e.name);
    out.push_str(&index_groups(&e.fair_indices, &e.demonic_indices));
    if let Some(l) = &e.lower {
        let u = e.upper.as_ref().map(expr).unwrap_or_else(|| "*".into());
        let _ = write!(out, " [{}, {}]", expr(l), u);
    }
    if e.fairness != Fairness::Spontaneous {
        let _ = write!(out, " {}", e.fairness);
    }
    let _ = write!(out, "\n    when {}", expr(&e.guard));
    if !e.start.is_empty() {
        let _ = write!(out, "\n    start {}", e.start.join(", "));
    }
    if !e.stop.is_empty() {
        let _ = write!(out, "\n    stop {}", e.stop.join(", "));
    }
    if let Some(sync) = &e.sync {
        let members: Vec<String> = sync
            .members
            .iter()
            .map(|(s, ev, _)| format!("{s}.{ev}"))
            .collect();
        let _ = write!(out, "\n    sync {} as {}", members.join(", "), sync.compound);
    }
    let _ = writeln!(out, "\n    do {}\n  end", stmts(&e.action));
}

pub fn stmts(list: &[Stmt]) -> String {
    if list.is_empty() {
        return "skip".into();
    }
    list.iter().map(stmt).collect::<Vec<_>>().join(", ")
}

fn lvalue(l: &LValue) -> String {
    match &l.index {
        Some(i) => format!("{}[{}]", l.var, expr(i)),
        None => l.var.clone(),
    }
}

fn stmt(s: &Stmt) -> String {
    match s {
        Stmt::Assign { target, value } => format!("{} := {}", lvalue(target), expr(value)),
        Stmt::Choose { target, set: s } => format!("{} :: {}", lvalue(target), set(s)),
        Stmt::Enqueue { target, value } => format!("{}.Enqueue({})", target.var, expr(value)),
        Stmt::Dequeue { target } => format!("{}.Dequeue()", target.var),
        Stmt::If {
            branches,
            otherwise,
            ..
        } => {
            let mut out = String::new();
            for (i, (cond, body)) in branches.iter().enumerate() {
                let kw = if i == 0 { "if" } else { " elseif" };
                let _ = write!(out, "{kw} {} then {}", expr(cond), stmts(body));
            }
            if !otherwise.is_empty() {
                let _ = write!(out, " else {}", stmts(otherwise));
            }
            out.push_str(" fi");
            out
        }
        Stmt::Skip => "skip".into(),
    }
}

pub fn set(s: &SetExpr) -> String {
    match s {
        SetExpr::Named(n, _) => n.clone(),
        SetExpr::Range(lo, hi) => format!("{} .. {}", expr(lo), expr(hi)),
        SetExpr::Literal(items) => {
            format!("{{{}}}", items.iter().map(expr).collect::<Vec<_>>().join(", "))
        }
        SetExpr::Bool => "bool".into(),
    }
}

pub fn type_expr(t: &TypeExpr) -> String {
    match t {
        TypeExpr::Set(s) => set(s),
        TypeExpr::Array { index, elem } => format!("array[{}] of {}", set(index), type_expr(elem)),
        TypeExpr::Queue { elem, capacity } => {
            format!("queue[{}]({})", type_expr(elem), expr(capacity))
        }
    }
}

fn instance_body(i: &InstanceDecl) -> String {
    let mut out = i.module.clone();
    let bindings: Vec<String> = i
        .bindings
        .iter()
        .map(|b| format!("{} {}", b.mode, expr(&b.value)))
        .collect();
    let _ = write!(out, "({})", bindings.join(", "));
    if !i.with.is_empty() {
        let with: Vec<String> = i.with.iter().map(|(s, t)| format!("{s} := {t}")).collect();
        let _ = write!(out, " with {} end", with.join(", "));
    }
    out
}

pub fn composition(c: &CompositionExpr) -> String {
    match c {
        CompositionExpr::Instance(name, _) => name.clone(),
        CompositionExpr::Parallel(parts) => format!(
            "({})",
            parts.iter().map(composition).collect::<Vec<_>>().join(" || ")
        ),
        CompositionExpr::Iterated {
            var,
            set: s,
            template,
        } => format!("(|| {var} : {} @ {})", set(s), instance_body(template)),
    }
}

/// Prints an expression with every compound sub-term parenthesised.
pub fn expr(e: &Expr) -> String {
    match e {
        Expr::Int(n) if *n < 0 => format!("(-{})", n.unsigned_abs()),
        Expr::Int(n) => n.to_string(),
        Expr::Bool(b) => b.to_string(),
        Expr::Name { name, primed, .. } => {
            if *primed {
                format!("{name}'")
            } else {
                name.clone()
            }
        }
        Expr::Index { base, index } => format!("{}[{}]", expr(base), expr(index)),
        Expr::Unary { op, arg } => {
            let sym = if *op == UnOp::Not { "!" } else { "-" };
            format!("({sym}{})", expr(arg))
        }
        Expr::Binary { op, lhs, rhs } => {
            format!("({} {} {})", expr(lhs), op.symbol(), expr(rhs))
        }
        Expr::Fold {
            conjunction,
            var,
            set: s,
            body,
        } => {
            let op = if *conjunction { "&&" } else { "||" };
            format!("({op} {var} : {} @ {})", set(s), expr(body))
        }
        Expr::Apply {
            name,
            args,
            explicit_call,
            ..
        } => {
            let args: Vec<String> = args.iter().map(expr).collect();
            if *explicit_call {
                let mut all = vec![name.clone()];
                all.extend(args);
                format!("call({})", all.join(", "))
            } else {
                format!("{name}({})", args.join(", "))
            }
        }
        Expr::Method { target, method } => {
            let m = match method {
                QueueMethod::Count => "Count",
                QueueMethod::First => "First",
            };
            format!("{}.{m}()", expr(target))
        }
        Expr::Mono { timer, .. } => format!("mono({timer})"),
        Expr::Temporal { op, arg } => {
            let sym = match op {
                TemporalOp::Always => "[]",
                TemporalOp::Eventually => "<>",
            };
            format!("({sym}{})", expr(arg))
        }
        Expr::Until { lhs, rhs } => format!("({} U {})", expr(lhs), expr(rhs)),
        Expr::Quant {
            forall,
            vars,
            set: s,
            body,
        } => {
            let q = if *forall { "forall" } else { "exists" };
            format!("({q} {} : {} @ {})", vars.join(", "), set(s), expr(body))
        }
    }
}
