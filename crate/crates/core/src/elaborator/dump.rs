//! Deterministic JSON rendering of a flat model.

use serde_json::{json, Value};

use super::model::*;
use crate::syntax::BinOp;

fn domain(m: &FlatModel, d: &Domain) -> String {
    match d.kind {
        Kind::Bool => "bool".into(),
        Kind::Int if d.len() > 1 && d.values.windows(2).all(|w| w[1] == w[0] + 1) => {
            format!("{}..{}", d.values[0], d.values[d.len() - 1])
        }
        k => format!(
            "{{{}}}",
            d.values.iter().map(|&v| m.render(k, v)).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn var_type(m: &FlatModel, t: &VarType) -> String {
    match t {
        VarType::Scalar(d) => domain(m, d),
        VarType::Array { index, elem } => format!("array[{}] of {}", domain(m, index), domain(m, elem)),
        VarType::Queue { elem, capacity } => format!("queue[{}]({capacity})", domain(m, elem)),
    }
}

/// Renders a resolved expression; `locals` names the event's local slots
/// (unnamed slots print as `_k`).
pub fn render_expr(m: &FlatModel, e: &FExpr, locals: &[String]) -> String {
    let var = |v: u32, primed: bool| {
        format!("{}{}", m.vars[v as usize].name, if primed { "'" } else { "" })
    };
    let local = |s: u32| {
        locals
            .get(s as usize)
            .cloned()
            .unwrap_or_else(|| format!("_{s}"))
    };
    match e {
        FExpr::Const(v) => v.to_string(),
        FExpr::Var { var: v, primed } => var(*v, *primed),
        FExpr::Elem { var: v, index, primed } => {
            format!("{}[{}]", var(*v, *primed), render_expr(m, index, locals))
        }
        FExpr::QueueLen { var: v, primed } => format!("{}.Count()", var(*v, *primed)),
        FExpr::QueueFirst { var: v, primed } => format!("{}.First()", var(*v, *primed)),
        FExpr::Timer(t) => m.timers[*t as usize].name.clone(),
        FExpr::Local(s) => local(*s),
        FExpr::Not(a) => format!("!{}", render_expr(m, a, locals)),
        FExpr::Neg(a) => format!("-{}", render_expr(m, a, locals)),
        FExpr::Bin(op, a, b) => format!(
            "({} {} {})",
            render_expr(m, a, locals),
            op.symbol(),
            render_expr(m, b, locals)
        ),
        FExpr::Fold {
            conj,
            slot,
            domain,
            body,
        } => format!(
            "({} {} : {{{}}} @ {})",
            if *conj { BinOp::And.symbol() } else { BinOp::Or.symbol() },
            local(*slot),
            domain.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "),
            render_expr(m, body, locals)
        ),
    }
}

fn write(m: &FlatModel, w: &Write, locals: &[String]) -> String {
    let target = |t: &Target| match t {
        Target::Scalar(v) | Target::WholeArray(v) => m.vars[*v as usize].name.clone(),
        Target::Elem(v, i) => format!("{}[{}]", m.vars[*v as usize].name, render_expr(m, i, locals)),
    };
    match w {
        Write::Assign { target: t, value } => format!("{} := {}", target(t), render_expr(m, value, locals)),
        Write::Choose { target: t, domain } => format!(
            "{} :: {{{}}}",
            target(t),
            domain.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
        ),
        Write::Enqueue { var, value } => format!(
            "{}.Enqueue({})",
            m.vars[*var as usize].name,
            render_expr(m, value, locals)
        ),
        Write::Dequeue { var } => format!("{}.Dequeue()", m.vars[*var as usize].name),
    }
}

fn params(m: &FlatModel, ps: &[IndexParam]) -> Value {
    ps.iter()
        .map(|p| json!({"name": p.name, "set": domain(m, &p.domain)}))
        .collect()
}

/// The flat model and its dependency graphs. Object keys come out sorted,
/// so equal models give byte-identical text.
pub fn dump(m: &FlatModel) -> Value {
    let vars: Vec<Value> = m
        .vars
        .iter()
        .map(|v| {
            let kind = v.ty.elem().kind;
            json!({
                "name": v.name,
                "type": var_type(m, &v.ty),
                "mode": v.mode,
                "init": v.init.iter().map(|&x| m.to_json_value(kind, x)).collect::<Vec<_>>(),
                "offset": v.offset,
            })
        })
        .collect();
    let timers: Vec<Value> = m
        .timers
        .iter()
        .map(|t| json!({"name": t.name, "bound": t.bound, "init": t.init, "type": format!("0..{}", t.bound + 1)}))
        .collect();
    let events: Vec<Value> = m
        .events
        .iter()
        .map(|e| {
            let locals: Vec<String> = e.f_ind.iter().chain(&e.d_ind).map(|p| p.name.clone()).collect();
            let timer = |t: &u32| m.timers[*t as usize].name.clone();
            let action: Vec<Value> = e
                .action
                .iter()
                .map(|p| {
                    json!({
                        "var": m.vars[p.var as usize].name,
                        "writes": p.writes.iter().map(|w| json!({
                            "when": w.conds.iter().map(|c| render_expr(m, c, &locals)).collect::<Vec<_>>(),
                            "do": write(m, &w.write, &locals),
                        })).collect::<Vec<_>>(),
                    })
                })
                .collect();
            json!({
                "id": e.id,
                "f_ind": params(m, &e.f_ind),
                "d_ind": params(m, &e.d_ind),
                "l": e.l,
                "u": e.u,
                "fair": e.fair,
                "guard": render_expr(m, &e.guard, &locals),
                "start": e.start.iter().map(timer).collect::<Vec<_>>(),
                "stop": e.stop.iter().map(timer).collect::<Vec<_>>(),
                "action": action,
                "members": e.members,
            })
        })
        .collect();
    json!({
        "symbols": m.symbols,
        "constants": m.constants.iter().map(|(k, (kind, v))| (k.clone(), m.to_json_value(*kind, *v))).collect::<serde_json::Map<_, _>>(),
        "sets": m.sets.iter().map(|(k, d)| (k.clone(), Value::String(domain(m, d)))).collect::<serde_json::Map<_, _>>(),
        "variables": vars,
        "timers": timers,
        "events": events,
        "graphs": m.graphs,
    })
}
