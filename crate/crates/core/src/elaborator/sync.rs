//! Action graphs and projection ordering.

use super::model::{GuardedWrite, Projection, Target, Write};
use super::{ElabError, ElabErrorKind};

/// Result of ordering the writes of one (possibly compound) action.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedAction {
    pub projections: Vec<Projection>,
    /// Action-graph edges `(v1, v2)`: the new value of v1 reads v2.
    pub edges: Vec<(u32, u32)>,
}

fn reads_of(w: &GuardedWrite) -> Vec<(u32, bool)> {
    let mut out = Vec::new();
    for c in &w.conds {
        out.extend(c.reads());
    }
    for e in w.write.operands() {
        out.extend(e.reads());
    }
    out
}

fn const_elem(w: &Write) -> Option<Option<i32>> {
    match w {
        Write::Assign {
            target: Target::Elem(_, i),
            ..
        }
        | Write::Choose {
            target: Target::Elem(_, i),
            ..
        } => Some(i.is_const()),
        _ => None,
    }
}

/// Two writes to one variable that can both happen in one step with a
/// statically known overlap.
fn double_write(a: &GuardedWrite, b: &GuardedWrite) -> bool {
    if a.exclusive_with(b) {
        return false;
    }
    match (const_elem(&a.write), const_elem(&b.write)) {
        (Some(Some(i)), Some(Some(j))) => i == j,
        // Dynamic element indices are checked when the step runs.
        (Some(_), Some(_)) => false,
        _ => true,
    }
}

/// Groups `writes` into one projection per variable and sorts the
/// projections so that every primed read sees an already computed value.
///
/// With `strict`, unprimed reads of other written variables also order the
/// projections (the reader goes after the variable it reads).
pub fn order_projections(
    writes: Vec<GuardedWrite>,
    var_names: &[String],
    strict: bool,
) -> Result<OrderedAction, ElabError> {
    let mut groups: Vec<Projection> = Vec::new();
    for w in writes {
        let v = w.write.var();
        match groups.iter_mut().find(|p| p.var == v) {
            Some(p) => {
                if let Some(prev) = p.writes.iter().find(|x| double_write(x, &w)) {
                    return Err(ElabError::new(
                        ElabErrorKind::DoubleAssignment,
                        format!(
                            "`{}` is assigned twice in one step (first at {})",
                            var_names[v as usize], prev.span
                        ),
                        w.span,
                    ));
                }
                p.writes.push(w);
            }
            None => groups.push(Projection {
                var: v,
                writes: vec![w],
            }),
        }
    }

    let n = groups.len();
    let pos = |v: u32| groups.iter().position(|p| p.var == v);
    let mut deps: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut edges = Vec::new();
    for (i, p) in groups.iter().enumerate() {
        for w in &p.writes {
            for (r, primed) in reads_of(w) {
                if !primed && !(strict && r != p.var) {
                    continue;
                }
                if let Some(j) = pos(r) {
                    if !deps[i].contains(&j) {
                        deps[i].push(j);
                        edges.push((p.var, r));
                    }
                }
            }
        }
    }

    // Kahn's algorithm; ties go to the variable written first.
    let mut remaining: Vec<usize> = deps.iter().map(Vec::len).collect();
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let Some(next) = (0..n).find(|&i| !done[i] && remaining[i] == 0) else {
            let cycle = find_cycle(&deps, &done);
            let names: Vec<&str> = cycle
                .iter()
                .map(|&i| var_names[groups[i].var as usize].as_str())
                .collect();
            return Err(ElabError::new(
                ElabErrorKind::CircularDataFlow,
                format!("circular data flow through {}", names.join(" -> ")),
                groups[cycle[0]].writes[0].span,
            ));
        };
        done[next] = true;
        order.push(next);
        for (i, d) in deps.iter().enumerate() {
            if !done[i] && d.contains(&next) {
                remaining[i] -= 1;
            }
        }
    }

    let mut slots: Vec<Option<Projection>> = groups.into_iter().map(Some).collect();
    let projections = order.into_iter().map(|i| slots[i].take().unwrap()).collect();
    Ok(OrderedAction { projections, edges })
}

/// A cycle among the nodes not yet emitted, as a node list.
fn find_cycle(deps: &[Vec<usize>], done: &[bool]) -> Vec<usize> {
    let start = (0..deps.len()).find(|&i| !done[i]).unwrap();
    let mut seen = vec![usize::MAX; deps.len()];
    let mut path = Vec::new();
    let mut cur = start;
    loop {
        if seen[cur] != usize::MAX {
            return path[seen[cur]..].to_vec();
        }
        seen[cur] = path.len();
        path.push(cur);
        // Every remaining node has a remaining dependency.
        cur = *deps[cur].iter().find(|&&j| !done[j]).unwrap();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elaborator::FExpr;
    use crate::syntax::{BinOp, Span};

    fn assign(var: u32, value: FExpr) -> GuardedWrite {
        GuardedWrite {
            conds: vec![],
            path: vec![],
            write: Write::Assign {
                target: Target::Scalar(var),
                value,
            },
            member: 0,
            span: Span::default(),
        }
    }

    fn primed(var: u32) -> FExpr {
        FExpr::Var { var, primed: true }
    }

    fn names() -> Vec<String> {
        ["x", "b", "c"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn primed_read_goes_after_its_source() {
        let a = order_projections(vec![assign(1, primed(0)), assign(0, FExpr::Const(3))], &names(), false).unwrap();
        let order: Vec<u32> = a.projections.iter().map(|p| p.var).collect();
        assert_eq!(order, vec![0, 1]);
        assert_eq!(a.edges, vec![(1, 0)]);
    }

    #[test]
    fn mutual_primed_reads_are_circular() {
        let e = order_projections(vec![assign(0, primed(1)), assign(1, primed(0))], &names(), false).unwrap_err();
        assert_eq!(e.kind, ElabErrorKind::CircularDataFlow);
    }

    #[test]
    fn self_primed_read_is_circular() {
        let plus = FExpr::Bin(BinOp::Add, Box::new(primed(0)), Box::new(FExpr::Const(1)));
        let e = order_projections(vec![assign(0, plus)], &names(), false).unwrap_err();
        assert_eq!(e.kind, ElabErrorKind::CircularDataFlow);
    }

    #[test]
    fn two_writes_are_a_double_assignment() {
        let e = order_projections(vec![assign(0, FExpr::Const(1)), assign(0, FExpr::Const(2))], &names(), false)
            .unwrap_err();
        assert_eq!(e.kind, ElabErrorKind::DoubleAssignment);
    }

    #[test]
    fn exclusive_branches_may_write_the_same_variable() {
        let mut a = assign(0, FExpr::Const(1));
        a.path = vec![(0, 0)];
        let mut b = assign(0, FExpr::Const(2));
        b.path = vec![(0, 1)];
        let r = order_projections(vec![a, b], &names(), false).unwrap();
        assert_eq!(r.projections.len(), 1);
        assert_eq!(r.projections[0].writes.len(), 2);
    }

    #[test]
    fn swap_has_no_edges_unless_strict() {
        let unprimed = |v| FExpr::Var { var: v, primed: false };
        let ws = vec![assign(0, unprimed(1)), assign(1, unprimed(0))];
        assert!(order_projections(ws.clone(), &names(), false).unwrap().edges.is_empty());
        let e = order_projections(ws, &names(), true).unwrap_err();
        assert_eq!(e.kind, ElabErrorKind::CircularDataFlow);
    }
}
