//! Reference checker: builds the whole transition system, then the whole
//! product with a closure-set tableau, then searches fair SCCs by repeated
//! decomposition. Shares only atom evaluation with the real checker.

use std::collections::{HashMap, VecDeque};

use ttm_core::checker::{Formula, Ltl, Obligation, ObligationKind};
use ttm_core::lts::{Config, Lts, Transition};

/// Core syntax: everything else is rewritten into these.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Core {
    True,
    Atom(u32),
    Not(usize),
    And(usize, usize),
    Until(usize, usize),
}

#[derive(Default)]
struct Closure {
    nodes: Vec<Core>,
    index: HashMap<Core, usize>,
}

impl Closure {
    fn add(&mut self, c: Core) -> usize {
        if let Some(&i) = self.index.get(&c) {
            return i;
        }
        self.nodes.push(c.clone());
        self.index.insert(c, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    fn build(&mut self, f: &Ltl) -> usize {
        match f {
            Ltl::True => self.add(Core::True),
            Ltl::False => {
                let t = self.add(Core::True);
                self.add(Core::Not(t))
            }
            Ltl::Atom(a) => self.add(Core::Atom(*a)),
            Ltl::Not(a) => {
                let a = self.build(a);
                self.add(Core::Not(a))
            }
            Ltl::And(a, b) => {
                let (a, b) = (self.build(a), self.build(b));
                self.add(Core::And(a, b))
            }
            Ltl::Or(a, b) => {
                let (a, b) = (self.build(a), self.build(b));
                let (na, nb) = (self.add(Core::Not(a)), self.add(Core::Not(b)));
                let both = self.add(Core::And(na, nb));
                self.add(Core::Not(both))
            }
            Ltl::Until(a, b) => {
                let (a, b) = (self.build(a), self.build(b));
                self.add(Core::Until(a, b))
            }
            Ltl::Eventually(a) => {
                let t = self.add(Core::True);
                let a = self.build(a);
                self.add(Core::Until(t, a))
            }
            Ltl::Always(a) => {
                let t = self.add(Core::True);
                let a = self.build(a);
                let na = self.add(Core::Not(a));
                let ev = self.add(Core::Until(t, na));
                self.add(Core::Not(ev))
            }
        }
    }
}

pub struct Outcome {
    pub holds: bool,
    pub states: usize,
    pub product: usize,
}

struct Graph {
    configs: Vec<Config>,
    edges: Vec<Vec<(Transition, usize)>>,
}

fn explore_all(lts: &Lts) -> Graph {
    let init = lts.initial().unwrap();
    let mut index: HashMap<Config, usize> = HashMap::from([(init.clone(), 0)]);
    let mut configs = vec![init];
    let mut edges = Vec::new();
    let mut i = 0;
    while i < configs.len() {
        let mut out = Vec::new();
        for (t, n) in lts.successors(&configs[i]).unwrap() {
            let j = *index.entry(n.clone()).or_insert_with(|| {
                configs.push(n);
                configs.len() - 1
            });
            out.push((t, j));
        }
        edges.push(out);
        i += 1;
    }
    Graph { configs, edges }
}

/// Values of every closure node given the atom values and a choice for
/// each until whose left side holds and right side does not.
fn labellings(cl: &Closure, atoms: &dyn Fn(u32) -> bool) -> Vec<Vec<bool>> {
    // Nodes are added children-first, so one pass in index order
    // evaluates bottom-up; free untils branch.
    let mut out = vec![Vec::with_capacity(cl.nodes.len())];
    for node in &cl.nodes {
        let mut next = Vec::new();
        for mut v in out {
            match *node {
                Core::True => v.push(true),
                Core::Atom(a) => v.push(atoms(a)),
                Core::Not(a) => {
                    let x = !v[a];
                    v.push(x)
                }
                Core::And(a, b) => {
                    let x = v[a] && v[b];
                    v.push(x)
                }
                Core::Until(a, b) => {
                    if v[b] {
                        v.push(true)
                    } else if !v[a] {
                        v.push(false)
                    } else {
                        let mut w = v.clone();
                        w.push(false);
                        next.push(w);
                        v.push(true);
                    }
                }
            }
            next.push(v);
        }
        out = next;
    }
    out
}

pub fn check(lts: &Lts, f: &Formula, obligations: &[Obligation]) -> Outcome {
    let g = explore_all(lts);
    let mut cl = Closure::default();
    let root = cl.build(&f.ltl);
    let untils: Vec<(usize, usize, usize)> = cl
        .nodes
        .iter()
        .enumerate()
        .filter_map(|(i, n)| match *n {
            Core::Until(a, b) => Some((i, a, b)),
            _ => None,
        })
        .collect();

    // Product nodes: (config, labelling).
    let mut nodes: Vec<(usize, Vec<bool>)> = Vec::new();
    let mut by_config: Vec<Vec<usize>> = vec![Vec::new(); g.configs.len()];
    for (ci, c) in g.configs.iter().enumerate() {
        let vals: Vec<bool> = (0..f.atoms.len()).map(|a| f.atoms[a].eval(lts, c).unwrap()).collect();
        for l in labellings(&cl, &|a| vals[a as usize]) {
            by_config[ci].push(nodes.len());
            nodes.push((ci, l));
        }
    }
    let step_ok = |a: &[bool], b: &[bool]| untils.iter().all(|&(u, x, y)| a[u] == (a[y] || (a[x] && b[u])));
    let mut succ: Vec<Vec<(Transition, usize)>> = vec![Vec::new(); nodes.len()];
    for (n, (ci, l)) in nodes.iter().enumerate() {
        for &(t, cj) in &g.edges[*ci] {
            for &m in &by_config[cj] {
                if step_ok(l, &nodes[m].1) {
                    succ[n].push((t, m));
                }
            }
        }
    }

    // Nodes reachable from an initial node where the formula is false.
    let mut alive = vec![false; nodes.len()];
    let mut queue: VecDeque<usize> = by_config[0].iter().copied().filter(|&n| !nodes[n].1[root]).collect();
    for &n in &queue {
        alive[n] = true;
    }
    while let Some(n) = queue.pop_front() {
        for &(_, m) in &succ[n] {
            if !alive[m] {
                alive[m] = true;
                queue.push_back(m);
            }
        }
    }

    let enabled = |o: &Obligation, ci: usize| {
        let ev = &lts.model.events[o.event as usize];
        lts.clock(&g.configs[ci], o.event as usize, o.fair as usize) >= ev.l as i32
    };
    let takes = |o: &Obligation, t: Transition| {
        matches!(t, Transition::Event { event, fair, .. } if event == o.event && fair == o.fair)
    };

    let found = fair_scc(&succ, alive, &|scc: &[usize], inside: &[bool]| {
        let nontrivial = scc.len() > 1 || succ[scc[0]].iter().any(|&(_, m)| m == scc[0]);
        if !nontrivial {
            return Verdict::Reject;
        }
        for &(u, _, b) in &untils {
            if !scc.iter().any(|&n| !nodes[n].1[u] || nodes[n].1[b]) {
                return Verdict::Reject;
            }
        }
        let taken_inside = |o: &Obligation| {
            scc.iter()
                .any(|&n| succ[n].iter().any(|&(t, m)| inside[m] && takes(o, t)))
        };
        for o in obligations {
            let somewhere = scc.iter().any(|&n| enabled(o, nodes[n].0));
            let everywhere = scc.iter().all(|&n| enabled(o, nodes[n].0));
            match o.kind {
                ObligationKind::Justice => {
                    if everywhere && !taken_inside(o) {
                        return Verdict::Reject;
                    }
                }
                ObligationKind::Compassion => {
                    if somewhere && !taken_inside(o) {
                        let keep: Vec<usize> = scc.iter().copied().filter(|&n| !enabled(o, nodes[n].0)).collect();
                        return Verdict::Restrict(keep);
                    }
                }
            }
        }
        Verdict::Accept
    });
    Outcome {
        holds: !found,
        states: g.configs.len(),
        product: nodes.len(),
    }
}

enum Verdict {
    Accept,
    Reject,
    Restrict(Vec<usize>),
}

/// Whether some SCC of the subgraph on `alive`, or of a restriction of
/// one, is accepted.
fn fair_scc(succ: &[Vec<(Transition, usize)>], alive: Vec<bool>, judge: &dyn Fn(&[usize], &[bool]) -> Verdict) -> bool {
    let mut work = vec![alive];
    while let Some(set) = work.pop() {
        for scc in kosaraju(succ, &set) {
            let mut inside = vec![false; succ.len()];
            for &n in &scc {
                inside[n] = true;
            }
            match judge(&scc, &inside) {
                Verdict::Accept => return true,
                Verdict::Reject => {}
                Verdict::Restrict(keep) => {
                    if !keep.is_empty() {
                        let mut s = vec![false; succ.len()];
                        for n in keep {
                            s[n] = true;
                        }
                        work.push(s);
                    }
                }
            }
        }
    }
    false
}

/// Strongly connected components of the subgraph induced by `set`.
fn kosaraju(succ: &[Vec<(Transition, usize)>], set: &[bool]) -> Vec<Vec<usize>> {
    let n = succ.len();
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, out) in succ.iter().enumerate() {
        if set[a] {
            for &(_, b) in out {
                if set[b] {
                    pred[b].push(a);
                }
            }
        }
    }
    // First pass: finishing order by iterative DFS.
    let mut order = Vec::new();
    let mut seen = vec![false; n];
    for s in 0..n {
        if !set[s] || seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![(s, 0usize)];
        while let Some((v, i)) = stack.pop() {
            let out = &succ[v];
            if i < out.len() {
                stack.push((v, i + 1));
                let w = out[i].1;
                if set[w] && !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
            }
        }
    }
    // Second pass on the transpose in reverse finishing order.
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![s];
        comp[s] = id;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &w in &pred[v] {
                if comp[w] == usize::MAX {
                    comp[w] = id;
                    members.push(w);
                    stack.push(w);
                }
            }
        }
        out.push(members);
    }
    out
}
