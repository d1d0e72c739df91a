//! Product of the explored LTS with a Büchi automaton, and the search for
//! fair accepting strongly connected components.

use std::collections::{HashMap, VecDeque};

use crate::lts::{LtsGraph, Transition};

use super::buchi::Buchi;
use super::Fairness;

/// Product states are `config * nodes + node`; edges are computed on
/// demand from the LTS graph and the automaton.
pub(crate) struct Product<'a> {
    pub graph: &'a LtsGraph,
    pub buchi: &'a Buchi,
    /// `admits[config * nodes + node]`: the configuration satisfies the
    /// node's literals.
    pub admits: Vec<bool>,
    pub nodes: usize,
}

impl Product<'_> {
    pub fn config(&self, p: usize) -> usize {
        p / self.nodes
    }

    fn node(&self, p: usize) -> usize {
        p % self.nodes
    }

    pub fn size(&self) -> usize {
        self.graph.len() * self.nodes
    }

    pub fn succ(&self, p: usize, out: &mut Vec<(usize, Transition)>) {
        out.clear();
        let q = self.node(p);
        for &(j, t) in self.graph.successors(self.config(p)) {
            for &r in &self.buchi.nodes[q].succ {
                let to = j as usize * self.nodes + r as usize;
                if self.admits[to] {
                    out.push((to, t));
                }
            }
        }
    }

    /// Initial product states over configuration `config`.
    pub fn roots(&self, config: usize) -> Vec<usize> {
        self.buchi
            .initial
            .iter()
            .map(|&r| config * self.nodes + r as usize)
            .filter(|&p| self.admits[p])
            .collect()
    }
}

const UNSEEN: u32 = u32::MAX;

/// Reusable Tarjan state over the dense product index.
struct Tarjan {
    index: Vec<u32>,
    low: Vec<u32>,
    on_stack: Vec<bool>,
    comp: Vec<u32>,
    touched: Vec<usize>,
}

impl Tarjan {
    fn new(n: usize) -> Tarjan {
        Tarjan {
            index: vec![UNSEEN; n],
            low: vec![0; n],
            on_stack: vec![false; n],
            comp: vec![UNSEEN; n],
            touched: Vec::new(),
        }
    }

    fn reset(&mut self) {
        for &v in &self.touched {
            self.index[v] = UNSEEN;
            self.on_stack[v] = false;
            self.comp[v] = UNSEEN;
        }
        self.touched.clear();
    }

    /// Components reachable from `roots` inside `allowed`, in completion
    /// order. Leaves `comp` filled until the next reset.
    fn run(&mut self, prod: &Product, roots: &[usize], allowed: &dyn Fn(usize) -> bool) -> Vec<Vec<usize>> {
        let mut comps = Vec::new();
        let mut stack: Vec<usize> = Vec::new();
        let mut frames: Vec<(usize, Vec<(usize, Transition)>, usize)> = Vec::new();
        let mut counter = 0u32;
        for &root in roots {
            if self.index[root] != UNSEEN || !allowed(root) {
                continue;
            }
            let mut push = |v: usize, this: &mut Tarjan, frames: &mut Vec<_>, stack: &mut Vec<usize>| {
                this.index[v] = counter;
                this.low[v] = counter;
                counter += 1;
                this.on_stack[v] = true;
                this.touched.push(v);
                stack.push(v);
                let mut s = Vec::new();
                prod.succ(v, &mut s);
                frames.push((v, s, 0));
            };
            push(root, self, &mut frames, &mut stack);
            while let Some(top) = frames.last_mut() {
                let v = top.0;
                if top.2 < top.1.len() {
                    let w = top.1[top.2].0;
                    top.2 += 1;
                    if !allowed(w) {
                        continue;
                    }
                    if self.index[w] == UNSEEN {
                        push(w, self, &mut frames, &mut stack);
                    } else if self.on_stack[w] {
                        self.low[v] = self.low[v].min(self.index[w]);
                    }
                    continue;
                }
                frames.pop();
                if let Some(parent) = frames.last() {
                    let p = parent.0;
                    self.low[p] = self.low[p].min(self.low[v]);
                }
                if self.low[v] == self.index[v] {
                    let id = comps.len() as u32;
                    let mut c = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        self.on_stack[w] = false;
                        self.comp[w] = id;
                        c.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comps.push(c);
                }
            }
        }
        comps
    }
}

enum Analysis {
    Fair,
    Reject,
    Refine(Vec<usize>),
}

/// What an SCC offers towards acceptance and fairness.
struct Summary {
    nontrivial: bool,
    accept: u64,
    taken: Vec<bool>,
    enabled_somewhere: Vec<bool>,
    disabled_somewhere: Vec<bool>,
}

fn summarize(prod: &Product, fair: &Fairness, members: &[usize], inside: &dyn Fn(usize) -> bool) -> Summary {
    let k = fair.len();
    let mut s = Summary {
        nontrivial: false,
        accept: 0,
        taken: vec![false; k],
        enabled_somewhere: vec![false; k],
        disabled_somewhere: vec![false; k],
    };
    let mut buf = Vec::new();
    for &v in members {
        let c = prod.graph.config(prod.config(v));
        s.accept |= prod.buchi.nodes[v % prod.nodes].accept;
        for i in 0..k {
            if fair.enabled(i, c) {
                s.enabled_somewhere[i] = true;
            } else {
                s.disabled_somewhere[i] = true;
            }
        }
        prod.succ(v, &mut buf);
        for &(w, t) in &buf {
            if inside(w) {
                s.nontrivial = true;
                if let Some(i) = fair.taken(t) {
                    s.taken[i] = true;
                }
            }
        }
    }
    s
}

fn analyze(prod: &Product, fair: &Fairness, members: &[usize], inside: &dyn Fn(usize) -> bool) -> Analysis {
    let s = summarize(prod, fair, members, inside);
    if !s.nontrivial || s.accept != prod.buchi.all_accepting() {
        return Analysis::Reject;
    }
    for i in 0..fair.len() {
        if !fair.is_compassion(i) && !s.taken[i] && !s.disabled_somewhere[i] {
            return Analysis::Reject;
        }
    }
    let bad: Vec<usize> = (0..fair.len())
        .filter(|&i| fair.is_compassion(i) && s.enabled_somewhere[i] && !s.taken[i])
        .collect();
    if bad.is_empty() {
        return Analysis::Fair;
    }
    let rest: Vec<usize> = members
        .iter()
        .copied()
        .filter(|&v| {
            let c = prod.graph.config(prod.config(v));
            !bad.iter().any(|&i| fair.enabled(i, c))
        })
        .collect();
    if rest.is_empty() {
        Analysis::Reject
    } else {
        Analysis::Refine(rest)
    }
}

/// Result of a fair-cycle search.
pub(crate) struct Search {
    /// Members of a fair accepting SCC, if one exists.
    pub found: Option<Vec<usize>>,
    /// Product states reached from the roots.
    pub visited: usize,
}

/// Looks for a reachable SCC that meets every acceptance set and every
/// fairness obligation. SCCs that fail only compassion are refined by
/// removing the states where the starved event is enabled.
pub(crate) fn find_fair_scc(prod: &Product, fair: &Fairness, roots: &[usize]) -> Search {
    let mut tj = Tarjan::new(prod.size());
    let comps = tj.run(prod, roots, &|_| true);
    let visited = tj.touched.len();
    let mut pending = Vec::new();
    for (id, c) in comps.iter().enumerate() {
        let comp = &tj.comp;
        match analyze(prod, fair, c, &|w| comp[w] == id as u32) {
            Analysis::Fair => {
                return Search {
                    found: Some(c.clone()),
                    visited,
                }
            }
            Analysis::Reject => {}
            Analysis::Refine(rest) => pending.push(rest),
        }
    }
    tj.reset();
    // Pending sets are pairwise disjoint, so one marker array serves all.
    let mut mark = vec![0u32; prod.size()];
    let mut generation = 0u32;
    while let Some(set) = pending.pop() {
        generation += 1;
        for &v in &set {
            mark[v] = generation;
        }
        let g = generation;
        let comps = tj.run(prod, &set, &|w| mark[w] == g);
        for (id, c) in comps.iter().enumerate() {
            let comp = &tj.comp;
            match analyze(prod, fair, c, &|w| comp[w] == id as u32 && mark[w] == g) {
                Analysis::Fair => {
                    return Search {
                        found: Some(c.clone()),
                        visited,
                    }
                }
                Analysis::Reject => {}
                Analysis::Refine(rest) => pending.push(rest),
            }
        }
        tj.reset();
    }
    Search { found: None, visited }
}

/// Shortest path inside `within` from any of `from` to a state satisfying
/// `goal`, as `(state, transition out of it)` steps, and the goal state.
fn bfs(
    prod: &Product,
    from: &[usize],
    within: &dyn Fn(usize) -> bool,
    goal: &dyn Fn(usize) -> bool,
) -> Option<(Vec<(usize, Transition)>, usize)> {
    let mut parent: HashMap<usize, Option<(usize, Transition)>> = HashMap::new();
    let mut queue = VecDeque::new();
    for &s in from {
        if parent.insert(s, None).is_none() {
            queue.push_back(s);
        }
    }
    let mut buf = Vec::new();
    while let Some(v) = queue.pop_front() {
        if goal(v) {
            let mut path = Vec::new();
            let mut cur = v;
            while let Some(Some((p, t))) = parent.get(&cur) {
                path.push((*p, *t));
                cur = *p;
            }
            path.reverse();
            return Some((path, v));
        }
        prod.succ(v, &mut buf);
        for &(w, t) in &buf {
            if within(w) && !parent.contains_key(&w) {
                parent.insert(w, Some((v, t)));
                queue.push_back(w);
            }
        }
    }
    None
}

/// A lasso in product states: `prefix` leads from a root to `cycle[0].0`
/// and the cycle's last transition returns there.
pub(crate) struct ProductLasso {
    pub prefix: Vec<(usize, Transition)>,
    pub cycle: Vec<(usize, Transition)>,
}

/// Builds a lasso through the fair SCC `scc`: shortest prefix, then a
/// cycle that visits every acceptance set and discharges every obligation.
pub(crate) fn extract_lasso(prod: &Product, fair: &Fairness, roots: &[usize], scc: &[usize]) -> ProductLasso {
    let mut member = vec![false; prod.size()];
    for &v in scc {
        member[v] = true;
    }
    let inside = |w: usize| member[w];
    let (prefix, start) = bfs(prod, roots, &|_| true, &inside).expect("fair SCC is reachable");
    let summary = summarize(prod, fair, scc, &inside);

    let mut buf = Vec::new();
    let takes = |v: usize, i: usize, buf: &mut Vec<(usize, Transition)>| -> Option<(usize, Transition)> {
        prod.succ(v, buf);
        buf.iter().copied().find(|&(w, t)| inside(w) && fair.taken(t) == Some(i))
    };

    let mut cycle: Vec<(usize, Transition)> = Vec::new();
    let mut cur = start;
    let walk_to = |goal: &dyn Fn(usize) -> bool, cycle: &mut Vec<(usize, Transition)>, cur: &mut usize| {
        let (path, end) = bfs(prod, &[*cur], &inside, goal).expect("goal inside the SCC");
        cycle.extend(path);
        *cur = end;
    };

    for j in 0..prod.buchi.acceptance_sets {
        let nodes = prod.nodes;
        walk_to(&|v| prod.buchi.nodes[v % nodes].accept >> j & 1 == 1, &mut cycle, &mut cur);
    }
    for i in 0..fair.len() {
        let need_edge = if fair.is_compassion(i) {
            summary.enabled_somewhere[i]
        } else {
            summary.taken[i]
        };
        if need_edge {
            walk_to(&|v| takes(v, i, &mut Vec::new()).is_some(), &mut cycle, &mut cur);
            let (w, t) = takes(cur, i, &mut buf).expect("edge");
            cycle.push((cur, t));
            cur = w;
        } else if !fair.is_compassion(i) {
            walk_to(&|v| !fair.enabled(i, prod.graph.config(prod.config(v))), &mut cycle, &mut cur);
        }
    }
    if cycle.is_empty() && cur == start {
        prod.succ(cur, &mut buf);
        let (w, t) = buf.iter().copied().find(|&(w, _)| inside(w)).expect("nontrivial SCC");
        cycle.push((cur, t));
        cur = w;
    }
    if cur != start {
        let (path, _) = bfs(prod, &[cur], &inside, &|v| v == start).expect("strongly connected");
        cycle.extend(path);
    }
    ProductLasso { prefix, cycle }
}
