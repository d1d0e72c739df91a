//! Tableau translation of NNF formulas to generalized Büchi automata
//! (Gerth, Peled, Vardi and Wolper).

use std::collections::{BTreeSet, HashMap};

use super::formula::{Arena, Nnf};

const INIT: usize = usize::MAX;

/// A state of the automaton. A run enters a node only on a letter that
/// satisfies its literals.
#[derive(Debug, Clone, PartialEq)]
pub struct BuchiNode {
    /// `(atom, polarity)` pairs.
    pub literals: Vec<(u32, bool)>,
    pub succ: Vec<u32>,
    /// Bit `j` is set when the node is in acceptance set `j`.
    pub accept: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Buchi {
    pub nodes: Vec<BuchiNode>,
    pub initial: Vec<u32>,
    pub acceptance_sets: usize,
}

impl Buchi {
    pub fn all_accepting(&self) -> u64 {
        if self.acceptance_sets == 64 {
            u64::MAX
        } else {
            (1u64 << self.acceptance_sets) - 1
        }
    }

    /// Whether a letter given by `atom` satisfies node `n`'s literals.
    pub fn admits(&self, n: u32, atom: &dyn Fn(u32) -> bool) -> bool {
        self.nodes[n as usize].literals.iter().all(|&(a, pos)| atom(a) == pos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TooLarge {
    pub nodes: usize,
}

#[derive(Clone)]
struct Pending {
    incoming: BTreeSet<usize>,
    old: BTreeSet<u32>,
    new: Vec<u32>,
    next: BTreeSet<u32>,
}

struct Done {
    incoming: BTreeSet<usize>,
    old: BTreeSet<u32>,
}

/// Builds an automaton accepting exactly the words satisfying `root`.
pub fn translate(arena: &Arena, root: u32, max_nodes: usize) -> Result<Buchi, TooLarge> {
    let mut done: Vec<Done> = Vec::new();
    let mut seen: HashMap<(BTreeSet<u32>, BTreeSet<u32>), usize> = HashMap::new();
    let mut work = vec![Pending {
        incoming: BTreeSet::from([INIT]),
        old: BTreeSet::new(),
        new: vec![root],
        next: BTreeSet::new(),
    }];
    while let Some(mut p) = work.pop() {
        let Some(f) = p.new.pop() else {
            let key = (p.old.clone(), p.next.clone());
            if let Some(&k) = seen.get(&key) {
                done[k].incoming.extend(p.incoming);
                continue;
            }
            let id = done.len();
            if id >= max_nodes {
                return Err(TooLarge { nodes: id + 1 });
            }
            seen.insert(key, id);
            work.push(Pending {
                incoming: BTreeSet::from([id]),
                old: BTreeSet::new(),
                new: p.next.iter().copied().collect(),
                next: BTreeSet::new(),
            });
            done.push(Done {
                incoming: p.incoming,
                old: p.old,
            });
            continue;
        };
        if p.old.contains(&f) {
            work.push(p);
            continue;
        }
        let add = |p: &mut Pending, xs: &[u32]| {
            for &x in xs {
                if !p.old.contains(&x) && !p.new.contains(&x) {
                    p.new.push(x);
                }
            }
        };
        match arena.nodes[f as usize] {
            Nnf::False => {}
            Nnf::True => {
                p.old.insert(f);
                work.push(p);
            }
            Nnf::Lit(a, pos) => {
                let contradicts = arena.find(Nnf::Lit(a, !pos)).is_some_and(|g| p.old.contains(&g));
                if !contradicts {
                    p.old.insert(f);
                    work.push(p);
                }
            }
            Nnf::And(a, b) => {
                p.old.insert(f);
                add(&mut p, &[a, b]);
                work.push(p);
            }
            Nnf::Next(a) => {
                p.old.insert(f);
                p.next.insert(a);
                work.push(p);
            }
            Nnf::Or(a, b) | Nnf::Until(a, b) | Nnf::Release(a, b) => {
                p.old.insert(f);
                let mut q = p.clone();
                let node = arena.nodes[f as usize];
                match node {
                    Nnf::Or(..) => {
                        add(&mut p, &[a]);
                        add(&mut q, &[b]);
                    }
                    Nnf::Until(..) => {
                        add(&mut p, &[a]);
                        p.next.insert(f);
                        add(&mut q, &[b]);
                    }
                    _ => {
                        add(&mut p, &[b]);
                        p.next.insert(f);
                        add(&mut q, &[a, b]);
                    }
                }
                work.push(q);
                work.push(p);
            }
        }
    }

    let untils: Vec<(u32, u32)> = arena
        .nodes
        .iter()
        .enumerate()
        .filter_map(|(i, n)| match n {
            Nnf::Until(_, b) if done.iter().any(|d| d.old.contains(&(i as u32))) => Some((i as u32, *b)),
            _ => None,
        })
        .collect();
    if untils.len() > 64 {
        return Err(TooLarge { nodes: done.len() });
    }
    let mut nodes: Vec<BuchiNode> = done
        .iter()
        .map(|d| BuchiNode {
            literals: d
                .old
                .iter()
                .filter_map(|&f| match arena.nodes[f as usize] {
                    Nnf::Lit(a, pos) => Some((a, pos)),
                    _ => None,
                })
                .collect(),
            succ: Vec::new(),
            accept: untils
                .iter()
                .enumerate()
                .filter(|(_, (u, b))| !d.old.contains(u) || d.old.contains(b))
                .fold(0, |m, (j, _)| m | 1 << j),
        })
        .collect();
    let mut initial = Vec::new();
    for (r, d) in done.iter().enumerate() {
        for &q in &d.incoming {
            if q == INIT {
                initial.push(r as u32);
            } else {
                nodes[q].succ.push(r as u32);
            }
        }
    }
    Ok(Buchi {
        nodes,
        initial,
        acceptance_sets: untils.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::formula::Ltl;

    fn automaton(f: &Ltl) -> Buchi {
        let mut ar = Arena::default();
        let r = ar.nnf(f, false);
        translate(&ar, r, 1000).unwrap()
    }

    /// Accepts the lasso word `w[..k] (w[k..])^ω` by searching the product
    /// of the word positions and the automaton for an accepting cycle.
    fn accepts(b: &Buchi, w: &[Vec<bool>], k: usize) -> bool {
        let n = w.len();
        let next = |i: usize| if i + 1 == n { k } else { i + 1 };
        let ok = |node: u32, i: usize| b.admits(node, &|a| w[i][a as usize]);
        let states: Vec<(usize, u32)> = (0..n).flat_map(|i| (0..b.nodes.len() as u32).map(move |q| (i, q))).collect();
        let succ = |(i, q): (usize, u32)| -> Vec<(usize, u32)> {
            b.nodes[q as usize].succ.iter().filter(|&&r| ok(r, next(i))).map(|&r| (next(i), r)).collect()
        };
        let reach = |from: Vec<(usize, u32)>| {
            let mut seen: std::collections::HashSet<(usize, u32)> = from.iter().copied().collect();
            let mut stack = from;
            while let Some(s) = stack.pop() {
                for t in succ(s) {
                    if seen.insert(t) {
                        stack.push(t);
                    }
                }
            }
            seen
        };
        let init: Vec<(usize, u32)> = b.initial.iter().filter(|&&q| ok(q, 0)).map(|&q| (0, q)).collect();
        let reachable = reach(init);
        // An accepting lasso exists when some reachable state lies on a
        // cycle that sees every acceptance set; check per SCC.
        for &s in &states {
            if !reachable.contains(&s) {
                continue;
            }
            let fwd = reach(succ(s));
            if !fwd.contains(&s) {
                continue;
            }
            let scc: Vec<_> = fwd.iter().filter(|t| reach(succ(**t)).contains(&s)).collect();
            let acc = scc.iter().fold(0u64, |m, (_, q)| m | b.nodes[*q as usize].accept);
            if acc == b.all_accepting() {
                return true;
            }
        }
        false
    }

    fn words() -> Vec<(Vec<Vec<bool>>, usize)> {
        let mut out = Vec::new();
        for len in 1..=3usize {
            for bits in 0..(1u32 << (2 * len)) {
                let w: Vec<Vec<bool>> = (0..len)
                    .map(|i| vec![bits >> (2 * i) & 1 == 1, bits >> (2 * i + 1) & 1 == 1])
                    .collect();
                for k in 0..len {
                    out.push((w.clone(), k));
                }
            }
        }
        out
    }

    #[test]
    fn automata_agree_with_lasso_semantics() {
        let a = || Ltl::Atom(0);
        let b = || Ltl::Atom(1);
        let formulas = vec![
            Ltl::always(a()),
            Ltl::eventually(b()),
            Ltl::until(a(), b()),
            Ltl::always(Ltl::eventually(a())),
            Ltl::eventually(Ltl::always(Ltl::not(b()))),
            Ltl::always(Ltl::or(Ltl::not(a()), Ltl::eventually(b()))),
            Ltl::and(Ltl::always(Ltl::eventually(a())), Ltl::always(Ltl::eventually(b()))),
            Ltl::until(Ltl::until(a(), b()), Ltl::not(a())),
            Ltl::not(Ltl::until(a(), Ltl::always(b()))),
            Ltl::True,
            Ltl::False,
        ];
        for f in &formulas {
            let aut = automaton(f);
            for (w, k) in words() {
                let expect = f.holds_on_lasso(w.len(), k, &|i, x| w[i][x as usize]);
                assert_eq!(accepts(&aut, &w, k), expect, "{f} on {w:?} loop {k}");
            }
        }
    }

    #[test]
    fn node_limit() {
        let mut f = Ltl::True;
        for i in 0..8 {
            f = Ltl::and(f, Ltl::always(Ltl::eventually(Ltl::Atom(i))));
        }
        let mut ar = Arena::default();
        let r = ar.nnf(&f, true);
        assert!(translate(&ar, r, 4).is_err());
    }
}
