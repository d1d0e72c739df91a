//! LTL model checking of the explored LTS under justice and compassion.

pub mod buchi;
pub mod formula;
mod product;

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::elaborator::{ElabError, FlatModel, Kind};
use crate::lts::eval::EvalError;
use crate::lts::{explore, Config, ExploreError, Limits, Lts, LtsGraph, Stats, StepError, Transition};
use crate::syntax::{Diagnostic, Fairness as EventFairness, PropertySource};

pub use formula::{expand_quantifiers, instantiations, Atom, Bindings, Formula, Ltl};
use product::{extract_lasso, find_fair_scc, Product};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error("unknown set `{0}`")]
    UnknownSet(String),
    #[error("{0}")]
    Elab(ElabError),
    #[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Property(Vec<Diagnostic>),
    #[error("unsupported property: {0}")]
    Unsupported(String),
    #[error("state limit exceeded after {} states and {} transitions", .0.states, .0.transitions)]
    StateLimitExceeded(Stats),
    #[error("Büchi automaton exceeds {limit} nodes")]
    FormulaTooLarge { limit: usize },
    #[error("deadlock: no transition is enabled in {description}")]
    Deadlock { config: Config, description: String },
    #[error(transparent)]
    Step(StepError),
    #[error("evaluating `{1}`: {0}")]
    Eval(EvalError, String),
    #[error("invalid counterexample: {0}")]
    InvalidLasso(String),
}

impl From<ExploreError> for CheckError {
    fn from(e: ExploreError) -> Self {
        match e {
            ExploreError::StateLimitExceeded(s) => CheckError::StateLimitExceeded(s),
            ExploreError::Step(s) => CheckError::Step(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ObligationKind {
    Justice,
    Compassion,
}

/// A fairness requirement on one event and fair-index valuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Obligation {
    pub event: u32,
    pub fair: u32,
    pub kind: ObligationKind,
}

/// Obligations of every non-spontaneous event. Events with a finite upper
/// bound are treated as just.
pub fn obligations(model: &FlatModel) -> Vec<Obligation> {
    let mut out = Vec::new();
    for (e, ev) in model.events.iter().enumerate() {
        let kind = match ev.fair {
            EventFairness::Compassionate => ObligationKind::Compassion,
            EventFairness::Just => ObligationKind::Justice,
            EventFairness::Spontaneous if ev.u.is_some() => ObligationKind::Justice,
            EventFairness::Spontaneous => continue,
        };
        for v in 0..ev.fair_count() {
            out.push(Obligation {
                event: e as u32,
                fair: v as u32,
                kind,
            });
        }
    }
    out
}

/// Obligations with fast lookup of enabledness and taken edges.
#[derive(Debug, Clone)]
pub struct Fairness {
    pub list: Vec<Obligation>,
    /// Clock slot and lower bound per obligation.
    clock: Vec<(usize, i32)>,
    /// Obligation per (event, fair) hash id.
    by_hash: Vec<Option<usize>>,
    hash_offset: Vec<usize>,
}

impl Fairness {
    pub fn new(lts: &Lts, list: Vec<Obligation>) -> Fairness {
        let lay = &lts.layout;
        let mut by_hash = vec![None; lay.n_clocks()];
        let clock = list
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let h = lay.hash_id(o.event, o.fair) as usize;
                by_hash[h] = Some(i);
                (lay.clocks + h, lts.model.events[o.event as usize].l as i32)
            })
            .collect();
        Fairness {
            list,
            clock,
            by_hash,
            hash_offset: lay.clock_offset.clone(),
        }
    }

    pub fn of(lts: &Lts) -> Fairness {
        Fairness::new(lts, obligations(&lts.model))
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn is_compassion(&self, i: usize) -> bool {
        self.list[i].kind == ObligationKind::Compassion
    }

    /// `en(e, v)`: the guard holds and the clock has reached the lower
    /// bound.
    pub fn enabled(&self, i: usize, c: &[i32]) -> bool {
        let (slot, l) = self.clock[i];
        c[slot] >= l
    }

    /// The obligation discharged by taking `t`.
    pub fn taken(&self, t: Transition) -> Option<usize> {
        match t {
            Transition::Event { event, fair, .. } => self.by_hash[self.hash_offset[event as usize] + fair as usize],
            _ => None,
        }
    }
}

/// One step of a counterexample: a configuration and the transition taken
/// out of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub config: Config,
    pub transition: Transition,
}

/// An infinite execution `prefix cycle cycle ...`. The prefix starts in the
/// initial configuration (or the cycle does, when the prefix is empty); the
/// last transition of the cycle returns to its first configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Lasso {
    pub prefix: Vec<Step>,
    pub cycle: Vec<Step>,
}

impl Lasso {
    /// Configurations of prefix and one pass of the cycle, in order.
    pub fn configs(&self) -> impl Iterator<Item = &Config> {
        self.prefix.iter().chain(&self.cycle).map(|s| &s.config)
    }

    pub fn len(&self) -> usize {
        self.prefix.len() + self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Truth of `f` on the infinite execution.
    pub fn satisfies(&self, lts: &Lts, f: &Formula) -> Result<bool, CheckError> {
        let steps: Vec<&Step> = self.prefix.iter().chain(&self.cycle).collect();
        let rows = f.atom_rows(lts, steps.iter().map(|s| &*s.config))?;
        Ok(f.ltl.holds_on_lasso(steps.len(), self.prefix.len(), &|i, a| rows.get(i, a)))
    }

    /// Replays the lasso through the transition relation and checks every
    /// obligation on the cycle.
    pub fn validate(&self, lts: &Lts, fair: &Fairness) -> Result<(), String> {
        if self.cycle.is_empty() {
            return Err("empty cycle".into());
        }
        let init = lts.initial().map_err(|e| e.to_string())?;
        let steps: Vec<&Step> = self.prefix.iter().chain(&self.cycle).collect();
        if steps[0].config != init {
            return Err("does not start in the initial configuration".into());
        }
        for (i, s) in steps.iter().enumerate() {
            let next = if i + 1 < steps.len() {
                &steps[i + 1].config
            } else {
                &self.cycle[0].config
            };
            let succ = lts.step(&s.config, s.transition).map_err(|e| format!("step {i}: {e}"))?;
            if !succ.contains(next) {
                return Err(format!("step {i}: `{}` does not lead to the next configuration", lts.label(s.transition)));
            }
        }
        for (i, o) in fair.list.iter().enumerate() {
            let taken = self.cycle.iter().any(|s| fair.taken(s.transition) == Some(i));
            let enabled = self.cycle.iter().map(|s| fair.enabled(i, &s.config));
            let ok = match o.kind {
                ObligationKind::Justice => taken || enabled.clone().any(|e| !e),
                ObligationKind::Compassion => taken || !enabled.clone().any(|e| e),
            };
            if !ok {
                let name = lts.label(Transition::Hash {
                    event: o.event,
                    fair: o.fair,
                });
                return Err(format!("cycle starves `{}`", name.replacen('#', "", 1)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CheckStats {
    pub states: usize,
    pub transitions: usize,
    pub product_states: usize,
    pub buchi_nodes: usize,
    pub millis: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub holds: bool,
    pub counterexample: Option<Lasso>,
    /// For invariant failures, the position of the first violating
    /// configuration in `prefix ++ cycle`.
    pub violation: Option<usize>,
    pub stats: CheckStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOptions {
    pub limits: Limits,
    pub max_buchi_nodes: usize,
    /// Check `[]p` by reachability.
    pub invariant_fast_path: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            limits: Limits::default(),
            max_buchi_nodes: 20_000,
            invariant_fast_path: true,
        }
    }
}

/// Verdict of one parameter instantiation of a property.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceVerdict {
    /// `(parameter, rendered value)` pairs.
    pub bindings: Vec<(String, String)>,
    pub verdict: Verdict,
}

/// A model with its explored state space, checked against any number of
/// properties.
pub struct Checker {
    pub lts: Lts,
    pub options: CheckOptions,
    pub fairness: Fairness,
    graph: Option<LtsGraph>,
}

impl Checker {
    pub fn new(model: impl Into<Arc<FlatModel>>, options: CheckOptions) -> Checker {
        Self::with_lts(Lts::new(model), options)
    }

    pub fn with_lts(lts: Lts, options: CheckOptions) -> Checker {
        let fairness = Fairness::of(&lts);
        Checker {
            lts,
            options,
            fairness,
            graph: None,
        }
    }

    /// Replaces the obligations, e.g. to check without fairness.
    pub fn set_obligations(&mut self, list: Vec<Obligation>) {
        self.fairness = Fairness::new(&self.lts, list);
    }

    /// The reachable LTS; explored on first use. Reports deadlocks.
    pub fn graph(&mut self) -> Result<&LtsGraph, CheckError> {
        if self.graph.is_none() {
            let g = explore(&self.lts, self.options.limits)?;
            if let Some(&d) = g.deadlocks().first() {
                let config: Config = g.config(d).into();
                return Err(CheckError::Deadlock {
                    description: self.lts.config_json(&config).to_string(),
                    config,
                });
            }
            self.graph = Some(g);
        }
        Ok(self.graph.as_ref().expect("explored"))
    }

    fn stats(&self, product_states: usize, buchi_nodes: usize, start: Instant) -> CheckStats {
        let g = self.graph.as_ref().expect("explored");
        CheckStats {
            states: g.stats.states,
            transitions: g.stats.transitions,
            product_states,
            buchi_nodes,
            millis: start.elapsed().as_millis(),
        }
    }

    fn to_steps(&self, prod: &Product, path: &[(usize, Transition)]) -> Vec<Step> {
        path.iter()
            .map(|&(p, t)| Step {
                config: prod.graph.config(prod.config(p)).into(),
                transition: t,
            })
            .collect()
    }

    /// Decides whether every fair execution satisfies `f`.
    pub fn check(&mut self, f: &Formula) -> Result<Verdict, CheckError> {
        let start = Instant::now();
        self.graph()?;
        let mut arena = formula::Arena::default();
        let root = arena.nnf(&f.ltl, true);
        let aut = buchi::translate(&arena, root, self.options.max_buchi_nodes).map_err(|_| {
            CheckError::FormulaTooLarge {
                limit: self.options.max_buchi_nodes,
            }
        })?;
        let graph = self.graph.as_ref().expect("explored");
        let rows = f.atom_rows(&self.lts, graph.configs.iter().map(|c| &**c))?;
        let nodes = aut.nodes.len().max(1);
        let mut admits = vec![false; graph.len() * nodes];
        for c in 0..graph.len() {
            for n in 0..aut.nodes.len() {
                admits[c * nodes + n] = aut.admits(n as u32, &|a| rows.get(c, a));
            }
        }
        let prod = Product {
            graph,
            buchi: &aut,
            admits,
            nodes,
        };
        let roots = prod.roots(0);
        let search = find_fair_scc(&prod, &self.fairness, &roots);
        let Some(scc) = search.found else {
            return Ok(Verdict {
                holds: true,
                counterexample: None,
                violation: None,
                stats: self.stats(search.visited, aut.nodes.len(), start),
            });
        };
        let pl = extract_lasso(&prod, &self.fairness, &roots, &scc);
        let lasso = Lasso {
            prefix: self.to_steps(&prod, &pl.prefix),
            cycle: self.to_steps(&prod, &pl.cycle),
        };
        lasso.validate(&self.lts, &self.fairness).map_err(CheckError::InvalidLasso)?;
        if lasso.satisfies(&self.lts, f)? {
            return Err(CheckError::InvalidLasso("the lasso satisfies the property".into()));
        }
        Ok(Verdict {
            holds: false,
            counterexample: Some(lasso),
            violation: None,
            stats: self.stats(search.visited, aut.nodes.len(), start),
        })
    }

    /// Decides `[]p` for a state atom `p` by reachability. A violation is
    /// extended to a fair lasso so that it is a legal execution.
    pub fn check_invariant(&mut self, p: &Atom) -> Result<Verdict, CheckError> {
        let start = Instant::now();
        self.graph()?;
        let graph = self.graph.as_ref().expect("explored");
        let trivial = buchi::Buchi {
            nodes: vec![buchi::BuchiNode {
                literals: vec![],
                succ: vec![0],
                accept: 0,
            }],
            initial: vec![0],
            acceptance_sets: 0,
        };
        let prod = Product {
            graph,
            buchi: &trivial,
            admits: vec![true; graph.len()],
            nodes: 1,
        };
        // Configurations are numbered breadth-first, so the first violation
        // found has a shortest path.
        for i in 0..graph.len() {
            if p.eval(&self.lts, graph.config(i)).map_err(|e| CheckError::Eval(e, p.render(&self.lts)))? {
                continue;
            }
            let search = find_fair_scc(&prod, &self.fairness, &[i]);
            let Some(scc) = search.found else {
                continue;
            };
            let to_bad = shortest_path(graph, i);
            let pl = extract_lasso(&prod, &self.fairness, &[i], &scc);
            let mut prefix = self.to_steps(&prod, &to_bad);
            let violation = prefix.len();
            prefix.extend(self.to_steps(&prod, &pl.prefix));
            let lasso = Lasso {
                prefix,
                cycle: self.to_steps(&prod, &pl.cycle),
            };
            lasso.validate(&self.lts, &self.fairness).map_err(CheckError::InvalidLasso)?;
            return Ok(Verdict {
                holds: false,
                counterexample: Some(lasso),
                violation: Some(violation),
                stats: self.stats(graph.len(), 1, start),
            });
        }
        Ok(Verdict {
            holds: true,
            counterexample: None,
            violation: None,
            stats: self.stats(graph.len(), 1, start),
        })
    }

    /// Compiles one instantiation of a parsed property.
    pub fn formula(&self, expr: &crate::syntax::Expr, bindings: &Bindings) -> Result<Formula, CheckError> {
        let flat = expand_quantifiers(expr, &self.lts.model, bindings)?;
        Formula::compile(&self.lts.model, &flat)
    }

    /// Checks every parameter instantiation of a declared property.
    pub fn check_property(&mut self, prop: &PropertySource) -> Result<Vec<InstanceVerdict>, CheckError> {
        let ltl = crate::syntax::ltl::parse_property(prop, &*self.lts.model).map_err(CheckError::Property)?;
        let mut out = Vec::new();
        for b in instantiations(&ltl.params, &self.lts.model)? {
            let f = self.formula(&ltl.expr, &b)?;
            let verdict = match f.as_invariant() {
                Some(p) if self.options.invariant_fast_path => {
                    let p = p.clone();
                    self.check_invariant(&p)?
                }
                _ => self.check(&f)?,
            };
            out.push(InstanceVerdict {
                bindings: render_bindings(&self.lts.model, &b),
                verdict,
            });
        }
        Ok(out)
    }
}

pub fn render_bindings(model: &FlatModel, b: &Bindings) -> Vec<(String, String)> {
    b.iter()
        .map(|(n, k, v)| (n.clone(), model.render(*k, *v)))
        .collect()
}

/// Breadth-first path from the initial configuration to `target`.
fn shortest_path(graph: &LtsGraph, target: usize) -> Vec<(usize, Transition)> {
    let mut parent: Vec<Option<(usize, Transition)>> = vec![None; graph.len()];
    let mut seen = vec![false; graph.len()];
    seen[0] = true;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        if v == target {
            break;
        }
        for &(w, t) in graph.successors(v) {
            let w = w as usize;
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some((v, t));
                queue.push_back(w);
            }
        }
    }
    let mut path = Vec::new();
    let mut cur = target;
    while let Some((p, t)) = parent[cur] {
        path.push((p, t));
        cur = p;
    }
    path.reverse();
    path
}

/// `check(model, f)` for a quantifier-free formula.
pub fn check(model: impl Into<Arc<FlatModel>>, f: &Formula) -> Result<Verdict, CheckError> {
    Checker::new(model, CheckOptions::default()).check(f)
}

/// `check_invariant(model, p)` for a state atom.
pub fn check_invariant(model: impl Into<Arc<FlatModel>>, p: &Atom) -> Result<Verdict, CheckError> {
    Checker::new(model, CheckOptions::default()).check_invariant(p)
}

/// Parses `text` as a property of `model` and compiles it under
/// `bindings` (an empty list for closed formulas).
pub fn compile_text(model: &FlatModel, text: &str, bindings: &[(String, Kind, i32)]) -> Result<Formula, CheckError> {
    let ltl = crate::syntax::parse_ltl(text, model, &[]).map_err(CheckError::Property)?;
    let flat = expand_quantifiers(&ltl.expr, model, &bindings.to_vec())?;
    Formula::compile(model, &flat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elaborator::flatten_source;

    fn verdict(src: &str, prop: &str) -> Verdict {
        let mut ck = Checker::new(flatten_source(src).unwrap(), CheckOptions::default());
        let f = compile_text(&ck.lts.model, prop, &[]).unwrap();
        let v = ck.check(&f).unwrap();
        if let Some(l) = &v.counterexample {
            l.validate(&ck.lts, &ck.fairness).unwrap();
            assert!(!l.satisfies(&ck.lts, &f).unwrap());
        }
        v
    }

    fn setter(fairness: &str) -> String {
        format!("globals x : bool := false end event set {fairness} when !x do x := true end")
    }

    #[test]
    fn justice_forces_a_continuously_enabled_event() {
        assert!(verdict(&setter("just"), "<>x").holds);
        let v = verdict(&setter(""), "<>x");
        assert!(!v.holds);
        // The spontaneous event may wait forever: the cycle is all ticks.
        let l = v.counterexample.unwrap();
        assert!(l.cycle.iter().all(|s| s.transition == Transition::Tick));
    }

    #[test]
    fn upper_bound_forces_occurrence() {
        assert!(verdict(&setter("[0, 2]"), "<>x").holds);
    }

    const FLICKER: &str = "globals b : bool := false; done : bool := false end
        event flip just when true do b := !b end
        event fire FAIR when b && !done do done := true end";

    #[test]
    fn compassion_forces_an_intermittently_enabled_event() {
        assert!(verdict(&FLICKER.replace("FAIR", "compassionate"), "<>done").holds);
        let v = verdict(&FLICKER.replace("FAIR", "just"), "<>done");
        assert!(!v.holds);
        let l = v.counterexample.unwrap();
        let flips = l.cycle.iter().filter(|s| matches!(s.transition, Transition::Event { event: 0, .. })).count();
        assert!(flips > 0);
    }

    #[test]
    fn invariant_fast_path_agrees() {
        let src = "globals a : 0..3 := 0 end event inc just when a < 3 do a := a + 1 end";
        for (p, holds) in [("[](a <= 3)", true), ("[](a < 3)", false), ("[](a != 2)", false)] {
            let mut ck = Checker::new(flatten_source(src).unwrap(), CheckOptions::default());
            let f = compile_text(&ck.lts.model, p, &[]).unwrap();
            let general = ck.check(&f).unwrap();
            let fast = ck.check_invariant(f.as_invariant().unwrap()).unwrap();
            assert_eq!(general.holds, holds, "{p}");
            assert_eq!(fast.holds, holds, "{p}");
            if let (Some(l), Some(at)) = (&fast.counterexample, fast.violation) {
                l.validate(&ck.lts, &ck.fairness).unwrap();
                let bad = l.configs().nth(at).unwrap();
                assert!(!f.as_invariant().unwrap().eval(&ck.lts, bad).unwrap());
            }
        }
    }

    #[test]
    fn always_false_fails_at_the_start() {
        let mut ck = Checker::new(flatten_source(&setter("just")).unwrap(), CheckOptions::default());
        let f = compile_text(&ck.lts.model, "[]false", &[]).unwrap();
        assert_eq!(f.ltl, Ltl::always(Ltl::False));
        let atom = Atom::State {
            expr: crate::elaborator::FExpr::Const(0),
            slots: 0,
            text: "false".into(),
        };
        let v = ck.check_invariant(&atom).unwrap();
        assert_eq!(v.violation, Some(0));
        assert!(!ck.check(&f).unwrap().holds);
    }

    #[test]
    fn mono_is_false_between_hash_and_event() {
        let src = "globals x : 0..1 := 0 end
            timers t : 0..3 end
            event e just when x == 0 start t do x := 1 end";
        let lts = Lts::new(flatten_source(src).unwrap());
        let f = compile_text(&lts.model, "mono(t)", &[]).unwrap();
        let c0 = lts.initial().unwrap();
        assert!(f.atoms[0].eval(&lts, &c0).unwrap());
        let c1 = lts.step(&c0, Transition::Hash { event: 0, fair: 0 }).unwrap().remove(0);
        assert!(!f.atoms[0].eval(&lts, &c1).unwrap());
        let t = lts.enabled(&c1).unwrap()[0];
        let c2 = lts.step(&c1, t).unwrap().remove(0);
        assert!(f.atoms[0].eval(&lts, &c2).unwrap());
    }

    #[test]
    fn event_atoms_observe_occurrences() {
        let src = "type T = {A, B}
            globals n : array[T] of 0..1 := 0 end
            event go(t : fair T) just when n[t] == 0 do n[t] := 1 end";
        assert!(verdict(src, "<>go(A) && <>go(B)").holds);
        assert!(!verdict(src, "[]!go(B)").holds);
        assert!(!verdict(src, "<>(go(A) && go(B))").holds);
    }

    #[test]
    fn parameters_are_checked_per_value() {
        let src = "type T = {A, B}
            globals n : array[T] of 0..1 := 0 end
            event go(t : fair T) just when t == A && n[t] == 0 do n[t] := 1 end
            properties
              done(t : T) : <>(n[t] = 1);
            end";
        let src_model = crate::syntax::parse(src).unwrap();
        let mut ck = Checker::new(crate::elaborator::flatten(&src_model).unwrap(), CheckOptions::default());
        let r = ck.check_property(&src_model.properties[0]).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].bindings, vec![("t".to_string(), "A".to_string())]);
        assert!(r[0].verdict.holds);
        assert!(!r[1].verdict.holds);
    }

    #[test]
    fn formula_size_limit() {
        let mut ck = Checker::new(
            flatten_source(&setter("just")).unwrap(),
            CheckOptions {
                max_buchi_nodes: 3,
                ..CheckOptions::default()
            },
        );
        let f = compile_text(&ck.lts.model, "[]<>x && []<>!x && <>[]x", &[]).unwrap();
        assert!(matches!(ck.check(&f), Err(CheckError::FormulaTooLarge { limit: 3 })));
    }

    #[test]
    fn state_limit() {
        let src = "globals a : 0..100 := 0 end event inc when a < 100 do a := a + 1 end";
        let mut ck = Checker::new(
            flatten_source(src).unwrap(),
            CheckOptions {
                limits: Limits { max_states: 20, workers: 1 },
                ..CheckOptions::default()
            },
        );
        let f = compile_text(&ck.lts.model, "<>(a = 100)", &[]).unwrap();
        assert!(matches!(ck.check(&f), Err(CheckError::StateLimitExceeded(_))));
    }
}
