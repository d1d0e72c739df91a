//! Interactive execution of a flat model.
//!
//! A [`Session`] is the initial configuration plus a list of moves. Every
//! move names a transition and the rank of the chosen successor, so the
//! current configuration is always the replay of the history. Random
//! choices draw from a generator seeded by `(seed, position)`; undoing and
//! redoing a step repeats the same draw.

mod trace;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::checker::Lasso;
use crate::elaborator::FlatModel;
use crate::lts::{Config, Lts, StepError, Transition};
pub use trace::{model_hash, TraceFile, TraceHeader, TraceStep};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("`{0}` is not enabled")]
    NotEnabled(String),
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("choice {choice} out of range: `{transition}` has {outcomes} outcome(s)")]
    BadChoice {
        transition: String,
        choice: usize,
        outcomes: usize,
    },
    #[error("cannot undo {k} step(s): history has {len}")]
    BadIndex { k: usize, len: usize },
    #[error("trace was recorded on model {found}, session model is {expected}")]
    ModelMismatch { expected: String, found: String },
    #[error("replay diverged at step {step}: {reason}")]
    ReplayDivergence { step: usize, reason: String },
    #[error("malformed trace at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Step(#[from] StepError),
}

/// One entry of the history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Move {
    pub transition: Transition,
    /// Rank of the successor among `Lts::step` results.
    pub choice: usize,
    /// Configuration before the move.
    pub from: Config,
}

/// An enabled transition as offered to the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offer {
    pub label: String,
    pub rendering: String,
    /// Number of successor configurations (demonic outcomes).
    pub outcomes: usize,
    /// The event's clock has reached its upper bound.
    pub urgent: bool,
}

/// A lasso attached to a session: the configuration after `start` history
/// moves is re-entered by playing `moves` in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cycle {
    pub start: usize,
    pub moves: Vec<(Transition, usize)>,
}

#[derive(Debug, Clone)]
pub struct Session {
    lts: Arc<Lts>,
    seed: u64,
    initial: Config,
    history: Vec<Move>,
    current: Config,
    cycle: Option<Cycle>,
}

impl PartialEq for Session {
    fn eq(&self, o: &Self) -> bool {
        self.seed == o.seed
            && self.initial == o.initial
            && self.history == o.history
            && self.current == o.current
            && self.cycle == o.cycle
    }
}

impl Session {
    pub fn new(model: impl Into<Arc<FlatModel>>, seed: u64) -> Result<Session, SimError> {
        Session::with_lts(Arc::new(Lts::new(model)), seed)
    }

    pub fn with_lts(lts: Arc<Lts>, seed: u64) -> Result<Session, SimError> {
        let initial = lts.initial()?;
        Ok(Session {
            lts,
            seed,
            current: initial.clone(),
            initial,
            history: Vec::new(),
            cycle: None,
        })
    }

    pub fn lts(&self) -> &Lts {
        &self.lts
    }

    pub fn model(&self) -> &FlatModel {
        &self.lts.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn current(&self) -> &Config {
        &self.current
    }

    pub fn initial(&self) -> &Config {
        &self.initial
    }

    pub fn history(&self) -> &[Move] {
        &self.history
    }

    pub fn cycle(&self) -> Option<&Cycle> {
        self.cycle.as_ref()
    }

    pub fn state_json(&self) -> Value {
        self.lts.config_json(&self.current)
    }

    pub fn digest(&self) -> String {
        self.lts.digest(&self.current)
    }

    pub fn parse(&self, label: &str) -> Result<Transition, SimError> {
        self.lts
            .parse_label(label)
            .ok_or_else(|| SimError::UnknownTransition(label.trim().to_string()))
    }

    pub fn enabled(&self) -> Result<Vec<Offer>, SimError> {
        let lts = &*self.lts;
        let c = &self.current;
        let mut out = Vec::new();
        for t in lts.enabled(c)? {
            let outcomes = lts.step(c, t)?.len();
            out.push(Offer {
                label: lts.label(t),
                rendering: self.render(t),
                outcomes,
                urgent: self.urgent(t),
            });
        }
        Ok(out)
    }

    fn urgent(&self, t: Transition) -> bool {
        match t {
            Transition::Hash { event, fair } | Transition::Event { event, fair, .. } => {
                let u = self.model().events[event as usize].u;
                u.is_some_and(|u| self.lts.clock(&self.current, event as usize, fair as usize) >= u as i32)
            }
            Transition::Tick => false,
        }
    }

    fn render(&self, t: Transition) -> String {
        let lts = &*self.lts;
        let m = self.model();
        let c = &self.current;
        let params = |names: Vec<String>, vals: Vec<String>| -> String {
            names
                .iter()
                .zip(vals)
                .map(|(n, v)| format!("{n} = {v}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        match t {
            Transition::Tick => {
                let timers: Vec<&str> = m
                    .timers
                    .iter()
                    .enumerate()
                    .filter(|&(i, t)| lts.mono(c, i) && lts.timers(c)[i] <= t.bound)
                    .map(|(_, t)| t.name.as_str())
                    .collect();
                let mut clocks = Vec::new();
                for (e, ev) in m.events.iter().enumerate() {
                    for v in 0..ev.fair_count() {
                        let k = lts.clock(c, e, v);
                        if k >= 0 && (ev.u.is_some() || k <= ev.l as i32) {
                            clocks.push(lts.label(Transition::Hash {
                                event: e as u32,
                                fair: v as u32,
                            }));
                        }
                    }
                }
                let clocks: Vec<String> = clocks.iter().map(|l| l.replacen('#', "", 1)).collect();
                let list = |xs: Vec<String>| if xs.is_empty() { "none".to_string() } else { xs.join(", ") };
                format!(
                    "tick: timers {}; clocks {}",
                    list(timers.iter().map(|s| s.to_string()).collect()),
                    list(clocks)
                )
            }
            Transition::Hash { event, fair } => {
                let ev = &m.events[event as usize];
                let names = ev.f_ind.iter().map(|p| p.name.clone()).collect();
                let bound = match ev.u {
                    Some(u) => format!("[{}, {u}]", ev.l),
                    None => format!("[{}, *]", ev.l),
                };
                let clock = lts.clock(c, event as usize, fair as usize);
                let args = params(names, lts.fair_values(event, fair));
                let args = if args.is_empty() { String::new() } else { format!(" {args};") };
                format!("announce {}:{args} clock {clock} in {bound}", ev.id)
            }
            Transition::Event { event, fair, demonic } => {
                let ev = &m.events[event as usize];
                let mut names: Vec<String> = ev.f_ind.iter().map(|p| p.name.clone()).collect();
                names.extend(ev.d_ind.iter().map(|p| p.name.clone()));
                let mut vals = lts.fair_values(event, fair);
                vals.extend(lts.demonic_values(event, demonic));
                let args = params(names, vals);
                if args.is_empty() {
                    format!("occur {}", ev.id)
                } else {
                    format!("occur {}: {args}", ev.id)
                }
            }
        }
    }

    /// Successors of `t`, each rendered by the variables that tell it
    /// apart from the others (or, for a single successor, that change).
    pub fn outcomes(&self, t: Transition) -> Result<Vec<String>, SimError> {
        let succ = self.lts.step(&self.current, t)?;
        let states: Vec<Value> = succ.iter().map(|s| self.lts.config_json(s)["state"].clone()).collect();
        let now = self.state_json()["state"].clone();
        let shows = |k: &str, v: &Value| {
            if states.len() == 1 {
                now.get(k) != Some(v)
            } else {
                states.iter().any(|o| o.get(k) != Some(v))
            }
        };
        Ok(states
            .iter()
            .map(|s| {
                let diff: Vec<String> = s
                    .as_object()
                    .into_iter()
                    .flatten()
                    .filter(|(k, v)| shows(k, v))
                    .map(|(k, v)| format!("{k} = {v}"))
                    .collect();
                diff.join(", ")
            })
            .collect())
    }

    fn draw(&self, outcomes: usize) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.history.len() as u64);
        rng.random_range(0..outcomes)
    }

    /// Fires `t`, taking successor `choice`, or a seeded random one.
    pub fn fire(&mut self, t: Transition, choice: Option<usize>) -> Result<&Config, SimError> {
        if !self.lts.is_enabled(&self.current, t)? {
            return Err(SimError::NotEnabled(self.lts.label(t)));
        }
        let mut succ = self.lts.step(&self.current, t)?;
        let choice = match choice {
            Some(k) if k >= succ.len() => {
                return Err(SimError::BadChoice {
                    transition: self.lts.label(t),
                    choice: k,
                    outcomes: succ.len(),
                })
            }
            Some(k) => k,
            None => self.draw(succ.len()),
        };
        let next = succ.swap_remove(choice);
        let from = std::mem::replace(&mut self.current, next);
        self.history.push(Move {
            transition: t,
            choice,
            from,
        });
        Ok(&self.current)
    }

    pub fn fire_label(&mut self, label: &str, choice: Option<usize>) -> Result<&Config, SimError> {
        let t = self.parse(label)?;
        self.fire(t, choice)
    }

    /// Drops the last `k` moves.
    pub fn undo(&mut self, k: usize) -> Result<&Config, SimError> {
        let len = self.history.len();
        if k > len {
            return Err(SimError::BadIndex { k, len });
        }
        let keep = len - k;
        self.history.truncate(keep);
        self.current = self.replay_to(keep)?;
        if self.cycle.as_ref().is_some_and(|c| c.start > keep) {
            self.cycle = None;
        }
        Ok(&self.current)
    }

    /// Recomputes the configuration after the first `n` moves.
    fn replay_to(&self, n: usize) -> Result<Config, SimError> {
        let mut c = self.initial.clone();
        for (i, m) in self.history[..n].iter().enumerate() {
            c = self.apply(&c, m.transition, m.choice, i)?;
        }
        Ok(c)
    }

    fn apply(&self, c: &Config, t: Transition, choice: usize, step: usize) -> Result<Config, SimError> {
        let mut succ = self.lts.step(c, t).map_err(|e| SimError::ReplayDivergence {
            step,
            reason: e.to_string(),
        })?;
        if choice >= succ.len() {
            return Err(SimError::ReplayDivergence {
                step,
                reason: format!("choice {choice} of {} outcome(s)", succ.len()),
            });
        }
        Ok(succ.swap_remove(choice))
    }

    /// Fires `steps` transitions, each picked uniformly among the enabled
    /// ones. Stops early if nothing is enabled.
    pub fn random_walk(&mut self, steps: usize) -> Result<&Config, SimError> {
        for _ in 0..steps {
            let enabled = self.lts.enabled(&self.current)?;
            if enabled.is_empty() {
                break;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
            rng.set_stream(self.history.len() as u64);
            let t = enabled[rng.random_range(0..enabled.len())];
            self.fire(t, None)?;
        }
        Ok(&self.current)
    }

    /// The cycle move expected next, if the history since the cycle start
    /// follows the attached cycle.
    pub fn cycle_next(&self) -> Option<(Transition, usize)> {
        let cy = self.cycle.as_ref()?;
        let since = self.history.get(cy.start..)?;
        let n = cy.moves.len();
        let on_track = since
            .iter()
            .enumerate()
            .all(|(i, m)| (m.transition, m.choice) == cy.moves[i % n]);
        on_track.then(|| cy.moves[since.len() % n])
    }

    /// Plays the next move of the attached cycle.
    pub fn follow_cycle(&mut self) -> Result<&Config, SimError> {
        let Some((t, k)) = self.cycle_next() else {
            return Err(SimError::NotEnabled("cycle".into()));
        };
        self.fire(t, Some(k))
    }

    /// Positions a fresh session at the start of a checker lasso and
    /// attaches its cycle.
    pub fn from_lasso(lts: Arc<Lts>, seed: u64, lasso: &Lasso) -> Result<Session, SimError> {
        let mut s = Session::with_lts(lts, seed)?;
        let to_moves = |steps: &[crate::checker::Step], next: &dyn Fn(usize) -> Config| {
            steps
                .iter()
                .enumerate()
                .map(|(i, st)| {
                    let succ = s.lts.step(&st.config, st.transition)?;
                    let target = next(i);
                    let k = succ.iter().position(|c| *c == target).ok_or(SimError::ReplayDivergence {
                        step: i,
                        reason: "lasso step has no matching successor".into(),
                    })?;
                    Ok((st.transition, k))
                })
                .collect::<Result<Vec<_>, SimError>>()
        };
        let head = lasso.cycle.first().map(|s| s.config.clone()).ok_or(SimError::ReplayDivergence {
            step: 0,
            reason: "empty cycle".into(),
        })?;
        let prefix = to_moves(&lasso.prefix, &|i| {
            lasso.prefix.get(i + 1).map(|s| s.config.clone()).unwrap_or_else(|| head.clone())
        })?;
        let cycle = to_moves(&lasso.cycle, &|i| {
            lasso.cycle.get(i + 1).map(|s| s.config.clone()).unwrap_or_else(|| head.clone())
        })?;
        if lasso.prefix.first().map_or(&head, |s| &s.config) != &s.initial {
            return Err(SimError::ReplayDivergence {
                step: 0,
                reason: "lasso does not start in the initial configuration".into(),
            });
        }
        for (t, k) in prefix {
            s.fire(t, Some(k))?;
        }
        s.cycle = Some(Cycle {
            start: s.history.len(),
            moves: cycle,
        });
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elaborator::flatten_source;

    fn session(src: &str) -> Session {
        Session::new(flatten_source(src).unwrap(), 7).unwrap()
    }

    const DEMONIC: &str = "globals v3 : 0..4 := 0 end
        event e when true do v3 :: 1 .. 4 end";

    #[test]
    fn explicit_choice_selects_the_successor() {
        let mut s = session(DEMONIC);
        s.fire_label("e#", None).unwrap();
        let t = s.parse("e").unwrap();
        let outcomes = s.outcomes(t).unwrap();
        assert_eq!(outcomes, vec!["v3 = 1", "v3 = 2", "v3 = 3", "v3 = 4"]);
        let k = outcomes.iter().position(|o| o == "v3 = 3").unwrap();
        s.fire(t, Some(k)).unwrap();
        assert_eq!(s.state_json()["state"]["v3"], 3);
    }

    #[test]
    fn bad_choice_and_disabled_transitions() {
        let mut s = session(DEMONIC);
        assert!(matches!(s.fire_label("e", None), Err(SimError::NotEnabled(_))));
        assert!(matches!(s.fire_label("nope", None), Err(SimError::UnknownTransition(_))));
        s.fire_label("e#", None).unwrap();
        assert!(matches!(
            s.fire_label("e", Some(4)),
            Err(SimError::BadChoice { outcomes: 4, .. })
        ));
        assert!(matches!(s.fire_label("tick", None), Err(SimError::NotEnabled(_))));
    }

    #[test]
    fn pending_hash_offers_a_single_event() {
        let mut s = session(
            "globals a : bool := false end
             event e when true do a := true end
             event f when true do skip end",
        );
        assert_eq!(s.enabled().unwrap().len(), 3);
        s.fire_label("e#", None).unwrap();
        let offers = s.enabled().unwrap();
        assert_eq!(offers.len(), 1);
        assert_eq!(offers[0].label, "e");
    }

    #[test]
    fn urgent_configuration_hides_tick() {
        let mut s = session("event e [0, 1] when true do skip end");
        s.fire_label("tick", None).unwrap();
        let offers = s.enabled().unwrap();
        assert_eq!(offers.len(), 1);
        assert!(offers[0].urgent);
        assert!(offers[0].rendering.contains("clock 1 in [0, 1]"));
    }

    #[test]
    fn tick_rendering_names_what_advances() {
        let s = session("timers t1 : 0..3 end event e [1, 2] when true do skip end");
        let offers = s.enabled().unwrap();
        assert_eq!(offers[0].rendering, "tick: timers t1; clocks e");
    }

    #[test]
    fn undo_replays_and_checks_bounds() {
        let mut s = session(DEMONIC);
        let start = s.clone();
        s.random_walk(20).unwrap();
        assert_eq!(s.history().len(), 20);
        assert!(matches!(s.undo(21), Err(SimError::BadIndex { k: 21, len: 20 })));
        let mid = {
            let mut m = s.clone();
            m.undo(5).unwrap();
            m
        };
        s.undo(5).unwrap();
        assert_eq!(s, mid);
        s.undo(15).unwrap();
        assert_eq!(s, start);
    }

    #[test]
    fn fire_then_undo_is_identity() {
        let mut s = session(DEMONIC);
        s.random_walk(3).unwrap();
        for o in s.enabled().unwrap() {
            let before = s.clone();
            s.fire_label(&o.label, None).unwrap();
            s.undo(1).unwrap();
            assert_eq!(s, before);
        }
    }

    #[test]
    fn seeded_walks_repeat() {
        let mut a = session(DEMONIC);
        let mut b = session(DEMONIC);
        a.random_walk(50).unwrap();
        b.random_walk(50).unwrap();
        assert_eq!(a, b);
        let mut c = Session::new(flatten_source(DEMONIC).unwrap(), 8).unwrap();
        c.random_walk(50).unwrap();
        assert_ne!(a.history(), c.history());
    }
}
