//! Configurations and the transition relation.
//!
//! A configuration is one flat `i32` slice:
//!
//! ```text
//! [ state | timers | mono | clocks | x | p ]
//! ```
//!
//! Clocks hold one slot per (event, fair valuation). `x` is -1 or the hash
//! id of the pending event; `p` is -1 (nothing yet), -2 (tick), a hash id
//! (the e# step) or an occurrence id (the event itself).

pub mod eval;
mod explore;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::elaborator::{FlatEvent, FlatModel, Target, VarType, Write};
use eval::{Env, EvalError};
pub use explore::{explore, ExploreError, Limits, LtsGraph, Stats};

pub type Config = Box<[i32]>;

pub const BOTTOM: i32 = -1;
pub const TICK: i32 = -2;

/// A transition name. `fair` and `demonic` are ranks of index valuations
/// (see [`FlatEvent::valuation`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Transition {
    Hash { event: u32, fair: u32 },
    Event { event: u32, fair: u32, demonic: u32 },
    Tick,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("`{0}` is not enabled")]
    NotEnabled(String),
    #[error("evaluation error in {transition}: {error}")]
    Eval {
        error: EvalError,
        transition: String,
        config: Config,
    },
}

/// Slot positions within a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub state: usize,
    pub timers: usize,
    pub mono: usize,
    pub clocks: usize,
    /// First clock of each event relative to `clocks`, plus the total.
    pub clock_offset: Vec<usize>,
    /// First occurrence id of each event relative to the clock count, plus
    /// the total.
    pub occ_offset: Vec<usize>,
    pub x: usize,
    pub p: usize,
    pub width: usize,
}

impl Layout {
    pub fn new(model: &FlatModel) -> Layout {
        let state = model.state_width();
        let nt = model.timers.len();
        let mut clock_offset = vec![0];
        let mut occ_offset = vec![0];
        for e in &model.events {
            clock_offset.push(clock_offset.last().unwrap() + e.fair_count());
            occ_offset.push(occ_offset.last().unwrap() + e.fair_count() * e.demonic_count());
        }
        let clocks = state + 2 * nt;
        let n_clocks = *clock_offset.last().unwrap();
        Layout {
            state,
            timers: state,
            mono: state + nt,
            clocks,
            clock_offset,
            occ_offset,
            x: clocks + n_clocks,
            p: clocks + n_clocks + 1,
            width: clocks + n_clocks + 2,
        }
    }

    pub fn n_clocks(&self) -> usize {
        *self.clock_offset.last().unwrap()
    }

    pub fn hash_id(&self, event: u32, fair: u32) -> i32 {
        (self.clock_offset[event as usize] + fair as usize) as i32
    }

    pub fn occ_id(&self, model: &FlatModel, event: u32, fair: u32, demonic: u32) -> i32 {
        let d = model.events[event as usize].demonic_count();
        (self.n_clocks() + self.occ_offset[event as usize] + fair as usize * d + demonic as usize) as i32
    }

    /// Decodes an `x` or `p` slot.
    pub fn decode(&self, model: &FlatModel, id: i32) -> Option<Transition> {
        if id == TICK {
            return Some(Transition::Tick);
        }
        if id < 0 {
            return None;
        }
        let id = id as usize;
        let nc = self.n_clocks();
        if id < nc {
            let e = self.clock_offset.partition_point(|&o| o <= id) - 1;
            return Some(Transition::Hash {
                event: e as u32,
                fair: (id - self.clock_offset[e]) as u32,
            });
        }
        let id = id - nc;
        let e = self.occ_offset.partition_point(|&o| o <= id) - 1;
        let r = id - self.occ_offset[e];
        let d = model.events[e].demonic_count();
        Some(Transition::Event {
            event: e as u32,
            fair: (r / d) as u32,
            demonic: (r % d) as u32,
        })
    }
}

/// Precomputed index valuations of one event.
#[derive(Debug, Clone)]
struct EventTables {
    fair: Vec<Vec<i32>>,
    demonic: Vec<Vec<i32>>,
}

/// The labelled transition system of a flat model.
#[derive(Debug, Clone)]
pub struct Lts {
    pub model: Arc<FlatModel>,
    pub layout: Layout,
    tables: Vec<EventTables>,
}

fn valuations(params: &[crate::elaborator::IndexParam]) -> Vec<Vec<i32>> {
    let n: usize = params.iter().map(|p| p.domain.len()).product();
    (0..n)
        .map(|r| {
            let mut v = vec![0; params.len()];
            FlatEvent::valuation(params, r, &mut v);
            v
        })
        .collect()
}

impl Lts {
    pub fn new(model: impl Into<Arc<FlatModel>>) -> Lts {
        let model = model.into();
        let tables = model
            .events
            .iter()
            .map(|e| EventTables {
                fair: valuations(&e.f_ind),
                demonic: valuations(&e.d_ind),
            })
            .collect();
        Lts {
            layout: Layout::new(&model),
            model,
            tables,
        }
    }

    fn locals(&self, e: usize, fair: usize, demonic: usize) -> Vec<i32> {
        let ev = &self.model.events[e];
        let mut l = vec![0; ev.env_size.max(1) as usize];
        let t = &self.tables[e];
        let nf = ev.f_ind.len();
        l[..nf].copy_from_slice(&t.fair[fair]);
        l[nf..nf + ev.d_ind.len()].copy_from_slice(&t.demonic[demonic]);
        l
    }

    /// `grd(v, y)` on a state and timer valuation.
    pub fn guard(&self, state: &[i32], timers: &[i32], e: usize, fair: usize, demonic: usize) -> Result<bool, EvalError> {
        let mut locals = self.locals(e, fair, demonic);
        let mut env = Env {
            model: &self.model,
            pre: state,
            post: state,
            timers,
            locals: &mut locals,
        };
        Ok(env.eval(&self.model.events[e].guard)? != 0)
    }

    /// `∃y • grd(v, y)`.
    pub fn guard_exists(&self, state: &[i32], timers: &[i32], e: usize, fair: usize) -> Result<bool, EvalError> {
        for y in 0..self.tables[e].demonic.len() {
            if self.guard(state, timers, e, fair, y)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn state<'c>(&self, c: &'c [i32]) -> &'c [i32] {
        &c[..self.layout.state]
    }

    pub fn timers<'c>(&self, c: &'c [i32]) -> &'c [i32] {
        &c[self.layout.timers..self.layout.mono]
    }

    pub fn mono(&self, c: &[i32], t: usize) -> bool {
        c[self.layout.mono + t] != 0
    }

    pub fn clock(&self, c: &[i32], e: usize, fair: usize) -> i32 {
        c[self.layout.clocks + self.layout.clock_offset[e] + fair]
    }

    pub fn pending(&self, c: &[i32]) -> Option<Transition> {
        self.layout.decode(&self.model, c[self.layout.x])
    }

    pub fn last(&self, c: &[i32]) -> Option<Transition> {
        self.layout.decode(&self.model, c[self.layout.p])
    }

    fn wrap<T>(&self, r: Result<T, EvalError>, t: Option<Transition>, c: &[i32]) -> Result<T, StepError> {
        r.map_err(|error| StepError::Eval {
            error,
            transition: t.map(|t| self.label(t)).unwrap_or_else(|| "the initial configuration".into()),
            config: c.into(),
        })
    }

    /// Recomputes every clock for a new state; `taken` is the event just
    /// taken, `None` for a tick.
    fn update_clocks(&self, pre: &[i32], post: &mut [i32], taken: Option<usize>) -> Result<(), EvalError> {
        let lay = &self.layout;
        for (e, ev) in self.model.events.iter().enumerate() {
            for v in 0..self.tables[e].fair.len() {
                let slot = lay.clocks + lay.clock_offset[e] + v;
                let c = pre[slot];
                let holds = self.guard_exists(&post[..lay.state], &post[lay.timers..lay.mono], e, v)?;
                post[slot] = if !holds {
                    -1
                } else if c == -1 {
                    0
                } else {
                    match taken {
                        Some(t) if t == e => 0,
                        Some(_) => c,
                        None => match ev.u {
                            Some(_) => c + 1,
                            // Unbounded clocks stop counting past the lower
                            // bound.
                            None => (c + 1).min(ev.l as i32 + 1),
                        },
                    }
                };
            }
        }
        Ok(())
    }

    pub fn initial(&self) -> Result<Config, StepError> {
        let m = &self.model;
        let lay = &self.layout;
        let mut c = vec![0; lay.width];
        for v in &m.vars {
            c[v.offset..v.offset + v.init.len()].copy_from_slice(&v.init);
        }
        for (i, t) in m.timers.iter().enumerate() {
            c[lay.timers + i] = t.init;
            c[lay.mono + i] = 1;
        }
        for e in 0..m.events.len() {
            for v in 0..self.tables[e].fair.len() {
                let holds = self.guard_exists(&c[..lay.state], &c[lay.timers..lay.mono], e, v);
                let holds = self.wrap(holds, None, &c)?;
                c[lay.clocks + lay.clock_offset[e] + v] = if holds { 0 } else { -1 };
            }
        }
        c[lay.x] = BOTTOM;
        c[lay.p] = BOTTOM;
        Ok(c.into_boxed_slice())
    }

    fn hash_enabled(&self, c: &[i32], e: usize, v: usize) -> bool {
        let ev = &self.model.events[e];
        let clock = self.clock(c, e, v);
        clock >= 0 && clock >= ev.l as i32 && ev.u.is_none_or(|u| clock <= u as i32)
    }

    /// True when no clock has reached a finite upper bound.
    pub fn tick_allowed(&self, c: &[i32]) -> bool {
        c[self.layout.x] == BOTTOM
            && self.model.events.iter().enumerate().all(|(e, ev)| match ev.u {
                None => true,
                Some(u) => (0..self.tables[e].fair.len()).all(|v| self.clock(c, e, v) < u as i32),
            })
    }

    pub fn enabled(&self, c: &[i32]) -> Result<Vec<Transition>, StepError> {
        let mut out = Vec::new();
        match self.pending(c) {
            Some(Transition::Hash { event, fair }) => {
                let (e, v) = (event as usize, fair as usize);
                for y in 0..self.tables[e].demonic.len() {
                    let g = self.guard(self.state(c), self.timers(c), e, v, y);
                    if self.wrap(g, Some(Transition::Hash { event, fair }), c)? {
                        out.push(Transition::Event {
                            event,
                            fair,
                            demonic: y as u32,
                        });
                    }
                }
            }
            _ => {
                for e in 0..self.model.events.len() {
                    for v in 0..self.tables[e].fair.len() {
                        if self.hash_enabled(c, e, v) {
                            out.push(Transition::Hash {
                                event: e as u32,
                                fair: v as u32,
                            });
                        }
                    }
                }
                if self.tick_allowed(c) {
                    out.push(Transition::Tick);
                }
            }
        }
        Ok(out)
    }

    pub fn is_enabled(&self, c: &[i32], t: Transition) -> Result<bool, StepError> {
        Ok(match t {
            Transition::Tick => self.tick_allowed(c),
            Transition::Hash { event, fair } => {
                c[self.layout.x] == BOTTOM && self.hash_enabled(c, event as usize, fair as usize)
            }
            Transition::Event { event, fair, .. } => {
                c[self.layout.x] == self.layout.hash_id(event, fair) && self.enabled(c)?.contains(&t)
            }
        })
    }

    /// Successor configurations of `c` under `t`; several when the action
    /// makes demonic choices.
    pub fn step(&self, c: &[i32], t: Transition) -> Result<Vec<Config>, StepError> {
        if !self.is_enabled(c, t)? {
            return Err(StepError::NotEnabled(self.label(t)));
        }
        let r = self.step_unchecked(c, t);
        self.wrap(r, Some(t), c)
    }

    fn step_unchecked(&self, c: &[i32], t: Transition) -> Result<Vec<Config>, EvalError> {
        let lay = &self.layout;
        match t {
            Transition::Hash { event, fair } => {
                let mut n: Config = c.into();
                let ev = &self.model.events[event as usize];
                for &tm in ev.start.iter().chain(&ev.stop) {
                    n[lay.mono + tm as usize] = 0;
                }
                n[lay.x] = lay.hash_id(event, fair);
                n[lay.p] = n[lay.x];
                Ok(vec![n])
            }
            Transition::Tick => {
                let mut n: Config = c.into();
                for (i, tm) in self.model.timers.iter().enumerate() {
                    if c[lay.mono + i] != 0 {
                        n[lay.timers + i] = (c[lay.timers + i] + 1).min(tm.bound + 1);
                    }
                }
                self.update_clocks(c, &mut n, None)?;
                n[lay.p] = TICK;
                Ok(vec![n])
            }
            Transition::Event { event, fair, demonic } => {
                let e = event as usize;
                let ev = &self.model.events[e];
                let mut locals = self.locals(e, fair as usize, demonic as usize);
                let writes: Vec<&crate::elaborator::GuardedWrite> =
                    ev.action.iter().flat_map(|p| &p.writes).collect();
                let mut posts = Vec::new();
                let mut post = self.state(c).to_vec();
                self.run(&writes, c, &mut post, &mut Vec::new(), &mut locals, &mut posts)?;
                let mut out = Vec::with_capacity(posts.len());
                for s in posts {
                    let mut n: Config = c.into();
                    n[..lay.state].copy_from_slice(&s);
                    for &tm in &ev.start {
                        n[lay.timers + tm as usize] = 0;
                        n[lay.mono + tm as usize] = 1;
                    }
                    self.update_clocks(c, &mut n, Some(e))?;
                    n[lay.x] = BOTTOM;
                    n[lay.p] = lay.occ_id(&self.model, event, fair, demonic);
                    out.push(n);
                }
                Ok(out)
            }
        }
    }

    /// Applies `writes` in order, branching on demonic choices.
    fn run(
        &self,
        writes: &[&crate::elaborator::GuardedWrite],
        c: &[i32],
        post: &mut Vec<i32>,
        written: &mut Vec<(u32, usize)>,
        locals: &mut [i32],
        out: &mut Vec<Vec<i32>>,
    ) -> Result<(), EvalError> {
        let m = &*self.model;
        let pre = self.state(c);
        let timers = self.timers(c);
        for (i, w) in writes.iter().enumerate() {
            let mut env = Env {
                model: m,
                pre,
                post: post.as_slice(),
                timers,
                locals: &mut *locals,
            };
            let mut active = true;
            for cond in &w.conds {
                if env.eval(cond)? == 0 {
                    active = false;
                    break;
                }
            }
            if !active {
                continue;
            }
            match &w.write {
                Write::Assign { target, value } => {
                    let v = env.eval(value)?;
                    let pos = self.target_pos(target, &mut env, written)?;
                    self.check_type(target.var(), v)?;
                    post[m.vars[target.var() as usize].offset + pos] = v;
                }
                Write::Choose { target, domain } => {
                    let positions: Vec<usize> = match target {
                        Target::WholeArray(v) => (0..m.vars[*v as usize].ty.width()).collect(),
                        t => vec![self.target_pos(t, &mut env, written)?],
                    };
                    let base = m.vars[target.var() as usize].offset;
                    let rest = &writes[i + 1..];
                    return self.choose(&positions, base, domain, rest, c, post, written, locals, out);
                }
                Write::Enqueue { var, value } => {
                    let v = env.eval(value)?;
                    let fv = &m.vars[*var as usize];
                    let VarType::Queue { capacity, .. } = fv.ty else { unreachable!() };
                    let len = post[fv.offset] as usize;
                    if len == capacity {
                        return Err(EvalError::QueueFull { var: fv.name.clone() });
                    }
                    self.check_type(*var, v)?;
                    post[fv.offset + 1 + len] = v;
                    post[fv.offset] += 1;
                }
                Write::Dequeue { var } => {
                    let fv = &m.vars[*var as usize];
                    let VarType::Queue { capacity, ref elem } = fv.ty else { unreachable!() };
                    let len = post[fv.offset] as usize;
                    if len == 0 {
                        return Err(EvalError::EmptyQueue { var: fv.name.clone() });
                    }
                    let q = fv.offset + 1;
                    post.copy_within(q + 1..q + capacity, q);
                    // Unused slots hold a fixed value so equal queues are equal
                    // configurations.
                    post[q + capacity - 1] = elem.values[0];
                    post[fv.offset] -= 1;
                }
            }
        }
        out.push(post.clone());
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn choose(
        &self,
        positions: &[usize],
        base: usize,
        domain: &[i32],
        rest: &[&crate::elaborator::GuardedWrite],
        c: &[i32],
        post: &mut Vec<i32>,
        written: &mut Vec<(u32, usize)>,
        locals: &mut [i32],
        out: &mut Vec<Vec<i32>>,
    ) -> Result<(), EvalError> {
        let Some((&first, more)) = positions.split_first() else {
            return self.run(rest, c, post, written, locals, out);
        };
        for &v in domain {
            let mut p = post.clone();
            p[base + first] = v;
            let mut w = written.clone();
            self.choose(more, base, domain, rest, c, &mut p, &mut w, locals, out)?;
        }
        Ok(())
    }

    fn target_pos(&self, t: &Target, env: &mut Env, written: &mut Vec<(u32, usize)>) -> Result<usize, EvalError> {
        match t {
            Target::Scalar(_) | Target::WholeArray(_) => Ok(0),
            Target::Elem(var, index) => {
                let i = env.eval(index)?;
                let pos = Env::elem_pos(&self.model, *var, i)?;
                if written.contains(&(*var, pos)) {
                    return Err(EvalError::DoubleWrite {
                        var: self.model.vars[*var as usize].name.clone(),
                        value: i,
                    });
                }
                written.push((*var, pos));
                Ok(pos)
            }
        }
    }

    fn check_type(&self, var: u32, v: i32) -> Result<(), EvalError> {
        let fv = &self.model.vars[var as usize];
        if fv.ty.elem().contains(v) {
            Ok(())
        } else {
            Err(EvalError::OutOfType {
                var: fv.name.clone(),
                value: v,
            })
        }
    }

    /// All enabled transitions with their successors.
    pub fn successors(&self, c: &[i32]) -> Result<Vec<(Transition, Config)>, StepError> {
        let mut out = Vec::new();
        for t in self.enabled(c)? {
            let r = self.step_unchecked(c, t);
            for n in self.wrap(r, Some(t), c)? {
                out.push((t, n));
            }
        }
        Ok(out)
    }

    // ---- naming ----------------------------------------------------------

    fn values(&self, params: &[crate::elaborator::IndexParam], vals: &[i32]) -> Vec<String> {
        params
            .iter()
            .zip(vals)
            .map(|(p, &v)| self.model.render(p.domain.kind, v))
            .collect()
    }

    pub fn fair_values(&self, event: u32, fair: u32) -> Vec<String> {
        let e = &self.model.events[event as usize];
        self.values(&e.f_ind, &self.tables[event as usize].fair[fair as usize])
    }

    pub fn demonic_values(&self, event: u32, demonic: u32) -> Vec<String> {
        let e = &self.model.events[event as usize];
        self.values(&e.d_ind, &self.tables[event as usize].demonic[demonic as usize])
    }

    /// `e#(A)`, `e(A, 3)` or `tick`.
    pub fn label(&self, t: Transition) -> String {
        let call = |name: String, args: Vec<String>| {
            if args.is_empty() {
                name
            } else {
                format!("{name}({})", args.join(", "))
            }
        };
        match t {
            Transition::Tick => "tick".into(),
            Transition::Hash { event, fair } => call(
                format!("{}#", self.model.events[event as usize].id),
                self.fair_values(event, fair),
            ),
            Transition::Event { event, fair, demonic } => {
                let mut args = self.fair_values(event, fair);
                args.extend(self.demonic_values(event, demonic));
                call(self.model.events[event as usize].id.clone(), args)
            }
        }
    }

    /// Inverse of [`Lts::label`].
    pub fn parse_label(&self, s: &str) -> Option<Transition> {
        let s = s.trim();
        if s == "tick" {
            return Some(Transition::Tick);
        }
        let (head, args) = match s.find('(') {
            Some(i) if s.ends_with(')') => {
                let inner = &s[i + 1..s.len() - 1];
                let args: Vec<&str> = inner.split(',').map(str::trim).filter(|a| !a.is_empty()).collect();
                (&s[..i], args)
            }
            _ => (s, vec![]),
        };
        let (name, hash) = match head.trim().strip_suffix('#') {
            Some(n) => (n, true),
            None => (head.trim(), false),
        };
        let e = self.model.event_index(name)?;
        let ev = &self.model.events[e];
        let parse = |params: &[crate::elaborator::IndexParam], args: &[&str]| -> Option<Vec<i32>> {
            params
                .iter()
                .zip(args)
                .map(|(p, a)| {
                    p.domain
                        .values
                        .iter()
                        .copied()
                        .find(|&v| self.model.render(p.domain.kind, v) == *a)
                })
                .collect()
        };
        let nf = ev.f_ind.len();
        let nd = if hash { 0 } else { ev.d_ind.len() };
        if args.len() != nf + nd {
            return None;
        }
        let fair = FlatEvent::rank(&ev.f_ind, &parse(&ev.f_ind, &args[..nf])?)? as u32;
        if hash {
            return Some(Transition::Hash { event: e as u32, fair });
        }
        let demonic = FlatEvent::rank(&ev.d_ind, &parse(&ev.d_ind, &args[nf..])?)? as u32;
        Some(Transition::Event {
            event: e as u32,
            fair,
            demonic,
        })
    }

    /// Canonical JSON of a configuration: state, timers, monotonicity flags,
    /// clocks, pending event and last transition.
    pub fn config_json(&self, c: &[i32]) -> Value {
        let m = &*self.model;
        let mut state = Map::new();
        for v in &m.vars {
            let s = &c[v.offset..v.offset + v.ty.width()];
            let kind = v.ty.elem().kind;
            let val = match &v.ty {
                VarType::Scalar(_) => m.to_json_value(kind, s[0]),
                VarType::Array { .. } => Value::Array(s.iter().map(|&x| m.to_json_value(kind, x)).collect()),
                VarType::Queue { .. } => Value::Array(
                    s[1..1 + s[0] as usize]
                        .iter()
                        .map(|&x| m.to_json_value(kind, x))
                        .collect(),
                ),
            };
            state.insert(v.name.clone(), val);
        }
        let mut timers = Map::new();
        let mut mono = Map::new();
        for (i, t) in m.timers.iter().enumerate() {
            timers.insert(t.name.clone(), json!(c[self.layout.timers + i]));
            mono.insert(t.name.clone(), json!(self.mono(c, i)));
        }
        let mut clocks = Map::new();
        for e in 0..m.events.len() {
            for v in 0..self.tables[e].fair.len() {
                let name = self.label(Transition::Event {
                    event: e as u32,
                    fair: v as u32,
                    demonic: 0,
                });
                // Clocks are per fair valuation; drop the demonic part.
                let name = if m.events[e].d_ind.is_empty() {
                    name
                } else {
                    let args = self.fair_values(e as u32, v as u32);
                    if args.is_empty() {
                        m.events[e].id.clone()
                    } else {
                        format!("{}({})", m.events[e].id, args.join(", "))
                    }
                };
                clocks.insert(name, json!(self.clock(c, e, v)));
            }
        }
        json!({
            "state": state,
            "timers": timers,
            "mono": mono,
            "clocks": clocks,
            "pending": self.pending(c).map(|t| self.label(t)),
            "last": self.last(c).map(|t| self.label(t)),
        })
    }

    /// 64-bit digest of the canonical JSON, as 16 hex digits.
    pub fn digest(&self, c: &[i32]) -> String {
        use sha2::{Digest, Sha256};
        let text = serde_json::to_string(&self.config_json(c)).expect("json");
        let h = Sha256::digest(text.as_bytes());
        h[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks the configuration invariants; returns the first violation.
    pub fn check_invariants(&self, c: &[i32]) -> Result<(), String> {
        let lay = &self.layout;
        for (i, t) in self.model.timers.iter().enumerate() {
            let v = c[lay.timers + i];
            if !(0..=t.bound + 1).contains(&v) {
                return Err(format!("timer `{}` = {v} outside 0..{}", t.name, t.bound + 1));
            }
        }
        for (e, ev) in self.model.events.iter().enumerate() {
            for v in 0..self.tables[e].fair.len() {
                let k = self.clock(c, e, v);
                if k < -1 || ev.u.is_some_and(|u| k > u as i32) {
                    return Err(format!("clock of `{}` = {k} out of range", ev.id));
                }
            }
        }
        if let Some(Transition::Hash { .. }) = self.pending(c) {
            if c[lay.p] != c[lay.x] {
                return Err("pending event without its e# marker".into());
            }
        } else if c[lay.x] != BOTTOM {
            return Err("malformed pending marker".into());
        }
        Ok(())
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transition::Tick => f.write_str("tick"),
            Transition::Hash { event, fair } => write!(f, "#{event}[{fair}]"),
            Transition::Event { event, fair, demonic } => write!(f, "{event}[{fair}][{demonic}]"),
        }
    }
}
