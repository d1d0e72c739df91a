//! Random one-module models and a transliteration of the two clock update
//! tables, evaluated on the generator's own guard terms.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::Value;
use ttm_core::lts::{Lts, Transition};

#[derive(Debug, Clone, Copy)]
pub enum Operand {
    Var(usize),
    Timer(usize),
    Const(i32),
    Fair,
    Demonic,
}

#[derive(Debug, Clone, Copy)]
pub enum Op {
    Eq,
    Ne,
    Lt,
    Ge,
}

#[derive(Debug, Clone)]
pub enum Guard {
    True,
    Cmp(Operand, Op, Operand),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
    Not(Box<Guard>),
}

#[derive(Debug, Clone)]
pub struct MicroEvent {
    pub name: String,
    /// Size of the fair index range `0..n-1`, if any.
    pub fair: Option<i32>,
    pub demonic: Option<i32>,
    pub l: u32,
    pub u: Option<u32>,
    pub guard: Guard,
}

#[derive(Debug, Clone)]
pub struct Micro {
    pub source: String,
    pub vars: usize,
    pub timers: usize,
    pub events: Vec<MicroEvent>,
}

const VMAX: i32 = 3;
const TBOUND: i32 = 3;

fn operand<R: Rng>(rng: &mut R, vars: usize, timers: usize, fair: bool, demonic: bool) -> Operand {
    loop {
        match rng.random_range(0..5) {
            0 | 1 => return Operand::Var(rng.random_range(0..vars)),
            2 if timers > 0 => return Operand::Timer(rng.random_range(0..timers)),
            3 if fair => return Operand::Fair,
            4 if demonic => return Operand::Demonic,
            _ => {}
        }
    }
}

fn guard<R: Rng>(rng: &mut R, depth: u32, vars: usize, timers: usize, fair: bool, demonic: bool) -> Guard {
    match rng.random_range(0..if depth == 0 { 2 } else { 6 }) {
        0 => Guard::True,
        1 | 2 => {
            let a = operand(rng, vars, timers, fair, demonic);
            let b = if rng.random_bool(0.6) {
                Operand::Const(rng.random_range(0..=VMAX))
            } else {
                operand(rng, vars, timers, fair, demonic)
            };
            let op = *[Op::Eq, Op::Ne, Op::Lt, Op::Ge].choose(rng).unwrap();
            Guard::Cmp(a, op, b)
        }
        3 => Guard::And(
            Box::new(guard(rng, depth - 1, vars, timers, fair, demonic)),
            Box::new(guard(rng, depth - 1, vars, timers, fair, demonic)),
        ),
        4 => Guard::Or(
            Box::new(guard(rng, depth - 1, vars, timers, fair, demonic)),
            Box::new(guard(rng, depth - 1, vars, timers, fair, demonic)),
        ),
        _ => Guard::Not(Box::new(guard(rng, depth - 1, vars, timers, fair, demonic))),
    }
}

fn render_operand(o: Operand) -> String {
    match o {
        Operand::Var(i) => format!("v{i}"),
        Operand::Timer(i) => format!("t{i}"),
        Operand::Const(c) => c.to_string(),
        Operand::Fair => "x".into(),
        Operand::Demonic => "y".into(),
    }
}

fn render(g: &Guard) -> String {
    match g {
        Guard::True => "true".into(),
        Guard::Cmp(a, op, b) => {
            let op = match op {
                Op::Eq => "==",
                Op::Ne => "!=",
                Op::Lt => "<",
                Op::Ge => ">=",
            };
            format!("{} {op} {}", render_operand(*a), render_operand(*b))
        }
        Guard::And(a, b) => format!("({} && {})", render(a), render(b)),
        Guard::Or(a, b) => format!("({} || {})", render(a), render(b)),
        Guard::Not(a) => format!("!({})", render(a)),
    }
}

pub fn generate<R: Rng>(rng: &mut R) -> Micro {
    let vars = rng.random_range(1..=3);
    let timers = rng.random_range(0..=2);
    let n_events = rng.random_range(1..=4);
    let mut src = String::from("globals ");
    let decls: Vec<String> = (0..vars)
        .map(|i| format!("v{i} : 0..{VMAX} := {}", rng.random_range(0..=VMAX)))
        .collect();
    src.push_str(&decls.join("; "));
    src.push_str(" end\n");
    if timers > 0 {
        let decls: Vec<String> = (0..timers).map(|i| format!("t{i} : 0..{TBOUND}")).collect();
        src.push_str(&format!("timers {} end\n", decls.join("; ")));
    }
    let mut events = Vec::new();
    for e in 0..n_events {
        let fair = rng.random_bool(0.4).then(|| rng.random_range(2..=3));
        let demonic = rng.random_bool(0.3).then(|| rng.random_range(2..=3));
        let l = rng.random_range(0..=2);
        let u = rng.random_bool(0.6).then(|| l + rng.random_range(0..=2));
        let g = guard(rng, 2, vars, timers, fair.is_some(), demonic.is_some());
        let name = format!("e{e}");
        let mut idx = Vec::new();
        if let Some(n) = fair {
            idx.push(format!("x : fair 0..{}", n - 1));
        }
        if let Some(n) = demonic {
            idx.push(format!("y : 0..{}", n - 1));
        }
        let idx = if idx.is_empty() {
            String::new()
        } else {
            format!("({})", idx.join("; "))
        };
        let bounds = match u {
            Some(u) => format!("[{l}, {u}]"),
            None => format!("[{l}, *]"),
        };
        let fairness = match u {
            Some(_) => "",
            None => ["", "just", "compassionate"].choose(rng).unwrap(),
        };
        let mut timer_ops = String::new();
        if timers > 0 && rng.random_bool(0.5) {
            let t = rng.random_range(0..timers);
            let kw = if rng.random_bool(0.7) { "start" } else { "stop" };
            timer_ops = format!(" {kw} t{t}");
        }
        let target = rng.random_range(0..vars);
        let action = match rng.random_range(0..4) {
            0 => format!("v{target} := {}", rng.random_range(0..=VMAX)),
            1 => format!("v{target} := {VMAX} - v{target}"),
            2 if demonic.is_some() => format!("v{target} := y"),
            _ => format!("v{target} :: 0 .. {VMAX}"),
        };
        src.push_str(&format!(
            "event {name}{idx} {bounds} {fairness} when {}{timer_ops} do {action} end\n",
            render(&g)
        ));
        events.push(MicroEvent {
            name,
            fair,
            demonic,
            l,
            u,
            guard: g,
        });
    }
    Micro {
        source: src,
        vars,
        timers,
        events,
    }
}

/// Variable and timer values of a configuration, read from its JSON.
pub struct Snapshot {
    vars: Vec<i32>,
    timers: Vec<i32>,
}

impl Snapshot {
    pub fn of(m: &Micro, c: &Value) -> Snapshot {
        let num = |v: &Value| v.as_i64().unwrap() as i32;
        Snapshot {
            vars: (0..m.vars).map(|i| num(&c["state"][format!("v{i}")])).collect(),
            timers: (0..m.timers).map(|i| num(&c["timers"][format!("t{i}")])).collect(),
        }
    }

    fn value(&self, o: Operand, x: i32, y: i32) -> i32 {
        match o {
            Operand::Var(i) => self.vars[i],
            Operand::Timer(i) => self.timers[i],
            Operand::Const(c) => c,
            Operand::Fair => x,
            Operand::Demonic => y,
        }
    }

    fn holds(&self, g: &Guard, x: i32, y: i32) -> bool {
        match g {
            Guard::True => true,
            Guard::Cmp(a, op, b) => {
                let (a, b) = (self.value(*a, x, y), self.value(*b, x, y));
                match op {
                    Op::Eq => a == b,
                    Op::Ne => a != b,
                    Op::Lt => a < b,
                    Op::Ge => a >= b,
                }
            }
            Guard::And(a, b) => self.holds(a, x, y) && self.holds(b, x, y),
            Guard::Or(a, b) => self.holds(a, x, y) || self.holds(b, x, y),
            Guard::Not(a) => !self.holds(a, x, y),
        }
    }

    /// `∃y • grd(x, y)`.
    pub fn enabled(&self, e: &MicroEvent, x: i32) -> bool {
        (0..e.demonic.unwrap_or(1)).any(|y| self.holds(&e.guard, x, y))
    }
}

pub fn clock_key(e: &MicroEvent, x: i32) -> String {
    match e.fair {
        Some(_) => format!("{}({x})", e.name),
        None => e.name.clone(),
    }
}

/// Clocks as the tables define them, without the saturation of unbounded
/// clocks the implementation applies.
pub struct TableClocks {
    pub c: Vec<Vec<i64>>,
}

impl TableClocks {
    pub fn initial(m: &Micro, s: &Snapshot) -> TableClocks {
        let c = m
            .events
            .iter()
            .map(|e| (0..e.fair.unwrap_or(1)).map(|x| if s.enabled(e, x) { 0 } else { -1 }).collect())
            .collect();
        TableClocks { c }
    }

    /// Applies the table for `t` between snapshots `pre` and `post`.
    pub fn step(&mut self, m: &Micro, t: Transition, pre: &Snapshot, post: &Snapshot) {
        for (i, e) in m.events.iter().enumerate() {
            for x in 0..e.fair.unwrap_or(1) {
                let old = self.c[i][x as usize];
                let (g, g2) = (pre.enabled(e, x), post.enabled(e, x));
                self.c[i][x as usize] = match t {
                    Transition::Hash { .. } => old,
                    Transition::Event { event, .. } => {
                        let same = event as usize == i;
                        if !g2 {
                            -1
                        } else if g && !same {
                            old
                        } else {
                            0
                        }
                    }
                    Transition::Tick => {
                        if !g2 {
                            -1
                        } else if !g {
                            0
                        } else {
                            old + 1
                        }
                    }
                };
            }
        }
    }

    /// Compares with the implementation's clocks in `c`; unbounded clocks
    /// are compared after saturation at `l + 1`.
    pub fn mismatch(&self, m: &Micro, c: &Value) -> Option<String> {
        for (i, e) in m.events.iter().enumerate() {
            for x in 0..e.fair.unwrap_or(1) {
                let key = clock_key(e, x);
                let got = c["clocks"][&key].as_i64().unwrap();
                let want = self.c[i][x as usize];
                let want = if e.u.is_none() { want.min(e.l as i64 + 1) } else { want };
                if got != want {
                    return Some(format!("clock {key}: implementation {got}, table {want}"));
                }
            }
        }
        None
    }
}

/// Walks `steps` random transitions, checking every configuration's clocks
/// against the tables. Returns the number of steps checked.
pub fn conforms<R: Rng>(m: &Micro, lts: &Lts, rng: &mut R, steps: usize) -> Result<usize, String> {
    let mut c = lts.initial().map_err(|e| e.to_string())?;
    let json = lts.config_json(&c);
    let mut snap = Snapshot::of(m, &json);
    let mut table = TableClocks::initial(m, &snap);
    if let Some(e) = table.mismatch(m, &json) {
        return Err(format!("initial: {e}"));
    }
    for i in 0..steps {
        let succ = lts.successors(&c).map_err(|e| e.to_string())?;
        let Some((t, next)) = succ.choose(rng).cloned() else {
            return Err(format!("step {i}: deadlock"));
        };
        let njson = lts.config_json(&next);
        let nsnap = Snapshot::of(m, &njson);
        table.step(m, t, &snap, &nsnap);
        if let Some(e) = table.mismatch(m, &njson) {
            return Err(format!("step {i} ({}): {e}", lts.label(t)));
        }
        c = next;
        snap = nsnap;
    }
    Ok(steps)
}
