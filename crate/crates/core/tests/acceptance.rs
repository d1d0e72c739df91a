//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttm_core::checker::{
    compile_text, instantiations, obligations, CheckOptions, Checker, Formula, InstanceVerdict, Lasso,
};
use ttm_core::elaborator::{flatten_source, ElabErrorKind, FlatModel};
use ttm_core::lts::Lts;
use ttm_core::syntax::ltl::parse_property;
use ttm_core::syntax::{Fairness, SourceModel};

use common::{audit_lasso, load, micro, naive};

/// A failing verdict kept for the soundness criterion.
struct Failure {
    origin: String,
    model: FlatModel,
    formula: Formula,
    lasso: Lasso,
}

#[derive(Default)]
struct Report {
    lines: Vec<(bool, String)>,
    failures: Vec<Failure>,
}

impl Report {
    fn record(&mut self, name: &str, result: Result<String, String>, took: Duration) {
        let (ok, detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        let line = format!(
            "[{}] {name}: {detail} ({:.2} s)",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
        println!("{line}");
        self.lines.push((ok, line));
    }
}

/// Checks every instance of property `name`, keeping each failing lasso.
fn check_named(
    rep: &mut Report,
    ck: &mut Checker,
    src: &SourceModel,
    name: &str,
    limit: Duration,
) -> Result<Vec<(String, bool)>, String> {
    let prop = src
        .properties
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| format!("no property {name}"))?;
    let start = Instant::now();
    let verdicts: Vec<InstanceVerdict> = ck.check_property(prop).map_err(|e| format!("{name}: {e}"))?;
    let took = start.elapsed();
    if took > limit {
        return Err(format!("{name} took {:.1} s, limit {} s", took.as_secs_f64(), limit.as_secs()));
    }
    let ltl = parse_property(prop, &*ck.lts.model).map_err(|d| format!("{d:?}"))?;
    let bindings = instantiations(&ltl.params, &ck.lts.model).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for (v, b) in verdicts.into_iter().zip(bindings) {
        let label = if v.bindings.is_empty() {
            name.to_string()
        } else {
            let bs: Vec<String> = v.bindings.iter().map(|(k, x)| format!("{k}={x}")).collect();
            format!("{name}[{}]", bs.join(","))
        };
        if let Some(l) = v.verdict.counterexample {
            rep.failures.push(Failure {
                origin: label.clone(),
                model: (*ck.lts.model).clone(),
                formula: ck.formula(&ltl.expr, &b).map_err(|e| e.to_string())?,
                lasso: l,
            });
        }
        out.push((label, v.verdict.holds));
    }
    Ok(out)
}

fn expect(results: &[(String, bool)], want: bool) -> Result<(), String> {
    match results.iter().find(|(_, h)| *h != want) {
        Some((n, _)) => Err(format!("{n} {}", if want { "fails" } else { "holds" })),
        None => Ok(()),
    }
}

fn describe(results: &[(String, bool)]) -> String {
    results
        .iter()
        .map(|(n, h)| format!("{n} {}", if *h { "holds" } else { "fails" }))
        .collect::<Vec<_>>()
        .join(", ")
}

fn checker(m: FlatModel) -> Checker {
    Checker::new(m, CheckOptions::default())
}

fn semantics_conformance() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut models, mut steps) = (0, 0);
    for i in 0..500 {
        let m = micro::generate(&mut rng);
        let flat = flatten_source(&m.source).map_err(|e| format!("model {i}: {e}\n{}", m.source))?;
        let lts = Lts::new(flat);
        steps += micro::conforms(&m, &lts, &mut rng, 60).map_err(|e| format!("model {i}: {e}\n{}", m.source))?;
        models += 1;
    }
    Ok(format!("{models} models, {steps} steps, 100% agreement"))
}

fn train_abstract(rep: &mut Report) -> Result<String, String> {
    let limit = Duration::from_secs(60);
    let (src, m) = load("train_abstract");
    let mut ck = checker(m);
    let safety = check_named(rep, &mut ck, &src, "safety", limit)?;
    let live = check_named(rep, &mut ck, &src, "liveness", limit)?;
    expect(&safety, true)?;
    expect(&live, true)?;
    let (dsrc, dm) = load("train_abstract_demonic");
    let mut dck = checker(dm);
    let before = rep.failures.len();
    let dlive = check_named(rep, &mut dck, &dsrc, "liveness", limit)?;
    if dlive.iter().all(|(_, h)| *h) {
        return Err("demonic variant: liveness holds".into());
    }
    for f in &rep.failures[before..] {
        let lts = Lts::new(f.model.clone());
        audit_lasso(&lts, &obligations(&f.model), &f.formula, &f.lasso)
            .map_err(|e| format!("demonic lasso for {}: {e}", f.origin))?;
    }
    Ok(format!(
        "{}; demonic variant: {} with validated lassos",
        describe(&[safety, live].concat()),
        describe(&dlive)
    ))
}

fn train_refined(rep: &mut Report) -> Result<String, String> {
    let (src, m) = load("train_refined");
    let mut ck = checker(m);
    let limit = Duration::from_secs(60);
    let safety = check_named(rep, &mut ck, &src, "safety", limit)?;
    let live = check_named(rep, &mut ck, &src, "liveness", limit)?;
    expect(&safety, true)?;
    expect(&live, true)?;
    Ok(describe(&[safety, live].concat()))
}

fn nop_sync(rep: &mut Report) -> Result<String, String> {
    let (src, m) = load("nop_sync");
    let sensors = m.sets.get("SENSOR").map(|d| d.values.len()).unwrap_or(0);
    let mut ck = checker(m);
    let limit = Duration::from_secs(120);
    let follows = check_named(rep, &mut ck, &src, "trip_follows_sensors", limit)?;
    let above = check_named(rep, &mut ck, &src, "trip_above_setpoint", limit)?;
    expect(&follows, true)?;
    expect(&above, true)?;
    Ok(format!("N={sensors}: {}", describe(&[follows, above].concat())))
}

fn nop_refined(rep: &mut Report) -> Result<String, String> {
    let (src, m) = load("nop_refined");
    let mut ck = checker(m);
    let limit = Duration::from_secs(120);
    let above = check_named(rep, &mut ck, &src, "trip_above_setpoint", limit)?;
    let follows = check_named(rep, &mut ck, &src, "trip_follows_sensors", limit)?;
    let deadline = check_named(rep, &mut ck, &src, "trip_within_deadline", limit)?;
    expect(&above, false)?;
    expect(&follows, true)?;
    expect(&deadline, true)?;
    Ok(describe(&[above, follows, deadline].concat()))
}

fn error_reporting() -> Result<String, String> {
    let cases = [
        (
            ElabErrorKind::CircularDataFlow,
            "globals a : 0..3 := 0; b : 0..3 := 0 end
             module P interface share a : 0..3; share b : 0..3
               events e do a := b' end
             end
             module Q interface share a : 0..3; share b : 0..3
               depends p : P
               events f sync p.e as g do b := a' end
             end
             instances p = P(share a, share b) ; q = Q(share a, share b) with p := p end end",
        ),
        (
            ElabErrorKind::DoubleAssignment,
            "globals a : 0..3 := 0 end
             module P interface share a : 0..3 events e do a := 1 end end
             module Q interface share a : 0..3
               depends p : P
               events f sync p.e as g do a := 2 end
             end
             instances p = P(share a) ; q = Q(share a) with p := p end end",
        ),
        (
            ElabErrorKind::CyclicModuleDependency,
            "module A depends b : B end
             module B depends a : A end",
        ),
    ];
    let mut seen = Vec::new();
    for (kind, text) in cases {
        let e = match flatten_source(text) {
            Ok(_) => return Err(format!("{kind:?}: model accepted")),
            Err(e) => e,
        };
        if e.kind != kind {
            return Err(format!("expected {kind:?}, got {e}"));
        }
        if e.span.line == 0 || e.span.col == 0 {
            return Err(format!("{kind:?} without a position: {e}"));
        }
        seen.push(format!("{kind:?} at {}", e.span));
    }
    Ok(seen.join(", "))
}

/// Models for the oracle comparison with the predicates `P`, `Q` and
/// event atom `E` substituted into the formula suite.
const ORACLE_MODELS: [(&str, &str, &str, &str); 10] = [
    ("@philosophers", "p1.eating", "p2.holding == 1", "p1.release"),
    ("@train_abstract", "loc[A] == Entr", "loc[B] == Out", "move_out(A)"),
    ("@train_abstract_demonic", "loc[A] == Entr", "loc[A] == Out", "arrive(B)"),
    ("@train_refined", "env.loc[A] == Entr", "env.loc[A] == Out", "env.arrive(B)"),
    (
        "globals x : bool := false; y : 0..2 := 0 end
         event set when !x do x := true end
         event bump just when y < 2 do y := y + 1 end
         event reset [1, 3] when y == 2 do y := 0 end",
        "x",
        "y == 2",
        "set",
    ),
    (
        "globals b : bool := false; done : bool := false end
         event flip just when true do b := !b end
         event fire just when b && !done do done := true end",
        "b",
        "done",
        "flip",
    ),
    (
        "globals b : bool := false; done : bool := false end
         event flip just when true do b := !b end
         event fire compassionate when b && !done do done := true end",
        "b",
        "done",
        "fire",
    ),
    (
        "globals busy : bool := false; last : 0..2 := 0 end
         event enter(t : fair 1..2) compassionate when !busy do busy := true, last := t end
         event leave [1, 2] when busy do busy := false end",
        "busy",
        "last == 2",
        "enter(1)",
    ),
    (
        "globals phase : 0..2 := 0 end
         timers w : 0..3 end
         event go [1, 2] when phase == 0 start w do phase := 1 end
         event back [2, *] just when phase == 1 && w >= 2 do phase := 2 end
         event again when phase == 2 stop w do phase := 0 end",
        "phase == 1",
        "mono(w)",
        "back",
    ),
    (
        "globals v : 0..3 := 0; hits : 0..1 := 0 end
         event roll just when hits == 0 do v :: 0 .. 3 end
         event score(k : 1..2) compassionate when v == k && hits == 0 do hits := 1 end
         event clear [0, 1] when hits == 1 do hits := 0, v := 0 end",
        "v == 3",
        "hits == 1",
        "score",
    ),
];

const FORMULAS: [&str; 20] = [
    "[](P)",
    "<>(P)",
    "[]<>(P)",
    "<>[](P)",
    "(P) U (Q)",
    "[]((P) => <>(Q))",
    "[]<>(P) => []<>(Q)",
    "<>((P) && (Q))",
    "[]((P) || (Q))",
    "!((P) U (Q))",
    "<>[]!(Q)",
    "[]((P) => ((P) U (Q)))",
    "((P) U (Q)) || [](P)",
    "[]<>(P) && []<>(Q)",
    "<>[](P) || <>[](Q)",
    "[]((Q) => <>[](Q))",
    "<>E",
    "[]<>E",
    "[]((P) => <>E)",
    "[](E => <>(P))",
];

/// Substitutes the placeholders of a template in one pass, so a predicate
/// containing `P`, `Q` or `E` is left alone.
fn instantiate(tmpl: &str, p: &str, q: &str, e: &str) -> String {
    let mut out = String::new();
    for c in tmpl.chars() {
        match c {
            'P' => out.push_str(p),
            'Q' => out.push_str(q),
            'E' => out.push_str(e),
            c => out.push(c),
        }
    }
    out
}

fn oracle_equivalence(rep: &mut Report) -> Result<String, String> {
    let (mut agree, mut total, mut failing) = (0, 0, 0);
    let mut kinds = std::collections::BTreeSet::new();
    let mut disagreements = Vec::new();
    for (i, (model, p, q, e)) in ORACLE_MODELS.iter().enumerate() {
        let m = match model.strip_prefix('@') {
            Some(name) => load(name).1,
            None => flatten_source(model).map_err(|err| format!("oracle model {i}: {err}"))?,
        };
        let obl = obligations(&m);
        for ev in &m.events {
            kinds.insert(match (ev.fair, ev.u) {
                (Fairness::Compassionate, _) => "compassion",
                (Fairness::Just, _) => "justice",
                (_, Some(_)) => "real-time",
                _ => "spontaneous",
            });
        }
        let mut ck = checker(m.clone());
        let lts = Lts::new(m.clone());
        let states = ck.graph().map_err(|e| e.to_string())?.len();
        if states > 2000 {
            return Err(format!("oracle model {i} has {states} configurations"));
        }
        for tmpl in FORMULAS {
            let text = instantiate(tmpl, p, q, e);
            let f = compile_text(&m, &text, &[]).map_err(|err| format!("model {i}, `{text}`: {err}"))?;
            let v = ck.check(&f).map_err(|err| format!("model {i}, `{text}`: {err}"))?;
            let reference = naive::check(&lts, &f, &obl);
            total += 1;
            if reference.holds == v.holds {
                agree += 1;
            } else {
                disagreements.push(format!("model {i} `{text}`: checker {}, reference {}", v.holds, reference.holds));
            }
            if let Some(l) = v.counterexample {
                failing += 1;
                rep.failures.push(Failure {
                    origin: format!("oracle model {i} `{text}`"),
                    model: m.clone(),
                    formula: f,
                    lasso: l,
                });
            }
        }
    }
    let regimes = kinds.into_iter().collect::<Vec<_>>().join(", ");
    if !disagreements.is_empty() {
        return Err(format!("{agree}/{total} agree; {}", disagreements.join("; ")));
    }
    Ok(format!(
        "{agree}/{total} agree over {} models x {} formulas ({failing} failing); regimes: {regimes}",
        ORACLE_MODELS.len(),
        FORMULAS.len()
    ))
}

fn realtime_sweep(rep: &mut Report) -> Result<String, String> {
    let mut cases = 0;
    for u in 0..=3u32 {
        for l in 0..=u {
            let bounded = format!(
                "globals done : bool := false end
                 timers t : 0..5 end
                 event e [{l}, {u}] when !done do done := true end"
            );
            let m = flatten_source(&bounded).map_err(|e| e.to_string())?;
            let mut ck = checker(m.clone());
            let within = format!("[](!done => t <= {u})");
            let f = compile_text(&m, &within, &[]).map_err(|e| e.to_string())?;
            let v = ck.check(&f).map_err(|e| e.to_string())?;
            if !v.holds {
                return Err(format!("[{l}, {u}]: `{within}` fails"));
            }
            if u > 0 {
                // The bound is tight: the event may wait the full u ticks.
                let tighter = format!("[](!done => t <= {})", u - 1);
                let f = compile_text(&m, &tighter, &[]).map_err(|e| e.to_string())?;
                let v = ck.check(&f).map_err(|e| e.to_string())?;
                match v.counterexample {
                    Some(l) => rep.failures.push(Failure {
                        origin: format!("tightness [{l:?}, {u}]"),
                        model: m.clone(),
                        formula: f,
                        lasso: l,
                    }),
                    None => return Err(format!("[{l}, {u}]: `{tighter}` holds")),
                }
            }
            let spontaneous = format!(
                "globals done : bool := false end
                 timers t : 0..5 end
                 event e [{l}, *] when !done do done := true end"
            );
            let m = flatten_source(&spontaneous).map_err(|e| e.to_string())?;
            let mut ck = checker(m.clone());
            let beyond = format!("[](!done => t <= {})", u + 1);
            let f = compile_text(&m, &beyond, &[]).map_err(|e| e.to_string())?;
            let v = ck.check(&f).map_err(|e| e.to_string())?;
            match v.counterexample {
                Some(lasso) => rep.failures.push(Failure {
                    origin: format!("spontaneous [{l}, *] vs {}", u + 1),
                    model: m,
                    formula: f,
                    lasso,
                }),
                None => return Err(format!("spontaneous [{l}, *]: `{beyond}` holds")),
            }
            cases += 1;
        }
    }
    Ok(format!(
        "{cases} (l, u) pairs hold within u and are tight; spontaneous variants violate u + 1"
    ))
}

fn counterexample_soundness(rep: &Report) -> Result<String, String> {
    if rep.failures.is_empty() {
        return Err("no failing verdicts were produced".into());
    }
    for f in &rep.failures {
        let lts = Lts::new(f.model.clone());
        audit_lasso(&lts, &obligations(&f.model), &f.formula, &f.lasso).map_err(|e| format!("{}: {e}", f.origin))?;
    }
    Ok(format!(
        "{} failing verdicts; every lasso replays through step, meets all obligations on its cycle and falsifies its formula",
        rep.failures.len()
    ))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let r = f();
    (r, start.elapsed())
}

fn main() {
    let mut rep = Report::default();

    let (r, t) = timed(semantics_conformance);
    let r = r.and_then(|d| {
        if t > Duration::from_secs(10) {
            Err(format!("{d}, but took longer than 10 s"))
        } else {
            Ok(d)
        }
    });
    rep.record("1. semantics conformance (clock tables, 500 micro-models)", r, t);

    let (r, t) = timed(|| train_abstract(&mut rep));
    rep.record("2. train abstract (fair index, compassion) and demonic variant", r, t);
    let (r, t) = timed(|| train_refined(&mut rep));
    rep.record("3. train refined (FIFO queue, just)", r, t);
    let (r, t) = timed(|| nop_sync(&mut rep));
    rep.record("4. NOP synchronized", r, t);
    let (r, t) = timed(|| nop_refined(&mut rep));
    rep.record("5. NOP refined", r, t);
    let (r, t) = timed(error_reporting);
    rep.record("6. error reporting with positions", r, t);
    let (r, t) = timed(|| oracle_equivalence(&mut rep));
    rep.record("7. checker oracle equivalence", r, t);
    let (r, t) = timed(|| realtime_sweep(&mut rep));
    rep.record("8. real-time bound sweep", r, t);
    let (r, t) = timed(|| counterexample_soundness(&rep));
    rep.record("9. counterexample soundness", r, t);

    let failed = rep.lines.iter().filter(|(ok, _)| !ok).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        rep.lines.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
