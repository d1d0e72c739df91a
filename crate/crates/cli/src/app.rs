//! Argument parsing and subcommands.

use std::io::{BufReader, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use ttm_core::checker::{CheckError, Checker, InstanceVerdict, Lasso};
use ttm_core::elaborator::{dump, flatten, ElabError, FlatModel};
use ttm_core::lts::{explore, ExploreError, Layout, Lts};
use ttm_core::simulator::Session;
use ttm_core::syntax::{parse, parse_property_file, printer, Diagnostic, PropertySource, SourceModel, Span};

use crate::config::{Format, Overrides, RunConfig, LIMIT_ENV};
use crate::repl::Repl;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "ttmc", version, about = "Timed Transition Model toolchain")]
pub struct Cli {
    /// Configuration file (default: ./ttmc.toml when present).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Maximum number of configurations to explore.
    #[arg(long, global = true)]
    limit_states: Option<usize>,
    /// Memory budget in megabytes, enforced as a state cap.
    #[arg(long, global = true)]
    memory_mb: Option<usize>,
    /// Threads for state-space exploration.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a model and report diagnostics.
    Parse {
        model: PathBuf,
        /// Print the normalized source.
        #[arg(long)]
        print: bool,
    },
    /// Flatten a model into a single module.
    Flatten {
        model: PathBuf,
        /// Print the flat model and its graphs as JSON.
        #[arg(long)]
        dump: bool,
    },
    /// Build the reachable transition system.
    Explore {
        model: PathBuf,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Check LTL properties under the model's fairness.
    Check(CheckArgs),
    /// Step through a model interactively or from a script.
    Simulate {
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Commands to run instead of reading the terminal.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Start from a trace file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Serve the session API over HTTP.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Args, Debug)]
struct CheckArgs {
    model: PathBuf,
    /// Property name; repeatable.
    #[arg(long = "prop")]
    props: Vec<String>,
    /// Check every property.
    #[arg(long)]
    all: bool,
    /// Extra property file (`name : formula` or `name(params) : formula` per line).
    #[arg(long)]
    props_file: Option<PathBuf>,
    #[arg(long)]
    limit: Option<usize>,
    /// Write the first counterexample as a trace file.
    #[arg(long)]
    trace_json: Option<PathBuf>,
    /// Check `[]p` by Büchi product instead of reachability.
    #[arg(long)]
    no_invariant_fast_path: bool,
}

/// An error ready for the user, with its exit code.
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn error(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_ERROR,
            message: message.into(),
        }
    }
}

type Out<'a> = &'a mut dyn Write;

pub fn main_with(args: impl IntoIterator<Item = String>, out: Out, err: Out) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match run(cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "{}", f.message.trim_end());
            f.code
        }
    }
}

fn run(cli: Cli, out: Out) -> Result<i32, Failure> {
    let limit = match &cli.command {
        Command::Explore { limit, .. } => *limit,
        Command::Check(a) => a.limit,
        _ => None,
    };
    let flags = Overrides {
        limit_states: limit.or(cli.limit_states),
        memory_mb: cli.memory_mb,
        workers: cli.workers,
        format: cli.format,
    };
    let cfg = RunConfig::load(cli.config.as_deref(), std::env::var(LIMIT_ENV).ok(), &flags).map_err(Failure::error)?;
    let w = |out: Out, text: &str| writeln!(out, "{text}").map_err(|e| Failure::error(e.to_string()));
    match cli.command {
        Command::Parse { model, print } => {
            let (_, src) = load_source(&model)?;
            if print {
                write!(out, "{}", printer::print_model(&src)).map_err(|e| Failure::error(e.to_string()))?;
            } else if cfg.format == Format::Json {
                let v = json!({
                    "modules": src.modules.iter().map(|m| m.name.clone()).collect::<Vec<_>>(),
                    "instances": src.instances.iter().map(|i| i.name.clone()).collect::<Vec<_>>(),
                    "properties": src.properties.iter().map(|p| p.name.clone()).collect::<Vec<_>>(),
                });
                w(out, &pretty(&v))?;
            } else {
                w(
                    out,
                    &format!(
                        "{}: ok ({} module(s), {} instance(s), {} propert{})",
                        model.display(),
                        src.modules.len(),
                        src.instances.len(),
                        src.properties.len(),
                        if src.properties.len() == 1 { "y" } else { "ies" }
                    ),
                )?;
            }
            Ok(EXIT_OK)
        }
        Command::Flatten { model, dump: d } => {
            let (_, _, m) = load(&model)?;
            if d || cfg.format == Format::Json {
                w(out, &pretty(&dump(&m)))?;
            } else {
                for e in &m.events {
                    w(out, &event_line(e))?;
                }
                for s in &m.graphs.sync_sets {
                    w(
                        out,
                        &format!("sync {} = {}; order {}", s.compound, s.members.join(" + "), s.projection_order.join(", ")),
                    )?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Explore { model, .. } => {
            let (_, _, m) = load(&model)?;
            let lts = Lts::new(m);
            let g = explore(&lts, cfg.limits(lts.layout.width)).map_err(|e| match e {
                ExploreError::StateLimitExceeded(_) => Failure {
                    code: EXIT_LIMIT,
                    message: format!("error: {e}"),
                },
                ExploreError::Step(e) => Failure::error(format!("error: {e}")),
            })?;
            let s = g.stats;
            if cfg.format == Format::Json {
                w(
                    out,
                    &pretty(&json!({
                        "states": s.states,
                        "transitions": s.transitions,
                        "depth": s.depth,
                        "peak_frontier": s.peak_frontier,
                    })),
                )?;
            } else {
                w(
                    out,
                    &format!(
                        "{} states, {} transitions, depth {}, peak frontier {}",
                        s.states, s.transitions, s.depth, s.peak_frontier
                    ),
                )?;
            }
            Ok(EXIT_OK)
        }
        Command::Check(args) => check(args, &cfg, out),
        Command::Simulate {
            model,
            seed,
            script,
            trace,
        } => {
            let (_, _, m) = load(&model)?;
            let lts = Arc::new(Lts::new(m));
            let session = match trace {
                Some(p) => {
                    let text = read(&p)?;
                    let tr = ttm_core::simulator::TraceFile::from_jsonl(&text)
                        .map_err(|e| Failure::error(format!("{}: {e}", p.display())))?;
                    Session::import(lts, &tr).map_err(|e| Failure::error(format!("{}: {e}", p.display())))?
                }
                None => Session::with_lts(lts, seed).map_err(|e| Failure::error(e.to_string()))?,
            };
            let mut repl = Repl::new(session);
            match script {
                Some(p) => {
                    repl.strict = true;
                    let text = read(&p)?;
                    repl.run(text.as_bytes(), out, true).map_err(|e| Failure::error(format!("error: {e}")))?;
                }
                None => {
                    let stdin = std::io::stdin();
                    let echo = !stdin.is_terminal();
                    if !echo {
                        w(out, "type `help` for commands")?;
                    }
                    repl.run(BufReader::new(stdin.lock()), out, echo)
                        .map_err(|e| Failure::error(format!("error: {e}")))?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Serve { port, host } => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::error(e.to_string()))?;
            rt.block_on(crate::serve::run(&format!("{host}:{port}")))
                .map_err(|e| Failure::error(format!("error: {e}")))?;
            Ok(EXIT_OK)
        }
    }
}

fn event_line(e: &ttm_core::elaborator::FlatEvent) -> String {
    let idx = |ps: &[ttm_core::elaborator::IndexParam]| -> Vec<String> {
        ps.iter().map(|p| format!("{} ({})", p.name, p.domain.len())).collect()
    };
    let u = e.u.map_or("*".to_string(), |u| u.to_string());
    let fair = format!("{:?}", e.fair).to_lowercase();
    let mut line = format!("event {} [{}, {u}] {fair}", e.id, e.l);
    if !e.f_ind.is_empty() {
        line.push_str(&format!("; fair {}", idx(&e.f_ind).join(", ")));
    }
    if !e.d_ind.is_empty() {
        line.push_str(&format!("; demonic {}", idx(&e.d_ind).join(", ")));
    }
    line
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json")
}

fn read(p: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(p).map_err(|e| Failure::error(format!("{}: {e}", p.display())))
}

/// `file:line:col: Kind: message`, the source line and a caret.
fn render_at(path: &Path, text: &str, span: Span, head: String) -> String {
    let mut s = format!("{}:{head}", path.display());
    if span.line > 0 {
        if let Some(line) = text.lines().nth(span.line as usize - 1) {
            let col = (span.col as usize).max(1);
            s.push_str(&format!("\n  | {line}\n  | {}^", " ".repeat(col - 1)));
        }
    }
    s
}

fn render_diags(path: &Path, text: &str, ds: &[Diagnostic]) -> String {
    ds.iter()
        .map(|d| render_at(path, text, d.span, d.to_string()))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_elab(path: &Path, text: &str, e: &ElabError) -> String {
    render_at(path, text, e.span, e.to_string())
}

fn load_source(path: &Path) -> Result<(String, SourceModel), Failure> {
    let text = read(path)?;
    let src = parse(&text).map_err(|ds| Failure::error(render_diags(path, &text, &ds)))?;
    Ok((text, src))
}

fn load(path: &Path) -> Result<(String, SourceModel, FlatModel), Failure> {
    let (text, src) = load_source(path)?;
    let m = flatten(&src).map_err(|e| Failure::error(render_elab(path, &text, &e)))?;
    Ok((text, src, m))
}

fn check_failure(path: &Path, text: &str, name: &str, e: CheckError) -> Failure {
    let code = match e {
        CheckError::StateLimitExceeded(_) | CheckError::FormulaTooLarge { .. } => EXIT_LIMIT,
        _ => EXIT_ERROR,
    };
    let message = match &e {
        CheckError::Property(ds) => render_diags(path, text, ds),
        CheckError::Elab(el) => render_elab(path, text, el),
        _ => format!("{name}: error: {e}"),
    };
    Failure { code, message }
}

fn check(args: CheckArgs, cfg: &RunConfig, out: Out) -> Result<i32, Failure> {
    let (text, src, m) = load(&args.model)?;
    let mut props: Vec<PropertySource> = src.properties.clone();
    if let Some(p) = &args.props_file {
        let ptext = read(p)?;
        let extra = parse_property_file(&ptext).map_err(|ds| Failure::error(render_diags(p, &ptext, &ds)))?;
        props.extend(extra);
    }
    let wanted: Vec<String> = if args.all {
        props.iter().map(|p| p.name.clone()).collect()
    } else if !args.props.is_empty() {
        args.props.clone()
    } else if !cfg.props.is_empty() {
        cfg.props.clone()
    } else {
        let names: Vec<&str> = props.iter().map(|p| p.name.as_str()).collect();
        return Err(Failure::error(format!(
            "no property selected: use --prop NAME or --all (available: {})",
            names.join(", ")
        )));
    };
    let selected: Vec<&PropertySource> = wanted
        .iter()
        .map(|n| {
            props
                .iter()
                .rev()
                .find(|p| &p.name == n)
                .ok_or_else(|| Failure::error(format!("no property `{n}` in {}", args.model.display())))
        })
        .collect::<Result<_, _>>()?;

    let mut opts = cfg.check_options(Layout::new(&m).width);
    opts.invariant_fast_path = !args.no_invariant_fast_path;
    let mut ck = Checker::new(m, opts);
    let mut results: Vec<(String, InstanceVerdict)> = Vec::new();
    let mut first_lasso: Option<Lasso> = None;
    let mut failed = false;
    let json_mode = cfg.format == Format::Json;
    for p in selected {
        let vs = ck
            .check_property(p)
            .map_err(|e| check_failure(&args.model, &text, &p.name, e))?;
        for v in vs {
            if !v.verdict.holds {
                failed = true;
                if first_lasso.is_none() {
                    first_lasso = v.verdict.counterexample.clone();
                }
            }
            if !json_mode {
                print_verdict(&ck, &p.name, &v, out)?;
            }
            results.push((p.name.clone(), v));
        }
    }
    if json_mode {
        let list: Vec<Value> = results.iter().map(|(n, v)| verdict_json(&ck, n, v)).collect();
        writeln!(out, "{}", pretty(&json!({ "results": list }))).map_err(|e| Failure::error(e.to_string()))?;
    }
    if let (Some(path), Some(lasso)) = (&args.trace_json, &first_lasso) {
        let lts = Arc::new(Lts::new(ck.lts.model.clone()));
        let s = Session::from_lasso(lts, 0, lasso).map_err(|e| Failure::error(format!("trace: {e}")))?;
        std::fs::write(path, s.export().to_jsonl()).map_err(|e| Failure::error(format!("{}: {e}", path.display())))?;
    }
    Ok(if failed { EXIT_FAILS } else { EXIT_OK })
}

fn title(name: &str, v: &InstanceVerdict) -> String {
    if v.bindings.is_empty() {
        name.to_string()
    } else {
        let b: Vec<String> = v.bindings.iter().map(|(k, x)| format!("{k} = {x}")).collect();
        format!("{name} [{}]", b.join(", "))
    }
}

fn print_verdict(ck: &Checker, name: &str, v: &InstanceVerdict, out: Out) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::error(e.to_string());
    let st = &v.verdict.stats;
    let word = if v.verdict.holds { "holds" } else { "FAILS" };
    writeln!(
        out,
        "{}: {word} ({} states, {} transitions, {} product states, {} ms)",
        title(name, v),
        st.states,
        st.transitions,
        st.product_states,
        st.millis
    )
    .map_err(io)?;
    if let Some(l) = &v.verdict.counterexample {
        writeln!(out, "  counterexample: prefix {}, cycle {}", l.prefix.len(), l.cycle.len()).map_err(io)?;
        for (i, step) in l.prefix.iter().chain(&l.cycle).enumerate() {
            if i == l.prefix.len() {
                writeln!(out, "  -- cycle --").map_err(io)?;
            }
            let state = ck.lts.config_json(&step.config);
            writeln!(out, "  {i:>4}  {}", compact_state(&state)).map_err(io)?;
            writeln!(out, "        {}", ck.lts.label(step.transition)).map_err(io)?;
        }
        writeln!(out, "  -- back to {} --", l.prefix.len()).map_err(io)?;
    }
    Ok(())
}

/// Variables and the pending event on one line.
fn compact_state(c: &Value) -> String {
    let mut parts: Vec<String> = c["state"]
        .as_object()
        .into_iter()
        .flatten()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    if let Some(t) = c["timers"].as_object().filter(|t| !t.is_empty()) {
        parts.extend(t.iter().map(|(k, v)| format!("{k}:{v}")));
    }
    if let Some(p) = c["pending"].as_str() {
        parts.push(format!("pending {p}"));
    }
    parts.join(" ")
}

fn verdict_json(ck: &Checker, name: &str, v: &InstanceVerdict) -> Value {
    let st = &v.verdict.stats;
    let bindings: Map<String, Value> = v.bindings.iter().map(|(k, x)| (k.clone(), json!(x))).collect();
    let steps = |xs: &[ttm_core::checker::Step]| -> Vec<Value> {
        xs.iter()
            .map(|s| {
                json!({
                    "config": ck.lts.config_json(&s.config),
                    "transition": ck.lts.label(s.transition),
                })
            })
            .collect()
    };
    json!({
        "property": name,
        "bindings": bindings,
        "holds": v.verdict.holds,
        // Timing is left out so identical runs print identical JSON.
        "stats": {
            "states": st.states,
            "transitions": st.transitions,
            "product_states": st.product_states,
            "buchi_nodes": st.buchi_nodes,
        },
        "counterexample": v.verdict.counterexample.as_ref().map(|l| json!({
            "prefix": steps(&l.prefix),
            "cycle": steps(&l.cycle),
        })),
    })
}
