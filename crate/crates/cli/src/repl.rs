//! The `simulate` command loop.

use std::io::{BufRead, Write};
use std::sync::Arc;

use ttm_core::lts::Lts;
use ttm_core::simulator::{Session, SimError, TraceFile};

const HELP: &str = "\
commands:
  list                 enabled transitions
  fire <n|label> [k]   fire transition n (or by label), outcome k
  outcomes <n|label>   successors of a transition
  undo [k]             drop the last k steps (default 1)
  walk <n>             n seeded random steps
  cycle                next step of an imported lasso
  state                current configuration
  history              fired transitions
  export [file]        write the trace (stdout without a file)
  import <file>        replace the session by a trace
  help | quit";

pub struct Repl {
    pub session: Session,
    /// Stop at the first failing command.
    pub strict: bool,
}

#[derive(Debug)]
pub enum Outcome {
    Continue,
    Quit,
}

impl Repl {
    pub fn new(session: Session) -> Repl {
        Repl { session, strict: false }
    }

    /// Runs commands from `input` until end of input or `quit`. Returns the
    /// first error in strict mode.
    pub fn run(&mut self, input: impl BufRead, out: &mut dyn Write, echo: bool) -> Result<(), String> {
        for line in input.lines() {
            let line = line.map_err(|e| e.to_string())?;
            let cmd = line.split('#').next().unwrap_or("").trim();
            if cmd.is_empty() {
                continue;
            }
            if echo {
                writeln!(out, "> {cmd}").map_err(|e| e.to_string())?;
            }
            match self.exec(cmd, out) {
                Ok(Outcome::Quit) => break,
                Ok(Outcome::Continue) => {}
                Err(e) if self.strict => return Err(e),
                Err(e) => writeln!(out, "error: {e}").map_err(|e| e.to_string())?,
            }
        }
        Ok(())
    }

    fn resolve(&self, arg: &str) -> Result<String, String> {
        match arg.parse::<usize>() {
            Ok(n) => {
                let offers = self.session.enabled().map_err(err)?;
                offers
                    .get(n)
                    .map(|o| o.label.clone())
                    .ok_or_else(|| format!("no transition {n}: {} enabled", offers.len()))
            }
            Err(_) => Ok(arg.to_string()),
        }
    }

    pub fn exec(&mut self, cmd: &str, out: &mut dyn Write) -> Result<Outcome, String> {
        let (head, rest) = cmd.split_once(char::is_whitespace).unwrap_or((cmd, ""));
        let rest = rest.trim();
        let s = &mut self.session;
        let w = |out: &mut dyn Write, text: String| writeln!(out, "{text}").map_err(|e| e.to_string());
        match head {
            "help" => w(out, HELP.into())?,
            "quit" | "exit" => return Ok(Outcome::Quit),
            "list" => {
                for (i, o) in s.enabled().map_err(err)?.iter().enumerate() {
                    let urgent = if o.urgent { " !" } else { "" };
                    let many = if o.outcomes > 1 {
                        format!(" ({} outcomes)", o.outcomes)
                    } else {
                        String::new()
                    };
                    w(out, format!("{i:>3}  {}{urgent}{many}  -- {}", o.label, o.rendering))?;
                }
            }
            "fire" => {
                // The label may contain spaces; an outcome rank, if any, is
                // the last word after a closing parenthesis or a plain name.
                let (target, choice) = match rest.rsplit_once(char::is_whitespace) {
                    Some((t, k)) if !t.trim_end().ends_with(',') && k.parse::<usize>().is_ok() => {
                        (t.trim(), Some(k.parse::<usize>().unwrap()))
                    }
                    _ => (rest, None),
                };
                if target.is_empty() {
                    return Err("usage: fire <n|label> [k]".into());
                }
                let label = self.resolve(target)?;
                let s = &mut self.session;
                s.fire_label(&label, choice).map_err(err)?;
                let m = s.history().last().expect("fired");
                w(out, format!("{}: {} [{}] -> {}", s.history().len(), label, m.choice, s.digest()))?;
            }
            "outcomes" => {
                let label = self.resolve(rest)?;
                let s = &self.session;
                let t = s.parse(&label).map_err(err)?;
                for (k, o) in s.outcomes(t).map_err(err)?.iter().enumerate() {
                    w(out, format!("{k:>3}  {o}"))?;
                }
            }
            "undo" => {
                let k = if rest.is_empty() {
                    1
                } else {
                    rest.parse().map_err(|_| format!("bad count `{rest}`"))?
                };
                s.undo(k).map_err(err)?;
                w(out, format!("{}: -> {}", s.history().len(), s.digest()))?;
            }
            "walk" => {
                let n: usize = rest.parse().map_err(|_| format!("bad count `{rest}`"))?;
                let before = s.history().len();
                s.random_walk(n).map_err(err)?;
                for m in &s.history()[before..] {
                    w(out, format!("  {} [{}]", s.lts().label(m.transition), m.choice))?;
                }
                w(out, format!("{}: -> {}", s.history().len(), s.digest()))?;
            }
            "cycle" => {
                s.follow_cycle().map_err(|_| "no lasso cycle to follow".to_string())?;
                let m = s.history().last().expect("fired");
                w(
                    out,
                    format!("{}: {} [{}] -> {}", s.history().len(), s.lts().label(m.transition), m.choice, s.digest()),
                )?;
            }
            "state" => {
                w(out, format!("digest {}", s.digest()))?;
                w(out, serde_json::to_string_pretty(&s.state_json()).expect("json"))?;
            }
            "history" => {
                for (i, m) in s.history().iter().enumerate() {
                    let mark = if s.cycle().is_some_and(|c| c.start == i) { "  <cycle>" } else { "" };
                    w(out, format!("{i:>4}  {} [{}]{mark}", s.lts().label(m.transition), m.choice))?;
                }
            }
            "export" => {
                let text = s.export().to_jsonl();
                if rest.is_empty() {
                    write!(out, "{text}").map_err(|e| e.to_string())?;
                } else {
                    std::fs::write(rest, text).map_err(|e| format!("{rest}: {e}"))?;
                    w(out, format!("wrote {} step(s) to {rest}", s.export().steps.len()))?;
                }
            }
            "import" => {
                let text = std::fs::read_to_string(rest).map_err(|e| format!("{rest}: {e}"))?;
                let trace = TraceFile::from_jsonl(&text).map_err(err)?;
                let lts: Arc<Lts> = Arc::new(Lts::new(s.lts().model.clone()));
                *s = Session::import(lts, &trace).map_err(err)?;
                w(out, format!("{}: -> {}", s.history().len(), s.digest()))?;
            }
            _ => return Err(format!("unknown command `{head}` (try `help`)")),
        }
        Ok(Outcome::Continue)
    }
}

fn err(e: SimError) -> String {
    e.to_string()
}
