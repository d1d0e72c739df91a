//! Line-delimited JSON traces.
//!
//! ```text
//! {"cycle_start":null,"format":"ttm-trace","initial":"…","model":"…","seed":7,"version":1}
//! {"choice":0,"config":{…},"digest":"…","step":0,"transition":"arrive#(A)"}
//! {"choice":0,"config":{…},"cycle":true,"digest":"…","step":1,"transition":"tick"}
//! ```
//!
//! Steps marked `cycle` follow the ordinary ones and loop back to the
//! configuration after `cycle_start` ordinary steps.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{Cycle, Session, SimError};
use crate::elaborator::{dump, FlatModel};
use crate::lts::{Config, Lts};

const FORMAT: &str = "ttm-trace";
const VERSION: u32 = 1;

/// 64-bit hash of the flat model dump, as 16 hex digits.
pub fn model_hash(m: &FlatModel) -> String {
    let text = serde_json::to_string(&dump(m)).expect("json");
    Sha256::digest(text.as_bytes())[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub model: String,
    pub seed: u64,
    pub initial: String,
    pub cycle_start: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub transition: String,
    pub choice: usize,
    pub digest: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub cycle: bool,
    pub config: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub steps: Vec<TraceStep>,
}

impl TraceFile {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("json");
        out.push('\n');
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("json"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<TraceFile, SimError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let bad = |line: usize, e: serde_json::Error| SimError::Format {
            line: line + 1,
            message: e.to_string(),
        };
        let (n, first) = lines.next().ok_or(SimError::Format {
            line: 1,
            message: "empty trace".into(),
        })?;
        let header: TraceHeader = serde_json::from_str(first).map_err(|e| bad(n, e))?;
        if header.format != FORMAT || header.version != VERSION {
            return Err(SimError::Format {
                line: n + 1,
                message: format!("unsupported trace format {} v{}", header.format, header.version),
            });
        }
        let steps = lines
            .map(|(n, l)| serde_json::from_str(l).map_err(|e| bad(n, e)))
            .collect::<Result<Vec<TraceStep>, _>>()?;
        Ok(TraceFile { header, steps })
    }
}

impl Session {
    /// The history, then the attached cycle if any.
    pub fn export(&self) -> TraceFile {
        let lts = self.lts();
        let mut steps = Vec::new();
        let mut push = |c: &Config, t, choice, cycle| {
            let step = steps.len();
            steps.push(TraceStep {
                step,
                transition: lts.label(t),
                choice,
                digest: lts.digest(c),
                cycle,
                config: lts.config_json(c),
            });
        };
        let after = |i: usize| self.history.get(i).map_or(&self.current, |m| &m.from);
        for (i, m) in self.history.iter().enumerate() {
            push(after(i + 1), m.transition, m.choice, false);
        }
        if let Some(cy) = &self.cycle {
            let mut c = after(cy.start).clone();
            for &(t, k) in &cy.moves {
                c = lts.step(&c, t).expect("cycle replays")[k].clone();
                push(&c, t, k, true);
            }
        }
        TraceFile {
            header: TraceHeader {
                format: FORMAT.into(),
                version: VERSION,
                model: model_hash(self.model()),
                seed: self.seed,
                initial: lts.digest(&self.initial),
                cycle_start: self.cycle.as_ref().map(|c| c.start),
            },
            steps,
        }
    }

    /// Rebuilds a session by replaying `trace`, checking every digest.
    pub fn import(lts: Arc<Lts>, trace: &TraceFile) -> Result<Session, SimError> {
        let expected = model_hash(&lts.model);
        if trace.header.model != expected {
            return Err(SimError::ModelMismatch {
                expected,
                found: trace.header.model.clone(),
            });
        }
        let mut s = Session::with_lts(lts, trace.header.seed)?;
        if s.lts.digest(&s.initial) != trace.header.initial {
            return Err(SimError::ReplayDivergence {
                step: 0,
                reason: "initial configuration differs".into(),
            });
        }
        let diverged = |step: usize, reason: String| SimError::ReplayDivergence { step, reason };
        let mut cycle = Vec::new();
        let mut loop_from: Option<Config> = None;
        let mut c = s.initial.clone();
        for st in &trace.steps {
            let t = s
                .lts
                .parse_label(&st.transition)
                .ok_or_else(|| diverged(st.step, format!("unknown transition `{}`", st.transition)))?;
            if st.cycle {
                let start = trace
                    .header
                    .cycle_start
                    .ok_or_else(|| diverged(st.step, "cycle step without cycle_start".into()))?;
                if loop_from.is_none() {
                    if start > s.history.len() {
                        return Err(diverged(st.step, format!("cycle_start {start} beyond history")));
                    }
                    let from = s.replay_to(start)?;
                    c = from.clone();
                    loop_from = Some(from);
                }
                c = s.apply(&c, t, st.choice, st.step)?;
                cycle.push((t, st.choice));
            } else {
                if loop_from.is_some() {
                    return Err(diverged(st.step, "ordinary step after cycle steps".into()));
                }
                s.fire(t, Some(st.choice)).map_err(|e| diverged(st.step, e.to_string()))?;
                c = s.current.clone();
            }
            let d = s.lts.digest(&c);
            if d != st.digest {
                return Err(diverged(st.step, format!("digest {d}, trace has {}", st.digest)));
            }
        }
        if let Some(from) = loop_from {
            if c != from {
                return Err(diverged(trace.steps.len(), "cycle does not close".into()));
            }
            s.cycle = Some(Cycle {
                start: trace.header.cycle_start.unwrap_or(0),
                moves: cycle,
            });
        } else if trace.header.cycle_start.is_some() {
            return Err(diverged(trace.steps.len(), "cycle_start without cycle steps".into()));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elaborator::flatten_source;

    const SRC: &str = "globals v : 0..3 := 0 end
        timers t1 : 0..2 end
        event e [0, 2] when true do v :: 0 .. 3 end";

    fn lts() -> Arc<Lts> {
        Arc::new(Lts::new(flatten_source(SRC).unwrap()))
    }

    #[test]
    fn export_import_round_trip() {
        let mut s = Session::with_lts(lts(), 3).unwrap();
        s.random_walk(25).unwrap();
        let text = s.export().to_jsonl();
        assert_eq!(text.lines().count(), 26);
        let back = Session::import(lts(), &TraceFile::from_jsonl(&text).unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.export().to_jsonl(), text);
    }

    #[test]
    fn tampered_digest_is_a_divergence() {
        let mut s = Session::with_lts(lts(), 3).unwrap();
        s.random_walk(6).unwrap();
        let mut tr = s.export();
        tr.steps[4].digest = "0000000000000000".into();
        assert!(matches!(
            Session::import(lts(), &tr),
            Err(SimError::ReplayDivergence { step: 4, .. })
        ));
        let mut tr = s.export();
        tr.steps[2].choice = 9;
        assert!(matches!(
            Session::import(lts(), &tr),
            Err(SimError::ReplayDivergence { step: 2, .. })
        ));
    }

    #[test]
    fn other_model_is_rejected() {
        let s = Session::with_lts(lts(), 3).unwrap();
        let tr = s.export();
        let other = Arc::new(Lts::new(flatten_source("event e when true do skip end").unwrap()));
        assert!(matches!(Session::import(other, &tr), Err(SimError::ModelMismatch { .. })));
    }

    #[test]
    fn malformed_lines_report_their_position() {
        let s = Session::with_lts(lts(), 3).unwrap();
        let mut text = s.export().to_jsonl();
        text.push_str("{not json}\n");
        assert!(matches!(TraceFile::from_jsonl(&text), Err(SimError::Format { line: 2, .. })));
        assert!(matches!(TraceFile::from_jsonl(""), Err(SimError::Format { line: 1, .. })));
    }

    #[test]
    fn undo_all_returns_to_the_initial_configuration() {
        let mut s = Session::with_lts(lts(), 11).unwrap();
        s.random_walk(12).unwrap();
        let n = s.history().len();
        s.undo(n).unwrap();
        assert_eq!(s.current(), s.initial());
        assert_eq!(s.export().steps.len(), 0);
    }
}
