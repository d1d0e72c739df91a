//! Explicit-state reachability.

use indexmap::IndexSet;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use super::{Config, Lts, StepError, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_states: usize,
    /// Worker threads for frontier expansion; 0 uses the global pool.
    pub workers: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_states: 5_000_000,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub states: usize,
    pub transitions: usize,
    pub peak_frontier: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExploreError {
    #[error("state limit exceeded after {} states and {} transitions", .0.states, .0.transitions)]
    StateLimitExceeded(Stats),
    #[error(transparent)]
    Step(#[from] StepError),
}

/// The reachable part of an LTS. Configuration 0 is the initial one; the
/// successors of `i` are `edges[offsets[i]..offsets[i + 1]]`.
#[derive(Debug, Clone)]
pub struct LtsGraph {
    pub configs: IndexSet<Config>,
    pub offsets: Vec<usize>,
    pub edges: Vec<(u32, Transition)>,
    pub stats: Stats,
}

impl LtsGraph {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn config(&self, i: usize) -> &[i32] {
        &self.configs[i]
    }

    pub fn successors(&self, i: usize) -> &[(u32, Transition)] {
        &self.edges[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Configurations without successors.
    pub fn deadlocks(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.successors(i).is_empty()).collect()
    }

    /// Nodes are configuration dumps, edges carry transition labels.
    pub fn to_json(&self, lts: &Lts) -> Value {
        let nodes: Vec<Value> = self
            .configs
            .iter()
            .enumerate()
            .map(|(i, c)| json!({"id": i, "config": lts.config_json(c)}))
            .collect();
        let mut edges = Vec::new();
        for i in 0..self.len() {
            for (t, tr) in self.successors(i) {
                edges.push(json!({"from": i, "to": t, "label": lts.label(*tr)}));
            }
        }
        json!({"nodes": nodes, "edges": edges, "stats": self.stats})
    }
}

/// Breadth-first closure from the initial configuration. Frontier levels
/// are expanded in parallel and merged in index order, so numbering and
/// edge order do not depend on the thread count.
pub fn explore(lts: &Lts, limits: Limits) -> Result<LtsGraph, ExploreError> {
    let run = || explore_inner(lts, limits);
    if limits.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(limits.workers)
            .build()
            .expect("thread pool");
        pool.install(run)
    } else {
        run()
    }
}

fn explore_inner(lts: &Lts, limits: Limits) -> Result<LtsGraph, ExploreError> {
    let mut configs: IndexSet<Config> = IndexSet::new();
    configs.insert(lts.initial()?);
    let mut offsets = vec![0];
    let mut edges: Vec<(u32, Transition)> = Vec::new();
    let mut stats = Stats::default();
    let mut lo = 0;
    while lo < configs.len() {
        let hi = configs.len();
        stats.peak_frontier = stats.peak_frontier.max(hi - lo);
        stats.depth += 1;
        let succ: Vec<Result<Vec<(Transition, Config)>, StepError>> = (lo..hi)
            .into_par_iter()
            .map(|i| lts.successors(&configs[i]))
            .collect();
        for s in succ {
            for (t, c) in s? {
                let (id, _) = configs.insert_full(c);
                edges.push((id as u32, t));
            }
            offsets.push(edges.len());
            stats.states = configs.len();
            stats.transitions = edges.len();
            if configs.len() > limits.max_states {
                return Err(ExploreError::StateLimitExceeded(stats));
            }
        }
        lo = hi;
    }
    stats.states = configs.len();
    stats.transitions = edges.len();
    Ok(LtsGraph {
        configs,
        offsets,
        edges,
        stats,
    })
}
