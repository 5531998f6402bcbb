//! Workload builders shared by the benchmarks.

use thematica_core::graph::{EdgeKind, NodeSpec, Position};
use thematica_core::{Corpus, NodeId, Workspace, WorkspaceId};

const WORDS: &[&str] = &[
    "index", "query", "latency", "recall", "cache", "shard", "users", "search", "ranking", "precision", "speed",
    "canvas", "theme", "evidence", "snippet", "model", "tail", "load", "build", "memory",
];

/// `n` words drawn deterministically from a fixed vocabulary.
pub fn text(seed: usize, n: usize) -> String {
    (0..n)
        .map(|i| WORDS[(seed.wrapping_mul(31) + i * i * 7 + i) % WORDS.len()])
        .collect::<Vec<_>>()
        .join(" ")
}

/// A workspace with `themes` themes of `members` evidence nodes each.
pub fn workspace(themes: usize, members: usize) -> (Workspace, Vec<NodeId>) {
    let corpus = Corpus::new();
    let mut ws = Workspace::new(WorkspaceId::from("bench"));
    let at = |i: usize| Position::new(i as f64 * 10.0, 0.0);
    let mut ids = Vec::with_capacity(themes);
    for t in 0..themes {
        let theme = ws.create_node(&corpus, NodeSpec::Theme { name: text(t, 2), position: at(t) }).unwrap();
        for m in 0..members {
            let spec = NodeSpec::Evidence { text: text(t * members + m, 12), anchor: None, position: at(m) };
            let evidence = ws.create_node(&corpus, spec).unwrap();
            ws.connect(theme, evidence, EdgeKind::Membership).unwrap();
        }
        ids.push(theme);
    }
    (ws, ids)
}
