//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use thematica_core::corpus::IngestPayload;
use thematica_core::graph::{EdgeKind, NodePatch, NodeSpec, Position};
use thematica_core::summarize::{extractive_tiers, SummaryBudgets};
use thematica_core::suggest::{suggest_theme_name, Decision, SuggestConfig};
use thematica_core::{Corpus, DocId, NodeId, Provider, Workspace, WorkspaceId};

pub const VOCAB: &[&str] = &[
    "index", "query", "latency", "recall", "cache", "shard", "users", "search", "ranking", "precision", "speed",
    "canvas", "theme", "evidence", "snippet", "model", "tail", "load", "build", "memory", "Index", "QUERY",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn words(rng: &mut impl Rng, n: usize) -> String {
    (0..n).map(|_| *VOCAB.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

pub fn at(rng: &mut impl Rng) -> Position {
    Position::new(rng.gen_range(-2000.0..2000.0), rng.gen_range(-2000.0..2000.0))
}

pub fn theme(ws: &mut Workspace, name: &str, rng: &mut impl Rng) -> NodeId {
    let position = at(rng);
    ws.create_node(&Corpus::new(), NodeSpec::Theme { name: name.into(), position }).unwrap()
}

pub fn evidence(ws: &mut Workspace, text: &str, rng: &mut impl Rng) -> NodeId {
    let position = at(rng);
    ws.create_node(
        &Corpus::new(),
        NodeSpec::Evidence {
            text: text.into(),
            anchor: None,
            position,
        },
    )
    .unwrap()
}

/// Themes with a few members each plus some unassigned evidence.
pub struct Built {
    pub ws: Workspace,
    pub themes: Vec<NodeId>,
    pub unassigned: Vec<NodeId>,
}

pub fn random_workspace(rng: &mut impl Rng, max_themes: usize, max_members: usize) -> Built {
    let mut ws = Workspace::new(WorkspaceId::from("w"));
    let n_themes = rng.gen_range(1..=max_themes);
    let mut themes = Vec::new();
    for _ in 0..n_themes {
        let n = rng.gen_range(1..=2);
        let name = words(rng, n);
        let t = theme(&mut ws, &name, rng);
        for _ in 0..rng.gen_range(0..=max_members) {
            let n = rng.gen_range(1..=6);
            let text = words(rng, n);
            let e = evidence(&mut ws, &text, rng);
            ws.connect(t, e, EdgeKind::Membership).unwrap();
        }
        themes.push(t);
    }
    let mut unassigned = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        let n = rng.gen_range(1..=6);
        let text = words(rng, n);
        unassigned.push(evidence(&mut ws, &text, rng));
    }
    Built { ws, themes, unassigned }
}

pub fn sample_corpus() -> (Corpus, DocId) {
    let mut corpus = Corpus::new();
    let payload = IngestPayload::from_texts(
        "Interview notes",
        &["Query latency spikes at peak hours.", "Recall at ten drops after reindexing."],
    );
    let doc = corpus.ingest_document(payload).unwrap().doc_id;
    (corpus, doc)
}

/// One random mutation. Errors are expected and ignored; the caller checks
/// that failures leave no trace.
pub fn random_op(ws: &mut Workspace, corpus: &Corpus, doc: &DocId, rng: &mut impl Rng) -> Result<(), String> {
    let nodes: Vec<NodeId> = ws.graph().nodes.keys().copied().collect();
    let pick = |rng: &mut dyn rand::RngCore| nodes.choose(rng).copied().unwrap_or(NodeId(1));
    let err = |e: &dyn std::fmt::Display| e.to_string();
    match rng.gen_range(0..12) {
        0 | 1 => {
            let name = words(rng, 2);
            let position = at(rng);
            ws.create_node(corpus, NodeSpec::Theme { name, position }).map(drop).map_err(|e| err(&e))
        }
        2 | 3 => {
            let (text, anchor) = if rng.gen_bool(0.3) {
                let anchor = corpus.extract_snippet(doc, 1, 0, 13).unwrap();
                (anchor.quote.clone(), Some(anchor))
            } else {
                let n = rng.gen_range(1..8);
                (words(rng, n), None)
            };
            let position = at(rng);
            ws.create_node(corpus, NodeSpec::Evidence { text, anchor, position }).map(drop).map_err(|e| err(&e))
        }
        4 => {
            let id = pick(rng);
            let patch = match rng.gen_range(0..3) {
                0 => NodePatch { position: Some(at(rng)), ..Default::default() },
                1 => NodePatch { text: Some(words(rng, 3)), ..Default::default() },
                _ => NodePatch { name: Some(words(rng, 2)), ..Default::default() },
            };
            ws.update_node(id, patch).map(drop).map_err(|e| err(&e))
        }
        5 => ws.delete_node(pick(rng)).map(drop).map_err(|e| err(&e)),
        6 | 7 => {
            let kind = if rng.gen_bool(0.6) { EdgeKind::Membership } else { EdgeKind::Hierarchy };
            let (a, b) = (pick(rng), pick(rng));
            ws.connect(a, b, kind).map(drop).map_err(|e| err(&e))
        }
        8 => {
            let edges: Vec<_> = ws.graph().edges.keys().copied().collect();
            match edges.choose(rng) {
                Some(e) => ws.disconnect(*e).map(drop).map_err(|e| err(&e)),
                None => Err("no edges".into()),
            }
        }
        9 => ws.merge_themes(pick(rng), pick(rng)).map(drop).map_err(|e| err(&e)),
        10 => match ws.graph().evidence(pick(rng)).map(|e| e.text.clone()) {
            Some(text) => {
                let tiers = extractive_tiers(&text, &SummaryBudgets::default()).unwrap();
                ws.apply_summaries(pick(rng), tiers).map(drop).map_err(|e| err(&e))
            }
            None => ws.attach_document(corpus, doc).map(drop).map_err(|e| err(&e)),
        },
        _ => {
            let provider = Provider::mock(Default::default());
            let draft = suggest_theme_name(ws, &provider, pick(rng), &SuggestConfig::default()).map_err(|e| err(&e))?;
            let id = ws.record_suggestion(draft).map_err(|e| err(&e))?;
            let decision = match rng.gen_range(0..3) {
                0 => Decision::Accept,
                1 => Decision::Reject,
                _ => return Ok(()),
            };
            ws.resolve_suggestion(id, decision).map(drop).map_err(|e| err(&e))
        }
    }
}

/// Lowercased alphanumeric runs, scanned by hand.
pub fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Cosine of raw tf x smoothed idf vectors, computed without normalizing
/// first. `docs` defines N and the document frequencies.
pub fn oracle_cosine(query: &str, doc: &str, docs: &[String]) -> f64 {
    let n = docs.len() as f64;
    let doc_sets: Vec<Vec<String>> = docs.iter().map(|d| oracle_tokens(d)).collect();
    let idf = |t: &str| {
        let df = doc_sets.iter().filter(|d| d.iter().any(|x| x == t)).count() as f64;
        ((n + 1.0) / (df + 1.0)).ln() + 1.0
    };
    let weigh = |text: &str| {
        let mut tf: HashMap<String, f64> = HashMap::new();
        for t in oracle_tokens(text) {
            *tf.entry(t).or_default() += 1.0;
        }
        tf.into_iter().map(|(t, c)| {
            let w = c * idf(&t);
            (t, w)
        }).collect::<HashMap<_, _>>()
    };
    let (q, d) = (weigh(query), weigh(doc));
    let dot: f64 = q.iter().map(|(t, w)| w * d.get(t).copied().unwrap_or(0.0)).sum();
    let nq = q.values().map(|w| w * w).sum::<f64>().sqrt();
    let nd = d.values().map(|w| w * w).sum::<f64>().sqrt();
    if nq == 0.0 || nd == 0.0 {
        0.0
    } else {
        dot / (nq * nd)
    }
}

/// Case-insensitive occurrence of `needle` as a whole word, by scanning every
/// start position.
pub fn oracle_whole_word(haystack: &str, needle: &str) -> bool {
    let h: Vec<char> = haystack.to_lowercase().chars().collect();
    let n: Vec<char> = needle.to_lowercase().chars().collect();
    if n.is_empty() || n.len() > h.len() {
        return false;
    }
    (0..=h.len() - n.len()).any(|i| {
        h[i..i + n.len()] == n[..]
            && (i == 0 || !h[i - 1].is_alphanumeric())
            && (i + n.len() == h.len() || !h[i + n.len()].is_alphanumeric())
    })
}
