//! Workspace state, the append-only event log, persistence and export.
//!
//! Every mutation is a [`Workspace::commit`] of a list of [`Change`]s. The
//! event stores the exact inverse, so undo is a single atomic replay and the
//! revision always equals the number of events in the log.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::{AnchorVerdict, Corpus};
use crate::graph::{codebook_projection, CodebookView, Graph, GraphChange, GraphDelta, GraphError};
use crate::ids::{DocId, EdgeId, NodeId, SuggestionId, WorkspaceId};
use crate::suggest::Suggestion;

pub const WORKSPACE_SCHEMA: &str = "workspace/1";

/// Next free ids. Part of the state so that undo restores them too.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdCounters {
    pub next_node: u64,
    pub next_edge: u64,
    pub next_suggestion: u64,
}

impl Default for IdCounters {
    fn default() -> Self {
        Self {
            next_node: 1,
            next_edge: 1,
            next_suggestion: 1,
        }
    }
}

impl IdCounters {
    pub fn mint_node(&mut self) -> NodeId {
        let id = NodeId(self.next_node);
        self.next_node += 1;
        id
    }

    pub fn mint_edge(&mut self) -> EdgeId {
        let id = EdgeId(self.next_edge);
        self.next_edge += 1;
        id
    }

    pub fn mint_suggestion(&mut self) -> SuggestionId {
        let id = SuggestionId(self.next_suggestion);
        self.next_suggestion += 1;
        id
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Change {
    Graph(GraphChange),
    PutSuggestion {
        before: Option<Box<Suggestion>>,
        after: Option<Box<Suggestion>>,
    },
    AttachDocument(DocId),
    DetachDocument(DocId),
}

impl Change {
    fn inverse(&self) -> Change {
        match self {
            Change::Graph(g) => Change::Graph(g.inverse()),
            Change::PutSuggestion { before, after } => Change::PutSuggestion {
                before: after.clone(),
                after: before.clone(),
            },
            Change::AttachDocument(d) => Change::DetachDocument(d.clone()),
            Change::DetachDocument(d) => Change::AttachDocument(d.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceEvent {
    pub seq: u64,
    pub op_name: String,
    pub payload: Value,
    pub inverse: Vec<Change>,
    pub counters_before: IdCounters,
    pub timestamp: u64,
}

impl WorkspaceEvent {
    /// Graph part of the inverse.
    pub fn inverse_graph_delta(&self) -> GraphDelta {
        GraphDelta(
            self.inverse
                .iter()
                .filter_map(|c| match c {
                    Change::Graph(g) => Some(g.clone()),
                    _ => None,
                })
                .collect(),
        )
    }
}

/// Source of event timestamps. The logical clock uses the event sequence
/// number and keeps replays byte-identical.
#[derive(Clone, Copy, Debug, Default)]
pub enum Clock {
    #[default]
    Logical,
    /// Milliseconds since the Unix epoch.
    System,
}

impl Clock {
    fn now(&self, seq: u64) -> u64 {
        match self {
            Clock::Logical => seq,
            Clock::System => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or_default(),
        }
    }
}

// The clock is runtime configuration, not state.
impl PartialEq for Clock {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    workspace_id: WorkspaceId,
    revision: u64,
    documents: BTreeSet<DocId>,
    graph: Graph,
    suggestions: BTreeMap<SuggestionId, Suggestion>,
    event_log: Vec<WorkspaceEvent>,
    counters: IdCounters,
    #[serde(skip)]
    clock: Clock,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown workspace schema `{0}`")]
    UnknownSchemaVersion(String),
    #[error("integrity violation `{name}`: {detail}")]
    IntegrityViolation { name: &'static str, detail: String },
    #[error("nothing to undo")]
    NothingToUndo,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::Io(_) => "io_failure",
            StoreError::UnknownSchemaVersion(_) => "unknown_schema_version",
            StoreError::IntegrityViolation { .. } => "integrity_violation",
            StoreError::NothingToUndo => "nothing_to_undo",
            StoreError::Graph(g) => g.code(),
        }
    }

    fn integrity(name: &'static str, detail: impl Into<String>) -> Self {
        StoreError::IntegrityViolation {
            name,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UndoOutcome {
    pub revision: u64,
    /// Graph changes the undo applied.
    pub delta: GraphDelta,
}

impl Workspace {
    pub fn new(workspace_id: WorkspaceId) -> Self {
        Self {
            workspace_id,
            revision: 0,
            documents: BTreeSet::new(),
            graph: Graph::default(),
            suggestions: BTreeMap::new(),
            event_log: Vec::new(),
            counters: IdCounters::default(),
            clock: Clock::Logical,
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn set_clock(&mut self, clock: Clock) {
        self.clock = clock;
    }

    pub fn workspace_id(&self) -> &WorkspaceId {
        &self.workspace_id
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn documents(&self) -> &BTreeSet<DocId> {
        &self.documents
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn suggestions(&self) -> &BTreeMap<SuggestionId, Suggestion> {
        &self.suggestions
    }

    pub fn suggestion(&self, id: SuggestionId) -> Option<&Suggestion> {
        self.suggestions.get(&id)
    }

    pub fn event_log(&self) -> &[WorkspaceEvent] {
        &self.event_log
    }

    pub fn counters(&self) -> IdCounters {
        self.counters
    }

    /// Applies `changes` atomically and appends one event holding their
    /// inverse. `counters` become the new id counters.
    pub(crate) fn commit(
        &mut self,
        op_name: &str,
        payload: Value,
        changes: Vec<Change>,
        counters: IdCounters,
    ) -> Result<u64, GraphError> {
        self.apply_changes(&changes)?;
        let seq = self.revision + 1;
        self.event_log.push(WorkspaceEvent {
            seq,
            op_name: op_name.to_string(),
            payload,
            inverse: changes.iter().rev().map(Change::inverse).collect(),
            counters_before: self.counters,
            timestamp: self.clock.now(seq),
        });
        self.counters = counters;
        self.revision = seq;
        Ok(seq)
    }

    fn apply_changes(&mut self, changes: &[Change]) -> Result<(), GraphError> {
        for (i, change) in changes.iter().enumerate() {
            if let Err(e) = self.apply_change(change) {
                for applied in changes[..i].iter().rev() {
                    self.apply_change(&applied.inverse())
                        .expect("inverse of an applied change applies");
                }
                return Err(e);
            }
        }
        Ok(())
    }

    fn apply_change(&mut self, change: &Change) -> Result<(), GraphError> {
        match change {
            Change::Graph(g) => self.graph.apply_change(g),
            Change::PutSuggestion { before, after } => {
                let id = before
                    .as_ref()
                    .or(after.as_ref())
                    .map(|s| s.suggestion_id)
                    .ok_or_else(|| GraphError::DeltaConflict("empty suggestion change".into()))?;
                if self.suggestions.get(&id) != before.as_deref() {
                    return Err(GraphError::DeltaConflict(format!("suggestion `{id}` changed")));
                }
                match after {
                    Some(s) => self.suggestions.insert(id, (**s).clone()),
                    None => self.suggestions.remove(&id),
                };
                Ok(())
            }
            Change::AttachDocument(doc) => {
                if !self.documents.insert(doc.clone()) {
                    return Err(GraphError::DeltaConflict(format!("document `{doc}` already attached")));
                }
                Ok(())
            }
            Change::DetachDocument(doc) => {
                if !self.documents.remove(doc) {
                    return Err(GraphError::DeltaConflict(format!("document `{doc}` not attached")));
                }
                Ok(())
            }
        }
    }

    /// Links a corpus document to the workspace. Returns `None` when it is
    /// already attached, in which case nothing is logged.
    pub fn attach_document(&mut self, corpus: &Corpus, doc_id: &DocId) -> Result<Option<u64>, StoreError> {
        if !corpus.contains(doc_id) {
            return Err(StoreError::integrity("documents_known", format!("`{doc_id}` is not in the corpus")));
        }
        if self.documents.contains(doc_id) {
            return Ok(None);
        }
        let counters = self.counters;
        let rev = self.commit(
            "attach_document",
            json!({"doc_id": doc_id}),
            vec![Change::AttachDocument(doc_id.clone())],
            counters,
        )?;
        Ok(Some(rev))
    }

    /// Reverts the most recent event. There is no redo.
    pub fn undo(&mut self) -> Result<UndoOutcome, StoreError> {
        let event = self.event_log.pop().ok_or(StoreError::NothingToUndo)?;
        if let Err(e) = self.apply_changes(&event.inverse) {
            let detail = format!("event {} cannot be reverted: {e}", event.seq);
            self.event_log.push(event);
            return Err(StoreError::integrity("event_log_replay", detail));
        }
        self.counters = event.counters_before;
        self.revision -= 1;
        Ok(UndoOutcome {
            revision: self.revision,
            delta: event.inverse_graph_delta(),
        })
    }

    /// Invariants checked on load, including that the whole event log can be
    /// unwound back to an empty workspace.
    pub fn check_integrity(&self, corpus: &Corpus) -> Result<(), StoreError> {
        if self.revision != self.event_log.len() as u64 {
            return Err(StoreError::integrity(
                "revision_count",
                format!("revision {} with {} events", self.revision, self.event_log.len()),
            ));
        }
        for (i, event) in self.event_log.iter().enumerate() {
            if event.seq != i as u64 + 1 {
                return Err(StoreError::integrity("event_sequence", format!("event {i} has seq {}", event.seq)));
            }
        }
        self.graph
            .check_integrity()
            .map_err(|name| StoreError::integrity(name, "graph invariant failed"))?;
        for doc in &self.documents {
            if !corpus.contains(doc) {
                return Err(StoreError::integrity("documents_known", format!("`{doc}` missing from corpus")));
            }
        }
        for evidence in self.graph.evidence_nodes() {
            if let Some(anchor) = &evidence.anchor {
                if corpus.verify_anchor(anchor) != AnchorVerdict::Valid {
                    return Err(StoreError::integrity(
                        "anchor_verification",
                        format!("anchor of `{}` does not verify", evidence.node_id),
                    ));
                }
            }
        }
        let c = self.counters;
        let ids_ok = self.graph.nodes.keys().all(|id| id.0 < c.next_node)
            && self.graph.edges.keys().all(|id| id.0 < c.next_edge)
            && self.suggestions.keys().all(|id| id.0 < c.next_suggestion);
        if !ids_ok {
            return Err(StoreError::integrity("id_counters", "an id is not below its counter"));
        }
        for (id, s) in &self.suggestions {
            if s.suggestion_id != *id || s.basis.is_empty() {
                return Err(StoreError::integrity("suggestions", format!("suggestion `{id}` is malformed")));
            }
        }
        let mut replay = self.clone();
        while !replay.event_log.is_empty() {
            replay.undo()?;
        }
        let empty = Workspace::new(self.workspace_id.clone());
        if replay != empty {
            return Err(StoreError::integrity("event_log_replay", "undoing every event does not reach the empty workspace"));
        }
        Ok(())
    }
}

/// Canonical bytes: pretty JSON with every object's keys sorted.
pub fn to_canonical_bytes(workspace: &Workspace) -> Vec<u8> {
    let file = json!({"schema": WORKSPACE_SCHEMA, "workspace": workspace});
    canonical_json(&file)
}

/// Canonical bytes of the graph alone.
pub fn graph_bytes(workspace: &Workspace) -> Vec<u8> {
    canonical_json(&serde_json::to_value(workspace.graph()).expect("graph serializes"))
}

pub fn canonical_json(value: &Value) -> Vec<u8> {
    // serde_json's default map is ordered, so a round trip through Value sorts keys
    let sorted: Value = serde_json::from_value(value.clone()).expect("value round-trips");
    let mut out = serde_json::to_vec_pretty(&sorted).expect("value serializes");
    out.push(b'\n');
    out
}

pub fn save_workspace(workspace: &Workspace, destination: &Path) -> Result<(), StoreError> {
    std::fs::write(destination, to_canonical_bytes(workspace))?;
    Ok(())
}

pub fn from_bytes(bytes: &[u8], corpus: &Corpus) -> Result<Workspace, StoreError> {
    let file: Value = serde_json::from_slice(bytes)
        .map_err(|e| StoreError::integrity("file_format", format!("not JSON: {e}")))?;
    let schema = file.get("schema").and_then(Value::as_str).unwrap_or_default();
    if schema != WORKSPACE_SCHEMA {
        return Err(StoreError::UnknownSchemaVersion(schema.to_string()));
    }
    let body = file
        .get("workspace")
        .cloned()
        .ok_or_else(|| StoreError::integrity("file_format", "missing `workspace`"))?;
    let workspace: Workspace =
        serde_json::from_value(body).map_err(|e| StoreError::integrity("file_format", e.to_string()))?;
    workspace.check_integrity(corpus)?;
    Ok(workspace)
}

pub fn load_workspace(source: &Path, corpus: &Corpus) -> Result<Workspace, StoreError> {
    let bytes = std::fs::read(source)?;
    from_bytes(&bytes, corpus)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Markdown,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(ExportFormat::Markdown),
            "json" => Ok(ExportFormat::Json),
            other => Err(format!("unknown export format `{other}`")),
        }
    }
}

pub const CODEBOOK_HEADER: &str = "# Codebook";

pub fn export_codebook(workspace: &Workspace, corpus: &Corpus, format: ExportFormat) -> Vec<u8> {
    let view = codebook_projection(workspace.graph());
    match format {
        ExportFormat::Markdown => render_markdown(&view, workspace.graph(), corpus).into_bytes(),
        ExportFormat::Json => canonical_json(&json!({"schema": "codebook/1", "codebook": view})),
    }
}

fn render_markdown(view: &CodebookView, graph: &Graph, corpus: &Corpus) -> String {
    let mut out = String::new();
    out.push_str(CODEBOOK_HEADER);
    out.push('\n');
    for entry in &view.entries {
        let _ = write!(out, "\n## {}\n", entry.name);
        if let Some(description) = &entry.description {
            let _ = write!(out, "\n{}\n", description.text);
            if !description.keyword_links.is_empty() {
                let keywords: Vec<&str> = description.keyword_links.iter().map(|k| k.keyword.as_str()).collect();
                let _ = write!(out, "\nKeywords: {}\n", keywords.join(", "));
            }
        }
        if !entry.child_theme_ids.is_empty() {
            let names: Vec<&str> = entry
                .child_theme_ids
                .iter()
                .filter_map(|id| graph.theme(*id))
                .map(|t| t.name.as_str())
                .collect();
            let _ = write!(out, "\nSub-themes: {}\n", names.join(", "));
        }
        for evidence in &entry.shown_evidence {
            out.push('\n');
            for line in evidence.text.lines() {
                let _ = writeln!(out, "> {line}");
            }
            if let Some(anchor) = &evidence.anchor {
                let title = corpus
                    .get(&anchor.doc_id)
                    .map(|d| d.title.as_str())
                    .unwrap_or(anchor.doc_id.0.as_str());
                let _ = writeln!(out, ">\n> source: {title}, p.{}", anchor.page_no);
            }
        }
        let hidden = entry.total_evidence_count - entry.shown_evidence.len();
        if hidden > 0 {
            let _ = write!(out, "\n+{hidden} more\n");
        }
    }
    out
}
