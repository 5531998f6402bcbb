//! The spatial sensemaking graph.
//!
//! Evidence nodes hold excerpts (anchored) or free annotations; theme nodes
//! name clusters. Membership edges run theme to evidence, hierarchy edges
//! theme to theme and always form a forest. Every change goes through
//! [`GraphChange`] so that it can be previewed, applied atomically and undone.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::json;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{Anchor, AnchorVerdict, Corpus};
use crate::ids::{EdgeId, NodeId};
use crate::store::{Change, Workspace};
use crate::suggest::GroundedDescription;
use crate::summarize::SummaryTiers;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CreatedBy {
    Human,
    AiAccepted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceNode {
    pub node_id: NodeId,
    pub anchor: Option<Anchor>,
    pub text: String,
    pub summaries: Option<SummaryTiers>,
    pub position: Position,
    pub created_by: CreatedBy,
    pub created_at: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThemeNode {
    pub node_id: NodeId,
    pub name: String,
    pub description: Option<GroundedDescription>,
    pub position: Position,
    pub created_by: CreatedBy,
    pub created_at: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Evidence(EvidenceNode),
    Theme(ThemeNode),
}

impl Node {
    pub fn id(&self) -> NodeId {
        match self {
            Node::Evidence(e) => e.node_id,
            Node::Theme(t) => t.node_id,
        }
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            Node::Evidence(_) => NodeKind::Evidence,
            Node::Theme(_) => NodeKind::Theme,
        }
    }

    pub fn position(&self) -> Position {
        match self {
            Node::Evidence(e) => e.position,
            Node::Theme(t) => t.position,
        }
    }

    pub fn created_at(&self) -> u64 {
        match self {
            Node::Evidence(e) => e.created_at,
            Node::Theme(t) => t.created_at,
        }
    }

    pub fn as_evidence(&self) -> Option<&EvidenceNode> {
        match self {
            Node::Evidence(e) => Some(e),
            Node::Theme(_) => None,
        }
    }

    pub fn as_theme(&self) -> Option<&ThemeNode> {
        match self {
            Node::Theme(t) => Some(t),
            Node::Evidence(_) => None,
        }
    }

    fn check(&self) -> Result<(), GraphError> {
        match self {
            Node::Evidence(e) => {
                if e.text.is_empty() {
                    return Err(GraphError::EmptyText);
                }
                if let Some(anchor) = &e.anchor {
                    if anchor.quote != e.text {
                        return Err(GraphError::InvalidAnchor("quote differs from node text".into()));
                    }
                }
                if !e.position.is_finite() {
                    return Err(GraphError::InvalidPosition);
                }
            }
            Node::Theme(t) => {
                if t.name.trim().is_empty() {
                    return Err(GraphError::EmptyText);
                }
                if !t.position.is_finite() {
                    return Err(GraphError::InvalidPosition);
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Evidence,
    Theme,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// theme -> evidence
    Membership,
    /// parent theme -> child theme
    Hierarchy,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub edge_id: EdgeId,
    pub from: NodeId,
    pub to: NodeId,
    pub kind: EdgeKind,
    pub created_by: CreatedBy,
    pub created_at: u64,
}

/// One primitive, fully self-describing change. Removals and updates carry
/// the prior payload so that every change can be inverted exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum GraphChange {
    AddNode { node: Node },
    RemoveNode { node: Node },
    UpdateNode { before: Node, after: Node },
    AddEdge { edge: Edge },
    RemoveEdge { edge: Edge },
}

impl GraphChange {
    pub fn inverse(&self) -> GraphChange {
        match self.clone() {
            GraphChange::AddNode { node } => GraphChange::RemoveNode { node },
            GraphChange::RemoveNode { node } => GraphChange::AddNode { node },
            GraphChange::UpdateNode { before, after } => GraphChange::UpdateNode {
                before: after,
                after: before,
            },
            GraphChange::AddEdge { edge } => GraphChange::RemoveEdge { edge },
            GraphChange::RemoveEdge { edge } => GraphChange::AddEdge { edge },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GraphDelta(pub Vec<GraphChange>);

impl GraphDelta {
    pub fn inverse(&self) -> GraphDelta {
        GraphDelta(self.0.iter().rev().map(GraphChange::inverse).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn changes(&self) -> &[GraphChange] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("unknown edge `{0}`")]
    UnknownEdge(EdgeId),
    #[error("endpoint kinds do not match the edge kind: {0}")]
    KindMismatch(String),
    #[error("hierarchy edge would create a cycle")]
    CycleDetected,
    #[error("edge already exists")]
    DuplicateEdge,
    #[error("theme `{0}` already has a parent")]
    SecondParent(NodeId),
    #[error("survivor and absorbed theme are the same node")]
    SameNode,
    #[error("text must not be empty")]
    EmptyText,
    #[error("invalid anchor: {0}")]
    InvalidAnchor(String),
    #[error("zoom must be a positive number")]
    NonpositiveZoom,
    #[error("positions must be finite")]
    InvalidPosition,
    #[error("invalid patch: {0}")]
    InvalidPatch(String),
    #[error("change does not match the current graph: {0}")]
    DeltaConflict(String),
}

impl GraphError {
    pub fn code(&self) -> &'static str {
        match self {
            GraphError::UnknownNode(_) => "unknown_node",
            GraphError::UnknownEdge(_) => "unknown_edge",
            GraphError::KindMismatch(_) => "kind_mismatch",
            GraphError::CycleDetected => "cycle_detected",
            GraphError::DuplicateEdge => "duplicate_edge",
            GraphError::SecondParent(_) => "second_parent",
            GraphError::SameNode => "same_node",
            GraphError::EmptyText => "empty_text",
            GraphError::InvalidAnchor(_) => "invalid_anchor",
            GraphError::NonpositiveZoom => "nonpositive_zoom",
            GraphError::InvalidPosition => "invalid_position",
            GraphError::InvalidPatch(_) => "invalid_patch",
            GraphError::DeltaConflict(_) => "delta_conflict",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub nodes: BTreeMap<NodeId, Node>,
    pub edges: BTreeMap<EdgeId, Edge>,
}

impl Graph {
    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn evidence(&self, id: NodeId) -> Option<&EvidenceNode> {
        self.nodes.get(&id).and_then(Node::as_evidence)
    }

    pub fn theme(&self, id: NodeId) -> Option<&ThemeNode> {
        self.nodes.get(&id).and_then(Node::as_theme)
    }

    /// Themes in ascending id order.
    pub fn themes(&self) -> impl Iterator<Item = &ThemeNode> {
        self.nodes.values().filter_map(Node::as_theme)
    }

    pub fn evidence_nodes(&self) -> impl Iterator<Item = &EvidenceNode> {
        self.nodes.values().filter_map(Node::as_evidence)
    }

    pub fn membership_edges(&self, theme: NodeId) -> impl Iterator<Item = &Edge> {
        self.edges
            .values()
            .filter(move |e| e.kind == EdgeKind::Membership && e.from == theme)
    }

    /// Direct member evidence of `theme`, in ascending node id order.
    pub fn members(&self, theme: NodeId) -> Vec<&EvidenceNode> {
        let ids: BTreeSet<NodeId> = self.membership_edges(theme).map(|e| e.to).collect();
        ids.into_iter().filter_map(|id| self.evidence(id)).collect()
    }

    pub fn is_assigned(&self, evidence: NodeId) -> bool {
        self.edges
            .values()
            .any(|e| e.kind == EdgeKind::Membership && e.to == evidence)
    }

    pub fn parent_of(&self, theme: NodeId) -> Option<NodeId> {
        self.edges
            .values()
            .find(|e| e.kind == EdgeKind::Hierarchy && e.to == theme)
            .map(|e| e.from)
    }

    pub fn children_of(&self, theme: NodeId) -> Vec<NodeId> {
        let ids: BTreeSet<NodeId> = self
            .edges
            .values()
            .filter(|e| e.kind == EdgeKind::Hierarchy && e.from == theme)
            .map(|e| e.to)
            .collect();
        ids.into_iter().collect()
    }

    pub fn incident_edges(&self, node: NodeId) -> Vec<&Edge> {
        self.edges.values().filter(|e| e.from == node || e.to == node).collect()
    }

    pub fn find_edge(&self, from: NodeId, to: NodeId, kind: EdgeKind) -> Option<&Edge> {
        self.edges
            .values()
            .find(|e| e.from == from && e.to == to && e.kind == kind)
    }

    /// Endpoint and shape rules for a new edge.
    pub fn check_new_edge(&self, from: NodeId, to: NodeId, kind: EdgeKind) -> Result<(), GraphError> {
        let from_node = self.nodes.get(&from).ok_or(GraphError::UnknownNode(from))?;
        let to_node = self.nodes.get(&to).ok_or(GraphError::UnknownNode(to))?;
        if from_node.kind() != NodeKind::Theme {
            return Err(GraphError::KindMismatch(format!("`{from}` is not a theme")));
        }
        match kind {
            EdgeKind::Membership => {
                if to_node.kind() != NodeKind::Evidence {
                    return Err(GraphError::KindMismatch(format!(
                        "membership target `{to}` is not an evidence node"
                    )));
                }
                if self.find_edge(from, to, kind).is_some() {
                    return Err(GraphError::DuplicateEdge);
                }
            }
            EdgeKind::Hierarchy => {
                if to_node.kind() != NodeKind::Theme {
                    return Err(GraphError::KindMismatch(format!("hierarchy target `{to}` is not a theme")));
                }
                if self.find_edge(from, to, kind).is_some() {
                    return Err(GraphError::DuplicateEdge);
                }
                if from == to || self.ancestors(from).contains(&to) {
                    return Err(GraphError::CycleDetected);
                }
                if self.parent_of(to).is_some() {
                    return Err(GraphError::SecondParent(to));
                }
            }
        }
        Ok(())
    }

    fn ancestors(&self, theme: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut current = theme;
        while let Some(parent) = self.parent_of(current) {
            if out.contains(&parent) {
                break; // only reachable on corrupted input
            }
            out.push(parent);
            current = parent;
        }
        out
    }

    pub fn apply_change(&mut self, change: &GraphChange) -> Result<(), GraphError> {
        match change {
            GraphChange::AddNode { node } => {
                node.check()?;
                if self.nodes.contains_key(&node.id()) {
                    return Err(GraphError::DeltaConflict(format!("node `{}` already exists", node.id())));
                }
                self.nodes.insert(node.id(), node.clone());
            }
            GraphChange::RemoveNode { node } => {
                let id = node.id();
                match self.nodes.get(&id) {
                    None => return Err(GraphError::UnknownNode(id)),
                    Some(current) if current != node => {
                        return Err(GraphError::DeltaConflict(format!("node `{id}` differs from removal payload")))
                    }
                    Some(_) => {}
                }
                if !self.incident_edges(id).is_empty() {
                    return Err(GraphError::DeltaConflict(format!("node `{id}` still has edges")));
                }
                self.nodes.remove(&id);
            }
            GraphChange::UpdateNode { before, after } => {
                let id = before.id();
                if after.id() != id || after.kind() != before.kind() {
                    return Err(GraphError::DeltaConflict("update changes node identity".into()));
                }
                match self.nodes.get(&id) {
                    None => return Err(GraphError::UnknownNode(id)),
                    Some(current) if current != before => {
                        return Err(GraphError::DeltaConflict(format!("node `{id}` changed since the delta was planned")))
                    }
                    Some(_) => {}
                }
                after.check()?;
                self.nodes.insert(id, after.clone());
            }
            GraphChange::AddEdge { edge } => {
                if self.edges.contains_key(&edge.edge_id) {
                    return Err(GraphError::DeltaConflict(format!("edge `{}` already exists", edge.edge_id)));
                }
                self.check_new_edge(edge.from, edge.to, edge.kind)?;
                self.edges.insert(edge.edge_id, edge.clone());
            }
            GraphChange::RemoveEdge { edge } => match self.edges.get(&edge.edge_id) {
                None => return Err(GraphError::UnknownEdge(edge.edge_id)),
                Some(current) if current != edge => {
                    return Err(GraphError::DeltaConflict(format!(
                        "edge `{}` differs from removal payload",
                        edge.edge_id
                    )))
                }
                Some(_) => {
                    self.edges.remove(&edge.edge_id);
                }
            },
        }
        Ok(())
    }

    /// Applies every change or none.
    pub fn apply(&mut self, delta: &GraphDelta) -> Result<(), GraphError> {
        for (i, change) in delta.0.iter().enumerate() {
            if let Err(e) = self.apply_change(change) {
                for applied in delta.0[..i].iter().rev() {
                    self.apply_change(&applied.inverse())
                        .expect("inverse of an applied change applies");
                }
                return Err(e);
            }
        }
        Ok(())
    }

    /// Structural invariants, returning the name of the first one violated.
    pub fn check_integrity(&self) -> Result<(), &'static str> {
        for (id, node) in &self.nodes {
            if node.id() != *id {
                return Err("node_ids");
            }
            if node.check().is_err() {
                return Err("node_fields");
            }
            if let Node::Evidence(e) = node {
                if e.anchor.as_ref().is_some_and(|a| a.quote != e.text) {
                    return Err("anchor_quote");
                }
            }
        }
        let mut membership = BTreeSet::new();
        let mut parents: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        for (id, edge) in &self.edges {
            if edge.edge_id != *id {
                return Err("edge_ids");
            }
            let (Some(from), Some(to)) = (self.nodes.get(&edge.from), self.nodes.get(&edge.to)) else {
                return Err("edge_endpoints");
            };
            let expected_to = match edge.kind {
                EdgeKind::Membership => NodeKind::Evidence,
                EdgeKind::Hierarchy => NodeKind::Theme,
            };
            if from.kind() != NodeKind::Theme || to.kind() != expected_to {
                return Err("edge_kinds");
            }
            match edge.kind {
                EdgeKind::Membership => {
                    if !membership.insert((edge.from, edge.to)) {
                        return Err("membership_unique");
                    }
                }
                EdgeKind::Hierarchy => {
                    if parents.insert(edge.to, edge.from).is_some() {
                        return Err("hierarchy_forest");
                    }
                }
            }
        }
        // every parent chain must terminate
        for start in parents.keys() {
            let mut seen = BTreeSet::from([*start]);
            let mut current = *start;
            while let Some(parent) = parents.get(&current) {
                if !seen.insert(*parent) {
                    return Err("hierarchy_forest");
                }
                current = *parent;
            }
        }
        Ok(())
    }
}

/// Semantic-zoom detail level, ordered `Tiny < Short < Medium < Full`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetailTier {
    Tiny,
    Short,
    Medium,
    Full,
}

/// Lower zoom bounds of the full, medium and short evidence tiers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoomThresholds {
    pub full: f64,
    pub medium: f64,
    pub short: f64,
}

impl Default for ZoomThresholds {
    fn default() -> Self {
        Self {
            full: 0.75,
            medium: 0.5,
            short: 0.25,
        }
    }
}

impl ZoomThresholds {
    pub fn validate(&self) -> Result<(), String> {
        let ordered = self.full > self.medium && self.medium > self.short && self.short > 0.0;
        if ordered && self.full.is_finite() {
            Ok(())
        } else {
            Err(format!("thresholds must satisfy full > medium > short > 0, got {self:?}"))
        }
    }

    pub fn tier_for_zoom(&self, zoom: f64, kind: NodeKind) -> Result<DetailTier, GraphError> {
        if zoom.is_nan() || zoom <= 0.0 {
            return Err(GraphError::NonpositiveZoom);
        }
        if kind == NodeKind::Theme {
            return Ok(DetailTier::Full);
        }
        Ok(if zoom >= self.full {
            DetailTier::Full
        } else if zoom >= self.medium {
            DetailTier::Medium
        } else if zoom >= self.short {
            DetailTier::Short
        } else {
            DetailTier::Tiny
        })
    }
}

/// Tier under the default threshold table.
pub fn tier_for_zoom(zoom: f64, kind: NodeKind) -> Result<DetailTier, GraphError> {
    ZoomThresholds::default().tier_for_zoom(zoom, kind)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSnapshot {
    pub node_id: NodeId,
    pub text: String,
    pub anchor: Option<Anchor>,
    pub created_by: CreatedBy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodebookEntry {
    pub theme_id: NodeId,
    pub name: String,
    pub description: Option<GroundedDescription>,
    pub shown_evidence: Vec<EvidenceSnapshot>,
    pub total_evidence_count: usize,
    pub child_theme_ids: Vec<NodeId>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CodebookView {
    pub entries: Vec<CodebookEntry>,
}

pub const CODEBOOK_EVIDENCE_LIMIT: usize = 2;

/// Read-only codebook: themes by creation order, each with its two
/// earliest-linked members (ties by node id).
pub fn codebook_projection(graph: &Graph) -> CodebookView {
    let mut themes: Vec<&ThemeNode> = graph.themes().collect();
    themes.sort_by_key(|t| (t.created_at, t.node_id));
    let entries = themes
        .into_iter()
        .map(|theme| {
            let mut links: Vec<&Edge> = graph.membership_edges(theme.node_id).collect();
            links.sort_by_key(|e| (e.created_at, e.to));
            let shown_evidence = links
                .iter()
                .take(CODEBOOK_EVIDENCE_LIMIT)
                .filter_map(|e| graph.evidence(e.to))
                .map(|e| EvidenceSnapshot {
                    node_id: e.node_id,
                    text: e.text.clone(),
                    anchor: e.anchor.clone(),
                    created_by: e.created_by,
                })
                .collect();
            CodebookEntry {
                theme_id: theme.node_id,
                name: theme.name.clone(),
                description: theme.description.clone(),
                shown_evidence,
                total_evidence_count: links.len(),
                child_theme_ids: graph.children_of(theme.node_id),
            }
        })
        .collect();
    CodebookView { entries }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeSpec {
    Evidence {
        text: String,
        #[serde(default)]
        anchor: Option<Anchor>,
        position: Position,
    },
    Theme {
        name: String,
        position: Position,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodePatch {
    #[serde(default)]
    pub position: Option<Position>,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub name: Option<String>,
}

fn graph_changes(delta: &GraphDelta) -> Vec<Change> {
    delta.0.iter().cloned().map(Change::Graph).collect()
}

impl Workspace {
    pub fn create_node(&mut self, corpus: &Corpus, spec: NodeSpec) -> Result<NodeId, GraphError> {
        let mut counters = self.counters();
        let node_id = counters.mint_node();
        let created_at = self.revision() + 1;
        let (node, payload) = match spec {
            NodeSpec::Evidence { text, anchor, position } => {
                let text: String = text.nfc().collect();
                if text.is_empty() {
                    return Err(GraphError::EmptyText);
                }
                if let Some(anchor) = &anchor {
                    match corpus.verify_anchor(anchor) {
                        AnchorVerdict::Valid => {}
                        verdict => {
                            return Err(GraphError::InvalidAnchor(format!(
                                "anchor does not verify against its source ({verdict:?})"
                            )))
                        }
                    }
                    if anchor.quote != text {
                        return Err(GraphError::InvalidAnchor("quote differs from node text".into()));
                    }
                }
                let payload = json!({"type": "evidence", "node_id": node_id, "anchored": anchor.is_some()});
                let node = Node::Evidence(EvidenceNode {
                    node_id,
                    anchor,
                    text,
                    summaries: None,
                    position,
                    created_by: CreatedBy::Human,
                    created_at,
                });
                (node, payload)
            }
            NodeSpec::Theme { name, position } => {
                let name: String = name.nfc().collect();
                if name.trim().is_empty() {
                    return Err(GraphError::EmptyText);
                }
                let payload = json!({"type": "theme", "node_id": node_id});
                let node = Node::Theme(ThemeNode {
                    node_id,
                    name,
                    description: None,
                    position,
                    created_by: CreatedBy::Human,
                    created_at,
                });
                (node, payload)
            }
        };
        self.commit(
            "create_node",
            payload,
            vec![Change::Graph(GraphChange::AddNode { node })],
            counters,
        )?;
        Ok(node_id)
    }

    /// Editing an anchored excerpt's text detaches the anchor; any text edit
    /// clears the node's summaries.
    pub fn update_node(&mut self, node_id: NodeId, patch: NodePatch) -> Result<u64, GraphError> {
        let before = self.graph().node(node_id).ok_or(GraphError::UnknownNode(node_id))?.clone();
        let mut after = before.clone();
        match &mut after {
            Node::Evidence(e) => {
                if patch.name.is_some() {
                    return Err(GraphError::InvalidPatch("evidence nodes have no name".into()));
                }
                if let Some(text) = &patch.text {
                    let text: String = text.nfc().collect();
                    if text.is_empty() {
                        return Err(GraphError::EmptyText);
                    }
                    if text != e.text {
                        e.text = text;
                        e.anchor = None;
                        e.summaries = None;
                    }
                }
                if let Some(p) = patch.position {
                    e.position = p;
                }
            }
            Node::Theme(t) => {
                if patch.text.is_some() {
                    return Err(GraphError::InvalidPatch("theme nodes have no text; patch `name`".into()));
                }
                if let Some(name) = &patch.name {
                    let name: String = name.nfc().collect();
                    if name.trim().is_empty() {
                        return Err(GraphError::EmptyText);
                    }
                    t.name = name;
                }
                if let Some(p) = patch.position {
                    t.position = p;
                }
            }
        }
        let changes = if after == before {
            Vec::new()
        } else {
            vec![Change::Graph(GraphChange::UpdateNode { before, after })]
        };
        let counters = self.counters();
        self.commit("update_node", json!({"node_id": node_id, "patch": patch}), changes, counters)
    }

    /// Removes the node and its incident edges. Members and sub-themes of a
    /// deleted theme survive, detached.
    pub fn delete_node(&mut self, node_id: NodeId) -> Result<GraphDelta, GraphError> {
        let node = self.graph().node(node_id).ok_or(GraphError::UnknownNode(node_id))?.clone();
        let mut changes: Vec<GraphChange> = self
            .graph()
            .incident_edges(node_id)
            .into_iter()
            .map(|edge| GraphChange::RemoveEdge { edge: edge.clone() })
            .collect();
        changes.push(GraphChange::RemoveNode { node });
        let delta = GraphDelta(changes);
        let counters = self.counters();
        self.commit("delete_node", json!({"node_id": node_id}), graph_changes(&delta), counters)?;
        Ok(delta)
    }

    pub fn connect(&mut self, from: NodeId, to: NodeId, kind: EdgeKind) -> Result<EdgeId, GraphError> {
        self.graph().check_new_edge(from, to, kind)?;
        let mut counters = self.counters();
        let edge_id = counters.mint_edge();
        let edge = Edge {
            edge_id,
            from,
            to,
            kind,
            created_by: CreatedBy::Human,
            created_at: self.revision() + 1,
        };
        self.commit(
            "connect",
            json!({"edge_id": edge_id, "from": from, "to": to, "kind": kind}),
            vec![Change::Graph(GraphChange::AddEdge { edge })],
            counters,
        )?;
        Ok(edge_id)
    }

    pub fn disconnect(&mut self, edge_id: EdgeId) -> Result<GraphDelta, GraphError> {
        let edge = self
            .graph()
            .edges
            .get(&edge_id)
            .ok_or(GraphError::UnknownEdge(edge_id))?
            .clone();
        let delta = GraphDelta(vec![GraphChange::RemoveEdge { edge }]);
        let counters = self.counters();
        self.commit("disconnect", json!({"edge_id": edge_id}), graph_changes(&delta), counters)?;
        Ok(delta)
    }

    /// Folds `absorbed` into `survivor`: members are re-pointed (deduplicated),
    /// sub-themes re-parented, and the absorbed theme removed. Nothing is
    /// applied if re-parenting would create a cycle.
    pub fn merge_themes(&mut self, survivor: NodeId, absorbed: NodeId) -> Result<GraphDelta, GraphError> {
        let graph = self.graph();
        let survivor_node = graph.node(survivor).ok_or(GraphError::UnknownNode(survivor))?;
        let absorbed_node = graph.node(absorbed).ok_or(GraphError::UnknownNode(absorbed))?.clone();
        if survivor == absorbed {
            return Err(GraphError::SameNode);
        }
        for node in [survivor_node, &absorbed_node] {
            if node.kind() != NodeKind::Theme {
                return Err(GraphError::KindMismatch(format!("`{}` is not a theme", node.id())));
            }
        }
        let mut counters = self.counters();
        let created_at = self.revision() + 1;
        let mut removals = Vec::new();
        let mut additions = Vec::new();
        for edge in graph.incident_edges(absorbed) {
            removals.push(GraphChange::RemoveEdge { edge: edge.clone() });
            let outgoing = edge.from == absorbed;
            let carry = match edge.kind {
                EdgeKind::Membership => outgoing && graph.find_edge(survivor, edge.to, EdgeKind::Membership).is_none(),
                EdgeKind::Hierarchy => outgoing,
            };
            if carry {
                additions.push(GraphChange::AddEdge {
                    edge: Edge {
                        edge_id: counters.mint_edge(),
                        from: survivor,
                        to: edge.to,
                        kind: edge.kind,
                        created_by: edge.created_by,
                        created_at,
                    },
                });
            }
        }
        let mut changes = removals;
        changes.extend(additions);
        changes.push(GraphChange::RemoveNode { node: absorbed_node });
        let delta = GraphDelta(changes);
        self.commit(
            "merge_themes",
            json!({"survivor": survivor, "absorbed": absorbed}),
            graph_changes(&delta),
            counters,
        )?;
        Ok(delta)
    }

    /// Stores summaries computed elsewhere. Returns `Ok(false)` without
    /// logging anything when the node's text no longer matches the tiers.
    pub fn apply_summaries(&mut self, node_id: NodeId, tiers: SummaryTiers) -> Result<bool, GraphError> {
        let before = self.graph().node(node_id).ok_or(GraphError::UnknownNode(node_id))?.clone();
        let Node::Evidence(evidence) = &before else {
            return Err(GraphError::KindMismatch("theme nodes are not summarized".into()));
        };
        if !tiers.is_fresh_for(&evidence.text) {
            return Ok(false);
        }
        let mut updated = evidence.clone();
        updated.summaries = Some(tiers);
        let counters = self.counters();
        self.commit(
            "apply_summaries",
            json!({"node_id": node_id}),
            vec![Change::Graph(GraphChange::UpdateNode {
                before,
                after: Node::Evidence(updated),
            })],
            counters,
        )?;
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::IngestPayload;
    use crate::ids::WorkspaceId;
    use crate::store::to_canonical_bytes;

    fn ws() -> Workspace {
        Workspace::new(WorkspaceId::from("w"))
    }

    fn theme(ws: &mut Workspace, name: &str) -> NodeId {
        ws.create_node(
            &Corpus::new(),
            NodeSpec::Theme {
                name: name.into(),
                position: Position::new(0.0, 0.0),
            },
        )
        .unwrap()
    }

    fn evidence(ws: &mut Workspace, text: &str) -> NodeId {
        ws.create_node(
            &Corpus::new(),
            NodeSpec::Evidence {
                text: text.into(),
                anchor: None,
                position: Position::new(1.0, 2.0),
            },
        )
        .unwrap()
    }

    #[test]
    fn create_examples() {
        let mut w = ws();
        let t = theme(&mut w, "Indexing");
        assert_eq!(w.graph().theme(t).unwrap().name, "Indexing");
        let e = evidence(&mut w, "query latency spikes");
        let node = w.graph().evidence(e).unwrap();
        assert_eq!(node.created_by, CreatedBy::Human);
        assert!(node.anchor.is_none());
        assert_eq!(w.revision(), 2);
        let err = w
            .create_node(
                &Corpus::new(),
                NodeSpec::Theme {
                    name: "  ".into(),
                    position: Position::new(0.0, 0.0),
                },
            )
            .unwrap_err();
        assert_eq!(err.code(), "empty_text");
        assert_eq!(w.revision(), 2);
    }

    #[test]
    fn anchored_evidence_requires_matching_quote() {
        let mut corpus = Corpus::new();
        let doc = corpus.ingest_document(IngestPayload::from_texts("t", &["AB CD EF"])).unwrap().doc_id;
        let anchor = corpus.extract_snippet(&doc, 1, 3, 5).unwrap();
        let mut w = ws();
        let err = w
            .create_node(
                &corpus,
                NodeSpec::Evidence {
                    text: "XY".into(),
                    anchor: Some(anchor.clone()),
                    position: Position::new(0.0, 0.0),
                },
            )
            .unwrap_err();
        assert_eq!(err.code(), "invalid_anchor");
        let mut forged = anchor.clone();
        forged.quote = "EF".into();
        let err = w
            .create_node(
                &corpus,
                NodeSpec::Evidence {
                    text: "EF".into(),
                    anchor: Some(forged),
                    position: Position::new(0.0, 0.0),
                },
            )
            .unwrap_err();
        assert_eq!(err.code(), "invalid_anchor");
        let id = w
            .create_node(
                &corpus,
                NodeSpec::Evidence {
                    text: "CD".into(),
                    anchor: Some(anchor),
                    position: Position::new(0.0, 0.0),
                },
            )
            .unwrap();
        assert!(w.graph().evidence(id).unwrap().anchor.is_some());
    }

    #[test]
    fn update_examples() {
        let mut corpus = Corpus::new();
        let doc = corpus.ingest_document(IngestPayload::from_texts("t", &["AB CD EF"])).unwrap().doc_id;
        let anchor = corpus.extract_snippet(&doc, 1, 0, 5).unwrap();
        let mut w = ws();
        let t = theme(&mut w, "Indexing");
        let before = w.graph().theme(t).unwrap().clone();
        w.update_node(
            t,
            NodePatch {
                position: Some(Position::new(10.0, -4.0)),
                ..Default::default()
            },
        )
        .unwrap();
        let after = w.graph().theme(t).unwrap();
        assert_eq!(after.position, Position::new(10.0, -4.0));
        assert_eq!(after.name, before.name);
        assert_eq!(after.created_at, before.created_at);

        let e = w
            .create_node(
                &corpus,
                NodeSpec::Evidence {
                    text: "AB CD".into(),
                    anchor: Some(anchor),
                    position: Position::new(0.0, 0.0),
                },
            )
            .unwrap();
        let tiers = crate::summarize::extractive_tiers("AB CD", &Default::default()).unwrap();
        assert!(w.apply_summaries(e, tiers).unwrap());
        w.update_node(
            e,
            NodePatch {
                text: Some("AB CD edited".into()),
                ..Default::default()
            },
        )
        .unwrap();
        let node = w.graph().evidence(e).unwrap();
        assert!(node.anchor.is_none());
        assert!(node.summaries.is_none());

        let err = w.update_node(NodeId(99), NodePatch::default()).unwrap_err();
        assert_eq!(err.code(), "unknown_node");
        let err = w
            .update_node(
                e,
                NodePatch {
                    text: Some(String::new()),
                    ..Default::default()
                },
            )
            .unwrap_err();
        assert_eq!(err.code(), "empty_text");
    }

    #[test]
    fn stale_summaries_are_discarded() {
        let mut w = ws();
        let e = evidence(&mut w, "original text");
        let tiers = crate::summarize::extractive_tiers("other text", &Default::default()).unwrap();
        let rev = w.revision();
        assert!(!w.apply_summaries(e, tiers).unwrap());
        assert_eq!(w.revision(), rev);
    }

    #[test]
    fn delete_examples() {
        let mut w = ws();
        let t = theme(&mut w, "T");
        let e1 = evidence(&mut w, "one");
        let e2 = evidence(&mut w, "two");
        w.connect(t, e1, EdgeKind::Membership).unwrap();
        w.connect(t, e2, EdgeKind::Membership).unwrap();
        let delta = w.delete_node(t).unwrap();
        let removed_edges = delta
            .changes()
            .iter()
            .filter(|c| matches!(c, GraphChange::RemoveEdge { .. }))
            .count();
        let removed_nodes = delta
            .changes()
            .iter()
            .filter(|c| matches!(c, GraphChange::RemoveNode { .. }))
            .count();
        assert_eq!((removed_nodes, removed_edges), (1, 2));
        assert!(w.graph().evidence(e1).is_some() && w.graph().evidence(e2).is_some());

        let t2 = theme(&mut w, "T2");
        w.connect(t2, e1, EdgeKind::Membership).unwrap();
        w.delete_node(e1).unwrap();
        assert_eq!(w.graph().membership_edges(t2).count(), 0);

        let parent = theme(&mut w, "parent");
        let child = theme(&mut w, "child");
        w.connect(parent, child, EdgeKind::Hierarchy).unwrap();
        w.delete_node(parent).unwrap();
        assert!(w.graph().theme(child).is_some());
        assert_eq!(w.graph().parent_of(child), None);
        assert_eq!(w.delete_node(parent).unwrap_err().code(), "unknown_node");
    }

    #[test]
    fn connect_examples() {
        let mut w = ws();
        let t1 = theme(&mut w, "T1");
        let t2 = theme(&mut w, "T2");
        let t3 = theme(&mut w, "T3");
        let e1 = evidence(&mut w, "E1");
        w.connect(t1, e1, EdgeKind::Membership).unwrap();
        assert_eq!(w.connect(t1, e1, EdgeKind::Membership).unwrap_err().code(), "duplicate_edge");
        w.connect(t1, t2, EdgeKind::Hierarchy).unwrap();
        assert_eq!(w.connect(t2, t1, EdgeKind::Hierarchy).unwrap_err().code(), "cycle_detected");
        assert_eq!(w.connect(t1, e1, EdgeKind::Hierarchy).unwrap_err().code(), "kind_mismatch");
        assert_eq!(w.connect(e1, t1, EdgeKind::Membership).unwrap_err().code(), "kind_mismatch");
        assert_eq!(w.connect(t3, t2, EdgeKind::Hierarchy).unwrap_err().code(), "second_parent");
        assert_eq!(w.connect(t3, t3, EdgeKind::Hierarchy).unwrap_err().code(), "cycle_detected");
        assert_eq!(w.connect(t3, NodeId(77), EdgeKind::Hierarchy).unwrap_err().code(), "unknown_node");
        w.connect(t2, t3, EdgeKind::Hierarchy).unwrap();
        assert_eq!(w.connect(t3, t1, EdgeKind::Hierarchy).unwrap_err().code(), "cycle_detected");
    }

    #[test]
    fn merge_unions_members() {
        let mut w = ws();
        let t1 = theme(&mut w, "T1");
        let t2 = theme(&mut w, "T2");
        let e1 = evidence(&mut w, "E1");
        let e2 = evidence(&mut w, "E2");
        w.connect(t2, e1, EdgeKind::Membership).unwrap();
        w.connect(t2, e2, EdgeKind::Membership).unwrap();
        w.connect(t1, e2, EdgeKind::Membership).unwrap();
        w.merge_themes(t1, t2).unwrap();
        let members: Vec<NodeId> = w.graph().members(t1).iter().map(|e| e.node_id).collect();
        assert_eq!(members, vec![e1, e2]);
        assert!(w.graph().node(t2).is_none());
        assert_eq!(w.graph().theme(t1).unwrap().name, "T1");
        assert_eq!(w.merge_themes(t1, t1).unwrap_err().code(), "same_node");
    }

    #[test]
    fn merge_reparents_children_and_is_atomic_on_cycle() {
        let mut w = ws();
        let t1 = theme(&mut w, "T1");
        let t2 = theme(&mut w, "T2");
        let t3 = theme(&mut w, "T3");
        let e = evidence(&mut w, "E");
        w.connect(t1, t2, EdgeKind::Hierarchy).unwrap();
        w.connect(t2, t3, EdgeKind::Hierarchy).unwrap();
        w.connect(t1, e, EdgeKind::Membership).unwrap();
        let before = to_canonical_bytes(&w);
        // absorbing the root into its grandchild would make T3 parent its own ancestor
        assert_eq!(w.merge_themes(t3, t1).unwrap_err().code(), "cycle_detected");
        assert_eq!(to_canonical_bytes(&w), before);

        let other = theme(&mut w, "Other");
        w.merge_themes(other, t2).unwrap();
        assert_eq!(w.graph().parent_of(t3), Some(other));
        assert_eq!(w.graph().parent_of(other), None);
        assert!(w.graph().check_integrity().is_ok());
    }

    #[test]
    fn zoom_tiers() {
        use DetailTier::*;
        assert_eq!(tier_for_zoom(1.0, NodeKind::Evidence).unwrap(), Full);
        assert_eq!(tier_for_zoom(0.6, NodeKind::Evidence).unwrap(), Medium);
        assert_eq!(tier_for_zoom(0.3, NodeKind::Evidence).unwrap(), Short);
        assert_eq!(tier_for_zoom(0.1, NodeKind::Evidence).unwrap(), Tiny);
        assert_eq!(tier_for_zoom(0.1, NodeKind::Theme).unwrap(), Full);
        assert_eq!(tier_for_zoom(0.75, NodeKind::Evidence).unwrap(), Full);
        assert_eq!(tier_for_zoom(0.5, NodeKind::Evidence).unwrap(), Medium);
        assert_eq!(tier_for_zoom(0.25, NodeKind::Evidence).unwrap(), Short);
        assert_eq!(tier_for_zoom(0.0, NodeKind::Evidence).unwrap_err().code(), "nonpositive_zoom");
        assert_eq!(tier_for_zoom(f64::NAN, NodeKind::Theme).unwrap_err().code(), "nonpositive_zoom");
        assert!(Full > Medium && Medium > Short && Short > Tiny);
    }

    #[test]
    fn thresholds_validate() {
        assert!(ZoomThresholds::default().validate().is_ok());
        let bad = ZoomThresholds {
            full: 0.5,
            medium: 0.5,
            short: 0.1,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn codebook_examples() {
        let mut w = ws();
        assert!(codebook_projection(w.graph()).entries.is_empty());
        let t = theme(&mut w, "T");
        let empty = theme(&mut w, "Empty");
        let e1 = evidence(&mut w, "one");
        let e2 = evidence(&mut w, "two");
        let e3 = evidence(&mut w, "three");
        w.connect(t, e3, EdgeKind::Membership).unwrap();
        w.connect(t, e1, EdgeKind::Membership).unwrap();
        w.connect(t, e2, EdgeKind::Membership).unwrap();
        let before = to_canonical_bytes(&w);
        let view = codebook_projection(w.graph());
        assert_eq!(to_canonical_bytes(&w), before);
        assert_eq!(view.entries.len(), 2);
        let entry = &view.entries[0];
        assert_eq!(entry.theme_id, t);
        assert_eq!(entry.total_evidence_count, 3);
        let shown: Vec<NodeId> = entry.shown_evidence.iter().map(|s| s.node_id).collect();
        assert_eq!(shown, vec![e3, e1]);
        assert_eq!(view.entries[1].theme_id, empty);
        assert!(view.entries[1].shown_evidence.is_empty());
        assert_eq!(view.entries[1].total_evidence_count, 0);
    }

    #[test]
    fn delta_inverse_restores_graph() {
        let mut w = ws();
        let t = theme(&mut w, "T");
        let e = evidence(&mut w, "E");
        w.connect(t, e, EdgeKind::Membership).unwrap();
        let mut graph = w.graph().clone();
        let snapshot = graph.clone();
        let delta = GraphDelta(vec![
            GraphChange::RemoveEdge {
                edge: graph.edges.values().next().unwrap().clone(),
            },
            GraphChange::RemoveNode {
                node: graph.node(t).unwrap().clone(),
            },
        ]);
        graph.apply(&delta).unwrap();
        graph.apply(&delta.inverse()).unwrap();
        assert_eq!(graph, snapshot);
    }

    #[test]
    fn failed_delta_rolls_back() {
        let mut w = ws();
        let t = theme(&mut w, "T");
        let mut graph = w.graph().clone();
        let snapshot = graph.clone();
        let delta = GraphDelta(vec![
            GraphChange::RemoveNode {
                node: graph.node(t).unwrap().clone(),
            },
            GraphChange::RemoveNode {
                node: graph.node(t).unwrap().clone(),
            },
        ]);
        assert!(graph.apply(&delta).is_err());
        assert_eq!(graph, snapshot);
    }
}
