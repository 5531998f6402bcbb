//! AI suggestions under human control.
//!
//! Generation is pure: it reads a workspace snapshot and returns a
//! [`SuggestionDraft`]. Recording, previewing and resolving are workspace
//! mutations. A suggestion is bound to the revision it was generated at and
//! goes stale, rather than re-targeting, when the entities it refers to
//! disappear or change shape.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::graph::{CreatedBy, Edge, EdgeKind, Graph, GraphChange, GraphDelta, GraphError, Node, Position, ThemeNode};
use crate::ids::{NodeId, SuggestionId};
use crate::provider::{
    PromptRequest, Provider, ProviderError, DESCRIBE_TEMPLATE, NAME_TEMPLATE, PLACEMENT_TEMPLATE,
};
use crate::store::{Change, IdCounters, Workspace};
use crate::summarize::extractive_summary;
use crate::text::{char_len, contains_whole_word, cosine, tokenize, TfIdf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestConfig {
    /// Ranked themes passed to the placement prompt.
    pub top_k: usize,
    pub name_max_chars: usize,
}

impl Default for SuggestConfig {
    fn default() -> Self {
        Self {
            top_k: 5,
            name_max_chars: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordLink {
    pub keyword: String,
    pub evidence_ids: Vec<NodeId>,
}

/// A description whose keywords occur, whole-word and case-insensitively, in
/// its own text and in every linked evidence node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedDescription {
    pub text: String,
    pub keyword_links: Vec<KeywordLink>,
}

/// Provider output before grounding. Claimed evidence ids are kept only for
/// diagnostics; they are never trusted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateDescription {
    pub text: String,
    pub keywords: Vec<CandidateKeyword>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateKeyword {
    pub keyword: String,
    #[serde(default)]
    pub evidence_ids: Vec<String>,
}

impl From<&GroundedDescription> for CandidateDescription {
    fn from(d: &GroundedDescription) -> Self {
        Self {
            text: d.text.clone(),
            keywords: d
                .keyword_links
                .iter()
                .map(|k| CandidateKeyword {
                    keyword: k.keyword.clone(),
                    evidence_ids: k.evidence_ids.iter().map(NodeId::to_string).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grounding {
    pub description: GroundedDescription,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionKind {
    Assign,
    NewTheme,
    RenameTheme,
    DescribeTheme,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SuggestionPayload {
    Assign { theme_id: NodeId, evidence_id: NodeId },
    NewTheme { name: String, evidence_id: NodeId },
    RenameTheme { theme_id: NodeId, name: String },
    DescribeTheme { theme_id: NodeId, description: GroundedDescription },
}

impl SuggestionPayload {
    pub fn kind(&self) -> SuggestionKind {
        match self {
            SuggestionPayload::Assign { .. } => SuggestionKind::Assign,
            SuggestionPayload::NewTheme { .. } => SuggestionKind::NewTheme,
            SuggestionPayload::RenameTheme { .. } => SuggestionKind::RenameTheme,
            SuggestionPayload::DescribeTheme { .. } => SuggestionKind::DescribeTheme,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionStatus {
    Pending,
    Accepted,
    Revised,
    Rejected,
    Stale,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionOrigin {
    Provider,
    LexicalFallback,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub suggestion_id: SuggestionId,
    pub kind: SuggestionKind,
    pub payload: SuggestionPayload,
    pub rationale: String,
    pub basis: Vec<NodeId>,
    pub base_revision: u64,
    pub status: SuggestionStatus,
    pub origin: SuggestionOrigin,
    pub warnings: Vec<String>,
    /// What was applied when the researcher revised the proposal.
    pub revised_payload: Option<SuggestionPayload>,
    pub stale_reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionDraft {
    pub payload: SuggestionPayload,
    pub rationale: String,
    pub basis: Vec<NodeId>,
    pub base_revision: u64,
    pub origin: SuggestionOrigin,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Revise { payload: SuggestionPayload },
    Reject,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedTheme {
    pub theme_id: NodeId,
    pub score: f64,
}

/// Themes by descending score, ties by ascending id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThemeRanking(pub Vec<RankedTheme>);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SuggestError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("`{0}` is not a node of the expected kind")]
    KindMismatch(NodeId),
    #[error("evidence `{0}` already belongs to a theme")]
    AlreadyAssigned(NodeId),
    #[error("theme `{0}` has no member evidence")]
    NoEvidence(NodeId),
    #[error("query must not be empty")]
    EmptyQuery,
    #[error("provider returned no usable answer: {0}")]
    ProviderInvalid(String),
    #[error(transparent)]
    Provider(ProviderError),
    #[error("no keyword of the description is grounded in member evidence")]
    UngroundedDescription { warnings: Vec<String> },
    #[error("unknown suggestion `{0}`")]
    UnknownSuggestion(SuggestionId),
    #[error("suggestion is stale: {0}")]
    SuggestionStale(String),
    #[error("suggestion is already {0:?}")]
    NotPending(SuggestionStatus),
    #[error("invalid revision payload: {0}")]
    InvalidRevisionPayload(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl SuggestError {
    pub fn code(&self) -> &'static str {
        match self {
            SuggestError::UnknownNode(_) => "unknown_node",
            SuggestError::KindMismatch(_) => "kind_mismatch",
            SuggestError::AlreadyAssigned(_) => "already_assigned",
            SuggestError::NoEvidence(_) => "no_evidence",
            SuggestError::EmptyQuery => "empty_query",
            SuggestError::ProviderInvalid(_) => "provider_invalid",
            SuggestError::Provider(e) => e.code(),
            SuggestError::UngroundedDescription { .. } => "ungrounded_description",
            SuggestError::UnknownSuggestion(_) => "unknown_suggestion",
            SuggestError::SuggestionStale(_) => "suggestion_stale",
            SuggestError::NotPending(_) => "suggestion_not_pending",
            SuggestError::InvalidRevisionPayload(_) => "invalid_revision_payload",
            SuggestError::Graph(g) => g.code(),
        }
    }
}

impl From<ProviderError> for SuggestError {
    fn from(e: ProviderError) -> Self {
        match e {
            ProviderError::SchemaViolationExhausted { last_error, .. } => SuggestError::ProviderInvalid(last_error),
            other => SuggestError::Provider(other),
        }
    }
}

/// Theme name followed by the texts of its direct members.
pub fn theme_document(graph: &Graph, theme: &ThemeNode) -> String {
    let mut doc = theme.name.clone();
    for member in graph.members(theme.node_id) {
        doc.push('\n');
        doc.push_str(&member.text);
    }
    doc
}

/// Cosine similarity between the TF-IDF vector of `query` and each theme
/// document, with document frequencies taken over the theme documents.
pub fn rank_themes(graph: &Graph, query: &str) -> Result<ThemeRanking, SuggestError> {
    if query.trim().is_empty() {
        return Err(SuggestError::EmptyQuery);
    }
    let themes: Vec<&ThemeNode> = graph.themes().collect();
    let docs: Vec<Vec<String>> = themes.iter().map(|t| tokenize(&theme_document(graph, t))).collect();
    let model = TfIdf::fit(docs.iter().map(Vec::as_slice));
    let query_vector = model.vector(&tokenize(query));
    let mut ranking: Vec<RankedTheme> = themes
        .iter()
        .zip(&docs)
        .map(|(theme, doc)| RankedTheme {
            theme_id: theme.node_id,
            score: cosine(&query_vector, &model.vector(doc)),
        })
        .collect();
    ranking.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.theme_id.cmp(&b.theme_id)));
    Ok(ThemeRanking(ranking))
}

/// The `n` highest-weighted terms of `target`, ties broken by first
/// occurrence.
pub fn top_terms(model: &TfIdf, target: &[String], n: usize) -> Vec<String> {
    let mut first_seen: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, t) in target.iter().enumerate() {
        first_seen.entry(t.as_str()).or_insert(i);
    }
    let weights = model.weights(target);
    let mut terms: Vec<(&String, f64)> = weights.iter().map(|(t, w)| (t, *w)).collect();
    terms.sort_by(|a, b| b.1.total_cmp(&a.1).then(first_seen[a.0.as_str()].cmp(&first_seen[b.0.as_str()])));
    terms.into_iter().take(n).map(|(t, _)| t.clone()).collect()
}

fn title_case(term: &str) -> String {
    let mut chars = term.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn cap_name(name: &str, max: usize) -> String {
    if char_len(name) <= max {
        name.to_string()
    } else {
        extractive_summary(name, max.max(2)).expect("non-empty name")
    }
}

/// Title-cased top three terms of `target` against `corpus`.
fn lexical_name(corpus: &[Vec<String>], target: &[String], max_chars: usize) -> String {
    let model = TfIdf::fit(corpus.iter().map(Vec::as_slice));
    let terms = top_terms(&model, target, 3);
    if terms.is_empty() {
        return "Untitled Theme".to_string();
    }
    let name: Vec<String> = terms.iter().map(|t| title_case(t)).collect();
    cap_name(&name.join(" "), max_chars)
}

fn member_concatenation(graph: &Graph, theme: NodeId) -> String {
    graph
        .members(theme)
        .iter()
        .map(|m| m.text.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Fallback name for `theme`: its members against every theme's members.
pub fn lexical_theme_name(graph: &Graph, theme: NodeId, max_chars: usize) -> String {
    let themes: Vec<NodeId> = graph.themes().map(|t| t.node_id).collect();
    let corpus: Vec<Vec<String>> = themes.iter().map(|t| tokenize(&member_concatenation(graph, *t))).collect();
    let target = tokenize(&member_concatenation(graph, theme));
    lexical_name(&corpus, &target, max_chars)
}

fn bullet_list<'a>(texts: impl IntoIterator<Item = &'a str>) -> String {
    texts
        .into_iter()
        .map(|t| format!("- {}", t.replace('\n', " ")))
        .collect::<Vec<_>>()
        .join("\n")
}

fn name_check(max: usize) -> impl Fn(&Value) -> Result<(), String> {
    move |v| {
        let name = v.get("name").and_then(Value::as_str).unwrap_or_default();
        if name.trim().is_empty() {
            Err("`name` is blank".into())
        } else if char_len(name.trim()) > max {
            Err(format!("`name` exceeds {max} characters"))
        } else {
            Ok(())
        }
    }
}

/// Asks the provider for a name; if it cannot be reached, falls back to the
/// lexical name.
fn propose_name(
    provider: &Provider,
    texts: &[&str],
    current_name: &str,
    fallback: impl FnOnce() -> String,
    cfg: &SuggestConfig,
) -> Result<(String, String, SuggestionOrigin), SuggestError> {
    let request = PromptRequest::new(NAME_TEMPLATE)
        .var("evidence", bullet_list(texts.iter().copied()))
        .var("current_name", current_name);
    match provider.complete_checked(&request, name_check(cfg.name_max_chars)) {
        Ok(value) => {
            let name = value["name"].as_str().unwrap_or_default().trim().to_string();
            let rationale = value
                .get("rationale")
                .and_then(Value::as_str)
                .unwrap_or("Name proposed from the connected evidence.")
                .to_string();
            Ok((name, rationale, SuggestionOrigin::Provider))
        }
        Err(e) if e.is_unavailable() => Ok((
            fallback(),
            "Provider unavailable; name built from the three highest-weighted TF-IDF terms of the evidence.".into(),
            SuggestionOrigin::LexicalFallback,
        )),
        Err(e) => Err(e.into()),
    }
}

/// Proposes where an unassigned excerpt belongs.
pub fn suggest_placement(
    workspace: &Workspace,
    provider: &Provider,
    evidence_id: NodeId,
    cfg: &SuggestConfig,
) -> Result<SuggestionDraft, SuggestError> {
    let graph = workspace.graph();
    let evidence = match graph.node(evidence_id) {
        None => return Err(SuggestError::UnknownNode(evidence_id)),
        Some(Node::Theme(_)) => return Err(SuggestError::KindMismatch(evidence_id)),
        Some(Node::Evidence(e)) => e,
    };
    if graph.is_assigned(evidence_id) {
        return Err(SuggestError::AlreadyAssigned(evidence_id));
    }
    let themes: Vec<&ThemeNode> = graph.themes().collect();
    if themes.is_empty() {
        let tokens = tokenize(&evidence.text);
        let (name, rationale, origin) = propose_name(
            provider,
            &[evidence.text.as_str()],
            "(none yet)",
            || lexical_name(std::slice::from_ref(&tokens), &tokens, cfg.name_max_chars),
            cfg,
        )?;
        return Ok(SuggestionDraft {
            payload: SuggestionPayload::NewTheme { name, evidence_id },
            rationale: format!("No themes exist yet, so this excerpt can found the first one. {rationale}"),
            basis: vec![evidence_id],
            base_revision: workspace.revision(),
            origin,
            warnings: Vec::new(),
        });
    }

    let ranking = rank_themes(graph, &evidence.text)?;
    let request = placement_request(graph, &evidence.text, &ranking, cfg.top_k, "");
    let known: BTreeSet<NodeId> = themes.iter().map(|t| t.node_id).collect();
    let value = provider.complete_checked(&request, |v| check_placement(v, &known, true))?;
    let rationale = value["rationale"].as_str().unwrap_or_default().to_string();
    let (payload, basis) = match value["kind"].as_str() {
        Some("assign") => {
            let theme_id: NodeId = value["theme_id"].as_str().unwrap_or_default().parse().expect("checked");
            let mut basis = vec![evidence_id];
            basis.extend(graph.members(theme_id).iter().map(|m| m.node_id));
            (SuggestionPayload::Assign { theme_id, evidence_id }, basis)
        }
        _ => {
            let name = value["name"].as_str().unwrap_or_default().trim().to_string();
            (SuggestionPayload::NewTheme { name, evidence_id }, vec![evidence_id])
        }
    };
    Ok(SuggestionDraft {
        payload,
        rationale,
        basis,
        base_revision: workspace.revision(),
        origin: SuggestionOrigin::Provider,
        warnings: Vec::new(),
    })
}

pub(crate) fn placement_request(
    graph: &Graph,
    excerpt: &str,
    ranking: &ThemeRanking,
    top_k: usize,
    constraint: &str,
) -> PromptRequest {
    let themes: Vec<Value> = graph
        .themes()
        .map(|t| {
            json!({
                "theme_id": t.node_id,
                "name": t.name,
                "description": t.description.as_ref().map(|d| d.text.clone()),
            })
        })
        .collect();
    let top: Vec<&RankedTheme> = ranking.0.iter().take(top_k).collect();
    PromptRequest::new(PLACEMENT_TEMPLATE)
        .var("excerpt", excerpt)
        .var("themes", Value::Array(themes).to_string())
        .var("ranking", serde_json::to_string(&top).expect("ranking serializes"))
        .var("constraint", constraint)
}

pub(crate) fn check_placement(value: &Value, known: &BTreeSet<NodeId>, allow_new: bool) -> Result<(), String> {
    match value["kind"].as_str() {
        Some("assign") => {
            let raw = value["theme_id"].as_str().unwrap_or_default();
            match raw.parse::<NodeId>() {
                Ok(id) if known.contains(&id) => Ok(()),
                _ => Err(format!("theme_id `{raw}` is not one of the listed themes")),
            }
        }
        Some("new_theme") if allow_new => {
            if value["name"].as_str().unwrap_or_default().trim().is_empty() {
                Err("`name` is blank".into())
            } else {
                Ok(())
            }
        }
        Some("new_theme") => Err("a new theme is not allowed here; choose an existing theme".into()),
        other => Err(format!("unexpected kind {other:?}")),
    }
}

fn theme_with_members(workspace: &Workspace, theme_id: NodeId) -> Result<(&ThemeNode, Vec<NodeId>), SuggestError> {
    let graph = workspace.graph();
    let theme = match graph.node(theme_id) {
        None => return Err(SuggestError::UnknownNode(theme_id)),
        Some(Node::Evidence(_)) => return Err(SuggestError::KindMismatch(theme_id)),
        Some(Node::Theme(t)) => t,
    };
    let members: Vec<NodeId> = graph.members(theme_id).iter().map(|m| m.node_id).collect();
    if members.is_empty() {
        return Err(SuggestError::NoEvidence(theme_id));
    }
    Ok((theme, members))
}

/// Name proposal from the theme's direct members.
pub fn suggest_theme_name(
    workspace: &Workspace,
    provider: &Provider,
    theme_id: NodeId,
    cfg: &SuggestConfig,
) -> Result<SuggestionDraft, SuggestError> {
    let (theme, basis) = theme_with_members(workspace, theme_id)?;
    let graph = workspace.graph();
    let texts: Vec<&str> = graph.members(theme_id).iter().map(|m| m.text.as_str()).collect();
    let (name, rationale, origin) = propose_name(
        provider,
        &texts,
        &theme.name,
        || lexical_theme_name(graph, theme_id, cfg.name_max_chars),
        cfg,
    )?;
    Ok(SuggestionDraft {
        payload: SuggestionPayload::RenameTheme { theme_id, name },
        rationale,
        basis,
        base_revision: workspace.revision(),
        origin,
        warnings: Vec::new(),
    })
}

/// Description proposal whose keywords are re-grounded against the members.
pub fn describe_theme(workspace: &Workspace, provider: &Provider, theme_id: NodeId) -> Result<SuggestionDraft, SuggestError> {
    let (theme, basis) = theme_with_members(workspace, theme_id)?;
    let graph = workspace.graph();
    let members = graph.members(theme_id);
    let evidence: Vec<Value> = members
        .iter()
        .map(|m| json!({"evidence_id": m.node_id, "text": m.text}))
        .collect();
    let request = PromptRequest::new(DESCRIBE_TEMPLATE)
        .var("theme_name", theme.name.as_str())
        .var("evidence", Value::Array(evidence).to_string());
    let value = provider.complete_structured(&request)?;
    let candidate: CandidateDescription =
        serde_json::from_value(value).map_err(|e| SuggestError::ProviderInvalid(e.to_string()))?;
    let texts: Vec<(NodeId, &str)> = members.iter().map(|m| (m.node_id, m.text.as_str())).collect();
    let grounding = validate_grounding(&candidate, &texts)?;
    let linked = grounding.description.keyword_links.len();
    Ok(SuggestionDraft {
        payload: SuggestionPayload::DescribeTheme {
            theme_id,
            description: grounding.description,
        },
        rationale: format!("Description grounded in {linked} keyword(s) found verbatim in the member evidence."),
        basis,
        base_revision: workspace.revision(),
        origin: SuggestionOrigin::Provider,
        warnings: grounding.warnings,
    })
}

/// Keeps a keyword only if it occurs whole-word in the description text and
/// in at least one member; its evidence ids become exactly the matching
/// members. Dropped keywords are reported as warnings.
pub fn validate_grounding(
    candidate: &CandidateDescription,
    members: &[(NodeId, &str)],
) -> Result<Grounding, SuggestError> {
    let mut keyword_links = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = BTreeSet::new();
    for kw in &candidate.keywords {
        let keyword = kw.keyword.trim();
        if keyword.is_empty() || !seen.insert(keyword.to_lowercase()) {
            continue;
        }
        if !contains_whole_word(&candidate.text, keyword) {
            warnings.push(format!("keyword `{keyword}` does not appear in the description text; dropped"));
            continue;
        }
        let mut evidence_ids: Vec<NodeId> = members
            .iter()
            .filter(|(_, text)| contains_whole_word(text, keyword))
            .map(|(id, _)| *id)
            .collect();
        evidence_ids.sort();
        evidence_ids.dedup();
        if evidence_ids.is_empty() {
            warnings.push(format!("keyword `{keyword}` is not found in any member evidence; dropped"));
            continue;
        }
        keyword_links.push(KeywordLink {
            keyword: keyword.to_string(),
            evidence_ids,
        });
    }
    if keyword_links.is_empty() {
        return Err(SuggestError::UngroundedDescription { warnings });
    }
    Ok(Grounding {
        description: GroundedDescription {
            text: candidate.text.clone(),
            keyword_links,
        },
        warnings,
    })
}

const NEW_THEME_OFFSET: Position = Position { x: 0.0, y: -160.0 };

impl Workspace {
    pub fn record_suggestion(&mut self, draft: SuggestionDraft) -> Result<SuggestionId, SuggestError> {
        if draft.basis.is_empty() {
            return Err(SuggestError::ProviderInvalid("suggestion cites no evidence".into()));
        }
        let mut counters = self.counters();
        let suggestion_id = counters.mint_suggestion();
        let suggestion = Suggestion {
            suggestion_id,
            kind: draft.payload.kind(),
            payload: draft.payload,
            rationale: draft.rationale,
            basis: draft.basis,
            base_revision: draft.base_revision,
            status: SuggestionStatus::Pending,
            origin: draft.origin,
            warnings: draft.warnings,
            revised_payload: None,
            stale_reason: None,
        };
        self.commit(
            "record_suggestion",
            json!({"suggestion_id": suggestion_id, "kind": suggestion.kind}),
            vec![Change::PutSuggestion {
                before: None,
                after: Some(Box::new(suggestion)),
            }],
            counters,
        )?;
        Ok(suggestion_id)
    }

    /// Generates and records in one step.
    pub fn propose(&mut self, draft: Result<SuggestionDraft, SuggestError>) -> Result<SuggestionId, SuggestError> {
        self.record_suggestion(draft?)
    }

    fn pending(&self, id: SuggestionId) -> Result<&Suggestion, SuggestError> {
        let s = self.suggestion(id).ok_or(SuggestError::UnknownSuggestion(id))?;
        match s.status {
            SuggestionStatus::Pending => Ok(s),
            SuggestionStatus::Stale => Err(SuggestError::SuggestionStale(
                s.stale_reason.clone().unwrap_or_else(|| "marked stale".into()),
            )),
            other => Err(SuggestError::NotPending(other)),
        }
    }

    /// Changes that applying `payload` would make, or why it no longer fits
    /// the live graph.
    fn plan(&self, payload: &SuggestionPayload, created_by: CreatedBy) -> Result<(Vec<GraphChange>, IdCounters, Option<SuggestionPayload>), String> {
        let graph = self.graph();
        let mut counters = self.counters();
        let created_at = self.revision() + 1;
        let unassigned_evidence = |id: NodeId| -> Result<Position, String> {
            let e = graph.evidence(id).ok_or_else(|| format!("evidence `{id}` no longer exists"))?;
            if graph.is_assigned(id) {
                return Err(format!("evidence `{id}` has been placed in a theme since"));
            }
            Ok(e.position)
        };
        let theme = |id: NodeId| graph.theme(id).ok_or_else(|| format!("theme `{id}` no longer exists"));
        match payload {
            SuggestionPayload::Assign { theme_id, evidence_id } => {
                theme(*theme_id)?;
                unassigned_evidence(*evidence_id)?;
                let edge = Edge {
                    edge_id: counters.mint_edge(),
                    from: *theme_id,
                    to: *evidence_id,
                    kind: EdgeKind::Membership,
                    created_by,
                    created_at,
                };
                Ok((vec![GraphChange::AddEdge { edge }], counters, None))
            }
            SuggestionPayload::NewTheme { name, evidence_id } => {
                let position = unassigned_evidence(*evidence_id)?;
                if name.trim().is_empty() {
                    return Err("theme name is blank".into());
                }
                let node_id = counters.mint_node();
                let node = Node::Theme(ThemeNode {
                    node_id,
                    name: name.trim().to_string(),
                    description: None,
                    position: Position::new(position.x + NEW_THEME_OFFSET.x, position.y + NEW_THEME_OFFSET.y),
                    created_by,
                    created_at,
                });
                let edge = Edge {
                    edge_id: counters.mint_edge(),
                    from: node_id,
                    to: *evidence_id,
                    kind: EdgeKind::Membership,
                    created_by,
                    created_at,
                };
                Ok((vec![GraphChange::AddNode { node }, GraphChange::AddEdge { edge }], counters, None))
            }
            SuggestionPayload::RenameTheme { theme_id, name } => {
                let before = theme(*theme_id)?;
                let name = name.trim();
                if name.is_empty() {
                    return Err("theme name is blank".into());
                }
                let mut after = before.clone();
                after.name = name.to_string();
                Ok((
                    vec![GraphChange::UpdateNode {
                        before: Node::Theme(before.clone()),
                        after: Node::Theme(after),
                    }],
                    counters,
                    None,
                ))
            }
            SuggestionPayload::DescribeTheme { theme_id, description } => {
                let before = theme(*theme_id)?;
                let members = graph.members(*theme_id);
                let texts: Vec<(NodeId, &str)> = members.iter().map(|m| (m.node_id, m.text.as_str())).collect();
                let grounding = validate_grounding(&CandidateDescription::from(description), &texts)
                    .map_err(|_| "no keyword is grounded in the current member evidence".to_string())?;
                let mut after = before.clone();
                after.description = Some(grounding.description.clone());
                let regrounded = (grounding.description != *description).then_some(SuggestionPayload::DescribeTheme {
                    theme_id: *theme_id,
                    description: grounding.description,
                });
                Ok((
                    vec![GraphChange::UpdateNode {
                        before: Node::Theme(before.clone()),
                        after: Node::Theme(after),
                    }],
                    counters,
                    regrounded,
                ))
            }
        }
    }

    fn staleness(&self, s: &Suggestion) -> Option<String> {
        if let Some(missing) = s.basis.iter().find(|id| self.graph().node(**id).is_none()) {
            return Some(format!("cited evidence `{missing}` no longer exists"));
        }
        self.plan(&s.payload, CreatedBy::AiAccepted).err()
    }

    fn mark_stale(&mut self, id: SuggestionId, reason: String) -> SuggestError {
        let before = self.suggestion(id).expect("pending suggestion exists").clone();
        let mut after = before.clone();
        after.status = SuggestionStatus::Stale;
        after.stale_reason = Some(reason.clone());
        let counters = self.counters();
        self.commit(
            "mark_stale",
            json!({"suggestion_id": id, "reason": reason}),
            vec![Change::PutSuggestion {
                before: Some(Box::new(before)),
                after: Some(Box::new(after)),
            }],
            counters,
        )
        .expect("status change applies");
        SuggestError::SuggestionStale(reason)
    }

    /// The exact delta accepting would apply. Nothing is mutated unless the
    /// suggestion has gone stale, in which case its status change is logged.
    pub fn preview_suggestion(&mut self, id: SuggestionId) -> Result<GraphDelta, SuggestError> {
        let s = self.pending(id)?.clone();
        if let Some(reason) = self.staleness(&s) {
            return Err(self.mark_stale(id, reason));
        }
        let (changes, _, _) = self.plan(&s.payload, CreatedBy::AiAccepted).expect("checked above");
        Ok(GraphDelta(changes))
    }

    /// Applies the researcher's decision. Accept applies the preview delta,
    /// revise applies the edited payload, reject only records the verdict.
    pub fn resolve_suggestion(&mut self, id: SuggestionId, decision: Decision) -> Result<Option<GraphDelta>, SuggestError> {
        let s = self.pending(id)?.clone();
        if let Some(reason) = self.staleness(&s) {
            return Err(self.mark_stale(id, reason));
        }
        let mut after = s.clone();
        let (graph_changes, counters, label) = match &decision {
            Decision::Accept => {
                let (changes, counters, regrounded) = self.plan(&s.payload, CreatedBy::AiAccepted).expect("checked above");
                if let Some(payload) = regrounded {
                    after.payload = payload;
                }
                after.status = SuggestionStatus::Accepted;
                (changes, counters, "accept")
            }
            Decision::Revise { payload } => {
                self.check_revision(&s, payload)?;
                let (changes, counters, regrounded) = self
                    .plan(payload, CreatedBy::Human)
                    .map_err(SuggestError::InvalidRevisionPayload)?;
                if regrounded.is_some() {
                    return Err(SuggestError::InvalidRevisionPayload(
                        "every keyword link must match the member evidence exactly".into(),
                    ));
                }
                after.status = SuggestionStatus::Revised;
                after.revised_payload = Some(payload.clone());
                (changes, counters, "revise")
            }
            Decision::Reject => {
                after.status = SuggestionStatus::Rejected;
                (Vec::new(), self.counters(), "reject")
            }
        };
        let delta = GraphDelta(graph_changes);
        let mut changes: Vec<Change> = delta.0.iter().cloned().map(Change::Graph).collect();
        changes.push(Change::PutSuggestion {
            before: Some(Box::new(s)),
            after: Some(Box::new(after)),
        });
        self.commit(
            "resolve_suggestion",
            json!({"suggestion_id": id, "decision": label}),
            changes,
            counters,
        )?;
        Ok(match decision {
            Decision::Reject => None,
            _ => Some(delta),
        })
    }

    fn check_revision(&self, s: &Suggestion, payload: &SuggestionPayload) -> Result<(), SuggestError> {
        let invalid = |msg: &str| Err(SuggestError::InvalidRevisionPayload(msg.to_string()));
        let same_evidence = |a: &NodeId| match &s.payload {
            SuggestionPayload::Assign { evidence_id, .. } | SuggestionPayload::NewTheme { evidence_id, .. } => {
                evidence_id == a
            }
            _ => false,
        };
        let same_theme = |a: &NodeId| match &s.payload {
            SuggestionPayload::RenameTheme { theme_id, .. } | SuggestionPayload::DescribeTheme { theme_id, .. } => {
                theme_id == a
            }
            _ => false,
        };
        match payload {
            // a placement may be revised into either placement kind
            SuggestionPayload::Assign { evidence_id, .. } | SuggestionPayload::NewTheme { evidence_id, .. } => {
                if !same_evidence(evidence_id) {
                    return invalid("a placement revision must keep the same evidence node");
                }
            }
            SuggestionPayload::RenameTheme { theme_id, name } => {
                if s.kind != SuggestionKind::RenameTheme || !same_theme(theme_id) {
                    return invalid("a rename revision must keep the same theme");
                }
                if char_len(name.trim()) > 60 {
                    return invalid("theme names are limited to 60 characters");
                }
            }
            SuggestionPayload::DescribeTheme { theme_id, .. } => {
                if s.kind != SuggestionKind::DescribeTheme || !same_theme(theme_id) {
                    return invalid("a description revision must keep the same theme");
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use crate::graph::NodeSpec;
    use crate::ids::WorkspaceId;
    use crate::provider::{MockKey, MockScript};
    use crate::store::{graph_bytes, to_canonical_bytes};

    struct Fixture {
        ws: Workspace,
        themes: Vec<NodeId>,
        evidence: Vec<NodeId>,
    }

    fn add_theme(ws: &mut Workspace, name: &str) -> NodeId {
        ws.create_node(
            &Corpus::new(),
            NodeSpec::Theme {
                name: name.into(),
                position: Position::new(0.0, 0.0),
            },
        )
        .unwrap()
    }

    fn add_evidence(ws: &mut Workspace, text: &str) -> NodeId {
        ws.create_node(
            &Corpus::new(),
            NodeSpec::Evidence {
                text: text.into(),
                anchor: None,
                position: Position::new(100.0, 50.0),
            },
        )
        .unwrap()
    }

    /// T1 {index build time, index memory footprint}, T2 {query latency, recall at ten}
    fn two_themes() -> Fixture {
        let mut ws = Workspace::new(WorkspaceId::from("w"));
        let t1 = add_theme(&mut ws, "T1");
        let t2 = add_theme(&mut ws, "T2");
        let mut evidence = Vec::new();
        for (t, text) in [
            (t1, "index build time"),
            (t1, "index memory footprint"),
            (t2, "query latency"),
            (t2, "recall at ten"),
        ] {
            let e = add_evidence(&mut ws, text);
            ws.connect(t, e, EdgeKind::Membership).unwrap();
            evidence.push(e);
        }
        Fixture {
            ws,
            themes: vec![t1, t2],
            evidence,
        }
    }

    fn mock() -> Provider {
        Provider::mock(MockScript::default())
    }

    fn script(provider: &Provider, template: &str, responses: &[Value]) {
        provider
            .register_mock_script(MockKey::template(template), responses.iter().map(Value::to_string).collect())
            .unwrap();
    }

    #[test]
    fn ranking_prefers_shared_vocabulary() {
        let f = two_themes();
        let ranking = rank_themes(f.ws.graph(), "query latency spikes").unwrap();
        assert_eq!(ranking.0[0].theme_id, f.themes[1]);
        assert!(ranking.0[0].score > ranking.0[1].score);
        // oracle, by hand: N = 2 theme documents
        //   T2 doc "t2 query latency recall at ten": every term has df 1
        //   query tokens: query, latency (df 1) and spikes (df 0)
        let idf1 = (3.0f64 / 2.0).ln() + 1.0;
        let idf0 = 3.0f64.ln() + 1.0;
        let query_norm = (2.0 * idf1 * idf1 + idf0 * idf0).sqrt();
        let doc_norm = (6.0 * idf1 * idf1).sqrt();
        let expected = 2.0 * idf1 * idf1 / (query_norm * doc_norm);
        assert!((ranking.0[0].score - expected).abs() < 1e-12);
        assert_eq!(ranking.0[1].score, 0.0);
    }

    #[test]
    fn ranking_edge_cases() {
        let empty = Workspace::new(WorkspaceId::from("w"));
        assert!(rank_themes(empty.graph(), "anything").unwrap().0.is_empty());
        let f = two_themes();
        let ranking = rank_themes(f.ws.graph(), "zebra giraffe").unwrap();
        assert!(ranking.0.iter().all(|r| r.score == 0.0));
        assert_eq!(ranking.0.iter().map(|r| r.theme_id).collect::<Vec<_>>(), f.themes);
        assert_eq!(rank_themes(f.ws.graph(), "  ").unwrap_err().code(), "empty_query");
    }

    #[test]
    fn placement_in_empty_workspace_founds_a_theme() {
        let mut ws = Workspace::new(WorkspaceId::from("w"));
        let e = add_evidence(&mut ws, "query latency spikes");
        let provider = mock();
        let draft = suggest_placement(&ws, &provider, e, &SuggestConfig::default()).unwrap();
        assert_eq!(draft.payload.kind(), SuggestionKind::NewTheme);
        assert_eq!(draft.origin, SuggestionOrigin::LexicalFallback);
        assert!(provider.mock_calls().iter().all(|c| c.template_id != PLACEMENT_TEMPLATE));
        match draft.payload {
            SuggestionPayload::NewTheme { name, .. } => assert_eq!(name, "Query Latency Spikes"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn placement_echoes_mock_choice() {
        let mut f = two_themes();
        let e = add_evidence(&mut f.ws, "tail latency under load");
        let provider = mock();
        let t2 = f.themes[1];
        script(
            &provider,
            PLACEMENT_TEMPLATE,
            &[json!({"kind": "assign", "theme_id": t2.to_string(), "rationale": "mentions latency"})],
        );
        let draft = suggest_placement(&f.ws, &provider, e, &SuggestConfig::default()).unwrap();
        assert_eq!(draft.payload, SuggestionPayload::Assign { theme_id: t2, evidence_id: e });
        assert_eq!(draft.basis[0], e);
        let id = f.ws.record_suggestion(draft).unwrap();
        assert_eq!(f.ws.suggestion(id).unwrap().status, SuggestionStatus::Pending);
    }

    #[test]
    fn placement_rejects_unknown_theme() {
        let mut f = two_themes();
        let e = add_evidence(&mut f.ws, "tail latency under load");
        let provider = mock();
        script(
            &provider,
            PLACEMENT_TEMPLATE,
            &[json!({"kind": "assign", "theme_id": "n99", "rationale": "?"})],
        );
        let err = suggest_placement(&f.ws, &provider, e, &SuggestConfig::default()).unwrap_err();
        assert_eq!(err.code(), "provider_invalid");
        let err = suggest_placement(&f.ws, &provider, f.evidence[0], &SuggestConfig::default()).unwrap_err();
        assert_eq!(err.code(), "already_assigned");
        let err = suggest_placement(&f.ws, &provider, NodeId(404), &SuggestConfig::default()).unwrap_err();
        assert_eq!(err.code(), "unknown_node");
    }

    #[test]
    fn placement_propagates_unreachable_provider() {
        let mut f = two_themes();
        let e = add_evidence(&mut f.ws, "tail latency under load");
        let err = suggest_placement(&f.ws, &mock(), e, &SuggestConfig::default()).unwrap_err();
        assert_eq!(err.code(), "provider_unreachable");
    }

    fn pending_assign(f: &mut Fixture) -> (SuggestionId, NodeId, NodeId) {
        let e = add_evidence(&mut f.ws, "tail latency under load");
        let t2 = f.themes[1];
        let provider = mock();
        script(
            &provider,
            PLACEMENT_TEMPLATE,
            &[json!({"kind": "assign", "theme_id": t2.to_string(), "rationale": "latency"})],
        );
        let draft = suggest_placement(&f.ws, &provider, e, &SuggestConfig::default()).unwrap();
        (f.ws.record_suggestion(draft).unwrap(), t2, e)
    }

    #[test]
    fn preview_is_pure_and_repeatable() {
        let mut f = two_themes();
        let (id, t2, e) = pending_assign(&mut f);
        let before = to_canonical_bytes(&f.ws);
        let first = f.ws.preview_suggestion(id).unwrap();
        let second = f.ws.preview_suggestion(id).unwrap();
        assert_eq!(first, second);
        assert_eq!(to_canonical_bytes(&f.ws), before);
        match first.changes() {
            [GraphChange::AddEdge { edge }] => {
                assert_eq!((edge.from, edge.to, edge.kind), (t2, e, EdgeKind::Membership));
                assert_eq!(edge.created_by, CreatedBy::AiAccepted);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn accept_applies_preview() {
        let mut f = two_themes();
        let (id, t2, e) = pending_assign(&mut f);
        let preview = f.ws.preview_suggestion(id).unwrap();
        let applied = f.ws.resolve_suggestion(id, Decision::Accept).unwrap().unwrap();
        assert_eq!(applied, preview);
        assert!(f.ws.graph().find_edge(t2, e, EdgeKind::Membership).is_some());
        assert_eq!(f.ws.suggestion(id).unwrap().status, SuggestionStatus::Accepted);
        let err = f.ws.resolve_suggestion(id, Decision::Reject).unwrap_err();
        assert_eq!(err.code(), "suggestion_not_pending");
    }

    #[test]
    fn reject_leaves_graph_untouched() {
        let mut f = two_themes();
        let (id, _, _) = pending_assign(&mut f);
        let before = graph_bytes(&f.ws);
        let rev = f.ws.revision();
        assert_eq!(f.ws.resolve_suggestion(id, Decision::Reject).unwrap(), None);
        assert_eq!(graph_bytes(&f.ws), before);
        assert_eq!(f.ws.revision(), rev + 1);
        assert_eq!(f.ws.suggestion(id).unwrap().status, SuggestionStatus::Rejected);
    }

    #[test]
    fn deleting_target_makes_suggestion_stale() {
        let mut f = two_themes();
        let (id, t2, _) = pending_assign(&mut f);
        f.ws.delete_node(t2).unwrap();
        let err = f.ws.preview_suggestion(id).unwrap_err();
        assert_eq!(err.code(), "suggestion_stale");
        assert_eq!(f.ws.suggestion(id).unwrap().status, SuggestionStatus::Stale);
        assert_eq!(f.ws.resolve_suggestion(id, Decision::Accept).unwrap_err().code(), "suggestion_stale");
        assert_eq!(f.ws.preview_suggestion(SuggestionId(99)).unwrap_err().code(), "unknown_suggestion");
    }

    #[test]
    fn new_theme_preview_and_revision() {
        let mut ws = Workspace::new(WorkspaceId::from("w"));
        let e = add_evidence(&mut ws, "p99 latency");
        let provider = mock();
        script(&provider, NAME_TEMPLATE, &[json!({"name": "Latency", "rationale": "about latency"})]);
        let draft = suggest_placement(&ws, &provider, e, &SuggestConfig::default()).unwrap();
        let id = ws.record_suggestion(draft).unwrap();
        let preview = ws.preview_suggestion(id).unwrap();
        assert!(matches!(
            preview.changes(),
            [GraphChange::AddNode { node: Node::Theme(_) }, GraphChange::AddEdge { .. }]
        ));
        let revised = SuggestionPayload::NewTheme {
            name: "Tail Latency".into(),
            evidence_id: e,
        };
        let delta = ws
            .resolve_suggestion(id, Decision::Revise { payload: revised.clone() })
            .unwrap()
            .unwrap();
        let theme = match &delta.changes()[0] {
            GraphChange::AddNode { node: Node::Theme(t) } => t.clone(),
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(theme.name, "Tail Latency");
        assert_eq!(theme.created_by, CreatedBy::Human);
        assert_eq!(theme.position, Position::new(100.0, -110.0));
        let s = ws.suggestion(id).unwrap();
        assert_eq!(s.status, SuggestionStatus::Revised);
        assert_eq!(s.revised_payload.as_ref(), Some(&revised));
    }

    #[test]
    fn invalid_revision_rejected_without_change() {
        let mut f = two_themes();
        let (id, _, e) = pending_assign(&mut f);
        let before = to_canonical_bytes(&f.ws);
        let bad = SuggestionPayload::NewTheme {
            name: "  ".into(),
            evidence_id: e,
        };
        let err = f.ws.resolve_suggestion(id, Decision::Revise { payload: bad }).unwrap_err();
        assert_eq!(err.code(), "invalid_revision_payload");
        let other = SuggestionPayload::RenameTheme {
            theme_id: f.themes[0],
            name: "x".into(),
        };
        let err = f.ws.resolve_suggestion(id, Decision::Revise { payload: other }).unwrap_err();
        assert_eq!(err.code(), "invalid_revision_payload");
        assert_eq!(to_canonical_bytes(&f.ws), before);
    }

    #[test]
    fn naming_examples() {
        let mut f = two_themes();
        let empty = add_theme(&mut f.ws, "Empty");
        let provider = mock();
        let cfg = SuggestConfig::default();
        assert_eq!(suggest_theme_name(&f.ws, &provider, empty, &cfg).unwrap_err().code(), "no_evidence");
        script(&provider, NAME_TEMPLATE, &[json!({"name": "Index Maintenance"})]);
        let draft = suggest_theme_name(&f.ws, &provider, f.themes[0], &cfg).unwrap();
        assert_eq!(
            draft.payload,
            SuggestionPayload::RenameTheme {
                theme_id: f.themes[0],
                name: "Index Maintenance".into()
            }
        );
        assert_eq!(draft.basis, f.evidence[..2].to_vec());
        assert_eq!(draft.origin, SuggestionOrigin::Provider);
    }

    #[test]
    fn naming_fallback_uses_tfidf_top_terms() {
        let mut ws = Workspace::new(WorkspaceId::from("w"));
        let t1 = add_theme(&mut ws, "A");
        let t2 = add_theme(&mut ws, "B");
        for (t, text) in [(t1, "query latency"), (t1, "query latency spikes"), (t2, "index build time")] {
            let e = add_evidence(&mut ws, text);
            ws.connect(t, e, EdgeKind::Membership).unwrap();
        }
        // oracle: corpus is the two member concatenations, N = 2
        //   query tf 2 df 1, latency tf 2 df 1, spikes tf 1 df 1
        //   weights 2*idf, 2*idf, idf with idf = ln(3/2) + 1; the tie between
        //   query and latency falls to first occurrence
        let draft = suggest_theme_name(&ws, &mock(), t1, &SuggestConfig::default()).unwrap();
        assert_eq!(draft.origin, SuggestionOrigin::LexicalFallback);
        assert_eq!(
            draft.payload,
            SuggestionPayload::RenameTheme {
                theme_id: t1,
                name: "Query Latency Spikes".into()
            }
        );
    }

    #[test]
    fn naming_invalid_provider_output_is_an_error() {
        let f = two_themes();
        let provider = mock();
        script(&provider, NAME_TEMPLATE, &[json!({"name": "   "}), json!({"name": ""}), json!({"nom": 1})]);
        let err = suggest_theme_name(&f.ws, &provider, f.themes[0], &SuggestConfig::default()).unwrap_err();
        assert_eq!(err.code(), "provider_invalid");
    }

    fn latency_recall_theme() -> (Workspace, NodeId, NodeId, NodeId) {
        let mut ws = Workspace::new(WorkspaceId::from("w"));
        let t = add_theme(&mut ws, "Search quality");
        let e1 = add_evidence(&mut ws, "query latency spikes");
        let e2 = add_evidence(&mut ws, "recall at ten drops");
        ws.connect(t, e1, EdgeKind::Membership).unwrap();
        ws.connect(t, e2, EdgeKind::Membership).unwrap();
        (ws, t, e1, e2)
    }

    #[test]
    fn describe_keeps_grounded_keywords() {
        let (ws, t, e1, e2) = latency_recall_theme();
        let provider = mock();
        script(
            &provider,
            DESCRIBE_TEMPLATE,
            &[json!({
                "text": "Trade-offs between latency, recall and throughput.",
                "keywords": [
                    {"keyword": "latency", "evidence_ids": [e1.to_string()]},
                    {"keyword": "recall", "evidence_ids": [e2.to_string()]},
                    {"keyword": "throughput", "evidence_ids": [e1.to_string()]}
                ]
            })],
        );
        let draft = describe_theme(&ws, &provider, t).unwrap();
        let SuggestionPayload::DescribeTheme { description, .. } = &draft.payload else {
            panic!("wrong kind")
        };
        assert_eq!(description.keyword_links.len(), 2);
        assert_eq!(description.keyword_links[0].evidence_ids, vec![e1]);
        assert_eq!(description.keyword_links[1].evidence_ids, vec![e2]);
        assert_eq!(draft.warnings.len(), 1);
        assert!(draft.warnings[0].contains("throughput"));
    }

    #[test]
    fn describe_all_ungrounded_errors() {
        let (ws, t, _, _) = latency_recall_theme();
        let provider = mock();
        script(
            &provider,
            DESCRIBE_TEMPLATE,
            &[json!({"text": "About throughput.", "keywords": [{"keyword": "throughput"}]})],
        );
        assert_eq!(describe_theme(&ws, &provider, t).unwrap_err().code(), "ungrounded_description");
    }

    #[test]
    fn grounding_rules() {
        let members = [(NodeId(1), "query latency spikes"), (NodeId(2), "query latency")];
        let candidate = |kw: &str, ids: &[&str]| CandidateDescription {
            text: format!("This theme is about {kw}."),
            keywords: vec![CandidateKeyword {
                keyword: kw.into(),
                evidence_ids: ids.iter().map(|s| s.to_string()).collect(),
            }],
        };
        let kept = validate_grounding(&candidate("Latency", &[]), &members[..1]).unwrap();
        assert_eq!(kept.description.keyword_links[0].evidence_ids, vec![NodeId(1)]);
        let err = validate_grounding(&candidate("late", &[]), &members[1..]).unwrap_err();
        assert_eq!(err.code(), "ungrounded_description");
        let rewritten = validate_grounding(&candidate("spikes", &["n9"]), &members).unwrap();
        assert_eq!(rewritten.description.keyword_links[0].evidence_ids, vec![NodeId(1)]);
    }

    #[test]
    fn accepted_description_is_stored_on_theme() {
        let (mut ws, t, e1, _) = latency_recall_theme();
        let provider = mock();
        script(
            &provider,
            DESCRIBE_TEMPLATE,
            &[json!({"text": "Latency matters.", "keywords": [{"keyword": "latency", "evidence_ids": []}]})],
        );
        let id = ws.propose(describe_theme(&ws, &provider, t)).unwrap();
        ws.resolve_suggestion(id, Decision::Accept).unwrap();
        let stored = ws.graph().theme(t).unwrap().description.clone().unwrap();
        assert_eq!(stored.keyword_links, vec![KeywordLink { keyword: "latency".into(), evidence_ids: vec![e1] }]);
    }

    #[test]
    fn description_goes_stale_when_evidence_changes() {
        let (mut ws, t, e1, _) = latency_recall_theme();
        let provider = mock();
        script(
            &provider,
            DESCRIBE_TEMPLATE,
            &[json!({"text": "Latency matters.", "keywords": [{"keyword": "latency"}]})],
        );
        let id = ws.propose(describe_theme(&ws, &provider, t)).unwrap();
        ws.update_node(
            e1,
            crate::graph::NodePatch {
                text: Some("query speed spikes".into()),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(ws.resolve_suggestion(id, Decision::Accept).unwrap_err().code(), "suggestion_stale");
    }

    #[test]
    fn undo_reverts_acceptance() {
        let mut f = two_themes();
        let (id, _, _) = pending_assign(&mut f);
        let before = to_canonical_bytes(&f.ws);
        f.ws.resolve_suggestion(id, Decision::Accept).unwrap();
        f.ws.undo().unwrap();
        assert_eq!(to_canonical_bytes(&f.ws), before);
        assert_eq!(f.ws.suggestion(id).unwrap().status, SuggestionStatus::Pending);
    }
}
