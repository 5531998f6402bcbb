use std::str::FromStr;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use thematica_core::eval::{label_map_by_name, run_classification, score_accuracy, GoldLabeling, Matcher};
use thematica_core::graph::{codebook_projection, DetailTier};
use thematica_core::store::{export_codebook, ExportFormat};
use thematica_core::summarize::render_at_tier;
use thematica_core::{
    Anchor, Corpus, Decision, DocId, EdgeId, EdgeKind, GraphDelta, IngestPayload, Node, NodeId, NodePatch, NodeSpec,
    SuggestionId, Workspace,
};

use crate::error::{ApiError, ApiResult};
use crate::extract::Body;
use crate::jobs::{enqueue, global_suggestion_id, JobRequest};
use crate::state::AppState;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/zoom-tiers", get(zoom_tiers))
        .route("/workspaces", get(list_workspaces).post(create_workspace))
        .route("/workspaces/{id}", get(get_workspace))
        .route("/workspaces/{id}/documents", get(list_documents).post(ingest_document))
        .route("/documents/{doc_id}", get(get_document))
        .route("/documents/{doc_id}/snippets", post(extract_snippet))
        .route("/anchors/verify", post(verify_anchor))
        .route("/workspaces/{id}/nodes", post(create_node))
        .route("/workspaces/{id}/nodes/{node_id}", patch(update_node).delete(delete_node))
        .route("/workspaces/{id}/edges", post(create_edge))
        .route("/workspaces/{id}/edges/{edge_id}", axum::routing::delete(delete_edge))
        .route("/workspaces/{id}/themes/merge", post(merge_themes))
        .route("/workspaces/{id}/suggestions", get(list_suggestions))
        .route("/suggestions/{sid}", get(get_suggestion))
        .route("/suggestions/{sid}/preview", post(preview_suggestion))
        .route("/suggestions/{sid}/resolve", post(resolve_suggestion))
        .route("/workspaces/{id}/jobs", post(create_job))
        .route("/workspaces/{id}/jobs/{job_id}", get(get_workspace_job))
        .route("/jobs/{job_id}", get(get_job))
        .route("/workspaces/{id}/codebook", get(codebook))
        .route("/workspaces/{id}/undo", post(undo))
        .route("/workspaces/{id}/export", get(export))
        .route("/workspaces/{id}/eval", post(eval))
        .route("/workspaces/{id}/render", get(render))
        .with_state(state)
}

#[derive(Debug, Default, Deserialize)]
pub struct RevisionQuery {
    pub expected_revision: Option<u64>,
}

/// Response of every graph mutation.
#[derive(Debug, Serialize, Deserialize)]
pub struct MutationResult {
    pub revision: u64,
    pub delta: GraphDelta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_id: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_id: Option<EdgeId>,
}

fn parse<T: FromStr>(raw: &str, field: &str) -> ApiResult<T> {
    raw.parse()
        .map_err(|_| ApiError::validation(format!("invalid {field} `{raw}`")).with_details(json!({"field": field})))
}

fn split_suggestion_id(raw: &str) -> ApiResult<(String, SuggestionId)> {
    let (ws, sid) = raw
        .rsplit_once('.')
        .ok_or_else(|| ApiError::validation(format!("suggestion ids look like `<workspace>.s<n>`, got `{raw}`")))?;
    Ok((ws.to_string(), parse(sid, "suggestion_id")?))
}

/// The graph changes of the most recent event.
fn last_delta(ws: &Workspace) -> GraphDelta {
    ws.event_log()
        .last()
        .map(|e| e.inverse_graph_delta().inverse())
        .unwrap_or_default()
}

/// Runs `op` under the workspace's write lock after the optimistic revision
/// check, then persists.
async fn mutate<T>(
    state: &AppState,
    id: &str,
    query: &RevisionQuery,
    op: impl FnOnce(&mut Workspace, &Corpus) -> ApiResult<T>,
) -> ApiResult<(T, MutationResult)> {
    let handle = state.workspace(id)?;
    let mut ws = handle.write().await;
    if let Some(expected) = query.expected_revision {
        if expected != ws.revision() {
            return Err(ApiError::revision_conflict(expected, ws.revision()));
        }
    }
    let before = ws.revision();
    let out = {
        let corpus = state.corpus();
        op(&mut ws, &corpus)?
    };
    state.persist(&ws)?;
    let delta = if ws.revision() > before { last_delta(&ws) } else { GraphDelta::default() };
    Ok((
        out,
        MutationResult {
            revision: ws.revision(),
            delta,
            node_id: None,
            edge_id: None,
        },
    ))
}

async fn zoom_tiers(State(state): State<AppState>) -> Json<Value> {
    let t = state.zoom();
    Json(json!({
        "thresholds": t,
        "tiers": [
            {"tier": DetailTier::Full, "min_zoom": t.full},
            {"tier": DetailTier::Medium, "min_zoom": t.medium},
            {"tier": DetailTier::Short, "min_zoom": t.short},
            {"tier": DetailTier::Tiny, "min_zoom": 0.0},
        ],
        "theme_tier": DetailTier::Full,
    }))
}

fn summary(ws: &Workspace) -> Value {
    json!({
        "workspace_id": ws.workspace_id(),
        "revision": ws.revision(),
        "documents": ws.documents().len(),
        "nodes": ws.graph().nodes.len(),
        "edges": ws.graph().edges.len(),
    })
}

async fn list_workspaces(State(state): State<AppState>) -> Json<Value> {
    let mut out = Vec::new();
    for (_, handle) in state.workspace_ids() {
        out.push(summary(&*handle.read().await));
    }
    Json(Value::Array(out))
}

#[derive(Debug, Deserialize)]
struct CreateWorkspace {
    #[serde(default)]
    workspace_id: Option<String>,
}

async fn create_workspace(State(state): State<AppState>, Body(body): Body<CreateWorkspace>) -> ApiResult<Response> {
    let handle = state.create_workspace(body.workspace_id)?;
    let ws = handle.read().await;
    Ok((StatusCode::CREATED, Json(summary(&ws))).into_response())
}

async fn get_workspace(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Workspace>> {
    let handle = state.workspace(&id)?;
    let ws = handle.read().await.clone();
    Ok(Json(ws))
}

async fn list_documents(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let handle = state.workspace(&id)?;
    let ids = handle.read().await.documents().clone();
    let corpus = state.corpus();
    let docs: Vec<Value> = ids
        .iter()
        .filter_map(|d| corpus.get(d))
        .map(|d| json!({"doc_id": d.doc_id, "title": d.title, "pages": d.pages.len(), "checksum": d.checksum}))
        .collect();
    Ok(Json(Value::Array(docs)))
}

async fn ingest_document(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<RevisionQuery>,
    Body(payload): Body<IngestPayload>,
) -> ApiResult<Response> {
    let handle = state.workspace(&id)?;
    if let Some(expected) = query.expected_revision {
        let current = handle.read().await.revision();
        if expected != current {
            return Err(ApiError::revision_conflict(expected, current));
        }
    }
    let outcome = state.corpus_mut().ingest_document(payload.clone())?;
    if outcome.created {
        state.persist_document(&payload, &outcome.doc_id.0)?;
    }
    let doc_id = outcome.doc_id.clone();
    let (event, result) = mutate(&state, &id, &query, |ws, corpus| Ok(ws.attach_document(corpus, &doc_id)?)).await?;
    let status = if outcome.created { StatusCode::CREATED } else { StatusCode::OK };
    let body = json!({
        "doc_id": outcome.doc_id,
        "created": outcome.created,
        "attached": event.is_some(),
        "revision": result.revision,
    });
    Ok((status, Json(body)).into_response())
}

async fn get_document(State(state): State<AppState>, Path(doc_id): Path<String>) -> ApiResult<Json<Value>> {
    let corpus = state.corpus();
    let doc = corpus
        .get(&DocId(doc_id.clone()))
        .ok_or_else(|| ApiError::engine("unknown_document", format!("unknown document `{doc_id}`")))?;
    Ok(Json(serde_json::to_value(&**doc).expect("document serializes")))
}

#[derive(Debug, Deserialize)]
struct SnippetRequest {
    page_no: u32,
    char_start: usize,
    char_end: usize,
}

async fn extract_snippet(
    State(state): State<AppState>,
    Path(doc_id): Path<String>,
    Body(req): Body<SnippetRequest>,
) -> ApiResult<Json<Anchor>> {
    let anchor = state
        .corpus()
        .extract_snippet(&DocId(doc_id), req.page_no, req.char_start, req.char_end)?;
    Ok(Json(anchor))
}

async fn verify_anchor(State(state): State<AppState>, Body(anchor): Body<Anchor>) -> Json<Value> {
    Json(json!({"verdict": state.corpus().verify_anchor(&anchor)}))
}

async fn create_node(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<RevisionQuery>,
    Body(spec): Body<NodeSpec>,
) -> ApiResult<Response> {
    let (node_id, mut result) = mutate(&state, &id, &query, |ws, corpus| Ok(ws.create_node(corpus, spec)?)).await?;
    result.node_id = Some(node_id);
    Ok((StatusCode::CREATED, Json(result)).into_response())
}

async fn update_node(
    State(state): State<AppState>,
    Path((id, node_id)): Path<(String, String)>,
    Query(query): Query<RevisionQuery>,
    Body(patch): Body<NodePatch>,
) -> ApiResult<Json<MutationResult>> {
    let node_id: NodeId = parse(&node_id, "node_id")?;
    let (_, result) = mutate(&state, &id, &query, |ws, _| Ok(ws.update_node(node_id, patch)?)).await?;
    Ok(Json(result))
}

async fn delete_node(
    State(state): State<AppState>,
    Path((id, node_id)): Path<(String, String)>,
    Query(query): Query<RevisionQuery>,
) -> ApiResult<Json<MutationResult>> {
    let node_id: NodeId = parse(&node_id, "node_id")?;
    let (_, result) = mutate(&state, &id, &query, |ws, _| Ok(ws.delete_node(node_id)?)).await?;
    Ok(Json(result))
}

#[derive(Debug, Deserialize)]
struct EdgeRequest {
    from: NodeId,
    to: NodeId,
    kind: EdgeKind,
}

async fn create_edge(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<RevisionQuery>,
    Body(req): Body<EdgeRequest>,
) -> ApiResult<Response> {
    let (edge_id, mut result) = mutate(&state, &id, &query, |ws, _| Ok(ws.connect(req.from, req.to, req.kind)?)).await?;
    result.edge_id = Some(edge_id);
    Ok((StatusCode::CREATED, Json(result)).into_response())
}

async fn delete_edge(
    State(state): State<AppState>,
    Path((id, edge_id)): Path<(String, String)>,
    Query(query): Query<RevisionQuery>,
) -> ApiResult<Json<MutationResult>> {
    let edge_id: EdgeId = parse(&edge_id, "edge_id")?;
    let (_, result) = mutate(&state, &id, &query, |ws, _| Ok(ws.disconnect(edge_id)?)).await?;
    Ok(Json(result))
}

#[derive(Debug, Deserialize)]
struct MergeRequest {
    survivor: NodeId,
    absorbed: NodeId,
}

async fn merge_themes(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<RevisionQuery>,
    Body(req): Body<MergeRequest>,
) -> ApiResult<Json<MutationResult>> {
    let (_, result) = mutate(&state, &id, &query, |ws, _| Ok(ws.merge_themes(req.survivor, req.absorbed)?)).await?;
    Ok(Json(result))
}

fn suggestion_json(workspace_id: &str, s: &thematica_core::Suggestion) -> Value {
    let mut v = serde_json::to_value(s).expect("suggestion serializes");
    v["id"] = json!(global_suggestion_id(workspace_id, s.suggestion_id));
    v
}

async fn list_suggestions(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let handle = state.workspace(&id)?;
    let ws = handle.read().await;
    Ok(Json(Value::Array(ws.suggestions().values().map(|s| suggestion_json(&id, s)).collect())))
}

async fn get_suggestion(State(state): State<AppState>, Path(sid): Path<String>) -> ApiResult<Json<Value>> {
    let (ws_id, local) = split_suggestion_id(&sid)?;
    let handle = state.workspace(&ws_id)?;
    let ws = handle.read().await;
    let s = ws
        .suggestion(local)
        .ok_or_else(|| ApiError::engine("unknown_suggestion", format!("unknown suggestion `{sid}`")))?;
    Ok(Json(suggestion_json(&ws_id, s)))
}

async fn preview_suggestion(State(state): State<AppState>, Path(sid): Path<String>) -> ApiResult<Json<Value>> {
    let (ws_id, local) = split_suggestion_id(&sid)?;
    let handle = state.workspace(&ws_id)?;
    let mut ws = handle.write().await;
    let outcome = ws.preview_suggestion(local);
    if outcome.is_err() {
        // a stale verdict is recorded as an event
        state.persist(&ws)?;
    }
    let delta = outcome?;
    Ok(Json(json!({"suggestion_id": sid, "revision": ws.revision(), "delta": delta})))
}

async fn resolve_suggestion(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    Query(query): Query<RevisionQuery>,
    Body(decision): Body<Decision>,
) -> ApiResult<Json<MutationResult>> {
    let (ws_id, local) = split_suggestion_id(&sid)?;
    let handle = state.workspace(&ws_id)?;
    let outcome = mutate(&state, &ws_id, &query, |ws, _| Ok(ws.resolve_suggestion(local, decision)?)).await;
    if outcome.is_err() {
        let ws = handle.read().await;
        state.persist(&ws)?;
    }
    let (delta, mut result) = outcome?;
    result.delta = delta.unwrap_or_default();
    Ok(Json(result))
}

async fn create_job(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Body(request): Body<JobRequest>,
) -> ApiResult<Response> {
    let ticket = enqueue(&state, &id, request).await?;
    Ok((StatusCode::ACCEPTED, Json(ticket)).into_response())
}

fn unknown_job(job_id: &str) -> ApiError {
    ApiError::engine("unknown_job", format!("unknown job `{job_id}`"))
}

async fn get_job(State(state): State<AppState>, Path(job_id): Path<String>) -> ApiResult<Response> {
    let ticket = state.job(&job_id).ok_or_else(|| unknown_job(&job_id))?;
    Ok(Json(ticket).into_response())
}

async fn get_workspace_job(
    State(state): State<AppState>,
    Path((id, job_id)): Path<(String, String)>,
) -> ApiResult<Response> {
    state.workspace(&id)?;
    let ticket = state
        .job(&job_id)
        .filter(|t| t.workspace_id == id)
        .ok_or_else(|| unknown_job(&job_id))?;
    Ok(Json(ticket).into_response())
}

async fn codebook(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let handle = state.workspace(&id)?;
    let ws = handle.read().await;
    Ok(Json(serde_json::to_value(codebook_projection(ws.graph())).expect("codebook serializes")))
}

async fn undo(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<RevisionQuery>,
) -> ApiResult<Json<Value>> {
    let handle = state.workspace(&id)?;
    let mut ws = handle.write().await;
    if let Some(expected) = query.expected_revision {
        if expected != ws.revision() {
            return Err(ApiError::revision_conflict(expected, ws.revision()));
        }
    }
    let outcome = ws.undo()?;
    state.persist(&ws)?;
    Ok(Json(json!({"revision": outcome.revision, "delta": outcome.delta})))
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<ExportQuery>,
) -> ApiResult<Response> {
    let format: ExportFormat = match query.format.as_deref() {
        None => ExportFormat::Markdown,
        Some(raw) => raw
            .parse()
            .map_err(|e: String| ApiError::validation(e).with_details(json!({"field": "format"})))?,
    };
    let handle = state.workspace(&id)?;
    let ws = handle.read().await;
    let bytes = export_codebook(&ws, &state.corpus(), format);
    let content_type = match format {
        ExportFormat::Markdown => "text/markdown; charset=utf-8",
        ExportFormat::Json => "application/json",
    };
    Ok(([(header::CONTENT_TYPE, content_type)], bytes).into_response())
}

#[derive(Debug, Deserialize)]
struct EvalRequest {
    gold: GoldLabeling,
    #[serde(default = "lexical")]
    matcher: Matcher,
    #[serde(default)]
    iteration_tag: Option<String>,
}

fn lexical() -> Matcher {
    Matcher::Lexical
}

async fn eval(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Body(req): Body<EvalRequest>,
) -> ApiResult<Json<Value>> {
    req.gold.validate()?;
    let snapshot = state.workspace(&id)?.read().await.clone();
    let provider = state.provider();
    let report = tokio::task::spawn_blocking(move || {
        let graph = snapshot.graph();
        let assignments = run_classification(&req.gold.items, graph, req.matcher, &provider)?;
        let labels = label_map_by_name(graph, &req.gold.labels);
        let tag = req.iteration_tag.unwrap_or_else(|| format!("revision-{}", snapshot.revision()));
        score_accuracy(&assignments, &req.gold, &labels, &tag, req.matcher)
    })
    .await
    .map_err(|e| ApiError::engine("internal_error", e.to_string()))??;
    Ok(Json(json!({"report": report, "table": report.to_table()})))
}

#[derive(Debug, Deserialize)]
struct RenderQuery {
    zoom: f64,
}

/// Node text as the canvas should show it at `zoom`.
async fn render(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<RenderQuery>,
) -> ApiResult<Json<Value>> {
    let thresholds = state.zoom();
    let evidence_tier = thresholds.tier_for_zoom(query.zoom, thematica_core::NodeKind::Evidence)?;
    let handle = state.workspace(&id)?;
    let ws = handle.read().await;
    let nodes: Vec<Value> = ws
        .graph()
        .nodes
        .values()
        .map(|node| match node {
            Node::Theme(t) => json!({
                "node_id": t.node_id, "type": "theme", "tier": DetailTier::Full, "text": t.name,
                "position": t.position, "created_by": t.created_by,
            }),
            Node::Evidence(e) => {
                let (text, fallback) = match render_at_tier(e, evidence_tier) {
                    Ok(text) => (text.to_string(), None),
                    Err(err) => (e.text.clone(), Some(err.code())),
                };
                json!({
                    "node_id": e.node_id, "type": "evidence", "tier": evidence_tier, "text": text,
                    "summary_status": fallback.unwrap_or("ok"), "position": e.position,
                    "created_by": e.created_by, "anchored": e.anchor.is_some(),
                })
            }
        })
        .collect();
    Ok(Json(json!({
        "zoom": query.zoom,
        "evidence_tier": evidence_tier,
        "revision": ws.revision(),
        "nodes": nodes,
        "edges": ws.graph().edges.values().collect::<Vec<_>>(),
    })))
}
