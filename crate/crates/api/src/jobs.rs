//! Asynchronous AI work. A job computes against a snapshot of the workspace;
//! its result enters the live workspace only through a logged engine op.

use serde::{Deserialize, Serialize};

use thematica_core::suggest::{describe_theme, suggest_placement, suggest_theme_name, SuggestConfig, SuggestionDraft};
use thematica_core::summarize::{summarize_tiers, SummaryBudgets, SummaryTiers};
use thematica_core::{Node, NodeId, Provider, Workspace};

use crate::error::{ApiError, ApiResult, ErrorBody};
use crate::state::AppState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Placement,
    Name,
    Describe,
    Summarize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JobRequest {
    Placement { evidence_id: NodeId },
    Name { theme_id: NodeId },
    Describe { theme_id: NodeId },
    Summarize { node_id: NodeId },
}

impl JobRequest {
    pub fn kind(&self) -> JobKind {
        match self {
            JobRequest::Placement { .. } => JobKind::Placement,
            JobRequest::Name { .. } => JobKind::Name,
            JobRequest::Describe { .. } => JobKind::Describe,
            JobRequest::Summarize { .. } => JobKind::Summarize,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JobResult {
    Suggestion { suggestion_id: String },
    /// `applied` is false when the node changed while the job ran.
    Summaries { tiers: SummaryTiers, applied: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobTicket {
    pub job_id: String,
    pub workspace_id: String,
    pub kind: JobKind,
    pub state: JobState,
    pub base_revision: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<JobResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

pub fn global_suggestion_id(workspace_id: &str, suggestion: thematica_core::SuggestionId) -> String {
    format!("{workspace_id}.{suggestion}")
}

/// Rejects requests that could never succeed before queueing them.
fn precheck(ws: &Workspace, request: &JobRequest) -> ApiResult<()> {
    let graph = ws.graph();
    let missing = |id: NodeId| ApiError::rejected("unknown_node", format!("unknown node `{id}`"));
    let wrong = |id: NodeId, want: &str| ApiError::rejected("kind_mismatch", format!("`{id}` is not {want}"));
    match request {
        JobRequest::Placement { evidence_id: id } | JobRequest::Summarize { node_id: id } => match graph.node(*id) {
            None => Err(missing(*id)),
            Some(Node::Theme(_)) => Err(wrong(*id, "an evidence node")),
            Some(Node::Evidence(_)) if matches!(request, JobRequest::Placement { .. }) && graph.is_assigned(*id) => Err(
                ApiError::rejected("already_assigned", format!("evidence `{id}` already belongs to a theme")),
            ),
            Some(Node::Evidence(_)) => Ok(()),
        },
        JobRequest::Name { theme_id } | JobRequest::Describe { theme_id } => match graph.node(*theme_id) {
            None => Err(missing(*theme_id)),
            Some(Node::Evidence(_)) => Err(wrong(*theme_id, "a theme")),
            Some(Node::Theme(_)) if graph.members(*theme_id).is_empty() => Err(ApiError::rejected(
                "no_evidence",
                format!("theme `{theme_id}` has no member evidence"),
            )),
            Some(Node::Theme(_)) => Ok(()),
        },
    }
}

enum Computed {
    Draft(SuggestionDraft),
    Tiers(NodeId, SummaryTiers),
}

fn compute(snapshot: &Workspace, provider: &Provider, request: &JobRequest) -> ApiResult<Computed> {
    let cfg = SuggestConfig::default();
    Ok(match request {
        JobRequest::Placement { evidence_id } => Computed::Draft(suggest_placement(snapshot, provider, *evidence_id, &cfg)?),
        JobRequest::Name { theme_id } => Computed::Draft(suggest_theme_name(snapshot, provider, *theme_id, &cfg)?),
        JobRequest::Describe { theme_id } => Computed::Draft(describe_theme(snapshot, provider, *theme_id)?),
        JobRequest::Summarize { node_id } => {
            let text = snapshot.graph().evidence(*node_id).map(|e| e.text.clone()).unwrap_or_default();
            Computed::Tiers(*node_id, summarize_tiers(&text, provider, &SummaryBudgets::default())?)
        }
    })
}

pub async fn enqueue(state: &AppState, workspace_id: &str, request: JobRequest) -> ApiResult<JobTicket> {
    let handle = state.workspace(workspace_id)?;
    let snapshot = {
        let ws = handle.read().await;
        precheck(&ws, &request)?;
        ws.clone()
    };
    let ticket = JobTicket {
        job_id: state.mint_job_id(),
        workspace_id: workspace_id.to_string(),
        kind: request.kind(),
        state: JobState::Queued,
        base_revision: snapshot.revision(),
        result: None,
        error: None,
    };
    state.put_job(ticket.clone());

    let job_id = ticket.job_id.clone();
    let state = state.clone();
    let workspace_id = workspace_id.to_string();
    tokio::spawn(async move {
        state.update_job(&job_id, |t| t.state = JobState::Running);
        let provider = state.provider();
        let computed = tokio::task::spawn_blocking(move || compute(&snapshot, &provider, &request))
            .await
            .unwrap_or_else(|e| Err(ApiError::engine("internal_error", e.to_string())));
        let outcome = match computed {
            Ok(computed) => {
                let mut ws = handle.write().await;
                let result = match computed {
                    Computed::Draft(draft) => ws.record_suggestion(draft).map_err(ApiError::from).map(|id| {
                        JobResult::Suggestion {
                            suggestion_id: global_suggestion_id(&workspace_id, id),
                        }
                    }),
                    Computed::Tiers(node_id, tiers) => {
                        // a node deleted or edited meanwhile just drops the result
                        let applied = ws.apply_summaries(node_id, tiers.clone()).unwrap_or(false);
                        Ok(JobResult::Summaries { tiers, applied })
                    }
                };
                result.and_then(|r| state.persist(&ws).map(|_| r))
            }
            Err(e) => Err(e),
        };
        state.update_job(&job_id, |t| match outcome {
            Ok(result) => {
                t.state = JobState::Done;
                t.result = Some(result);
            }
            Err(e) => {
                t.state = JobState::Failed;
                t.error = Some(e.body);
            }
        });
    });
    Ok(ticket)
}
