//! Workspace engine for qualitative sensemaking: source documents and
//! anchors, a graph of evidence and theme nodes, tiered summaries, AI
//! suggestions the researcher previews and resolves, persistence with undo,
//! and an evaluation harness.
//!
//! Nothing in this crate touches the network. Model calls go through
//! [`provider::Backend`], which the caller supplies.

pub mod corpus;
pub mod eval;
pub mod graph;
pub mod ids;
pub mod provider;
pub mod store;
pub mod suggest;
pub mod summarize;
pub mod text;

pub use corpus::{Anchor, AnchorVerdict, Corpus, CorpusError, IngestPayload, SourceDocument};
pub use eval::{EvalError, EvalReport, GoldLabeling, Matcher, RefinementFixture};
pub use graph::{
    CodebookView, CreatedBy, DetailTier, Edge, EdgeKind, EvidenceNode, Graph, GraphChange, GraphDelta, GraphError,
    Node, NodeKind, NodePatch, NodeSpec, Position, ThemeNode, ZoomThresholds,
};
pub use ids::{DocId, EdgeId, NodeId, SuggestionId, WorkspaceId};
pub use provider::{Backend, BackendError, MockScript, PromptRequest, Provider, ProviderConfig, ProviderError, ProviderMode};
pub use store::{ExportFormat, StoreError, Workspace, WorkspaceEvent};
pub use suggest::{Decision, GroundedDescription, KeywordLink, SuggestConfig, SuggestError, Suggestion, SuggestionDraft, SuggestionStatus};
pub use summarize::{SummarizeError, SummaryBudgets, SummaryTiers};
