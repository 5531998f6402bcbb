//! Classification against gold labels and the refinement harness.
//!
//! Items are assigned to the best-matching theme of a workspace, themes map
//! to gold labels by name, and accuracy is measured after each scripted
//! round of theme edits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::graph::{EdgeKind, Graph, NodePatch, NodeSpec, Position};
use crate::ids::{NodeId, WorkspaceId};
use crate::provider::Provider;
use crate::store::Workspace;
use crate::suggest::{check_placement, placement_request, rank_themes, SuggestError};

pub const EVAL_SCHEMA: &str = "eval/1";
pub const REFINEMENT_SCHEMA: &str = "refinement/1";

/// The shipped 16-item fixture with two refinement iterations.
pub const SHIPPED_REFINEMENT: &str = include_str!("../fixtures/refinement.json");

const EXISTING_ONLY: &str = "You must choose one of the existing themes; proposing a new theme is not allowed.";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldItem {
    pub item_id: String,
    pub text: String,
    pub gold_theme: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabeling {
    pub schema: String,
    pub items: Vec<GoldItem>,
    pub labels: Vec<String>,
}

impl GoldLabeling {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.schema != EVAL_SCHEMA {
            return Err(EvalError::UnknownSchemaVersion(self.schema.clone()));
        }
        let labels: BTreeSet<&str> = self.labels.iter().map(String::as_str).collect();
        let mut ids = BTreeSet::new();
        for item in &self.items {
            if item.text.trim().is_empty() {
                return Err(EvalError::EmptyItem(item.item_id.clone()));
            }
            if !ids.insert(item.item_id.as_str()) {
                return Err(EvalError::InvalidFixture(format!("duplicate item_id `{}`", item.item_id)));
            }
            if !labels.contains(item.gold_theme.as_str()) {
                return Err(EvalError::InvalidFixture(format!(
                    "gold theme `{}` of `{}` is not in the label set",
                    item.gold_theme, item.item_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    /// Argmax of the TF-IDF theme ranking.
    Lexical,
    /// The placement prompt restricted to existing themes.
    Provider,
}

impl FromStr for Matcher {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lexical" => Ok(Matcher::Lexical),
            "provider" => Ok(Matcher::Provider),
            other => Err(EvalError::InvalidFixture(format!("unknown matcher `{other}`"))),
        }
    }
}

impl fmt::Display for Matcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Matcher::Lexical => "lexical",
            Matcher::Provider => "provider",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub item_id: String,
    pub theme_id: NodeId,
    pub score: f64,
    /// Nothing in the item matched any theme; the pick is the tie rule's.
    pub low_confidence: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredAssignment {
    pub item_id: String,
    pub theme_id: NodeId,
    pub predicted_label: Option<String>,
    pub gold_theme: String,
    pub correct: bool,
    pub score: f64,
    pub low_confidence: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iteration_tag: String,
    pub matcher: Matcher,
    pub assignments: Vec<ScoredAssignment>,
    pub correct_count: usize,
    pub total_count: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("the workspace has no themes")]
    NoThemes,
    #[error("item `{0}` has empty text")]
    EmptyItem(String),
    #[error("assignments and gold labels disagree on item `{0}`")]
    ItemMismatch(String),
    #[error("unknown schema version `{0}`")]
    UnknownSchemaVersion(String),
    #[error("invalid fixture: {0}")]
    InvalidFixture(String),
    #[error(transparent)]
    Suggest(#[from] SuggestError),
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::NoThemes => "no_themes",
            EvalError::EmptyItem(_) => "empty_item",
            EvalError::ItemMismatch(_) => "item_mismatch",
            EvalError::UnknownSchemaVersion(_) => "unknown_schema_version",
            EvalError::InvalidFixture(_) => "invalid_fixture",
            EvalError::Suggest(e) => e.code(),
        }
    }
}

pub fn accuracy(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

/// Assigns every item to one theme of `graph`.
pub fn run_classification(
    items: &[GoldItem],
    graph: &Graph,
    matcher: Matcher,
    provider: &Provider,
) -> Result<Vec<Assignment>, EvalError> {
    let known: BTreeSet<NodeId> = graph.themes().map(|t| t.node_id).collect();
    if known.is_empty() {
        return Err(EvalError::NoThemes);
    }
    if let Some(empty) = items.iter().find(|i| i.text.trim().is_empty()) {
        return Err(EvalError::EmptyItem(empty.item_id.clone()));
    }
    items
        .iter()
        .map(|item| {
            let ranking = rank_themes(graph, &item.text)?;
            let best = ranking.0[0];
            let (theme_id, score) = match matcher {
                Matcher::Lexical => (best.theme_id, best.score),
                Matcher::Provider => {
                    let request = placement_request(graph, &item.text, &ranking, known.len(), EXISTING_ONLY);
                    let value = provider
                        .complete_checked(&request, |v| check_placement(v, &known, false))
                        .map_err(SuggestError::from)?;
                    let theme_id: NodeId = value["theme_id"].as_str().unwrap_or_default().parse().expect("checked");
                    let score = ranking.0.iter().find(|r| r.theme_id == theme_id).map_or(0.0, |r| r.score);
                    (theme_id, score)
                }
            };
            Ok(Assignment {
                item_id: item.item_id.clone(),
                theme_id,
                score,
                low_confidence: score == 0.0,
            })
        })
        .collect()
}

/// Themes whose name equals a gold label, ignoring case and surrounding
/// whitespace.
pub fn label_map_by_name(graph: &Graph, labels: &[String]) -> BTreeMap<NodeId, String> {
    graph
        .themes()
        .filter_map(|t| {
            labels
                .iter()
                .find(|l| l.trim().eq_ignore_ascii_case(t.name.trim()))
                .map(|l| (t.node_id, l.clone()))
        })
        .collect()
}

pub fn score_accuracy(
    assignments: &[Assignment],
    gold: &GoldLabeling,
    label_map: &BTreeMap<NodeId, String>,
    iteration_tag: &str,
    matcher: Matcher,
) -> Result<EvalReport, EvalError> {
    let by_id: BTreeMap<&str, &GoldItem> = gold.items.iter().map(|i| (i.item_id.as_str(), i)).collect();
    if assignments.len() != by_id.len() {
        let assigned: BTreeSet<&str> = assignments.iter().map(|a| a.item_id.as_str()).collect();
        let missing = by_id
            .keys()
            .find(|id| !assigned.contains(*id))
            .map_or_else(|| "(duplicate assignment)".to_string(), |id| id.to_string());
        return Err(EvalError::ItemMismatch(missing));
    }
    let mut seen = BTreeSet::new();
    let mut scored = Vec::with_capacity(assignments.len());
    for a in assignments {
        let item = by_id
            .get(a.item_id.as_str())
            .filter(|_| seen.insert(a.item_id.as_str()))
            .ok_or_else(|| EvalError::ItemMismatch(a.item_id.clone()))?;
        let predicted_label = label_map.get(&a.theme_id).cloned();
        scored.push(ScoredAssignment {
            item_id: a.item_id.clone(),
            theme_id: a.theme_id,
            correct: predicted_label.as_deref() == Some(item.gold_theme.as_str()),
            predicted_label,
            gold_theme: item.gold_theme.clone(),
            score: a.score,
            low_confidence: a.low_confidence,
        });
    }
    let correct_count = scored.iter().filter(|s| s.correct).count();
    let total_count = scored.len();
    Ok(EvalReport {
        iteration_tag: iteration_tag.to_string(),
        matcher,
        assignments: scored,
        correct_count,
        total_count,
        accuracy: accuracy(correct_count, total_count),
    })
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let width = self.assignments.iter().map(|a| a.item_id.len()).max().unwrap_or(4).max(4);
        let _ = writeln!(out, "{} ({} matcher)", self.iteration_tag, self.matcher);
        let _ = writeln!(out, "{:<width$}  {:<6}  {:<24}  {:<24}  {:>6}  ok", "item", "theme", "predicted", "gold", "score");
        for a in &self.assignments {
            let mut predicted = a.predicted_label.clone().unwrap_or_else(|| "-".into());
            if a.low_confidence {
                predicted.push_str(" (?)");
            }
            let _ = writeln!(
                out,
                "{:<width$}  {:<6}  {:<24}  {:<24}  {:>6.4}  {}",
                a.item_id,
                a.theme_id.to_string(),
                predicted,
                a.gold_theme,
                a.score,
                if a.correct { "yes" } else { "no" }
            );
        }
        let _ = writeln!(
            out,
            "accuracy {}/{} = {:.4}",
            self.correct_count, self.total_count, self.accuracy
        );
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedTheme {
    pub name: String,
    pub evidence: Vec<String>,
}

/// A theme edit in a refinement round. Themes are named by their current
/// name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RefinementEdit {
    Rename { theme: String, name: String },
    Merge { survivor: String, absorbed: String },
    AddEvidence { theme: String, text: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Iteration {
    pub tag: String,
    pub edits: Vec<RefinementEdit>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementFixture {
    pub schema: String,
    pub gold: GoldLabeling,
    pub themes: Vec<SeedTheme>,
    pub iterations: Vec<Iteration>,
}

impl RefinementFixture {
    pub fn parse(json: &str) -> Result<Self, EvalError> {
        let fixture: RefinementFixture =
            serde_json::from_str(json).map_err(|e| EvalError::InvalidFixture(e.to_string()))?;
        if fixture.schema != REFINEMENT_SCHEMA {
            return Err(EvalError::UnknownSchemaVersion(fixture.schema));
        }
        fixture.gold.validate()?;
        Ok(fixture)
    }

    pub fn shipped() -> Self {
        Self::parse(SHIPPED_REFINEMENT).expect("shipped fixture is valid")
    }

    /// The starting workspace: one theme per seed, in order, with its
    /// evidence as free annotations.
    pub fn seed_workspace(&self) -> Result<Workspace, EvalError> {
        let mut ws = Workspace::new(WorkspaceId::from("eval"));
        for (i, seed) in self.themes.iter().enumerate() {
            let x = i as f64 * 400.0;
            let theme = ws
                .create_node(
                    &Corpus::new(),
                    NodeSpec::Theme {
                        name: seed.name.clone(),
                        position: Position::new(x, 0.0),
                    },
                )
                .map_err(invalid)?;
            for text in &seed.evidence {
                add_member(&mut ws, theme, text)?;
            }
        }
        Ok(ws)
    }
}

fn invalid(e: impl fmt::Display) -> EvalError {
    EvalError::InvalidFixture(e.to_string())
}

fn add_member(ws: &mut Workspace, theme: NodeId, text: &str) -> Result<(), EvalError> {
    let at = ws.graph().theme(theme).map(|t| t.position).unwrap_or(Position::new(0.0, 0.0));
    let evidence = ws
        .create_node(
            &Corpus::new(),
            NodeSpec::Evidence {
                text: text.to_string(),
                anchor: None,
                position: Position::new(at.x, at.y + 160.0),
            },
        )
        .map_err(invalid)?;
    ws.connect(theme, evidence, EdgeKind::Membership).map_err(invalid)?;
    Ok(())
}

fn theme_named(ws: &Workspace, name: &str) -> Result<NodeId, EvalError> {
    ws.graph()
        .themes()
        .find(|t| t.name == name)
        .map(|t| t.node_id)
        .ok_or_else(|| EvalError::InvalidFixture(format!("no theme named `{name}`")))
}

pub fn apply_edit(ws: &mut Workspace, edit: &RefinementEdit) -> Result<(), EvalError> {
    match edit {
        RefinementEdit::Rename { theme, name } => {
            let id = theme_named(ws, theme)?;
            ws.update_node(
                id,
                NodePatch {
                    name: Some(name.clone()),
                    ..Default::default()
                },
            )
            .map_err(invalid)?;
        }
        RefinementEdit::Merge { survivor, absorbed } => {
            let (s, a) = (theme_named(ws, survivor)?, theme_named(ws, absorbed)?);
            ws.merge_themes(s, a).map_err(invalid)?;
        }
        RefinementEdit::AddEvidence { theme, text } => {
            let id = theme_named(ws, theme)?;
            add_member(ws, id, text)?;
        }
    }
    Ok(())
}

/// Applies the iterations cumulatively and scores the gold items after each.
pub fn run_refinement(
    fixture: &RefinementFixture,
    matcher: Matcher,
    provider: &Provider,
) -> Result<Vec<EvalReport>, EvalError> {
    let mut ws = fixture.seed_workspace()?;
    let mut reports = Vec::with_capacity(fixture.iterations.len());
    for iteration in &fixture.iterations {
        for edit in &iteration.edits {
            apply_edit(&mut ws, edit)?;
        }
        let assignments = run_classification(&fixture.gold.items, ws.graph(), matcher, provider)?;
        let labels = label_map_by_name(ws.graph(), &fixture.gold.labels);
        reports.push(score_accuracy(&assignments, &fixture.gold, &labels, &iteration.tag, matcher)?);
    }
    Ok(reports)
}
