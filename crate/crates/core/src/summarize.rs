//! Summary tiers behind semantic zoom.
//!
//! The provider is asked for all three tiers in one structured call. Whatever
//! comes back is clamped so that `tiny <= short <= medium <= original` and each
//! tier fits its budget, using the extractive rule below. If the provider
//! fails, every tier is produced extractively.

use serde::{Deserialize, Serialize};

use crate::graph::{DetailTier, EvidenceNode};
use crate::provider::{PromptRequest, Provider, SUMMARIZE_TEMPLATE};
use crate::text::{char_len, sha256_hex};

pub const ELLIPSIS: char = '…';

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryBudgets {
    pub medium: usize,
    pub short: usize,
    pub tiny: usize,
}

impl Default for SummaryBudgets {
    fn default() -> Self {
        Self {
            medium: 280,
            short: 120,
            tiny: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummarySource {
    Provider,
    Extractive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryTiers {
    pub medium: String,
    pub short: String,
    pub tiny: String,
    pub source: SummarySource,
    pub source_text_checksum: String,
}

impl SummaryTiers {
    pub fn is_fresh_for(&self, text: &str) -> bool {
        self.source_text_checksum == text_checksum(text)
    }

    pub fn tier(&self, tier: DetailTier) -> Option<&str> {
        match tier {
            DetailTier::Full => None,
            DetailTier::Medium => Some(&self.medium),
            DetailTier::Short => Some(&self.short),
            DetailTier::Tiny => Some(&self.tiny),
        }
    }
}

pub fn text_checksum(text: &str) -> String {
    sha256_hex(text)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SummarizeError {
    #[error("text to summarize is empty")]
    EmptyText,
    #[error("budget {0} is too small; at least 2 characters are needed")]
    BudgetTooSmall(usize),
    #[error("node has no summaries yet")]
    SummariesMissing,
    #[error("node text changed since its summaries were computed")]
    SummariesStale,
}

impl SummarizeError {
    pub fn code(&self) -> &'static str {
        match self {
            SummarizeError::EmptyText => "empty_text",
            SummarizeError::BudgetTooSmall(_) => "budget_too_small",
            SummarizeError::SummariesMissing => "summaries_missing",
            SummarizeError::SummariesStale => "summaries_stale",
        }
    }
}

/// Truncates `text` to at most `budget` characters.
///
/// Text that already fits is returned unchanged. Otherwise the result is the
/// longest prefix ending at a word end with at most `budget - 1` characters,
/// followed by `…`. When even the first word is too long, the raw
/// `budget - 1` character prefix is used instead.
pub fn extractive_summary(text: &str, budget: usize) -> Result<String, SummarizeError> {
    if budget < 2 {
        return Err(SummarizeError::BudgetTooSmall(budget));
    }
    if text.is_empty() {
        return Err(SummarizeError::EmptyText);
    }
    if char_len(text) <= budget {
        return Ok(text.to_string());
    }
    let limit = budget - 1;
    let chars: Vec<char> = text.chars().collect();
    // a word ends at i when chars[i-1] is not whitespace and chars[i] is
    let cut = (1..=limit.min(chars.len() - 1))
        .rev()
        .find(|&i| !chars[i - 1].is_whitespace() && chars[i].is_whitespace())
        .unwrap_or(limit);
    let mut out: String = chars[..cut].iter().collect();
    out.push(ELLIPSIS);
    Ok(out)
}

/// Fits `candidate` into `cap` characters, tolerating caps below the
/// extractive minimum.
fn fit(candidate: &str, cap: usize) -> String {
    if char_len(candidate) <= cap {
        candidate.to_string()
    } else if cap >= 2 {
        extractive_summary(candidate, cap).expect("cap >= 2 and candidate non-empty")
    } else {
        candidate.chars().take(cap).collect()
    }
}

/// Builds tiers from candidate strings, enforcing budgets and monotonicity.
fn clamp_tiers(original: &str, candidates: [&str; 3], budgets: &SummaryBudgets, source: SummarySource) -> SummaryTiers {
    let mut prev_len = char_len(original);
    let mut tiers: [String; 3] = Default::default();
    let caps = [budgets.medium, budgets.short, budgets.tiny];
    for (i, candidate) in candidates.iter().enumerate() {
        let cap = caps[i].min(prev_len);
        let candidate = candidate.trim();
        let basis = if candidate.is_empty() { original } else { candidate };
        tiers[i] = fit(basis, cap);
        prev_len = char_len(&tiers[i]);
    }
    let [medium, short, tiny] = tiers;
    SummaryTiers {
        medium,
        short,
        tiny,
        source,
        source_text_checksum: text_checksum(original),
    }
}

pub fn extractive_tiers(text: &str, budgets: &SummaryBudgets) -> Result<SummaryTiers, SummarizeError> {
    if text.is_empty() {
        return Err(SummarizeError::EmptyText);
    }
    Ok(clamp_tiers(text, [text, text, text], budgets, SummarySource::Extractive))
}

pub fn summarize_tiers(
    text: &str,
    provider: &Provider,
    budgets: &SummaryBudgets,
) -> Result<SummaryTiers, SummarizeError> {
    if text.trim().is_empty() {
        return Err(SummarizeError::EmptyText);
    }
    if char_len(text) <= budgets.tiny.min(budgets.short).min(budgets.medium) {
        return extractive_tiers(text, budgets);
    }
    let request = PromptRequest::new(SUMMARIZE_TEMPLATE)
        .var("text", text)
        .var("medium_budget", budgets.medium.to_string())
        .var("short_budget", budgets.short.to_string())
        .var("tiny_budget", budgets.tiny.to_string());
    match provider.complete_structured(&request) {
        Ok(value) => {
            let field = |name: &str| value.get(name).and_then(|v| v.as_str()).unwrap_or_default().to_string();
            let (medium, short, tiny) = (field("medium"), field("short"), field("tiny"));
            Ok(clamp_tiers(text, [&medium, &short, &tiny], budgets, SummarySource::Provider))
        }
        Err(_) => extractive_tiers(text, budgets),
    }
}

/// Text shown for `node` at `tier`.
pub fn render_at_tier(node: &EvidenceNode, tier: DetailTier) -> Result<&str, SummarizeError> {
    if tier == DetailTier::Full {
        return Ok(&node.text);
    }
    let tiers = node.summaries.as_ref().ok_or(SummarizeError::SummariesMissing)?;
    if !tiers.is_fresh_for(&node.text) {
        return Err(SummarizeError::SummariesStale);
    }
    Ok(tiers.tier(tier).expect("non-full tier"))
}
