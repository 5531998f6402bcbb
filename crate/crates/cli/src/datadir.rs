//! Read-only access to a server data directory: `documents/<doc_id>.json`
//! holds ingest payloads, `workspaces/<id>.json` holds workspace files.

use std::path::{Path, PathBuf};

use serde_json::Value;
use thematica_core::corpus::IngestPayload;
use thematica_core::store::load_workspace;
use thematica_core::{AnchorVerdict, Corpus, Workspace};

pub fn load_corpus(data_dir: &Path) -> Result<Corpus, String> {
    let mut corpus = Corpus::new();
    for path in json_files(&data_dir.join("documents"))? {
        let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let payload: IngestPayload = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        corpus.ingest_document(payload).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(corpus)
}

pub fn workspace_path(data_dir: &Path, workspace_id: &str) -> PathBuf {
    data_dir.join("workspaces").join(format!("{workspace_id}.json"))
}

pub fn load(data_dir: &Path, workspace_id: &str) -> Result<(Corpus, Workspace), String> {
    let corpus = load_corpus(data_dir)?;
    let path = workspace_path(data_dir, workspace_id);
    let ws = load_workspace(&path, &corpus).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((corpus, ws))
}

pub fn workspace_files(data_dir: &Path) -> Result<Vec<PathBuf>, String> {
    json_files(&data_dir.join("workspaces"))
}

/// One line per problem found in a workspace file; empty when it loads
/// cleanly. Anchors are checked individually before the full integrity
/// check so every broken anchor is listed, not just the first.
pub fn verify_file(path: &Path, corpus: &Corpus) -> Vec<String> {
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut problems = Vec::new();
    let raw = std::fs::read(path)
        .map_err(|e| e.to_string())
        .and_then(|b| serde_json::from_slice::<Value>(&b).map_err(|e| e.to_string()));
    if let Ok(Some(ws)) = raw.as_ref().map(|v| v.get("workspace").cloned()) {
        if let Ok(ws) = serde_json::from_value::<Workspace>(ws) {
            for evidence in ws.graph().evidence_nodes() {
                let Some(anchor) = &evidence.anchor else { continue };
                let verdict = match corpus.verify_anchor(anchor) {
                    AnchorVerdict::Valid => continue,
                    AnchorVerdict::Mismatch => "mismatch",
                    AnchorVerdict::UnknownDocument => "unknown_document",
                };
                problems.push(format!("{name} {}: anchor {verdict}", evidence.node_id));
            }
        }
    }
    if let Err(e) = load_workspace(path, corpus) {
        problems.push(format!("{name}: {} ({e})", e.code()));
    }
    problems
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, String> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}
