//! Embedded reference fixtures: transcriptions of the published result
//! tables and the shipped suite manifests. An `EMBEDKIT_FIXTURES`
//! environment variable pointing at a directory with the same relative
//! layout overrides the embedded copies (useful for corrected or extended
//! transcriptions without a rebuild).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable naming an override directory for fixture files.
pub const FIXTURE_ROOT_ENV: &str = "EMBEDKIT_FIXTURES";

const EMBEDDED: &[(&str, &str)] = &[
    ("tables/full_results.json", include_str!("../../fixtures/tables/full_results.json")),
    ("tables/lite_results.json", include_str!("../../fixtures/tables/lite_results.json")),
    ("tables/per_language.json", include_str!("../../fixtures/tables/per_language.json")),
    ("tables/ablation.json", include_str!("../../fixtures/tables/ablation.json")),
    ("tables/qe_retention.json", include_str!("../../fixtures/tables/qe_retention.json")),
    ("manifests/full.json", include_str!("../../fixtures/manifests/full.json")),
    ("manifests/lite.json", include_str!("../../fixtures/manifests/lite.json")),
    ("manifests/lite-synthetic.json", include_str!("../../fixtures/manifests/lite-synthetic.json")),
];

fn fixture_from(root: Option<&Path>, name: &str) -> Result<String> {
    if let Some(dir) = root {
        let path = dir.join(name);
        return std::fs::read_to_string(&path)
            .map_err(|e| Error::io(path.display().to_string(), e));
    }
    EMBEDDED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, content)| (*content).to_string())
        .ok_or_else(|| Error::Missing(format!("no embedded fixture named {name:?}")))
}

/// Returns a fixture file's contents, honoring the override directory.
pub fn fixture(name: &str) -> Result<String> {
    let root = std::env::var_os(FIXTURE_ROOT_ENV).map(std::path::PathBuf::from);
    fixture_from(root.as_deref(), name)
}

/// Names of every shipped fixture file, relative to the fixture root.
pub fn fixture_names() -> Vec<&'static str> {
    EMBEDDED.iter().map(|(n, _)| *n).collect()
}

/// One model's row in a results table: scores per column plus the printed
/// average.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub scores: Vec<f64>,
    pub average: f64,
}

/// A published results table: family means (full suite) or task means
/// (lite suite) per model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultsTable {
    pub description: String,
    pub columns: Vec<String>,
    pub rows: Vec<ModelRow>,
}

/// One model's per-language row; `None` marks uncovered languages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerLanguageRow {
    pub model: String,
    pub scores: Vec<Option<f64>>,
    pub average: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerLanguageBlock {
    pub dataset: String,
    pub rows: Vec<PerLanguageRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerLanguageTable {
    pub description: String,
    pub languages: Vec<String>,
    pub datasets: Vec<PerLanguageBlock>,
}

/// One ablation configuration's row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub expansion: bool,
    pub qe_threshold: f64,
    pub scores: Vec<f64>,
    pub average: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationTable {
    pub description: String,
    pub columns: Vec<String>,
    pub rows: Vec<AblationRow>,
}

/// Retained translation-pair counts per language at each threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QeRetentionRow {
    pub language: String,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QeRetentionTable {
    pub description: String,
    pub note: String,
    pub thresholds: Vec<f64>,
    pub rows: Vec<QeRetentionRow>,
    pub printed_totals: Vec<u64>,
}

fn parse_table<T: for<'de> Deserialize<'de>>(name: &str) -> Result<T> {
    let content = fixture(name)?;
    serde_json::from_str(&content)
        .map_err(|e| Error::Parse(format!("fixture {name}: {e}")))
}

fn check_row_widths(name: &str, width: usize, rows: impl Iterator<Item = usize>) -> Result<()> {
    for (i, w) in rows.enumerate() {
        if w != width {
            return Err(Error::Parse(format!(
                "fixture {name} row {i}: {w} scores for {width} columns"
            )));
        }
    }
    Ok(())
}

/// Family-mean reference table for the full suite.
pub fn load_full_results() -> Result<ResultsTable> {
    let t: ResultsTable = parse_table("tables/full_results.json")?;
    check_row_widths("full_results", t.columns.len(), t.rows.iter().map(|r| r.scores.len()))?;
    Ok(t)
}

/// Task-mean reference table for the lite suite.
pub fn load_lite_results() -> Result<ResultsTable> {
    let t: ResultsTable = parse_table("tables/lite_results.json")?;
    check_row_widths("lite_results", t.columns.len(), t.rows.iter().map(|r| r.scores.len()))?;
    Ok(t)
}

/// Per-language reference scores for selected models.
pub fn load_per_language() -> Result<PerLanguageTable> {
    let t: PerLanguageTable = parse_table("tables/per_language.json")?;
    for block in &t.datasets {
        check_row_widths(
            &format!("per_language/{}", block.dataset),
            t.languages.len(),
            block.rows.iter().map(|r| r.scores.len()),
        )?;
    }
    Ok(t)
}

/// Expansion/threshold ablation reference table.
pub fn load_ablation() -> Result<AblationTable> {
    let t: AblationTable = parse_table("tables/ablation.json")?;
    check_row_widths("ablation", t.columns.len(), t.rows.iter().map(|r| r.scores.len()))?;
    Ok(t)
}

/// Translation-retention reference counts.
pub fn load_qe_retention() -> Result<QeRetentionTable> {
    let t: QeRetentionTable = parse_table("tables/qe_retention.json")?;
    check_row_widths("qe_retention", t.thresholds.len(), t.rows.iter().map(|r| r.counts.len()))?;
    if t.printed_totals.len() != t.thresholds.len() {
        return Err(Error::Parse("qe_retention: totals/thresholds mismatch".into()));
    }
    Ok(t)
}
