//! Benchmark registry and harness: suite manifests, the macro-aggregation
//! protocol (language → task → family → overall), the suite runner, and
//! report emission.
//!
//! A manifest lists dataset entries; entries sharing a `report_as` name are
//! merged into one reported task whose language coverage is the union of its
//! parts (this is how two news corpora become a single task). A suite whose
//! name starts with `lite` must cover all nine lite languages in every
//! merged task.

pub mod fixtures;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datamodel::LangCode;
use crate::encoder::EncoderPort;
use crate::error::{Error, Result};
use crate::evaluator::{evaluate_dataset, EvalDataset, Split, TaskFamily};
use crate::synth;

/// The nine languages every lite-suite task must cover.
pub const LITE_LANGUAGES: [&str; 9] = [
    "amh_Ethi", "gaz_Latn", "hau_Latn", "ibo_Latn", "kin_Latn", "swh_Latn", "xho_Latn",
    "yor_Latn", "zul_Latn",
];

/// The metric each family is scored with; manifests must agree.
pub fn metric_for_family(family: TaskFamily) -> &'static str {
    match family {
        TaskFamily::Btxt => "f1",
        TaskFamily::PrClf => "ap",
        TaskFamily::Clf => "accuracy",
        TaskFamily::MultiClf => "lrap",
        TaskFamily::Clust => "v_measure",
        TaskFamily::Sts => "spearman",
        TaskFamily::Rtrvl => "ndcg_at_10",
        TaskFamily::Rrnk => "map",
    }
}

/// How per-task means combine into the overall score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// Mean over family means (used by the full suite).
    FamilyMacro,
    /// Mean over task means (used by the lite suite).
    TaskMacro,
}

impl AggregationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            AggregationMode::FamilyMacro => "family_macro",
            AggregationMode::TaskMacro => "task_macro",
        }
    }
}

impl fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AggregationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "family_macro" => Ok(AggregationMode::FamilyMacro),
            "task_macro" => Ok(AggregationMode::TaskMacro),
            other => Err(Error::Parse(format!("unknown aggregation mode {other:?}"))),
        }
    }
}

// ---- manifest file schema (one JSON object per suite) ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    suite: String,
    aggregation: AggregationMode,
    #[serde(default)]
    notes: String,
    tasks: Vec<ManifestEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    name: String,
    family: String,
    languages: Vec<String>,
    source: String,
    metric: String,
    split: String,
    /// Reported task this entry contributes to; defaults to its own name.
    #[serde(default)]
    report_as: Option<String>,
}

/// One reported benchmark task: a family, a metric, and a source per
/// language. Entries merged via `report_as` contribute disjoint languages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub family: TaskFamily,
    pub metric: String,
    pub split: Split,
    pub sources: BTreeMap<LangCode, String>,
}

impl TaskSpec {
    pub fn languages(&self) -> Vec<&LangCode> {
        self.sources.keys().collect()
    }
}

/// A validated suite: reported tasks in name order plus the aggregation mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub suite: String,
    pub aggregation: AggregationMode,
    pub notes: String,
    pub tasks: Vec<TaskSpec>,
}

impl SuiteManifest {
    pub fn task(&self, name: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.name == name)
    }
}

fn parse_entry_langs(entry: &ManifestEntry) -> Result<Vec<LangCode>> {
    if entry.languages.is_empty() {
        return Err(Error::Validation(format!("task {:?}: languages must be non-empty", entry.name)));
    }
    entry
        .languages
        .iter()
        .map(|l| {
            LangCode::new(l).map_err(|e| Error::Validation(format!("task {:?}: {e}", entry.name)))
        })
        .collect()
}

/// Parse and validate a suite manifest from its JSON text.
pub fn parse_manifest(content: &str) -> Result<SuiteManifest> {
    let file: ManifestFile =
        serde_json::from_str(content).map_err(|e| Error::Parse(format!("manifest: {e}")))?;
    if file.tasks.is_empty() {
        return Err(Error::Validation("manifest has no tasks".into()));
    }

    let mut seen_entries = BTreeSet::new();
    let mut merged: BTreeMap<String, TaskSpec> = BTreeMap::new();
    for entry in &file.tasks {
        if entry.name.is_empty() {
            return Err(Error::Validation("manifest entry with empty name".into()));
        }
        if !seen_entries.insert(entry.name.clone()) {
            return Err(Error::Validation(format!("duplicate manifest entry {:?}", entry.name)));
        }
        let family = TaskFamily::from_str(&entry.family).map_err(|_| {
            Error::Parse(format!("task {:?}: unknown family {:?}", entry.name, entry.family))
        })?;
        let expected = metric_for_family(family);
        if entry.metric != expected {
            return Err(Error::Validation(format!(
                "task {:?}: family {family} is scored with {expected:?}, not {:?}",
                entry.name, entry.metric
            )));
        }
        let split = match entry.split.as_str() {
            "train" => Split::Train,
            "test" => Split::Test,
            other => {
                return Err(Error::Parse(format!(
                    "task {:?}: unknown split {other:?}",
                    entry.name
                )))
            }
        };
        if !entry.source.starts_with("path:") && !entry.source.starts_with("synthetic:") {
            return Err(Error::Validation(format!(
                "task {:?}: source must start with path: or synthetic:, got {:?}",
                entry.name, entry.source
            )));
        }

        let reported = entry.report_as.clone().unwrap_or_else(|| entry.name.clone());
        let langs = parse_entry_langs(entry)?;
        let spec = merged.entry(reported.clone()).or_insert_with(|| TaskSpec {
            name: reported.clone(),
            family,
            metric: entry.metric.clone(),
            split,
            sources: BTreeMap::new(),
        });
        if spec.family != family || spec.split != split {
            return Err(Error::Validation(format!(
                "task {reported:?}: merged entries disagree on family or split"
            )));
        }
        for lang in langs {
            if spec.sources.insert(lang.clone(), entry.source.clone()).is_some() {
                return Err(Error::Validation(format!(
                    "task {reported:?}: language {} specified twice",
                    lang.as_str()
                )));
            }
        }
    }

    let manifest = SuiteManifest {
        suite: file.suite,
        aggregation: file.aggregation,
        notes: file.notes,
        tasks: merged.into_values().collect(),
    };

    // Lite suites promise a full language × task grid.
    if manifest.suite.starts_with("lite") {
        for task in &manifest.tasks {
            let missing: Vec<&str> = LITE_LANGUAGES
                .iter()
                .filter(|l| !task.sources.keys().any(|k| k.as_str() == **l))
                .copied()
                .collect();
            if !missing.is_empty() {
                return Err(Error::Validation(format!(
                    "lite coverage: task {:?} is missing languages {missing:?}",
                    task.name
                )));
            }
        }
    }
    Ok(manifest)
}

/// Load and validate a manifest from a file.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<SuiteManifest> {
    let path = path.as_ref();
    let content =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_manifest(&content)
        .map_err(|e| Error::Parse(format!("manifest {}: {e}", path.display())))
}

/// Load one of the shipped manifests: `full`, `lite`, or `lite-synthetic`.
pub fn builtin_manifest(suite: &str) -> Result<SuiteManifest> {
    let content = fixtures::fixture(&format!("manifests/{suite}.json")).map_err(|_| {
        Error::Validation(format!(
            "no built-in suite named {suite:?}: expected full, lite, or lite-synthetic"
        ))
    })?;
    parse_manifest(&content)
}

// ---- score table ----

/// Per-cell results of a suite run: `task → language → score`, each score a
/// percentage in [0, 100], plus each task's family for aggregation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub scores: BTreeMap<String, BTreeMap<LangCode, f64>>,
    pub families: BTreeMap<String, TaskFamily>,
}

impl ScoreTable {
    pub fn new() -> ScoreTable {
        ScoreTable::default()
    }

    /// Record one cell. Scores outside [0, 100], duplicate cells, and
    /// family conflicts are rejected.
    pub fn insert(
        &mut self,
        task: &str,
        family: TaskFamily,
        lang: &LangCode,
        score: f64,
    ) -> Result<()> {
        if !score.is_finite() || !(0.0..=100.0).contains(&score) {
            return Err(Error::Validation(format!(
                "score {score} for {task}/{} outside [0, 100]",
                lang.as_str()
            )));
        }
        match self.families.get(task) {
            Some(f) if *f != family => {
                return Err(Error::Validation(format!(
                    "task {task:?} recorded under two families ({f} and {family})"
                )))
            }
            Some(_) => {}
            None => {
                self.families.insert(task.to_string(), family);
            }
        }
        let row = self.scores.entry(task.to_string()).or_default();
        if row.contains_key(lang) {
            return Err(Error::Validation(format!(
                "duplicate cell {task}/{}",
                lang.as_str()
            )));
        }
        row.insert(lang.clone(), score);
        Ok(())
    }

    pub fn get(&self, task: &str, lang: &LangCode) -> Option<f64> {
        self.scores.get(task).and_then(|row| row.get(lang)).copied()
    }

    pub fn n_cells(&self) -> usize {
        self.scores.values().map(|row| row.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Re-check the invariants after deserializing from an external file.
    pub fn validate(&self) -> Result<()> {
        for (task, row) in &self.scores {
            if row.is_empty() {
                return Err(Error::Validation(format!("task {task:?} has no cells")));
            }
            if !self.families.contains_key(task) {
                return Err(Error::Validation(format!("task {task:?} has no family")));
            }
            for (lang, score) in row {
                if !score.is_finite() || !(0.0..=100.0).contains(score) {
                    return Err(Error::Validation(format!(
                        "score {score} for {task}/{} outside [0, 100]",
                        lang.as_str()
                    )));
                }
            }
        }
        Ok(())
    }
}

// ---- aggregation ----

/// Derived means: per task, per family, and the overall headline number.
/// Nothing here is rounded; rounding happens at report emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub task_means: BTreeMap<String, f64>,
    pub family_means: BTreeMap<String, f64>,
    pub overall: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Macro-average a score table: task mean = unweighted mean over its
/// languages; family mean = unweighted mean over that family's task means;
/// overall = mean over family means (`family_macro`) or task means
/// (`task_macro`).
pub fn aggregate(table: &ScoreTable, mode: AggregationMode) -> Result<SuiteSummary> {
    if table.is_empty() {
        return Err(Error::Validation("empty score table".into()));
    }
    table.validate()?;

    let task_means: BTreeMap<String, f64> = table
        .scores
        .iter()
        .map(|(task, row)| (task.clone(), mean(row.values().copied())))
        .collect();

    let mut by_family: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (task, m) in &task_means {
        let family = table.families[task];
        by_family.entry(family.as_str()).or_default().push(*m);
    }
    let family_means: BTreeMap<String, f64> = by_family
        .into_iter()
        .map(|(fam, ms)| (fam.to_string(), mean(ms.into_iter())))
        .collect();

    let overall = match mode {
        AggregationMode::FamilyMacro => mean(family_means.values().copied()),
        AggregationMode::TaskMacro => mean(task_means.values().copied()),
    };
    Ok(SuiteSummary { task_means, family_means, overall })
}

// ---- suite runner ----

enum CellSource {
    File(PathBuf),
    Synthetic,
}

fn cell_seed(seed: u64, task: &str, lang: &LangCode) -> u64 {
    seed ^ synth::fnv1a(task).rotate_left(29) ^ synth::fnv1a(lang.as_str()).rotate_left(7)
}

/// Evaluate every (task, language) cell of a suite with the given encoder.
///
/// All cells are resolved before any evaluation starts; if any dataset is
/// unreachable the error lists every unresolved cell. `path:` sources are
/// joined to `data_root` after substituting `{lang}`; `synthetic:markers`
/// sources generate marker datasets on the fly from `seed`. Scores are the
/// family's main metric × 100. The run is deterministic in (manifest,
/// encoder, seed, instruction).
pub fn run_suite(
    manifest: &SuiteManifest,
    encoder: &dyn EncoderPort,
    seed: u64,
    data_root: Option<&Path>,
    query_instruction: Option<&str>,
) -> Result<ScoreTable> {
    let mut plan: Vec<(&TaskSpec, &LangCode, CellSource)> = Vec::new();
    let mut unresolved: Vec<String> = Vec::new();
    for task in &manifest.tasks {
        for (lang, source) in &task.sources {
            if let Some(generator) = source.strip_prefix("synthetic:") {
                if generator == "markers" {
                    plan.push((task, lang, CellSource::Synthetic));
                } else {
                    unresolved.push(format!(
                        "{}/{}: unknown synthetic generator {generator:?}",
                        task.name,
                        lang.as_str()
                    ));
                }
            } else if let Some(rel) = source.strip_prefix("path:") {
                let rel = rel.replace("{lang}", lang.as_str());
                match data_root {
                    None => unresolved.push(format!(
                        "{}/{}: path source {rel:?} requires a data root",
                        task.name,
                        lang.as_str()
                    )),
                    Some(root) => {
                        let path = root.join(&rel);
                        if path.is_file() {
                            plan.push((task, lang, CellSource::File(path)));
                        } else {
                            unresolved.push(format!(
                                "{}/{}: missing dataset file {}",
                                task.name,
                                lang.as_str(),
                                path.display()
                            ));
                        }
                    }
                }
            } else {
                unresolved.push(format!(
                    "{}/{}: unrecognized source {source:?}",
                    task.name,
                    lang.as_str()
                ));
            }
        }
    }
    if !unresolved.is_empty() {
        return Err(Error::Missing(format!(
            "{} unresolved dataset cells:\n  {}",
            unresolved.len(),
            unresolved.join("\n  ")
        )));
    }

    let mut table = ScoreTable::new();
    for (task, lang, source) in plan {
        let content = match source {
            CellSource::Synthetic => synth::generate_eval_dataset(task.family, &task.name, lang, seed)?,
            CellSource::File(path) => std::fs::read_to_string(&path)
                .map_err(|e| Error::io(path.display().to_string(), e))?,
        };
        let name = format!("{}/{}", task.name, lang.as_str());
        let dataset = EvalDataset::from_jsonl(&name, task.family, &content)?;
        let result =
            evaluate_dataset(&dataset, encoder, cell_seed(seed, &task.name, lang), query_instruction)?;
        table.insert(&task.name, task.family, lang, result.main_score * 100.0)?;
    }
    Ok(table)
}

// ---- report emission ----

/// A complete suite result: the labeled run, every cell, and the derived
/// means. The machine format (JSON) round-trips exactly; the text format
/// mirrors the published tables (one summary row with a final `Avg` column
/// at one decimal, then a per-language matrix at two decimals).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub run: String,
    pub suite: String,
    pub aggregation: AggregationMode,
    pub table: ScoreTable,
    pub summary: SuiteSummary,
}

impl SuiteReport {
    pub fn new(run: &str, manifest: &SuiteManifest, table: ScoreTable) -> Result<SuiteReport> {
        let summary = aggregate(&table, manifest.aggregation)?;
        Ok(SuiteReport {
            run: run.to_string(),
            suite: manifest.suite.clone(),
            aggregation: manifest.aggregation,
            table,
            summary,
        })
    }

    /// Machine-readable form: pretty JSON that re-parses to an equal report.
    pub fn to_machine(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parse a machine-format report and re-check its internal consistency.
    pub fn from_machine(content: &str) -> Result<SuiteReport> {
        let report: SuiteReport =
            serde_json::from_str(content).map_err(|e| Error::Parse(format!("report: {e}")))?;
        let recomputed = aggregate(&report.table, report.aggregation)?;
        if (recomputed.overall - report.summary.overall).abs() > 1e-12 {
            return Err(Error::Validation(
                "report summary does not match its score table".into(),
            ));
        }
        Ok(report)
    }

    /// Human-readable tables.
    ///
    /// The summary row shows family means under `family_macro` and task
    /// means under `task_macro`, one decimal each. Its `Avg` column is the
    /// mean of the *printed* row values (so the table is self-consistent at
    /// display precision), which keeps it within half a printing unit of the
    /// exact overall. The per-language matrix prints two decimals with a
    /// per-task `Avg` computed the same way; `--` marks uncovered languages.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "suite: {}", self.suite);
        let _ = writeln!(out, "aggregation: {}", self.aggregation);
        out.push('\n');

        let means = match self.aggregation {
            AggregationMode::FamilyMacro => &self.summary.family_means,
            AggregationMode::TaskMacro => &self.summary.task_means,
        };
        let mut header: Vec<String> = vec!["run".to_string()];
        header.extend(means.keys().cloned());
        header.push("Avg".to_string());
        let printed: Vec<String> = means.values().map(|v| format!("{v:.1}")).collect();
        let display_avg = mean(printed.iter().map(|s| s.parse::<f64>().unwrap()));
        let mut row: Vec<String> = vec![self.run.clone()];
        row.extend(printed);
        row.push(format!("{display_avg:.1}"));
        out.push_str(&render_columns(&[header, row]));

        out.push('\n');
        let langs: BTreeSet<&LangCode> =
            self.table.scores.values().flat_map(|row| row.keys()).collect();
        let mut header: Vec<String> = vec!["task".to_string()];
        header.extend(langs.iter().map(|l| l.as_str().to_string()));
        header.push("Avg".to_string());
        let mut rows = vec![header];
        for (task, cells) in &self.table.scores {
            let mut row = vec![task.clone()];
            let mut printed = Vec::new();
            for lang in &langs {
                match cells.get(lang) {
                    Some(v) => {
                        let s = format!("{v:.2}");
                        printed.push(s.parse::<f64>().unwrap());
                        row.push(s);
                    }
                    None => row.push("--".to_string()),
                }
            }
            row.push(format!("{:.2}", mean(printed.into_iter())));
            rows.push(row);
        }
        out.push_str(&render_columns(&rows));
        out
    }
}

/// Align rows into fixed-width columns: first column left-aligned, the rest
/// right-aligned, two spaces between columns.
fn render_columns(rows: &[Vec<String>]) -> String {
    let n_cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0usize; n_cols];
    for row in rows {
        for (j, cell) in row.iter().enumerate() {
            widths[j] = widths[j].max(cell.len());
        }
    }
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (j, cell) in row.iter().enumerate() {
            if j > 0 {
                line.push_str("  ");
            }
            if j == 0 {
                line.push_str(&format!("{cell:<width$}", width = widths[j]));
            } else {
                line.push_str(&format!("{cell:>width$}", width = widths[j]));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
