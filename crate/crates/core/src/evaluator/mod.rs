//! Embedding evaluation harness: eight task families, each with a
//! newline-delimited JSON dataset schema, a metric, and a dispatch that
//! drives any [`EncoderPort`].

pub mod metrics;
pub mod probe;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::encoder::EncoderPort;
use crate::error::{Error, Result};

/// The eight task families the benchmark covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskFamily {
    /// Bitext mining: match translations across two parallel text sides.
    Btxt,
    /// Pair classification: decide whether two texts stand in a relation.
    PrClf,
    /// Single-label classification via a linear probe.
    Clf,
    /// Multi-label classification via one-vs-rest probes.
    MultiClf,
    /// Clustering scored with V-measure.
    Clust,
    /// Semantic textual similarity scored with Spearman correlation.
    #[serde(rename = "STS")]
    Sts,
    /// Retrieval scored with nDCG@10.
    Rtrvl,
    /// Reranking scored with mean average precision.
    Rrnk,
}

impl TaskFamily {
    pub const ALL: [TaskFamily; 8] = [
        TaskFamily::Btxt,
        TaskFamily::PrClf,
        TaskFamily::Clf,
        TaskFamily::MultiClf,
        TaskFamily::Clust,
        TaskFamily::Sts,
        TaskFamily::Rtrvl,
        TaskFamily::Rrnk,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskFamily::Btxt => "Btxt",
            TaskFamily::PrClf => "PrClf",
            TaskFamily::Clf => "Clf",
            TaskFamily::MultiClf => "MultiClf",
            TaskFamily::Clust => "Clust",
            TaskFamily::Sts => "STS",
            TaskFamily::Rtrvl => "Rtrvl",
            TaskFamily::Rrnk => "Rrnk",
        }
    }
}

impl fmt::Display for TaskFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskFamily::ALL
            .iter()
            .find(|fam| fam.as_str() == s)
            .copied()
            .ok_or_else(|| Error::Parse(format!("unknown task family {s:?}")))
    }
}

/// Outcome of one evaluation: a main score in [0, 1] plus any auxiliary
/// diagnostics (signed correlations, precision/recall splits, …).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricResult {
    pub family: TaskFamily,
    pub main_score: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub auxiliary: BTreeMap<String, f64>,
}

impl MetricResult {
    /// Wraps a main score, clamping float noise at the [0, 1] boundary and
    /// rejecting anything genuinely outside it.
    pub fn new(family: TaskFamily, main_score: f64) -> Result<MetricResult> {
        if !main_score.is_finite() {
            return Err(Error::Numerical(format!("{family} score is not finite")));
        }
        if !(-1e-9..=1.0 + 1e-9).contains(&main_score) {
            return Err(Error::Numerical(format!("{family} score {main_score} outside [0, 1]")));
        }
        Ok(MetricResult {
            family,
            main_score: main_score.clamp(0.0, 1.0),
            auxiliary: BTreeMap::new(),
        })
    }

    pub fn with_aux(mut self, name: &str, value: f64) -> MetricResult {
        self.auxiliary.insert(name.to_string(), value);
        self
    }
}

/// Which side of a labeled dataset a line belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

// ---- per-family line records (the on-disk JSONL schemas) ----

#[derive(Debug, Serialize, Deserialize)]
struct BitextLine {
    src: String,
    tgt: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct PairLine {
    text1: String,
    text2: String,
    label: u8,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClassificationLine {
    text: String,
    label: String,
    split: Split,
}

#[derive(Debug, Serialize, Deserialize)]
struct MultilabelLine {
    text: String,
    labels: Vec<String>,
    split: Split,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClusteringLine {
    text: String,
    label: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct StsLine {
    text1: String,
    text2: String,
    score: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum RetrievalLine {
    Query { id: String, text: String, relevant: Vec<String> },
    Doc { id: String, text: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct RerankLine {
    query: String,
    candidates: Vec<String>,
    labels: Vec<u8>,
}

/// Family-shaped contents of one evaluation dataset.
#[derive(Debug, Clone)]
pub enum DatasetPayload {
    /// Parallel sides; line i of `src` translates line i of `tgt`.
    Bitext { src: Vec<String>, tgt: Vec<String> },
    /// Text pairs with a binary relation label.
    Pairs { text1: Vec<String>, text2: Vec<String>, labels: Vec<bool> },
    /// Labeled texts split into probe train/test sets. Label indices point
    /// into `label_names` (sorted, so indices are content-determined).
    Classification {
        train_texts: Vec<String>,
        train_labels: Vec<usize>,
        test_texts: Vec<String>,
        test_labels: Vec<usize>,
        label_names: Vec<String>,
    },
    /// Texts carrying sets of labels, split like classification.
    Multilabel {
        train_texts: Vec<String>,
        train_sets: Vec<Vec<usize>>,
        test_texts: Vec<String>,
        test_sets: Vec<Vec<usize>>,
        label_names: Vec<String>,
    },
    /// Texts with gold cluster labels.
    Clustering { texts: Vec<String>, labels: Vec<usize>, label_names: Vec<String> },
    /// Text pairs with graded similarity scores.
    Sts { text1: Vec<String>, text2: Vec<String>, gold: Vec<f64> },
    /// Queries over a shared document corpus; `qrels[q]` lists relevant
    /// document indices.
    Retrieval { queries: Vec<String>, docs: Vec<String>, qrels: Vec<Vec<usize>> },
    /// Per-query candidate lists with binary relevance.
    Reranking { queries: Vec<String>, candidates: Vec<Vec<String>>, labels: Vec<Vec<bool>> },
}

/// One loaded evaluation dataset.
#[derive(Debug, Clone)]
pub struct EvalDataset {
    pub name: String,
    pub family: TaskFamily,
    pub payload: DatasetPayload,
}

fn parse_lines<T: for<'de> Deserialize<'de>>(name: &str, content: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| {
            Error::Parse(format!("dataset {name} line {}: {e}", i + 1))
        })?;
        out.push(record);
    }
    if out.is_empty() {
        return Err(Error::Parse(format!("dataset {name} is empty")));
    }
    Ok(out)
}

/// Sorted distinct label names and a name → index lookup.
fn label_index<'a>(names: impl Iterator<Item = &'a str>) -> (Vec<String>, BTreeMap<String, usize>) {
    let mut sorted: Vec<String> = names.map(str::to_string).collect();
    sorted.sort();
    sorted.dedup();
    let index = sorted.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    (sorted, index)
}

impl EvalDataset {
    /// Parses newline-delimited JSON in the family's schema.
    pub fn from_jsonl(name: &str, family: TaskFamily, content: &str) -> Result<EvalDataset> {
        let payload = match family {
            TaskFamily::Btxt => {
                let lines: Vec<BitextLine> = parse_lines(name, content)?;
                DatasetPayload::Bitext {
                    src: lines.iter().map(|l| l.src.clone()).collect(),
                    tgt: lines.into_iter().map(|l| l.tgt).collect(),
                }
            }
            TaskFamily::PrClf => {
                let lines: Vec<PairLine> = parse_lines(name, content)?;
                if let Some(bad) = lines.iter().find(|l| l.label > 1) {
                    return Err(Error::Parse(format!(
                        "dataset {name}: pair label {} is not 0/1",
                        bad.label
                    )));
                }
                DatasetPayload::Pairs {
                    text1: lines.iter().map(|l| l.text1.clone()).collect(),
                    text2: lines.iter().map(|l| l.text2.clone()).collect(),
                    labels: lines.iter().map(|l| l.label == 1).collect(),
                }
            }
            TaskFamily::Clf => {
                let lines: Vec<ClassificationLine> = parse_lines(name, content)?;
                let (label_names, index) = label_index(lines.iter().map(|l| l.label.as_str()));
                let mut train_texts = Vec::new();
                let mut train_labels = Vec::new();
                let mut test_texts = Vec::new();
                let mut test_labels = Vec::new();
                for l in &lines {
                    match l.split {
                        Split::Train => {
                            train_texts.push(l.text.clone());
                            train_labels.push(index[&l.label]);
                        }
                        Split::Test => {
                            test_texts.push(l.text.clone());
                            test_labels.push(index[&l.label]);
                        }
                    }
                }
                DatasetPayload::Classification {
                    train_texts,
                    train_labels,
                    test_texts,
                    test_labels,
                    label_names,
                }
            }
            TaskFamily::MultiClf => {
                let lines: Vec<MultilabelLine> = parse_lines(name, content)?;
                let (label_names, index) =
                    label_index(lines.iter().flat_map(|l| l.labels.iter().map(String::as_str)));
                let mut train_texts = Vec::new();
                let mut train_sets = Vec::new();
                let mut test_texts = Vec::new();
                let mut test_sets = Vec::new();
                for l in &lines {
                    let mut set: Vec<usize> = l.labels.iter().map(|s| index[s]).collect();
                    set.sort_unstable();
                    set.dedup();
                    match l.split {
                        Split::Train => {
                            train_texts.push(l.text.clone());
                            train_sets.push(set);
                        }
                        Split::Test => {
                            test_texts.push(l.text.clone());
                            test_sets.push(set);
                        }
                    }
                }
                DatasetPayload::Multilabel {
                    train_texts,
                    train_sets,
                    test_texts,
                    test_sets,
                    label_names,
                }
            }
            TaskFamily::Clust => {
                let lines: Vec<ClusteringLine> = parse_lines(name, content)?;
                let (label_names, index) = label_index(lines.iter().map(|l| l.label.as_str()));
                DatasetPayload::Clustering {
                    texts: lines.iter().map(|l| l.text.clone()).collect(),
                    labels: lines.iter().map(|l| index[&l.label]).collect(),
                    label_names,
                }
            }
            TaskFamily::Sts => {
                let lines: Vec<StsLine> = parse_lines(name, content)?;
                if let Some(bad) = lines.iter().find(|l| !l.score.is_finite()) {
                    return Err(Error::Parse(format!(
                        "dataset {name}: gold score {} is not finite",
                        bad.score
                    )));
                }
                DatasetPayload::Sts {
                    text1: lines.iter().map(|l| l.text1.clone()).collect(),
                    text2: lines.iter().map(|l| l.text2.clone()).collect(),
                    gold: lines.iter().map(|l| l.score).collect(),
                }
            }
            TaskFamily::Rtrvl => {
                let lines: Vec<RetrievalLine> = parse_lines(name, content)?;
                let mut docs = Vec::new();
                let mut doc_index: BTreeMap<String, usize> = BTreeMap::new();
                for l in &lines {
                    if let RetrievalLine::Doc { id, text } = l {
                        if doc_index.insert(id.clone(), docs.len()).is_some() {
                            return Err(Error::Parse(format!(
                                "dataset {name}: duplicate doc id {id:?}"
                            )));
                        }
                        docs.push(text.clone());
                    }
                }
                let mut queries = Vec::new();
                let mut qrels = Vec::new();
                for l in &lines {
                    if let RetrievalLine::Query { id, text, relevant } = l {
                        let mut rels = Vec::with_capacity(relevant.len());
                        for r in relevant {
                            let doc = doc_index.get(r).ok_or_else(|| {
                                Error::Parse(format!(
                                    "dataset {name}: query {id:?} references unknown doc {r:?}"
                                ))
                            })?;
                            rels.push(*doc);
                        }
                        rels.sort_unstable();
                        rels.dedup();
                        queries.push(text.clone());
                        qrels.push(rels);
                    }
                }
                if queries.is_empty() || docs.is_empty() {
                    return Err(Error::Parse(format!(
                        "dataset {name} needs at least one query and one doc"
                    )));
                }
                DatasetPayload::Retrieval { queries, docs, qrels }
            }
            TaskFamily::Rrnk => {
                let lines: Vec<RerankLine> = parse_lines(name, content)?;
                let mut queries = Vec::new();
                let mut candidates = Vec::new();
                let mut labels = Vec::new();
                for (i, l) in lines.into_iter().enumerate() {
                    if l.candidates.len() != l.labels.len() {
                        return Err(Error::Parse(format!(
                            "dataset {name} line record {}: {} candidates vs {} labels",
                            i + 1,
                            l.candidates.len(),
                            l.labels.len()
                        )));
                    }
                    if let Some(bad) = l.labels.iter().find(|v| **v > 1) {
                        return Err(Error::Parse(format!(
                            "dataset {name}: rerank label {bad} is not 0/1"
                        )));
                    }
                    queries.push(l.query);
                    labels.push(l.labels.iter().map(|v| *v == 1).collect());
                    candidates.push(l.candidates);
                }
                DatasetPayload::Reranking { queries, candidates, labels }
            }
        };
        Ok(EvalDataset { name: name.to_string(), family, payload })
    }

    /// Serializes back to the family's JSONL schema (inverse of
    /// [`EvalDataset::from_jsonl`] up to line ordering of retrieval docs).
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        let mut push = |v: &dyn erased::SerializeLine| -> Result<()> {
            out.push_str(&v.to_line()?);
            out.push('\n');
            Ok(())
        };
        match &self.payload {
            DatasetPayload::Bitext { src, tgt } => {
                for (s, t) in src.iter().zip(tgt) {
                    push(&BitextLine { src: s.clone(), tgt: t.clone() })?;
                }
            }
            DatasetPayload::Pairs { text1, text2, labels } => {
                for i in 0..labels.len() {
                    push(&PairLine {
                        text1: text1[i].clone(),
                        text2: text2[i].clone(),
                        label: u8::from(labels[i]),
                    })?;
                }
            }
            DatasetPayload::Classification {
                train_texts,
                train_labels,
                test_texts,
                test_labels,
                label_names,
            } => {
                for (texts, labels, split) in [
                    (train_texts, train_labels, Split::Train),
                    (test_texts, test_labels, Split::Test),
                ] {
                    for (t, l) in texts.iter().zip(labels) {
                        push(&ClassificationLine {
                            text: t.clone(),
                            label: label_names[*l].clone(),
                            split,
                        })?;
                    }
                }
            }
            DatasetPayload::Multilabel {
                train_texts,
                train_sets,
                test_texts,
                test_sets,
                label_names,
            } => {
                for (texts, sets, split) in [
                    (train_texts, train_sets, Split::Train),
                    (test_texts, test_sets, Split::Test),
                ] {
                    for (t, set) in texts.iter().zip(sets) {
                        push(&MultilabelLine {
                            text: t.clone(),
                            labels: set.iter().map(|l| label_names[*l].clone()).collect(),
                            split,
                        })?;
                    }
                }
            }
            DatasetPayload::Clustering { texts, labels, label_names } => {
                for (t, l) in texts.iter().zip(labels) {
                    push(&ClusteringLine { text: t.clone(), label: label_names[*l].clone() })?;
                }
            }
            DatasetPayload::Sts { text1, text2, gold } => {
                for i in 0..gold.len() {
                    push(&StsLine {
                        text1: text1[i].clone(),
                        text2: text2[i].clone(),
                        score: gold[i],
                    })?;
                }
            }
            DatasetPayload::Retrieval { queries, docs, qrels } => {
                for (i, d) in docs.iter().enumerate() {
                    push(&RetrievalLine::Doc { id: format!("d{i}"), text: d.clone() })?;
                }
                for (i, q) in queries.iter().enumerate() {
                    push(&RetrievalLine::Query {
                        id: format!("q{i}"),
                        text: q.clone(),
                        relevant: qrels[i].iter().map(|d| format!("d{d}")).collect(),
                    })?;
                }
            }
            DatasetPayload::Reranking { queries, candidates, labels } => {
                for i in 0..queries.len() {
                    push(&RerankLine {
                        query: queries[i].clone(),
                        candidates: candidates[i].clone(),
                        labels: labels[i].iter().map(|l| u8::from(*l)).collect(),
                    })?;
                }
            }
        }
        Ok(out)
    }

    /// Number of evaluation items (pairs, test texts, queries, …).
    pub fn len(&self) -> usize {
        match &self.payload {
            DatasetPayload::Bitext { src, .. } => src.len(),
            DatasetPayload::Pairs { labels, .. } => labels.len(),
            DatasetPayload::Classification { test_texts, .. } => test_texts.len(),
            DatasetPayload::Multilabel { test_texts, .. } => test_texts.len(),
            DatasetPayload::Clustering { texts, .. } => texts.len(),
            DatasetPayload::Sts { gold, .. } => gold.len(),
            DatasetPayload::Retrieval { queries, .. } => queries.len(),
            DatasetPayload::Reranking { queries, .. } => queries.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

mod erased {
    use serde::Serialize;

    use crate::error::Result;

    /// Object-safe "serialize one JSONL line" helper.
    pub(super) trait SerializeLine {
        fn to_line(&self) -> Result<String>;
    }

    impl<T: Serialize> SerializeLine for T {
        fn to_line(&self) -> Result<String> {
            Ok(serde_json::to_string(self)?)
        }
    }
}

fn row_dots(a: &Array2<f64>, b: &Array2<f64>) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| a.row(i).iter().zip(b.row(i).iter()).map(|(x, y)| x * y).sum())
        .collect()
}

/// Runs one dataset through an encoder and scores it with the family
/// metric. `query_instruction` is prepended to queries of retrieval-style
/// families (Rtrvl, Rrnk) only; all other texts embed bare.
pub fn evaluate_dataset(
    dataset: &EvalDataset,
    encoder: &dyn EncoderPort,
    seed: u64,
    query_instruction: Option<&str>,
) -> Result<MetricResult> {
    match &dataset.payload {
        DatasetPayload::Bitext { src, tgt } => {
            let src_emb = encoder.embed(src, None)?;
            let tgt_emb = encoder.embed(tgt, None)?;
            let gold: Vec<usize> = (0..src.len()).collect();
            metrics::bitext_f1(&src_emb, &tgt_emb, &gold)
        }
        DatasetPayload::Pairs { text1, text2, labels } => {
            let e1 = encoder.embed(text1, None)?;
            let e2 = encoder.embed(text2, None)?;
            metrics::pair_classification(&row_dots(&e1, &e2), labels)
        }
        DatasetPayload::Classification {
            train_texts, train_labels, test_texts, test_labels, ..
        } => {
            if train_texts.is_empty() || test_texts.is_empty() {
                return Err(Error::Validation(format!(
                    "dataset {} needs both train and test splits",
                    dataset.name
                )));
            }
            let train_emb = encoder.embed(train_texts, None)?;
            let test_emb = encoder.embed(test_texts, None)?;
            metrics::linear_probe(
                &train_emb,
                train_labels,
                &test_emb,
                test_labels,
                probe::PROBE_LAMBDA,
                seed,
            )
        }
        DatasetPayload::Multilabel {
            train_texts, train_sets, test_texts, test_sets, label_names,
        } => {
            if train_texts.is_empty() || test_texts.is_empty() {
                return Err(Error::Validation(format!(
                    "dataset {} needs both train and test splits",
                    dataset.name
                )));
            }
            let train_emb = encoder.embed(train_texts, None)?;
            let test_emb = encoder.embed(test_texts, None)?;
            metrics::multilabel_eval(
                &train_emb,
                train_sets,
                &test_emb,
                test_sets,
                label_names.len(),
                probe::PROBE_LAMBDA,
                seed,
            )
        }
        DatasetPayload::Clustering { texts, labels, label_names } => {
            let emb = encoder.embed(texts, None)?;
            metrics::cluster_vmeasure(
                &emb,
                labels,
                label_names.len(),
                seed,
                metrics::KMEANS_RESTARTS,
            )
        }
        DatasetPayload::Sts { text1, text2, gold } => {
            let e1 = encoder.embed(text1, None)?;
            let e2 = encoder.embed(text2, None)?;
            metrics::sts_spearman(&row_dots(&e1, &e2), gold)
        }
        DatasetPayload::Retrieval { queries, docs, qrels } => {
            let q_emb = encoder.embed(queries, query_instruction)?;
            let d_emb = encoder.embed(docs, None)?;
            metrics::retrieval_ndcg(&q_emb, &d_emb, qrels, metrics::NDCG_K, false)
        }
        DatasetPayload::Reranking { queries, candidates, labels } => {
            let q_emb = encoder.embed(queries, query_instruction)?;
            let cand_embs = candidates
                .iter()
                .map(|c| encoder.embed(c, None))
                .collect::<Result<Vec<_>>>()?;
            metrics::rerank_map(&q_emb, &cand_embs, labels)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::MarkerEncoder;

    fn eval(family: TaskFamily, jsonl: &str) -> Result<MetricResult> {
        let ds = EvalDataset::from_jsonl("t", family, jsonl)?;
        evaluate_dataset(&ds, &MarkerEncoder::new(16), 13, None)
    }

    #[test]
    fn family_serde_uses_sts_uppercase() {
        assert_eq!(serde_json::to_string(&TaskFamily::Sts).unwrap(), "\"STS\"");
        assert_eq!(serde_json::from_str::<TaskFamily>("\"STS\"").unwrap(), TaskFamily::Sts);
        for fam in TaskFamily::ALL {
            let json = serde_json::to_string(&fam).unwrap();
            assert_eq!(json, format!("\"{fam}\""));
            assert_eq!(fam.as_str().parse::<TaskFamily>().unwrap(), fam);
        }
    }

    #[test]
    fn metric_result_clamps_noise_and_rejects_garbage() {
        let r = MetricResult::new(TaskFamily::Clf, 1.0 + 1e-12).unwrap();
        assert_eq!(r.main_score, 1.0);
        assert!(MetricResult::new(TaskFamily::Clf, 1.1).is_err());
        assert!(MetricResult::new(TaskFamily::Clf, f64::NAN).is_err());
    }

    #[test]
    fn bitext_marker_dataset_is_perfect() {
        let jsonl = r#"{"src":"item 3","tgt":"thing 3"}
{"src":"item 4","tgt":"thing 4"}
{"src":"item 5","tgt":"thing 5"}"#;
        assert_eq!(eval(TaskFamily::Btxt, jsonl).unwrap().main_score, 1.0);
    }

    #[test]
    fn pair_marker_dataset_is_perfect() {
        let jsonl = r#"{"text1":"a 7","text2":"b 7","label":1}
{"text1":"a 8","text2":"b 8","label":1}
{"text1":"a 7","text2":"b 9","label":0}
{"text1":"a 8","text2":"b 10","label":0}"#;
        let res = eval(TaskFamily::PrClf, jsonl).unwrap();
        assert_eq!(res.main_score, 1.0);
        assert_eq!(res.auxiliary["best_accuracy"], 1.0);
    }

    #[test]
    fn classification_marker_dataset_is_perfect() {
        let mut lines = Vec::new();
        for (i, tag) in ["a", "b", "c", "d", "e", "f"].iter().enumerate() {
            let label = if i % 2 == 0 { "pos" } else { "neg" };
            let marker = if i % 2 == 0 { 3 } else { 4 };
            let split = if i < 4 { "train" } else { "test" };
            lines.push(format!(
                r#"{{"text":"sample {tag} marker {marker}","label":"{label}","split":"{split}"}}"#
            ));
        }
        let res = eval(TaskFamily::Clf, &lines.join("\n")).unwrap();
        assert_eq!(res.main_score, 1.0);
    }

    #[test]
    fn classification_without_test_split_errors() {
        let jsonl = r#"{"text":"a 3","label":"x","split":"train"}
{"text":"b 4","label":"y","split":"train"}"#;
        let err = eval(TaskFamily::Clf, jsonl).unwrap_err();
        assert!(err.to_string().contains("train and test"), "{err}");
    }

    #[test]
    fn multilabel_marker_dataset_is_perfect() {
        let mut lines = Vec::new();
        for split in ["train", "test"] {
            for i in 0..4 {
                let (labels, marker) = match i % 3 {
                    0 => (r#"["red"]"#, "3"),
                    1 => (r#"["blue"]"#, "4"),
                    _ => (r#"["blue","red"]"#, "3 plus 4"),
                };
                lines.push(format!(
                    r#"{{"text":"item {marker}","labels":{labels},"split":"{split}"}}"#
                ));
            }
        }
        let res = eval(TaskFamily::MultiClf, &lines.join("\n")).unwrap();
        assert_eq!(res.main_score, 1.0, "aux {:?}", res.auxiliary);
    }

    #[test]
    fn clustering_marker_dataset_is_perfect() {
        // All members of a gold cluster share one marker, so they embed to
        // identical one-hot vectors and k-means recovers the partition.
        let lines: Vec<String> = (0..3)
            .flat_map(|c| {
                (0..5).map(move |_| {
                    format!(r#"{{"text":"group {}","label":"g{c}"}}"#, c + 10)
                })
            })
            .collect();
        let res = eval(TaskFamily::Clust, &lines.join("\n")).unwrap();
        assert_eq!(res.main_score, 1.0);
    }

    #[test]
    fn sts_marker_dataset_correlates() {
        // Marker overlap gives sims 1.0, 0.5, 0.0 against gold 3, 2, 1.
        let jsonl = r#"{"text1":"1 2","text2":"1 2","score":3.0}
{"text1":"1 2","text2":"1 3","score":2.0}
{"text1":"1","text2":"4","score":1.0}"#;
        let res = eval(TaskFamily::Sts, jsonl).unwrap();
        assert_eq!(res.main_score, 1.0);
    }

    #[test]
    fn retrieval_marker_dataset_is_perfect() {
        let jsonl = r#"{"type":"doc","id":"d1","text":"doc 7"}
{"type":"doc","id":"d2","text":"doc 8"}
{"type":"doc","id":"d3","text":"doc 9"}
{"type":"query","id":"q1","text":"find 7","relevant":["d1"]}
{"type":"query","id":"q2","text":"find 8","relevant":["d2"]}"#;
        let res = eval(TaskFamily::Rtrvl, jsonl).unwrap();
        assert_eq!(res.main_score, 1.0);
    }

    #[test]
    fn retrieval_unknown_doc_reference_errors() {
        let jsonl = r#"{"type":"doc","id":"d1","text":"doc 7"}
{"type":"query","id":"q1","text":"find 7","relevant":["nope"]}"#;
        let err = EvalDataset::from_jsonl("t", TaskFamily::Rtrvl, jsonl).unwrap_err();
        assert!(err.to_string().contains("unknown doc"), "{err}");
    }

    #[test]
    fn reranking_marker_dataset_is_perfect() {
        let jsonl = r#"{"query":"want 5","candidates":["has 5","has 6","has 7"],"labels":[1,0,0]}
{"query":"want 6","candidates":["has 6","has 9"],"labels":[1,0]}"#;
        let res = eval(TaskFamily::Rrnk, jsonl).unwrap();
        assert_eq!(res.main_score, 1.0);
    }

    #[test]
    fn reranking_misaligned_labels_fail_parse() {
        let jsonl = r#"{"query":"q","candidates":["a","b"],"labels":[1]}"#;
        let err = EvalDataset::from_jsonl("t", TaskFamily::Rrnk, jsonl).unwrap_err();
        assert!(err.to_string().contains("candidates vs"), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let jsonl = "{\"src\":\"a\",\"tgt\":\"b\"}\nnot json";
        let err = EvalDataset::from_jsonl("t", TaskFamily::Btxt, jsonl).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(err.is_validation());
    }

    #[test]
    fn empty_dataset_errors() {
        let err = EvalDataset::from_jsonl("t", TaskFamily::Btxt, "\n\n").unwrap_err();
        assert!(err.to_string().contains("is empty"), "{err}");
    }

    #[test]
    fn jsonl_round_trip_preserves_evaluation() {
        let jsonl = r#"{"text1":"a 7","text2":"b 7","label":1}
{"text1":"a 7","text2":"b 9","label":0}"#;
        let ds = EvalDataset::from_jsonl("t", TaskFamily::PrClf, jsonl).unwrap();
        let rt = EvalDataset::from_jsonl("t", TaskFamily::PrClf, &ds.to_jsonl().unwrap()).unwrap();
        let a = evaluate_dataset(&ds, &MarkerEncoder::new(16), 13, None).unwrap();
        let b = evaluate_dataset(&rt, &MarkerEncoder::new(16), 13, None).unwrap();
        assert_eq!(a.main_score, b.main_score);
    }

    #[test]
    fn instruction_reaches_retrieval_queries_only() {
        // An instruction containing a digit would perturb marker queries;
        // verify it is applied to queries (perturbing them) but not docs.
        let jsonl = r#"{"type":"doc","id":"d1","text":"doc 7"}
{"type":"doc","id":"d2","text":"doc 8"}
{"type":"query","id":"q1","text":"find 7","relevant":["d1"]}"#;
        let ds = EvalDataset::from_jsonl("t", TaskFamily::Rtrvl, jsonl).unwrap();
        let clean = evaluate_dataset(&ds, &MarkerEncoder::new(16), 13, None).unwrap();
        assert_eq!(clean.main_score, 1.0);
        // "8 then 8" adds marker 8 twice, outweighing the query's own 7 and
        // promoting doc 8 above the relevant doc 7.
        let noisy =
            evaluate_dataset(&ds, &MarkerEncoder::new(16), 13, Some("8 then 8")).unwrap();
        assert!(noisy.main_score < 1.0, "instruction must reach the query text");
    }
}
