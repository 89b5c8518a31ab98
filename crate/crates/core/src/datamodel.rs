//! Canonical record types, serialization schemas, and validation for
//! everything that flows through the pipeline, trainer, and evaluator.
//!
//! All text is UTF-8 and is NFC-normalized at ingestion; equality checks
//! (positive/negative overlap, duplicate detection) are plain byte equality
//! afterwards.

use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// NFC-normalize a string (identity for text that is already normalized).
pub fn nfc(s: &str) -> String {
    s.nfc().collect()
}

/// Language tag of the form `xxx_Yyyy` (ISO 639-3 plus script), e.g. `amh_Ethi`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LangCode(String);

impl LangCode {
    pub fn new(code: &str) -> Result<Self> {
        let b = code.as_bytes();
        let ok = b.len() == 8
            && b[..3].iter().all(|c| c.is_ascii_lowercase())
            && b[3] == b'_'
            && b[4].is_ascii_uppercase()
            && b[5..].iter().all(|c| c.is_ascii_lowercase());
        if ok {
            Ok(LangCode(code.to_string()))
        } else {
            Err(Error::Validation(format!(
                "invalid language code {code:?}: expected form xxx_Yyyy"
            )))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for LangCode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        LangCode::new(&s)
    }
}

impl From<LangCode> for String {
    fn from(l: LangCode) -> String {
        l.0
    }
}

impl fmt::Display for LangCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for LangCode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LangCode::new(s)
    }
}

/// Three-way NLI judgment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradiction,
}

impl NliLabel {
    fn parse(raw: &str) -> Option<Self> {
        match raw {
            "entailment" => Some(NliLabel::Entailment),
            "neutral" => Some(NliLabel::Neutral),
            "contradiction" => Some(NliLabel::Contradiction),
            _ => None,
        }
    }
}

/// Origin corpus of an NLI example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliSource {
    Mnli,
    Snli,
}

impl NliSource {
    fn parse(raw: &str) -> Option<Self> {
        match raw {
            "mnli" => Some(NliSource::Mnli),
            "snli" => Some(NliSource::Snli),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            NliSource::Mnli => "mnli",
            NliSource::Snli => "snli",
        }
    }
}

/// A premise/hypothesis/label triple from a source NLI corpus.
///
/// `id` identifies a premise group: lines that share an id must share the
/// same premise text and are grouped into one contrastive instance later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliExample {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: NliLabel,
    pub source: NliSource,
}

/// Which side of an NLI example a translation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TranslationSide {
    Premise,
    Hypothesis,
}

/// One translated side of an example, with an optional quality-estimation
/// score. English (source) sides are never scored, so an absent score is
/// meaningful and distinct from 0.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslationRecord {
    pub example_id: String,
    pub side: TranslationSide,
    pub lang: LangCode,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qe_score: Option<f64>,
}

impl TranslationRecord {
    pub fn validate(&self) -> Result<()> {
        if let Some(q) = self.qe_score {
            if !(0.0..=1.0).contains(&q) || !q.is_finite() {
                return Err(Error::Validation(format!(
                    "qe_score {q} out of [0,1] for example {}",
                    self.example_id
                )));
            }
        }
        Ok(())
    }
}

/// The four premise/hypothesis language combinations an example expands to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DirectionConfig {
    /// Premise in the target language, hypothesis in the source language.
    #[serde(rename = "TGT_SRC")]
    TgtSrc,
    /// Premise in the source language, hypothesis in the target language.
    #[serde(rename = "SRC_TGT")]
    SrcTgt,
    /// Both sides in the target language.
    #[serde(rename = "TGT_TGT")]
    TgtTgt,
    /// Both sides in the source language (no translation involved).
    #[serde(rename = "SRC_SRC")]
    SrcSrc,
}

impl DirectionConfig {
    pub const ALL: [DirectionConfig; 4] = [
        DirectionConfig::TgtSrc,
        DirectionConfig::SrcTgt,
        DirectionConfig::TgtTgt,
        DirectionConfig::SrcSrc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DirectionConfig::TgtSrc => "TGT_SRC",
            DirectionConfig::SrcTgt => "SRC_TGT",
            DirectionConfig::TgtTgt => "TGT_TGT",
            DirectionConfig::SrcSrc => "SRC_SRC",
        }
    }
}

impl fmt::Display for DirectionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DirectionConfig {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "TGT_SRC" => Ok(DirectionConfig::TgtSrc),
            "SRC_TGT" => Ok(DirectionConfig::SrcTgt),
            "TGT_TGT" => Ok(DirectionConfig::TgtTgt),
            "SRC_SRC" => Ok(DirectionConfig::SrcSrc),
            _ => Err(Error::Validation(format!("unknown direction config {s:?}"))),
        }
    }
}

/// Provenance attached to a training instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub lang: LangCode,
    pub direction: DirectionConfig,
    /// Dataset key used for same-dataset batching (e.g. "mnli", "snli").
    pub source: String,
}

/// Query + positives + hard negatives (+ optional teacher scores): the unit
/// consumed by the training objective.
///
/// Teacher scores, when present, align with the group `[pos[0]] ++ neg`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainInstance {
    pub query: String,
    pub pos: Vec<String>,
    pub neg: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher_scores: Option<Vec<f64>>,
    pub meta: InstanceMeta,
}

impl TrainInstance {
    /// NFC-normalize all text fields in place.
    pub fn normalize(&mut self) {
        self.query = nfc(&self.query);
        for p in &mut self.pos {
            *p = nfc(p);
        }
        for n in &mut self.neg {
            *n = nfc(n);
        }
    }
}

/// Check every `TrainInstance` invariant, reporting the first violation.
pub fn validate_train_instance(inst: &TrainInstance) -> Result<()> {
    if inst.pos.is_empty() {
        return Err(Error::Validation("empty pos: at least one positive required".into()));
    }
    if let Some(scores) = &inst.teacher_scores {
        if scores.len() != 1 + inst.neg.len() {
            return Err(Error::Validation(format!(
                "score length: teacher_scores has {} entries, group [pos[0]] ++ neg has {}",
                scores.len(),
                1 + inst.neg.len()
            )));
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::Validation(format!("non-finite teacher score {bad}")));
        }
    }
    for n in &inst.neg {
        if inst.pos.iter().any(|p| p == n) {
            return Err(Error::Validation(format!("pos/neg overlap: {n:?} appears in both")));
        }
    }
    Ok(())
}

/// Unit-norm embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    /// Normalize a raw vector to unit Euclidean norm.
    pub fn from_raw(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("empty embedding vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite embedding component".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Numerical("degenerate embedding: zero raw vector".into()));
        }
        Ok(Embedding { values: values.into_iter().map(|v| v / norm).collect() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Euclidean norm is 1 within the stated tolerance.
    pub fn is_unit_norm(&self) -> bool {
        let norm = self.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        (norm - 1.0).abs() <= 1e-6
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNli {
    id: String,
    premise: String,
    hypothesis: String,
    label: String,
    source: String,
}

/// Parse newline-delimited NLI records, one `NliExample` per well-formed line.
///
/// Schema per line:
/// `{"id", "premise", "hypothesis", "label": "entailment"|"neutral"|"contradiction", "source": "mnli"|"snli"}`.
pub fn parse_nli_lines<R: BufRead>(reader: R) -> Result<Vec<NliExample>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawNli = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
        let label = NliLabel::parse(&raw.label)
            .ok_or_else(|| Error::Parse(format!("unknown label at line {lineno}: {:?}", raw.label)))?;
        let source = NliSource::parse(&raw.source)
            .ok_or_else(|| Error::Parse(format!("unknown source at line {lineno}: {:?}", raw.source)))?;
        let premise = nfc(&raw.premise);
        let hypothesis = nfc(&raw.hypothesis);
        if premise.is_empty() {
            return Err(Error::Parse(format!("line {lineno}: field premise is empty")));
        }
        if hypothesis.is_empty() {
            return Err(Error::Parse(format!("line {lineno}: field hypothesis is empty")));
        }
        out.push(NliExample { id: raw.id, premise, hypothesis, label, source });
    }
    Ok(out)
}

/// Parse newline-delimited translation-cache records.
///
/// Schema per line: `{"example_id", "side": "premise"|"hypothesis", "lang", "text", "qe_score"?}`.
pub fn parse_translation_lines<R: BufRead>(reader: R) -> Result<Vec<TranslationRecord>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut rec: TranslationRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
        rec.text = nfc(&rec.text);
        rec.validate().map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
        out.push(rec);
    }
    Ok(out)
}

/// Parse newline-delimited training instances, normalizing and validating each.
pub fn parse_train_instances<R: BufRead>(reader: R) -> Result<Vec<TrainInstance>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut inst: TrainInstance = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
        inst.normalize();
        validate_train_instance(&inst).map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
        out.push(inst);
    }
    Ok(out)
}

/// Serialize records as newline-delimited JSON (canonical field order).
pub fn to_jsonl<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}
