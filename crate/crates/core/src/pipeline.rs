//! Cross-lingual data construction: expands source-language NLI examples
//! into bilingual premise/hypothesis pairs across direction configurations,
//! gates them on translation-quality estimates, and assembles contrastive
//! training instances (entailment as positive, contradiction as negative).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datamodel::{
    DirectionConfig, LangCode, NliExample, NliLabel, NliSource, InstanceMeta, TrainInstance,
    TranslationRecord, TranslationSide,
};
use crate::error::{Error, Result};

/// Language tag of the untranslated source corpus.
pub const SOURCE_LANG: &str = "eng_Latn";

/// Default quality-estimation gate: pairs whose minimum translated-side
/// score falls below this are dropped.
pub const DEFAULT_QE_THRESHOLD: f64 = 0.75;

/// How to expand the corpus: which target languages, which premise/
/// hypothesis direction configurations, and the QE gate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionSettings {
    pub target_langs: Vec<LangCode>,
    pub configs: Vec<DirectionConfig>,
    pub qe_threshold: f64,
}

impl ExpansionSettings {
    pub fn new(target_langs: Vec<LangCode>) -> Self {
        ExpansionSettings {
            target_langs,
            configs: DirectionConfig::ALL.to_vec(),
            qe_threshold: DEFAULT_QE_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.configs.is_empty() {
            return Err(Error::Validation("expansion needs at least one direction config".into()));
        }
        let mut seen = self.configs.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.configs.len() {
            return Err(Error::Validation("duplicate direction config".into()));
        }
        if !(0.0..=1.0).contains(&self.qe_threshold) {
            return Err(Error::Validation(format!(
                "qe_threshold must lie in [0,1], got {}",
                self.qe_threshold
            )));
        }
        let needs_translations =
            self.configs.iter().any(|c| *c != DirectionConfig::SrcSrc);
        if needs_translations && self.target_langs.is_empty() {
            return Err(Error::Validation(
                "translated direction configs need at least one target language".into(),
            ));
        }
        Ok(())
    }
}

/// One expanded premise/hypothesis rendering of an NLI example.
///
/// `min_translated_qe` is the minimum QE score over the translated sides the
/// direction uses; it is absent exactly for source–source pairs, which carry
/// no translation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BilingualPair {
    pub example_id: String,
    pub direction: DirectionConfig,
    pub lang: LangCode,
    pub premise_text: String,
    pub hypothesis_text: String,
    pub label: NliLabel,
    pub source: NliSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_translated_qe: Option<f64>,
}

/// Both translated sides of one example for one target language.
#[derive(Debug, Clone)]
pub struct TranslatedExample {
    pub premise: TranslationRecord,
    pub hypothesis: TranslationRecord,
}

/// Translations of one example keyed by target language.
pub type TranslationMap = BTreeMap<LangCode, TranslatedExample>;

fn require_qe(rec: &TranslationRecord) -> Result<f64> {
    rec.qe_score.ok_or_else(|| {
        Error::Missing(format!(
            "translation of example {} ({:?} side, {}) has no qe score",
            rec.example_id,
            rec.side,
            rec.lang
        ))
    })
}

/// Expand one example into bilingual pairs: one pair per (target language,
/// translated direction) plus at most one source–source pair regardless of
/// how many target languages are enabled.
///
/// Pairs are emitted in (target language, config) order with the
/// deduplicated source–source pair last.
pub fn expand_example(
    ex: &NliExample,
    translations: &TranslationMap,
    settings: &ExpansionSettings,
) -> Result<Vec<BilingualPair>> {
    settings.validate()?;
    let mut pairs = Vec::new();
    let translated_configs: Vec<DirectionConfig> = settings
        .configs
        .iter()
        .copied()
        .filter(|c| *c != DirectionConfig::SrcSrc)
        .collect();

    for lang in &settings.target_langs {
        if translated_configs.is_empty() {
            break;
        }
        let tr = translations.get(lang).ok_or_else(|| {
            Error::Missing(format!("missing translation for example {} into {lang}", ex.id))
        })?;
        for side in [&tr.premise, &tr.hypothesis] {
            if side.example_id != ex.id || side.lang != *lang {
                return Err(Error::Validation(format!(
                    "translation record for example {} ({}) does not match example {} ({lang})",
                    side.example_id, side.lang, ex.id
                )));
            }
        }
        if tr.premise.side != TranslationSide::Premise
            || tr.hypothesis.side != TranslationSide::Hypothesis
        {
            return Err(Error::Validation(format!(
                "translation sides swapped for example {} ({lang})",
                ex.id
            )));
        }
        for config in &translated_configs {
            let (premise_text, hypothesis_text, min_qe) = match config {
                DirectionConfig::TgtSrc => {
                    (tr.premise.text.clone(), ex.hypothesis.clone(), require_qe(&tr.premise)?)
                }
                DirectionConfig::SrcTgt => {
                    (ex.premise.clone(), tr.hypothesis.text.clone(), require_qe(&tr.hypothesis)?)
                }
                DirectionConfig::TgtTgt => (
                    tr.premise.text.clone(),
                    tr.hypothesis.text.clone(),
                    require_qe(&tr.premise)?.min(require_qe(&tr.hypothesis)?),
                ),
                DirectionConfig::SrcSrc => unreachable!("filtered out above"),
            };
            pairs.push(BilingualPair {
                example_id: ex.id.clone(),
                direction: *config,
                lang: lang.clone(),
                premise_text,
                hypothesis_text,
                label: ex.label,
                source: ex.source,
                min_translated_qe: Some(min_qe),
            });
        }
    }

    if settings.configs.contains(&DirectionConfig::SrcSrc) {
        pairs.push(BilingualPair {
            example_id: ex.id.clone(),
            direction: DirectionConfig::SrcSrc,
            lang: LangCode::new(SOURCE_LANG)?,
            premise_text: ex.premise.clone(),
            hypothesis_text: ex.hypothesis.clone(),
            label: ex.label,
            source: ex.source,
            min_translated_qe: None,
        });
    }
    Ok(pairs)
}

/// Keep a pair iff it is source–source (never translated, never gated) or
/// its minimum translated-side QE score is at least `threshold`. Order is
/// preserved. A translated pair that somehow lacks a score fails the gate.
pub fn filter_by_qe(pairs: Vec<BilingualPair>, threshold: f64) -> Vec<BilingualPair> {
    pairs
        .into_iter()
        .filter(|p| match (p.direction, p.min_translated_qe) {
            (DirectionConfig::SrcSrc, _) => true,
            (_, Some(q)) => q >= threshold,
            (_, None) => false,
        })
        .collect()
}

/// Assemble contrastive instances from pairs grouped by
/// `(example_id, lang, direction)`.
///
/// Within a group (which shares one premise rendering), entailment
/// hypotheses become positives and contradiction hypotheses negatives;
/// neutral hypotheses become additional negatives for SNLI-sourced groups
/// and are ignored for MultiNLI-sourced ones. Groups without a positive are
/// dropped. Output instances always satisfy the training-instance
/// invariants: duplicate texts are removed and a text listed as positive is
/// never also emitted as negative.
pub fn build_contrastive(pairs: &[BilingualPair]) -> Vec<TrainInstance> {
    let mut groups: BTreeMap<(String, LangCode, DirectionConfig), Vec<&BilingualPair>> =
        BTreeMap::new();
    for pair in pairs {
        groups
            .entry((pair.example_id.clone(), pair.lang.clone(), pair.direction))
            .or_default()
            .push(pair);
    }

    let mut instances = Vec::new();
    for ((_, lang, direction), members) in groups {
        let query = members[0].premise_text.clone();
        let source = members[0].source;
        let mut pos: Vec<String> = Vec::new();
        let mut neg: Vec<String> = Vec::new();
        for pair in &members {
            let text = pair.hypothesis_text.clone();
            match pair.label {
                NliLabel::Entailment => {
                    if !pos.contains(&text) {
                        pos.push(text);
                    }
                }
                NliLabel::Contradiction => {
                    if !neg.contains(&text) {
                        neg.push(text);
                    }
                }
                NliLabel::Neutral => {
                    if source == NliSource::Snli && !neg.contains(&text) {
                        neg.push(text);
                    }
                }
            }
        }
        if pos.is_empty() {
            continue;
        }
        neg.retain(|n| !pos.contains(n));
        instances.push(TrainInstance {
            query,
            pos,
            neg,
            teacher_scores: None,
            meta: InstanceMeta { lang, direction, source: source.as_str().to_string() },
        });
    }
    instances
}

/// Index a flat translation cache for corpus-wide expansion.
///
/// Premise translations are shared by every line of a premise group: the
/// cache may repeat them, but repeated records must agree byte-for-byte.
/// Hypothesis translations are consumed in file order, one per NLI line with
/// the same `(example_id, lang)` — the cache must be order-aligned with the
/// NLI stream.
#[derive(Debug)]
struct TranslationIndex {
    premises: BTreeMap<(String, LangCode), TranslationRecord>,
    hypotheses: BTreeMap<(String, LangCode), std::collections::VecDeque<TranslationRecord>>,
}

impl TranslationIndex {
    fn build(records: &[TranslationRecord]) -> Result<Self> {
        let mut premises: BTreeMap<(String, LangCode), TranslationRecord> = BTreeMap::new();
        let mut hypotheses: BTreeMap<(String, LangCode), std::collections::VecDeque<TranslationRecord>> =
            BTreeMap::new();
        for rec in records {
            rec.validate()?;
            let key = (rec.example_id.clone(), rec.lang.clone());
            match rec.side {
                TranslationSide::Premise => {
                    if let Some(existing) = premises.get(&key) {
                        if existing.text != rec.text || existing.qe_score != rec.qe_score {
                            return Err(Error::Validation(format!(
                                "conflicting premise translations for example {} into {}",
                                rec.example_id, rec.lang
                            )));
                        }
                    } else {
                        premises.insert(key, rec.clone());
                    }
                }
                TranslationSide::Hypothesis => {
                    hypotheses.entry(key).or_default().push_back(rec.clone());
                }
            }
        }
        Ok(TranslationIndex { premises, hypotheses })
    }

    fn take(&mut self, ex: &NliExample, lang: &LangCode) -> Result<TranslatedExample> {
        let key = (ex.id.clone(), lang.clone());
        let premise = self.premises.get(&key).cloned().ok_or_else(|| {
            Error::Missing(format!("missing premise translation for example {} into {lang}", ex.id))
        })?;
        let hypothesis = self
            .hypotheses
            .get_mut(&key)
            .and_then(|q| q.pop_front())
            .ok_or_else(|| {
                Error::Missing(format!(
                    "missing hypothesis translation for example {} into {lang}",
                    ex.id
                ))
            })?;
        Ok(TranslatedExample { premise, hypothesis })
    }
}

/// Expand a whole corpus against a flat translation cache.
pub fn expand_corpus(
    examples: &[NliExample],
    translations: &[TranslationRecord],
    settings: &ExpansionSettings,
) -> Result<Vec<BilingualPair>> {
    settings.validate()?;
    let needs_translations = settings.configs.iter().any(|c| *c != DirectionConfig::SrcSrc);
    let mut index = TranslationIndex::build(translations)?;
    let mut pairs = Vec::new();
    for ex in examples {
        let mut map = TranslationMap::new();
        if needs_translations {
            for lang in &settings.target_langs {
                map.insert(lang.clone(), index.take(ex, lang)?);
            }
        }
        pairs.extend(expand_example(ex, &map, settings)?);
    }
    Ok(pairs)
}

/// The full data-construction pass: expand, gate on QE, build instances.
pub fn run_build_data(
    examples: &[NliExample],
    translations: &[TranslationRecord],
    settings: &ExpansionSettings,
) -> Result<Vec<TrainInstance>> {
    let pairs = expand_corpus(examples, translations, settings)?;
    let kept = filter_by_qe(pairs, settings.qe_threshold);
    Ok(build_contrastive(&kept))
}

/// Translation source: maps (text, source language, target language) to the
/// translated text. The repository ships deterministic synthetic
/// implementations; real MT systems sit behind the same trait.
pub trait TranslatorPort {
    fn translate(&self, text: &str, source_lang: &LangCode, target_lang: &LangCode) -> Result<String>;
}

/// Quality estimation: scores a (source text, translated text) pair in
/// [0, 1] without reference translations.
pub trait QePort {
    fn score(&self, source_text: &str, translated_text: &str, lang: &LangCode) -> Result<f64>;
}
