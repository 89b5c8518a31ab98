//! Deterministic synthetic data: cipher "languages", stubbed quality
//! estimation, NLI-style corpora, translation caches, and per-family
//! evaluation datasets whose gold structure is recoverable by construction.
//!
//! Every generator is a pure function of its seed. Texts carry digit
//! markers that a [`MarkerEncoder`](crate::encoder::MarkerEncoder) maps to
//! identical vectors, so a perfect-oracle run of the harness is possible
//! without any trained model.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datamodel::{
    LangCode, NliExample, NliLabel, NliSource, TranslationRecord, TranslationSide,
};
use crate::encoder::{EncoderPort, MarkerEncoder};
use crate::error::{Error, Result};
use crate::evaluator::TaskFamily;
use crate::pipeline::{QePort, TranslatorPort, SOURCE_LANG};

/// Embedding width used by the marker-oracle encoder in synthetic suites.
/// Dataset generators keep all digit markers distinct modulo this value.
pub const MARKER_ORACLE_DIM: usize = 64;

pub(crate) fn fnv1a(text: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in text.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Letter-substitution "translation": each language gets its own a–z
/// permutation derived from its code. Digits, punctuation, and whitespace
/// pass through unchanged, so marker structure survives translation. The
/// source language maps to the identity.
pub struct CipherTranslator;

impl CipherTranslator {
    fn table(lang: &LangCode) -> [u8; 26] {
        let mut table = [0u8; 26];
        for (i, t) in table.iter_mut().enumerate() {
            *t = b'a' + i as u8;
        }
        if lang.as_str() != SOURCE_LANG {
            let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(lang.as_str()));
            table.shuffle(&mut rng);
        }
        table
    }

    /// Applies the language's substitution to one text.
    pub fn cipher(lang: &LangCode, text: &str) -> String {
        let table = Self::table(lang);
        text.chars()
            .map(|c| match c {
                'a'..='z' => table[(c as u8 - b'a') as usize] as char,
                'A'..='Z' => (table[(c as u8 - b'A') as usize] as char).to_ascii_uppercase(),
                other => other,
            })
            .collect()
    }
}

impl TranslatorPort for CipherTranslator {
    fn translate(
        &self,
        text: &str,
        source_lang: &LangCode,
        target_lang: &LangCode,
    ) -> Result<String> {
        if source_lang.as_str() != SOURCE_LANG {
            return Err(Error::Validation(format!(
                "cipher translator only translates from {SOURCE_LANG}, got {source_lang}"
            )));
        }
        Ok(Self::cipher(target_lang, text))
    }
}

/// Distribution shape for [`StubQe`] scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QeMode {
    /// Scores uniform in [0, 1): a θ-threshold filter retains ≈ 1−θ.
    Uniform,
    /// Scores in [0.70, 1.00): most translations pass a 0.75 gate.
    BiasedHigh,
}

/// Deterministic quality-estimation stub: the score is a pure function of
/// (source text, translated text, language, salt).
pub struct StubQe {
    mode: QeMode,
    salt: u64,
}

impl StubQe {
    pub fn new(mode: QeMode, salt: u64) -> Self {
        StubQe { mode, salt }
    }
}

impl QePort for StubQe {
    fn score(&self, source_text: &str, translated_text: &str, lang: &LangCode) -> Result<f64> {
        let key = fnv1a(source_text)
            .wrapping_mul(31)
            .wrapping_add(fnv1a(translated_text))
            .wrapping_mul(31)
            .wrapping_add(fnv1a(lang.as_str()))
            .wrapping_add(self.salt);
        let u = ChaCha8Rng::seed_from_u64(key).gen::<f64>();
        Ok(match self.mode {
            QeMode::Uniform => u,
            QeMode::BiasedHigh => 0.70 + 0.30 * u,
        })
    }
}

const NOUNS: [&str; 8] =
    ["table", "river", "market", "signal", "garden", "window", "letter", "bridge"];
const VERBS: [&str; 8] =
    ["crosses", "repairs", "watches", "carries", "opens", "follows", "returns", "describes"];
const PLACES: [&str; 8] =
    ["station", "harbor", "village", "library", "forest", "plaza", "quarry", "mill"];

fn pick<'a>(rng: &mut ChaCha8Rng, bank: &'a [&'a str]) -> &'a str {
    bank[rng.gen_range(0..bank.len())]
}

/// NLI-style corpus of `groups` premises, each paired with an entailed, a
/// contradictory, and a neutral hypothesis (three examples sharing one id).
/// Entailed hypotheses repeat the premise's digit marker; the other labels
/// get markers of their own.
pub fn gen_nli_corpus(groups: usize, seed: u64) -> Vec<NliExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(groups * 3);
    for g in 0..groups {
        let id = format!("ex{g:05}");
        let marker = 1000 + g;
        let premise = format!(
            "the {} near the {} {} landmark {marker}",
            pick(&mut rng, &NOUNS),
            pick(&mut rng, &PLACES),
            pick(&mut rng, &VERBS),
        );
        let source = if g % 2 == 0 { NliSource::Snli } else { NliSource::Mnli };
        let hypotheses = [
            (NliLabel::Entailment, format!("something happens at landmark {marker}")),
            (
                NliLabel::Contradiction,
                format!("the {} stays empty at landmark {}", pick(&mut rng, &PLACES), 500_000 + g),
            ),
            (
                NliLabel::Neutral,
                format!("a {} might be near landmark {}", pick(&mut rng, &NOUNS), 700_000 + g),
            ),
        ];
        for (label, hypothesis) in hypotheses {
            out.push(NliExample {
                id: id.clone(),
                premise: premise.clone(),
                hypothesis,
                label,
                source,
            });
        }
    }
    out
}

/// Translation cache for `examples` into each target language, in the file
/// order the expansion stage expects: one premise record per new
/// (example id, language), then one hypothesis record per example. QE
/// scores come from `qe`; translations from `translator`.
pub fn gen_translation_cache(
    examples: &[NliExample],
    langs: &[LangCode],
    translator: &dyn TranslatorPort,
    qe: &dyn QePort,
) -> Result<Vec<TranslationRecord>> {
    let source = SOURCE_LANG.parse::<LangCode>()?;
    let mut out = Vec::new();
    let mut seen_premises = std::collections::BTreeSet::new();
    for ex in examples {
        for lang in langs {
            if seen_premises.insert((ex.id.clone(), lang.clone())) {
                let text = translator.translate(&ex.premise, &source, lang)?;
                let qe_score = qe.score(&ex.premise, &text, lang)?;
                out.push(TranslationRecord {
                    example_id: ex.id.clone(),
                    side: TranslationSide::Premise,
                    lang: lang.clone(),
                    text,
                    qe_score: Some(qe_score),
                });
            }
            let text = translator.translate(&ex.hypothesis, &source, lang)?;
            let qe_score = qe.score(&ex.hypothesis, &text, lang)?;
            out.push(TranslationRecord {
                example_id: ex.id.clone(),
                side: TranslationSide::Hypothesis,
                lang: lang.clone(),
                text,
                qe_score: Some(qe_score),
            });
        }
    }
    Ok(out)
}

/// Distractor passages for hard-negative mining, each with its own marker.
pub fn gen_mining_corpus(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            format!(
                "a {} {} the {} at landmark {}",
                pick(&mut rng, &NOUNS),
                pick(&mut rng, &VERBS),
                pick(&mut rng, &PLACES),
                900_000 + i
            )
        })
        .collect()
}

fn digit_runs(text: &str) -> Vec<u64> {
    let mut out = Vec::new();
    let mut cur: Option<u64> = None;
    for ch in text.chars() {
        if let Some(d) = ch.to_digit(10) {
            cur = Some(cur.unwrap_or(0).wrapping_mul(10).wrapping_add(u64::from(d)));
        } else if let Some(v) = cur.take() {
            out.push(v);
        }
    }
    if let Some(v) = cur {
        out.push(v);
    }
    out
}

/// Oracle relevance score for a (query, passage) pair: 8.0 when the texts
/// share any digit marker, 0.0 otherwise. Mirrors how the synthetic corpora
/// encode relatedness, so it can stand in for a trained scoring model.
pub fn oracle_pair_score(query: &str, passage: &str) -> f64 {
    let q = digit_runs(query);
    let p = digit_runs(passage);
    if q.iter().any(|m| p.contains(m)) {
        8.0
    } else {
        0.0
    }
}

/// The oracle encoder synthetic suites are scored with.
pub fn oracle_encoder() -> MarkerEncoder {
    MarkerEncoder::new(MARKER_ORACLE_DIM)
}

/// Embeds gold structure directly (used to sanity-check harness wiring).
pub fn oracle_embeddings(texts: &[String]) -> Result<Array2<f64>> {
    oracle_encoder().embed(texts, None)
}

/// Hands out dataset-unique digit markers, all distinct modulo
/// [`MARKER_ORACLE_DIM`].
struct MarkerAlloc {
    next: usize,
}

impl MarkerAlloc {
    fn new() -> Self {
        MarkerAlloc { next: 0 }
    }

    fn take(&mut self) -> usize {
        let m = self.next;
        self.next += 1;
        assert!(
            self.next <= MARKER_ORACLE_DIM,
            "synthetic dataset would exceed {MARKER_ORACLE_DIM} distinct markers"
        );
        m
    }
}

fn flavored(rng: &mut ChaCha8Rng, lang: &LangCode, body: &str) -> String {
    let lead = CipherTranslator::cipher(lang, pick(rng, &NOUNS));
    format!("{lead} {body}")
}

/// One synthetic evaluation dataset in the family's JSONL schema. The gold
/// structure is exactly recoverable by the marker-oracle encoder, and the
/// surface text is language-flavored through the cipher.
pub fn generate_eval_dataset(
    family: TaskFamily,
    task: &str,
    lang: &LangCode,
    seed: u64,
) -> Result<String> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ fnv1a(task).rotate_left(17) ^ fnv1a(lang.as_str()));
    let mut markers = MarkerAlloc::new();
    let mut lines = Vec::new();
    match family {
        TaskFamily::Btxt => {
            for _ in 0..16 {
                let m = markers.take();
                let src = format!("sentence about landmark {m}");
                let tgt = CipherTranslator::cipher(lang, &format!("version of landmark {m}"));
                lines.push(serde_json::json!({ "src": src, "tgt": tgt }).to_string());
            }
        }
        TaskFamily::PrClf => {
            for _ in 0..12 {
                let m = markers.take();
                let t1 = flavored(&mut rng, lang, &format!("topic {m}"));
                let t2 = flavored(&mut rng, lang, &format!("note {m}"));
                lines.push(serde_json::json!({ "text1": t1, "text2": t2, "label": 1 }).to_string());
            }
            for _ in 0..12 {
                let (a, b) = (markers.take(), markers.take());
                let t1 = flavored(&mut rng, lang, &format!("topic {a}"));
                let t2 = flavored(&mut rng, lang, &format!("note {b}"));
                lines.push(serde_json::json!({ "text1": t1, "text2": t2, "label": 0 }).to_string());
            }
        }
        TaskFamily::Clf => {
            let classes = ["news", "sport", "culture"];
            let class_markers: Vec<usize> = classes.iter().map(|_| markers.take()).collect();
            for (split, count) in [("train", 6), ("test", 4)] {
                for (c, label) in classes.iter().enumerate() {
                    for _ in 0..count {
                        let text = flavored(&mut rng, lang, &format!("story {}", class_markers[c]));
                        lines.push(
                            serde_json::json!({ "text": text, "label": label, "split": split })
                                .to_string(),
                        );
                    }
                }
            }
        }
        TaskFamily::MultiClf => {
            let (a, b) = (markers.take(), markers.take());
            let combos: [(&[&str], String); 3] = [
                (&["joy"], format!("mood {a}")),
                (&["calm"], format!("mood {b}")),
                (&["calm", "joy"], format!("mood {a} and {b}")),
            ];
            for split in ["train", "test"] {
                for (labels, body) in &combos {
                    for _ in 0..3 {
                        let text = flavored(&mut rng, lang, body);
                        lines.push(
                            serde_json::json!({ "text": text, "labels": labels, "split": split })
                                .to_string(),
                        );
                    }
                }
            }
        }
        TaskFamily::Clust => {
            for c in 0..3 {
                let m = markers.take();
                for _ in 0..8 {
                    let text = flavored(&mut rng, lang, &format!("cluster {m}"));
                    lines.push(
                        serde_json::json!({ "text": text, "label": format!("g{c}") }).to_string(),
                    );
                }
            }
        }
        TaskFamily::Sts => {
            for _ in 0..4 {
                let m = markers.take();
                lines.push(
                    serde_json::json!({
                        "text1": flavored(&mut rng, lang, &format!("theme {m}")),
                        "text2": flavored(&mut rng, lang, &format!("theme {m}")),
                        "score": 3.0
                    })
                    .to_string(),
                );
            }
            for _ in 0..4 {
                let (s, u, v) = (markers.take(), markers.take(), markers.take());
                lines.push(
                    serde_json::json!({
                        "text1": flavored(&mut rng, lang, &format!("theme {s} {u}")),
                        "text2": flavored(&mut rng, lang, &format!("theme {s} {v}")),
                        "score": 2.0
                    })
                    .to_string(),
                );
            }
            for _ in 0..4 {
                let (x, y) = (markers.take(), markers.take());
                lines.push(
                    serde_json::json!({
                        "text1": flavored(&mut rng, lang, &format!("theme {x}")),
                        "text2": flavored(&mut rng, lang, &format!("theme {y}")),
                        "score": 1.0
                    })
                    .to_string(),
                );
            }
        }
        TaskFamily::Rtrvl => {
            let doc_markers: Vec<usize> = (0..12).map(|_| markers.take()).collect();
            for (i, m) in doc_markers.iter().enumerate() {
                let text = flavored(&mut rng, lang, &format!("article {m}"));
                lines.push(
                    serde_json::json!({ "type": "doc", "id": format!("d{i}"), "text": text })
                        .to_string(),
                );
            }
            for (i, m) in doc_markers.iter().take(6).enumerate() {
                let text = flavored(&mut rng, lang, &format!("looking for {m}"));
                lines.push(
                    serde_json::json!({
                        "type": "query",
                        "id": format!("q{i}"),
                        "text": text,
                        "relevant": [format!("d{i}")]
                    })
                    .to_string(),
                );
            }
        }
        TaskFamily::Rrnk => {
            for _ in 0..6 {
                let pos = markers.take();
                let query = flavored(&mut rng, lang, &format!("seek {pos}"));
                let mut cands =
                    vec![(flavored(&mut rng, lang, &format!("match {pos}")), 1u8)];
                for _ in 0..3 {
                    let m = markers.take();
                    cands.push((flavored(&mut rng, lang, &format!("other {m}")), 0));
                }
                cands.shuffle(&mut rng);
                let (candidates, labels): (Vec<String>, Vec<u8>) = cands.into_iter().unzip();
                lines.push(
                    serde_json::json!({
                        "query": query,
                        "candidates": candidates,
                        "labels": labels
                    })
                    .to_string(),
                );
            }
        }
    }
    Ok(lines.join("\n") + "\n")
}
