//! Hard-negative mining from a ranked candidate window and teacher scoring
//! of each instance's candidate group.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datamodel::{validate_train_instance, Embedding, TrainInstance};
use crate::encoder::EncoderPort;
use crate::error::{Error, Result};

/// Mining policy: sample up to `max_negatives` uniformly (without
/// replacement) from the candidates ranked within `[window_lo, window_hi]`
/// (1-based, by descending query similarity). Starting the window at rank 2
/// keeps the single most similar passage — often a paraphrase of the
/// positive — out of the pool.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MiningSettings {
    pub max_negatives: usize,
    pub window_lo: usize,
    pub window_hi: usize,
    pub seed: u64,
    pub exclude_exact_duplicates: bool,
}

impl Default for MiningSettings {
    fn default() -> Self {
        MiningSettings {
            max_negatives: 15,
            window_lo: 2,
            window_hi: 100,
            seed: 13,
            exclude_exact_duplicates: true,
        }
    }
}

impl MiningSettings {
    pub fn validate(&self) -> Result<()> {
        if self.window_lo < 1 || self.window_lo > self.window_hi {
            return Err(Error::Validation(format!(
                "candidate window must satisfy 1 ≤ lo ≤ hi, got [{}, {}]",
                self.window_lo, self.window_hi
            )));
        }
        Ok(())
    }
}

/// Append mined hard negatives to an instance.
///
/// The corpus is ranked by dot product against the query (descending, ties
/// by lower index), restricted to the rank window, and cleaned: positives
/// never enter the pool, existing negatives are not duplicated, and — when
/// `exclude_exact_duplicates` — neither is the query text itself. Up to
/// `max_negatives` survivors are sampled uniformly without replacement and
/// appended in rank order (most similar first).
///
/// Appending invalidates any previously attached teacher scores (they are
/// aligned to the old group), so they are cleared when mining adds at least
/// one negative.
pub fn mine_hard_negatives(
    inst: &TrainInstance,
    corpus: &[String],
    corpus_embeddings: &Array2<f64>,
    query_embedding: &Embedding,
    settings: &MiningSettings,
) -> Result<TrainInstance> {
    settings.validate()?;
    if corpus.is_empty() {
        return Ok(inst.clone());
    }
    if corpus_embeddings.nrows() != corpus.len() {
        return Err(Error::Dimension(format!(
            "{} corpus rows vs {} embedding rows",
            corpus.len(),
            corpus_embeddings.nrows()
        )));
    }
    if corpus_embeddings.ncols() != query_embedding.dim() {
        return Err(Error::Dimension(format!(
            "corpus embedding dim {} vs query dim {}",
            corpus_embeddings.ncols(),
            query_embedding.dim()
        )));
    }
    if settings.max_negatives == 0 {
        return Ok(inst.clone());
    }

    let q = query_embedding.values();
    let mut ranked: Vec<(usize, f64)> = corpus_embeddings
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| (i, row.iter().zip(q).map(|(a, b)| a * b).sum::<f64>()))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let lo = settings.window_lo - 1;
    let hi = settings.window_hi.min(ranked.len());
    let windowed = if lo < ranked.len() { &ranked[lo..hi] } else { &[][..] };

    let mut pool: Vec<usize> = Vec::new();
    for &(idx, _) in windowed {
        let text = &corpus[idx];
        if inst.pos.contains(text) || inst.neg.contains(text) {
            continue;
        }
        if settings.exclude_exact_duplicates && *text == inst.query {
            continue;
        }
        if pool.iter().any(|&p| corpus[p] == *text) {
            continue;
        }
        pool.push(idx);
    }

    let k = settings.max_negatives.min(pool.len());
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut shuffled = pool.clone();
    shuffled.shuffle(&mut rng);
    let mut chosen: Vec<usize> = shuffled.into_iter().take(k).collect();
    // Re-order the sample by rank so appended negatives go hardest-first.
    chosen.sort_by_key(|idx| pool.iter().position(|p| p == idx).expect("chosen from pool"));

    let mut out = inst.clone();
    if !chosen.is_empty() {
        out.neg.extend(chosen.into_iter().map(|idx| corpus[idx].clone()));
        out.teacher_scores = None;
    }
    validate_train_instance(&out)?;
    Ok(out)
}

/// Mine a batch of instances against one corpus via an encoder port: the
/// corpus is embedded once, queries are embedded with the training
/// instruction, and each instance gets an independent seed offset so a batch
/// rerun reproduces per-instance samples exactly.
pub fn mine_with_encoder(
    instances: &[TrainInstance],
    corpus: &[String],
    encoder: &dyn EncoderPort,
    instruction: Option<&str>,
    settings: &MiningSettings,
) -> Result<Vec<TrainInstance>> {
    settings.validate()?;
    let corpus_emb = if corpus.is_empty() {
        Array2::zeros((0, encoder.dim()))
    } else {
        encoder.embed(corpus, None)?
    };
    let queries: Vec<String> = instances.iter().map(|i| i.query.clone()).collect();
    let query_emb = encoder.embed(&queries, instruction)?;
    instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            let q = Embedding::from_raw(query_emb.row(i).to_vec())?;
            let per_instance =
                MiningSettings { seed: settings.seed.wrapping_add(i as u64), ..settings.clone() };
            mine_hard_negatives(inst, corpus, &corpus_emb, &q, &per_instance)
        })
        .collect()
}

/// Cross-encoder stand-in: maps (query, passage) pairs to relevance scores.
pub trait TeacherPort {
    fn score_pairs(&self, pairs: &[(String, String)]) -> Result<Vec<f64>>;
}

/// Populate `teacher_scores` for the group `[pos[0]] ++ neg`, in group
/// order. Query, positives, and negatives are preserved verbatim; on teacher
/// failure the instance is left unmodified.
pub fn score_teacher(inst: &TrainInstance, teacher: &dyn TeacherPort) -> Result<TrainInstance> {
    let mut pairs = Vec::with_capacity(1 + inst.neg.len());
    pairs.push((inst.query.clone(), inst.pos[0].clone()));
    for n in &inst.neg {
        pairs.push((inst.query.clone(), n.clone()));
    }
    let scores = teacher.score_pairs(&pairs)?;
    if scores.len() != pairs.len() {
        return Err(Error::Validation(format!(
            "teacher returned {} scores for {} pairs",
            scores.len(),
            pairs.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Numerical(format!("teacher produced non-finite score {bad}")));
    }
    let mut out = inst.clone();
    out.teacher_scores = Some(scores);
    Ok(out)
}

/// Content key for one (query, passage) pair in a teacher score file.
pub fn pair_hash(query: &str, passage: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(query.as_bytes());
    hasher.update([0x1f]);
    hasher.update(passage.as_bytes());
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize, Deserialize)]
struct ScoreLine {
    hash: String,
    score: f64,
}

/// Teacher scores precomputed into a file of `{"hash", "score"}` lines,
/// keyed by [`pair_hash`].
pub struct FileTeacher {
    scores: BTreeMap<String, f64>,
}

impl FileTeacher {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut scores = BTreeMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(format!("<line {}>", lineno + 1), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ScoreLine = serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("score line {}: {e}", lineno + 1)))?;
            if !rec.score.is_finite() {
                return Err(Error::Parse(format!("non-finite score at line {}", lineno + 1)));
            }
            scores.insert(rec.hash, rec.score);
        }
        Ok(FileTeacher { scores })
    }

    /// Serialize (query, passage, score) triples into the file schema.
    pub fn export_lines(entries: &[(String, String, f64)]) -> Result<String> {
        let mut out = String::new();
        for (query, passage, score) in entries {
            let line = ScoreLine { hash: pair_hash(query, passage), score: *score };
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
        Ok(out)
    }
}

impl TeacherPort for FileTeacher {
    fn score_pairs(&self, pairs: &[(String, String)]) -> Result<Vec<f64>> {
        pairs
            .iter()
            .map(|(q, p)| {
                self.scores.get(&pair_hash(q, p)).copied().ok_or_else(|| {
                    let qp: String = q.chars().take(40).collect();
                    let pp: String = p.chars().take(40).collect();
                    Error::Missing(format!("no teacher score for pair ({qp:?}, {pp:?})"))
                })
            })
            .collect()
    }
}

/// Teacher that scores a pair as the dot product of an encoder's embeddings
/// (a bi-encoder stand-in for a cross-encoder).
pub struct EncoderTeacher {
    encoder: Box<dyn EncoderPort>,
}

impl EncoderTeacher {
    pub fn new(encoder: Box<dyn EncoderPort>) -> Self {
        EncoderTeacher { encoder }
    }
}

impl TeacherPort for EncoderTeacher {
    fn score_pairs(&self, pairs: &[(String, String)]) -> Result<Vec<f64>> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let queries: Vec<String> = pairs.iter().map(|(q, _)| q.clone()).collect();
        let passages: Vec<String> = pairs.iter().map(|(_, p)| p.clone()).collect();
        let qe = self.encoder.embed(&queries, None)?;
        let pe = self.encoder.embed(&passages, None)?;
        Ok((0..pairs.len())
            .map(|i| qe.row(i).iter().zip(pe.row(i).iter()).map(|(a, b)| a * b).sum())
            .collect())
    }
}

/// Build a teacher from a port-spec string: `file:<path>` for a score file,
/// `encoder:<encoder-spec>` for a dot-product bi-encoder teacher.
pub fn build_teacher(spec: &str) -> Result<Box<dyn TeacherPort>> {
    if let Some(path) = spec.strip_prefix("file:") {
        Ok(Box::new(FileTeacher::from_path(path)?))
    } else if let Some(enc) = spec.strip_prefix("encoder:") {
        Ok(Box::new(EncoderTeacher::new(crate::encoder::build_encoder(enc)?)))
    } else {
        Err(Error::Validation(format!(
            "unknown teacher spec {spec:?}: expected file:<path> or encoder:<encoder-spec>"
        )))
    }
}
