//! Encoder abstraction: instruction formatting, the port trait every encoder
//! implements, and port-spec parsing for the CLI.

pub mod lookup;
pub mod marker;
pub mod toy;

pub use lookup::{content_hash, LookupEncoder};
pub use marker::MarkerEncoder;
pub use toy::{ToyEncoder, ToyEncoderParams, ToyForwardCache};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Character-length cap applied by the toy encoder. Stands in for the usual
/// 512-token maximum query/passage length, measured in characters here.
pub const MAX_TEXT_CHARS: usize = 512;

/// Instruction template used by instruction-tuned embedding models.
///
/// Returns `Instruct: {task_instruction}\nQuery: {query}` for a non-empty
/// instruction and the query unchanged otherwise. The template is
/// context-free: formatting an already-formatted text prefixes it again.
pub fn format_instruction(task_instruction: &str, query: &str) -> String {
    if task_instruction.is_empty() {
        query.to_string()
    } else {
        format!("Instruct: {task_instruction}\nQuery: {query}")
    }
}

/// Truncate to at most `max_chars` characters, respecting UTF-8 boundaries.
pub fn truncate_chars(text: &str, max_chars: usize) -> &str {
    match text.char_indices().nth(max_chars) {
        Some((byte_idx, _)) => &text[..byte_idx],
        None => text,
    }
}

/// Apply the optional instruction to every text of a batch.
pub fn apply_instruction(texts: &[String], instruction: Option<&str>) -> Vec<String> {
    match instruction {
        None | Some("") => texts.to_vec(),
        Some(instr) => texts.iter().map(|t| format_instruction(instr, t)).collect(),
    }
}

/// Anything that embeds batches of text into unit-norm rows.
///
/// Row `i` of the output corresponds to input text `i`; every row has unit
/// Euclidean norm within 1e-6. When an instruction is supplied it applies to
/// every text in the call (callers pass instructions for queries only).
pub trait EncoderPort: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, texts: &[String], instruction: Option<&str>) -> Result<Array2<f64>>;
}

/// Build an encoder from a port-spec string.
///
/// Grammar:
/// - `toy:<seed>:<dim>` — freshly initialized trainable reference encoder;
/// - `file:<path>` — precomputed embedding lookup keyed by content hash;
/// - `ckpt:<path>` — toy encoder restored from a training checkpoint;
/// - `marker:<dim>` — digit-marker oracle for synthetic benchmark suites.
pub fn build_encoder(spec: &str) -> Result<Box<dyn EncoderPort>> {
    if let Some(rest) = spec.strip_prefix("toy:") {
        let mut parts = rest.split(':');
        let seed: u64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Validation(format!("bad toy port-spec {spec:?}: expected toy:<seed>:<dim>")))?;
        let dim: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Validation(format!("bad toy port-spec {spec:?}: expected toy:<seed>:<dim>")))?;
        if parts.next().is_some() {
            return Err(Error::Validation(format!("bad toy port-spec {spec:?}: trailing fields")));
        }
        if dim == 0 {
            return Err(Error::Validation("toy encoder dim must be positive".into()));
        }
        Ok(Box::new(ToyEncoder::new(ToyEncoderParams::new(seed, dim))))
    } else if let Some(path) = spec.strip_prefix("file:") {
        Ok(Box::new(LookupEncoder::from_path(path)?))
    } else if let Some(path) = spec.strip_prefix("ckpt:") {
        let ckpt = crate::trainer::load_checkpoint(path)?;
        Ok(Box::new(ToyEncoder::new(ckpt.params)))
    } else if let Some(dim) = spec.strip_prefix("marker:") {
        let dim: usize = dim
            .parse()
            .ok()
            .filter(|d| *d > 0)
            .ok_or_else(|| Error::Validation(format!("bad marker port-spec {spec:?}: expected marker:<dim>")))?;
        Ok(Box::new(MarkerEncoder::new(dim)))
    } else {
        Err(Error::Validation(format!(
            "unknown encoder port-spec {spec:?}: expected toy:<seed>:<dim>, file:<path>, ckpt:<path>, or marker:<dim>"
        )))
    }
}
