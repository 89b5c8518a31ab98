//! Precomputed-embedding port: a lookup table keyed by content hash, used to
//! stand in for large models whose vectors were exported ahead of time.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{apply_instruction, EncoderPort};
use crate::error::{Error, Result};

/// Hex SHA-256 of a text's UTF-8 bytes; the lookup key for exported vectors.
pub fn content_hash(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// One exported embedding: `{"hash": <sha256 of the exact input text>,
/// "values": [f64, ...]}` per line. Vectors are normalized on load.
#[derive(Serialize, Deserialize)]
struct LookupRecord {
    hash: String,
    values: Vec<f64>,
}

/// File-backed encoder port.
pub struct LookupEncoder {
    map: HashMap<String, Vec<f64>>,
    dim: usize,
}

impl LookupEncoder {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut map = HashMap::new();
        let mut dim = 0usize;
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: LookupRecord = serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
            let norm = rec.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::Numerical(format!("line {lineno}: degenerate embedding")));
            }
            if dim == 0 {
                dim = rec.values.len();
            } else if rec.values.len() != dim {
                return Err(Error::Dimension(format!(
                    "line {lineno}: vector has {} components, expected {dim}",
                    rec.values.len()
                )));
            }
            map.insert(rec.hash, rec.values.into_iter().map(|v| v / norm).collect());
        }
        if map.is_empty() {
            return Err(Error::Validation("embedding lookup file is empty".into()));
        }
        Ok(LookupEncoder { map, dim })
    }

    /// Serialize a (text, raw vector) table in the lookup file format.
    pub fn export_lines(entries: &[(String, Vec<f64>)]) -> Result<String> {
        let mut out = String::new();
        for (text, values) in entries {
            let rec = LookupRecord { hash: content_hash(text), values: values.clone() };
            out.push_str(&serde_json::to_string(&rec)?);
            out.push('\n');
        }
        Ok(out)
    }
}

impl EncoderPort for LookupEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[String], instruction: Option<&str>) -> Result<Array2<f64>> {
        let formatted = apply_instruction(texts, instruction);
        let mut rows = Array2::zeros((formatted.len(), self.dim));
        for (i, text) in formatted.iter().enumerate() {
            let key = content_hash(text);
            let vec = self.map.get(&key).ok_or_else(|| {
                let preview: String = text.chars().take(40).collect();
                Error::Missing(format!("no precomputed embedding for text {preview:?} (hash {key})"))
            })?;
            for (j, v) in vec.iter().enumerate() {
                rows[(i, j)] = *v;
            }
        }
        Ok(rows)
    }
}
