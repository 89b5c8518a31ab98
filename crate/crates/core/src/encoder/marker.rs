//! Oracle encoder for synthetic data: embeds a text from the digit markers it
//! contains. Texts that share markers land on identical unit vectors, which
//! makes gold structure recoverable by construction — useful for validating
//! the harness itself.

use ndarray::Array2;

use super::{apply_instruction, EncoderPort};
use crate::error::{Error, Result};

/// Encodes the multiset of digit runs in a text as a normalized sum of
/// one-hot vectors (`run mod dim`). Texts without digits fall back to a
/// single bucket derived from the text bytes.
pub struct MarkerEncoder {
    dim: usize,
}

impl MarkerEncoder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dim must be positive");
        MarkerEncoder { dim }
    }

    /// Digit runs of a text reduced modulo `dim`, in order of appearance.
    pub fn marker_buckets(text: &str, dim: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur: Option<u64> = None;
        for ch in text.chars() {
            if let Some(d) = ch.to_digit(10) {
                cur = Some((cur.unwrap_or(0) * 10 + u64::from(d)) % dim as u64);
            } else if let Some(v) = cur.take() {
                out.push(v as usize);
            }
        }
        if let Some(v) = cur {
            out.push(v as usize);
        }
        out
    }
}

impl EncoderPort for MarkerEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[String], instruction: Option<&str>) -> Result<Array2<f64>> {
        let formatted = apply_instruction(texts, instruction);
        let mut rows = Array2::zeros((formatted.len(), self.dim));
        for (i, text) in formatted.iter().enumerate() {
            let buckets = Self::marker_buckets(text, self.dim);
            if buckets.is_empty() {
                let mut h = 0u64;
                for b in text.as_bytes() {
                    h = h.wrapping_mul(31).wrapping_add(u64::from(*b));
                }
                rows[(i, (h % self.dim as u64) as usize)] = 1.0;
                continue;
            }
            for b in buckets {
                rows[(i, b)] += 1.0;
            }
            let norm = rows.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::Numerical(format!("degenerate marker embedding for text {i}")));
            }
            for j in 0..self.dim {
                rows[(i, j)] /= norm;
            }
        }
        Ok(rows)
    }
}
