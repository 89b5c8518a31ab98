//! Trainable desk-scale reference encoder: hashed character n-grams, mean
//! pooling, a linear projection, and L2 normalization, with an analytic
//! backward pass through the normalization Jacobian.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{apply_instruction, EncoderPort, MAX_TEXT_CHARS};
use crate::error::{Error, Result};

/// Default number of hash buckets for n-gram features.
pub const DEFAULT_BUCKETS: usize = 1 << 14;
/// Default character n-gram order.
pub const DEFAULT_NGRAM_ORDER: usize = 3;
/// Standard deviation of the random projection at initialization. The unit
/// normalization makes embeddings invariant to this scale, but the backward
/// pass is not: gradients grow as the projection shrinks, so a small value
/// lets reference-scale learning rates move the parameters by a meaningful
/// relative amount.
const INIT_STD: f64 = 0.01;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ seed;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Parameters of the toy encoder: a `d × F` projection over `F` hashed
/// character-n-gram features.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoderParams {
    pub seed: u64,
    pub dim: usize,
    pub buckets: usize,
    pub ngram_order: usize,
    pub w: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamsDump {
    seed: u64,
    dim: usize,
    buckets: usize,
    ngram_order: usize,
    w: Vec<f64>,
}

impl Serialize for ToyEncoderParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ParamsDump {
            seed: self.seed,
            dim: self.dim,
            buckets: self.buckets,
            ngram_order: self.ngram_order,
            w: self.w.iter().copied().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ToyEncoderParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let dump = ParamsDump::deserialize(d)?;
        let w = Array2::from_shape_vec((dump.dim, dump.buckets), dump.w)
            .map_err(|e| serde::de::Error::custom(format!("bad projection shape: {e}")))?;
        Ok(ToyEncoderParams {
            seed: dump.seed,
            dim: dump.dim,
            buckets: dump.buckets,
            ngram_order: dump.ngram_order,
            w,
        })
    }
}

impl ToyEncoderParams {
    /// Seeded initialization with default feature space (2^14 buckets,
    /// trigram features).
    pub fn new(seed: u64, dim: usize) -> Self {
        Self::with_shape(seed, dim, DEFAULT_BUCKETS, DEFAULT_NGRAM_ORDER)
    }

    /// Seeded initialization with explicit feature-space shape (small shapes
    /// keep finite-difference oracles cheap).
    pub fn with_shape(seed: u64, dim: usize, buckets: usize, ngram_order: usize) -> Self {
        assert!(dim > 0 && buckets > 0 && ngram_order > 0, "shape fields must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
        let w = Array2::from_shape_simple_fn((dim, buckets), || normal.sample(&mut rng));
        ToyEncoderParams { seed, dim, buckets, ngram_order, w }
    }

    /// Sparse mean-pooled n-gram features of one text, as (bucket, weight)
    /// pairs sorted by bucket. Texts are capped at `MAX_TEXT_CHARS`
    /// characters; a text shorter than the n-gram order contributes a single
    /// whole-string feature.
    pub fn featurize(&self, text: &str) -> Vec<(usize, f64)> {
        let chars: Vec<char> = text.chars().take(MAX_TEXT_CHARS).collect();
        let mut buckets: Vec<usize> = Vec::new();
        let mut buf = String::new();
        if chars.len() < self.ngram_order {
            buf.clear();
            buf.extend(chars.iter());
            buckets.push((fnv1a(self.seed, buf.as_bytes()) % self.buckets as u64) as usize);
        } else {
            for win in chars.windows(self.ngram_order) {
                buf.clear();
                buf.extend(win.iter());
                buckets.push((fnv1a(self.seed, buf.as_bytes()) % self.buckets as u64) as usize);
            }
        }
        let m = buckets.len() as f64;
        buckets.sort_unstable();
        let mut sparse: Vec<(usize, f64)> = Vec::new();
        for b in buckets {
            match sparse.last_mut() {
                Some((last, v)) if *last == b => *v += 1.0 / m,
                _ => sparse.push((b, 1.0 / m)),
            }
        }
        sparse
    }

    fn project(&self, sparse: &[(usize, f64)]) -> Array1<f64> {
        let mut raw = Array1::zeros(self.dim);
        for &(b, v) in sparse {
            for r in 0..self.dim {
                raw[r] += self.w[(r, b)] * v;
            }
        }
        raw
    }
}

/// Cache of pre-normalization values retained by the forward pass.
pub struct ToyForwardCache {
    features: Vec<Vec<(usize, f64)>>,
    norms: Vec<f64>,
    unit: Array2<f64>,
}

/// Embed a batch of texts, also returning the cache needed by
/// [`toy_backward`]. Output rows are unit-norm.
pub fn toy_forward(texts: &[String], params: &ToyEncoderParams) -> Result<(Array2<f64>, ToyForwardCache)> {
    let n = texts.len();
    let d = params.dim;
    let mut unit = Array2::zeros((n, d));
    let mut norms = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n);
    for (i, text) in texts.iter().enumerate() {
        let sparse = params.featurize(text);
        let raw = params.project(&sparse);
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Numerical(format!("degenerate embedding for text {i} ({text:?})")));
        }
        for r in 0..d {
            unit[(i, r)] = raw[r] / norm;
        }
        norms.push(norm);
        features.push(sparse);
    }
    let cache = ToyForwardCache { features, norms, unit: unit.clone() };
    Ok((unit, cache))
}

/// Gradient of a scalar loss with respect to the projection `W`, given the
/// gradient with respect to the unit-norm embeddings.
///
/// Applies the normalization Jacobian `(I − êêᵀ)/‖raw‖` per row, then the
/// transpose of the linear map (an outer product against the sparse
/// features).
pub fn toy_backward(
    cache: &ToyForwardCache,
    grad_wrt_embeddings: &Array2<f64>,
    params: &ToyEncoderParams,
) -> Result<Array2<f64>> {
    let n = cache.features.len();
    let d = params.dim;
    if grad_wrt_embeddings.nrows() != n || grad_wrt_embeddings.ncols() != d {
        return Err(Error::Dimension(format!(
            "gradient shape {:?} does not match cache ({n} texts, dim {d})",
            grad_wrt_embeddings.shape()
        )));
    }
    let mut grad_w = Array2::zeros((d, params.buckets));
    for i in 0..n {
        let ehat = cache.unit.row(i);
        let g = grad_wrt_embeddings.row(i);
        let radial: f64 = g.iter().zip(ehat.iter()).map(|(a, b)| a * b).sum();
        for &(b, v) in &cache.features[i] {
            let scale = v / cache.norms[i];
            for r in 0..d {
                grad_w[(r, b)] += (g[r] - radial * ehat[r]) * scale;
            }
        }
    }
    Ok(grad_w)
}

/// Port wrapper around a parameter set.
pub struct ToyEncoder {
    params: ToyEncoderParams,
}

impl ToyEncoder {
    pub fn new(params: ToyEncoderParams) -> Self {
        ToyEncoder { params }
    }

    pub fn params(&self) -> &ToyEncoderParams {
        &self.params
    }
}

impl EncoderPort for ToyEncoder {
    fn dim(&self) -> usize {
        self.params.dim
    }

    fn embed(&self, texts: &[String], instruction: Option<&str>) -> Result<Array2<f64>> {
        let formatted = apply_instruction(texts, instruction);
        let (rows, _) = toy_forward(&formatted, &self.params)?;
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_texts_share_rows() {
        let p = ToyEncoderParams::with_shape(1, 4, 64, 3);
        let (rows, _) = toy_forward(&texts(&["same text", "same text"]), &p).unwrap();
        assert_eq!(rows.row(0), rows.row(1));
    }

    #[test]
    fn rows_are_unit_norm() {
        let p = ToyEncoderParams::with_shape(2, 8, 128, 3);
        let (rows, _) =
            toy_forward(&texts(&["a", "short", "a somewhat longer sentence here"]), &p).unwrap();
        for row in rows.rows() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-9, "norm {norm}");
        }
    }

    #[test]
    fn projection_normalizes_by_hand() {
        // Identity projection over two buckets with features (3, 4) must give
        // the normalized vector (0.6, 0.8).
        let mut p = ToyEncoderParams::with_shape(0, 2, 2, 3);
        p.w = ndarray::array![[1.0, 0.0], [0.0, 1.0]];
        let raw = p.project(&[(0, 3.0), (1, 4.0)]);
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let e: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        assert!((e[0] - 0.6).abs() < 1e-12 && (e[1] - 0.8).abs() < 1e-12, "{e:?}");
    }

    #[test]
    fn short_text_uses_whole_string_feature() {
        let p = ToyEncoderParams::with_shape(3, 4, 32, 3);
        let f = p.featurize("ab");
        assert_eq!(f.len(), 1);
        assert!((f[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn featurize_mean_pools_to_one() {
        let p = ToyEncoderParams::with_shape(3, 4, 32, 3);
        let f = p.featurize("hello world");
        let total: f64 = f.iter().map(|(_, v)| v).sum();
        assert!((total - 1.0).abs() < 1e-12, "weights sum to {total}");
    }

    #[test]
    fn zero_gradient_backpropagates_to_zero() {
        let p = ToyEncoderParams::with_shape(4, 3, 16, 3);
        let batch = texts(&["alpha beta", "gamma"]);
        let (_, cache) = toy_forward(&batch, &p).unwrap();
        let g = Array2::zeros((2, 3));
        let gw = toy_backward(&cache, &g, &p).unwrap();
        assert!(gw.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn radial_gradient_is_annihilated() {
        // A gradient parallel to the embedding itself lies in the direction
        // the normalization Jacobian projects out.
        let p = ToyEncoderParams::with_shape(5, 3, 16, 3);
        let batch = texts(&["some text"]);
        let (rows, cache) = toy_forward(&batch, &p).unwrap();
        let g = rows.clone() * 2.5;
        let gw = toy_backward(&cache, &g, &p).unwrap();
        let max = gw.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(max < 1e-12, "max |grad| = {max}");
    }

    #[test]
    fn backward_rejects_shape_mismatch() {
        let p = ToyEncoderParams::with_shape(5, 3, 16, 3);
        let (_, cache) = toy_forward(&texts(&["a b c"]), &p).unwrap();
        assert!(toy_backward(&cache, &Array2::zeros((2, 3)), &p).is_err());
        assert!(toy_backward(&cache, &Array2::zeros((1, 4)), &p).is_err());
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        // Loss = fixed linear functional of the embeddings; check dL/dW
        // against central differences over every projection entry.
        let params = ToyEncoderParams::with_shape(11, 3, 5, 3);
        let batch = texts(&["abc def", "ghij", "xy"]);
        let coeff = ToyEncoderParams::with_shape(12, 3, 5, 3).w.clone() * 7.0;
        let loss = |p: &ToyEncoderParams| -> f64 {
            let (rows, _) = toy_forward(&batch, p).unwrap();
            let mut acc = 0.0;
            for i in 0..rows.nrows() {
                for j in 0..3 {
                    acc += coeff[(i, j)] * rows[(i, j)];
                }
            }
            acc
        };
        let (_, cache) = toy_forward(&batch, &params).unwrap();
        let mut grad_e = Array2::zeros((3, 3));
        for i in 0..3 {
            for j in 0..3 {
                grad_e[(i, j)] = coeff[(i, j)];
            }
        }
        let analytic = toy_backward(&cache, &grad_e, &params).unwrap();

        let h = 1e-6;
        let mut max_rel: f64 = 0.0;
        for r in 0..3 {
            for c in 0..5 {
                let mut plus = params.clone();
                plus.w[(r, c)] += h;
                let mut minus = params.clone();
                minus.w[(r, c)] -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let a = analytic[(r, c)];
                let denom = a.abs().max(fd.abs());
                if denom > 1e-8 {
                    max_rel = max_rel.max((a - fd).abs() / denom);
                }
            }
        }
        assert!(max_rel <= 1e-5, "max relative error {max_rel}");
    }

    #[test]
    fn params_serde_round_trip() {
        let p = ToyEncoderParams::with_shape(9, 4, 8, 3);
        let json = serde_json::to_string(&p).unwrap();
        let back: ToyEncoderParams = serde_json::from_str(&json).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn same_seed_same_params() {
        assert_eq!(ToyEncoderParams::new(13, 8).w, ToyEncoderParams::new(13, 8).w);
        assert_ne!(ToyEncoderParams::new(13, 8).w, ToyEncoderParams::new(14, 8).w);
    }
}
