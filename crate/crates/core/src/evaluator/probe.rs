//! Linear probes over frozen embeddings: an L2-regularized multinomial
//! logistic classifier and its one-vs-rest binary variant, both fit by
//! full-batch gradient descent with a fixed step size.
//!
//! With unit-norm embeddings plus a bias column the augmented feature norm
//! is at most √2, so the softmax cross-entropy gradient is 1-Lipschitz and a
//! step of `1/(1 + λ)` on the regularized mean loss descends monotonically —
//! no line search, fully deterministic.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Gradient-norm tolerance at which fitting stops.
pub const PROBE_TOL: f64 = 1e-4;
/// Iteration cap for the descent loop.
pub const PROBE_MAX_ITERS: usize = 1000;
/// Default L2 regularization strength.
pub const PROBE_LAMBDA: f64 = 1.0;
/// Standard deviation of the seeded weight initialization.
const INIT_NOISE: f64 = 1e-3;

fn augment(x: &Array2<f64>) -> Array2<f64> {
    let (n, d) = (x.nrows(), x.ncols());
    let mut out = Array2::ones((n, d + 1));
    out.slice_mut(ndarray::s![.., ..d]).assign(x);
    out
}

/// Multinomial logistic weights, one row per class over `dim + 1` augmented
/// features (bias last).
#[derive(Debug, Clone)]
pub struct MultinomialProbe {
    pub weights: Array2<f64>,
}

impl MultinomialProbe {
    /// Class logits for a batch of (unaugmented) embeddings.
    pub fn logits(&self, x: &Array2<f64>) -> Array2<f64> {
        augment(x).dot(&self.weights.t())
    }

    /// Predicted class index per row, ties broken toward the lower index.
    pub fn predict(&self, x: &Array2<f64>) -> Vec<usize> {
        self.logits(x)
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                for (j, v) in row.iter().enumerate() {
                    if *v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}

/// Fit a multinomial logistic probe on embeddings `x` and class indices
/// `labels` in `0..n_classes`.
pub fn fit_multinomial(
    x: &Array2<f64>,
    labels: &[usize],
    n_classes: usize,
    lambda: f64,
    seed: u64,
) -> Result<MultinomialProbe> {
    if n_classes < 2 {
        return Err(Error::Validation(format!(
            "probe needs at least 2 classes in the training set, got {n_classes}"
        )));
    }
    if x.nrows() != labels.len() || x.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "{} embeddings vs {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|l| **l >= n_classes) {
        return Err(Error::Validation(format!("label {bad} out of range 0..{n_classes}")));
    }

    let xa = augment(x);
    let n = xa.nrows() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, INIT_NOISE).expect("valid normal");
    let mut w = Array2::from_shape_simple_fn((n_classes, xa.ncols()), || noise.sample(&mut rng));
    let step = 1.0 / (1.0 + lambda);

    for _ in 0..PROBE_MAX_ITERS {
        // p = softmax(X Wᵀ) row-wise, with the max subtracted.
        let mut p = xa.dot(&w.t());
        for mut row in p.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        for (i, &label) in labels.iter().enumerate() {
            p[(i, label)] -= 1.0;
        }
        let mut grad = p.t().dot(&xa) / n;
        grad.scaled_add(lambda, &w);

        let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm <= PROBE_TOL {
            break;
        }
        w.scaled_add(-step, &grad);
    }
    Ok(MultinomialProbe { weights: w })
}

/// One-vs-rest binary logistic probe; scores are sigmoid probabilities.
#[derive(Debug, Clone)]
pub struct BinaryProbe {
    pub weights: Array1<f64>,
}

impl BinaryProbe {
    /// P(positive) per row.
    pub fn scores(&self, x: &Array2<f64>) -> Vec<f64> {
        augment(x)
            .rows()
            .into_iter()
            .map(|row| {
                let z: f64 = row.iter().zip(self.weights.iter()).map(|(a, b)| a * b).sum();
                1.0 / (1.0 + (-z).exp())
            })
            .collect()
    }
}

/// Fit a binary logistic probe on boolean targets. A single-class target
/// vector is permitted here (the multi-label evaluator fits probes for rare
/// labels); the probe then drifts toward the constant predictor.
pub fn fit_binary(x: &Array2<f64>, targets: &[bool], lambda: f64, seed: u64) -> Result<BinaryProbe> {
    if x.nrows() != targets.len() || x.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "{} embeddings vs {} targets",
            x.nrows(),
            targets.len()
        )));
    }
    let xa = augment(x);
    let n = xa.nrows() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, INIT_NOISE).expect("valid normal");
    let mut w = Array1::from_shape_simple_fn(xa.ncols(), || noise.sample(&mut rng));
    let step = 1.0 / (1.0 + lambda);

    for _ in 0..PROBE_MAX_ITERS {
        let z = xa.dot(&w);
        let mut grad = Array1::zeros(xa.ncols());
        for (i, zi) in z.iter().enumerate() {
            let p = 1.0 / (1.0 + (-zi).exp());
            let err = p - f64::from(u8::from(targets[i]));
            grad.scaled_add(err / n, &xa.row(i));
        }
        grad.scaled_add(lambda, &w);
        let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm <= PROBE_TOL {
            break;
        }
        w.scaled_add(-step, &grad);
    }
    Ok(BinaryProbe { weights: w })
}
