//! The training objective: an InfoNCE contrastive loss over the pooled
//! passage set, a distillation cross-entropy against teacher scores over each
//! query's own candidate group, and their unweighted sum, all with analytic
//! gradients with respect to the similarity matrix.
//!
//! All loss math runs in f64. Softmaxes subtract the row maximum before
//! exponentiating.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Default softmax temperature for both losses.
pub const DEFAULT_TEMPERATURE: f64 = 0.02;

/// Group structure of a batch: `B` queries, each with a `G`-candidate group
/// (1 positive followed by `G−1` negatives) laid out flat in the passage
/// axis. `shard_offset` shifts the flat indices when several shards pool
/// their passages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchLayout {
    pub batch: usize,
    pub group: usize,
    pub shard_offset: usize,
    pub total_passages: usize,
}

impl BatchLayout {
    /// Layout of a self-contained batch: offset 0, `B·G` passages.
    pub fn single(batch: usize, group: usize) -> Result<Self> {
        Self::shard(batch, group, 0, batch * group)
    }

    /// Layout of one shard inside a pooled passage set.
    pub fn shard(batch: usize, group: usize, shard_offset: usize, total_passages: usize) -> Result<Self> {
        if batch == 0 || group == 0 {
            return Err(Error::Validation("batch and group sizes must be at least 1".into()));
        }
        let layout = BatchLayout { batch, group, shard_offset, total_passages };
        let last_group_end = shard_offset + batch * group;
        if last_group_end > total_passages {
            return Err(Error::Validation(format!(
                "layout overflows passage axis: offset {shard_offset} + {batch}·{group} > {total_passages}"
            )));
        }
        Ok(layout)
    }

    /// Flat index of query `i`'s positive: `shard_offset + i·G` (0-based).
    pub fn positive_index(&self, i: usize) -> usize {
        self.shard_offset + i * self.group
    }

    /// Flat index range of query `i`'s own candidate group.
    pub fn group_range(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.positive_index(i);
        start..start + self.group
    }
}

/// Query-passage similarity matrix with its softmax temperature.
#[derive(Debug, Clone)]
pub struct SimilarityBlock {
    /// `S[i][j] = qᵢ·pⱼ`, shape `B × total_passages`.
    pub s: Array2<f64>,
    pub tau: f64,
}

impl SimilarityBlock {
    pub fn new(s: Array2<f64>, tau: f64) -> Result<Self> {
        if tau <= 0.0 || !tau.is_finite() {
            return Err(Error::Validation(format!("temperature must be positive, got {tau}")));
        }
        Ok(SimilarityBlock { s, tau })
    }
}

/// Row-normalized teacher scores, one `G`-length probability row per query.
#[derive(Debug, Clone)]
pub struct TeacherDistribution {
    pub p: Array2<f64>,
}

/// `S = Q · Pᵀ` over unit-norm rows.
pub fn similarity_matrix(q: &Array2<f64>, p: &Array2<f64>, tau: f64) -> Result<SimilarityBlock> {
    if q.ncols() != p.ncols() {
        return Err(Error::Dimension(format!(
            "query dim {} does not match passage dim {}",
            q.ncols(),
            p.ncols()
        )));
    }
    SimilarityBlock::new(q.dot(&p.t()), tau)
}

/// Per-row softmax cross-entropy against the positive: returns the row's loss
/// and its softmax probabilities (gradient scaling applied by the caller).
fn row_nce(row: ArrayView1<'_, f64>, pos: usize, tau: f64) -> (f64, Vec<f64>) {
    let mut max = f64::NEG_INFINITY;
    for v in row.iter() {
        max = max.max(v / tau);
    }
    let mut sum = 0.0;
    let mut probs = Vec::with_capacity(row.len());
    for v in row.iter() {
        let e = (v / tau - max).exp();
        probs.push(e);
        sum += e;
    }
    let lse = max + sum.ln();
    for p in &mut probs {
        *p /= sum;
    }
    (lse - row[pos] / tau, probs)
}

/// InfoNCE contrastive loss: each query's positive against the full pooled
/// passage axis (its own hard negatives plus every other query's group).
///
/// Returns `(loss, ∂loss/∂S)`; gradient rows each sum to zero.
pub fn contrastive_loss(block: &SimilarityBlock, layout: &BatchLayout) -> Result<(f64, Array2<f64>)> {
    validate_block(block, layout)?;
    let b = layout.batch;
    let mut grad = Array2::zeros(block.s.raw_dim());
    let mut loss = 0.0;
    for i in 0..b {
        let pos = layout.positive_index(i);
        let (li, probs) = row_nce(block.s.row(i), pos, block.tau);
        loss += li;
        let scale = 1.0 / (b as f64 * block.tau);
        for (j, p) in probs.into_iter().enumerate() {
            grad[(i, j)] = (p - f64::from(u8::from(j == pos))) * scale;
        }
    }
    Ok((loss / b as f64, grad))
}

/// Contrastive loss over several shards whose passages are pooled: each shard
/// holds a slice of the queries (rows) scored against the full passage axis.
///
/// Shards are combined in index order; the result is arithmetically identical
/// to a single-shard computation over the concatenated query matrix.
pub fn pooled_contrastive_loss(
    shards: &[(&SimilarityBlock, &BatchLayout)],
) -> Result<(f64, Vec<Array2<f64>>)> {
    if shards.is_empty() {
        return Err(Error::Validation("no shards supplied".into()));
    }
    let tau = shards[0].0.tau;
    let total_passages = shards[0].1.total_passages;
    let mut total_queries = 0usize;
    for (block, layout) in shards {
        validate_block(block, layout)?;
        if block.tau != tau {
            return Err(Error::Validation("shards disagree on temperature".into()));
        }
        if layout.total_passages != total_passages {
            return Err(Error::Dimension("shards disagree on pooled passage count".into()));
        }
        total_queries += layout.batch;
    }
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(shards.len());
    for (block, layout) in shards {
        let mut grad = Array2::zeros(block.s.raw_dim());
        let scale = 1.0 / (total_queries as f64 * tau);
        for i in 0..layout.batch {
            let pos = layout.positive_index(i);
            let (li, probs) = row_nce(block.s.row(i), pos, tau);
            loss += li;
            for (j, p) in probs.into_iter().enumerate() {
                grad[(i, j)] = (p - f64::from(u8::from(j == pos))) * scale;
            }
        }
        grads.push(grad);
    }
    Ok((loss / total_queries as f64, grads))
}

/// Distillation loss: cross-entropy between the teacher's normalized scores
/// and the student's softmax over each query's own `G`-candidate group
/// (similarities divided by τ).
///
/// The gradient is nonzero only on each query's own group columns.
pub fn kd_loss(
    block: &SimilarityBlock,
    teacher: &TeacherDistribution,
    layout: &BatchLayout,
) -> Result<(f64, Array2<f64>)> {
    validate_block(block, layout)?;
    let (b, g) = (layout.batch, layout.group);
    if teacher.p.nrows() != b || teacher.p.ncols() != g {
        return Err(Error::Dimension(format!(
            "teacher distribution shape {:?} does not match layout ({b} × {g})",
            teacher.p.shape()
        )));
    }
    for i in 0..b {
        let row = teacher.p.row(i);
        if row.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::Validation(format!("teacher row {i} not normalized: negative or non-finite entry")));
        }
        let sum: f64 = row.sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("teacher row {i} not normalized: sums to {sum}")));
        }
    }
    let mut grad = Array2::zeros(block.s.raw_dim());
    let mut loss = 0.0;
    for i in 0..b {
        let range = layout.group_range(i);
        let group = block.s.slice(ndarray::s![i, range.clone()]);
        let mut max = f64::NEG_INFINITY;
        for v in group.iter() {
            max = max.max(v / block.tau);
        }
        let mut sum = 0.0;
        let mut shifted = Vec::with_capacity(g);
        for v in group.iter() {
            let e = v / block.tau - max;
            shifted.push(e);
            sum += e.exp();
        }
        let lse = max + sum.ln();
        let scale = 1.0 / (b as f64 * block.tau);
        for (j, col) in range.enumerate() {
            let log_p = group[j] / block.tau - lse;
            let p = (shifted[j] - sum.ln()).exp();
            let t = teacher.p[(i, j)];
            loss -= t * log_p;
            grad[(i, col)] = (p - t) * scale;
        }
    }
    Ok((loss / b as f64, grad))
}

/// The unweighted sum of the two losses.
pub fn total_loss(contrastive: f64, kd: f64) -> f64 {
    contrastive + kd
}

/// Combined objective: total loss plus the summed gradient with respect to
/// the similarity matrix.
pub struct ObjectiveValue {
    pub total: f64,
    pub contrastive: f64,
    pub kd: f64,
}

pub fn total_objective(
    block: &SimilarityBlock,
    teacher: &TeacherDistribution,
    layout: &BatchLayout,
) -> Result<(ObjectiveValue, Array2<f64>)> {
    let (lc, gc) = contrastive_loss(block, layout)?;
    let (lk, gk) = kd_loss(block, teacher, layout)?;
    let value = ObjectiveValue { total: total_loss(lc, lk), contrastive: lc, kd: lk };
    Ok((value, gc + gk))
}

/// Row-wise softmax (temperature 1) of raw teacher scores.
pub fn teacher_normalize(raw_scores: &Array2<f64>) -> TeacherDistribution {
    let mut p = raw_scores.clone();
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
    TeacherDistribution { p }
}

fn validate_block(block: &SimilarityBlock, layout: &BatchLayout) -> Result<()> {
    if block.tau <= 0.0 || !block.tau.is_finite() {
        return Err(Error::Validation(format!("temperature must be positive, got {}", block.tau)));
    }
    if block.s.nrows() != layout.batch {
        return Err(Error::Dimension(format!(
            "similarity matrix has {} rows, layout expects {} queries",
            block.s.nrows(),
            layout.batch
        )));
    }
    if block.s.ncols() != layout.total_passages {
        return Err(Error::Dimension(format!(
            "similarity matrix has {} columns, layout expects {} passages",
            block.s.ncols(),
            layout.total_passages
        )));
    }
    Ok(())
}
