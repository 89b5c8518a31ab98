//! The eight task-family metrics. Similarity is always the dot product of
//! unit-norm embeddings; every ranking breaks ties toward the lower index.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::probe::{fit_binary, fit_multinomial};
use super::{MetricResult, TaskFamily};
use crate::error::{Error, Result};

/// Retrieval cutoff used by the benchmark.
pub const NDCG_K: usize = 10;
/// K-means restarts per clustering evaluation.
pub const KMEANS_RESTARTS: usize = 10;

fn dot(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Indices sorted by score descending, ties by lowest index.
fn rank_desc(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Nearest-neighbor translation matching, scored from both directions.
///
/// `gold[i]` is the target row matching source row `i` and must be a
/// bijection. Precision counts sources whose nearest target is gold; recall
/// counts targets whose nearest source is gold; the main score is their
/// harmonic mean.
pub fn bitext_f1(src: &Array2<f64>, tgt: &Array2<f64>, gold: &[usize]) -> Result<MetricResult> {
    let n = src.nrows();
    if n == 0 {
        return Err(Error::Validation("bitext mining needs at least one pair".into()));
    }
    if tgt.nrows() != n || gold.len() != n {
        return Err(Error::Dimension(format!(
            "bitext sides disagree: {} sources, {} targets, {} gold links",
            n,
            tgt.nrows(),
            gold.len()
        )));
    }
    if src.ncols() != tgt.ncols() {
        return Err(Error::Dimension("bitext embedding dims differ".into()));
    }
    let mut seen = vec![false; n];
    for &g in gold {
        if g >= n || seen[g] {
            return Err(Error::Validation("gold links must form a bijection".into()));
        }
        seen[g] = true;
    }

    let nearest = |rows: &Array2<f64>, others: &Array2<f64>, i: usize| -> usize {
        let mut best = 0;
        let mut best_sim = f64::NEG_INFINITY;
        for j in 0..others.nrows() {
            let s = dot(rows.row(i), others.row(j));
            if s > best_sim {
                best_sim = s;
                best = j;
            }
        }
        best
    };

    let mut inverse = vec![0usize; n];
    for (i, &g) in gold.iter().enumerate() {
        inverse[g] = i;
    }
    let hits_fwd = (0..n).filter(|&i| nearest(src, tgt, i) == gold[i]).count();
    let hits_bwd = (0..n).filter(|&j| nearest(tgt, src, j) == inverse[j]).count();
    let precision = hits_fwd as f64 / n as f64;
    let recall = hits_bwd as f64 / n as f64;
    let f1 =
        if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };

    Ok(MetricResult::new(TaskFamily::Btxt, f1)?
        .with_aux("precision", precision)
        .with_aux("recall", recall))
}

/// Accuracy of a multinomial linear probe fit on the training embeddings.
pub fn linear_probe(
    train_emb: &Array2<f64>,
    train_labels: &[usize],
    test_emb: &Array2<f64>,
    test_labels: &[usize],
    lambda: f64,
    seed: u64,
) -> Result<MetricResult> {
    let mut distinct: Vec<usize> = train_labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Validation(format!(
            "probe needs at least 2 classes in the training set, got {}",
            distinct.len()
        )));
    }
    let n_classes = 1 + train_labels
        .iter()
        .chain(test_labels.iter())
        .copied()
        .max()
        .expect("non-empty label sets");
    let probe = fit_multinomial(train_emb, train_labels, n_classes, lambda, seed)?;
    if test_emb.nrows() != test_labels.len() || test_labels.is_empty() {
        return Err(Error::Dimension(format!(
            "{} test embeddings vs {} test labels",
            test_emb.nrows(),
            test_labels.len()
        )));
    }
    let pred = probe.predict(test_emb);
    let hits = pred.iter().zip(test_labels).filter(|(p, t)| p == t).count();
    MetricResult::new(TaskFamily::Clf, hits as f64 / test_labels.len() as f64)
}

/// Label rank of `label` under ≥-ties: how many labels score at least as
/// high as it.
fn geq_rank(scores: &[f64], label: usize) -> usize {
    scores.iter().filter(|s| **s >= scores[label]).count()
}

/// One-vs-rest probes per label; main score is label-ranking average
/// precision over the test items, auxiliary is macro-F1 of the 0.5-threshold
/// predictions.
///
/// A test item with an empty gold set (or every label gold) contributes
/// LRAP 1.0 by convention; a label with no gold and no predictions counts
/// F1 = 1.0 (the probe correctly predicted nothing).
pub fn multilabel_eval(
    train_emb: &Array2<f64>,
    train_labelsets: &[Vec<usize>],
    test_emb: &Array2<f64>,
    test_labelsets: &[Vec<usize>],
    n_labels: usize,
    lambda: f64,
    seed: u64,
) -> Result<MetricResult> {
    if n_labels == 0 {
        return Err(Error::Validation("empty label universe".into()));
    }
    if train_emb.nrows() != train_labelsets.len() || test_emb.nrows() != test_labelsets.len() {
        return Err(Error::Dimension("label sets misaligned with embeddings".into()));
    }
    for sets in [train_labelsets, test_labelsets] {
        if let Some(bad) = sets.iter().flatten().find(|l| **l >= n_labels) {
            return Err(Error::Validation(format!("label {bad} outside universe 0..{n_labels}")));
        }
    }

    // scores[i][l] = P(label l | test item i).
    let mut scores = vec![vec![0.0; n_labels]; test_emb.nrows()];
    for label in 0..n_labels {
        let targets: Vec<bool> =
            train_labelsets.iter().map(|set| set.contains(&label)).collect();
        let probe = fit_binary(train_emb, &targets, lambda, seed.wrapping_add(label as u64))?;
        for (i, s) in probe.scores(test_emb).into_iter().enumerate() {
            scores[i][label] = s;
        }
    }

    let mut lrap_sum = 0.0;
    for (i, gold) in test_labelsets.iter().enumerate() {
        if gold.is_empty() || gold.len() == n_labels {
            lrap_sum += 1.0;
            continue;
        }
        let mut item = 0.0;
        for &label in gold {
            let rank = geq_rank(&scores[i], label);
            let gold_at_or_above = gold
                .iter()
                .filter(|g| scores[i][**g] >= scores[i][label])
                .count();
            item += gold_at_or_above as f64 / rank as f64;
        }
        lrap_sum += item / gold.len() as f64;
    }
    let lrap = lrap_sum / test_labelsets.len().max(1) as f64;

    let mut f1_sum = 0.0;
    for label in 0..n_labels {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for (i, gold) in test_labelsets.iter().enumerate() {
            let predicted = scores[i][label] >= 0.5;
            let is_gold = gold.contains(&label);
            match (predicted, is_gold) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let denom = 2 * tp + fp + fn_;
        f1_sum += if denom == 0 { 1.0 } else { 2.0 * tp as f64 / denom as f64 };
    }

    Ok(MetricResult::new(TaskFamily::MultiClf, lrap)?
        .with_aux("macro_f1", f1_sum / n_labels as f64))
}

/// Average precision of similarities ranking the positive pairs, computed as
/// the step integral of precision over recall across the distinct score
/// thresholds (so a constant ranking scores exactly the positive
/// prevalence). Auxiliary: best accuracy over all midpoint thresholds.
pub fn pair_classification(sims: &[f64], labels: &[bool]) -> Result<MetricResult> {
    if sims.len() != labels.len() {
        return Err(Error::Dimension(format!("{} sims vs {} labels", sims.len(), labels.len())));
    }
    let positives = labels.iter().filter(|l| **l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Validation(
            "pair classification needs at least one positive and one negative".into(),
        ));
    }

    let mut thresholds: Vec<f64> = sims.to_vec();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.reverse();

    let total_pos = positives as f64;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in &thresholds {
        let mut tp = 0usize;
        let mut predicted = 0usize;
        for (s, l) in sims.iter().zip(labels) {
            if *s >= *t {
                predicted += 1;
                tp += usize::from(*l);
            }
        }
        let precision = tp as f64 / predicted as f64;
        let recall = tp as f64 / total_pos;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }

    let mut best_acc = 0.0f64;
    let mut candidates = Vec::with_capacity(thresholds.len() + 1);
    candidates.push(thresholds[0] + 1.0);
    for pair in thresholds.windows(2) {
        candidates.push((pair[0] + pair[1]) / 2.0);
    }
    candidates.push(thresholds[thresholds.len() - 1] - 1.0);
    for t in candidates {
        let correct = sims
            .iter()
            .zip(labels)
            .filter(|(s, l)| (**s >= t) == **l)
            .count();
        best_acc = best_acc.max(correct as f64 / labels.len() as f64);
    }

    Ok(MetricResult::new(TaskFamily::PrClf, ap)?.with_aux("best_accuracy", best_acc))
}

fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding. Returns (assignments, inertia).
fn kmeans(emb: &Array2<f64>, k: usize, seed: u64) -> (Vec<usize>, f64) {
    let n = emb.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = Array2::zeros((k, emb.ncols()));

    // k-means++: first center uniform, then ∝ squared distance to nearest.
    let first = rng.gen_range(0..n);
    centers.row_mut(0).assign(&emb.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| squared_distance(emb.row(i), centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let r = rng.gen::<f64>() * total;
            let mut cum = 0.0;
            let mut chosen = n - 1;
            for (i, d) in d2.iter().enumerate() {
                cum += d;
                if cum >= r {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.row_mut(c).assign(&emb.row(pick));
        for i in 0..n {
            d2[i] = d2[i].min(squared_distance(emb.row(i), centers.row(c)));
        }
    }

    let mut assignments = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = squared_distance(emb.row(i), centers.row(c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }

        let mut counts = vec![0usize; k];
        let mut sums = Array2::<f64>::zeros((k, emb.ncols()));
        for i in 0..n {
            counts[assignments[i]] += 1;
            sums.row_mut(assignments[i]).scaled_add(1.0, &emb.row(i));
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster with the point farthest from its
                // current center.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        squared_distance(emb.row(a), centers.row(assignments[a]))
                            .total_cmp(&squared_distance(emb.row(b), centers.row(assignments[b])))
                    })
                    .expect("n ≥ k ≥ 1");
                centers.row_mut(c).assign(&emb.row(far));
                assignments[far] = c;
                changed = true;
            } else {
                let mut row = centers.row_mut(c);
                row.assign(&sums.row(c));
                row.mapv_inplace(|v| v / counts[c] as f64);
            }
        }
        if !changed {
            break;
        }
    }

    let inertia =
        (0..n).map(|i| squared_distance(emb.row(i), centers.row(assignments[i]))).sum();
    (assignments, inertia)
}

fn entropy(counts: &BTreeMap<usize, usize>, total: usize) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum()
}

/// V-measure of predicted clusters against gold classes: harmonic mean of
/// homogeneity and completeness. A zero-entropy side counts as perfect.
pub fn v_measure(gold: &[usize], predicted: &[usize]) -> f64 {
    let n = gold.len();
    let mut gold_counts = BTreeMap::new();
    let mut pred_counts = BTreeMap::new();
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for i in 0..n {
        *gold_counts.entry(gold[i]).or_insert(0) += 1;
        *pred_counts.entry(predicted[i]).or_insert(0) += 1;
        *joint.entry((gold[i], predicted[i])).or_insert(0) += 1;
    }
    let h_gold = entropy(&gold_counts, n);
    let h_pred = entropy(&pred_counts, n);

    // H(gold | pred) = −Σ (n_ck/N) ln(n_ck / n_k).
    let mut h_gold_given_pred = 0.0;
    let mut h_pred_given_gold = 0.0;
    for (&(g, p), &c) in &joint {
        let pc = c as f64 / n as f64;
        h_gold_given_pred -= pc * (c as f64 / pred_counts[&p] as f64).ln();
        h_pred_given_gold -= pc * (c as f64 / gold_counts[&g] as f64).ln();
    }

    let homogeneity = if h_gold == 0.0 { 1.0 } else { 1.0 - h_gold_given_pred / h_gold };
    let completeness = if h_pred == 0.0 { 1.0 } else { 1.0 - h_pred_given_gold / h_pred };
    if homogeneity + completeness == 0.0 {
        0.0
    } else {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    }
}

/// Cluster the embeddings with the best of `restarts` seeded k-means runs
/// (lowest inertia wins) and score against gold with V-measure.
pub fn cluster_vmeasure(
    emb: &Array2<f64>,
    gold: &[usize],
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<MetricResult> {
    let n = emb.nrows();
    if gold.len() != n {
        return Err(Error::Dimension(format!("{n} embeddings vs {} gold labels", gold.len())));
    }
    if k == 0 {
        return Err(Error::Validation("clustering needs k ≥ 1".into()));
    }
    if k > n {
        return Err(Error::Validation(format!("k = {k} exceeds {n} points")));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for r in 0..restarts.max(1) {
        let (assign, inertia) = kmeans(emb, k, seed.wrapping_add(r as u64));
        if best.as_ref().map_or(true, |(_, bi)| inertia < *bi) {
            best = Some((assign, inertia));
        }
    }
    let (assignments, _) = best.expect("at least one restart");
    MetricResult::new(TaskFamily::Clust, v_measure(gold, &assignments))
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &orig in &idx[i..=j] {
            ranks[orig] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        None
    } else {
        Some(cov / (va * vb).sqrt())
    }
}

/// Spearman rank correlation between the pair similarities and gold scores,
/// with average-rank tie handling.
///
/// The raw coefficient lives in [−1, 1]; the main score clamps it to [0, 1]
/// (the reporting convention for ×100 tables) and the signed value is kept
/// in the auxiliary map. Constant gold is an undefined correlation and
/// errors; constant similarities score 0 (a degenerate encoder earns no
/// credit).
pub fn sts_spearman(sims: &[f64], gold: &[f64]) -> Result<MetricResult> {
    if sims.len() != gold.len() {
        return Err(Error::Dimension(format!("{} sims vs {} gold scores", sims.len(), gold.len())));
    }
    if sims.len() < 2 {
        return Err(Error::Validation("Spearman needs at least 2 pairs".into()));
    }
    if gold.iter().all(|g| *g == gold[0]) {
        return Err(Error::Validation("undefined correlation: gold scores are constant".into()));
    }
    let rho = pearson(&average_ranks(sims), &average_ranks(gold)).unwrap_or(0.0);
    Ok(MetricResult::new(TaskFamily::Sts, rho.clamp(0.0, 1.0))?.with_aux("spearman", rho))
}

/// Mean nDCG@k over queries with binary relevance: DCG@k = Σ relᵢ/log2(i+1)
/// over ranks i = 1..k against the ideal DCG for that query's relevant
/// count. Queries without relevant documents error unless `skip_missing`.
pub fn retrieval_ndcg(
    query_emb: &Array2<f64>,
    corpus_emb: &Array2<f64>,
    qrels: &[Vec<usize>],
    k: usize,
    skip_missing: bool,
) -> Result<MetricResult> {
    if query_emb.nrows() != qrels.len() || qrels.is_empty() {
        return Err(Error::Dimension(format!(
            "{} queries vs {} relevance sets",
            query_emb.nrows(),
            qrels.len()
        )));
    }
    if k == 0 {
        return Err(Error::Validation("retrieval cutoff k must be positive".into()));
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for (qi, relevant) in qrels.iter().enumerate() {
        if relevant.is_empty() {
            if skip_missing {
                continue;
            }
            return Err(Error::Validation(format!("query {qi} has no relevant documents")));
        }
        if let Some(bad) = relevant.iter().find(|d| **d >= corpus_emb.nrows()) {
            return Err(Error::Validation(format!("query {qi} marks out-of-corpus doc {bad}")));
        }
        let sims: Vec<f64> =
            (0..corpus_emb.nrows()).map(|d| dot(query_emb.row(qi), corpus_emb.row(d))).collect();
        let ranking = rank_desc(&sims);
        let mut dcg = 0.0;
        for (pos, doc) in ranking.iter().take(k).enumerate() {
            if relevant.contains(doc) {
                dcg += 1.0 / ((pos + 2) as f64).log2();
            }
        }
        let ideal: f64 = (0..relevant.len().min(k)).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
        total += dcg / ideal;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::Validation("no queries with relevant documents".into()));
    }
    MetricResult::new(TaskFamily::Rtrvl, total / counted as f64)
}

/// Rank-based average precision of one candidate ordering: mean over the
/// positives of (positives at or above its rank) / rank.
pub fn average_precision_at_ranks(sims: &[f64], labels: &[bool]) -> Result<f64> {
    let positives = labels.iter().filter(|l| **l).count();
    if positives == 0 {
        return Err(Error::Validation("no positive candidates".into()));
    }
    let ranking = rank_desc(sims);
    let mut seen_pos = 0usize;
    let mut ap = 0.0;
    for (pos, &cand) in ranking.iter().enumerate() {
        if labels[cand] {
            seen_pos += 1;
            ap += seen_pos as f64 / (pos + 1) as f64;
        }
    }
    Ok(ap / positives as f64)
}

/// Mean average precision over queries, each reranking its own candidates.
pub fn rerank_map(
    query_emb: &Array2<f64>,
    candidate_embs: &[Array2<f64>],
    candidate_labels: &[Vec<bool>],
) -> Result<MetricResult> {
    if query_emb.nrows() != candidate_embs.len()
        || candidate_embs.len() != candidate_labels.len()
        || candidate_embs.is_empty()
    {
        return Err(Error::Dimension("reranking inputs misaligned".into()));
    }
    let mut total = 0.0;
    for (qi, (cands, labels)) in candidate_embs.iter().zip(candidate_labels).enumerate() {
        if cands.nrows() != labels.len() {
            return Err(Error::Dimension(format!(
                "query {qi}: {} candidates vs {} labels",
                cands.nrows(),
                labels.len()
            )));
        }
        let sims: Vec<f64> = (0..cands.nrows()).map(|c| dot(query_emb.row(qi), cands.row(c))).collect();
        let ap = average_precision_at_ranks(&sims, labels)
            .map_err(|_| Error::Validation(format!("query {qi} has no positive candidates")))?;
        total += ap;
    }
    MetricResult::new(TaskFamily::Rrnk, total / candidate_embs.len() as f64)
}
