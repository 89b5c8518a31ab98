//! Built-in verification suite: independent numerical oracles for the
//! training objective, the pooled-sharding equivalence, the aggregation
//! protocol against the transcribed reference tables, and the synthetic
//! benchmark with its perfect-marker encoder.
//!
//! Each check returns a pass/fail with a one-line detail so the CLI can
//! print a readable ledger; the same checks back the acceptance tests.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::{self, fixtures, AggregationMode};
use crate::error::Result;
use crate::objective::{
    contrastive_loss, kd_loss, pooled_contrastive_loss, teacher_normalize, total_objective,
    BatchLayout, SimilarityBlock,
};
use crate::synth;

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn from(name: &str, outcome: Result<String>) -> CheckResult {
        match outcome {
            Ok(detail) => CheckResult { name: name.to_string(), passed: true, detail },
            Err(e) => CheckResult { name: name.to_string(), passed: false, detail: e.to_string() },
        }
    }
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

fn fail(msg: String) -> crate::Error {
    crate::Error::Numerical(msg)
}

fn random_similarities(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

/// Central finite differences of the total objective with respect to every
/// similarity entry, compared to the analytic gradient.
fn check_gradients(seed: u64, configs: usize) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..configs {
        let b = rng.gen_range(2..=4);
        let g = rng.gen_range(2..=4);
        let layout = BatchLayout::single(b, g)?;
        let s = random_similarities(&mut rng, b, b * g);
        let raw = random_similarities(&mut rng, b, g);
        let teacher = teacher_normalize(&raw);
        let tau = 0.02;

        let block = SimilarityBlock::new(s.clone(), tau)?;
        let (_, analytic) = total_objective(&block, &teacher, &layout)?;

        for i in 0..b {
            for j in 0..b * g {
                let mut plus = s.clone();
                plus[(i, j)] += h;
                let mut minus = s.clone();
                minus[(i, j)] -= h;
                let (lp, _) = total_objective(&SimilarityBlock::new(plus, tau)?, &teacher, &layout)?;
                let (lm, _) = total_objective(&SimilarityBlock::new(minus, tau)?, &teacher, &layout)?;
                let fd = (lp.total - lm.total) / (2.0 * h);
                let an = analytic[(i, j)];
                let rel = (fd - an).abs() / an.abs().max(1.0);
                worst = worst.max(rel);
            }
        }
    }
    if worst > 1e-5 {
        return Err(fail(format!("finite differences disagree: max rel err {worst:.3e} > 1e-5")));
    }
    Ok(format!("{configs} random layouts, max rel err {worst:.3e}"))
}

/// A constant similarity matrix makes every softmax uniform, so both losses
/// have closed forms: ln(B·G) for the contrastive term (the positive
/// competes with all B·G pooled passages) and ln(G) for the distillation
/// term under a uniform teacher.
fn check_uniform_loss() -> Result<String> {
    let mut worst = 0.0f64;
    for (b, g) in [(2, 2), (3, 3), (4, 2), (2, 4)] {
        let layout = BatchLayout::single(b, g)?;
        let block = SimilarityBlock::new(Array2::from_elem((b, b * g), 0.7), 0.02)?;
        let (lc, _) = contrastive_loss(&block, &layout)?;
        worst = worst.max((lc - ((b * g) as f64).ln()).abs());

        let teacher = teacher_normalize(&Array2::zeros((b, g)));
        let (lk, _) = kd_loss(&block, &teacher, &layout)?;
        worst = worst.max((lk - (g as f64).ln()).abs());
    }
    if worst > 1e-12 {
        return Err(fail(format!("uniform-softmax closed form missed by {worst:.3e} > 1e-12")));
    }
    Ok(format!("ln(B·G) and ln(G) closed forms within {worst:.3e}"))
}

/// The contrastive loss re-derived through a different algebraic route:
/// shift each row by its positive similarity instead of the row maximum,
/// so the loss is ln Σ exp((sᵢⱼ − sᵢ₊)/τ) directly.
fn check_logsumexp_oracle(seed: u64, blocks: usize) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..blocks {
        let b = rng.gen_range(2..=5);
        let g = rng.gen_range(2..=5);
        let layout = BatchLayout::single(b, g)?;
        let s = random_similarities(&mut rng, b, b * g);
        let tau = 0.02;
        let block = SimilarityBlock::new(s.clone(), tau)?;
        let (loss, _) = contrastive_loss(&block, &layout)?;

        let mut oracle = 0.0;
        for i in 0..b {
            let pos = s[(i, layout.positive_index(i))];
            let sum: f64 = (0..b * g).map(|j| ((s[(i, j)] - pos) / tau).exp()).sum();
            oracle += sum.ln();
        }
        oracle /= b as f64;
        worst = worst.max((loss - oracle).abs());
    }
    if worst > 1e-10 {
        return Err(fail(format!("positive-shifted oracle missed by {worst:.3e} > 1e-10")));
    }
    Ok(format!("{blocks} random blocks, max |Δloss| {worst:.3e}"))
}

/// Splitting a batch into shards that pool their passages must reproduce the
/// single-shard loss and gradients exactly.
fn check_pooled_sharding(seed: u64, cases: usize) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let b1 = rng.gen_range(1..=3);
        let b2 = rng.gen_range(1..=3);
        let g = rng.gen_range(2..=4);
        let total = (b1 + b2) * g;
        let s = random_similarities(&mut rng, b1 + b2, total);
        let tau = 0.02;

        let whole = SimilarityBlock::new(s.clone(), tau)?;
        let whole_layout = BatchLayout::single(b1 + b2, g)?;
        let (loss_whole, grad_whole) = contrastive_loss(&whole, &whole_layout)?;

        let top = SimilarityBlock::new(s.slice(ndarray::s![..b1, ..]).to_owned(), tau)?;
        let bottom = SimilarityBlock::new(s.slice(ndarray::s![b1.., ..]).to_owned(), tau)?;
        let top_layout = BatchLayout::shard(b1, g, 0, total)?;
        let bottom_layout = BatchLayout::shard(b2, g, b1 * g, total)?;
        let (loss_pooled, grads) =
            pooled_contrastive_loss(&[(&top, &top_layout), (&bottom, &bottom_layout)])?;

        worst = worst.max((loss_whole - loss_pooled).abs());
        for i in 0..b1 + b2 {
            for j in 0..total {
                let pooled = if i < b1 { grads[0][(i, j)] } else { grads[1][(i - b1, j)] };
                worst = worst.max((grad_whole[(i, j)] - pooled).abs());
            }
        }
    }
    if worst > 1e-12 {
        return Err(fail(format!("sharded run deviates by {worst:.3e} > 1e-12")));
    }
    Ok(format!("{cases} random shardings, max deviation {worst:.3e}"))
}

/// Every row of the transcribed reference tables must reproduce its printed
/// average under the aggregation protocol (1-decimal tables within 0.05,
/// the 2-decimal per-language table within 0.005).
fn check_aggregation_fixtures() -> Result<String> {
    let mut rows_checked = 0usize;
    let mut check_rows = |name: &str,
                          rows: Vec<(String, Vec<f64>, f64)>,
                          tol: f64|
     -> Result<()> {
        for (label, scores, printed) in rows {
            let m = scores.iter().sum::<f64>() / scores.len() as f64;
            if (m - printed).abs() > tol {
                return Err(fail(format!(
                    "{name} row {label}: recomputed {m:.4} vs printed {printed} (tol {tol})"
                )));
            }
            rows_checked += 1;
        }
        Ok(())
    };

    let full = fixtures::load_full_results()?;
    check_rows(
        "full-results",
        full.rows.iter().map(|r| (r.model.clone(), r.scores.clone(), r.average)).collect(),
        0.05 + 1e-9,
    )?;
    let lite = fixtures::load_lite_results()?;
    check_rows(
        "lite-results",
        lite.rows.iter().map(|r| (r.model.clone(), r.scores.clone(), r.average)).collect(),
        0.05 + 1e-9,
    )?;
    let ablation = fixtures::load_ablation()?;
    check_rows(
        "ablation",
        ablation
            .rows
            .iter()
            .map(|r| (format!("qe={}", r.qe_threshold), r.scores.clone(), r.average))
            .collect(),
        0.05 + 1e-9,
    )?;
    let per_lang = fixtures::load_per_language()?;
    for block in &per_lang.datasets {
        check_rows(
            &format!("per-language/{}", block.dataset),
            block
                .rows
                .iter()
                .map(|r| {
                    (r.model.clone(), r.scores.iter().flatten().copied().collect(), r.average)
                })
                .collect(),
            0.005 + 1e-12,
        )?;
    }
    Ok(format!("{rows_checked} reference rows reproduce their printed averages"))
}

/// The synthetic lite suite scored by the marker oracle: every cell must be
/// essentially perfect, proving the datasets, metrics, runner, and
/// aggregation agree end to end.
fn check_synthetic_suite(seed: u64) -> Result<String> {
    let manifest = bench::builtin_manifest("lite-synthetic")?;
    let encoder = synth::oracle_encoder();
    let table = bench::run_suite(&manifest, &encoder, seed, None, None)?;
    let mut min_cell = f64::INFINITY;
    for row in table.scores.values() {
        for s in row.values() {
            min_cell = min_cell.min(*s);
        }
    }
    if min_cell < 99.0 {
        return Err(fail(format!("weakest synthetic cell scored {min_cell:.2} < 99.0")));
    }
    let summary = bench::aggregate(&table, AggregationMode::TaskMacro)?;
    Ok(format!(
        "{} cells, weakest {min_cell:.2}, overall {:.2}",
        table.n_cells(),
        summary.overall
    ))
}

/// Run every check. Deterministic in `seed`.
pub fn run_selftest(seed: u64) -> Vec<CheckResult> {
    vec![
        CheckResult::from("gradient-finite-difference", check_gradients(seed, 5)),
        CheckResult::from("loss-uniform-closed-form", check_uniform_loss()),
        CheckResult::from("loss-logsumexp-oracle", check_logsumexp_oracle(seed ^ 0x9e37, 10)),
        CheckResult::from("pooled-shard-equivalence", check_pooled_sharding(seed ^ 0x79b9, 10)),
        CheckResult::from("aggregation-fixtures", check_aggregation_fixtures()),
        CheckResult::from("synthetic-oracle-suite", check_synthetic_suite(seed)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        let results = run_selftest(17);
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
        assert!(all_passed(&results));
        assert_eq!(results.len(), 6);
    }

    #[test]
    fn selftest_is_deterministic() {
        let a = run_selftest(3);
        let b = run_selftest(3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.detail, y.detail);
        }
    }
}
