//! One-epoch gradient-descent training loop: same-dataset batching, a linear
//! warmup/decay schedule, windowed loss logging, and versioned checkpoints.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datamodel::TrainInstance;
use crate::encoder::toy::{toy_backward, toy_forward, ToyEncoderParams};
use crate::encoder::{format_instruction, truncate_chars};
use crate::error::{Error, Result};
use crate::objective::{similarity_matrix, teacher_normalize, total_objective, BatchLayout};

/// Instruction prepended to every training query before embedding.
pub const TRAIN_QUERY_INSTRUCTION: &str =
    "Given a premise, retrieve hypotheses that are entailed by it";

fn default_epochs() -> usize {
    1
}
fn default_batch_size() -> usize {
    8
}
fn default_group_size() -> usize {
    8
}
fn default_learning_rate() -> f64 {
    1e-5
}
fn default_warmup_ratio() -> f64 {
    0.1
}
fn default_max_len() -> usize {
    512
}
fn default_temperature() -> f64 {
    0.02
}
fn default_same_dataset() -> bool {
    true
}
fn default_log_every() -> usize {
    100
}
fn default_checkpoint_every() -> usize {
    100
}
fn default_seed() -> u64 {
    13
}
fn default_query_instruction() -> String {
    TRAIN_QUERY_INSTRUCTION.to_string()
}

/// Hyperparameters of the training loop. Defaults reproduce the reference
/// configuration (batch 8, group 8, lr 1e-5, warmup ratio 0.1, τ = 0.02).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_group_size")]
    pub group_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_warmup_ratio")]
    pub warmup_ratio: f64,
    #[serde(default = "default_max_len")]
    pub max_query_len: usize,
    #[serde(default = "default_max_len")]
    pub max_passage_len: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_same_dataset")]
    pub same_dataset_within_batch: bool,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_query_instruction")]
    pub query_instruction: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults are total")
    }
}

impl TrainConfig {
    /// Full validation as applied at the CLI boundary. The library-level
    /// loop additionally tolerates a zero learning rate (a dry run that
    /// performs no updates), which this strict check rejects.
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Validation("learning_rate must be positive".into()));
        }
        self.validate_structure()
    }

    fn validate_structure(&self) -> Result<()> {
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Validation("learning_rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Validation("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Validation("batch_size must be positive".into()));
        }
        if self.group_size == 0 {
            return Err(Error::Validation("group_size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.warmup_ratio) {
            return Err(Error::Validation("warmup_ratio must lie in [0,1]".into()));
        }
        if self.temperature <= 0.0 || !self.temperature.is_finite() {
            return Err(Error::Validation("temperature must be positive".into()));
        }
        if self.max_query_len == 0 || self.max_passage_len == 0 {
            return Err(Error::Validation("length caps must be positive".into()));
        }
        if self.log_every == 0 {
            return Err(Error::Validation("log_every must be positive".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::Validation("checkpoint_every must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 hex digest of the JSON-serialized configuration; stamped into
    /// checkpoints so a resumed or evaluated run can detect config drift.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hex(&hasher.finalize())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// One query with its fully materialized candidate group of `G` passages
/// (positive first) and the aligned raw teacher scores.
#[derive(Debug, Clone, Serialize)]
pub struct PlannedGroup {
    pub query: String,
    pub passages: Vec<String>,
    pub teacher_raw: Vec<f64>,
    pub dataset: String,
}

/// Shuffle, partition by dataset key (when `same_dataset_within_batch`),
/// chunk into batches of exactly `B` (trailing remainders dropped), and
/// materialize each instance's candidate group: the first positive plus the
/// first `G−1` negatives, padded by seeded resampling with replacement when
/// an instance has fewer.
///
/// Instances without teacher scores get a zero raw score per group member
/// (a uniform distribution after normalization).
pub fn plan_batches(instances: &[TrainInstance], cfg: &TrainConfig) -> Result<Vec<Vec<PlannedGroup>>> {
    cfg.validate_structure()?;
    for (idx, inst) in instances.iter().enumerate() {
        if cfg.group_size > 1 && inst.neg.is_empty() {
            let preview: String = inst.query.chars().take(40).collect();
            return Err(Error::Validation(format!(
                "instance {idx} ({preview:?}) has no negatives but group_size {} needs {}",
                cfg.group_size,
                cfg.group_size - 1
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.shuffle(&mut rng);

    let mut batches: Vec<Vec<usize>> = Vec::new();
    if cfg.same_dataset_within_batch {
        let mut by_dataset: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for &i in &order {
            by_dataset.entry(instances[i].meta.source.as_str()).or_default().push(i);
        }
        for pool in by_dataset.values() {
            for chunk in pool.chunks_exact(cfg.batch_size) {
                batches.push(chunk.to_vec());
            }
        }
    } else {
        for chunk in order.chunks_exact(cfg.batch_size) {
            batches.push(chunk.to_vec());
        }
    }
    batches.shuffle(&mut rng);

    let mut planned = Vec::with_capacity(batches.len());
    for batch in batches {
        let mut groups = Vec::with_capacity(batch.len());
        for i in batch {
            groups.push(materialize_group(&instances[i], cfg, &mut rng));
        }
        planned.push(groups);
    }
    Ok(planned)
}

fn materialize_group(inst: &TrainInstance, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> PlannedGroup {
    let g = cfg.group_size;
    let mut neg_indices: Vec<usize> = (0..inst.neg.len().min(g - 1)).collect();
    while neg_indices.len() < g - 1 {
        neg_indices.push(rng.gen_range(0..inst.neg.len()));
    }

    let mut passages = Vec::with_capacity(g);
    let mut teacher_raw = Vec::with_capacity(g);
    let scores = inst.teacher_scores.as_deref();
    passages.push(truncate_chars(&inst.pos[0], cfg.max_passage_len).to_string());
    teacher_raw.push(scores.map_or(0.0, |s| s[0]));
    for &j in &neg_indices {
        passages.push(truncate_chars(&inst.neg[j], cfg.max_passage_len).to_string());
        teacher_raw.push(scores.map_or(0.0, |s| s[1 + j]));
    }
    PlannedGroup {
        query: truncate_chars(&inst.query, cfg.max_query_len).to_string(),
        passages,
        teacher_raw,
        dataset: inst.meta.source.clone(),
    }
}

/// Learning rate at 1-indexed optimizer step `step` out of `total_steps`:
/// linear warmup from 0 to the base rate over `ceil(warmup_ratio·total)`
/// steps, then linear decay to 0 at `total_steps`.
pub fn lr_at(step: usize, total_steps: usize, cfg: &TrainConfig) -> f64 {
    debug_assert!(step <= total_steps);
    let warmup = (cfg.warmup_ratio * total_steps as f64).ceil() as usize;
    if step <= warmup {
        if warmup == 0 {
            // No warmup phase: decay line from the base rate at step 0.
            return cfg.learning_rate * (total_steps - step) as f64 / total_steps as f64;
        }
        cfg.learning_rate * step as f64 / warmup as f64
    } else {
        cfg.learning_rate * (total_steps - step) as f64 / (total_steps - warmup) as f64
    }
}

/// Versioned snapshot of trained parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub step: usize,
    pub config_hash: String,
    pub params: ToyEncoderParams,
}

pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string(ckpt)?;
    std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let ckpt: Checkpoint = serde_json::from_slice(&bytes)?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Validation(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            ckpt.version
        )));
    }
    Ok(ckpt)
}

/// One metrics-log line. Losses are means over the window since the previous
/// log point; `lr` is the rate applied at `step`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsRecord {
    pub step: usize,
    pub loss: f64,
    pub loss_contrastive: f64,
    pub loss_kd: f64,
    pub lr: f64,
}

/// Output of a training run.
pub struct TrainRun {
    pub final_params: ToyEncoderParams,
    pub metrics: Vec<MetricsRecord>,
    pub checkpoints: Vec<Checkpoint>,
}

/// Mutable loop state: the current step, parameters, and the loss window
/// accumulated since the previous log point.
pub struct TrainState {
    pub step: usize,
    pub params: ToyEncoderParams,
    window_total: f64,
    window_contrastive: f64,
    window_kd: f64,
    window_count: usize,
}

impl TrainState {
    fn new(params: ToyEncoderParams) -> Self {
        TrainState {
            step: 0,
            params,
            window_total: 0.0,
            window_contrastive: 0.0,
            window_kd: 0.0,
            window_count: 0,
        }
    }

    fn record(&mut self, total: f64, contrastive: f64, kd: f64) {
        self.window_total += total;
        self.window_contrastive += contrastive;
        self.window_kd += kd;
        self.window_count += 1;
    }

    fn flush_window(&mut self, lr: f64) -> MetricsRecord {
        let n = self.window_count.max(1) as f64;
        let rec = MetricsRecord {
            step: self.step,
            loss: self.window_total / n,
            loss_contrastive: self.window_contrastive / n,
            loss_kd: self.window_kd / n,
            lr,
        };
        self.window_total = 0.0;
        self.window_contrastive = 0.0;
        self.window_kd = 0.0;
        self.window_count = 0;
        rec
    }
}

/// Run `cfg.epochs` passes of plain gradient descent over the instances.
///
/// Per batch: embed queries (instruction-formatted) and the flattened
/// passage groups, score `S = Q·Pᵀ`, evaluate the combined objective, and
/// push the gradient through the encoder. Logs at step 1, every `log_every`
/// steps, and the final step; checkpoints every `checkpoint_every` steps and
/// at the end. A non-finite loss aborts, dumping the offending batch under
/// `dump_dir` when one is supplied.
pub fn train_epoch(
    instances: &[TrainInstance],
    params: ToyEncoderParams,
    cfg: &TrainConfig,
    dump_dir: Option<&Path>,
) -> Result<TrainRun> {
    cfg.validate_structure()?;
    let batches = plan_batches(instances, cfg)?;
    if batches.is_empty() {
        return Err(Error::Validation(format!(
            "no full batches: {} instances with batch_size {}",
            instances.len(),
            cfg.batch_size
        )));
    }
    let total_steps = batches.len() * cfg.epochs;
    let config_hash = cfg.config_hash();

    let mut state = TrainState::new(params);
    let mut metrics = Vec::new();
    let mut checkpoints: Vec<Checkpoint> = Vec::new();

    for _ in 0..cfg.epochs {
        for batch in &batches {
            state.step += 1;
            let step = state.step;

            let queries: Vec<String> = batch
                .iter()
                .map(|grp| format_instruction(&cfg.query_instruction, &grp.query))
                .collect();
            let passages: Vec<String> =
                batch.iter().flat_map(|grp| grp.passages.iter().cloned()).collect();

            let (q, q_cache) = toy_forward(&queries, &state.params)?;
            let (p, p_cache) = toy_forward(&passages, &state.params)?;
            let block = similarity_matrix(&q, &p, cfg.temperature)?;
            let layout = BatchLayout::single(batch.len(), cfg.group_size)?;

            let raw = ndarray::Array2::from_shape_vec(
                (batch.len(), cfg.group_size),
                batch.iter().flat_map(|grp| grp.teacher_raw.iter().copied()).collect(),
            )
            .expect("teacher score shape matches layout");
            let teacher = teacher_normalize(&raw);

            let (value, grad_s) = total_objective(&block, &teacher, &layout)?;
            if !value.total.is_finite() {
                let mut msg = format!("non-finite loss {} at step {step}", value.total);
                if let Some(dir) = dump_dir {
                    let path = dir.join(format!("batch_dump_step{step}.json"));
                    if std::fs::write(&path, serde_json::to_string_pretty(batch)?).is_ok() {
                        msg.push_str(&format!("; batch dumped to {}", path.display()));
                    }
                }
                return Err(Error::Numerical(msg));
            }

            // dL/dQ = G·P and dL/dP = Gᵀ·Q, then through the encoder.
            let grad_q = grad_s.dot(&p);
            let grad_p = grad_s.t().dot(&q);
            let gw = toy_backward(&q_cache, &grad_q, &state.params)?
                + toy_backward(&p_cache, &grad_p, &state.params)?;

            let lr = lr_at(step, total_steps, cfg);
            if lr != 0.0 {
                state.params.w.scaled_add(-lr, &gw);
            }

            state.record(value.total, value.contrastive, value.kd);
            if step == 1 || step % cfg.log_every == 0 || step == total_steps {
                metrics.push(state.flush_window(lr));
            }
            if step % cfg.checkpoint_every == 0 || step == total_steps {
                if checkpoints.last().map(|c| c.step) != Some(step) {
                    checkpoints.push(Checkpoint {
                        version: CHECKPOINT_VERSION,
                        step,
                        config_hash: config_hash.clone(),
                        params: state.params.clone(),
                    });
                }
            }
        }
    }

    Ok(TrainRun { final_params: state.params, metrics, checkpoints })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{DirectionConfig, InstanceMeta, LangCode};

    fn inst(query: &str, pos: &str, negs: &[&str], source: &str) -> TrainInstance {
        TrainInstance {
            query: query.to_string(),
            pos: vec![pos.to_string()],
            neg: negs.iter().map(|s| s.to_string()).collect(),
            teacher_scores: None,
            meta: InstanceMeta {
                lang: LangCode::new("eng_Latn").unwrap(),
                direction: DirectionConfig::SrcSrc,
                source: source.to_string(),
            },
        }
    }

    fn make_instances(n: usize, source: &str) -> Vec<TrainInstance> {
        (0..n)
            .map(|i| {
                inst(
                    &format!("query text {i} {source}"),
                    &format!("positive passage {i} {source}"),
                    &[&format!("negative one {i}"), &format!("negative two {i}")],
                    source,
                )
            })
            .collect()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            group_size: 3,
            seed: 7,
            log_every: 2,
            checkpoint_every: 100,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn default_config_matches_reference_table() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.epochs, 1);
        assert_eq!(cfg.batch_size, 8);
        assert_eq!(cfg.group_size, 8);
        assert_eq!(cfg.learning_rate, 1e-5);
        assert_eq!(cfg.warmup_ratio, 0.1);
        assert_eq!(cfg.max_query_len, 512);
        assert_eq!(cfg.max_passage_len, 512);
        assert_eq!(cfg.temperature, 0.02);
        assert!(cfg.same_dataset_within_batch);
        cfg.validate().unwrap();
    }

    #[test]
    fn validate_rejects_nonpositive_lr() {
        let cfg = TrainConfig { learning_rate: -1.0, ..TrainConfig::default() };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("learning_rate must be positive"), "{err}");
        let zero = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn sixteen_instances_make_two_batches() {
        let cfg = TrainConfig { batch_size: 8, group_size: 2, ..TrainConfig::default() };
        let batches = plan_batches(&make_instances(16, "mnli"), &cfg).unwrap();
        assert_eq!(batches.len(), 2);
        assert!(batches.iter().all(|b| b.len() == 8));
    }

    #[test]
    fn seventeen_instances_drop_the_remainder() {
        let cfg = TrainConfig { batch_size: 8, group_size: 2, ..TrainConfig::default() };
        let batches = plan_batches(&make_instances(17, "mnli"), &cfg).unwrap();
        assert_eq!(batches.len(), 2);
    }

    #[test]
    fn same_dataset_batches_are_pure_over_many_seeds() {
        let mut instances = make_instances(8, "alpha");
        instances.extend(make_instances(8, "beta"));
        for seed in 0..100 {
            let cfg = TrainConfig { batch_size: 8, group_size: 2, seed, ..TrainConfig::default() };
            let batches = plan_batches(&instances, &cfg).unwrap();
            assert_eq!(batches.len(), 2, "seed {seed}");
            for batch in &batches {
                let first = &batch[0].dataset;
                assert!(batch.iter().all(|grp| grp.dataset == *first), "seed {seed}: mixed batch");
            }
        }
    }

    #[test]
    fn mixed_batches_allowed_when_flag_off() {
        let mut instances = make_instances(6, "alpha");
        instances.extend(make_instances(6, "beta"));
        let cfg = TrainConfig {
            batch_size: 12,
            group_size: 2,
            same_dataset_within_batch: false,
            ..TrainConfig::default()
        };
        let batches = plan_batches(&instances, &cfg).unwrap();
        assert_eq!(batches.len(), 1);
        // With the flag on, no batch of 12 can form from two pools of 6.
        let pure_cfg = TrainConfig { same_dataset_within_batch: true, ..cfg };
        assert!(plan_batches(&instances, &pure_cfg).unwrap().is_empty());
    }

    #[test]
    fn zero_negative_instance_errors_when_group_needs_negs() {
        let bad = vec![inst("q", "p", &[], "mnli")];
        let cfg = TrainConfig { batch_size: 1, group_size: 2, ..TrainConfig::default() };
        let err = plan_batches(&bad, &cfg).unwrap_err();
        assert!(err.to_string().contains("no negatives"), "{err}");
        // Group size 1 never needs negatives.
        let ok_cfg = TrainConfig { batch_size: 1, group_size: 1, ..TrainConfig::default() };
        assert_eq!(plan_batches(&bad, &ok_cfg).unwrap().len(), 1);
    }

    #[test]
    fn short_negative_lists_pad_by_resampling() {
        let instances = vec![inst("q0", "p0", &["n0"], "mnli"); 2];
        let cfg = TrainConfig { batch_size: 2, group_size: 4, ..TrainConfig::default() };
        let batches = plan_batches(&instances, &cfg).unwrap();
        for grp in &batches[0] {
            assert_eq!(grp.passages.len(), 4);
            assert_eq!(grp.passages[1], "n0");
            assert_eq!(grp.passages[2], "n0");
            assert_eq!(grp.passages[3], "n0");
        }
    }

    #[test]
    fn teacher_scores_follow_selected_negatives() {
        let mut i = inst("q", "p", &["n0", "n1", "n2"], "mnli");
        i.teacher_scores = Some(vec![5.0, 1.0, 2.0, 3.0]);
        let cfg = TrainConfig { batch_size: 1, group_size: 3, ..TrainConfig::default() };
        let batches = plan_batches(&[i], &cfg).unwrap();
        let grp = &batches[0][0];
        assert_eq!(grp.teacher_raw, vec![5.0, 1.0, 2.0]);
        assert_eq!(grp.passages, vec!["p", "n0", "n1"]);
    }

    #[test]
    fn lr_schedule_spec_points() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_at(0, 100, &cfg), 0.0);
        assert!((lr_at(10, 100, &cfg) - 1e-5).abs() < 1e-20);
        assert!((lr_at(55, 100, &cfg) - 5e-6).abs() < 1e-20);
        assert_eq!(lr_at(100, 100, &cfg), 0.0);
    }

    #[test]
    fn lr_schedule_peak_and_continuity() {
        let cfg = TrainConfig { warmup_ratio: 0.25, ..TrainConfig::default() };
        let total = 40;
        let warmup = 10;
        let peak = (0..=total).map(|s| lr_at(s, total, &cfg)).fold(0.0, f64::max);
        assert!((peak - cfg.learning_rate).abs() < 1e-20);
        assert!((lr_at(warmup, total, &cfg) - cfg.learning_rate).abs() < 1e-20);
        for s in 1..=total {
            let jump = (lr_at(s, total, &cfg) - lr_at(s - 1, total, &cfg)).abs();
            assert!(jump <= cfg.learning_rate / 10.0 + 1e-18, "discontinuity at {s}");
        }
    }

    #[test]
    fn lr_with_zero_warmup_decays_from_base() {
        let cfg = TrainConfig { warmup_ratio: 0.0, ..TrainConfig::default() };
        assert!((lr_at(0, 10, &cfg) - cfg.learning_rate).abs() < 1e-20);
        assert_eq!(lr_at(10, 10, &cfg), 0.0);
    }

    #[test]
    fn zero_learning_rate_leaves_params_bit_identical() {
        let instances = make_instances(8, "mnli");
        let cfg = TrainConfig { learning_rate: 0.0, ..small_cfg() };
        let params = ToyEncoderParams::with_shape(3, 4, 64, 3);
        let before = params.w.clone();
        let run = train_epoch(&instances, params, &cfg, None).unwrap();
        assert_eq!(run.final_params.w, before);
    }

    #[test]
    fn same_seed_gives_identical_metrics_log() {
        let instances = make_instances(12, "mnli");
        let cfg = small_cfg();
        let run_a =
            train_epoch(&instances, ToyEncoderParams::with_shape(3, 4, 64, 3), &cfg, None).unwrap();
        let run_b =
            train_epoch(&instances, ToyEncoderParams::with_shape(3, 4, 64, 3), &cfg, None).unwrap();
        assert_eq!(run_a.metrics, run_b.metrics);
        assert_eq!(run_a.final_params.w, run_b.final_params.w);
    }

    #[test]
    fn logs_cover_first_multiples_and_final_step() {
        let instances = make_instances(20, "mnli");
        let cfg = small_cfg(); // batch 4, log_every 2 → 5 steps
        let run =
            train_epoch(&instances, ToyEncoderParams::with_shape(3, 4, 64, 3), &cfg, None).unwrap();
        let steps: Vec<usize> = run.metrics.iter().map(|m| m.step).collect();
        assert_eq!(steps, vec![1, 2, 4, 5]);
        assert_eq!(run.checkpoints.len(), 1);
        assert_eq!(run.checkpoints[0].step, 5);
        for m in &run.metrics {
            assert!((m.loss - (m.loss_contrastive + m.loss_kd)).abs() < 1e-12);
            assert!(m.loss.is_finite());
        }
    }

    #[test]
    fn checkpoint_round_trips_through_file() {
        let cfg = small_cfg();
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            step: 5,
            config_hash: cfg.config_hash(),
            params: ToyEncoderParams::with_shape(3, 4, 64, 3),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        save_checkpoint(&ckpt, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.step, 5);
        assert_eq!(loaded.config_hash, ckpt.config_hash);
        assert_eq!(loaded.params.w, ckpt.params.w);
    }

    #[test]
    fn checkpoint_version_mismatch_rejected() {
        let ckpt = Checkpoint {
            version: 99,
            step: 1,
            config_hash: String::new(),
            params: ToyEncoderParams::with_shape(3, 4, 64, 3),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        save_checkpoint(&ckpt, &path).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("checkpoint version"), "{err}");
    }

    #[test]
    fn config_hash_changes_with_config() {
        let a = TrainConfig::default();
        let b = TrainConfig { seed: 99, ..TrainConfig::default() };
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash(), TrainConfig::default().config_hash());
    }
}
