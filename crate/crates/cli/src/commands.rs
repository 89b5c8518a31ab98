//! Subcommand implementations. Each producing command resolves its settings
//! (defaults < config file < flags), does the work through the core library,
//! then writes its outputs plus `resolved-config.json` and `run-meta.json`
//! into `--out`.

use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use embedkit_core::bench::{self, SuiteReport};
use embedkit_core::datamodel::{
    nfc, parse_nli_lines, parse_train_instances, parse_translation_lines, to_jsonl,
    DirectionConfig, LangCode,
};
use embedkit_core::encoder::{build_encoder, ToyEncoderParams};
use embedkit_core::mining::{build_teacher, mine_with_encoder, score_teacher as attach_scores, MiningSettings};
use embedkit_core::pipeline::{run_build_data, ExpansionSettings, DEFAULT_QE_THRESHOLD};
use embedkit_core::selftest::{all_passed, run_selftest};
use embedkit_core::trainer::{save_checkpoint, train_epoch, TrainConfig, TRAIN_QUERY_INSTRUCTION};
use embedkit_core::{Error, Result};

use crate::{
    BuildDataArgs, EvaluateArgs, MineArgs, ReportArgs, ScoreTeacherArgs, SelftestArgs, TrainArgs,
};

// ---- shared plumbing ----

fn open_reader(path: &Path) -> Result<BufReader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(BufReader::new(file))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Parse an optional `--config` JSON file; absent file means all-defaults.
fn read_config<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => serde_json::from_str(&read_file(p)?)
            .map_err(|e| Error::Parse(format!("config {}: {e}", p.display()))),
    }
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Write the merged-settings snapshot (byte-stable across reruns) and the
/// timestamp side file. Keeping wall-clock data out of `resolved-config.json`
/// is what makes identical reruns byte-identical.
fn write_run_files(dir: &Path, command: &str, resolved: &serde_json::Value) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let snapshot = json!({ "command": command, "resolved": resolved });
    write_file(dir, "resolved-config.json", &format!("{:#}\n", snapshot))?;
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = json!({ "command": command, "unix_timestamp_secs": now });
    write_file(dir, "run-meta.json", &format!("{:#}\n", meta))
}

fn ensure_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn parse_direction(s: &str) -> Result<DirectionConfig> {
    DirectionConfig::ALL
        .iter()
        .find(|c| c.as_str() == s)
        .copied()
        .ok_or_else(|| {
            Error::Parse(format!(
                "unknown direction config {s:?}: expected TGT_SRC, SRC_TGT, TGT_TGT, or SRC_SRC"
            ))
        })
}

// ---- build-data ----

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BuildDataFileConfig {
    langs: Option<Vec<String>>,
    configs: Option<Vec<String>>,
    qe_threshold: Option<f64>,
}

pub fn build_data(args: &BuildDataArgs) -> Result<()> {
    let file: BuildDataFileConfig = read_config(&args.config)?;
    let lang_strs = if args.langs.is_empty() { file.langs.unwrap_or_default() } else { args.langs.clone() };
    let config_strs =
        if args.configs.is_empty() { file.configs.unwrap_or_default() } else { args.configs.clone() };
    let qe_threshold = args.qe_threshold.or(file.qe_threshold).unwrap_or(DEFAULT_QE_THRESHOLD);

    let target_langs: Vec<LangCode> =
        lang_strs.iter().map(|l| LangCode::new(l)).collect::<Result<_>>()?;
    let configs: Vec<DirectionConfig> = if config_strs.is_empty() {
        DirectionConfig::ALL.to_vec()
    } else {
        config_strs.iter().map(|c| parse_direction(c)).collect::<Result<_>>()?
    };
    let settings = ExpansionSettings { target_langs, configs, qe_threshold };
    settings.validate()?;

    let examples = parse_nli_lines(open_reader(&args.examples)?)?;
    let translations = match &args.translations {
        Some(p) => parse_translation_lines(open_reader(p)?)?,
        None => Vec::new(),
    };
    let instances = run_build_data(&examples, &translations, &settings)?;

    ensure_out(&args.out)?;
    write_file(&args.out, "instances.jsonl", &to_jsonl(&instances)?)?;
    write_run_files(
        &args.out,
        "build-data",
        &json!({
            "examples": args.examples.display().to_string(),
            "translations": args.translations.as_ref().map(|p| p.display().to_string()),
            "settings": settings,
        }),
    )?;
    println!(
        "build-data: {} examples → {} instances ({})",
        examples.len(),
        instances.len(),
        args.out.join("instances.jsonl").display()
    );
    Ok(())
}

// ---- mine ----

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MineFileConfig {
    encoder: Option<String>,
    max_negatives: Option<usize>,
    window_lo: Option<usize>,
    window_hi: Option<usize>,
    seed: Option<u64>,
    exclude_exact_duplicates: Option<bool>,
    query_instruction: Option<String>,
}

pub fn mine(args: &MineArgs) -> Result<()> {
    let file: MineFileConfig = read_config(&args.config)?;
    let defaults = MiningSettings::default();
    let settings = MiningSettings {
        max_negatives: args.max_negatives.or(file.max_negatives).unwrap_or(defaults.max_negatives),
        window_lo: args.window_lo.or(file.window_lo).unwrap_or(defaults.window_lo),
        window_hi: args.window_hi.or(file.window_hi).unwrap_or(defaults.window_hi),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
        exclude_exact_duplicates: if args.keep_exact_duplicates {
            false
        } else {
            file.exclude_exact_duplicates.unwrap_or(defaults.exclude_exact_duplicates)
        },
    };
    settings.validate()?;
    let encoder_spec = args
        .encoder
        .clone()
        .or(file.encoder)
        .ok_or_else(|| Error::Validation("missing --encoder (or \"encoder\" config key)".into()))?;
    let instruction = args
        .query_instruction
        .clone()
        .or(file.query_instruction)
        .unwrap_or_else(|| TRAIN_QUERY_INSTRUCTION.to_string());

    let encoder = build_encoder(&encoder_spec)?;
    let instances = parse_train_instances(open_reader(&args.instances)?)?;
    let corpus: Vec<String> = read_file(&args.corpus)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(nfc)
        .collect();

    let mined = mine_with_encoder(&instances, &corpus, encoder.as_ref(), Some(&instruction), &settings)?;
    let added: usize =
        mined.iter().zip(&instances).map(|(m, i)| m.neg.len() - i.neg.len()).sum();

    ensure_out(&args.out)?;
    write_file(&args.out, "instances.jsonl", &to_jsonl(&mined)?)?;
    write_run_files(
        &args.out,
        "mine",
        &json!({
            "instances": args.instances.display().to_string(),
            "corpus": args.corpus.display().to_string(),
            "encoder": encoder_spec,
            "query_instruction": instruction,
            "settings": settings,
        }),
    )?;
    println!(
        "mine: appended {added} negatives across {} instances ({})",
        mined.len(),
        args.out.join("instances.jsonl").display()
    );
    Ok(())
}

// ---- score-teacher ----

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreTeacherFileConfig {
    teacher: Option<String>,
}

pub fn score_teacher(args: &ScoreTeacherArgs) -> Result<()> {
    let file: ScoreTeacherFileConfig = read_config(&args.config)?;
    let teacher_spec = args
        .teacher
        .clone()
        .or(file.teacher)
        .ok_or_else(|| Error::Validation("missing --teacher (or \"teacher\" config key)".into()))?;
    let teacher = build_teacher(&teacher_spec)?;
    let instances = parse_train_instances(open_reader(&args.instances)?)?;
    let scored: Vec<_> = instances
        .iter()
        .map(|inst| attach_scores(inst, teacher.as_ref()))
        .collect::<Result<_>>()?;

    ensure_out(&args.out)?;
    write_file(&args.out, "instances.jsonl", &to_jsonl(&scored)?)?;
    write_run_files(
        &args.out,
        "score-teacher",
        &json!({
            "instances": args.instances.display().to_string(),
            "teacher": teacher_spec,
        }),
    )?;
    println!(
        "score-teacher: scored {} instances ({})",
        scored.len(),
        args.out.join("instances.jsonl").display()
    );
    Ok(())
}

// ---- train ----

#[derive(Default, Deserialize)]
struct TrainFileExtras {
    dim: Option<usize>,
}

const DEFAULT_TRAIN_DIM: usize = 32;

pub fn train(args: &TrainArgs) -> Result<()> {
    // The config file holds TrainConfig fields directly; serde defaults fill
    // whatever it omits, and explicit flags override it.
    let mut cfg: TrainConfig = read_config(&args.config)?;
    let extras: TrainFileExtras = read_config(&args.config)?;
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.group_size {
        cfg.group_size = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.warmup_ratio {
        cfg.warmup_ratio = v;
    }
    if let Some(v) = args.max_query_len {
        cfg.max_query_len = v;
    }
    if let Some(v) = args.max_passage_len {
        cfg.max_passage_len = v;
    }
    if let Some(v) = args.temperature {
        cfg.temperature = v;
    }
    if let Some(v) = args.same_dataset_within_batch {
        cfg.same_dataset_within_batch = v;
    }
    if let Some(v) = args.log_every {
        cfg.log_every = v;
    }
    if let Some(v) = args.checkpoint_every {
        cfg.checkpoint_every = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = &args.query_instruction {
        cfg.query_instruction = v.clone();
    }
    cfg.validate()?;
    let dim = args.dim.or(extras.dim).unwrap_or(DEFAULT_TRAIN_DIM);
    if dim == 0 {
        return Err(Error::Validation("dim must be positive".into()));
    }

    let instances = parse_train_instances(open_reader(&args.instances)?)?;
    ensure_out(&args.out)?;
    let params = ToyEncoderParams::new(cfg.seed, dim);
    let run = train_epoch(&instances, params, &cfg, Some(&args.out))?;

    write_file(&args.out, "metrics.jsonl", &to_jsonl(&run.metrics)?)?;
    for ckpt in &run.checkpoints {
        save_checkpoint(ckpt, args.out.join(format!("checkpoint-{:06}.json", ckpt.step)))?;
    }
    let last = run.checkpoints.last().expect("training always checkpoints its final step");
    save_checkpoint(last, args.out.join("checkpoint.json"))?;
    write_run_files(
        &args.out,
        "train",
        &json!({
            "instances": args.instances.display().to_string(),
            "dim": dim,
            "config": cfg,
            "config_hash": cfg.config_hash(),
        }),
    )?;
    let first = run.metrics.first().expect("training always logs");
    let final_rec = run.metrics.last().expect("training always logs");
    println!(
        "train: {} steps, loss {:.4} → {:.4} ({})",
        last.step,
        first.loss,
        final_rec.loss,
        args.out.join("checkpoint.json").display()
    );
    Ok(())
}

// ---- evaluate ----

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateFileConfig {
    suite: Option<String>,
    encoder: Option<String>,
    data: Option<PathBuf>,
    seed: Option<u64>,
    run_label: Option<String>,
    query_instruction: Option<String>,
}

const DEFAULT_EVAL_SEED: u64 = 17;

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let file: EvaluateFileConfig = read_config(&args.config)?;
    let suite = args
        .suite
        .clone()
        .or(file.suite)
        .ok_or_else(|| Error::Validation("missing --suite (or \"suite\" config key)".into()))?;
    let encoder_spec = args
        .encoder
        .clone()
        .or(file.encoder)
        .ok_or_else(|| Error::Validation("missing --encoder (or \"encoder\" config key)".into()))?;
    let data = args.data.clone().or(file.data);
    let seed = args.seed.or(file.seed).unwrap_or(DEFAULT_EVAL_SEED);
    let run_label = args.run_label.clone().or(file.run_label).unwrap_or_else(|| encoder_spec.clone());
    let instruction = args.query_instruction.clone().or(file.query_instruction);

    let manifest = if matches!(suite.as_str(), "full" | "lite" | "lite-synthetic") {
        bench::builtin_manifest(&suite)?
    } else {
        bench::load_manifest(&suite)?
    };
    let encoder = build_encoder(&encoder_spec)?;
    let table =
        bench::run_suite(&manifest, encoder.as_ref(), seed, data.as_deref(), instruction.as_deref())?;
    let report = SuiteReport::new(&run_label, &manifest, table)?;

    ensure_out(&args.out)?;
    write_file(&args.out, "report.json", &format!("{}\n", report.to_machine()?))?;
    write_file(&args.out, "report.txt", &report.text_table())?;
    write_run_files(
        &args.out,
        "evaluate",
        &json!({
            "suite": suite,
            "encoder": encoder_spec,
            "data": data.as_ref().map(|p| p.display().to_string()),
            "seed": seed,
            "run_label": run_label,
            "query_instruction": instruction,
        }),
    )?;
    println!(
        "evaluate: {} cells, overall {:.2} ({})",
        report.table.n_cells(),
        report.summary.overall,
        args.out.join("report.json").display()
    );
    Ok(())
}

// ---- report ----

pub fn report(args: &ReportArgs) -> Result<()> {
    let path =
        if args.path.is_dir() { args.path.join("report.json") } else { args.path.clone() };
    let report = SuiteReport::from_machine(&read_file(&path)?)?;
    print!("{}", report.text_table());
    Ok(())
}

// ---- selftest ----

pub fn selftest(args: &SelftestArgs) -> Result<()> {
    let results = run_selftest(args.seed);
    for r in &results {
        println!("{} {} — {}", if r.passed { "ok  " } else { "FAIL" }, r.name, r.detail);
    }
    if let Some(out) = &args.out {
        ensure_out(out)?;
        let rows: Vec<BTreeMap<&str, serde_json::Value>> = results
            .iter()
            .map(|r| {
                BTreeMap::from([
                    ("name", json!(r.name)),
                    ("passed", json!(r.passed)),
                    ("detail", json!(r.detail)),
                ])
            })
            .collect();
        write_file(out, "selftest.json", &format!("{:#}\n", json!(rows)))?;
        write_run_files(out, "selftest", &json!({ "seed": args.seed }))?;
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("selftest: {passed}/{} checks passed", results.len());
    if !all_passed(&results) {
        return Err(Error::Numerical("selftest failed".into()));
    }
    Ok(())
}
