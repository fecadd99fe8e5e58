//! Command-line surface. One binary, subcommand per pipeline stage; every
//! artifact-producing run writes a manifest (config digest, seed, version)
//! so results can be regenerated exactly. Settings resolve as CLI flag over
//! config-file value over built-in default.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    coarse_mapping, make_scenario, map_labels, original_to_revised_mapping, parse_conll,
    parse_jsonl, serialize_conll, serialize_jsonl, Augmentation, Dataset, ScenarioConfig,
    ScenarioSplit,
};
use crate::error::{Error, Result};
use crate::eval::{bootstrap, paired_significance, Metric, ScoreReport};
use crate::judge::{JudgeClient, JudgeConfig};
use crate::quality::{CacheRecord, JudgeCache, JudgeScope, JudgeSession, QualityStrategy};
use crate::schema::{builtin_schema, repair_bio2, LabelSchema};
use crate::ssl::{ssl_train, SslConfig};
use crate::tagger::{decode, fit, FeatureConfig, TokenClassifierModel, TrainConfig};

#[derive(Parser)]
#[command(
    name = "piconer",
    version,
    about = "Semi-supervised fine-grained PICO entity recognition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a labeled pool into a masked-ratio training scenario.
    Scenario(ScenarioArgs),
    /// Train the supervised baseline tagger.
    Train(TrainArgs),
    /// Run iterative self-training.
    SslTrain(SslTrainArgs),
    /// Tag a corpus with a trained model.
    Predict(PredictArgs),
    /// Score predictions against gold labels.
    Eval(EvalArgs),
    /// Test two prediction sets for a significant difference.
    Compare(CompareArgs),
    /// Convert gold labels between annotation schemes.
    MapScheme(MapSchemeArgs),
    /// Summarize a judge verdict cache.
    JudgeAudit(JudgeAuditArgs),
}

/// Optional settings loadable from `--config <file.json>`. Flags win over
/// file values; file values win over defaults.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    seed: Option<u64>,
    schema: Option<String>,
    ratio: Option<f64>,
    augmentation: Option<String>,
    test_fraction: Option<f64>,
    validation_fraction: Option<f64>,
    learning_rate: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    l2: Option<f64>,
    window: Option<usize>,
    hash_dim: Option<usize>,
    strategy: Option<String>,
    theta: Option<f64>,
    alpha: Option<f64>,
    max_iters: Option<usize>,
    patience: Option<usize>,
    metric: Option<String>,
    bootstrap_n: Option<usize>,
    endpoint: Option<String>,
    model: Option<String>,
    judge_cache: Option<PathBuf>,
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("bad config file {}: {e}", p.display())))
            }
        }
    }
}

fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>, default: T) -> T {
    flag.clone().or_else(|| file.clone()).unwrap_or(default)
}

fn require<T: Clone>(flag: &Option<T>, file: &Option<T>, name: &str) -> Result<T> {
    flag.clone()
        .or_else(|| file.clone())
        .ok_or_else(|| Error::Config(format!("missing required setting '{name}'")))
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    config_digest: String,
    seed: u64,
    version: String,
    details: serde_json::Value,
}

fn write_manifest(
    path: &Path,
    command: &str,
    resolved: &impl Serialize,
    seed: u64,
    details: serde_json::Value,
) -> Result<()> {
    let resolved_json = serde_json::to_string(resolved)?;
    let digest = format!("{:x}", Sha256::digest(resolved_json.as_bytes()));
    let manifest = Manifest {
        command: command.to_string(),
        config_digest: digest,
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        details,
    };
    std::fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn load_schema(name: &str) -> Result<LabelSchema> {
    builtin_schema(name)
        .ok_or_else(|| Error::Config(format!("unknown schema '{name}' (original|revised|coarse)")))
}

fn read_corpus(path: &Path, schema: &LabelSchema) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
        parse_jsonl(&text, schema)
    } else {
        parse_conll(&text, schema)
    }
}

fn write_corpus(path: &Path, data: &Dataset) -> Result<()> {
    let text = if path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
        serialize_jsonl(data)
    } else {
        serialize_conll(data)
    };
    std::fs::write(path, text)?;
    Ok(())
}

fn parse_augmentation(name: &str) -> Result<Augmentation> {
    match name {
        "in_domain" => Ok(Augmentation::InDomain),
        "cross_domain" => Ok(Augmentation::CrossDomain),
        "all" => Ok(Augmentation::All),
        other => Err(Error::Config(format!(
            "unknown augmentation '{other}' (in_domain|cross_domain|all)"
        ))),
    }
}

fn parse_metric(name: &str) -> Result<Metric> {
    match name {
        "strict" => Ok(Metric::Strict),
        "partial" => Ok(Metric::Partial),
        other => Err(Error::Config(format!(
            "unknown metric '{other}' (strict|partial)"
        ))),
    }
}

#[derive(Args)]
struct ScenarioArgs {
    /// Labeled pool (CoNLL or JSONL).
    #[arg(long)]
    input: PathBuf,
    /// Cross-domain unlabeled pool.
    #[arg(long)]
    cross_input: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    schema: Option<String>,
    /// Fraction of the training pool kept labeled, in (0, 1].
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    augmentation: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    validation_fraction: Option<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn cmd_scenario(args: &ScenarioArgs) -> Result<()> {
    let file = RunConfig::load(args.config.as_deref())?;
    let schema = load_schema(&pick(&args.schema, &file.schema, "original".into()))?;
    let seed = require(&args.seed, &file.seed, "seed")?;
    let config = ScenarioConfig {
        ratio: require(&args.ratio, &file.ratio, "ratio")?,
        seed,
        augmentation: parse_augmentation(&pick(
            &args.augmentation,
            &file.augmentation,
            "in_domain".into(),
        ))?,
        test_fraction: pick(&args.test_fraction, &file.test_fraction, 0.2),
        validation_fraction: pick(&args.validation_fraction, &file.validation_fraction, 0.1),
    };
    let pool = read_corpus(&args.input, &schema)?;
    let cross = match &args.cross_input {
        Some(p) => read_corpus(p, &schema)?,
        None => Dataset::empty(schema.clone()),
    };
    let split = make_scenario(&pool, &cross, config.clone())?;

    std::fs::create_dir_all(&args.out_dir)?;
    write_corpus(&args.out_dir.join("train_labeled.conll"), &split.train_labeled)?;
    write_corpus(
        &args.out_dir.join("train_unlabeled.conll"),
        &split.train_unlabeled,
    )?;
    write_corpus(&args.out_dir.join("validation.conll"), &split.validation)?;
    write_corpus(&args.out_dir.join("test.conll"), &split.test)?;
    let details = serde_json::json!({
        "labeled": split.train_labeled.len(),
        "unlabeled": split.train_unlabeled.len(),
        "validation": split.validation.len(),
        "test": split.test.len(),
        "schema": schema.name(),
    });
    write_manifest(
        &args.out_dir.join("manifest.json"),
        "scenario",
        &config,
        seed,
        details.clone(),
    )?;
    println!("{}", serde_json::to_string_pretty(&details)?);
    Ok(())
}

fn resolve_features(args_window: &Option<usize>, args_hash: &Option<usize>, file: &RunConfig) -> FeatureConfig {
    let mut features = FeatureConfig::default();
    features.window = pick(args_window, &file.window, features.window);
    features.hash_dim = pick(args_hash, &file.hash_dim, features.hash_dim);
    features
}

#[derive(Args)]
struct TrainArgs {
    /// Fully labeled training corpus.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    schema: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    hash_dim: Option<usize>,
    #[arg(long)]
    model_out: PathBuf,
}

fn resolve_train_config(
    seed: u64,
    epochs: &Option<usize>,
    learning_rate: &Option<f64>,
    batch_size: &Option<usize>,
    l2: &Option<f64>,
    file: &RunConfig,
) -> TrainConfig {
    let d = TrainConfig::default();
    TrainConfig {
        learning_rate: pick(learning_rate, &file.learning_rate, d.learning_rate),
        epochs: pick(epochs, &file.epochs, d.epochs),
        batch_size: pick(batch_size, &file.batch_size, d.batch_size),
        l2: pick(l2, &file.l2, d.l2),
        seed,
    }
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let file = RunConfig::load(args.config.as_deref())?;
    let schema = load_schema(&pick(&args.schema, &file.schema, "original".into()))?;
    let seed = require(&args.seed, &file.seed, "seed")?;
    let train_config = resolve_train_config(
        seed,
        &args.epochs,
        &args.learning_rate,
        &args.batch_size,
        &args.l2,
        &file,
    );
    let features = resolve_features(&args.window, &args.hash_dim, &file);
    let data = read_corpus(&args.input, &schema)?;
    let model = fit(&data, &features, &train_config, None)?;
    model.save(&args.model_out)?;
    let manifest_path = sibling_manifest(&args.model_out);
    write_manifest(
        &manifest_path,
        "train",
        &(&train_config, &features),
        seed,
        serde_json::json!({
            "sentences": data.len(),
            "schema": schema.name(),
            "model": args.model_out.display().to_string(),
        }),
    )?;
    println!("trained on {} sentences -> {}", data.len(), args.model_out.display());
    Ok(())
}

fn sibling_manifest(artifact: &Path) -> PathBuf {
    let stem = artifact
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("artifact");
    artifact.with_file_name(format!("{stem}.manifest.json"))
}

#[derive(Args)]
struct SslTrainArgs {
    #[arg(long)]
    labeled: PathBuf,
    #[arg(long)]
    unlabeled: PathBuf,
    #[arg(long)]
    validation: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    schema: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// confidence | adaptive | judge
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    hash_dim: Option<usize>,
    /// Judge endpoint URL (judge strategy only).
    #[arg(long)]
    endpoint: Option<String>,
    /// Judge model name (judge strategy only).
    #[arg(long)]
    judge_model: Option<String>,
    #[arg(long)]
    judge_cache: Option<PathBuf>,
    #[arg(long)]
    model_out: PathBuf,
    #[arg(long)]
    history_out: PathBuf,
}

fn cmd_ssl_train(args: &SslTrainArgs) -> Result<()> {
    let file = RunConfig::load(args.config.as_deref())?;
    let schema = load_schema(&pick(&args.schema, &file.schema, "original".into()))?;
    let seed = require(&args.seed, &file.seed, "seed")?;
    let strategy_name = pick(&args.strategy, &file.strategy, "confidence".into());
    let strategy = match strategy_name.as_str() {
        "confidence" => QualityStrategy::ConfidenceMask {
            theta: pick(&args.theta, &file.theta, 0.9),
        },
        "adaptive" => QualityStrategy::ClassAdaptive {
            sentence_scoped: false,
        },
        "judge" => QualityStrategy::ExternalJudge {
            scope: JudgeScope::SpanRepresentatives,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown strategy '{other}' (confidence|adaptive|judge)"
            )))
        }
    };

    let ssl_config = SslConfig {
        max_iterations: pick(&args.max_iters, &file.max_iters, 10),
        patience: pick(&args.patience, &file.patience, 2),
        alpha: pick(&args.alpha, &file.alpha, 1.0),
        alpha_ramp_iterations: 0,
        strategy: strategy.clone(),
        features: resolve_features(&args.window, &args.hash_dim, &file),
        retrain: resolve_train_config(
            seed,
            &args.epochs,
            &args.learning_rate,
            &args.batch_size,
            &args.l2,
            &file,
        ),
        retrain_from_scratch: false,
        seed,
    };

    let scenario = ScenarioSplit {
        train_labeled: read_corpus(&args.labeled, &schema)?,
        train_unlabeled: read_corpus(&args.unlabeled, &schema)?,
        validation: read_corpus(&args.validation, &schema)?,
        test: Dataset::empty(schema.clone()),
        config: ScenarioConfig::new(1.0, seed, Augmentation::InDomain),
    };

    let mut session = match &strategy {
        QualityStrategy::ExternalJudge { .. } => {
            let endpoint = require(&args.endpoint, &file.endpoint, "endpoint")?;
            let model_name = require(&args.judge_model, &file.model, "judge model")?;
            let cache = match args.judge_cache.clone().or_else(|| file.judge_cache.clone()) {
                Some(path) => JudgeCache::open(&path)?,
                None => JudgeCache::in_memory(),
            };
            let client = JudgeClient::over_http(JudgeConfig::new(endpoint, model_name))?;
            Some(JudgeSession::new(client, cache))
        }
        _ => None,
    };

    let (model, history) = ssl_train(&scenario, &ssl_config, session.as_mut())?;
    model.save(&args.model_out)?;
    std::fs::write(&args.history_out, history.to_json()?)?;
    write_manifest(
        &sibling_manifest(&args.model_out),
        "ssl-train",
        &ssl_config,
        seed,
        serde_json::json!({
            "iterations": history.records.len(),
            "best_iteration": history.best_iteration,
            "best_validation_f1": history.records[history.best_iteration].validation_macro_f1,
            "schema": schema.name(),
        }),
    )?;
    println!(
        "best iteration {} (validation F1 {:.4}) -> {}",
        history.best_iteration,
        history.records[history.best_iteration].validation_macro_f1,
        args.model_out.display()
    );
    Ok(())
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model_file: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let model = TokenClassifierModel::load(&args.model_file)?;
    let data = read_corpus(&args.input, model.schema())?;
    let schema = model.schema().clone();
    let mut sentences = Vec::with_capacity(data.len());
    for sentence in &data.sentences {
        let tags = repair_bio2(&decode(&model.forward(&sentence.texts())?), &schema);
        let rows = sentence
            .texts()
            .iter()
            .map(|t| t.to_string())
            .zip(tags)
            .collect();
        sentences.push(crate::corpus::Sentence::labeled(
            rows,
            sentence.doc_id.clone(),
            sentence.domain,
            &schema,
        )?);
    }
    let tagged = Dataset::new(schema, sentences);
    write_corpus(&args.out, &tagged)?;
    println!("tagged {} sentences -> {}", tagged.len(), args.out.display());
    Ok(())
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    schema: Option<String>,
    /// strict | partial
    #[arg(long)]
    metric: Option<String>,
    /// Bootstrap replicate count; 0 skips the interval.
    #[arg(long)]
    bootstrap_n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    report_out: Option<PathBuf>,
}

fn load_predictions(path: &Path, gold: &Dataset) -> Result<Vec<Vec<crate::schema::TagId>>> {
    let pred_data = read_corpus(path, &gold.schema)?;
    if pred_data.len() != gold.len() {
        return Err(Error::Data(format!(
            "{} predicted sentences for {} gold sentences",
            pred_data.len(),
            gold.len()
        )));
    }
    pred_data
        .sentences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.gold_tags().ok_or_else(|| {
                Error::Data(format!("prediction sentence {i} has unlabeled tokens"))
            })
        })
        .collect()
}

fn print_report(report: &ScoreReport) {
    println!(
        "{:<22} {:>6} {:>9} {:>9} {:>9}",
        "type", "gold", "precision", "recall", "f1"
    );
    for row in &report.per_type {
        println!(
            "{:<22} {:>6} {:>9.4} {:>9.4} {:>9.4}",
            row.entity_type, row.gold_support, row.precision, row.recall, row.f1
        );
    }
    println!(
        "{:<22} {:>6} {:>9.4} {:>9.4} {:>9.4}",
        "macro", "", report.macro_precision, report.macro_recall, report.macro_f1
    );
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let file = RunConfig::load(args.config.as_deref())?;
    let schema = load_schema(&pick(&args.schema, &file.schema, "original".into()))?;
    let metric = parse_metric(&pick(&args.metric, &file.metric, "strict".into()))?;
    let gold = read_corpus(&args.gold, &schema)?;
    let pred = load_predictions(&args.pred, &gold)?;
    let report = match metric {
        Metric::Strict => crate::eval::strict_score(&gold, &pred)?,
        Metric::Partial => crate::eval::partial_score(&gold, &pred)?,
    };
    print_report(&report);

    let n_replicates = pick(&args.bootstrap_n, &file.bootstrap_n, 0);
    let interval = if n_replicates > 0 {
        let seed = pick(&args.seed, &file.seed, 0);
        let b = bootstrap(&gold, &pred, metric, n_replicates, seed)?;
        println!(
            "macro F1 {:.4} [{:.4}, {:.4}] ({} replicates, seed {})",
            b.point_estimate, b.lower, b.upper, b.n_replicates, b.seed
        );
        Some(b)
    } else {
        None
    };

    if let Some(out) = &args.report_out {
        let payload = serde_json::json!({ "report": report, "bootstrap": interval });
        std::fs::write(out, serde_json::to_string_pretty(&payload)?)?;
    }
    Ok(())
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred_a: PathBuf,
    #[arg(long)]
    pred_b: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    schema: Option<String>,
    #[arg(long)]
    metric: Option<String>,
    #[arg(long, default_value_t = 999)]
    permutations: usize,
    #[arg(long)]
    seed: Option<u64>,
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let file = RunConfig::load(args.config.as_deref())?;
    let schema = load_schema(&pick(&args.schema, &file.schema, "original".into()))?;
    let metric = parse_metric(&pick(&args.metric, &file.metric, "strict".into()))?;
    let seed = pick(&args.seed, &file.seed, 0);
    let gold = read_corpus(&args.gold, &schema)?;
    let pred_a = load_predictions(&args.pred_a, &gold)?;
    let pred_b = load_predictions(&args.pred_b, &gold)?;
    let p = paired_significance(&gold, &pred_a, &pred_b, metric, args.permutations, seed)?;
    println!("p = {p:.6} ({} permutations, seed {seed})", args.permutations);
    Ok(())
}

#[derive(Args)]
struct MapSchemeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Source scheme: original | revised | coarse.
    #[arg(long)]
    from: String,
    /// Target scheme: revised | coarse.
    #[arg(long)]
    to: String,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_map_scheme(args: &MapSchemeArgs) -> Result<()> {
    let from = load_schema(&args.from)?;
    let to = load_schema(&args.to)?;
    let mapping = match (from.name(), to.name()) {
        ("original", "revised") => original_to_revised_mapping(),
        (_, "coarse") => coarse_mapping(&from),
        (f, t) => {
            return Err(Error::Config(format!(
                "no mapping from '{f}' to '{t}' (original->revised, any->coarse)"
            )))
        }
    };
    let data = read_corpus(&args.input, &from)?;
    let mapped = map_labels(&data, &from, &to, &mapping)?;
    write_corpus(&args.out, &mapped)?;
    println!(
        "mapped {} sentences {} -> {}",
        mapped.len(),
        from.name(),
        to.name()
    );
    Ok(())
}

#[derive(Args)]
struct JudgeAuditArgs {
    #[arg(long)]
    judge_cache: PathBuf,
}

fn cmd_judge_audit(args: &JudgeAuditArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.judge_cache)?;
    let mut by_verdict: BTreeMap<String, usize> = BTreeMap::new();
    let mut by_type: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: CacheRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: format!("bad cache record: {e}"),
        })?;
        *by_verdict
            .entry(format!("{:?}", record.verdict).to_lowercase())
            .or_insert(0) += 1;
        *by_type.entry(record.entity_type).or_insert(0) += 1;
        total += 1;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "entries": total,
            "by_verdict": by_verdict,
            "by_entity_type": by_type,
        }))?
    );
    Ok(())
}

/// Parses argv and runs one subcommand. Returns the process exit status:
/// 0 on success, 1 on data/config errors, 2 on usage errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match &cli.command {
        Command::Scenario(a) => cmd_scenario(a),
        Command::Train(a) => cmd_train(a),
        Command::SslTrain(a) => cmd_ssl_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Compare(a) => cmd_compare(a),
        Command::MapScheme(a) => cmd_map_scheme(a),
        Command::JudgeAudit(a) => cmd_judge_audit(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
