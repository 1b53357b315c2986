//! Command-line driver: training stages, evaluation, benchmarking, oracle
//! checks and MovieLens conversion.
//!
//! Exit codes: `0` success, `1` validation or oracle failure, `2` usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dagfm_core::checkpoint::{load_checkpoint, save_checkpoint};
use dagfm_core::config::{RunConfig, TeacherKind};
use dagfm_core::data::movielens::{convert_movielens, ConvertStats};
use dagfm_core::data::{build_vocab, load_instances, split_dataset, DatasetSplit, FieldSchema};
use dagfm_core::distill::{distill_student, finetune_student, train_teacher, TrainReport};
use dagfm_core::interactions::{DagfmSpec, InteractionFn};
use dagfm_core::metrics::{
    efficiency, evaluate_sharded, EvalMetrics, LatencyStats, ParamCounts, DEFAULT_BENCH_ITERATIONS,
};
use dagfm_core::oracle::assert_dp_equivalence;
use dagfm_core::{Error, Model, Result};

/// Environment variable capping the number of evaluation workers.
pub const THREADS_ENV: &str = "DAGFM_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "dagfm",
    version,
    about = "DAG factorization machines with knowledge distillation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a teacher network on the CTR loss.
    TrainTeacher(TeacherArgs),
    /// Distill a teacher checkpoint into a student.
    Distill(DistillArgs),
    /// Fine-tune a distilled student on the CTR loss.
    Finetune(FinetuneArgs),
    /// Evaluate a checkpoint on labelled data.
    Eval(EvalArgs),
    /// Measure single-instance latency of a checkpoint.
    Bench(BenchArgs),
    /// Compare DAG propagation with brute-force interaction sums.
    OracleCheck(OracleArgs),
    /// Convert a MovieLens-1M directory into a labelled CSV.
    ConvertMovielens(ConvertArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Run configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Labelled CSV file.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Embedding size.
    #[arg(long)]
    d: Option<usize>,
}

#[derive(Debug, Args)]
struct TeacherArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    teacher: Option<TeacherKind>,
    /// Teacher depth.
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Debug, Args)]
struct DistillArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Teacher checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Student interaction function.
    #[arg(long = "fn")]
    function: Option<InteractionFn>,
    /// Student propagation layers.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Debug, Args)]
struct FinetuneArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Distilled student checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BENCH_ITERATIONS)]
    iterations: usize,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Optional labelled CSV for AUC and logloss.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BENCH_ITERATIONS)]
    iterations: usize,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    depth: usize,
    /// Interaction function; all of them when omitted.
    #[arg(long = "fn")]
    function: Option<InteractionFn>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    /// Directory holding ratings.dat, users.dat and movies.dat.
    #[arg(long)]
    data: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Keep neutral (3-star) ratings as negatives instead of dropping them.
    #[arg(long)]
    keep_neutral: bool,
}

/// Outcome of a command that did not hit an error.
enum Status {
    Ok,
    Failed,
}

#[derive(Serialize)]
struct StageSummary<'a> {
    stage: &'a str,
    checkpoint: String,
    report: String,
    best_epoch: usize,
    best_val_auc: f64,
    test: EvalMetrics,
}

#[derive(Serialize)]
struct MetricsReport {
    auc: Option<f64>,
    logloss: Option<f64>,
    params: ParamCounts,
    flops: u64,
    latency_us: Option<LatencyStats>,
}

#[derive(Serialize)]
struct ConvertSummary<'a> {
    out: String,
    #[serde(flatten)]
    stats: &'a ConvertStats,
}

/// Run with process stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_to(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

/// Run with explicit output streams and return the exit code.
pub fn run_to<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command, out) {
        Ok(Status::Ok) => EXIT_OK,
        Ok(Status::Failed) => EXIT_FAILURE,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<Status> {
    match command {
        Command::TrainTeacher(a) => cmd_train_teacher(&a, out),
        Command::Distill(a) => cmd_distill(&a, out),
        Command::Finetune(a) => cmd_finetune(&a, out),
        Command::Eval(a) => cmd_eval(&a.checkpoint, Some(&a.data), a.iterations, out),
        Command::Bench(a) => cmd_eval(&a.checkpoint, a.data.as_deref(), a.iterations, out),
        Command::OracleCheck(a) => cmd_oracle(&a, out),
        Command::ConvertMovielens(a) => cmd_convert(&a, out),
    }
}

fn load_config(common: &CommonArgs, adjust: impl FnOnce(&mut RunConfig)) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(d) = common.d {
        cfg.embedding_dim = d;
    }
    if let Some(data) = &common.data {
        cfg.data = Some(data.clone());
    }
    if let Some(dir) = &common.out {
        cfg.out = Some(dir.clone());
    }
    adjust(&mut cfg);
    cfg.apply_stage_seeds();
    cfg.validate()?;
    Ok(cfg)
}

fn existing(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::Config(format!("{} does not exist", path.display())))
    }
}

fn data_path(cfg: &RunConfig) -> Result<&Path> {
    let path = cfg
        .data
        .as_deref()
        .ok_or_else(|| Error::Config("no data file: pass --data or set `data` in the config".into()))?;
    existing(path)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn load_split(cfg: &RunConfig, schema: &FieldSchema) -> Result<DatasetSplit> {
    let instances = load_instances(data_path(cfg)?, schema)?;
    split_dataset(instances, cfg.split, cfg.seed)
}

/// Evaluation workers: the requested count, capped by `DAGFM_THREADS`.
fn eval_threads(requested: usize) -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let cap: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
            Ok(requested.clamp(1, cap))
        }
        Err(_) => Ok(requested.max(1)),
    }
}

fn checkpoint_schema(path: &Path) -> Result<(Model, FieldSchema)> {
    let ckpt = load_checkpoint(existing(path)?)?;
    let schema = ckpt
        .schema
        .ok_or_else(|| Error::Config(format!("checkpoint {} carries no schema", path.display())))?;
    Ok((ckpt.model, schema))
}

/// What a training stage leaves behind.
struct StageResult<'a> {
    stage: &'a str,
    file_stem: &'a str,
    model: &'a Model,
    schema: &'a FieldSchema,
    report: &'a TrainReport,
    split: &'a DatasetSplit,
}

fn finish_stage(cfg: &RunConfig, result: StageResult, out: &mut dyn Write) -> Result<Status> {
    let StageResult {
        stage,
        file_stem,
        model,
        schema,
        report,
        split,
    } = result;
    let dir = out_dir(cfg)?;
    let ckpt = dir.join(format!("{file_stem}.ckpt"));
    let jsonl = dir.join(format!("{stage}.jsonl"));
    save_checkpoint(&ckpt, model, Some(schema))?;
    std::fs::write(&jsonl, report.to_jsonl())?;
    let summary = StageSummary {
        stage,
        checkpoint: ckpt.display().to_string(),
        report: jsonl.display().to_string(),
        best_epoch: report.best_epoch,
        best_val_auc: report.best_val_auc,
        test: evaluate_sharded(model, &split.test, eval_threads(cfg.threads)?)?,
    };
    writeln!(out, "{}", serde_json::to_string(&summary)?)?;
    Ok(Status::Ok)
}

fn cmd_train_teacher(a: &TeacherArgs, out: &mut dyn Write) -> Result<Status> {
    let cfg = load_config(&a.common, |cfg| {
        if let Some(kind) = a.teacher {
            cfg.teacher.model = kind;
        }
        if let Some(depth) = a.depth {
            cfg.teacher.depth = depth;
        }
    })?;
    let schema = match &cfg.schema {
        Some(path) => FieldSchema::load(existing(path)?)?,
        None => build_vocab(data_path(&cfg)?, cfg.min_freq)?,
    };
    let split = load_split(&cfg, &schema)?;
    let mut teacher = Model::new(
        cfg.teacher_spec(schema.num_fields()),
        schema.field_rows(),
        cfg.teacher_init_seed(),
    )?;
    let report = train_teacher(&mut teacher, &split, &cfg.teacher.stage)?;
    finish_stage(
        &cfg,
        StageResult {
            stage: "teacher",
            file_stem: "teacher",
            model: &teacher,
            schema: &schema,
            report: &report,
            split: &split,
        },
        out,
    )
}

fn cmd_distill(a: &DistillArgs, out: &mut dyn Write) -> Result<Status> {
    let cfg = load_config(&a.common, |cfg| {
        if let Some(f) = a.function {
            cfg.student.function = f;
        }
        if let Some(depth) = a.depth {
            cfg.student.layers = Some(depth);
        }
        if let Some(alpha) = a.alpha {
            cfg.plan.alpha = alpha;
        }
        if let Some(beta) = a.beta {
            cfg.plan.beta = beta;
        }
    })?;
    let (teacher, schema) = checkpoint_schema(&a.checkpoint)?;
    let split = load_split(&cfg, &schema)?;
    let mut student = Model::new(
        cfg.student_spec(schema.num_fields()),
        schema.field_rows(),
        cfg.student_init_seed(),
    )?;
    let report = distill_student(&teacher, &mut student, &split, &cfg.plan)?;
    finish_stage(
        &cfg,
        StageResult {
            stage: "distill",
            file_stem: "distilled",
            model: &student,
            schema: &schema,
            report: &report,
            split: &split,
        },
        out,
    )
}

fn cmd_finetune(a: &FinetuneArgs, out: &mut dyn Write) -> Result<Status> {
    let cfg = load_config(&a.common, |_| {})?;
    let (mut student, schema) = checkpoint_schema(&a.checkpoint)?;
    let split = load_split(&cfg, &schema)?;
    let report = finetune_student(&mut student, &split, &cfg.plan.finetune)?;
    finish_stage(
        &cfg,
        StageResult {
            stage: "finetune",
            file_stem: "finetuned",
            model: &student,
            schema: &schema,
            report: &report,
            split: &split,
        },
        out,
    )
}

fn cmd_eval(checkpoint: &Path, data: Option<&Path>, iterations: usize, out: &mut dyn Write) -> Result<Status> {
    let ckpt = load_checkpoint(existing(checkpoint)?)?;
    let metrics = match data {
        Some(path) => {
            let schema = ckpt
                .schema
                .as_ref()
                .ok_or_else(|| Error::Config(format!("checkpoint {} carries no schema", checkpoint.display())))?;
            let instances = load_instances(existing(path)?, schema)?;
            let threads = std::thread::available_parallelism().map_or(1, usize::from);
            Some(evaluate_sharded(&ckpt.model, &instances, eval_threads(threads)?)?)
        }
        None => None,
    };
    let eff = efficiency(&ckpt.model, Some(iterations))?;
    let report = MetricsReport {
        auc: metrics.map(|m| m.auc),
        logloss: metrics.map(|m| m.logloss),
        params: eff.params,
        flops: eff.flops,
        latency_us: eff.latency_us,
    };
    writeln!(out, "{}", serde_json::to_string(&report)?)?;
    Ok(Status::Ok)
}

fn cmd_oracle(a: &OracleArgs, out: &mut dyn Write) -> Result<Status> {
    let functions = match a.function {
        Some(f) => vec![f],
        None => InteractionFn::ALL.to_vec(),
    };
    let mut passed = true;
    for f in functions {
        let report = assert_dp_equivalence(&DagfmSpec::new(a.m, a.d, a.depth, f), a.seed)?;
        write!(out, "{}", report.table())?;
        passed &= report.passed();
    }
    Ok(if passed { Status::Ok } else { Status::Failed })
}

fn cmd_convert(a: &ConvertArgs, out: &mut dyn Write) -> Result<Status> {
    let stats = convert_movielens(existing(&a.data)?, &a.out, a.keep_neutral)?;
    let summary = ConvertSummary {
        out: a.out.display().to_string(),
        stats: &stats,
    };
    writeln!(out, "{}", serde_json::to_string(&summary)?)?;
    Ok(Status::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_to(std::iter::once("dagfm").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        let (code, _, err) = run_capture(&["oracle-check", "--bogus"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("Usage"), "{err}");
    }

    #[test]
    fn help_exits_cleanly() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("oracle-check"));
    }

    #[test]
    fn unknown_function_is_a_usage_error() {
        let (code, _, _) = run_capture(&["oracle-check", "--m", "3", "--d", "2", "--depth", "1", "--fn", "cubic"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn oracle_check_without_function_covers_all() {
        let (code, out, _) = run_capture(&["oracle-check", "--m", "3", "--d", "2", "--depth", "2"]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out.matches("PASS").count(), 4);
    }

    #[test]
    fn oracle_limits_are_validation_failures() {
        let (code, _, err) = run_capture(&["oracle-check", "--m", "9", "--d", "2", "--depth", "1"]);
        assert_eq!(code, EXIT_FAILURE);
        assert!(err.starts_with("error:"));
    }
}
