//! `cwcf` command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 training
//! divergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cwcf::data::{CostSpec, NormStats, SplitKind};
use cwcf::harness::{
    self, convex_hull_select, evaluate, load_tradeoff_csv, save_tradeoff_csv, Config, GreedyPolicy,
    Hyperparameters, Problem, RunReport, TradeoffPoint,
};
use cwcf::nn::Checkpoint;
use cwcf::{Error, Result};

#[derive(Parser)]
#[command(name = "cwcf", version, about = "Classification with costly features")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write its checkpoint and report.
    Train(TrainArgs),
    /// Run classifier-head pretraining only and write the checkpoint.
    Pretrain(TrainArgs),
    /// Evaluate a checkpoint greedily on one split.
    Evaluate(EvaluateArgs),
    /// Train over a grid of cost weights and seeds.
    Sweep(SweepArgs),
    /// Select the convex-hull runs from a trade-off CSV.
    Hull(HullArgs),
    /// Summarize a run report.
    Report(ReportArgs),
}

#[derive(Args, Clone, Default)]
struct DataArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Dataset CSV with a header row.
    #[arg(long)]
    data: Option<PathBuf>,

    /// Name of the label column.
    #[arg(long)]
    label_column: Option<String>,

    /// Feature costs: `uniform`, `random[:SEED]` or a `name,cost` file.
    #[arg(long)]
    costs: Option<String>,

    /// Per-sample predictions of an external classifier; enables its action.
    #[arg(long)]
    hpc_predictions: Option<PathBuf>,

    /// Seed of the stratified train/validation/test split.
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Cost weight.
    #[arg(long)]
    lambda: Option<f64>,

    /// Master seed; drawn from system entropy when absent.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, default_value = "cwcf-run")]
    out_dir: PathBuf,

    /// Override the maximum number of training epochs.
    #[arg(long)]
    max_epochs: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Checkpoint to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,

    /// Split to evaluate on.
    #[arg(long, default_value = "test", value_parser = parse_split)]
    split: SplitKind,

    /// Cost weight used for rewards; defaults to the checkpoint's.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Comma-separated cost weights.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,

    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,

    #[arg(long, default_value = "cwcf-sweep")]
    out_dir: PathBuf,

    #[arg(long)]
    max_epochs: Option<usize>,
}

#[derive(Args)]
struct HullArgs {
    /// Trade-off CSV written by `sweep`.
    #[arg(long)]
    points: PathBuf,

    /// Where to write the selected points; printed to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// `report.json` of a run.
    #[arg(long)]
    report: PathBuf,

    /// Print the report as JSON instead of a text summary.
    #[arg(long)]
    json: bool,
}

fn parse_split(s: &str) -> std::result::Result<SplitKind, String> {
    match s {
        "train" => Ok(SplitKind::Train),
        "validation" => Ok(SplitKind::Validation),
        "test" => Ok(SplitKind::Test),
        _ => Err(format!(
            "unknown split {s:?}; expected train, validation or test"
        )),
    }
}

fn parse_costs(s: &str) -> CostSpec {
    match s {
        "uniform" => CostSpec::Uniform,
        "random" => CostSpec::Random { seed: 0 },
        _ => match s.strip_prefix("random:").map(str::parse) {
            Some(Ok(seed)) => CostSpec::Random { seed },
            _ => CostSpec::Explicit { path: s.into() },
        },
    }
}

fn load_config(args: &DataArgs) -> Result<Config> {
    let mut cfg = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let d = &mut cfg.data;
    if let Some(p) = &args.data {
        d.path = Some(p.clone());
    }
    if let Some(l) = &args.label_column {
        d.label_column = l.clone();
    }
    if let Some(c) = &args.costs {
        d.costs = parse_costs(c);
    }
    if let Some(p) = &args.hpc_predictions {
        d.hpc_predictions = Some(p.clone());
        cfg.training.use_hpc = true;
    }
    if let Some(s) = args.split_seed {
        d.split_seed = s;
    }
    Ok(cfg)
}

fn hyperparameters(
    cfg: &Config,
    lambda: Option<f64>,
    max_epochs: Option<usize>,
) -> Hyperparameters {
    let mut hp = cfg.hyperparameters();
    if let Some(l) = lambda {
        hp.training.lambda = l;
    }
    if let Some(m) = max_epochs {
        hp.training.max_epochs = m;
    }
    hp
}

fn resolve_seed(flag: Option<u64>, cfg: &Config) -> u64 {
    flag.or(cfg.seed).unwrap_or_else(|| {
        let s = rand::random();
        log::info!("using seed {s}");
        s
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.into(),
        source: e,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn run_train(args: TrainArgs) -> Result<()> {
    let cfg = load_config(&args.data)?;
    let hp = hyperparameters(&cfg, args.lambda, args.max_epochs);
    let seed = resolve_seed(args.seed, &cfg);
    let problem = Problem::load(&cfg.data, None)?;
    let out = harness::train(&problem, &hp, seed)?;
    create_dir(&args.out_dir)?;
    out.checkpoint.save(&args.out_dir.join("checkpoint.bin"))?;
    out.report.save(&args.out_dir.join("report.json"))?;
    let v = &out.report.validation;
    println!(
        "seed {seed} lambda {} epochs {} validation accuracy {:.4} mean cost {:.4}",
        hp.training.lambda,
        out.report.epochs.len().saturating_sub(1),
        v.accuracy,
        v.mean_cost
    );
    match &out.report.diverged {
        Some(msg) => Err(Error::Divergence(msg.clone())),
        None => Ok(()),
    }
}

fn run_pretrain(args: TrainArgs) -> Result<()> {
    let cfg = load_config(&args.data)?;
    let hp = hyperparameters(&cfg, args.lambda, args.max_epochs);
    let seed = resolve_seed(args.seed, &cfg);
    let problem = Problem::load(&cfg.data, None)?;
    let (checkpoint, report) = harness::pretrain(&problem, &hp, seed)?;
    create_dir(&args.out_dir)?;
    checkpoint.save(&args.out_dir.join("checkpoint.bin"))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&args.out_dir.join("pretrain.json"), &json)?;
    println!(
        "seed {seed} held-out mse {:.5} -> {:.5}",
        report.heldout_mse_before, report.heldout_mse_after
    );
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let cfg = load_config(&args.data)?;
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let meta = &checkpoint.meta;
    let norm = meta
        .normalization
        .clone()
        .map(|(mean, std)| NormStats { mean, std });
    let problem = Problem::load(&cfg.data, norm)?;
    let ds = &problem.dataset;
    if ds.n_features() != meta.n_features || ds.class_count() != meta.classes {
        return Err(Error::Checkpoint(format!(
            "checkpoint expects {} features and {} classes, dataset has {} and {}",
            meta.n_features,
            meta.classes,
            ds.n_features(),
            ds.class_count()
        )));
    }
    let lambda = args.lambda.unwrap_or(meta.lambda);
    let task = problem.task(lambda, meta.hpc)?;
    let e = evaluate(
        &mut GreedyPolicy::new(&checkpoint.online),
        &task,
        problem.splits.get(args.split),
    )?;
    println!(
        "{}",
        serde_json::to_string_pretty(&e).expect("evaluation serializes")
    );
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let cfg = load_config(&args.data)?;
    let hp = hyperparameters(&cfg, None, args.max_epochs);
    let lambdas = args.lambdas.unwrap_or_else(|| cfg.sweep.lambdas.clone());
    let seeds = args.seeds.unwrap_or_else(|| cfg.sweep.seeds.clone());
    let problem = Problem::load(&cfg.data, None)?;
    create_dir(&args.out_dir)?;
    let out = harness::sweep(&problem, &hp, &lambdas, &seeds, Some(&args.out_dir))?;
    let points = out.points();
    save_tradeoff_csv(&args.out_dir.join("tradeoff.csv"), &points)?;
    for r in &out.runs {
        println!(
            "lambda {} seed {} validation accuracy {:.4} mean cost {:.4}",
            r.lambda, r.seed, r.validation.accuracy, r.validation.mean_cost
        );
    }
    for f in &out.failures {
        log::error!("lambda {} seed {} failed: {}", f.lambda, f.seed, f.error);
    }
    if out.runs.is_empty() {
        return Err(match out.failures.first() {
            Some(f) if f.error.contains("diverged") => Error::Divergence(f.error.clone()),
            Some(f) => Error::Config(f.error.clone()),
            None => Error::Config("sweep produced no runs".into()),
        });
    }
    Ok(())
}

/// Validation points on the hull, each followed by its test point if present.
fn hull_rows(points: &[TradeoffPoint]) -> Vec<TradeoffPoint> {
    let validation: Vec<TradeoffPoint> = points
        .iter()
        .filter(|p| p.split == SplitKind::Validation)
        .cloned()
        .collect();
    let mut rows = Vec::new();
    for v in convex_hull_select(&validation) {
        let test = points
            .iter()
            .find(|p| p.split == SplitKind::Test && p.lambda == v.lambda && p.seed == v.seed)
            .cloned();
        rows.push(v);
        rows.extend(test);
    }
    rows
}

fn run_hull(args: HullArgs) -> Result<()> {
    let points = load_tradeoff_csv(&args.points)?;
    if !points.iter().any(|p| p.split == SplitKind::Validation) {
        return Err(Error::Data(format!(
            "{} has no validation points",
            args.points.display()
        )));
    }
    let rows = hull_rows(&points);
    match &args.out {
        Some(path) => save_tradeoff_csv(path, &rows)?,
        None => {
            let mut buf = Vec::new();
            harness::write_tradeoff_csv(&mut buf, &rows)?;
            print!("{}", String::from_utf8_lossy(&buf));
        }
    }
    Ok(())
}

fn print_summary(r: &RunReport) {
    println!("seed {} lambda {}", r.seed, r.lambda);
    println!("features {}", r.feature_names.join(", "));
    println!("classes {}", r.class_names.join(", "));
    if let Some(p) = &r.pretrain {
        println!(
            "pretraining: {} states, held-out mse {:.5} -> {:.5}",
            p.states_used, p.heldout_mse_before, p.heldout_mse_after
        );
    }
    println!(
        "{:>5} {:>9} {:>10} {:>10} {:>8} {:>10} {:>10} {:>9}",
        "epoch", "steps", "loss", "lr", "epsilon", "train r", "val r", "val acc"
    );
    for e in &r.epochs {
        let loss = e
            .mean_loss
            .map_or_else(|| "-".into(), |l| format!("{l:.5}"));
        println!(
            "{:>5} {:>9} {:>10} {:>10.2e} {:>8.3} {:>10.4} {:>10.4} {:>9.4}",
            e.epoch,
            e.steps,
            loss,
            e.learning_rate,
            e.epsilon,
            e.train_reward,
            e.validation_reward,
            e.validation_accuracy
        );
    }
    println!(
        "best epoch {}{}",
        r.best_epoch,
        if r.stopped_early {
            " (stopped early)"
        } else {
            ""
        }
    );
    if let Some(d) = &r.diverged {
        println!("diverged: {d}");
    }
    let v = &r.validation;
    println!(
        "validation: accuracy {:.4}, mean cost {:.4}, objective {:.4}, external classifier {:.3}",
        v.accuracy, v.mean_cost, v.objective, v.hpc_fraction
    );
    let hist: Vec<String> = v.feature_histogram.iter().map(|c| c.to_string()).collect();
    println!("features acquired histogram: {}", hist.join(" "));
}

fn run_report(args: ReportArgs) -> Result<()> {
    let report = RunReport::load(&args.report)?;
    if args.json {
        println!("{}", report.to_json());
    } else {
        print_summary(&report);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Train(a) => run_train(a),
        Command::Pretrain(a) => run_pretrain(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Hull(a) => run_hull(a),
        Command::Report(a) => run_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
