use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::Hyperparameters;
use super::evaluate::{evaluate, Evaluation, GreedyPolicy};
use super::problem::Problem;
use super::report::{RunReport, TradeoffPoint};
use super::train::{train, TrainOutcome};
use crate::data::SplitKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub lambda: f64,
    pub seed: u64,
    pub report: RunReport,
    pub validation: Evaluation,
    pub test: Option<Evaluation>,
    /// Directory holding the run's checkpoint and report, when saved.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub lambda: f64,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub runs: Vec<RunSummary>,
    pub failures: Vec<RunFailure>,
}

impl SweepOutcome {
    /// Validation and test points of every successful run.
    pub fn points(&self) -> Vec<TradeoffPoint> {
        let mut points = Vec::new();
        for r in &self.runs {
            points.push(TradeoffPoint::from_evaluation(
                r.lambda,
                r.seed,
                SplitKind::Validation,
                &r.validation,
            ));
            if let Some(t) = &r.test {
                points.push(TradeoffPoint::from_evaluation(
                    r.lambda,
                    r.seed,
                    SplitKind::Test,
                    t,
                ));
            }
        }
        points
    }
}

/// Removes repeated values, keeping first occurrences in order.
pub fn dedup_lambdas(lambdas: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        if out.contains(&l) {
            log::warn!("lambda {l} listed more than once; running it once");
        } else {
            out.push(l);
        }
    }
    out
}

pub fn run_dir_name(lambda: f64, seed: u64) -> String {
    format!("lambda-{lambda}-seed-{seed}")
}

fn save_run(dir: &Path, outcome: &TrainOutcome) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    outcome.checkpoint.save(&dir.join("checkpoint.bin"))?;
    outcome.report.save(&dir.join("report.json"))
}

fn run_one(
    problem: &Problem,
    base: &Hyperparameters,
    lambda: f64,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<RunSummary> {
    let mut hp = *base;
    hp.training.lambda = lambda;
    let outcome = train(problem, &hp, seed)?;
    let dir = out_dir.map(|d| d.join(run_dir_name(lambda, seed)));
    if let Some(d) = &dir {
        save_run(d, &outcome)?;
    }
    if let Some(msg) = &outcome.report.diverged {
        return Err(Error::Divergence(msg.clone()));
    }
    let task = problem.task(lambda, hp.training.use_hpc)?;
    let theta = &outcome.checkpoint.online;
    let test = if problem.splits.test.is_empty() {
        None
    } else {
        Some(evaluate(
            &mut GreedyPolicy::new(theta),
            &task,
            &problem.splits.test,
        )?)
    };
    Ok(RunSummary {
        lambda,
        seed,
        validation: outcome.report.validation.clone(),
        report: outcome.report,
        test,
        dir,
    })
}

/// Trains one run per `(lambda, seed)` pair in parallel. Each run is
/// deterministic given its seed; failed runs are recorded, not fatal.
pub fn sweep(
    problem: &Problem,
    base: &Hyperparameters,
    lambdas: &[f64],
    seeds: &[u64],
    out_dir: Option<&Path>,
) -> Result<SweepOutcome> {
    let lambdas = dedup_lambdas(lambdas);
    if lambdas.is_empty() || seeds.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one lambda and one seed".into(),
        ));
    }
    let jobs: Vec<(f64, u64)> = lambdas
        .iter()
        .flat_map(|&l| seeds.iter().map(move |&s| (l, s)))
        .collect();
    let results: Vec<(f64, u64, Result<RunSummary>)> = jobs
        .par_iter()
        .map(|&(l, s)| (l, s, run_one(problem, base, l, s, out_dir)))
        .collect();
    let mut outcome = SweepOutcome::default();
    for (lambda, seed, r) in results {
        match r {
            Ok(run) => outcome.runs.push(run),
            Err(e) => {
                log::error!("run lambda={lambda} seed={seed} failed: {e}");
                outcome.failures.push(RunFailure {
                    lambda,
                    seed,
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(outcome)
}
