//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line on
//! stderr (bypassing output capture) and fails when its criterion fails.

mod common;

use std::collections::HashSet;
use std::io::Write;
use std::time::{Duration, Instant};

use cwcf::agent::{
    retrace_recursion, retrace_targets, transition_targets, truncated_importance, RetraceStep,
    TargetConfig, TargetMode,
};
use cwcf::data::{CostSchedule, HpcPredictions, SplitKind, Splits};
use cwcf::env::{Action, Environment, Observation, Task};
use cwcf::harness::{
    convex_hull_select, evaluate, hull_indices, sweep, train, Evaluation, FixedAction,
    GreedyPolicy, Problem, TradeoffPoint,
};
use cwcf::nn::{Architecture, Matrix};
use cwcf::replay::{Episode, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRADIENT_TOLERANCE: f64 = 1e-5;
const FD_STEP: f64 = 1e-6;
const DUELING_TOLERANCE: f64 = 1e-10;
const RETRACE_TOLERANCE: f64 = 1e-12;
const ENV_FUZZ_STEPS: usize = 1_000_000;
const TINY_ACCURACY: f64 = 0.99;
const TINY_FEATURES: (f64, f64) = (1.0, 1.2);
const IMMEDIATE_FRACTION: f64 = 0.99;
const HULL_SETS: usize = 1000;

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    let line = format!(
        "[{}] criterion {id:>2} {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{line}");
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn mean_features(e: &Evaluation) -> f64 {
    let total: usize = e
        .feature_histogram
        .iter()
        .enumerate()
        .map(|(k, c)| k * c)
        .sum();
    total as f64 / e.samples as f64
}

#[test]
fn criterion_01_gradient_matches_finite_differences() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=8);
        let hidden = [
            rng.random_range(1..=8),
            rng.random_range(1..=8),
            rng.random_range(1..=8),
        ];
        let actions = rng.random_range(2..=8);
        let arch = Architecture::new(2 * n, hidden, actions).unwrap();
        let mut net = common::random_network(arch, seed + 1000);
        let batch = 8;
        let obs = Matrix::from_vec(
            batch,
            2 * n,
            (0..batch * 2 * n)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap();
        let acts: Vec<usize> = (0..batch).map(|_| rng.random_range(0..actions)).collect();
        let targets: Vec<f64> = (0..batch).map(|_| rng.random_range(-1.0..0.0)).collect();
        let (_, grads) = net.loss_and_gradient(&obs, &acts, &targets).unwrap();
        for i in 0..net.as_slice().len() {
            let orig = net.as_slice()[i];
            net.as_mut_slice()[i] = orig + FD_STEP;
            let up = net.loss_and_gradient(&obs, &acts, &targets).unwrap().0;
            net.as_mut_slice()[i] = orig - FD_STEP;
            let down = net.loss_and_gradient(&obs, &acts, &targets).unwrap().0;
            net.as_mut_slice()[i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let analytic = grads.as_slice()[i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4);
            worst = worst.max(rel);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        "gradient correctness",
        worst < GRADIENT_TOLERANCE && within(elapsed, 30),
        format!(
            "max relative error {worst:.2e} (< {GRADIENT_TOLERANCE:e}) over 100 networks in {:.1}s (< 30s)",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_02_dueling_advantages_average_to_zero() {
    let arch = Architecture::new(10, [16, 16, 16], 9).unwrap();
    let net = common::random_network(arch, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let states = 10_000;
    let obs = Matrix::from_vec(
        states,
        10,
        (0..states * 10)
            .map(|_| rng.random_range(-3.0..3.0))
            .collect(),
    )
    .unwrap();
    let pass = net.forward_pass(&obs).unwrap();
    let mut worst: f64 = 0.0;
    for (r, &v) in pass.value.iter().enumerate() {
        let mean = pass.q.row(r).iter().map(|q| q - v).sum::<f64>() / arch.actions as f64;
        worst = worst.max(mean.abs());
    }
    verdict(
        2,
        "dueling identity",
        worst <= DUELING_TOLERANCE,
        format!("max |mean(Q - V)| {worst:.2e} (<= {DUELING_TOLERANCE:e}) over {states} states"),
    );
}

/// `q_t = Σ_{k≥t} (Π_{j=t+1..k} γ c_j) δ_k` with
/// `δ_k = r_k + γ E_k − γ c_{k+1} Q_{k+1}`.
fn retrace_direct(steps: &[RetraceStep], gamma: f64) -> Vec<f64> {
    let len = steps.len();
    let delta: Vec<f64> = steps
        .iter()
        .map(|s| s.reward + gamma * s.expected_next - gamma * s.trace * s.taken_next)
        .collect();
    (0..len)
        .map(|t| {
            let mut total = 0.0;
            let mut weight = 1.0;
            for k in t..len {
                if k > t {
                    weight *= gamma * steps[k - 1].trace;
                }
                total += weight * delta[k];
            }
            total
        })
        .collect()
}

#[test]
fn criterion_03_retrace_matches_direct_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let len = rng.random_range(1..=10);
        let gamma = if rng.random_bool(0.5) {
            1.0
        } else {
            rng.random_range(0.5..1.0)
        };
        let c = rng.random_range(0.0..=1.0);
        let steps: Vec<RetraceStep> = (0..len)
            .map(|t| {
                if t + 1 == len {
                    return RetraceStep {
                        reward: rng.random_range(-1.0..0.0),
                        expected_next: 0.0,
                        taken_next: 0.0,
                        trace: 0.0,
                    };
                }
                let pi = rng.random_range(0.0..=1.0);
                let mu = rng.random_range(0.01..=1.0);
                RetraceStep {
                    reward: rng.random_range(-1.0..0.0),
                    expected_next: rng.random_range(-2.0..1.0),
                    taken_next: rng.random_range(-2.0..1.0),
                    trace: c * truncated_importance(pi, mu).unwrap(),
                }
            })
            .collect();
        let fast = retrace_recursion(&steps, gamma, false);
        let slow = retrace_direct(&steps, gamma);
        for (a, b) in fast.iter().zip(&slow) {
            worst = worst.max((a - b).abs());
        }
    }

    // A one-step episode through the full network path.
    let arch = Architecture::new(4, [4, 4, 4], 5).unwrap();
    let theta = common::random_network(arch, 1);
    let phi = common::random_network(arch, 2);
    let mut length_one_exact = true;
    for k in 0..100 {
        let r = -(k as f64) / 37.0;
        let ep = Episode::new(vec![Transition {
            observation: Observation::empty(2),
            action: k % 2,
            reward: r,
            next_observation: None,
            behavior_prob: 0.5,
            legal_next: vec![],
        }])
        .unwrap();
        let cfg = TargetConfig {
            clip_at_zero: false,
            ..TargetConfig::default()
        };
        let q = retrace_targets(&[&ep], &theta, &phi, &cfg, 0.3).unwrap();
        length_one_exact &= q[0][0] == r;
    }
    verdict(
        3,
        "retrace oracle",
        worst <= RETRACE_TOLERANCE && length_one_exact,
        format!(
            "max deviation {worst:.2e} (<= {RETRACE_TOLERANCE:e}) over 1000 episodes; length-1 q = r exact: {length_one_exact}"
        ),
    );
}

#[test]
fn criterion_04_double_q_degenerates_with_shared_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut total = 0;
    let mut identical = 0;
    for seed in 0..20u64 {
        let n = rng.random_range(1..=6);
        let classes = rng.random_range(2..=4);
        let arch = Architecture::new(2 * n, [8, 8, 8], classes + n).unwrap();
        let theta = common::random_network(arch, seed);
        let phi = theta.clone();
        let transitions: Vec<Transition> = (0..64)
            .map(|_| {
                let mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                let terminal = rng.random_bool(0.2);
                let next_mask: Vec<bool> =
                    mask.iter().map(|m| *m || rng.random_bool(0.3)).collect();
                let mut legal = vec![true; classes + n];
                for (i, m) in next_mask.iter().enumerate() {
                    legal[classes + i] = !m;
                }
                Transition {
                    observation: Observation::masked(&x, mask),
                    action: rng.random_range(0..classes),
                    reward: rng.random_range(-1.0..0.0),
                    next_observation: (!terminal).then(|| Observation::masked(&x, next_mask)),
                    behavior_prob: 0.5,
                    legal_next: if terminal { vec![] } else { legal },
                }
            })
            .collect();
        let refs: Vec<&Transition> = transitions.iter().collect();
        for clip in [false, true] {
            let base = TargetConfig {
                clip_at_zero: clip,
                ..TargetConfig::default()
            };
            let one = transition_targets(
                &refs,
                &theta,
                &phi,
                &TargetConfig {
                    mode: TargetMode::OneStep,
                    ..base
                },
            )
            .unwrap();
            let dbl = transition_targets(
                &refs,
                &theta,
                &phi,
                &TargetConfig {
                    mode: TargetMode::DoubleQ,
                    ..base
                },
            )
            .unwrap();
            for (a, b) in one.iter().zip(&dbl) {
                total += 1;
                identical += usize::from(a.to_bits() == b.to_bits());
            }
        }
    }
    verdict(
        4,
        "double-Q degeneracy",
        identical == total,
        format!("{identical}/{total} targets bitwise identical"),
    );
}

#[test]
fn criterion_05_environment_invariants_under_random_play() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut steps = 0usize;
    let mut episodes = 0usize;
    let mut violations = Vec::new();
    while steps < ENV_FUZZ_STEPS {
        let n = rng.random_range(1..=12);
        let classes = rng.random_range(2..=5);
        let ds = common::blob_dataset(50, n, classes, rng.random());
        let costs = CostSchedule::random(n, rng.random());
        let preds: Vec<usize> = (0..ds.len())
            .map(|_| rng.random_range(0..classes))
            .collect();
        let hpc = HpcPredictions::new(preds, &ds).unwrap();
        let lambda = rng.random_range(0.0..=1.0);
        let mut task = Task::new(&ds, &costs, lambda).unwrap();
        if rng.random_bool(0.5) {
            task = task.with_hpc(&hpc);
        }
        let mut env = Environment::new(task).unwrap();
        let space = env.action_space();
        for _ in 0..200 {
            let sample = rng.random_range(0..ds.len());
            let mut obs = env.reset(sample).unwrap();
            let x = ds.sample(sample).to_vec();
            let mut seen = HashSet::new();
            let mut len = 0;
            loop {
                let legal = env.legal_actions().unwrap();
                let action = legal[rng.random_range(0..legal.len())];
                let res = env.step(action).unwrap();
                len += 1;
                steps += 1;
                if res.reward > 0.0 {
                    violations.push(format!("positive reward {}", res.reward));
                }
                if let Action::SelectFeature(i) = action {
                    if !seen.insert(i) {
                        violations.push(format!("feature {i} acquired twice"));
                    }
                    if env.step(action).is_ok() {
                        violations.push("re-acquisition accepted".into());
                    }
                }
                match res.next_observation {
                    Some(next) => {
                        for (i, &xi) in x.iter().enumerate().take(n) {
                            let expect = if next.mask[i] { xi } else { 0.0 };
                            if next.values[i].to_bits() != expect.to_bits() {
                                violations.push(format!("masked value mismatch at {i}"));
                            }
                        }
                        obs = next;
                    }
                    None => break,
                }
            }
            let _ = obs;
            if len > n + 1 {
                violations.push(format!("episode length {len} > {}", n + 1));
            }
            episodes += 1;
            if space.hpc && rng.random_bool(0.01) && env.step(Action::QueryHpc).is_ok() {
                violations.push("step accepted after episode end".into());
            }
        }
    }
    violations.truncate(5);
    verdict(
        5,
        "environment invariants",
        violations.is_empty(),
        format!("{steps} random steps over {episodes} episodes; violations: {violations:?}"),
    );
}

#[test]
fn criterion_06_tiny_mdp_converges_to_optimal_policy() {
    let start = Instant::now();
    let problem = common::tiny_mdp_problem(0);
    let mut hp = common::small_hyperparameters();
    hp.training.lambda = 0.01;
    hp.training.target_mode = TargetMode::OneStep;
    let outcome = train(&problem, &hp, 0).unwrap();
    let task = problem.task(0.01, false).unwrap();
    let test = evaluate(
        &mut GreedyPolicy::new(&outcome.checkpoint.online),
        &task,
        &problem.splits.test,
    )
    .unwrap();
    let feats = mean_features(&test);
    let elapsed = start.elapsed();
    let optimal = value_iteration_tiny_mdp(0.01);
    verdict(
        6,
        "tiny-MDP convergence",
        test.accuracy >= TINY_ACCURACY
            && (TINY_FEATURES.0..=TINY_FEATURES.1).contains(&feats)
            && within(elapsed, 300),
        format!(
            "oracle optimum {optimal:.4}; test accuracy {:.4} (>= {TINY_ACCURACY}), mean features {feats:.3} (in [{}, {}]), reward {:.4}, {:.1}s (< 300s)",
            test.accuracy,
            TINY_FEATURES.0,
            TINY_FEATURES.1,
            test.mean_reward,
            elapsed.as_secs_f64()
        ),
    );
    assert!((optimal + 0.01).abs() < 1e-12);
}

/// Exact optimal expected reward of the tiny MDP by value iteration over
/// acquisition sets, with each feature uniform on {0, 1} and the label equal
/// to feature 0.
fn value_iteration_tiny_mdp(lambda: f64) -> f64 {
    // state: (mask bits, known values); enumerate all (f0, f1) worlds.
    fn value(mask: u8, world: (u8, u8), lambda: f64) -> f64 {
        // Classify: the best guess given the revealed features.
        let classify = if mask & 1 == 1 { 0.0 } else { -0.5 };
        let mut best: f64 = classify;
        for f in 0..2u8 {
            if mask >> f & 1 == 0 {
                // Expected value after buying f, averaged over its value.
                let mut total = 0.0;
                for v in 0..2u8 {
                    let w = if f == 0 { (v, world.1) } else { (world.0, v) };
                    total += 0.5 * value(mask | 1 << f, w, lambda);
                }
                best = best.max(-lambda + total);
            }
        }
        best
    }
    value(0, (0, 0), lambda)
}

#[test]
fn criterion_07_unit_cost_lambda_one_classifies_immediately() {
    let start = Instant::now();
    let ds = common::blob_dataset(600, 6, 3, 7);
    let splits = Splits::stratified(&ds, 0.6, 0.2, 7).unwrap();
    let problem = Problem::new(ds, splits, CostSchedule::uniform(6), None, None).unwrap();
    let mut hp = common::small_hyperparameters();
    hp.training.lambda = 1.0;
    let outcome = train(&problem, &hp, 7).unwrap();
    let task = problem.task(1.0, false).unwrap();
    let e = evaluate(
        &mut GreedyPolicy::new(&outcome.checkpoint.online),
        &task,
        &problem.splits.test,
    )
    .unwrap();
    let immediate = e.feature_histogram[0] as f64 / e.samples as f64;
    let elapsed = start.elapsed();
    verdict(
        7,
        "lambda dominance",
        immediate >= IMMEDIATE_FRACTION && within(elapsed, 300),
        format!(
            "{:.2}% of {} test episodes acquire no feature (>= {}%), {:.1}s (< 300s)",
            100.0 * immediate,
            e.samples,
            100.0 * IMMEDIATE_FRACTION,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_08_cost_falls_as_lambda_grows() {
    let start = Instant::now();
    let problem = common::tiny_mdp_problem(0);
    let hp = common::small_hyperparameters();
    let lambdas = [0.0, 0.003, 0.01, 0.03, 0.1];
    let seeds = [0, 1, 2];
    let outcome = sweep(&problem, &hp, &lambdas, &seeds, None).unwrap();
    let points = outcome.points();
    let mean_of = |lambda: f64, f: fn(&TradeoffPoint) -> f64| {
        let vals: Vec<f64> = points
            .iter()
            .filter(|p| p.lambda == lambda && p.split == SplitKind::Test)
            .map(f)
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let summary: Vec<String> = lambdas
        .iter()
        .map(|&l| {
            format!(
                "{l}: cost {:.3} acc {:.3}",
                mean_of(l, |p| p.mean_cost),
                mean_of(l, |p| p.accuracy)
            )
        })
        .collect();
    let cost_low = mean_of(0.0, |p| p.mean_cost);
    let cost_high = mean_of(0.1, |p| p.mean_cost);
    let acc_low = mean_of(0.0, |p| p.accuracy);
    let acc_high = mean_of(0.1, |p| p.accuracy);
    let elapsed = start.elapsed();
    verdict(
        8,
        "lambda monotonicity",
        outcome.failures.is_empty()
            && cost_high < cost_low
            && acc_low >= acc_high
            && within(elapsed, 1800),
        format!(
            "[{}]; failures {}; {:.1}s (< 1800s)",
            summary.join(", "),
            outcome.failures.len(),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_09_pretraining_raises_initial_accuracy() {
    let problem = common::tiny_mdp_problem(0);
    let mut hp = common::small_hyperparameters();
    hp.training.max_epochs = 0;
    let with = train(&problem, &hp, 9).unwrap();
    hp.training.pretrain = false;
    let without = train(&problem, &hp, 9).unwrap();
    let a = with.report.epochs[0].validation_accuracy;
    let b = without.report.epochs[0].validation_accuracy;
    verdict(
        9,
        "pretraining effect",
        a > b,
        format!("epoch-0 validation accuracy {a:.4} with pretraining vs {b:.4} without"),
    );
}

#[test]
fn criterion_10_external_classifier_pass_through() {
    let ds = common::tiny_mdp_dataset(200, 10);
    let perfect = HpcPredictions::new(ds.labels().to_vec(), &ds).unwrap();
    let costs = CostSchedule::uniform(2);
    let all: Vec<usize> = (0..ds.len()).collect();
    let run = |lambda: f64| {
        let task = Task::new(&ds, &costs, lambda).unwrap().with_hpc(&perfect);
        let mut policy = FixedAction::hpc(&task.action_space()).unwrap();
        evaluate(&mut policy, &task, &all).unwrap()
    };
    let free = run(0.0);
    let paid = run(0.01);
    let pass = free.accuracy == 1.0
        && free.mean_scaled_cost == 0.0
        && paid.accuracy == 1.0
        && paid.mean_scaled_cost == 0.02;
    verdict(
        10,
        "external classifier pass-through",
        pass,
        format!(
            "lambda 0: accuracy {}, cost {}; lambda 0.01: accuracy {}, cost {}",
            free.accuracy, free.mean_scaled_cost, paid.accuracy, paid.mean_scaled_cost
        ),
    );
}

/// Non-dominated points not strictly below any chord between points on
/// either side of them, with repeated coordinates represented once.
fn hull_oracle(points: &[(f64, f64)]) -> HashSet<(u64, u64)> {
    let key = |p: (f64, f64)| (p.0.to_bits(), p.1.to_bits());
    let mut selected = HashSet::new();
    for &p in points {
        let dominated = points.iter().any(|&q| q != p && q.0 <= p.0 && q.1 >= p.1);
        if dominated {
            continue;
        }
        let below_chord = points.iter().any(|&a| {
            points.iter().any(|&c| {
                a.0 < p.0 && p.0 < c.0 && {
                    // Chord height at p.0, compared without division.
                    let lhs = (p.1 - a.1) * (c.0 - a.0);
                    let rhs = (c.1 - a.1) * (p.0 - a.0);
                    lhs < rhs
                }
            })
        });
        if !below_chord {
            selected.insert(key(p));
        }
    }
    selected
}

#[test]
fn criterion_11_hull_selection_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mismatches = 0;
    for _ in 0..HULL_SETS {
        let count = rng.random_range(1..=20);
        // Dyadic grid keeps every product exact.
        let points: Vec<(f64, f64)> = (0..count)
            .map(|_| {
                (
                    rng.random_range(0..40) as f64 / 4.0,
                    rng.random_range(0..=64) as f64 / 64.0,
                )
            })
            .collect();
        let fast: HashSet<(u64, u64)> = hull_indices(&points)
            .into_iter()
            .map(|i| (points[i].0.to_bits(), points[i].1.to_bits()))
            .collect();
        let tradeoff: Vec<TradeoffPoint> = points
            .iter()
            .enumerate()
            .map(|(i, &(c, a))| TradeoffPoint {
                lambda: i as f64,
                seed: 0,
                split: SplitKind::Validation,
                mean_cost: c,
                accuracy: a,
                mean_reward: 0.0,
                objective: 0.0,
            })
            .collect();
        let via_points: HashSet<(u64, u64)> = convex_hull_select(&tradeoff)
            .iter()
            .map(|p| (p.mean_cost.to_bits(), p.accuracy.to_bits()))
            .collect();
        let oracle = hull_oracle(&points);
        if fast != oracle || via_points != oracle {
            mismatches += 1;
        }
    }
    verdict(
        11,
        "convex-hull selection",
        mismatches == 0,
        format!("{mismatches} of {HULL_SETS} random point sets differ from the oracle"),
    );
}

#[test]
fn criterion_12_training_is_deterministic() {
    let problem = common::tiny_mdp_problem(3);
    let mut hp = common::small_hyperparameters();
    hp.training.max_epochs = 2;
    let a = train(&problem, &hp, 12).unwrap();
    let b = train(&problem, &hp, 12).unwrap();
    let same_report = a.report == b.report && a.report.to_json() == b.report.to_json();
    let same_checkpoint = a.checkpoint.encode() == b.checkpoint.encode();
    verdict(
        12,
        "determinism",
        same_report && same_checkpoint,
        format!("identical reports: {same_report}; identical checkpoints: {same_checkpoint}"),
    );
}
