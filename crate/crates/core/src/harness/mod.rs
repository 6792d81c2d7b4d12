//! Training loop, evaluation and sweeps over the cost weight.

mod config;
mod evaluate;
mod hull;
mod problem;
mod report;
mod schedule;
mod sweep;
mod train;

pub use config::{
    Config, DataConfig, Hyperparameters, NetworkConfig, ScheduleConfig, SweepConfig, TrainingConfig,
};
pub use evaluate::{evaluate, objective, Evaluation, FixedAction, GreedyPolicy, Policy};
pub use hull::{convex_hull_select, hull_indices};
pub use problem::Problem;
pub use report::{
    load_tradeoff_csv, read_tradeoff_csv, save_tradeoff_csv, write_tradeoff_csv, EpochRecord,
    RunReport, TradeoffPoint,
};
pub use schedule::{adapt_learning_rate, early_stop};
pub use sweep::{dedup_lambdas, run_dir_name, sweep, RunFailure, RunSummary, SweepOutcome};
pub use train::{pretrain, train, TrainOutcome};
