//! Dataset ingestion, normalization, splits, feature costs and external
//! classifier predictions.

mod costs;
mod dataset;
mod hpc;
mod split;

pub use costs::{assign_costs, CostSchedule, CostSpec, RANDOM_COST_LEVELS};
pub use dataset::{Dataset, NormStats, Schema};
pub use hpc::HpcPredictions;
pub use split::{parse_index_list, read_index_file, SplitKind, SplitSpec, Splits};
