//! Action selection and Q-learning targets.

mod policy;
mod targets;

pub use policy::{
    behavior_probability, eta_greedy_probs, greedy_action, max_legal, select_action,
    LinearSchedule, PolicyConfig,
};
pub use targets::{
    batch_loss, observation_matrix, one_step_target, one_step_target_from_values,
    retrace_recursion, retrace_targets, transition_targets, truncated_importance, Batch,
    RetraceStep, TargetConfig, TargetMode,
};
