//! Side-effect regularization: AUP rewards, Q-learning, gridworlds, delayed specification and regret.

pub mod aup;
pub mod delayed;
pub mod experiment;
pub mod gridworld;
pub mod qlearn;
pub mod regret;

pub use aup::{aup_penalty, build_aup_reward, AupConfig};
pub use delayed::{
    assist_alternate_reward, delayed_spec_score, expected_switch_value, solve_delayed_geometric, switch_decomposition,
    AssistReward, CorrectionTime, DelayedSolution, SwitchDecomposition, ValueMoments,
};
pub use experiment::{run_experiment, Condition, ExperimentConfig, ExperimentReport, ExperimentRow, ScoreDist};
pub use gridworld::{build_gridworld, GridworldEnv, GroundTruth};
pub use qlearn::{greedy_policy, q_learning, QLearningConfig};
pub use regret::{
    corrigibility_bound_check, no_free_lunch_check, proportional_regret, PolicySpec, RegretReport,
};
