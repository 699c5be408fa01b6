//! Birth-death chain analysis of the sampling protocols: absorption,
//! convergence time, and the parameter search behind the safety bounds.

mod chain;
mod commit;
mod safety;
mod snowball;

pub use chain::{
    absorption_probability, build_slush_chain, build_snowflake_chain, expected_absorption_time,
    hitting_prob_within, BirthDeathChain,
};
pub use commit::{early_commit_from, early_commit_threshold, EarlyCommit};
pub use safety::{
    churn_adjusted_delta, design_for_k, feasibility_search, find_point_of_no_return,
    longest_run_tail, phase_shift_index, run_length_beta, Fixed, SafetyDesign,
};
pub use snowball::{snowball_divergence_time, snowball_drift, snowball_kappa_rate, Drift};
