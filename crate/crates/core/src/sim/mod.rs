//! Global-scheduler simulation of Snow networks and Avalanche DAGs with
//! pluggable Byzantine behavior, plus a seeded Monte Carlo driver.
//!
//! Each round the scheduler picks one correct node uniformly at random and
//! lets it complete one query. Runs are sequential and bit-reproducible
//! from `(seed, config)`; Monte Carlo batches spread trials over threads
//! with one random stream per trial.

mod adversary;
mod avalanche;
mod monte_carlo;
mod snow_run;

pub use adversary::{adversary_respond, AdversaryState, AdversaryTiming, NetworkView, Strategy};
pub use avalanche::{
    run_avalanche, AvalancheAdversary, AvalancheConfig, AvalancheOutcome, Checkpoint, TxRecord, Workload,
};
pub use monte_carlo::{mean_stddev, monte_carlo, MonteCarlo};
pub use snow_run::{
    conflicting, run_slush, run_slush_with, run_snow, run_snow_with, NetworkConfig, RunOutcome,
};
