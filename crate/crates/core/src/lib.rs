//! Simulation and analysis toolkit for the Snow family of subsampled-voting
//! consensus protocols (Slush, Snowflake, Snowball) and the Avalanche DAG.

pub mod cli;
pub mod dag;
pub mod error;
pub mod markov;
pub mod prob;
pub mod sim;
pub mod snow;

pub use error::{Error, Result};
pub use snow::{
    handle_query, handle_sample_result, is_decided, Color, DecisionRule, ProtocolParams,
    SampleCounts, SnowState, Variant,
};
