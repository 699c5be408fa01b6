//! Probability primitives shared by the simulator and the analysis.
//!
//! Hypergeometric tails are evaluated in log space around the largest term
//! so that tails far below `f64::MIN_POSITIVE`-adjacent magnitudes keep
//! their relative precision. Random streams are ChaCha8 keyed by
//! `(seed, stream_id)`.

mod bounds;
mod hyper;
mod rng;
mod sampling;

pub use bounds::{chvatal_tail_bound, hoeffding_tail_bound, kl_divergence};
pub use hyper::{hyper_pmf, hyper_tail, ln_choose, TailQuery};
pub use rng::SimRng;
pub use sampling::{sample_excluding, sample_without_replacement};
pub(crate) use sampling::floyd_into;
