use serde::Serialize;

use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EarlyCommit {
    /// Expected scheduler steps for news of a conflict to reach every
    /// correct node.
    pub expected_rounds: f64,
    /// The same, divided by the number of correct nodes.
    pub per_node: f64,
}

/// Expected time for a conflicting transaction, first seen by `start`
/// correct nodes, to be discovered by all `c` of them when each step one
/// correct node samples `k` of `n` nodes.
pub fn early_commit_threshold(n: u64, c: u64, k: u64) -> Result<EarlyCommit> {
    early_commit_from(n, c, k, 1)
}

pub fn early_commit_from(n: u64, c: u64, k: u64, start: u64) -> Result<EarlyCommit> {
    ensure!(c >= 1 && c <= n, Argument, "c = {c} outside [1, {n}]");
    ensure!(k >= 1 && k <= n, Argument, "k = {k} outside [1, {n}]");
    ensure!(start >= 1 && start <= c, Argument, "start = {start} outside [1, {c}]");
    let mut total = 0.0;
    for x in start..c {
        // C(n-x, k) / C(n, k): the sample misses all x informed nodes
        let miss: f64 = (0..k).map(|i| (n - x).saturating_sub(i) as f64 / (n - i) as f64).product();
        let birth = (c - x) as f64 / c as f64 * (1.0 - miss);
        total += 1.0 / birth;
    }
    Ok(EarlyCommit {
        expected_rounds: total,
        per_node: total / c as f64,
    })
}
