use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::prob::{hyper_tail, TailQuery};

/// A chain on states `0..=c` moving by at most one step at a time, with
/// both endpoints absorbing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BirthDeathChain {
    up: Vec<f64>,
    down: Vec<f64>,
}

impl BirthDeathChain {
    /// Builds a chain from per-state move probabilities. The endpoint
    /// entries are ignored and forced to zero.
    pub fn new(mut up: Vec<f64>, mut down: Vec<f64>) -> Result<Self> {
        ensure!(up.len() == down.len(), Argument, "up/down lengths differ");
        ensure!(up.len() >= 2, Argument, "a chain needs at least two states");
        let c = up.len() - 1;
        up[0] = 0.0;
        down[0] = 0.0;
        up[c] = 0.0;
        down[c] = 0.0;
        for i in 1..c {
            let (p, q) = (up[i], down[i]);
            ensure!(
                p >= 0.0 && q >= 0.0 && p + q <= 1.0 + 1e-12,
                Argument,
                "state {i}: up {p} and down {q} do not form a distribution"
            );
        }
        Ok(Self { up, down })
    }

    /// Index of the top state, `c`.
    pub fn size(&self) -> usize {
        self.up.len() - 1
    }

    pub fn up(&self, i: usize) -> f64 {
        self.up[i]
    }

    pub fn down(&self, i: usize) -> f64 {
        self.down[i]
    }

    pub fn stay(&self, i: usize) -> f64 {
        (1.0 - self.up[i] - self.down[i]).max(0.0)
    }

    fn check_state(&self, s: usize) -> Result<()> {
        ensure!(s <= self.size(), Argument, "state {s} outside 0..={}", self.size());
        Ok(())
    }

    /// For each state `i` in `lo..=hi`, the probability of reaching `lo`
    /// before `hi` when both are treated as absorbing.
    ///
    /// Once the chain stands on a state it cannot step down from, it can
    /// never get below that state again, so the first such state above
    /// `lo` acts as a second failure boundary.
    pub(crate) fn low_hit_probs(&self, lo: usize, hi: usize) -> Vec<f64> {
        let mut out = vec![0.0; hi - lo + 1];
        out[0] = 1.0;
        let wall = (lo + 1..hi).find(|&l| self.down[l] == 0.0).unwrap_or(hi);
        if wall == lo + 1 {
            return out;
        }
        // ln w_j = sum_{lo<l<=j} ln q_l + sum_{j<l<wall} ln p_l, j in lo..wall
        let m = wall - lo;
        let mut lw = vec![0.0f64; m];
        let mut acc = 0.0;
        for (j, w) in lw.iter_mut().enumerate() {
            if j > 0 {
                acc += self.down[lo + j].ln();
            }
            *w = acc;
        }
        let mut acc = 0.0;
        for j in (0..m).rev() {
            lw[j] += acc;
            acc += self.up[lo + j].ln();
        }
        let top = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // suffix sums relative to the largest weight
        let mut suffix = vec![0.0; m + 1];
        for j in (0..m).rev() {
            suffix[j] = suffix[j + 1] + (lw[j] - top).exp();
        }
        for j in 1..m {
            out[j] = (suffix[j] / suffix[0]).min(1.0);
        }
        out
    }
}

fn tail(n: u64, x: u64, k: u64, a: u64) -> Result<f64> {
    Ok(hyper_tail(&TailQuery::new(n, x.min(n), k, a)?))
}

/// Chain for Slush on `c` nodes: state `i` counts nodes holding the
/// tracked color, and a move happens when the picked node sees an
/// `a`-majority for the other color in a sample of `k` drawn from the
/// other `c - 1` nodes.
pub fn build_slush_chain(c: u64, k: u64, a: u64) -> Result<BirthDeathChain> {
    build_snowflake_chain(c, 0, k, a, None)
}

/// Chain for Snowflake with `b` Byzantine nodes that always vote against
/// the move toward the tracked color. The sampling node draws from the
/// `c + b - 1` others unless `population` overrides that, e.g. for a
/// restricted view or to sample from a population that includes itself.
pub fn build_snowflake_chain(
    c: u64,
    b: u64,
    k: u64,
    a: u64,
    population: Option<u64>,
) -> Result<BirthDeathChain> {
    ensure!(c >= 1, Argument, "need at least one correct node");
    let n = population.unwrap_or(c + b - 1);
    ensure!(n >= 1, Argument, "empty sampling population");
    TailQuery::new(n, 0, k, a)?;
    let cf = c as f64;
    let mut up = vec![0.0; c as usize + 1];
    let mut down = vec![0.0; c as usize + 1];
    for i in 1..c {
        let fi = i as f64;
        up[i as usize] = (cf - fi) / cf * tail(n, i, k, a)?;
        down[i as usize] = fi / cf * tail(n, c - i + b, k, a)?;
    }
    BirthDeathChain::new(up, down)
}

/// Probability that the chain started at `start` is eventually absorbed
/// in state 0.
pub fn absorption_probability(chain: &BirthDeathChain, start: usize) -> Result<f64> {
    chain.check_state(start)?;
    Ok(chain.low_hit_probs(0, chain.size())[start])
}

/// Expected number of steps until absorption at either end.
pub fn expected_absorption_time(chain: &BirthDeathChain, start: usize) -> Result<f64> {
    chain.check_state(start)?;
    let c = chain.size();
    if start == 0 || start == c {
        return Ok(0.0);
    }
    // the reachable states form an interval around `start`
    let mut lo = start;
    while lo > 0 && chain.down[lo] > 0.0 {
        lo -= 1;
    }
    let mut hi = start;
    while hi < c && chain.up[hi] > 0.0 {
        hi += 1;
    }
    let mut reach_bottom = vec![false; c + 1];
    reach_bottom[0] = true;
    for i in 1..=c {
        reach_bottom[i] = chain.down[i] > 0.0 && reach_bottom[i - 1];
    }
    let mut reach_top = vec![false; c + 1];
    reach_top[c] = true;
    for i in (0..c).rev() {
        reach_top[i] = chain.up[i] > 0.0 && reach_top[i + 1];
    }
    if let Some(i) = (lo..=hi).find(|&i| !reach_bottom[i] && !reach_top[i]) {
        return Err(Error::Domain(format!(
            "state {i} is reachable from {start} but cannot be absorbed"
        )));
    }
    // p_i E_{i+1} - (p_i + q_i) E_i + q_i E_{i-1} = -1 on lo'..=hi'
    let lo = lo.max(1);
    let hi = hi.min(c - 1);
    let m = hi - lo + 1;
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    for r in 0..m {
        let i = lo + r;
        let (p, q) = (chain.up[i], chain.down[i]);
        let sub = if r > 0 { q } else { 0.0 };
        let sup = if r + 1 < m { p } else { 0.0 };
        let diag = -(p + q);
        let (prev_c, prev_d) = if r > 0 { (cp[r - 1], dp[r - 1]) } else { (0.0, 0.0) };
        let denom = diag - sub * prev_c;
        cp[r] = sup / denom;
        dp[r] = (-1.0 - sub * prev_d) / denom;
    }
    let mut e = vec![0.0; m];
    e[m - 1] = dp[m - 1];
    for r in (0..m - 1).rev() {
        e[r] = dp[r] - cp[r] * e[r + 1];
    }
    Ok(e[start - lo])
}

/// Probability of visiting `target` within `t` steps from `start > target`.
///
/// The distribution is pushed forward one step at a time with `target`
/// absorbing. Iteration stops early once the mass still in flight can add
/// less than one part in 1e12 to the answer; the bound returned then
/// includes that remainder, so it never underestimates.
pub fn hitting_prob_within(
    chain: &BirthDeathChain,
    start: usize,
    target: usize,
    t: u64,
) -> Result<f64> {
    let (_, hi) = hitting_bounds(chain, start, target, t, |lo, hi| hi - lo <= 1e-12 * hi)?;
    Ok(hi)
}

/// Lower and upper bounds on the `t`-step hitting probability, tightened
/// step by step until `done(lower, upper)` holds or `t` steps are spent.
/// The lower bound is the mass absorbed so far; the upper bound adds the
/// eventual hitting probability of the mass still in flight.
pub(crate) fn hitting_bounds(
    chain: &BirthDeathChain,
    start: usize,
    target: usize,
    t: u64,
    done: impl Fn(f64, f64) -> bool,
) -> Result<(f64, f64)> {
    chain.check_state(start)?;
    ensure!(target < start, Argument, "target {target} must lie below start {start}");
    let c = chain.size();
    if (start - target) as u64 > t {
        return Ok((0.0, 0.0));
    }
    let eventual = chain.low_hit_probs(target, c);
    let m = c - target;
    let mut dist = vec![0.0; m + 1];
    dist[start - target] = 1.0;
    let mut next = vec![0.0; m + 1];
    let mut hit = 0.0;
    // states outside lo..=hi carry no mass yet
    let (mut lo, mut hi) = (start - target, start - target);
    for step in 1..=t {
        let (from, to) = (lo.max(1), hi.min(m - 1));
        for x in next[from - 1..=to + 1].iter_mut() {
            *x = 0.0;
        }
        for j in from..=to {
            let mass = dist[j];
            if mass == 0.0 {
                continue;
            }
            let i = target + j;
            next[j - 1] += mass * chain.down[i];
            next[j + 1] += mass * chain.up[i];
            next[j] += mass * chain.stay(i);
        }
        hit += next[0];
        next[0] = 0.0;
        // mass reaching the top state is never coming back
        next[m] = 0.0;
        for j in from..=to {
            dist[j] = next[j];
        }
        dist[from - 1] = next[from - 1];
        dist[to + 1] = next[to + 1];
        if from - 1 == 0 {
            dist[0] = 0.0;
        }
        lo = from - 1;
        hi = to + 1;
        if step % 64 == 0 || step == t {
            let pending: f64 = (lo.max(1)..=hi.min(m - 1)).map(|j| dist[j] * eventual[j]).sum();
            let upper = (hit + pending).min(1.0);
            if pending == 0.0 || done(hit, upper) {
                return Ok((hit, upper));
            }
        }
    }
    Ok((hit, hit.min(1.0)))
}
