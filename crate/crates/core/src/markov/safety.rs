use serde::{Deserialize, Serialize};

use super::chain::{build_snowflake_chain, hitting_bounds, BirthDeathChain};
use crate::error::{ensure, Result};
use crate::prob::{hyper_tail, TailQuery};

/// First state past which upward drift beats the downward push at every
/// higher state: one more than the largest `j` in `ceil(c/2)..c` with
/// `up(j) < down(j)`, or `ceil(c/2)` if there is none. `None` when that
/// lands on `c`, i.e. the adversary controls every interior state.
pub fn phase_shift_index(chain: &BirthDeathChain) -> Option<usize> {
    let c = chain.size();
    let from = c.div_ceil(2);
    let s = (from..c)
        .rev()
        .find(|&j| chain.up(j) < chain.down(j))
        .map_or(from, |j| j + 1);
    (s < c).then_some(s)
}

/// Smallest offset `delta` such that state `c/2 + delta` lies past the phase
/// shift and falls back to it within `phi` steps with probability at most
/// `eps`.
pub fn find_point_of_no_return(chain: &BirthDeathChain, eps: f64, phi: u64) -> Result<Option<u64>> {
    ensure!(eps > 0.0 && eps <= 1.0, Argument, "eps = {eps} outside (0, 1]");
    let Some(s_ps) = phase_shift_index(chain) else {
        return Ok(None);
    };
    Ok(point_of_no_return_from(chain, s_ps, eps, phi)?.map(|(d, _)| d))
}

/// Upper bound on the fall-back probability from `start`. The chance of
/// ever falling back is tried first; only when that exceeds `eps` is the
/// horizon-limited probability computed, and then only as far as needed
/// to compare it with `eps` (or to six digits).
fn fall_back_bound(chain: &BirthDeathChain, start: usize, s_ps: usize, eps: f64, phi: u64) -> Result<f64> {
    let ever = chain.low_hit_probs(s_ps, chain.size())[start - s_ps];
    if ever <= eps {
        return Ok(ever);
    }
    let (_, hi) = hitting_bounds(chain, start, s_ps, phi, |lo, hi| {
        lo > eps || hi - lo <= 1e-6 * hi
    })?;
    Ok(hi)
}

/// Binary search for the offset; returns it with its hitting probability.
fn point_of_no_return_from(
    chain: &BirthDeathChain,
    s_ps: usize,
    eps: f64,
    phi: u64,
) -> Result<Option<(u64, f64)>> {
    let c = chain.size();
    let half = c / 2;
    let (mut lo, mut hi) = (s_ps + 1, c - 1);
    if lo > hi {
        return Ok(None);
    }
    let top = fall_back_bound(chain, hi, s_ps, eps, phi)?;
    if top > eps {
        return Ok(None);
    }
    let mut best = top;
    // the fall-back probability only shrinks as the start moves up
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let p = fall_back_bound(chain, mid, s_ps, eps, phi)?;
        if p <= eps {
            best = p;
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Some(((lo - half) as u64, best)))
}

/// `P(longest success run >= beta)` over `trials` independent trials with
/// success probability `p`.
pub fn longest_run_tail(p: f64, trials: u64, beta: u64) -> Result<f64> {
    ensure!((0.0..=1.0).contains(&p), Argument, "p = {p} outside [0, 1]");
    ensure!(beta >= 1, Argument, "run length must be positive");
    if beta > trials {
        return Ok(0.0);
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if trials <= 4_000_000 || beta > 256 {
        Ok(run_tail_recursive(p, trials, beta))
    } else {
        Ok(run_tail_matrix(p, trials, beta))
    }
}

// f_m = f_{m-1} + (1 - f_{m-beta-1}) (1-p) p^beta: the first run of length
// beta ends at trial m exactly when trial m-beta fails, the next beta
// succeed, and no run finished before trial m-beta.
fn run_tail_recursive(p: f64, trials: u64, beta: u64) -> f64 {
    let beta = beta as usize;
    let pb = p.powi(beta as i32);
    let step = (1.0 - p) * pb;
    let ring = beta + 2;
    let mut f = vec![0.0f64; ring];
    f[beta % ring] = pb;
    let mut last = pb;
    for m in beta + 1..=trials as usize {
        let back = if m > beta { f[(m - beta - 1) % ring] } else { 0.0 };
        last += (1.0 - back) * step;
        f[m % ring] = last;
    }
    last.min(1.0)
}

// Same quantity via powers of the transition matrix over "current run
// length", with run length beta absorbing.
fn run_tail_matrix(p: f64, trials: u64, beta: u64) -> f64 {
    let s = beta as usize + 1;
    let mut m = vec![0.0; s * s];
    for r in 0..beta as usize {
        m[r * s] = 1.0 - p;
        m[r * s + r + 1] = p;
    }
    m[(s - 1) * s + s - 1] = 1.0;
    let mut acc = vec![0.0; s * s];
    for i in 0..s {
        acc[i * s + i] = 1.0;
    }
    let mul = |x: &[f64], y: &[f64]| {
        let mut z = vec![0.0; s * s];
        for i in 0..s {
            for l in 0..s {
                let a = x[i * s + l];
                if a == 0.0 {
                    continue;
                }
                for j in 0..s {
                    z[i * s + j] += a * y[l * s + j];
                }
            }
        }
        z
    };
    let mut e = trials;
    let mut base = m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul(&acc, &base);
        }
        e >>= 1;
        if e > 0 {
            base = mul(&base, &base);
        }
    }
    acc[s - 1].min(1.0)
}

/// Smallest `beta <= trials` with `P(longest run >= beta) <= eps`, or `None`
/// when even a run spanning every trial is too likely.
pub fn run_length_beta(p: f64, trials: u64, eps: f64) -> Result<Option<u64>> {
    ensure!((0.0..=1.0).contains(&p), Argument, "p = {p} outside [0, 1]");
    ensure!(trials >= 1, Argument, "need at least one trial");
    ensure!(eps > 0.0 && eps <= 1.0, Argument, "eps = {eps} outside (0, 1]");
    if longest_run_tail(p, trials, trials)? > eps {
        return Ok(None);
    }
    let mut hi = trials;
    if p > 0.0 && p < 1.0 {
        // union bound: P(run >= beta) <= trials p^beta
        let ub = ((eps / trials as f64).ln() / p.ln()).ceil();
        if ub >= 1.0 && ub < trials as f64 {
            hi = ub as u64;
        }
    }
    let mut lo = 1;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if longest_run_tail(p, trials, mid)? <= eps {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Some(lo))
}

/// Which parameter the feasibility search holds fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fixed {
    K(u64),
    Beta(u64),
}

/// A parameter choice meeting both safety conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyDesign {
    pub n: u64,
    pub b: u64,
    pub c: u64,
    pub eps: f64,
    pub phi: u64,
    pub k: u64,
    pub a: u64,
    pub beta: u64,
    pub delta: u64,
    pub s_ps: u64,
    /// Probability of falling back to the phase shift within `phi` steps.
    pub c1_prob: f64,
    /// Probability of a `beta`-long success run below the point of no return.
    pub c2_prob: f64,
    pub failure_bound: f64,
}

/// Evaluates both conditions for one sample size; `None` if infeasible.
pub fn design_for_k(n: u64, b: u64, k: u64, eps: f64, phi: u64) -> Result<Option<SafetyDesign>> {
    ensure!(b < n, Argument, "b = {b} leaves no correct nodes in {n}");
    ensure!(k >= 1 && k < n, Argument, "k = {k} outside [1, {})", n);
    let c = n - b;
    let a = (k * c).div_ceil(n);
    if a <= k / 2 {
        return Ok(None);
    }
    let chain = build_snowflake_chain(c, b, k, a, None)?;
    let Some(s_ps) = phase_shift_index(&chain) else {
        return Ok(None);
    };
    let Some((delta, c1_prob)) = point_of_no_return_from(&chain, s_ps, eps, phi)? else {
        return Ok(None);
    };
    let p = run_success_prob(n, b, c, k, a, delta)?;
    let trials = (phi / c).max(1);
    let Some(beta) = run_length_beta(p, trials, eps)? else {
        return Ok(None);
    };
    let c2_prob = longest_run_tail(p, trials, beta)?;
    Ok(Some(SafetyDesign {
        n,
        b,
        c,
        eps,
        phi,
        k,
        a,
        beta,
        delta,
        s_ps: s_ps as u64,
        c1_prob,
        c2_prob,
        failure_bound: c1_prob.max(c2_prob),
    }))
}

/// Chance that one sample at the worst state left of the point of no
/// return, `c/2 + delta - 1`, succeeds for the tracked color when every
/// Byzantine node votes for it too.
fn run_success_prob(n: u64, b: u64, c: u64, k: u64, a: u64, delta: u64) -> Result<f64> {
    let others = n - 1;
    let support = (c / 2 + delta - 1 + b).min(others);
    Ok(hyper_tail(&TailQuery::new(others, support, k, a)?))
}

/// Scans the free parameter upward from its smallest value and returns the
/// first feasible design. With `Fixed::Beta`, `k` grows until the required
/// run length fits within the given `beta`.
pub fn feasibility_search(
    n: u64,
    b: u64,
    eps: f64,
    phi: u64,
    fixed: Fixed,
) -> Result<Option<SafetyDesign>> {
    ensure!(eps > 0.0 && eps < 1.0, Argument, "eps = {eps} outside (0, 1)");
    ensure!(phi >= 1, Argument, "phi must be positive");
    ensure!(b < n, Argument, "b = {b} leaves no correct nodes in {n}");
    match fixed {
        Fixed::K(k) => design_for_k(n, b, k, eps, phi),
        Fixed::Beta(beta) => {
            ensure!(beta >= 1, Argument, "beta must be positive");
            for k in 1..n {
                let Some(mut d) = design_for_k(n, b, k, eps, phi)? else {
                    continue;
                };
                if d.beta <= beta {
                    let p = run_success_prob(n, b, d.c, k, d.a, d.delta)?;
                    d.beta = beta;
                    d.c2_prob = longest_run_tail(p, (phi / d.c).max(1), beta)?;
                    d.failure_bound = d.c1_prob.max(d.c2_prob);
                    return Ok(Some(d));
                }
            }
            Ok(None)
        }
    }
}

/// Point-of-no-return offset that stays safe after `gamma_in` nodes join
/// (all voting against the decided color) and `gamma_out` correct nodes
/// leave. The new chain is solved for its own offset, the start is pushed
/// back by `gamma_in`, and the larger of old and new offsets is kept.
pub fn churn_adjusted_delta(
    design: &SafetyDesign,
    gamma_in: u64,
    gamma_out: u64,
) -> Result<Option<u64>> {
    ensure!(
        gamma_out < design.c + gamma_in,
        Argument,
        "churn removes every correct node"
    );
    let c = design.c + gamma_in - gamma_out;
    let n = c + design.b;
    ensure!(design.k < n, Argument, "k = {} exceeds the shrunken network", design.k);
    let chain = build_snowflake_chain(c, design.b, design.k, design.a, None)?;
    let Some(base) = find_point_of_no_return(&chain, design.eps, design.phi)? else {
        return Ok(None);
    };
    let shifted = base + gamma_in;
    if c as u64 / 2 + shifted >= c {
        return Ok(None);
    }
    Ok(Some(shifted.max(design.delta)))
}
