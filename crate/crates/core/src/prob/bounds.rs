use crate::error::{ensure, Result};

/// Kullback-Leibler divergence between Bernoulli(a) and Bernoulli(b),
/// with the convention `0 * ln 0 = 0`.
pub fn kl_divergence(a: f64, b: f64) -> Result<f64> {
    ensure!((0.0..=1.0).contains(&a), Argument, "a = {a} outside [0, 1]");
    ensure!(b > 0.0 && b < 1.0, Argument, "b = {b} outside (0, 1)");
    let term = |p: f64, q: f64| if p == 0.0 { 0.0 } else { p * (p / q).ln() };
    Ok(term(a, b) + term(1.0 - a, 1.0 - b))
}

/// Hoeffding bound on `P(H <= (p - psi) k)`: `exp(-k D(p - psi, p))`.
pub fn hoeffding_tail_bound(p: f64, psi: f64, k: u64) -> Result<f64> {
    ensure!(
        p < 1.0 && psi > 0.0 && p - psi > 0.0,
        Argument,
        "need 0 < p - psi < p < 1, got p = {p}, psi = {psi}"
    );
    Ok((-(k as f64) * kl_divergence(p - psi, p)?).exp())
}

/// The weaker Chvatal form `exp(-2 psi^2 k)`.
pub fn chvatal_tail_bound(psi: f64, k: u64) -> f64 {
    (-2.0 * psi * psi * k as f64).exp()
}
