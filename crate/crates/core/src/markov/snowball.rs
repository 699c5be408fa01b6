use serde::Serialize;

use crate::error::{ensure, Result};
use crate::prob::{hyper_tail, kl_divergence, TailQuery};

/// Expected confidence gained after `t` steps by the red-leaning group `u`
/// and the blue-leaning group `v` once the split is `c/2 + delta` red.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Drift {
    pub u_red: f64,
    pub u_blue: f64,
    pub v_red: f64,
    pub v_blue: f64,
}

pub fn snowball_drift(c: u64, b: u64, k: u64, a: u64, delta: u64, t: u64) -> Result<Drift> {
    ensure!(delta <= c / 2, Argument, "delta = {delta} exceeds c/2");
    let n = c + b;
    let half = c / 2;
    let tail = |x: u64| -> Result<f64> { Ok(hyper_tail(&TailQuery::new(n, x.min(n), k, a)?)) };
    let share_u = 0.5 + delta as f64 / c as f64;
    let share_v = 0.5 - delta as f64 / c as f64;
    let t = t as f64;
    Ok(Drift {
        u_red: t * share_u * tail(half + delta + b)?,
        u_blue: t * share_u * tail(half - delta + b)?,
        v_red: t * share_v * tail(half + delta)?,
        v_blue: t * share_v * tail(half - delta + b)?,
    })
}

/// Per-step rate at which the blue group's lead shrinks, with both success
/// probabilities replaced by their Hoeffding bounds.
pub fn snowball_kappa_rate(c: u64, b: u64, k: u64, a: u64, delta: u64) -> Result<f64> {
    ensure!(delta <= c / 2, Argument, "delta = {delta} exceeds c/2");
    ensure!(k >= 1 && a <= k, Argument, "need 1 <= a <= k");
    let (cf, bf, df) = (c as f64, b as f64, delta as f64);
    let alpha = a as f64 / k as f64;
    let p_red = (cf / 2.0 + df + bf) / (cf + bf);
    let p_blue = (cf / 2.0 - df + bf) / (cf + bf);
    let bound = |p: f64| -> Result<f64> { Ok((-(k as f64) * kl_divergence(alpha, p)?).exp()) };
    Ok((0.5 - df / cf) * (bound(p_red)? - bound(p_blue)?))
}

/// Steps after which red and blue confidence of the red group stay apart
/// except with probability `eps`; `None` when `delta = 0`.
pub fn snowball_divergence_time(c: u64, b: u64, delta: u64, eps: f64) -> Result<Option<f64>> {
    ensure!(eps > 0.0 && eps < 1.0, Argument, "eps = {eps} outside (0, 1)");
    if delta == 0 {
        return Ok(None);
    }
    let share = 0.5 + delta as f64 / c as f64;
    let gap = 2.0 * delta as f64 / (c + b) as f64;
    Ok(Some((eps.ln() / (-2.0 * share * share * gap * gap)).cbrt()))
}
