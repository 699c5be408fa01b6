use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{ensure, Result};

/// A query for `P(H >= threshold)` where `H` counts marked items in a
/// uniform sample of `sample` items drawn without replacement from a
/// population of `population` items, `successes` of which are marked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailQuery {
    pub population: u64,
    pub successes: u64,
    pub sample: u64,
    pub threshold: u64,
}

impl TailQuery {
    pub fn new(population: u64, successes: u64, sample: u64, threshold: u64) -> Result<Self> {
        ensure!(
            successes <= population,
            Argument,
            "successes {successes} exceeds population {population}"
        );
        ensure!(
            sample >= 1 && sample <= population,
            Argument,
            "sample size {sample} outside [1, {population}]"
        );
        ensure!(
            threshold > sample / 2 && threshold <= sample,
            Argument,
            "threshold {threshold} outside ({}, {sample}]",
            sample / 2
        );
        Ok(Self {
            population,
            successes,
            sample,
            threshold,
        })
    }

    /// Support of the hypergeometric variable, `[lo, hi]`.
    fn support(&self) -> (u64, u64) {
        let failures = self.population - self.successes;
        (
            self.sample.saturating_sub(failures),
            self.sample.min(self.successes),
        )
    }

    pub fn tail(&self) -> f64 {
        hyper_tail(self)
    }
}

/// Natural log of the binomial coefficient `C(n, k)`; `-inf` when `k > n`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `P(H = j)` for a hypergeometric sample.
pub fn hyper_pmf(population: u64, successes: u64, sample: u64, j: u64) -> f64 {
    ln_hyper_pmf(population, successes, sample, j).exp()
}

/// Log of `P(H = j)`, written as a ratio of three binomial densities that
/// share the success probability `sample / population`. Each density uses
/// the Stirling remainder and deviance forms (Loader's method), which keeps
/// full double precision where plain log-gamma differences would cancel.
fn ln_hyper_pmf(population: u64, successes: u64, sample: u64, j: u64) -> f64 {
    if successes > population || sample > population || j > sample || j > successes {
        return f64::NEG_INFINITY;
    }
    let failures = population - successes;
    if sample - j > failures {
        return f64::NEG_INFINITY;
    }
    let p = sample as f64 / population as f64;
    let q = (population - sample) as f64 / population as f64;
    ln_binom_density(j, successes, p, q) + ln_binom_density(sample - j, failures, p, q)
        - ln_binom_density(sample, population, p, q)
}

fn ln_binom_density(x: u64, n: u64, p: f64, q: f64) -> f64 {
    if p == 0.0 {
        return if x == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if x == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    if x == 0 {
        if n == 0 {
            return 0.0;
        }
        return if p < q { -deviance(nf, nf * q) - nf * p } else { nf * q.ln() };
    }
    if x == n {
        return if q < p { -deviance(nf, nf * p) - nf * q } else { nf * p.ln() };
    }
    let xf = x as f64;
    let m = nf - xf;
    let lc = stirling_remainder(n) - stirling_remainder(x) - stirling_remainder(n - x)
        - deviance(xf, nf * p)
        - deviance(m, nf * q);
    let lf = (2.0 * std::f64::consts::PI).ln() + xf.ln() + (-xf / nf).ln_1p();
    lc - 0.5 * lf
}

/// `ln n! - ((n + 1/2) ln n - n + ln sqrt(2 pi))`.
fn stirling_remainder(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    // exact values for small n, where the series has not converged yet
    const SMALL: [f64; 16] = [
        0.0,
        0.081_061_466_795_327_258_219_670_26,
        0.041_340_695_955_409_294_093_822_08,
        0.027_677_925_684_998_339_148_789_29,
        0.020_790_672_103_765_093_111_522_77,
        0.016_644_691_189_821_192_163_194_87,
        0.013_876_128_823_070_747_998_745_73,
        0.011_896_709_945_891_770_095_055_72,
        0.010_411_265_261_972_096_497_478_57,
        0.009_255_462_182_712_732_917_728_637,
        0.008_330_563_433_362_871_256_469_319,
        0.007_573_675_487_951_840_794_972_024,
        0.006_942_840_107_209_529_865_664_153,
        0.006_408_994_188_004_207_068_439_631,
        0.005_951_370_112_758_847_735_624_416,
        0.005_554_733_551_962_801_371_038_690,
    ];
    if n <= 15 {
        return SMALL[n as usize];
    }
    let nf = n as f64;
    let nn = nf * nf;
    if n > 500 {
        (S0 - S1 / nn) / nf
    } else if n > 80 {
        (S0 - (S1 - S2 / nn) / nn) / nf
    } else if n > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / nf
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / nf
    }
}

/// `x ln(x / np) + np - x`, evaluated by series when `x` is close to `np`.
fn deviance(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                return next;
            }
            s = next;
        }
        return s;
    }
    x * (x / np).ln() + np - x
}

/// Upper tail `P(H >= threshold)`.
///
/// The largest term inside the summation range is evaluated once in log
/// space; every other term is reached through the exact ratio of adjacent
/// probabilities, so all terms are summed relative to the peak.
pub fn hyper_tail(q: &TailQuery) -> f64 {
    let (lo, hi) = q.support();
    let start = q.threshold.max(lo);
    if start > hi {
        return 0.0;
    }
    let (n, x, k) = (q.population as f64, q.successes as f64, q.sample as f64);
    let mode = (((q.sample + 1) as f64 * (q.successes + 1) as f64) / (n + 2.0)).floor() as u64;
    let peak = mode.clamp(start, hi);

    let ln_peak = ln_hyper_pmf(q.population, q.successes, q.sample, peak);

    let mut sum = NeumaierSum::new(1.0);

    // terms above the peak shrink monotonically
    let mut rel = 1.0;
    for j in peak..hi {
        let jf = j as f64;
        rel *= ((x - jf) * (k - jf)) / ((jf + 1.0) * (n - x - k + jf + 1.0));
        sum.add(rel);
        if rel < 1e-20 * sum.value() {
            break;
        }
    }
    // and so do the terms between `start` and the peak
    let mut rel = 1.0;
    for j in (start + 1..=peak).rev() {
        let jf = j as f64;
        rel *= (jf * (n - x - k + jf)) / ((x - jf + 1.0) * (k - jf + 1.0));
        sum.add(rel);
        if rel < 1e-20 * sum.value() {
            break;
        }
    }

    (ln_peak + sum.value().ln()).exp().min(1.0)
}

struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    fn new(init: f64) -> Self {
        Self { sum: init, comp: 0.0 }
    }

    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_queries() {
        assert!(TailQuery::new(10, 11, 2, 2).is_err());
        assert!(TailQuery::new(10, 5, 0, 1).is_err());
        assert!(TailQuery::new(10, 5, 11, 6).is_err());
        assert!(TailQuery::new(10, 5, 4, 2).is_err());
        assert!(TailQuery::new(10, 5, 4, 5).is_err());
        assert!(TailQuery::new(10, 5, 4, 3).is_ok());
    }

    #[test]
    fn two_of_four() {
        // of the C(4,2) = 6 pairs only {0,1} is fully marked
        let q = TailQuery::new(4, 2, 2, 2).unwrap();
        assert!((hyper_tail(&q) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn everyone_marked() {
        for (n, k, a) in [(5, 3, 2), (50, 10, 8), (1000, 40, 21)] {
            let q = TailQuery::new(n, n, k, a).unwrap();
            assert!((hyper_tail(&q) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn nobody_marked() {
        let q = TailQuery::new(100, 0, 10, 8).unwrap();
        assert_eq!(hyper_tail(&q), 0.0);
    }

    #[test]
    fn anchor_value() {
        let q = TailQuery::new(10_000, 6_250, 200, 180).unwrap();
        let v = hyper_tail(&q);
        assert!((v / 5.616e-19 - 1.0).abs() < 1e-2, "{v:e}");
    }

    #[test]
    fn pmf_sums_to_one() {
        for (n, x, k) in [(10, 3, 4), (100, 37, 20), (500, 250, 50), (500, 499, 10)] {
            let s: f64 = (0..=k).map(|j| hyper_pmf(n, x, k, j)).sum();
            assert!((s - 1.0).abs() < 1e-12, "n={n} x={x} k={k} sum={s}");
        }
    }
}
