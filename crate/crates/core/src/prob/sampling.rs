use std::collections::HashSet;

use rand::Rng;

use crate::error::{ensure, Result};

/// Uniform `k`-subset of `0..pop_size`, returned in ascending order.
pub fn sample_without_replacement<R: Rng + ?Sized>(
    pop_size: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    ensure!(k <= pop_size, Argument, "cannot draw {k} from {pop_size}");
    let mut out = floyd(pop_size, k, rng);
    out.sort_unstable();
    Ok(out)
}

/// Uniform `k`-subset of `0..pop_size` minus `excluded`, ascending.
pub fn sample_excluding<R: Rng + ?Sized>(
    pop_size: usize,
    k: usize,
    excluded: &[usize],
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut ex = excluded.to_vec();
    ex.sort_unstable();
    ex.dedup();
    if let Some(&last) = ex.last() {
        ensure!(last < pop_size, Argument, "excluded index {last} >= {pop_size}");
    }
    let avail = pop_size - ex.len();
    ensure!(k <= avail, Argument, "cannot draw {k} from {avail} remaining");
    let mut out: Vec<usize> = floyd(avail, k, rng)
        .into_iter()
        .map(|r| skip_excluded(r, &ex))
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// Maps a rank among the non-excluded indices back to the index itself.
fn skip_excluded(rank: usize, sorted_ex: &[usize]) -> usize {
    let mut idx = rank;
    for &e in sorted_ex {
        if e <= idx {
            idx += 1;
        } else {
            break;
        }
    }
    idx
}

// Floyd's algorithm: exactly k draws, each subset equally likely.
fn floyd<R: Rng + ?Sized>(m: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    floyd_into(m, k, &mut out, rng);
    out
}

/// Floyd's draw into a reused buffer, unsorted. The caller checks `k <= m`.
pub(crate) fn floyd_into<R: Rng + ?Sized>(m: usize, k: usize, out: &mut Vec<usize>, rng: &mut R) {
    out.clear();
    if k > 64 {
        let mut seen = HashSet::with_capacity(k);
        for j in m - k..m {
            let t = rng.random_range(0..=j);
            let pick = if seen.contains(&t) { j } else { t };
            seen.insert(pick);
            out.push(pick);
        }
    } else {
        for j in m - k..m {
            let t = rng.random_range(0..=j);
            out.push(if out.contains(&t) { j } else { t });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::SimRng;

    #[test]
    fn full_and_empty() {
        let mut rng = SimRng::new(1, 0);
        assert_eq!(
            sample_without_replacement(5, 5, &mut rng).unwrap(),
            vec![0, 1, 2, 3, 4]
        );
        assert!(sample_without_replacement(5, 0, &mut rng).unwrap().is_empty());
        assert!(sample_without_replacement(5, 6, &mut rng).is_err());
    }

    #[test]
    fn excluding_never_returns_excluded() {
        let mut rng = SimRng::new(2, 0);
        for _ in 0..500 {
            let s = sample_excluding(10, 7, &[3, 0, 9], &mut rng).unwrap();
            assert_eq!(s, vec![1, 2, 4, 5, 6, 7, 8]);
        }
        for _ in 0..500 {
            let s = sample_excluding(30, 5, &[4, 17], &mut rng).unwrap();
            assert!(!s.contains(&4) && !s.contains(&17));
        }
        assert!(sample_excluding(4, 3, &[0, 1], &mut rng).is_err());
        assert!(sample_excluding(4, 1, &[4], &mut rng).is_err());
    }

    #[test]
    fn large_draws_are_distinct() {
        let mut rng = SimRng::new(3, 0);
        let s = sample_without_replacement(1000, 400, &mut rng).unwrap();
        assert_eq!(s.len(), 400);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }
}
