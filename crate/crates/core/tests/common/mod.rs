#![allow(dead_code)]

use snowsim::dag::{AvalancheParams, DagState, Transaction, VertexId};
use snowsim::markov::BirthDeathChain;

/// The nine-vertex example DAG. T1 is the genesis vertex; T2/T3 and
/// T6/T7/T9 are the two contested sets; every other vertex is virtuous.
pub struct Figure {
    pub dag: DagState,
    /// `ids[i]` is T(i+1).
    pub ids: Vec<VertexId>,
}

pub const FIGURE_CHITS: [u8; 9] = [1, 1, 0, 1, 1, 0, 0, 1, 1];
pub const FIGURE_CONFIDENCE: [u64; 9] = [6, 5, 0, 2, 3, 0, 0, 1, 1];

pub fn figure() -> Figure {
    let params = AvalancheParams::new(10, 8, 11, 150).unwrap();
    let mut dag = DagState::new(params, 8).unwrap();
    let outs = dag.genesis_outputs();
    let mut ids = vec![dag.genesis()];
    // (name, parents as 1-based labels, genesis output consumed)
    let layout: [(&str, &[usize], usize); 8] = [
        ("T2", &[1], 0),
        ("T3", &[1], 0),
        ("T4", &[2], 2),
        ("T5", &[2], 3),
        ("T6", &[3], 1),
        ("T7", &[3], 1),
        ("T8", &[4, 5], 4),
        ("T9", &[5], 1),
    ];
    for (name, parents, out) in layout {
        let ps: Vec<VertexId> = parents.iter().map(|&l| ids[l - 1]).collect();
        let v = Transaction::new(name, vec![outs[out]], 1).vertices(&ps).remove(0);
        ids.push(v.id);
        dag.on_receive_tx(v).unwrap();
    }
    for (i, &c) in FIGURE_CHITS.iter().enumerate().skip(1) {
        dag.record_query_result(&ids[i], if c == 1 { 10 } else { 0 }).unwrap();
    }
    Figure { dag, ids }
}

pub type Mat = Vec<Vec<f64>>;

/// Transition matrix of a birth-death chain.
pub fn dense(chain: &BirthDeathChain) -> Mat {
    let c = chain.size();
    let mut m = vec![vec![0.0; c + 1]; c + 1];
    for i in 0..=c {
        if i > 0 {
            m[i][i - 1] = chain.down(i);
        }
        if i < c {
            m[i][i + 1] = chain.up(i);
        }
        m[i][i] = chain.stay(i);
    }
    m
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut z = vec![vec![0.0; n]; n];
    for i in 0..n {
        for l in 0..n {
            if a[i][l] == 0.0 {
                continue;
            }
            for j in 0..n {
                z[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    z
}

pub fn matpow(m: &Mat, mut e: u64) -> Mat {
    let n = m.len();
    let mut acc: Mat = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    let mut base = m.clone();
    while e > 0 {
        if e & 1 == 1 {
            acc = matmul(&acc, &base);
        }
        base = matmul(&base, &base);
        e >>= 1;
    }
    acc
}

/// Expected absorption times from Gaussian elimination on (I - Q) E = 1.
pub fn dense_times(chain: &BirthDeathChain) -> Vec<f64> {
    let c = chain.size();
    let p = dense(chain);
    let n = c - 1;
    let mut a: Mat = (0..n)
        .map(|r| {
            let mut row: Vec<f64> = (0..n).map(|s| (r == s) as u8 as f64 - p[r + 1][s + 1]).collect();
            row.push(1.0);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for s in col..=n {
                    a[r][s] -= f * a[col][s];
                }
            }
        }
    }
    let mut e = vec![0.0; c + 1];
    for r in 0..n {
        e[r + 1] = a[r][n] / a[r][r];
    }
    e
}
