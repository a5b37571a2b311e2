//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use kgrag_explain::kg::{parse_qa_items, parse_triples, InputFormat, KnowledgeGraph, QaItem};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn graph(name: &str) -> KnowledgeGraph {
    let bytes = std::fs::read(fixture_path(name)).unwrap();
    parse_triples(&bytes, InputFormat::TriplesJson).unwrap()
}

pub fn qa(name: &str) -> Vec<QaItem> {
    parse_qa_items(&std::fs::read(fixture_path(name)).unwrap()).unwrap()
}

pub const CRITICAL_QUESTION: &str = "What does insulin regulate?";
pub const CRITICAL_INDEX: usize = 3;

pub fn critical_truth() -> Vec<String> {
    vec!["insulin".into(), "glucose uptake in muscle".into()]
}

/// Gauss-Jordan elimination with partial pivoting. `None` when a pivot
/// falls below `1e-10` times the largest entry.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-10 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Weighted least squares with intercept via the plain normal equations.
/// Returns `[intercept, coefficients...]`.
pub fn wls_oracle(rows: &[Vec<f64>], y: &[f64], w: &[f64]) -> Option<Vec<f64>> {
    let p = rows[0].len() + 1;
    let aug = |r: &[f64], j: usize| if j == 0 { 1.0 } else { r[j - 1] };
    let mut m = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for (i, r) in rows.iter().enumerate() {
        for a in 0..p {
            rhs[a] += w[i] * aug(r, a) * y[i];
            for b in 0..p {
                m[a][b] += w[i] * aug(r, a) * aug(r, b);
            }
        }
    }
    gauss_solve(m, rhs)
}

/// Every positive-negative pair: `(2·wins + ties, 2·P·N)`.
pub fn auc_pairs(scores: &[f64], labels: &[bool]) -> (u128, u128) {
    let (mut num, mut den) = (0u128, 0u128);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                den += 2;
                if scores[i] > scores[j] {
                    num += 2;
                } else if scores[i] == scores[j] {
                    num += 1;
                }
            }
        }
    }
    (num, den)
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// Optimal equal-weight coupling found by trying every matching.
pub fn wasserstein_brute(u: &[f64], v: &[f64], p: f64) -> f64 {
    let n = u.len() as f64;
    permutations(u.len())
        .iter()
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| (u[i] - v[j]).abs().powf(p)).sum::<f64>() / n)
        .fold(f64::INFINITY, f64::min)
        .powf(1.0 / p)
}

/// W1 as the area between the two empirical CDFs.
pub fn w1_cdf(u: &[f64], v: &[f64]) -> f64 {
    let mut points: Vec<f64> = u.iter().chain(v).copied().collect();
    points.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let cdf = |xs: &[f64], t: f64| xs.iter().filter(|&&x| x <= t).count() as f64 / n;
    points
        .windows(2)
        .map(|w| (cdf(u, w[0]) - cdf(v, w[0])).abs() * (w[1] - w[0]))
        .sum()
}

/// Computational-formula Pearson.
pub fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|a| a * a).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

pub fn cosine_oracle(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().rev().zip(v.iter().rev()).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().rev().map(|a| a * a).sum();
    let nv: f64 = v.iter().rev().map(|a| a * a).sum();
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        dot / (nu * nv).sqrt()
    }
}

pub fn jaccard_oracle(a: &[u8], b: &[u8]) -> f64 {
    let mut seen: BTreeMap<u8, (bool, bool)> = BTreeMap::new();
    for x in a {
        seen.entry(*x).or_default().0 = true;
    }
    for x in b {
        seen.entry(*x).or_default().1 = true;
    }
    if seen.is_empty() {
        return 1.0;
    }
    let both = seen.values().filter(|(p, q)| *p && *q).count();
    both as f64 / seen.len() as f64
}

/// Two-pass population standard deviation.
pub fn std_oracle(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    var.sqrt()
}

/// Argmax of the mean off-diagonal similarity; first index wins ties.
pub fn medoid_brute(sim: &[Vec<f64>]) -> Option<usize> {
    let n = sim.len();
    if n == 0 {
        return None;
    }
    if n == 1 {
        return Some(0);
    }
    let means: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| sim[i][j]).sum::<f64>() / (n - 1) as f64)
        .collect();
    let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    means.iter().position(|&m| m == best)
}
