#![allow(dead_code, clippy::needless_range_loop)]

//! Independent reference implementations used as test oracles.

use povml::schema::{read_csv, RawTable, Schema};
use povml::synth::{write_survey, SurveyCounts};

/// Gini impurity of weighted class totals, straight from the definition.
pub fn gini_direct(labels: &[u32], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut sum_sq = 0.0;
    for c in classes {
        let wc: f64 = labels
            .iter()
            .zip(weights)
            .filter(|(l, _)| **l == c)
            .map(|(_, w)| w)
            .sum();
        sum_sq += (wc / total) * (wc / total);
    }
    1.0 - sum_sq
}

/// Exhaustive split search: every feature, every midpoint between
/// consecutive distinct values. Returns (feature, threshold, decrease) of the
/// first strictly best candidate in (feature, threshold) order.
pub fn brute_force_split(rows: &[Vec<f64>], labels: &[u32], weights: &[f64]) -> Option<(usize, f64, f64)> {
    let total: f64 = weights.iter().sum();
    let parent = gini_direct(labels, weights);
    let p = rows.first().map_or(0, Vec::len);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..p {
        let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let t = (pair[0] + pair[1]) / 2.0;
            let (mut ll, mut lw, mut rl, mut rw) = (vec![], vec![], vec![], vec![]);
            for ((r, &l), &w) in rows.iter().zip(labels).zip(weights) {
                if r[f] <= t {
                    ll.push(l);
                    lw.push(w);
                } else {
                    rl.push(l);
                    rw.push(w);
                }
            }
            let wl: f64 = lw.iter().sum();
            let wr: f64 = rw.iter().sum();
            if wl <= 0.0 || wr <= 0.0 {
                continue;
            }
            let dec = parent - wl / total * gini_direct(&ll, &lw) - wr / total * gini_direct(&rl, &rw);
            if dec > 1e-10 && best.is_none_or(|b| dec > b.2 + 1e-12) {
                best = Some((f, t, dec));
            }
        }
    }
    best
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns
/// eigenvalues in descending order with matching unit eigenvectors.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (values, vectors)
}

/// Sample covariance (n − 1 denominator) of row vectors.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let p = rows[0].len();
    let means: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut c = vec![vec![0.0; p]; p];
    for r in rows {
        for i in 0..p {
            for j in 0..p {
                c[i][j] += (r[i] - means[i]) * (r[j] - means[j]);
            }
        }
    }
    for row in &mut c {
        for v in row.iter_mut() {
            *v /= n - 1.0;
        }
    }
    c
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Synthetic survey table with `rows` rows.
pub fn survey_table(rows: usize, seed: u64) -> RawTable {
    let mut buf = Vec::new();
    write_survey(&mut buf, &SurveyCounts::scaled(rows), seed).unwrap();
    read_csv(buf.as_slice(), &Schema::survey(), Default::default()).unwrap()
}

/// Synthetic survey CSV text at the published size.
pub fn full_survey_csv(seed: u64) -> Vec<u8> {
    let mut buf = Vec::new();
    write_survey(&mut buf, &SurveyCounts::default(), seed).unwrap();
    buf
}
