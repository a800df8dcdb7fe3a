//! Row clustering with a diagonal-covariance Gaussian mixture fitted by EM.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DataSlice, LearnConfig};
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, LN_SQRT_2PI};

/// Variance floor in standardised units.
const VAR_FLOOR: f64 = 1e-6;

/// A hard partition of slice rows into clusters, with the cluster
/// proportions used as sum-node weights.
#[derive(Clone, Debug, PartialEq)]
pub struct RowPartition {
    pub clusters: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
    /// True when EM degenerated and a random balanced split was used.
    pub fallback: bool,
}

/// Splits the slice rows into `config.gmm_components` clusters by maximum
/// responsibility under a fitted diagonal GMM. Falls back to a seeded
/// random balanced split when a component ends up empty.
pub fn cluster_rows(slice: &DataSlice<'_>, config: &LearnConfig, seed: u64) -> Result<RowPartition> {
    let n = slice.rows().len();
    let k = config.gmm_components;
    if n < k.max(2) {
        return Err(Error::Data(format!("cluster_rows: need at least {} rows, got {n}", k.max(2))));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = standardized(slice);
    let d = slice.cols().len();

    let labels = fit(&x, n, d, k, config, &mut rng);
    let mut clusters = vec![Vec::new(); k];
    if let Some(labels) = labels {
        for (i, &l) in labels.iter().enumerate() {
            clusters[l].push(slice.rows()[i]);
        }
    }
    let fallback = clusters.iter().any(|c| c.is_empty());
    if fallback {
        let mut rows = slice.rows().to_vec();
        rows.shuffle(&mut rng);
        clusters = (0..k)
            .map(|c| rows[c * n / k..(c + 1) * n / k].to_vec())
            .map(|mut v| {
                v.sort_unstable();
                v
            })
            .collect();
    }
    let weights = clusters.iter().map(|c| c.len() as f64 / n as f64).collect();
    Ok(RowPartition {
        clusters,
        weights,
        fallback,
    })
}

/// Row-major `n × d` matrix, each column shifted to zero mean and scaled to
/// unit variance (constant columns become zero).
fn standardized(slice: &DataSlice<'_>) -> Vec<f64> {
    let n = slice.rows().len();
    let d = slice.cols().len();
    let mut x = vec![0.0; n * d];
    for (j, &c) in slice.cols().iter().enumerate() {
        let col: Vec<f64> = slice.rows().iter().map(|&r| slice.data().get(r, c)).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        for (i, v) in col.iter().enumerate() {
            x[i * d + j] = if sd > 0.0 { (v - mean) / sd } else { 0.0 };
        }
    }
    x
}

struct Params {
    log_weights: Vec<f64>,
    means: Vec<f64>,
    vars: Vec<f64>,
}

fn fit(x: &[f64], n: usize, d: usize, k: usize, config: &LearnConfig, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    let centers = kmeans_pp(x, n, d, k, rng);
    // Initial hard assignment to the nearest seed.
    let mut resp = vec![0.0; n * k];
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        let best = (0..k)
            .min_by(|&a, &b| sq_dist(row, &centers[a]).total_cmp(&sq_dist(row, &centers[b])))
            .expect("k > 0");
        resp[i * k + best] = 1.0;
    }
    let mut params = m_step(x, &resp, n, d, k)?;
    let mut prev = f64::NEG_INFINITY;
    let mut log_r = vec![0.0; k];
    for _ in 0..config.gmm_max_iters {
        let mut ll = 0.0;
        for i in 0..n {
            let row = &x[i * d..(i + 1) * d];
            for (c, lr) in log_r.iter_mut().enumerate() {
                *lr = params.log_weights[c] + component_log_pdf(row, &params, c, d);
            }
            let norm = log_sum_exp(log_r.iter().copied());
            ll += norm;
            for c in 0..k {
                resp[i * k + c] = (log_r[c] - norm).exp();
            }
        }
        let avg = ll / n as f64;
        params = m_step(x, &resp, n, d, k)?;
        if (avg - prev).abs() < config.gmm_tol {
            break;
        }
        prev = avg;
    }

    let labels = (0..n)
        .map(|i| {
            let row = &x[i * d..(i + 1) * d];
            let scores: Vec<f64> = (0..k)
                .map(|c| params.log_weights[c] + component_log_pdf(row, &params, c, d))
                .collect();
            // First maximum wins ties.
            let mut best = 0;
            for c in 1..k {
                if scores[c] > scores[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    Some(labels)
}

fn kmeans_pp(x: &[f64], n: usize, d: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let row = |i: usize| x[i * d..(i + 1) * d].to_vec();
    let mut centers = vec![row(rng.random_range(0..n))];
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(&x[i * d..(i + 1) * d], &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(row(pick));
        let c = centers.last().expect("just pushed");
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min(sq_dist(&x[i * d..(i + 1) * d], c));
        }
    }
    centers
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn component_log_pdf(row: &[f64], p: &Params, c: usize, d: usize) -> f64 {
    let mut s = 0.0;
    for (j, v) in row.iter().enumerate().take(d) {
        let var = p.vars[c * d + j];
        let z = v - p.means[c * d + j];
        s += -LN_SQRT_2PI - 0.5 * var.ln() - 0.5 * z * z / var;
    }
    s
}

/// `None` when a component has lost all its mass.
fn m_step(x: &[f64], resp: &[f64], n: usize, d: usize, k: usize) -> Option<Params> {
    let mut nk = vec![0.0; k];
    let mut means = vec![0.0; k * d];
    for i in 0..n {
        for c in 0..k {
            let r = resp[i * k + c];
            nk[c] += r;
            for j in 0..d {
                means[c * d + j] += r * x[i * d + j];
            }
        }
    }
    if nk.iter().any(|&m| m < 1e-10) {
        return None;
    }
    for c in 0..k {
        for j in 0..d {
            means[c * d + j] /= nk[c];
        }
    }
    let mut vars = vec![0.0; k * d];
    for i in 0..n {
        for c in 0..k {
            let r = resp[i * k + c];
            for j in 0..d {
                let z = x[i * d + j] - means[c * d + j];
                vars[c * d + j] += r * z * z;
            }
        }
    }
    for c in 0..k {
        for j in 0..d {
            vars[c * d + j] = (vars[c * d + j] / nk[c]).max(VAR_FLOOR);
        }
    }
    Some(Params {
        log_weights: nk.iter().map(|m| (m / n as f64).ln()).collect(),
        means,
        vars,
    })
}
