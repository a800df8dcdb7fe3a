//! Randomized Dependence Coefficient: the largest canonical correlation
//! between random sine features of the two columns' empirical copulas.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::LearnConfig;
use crate::error::{Error, Result};

pub(crate) const CCA_RIDGE: f64 = 1e-9;

/// RDC of two equally long numeric columns (categorical columns enter as
/// their codes). Deterministic in `seed`; the same random features are
/// applied to both columns, so swapping the arguments gives the same value
/// up to rounding.
pub fn rdc(col_a: &[f64], col_b: &[f64], config: &LearnConfig, seed: u64) -> Result<f64> {
    if col_a.len() != col_b.len() {
        return Err(Error::Data(format!(
            "rdc: column lengths differ ({} vs {})",
            col_a.len(),
            col_b.len()
        )));
    }
    if col_a.len() < 3 {
        return Err(Error::Data(format!("rdc: need at least 3 rows, got {}", col_a.len())));
    }
    let ua = copula(col_a);
    let ub = copula(col_b);
    Ok(rdc_copula(&ua, &ub, config.rdc_features, config.rdc_scale, seed))
}

/// Empirical copula transform `rank / (n + 1)`, ties sharing their average
/// rank. Returns `None` for a constant column.
pub(crate) fn copula(col: &[f64]) -> Option<Vec<f64>> {
    let n = col.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| col[i].total_cmp(&col[j]));
    if n == 0 || col[order[0]] == col[order[n - 1]] {
        return None;
    }
    let mut u = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && col[order[end]] == col[order[start]] {
            end += 1;
        }
        // Ranks are 1-based; the tie group spans ranks start+1 ..= end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            u[i] = rank / (n + 1) as f64;
        }
        start = end;
    }
    Some(u)
}

/// Projection frequency spread. The copula lives on [0, 1]; scaling by 2π
/// lets `k` features reach a few full periods across the unit interval.
fn projection_std(k: usize, scale: f64) -> f64 {
    2.0 * PI * scale * k as f64
}

pub(crate) fn rdc_copula(ua: &Option<Vec<f64>>, ub: &Option<Vec<f64>>, k: usize, scale: f64, seed: u64) -> f64 {
    let (Some(ua), Some(ub)) = (ua, ub) else {
        return 0.0;
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, projection_std(k, scale)).expect("positive std");
    let w: Vec<f64> = (0..k).map(|_| normal.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..2.0 * PI)).collect();

    let x = sine_features(ua, &w, &b);
    let y = sine_features(ub, &w, &b);
    max_canonical_correlation(&x, &y, CCA_RIDGE)
}

/// Column-centred `sin(w_j u_i + b_j)` feature matrix (n × k).
fn sine_features(u: &[f64], w: &[f64], b: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut m = DMatrix::from_fn(n, w.len(), |i, j| (w[j] * u[i] + b[j]).sin());
    for mut col in m.column_iter_mut() {
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
    }
    m
}

/// Largest canonical correlation of two centred blocks with ridge
/// regularisation: the top singular value of `Lx⁻¹ Cxy Ly⁻ᵀ`.
pub(crate) fn max_canonical_correlation(x: &DMatrix<f64>, y: &DMatrix<f64>, ridge: f64) -> f64 {
    let n = x.nrows() as f64;
    let cxy = x.tr_mul(y) / n;
    let Some(lx) = regularized_cholesky(x.tr_mul(x) / n, ridge) else {
        return 0.0;
    };
    let Some(ly) = regularized_cholesky(y.tr_mul(y) / n, ridge) else {
        return 0.0;
    };
    let Some(a) = lx.solve_lower_triangular(&cxy) else {
        return 0.0;
    };
    // a · Ly⁻ᵀ = (Ly⁻¹ aᵀ)ᵀ
    let Some(mt) = ly.solve_lower_triangular(&a.transpose()) else {
        return 0.0;
    };
    let top = mt.singular_values().max();
    if top.is_finite() {
        top.clamp(0.0, 1.0)
    } else {
        0.0
    }
}

fn regularized_cholesky(c: DMatrix<f64>, ridge: f64) -> Option<DMatrix<f64>> {
    let mut r = ridge;
    for _ in 0..8 {
        let mut m = c.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += r;
        }
        if let Some(ch) = m.cholesky() {
            return Some(ch.unpack());
        }
        r *= 100.0;
    }
    None
}
