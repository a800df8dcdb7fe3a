//! Picking one explanation out of the per-size search results.

use super::SizeBest;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::spn::SpnModel;
use crate::subspace::Subspace;

fn check_contiguous(per_size: &[SizeBest]) -> Result<()> {
    if per_size.is_empty() {
        return Err(Error::Config("no candidate subspaces to select from".into()));
    }
    for (i, s) in per_size.iter().enumerate() {
        if s.size != i + 1 {
            return Err(Error::Config(format!(
                "candidate sizes must run 1, 2, .. without gaps; entry {i} has size {}",
                s.size
            )));
        }
    }
    Ok(())
}

/// Elbow rule: the size-`k+1` entry for the smallest `k` whose drop in
/// minimal log-density `ld(k) - ld(k+1)` exceeds `kappa`, else the size-1
/// entry.
pub fn elbow_select(per_size: &[SizeBest], kappa: f64) -> Result<SizeBest> {
    check_contiguous(per_size)?;
    let pick = per_size
        .windows(2)
        .find(|w| w[0].log_density - w[1].log_density > kappa)
        .map(|w| &w[1])
        .unwrap_or(&per_size[0]);
    Ok(pick.clone())
}

/// Mean and population standard deviation of the training set's outlier
/// scores in one subspace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreStats {
    pub mean: f64,
    pub std: f64,
}

impl ScoreStats {
    pub fn compute(model: &SpnModel, training: &Dataset, subspace: &Subspace) -> Result<Self> {
        if training.is_empty() {
            return Err(Error::Data("z-score selection needs training rows".into()));
        }
        let scores = training
            .rows()
            .map(|r| model.log_marginal_subspace(r, subspace).map(|ld| -ld))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self::from_scores(&scores))
    }

    pub fn from_scores(scores: &[f64]) -> Self {
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        ScoreStats { mean, std: var.sqrt() }
    }

    /// `(score - mean) / std`, defined as 0 when `std` is 0 or the result is
    /// not a number.
    pub fn z(&self, score: f64) -> f64 {
        if self.std == 0.0 {
            return 0.0;
        }
        let z = (score - self.mean) / self.std;
        if z.is_nan() {
            0.0
        } else {
            z
        }
    }
}

/// Returns the candidate whose score has the largest z-value relative to
/// the training rows' scores in the same subspace; ties go to the smallest
/// size.
pub fn zscore_select(model: &SpnModel, per_size: &[SizeBest], training: &Dataset) -> Result<SizeBest> {
    check_contiguous(per_size)?;
    let zs = per_size
        .iter()
        .map(|s| Ok(ScoreStats::compute(model, training, &s.subspace)?.z(-s.log_density)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_size[argmax_first(&zs)].clone())
}

pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
