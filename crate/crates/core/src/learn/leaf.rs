use crate::error::{Error, Result};
use crate::numeric::{mean, std_dev};
use crate::schema::FeatureKind;
use crate::spn::{CategoricalLeaf, GaussianLeaf, Node};

/// `1e-6 ×` the column's standard deviation, or `1e-6` for a constant
/// column.
pub fn sigma_floor(column: &[f64]) -> f64 {
    let sd = if column.is_empty() { 0.0 } else { std_dev(column) };
    1e-6 * if sd > 0.0 { sd } else { 1.0 }
}

/// Fits a univariate leaf on `values` of `feature`: a maximum-likelihood
/// Gaussian (σ clamped to `sigma_floor`) for real features, add-one smoothed
/// frequencies for categorical ones.
pub fn fit_leaf(feature: usize, values: &[f64], kind: &FeatureKind, sigma_floor: f64) -> Result<Node> {
    if values.is_empty() {
        return Err(Error::Data(format!("cannot fit a leaf for feature {feature} on no values")));
    }
    Ok(match kind {
        FeatureKind::Real => Node::Gaussian(GaussianLeaf {
            feature,
            mu: mean(values),
            sigma: std_dev(values).max(sigma_floor),
        }),
        FeatureKind::Categorical { categories } => {
            let mut counts = vec![1.0; categories.len()];
            for &v in values {
                counts[v as usize] += 1.0;
            }
            let total = values.len() as f64 + categories.len() as f64;
            Node::Categorical(CategoricalLeaf {
                feature,
                probs: counts.into_iter().map(|c| c / total).collect(),
            })
        }
    })
}
