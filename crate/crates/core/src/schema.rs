use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Real,
    Categorical { categories: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl Feature {
    pub fn real(name: impl Into<String>) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Real,
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Categorical {
                categories: categories.into_iter().map(Into::into).collect(),
            },
        }
    }

    /// Number of categories, or `None` for real features.
    pub fn n_categories(&self) -> Option<usize> {
        match &self.kind {
            FeatureKind::Real => None,
            FeatureKind::Categorical { categories } => Some(categories.len()),
        }
    }
}

/// Per-column names and kinds, shared by datasets and models.
///
/// Samples are passed around as `&[f64]`; categorical cells hold the
/// category index as an integral float.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema {
    features: Vec<Feature>,
}

impl Schema {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Data("schema has no columns".into()));
        }
        for (i, f) in features.iter().enumerate() {
            if let FeatureKind::Categorical { categories } = &f.kind {
                if categories.is_empty() {
                    return Err(Error::Data(format!("column {i} ({}) has no categories", f.name)));
                }
            }
        }
        Ok(Schema { features })
    }

    /// All-real schema with columns named `f0 .. f{n-1}`.
    pub fn all_real(n: usize) -> Self {
        Schema {
            features: (0..n).map(|i| Feature::real(format!("f{i}"))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> &Feature {
        &self.features[index]
    }

    /// Checks that cell `value` is admissible for column `index`.
    pub fn check_value(&self, index: usize, value: f64) -> Result<()> {
        let feature = self
            .features
            .get(index)
            .ok_or_else(|| Error::Query(format!("feature {index} out of range (schema has {})", self.len())))?;
        match feature.n_categories() {
            None if value.is_finite() => Ok(()),
            None => Err(Error::Query(format!("feature {index} ({}): non-finite value {value}", feature.name))),
            Some(k) => {
                if value.fract() == 0.0 && value >= 0.0 && (value as usize) < k {
                    Ok(())
                } else {
                    Err(Error::Query(format!(
                        "feature {index} ({}): category {value} outside 0..{k}",
                        feature.name
                    )))
                }
            }
        }
    }
}
