use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A non-empty set of feature indices, kept sorted and deduplicated so that
/// equal sets compare, hash and order identically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Subspace(Vec<usize>);

impl Subspace {
    pub fn new(features: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<usize> = features.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(Error::Query("empty subspace".into()));
        }
        Ok(Subspace(v))
    }

    pub fn single(feature: usize) -> Self {
        Subspace(vec![feature])
    }

    /// `{0, .., n-1}`; `n` must be positive.
    pub fn full(n: usize) -> Self {
        assert!(n > 0, "full subspace of zero features");
        Subspace((0..n).collect())
    }

    pub fn features(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, feature: usize) -> bool {
        self.0.binary_search(&feature).is_ok()
    }

    pub fn max_feature(&self) -> usize {
        *self.0.last().expect("non-empty")
    }

    pub fn with(&self, feature: usize) -> Self {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&feature) {
            v.insert(pos, feature);
        }
        Subspace(v)
    }

    /// Removes `feature`; `None` if that would leave the set empty.
    pub fn without(&self, feature: usize) -> Option<Self> {
        let v: Vec<usize> = self.0.iter().copied().filter(|&f| f != feature).collect();
        (!v.is_empty()).then_some(Subspace(v))
    }

    pub fn intersection_len(&self, other: &Subspace) -> usize {
        self.0.iter().filter(|f| other.contains(**f)).count()
    }
}

impl<'de> Deserialize<'de> for Subspace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        Subspace::new(v).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "}}")
    }
}
