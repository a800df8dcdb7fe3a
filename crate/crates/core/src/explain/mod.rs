//! Outlier scores and subspace explanations.
//!
//! Scores are negative log-densities, so "lowest density" and "highest
//! outlier score" are the same ordering throughout.

mod search;
mod select;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::spn::SpnModel;
pub use crate::subspace::Subspace;

pub use search::{backward_elimination, backward_eval_count, forward_beam_search, forward_eval_bound, SearchOutcome};
pub use select::{elbow_select, zscore_select, ScoreStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    Elbow,
    Zscore,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Forward => "forward",
            Strategy::Backward => "backward",
        })
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::Elbow => "elbow",
            Selection::Zscore => "zscore",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Strategy::Forward),
            "backward" => Ok(Strategy::Backward),
            _ => Err(Error::Config(format!("unknown strategy {s:?}"))),
        }
    }
}

impl FromStr for Selection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elbow" => Ok(Selection::Elbow),
            "zscore" => Ok(Selection::Zscore),
            _ => Err(Error::Config(format!("unknown selection {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplainConfig {
    /// Beam width B of the forward search.
    pub beam_width: usize,
    /// Maximum forward-search depth S; `None` searches every size.
    pub max_depth: Option<usize>,
    /// Elbow threshold in nats.
    pub kappa: f64,
    pub strategy: Strategy,
    pub selection: Selection,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            beam_width: 10,
            max_depth: None,
            kappa: std::f64::consts::E,
            strategy: Strategy::Backward,
            selection: Selection::Elbow,
        }
    }
}

impl ExplainConfig {
    pub fn new(strategy: Strategy, selection: Selection) -> Self {
        ExplainConfig {
            strategy,
            selection,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beam_width == 0 {
            return Err(Error::Config("beam_width must be at least 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::Config(format!("kappa must be positive, got {}", self.kappa)));
        }
        Ok(())
    }

    /// Forward depth actually searched on `n` features.
    pub fn depth_for(&self, n: usize) -> usize {
        self.max_depth.unwrap_or(n).min(n)
    }
}

/// The lowest-density subspace found for one size.
#[derive(Clone, Debug, PartialEq)]
pub struct SizeBest {
    pub size: usize,
    pub subspace: Subspace,
    pub log_density: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplanationTrace {
    pub per_size: Vec<SizeBest>,
    pub selected: Subspace,
    pub selected_size: usize,
    /// Circuit evaluations spent by the search.
    pub eval_count: usize,
}

/// `-ln p(x_D)`; higher is more outlying.
pub fn outlier_score(model: &SpnModel, x: &[f64], subspace: &Subspace) -> Result<f64> {
    model.log_marginal_subspace(x, subspace).map(|ld| -ld)
}

/// Runs the configured search, then the configured selection. `training`
/// is required for z-score selection.
pub fn explain(
    model: &SpnModel,
    x: &[f64],
    config: &ExplainConfig,
    training: Option<&Dataset>,
) -> Result<ExplanationTrace> {
    config.validate()?;
    let n = model.n_features();
    if x.len() != n {
        return Err(Error::Query(format!("sample has {} values, schema has {n}", x.len())));
    }
    if config.selection == Selection::Zscore && training.is_none() {
        return Err(Error::Config("z-score selection requires training data".into()));
    }

    let outcome = if n == 1 {
        let subspace = Subspace::single(0);
        let log_density = model.log_marginal_subspace(x, &subspace)?;
        SearchOutcome {
            per_size: vec![SizeBest {
                size: 1,
                subspace,
                log_density,
            }],
            evals: 1,
        }
    } else {
        match config.strategy {
            Strategy::Forward => forward_beam_search(model, x, config.depth_for(n), config.beam_width)?,
            Strategy::Backward => backward_elimination(model, x)?,
        }
    };

    let chosen = match (config.selection, training) {
        (Selection::Elbow, _) => elbow_select(&outcome.per_size, config.kappa)?,
        (Selection::Zscore, Some(train)) => zscore_select(model, &outcome.per_size, train)?,
        (Selection::Zscore, None) => unreachable!("checked above"),
    };
    Ok(ExplanationTrace {
        per_size: outcome.per_size,
        selected_size: chosen.size,
        selected: chosen.subspace,
        eval_count: outcome.evals,
    })
}
