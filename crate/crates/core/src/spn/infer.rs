use super::{Compiled, SpnModel};
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use crate::subspace::Subspace;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Real(f64),
    Category(usize),
}

/// One optional value per feature; `None` marginalises that feature out.
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub values: Vec<Option<Value>>,
}

impl Query {
    pub fn new(values: Vec<Option<Value>>) -> Self {
        Query { values }
    }

    pub fn marginal(n_features: usize) -> Self {
        Query {
            values: vec![None; n_features],
        }
    }

    pub fn set(mut self, feature: usize, value: Value) -> Self {
        self.values[feature] = Some(value);
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalStats {
    pub nodes_evaluated: usize,
}

impl SpnModel {
    /// `ln p(x_D)` where `D` is the set of instantiated features.
    pub fn log_density(&self, query: &Query) -> Result<f64> {
        self.log_density_traced(query).map(|(v, _)| v)
    }

    /// Like [`SpnModel::log_density`], also reporting how many nodes the
    /// forward pass touched.
    pub fn log_density_traced(&self, query: &Query) -> Result<(f64, EvalStats)> {
        let (x, mask) = self.encode_query(query)?;
        let mut buf = Vec::new();
        let v = self.eval_masked(&x, &mask, &mut buf);
        Ok((
            v,
            EvalStats {
                nodes_evaluated: buf.len(),
            },
        ))
    }

    /// `ln p(x_D)` for a full sample `x`, marginalising every feature outside
    /// `subspace`. Values outside the subspace are never read.
    pub fn log_marginal_subspace(&self, x: &[f64], subspace: &Subspace) -> Result<f64> {
        let mask = self.subspace_mask(x, subspace)?;
        let mut buf = Vec::new();
        Ok(self.eval_masked(x, &mask, &mut buf))
    }

    pub(crate) fn subspace_mask(&self, x: &[f64], subspace: &Subspace) -> Result<Vec<bool>> {
        let n = self.n_features();
        if x.len() != n {
            return Err(Error::Query(format!("sample has {} values, schema has {n}", x.len())));
        }
        if subspace.max_feature() >= n {
            return Err(Error::Query(format!("subspace {subspace} outside {n} features")));
        }
        let mut mask = vec![false; n];
        for &f in subspace.features() {
            self.schema().check_value(f, x[f])?;
            mask[f] = true;
        }
        Ok(mask)
    }

    fn encode_query(&self, query: &Query) -> Result<(Vec<f64>, Vec<bool>)> {
        let n = self.n_features();
        if query.values.len() != n {
            return Err(Error::Query(format!(
                "query has {} entries, schema has {n}",
                query.values.len()
            )));
        }
        let mut x = vec![0.0; n];
        let mut mask = vec![false; n];
        for (f, v) in query.values.iter().enumerate() {
            let Some(v) = v else { continue };
            let is_cat = self.schema().feature(f).n_categories().is_some();
            x[f] = match (v, is_cat) {
                (Value::Real(r), false) => *r,
                (Value::Category(c), true) => *c as f64,
                _ => {
                    return Err(Error::Query(format!(
                        "feature {f} ({}): value kind does not match schema",
                        self.schema().feature(f).name
                    )))
                }
            };
            self.schema().check_value(f, x[f])?;
            mask[f] = true;
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::Query("every feature is marginalised".into()));
        }
        Ok((x, mask))
    }

    /// Single bottom-up pass. Marginalised leaves contribute `ln 1 = 0`.
    /// Inputs must already be checked against the schema.
    pub(crate) fn eval_masked(&self, x: &[f64], mask: &[bool], buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        for node in self.compiled() {
            let v = match node {
                Compiled::Gaussian {
                    feature,
                    mu,
                    inv_sigma,
                    log_norm,
                } => {
                    if mask[*feature] {
                        let z = (x[*feature] - mu) * inv_sigma;
                        log_norm - 0.5 * z * z
                    } else {
                        0.0
                    }
                }
                Compiled::Categorical { feature, log_probs } => {
                    if mask[*feature] {
                        log_probs[x[*feature] as usize]
                    } else {
                        0.0
                    }
                }
                Compiled::Product { children } => children.iter().map(|&c| buf[c]).sum(),
                Compiled::Sum { children, log_weights } => {
                    let values: &[f64] = buf;
                    log_sum_exp(children.iter().zip(log_weights).map(|(&c, &lw)| values[c] + lw))
                }
            };
            buf.push(v);
        }
        buf[self.root().0]
    }
}
