use std::collections::BTreeSet;

use super::SizeBest;
use crate::error::{Error, Result};
use crate::spn::SpnModel;
use crate::subspace::Subspace;

/// Per-size results of a subspace search and the number of circuit
/// evaluations it spent.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub per_size: Vec<SizeBest>,
    pub evals: usize,
}

/// Evaluates marginals of one sample, counting every circuit pass.
pub(crate) struct Scorer<'a> {
    model: &'a SpnModel,
    x: &'a [f64],
    mask: Vec<bool>,
    buf: Vec<f64>,
    pub(crate) evals: usize,
}

impl<'a> Scorer<'a> {
    /// Checks every value of `x` against the schema up front, since the
    /// search may touch any feature.
    pub(crate) fn new(model: &'a SpnModel, x: &'a [f64]) -> Result<Self> {
        let n = model.n_features();
        model.subspace_mask(x, &Subspace::full(n))?;
        Ok(Scorer {
            model,
            x,
            mask: vec![false; n],
            buf: Vec::with_capacity(model.node_count()),
            evals: 0,
        })
    }

    pub(crate) fn log_density(&mut self, subspace: &Subspace) -> f64 {
        self.mask.iter_mut().for_each(|m| *m = false);
        for &f in subspace.features() {
            self.mask[f] = true;
        }
        self.evals += 1;
        self.model.eval_masked(self.x, &self.mask, &mut self.buf)
    }
}

/// Ascending log-density, then lexicographic subspace.
fn by_density(a: &(f64, Subspace), b: &(f64, Subspace)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1))
}

/// Bottom-up beam search: keeps the `beam_width` lowest-density subspaces
/// of each size as hypotheses for the next, and records the single lowest
/// one per size `1..=max_depth`.
pub fn forward_beam_search(model: &SpnModel, x: &[f64], max_depth: usize, beam_width: usize) -> Result<SearchOutcome> {
    let n = model.n_features();
    if max_depth == 0 || max_depth > n {
        return Err(Error::Config(format!("max_depth must lie in 1..={n}, got {max_depth}")));
    }
    if beam_width == 0 {
        return Err(Error::Config("beam_width must be at least 1".into()));
    }
    let mut scorer = Scorer::new(model, x)?;
    let mut per_size = Vec::with_capacity(max_depth);

    let mut scored: Vec<(f64, Subspace)> = (0..n)
        .map(|f| {
            let s = Subspace::single(f);
            (scorer.log_density(&s), s)
        })
        .collect();
    for size in 1..=max_depth {
        if size > 1 {
            let candidates: BTreeSet<Subspace> = scored
                .iter()
                .flat_map(|(_, h)| (0..n).filter(|f| !h.contains(*f)).map(|f| h.with(f)))
                .collect();
            scored = candidates.into_iter().map(|s| (scorer.log_density(&s), s)).collect();
        }
        scored.sort_by(by_density);
        scored.truncate(beam_width);
        let (log_density, subspace) = scored[0].clone();
        per_size.push(SizeBest {
            size,
            subspace,
            log_density,
        });
    }
    Ok(SearchOutcome {
        per_size,
        evals: scorer.evals,
    })
}

/// Top-down greedy elimination from the full feature set. Each step drops
/// the feature whose removal leaves the lowest marginal density (the most
/// outlying remaining subspace); ties drop the lowest index. Returns sizes
/// `1..n-1` in ascending order and spends exactly `n(n+1)/2 - 1` evaluations.
pub fn backward_elimination(model: &SpnModel, x: &[f64]) -> Result<SearchOutcome> {
    let n = model.n_features();
    if n < 2 {
        return Err(Error::Config(format!("backward elimination needs at least 2 features, got {n}")));
    }
    let mut scorer = Scorer::new(model, x)?;
    let mut current = Subspace::full(n);
    let mut per_size = Vec::with_capacity(n - 1);
    while current.len() > 1 {
        let mut best: Option<(f64, Subspace)> = None;
        for &f in current.features() {
            let candidate = current.without(f).expect("len > 1");
            let ld = scorer.log_density(&candidate);
            // Strict comparison keeps the lowest removed index on ties.
            if best.as_ref().is_none_or(|(b, _)| ld < *b) {
                best = Some((ld, candidate));
            }
        }
        let (log_density, subspace) = best.expect("at least one candidate");
        per_size.push(SizeBest {
            size: subspace.len(),
            subspace: subspace.clone(),
            log_density,
        });
        current = subspace;
    }
    per_size.reverse();
    Ok(SearchOutcome {
        per_size,
        evals: scorer.evals,
    })
}

/// Upper bound on forward-search evaluations: `B·n·S + n`.
pub fn forward_eval_bound(n: usize, beam_width: usize, max_depth: usize) -> usize {
    beam_width * n * max_depth + n
}

/// Exact backward-elimination evaluation count: `n(n+1)/2 - 1`.
pub fn backward_eval_count(n: usize) -> usize {
    n * (n + 1) / 2 - 1
}
