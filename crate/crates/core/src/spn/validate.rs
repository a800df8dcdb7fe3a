//! Structural soundness checks. Violations are collected, not raised, so a
//! caller sees every problem with a model at once.

use std::fmt;

use super::{Node, NodeId};
use crate::schema::Schema;

pub const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum ViolationKind {
    EmptyModel,
    RootOutOfRange,
    UnknownChild(usize),
    /// A child that does not precede its parent in the arena.
    NotTopological(usize),
    Cycle,
    Unreachable,
    NoChildren,
    RootScope { scope: Vec<usize> },
    WeightCount { weights: usize, children: usize },
    WeightOutOfRange { index: usize, weight: f64 },
    WeightSum(f64),
    /// Sum node whose children do not all share one scope.
    Completeness { first: Vec<usize>, other: Vec<usize> },
    /// Product node whose children share a feature.
    Decomposability { feature: usize },
    FeatureOutOfRange(usize),
    LeafKindMismatch(usize),
    GaussianParams { mu: f64, sigma: f64 },
    CategoryCount { probs: usize, categories: usize },
    CategoricalProbs(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// `None` for model-level violations.
    pub node: Option<NodeId>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(id) = self.node {
            write!(f, "node {}: ", id.0)?;
        }
        use ViolationKind::*;
        match &self.kind {
            EmptyModel => write!(f, "model has no nodes"),
            RootOutOfRange => write!(f, "root id out of range"),
            UnknownChild(c) => write!(f, "child {c} does not exist"),
            NotTopological(c) => write!(f, "child {c} is not listed before its parent"),
            Cycle => write!(f, "cycle through this node"),
            Unreachable => write!(f, "not reachable from the root"),
            NoChildren => write!(f, "inner node without children"),
            RootScope { scope } => write!(f, "root scope {scope:?} does not cover every feature"),
            WeightCount { weights, children } => {
                write!(f, "{weights} weights for {children} children")
            }
            WeightOutOfRange { index, weight } => write!(f, "weight {index} = {weight} outside (0, 1]"),
            WeightSum(s) => write!(f, "weights sum to {s}"),
            Completeness { first, other } => {
                write!(f, "completeness: child scopes {first:?} and {other:?} differ")
            }
            Decomposability { feature } => {
                write!(f, "decomposability: feature {feature} appears in two children")
            }
            FeatureOutOfRange(x) => write!(f, "leaf feature {x} outside the schema"),
            LeafKindMismatch(x) => write!(f, "leaf type does not match the kind of feature {x}"),
            GaussianParams { mu, sigma } => write!(f, "invalid gaussian parameters mu={mu} sigma={sigma}"),
            CategoryCount { probs, categories } => {
                write!(f, "{probs} probabilities for {categories} categories")
            }
            CategoricalProbs(msg) => write!(f, "categorical probabilities: {msg}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, pred: impl Fn(&ViolationKind) -> bool) -> bool {
        self.violations.iter().any(|v| pred(&v.kind))
    }

    fn push(&mut self, node: Option<usize>, kind: ViolationKind) {
        self.violations.push(Violation {
            node: node.map(NodeId),
            kind,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// Checks acyclicity, ordering, reachability, scope consistency,
/// completeness, decomposability, weight normalisation and leaf parameters.
pub fn validate(schema: &Schema, nodes: &[Node], root: NodeId) -> ValidationReport {
    let mut report = ValidationReport::default();
    if nodes.is_empty() {
        report.push(None, ViolationKind::EmptyModel);
        return report;
    }
    let n = nodes.len();
    let root_ok = root.0 < n;
    if !root_ok {
        report.push(None, ViolationKind::RootOutOfRange);
    }

    for (id, node) in nodes.iter().enumerate() {
        for c in node.children() {
            if c.0 >= n {
                report.push(Some(id), ViolationKind::UnknownChild(c.0));
            } else if c.0 >= id {
                report.push(Some(id), ViolationKind::NotTopological(c.0));
            }
        }
    }

    let scopes = compute_scopes(nodes, &mut report);

    if root_ok {
        let mut reached = vec![false; n];
        let mut stack = vec![root.0];
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut reached[id], true) {
                continue;
            }
            stack.extend(nodes[id].children().iter().map(|c| c.0).filter(|&c| c < n && !reached[c]));
        }
        for (id, r) in reached.iter().enumerate() {
            if !r {
                report.push(Some(id), ViolationKind::Unreachable);
            }
        }
        if let Some(scope) = &scopes[root.0] {
            if scope.len() != schema.len() || scope.iter().enumerate().any(|(i, &f)| i != f) {
                report.push(Some(root.0), ViolationKind::RootScope { scope: scope.clone() });
            }
        }
    }

    for (id, node) in nodes.iter().enumerate() {
        check_node(schema, id, node, &scopes, &mut report);
    }
    report
}

/// Bottom-up scopes via an iterative post-order walk; `None` for nodes on or
/// above a cycle or an unknown child.
fn compute_scopes(nodes: &[Node], report: &mut ValidationReport) -> Vec<Option<Vec<usize>>> {
    const WHITE: u8 = 0;
    const GRAY: u8 = 1;
    const BLACK: u8 = 2;
    let n = nodes.len();
    let mut color = vec![WHITE; n];
    let mut scopes: Vec<Option<Vec<usize>>> = vec![None; n];
    let mut broken = vec![false; n];

    for start in 0..n {
        if color[start] != WHITE {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        color[start] = GRAY;
        while let Some(&mut (id, ref mut next)) = stack.last_mut() {
            let children = nodes[id].children();
            if *next < children.len() {
                let c = children[*next].0;
                *next += 1;
                if c >= n {
                    broken[id] = true;
                } else if color[c] == GRAY {
                    report.push(Some(id), ViolationKind::Cycle);
                    broken[id] = true;
                } else if color[c] == WHITE {
                    color[c] = GRAY;
                    stack.push((c, 0));
                }
                continue;
            }
            stack.pop();
            color[id] = BLACK;
            if broken[id] {
                continue;
            }
            let scope = match nodes[id].leaf_feature() {
                Some(f) => Some(vec![f]),
                None => {
                    let mut all = Vec::new();
                    let mut ok = true;
                    for c in children {
                        match &scopes[c.0] {
                            Some(s) => all.extend_from_slice(s),
                            None => ok = false,
                        }
                    }
                    ok.then(|| {
                        all.sort_unstable();
                        all.dedup();
                        all
                    })
                }
            };
            if scope.is_none() {
                broken[id] = true;
            }
            scopes[id] = scope;
        }
    }
    scopes
}

fn check_node(schema: &Schema, id: usize, node: &Node, scopes: &[Option<Vec<usize>>], report: &mut ValidationReport) {
    match node {
        Node::Sum { children, weights } => {
            if children.is_empty() {
                report.push(Some(id), ViolationKind::NoChildren);
                return;
            }
            if weights.len() != children.len() {
                report.push(
                    Some(id),
                    ViolationKind::WeightCount {
                        weights: weights.len(),
                        children: children.len(),
                    },
                );
            }
            for (i, &w) in weights.iter().enumerate() {
                if !(w > 0.0 && w <= 1.0) {
                    report.push(Some(id), ViolationKind::WeightOutOfRange { index: i, weight: w });
                }
            }
            let sum: f64 = weights.iter().sum();
            if !((sum - 1.0).abs() <= WEIGHT_TOLERANCE) {
                report.push(Some(id), ViolationKind::WeightSum(sum));
            }
            let child_scopes: Vec<&Vec<usize>> = children.iter().filter_map(|c| scopes.get(c.0)?.as_ref()).collect();
            if let Some((first, rest)) = child_scopes.split_first() {
                if let Some(other) = rest.iter().find(|s| *s != first) {
                    report.push(
                        Some(id),
                        ViolationKind::Completeness {
                            first: (*first).clone(),
                            other: (*other).clone(),
                        },
                    );
                }
            }
        }
        Node::Product { children } => {
            if children.is_empty() {
                report.push(Some(id), ViolationKind::NoChildren);
                return;
            }
            let mut seen = std::collections::BTreeSet::new();
            for c in children {
                if let Some(Some(s)) = scopes.get(c.0) {
                    for &f in s {
                        if !seen.insert(f) {
                            report.push(Some(id), ViolationKind::Decomposability { feature: f });
                        }
                    }
                }
            }
        }
        Node::Gaussian(g) => {
            match schema.features().get(g.feature) {
                None => report.push(Some(id), ViolationKind::FeatureOutOfRange(g.feature)),
                Some(f) if f.n_categories().is_some() => {
                    report.push(Some(id), ViolationKind::LeafKindMismatch(g.feature))
                }
                Some(_) => {}
            }
            if !(g.mu.is_finite() && g.sigma.is_finite() && g.sigma > 0.0) {
                report.push(
                    Some(id),
                    ViolationKind::GaussianParams {
                        mu: g.mu,
                        sigma: g.sigma,
                    },
                );
            }
        }
        Node::Categorical(c) => {
            match schema.features().get(c.feature).map(|f| f.n_categories()) {
                None => report.push(Some(id), ViolationKind::FeatureOutOfRange(c.feature)),
                Some(None) => report.push(Some(id), ViolationKind::LeafKindMismatch(c.feature)),
                Some(Some(k)) if k != c.probs.len() => report.push(
                    Some(id),
                    ViolationKind::CategoryCount {
                        probs: c.probs.len(),
                        categories: k,
                    },
                ),
                Some(Some(_)) => {}
            }
            if let Some(p) = c.probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
                report.push(Some(id), ViolationKind::CategoricalProbs(format!("entry {p} outside (0, 1]")));
            }
            let sum: f64 = c.probs.iter().sum();
            if !((sum - 1.0).abs() <= WEIGHT_TOLERANCE) {
                report.push(Some(id), ViolationKind::CategoricalProbs(format!("sum to {sum}")));
            }
        }
    }
}
