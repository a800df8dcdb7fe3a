//! Sum-product network representation and exact inference.
//!
//! Nodes live in a flat arena indexed by [`NodeId`]. Children always have a
//! smaller id than their parents and the root is the last node, so a single
//! forward pass over the arena evaluates the whole circuit.

mod infer;
pub mod io;
pub mod validate;

use std::fmt;

use crate::error::{Error, Result};
use crate::numeric::LN_SQRT_2PI;
use crate::schema::Schema;

pub use infer::{EvalStats, Query, Value};
pub use validate::{validate, ValidationReport, Violation, ViolationKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianLeaf {
    pub feature: usize,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalLeaf {
    pub feature: usize,
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    /// Mixture over children sharing one scope.
    Sum { children: Vec<NodeId>, weights: Vec<f64> },
    /// Factorisation over children with disjoint scopes.
    Product { children: Vec<NodeId> },
    Gaussian(GaussianLeaf),
    Categorical(CategoricalLeaf),
}

impl Node {
    pub fn children(&self) -> &[NodeId] {
        match self {
            Node::Sum { children, .. } | Node::Product { children } => children,
            Node::Gaussian(_) | Node::Categorical(_) => &[],
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Gaussian(_) | Node::Categorical(_))
    }

    pub fn leaf_feature(&self) -> Option<usize> {
        match self {
            Node::Gaussian(g) => Some(g.feature),
            Node::Categorical(c) => Some(c.feature),
            _ => None,
        }
    }
}

/// Node parameters in the form the evaluator wants them.
#[derive(Clone, Debug)]
pub(crate) enum Compiled {
    Sum { children: Vec<usize>, log_weights: Vec<f64> },
    Product { children: Vec<usize> },
    Gaussian { feature: usize, mu: f64, inv_sigma: f64, log_norm: f64 },
    Categorical { feature: usize, log_probs: Vec<f64> },
}

/// A validated, immutable SPN over a fixed schema.
#[derive(Clone, Debug)]
pub struct SpnModel {
    schema: Schema,
    nodes: Vec<Node>,
    root: NodeId,
    compiled: Vec<Compiled>,
}

impl SpnModel {
    /// Builds a model, rejecting any structure that fails [`validate`].
    pub fn new(schema: Schema, nodes: Vec<Node>, root: NodeId) -> Result<Self> {
        let report = validate(&schema, &nodes, root);
        if !report.is_ok() {
            return Err(Error::Invalid(report));
        }
        let compiled = nodes.iter().map(compile).collect();
        Ok(SpnModel {
            schema,
            nodes,
            root,
            compiled,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn root_node(&self) -> &Node {
        &self.nodes[self.root.0]
    }

    /// Number of nodes N; the cost of one query is linear in it.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Re-runs the structural checks. Always ok for a constructed model.
    pub fn validate(&self) -> ValidationReport {
        validate(&self.schema, &self.nodes, self.root)
    }

    pub(crate) fn compiled(&self) -> &[Compiled] {
        &self.compiled
    }
}

fn compile(node: &Node) -> Compiled {
    match node {
        Node::Sum { children, weights } => Compiled::Sum {
            children: children.iter().map(|c| c.0).collect(),
            log_weights: weights.iter().map(|w| w.ln()).collect(),
        },
        Node::Product { children } => Compiled::Product {
            children: children.iter().map(|c| c.0).collect(),
        },
        Node::Gaussian(g) => Compiled::Gaussian {
            feature: g.feature,
            mu: g.mu,
            inv_sigma: 1.0 / g.sigma,
            log_norm: -LN_SQRT_2PI - g.sigma.ln(),
        },
        Node::Categorical(c) => Compiled::Categorical {
            feature: c.feature,
            log_probs: c.probs.iter().map(|p| p.ln()).collect(),
        },
    }
}
