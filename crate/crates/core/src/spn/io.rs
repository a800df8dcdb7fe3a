//! Versioned JSON model documents.
//!
//! ```json
//! {"version":1,
//!  "schema":[{"name":"x","kind":"real"}, {"name":"c","kind":"categorical","categories":["a","b"]}],
//!  "root":3,
//!  "nodes":[{"id":0,"type":"gaussian","feature":0,"mu":0.0,"sigma":1.0}, ...]}
//! ```
//!
//! Nodes are written one per line, children before parents. Floats carry
//! 17 significant digits so a saved model evaluates bit-identically after
//! loading.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CategoricalLeaf, GaussianLeaf, Node, NodeId, SpnModel};
use crate::error::{Error, Result};
use crate::fmt::{ser_opt_f64, ser_opt_vec_f64};
use crate::schema::{Feature, Schema};

pub const FORMAT_VERSION: u32 = 1;

/// Sums within this distance of 1 are renormalised on load; anything
/// further off is rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    version: u32,
    schema: Vec<Feature>,
    root: usize,
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq, Debug)]
#[serde(rename_all = "lowercase")]
enum NodeType {
    Sum,
    Product,
    Gaussian,
    Categorical,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: usize,
    #[serde(rename = "type")]
    kind: NodeType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    children: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "ser_opt_vec_f64")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "ser_opt_f64")]
    mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "ser_opt_f64")]
    sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "ser_opt_vec_f64")]
    probs: Option<Vec<f64>>,
}

impl NodeDoc {
    fn from_node(id: usize, node: &Node) -> Self {
        let mut doc = NodeDoc {
            id,
            kind: NodeType::Sum,
            children: None,
            weights: None,
            feature: None,
            mu: None,
            sigma: None,
            probs: None,
        };
        match node {
            Node::Sum { children, weights } => {
                doc.children = Some(children.iter().map(|c| c.0).collect());
                doc.weights = Some(weights.clone());
            }
            Node::Product { children } => {
                doc.kind = NodeType::Product;
                doc.children = Some(children.iter().map(|c| c.0).collect());
            }
            Node::Gaussian(g) => {
                doc.kind = NodeType::Gaussian;
                doc.feature = Some(g.feature);
                doc.mu = Some(g.mu);
                doc.sigma = Some(g.sigma);
            }
            Node::Categorical(c) => {
                doc.kind = NodeType::Categorical;
                doc.feature = Some(c.feature);
                doc.probs = Some(c.probs.clone());
            }
        }
        doc
    }

    fn into_node(self, line: usize) -> Result<Node> {
        let at = |what: &str| Error::Model(format!("line {line}: node {}: {what}", self.id));
        let children = |c: Option<Vec<usize>>| -> Result<Vec<NodeId>> {
            Ok(c.ok_or_else(|| at("missing \"children\""))?.into_iter().map(NodeId).collect())
        };
        Ok(match self.kind {
            NodeType::Sum => {
                let weights = self.weights.clone().ok_or_else(|| at("missing \"weights\""))?;
                let weights = renormalize(weights).map_err(|s| at(&format!("weights sum to {s}")))?;
                Node::Sum {
                    children: children(self.children)?,
                    weights,
                }
            }
            NodeType::Product => Node::Product {
                children: children(self.children)?,
            },
            NodeType::Gaussian => Node::Gaussian(GaussianLeaf {
                feature: self.feature.ok_or_else(|| at("missing \"feature\""))?,
                mu: self.mu.ok_or_else(|| at("missing or non-finite \"mu\""))?,
                sigma: self.sigma.ok_or_else(|| at("missing or non-finite \"sigma\""))?,
            }),
            NodeType::Categorical => {
                let probs = self.probs.clone().ok_or_else(|| at("missing \"probs\""))?;
                Node::Categorical(CategoricalLeaf {
                    feature: self.feature.ok_or_else(|| at("missing \"feature\""))?,
                    probs: renormalize(probs).map_err(|s| at(&format!("probabilities sum to {s}")))?,
                })
            }
        })
    }
}

fn renormalize(mut v: Vec<f64>) -> std::result::Result<Vec<f64>, f64> {
    let sum: f64 = v.iter().sum();
    if !((sum - 1.0).abs() <= RENORMALIZE_TOLERANCE) {
        return Err(sum);
    }
    // Sums already within the validation tolerance are kept bit-exact.
    if (sum - 1.0).abs() > super::validate::WEIGHT_TOLERANCE {
        v.iter_mut().for_each(|w| *w /= sum);
    }
    Ok(v)
}

impl SpnModel {
    pub fn to_json(&self) -> String {
        let schema = serde_json::to_string(self.schema()).expect("schema serialises");
        let mut out = format!(
            "{{\"version\":{FORMAT_VERSION},\n\"schema\":{schema},\n\"root\":{},\n\"nodes\":[\n",
            self.root().0
        );
        for (i, node) in self.nodes().iter().enumerate() {
            let line = serde_json::to_string(&NodeDoc::from_node(i, node)).expect("node serialises");
            out.push_str(&line);
            out.push_str(if i + 1 == self.node_count() { "\n" } else { ",\n" });
        }
        out.push_str("]}\n");
        out
    }

    /// Parses and validates a model document. Errors carry the line of the
    /// offending JSON text or node.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc =
            serde_json::from_str(text).map_err(|e| Error::Model(format!("line {}: {e}", e.line())))?;
        if doc.version != FORMAT_VERSION {
            return Err(Error::Model(format!(
                "line 1: unsupported version {} (expected {FORMAT_VERSION})",
                doc.version
            )));
        }
        let schema = Schema::new(doc.schema).map_err(|e| Error::Model(e.to_string()))?;
        let lines = node_lines(text, doc.nodes.len());
        let mut nodes = Vec::with_capacity(doc.nodes.len());
        for (pos, nd) in doc.nodes.into_iter().enumerate() {
            let line = lines.get(pos).copied().unwrap_or(0);
            if nd.id != pos {
                return Err(Error::Model(format!(
                    "line {line}: node at position {pos} has id {} (ids must equal positions)",
                    nd.id
                )));
            }
            nodes.push(nd.into_node(line)?);
        }
        SpnModel::new(schema, nodes, NodeId(doc.root)).map_err(|e| match e {
            Error::Invalid(report) => {
                let mut msg = String::from("invalid structure");
                for v in &report.violations {
                    let line = v.node.and_then(|id| lines.get(id.0)).copied();
                    match line {
                        Some(l) => msg.push_str(&format!("\n  line {l}: {v}")),
                        None => msg.push_str(&format!("\n  {v}")),
                    }
                }
                Error::Model(msg)
            }
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Best-effort line numbers (1-based) of the objects inside `"nodes":[...]`.
fn node_lines(text: &str, count: usize) -> Vec<usize> {
    let Some(start) = text.find("\"nodes\"") else {
        return Vec::new();
    };
    let bytes = text.as_bytes();
    let Some(open) = text[start..].find('[').map(|o| start + o) else {
        return Vec::new();
    };
    let mut lines = Vec::with_capacity(count);
    let mut line = 1 + text[..open].matches('\n').count();
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for &b in &bytes[open + 1..] {
        if in_str {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_str = false,
                b'\n' => line += 1,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'\n' => line += 1,
            b'{' | b'[' => {
                if depth == 0 && b == b'{' {
                    lines.push(line);
                }
                depth += 1;
            }
            b'}' => depth = depth.saturating_sub(1),
            b']' => {
                if depth == 0 {
                    break;
                }
                depth -= 1;
            }
            _ => {}
        }
    }
    lines
}
