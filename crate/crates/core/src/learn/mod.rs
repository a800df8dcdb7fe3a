//! LearnSPN-style structure learning.
//!
//! A slice of rows × columns becomes:
//! * a leaf, when it has a single column;
//! * a product of leaves, when it has fewer than `min_slice_rows` rows (or
//!   the recursion is too deep);
//! * a product over column groups, when the RDC dependency graph of its
//!   columns has more than one connected component;
//! * otherwise a sum over a 2-way GMM clustering of its rows.

mod gmm;
mod leaf;
mod rdc;

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numeric::mix_seed;
use crate::spn::{Node, NodeId, SpnModel};

pub use gmm::{cluster_rows, RowPartition};
pub use leaf::{fit_leaf, sigma_floor};
pub use rdc::rdc;

pub const MAX_DEPTH: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct LearnConfig {
    /// RDC threshold above which two columns count as dependent.
    pub alpha: f64,
    /// Slices with fewer rows are factorised into independent leaves.
    pub min_slice_rows: usize,
    /// Random sine features per column in the RDC.
    pub rdc_features: usize,
    pub rdc_scale: f64,
    pub gmm_components: usize,
    pub gmm_max_iters: usize,
    pub gmm_tol: f64,
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            alpha: 0.6,
            min_slice_rows: 200,
            rdc_features: 20,
            rdc_scale: 1.0 / 6.0,
            gmm_components: 2,
            gmm_max_iters: 100,
            gmm_tol: 1e-4,
            seed: 0,
        }
    }
}

impl LearnConfig {
    pub fn with_seed(seed: u64) -> Self {
        LearnConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.min_slice_rows < 2 {
            return bad(format!("min_slice_rows must be at least 2, got {}", self.min_slice_rows));
        }
        if self.rdc_features < 2 {
            return bad(format!("rdc_features must be at least 2, got {}", self.rdc_features));
        }
        if !(self.rdc_scale > 0.0 && self.rdc_scale.is_finite()) {
            return bad(format!("rdc_scale must be positive, got {}", self.rdc_scale));
        }
        if self.gmm_components != 2 {
            return bad(format!("gmm_components is fixed at 2, got {}", self.gmm_components));
        }
        if self.gmm_max_iters == 0 {
            return bad("gmm_max_iters must be positive".into());
        }
        if !(self.gmm_tol > 0.0) {
            return bad(format!("gmm_tol must be positive, got {}", self.gmm_tol));
        }
        Ok(())
    }

    /// Seed for the RDC features of one unordered column pair.
    pub fn pair_seed(&self, a: usize, b: usize) -> u64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        mix_seed(mix_seed(self.seed ^ 0x5244_4321, lo as u64), hi as u64)
    }
}

/// Row and column indices into a backing dataset.
#[derive(Clone, Debug)]
pub struct DataSlice<'a> {
    data: &'a Dataset,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl<'a> DataSlice<'a> {
    pub fn new(data: &'a Dataset, rows: Vec<usize>, cols: Vec<usize>) -> Result<Self> {
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::Data("empty data slice".into()));
        }
        if rows.iter().any(|&r| r >= data.n_rows()) || cols.iter().any(|&c| c >= data.n_cols()) {
            return Err(Error::Data("data slice index out of range".into()));
        }
        Ok(DataSlice { data, rows, cols })
    }

    pub fn full(data: &'a Dataset) -> Self {
        DataSlice {
            data,
            rows: (0..data.n_rows()).collect(),
            cols: (0..data.n_cols()).collect(),
        }
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows.iter().map(|&r| self.data.get(r, col)).collect()
    }
}

/// Groups the slice's columns into connected components of the graph with
/// an edge wherever `rdc >= alpha`. Components are sorted by their smallest
/// column; a single component means no split.
pub fn split_columns(slice: &DataSlice<'_>, config: &LearnConfig) -> Vec<Vec<usize>> {
    let cols = slice.cols();
    if cols.len() < 2 || slice.rows().len() < 3 {
        return vec![cols.to_vec()];
    }
    let copulas: Vec<Option<Vec<f64>>> = cols.par_iter().map(|&c| rdc::copula(&slice.column(c))).collect();
    let pairs: Vec<(usize, usize)> = (0..cols.len())
        .flat_map(|i| (i + 1..cols.len()).map(move |j| (i, j)))
        .collect();
    let dependent: Vec<bool> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let seed = config.pair_seed(cols[i], cols[j]);
            rdc::rdc_copula(&copulas[i], &copulas[j], config.rdc_features, config.rdc_scale, seed) >= config.alpha
        })
        .collect();

    let mut parent: Vec<usize> = (0..cols.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (&(i, j), &dep) in pairs.iter().zip(&dependent) {
        if dep {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of = vec![usize::MAX; cols.len()];
    for (i, &col) in cols.iter().enumerate() {
        let r = find(&mut parent, i);
        if group_of[r] == usize::MAX {
            group_of[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[group_of[r]].push(col);
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    groups.sort_by_key(|g| g[0]);
    groups
}

/// Learns an SPN over every column of `dataset`. Deterministic in
/// `config.seed`.
pub fn learn_spn(dataset: &Dataset, config: &LearnConfig) -> Result<SpnModel> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Data("cannot learn from an empty dataset".into()));
    }
    let floors: Vec<f64> = (0..dataset.n_cols())
        .map(|c| {
            let col = dataset.column(c);
            if col.iter().all(|v| v.is_nan()) {
                return Err(Error::Data(format!("column {c} has no values")));
            }
            Ok(sigma_floor(&col))
        })
        .collect::<Result<_>>()?;
    let mut builder = Builder {
        data: dataset,
        config,
        floors,
        nodes: Vec::new(),
    };
    let root = builder.build(DataSlice::full(dataset), 0, config.seed)?;
    SpnModel::new(dataset.schema().clone(), builder.nodes, root)
}

struct Builder<'a> {
    data: &'a Dataset,
    config: &'a LearnConfig,
    floors: Vec<f64>,
    nodes: Vec<Node>,
}

impl<'a> Builder<'a> {
    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        NodeId(self.nodes.len() - 1)
    }

    fn leaf(&mut self, slice: &DataSlice<'_>, col: usize) -> Result<NodeId> {
        let values = slice.column(col);
        let node = fit_leaf(col, &values, &self.data.schema().feature(col).kind, self.floors[col])?;
        Ok(self.push(node))
    }

    fn naive_factorization(&mut self, slice: &DataSlice<'_>) -> Result<NodeId> {
        if slice.cols().len() == 1 {
            return self.leaf(slice, slice.cols()[0]);
        }
        let children = slice
            .cols()
            .iter()
            .map(|&c| self.leaf(slice, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.push(Node::Product { children }))
    }

    /// `path` identifies the slice in the recursion tree and seeds its
    /// clustering.
    fn build(&mut self, slice: DataSlice<'a>, depth: usize, path: u64) -> Result<NodeId> {
        if slice.cols().len() == 1
            || slice.rows().len() < self.config.min_slice_rows
            || slice.rows().len() < 2
            || depth >= MAX_DEPTH
        {
            return self.naive_factorization(&slice);
        }

        let groups = split_columns(&slice, self.config);
        if groups.len() > 1 {
            let mut children = Vec::with_capacity(groups.len());
            for (i, cols) in groups.into_iter().enumerate() {
                let child = DataSlice::new(self.data, slice.rows().to_vec(), cols)?;
                children.push(self.build(child, depth + 1, mix_seed(path, 2 * i as u64 + 1))?);
            }
            return Ok(self.push(Node::Product { children }));
        }

        let partition = cluster_rows(&slice, self.config, mix_seed(path, 0))?;
        let mut children = Vec::with_capacity(partition.clusters.len());
        for (i, rows) in partition.clusters.into_iter().enumerate() {
            let child = DataSlice::new(self.data, rows, slice.cols().to_vec())?;
            children.push(self.build(child, depth + 1, mix_seed(path, 2 * i as u64 + 2))?);
        }
        Ok(self.push(Node::Sum {
            children,
            weights: partition.weights,
        }))
    }
}
