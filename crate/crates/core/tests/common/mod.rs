#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spn_explain::spn::{CategoricalLeaf, GaussianLeaf};
use spn_explain::{Feature, Node, NodeId, Schema, SpnModel, Subspace};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug)]
pub enum LeafKind {
    Categorical(usize),
    Gaussian,
}

/// Random valid SPN builder. Sum and product nodes alternate at random
/// until `max_depth`; leaves sit at depth `max_depth` at the latest.
pub struct RandomSpn<'a, R: Rng> {
    pub rng: &'a mut R,
    pub kinds: Vec<LeafKind>,
    pub max_depth: usize,
    nodes: Vec<Node>,
}

impl<'a, R: Rng> RandomSpn<'a, R> {
    pub fn new(rng: &'a mut R, kinds: Vec<LeafKind>, max_depth: usize) -> Self {
        RandomSpn {
            rng,
            kinds,
            max_depth,
            nodes: Vec::new(),
        }
    }

    pub fn build(mut self) -> SpnModel {
        let scope: Vec<usize> = (0..self.kinds.len()).collect();
        let root = self.node(&scope, 1);
        let schema = Schema::new(
            self.kinds
                .iter()
                .enumerate()
                .map(|(i, k)| match k {
                    LeafKind::Categorical(c) => Feature::categorical(format!("c{i}"), (0..*c).map(|j| format!("v{j}"))),
                    LeafKind::Gaussian => Feature::real(format!("r{i}")),
                })
                .collect(),
        )
        .unwrap();
        SpnModel::new(schema, self.nodes, root).unwrap()
    }

    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        NodeId(self.nodes.len() - 1)
    }

    fn leaf(&mut self, feature: usize) -> NodeId {
        let node = match self.kinds[feature] {
            LeafKind::Categorical(c) => {
                let raw: Vec<f64> = (0..c).map(|_| self.rng.random_range(0.05..1.0)).collect();
                let total: f64 = raw.iter().sum();
                Node::Categorical(CategoricalLeaf {
                    feature,
                    probs: raw.iter().map(|p| p / total).collect(),
                })
            }
            LeafKind::Gaussian => Node::Gaussian(GaussianLeaf {
                feature,
                mu: self.rng.random_range(-3.0..3.0),
                sigma: self.rng.random_range(0.3..2.0),
            }),
        };
        self.push(node)
    }

    fn weights(&mut self, k: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..k).map(|_| self.rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|w| w / total).collect()
    }

    fn node(&mut self, scope: &[usize], depth: usize) -> NodeId {
        if scope.len() == 1 && (depth >= self.max_depth || self.rng.random_bool(0.5)) {
            return self.leaf(scope[0]);
        }
        if depth >= self.max_depth {
            let children = scope.iter().map(|&f| self.leaf(f)).collect();
            return self.push(Node::Product { children });
        }
        let make_product = scope.len() > 1 && self.rng.random_bool(0.5);
        if make_product {
            let mut shuffled = scope.to_vec();
            shuffled.shuffle(self.rng);
            let parts = self.rng.random_range(2..=shuffled.len());
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); parts];
            for (i, f) in shuffled.into_iter().enumerate() {
                let g = if i < parts { i } else { self.rng.random_range(0..parts) };
                groups[g].push(f);
            }
            let children = groups.iter().map(|g| self.node(g, depth + 1)).collect();
            self.push(Node::Product { children })
        } else {
            let k = self.rng.random_range(2..=3);
            let children = (0..k).map(|_| self.node(scope, depth + 1)).collect();
            let weights = self.weights(k);
            self.push(Node::Sum { children, weights })
        }
    }
}

pub fn random_categorical_spn(seed: u64) -> SpnModel {
    let mut r = rng(seed);
    let n = r.random_range(1..=4);
    let kinds = (0..n).map(|_| LeafKind::Categorical(r.random_range(2..=4))).collect();
    let depth = r.random_range(1..=4);
    RandomSpn::new(&mut r, kinds, depth).build()
}

pub fn random_gaussian_spn(seed: u64, n: usize, max_depth: usize) -> SpnModel {
    let mut r = rng(seed);
    RandomSpn::new(&mut r, vec![LeafKind::Gaussian; n], max_depth).build()
}

/// Random model with a random mix of real and categorical features.
pub fn random_mixed_spn(seed: u64, n: usize, max_depth: usize) -> SpnModel {
    let mut r = rng(seed);
    let kinds = (0..n)
        .map(|_| {
            if r.random_bool(0.3) {
                LeafKind::Categorical(r.random_range(2..=4))
            } else {
                LeafKind::Gaussian
            }
        })
        .collect();
    RandomSpn::new(&mut r, kinds, max_depth).build()
}

/// A sample drawn uniformly over plausible values of each feature.
pub fn random_sample(model: &SpnModel, r: &mut impl Rng) -> Vec<f64> {
    model
        .schema()
        .features()
        .iter()
        .map(|f| match f.n_categories() {
            Some(c) => r.random_range(0..c) as f64,
            None => r.random_range(-4.0..4.0),
        })
        .collect()
}

/// Density of `x` restricted to the features flagged in `observed`,
/// computed by plain recursion over the node tree in the linear domain.
pub fn naive_density(model: &SpnModel, x: &[f64], observed: &[bool]) -> f64 {
    fn eval(nodes: &[Node], id: usize, x: &[f64], observed: &[bool]) -> f64 {
        match &nodes[id] {
            Node::Sum { children, weights } => children
                .iter()
                .zip(weights)
                .map(|(c, w)| w * eval(nodes, c.0, x, observed))
                .sum(),
            Node::Product { children } => children.iter().map(|c| eval(nodes, c.0, x, observed)).product(),
            Node::Gaussian(g) => {
                if !observed[g.feature] {
                    return 1.0;
                }
                let z = (x[g.feature] - g.mu) / g.sigma;
                (-0.5 * z * z).exp() / (g.sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            Node::Categorical(c) => {
                if !observed[c.feature] {
                    return 1.0;
                }
                c.probs[x[c.feature] as usize]
            }
        }
    }
    eval(model.nodes(), model.root().0, x, observed)
}

/// Every full assignment of a categorical-only model.
pub fn all_assignments(model: &SpnModel) -> Vec<Vec<f64>> {
    let cards: Vec<usize> = model
        .schema()
        .features()
        .iter()
        .map(|f| f.n_categories().expect("categorical model"))
        .collect();
    let mut out = vec![Vec::new()];
    for c in cards {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..c).map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v as f64);
                    p
                })
            })
            .collect();
    }
    out
}

/// Marginal probability of `x` on `subspace` by summing the naive joint
/// over every completion that agrees with `x` there.
pub fn brute_force_marginal(model: &SpnModel, x: &[f64], subspace: &Subspace) -> f64 {
    let all = vec![true; model.n_features()];
    all_assignments(model)
        .iter()
        .filter(|a| subspace.features().iter().all(|&f| a[f] == x[f]))
        .map(|a| naive_density(model, a, &all))
        .sum()
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

/// Adaptive Simpson on each of `panels` equal sub-intervals, so that no
/// narrow peak slips between the initial sample points.
pub fn integrate_panels(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| adaptive_simpson(f, a + i as f64 * h, a + (i + 1) as f64 * h, 1e-16))
        .sum()
}

/// Step-by-step backward elimination: at every step, re-enumerate each
/// single-feature removal and keep the one with the lowest remaining
/// density, lowest removed index on ties.
pub fn reference_backward(model: &SpnModel, x: &[f64]) -> Vec<(Subspace, f64)> {
    let n = model.n_features();
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    while current.len() > 1 {
        let mut best_ld = f64::INFINITY;
        let mut best_drop = usize::MAX;
        for &d in &current {
            let rest = Subspace::new(current.iter().copied().filter(|&f| f != d)).unwrap();
            let ld = model.log_marginal_subspace(x, &rest).unwrap();
            if ld < best_ld || (ld == best_ld && d < best_drop) {
                best_ld = ld;
                best_drop = d;
            }
        }
        current.retain(|&f| f != best_drop);
        out.push((Subspace::new(current.iter().copied()).unwrap(), best_ld));
    }
    out.reverse();
    out
}

/// Lowest-density subspace of every size `1..=n`, by enumerating all
/// non-empty subsets. Ties go to the lexicographically smaller subspace.
pub fn exhaustive_minima(model: &SpnModel, x: &[f64]) -> Vec<(Subspace, f64)> {
    let n = model.n_features();
    let mut best: Vec<Option<(Subspace, f64)>> = vec![None; n + 1];
    for mask in 1u32..(1 << n) {
        let s = Subspace::new((0..n).filter(|f| mask & (1 << f) != 0)).unwrap();
        let ld = model.log_marginal_subspace(x, &s).unwrap();
        let k = s.len();
        let replace = match &best[k] {
            None => true,
            Some((bs, bl)) => ld < *bl || (ld == *bl && s < *bs),
        };
        if replace {
            best[k] = Some((s, ld));
        }
    }
    best.into_iter().skip(1).map(|b| b.unwrap()).collect()
}

/// Gaussian product model over `n` independent features with the given
/// means and unit variances.
pub fn factorized_gaussian(mus: &[f64]) -> SpnModel {
    let mut nodes: Vec<Node> = mus
        .iter()
        .enumerate()
        .map(|(f, &mu)| Node::Gaussian(GaussianLeaf { feature: f, mu, sigma: 1.0 }))
        .collect();
    if mus.len() == 1 {
        return SpnModel::new(Schema::all_real(1), nodes, NodeId(0)).unwrap();
    }
    nodes.push(Node::Product {
        children: (0..mus.len()).map(NodeId).collect(),
    });
    let root = NodeId(nodes.len() - 1);
    SpnModel::new(Schema::all_real(mus.len()), nodes, root).unwrap()
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
