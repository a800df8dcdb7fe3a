mod common;

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use common::rng;
use spn_explain::learn::{cluster_rows, rdc, split_columns, DataSlice};
use spn_explain::{learn_spn, Dataset, Feature, LearnConfig, Node, Schema, SpnModel, Subspace};

fn uniform(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random::<f64>()).collect()
}

/// Independent RDC: own feature draws, canonical correlations from the
/// eigenvalues of `Cxx^-1/2 Cxy Cyy^-1 Cyx Cxx^-1/2`.
fn oracle_rdc(a: &[f64], b: &[f64], seed: u64) -> f64 {
    let n = a.len();
    let ranks = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|x| {
                let below = v.iter().filter(|y| *y < x).count() as f64;
                let equal = v.iter().filter(|y| *y == x).count() as f64;
                (below + (equal + 1.0) / 2.0) / (n as f64 + 1.0)
            })
            .collect()
    };
    let (ua, ub) = (ranks(a), ranks(b));
    let k = 20;
    let mut r = rng(seed);
    let normal = Normal::new(0.0, 2.0 * PI * k as f64 / 6.0).unwrap();
    let w: Vec<f64> = (0..k).map(|_| normal.sample(&mut r)).collect();
    let c: Vec<f64> = (0..k).map(|_| r.random_range(0.0..2.0 * PI)).collect();
    let features = |u: &[f64]| {
        let mut m = DMatrix::from_fn(n, k, |i, j| (w[j] * u[i] + c[j]).sin());
        for j in 0..k {
            let mean = m.column(j).mean();
            m.column_mut(j).add_scalar_mut(-mean);
        }
        m
    };
    let (x, y) = (features(&ua), features(&ub));
    let ridge = DMatrix::<f64>::identity(k, k) * 1e-9;
    let cxx = x.transpose() * &x / n as f64 + &ridge;
    let cyy = y.transpose() * &y / n as f64 + &ridge;
    let cxy = x.transpose() * &y / n as f64;
    let eig = SymmetricEigen::new(cxx);
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.max(1e-300).sqrt()))
        * eig.eigenvectors.transpose();
    let m = &inv_sqrt * &cxy * cyy.try_inverse().unwrap() * cxy.transpose() * &inv_sqrt;
    let top = SymmetricEigen::new(m).eigenvalues.max();
    top.max(0.0).sqrt().min(1.0)
}

#[test]
fn rdc_of_identical_columns_is_near_one() {
    let cfg = LearnConfig::default();
    let mut r = rng(5);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let a: Vec<f64> = (0..500).map(|_| normal.sample(&mut r)).collect();
    let got = rdc(&a, &a, &cfg, 11).unwrap();
    let oracle = oracle_rdc(&a, &a, 11);
    assert!(got >= 0.95, "{got}");
    assert!(oracle >= 0.95, "{oracle}");
}

#[test]
fn rdc_null_median_is_small() {
    let cfg = LearnConfig::default();
    let mut values: Vec<f64> = (0..20)
        .map(|s| rdc(&uniform(1000, 2 * s), &uniform(1000, 2 * s + 1), &cfg, s).unwrap())
        .collect();
    values.sort_by(f64::total_cmp);
    let median = 0.5 * (values[9] + values[10]);
    assert!(median < 0.3, "{values:?}");
}

#[test]
fn rdc_sees_nonlinear_dependence() {
    let cfg = LearnConfig::default();
    let a: Vec<f64> = uniform(1000, 9).iter().map(|u| 2.0 * PI * u).collect();
    let b: Vec<f64> = a.iter().map(|v| (4.0 * v).sin()).collect();
    let got = rdc(&a, &b, &cfg, 3).unwrap();
    assert!(got >= 0.8, "{got}");
    assert!(oracle_rdc(&a, &b, 3) >= 0.8);
}

#[test]
fn rdc_is_symmetric_and_seeded() {
    let cfg = LearnConfig::default();
    let a = uniform(300, 1);
    let b: Vec<f64> = a.iter().zip(uniform(300, 2)).map(|(x, e)| x * x + 0.3 * e).collect();
    let ab = rdc(&a, &b, &cfg, 17).unwrap();
    let ba = rdc(&b, &a, &cfg, 17).unwrap();
    assert!((ab - ba).abs() <= 1e-9, "{ab} vs {ba}");
    assert_eq!(ab.to_bits(), rdc(&a, &b, &cfg, 17).unwrap().to_bits());
}

fn dataset(columns: &[Vec<f64>]) -> Dataset {
    let n = columns[0].len();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    Dataset::from_rows(Schema::all_real(columns.len()), &rows).unwrap()
}

#[test]
fn independent_columns_split_into_singletons() {
    let data = dataset(&[uniform(1000, 1), uniform(1000, 2)]);
    let groups = split_columns(&DataSlice::full(&data), &LearnConfig::default());
    assert_eq!(groups, vec![vec![0], vec![1]]);
}

#[test]
fn planted_pair_is_grouped() {
    let a = uniform(1000, 3);
    let b: Vec<f64> = a.iter().zip(uniform(1000, 4)).map(|(x, e)| (6.0 * x).cos() + 0.05 * e).collect();
    let data = dataset(&[a, b, uniform(1000, 5)]);
    let cfg = LearnConfig::with_seed(2);
    let groups = split_columns(&DataSlice::full(&data), &cfg);

    // Oracle: pairwise coefficients against the threshold.
    let dep = |i: usize, j: usize| rdc(&data.column(i), &data.column(j), &cfg, cfg.pair_seed(i, j)).unwrap() >= cfg.alpha;
    assert!(dep(0, 1) && !dep(0, 2) && !dep(1, 2));
    assert_eq!(groups, vec![vec![0, 1], vec![2]]);
}

#[test]
fn mutually_dependent_columns_stay_together() {
    let a = uniform(800, 6);
    let data = dataset(&[a.clone(), a.iter().map(|x| x * 2.0).collect(), a.iter().map(|x| x.exp()).collect()]);
    let groups = split_columns(&DataSlice::full(&data), &LearnConfig::default());
    assert_eq!(groups, vec![vec![0, 1, 2]]);
}

#[test]
fn gmm_recovers_separated_blocks() {
    let mut r = rng(12);
    let normal = Normal::new(0.0, 0.1).unwrap();
    let values: Vec<f64> = (0..200)
        .map(|i| normal.sample(&mut r) + if i < 100 { 0.0 } else { 10.0 })
        .collect();
    let data = Dataset::new(Schema::all_real(1), values.clone()).unwrap();
    let p = cluster_rows(&DataSlice::full(&data), &LearnConfig::default(), 4).unwrap();
    assert!(!p.fallback);
    let oracle_low: Vec<usize> = (0..200).filter(|&i| values[i] < 5.0).collect();
    let oracle_high: Vec<usize> = (0..200).filter(|&i| values[i] >= 5.0).collect();
    let mut got = p.clusters.clone();
    got.sort();
    assert_eq!(got, vec![oracle_low, oracle_high]);
    assert_eq!(p.weights, vec![0.5, 0.5]);
}

#[test]
fn partitions_cover_the_slice() {
    let data = dataset(&[uniform(333, 1), uniform(333, 2)]);
    let rows: Vec<usize> = (0..333).step_by(2).collect();
    let slice = DataSlice::new(&data, rows.clone(), vec![0, 1]).unwrap();
    let p = cluster_rows(&slice, &LearnConfig::default(), 9).unwrap();
    let mut all: Vec<usize> = p.clusters.concat();
    all.sort();
    assert_eq!(all, rows);
    assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    for (c, w) in p.clusters.iter().zip(&p.weights) {
        assert_eq!(*w, c.len() as f64 / rows.len() as f64);
    }
}

#[test]
fn slices_reject_bad_indices() {
    let data = dataset(&[uniform(10, 1)]);
    assert!(DataSlice::new(&data, vec![], vec![0]).is_err());
    assert!(DataSlice::new(&data, vec![10], vec![0]).is_err());
    assert!(DataSlice::new(&data, vec![0], vec![1]).is_err());
    let one = DataSlice::new(&data, vec![3], vec![0]).unwrap();
    assert!(cluster_rows(&one, &LearnConfig::default(), 0).is_err());
}

#[test]
fn independent_columns_give_product_root() {
    let data = dataset(&[uniform(1000, 21), uniform(1000, 22)]);
    let m = learn_spn(&data, &LearnConfig::with_seed(1)).unwrap();
    assert!(matches!(m.root_node(), Node::Product { .. }), "{:?}", m.root_node());
}

fn two_blob_sample(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|_| {
            let (mx, my, s) = if r.random_bool(0.3) { (0.0, 0.0, 1.0) } else { (5.0, 3.0, 0.5) };
            vec![mx + s * noise.sample(&mut r), my + s * noise.sample(&mut r)]
        })
        .collect()
}

fn true_log_density(p: &[f64]) -> f64 {
    let g = |x: f64, m: f64, s: f64| -0.5 * ((x - m) / s).powi(2) - s.ln() - 0.5 * (2.0 * PI).ln();
    let a = 0.3f64.ln() + g(p[0], 0.0, 1.0) + g(p[1], 0.0, 1.0);
    let b = 0.7f64.ln() + g(p[0], 5.0, 0.5) + g(p[1], 3.0, 0.5);
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[test]
fn held_out_density_is_close_to_truth() {
    let mut gaps: Vec<f64> = (0..5)
        .map(|seed| {
            let train = Dataset::from_rows(Schema::all_real(2), &two_blob_sample(2000, 100 + seed)).unwrap();
            let test = two_blob_sample(2000, 200 + seed);
            let m = learn_spn(&train, &LearnConfig::with_seed(seed)).unwrap();
            let full = Subspace::full(2);
            let learned: f64 = test.iter().map(|p| m.log_marginal_subspace(p, &full).unwrap()).sum::<f64>() / 2000.0;
            let truth: f64 = test.iter().map(|p| true_log_density(p)).sum::<f64>() / 2000.0;
            (learned - truth).abs()
        })
        .collect();
    gaps.sort_by(f64::total_cmp);
    assert!(gaps[2] <= 0.5, "{gaps:?}");
}

fn mixed_dataset(seed: u64) -> Dataset {
    let schema = Schema::new(vec![
        Feature::real("a"),
        Feature::categorical("c", ["x", "y", "z"]),
        Feature::real("b"),
        Feature::real("d"),
    ])
    .unwrap();
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..900)
        .map(|_| {
            let k = r.random_range(0..3);
            let a = k as f64 + 0.2 * r.random::<f64>();
            vec![a, k as f64, a * a + 0.1 * r.random::<f64>(), r.random::<f64>()]
        })
        .collect();
    Dataset::from_rows(schema, &rows).unwrap()
}

fn leaves_within_bound(m: &SpnModel) -> bool {
    let slices = 1 + m
        .nodes()
        .iter()
        .filter_map(|n| match n {
            Node::Sum { children, .. } => Some(children.len()),
            _ => None,
        })
        .sum::<usize>();
    m.leaf_count() <= m.n_features() * slices && m.node_count() >= m.n_features()
}

#[test]
fn learned_models_validate_and_respect_leaf_bound() {
    for seed in 0..3 {
        let data = mixed_dataset(seed);
        let m = learn_spn(&data, &LearnConfig::with_seed(seed)).unwrap();
        assert!(m.validate().is_ok());
        assert!(leaves_within_bound(&m));
        assert!(m.nodes().iter().any(|n| matches!(n, Node::Sum { .. })));
        assert!(m.nodes().iter().any(|n| matches!(n, Node::Categorical(_))));
    }
}

#[test]
fn learning_is_deterministic() {
    let data = mixed_dataset(7);
    let a = learn_spn(&data, &LearnConfig::with_seed(5)).unwrap().to_json();
    let b = learn_spn(&data, &LearnConfig::with_seed(5)).unwrap().to_json();
    assert_eq!(a, b);
}

#[test]
fn nan_cells_never_reach_the_learner() {
    let values: Vec<f64> = (0..10).flat_map(|i| [i as f64, f64::NAN]).collect();
    assert!(Dataset::new(Schema::all_real(2), values).is_err());
}
