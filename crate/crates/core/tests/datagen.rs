use std::collections::BTreeMap;

use spn_explain::data::{load_csv, to_csv_string, write_csv};
use spn_explain::datagen::{generate, read_labels, write_labels, GenConfig, LabeledDataset};
use spn_explain::{Dataset, Error, Subspace};

fn config(n_features: usize, seed: u64) -> GenConfig {
    GenConfig {
        n_samples: 500,
        n_outliers: 15,
        ..GenConfig::new(n_features, seed)
    }
}

fn inliers(l: &LabeledDataset) -> Vec<usize> {
    (0..l.dataset.n_rows()).filter(|r| !l.outlier_rows.contains(r)).collect()
}

/// Leave-one-out product-Gaussian KDE over `features`, with a Scott's rule
/// bandwidth per feature.
struct Kde<'a> {
    data: &'a Dataset,
    features: Vec<usize>,
    bandwidth: Vec<f64>,
}

impl<'a> Kde<'a> {
    fn new(data: &'a Dataset, features: &[usize]) -> Self {
        let n = data.n_rows() as f64;
        let d = features.len() as f64;
        let bandwidth = features
            .iter()
            .map(|&f| {
                let col = data.column(f);
                let mean = col.iter().sum::<f64>() / n;
                let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                sd * n.powf(-1.0 / (d + 4.0))
            })
            .collect();
        Kde {
            data,
            features: features.to_vec(),
            bandwidth,
        }
    }

    fn density(&self, row: usize) -> f64 {
        let x = self.data.row(row);
        let mut total = 0.0;
        for other in 0..self.data.n_rows() {
            if other == row {
                continue;
            }
            let y = self.data.row(other);
            let mut k = 1.0;
            for (&f, h) in self.features.iter().zip(&self.bandwidth) {
                let z = (x[f] - y[f]) / h;
                k *= (-0.5 * z * z).exp() / h;
            }
            total += k;
        }
        total / (self.data.n_rows() - 1) as f64
    }
}

#[test]
fn fixed_size_configuration() {
    let c = GenConfig {
        subspace_sizes: 2..=2,
        ..GenConfig::new(10, 3)
    };
    let l = generate(&c).unwrap();
    assert_eq!(l.ground_truth.len(), 30);
    assert!(l.ground_truth.values().all(|s| s.len() == 2));
}

#[test]
fn outlier_coordinates_stay_inside_inlier_ranges() {
    for seed in 0..3 {
        let l = generate(&config(12, seed)).unwrap();
        let inl = inliers(&l);
        for f in 0..12 {
            let col = l.dataset.column(f);
            let lo = inl.iter().map(|&r| col[r]).fold(f64::INFINITY, f64::min);
            let hi = inl.iter().map(|&r| col[r]).fold(f64::NEG_INFINITY, f64::max);
            for &r in &l.outlier_rows {
                assert!(lo <= col[r] && col[r] <= hi, "seed {seed} row {r} feature {f}");
            }
        }
    }
}

#[test]
fn planted_pair_has_the_lowest_density_among_all_pairs() {
    let c = GenConfig {
        subspace_sizes: 2..=2,
        ..config(6, 8)
    };
    let l = generate(&c).unwrap();
    let pairs: Vec<Subspace> = (0..6)
        .flat_map(|a| (a + 1..6).map(move |b| Subspace::new([a, b]).unwrap()))
        .collect();
    let kdes: Vec<Kde> = pairs.iter().map(|p| Kde::new(&l.dataset, p.features())).collect();
    for (&row, truth) in &l.ground_truth {
        let densities: Vec<f64> = kdes.iter().map(|k| k.density(row)).collect();
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_by(|&a, &b| densities[a].total_cmp(&densities[b]));
        let bottom = (0.05 * pairs.len() as f64).ceil() as usize;
        let rank = order.iter().position(|&i| pairs[i] == *truth).unwrap();
        assert!(rank < bottom, "row {row}: planted {truth} ranks {rank} of {}", pairs.len());
    }
}

#[test]
fn outliers_are_separated_from_inliers_in_their_subspace() {
    let c = GenConfig {
        subspace_sizes: 2..=3,
        ..config(6, 2)
    };
    let l = generate(&c).unwrap();
    let inl = inliers(&l);
    let mut by_subspace: BTreeMap<&Subspace, Vec<usize>> = BTreeMap::new();
    for (row, s) in &l.ground_truth {
        by_subspace.entry(s).or_default().push(*row);
    }
    for (s, rows) in by_subspace {
        let kde = Kde::new(&l.dataset, s.features());
        let mut inlier_scores: Vec<f64> = inl.iter().map(|&r| -kde.density(r).ln()).collect();
        inlier_scores.sort_by(f64::total_cmp);
        let p95 = inlier_scores[(0.95 * inlier_scores.len() as f64) as usize];
        for r in rows {
            let score = -kde.density(r).ln();
            assert!(score > p95, "row {r} in {s}: {score} <= {p95}");
        }
    }
}

#[test]
fn outliers_are_not_univariate_extremes() {
    let l = generate(&GenConfig::new(20, 6)).unwrap();
    let n = l.dataset.n_rows() as f64;
    let stats: Vec<(f64, f64)> = (0..20)
        .map(|f| {
            let col = l.dataset.column(f);
            let mean = col.iter().sum::<f64>() / n;
            (mean, (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt())
        })
        .collect();
    let plain = l
        .outlier_rows
        .iter()
        .filter(|&&r| {
            let x = l.dataset.row(r);
            x.iter().zip(&stats).all(|(v, (m, s))| ((v - m) / s).abs() <= 3.0)
        })
        .count();
    assert!(plain as f64 >= 0.95 * l.outlier_rows.len() as f64, "{plain}");
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for i in 0..2 {
        let l = generate(&config(10, 21)).unwrap();
        let csv = dir.path().join(format!("data{i}.csv"));
        let labels = dir.path().join(format!("labels{i}.json"));
        write_csv(&l.dataset, &csv).unwrap();
        write_labels(&l, &labels).unwrap();
        texts.push((std::fs::read(csv).unwrap(), std::fs::read(labels).unwrap()));
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let l = generate(&config(10, 4)).unwrap();
    let csv = dir.path().join("data.csv");
    let labels = dir.path().join("labels.json");
    write_csv(&l.dataset, &csv).unwrap();
    write_labels(&l, &labels).unwrap();
    let data = load_csv(&csv, None).unwrap();
    assert_eq!(data, l.dataset);
    assert_eq!(to_csv_string(&data), std::fs::read_to_string(&csv).unwrap());
    assert_eq!(read_labels(&labels, data).unwrap(), l);
}

#[test]
fn label_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    let l = generate(&config(10, 4)).unwrap();
    let missing = dir.path().join("absent.json");
    let err = read_labels(&missing, l.dataset.clone()).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("absent.json"), "{err}");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"outliers":[{"row":500,"subspace":[0,1]}]}"#).unwrap();
    let err = read_labels(&bad, l.dataset.clone()).unwrap_err();
    assert!(err.to_string().contains("out of range"), "{err}");

    std::fs::write(&bad, r#"{"outliers":[{"row":1,"subspace":[]}]}"#).unwrap();
    assert!(read_labels(&bad, l.dataset.clone()).is_err());
    std::fs::write(&bad, r#"{"outliers":[{"row":1,"subspace":[0]},{"row":1,"subspace":[2]}]}"#).unwrap();
    assert!(read_labels(&bad, l.dataset).is_err());
}

#[test]
fn infeasible_sizes_are_rejected() {
    let c = GenConfig {
        subspace_sizes: 2..=8,
        ..GenConfig::new(6, 0)
    };
    assert!(matches!(generate(&c), Err(Error::Config(_))));
}
