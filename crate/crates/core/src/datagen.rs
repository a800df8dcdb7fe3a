//! Synthetic tabular data with outliers planted in known subspaces.
//!
//! Features are shuffled and cut into disjoint subspaces. Inliers of a
//! subspace come from a small mixture of tight axis-aligned Gaussian
//! blobs whose centres sit on a grid of per-coordinate levels, so every
//! coordinate is multimodal and the coordinates of a subspace are strongly
//! dependent. An outlier takes, in its assigned subspace, a combination of
//! per-coordinate levels that no blob uses: each coordinate looks ordinary
//! on its own, while the joint lands in a region of very low density.
//! Leftover features that do not fill a subspace are uniform noise.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numeric::{gaussian_log_pdf, log_sum_exp};
use crate::schema::Schema;
use crate::subspace::Subspace;

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;
/// Outliers must fall below this quantile of the inliers' joint density.
const DENSITY_QUANTILE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub n_features: usize,
    pub n_samples: usize,
    pub n_outliers: usize,
    pub subspace_sizes: RangeInclusive<usize>,
    pub clusters_per_subspace: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(n_features: usize, seed: u64) -> Self {
        GenConfig {
            n_features,
            n_samples: 1000,
            n_outliers: 30,
            subspace_sizes: 2..=5,
            clusters_per_subspace: 2,
            noise_sigma: 0.05,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let (lo, hi) = (*self.subspace_sizes.start(), *self.subspace_sizes.end());
        if lo < 2 || lo > hi {
            return bad(format!("subspace sizes must be a non-empty range starting at 2 or more, got {lo}..={hi}"));
        }
        if hi > self.n_features {
            return bad(format!("subspace size {hi} exceeds the {} features", self.n_features));
        }
        if self.n_outliers >= self.n_samples {
            return bad(format!(
                "n_outliers ({}) must be smaller than n_samples ({})",
                self.n_outliers, self.n_samples
            ));
        }
        if self.n_samples - self.n_outliers < 2 {
            return bad("at least two inliers are required".into());
        }
        if self.clusters_per_subspace < 2 {
            return bad(format!(
                "clusters_per_subspace must be at least 2, got {}",
                self.clusters_per_subspace
            ));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be positive, got {}", self.noise_sigma));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub dataset: Dataset,
    pub outlier_rows: BTreeSet<usize>,
    pub ground_truth: BTreeMap<usize, Subspace>,
}

impl LabeledDataset {
    /// Checks that the labels fit the dataset and cover exactly the
    /// outlier rows.
    pub fn new(dataset: Dataset, ground_truth: BTreeMap<usize, Subspace>) -> Result<Self> {
        for (&row, subspace) in &ground_truth {
            if row >= dataset.n_rows() {
                return Err(Error::Data(format!(
                    "labelled row {row} is out of range for {} rows",
                    dataset.n_rows()
                )));
            }
            if subspace.max_feature() >= dataset.n_cols() {
                return Err(Error::Data(format!(
                    "row {row}: subspace {subspace} is out of range for {} features",
                    dataset.n_cols()
                )));
            }
        }
        Ok(LabeledDataset {
            outlier_rows: ground_truth.keys().copied().collect(),
            dataset,
            ground_truth,
        })
    }

    pub fn labels_json(&self) -> String {
        let doc = LabelsDoc {
            outliers: self
                .ground_truth
                .iter()
                .map(|(&row, s)| LabelDoc {
                    row,
                    subspace: s.clone(),
                })
                .collect(),
        };
        let mut text = serde_json::to_string(&doc).expect("labels serialize");
        text.push('\n');
        text
    }
}

/// One blob mixture per planted subspace.
struct Mixture {
    subspace: Subspace,
    /// `centers[cluster][coordinate]`
    centers: Vec<Vec<f64>>,
    /// `levels[coordinate]`: every distinct centre value of that coordinate.
    levels: Vec<Vec<f64>>,
}

impl Mixture {
    fn new(subspace: Subspace, clusters: usize, rng: &mut ChaCha8Rng) -> Self {
        let d = subspace.len();
        let levels: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..clusters).map(|j| (j as f64 + 0.5) / clusters as f64).collect())
            .collect();
        let perms: Vec<Vec<usize>> = (0..d)
            .map(|_| {
                let mut p: Vec<usize> = (0..clusters).collect();
                p.shuffle(rng);
                p
            })
            .collect();
        let centers = (0..clusters)
            .map(|c| (0..d).map(|j| levels[j][perms[j][c]]).collect())
            .collect();
        Mixture {
            subspace,
            centers,
            levels,
        }
    }

    fn draw_inlier(&self, row: &mut [f64], noise: &Normal<f64>, rng: &mut ChaCha8Rng) {
        let center = self.centers.choose(rng).expect("clusters");
        for (j, &f) in self.subspace.features().iter().enumerate() {
            row[f] = center[j] + noise.sample(rng);
        }
    }

    fn log_density(&self, point: &[f64], sigma: f64) -> f64 {
        let log_w = -(self.centers.len() as f64).ln();
        log_sum_exp(self.centers.iter().map(|c| {
            log_w + c.iter().zip(point).map(|(m, x)| gaussian_log_pdf(*x, *m, sigma)).sum::<f64>()
        }))
    }
}

/// Generates a labelled dataset. Deterministic in `config.seed`.
pub fn generate(config: &GenConfig) -> Result<LabeledDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_features;
    let sigma = config.noise_sigma;
    let noise = Normal::new(0.0, sigma).expect("positive sigma");

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (lo, hi) = (*config.subspace_sizes.start(), *config.subspace_sizes.end());
    let mut mixtures = Vec::new();
    let mut rest = &order[..];
    while rest.len() >= lo {
        let size = rng.random_range(lo..=hi.min(rest.len()));
        let subspace = Subspace::new(rest[..size].iter().copied())?;
        mixtures.push(Mixture::new(subspace, config.clusters_per_subspace, &mut rng));
        rest = &rest[size..];
    }
    let noise_features = rest.to_vec();

    let rows = config.n_samples;
    let mut values = vec![0.0; rows * n];
    for r in 0..rows {
        let row = &mut values[r * n..(r + 1) * n];
        for m in &mixtures {
            m.draw_inlier(row, &noise, &mut rng);
        }
        for &f in &noise_features {
            row[f] = rng.random::<f64>();
        }
    }

    let mut outlier_rows: Vec<usize> = rand::seq::index::sample(&mut rng, rows, config.n_outliers).into_vec();
    outlier_rows.sort_unstable();
    let assignment: Vec<usize> = outlier_rows.iter().map(|_| rng.random_range(0..mixtures.len())).collect();
    let is_outlier = {
        let mut v = vec![false; rows];
        outlier_rows.iter().for_each(|&r| v[r] = true);
        v
    };

    // Outlier rows keep inlier draws outside their planted subspace, redrawn
    // until they fall inside the range spanned by the inliers.
    let ranges: Vec<(f64, f64)> = (0..n)
        .map(|f| {
            (0..rows)
                .filter(|&r| !is_outlier[r])
                .map(|r| values[r * n + f])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
        })
        .collect();
    let inside = |row: &[f64], f: usize| ranges[f].0 <= row[f] && row[f] <= ranges[f].1;
    for &r in &outlier_rows {
        let row = &mut values[r * n..(r + 1) * n];
        for m in &mixtures {
            let mut attempts = 0;
            while !m.subspace.features().iter().all(|&f| inside(row, f)) && attempts < MAX_PLACEMENT_ATTEMPTS {
                m.draw_inlier(row, &noise, &mut rng);
                attempts += 1;
            }
        }
        for &f in &noise_features {
            while !inside(row, f) {
                row[f] = rng.random::<f64>();
            }
        }
    }

    let mut ground_truth = BTreeMap::new();
    for (mi, m) in mixtures.iter().enumerate() {
        let targets: Vec<usize> = outlier_rows
            .iter()
            .zip(&assignment)
            .filter(|(_, &a)| a == mi)
            .map(|(&r, _)| r)
            .collect();
        if targets.is_empty() {
            continue;
        }
        let feats = m.subspace.features();
        let inliers: Vec<Vec<f64>> = (0..rows)
            .filter(|&r| !is_outlier[r])
            .map(|r| feats.iter().map(|&f| values[r * n + f]).collect())
            .collect();
        let mut inlier_ld: Vec<f64> = inliers.iter().map(|p| m.log_density(p, sigma)).collect();
        inlier_ld.sort_by(f64::total_cmp);
        let threshold = inlier_ld[((inlier_ld.len() as f64 * DENSITY_QUANTILE).floor() as usize).min(inlier_ld.len() - 1)];
        let bounds: Vec<(f64, f64)> = (0..feats.len())
            .map(|j| {
                inliers
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[j]), b.max(p[j])))
            })
            .collect();

        for row in targets {
            let point = place_outlier(m, &bounds, threshold, &noise, &mut rng).ok_or_else(|| {
                Error::Config(format!(
                    "could not place an outlier in subspace {} after {MAX_PLACEMENT_ATTEMPTS} attempts",
                    m.subspace
                ))
            })?;
            for (j, &f) in feats.iter().enumerate() {
                values[row * n + f] = point[j];
            }
            ground_truth.insert(row, m.subspace.clone());
        }
    }

    let dataset = Dataset::new(Schema::all_real(n), values)?;
    LabeledDataset::new(dataset, ground_truth)
}

/// Rejection sampling over independent per-coordinate level choices: the
/// candidate must lie below `threshold` in joint log-density while every
/// coordinate stays inside the inliers' range.
fn place_outlier(
    m: &Mixture,
    bounds: &[(f64, f64)],
    threshold: f64,
    noise: &Normal<f64>,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<f64>> {
    let sigma = noise.std_dev();
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let point: Vec<f64> = m
            .levels
            .iter()
            .map(|lv| lv.choose(rng).expect("levels") + noise.sample(rng))
            .collect();
        let inside = point.iter().zip(bounds).all(|(x, (a, b))| a <= x && x <= b);
        if inside && m.log_density(&point, sigma) < threshold {
            return Some(point);
        }
    }
    None
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelsDoc {
    outliers: Vec<LabelDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelDoc {
    row: usize,
    subspace: Subspace,
}

pub fn write_labels(labeled: &LabeledDataset, path: &Path) -> Result<()> {
    std::fs::write(path, labeled.labels_json()).map_err(|e| Error::io(path, e))
}

/// Reads a label sidecar and attaches it to `dataset`.
pub fn read_labels(path: &Path, dataset: Dataset) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: LabelsDoc =
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut truth = BTreeMap::new();
    for label in doc.outliers {
        if truth.insert(label.row, label.subspace).is_some() {
            return Err(Error::Data(format!("{}: row {} is labelled twice", path.display(), label.row)));
        }
    }
    LabeledDataset::new(dataset, truth).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}
