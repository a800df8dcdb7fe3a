//! Fixtures shared by the criterion benchmarks.

use spn_explain::datagen::{generate, GenConfig, LabeledDataset};
use spn_explain::{learn_spn, LearnConfig, SpnModel};

/// A generated dataset with `n_features` columns and the model learned on it.
pub fn fixture(n_features: usize, seed: u64) -> (LabeledDataset, SpnModel) {
    let labeled = generate(&GenConfig::new(n_features, seed)).expect("valid generator config");
    let model = learn_spn(&labeled.dataset, &LearnConfig::with_seed(seed)).expect("learnable data");
    (labeled, model)
}

/// The first planted outlier of the fixture.
pub fn first_outlier(labeled: &LabeledDataset) -> Vec<f64> {
    let row = *labeled.outlier_rows.iter().next().expect("at least one outlier");
    labeled.dataset.row(row).to_vec()
}
