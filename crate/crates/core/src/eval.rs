//! Detection, F1 of retrieved dimensions, and benchmark runs over labelled
//! data.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::explain::{
    backward_eval_count, explain, forward_eval_bound, outlier_score, ExplainConfig, ExplanationTrace, Selection,
    Strategy,
};
use crate::fmt::{f64_17, ser_f64};
use crate::learn::{learn_spn, LearnConfig};
use crate::spn::SpnModel;
use crate::subspace::Subspace;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Set-overlap precision, recall and F1 between predicted and true feature
/// indices.
pub fn f1_dims(predicted: &Subspace, truth: &Subspace) -> DimScores {
    let hits = predicted.intersection_len(truth) as f64;
    let precision = hits / predicted.len() as f64;
    let recall = hits / truth.len() as f64;
    let f1 = if hits == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    DimScores { precision, recall, f1 }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    /// Full-joint outlier score of every row.
    pub scores: Vec<f64>,
    pub threshold: f64,
    /// Rows scoring at or above the threshold, ascending.
    pub flagged: Vec<usize>,
}

/// Flags the rows whose full-joint outlier score reaches the
/// `(1 - contamination)` quantile. Ties at the threshold are all flagged,
/// so at least `ceil(contamination * n)` rows come back.
pub fn detect(model: &SpnModel, dataset: &Dataset, contamination: f64) -> Result<Detection> {
    if !(contamination > 0.0 && contamination < 1.0) {
        return Err(Error::Config(format!("contamination must lie in (0, 1), got {contamination}")));
    }
    if dataset.is_empty() {
        return Err(Error::Data("cannot detect outliers in an empty dataset".into()));
    }
    let full = Subspace::full(model.n_features());
    let scores = (0..dataset.n_rows())
        .into_par_iter()
        .map(|r| outlier_score(model, dataset.row(r), &full))
        .collect::<Result<Vec<f64>>>()?;
    let n = scores.len();
    let k = ((contamination * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let threshold = sorted[n - k];
    let flagged = (0..n).filter(|&r| scores[r] >= threshold).collect();
    Ok(Detection {
        scores,
        threshold,
        flagged,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutlierEval {
    pub row: usize,
    pub truth: Subspace,
    pub trace: ExplanationTrace,
    pub scores: DimScores,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub n_features: usize,
    pub config: ExplainConfig,
    /// Ascending by row.
    pub outliers: Vec<OutlierEval>,
    pub mean_f1: f64,
    pub mean_evals: f64,
    pub train_seconds: f64,
    pub explain_seconds: f64,
}

#[derive(Serialize)]
struct SizeRecord<'a> {
    k: usize,
    features: &'a Subspace,
    #[serde(serialize_with = "ser_f64")]
    log_density: f64,
}

#[derive(Serialize)]
struct ExplanationRecord<'a> {
    row: usize,
    selected: &'a Subspace,
    size: usize,
    per_size: Vec<SizeRecord<'a>>,
    strategy: Strategy,
    selection: Selection,
    evals: usize,
}

/// One JSON line describing an explanation.
pub fn explanation_json(row: usize, trace: &ExplanationTrace, config: &ExplainConfig) -> String {
    let record = ExplanationRecord {
        row,
        selected: &trace.selected,
        size: trace.selected_size,
        per_size: trace
            .per_size
            .iter()
            .map(|s| SizeRecord {
                k: s.size,
                features: &s.subspace,
                log_density: s.log_density,
            })
            .collect(),
        strategy: config.strategy,
        selection: config.selection,
        evals: trace.eval_count,
    };
    serde_json::to_string(&record).expect("record serializes")
}

impl EvalReport {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for o in &self.outliers {
            out.push_str(&explanation_json(o.row, &o.trace, &self.config));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }
}

pub const SUMMARY_HEADER: &str = "n_features\tstrategy\tselection\tmean_f1\tmean_evals\ttrain_s\texplain_s";

/// Tab-separated summary, one row per report, with a header line.
pub fn summary_tsv<'a>(reports: impl IntoIterator<Item = &'a EvalReport>) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in reports {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.n_features,
            r.config.strategy,
            r.config.selection,
            f64_17(r.mean_f1),
            f64_17(r.mean_evals),
            f64_17(r.train_seconds),
            f64_17(r.explain_seconds)
        )
        .expect("write to string");
    }
    out
}

#[derive(Debug)]
pub struct Benchmark {
    pub model: SpnModel,
    pub train_seconds: f64,
    /// One report per explain configuration, in the order given.
    pub reports: Vec<EvalReport>,
}

/// Trains once with LearnSPN, then explains every labelled outlier under
/// each configuration.
pub fn run_benchmark(labeled: &LabeledDataset, learn: &LearnConfig, configs: &[ExplainConfig]) -> Result<Benchmark> {
    run_benchmark_with(labeled, configs, |data| learn_spn(data, learn))
}

/// [`run_benchmark`] with a caller-supplied trainer, called exactly once.
pub fn run_benchmark_with<F>(labeled: &LabeledDataset, configs: &[ExplainConfig], train: F) -> Result<Benchmark>
where
    F: FnOnce(&Dataset) -> Result<SpnModel>,
{
    for c in configs {
        c.validate()?;
    }
    let data = &labeled.dataset;
    let start = Instant::now();
    let model = train(data)?;
    let train_seconds = start.elapsed().as_secs_f64();
    let reports = configs
        .iter()
        .map(|c| evaluate(&model, labeled, c, train_seconds))
        .collect::<Result<_>>()?;
    Ok(Benchmark {
        model,
        train_seconds,
        reports,
    })
}

/// Explains every labelled outlier with an already trained model.
pub fn evaluate(
    model: &SpnModel,
    labeled: &LabeledDataset,
    config: &ExplainConfig,
    train_seconds: f64,
) -> Result<EvalReport> {
    let data = &labeled.dataset;
    let n = model.n_features();
    if data.n_cols() != n {
        return Err(Error::Data(format!(
            "dataset has {} columns, model has {n} features",
            data.n_cols()
        )));
    }
    let training = (config.selection == Selection::Zscore).then_some(data);
    let truths: Vec<(usize, &Subspace)> = labeled.ground_truth.iter().map(|(&r, s)| (r, s)).collect();

    let start = Instant::now();
    let outliers = truths
        .par_iter()
        .map(|&(row, truth)| {
            let trace = explain(model, data.row(row), config, training)?;
            check_eval_count(n, config, &trace)?;
            let scores = f1_dims(&trace.selected, truth);
            Ok(OutlierEval {
                row,
                truth: truth.clone(),
                trace,
                scores,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let explain_seconds = start.elapsed().as_secs_f64();

    let count = outliers.len().max(1) as f64;
    Ok(EvalReport {
        n_features: n,
        config: config.clone(),
        mean_f1: outliers.iter().map(|o| o.scores.f1).sum::<f64>() / count,
        mean_evals: outliers.iter().map(|o| o.trace.eval_count as f64).sum::<f64>() / count,
        outliers,
        train_seconds,
        explain_seconds,
    })
}

fn check_eval_count(n: usize, config: &ExplainConfig, trace: &ExplanationTrace) -> Result<()> {
    if n == 1 {
        return Ok(());
    }
    let evals = trace.eval_count;
    match config.strategy {
        Strategy::Backward if evals != backward_eval_count(n) => Err(Error::EvalBound(format!(
            "backward elimination on {n} features used {evals} evaluations, expected {}",
            backward_eval_count(n)
        ))),
        Strategy::Forward if evals > forward_eval_bound(n, config.beam_width, config.depth_for(n)) => {
            Err(Error::EvalBound(format!(
                "forward search on {n} features used {evals} evaluations, bound is {}",
                forward_eval_bound(n, config.beam_width, config.depth_for(n))
            )))
        }
        _ => Ok(()),
    }
}
