use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spn_explain::data::{load_csv, load_csv_with_schema, write_csv};
use spn_explain::datagen::{generate, read_labels, write_labels, GenConfig, LabeledDataset};
use spn_explain::eval::{detect, evaluate, explanation_json, run_benchmark, summary_tsv};
use spn_explain::explain::{explain, outlier_score};
use spn_explain::fmt::f64_17;
use spn_explain::{Dataset, Error, ExplainConfig, LearnConfig, Selection, SpnModel, Strategy, Subspace};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_MODEL: u8 = 4;

/// Train sum-product network density models, score rows by negative
/// log-density and explain outliers through their lowest-density feature
/// subspaces.
#[derive(Parser)]
#[command(name = "spn-explain", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with outliers planted in known subspaces.
    Gen(GenArgs),
    /// Learn a model from a CSV file.
    Train(TrainArgs),
    /// Score rows by negative log-density, optionally flagging outliers.
    Score(ScoreArgs),
    /// Explain rows as JSON lines, one per row in ascending order.
    Explain(ExplainArgs),
    /// Explain labelled outliers with a trained model and report F1.
    Eval(EvalArgs),
    /// Train once, then evaluate every strategy/selection combination.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n_features: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    n_outliers: Option<usize>,
    #[arg(long)]
    min_subspace_size: Option<usize>,
    #[arg(long)]
    max_subspace_size: Option<usize>,
    #[arg(long)]
    clusters_per_subspace: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth JSON output path.
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    min_slice_rows: Option<usize>,
    #[arg(long)]
    rdc_features: Option<usize>,
    #[arg(long)]
    rdc_scale: Option<f64>,
    #[arg(long)]
    gmm_components: Option<usize>,
    #[arg(long)]
    gmm_max_iters: Option<usize>,
    #[arg(long)]
    gmm_tol: Option<f64>,
}

impl LearnArgs {
    fn config(&self) -> LearnConfig {
        let d = LearnConfig::with_seed(self.seed);
        LearnConfig {
            alpha: self.alpha.unwrap_or(d.alpha),
            min_slice_rows: self.min_slice_rows.unwrap_or(d.min_slice_rows),
            rdc_features: self.rdc_features.unwrap_or(d.rdc_features),
            rdc_scale: self.rdc_scale.unwrap_or(d.rdc_scale),
            gmm_components: self.gmm_components.unwrap_or(d.gmm_components),
            gmm_max_iters: self.gmm_max_iters.unwrap_or(d.gmm_max_iters),
            gmm_tol: self.gmm_tol.unwrap_or(d.gmm_tol),
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct SearchArgs {
    /// Beam width of the forward search [default: 10].
    #[arg(long)]
    beam_width: Option<usize>,
    /// Deepest subspace size visited by the forward search [default: all].
    #[arg(long)]
    max_depth: Option<usize>,
    /// Elbow threshold in nats [default: e].
    #[arg(long)]
    kappa: Option<f64>,
}

impl SearchArgs {
    fn config(&self, strategy: Strategy, selection: Selection) -> ExplainConfig {
        let d = ExplainConfig::new(strategy, selection);
        ExplainConfig {
            beam_width: self.beam_width.unwrap_or(d.beam_width),
            max_depth: self.max_depth.or(d.max_depth),
            kappa: self.kappa.unwrap_or(d.kappa),
            ..d
        }
    }
}

#[derive(Args)]
struct Input {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Schema JSON declaring column kinds; inferred from the CSV otherwise.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[command(flatten)]
    learn: LearnArgs,
    /// Model JSON output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    input: Input,
    /// Score only these features (comma separated) instead of the full joint.
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<usize>>,
    /// Expected outlier fraction; adds a 0/1 column marking flagged rows.
    #[arg(long)]
    contamination: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("which").required(true).args(["rows", "labels", "contamination"])))]
struct ExplainArgs {
    #[command(flatten)]
    input: Input,
    /// Rows to explain (comma separated, 0-based).
    #[arg(long, value_delimiter = ',')]
    rows: Option<Vec<usize>>,
    /// Explain the outlier rows listed in a ground-truth file.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Explain the rows flagged by detection at this outlier fraction.
    #[arg(long)]
    contamination: Option<f64>,
    #[arg(long, default_value_t = Strategy::Backward)]
    strategy: Strategy,
    #[arg(long, default_value_t = Selection::Elbow)]
    selection: Selection,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = Strategy::Backward)]
    strategy: Strategy,
    #[arg(long, default_value_t = Selection::Elbow)]
    selection: Selection,
    #[command(flatten)]
    search: SearchArgs,
    /// Write the explanations here as JSON lines.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[command(flatten)]
    learn: LearnArgs,
    #[arg(long, value_delimiter = ',', default_value = "backward,forward")]
    strategy: Vec<Strategy>,
    #[arg(long, value_delimiter = ',', default_value = "elbow")]
    selection: Vec<Selection>,
    #[command(flatten)]
    search: SearchArgs,
    /// Directory receiving one JSON-lines file per configuration, the
    /// summary TSV and the trained model.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

struct Failure {
    code: u8,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match error {
            Error::Config(_) => EXIT_USAGE,
            Error::Model(_) | Error::Invalid(_) | Error::EvalBound(_) => EXIT_MODEL,
            Error::Io { .. } | Error::Data(_) | Error::Query(_) => EXIT_DATA,
        };
        Failure { code, error }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn load_model(path: &Path) -> CliResult<SpnModel> {
    SpnModel::load(path).map_err(|error| Failure { code: EXIT_MODEL, error })
}

fn load_input(input: &Input) -> CliResult<(SpnModel, Dataset)> {
    let model = load_model(&input.model)?;
    let data = load_csv_with_schema(&input.data, model.schema().clone())?;
    Ok((model, data))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?,
        None => {
            // A closed pipe is not worth reporting.
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
        }
    }
    Ok(())
}

fn run_gen(a: &GenArgs) -> CliResult {
    let d = GenConfig::new(a.n_features, a.seed);
    let lo = a.min_subspace_size.unwrap_or(*d.subspace_sizes.start());
    let hi = a.max_subspace_size.unwrap_or(*d.subspace_sizes.end());
    let config = GenConfig {
        n_samples: a.n_samples.unwrap_or(d.n_samples),
        n_outliers: a.n_outliers.unwrap_or(d.n_outliers),
        subspace_sizes: lo..=hi,
        clusters_per_subspace: a.clusters_per_subspace.unwrap_or(d.clusters_per_subspace),
        noise_sigma: a.noise_sigma.unwrap_or(d.noise_sigma),
        ..d
    };
    let labeled = generate(&config)?;
    write_csv(&labeled.dataset, &a.out)?;
    write_labels(&labeled, &a.labels)?;
    Ok(())
}

fn run_train(a: &TrainArgs) -> CliResult {
    let config = a.learn.config();
    config.validate()?;
    let data = load_csv(&a.data, a.schema.as_deref())?;
    let model = spn_explain::learn_spn(&data, &config)?;
    model.save(&a.out)?;
    Ok(())
}

fn run_score(a: &ScoreArgs) -> CliResult {
    let (model, data) = load_input(&a.input)?;
    let subspace = match &a.features {
        Some(f) => Subspace::new(f.iter().copied())?,
        None => Subspace::full(model.n_features()),
    };
    let mut out = String::new();
    match a.contamination {
        Some(c) => {
            if a.features.is_some() {
                return Err(Error::Config("--contamination scores the full joint and cannot be combined with --features".into()).into());
            }
            let d = detect(&model, &data, c)?;
            out.push_str("row\tscore\toutlier\n");
            let mut flagged = d.flagged.iter().peekable();
            for (row, s) in d.scores.iter().enumerate() {
                let hit = flagged.next_if_eq(&&row).is_some();
                out.push_str(&format!("{row}\t{}\t{}\n", f64_17(*s), u8::from(hit)));
            }
        }
        None => {
            out.push_str("row\tscore\n");
            for (row, x) in data.rows().enumerate() {
                let s = outlier_score(&model, x, &subspace)?;
                out.push_str(&format!("{row}\t{}\n", f64_17(s)));
            }
        }
    }
    emit(a.out.as_deref(), &out)
}

fn run_explain(a: &ExplainArgs) -> CliResult {
    let config = a.search.config(a.strategy, a.selection);
    config.validate()?;
    let (model, data) = load_input(&a.input)?;
    let mut rows: Vec<usize> = if let Some(rows) = &a.rows {
        rows.clone()
    } else if let Some(labels) = &a.labels {
        read_labels(labels, data.clone())?.outlier_rows.into_iter().collect()
    } else {
        let c = a.contamination.expect("one row source is required");
        detect(&model, &data, c)?.flagged
    };
    rows.sort_unstable();
    rows.dedup();
    if let Some(&bad) = rows.iter().find(|&&r| r >= data.n_rows()) {
        return Err(Error::Data(format!("row {bad} out of range for {} rows", data.n_rows())).into());
    }
    let training = (config.selection == Selection::Zscore).then_some(&data);
    let mut out = String::new();
    for row in rows {
        let trace = explain(&model, data.row(row), &config, training)?;
        out.push_str(&explanation_json(row, &trace, &config));
        out.push('\n');
    }
    emit(a.out.as_deref(), &out)
}

fn run_eval(a: &EvalArgs) -> CliResult {
    let config = a.search.config(a.strategy, a.selection);
    config.validate()?;
    let (model, data) = load_input(&a.input)?;
    let labeled = read_labels(&a.labels, data)?;
    let report = evaluate(&model, &labeled, &config, 0.0)?;
    if let Some(path) = &a.out {
        report.write_jsonl(path)?;
    }
    emit(None, &summary_tsv([&report]))
}

fn run_bench(a: &BenchArgs) -> CliResult {
    let learn = a.learn.config();
    learn.validate()?;
    let configs: Vec<ExplainConfig> = a
        .strategy
        .iter()
        .flat_map(|&s| a.selection.iter().map(move |&sel| a.search.config(s, sel)))
        .collect();
    let data = load_csv(&a.data, a.schema.as_deref())?;
    let labeled: LabeledDataset = read_labels(&a.labels, data)?;
    let bench = run_benchmark(&labeled, &learn, &configs)?;
    let summary = summary_tsv(&bench.reports);
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        for r in &bench.reports {
            r.write_jsonl(&dir.join(format!("{}-{}.jsonl", r.config.strategy, r.config.selection)))?;
        }
        emit(Some(&dir.join("summary.tsv")), &summary)?;
        bench.model.save(&dir.join("model.json"))?;
    }
    emit(None, &summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => run_gen(a),
        Command::Train(a) => run_train(a),
        Command::Score(a) => run_score(a),
        Command::Explain(a) => run_explain(a),
        Command::Eval(a) => run_eval(a),
        Command::Bench(a) => run_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("spn-explain: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}
