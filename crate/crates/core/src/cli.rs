//! Command implementations behind the `strokeclass` binary.
//!
//! Every command is deterministic given its options. A command that fails
//! removes whatever files it had already written.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::audio_io::{self, AudioError, SynthEntry};
use crate::dataset::{self, Dataset, DatasetError};
use crate::eval::{self, EvalError, EvalReport};
use crate::features::{AnalysisConfig, FeatureError, FeatureExtractor, FeatureVector};
use crate::forest::{fit_forest, ForestParams};
use crate::model_io::{Model, ModelError};
use crate::preset;
use crate::trees::{fit_cart, fit_id3, Criterion, TreeError, TreeParams};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_RATE_HZ: u32 = 44100;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("{path}: {source}")]
    Feature {
        path: PathBuf,
        #[source]
        source: FeatureError,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("no WAV files found under {0}")]
    EmptyCorpus(PathBuf),
    #[error("unknown algorithm {0:?} (expected cart, id3 or forest)")]
    UnknownAlgorithm(String),
    #[error("feature columns of {csv} do not match the model: {detail}")]
    FeatureMismatch { csv: PathBuf, detail: String },
    #[error("the model is a forest of {0} trees; choose one with --tree")]
    TreeIndexRequired(usize),
    #[error("tree index {index} out of range for a forest of {n_trees} trees")]
    TreeIndexOutOfRange { index: usize, n_trees: usize },
    #[error("--tree only applies to forest models")]
    NotAForest,
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Files and directories created by a command, removed again unless the
/// command commits.
#[derive(Default)]
struct Outputs {
    paths: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn create_dir_all(&mut self, dir: &Path) -> Result<(), CliError> {
        let mut missing = Vec::new();
        let mut cur = Some(dir);
        while let Some(d) = cur {
            if d.as_os_str().is_empty() || d.exists() {
                break;
            }
            missing.push(d.to_path_buf());
            cur = d.parent();
        }
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        self.paths.extend(missing.into_iter().rev());
        Ok(())
    }

    fn write(&mut self, path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        if let Some(parent) = path.parent() {
            self.create_dir_all(parent)?;
        }
        self.paths.push(path.to_path_buf());
        fs::write(path, contents).map_err(io_err(path))
    }

    fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in self.paths.iter().rev() {
            if p.is_dir() {
                let _ = fs::remove_dir(p);
            } else {
                let _ = fs::remove_file(p);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthOptions {
    /// Spec file; the built-in preset when `None`.
    pub spec: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub per_class: usize,
    pub rate_hz: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub classes: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Renders `per_class` clips of every stroke into `out_dir/<label>/`.
///
/// Class `c` draws from its own generator stream, so adding clips to one
/// class never changes another class's audio.
pub fn cmd_synth(opts: &SynthOptions) -> Result<SynthSummary, CliError> {
    let entries: Vec<SynthEntry> = match &opts.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            audio_io::parse_spec_file(&text)?
        }
        None => preset::default_preset(),
    };
    if opts.per_class == 0 {
        return Err(CliError::Usage("clips per class must be positive".into()));
    }
    for e in &entries {
        e.spec.check_nyquist(opts.rate_hz)?;
    }

    let mut jobs = Vec::with_capacity(entries.len() * opts.per_class);
    for (c, entry) in entries.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(c as u64);
        for i in 0..opts.per_class {
            let spec = entry.variation.apply(&entry.spec, opts.rate_hz, &mut rng);
            let clip_seed: u64 = rng.gen();
            let path = opts
                .out_dir
                .join(&entry.spec.label)
                .join(format!("{}_{i:03}.wav", entry.spec.label));
            jobs.push((spec, clip_seed, path));
        }
    }
    let rendered: Vec<Vec<u8>> = jobs
        .par_iter()
        .map(|(spec, seed, _)| audio_io::synthesize_stroke(spec, opts.rate_hz, *seed).map(|c| audio_io::encode_wav(&c)))
        .collect::<Result<_, _>>()?;

    let mut outputs = Outputs::default();
    outputs.create_dir_all(&opts.out_dir)?;
    for ((_, _, path), bytes) in jobs.iter().zip(&rendered) {
        outputs.write(path, bytes)?;
    }
    outputs.commit();
    Ok(SynthSummary {
        classes: entries.into_iter().map(|e| e.spec.label).collect(),
        files: jobs.into_iter().map(|(_, _, p)| p).collect(),
    })
}

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub input: PathBuf,
    pub out_csv: PathBuf,
    pub analysis: AnalysisConfig,
    pub rate_hz: u32,
    /// Clips are truncated or zero-padded to this length before analysis.
    pub duration_s: f64,
}

/// Labeled WAV files under `dir`: one subdirectory per class, both levels
/// in name order.
pub fn list_corpus(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let mut classes: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    classes.sort();
    let mut files = Vec::new();
    for class_dir in classes {
        let label = class_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut wavs: Vec<PathBuf> = fs::read_dir(&class_dir)
            .map_err(io_err(&class_dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .is_some_and(|x| x.eq_ignore_ascii_case("wav"))
            })
            .collect();
        wavs.sort();
        files.extend(wavs.into_iter().map(|p| (label.clone(), p)));
    }
    Ok(files)
}

/// Load, clip, normalize and featurize one file.
pub fn featurize_file(
    extractor: &FeatureExtractor,
    path: &Path,
    label: &str,
    rate_hz: u32,
    duration_s: f64,
) -> Result<Vec<FeatureVector>, CliError> {
    let clip = audio_io::load_wav(path, rate_hz)?.with_label(label);
    let clip = audio_io::peak_normalize(&audio_io::clip_to_duration(&clip, duration_s)?);
    extractor.extract(&clip).map_err(|source| CliError::Feature {
        path: path.to_path_buf(),
        source,
    })
}

pub fn extract_dataset(opts: &ExtractOptions) -> Result<Dataset, CliError> {
    let files = list_corpus(&opts.input)?;
    if files.is_empty() {
        return Err(CliError::EmptyCorpus(opts.input.clone()));
    }
    let extractor = FeatureExtractor::new(&opts.analysis, opts.rate_hz).map_err(|source| CliError::Feature {
        path: opts.input.clone(),
        source,
    })?;
    let per_file: Vec<Vec<FeatureVector>> = files
        .par_iter()
        .map(|(label, path)| featurize_file(&extractor, path, label, opts.rate_hz, opts.duration_s))
        .collect::<Result<_, _>>()?;
    let vectors: Vec<FeatureVector> = per_file.into_iter().flatten().collect();
    Ok(Dataset::from_vectors(&vectors)?)
}

pub fn cmd_extract(opts: &ExtractOptions) -> Result<Dataset, CliError> {
    let ds = extract_dataset(opts)?;
    let mut outputs = Outputs::default();
    outputs.write(&opts.out_csv, ds.to_csv_string()?)?;
    outputs.commit();
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Cart,
    Id3,
    Forest,
}

impl FromStr for Algorithm {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cart" | "tree" => Ok(Algorithm::Cart),
            "id3" => Ok(Algorithm::Id3),
            "forest" | "rf" => Ok(Algorithm::Forest),
            other => Err(CliError::UnknownAlgorithm(other.to_string())),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Cart => "cart",
            Algorithm::Id3 => "id3",
            Algorithm::Forest => "forest",
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub csv: PathBuf,
    /// Pre-split test table; when absent `csv` is split internally.
    pub test_csv: Option<PathBuf>,
    pub algorithm: Algorithm,
    pub tree: TreeParams,
    pub n_trees: usize,
    pub mtry: Option<usize>,
    /// Learner seed (bootstrap and feature sampling).
    pub seed: u64,
    pub split_seed: u64,
    pub train_fraction: f64,
    pub model_out: PathBuf,
    pub summary_out: Option<PathBuf>,
    /// Where to write the held-out rows of an internal split.
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub algorithm: Algorithm,
    pub n_train: usize,
    pub n_test: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub description: String,
}

impl TrainSummary {
    pub fn to_text(&self) -> String {
        format!(
            "algorithm: {}\nmodel: {}\ntraining instances: {}\ntest instances: {}\ntraining accuracy: {:.4}\ntest accuracy: {:.4}\n",
            self.algorithm, self.description, self.n_train, self.n_test, self.train_accuracy, self.test_accuracy
        )
    }
}

pub fn train_model(train: &Dataset, opts: &TrainOptions) -> Result<Model, CliError> {
    let model: Model = match opts.algorithm {
        Algorithm::Cart => {
            let mut params = opts.tree.clone();
            if params.criterion == Criterion::InfoGain {
                params.criterion = Criterion::Gini;
            }
            fit_cart(train, &params)?.into()
        }
        Algorithm::Id3 => fit_id3(train, &opts.tree)?.into(),
        Algorithm::Forest => {
            let mut tree_params = opts.tree.clone();
            if tree_params.criterion == Criterion::InfoGain {
                tree_params.criterion = Criterion::Gini;
            }
            let params = ForestParams {
                n_trees: opts.n_trees,
                mtry: opts.mtry,
                seed: opts.seed,
                tree_params,
                bootstrap: true,
            };
            fit_forest(train, &params)?.into()
        }
    };
    Ok(model)
}

pub fn model_accuracy(model: &Model, ds: &Dataset) -> Result<f64, CliError> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (row, &label) in ds.rows.iter().zip(&ds.labels) {
        correct += usize::from(model.predict(row)?.label == label);
    }
    Ok(correct as f64 / ds.len() as f64)
}

pub fn cmd_train(opts: &TrainOptions) -> Result<TrainSummary, CliError> {
    let full = dataset::read_csv(&opts.csv)?;
    let (train, test) = match &opts.test_csv {
        Some(path) => {
            let test = dataset::read_csv(path)?;
            if test.feature_names != full.feature_names {
                return Err(CliError::FeatureMismatch {
                    csv: path.clone(),
                    detail: "test table columns differ from the training table".into(),
                });
            }
            (full.clone(), test.with_class_names(&full.class_names)?)
        }
        None => full.train_test_split(opts.train_fraction, opts.split_seed)?,
    };
    train.check_trainable()?;
    let model = train_model(&train, opts)?;
    let summary = TrainSummary {
        algorithm: opts.algorithm,
        n_train: train.len(),
        n_test: test.len(),
        train_accuracy: model_accuracy(&model, &train)?,
        test_accuracy: model_accuracy(&model, &test)?,
        description: model.describe(),
    };

    let mut outputs = Outputs::default();
    outputs.write(&opts.model_out, model.to_json())?;
    if let Some(path) = &opts.summary_out {
        outputs.write(path, summary.to_text())?;
    }
    if let Some(path) = &opts.test_out {
        outputs.write(path, test.to_csv_string()?)?;
    }
    outputs.commit();
    Ok(summary)
}

/// Loads `csv` and re-encodes it against the model's feature and class lists.
pub fn load_matching(model: &Model, csv: &Path) -> Result<Dataset, CliError> {
    let ds = dataset::read_csv(csv)?;
    if ds.feature_names != model.feature_names() {
        let expected = model.feature_names();
        let detail = match expected.iter().zip(&ds.feature_names).position(|(a, b)| a != b) {
            Some(i) => format!("column {i} is {:?}, the model expects {:?}", ds.feature_names[i], expected[i]),
            None => format!("{} columns, the model expects {}", ds.feature_names.len(), expected.len()),
        };
        return Err(CliError::FeatureMismatch {
            csv: csv.to_path_buf(),
            detail,
        });
    }
    Ok(ds.with_class_names(model.class_names())?)
}

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub model: PathBuf,
    pub csv: PathBuf,
    pub out_dir: PathBuf,
    /// Class names given their own recall section; defaults to the preset's
    /// overlapping pair when those classes exist.
    pub focus: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    pub rocs: Vec<eval::RocCurve>,
    pub text: String,
}

pub fn focus_indices(class_names: &[String], focus: &[String]) -> Vec<usize> {
    let wanted: Vec<String> = if focus.is_empty() {
        preset::OVERLAPPING_PAIR.iter().map(|s| s.to_string()).collect()
    } else {
        focus.to_vec()
    };
    wanted
        .iter()
        .filter_map(|f| class_names.iter().position(|c| c == f))
        .collect()
}

pub fn evaluate_model(model: &Model, ds: &Dataset, focus: &[String], name: &str) -> Result<Evaluation, CliError> {
    let predictions = ds
        .rows
        .iter()
        .map(|r| model.predict(r))
        .collect::<Result<Vec<_>, _>>()?;
    let pairs: Vec<(usize, usize)> = ds.labels.iter().zip(&predictions).map(|(&t, p)| (t, p.label)).collect();
    let report = eval::evaluate(&pairs, ds.n_classes())?.with_class_names(&ds.class_names);
    let scores: Vec<Vec<f64>> = predictions.into_iter().map(|p| p.scores).collect();

    let mut rocs = Vec::new();
    let mut auc_lines = String::new();
    for k in 0..ds.n_classes() {
        match eval::roc_one_vs_rest(&scores, &ds.labels, k) {
            Ok(roc) => {
                let _ = writeln!(auc_lines, "{:<12} {:.4}", ds.class_names[k], roc.auc);
                rocs.push(roc);
            }
            Err(e @ (EvalError::NoPositives(_) | EvalError::NoNegatives(_))) => {
                let _ = writeln!(auc_lines, "{:<12} n/a ({e})", ds.class_names[k]);
            }
            Err(e) => return Err(e.into()),
        }
    }

    let comparison = eval::compare_report(&[(name.to_string(), report.clone())], &focus_indices(&ds.class_names, focus));
    let mut text = report.to_text();
    let _ = writeln!(text, "\none-vs-rest ROC AUC:\n{auc_lines}");
    text.push_str(&comparison.text);
    Ok(Evaluation { report, rocs, text })
}

pub fn cmd_evaluate(opts: &EvaluateOptions) -> Result<Evaluation, CliError> {
    let model = Model::load(&opts.model)?;
    let ds = load_matching(&model, &opts.csv)?;
    if ds.is_empty() {
        return Err(DatasetError::NoRows.into());
    }
    let name = opts
        .model
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    let evaluation = evaluate_model(&model, &ds, &opts.focus, &name)?;

    let mut outputs = Outputs::default();
    outputs.create_dir_all(&opts.out_dir)?;
    outputs.write(&opts.out_dir.join("report.txt"), &evaluation.text)?;
    outputs.write(&opts.out_dir.join("report.csv"), evaluation.report.to_csv())?;
    outputs.write(&opts.out_dir.join("confusion.csv"), evaluation.report.confusion_csv())?;
    let mut auc_csv = String::from("class_index,class,auc\n");
    for roc in &evaluation.rocs {
        outputs.write(&opts.out_dir.join(format!("roc_class_{}.csv", roc.class_index)), roc.to_csv())?;
        let _ = writeln!(auc_csv, "{},{},{}", roc.class_index, ds.class_names[roc.class_index], roc.auc);
    }
    outputs.write(&opts.out_dir.join("auc.csv"), auc_csv)?;
    outputs.commit();
    Ok(evaluation)
}

/// Evaluates several models on one table and tabulates them side by side.
pub fn cmd_compare(models: &[PathBuf], csv: &Path, out_dir: &Path, focus: &[String]) -> Result<eval::Comparison, CliError> {
    if models.is_empty() {
        return Err(CliError::Usage("compare needs at least one model".into()));
    }
    let mut reports = Vec::new();
    let mut class_names = Vec::new();
    for path in models {
        let model = Model::load(path)?;
        let ds = load_matching(&model, csv)?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        reports.push((name.clone(), evaluate_model(&model, &ds, focus, &name)?.report));
        class_names = ds.class_names;
    }
    let comparison = eval::compare_report(&reports, &focus_indices(&class_names, focus));
    let mut outputs = Outputs::default();
    outputs.create_dir_all(out_dir)?;
    outputs.write(&out_dir.join("comparison.txt"), &comparison.text)?;
    outputs.write(&out_dir.join("comparison.csv"), &comparison.csv)?;
    outputs.commit();
    Ok(comparison)
}

pub fn cmd_export_dot(model_path: &Path, out: &Path, tree: Option<usize>) -> Result<String, CliError> {
    let model = Model::load(model_path)?;
    let dot = match (&model, tree) {
        (Model::Tree(t), None) => t.export_dot(),
        (Model::Tree(_), Some(_)) => return Err(CliError::NotAForest),
        (Model::Forest(f), None) => return Err(CliError::TreeIndexRequired(f.trees.len())),
        (Model::Forest(f), Some(index)) => f
            .trees
            .get(index)
            .ok_or(CliError::TreeIndexOutOfRange {
                index,
                n_trees: f.trees.len(),
            })?
            .export_dot(),
    };
    let mut outputs = Outputs::default();
    outputs.write(out, &dot)?;
    outputs.commit();
    Ok(dot)
}

#[derive(Debug, Parser)]
#[command(name = "strokeclass", version, about = "Percussion stroke classification with tree learners")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a labeled synthetic corpus of WAV files.
    Synth {
        /// Stroke spec file (one `key=value` stroke per line); defaults to the built-in preset.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, short, required_unless_present = "print_preset")]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        per_class: usize,
        #[arg(long, default_value_t = DEFAULT_RATE_HZ)]
        rate: u32,
        /// Print the built-in preset and exit.
        #[arg(long, conflicts_with_all = ["spec"])]
        print_preset: bool,
    },
    /// Extract a feature table from a directory of labeled subdirectories.
    Extract {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Train a classifier on a feature table.
    Train {
        #[arg(long)]
        csv: PathBuf,
        /// Use this table as the test set instead of splitting `--csv`.
        #[arg(long)]
        test_csv: Option<PathBuf>,
        #[arg(long, default_value = "forest")]
        algo: String,
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        /// Features per node for forests; default floor(sqrt(F)).
        #[arg(long)]
        mtry: Option<usize>,
        /// Learner seed.
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        split_seed: u64,
        #[arg(long, default_value_t = 0.7)]
        train_fraction: f64,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Write the held-out rows of the internal split here.
        #[arg(long)]
        test_out: Option<PathBuf>,
    },
    /// Evaluate a model: report, confusion matrix and per-class ROC files.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Classes to list in the focus recall section (comma separated).
        #[arg(long, value_delimiter = ',')]
        focus: Vec<String>,
    },
    /// Compare several models on one table.
    Compare {
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        focus: Vec<String>,
    },
    /// Write a Graphviz rendering of a tree (or of one tree of a forest).
    ExportDot {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        tree: Option<usize>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct AnalysisArgs {
    #[arg(long, default_value_t = DEFAULT_RATE_HZ)]
    pub rate: u32,
    #[arg(long, default_value_t = 0.5)]
    pub duration: f64,
    #[arg(long, default_value_t = 512)]
    pub frame: usize,
    #[arg(long, default_value_t = 256)]
    pub hop: usize,
    #[arg(long, default_value_t = 0.85)]
    pub rolloff: f64,
    #[arg(long, default_value_t = 40)]
    pub mels: usize,
    #[arg(long, default_value_t = 13)]
    pub mfcc: usize,
    #[arg(long, default_value_t = 0.0)]
    pub fmin: f64,
    /// Upper mel bound; defaults to Nyquist.
    #[arg(long)]
    pub fmax: Option<f64>,
    #[arg(long, default_value_t = 440.0)]
    pub chroma_ref: f64,
    /// Frames per texture window; 1 aggregates each clip into one row.
    #[arg(long, default_value_t = 1)]
    pub texture_frames: usize,
}

impl AnalysisArgs {
    pub fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            frame_len: self.frame,
            hop: self.hop,
            rolloff_fraction: self.rolloff,
            n_mels: self.mels,
            n_mfcc: self.mfcc,
            fmin_hz: self.fmin,
            fmax_hz: self.fmax,
            chroma_ref_hz: self.chroma_ref,
            texture_frames: self.texture_frames,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TreeArgs {
    #[arg(long, default_value = "gini")]
    pub criterion: String,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_leaf: usize,
    #[arg(long, default_value_t = 0.0)]
    pub min_gain: f64,
    #[arg(long, default_value_t = 8)]
    pub id3_bins: usize,
}

impl TreeArgs {
    pub fn params(&self) -> Result<TreeParams, CliError> {
        Ok(TreeParams {
            criterion: self.criterion.parse().map_err(CliError::Usage)?,
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            min_gain: self.min_gain,
            id3_bins: self.id3_bins,
        })
    }
}

/// Runs one parsed command and returns the text to print on success.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Synth {
            print_preset: true, ..
        } => Ok(preset::DEFAULT_PRESET.to_string()),
        Command::Synth {
            spec,
            out,
            seed,
            per_class,
            rate,
            ..
        } => {
            let out = out.ok_or_else(|| CliError::Usage("--out is required".into()))?;
            let s = cmd_synth(&SynthOptions {
                spec,
                out_dir: out.clone(),
                seed,
                per_class,
                rate_hz: rate,
            })?;
            Ok(format!(
                "wrote {} clips of {} classes to {}\n",
                s.files.len(),
                s.classes.len(),
                out.display()
            ))
        }
        Command::Extract { input, out, analysis } => {
            let ds = cmd_extract(&ExtractOptions {
                input,
                out_csv: out.clone(),
                analysis: analysis.config(),
                rate_hz: analysis.rate,
                duration_s: analysis.duration,
            })?;
            Ok(format!(
                "wrote {} rows x {} features ({} classes) to {}\n",
                ds.len(),
                ds.n_features(),
                ds.n_classes(),
                out.display()
            ))
        }
        Command::Train {
            csv,
            test_csv,
            algo,
            tree,
            trees,
            mtry,
            seed,
            split_seed,
            train_fraction,
            model,
            summary,
            test_out,
        } => {
            let s = cmd_train(&TrainOptions {
                csv,
                test_csv,
                algorithm: algo.parse()?,
                tree: tree.params()?,
                n_trees: trees,
                mtry,
                seed,
                split_seed,
                train_fraction,
                model_out: model,
                summary_out: summary,
                test_out,
            })?;
            Ok(s.to_text())
        }
        Command::Evaluate { model, csv, out, focus } => {
            let e = cmd_evaluate(&EvaluateOptions {
                model,
                csv,
                out_dir: out,
                focus,
            })?;
            Ok(e.text)
        }
        Command::Compare { models, csv, out, focus } => Ok(cmd_compare(&models, &csv, &out, &focus)?.text),
        Command::ExportDot { model, out, tree } => {
            cmd_export_dot(&model, &out, tree)?;
            Ok(format!("wrote {}\n", out.display()))
        }
    }
}
