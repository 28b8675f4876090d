//! The pipelines behind each subcommand, usable without the binary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use molvec_core::dataset::{label_fraction_split, split_dataset, Dataset, Task};
use molvec_core::eval::{self, EmbeddingMatrix, EmbeddingSource, ProtocolResult, SvmConfig};
use molvec_core::molgraph::{AtomVocab, MoleculeGraph};
use molvec_core::nmp::{forward_levels, EmbedParams};
use molvec_core::pvns::{self, EpochStats, MoleculeVectorTable};
use molvec_core::readout::{self, ReadoutParams, DEFAULT_FP_DIM, DEFAULT_HIDDEN};
use molvec_core::semisup::{self, SemiEpochStats};

use crate::archive::{ModelArchive, ModelKind};
use crate::config::Settings;
use crate::error::{CliError, Result};
use crate::ingest::{self, CsvOptions, SkipRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    /// TU graph-benchmark directory
    Tu,
    /// CSV with a SMILES column
    SmilesCsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// TU dataset directory or SMILES CSV file
    #[arg(long, visible_alias = "labels")]
    pub data: PathBuf,
    /// Defaults to `tu` for directories and `smiles-csv` for files
    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,
    /// TU dataset name; defaults to the directory name
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, default_value = "smiles")]
    pub smiles_col: String,
    /// CSV label column; without it the molecules are loaded unlabeled
    #[arg(long)]
    pub label_col: Option<String>,
    #[arg(long, value_enum, default_value = "regression")]
    pub task: TaskArg,
    /// Write skipped CSV rows here, one `row=<n> reason=<msg>` per line
    #[arg(long)]
    pub skip_report: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub skipped: Vec<SkipRecord>,
}

impl DataArgs {
    pub fn new(data: impl Into<PathBuf>) -> Self {
        Self {
            data: data.into(),
            format: None,
            name: None,
            smiles_col: "smiles".into(),
            label_col: None,
            task: TaskArg::Regression,
            skip_report: None,
        }
    }

    fn format(&self) -> DataFormat {
        self.format
            .unwrap_or(if self.data.is_dir() { DataFormat::Tu } else { DataFormat::SmilesCsv })
    }

    /// Loads the dataset; with `frozen` the atom vocabulary must be (CSV:
    /// is mapped through) the given one.
    pub fn load(&self, frozen: Option<&AtomVocab>) -> Result<Loaded> {
        let loaded = match self.format() {
            DataFormat::Tu => {
                let name = match &self.name {
                    Some(n) => n.clone(),
                    None => self
                        .data
                        .file_name()
                        .map(|s| s.to_string_lossy().into_owned())
                        .ok_or_else(|| CliError::Usage("cannot infer the TU dataset name; pass --name".into()))?,
                };
                let dataset = ingest::parse_tu_dataset(&self.data, &name)?;
                if let Some(v) = frozen {
                    if *v != dataset.vocab {
                        return Err(CliError::Usage("dataset atom types differ from the model's".into()));
                    }
                }
                Loaded {
                    dataset,
                    skipped: Vec::new(),
                }
            }
            DataFormat::SmilesCsv => {
                let task = match self.task {
                    TaskArg::Regression => Task::Regression,
                    TaskArg::Classification => Task::BinaryClassification,
                };
                let load = ingest::load_labeled_csv(
                    &self.data,
                    &CsvOptions {
                        smiles_column: &self.smiles_col,
                        label_column: self.label_col.as_deref(),
                        task,
                        frozen_vocab: frozen,
                    },
                )?;
                Loaded {
                    dataset: load.dataset,
                    skipped: load.skipped,
                }
            }
        };
        if let Some(path) = &self.skip_report {
            let text: String = loaded.skipped.iter().map(|s| format!("{s}\n")).collect();
            write_file(path, &text)?;
        }
        Ok(loaded)
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn config_map(settings: &Settings) -> Result<BTreeMap<String, String>> {
    Ok(settings
        .snapshot()?
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect())
}

pub struct UnsupRun {
    pub archive: ModelArchive,
    pub history: Vec<EpochStats>,
}

pub fn train_unsup(dataset: &Dataset, settings: &Settings) -> Result<UnsupRun> {
    let cfg = settings.train()?;
    let model = pvns::train_unsupervised(&dataset.graphs, dataset.vocab.len(), &settings.neg(), &cfg)?;
    Ok(UnsupRun {
        archive: ModelArchive {
            kind: ModelKind::Unsupervised,
            dataset: dataset.name.clone(),
            seed: cfg.seed,
            levels: cfg.levels,
            vocab: dataset.vocab.clone(),
            embed: model.params,
            vectors: model.vectors,
            readout: None,
            test_ids: Vec::new(),
            config: config_map(settings)?,
        },
        history: model.history,
    })
}

pub fn unsup_history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,mean_objective\n");
    for h in history {
        let _ = writeln!(out, "{},{:?}", h.epoch, h.mean_objective);
    }
    out
}

pub fn semi_history_csv(history: &[SemiEpochStats]) -> String {
    let mut out = String::from("epoch,sup_loss,reg_loss\n");
    for h in history {
        let _ = writeln!(out, "{},{:?},{:?}", h.epoch, h.sup_loss, h.reg_loss);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiOptions {
    pub labeled_fraction: f64,
    pub test_fraction: f64,
    /// Train on the labeled molecules alone with `lambda = 0`.
    pub supervised_only: bool,
}

impl Default for SemiOptions {
    fn default() -> Self {
        Self {
            labeled_fraction: 0.06,
            test_fraction: 0.1,
            supervised_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestMetrics {
    pub n: usize,
    /// `(rmse, mae)` for regression, `(accuracy, accuracy)` for
    /// classification.
    pub values: (f64, f64),
}

pub struct SemiRun {
    pub archive: ModelArchive,
    pub history: Vec<SemiEpochStats>,
    pub labeled: usize,
    pub unlabeled: usize,
    pub test: TestMetrics,
}

/// Holds out `test_fraction` of the dataset, labels `labeled_fraction` of
/// the rest, trains, and scores the held-out molecules. Held-out molecules
/// never enter training, not even the regularizer.
pub fn train_semi(dataset: &Dataset, settings: &Settings, opts: &SemiOptions) -> Result<SemiRun> {
    let mut cfg = settings.semi()?;
    let seed = cfg.train.seed;
    let (train, test) = split_dataset(dataset, opts.test_fraction, seed)?;
    let (labeled, unlabeled) = label_fraction_split(&train, opts.labeled_fraction, seed)?;
    let unlabeled = if opts.supervised_only {
        cfg.lambda = 0.0;
        unlabeled.subset(&[])
    } else {
        unlabeled.without_labels()
    };
    let model = semisup::train_semi(&labeled, &unlabeled, &cfg)?;
    let test_metrics = score(&test, &model.embed, &model.readout, cfg.train.levels)?;
    let mut settings = settings.clone();
    settings.lambda = Some(cfg.lambda);
    Ok(SemiRun {
        archive: ModelArchive {
            kind: ModelKind::SemiSupervised,
            dataset: dataset.name.clone(),
            seed,
            levels: cfg.train.levels,
            vocab: dataset.vocab.clone(),
            embed: model.embed,
            vectors: model.vectors,
            readout: Some(model.readout),
            test_ids: test.graphs.iter().map(MoleculeGraph::id).collect(),
            config: config_map(&settings)?,
        },
        history: model.history,
        labeled: labeled.len(),
        unlabeled: unlabeled.len(),
        test: test_metrics,
    })
}

pub fn score(test: &Dataset, embed: &EmbedParams, ro: &ReadoutParams, levels: usize) -> Result<TestMetrics> {
    let truth = test
        .aligned_labels()
        .ok_or_else(|| CliError::Core(molvec_core::Error::Data("test molecules need labels".into())))?;
    let pred = semisup::predict_graphs(&test.graphs, embed, ro, levels)?;
    let values = match test.task {
        Task::Regression => eval::regression_metrics(&pred, &truth)?,
        Task::BinaryClassification => {
            let acc = pred
                .iter()
                .zip(&truth)
                .filter(|(p, y)| ((**p >= 0.5) as u8 as f64) == **y)
                .count() as f64
                / truth.len() as f64;
            (acc, acc)
        }
    };
    Ok(TestMetrics { n: truth.len(), values })
}

pub fn metrics_csv(dataset: &str, method: &str, task: Task, m: &TestMetrics) -> String {
    match task {
        Task::Regression => format!(
            "dataset,method,n_test,rmse,mae\n{dataset},{method},{},{:?},{:?}\n",
            m.n, m.values.0, m.values.1
        ),
        Task::BinaryClassification => {
            format!("dataset,method,n_test,accuracy\n{dataset},{method},{},{:?}\n", m.n, m.values.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    /// Molecule vectors learned during training
    U,
    /// Softmax-pooled features
    Fingerprint,
}

/// Projection used for fingerprints: the trained readout's `W`, or for
/// unsupervised models the readout initialization of the model's seed.
fn projection(archive: &ModelArchive) -> Result<(Vec<f64>, usize)> {
    match &archive.readout {
        Some(r) => Ok((r.w.clone(), r.d_fp)),
        None => {
            let r = ReadoutParams::init(
                archive.seed,
                archive.embed.d,
                DEFAULT_FP_DIM,
                DEFAULT_HIDDEN,
                Task::BinaryClassification,
            )?;
            Ok((r.w, DEFAULT_FP_DIM))
        }
    }
}

pub fn embed(archive: &ModelArchive, dataset: &Dataset, source: SourceArg) -> Result<EmbeddingMatrix> {
    let ids: Vec<usize> = dataset.graphs.iter().map(MoleculeGraph::id).collect();
    let rows = match source {
        SourceArg::U => ids
            .iter()
            .map(|&id| {
                molecule_vector(&archive.vectors, id).ok_or_else(|| {
                    CliError::Core(molvec_core::Error::Data(format!(
                        "graph {id} has no molecule vector; vectors exist only for training molecules"
                    )))
                })
            })
            .collect::<Result<Vec<_>>>()?,
        SourceArg::Fingerprint => {
            let (w, d_fp) = projection(archive)?;
            dataset
                .graphs
                .iter()
                .map(|g| Ok(readout::fingerprint(&forward_levels(g, &archive.embed, archive.levels)?, &w, d_fp)?))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let source = match source {
        SourceArg::U => EmbeddingSource::MoleculeVector,
        SourceArg::Fingerprint => EmbeddingSource::Fingerprint,
    };
    Ok(EmbeddingMatrix::new(source, ids, rows)?)
}

fn molecule_vector(table: &MoleculeVectorTable, id: usize) -> Option<Vec<f64>> {
    table.row_of_id(id).map(|r| table.row(r).to_vec())
}

pub fn embeddings_csv(m: &EmbeddingMatrix) -> String {
    let mut out = String::from("graph_id");
    for j in 0..m.dim() {
        let _ = write!(out, ",dim_{j}");
    }
    out.push('\n');
    for (id, row) in m.ids.iter().zip(&m.rows) {
        let _ = write!(out, "{id}");
        for x in row {
            let _ = write!(out, ",{x:?}");
        }
        out.push('\n');
    }
    out
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("graph_id") {
        return Err(CliError::format(path, 1, "first column must be graph_id"));
    }
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |what: &str| CliError::format(path, line, format!("cannot parse {what}"));
        ids.push(rec.get(0).unwrap_or("").parse::<usize>().map_err(|_| bad("graph id"))?);
        rows.push(
            rec.iter()
                .skip(1)
                .map(|x| x.parse::<f64>().map_err(|_| bad("value")))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(EmbeddingMatrix::new(EmbeddingSource::MoleculeVector, ids, rows)?)
}

/// Joins embeddings with the dataset's labels by graph id and runs the
/// repeated split protocol.
pub fn eval_downstream(
    embeddings: &EmbeddingMatrix,
    labels: &Dataset,
    repeats: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<ProtocolResult> {
    let mut x = Vec::with_capacity(embeddings.ids.len());
    let mut y = Vec::with_capacity(embeddings.ids.len());
    for (id, row) in embeddings.ids.iter().zip(&embeddings.rows) {
        let label = labels.label(*id).ok_or_else(|| {
            CliError::Core(molvec_core::Error::Data(format!("no label for graph id {id}")))
        })?;
        x.push(row.clone());
        y.push(label);
    }
    let svm = SvmConfig {
        seed,
        ..SvmConfig::default()
    };
    Ok(eval::evaluate_protocol(&x, &y, repeats, test_fraction, seed, &svm)?)
}

pub fn results_csv(dataset: &str, method: &str, r: &ProtocolResult) -> String {
    format!("dataset,method,mean,std\n{dataset},{method},{:?},{:?}\n", r.mean, r.std)
}

pub fn predict(archive: &ModelArchive, dataset: &Dataset) -> Result<Vec<(usize, f64)>> {
    let ro = archive
        .readout
        .as_ref()
        .ok_or_else(|| CliError::Usage("predict needs a semi-supervised model (this one has no readout)".into()))?;
    let preds = semisup::predict_graphs(&dataset.graphs, &archive.embed, ro, archive.levels)?;
    Ok(dataset.graphs.iter().map(MoleculeGraph::id).zip(preds).collect())
}

pub fn predictions_csv(preds: &[(usize, f64)]) -> String {
    let mut out = String::from("graph_id,prediction\n");
    for (id, p) in preds {
        let _ = writeln!(out, "{id},{p:?}");
    }
    out
}

/// Parameters at initialization for a given dataset and settings, exactly
/// what `train-unsup --epochs 0` saves.
pub fn initial_unsup(dataset: &Dataset, settings: &Settings) -> Result<(EmbedParams, MoleculeVectorTable)> {
    let cfg = settings.train()?;
    Ok((
        EmbedParams::init(cfg.seed, cfg.d, dataset.vocab.len())?,
        MoleculeVectorTable::init(cfg.seed, cfg.d, dataset.graphs.iter().map(MoleculeGraph::id).collect()),
    ))
}
