use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use molvec::archive::ModelArchive;
use molvec::config::Settings;
use molvec::workflows::{self, DataArgs, SemiOptions, SourceArg};
use molvec::{CliError, Result};
use molvec_core::gradcheck::{self, GradcheckConfig};

#[derive(Parser)]
#[command(name = "molvec", version, about = "Hierarchical molecule embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn embeddings without labels and save the model
    TrainUnsup(TrainUnsup),
    /// Train embeddings and a predictor from a labeled fraction of the data
    TrainSemi(TrainSemi),
    /// Write one embedding row per molecule
    Embed(Embed),
    /// Score embeddings with a linear SVM over repeated random splits
    EvalDownstream(EvalDownstream),
    /// Predict properties with a semi-supervised model
    Predict(Predict),
    /// Compare every gradient with central finite differences
    Gradcheck(Gradcheck),
}

#[derive(Args)]
struct TrainUnsup {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    settings: Settings,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch objective as CSV
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct TrainSemi {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    settings: Settings,
    #[arg(long, default_value_t = 0.06)]
    labeled_frac: f64,
    #[arg(long, default_value_t = 0.1)]
    test_frac: f64,
    /// Labeled molecules only, lambda = 0
    #[arg(long)]
    supervised_only: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    history: Option<PathBuf>,
    /// Held-out metrics as CSV
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct Embed {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "u")]
    source: SourceArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalDownstream {
    #[arg(long)]
    embeddings: PathBuf,
    #[command(flatten)]
    labels: DataArgs,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0.1)]
    test_frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Method name for the results row
    #[arg(long, default_value = "molvec")]
    method: String,
    /// Results CSV; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Predict {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Gradcheck {
    #[arg(long, default_value_t = 4)]
    d: usize,
    #[arg(long = "L", visible_alias = "levels", default_value_t = 3)]
    levels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn write_opt(path: &Option<PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => workflows::write_file(p, text),
        None => Ok(()),
    }
}

fn emit(path: &Option<PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => workflows::write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn report_skips(skipped: usize, path: &Path) {
    if skipped > 0 {
        eprintln!("{}: skipped {skipped} rows", path.display());
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::TrainUnsup(a) => {
            let settings = a.settings.layered()?;
            let loaded = a.data.load(None)?;
            report_skips(loaded.skipped.len(), &a.data.data);
            let run = workflows::train_unsup(&loaded.dataset, &settings)?;
            run.archive.save(&a.out)?;
            write_opt(&a.history, &workflows::unsup_history_csv(&run.history))?;
        }
        Command::TrainSemi(a) => {
            let settings = a.settings.layered()?;
            let loaded = a.data.load(None)?;
            report_skips(loaded.skipped.len(), &a.data.data);
            let opts = SemiOptions {
                labeled_fraction: a.labeled_frac,
                test_fraction: a.test_frac,
                supervised_only: a.supervised_only,
            };
            let run = workflows::train_semi(&loaded.dataset, &settings, &opts)?;
            run.archive.save(&a.out)?;
            write_opt(&a.history, &workflows::semi_history_csv(&run.history))?;
            let method = if a.supervised_only { "supervised" } else { "semi" };
            let metrics = workflows::metrics_csv(&loaded.dataset.name, method, loaded.dataset.task, &run.test);
            write_opt(&a.metrics, &metrics)?;
            eprint!("{metrics}");
        }
        Command::Embed(a) => {
            let archive = ModelArchive::load(&a.model)?;
            let loaded = a.data.load(Some(&archive.vocab))?;
            report_skips(loaded.skipped.len(), &a.data.data);
            let m = workflows::embed(&archive, &loaded.dataset, a.source)?;
            workflows::write_file(&a.out, &workflows::embeddings_csv(&m))?;
        }
        Command::EvalDownstream(a) => {
            let m = workflows::read_embeddings(&a.embeddings)?;
            let loaded = a.labels.load(None)?;
            let r = workflows::eval_downstream(&m, &loaded.dataset, a.repeats, a.test_frac, a.seed)?;
            emit(&a.out, &workflows::results_csv(&loaded.dataset.name, &a.method, &r))?;
        }
        Command::Predict(a) => {
            let archive = ModelArchive::load(&a.model)?;
            let loaded = a.data.load(Some(&archive.vocab))?;
            report_skips(loaded.skipped.len(), &a.data.data);
            let preds = workflows::predict(&archive, &loaded.dataset)?;
            workflows::write_file(&a.out, &workflows::predictions_csv(&preds))?;
        }
        Command::Gradcheck(a) => {
            let report = gradcheck::run(&GradcheckConfig {
                seed: a.seed,
                d: a.d,
                levels: a.levels,
                ..GradcheckConfig::default()
            })?;
            for g in &report.groups {
                println!("{} {} checked={} max_rel_error={:e}", g.task.name(), g.group, g.checked, g.max_rel_error);
            }
            let verdict = if report.passed() { "PASS" } else { "FAIL" };
            println!("{verdict} max_rel_error={:e} tolerance={:e}", report.max_rel_error(), report.tolerance);
            if !report.passed() {
                return Ok(3);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn one_line(e: &CliError) -> String {
    let mut msg = e.to_string();
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        let text = s.to_string();
        if !msg.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
        source = s.source();
    }
    msg.replace('\n', " ")
}
