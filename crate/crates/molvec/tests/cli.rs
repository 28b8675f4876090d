//! End-to-end runs of the binary on small inputs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use molvec::archive::ModelArchive;
use molvec::config::Settings;
use molvec::ingest;
use molvec::workflows;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_molvec"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const CSV: &str = "name,smiles,y\n\
benzene,c1ccccc1,-2.0\n\
ethanol,CCO,1.1\n\
acid,CC(=O)O,1.2\n\
bad,C1CC,0.0\n\
phenol,Oc1ccccc1,0.0\n\
toluene,Cc1ccccc1,-2.2\n\
pyridine,c1ccncc1,1.1\n\
propanol,CCCO,0.6\n\
ether,CCOCC,-0.1\n\
acetone,CC(C)=O,0.4\n\
nitro,C[N+](=O)[O-],0.3\n";

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("mols.csv"), CSV).unwrap();
    dir
}

#[test]
fn zero_epochs_saves_the_initialization() {
    let dir = workspace();
    let out = run(dir.path(), &["train-unsup", "--data", "mols.csv", "--d", "6", "--epochs", "0", "--seed", "3", "--out", "m"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let archive = ModelArchive::load(&dir.path().join("m")).unwrap();
    let loaded = workflows::DataArgs::new(dir.path().join("mols.csv")).load(None).unwrap();
    let settings = Settings {
        d: Some(6),
        seed: Some(3),
        ..Settings::default()
    };
    let (embed, vectors) = workflows::initial_unsup(&loaded.dataset, &settings).unwrap();
    assert_eq!(archive.embed, embed);
    assert_eq!(archive.vectors, vectors);
}

#[test]
fn semi_pipeline_runs_end_to_end() {
    let dir = workspace();
    let out = run(
        dir.path(),
        &[
            "train-semi", "--data", "mols.csv", "--label-col", "y", "--labeled-frac", "0.5", "--test-frac", "0.2",
            "--d", "6", "--epochs", "3", "--d-fp", "5", "--n-hidden", "4", "--out", "m", "--metrics", "metrics.csv",
            "--history", "h.csv", "--skip-report", "skips.txt",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("dataset,method,n_test,rmse,mae\nmols,semi,2,"), "{metrics}");
    assert_eq!(fs::read_to_string(dir.path().join("h.csv")).unwrap().lines().count(), 4);
    assert_eq!(fs::read_to_string(dir.path().join("skips.txt")).unwrap().lines().count(), 1);
    let archive = ModelArchive::load(&dir.path().join("m")).unwrap();
    assert_eq!(archive.test_ids.len(), 2);

    let out = run(dir.path(), &["predict", "--model", "m", "--data", "mols.csv", "--out", "p.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let preds = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert_eq!(preds.lines().count(), 1 + 10);

    let out = run(
        dir.path(),
        &["embed", "--model", "m", "--data", "mols.csv", "--source", "fingerprint", "--out", "e.csv"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let emb = fs::read_to_string(dir.path().join("e.csv")).unwrap();
    let header = emb.lines().next().unwrap();
    assert_eq!(header, "graph_id,dim_0,dim_1,dim_2,dim_3,dim_4");
    // graph count minus skipped rows
    assert_eq!(emb.lines().count() - 1, 10);
}

#[test]
fn embeddings_round_trip_into_eval() {
    let dir = workspace();
    assert_eq!(code(&run(dir.path(), &["train-unsup", "--data", "mols.csv", "--d", "4", "--epochs", "1", "--out", "m"])), 0);
    assert_eq!(code(&run(dir.path(), &["embed", "--model", "m", "--data", "mols.csv", "--out", "u.csv"])), 0);
    let m = workflows::read_embeddings(&dir.path().join("u.csv")).unwrap();
    assert_eq!((m.ids.len(), m.dim()), (10, 4));
    let archive = ModelArchive::load(&dir.path().join("m")).unwrap();
    let row = archive.vectors.row_of_id(m.ids[3]).unwrap();
    assert_eq!(m.rows[3], archive.vectors.row(row));

    let labels = "smiles,active\nc1ccccc1,1\nCCO,0\nCC(=O)O,1\nC1CC,0\nOc1ccccc1,1\nCc1ccccc1,0\nc1ccncc1,1\nCCCO,0\nCCOCC,1\nCC(C)=O,0\nC[N+](=O)[O-],1\n";
    fs::write(dir.path().join("labels.csv"), labels).unwrap();
    let out = run(
        dir.path(),
        &[
            "eval-downstream", "--embeddings", "u.csv", "--labels", "labels.csv", "--label-col", "active", "--task",
            "classification", "--repeats", "3", "--test-frac", "0.3",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("dataset,method,mean,std\nlabels,molvec,"), "{text}");
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = workspace();
    // usage
    assert_eq!(code(&run(dir.path(), &["train-unsup"])), 1);
    assert_eq!(code(&run(dir.path(), &["frobnicate"])), 1);
    assert_eq!(
        code(&run(dir.path(), &["train-unsup", "--data", "mols.csv", "--optimizer", "lbfgs", "--out", "m"])),
        1
    );
    assert_eq!(code(&run(dir.path(), &["train-unsup", "--data", "mols.csv", "--d", "0", "--out", "m"])), 1);
    assert_eq!(code(&run(dir.path(), &["--help"])), 0);

    // data
    let out = run(dir.path(), &["train-unsup", "--data", "missing.csv", "--out", "m"]);
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert_eq!(msg.trim_end().lines().count(), 1, "{msg}");
    assert!(msg.contains("missing.csv"), "{msg}");
    fs::write(dir.path().join("broken"), "molvec-archive 1\nkind = unsup\n").unwrap();
    assert_eq!(code(&run(dir.path(), &["embed", "--model", "broken", "--data", "mols.csv", "--out", "e"])), 2);
    fs::write(dir.path().join("future"), "molvec-archive 999\n").unwrap();
    let out = run(dir.path(), &["embed", "--model", "future", "--data", "mols.csv", "--out", "e"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("999"));

    // numerics: an exploding learning rate
    let out = run(
        dir.path(),
        &["train-unsup", "--data", "mols.csv", "--d", "4", "--epochs", "50", "--optimizer", "sgd", "--lr", "1e300", "--out", "m"],
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn flags_override_the_config_file() {
    let dir = workspace();
    fs::write(dir.path().join("run.toml"), "d = 5\nepochs = 0\nseed = 9\n").unwrap();
    let out = run(
        dir.path(),
        &["train-unsup", "--data", "mols.csv", "--config", "run.toml", "--d", "3", "--out", "m"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let archive = ModelArchive::load(&dir.path().join("m")).unwrap();
    assert_eq!(archive.embed.d, 3);
    assert_eq!(archive.seed, 9);
    assert_eq!(archive.config["epochs"], "0");
}

#[test]
fn unsupervised_models_cannot_predict_and_unknown_molecules_have_no_vector() {
    let dir = workspace();
    assert_eq!(code(&run(dir.path(), &["train-unsup", "--data", "mols.csv", "--d", "4", "--epochs", "0", "--out", "m"])), 0);
    assert_eq!(code(&run(dir.path(), &["predict", "--model", "m", "--data", "mols.csv", "--out", "p"])), 1);

    fs::write(dir.path().join("more.csv"), format!("{CSV}ethane,CC,0.5\n")).unwrap();
    let out = run(dir.path(), &["embed", "--model", "m", "--data", "more.csv", "--out", "e"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("no molecule vector"));
    // fingerprints need no molecule vector
    assert_eq!(
        code(&run(dir.path(), &["embed", "--model", "m", "--data", "more.csv", "--source", "fingerprint", "--out", "e"])),
        0
    );
}

#[test]
fn tu_directories_load_by_name() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/MUTAG");
    let ds = ingest::parse_tu_dataset(&data, "MUTAG").unwrap();
    let via_args = workflows::DataArgs::new(&data).load(None).unwrap().dataset;
    assert_eq!(ds, via_args);
    assert_eq!(ds.len(), 188);
}
