//! Dataset loaders: the TU graph-benchmark layout and labeled SMILES CSVs.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use molvec_core::dataset::{Dataset, Task};
use molvec_core::molgraph::{AtomVocab, Bond, BondType, MoleculeGraph};
use molvec_core::smiles;

use crate::error::{CliError, Result};

/// Node-label symbols and edge-label bond types of a TU dataset, indexed by
/// the integer label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TuLabelMap {
    pub nodes: Vec<String>,
    pub edges: Vec<BondType>,
}

const MUTAG_NODES: [&str; 7] = ["C", "N", "O", "F", "I", "Cl", "Br"];
const MUTAG_EDGES: [BondType; 4] = [BondType::Aromatic, BondType::Single, BondType::Double, BondType::Triple];

const PTC_NODES: [&str; 18] = [
    "In", "P", "O", "N", "Na", "C", "Cl", "S", "Br", "F", "K", "Cu", "Zn", "I", "Ba", "Sn", "Pb", "Ca",
];
const PTC_EDGES: [BondType; 4] = [BondType::Triple, BondType::Double, BondType::Single, BondType::Aromatic];

/// Label maps shipped with the crate. Anything else must come with a README
/// that lists both maps.
pub fn shipped_label_map(name: &str) -> Option<TuLabelMap> {
    let (nodes, edges): (&[&str], &[BondType]) = match name {
        "MUTAG" => (&MUTAG_NODES, &MUTAG_EDGES),
        "PTC_MR" | "PTC_FM" | "PTC_FR" | "PTC_MM" => (&PTC_NODES, &PTC_EDGES),
        _ => return None,
    };
    Some(TuLabelMap {
        nodes: nodes.iter().map(|s| s.to_string()).collect(),
        edges: edges.to_vec(),
    })
}

/// Label id to name, as listed in a README block.
pub type LabelBlock = BTreeMap<usize, String>;

/// Reads the `Node labels:` and `Edge labels:` blocks of a TU README
/// (`  <int>  <name>` per line). Returns `None` for a block that is absent.
pub fn readme_label_blocks(text: &str) -> (Option<LabelBlock>, Option<LabelBlock>) {
    let block = |header: &str| -> Option<LabelBlock> {
        let mut lines = text.lines().skip_while(|l| !l.trim().eq_ignore_ascii_case(header));
        lines.next()?;
        let mut map = BTreeMap::new();
        for line in lines {
            let t = line.trim();
            if t.is_empty() {
                if map.is_empty() {
                    continue;
                }
                break;
            }
            let mut parts = t.split_whitespace();
            let (Some(k), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
                break;
            };
            let Ok(k) = k.parse::<usize>() else { break };
            map.insert(k, v.to_string());
        }
        (!map.is_empty()).then_some(map)
    };
    (block("Node labels:"), block("Edge labels:"))
}

fn check_against_readme(map: &TuLabelMap, readme: &Path, text: &str) -> Result<()> {
    let (nodes, edges) = readme_label_blocks(text);
    if let Some(nodes) = nodes {
        for (&k, v) in &nodes {
            if map.nodes.get(k) != Some(v) {
                return Err(CliError::format(
                    readme,
                    0,
                    format!("node label {k} is {v:?} in the README but {:?} in the shipped map", map.nodes.get(k)),
                ));
            }
        }
    }
    if let Some(edges) = edges {
        for (&k, v) in &edges {
            if map.edges.get(k).map(|b| b.name()) != Some(v.to_ascii_lowercase().as_str()) {
                return Err(CliError::format(
                    readme,
                    0,
                    format!("edge label {k} is {v:?} in the README but {:?} in the shipped map", map.edges.get(k)),
                ));
            }
        }
    }
    Ok(())
}

fn map_from_readme(readme: &Path, text: &str) -> Result<TuLabelMap> {
    let (Some(nodes), Some(edges)) = readme_label_blocks(text) else {
        return Err(CliError::format(readme, 0, "no shipped label map and the README lacks label blocks"));
    };
    let dense = |m: &BTreeMap<usize, String>| m.keys().copied().eq(0..m.len());
    if !dense(&nodes) || !dense(&edges) {
        return Err(CliError::format(readme, 0, "README labels are not numbered 0..n"));
    }
    let edges = edges
        .values()
        .map(|v| {
            BondType::from_name(&v.to_ascii_lowercase())
                .ok_or_else(|| CliError::format(readme, 0, format!("unknown bond type {v:?}")))
        })
        .collect::<Result<_>>()?;
    Ok(TuLabelMap {
        nodes: nodes.into_values().collect(),
        edges,
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn int_column(path: &Path) -> Result<Vec<i64>> {
    let text = read(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|_| CliError::format(path, i + 1, format!("expected an integer, got {l:?}")))
        })
        .collect()
}

fn index(path: &Path, line: usize, value: i64, len: usize) -> Result<usize> {
    if value < 0 || value as usize >= len {
        return Err(CliError::format(path, line, format!("label {value} outside 0..{len}")));
    }
    Ok(value as usize)
}

/// Loads `<dir>/<name>_{A,graph_indicator,graph_labels,node_labels,edge_labels}.txt`.
///
/// Node and graph indices in the files are 1-based; graph `i` gets id
/// `i - 1`. Graph labels `{-1, 1}` become `{0, 1}`. When `<dir>/README.txt`
/// exists its label blocks must agree with the shipped map.
pub fn parse_tu_dataset(dir: &Path, name: &str) -> Result<Dataset> {
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));
    let readme = dir.join("README.txt");
    let readme_text = if readme.exists() { Some(read(&readme)?) } else { None };
    let map = match (shipped_label_map(name), &readme_text) {
        (Some(map), Some(text)) => {
            check_against_readme(&map, &readme, text)?;
            map
        }
        (Some(map), None) => map,
        (None, Some(text)) => map_from_readme(&readme, text)?,
        (None, None) => {
            return Err(CliError::Usage(format!("no label map for TU dataset {name} and no README in {}", dir.display())))
        }
    };

    let indicator_path = file("graph_indicator");
    let indicator = int_column(&indicator_path)?;
    let node_labels_path = file("node_labels");
    let node_labels = int_column(&node_labels_path)?;
    let graph_labels_path = file("graph_labels");
    let graph_labels = int_column(&graph_labels_path)?;
    let edge_labels_path = file("edge_labels");
    let edge_labels = int_column(&edge_labels_path)?;
    let a_path = file("A");
    let a_text = read(&a_path)?;

    if node_labels.len() != indicator.len() {
        return Err(CliError::format(&node_labels_path, 0, "one node label per node expected"));
    }
    let n_graphs = graph_labels.len();
    // node (0-based) -> (graph, position within graph)
    let mut local = Vec::with_capacity(indicator.len());
    let mut atoms: Vec<Vec<usize>> = vec![Vec::new(); n_graphs];
    for (i, (&g, &lab)) in indicator.iter().zip(&node_labels).enumerate() {
        let g = index(&indicator_path, i + 1, g - 1, n_graphs)?;
        local.push((g, atoms[g].len()));
        atoms[g].push(index(&node_labels_path, i + 1, lab, map.nodes.len())?);
    }

    let mut bonds: Vec<BTreeMap<(usize, usize), BondType>> = vec![BTreeMap::new(); n_graphs];
    let mut rows = 0;
    for (i, line) in a_text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || CliError::format(&a_path, i + 1, format!("expected `row, col`, got {line:?}"));
        let (r, c) = line.split_once(',').ok_or_else(bad)?;
        let r: i64 = r.trim().parse().map_err(|_| bad())?;
        let c: i64 = c.trim().parse().map_err(|_| bad())?;
        let r = index(&a_path, i + 1, r - 1, local.len())?;
        let c = index(&a_path, i + 1, c - 1, local.len())?;
        let label = *edge_labels
            .get(rows)
            .ok_or_else(|| CliError::format(&edge_labels_path, rows + 1, "fewer edge labels than edges"))?;
        let kind = map.edges[index(&edge_labels_path, rows + 1, label, map.edges.len())?];
        rows += 1;
        let ((gr, lr), (gc, lc)) = (local[r], local[c]);
        if gr != gc {
            return Err(CliError::format(&a_path, i + 1, "edge joins two graphs"));
        }
        if lr == lc {
            return Err(CliError::format(&a_path, i + 1, "self-loop"));
        }
        let key = (lr.min(lc), lr.max(lc));
        if let Some(prev) = bonds[gr].insert(key, kind) {
            if prev != kind {
                return Err(CliError::format(&a_path, i + 1, "the two directions of an edge disagree on its label"));
            }
        }
    }
    if rows != edge_labels.len() {
        return Err(CliError::format(&edge_labels_path, 0, "edge label count differs from edge count"));
    }

    let vocab = AtomVocab::from_symbols(map.nodes.iter().map(String::as_str))?;
    let mut graphs = Vec::with_capacity(n_graphs);
    let mut labels = BTreeMap::new();
    let mut values: Vec<i64> = graph_labels.clone();
    values.sort_unstable();
    values.dedup();
    let to_binary = |v: i64| -> Option<f64> {
        match (values.as_slice(), v) {
            ([-1, 1], -1) | ([0, 1], 0) | ([-1], -1) | ([0], 0) => Some(0.0),
            ([-1, 1], 1) | ([0, 1], 1) | ([1], 1) => Some(1.0),
            _ => None,
        }
    };
    for (g, (a, b)) in atoms.into_iter().zip(bonds).enumerate() {
        let bonds = b.into_iter().map(|((u, v), k)| Bond::new(u, v, k)).collect();
        graphs.push(MoleculeGraph::new(g, a, bonds)?);
        let y = to_binary(graph_labels[g])
            .ok_or_else(|| CliError::format(&graph_labels_path, g + 1, "graph labels are not a two-class set"))?;
        labels.insert(g, y);
    }
    Ok(Dataset::new(name, Task::BinaryClassification, vocab, graphs, labels)?)
}

/// One CSV row left out of a bulk load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkipRecord {
    /// 0-based data row (header excluded).
    pub row: usize,
    pub reason: String,
}

impl fmt::Display for SkipRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row={} reason={}", self.row, self.reason)
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions<'a> {
    pub smiles_column: &'a str,
    /// `None` loads the molecules without labels.
    pub label_column: Option<&'a str>,
    pub task: Task,
    /// Map atoms through this vocabulary and skip molecules with atom types
    /// outside it, instead of growing a new vocabulary.
    pub frozen_vocab: Option<&'a AtomVocab>,
}

#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub dataset: Dataset,
    pub skipped: Vec<SkipRecord>,
    pub rows: usize,
}

/// Loads a SMILES CSV. Graph ids are the 0-based data row; rows whose SMILES
/// or label cannot be used are skipped and reported, never fatal.
pub fn load_labeled_csv(path: &Path, opts: &CsvOptions<'_>) -> Result<CsvLoad> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("{}: no column named {name:?}", path.display())))
    };
    let smiles_col = column(opts.smiles_column)?;
    let label_col = opts.label_column.map(column).transpose()?;
    let mut vocab = opts.frozen_vocab.cloned().unwrap_or_default();
    let mut graphs = Vec::new();
    let mut labels = BTreeMap::new();
    let mut skipped = Vec::new();
    let mut rows = 0;
    for (row, record) in reader.records().enumerate() {
        rows += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                skipped.push(SkipRecord { row, reason: format!("malformed csv record: {e}") });
                continue;
            }
        };
        let text = record.get(smiles_col).unwrap_or("").trim();
        let label = match label_col.map(|c| parse_label(record.get(c).unwrap_or(""), opts.task)).transpose() {
            Ok(l) => l,
            Err(reason) => {
                skipped.push(SkipRecord { row, reason });
                continue;
            }
        };
        let parsed = match smiles::parse(text) {
            Ok(p) => p,
            Err(e) => {
                skipped.push(SkipRecord { row, reason: e.to_string() });
                continue;
            }
        };
        let graph = match opts.frozen_vocab {
            Some(v) => match parsed.into_graph_frozen(row, v) {
                Ok(g) => g,
                Err(reason) => {
                    skipped.push(SkipRecord { row, reason });
                    continue;
                }
            },
            None => parsed.into_graph(row, &mut vocab),
        };
        graphs.push(graph);
        if let Some(y) = label {
            labels.insert(row, y);
        }
    }
    let name = path.file_stem().map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned());
    Ok(CsvLoad {
        dataset: Dataset::new(name, opts.task, vocab, graphs, labels)?,
        skipped,
        rows,
    })
}

fn parse_label(text: &str, task: Task) -> Result<f64, String> {
    let y: f64 = text
        .trim()
        .parse()
        .map_err(|_| format!("label {text:?} is not a number"))?;
    if !y.is_finite() {
        return Err(format!("label {text:?} is not finite"));
    }
    match task {
        Task::Regression => Ok(y),
        Task::BinaryClassification if y == 0.0 || y == 1.0 => Ok(y),
        Task::BinaryClassification if y == -1.0 => Ok(0.0),
        Task::BinaryClassification => Err(format!("label {text:?} is not a class label")),
    }
}
