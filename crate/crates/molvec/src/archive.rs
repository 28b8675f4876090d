//! Model archives: versioned UTF-8 text, one `key[len] = values` entry per
//! line, floats in shortest round-trip form.
//!
//! ```text
//! molvec-archive 1
//! kind = semi
//! levels = 3
//! embed.atom_embed[700] = 0.0123 -0.045 ...
//! end = 27
//! ```

use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use molvec_core::dataset::Task;
use molvec_core::molgraph::AtomVocab;
use molvec_core::nmp::EmbedParams;
use molvec_core::pvns::MoleculeVectorTable;
use molvec_core::readout::ReadoutParams;

use crate::error::{CliError, Result};

pub const MAGIC: &str = "molvec-archive";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Unsupervised,
    SemiSupervised,
}

impl ModelKind {
    fn name(self) -> &'static str {
        match self {
            ModelKind::Unsupervised => "unsup",
            ModelKind::SemiSupervised => "semi",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelArchive {
    pub kind: ModelKind,
    pub dataset: String,
    pub seed: u64,
    pub levels: usize,
    pub vocab: AtomVocab,
    pub embed: EmbedParams,
    pub vectors: MoleculeVectorTable,
    /// Present for semi-supervised models.
    pub readout: Option<ReadoutParams>,
    /// Graph ids held out from training.
    pub test_ids: Vec<usize>,
    /// Resolved training configuration, for the record.
    pub config: BTreeMap<String, String>,
}

#[derive(Default)]
struct Writer {
    out: String,
    entries: usize,
}

impl Writer {
    fn scalar(&mut self, key: &str, value: impl Display) {
        let _ = writeln!(self.out, "{key} = {value}");
        self.entries += 1;
    }

    fn array<T: Display>(&mut self, key: &str, values: &[T]) {
        let _ = write!(self.out, "{key}[{}] =", values.len());
        for v in values {
            let _ = write!(self.out, " {v}");
        }
        self.out.push('\n');
        self.entries += 1;
    }

    fn floats(&mut self, key: &str, values: &[f64]) {
        let _ = write!(self.out, "{key}[{}] =", values.len());
        for v in values {
            let _ = write!(self.out, " {v:?}");
        }
        self.out.push('\n');
        self.entries += 1;
    }
}

impl ModelArchive {
    pub fn to_text(&self) -> String {
        let mut w = Writer::default();
        let _ = writeln!(w.out, "{MAGIC} {VERSION}");
        w.scalar("kind", self.kind.name());
        w.scalar("dataset", &self.dataset);
        w.scalar("seed", self.seed);
        w.scalar("levels", self.levels);
        w.scalar("d", self.embed.d);
        w.array("vocab", self.vocab.symbols());
        for (k, v) in &self.config {
            w.scalar(&format!("config.{k}"), v);
        }
        w.array("test_ids", &self.test_ids);
        for (name, values) in self.embed.groups() {
            w.floats(&format!("embed.{name}"), values);
        }
        w.array("vectors.ids", &self.vectors.ids);
        w.floats("vectors.u", &self.vectors.u);
        if let Some(r) = &self.readout {
            w.scalar("readout.task", r.task.name());
            w.scalar("readout.d_fp", r.d_fp);
            w.scalar("readout.n_hidden", r.n_hidden);
            for (name, values) in r.groups() {
                w.floats(&format!("readout.{name}"), values);
            }
        }
        let n = w.entries;
        w.scalar("end", n);
        w.out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let entries = Entries::parse(text)?;
        let kind = match entries.str("kind")? {
            "unsup" => ModelKind::Unsupervised,
            "semi" => ModelKind::SemiSupervised,
            other => return Err(corrupt(format!("unknown model kind {other:?}"))),
        };
        let d: usize = entries.value("d")?;
        let vocab = AtomVocab::from_symbols(entries.strings("vocab")?).map_err(|e| corrupt(e.to_string()))?;
        let mut embed = EmbedParams::zeros(d, vocab.len());
        for (name, slot) in embed.groups_mut() {
            let key = format!("embed.{name}");
            let values = entries.floats(&key, slot.len())?;
            slot.copy_from_slice(&values);
        }
        let ids: Vec<usize> = entries.array("vectors.ids", None)?;
        let u = entries.floats("vectors.u", ids.len() * d)?;
        let vectors = MoleculeVectorTable { d, ids, u };
        let readout = if kind == ModelKind::SemiSupervised {
            let task = Task::from_name(entries.str("readout.task")?)
                .ok_or_else(|| corrupt("unknown readout task".into()))?;
            let d_fp: usize = entries.value("readout.d_fp")?;
            let n_hidden: usize = entries.value("readout.n_hidden")?;
            let mut r = ReadoutParams::init(0, d, d_fp, n_hidden, task).map_err(|e| corrupt(e.to_string()))?;
            for (name, slot) in r.groups_mut() {
                let values = entries.floats(&format!("readout.{name}"), slot.len())?;
                slot.copy_from_slice(&values);
            }
            Some(r)
        } else {
            None
        };
        let config = entries
            .map
            .iter()
            .filter_map(|(k, e)| k.strip_prefix("config.").map(|k| (k.to_string(), e.raw.trim().to_string())))
            .collect();
        Ok(Self {
            kind,
            test_ids: entries.array("test_ids", None)?,
            config,
            dataset: entries.str("dataset")?.to_string(),
            seed: entries.value("seed")?,
            levels: entries.value("levels")?,
            vocab,
            embed,
            vectors,
            readout,
        })
    }
}

fn corrupt(msg: String) -> CliError {
    CliError::CorruptArchive(msg)
}

struct Entry<'a> {
    len: Option<usize>,
    raw: &'a str,
}

struct Entries<'a> {
    map: BTreeMap<&'a str, Entry<'a>>,
}

impl<'a> Entries<'a> {
    fn parse(text: &'a str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        let found = header
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| corrupt("missing archive header".into()))?;
        if found != VERSION.to_string() {
            return Err(CliError::Version {
                found: found.to_string(),
                supported: VERSION,
            });
        }
        let mut map = BTreeMap::new();
        let mut end = None;
        for (i, line) in lines.enumerate() {
            if end.is_some() {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(corrupt(format!("line {}: content after end marker", i + 2)));
            }
            let (lhs, rhs) = line
                .split_once(" =")
                .ok_or_else(|| corrupt(format!("line {}: expected `key = value`", i + 2)))?;
            let raw = rhs.strip_prefix(' ').unwrap_or(rhs);
            let (key, len) = match lhs.split_once('[') {
                Some((k, rest)) => {
                    let n = rest
                        .strip_suffix(']')
                        .and_then(|n| n.parse().ok())
                        .ok_or_else(|| corrupt(format!("line {}: bad array length", i + 2)))?;
                    (k, Some(n))
                }
                None => (lhs, None),
            };
            if key == "end" {
                end = Some(raw.trim().parse::<usize>().map_err(|_| corrupt("bad end marker".into()))?);
                continue;
            }
            if map.insert(key, Entry { len, raw }).is_some() {
                return Err(corrupt(format!("duplicate key {key}")));
            }
        }
        match end {
            None => Err(corrupt("truncated: no end marker".into())),
            Some(n) if n != map.len() => Err(corrupt(format!("end marker counts {n} entries, found {}", map.len()))),
            Some(_) => Ok(Self { map }),
        }
    }

    fn entry(&self, key: &str) -> Result<&Entry<'a>> {
        self.map.get(key).ok_or_else(|| corrupt(format!("missing key {key}")))
    }

    fn str(&self, key: &str) -> Result<&'a str> {
        let e = self.entry(key)?;
        if e.len.is_some() {
            return Err(corrupt(format!("{key} should be a scalar")));
        }
        Ok(e.raw.trim())
    }

    fn value<T: FromStr>(&self, key: &str) -> Result<T> {
        self.str(key)?
            .parse()
            .map_err(|_| corrupt(format!("{key}: cannot parse value")))
    }

    fn strings(&self, key: &str) -> Result<Vec<&'a str>> {
        let e = self.entry(key)?;
        let len = e.len.ok_or_else(|| corrupt(format!("{key} should be an array")))?;
        let items: Vec<&str> = e.raw.split_whitespace().collect();
        if items.len() != len {
            return Err(corrupt(format!("{key}: declared {len} items, found {}", items.len())));
        }
        Ok(items)
    }

    fn array<T: FromStr>(&self, key: &str, expected: Option<usize>) -> Result<Vec<T>> {
        let items = self.strings(key)?;
        if let Some(n) = expected {
            if items.len() != n {
                return Err(corrupt(format!("{key}: expected {n} items, found {}", items.len())));
            }
        }
        items
            .into_iter()
            .map(|s| s.parse().map_err(|_| corrupt(format!("{key}: cannot parse {s:?}"))))
            .collect()
    }

    fn floats(&self, key: &str, expected: usize) -> Result<Vec<f64>> {
        let v: Vec<f64> = self.array(key, Some(expected))?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(corrupt(format!("{key}: non-finite value")));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(kind: ModelKind) -> ModelArchive {
        let vocab = AtomVocab::from_symbols(["C", "c", "Cl"]).unwrap();
        let embed = EmbedParams::init(3, 4, vocab.len()).unwrap();
        let vectors = MoleculeVectorTable::init(3, 4, vec![0, 2, 5]);
        let readout = (kind == ModelKind::SemiSupervised)
            .then(|| ReadoutParams::init(3, 4, 5, 6, Task::Regression).unwrap());
        ModelArchive {
            kind,
            dataset: "toy".into(),
            seed: 3,
            levels: 2,
            vocab,
            embed,
            vectors,
            readout,
            test_ids: vec![1],
            config: [("d".to_string(), "4".to_string())].into_iter().collect(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        for kind in [ModelKind::Unsupervised, ModelKind::SemiSupervised] {
            let a = sample(kind);
            let text = a.to_text();
            assert!(text.starts_with("molvec-archive 1\n"));
            let b = ModelArchive::from_text(&text).unwrap();
            assert_eq!(a, b);
            assert_eq!(text, b.to_text());
        }
    }

    #[test]
    fn unknown_version_is_rejected() {
        let text = sample(ModelKind::Unsupervised).to_text().replacen("archive 1", "archive 7", 1);
        assert!(matches!(ModelArchive::from_text(&text), Err(CliError::Version { .. })));
    }

    #[test]
    fn truncation_and_length_mismatch_are_corrupt() {
        let text = sample(ModelKind::SemiSupervised).to_text();
        let cut: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(matches!(ModelArchive::from_text(&cut), Err(CliError::CorruptArchive(_))));
        let bad = text.replacen("vectors.ids[3]", "vectors.ids[4]", 1);
        assert!(matches!(ModelArchive::from_text(&bad), Err(CliError::CorruptArchive(_))));
        assert!(matches!(ModelArchive::from_text("hello"), Err(CliError::CorruptArchive(_))));
    }
}
