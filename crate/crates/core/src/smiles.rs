//! A SMILES reader for the subset needed by common property datasets.
//!
//! Supported: the organic subset `B C N O P S F Cl Br I`, aromatic
//! `b c n o p s`, explicit bonds `- = # :`, ring closures (`1`..`9`, `%nn`),
//! branches, and bracket atoms (only the element symbol is kept; isotope,
//! hydrogen count, charge and atom class are skipped). Hydrogens are never
//! materialized. Stereo markers, `.`, wildcards and charges outside brackets
//! are rejected as unsupported.
//!
//! An unmarked bond between two aromatic atoms is aromatic, otherwise single.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::molgraph::{AtomVocab, Bond, BondType, MoleculeGraph};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SmilesError {
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unsupported token {token:?} at position {pos}")]
    Unsupported { pos: usize, token: String },
}

impl SmilesError {
    pub fn position(&self) -> usize {
        match self {
            SmilesError::Parse { pos, .. } | SmilesError::Unsupported { pos, .. } => *pos,
        }
    }

    fn parse(pos: usize, msg: impl Into<String>) -> Self {
        SmilesError::Parse {
            pos,
            msg: msg.into(),
        }
    }

    fn unsupported(pos: usize, token: impl Into<String>) -> Self {
        SmilesError::Unsupported {
            pos,
            token: token.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmilesAtom {
    /// Element symbol with canonical capitalization, e.g. `"C"`, `"Cl"`.
    pub element: String,
    pub aromatic: bool,
}

impl SmilesAtom {
    /// Vocabulary label: the element symbol, lowercased when aromatic.
    pub fn label(&self) -> String {
        if self.aromatic {
            self.element.to_ascii_lowercase()
        } else {
            self.element.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedSmiles {
    pub atoms: Vec<SmilesAtom>,
    pub bonds: Vec<Bond>,
}

impl ParsedSmiles {
    pub fn into_graph(self, id: usize, vocab: &mut AtomVocab) -> MoleculeGraph {
        let atoms = self
            .atoms
            .iter()
            .map(|a| vocab.get_or_insert(&a.label()))
            .collect();
        MoleculeGraph::new(id, atoms, self.bonds).expect("parser only emits valid bonds")
    }

    /// Like [`ParsedSmiles::into_graph`] but refuses labels missing from `vocab`.
    pub fn into_graph_frozen(self, id: usize, vocab: &AtomVocab) -> Result<MoleculeGraph, String> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let label = a.label();
            match vocab.lookup(&label) {
                Some(i) => atoms.push(i),
                None => return Err(alloc::format!("atom type {label:?} not in vocabulary")),
            }
        }
        Ok(MoleculeGraph::new(id, atoms, self.bonds).expect("parser only emits valid bonds"))
    }
}

/// Parses `text` and interns atom labels into `vocab`.
pub fn parse_smiles(text: &str, id: usize, vocab: &mut AtomVocab) -> Result<MoleculeGraph, SmilesError> {
    Ok(parse(text)?.into_graph(id, vocab))
}

struct RingOpen {
    atom: usize,
    bond: Option<BondType>,
    pos: usize,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    out: ParsedSmiles,
    prev: Option<usize>,
    pending: Option<(BondType, usize)>,
    branches: Vec<(Option<usize>, usize)>,
    rings: BTreeMap<u32, RingOpen>,
}

pub fn parse(text: &str) -> Result<ParsedSmiles, SmilesError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        out: ParsedSmiles::default(),
        prev: None,
        pending: None,
        branches: Vec::new(),
        rings: BTreeMap::new(),
    };
    p.run()?;
    Ok(p.out)
}

fn is_bonded(bonds: &[Bond], a: usize, b: usize) -> bool {
    bonds
        .iter()
        .any(|x| (x.u == a && x.v == b) || (x.u == b && x.v == a))
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn token_at(&self, pos: usize) -> String {
        // char boundary safe: report the whole (possibly multi-byte) character
        let rest = core::str::from_utf8(&self.src[pos..]).unwrap_or("");
        rest.chars().next().map(|c| c.to_string()).unwrap_or_default()
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        if self.src.is_empty() {
            return Err(SmilesError::parse(0, "empty SMILES"));
        }
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' => {
                    self.pos += 1;
                    let element = match (c, self.peek()) {
                        (b'B', Some(b'r')) => {
                            self.pos += 1;
                            "Br"
                        }
                        (b'C', Some(b'l')) => {
                            self.pos += 1;
                            "Cl"
                        }
                        _ => core::str::from_utf8(&self.src[start..start + 1]).unwrap(),
                    };
                    self.add_atom(element.to_string(), false, start)?;
                }
                b'b' | b'c' | b'n' | b'o' | b'p' | b's' => {
                    self.pos += 1;
                    self.add_atom((c.to_ascii_uppercase() as char).to_string(), true, start)?;
                }
                b'[' => {
                    let (element, aromatic) = self.bracket_atom()?;
                    self.add_atom(element, aromatic, start)?;
                }
                b'-' | b'=' | b'#' | b':' => {
                    self.pos += 1;
                    if self.pending.is_some() {
                        return Err(SmilesError::parse(start, "two consecutive bond symbols"));
                    }
                    if self.prev.is_none() {
                        return Err(SmilesError::parse(start, "bond symbol without a preceding atom"));
                    }
                    let kind = match c {
                        b'-' => BondType::Single,
                        b'=' => BondType::Double,
                        b'#' => BondType::Triple,
                        _ => BondType::Aromatic,
                    };
                    self.pending = Some((kind, start));
                }
                b'(' => {
                    self.pos += 1;
                    if self.prev.is_none() {
                        return Err(SmilesError::parse(start, "branch without a preceding atom"));
                    }
                    if let Some((_, at)) = self.pending {
                        return Err(SmilesError::parse(at, "bond symbol before '('"));
                    }
                    self.branches.push((self.prev, start));
                }
                b')' => {
                    self.pos += 1;
                    if let Some((_, at)) = self.pending {
                        return Err(SmilesError::parse(at, "dangling bond symbol"));
                    }
                    match self.branches.pop() {
                        Some((atom, _)) => self.prev = atom,
                        None => return Err(SmilesError::parse(start, "unbalanced ')'")),
                    }
                }
                b'0'..=b'9' => {
                    self.pos += 1;
                    self.ring_closure(u32::from(c - b'0'), start)?;
                }
                b'%' => {
                    self.pos += 1;
                    let digits = self.src.get(self.pos..self.pos + 2);
                    match digits {
                        Some(&[a, b]) if a.is_ascii_digit() && b.is_ascii_digit() => {
                            self.pos += 2;
                            let n = u32::from(a - b'0') * 10 + u32::from(b - b'0');
                            self.ring_closure(n, start)?;
                        }
                        _ => return Err(SmilesError::parse(start, "'%' must be followed by two digits")),
                    }
                }
                b'/' | b'\\' | b'@' | b'.' | b'*' | b'+' | b'$' => {
                    return Err(SmilesError::unsupported(start, self.token_at(start)));
                }
                _ => return Err(SmilesError::unsupported(start, self.token_at(start))),
            }
        }
        let end = self.src.len();
        if let Some((_, at)) = self.pending {
            return Err(SmilesError::parse(at, "dangling bond symbol at end of input"));
        }
        if !self.branches.is_empty() {
            return Err(SmilesError::parse(end, "unbalanced '(': branch not closed"));
        }
        if let Some((n, open)) = self.rings.iter().next() {
            return Err(SmilesError::parse(open.pos, alloc::format!("ring closure {n} never closed")));
        }
        Ok(())
    }

    fn add_atom(&mut self, element: String, aromatic: bool, pos: usize) -> Result<(), SmilesError> {
        let idx = self.out.atoms.len();
        self.out.atoms.push(SmilesAtom { element, aromatic });
        if let Some(prev) = self.prev {
            let kind = match self.pending.take() {
                Some((k, _)) => k,
                None => self.implicit_bond(prev, idx),
            };
            self.out.bonds.push(Bond::new(prev, idx, kind));
        } else if let Some((_, at)) = self.pending {
            return Err(SmilesError::parse(at.min(pos), "bond symbol without a preceding atom"));
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn implicit_bond(&self, a: usize, b: usize) -> BondType {
        if self.out.atoms[a].aromatic && self.out.atoms[b].aromatic {
            BondType::Aromatic
        } else {
            BondType::Single
        }
    }

    fn ring_closure(&mut self, n: u32, pos: usize) -> Result<(), SmilesError> {
        let Some(atom) = self.prev else {
            return Err(SmilesError::parse(pos, "ring closure without a preceding atom"));
        };
        let bond = self.pending.take().map(|(k, _)| k);
        match self.rings.remove(&n) {
            None => {
                self.rings.insert(n, RingOpen { atom, bond, pos });
            }
            Some(open) => {
                if open.atom == atom {
                    return Err(SmilesError::parse(pos, "ring closure bonds an atom to itself"));
                }
                if is_bonded(&self.out.bonds, open.atom, atom) {
                    return Err(SmilesError::parse(pos, "ring closure duplicates an existing bond"));
                }
                let kind = match (open.bond, bond) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(SmilesError::parse(pos, "conflicting ring-closure bond symbols"));
                    }
                    (Some(k), _) | (None, Some(k)) => k,
                    (None, None) => self.implicit_bond(open.atom, atom),
                };
                self.out.bonds.push(Bond::new(open.atom, atom, kind));
            }
        }
        Ok(())
    }

    /// `[` isotope? symbol (H count | charge | class)* `]`
    fn bracket_atom(&mut self) -> Result<(String, bool), SmilesError> {
        let open = self.pos;
        self.pos += 1;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        let sym_start = self.pos;
        let (element, aromatic) = match self.peek() {
            Some(c) if c.is_ascii_uppercase() => {
                self.pos += 1;
                if matches!(self.peek(), Some(l) if l.is_ascii_lowercase()) {
                    self.pos += 1;
                }
                let s = core::str::from_utf8(&self.src[sym_start..self.pos]).unwrap();
                (s.to_string(), false)
            }
            Some(c) if c.is_ascii_lowercase() => {
                let two = self.src.get(self.pos..self.pos + 2);
                let len = match two {
                    Some(b"se") | Some(b"as") | Some(b"te") => 2,
                    _ if matches!(c, b'b' | b'c' | b'n' | b'o' | b'p' | b's') => 1,
                    _ => return Err(SmilesError::unsupported(self.pos, self.token_at(self.pos))),
                };
                self.pos += len;
                let s = core::str::from_utf8(&self.src[sym_start..self.pos]).unwrap();
                let mut e = s.to_string();
                e[..1].make_ascii_uppercase();
                (e, true)
            }
            Some(b'*') => return Err(SmilesError::unsupported(self.pos, "*")),
            Some(_) => return Err(SmilesError::parse(self.pos, "expected an element symbol in bracket atom")),
            None => return Err(SmilesError::parse(self.pos, "unterminated bracket atom")),
        };
        if element == "H" {
            return Err(SmilesError::unsupported(open, "[H]"));
        }
        loop {
            match self.peek() {
                Some(b']') => {
                    self.pos += 1;
                    return Ok((element, aromatic));
                }
                Some(b'@') => return Err(SmilesError::unsupported(self.pos, "@")),
                Some(b'H' | b'+' | b'-' | b':' | b'0'..=b'9') => self.pos += 1,
                Some(_) => return Err(SmilesError::unsupported(self.pos, self.token_at(self.pos))),
                None => return Err(SmilesError::parse(self.src.len(), "unterminated bracket atom")),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(s: &str) -> (usize, usize) {
        let p = parse(s).unwrap();
        (p.atoms.len(), p.bonds.len())
    }

    #[test]
    fn single_atom() {
        assert_eq!(counts("C"), (1, 0));
    }

    #[test]
    fn double_bond() {
        let p = parse("C=O").unwrap();
        assert_eq!(p.bonds, alloc::vec![Bond::new(0, 1, BondType::Double)]);
    }

    #[test]
    fn aromatic_ring() {
        let mut vocab = AtomVocab::new();
        let g = parse_smiles("c1ccccc1", 0, &mut vocab).unwrap();
        assert_eq!(g.num_atoms(), 6);
        assert_eq!(g.num_bonds(), 6);
        assert!(g.bonds().iter().all(|b| b.kind == BondType::Aromatic));
        assert!(g.adjacency().iter().all(|n| n.len() == 2));
        assert_eq!(vocab.symbols(), &["c".to_string()]);
    }

    #[test]
    fn hand_checked_molecules() {
        // ethanol, acetic acid
        assert_eq!(counts("CCO"), (3, 2));
        let p = parse("CC(=O)O").unwrap();
        assert_eq!((p.atoms.len(), p.bonds.len()), (4, 3));
        assert_eq!(p.bonds[1], Bond::new(1, 2, BondType::Double));
        assert_eq!(p.bonds[2], Bond::new(1, 3, BondType::Single));
    }

    #[test]
    fn unclosed_branch_reports_end_position() {
        assert_eq!(
            parse("C("),
            Err(SmilesError::Parse {
                pos: 2,
                msg: "unbalanced '(': branch not closed".into()
            })
        );
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse("C1CC"), Err(SmilesError::Parse { pos: 1, .. })));
        assert!(matches!(parse("C)"), Err(SmilesError::Parse { pos: 1, .. })));
        assert!(matches!(parse(""), Err(SmilesError::Parse { .. })));
        assert!(matches!(parse("C=="), Err(SmilesError::Parse { .. })));
        assert!(matches!(parse("C="), Err(SmilesError::Parse { .. })));
        assert!(matches!(parse("C11"), Err(SmilesError::Parse { .. })));
    }

    #[test]
    fn unsupported_tokens_are_positioned() {
        assert_eq!(
            parse("F/C=C/F"),
            Err(SmilesError::Unsupported {
                pos: 1,
                token: "/".into()
            })
        );
        assert!(matches!(parse("N[C@@H](C)C"), Err(SmilesError::Unsupported { pos: 3, .. })));
        assert!(matches!(parse("CC.O"), Err(SmilesError::Unsupported { pos: 2, .. })));
        assert!(matches!(parse("C+"), Err(SmilesError::Unsupported { .. })));
        assert!(matches!(parse("Cé"), Err(SmilesError::Unsupported { pos: 1, .. })));
    }

    #[test]
    fn bracket_atoms_keep_only_the_element() {
        let p = parse("c1cc[nH]c1").unwrap();
        assert_eq!(p.atoms[3].label(), "n");
        assert!(p.bonds.iter().all(|b| b.kind == BondType::Aromatic));
        let p = parse("[13CH3][N+](=O)[O-]").unwrap();
        let labels: Vec<String> = p.atoms.iter().map(SmilesAtom::label).collect();
        assert_eq!(labels, ["C", "N", "O", "O"]);
        assert!(matches!(parse("[H]C"), Err(SmilesError::Unsupported { .. })));
    }

    #[test]
    fn two_letter_halogens_and_percent_rings() {
        let p = parse("ClC%12CCCBr.").unwrap_err();
        assert!(matches!(p, SmilesError::Unsupported { pos: 11, .. }));
        let p = parse("ClC%12CC%12Br").unwrap();
        let labels: Vec<String> = p.atoms.iter().map(SmilesAtom::label).collect();
        assert_eq!(labels, ["Cl", "C", "C", "C", "Br"]);
        assert_eq!(p.bonds.len(), 5);
    }

    #[test]
    fn ring_bond_symbol_may_sit_on_either_end() {
        let p = parse("C=1CCCC1").unwrap();
        assert_eq!(p.bonds.last().unwrap().kind, BondType::Double);
        let p = parse("C1CCCC=1").unwrap();
        assert_eq!(p.bonds.last().unwrap().kind, BondType::Double);
        assert!(parse("C=1CCCC#1").is_err());
    }

    #[test]
    fn mixed_aromatic_aliphatic_bond_is_single() {
        let p = parse("Cc1ccccc1").unwrap();
        assert_eq!(p.bonds[0].kind, BondType::Single);
        assert_eq!(p.bonds.iter().filter(|b| b.kind == BondType::Aromatic).count(), 6);
    }
}
