//! Structural invariants over random graphs and permutations.

use std::collections::BTreeSet;

use molvec_core::eval::regression_metrics;
use molvec_core::molgraph::{Bond, BondType, MoleculeGraph, WlCodes};
use molvec_core::nmp::{forward_levels, EmbedParams};
use molvec_core::pvns::{self, ns_loss_and_grads, Anchor};
use molvec_core::readout::fingerprint;
use molvec_core::{dataset, rng};
use proptest::prelude::*;

const VOCAB: usize = 5;
const D: usize = 6;
const LEVELS: usize = 3;
const D_FP: usize = 7;

prop_compose! {
    fn graph(max_atoms: usize)(n in 1..=max_atoms)
        (atoms in prop::collection::vec(0..VOCAB, n),
         edges in prop::collection::vec((0..n, 0..n, 0..4u8), 0..=2 * n))
        -> MoleculeGraph
    {
        let mut seen = BTreeSet::new();
        let bonds: Vec<Bond> = edges
            .into_iter()
            .filter(|&(u, v, _)| u != v && seen.insert((u.min(v), u.max(v))))
            .map(|(u, v, k)| Bond::new(u, v, BondType::from_code(k).unwrap()))
            .collect();
        MoleculeGraph::new(0, atoms, bonds).unwrap()
    }
}

fn graph_and_perm(max_atoms: usize) -> impl Strategy<Value = (MoleculeGraph, Vec<usize>)> {
    graph(max_atoms).prop_flat_map(|g| {
        let n = g.num_atoms();
        (Just(g), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    })
}

fn params(seed: u64) -> (EmbedParams, Vec<f64>) {
    let p = EmbedParams::init(seed, D, VOCAB).unwrap();
    let mut r = rng::stream(seed, 77);
    let w = (0..D_FP * D)
        .map(|_| 2.0 * rand::Rng::random::<f64>(&mut r) - 1.0)
        .collect();
    (p, w)
}

fn sorted(mut v: Vec<u64>) -> Vec<u64> {
    v.sort_unstable();
    v
}

fn disjoint_union(a: &MoleculeGraph, b: &MoleculeGraph) -> MoleculeGraph {
    let off = a.num_atoms();
    let atoms = a.atoms().iter().chain(b.atoms()).copied().collect();
    let bonds = a
        .bonds()
        .iter()
        .copied()
        .chain(b.bonds().iter().map(|x| Bond::new(x.u + off, x.v + off, x.kind)))
        .collect();
    MoleculeGraph::new(0, atoms, bonds).unwrap()
}

fn distances(g: &MoleculeGraph, from: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.num_atoms()];
    let mut queue = std::collections::VecDeque::from([from]);
    dist[from] = 0;
    while let Some(v) = queue.pop_front() {
        for &(w, _) in g.neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn wl_multisets_survive_permutation((g, perm) in graph_and_perm(14)) {
        let p = g.permuted(&perm).unwrap();
        let a = WlCodes::compute(&g, LEVELS).unwrap();
        let b = WlCodes::compute(&p, LEVELS).unwrap();
        for l in 0..LEVELS {
            prop_assert_eq!(sorted(a.level(l).to_vec()), sorted(b.level(l).to_vec()));
            for v in 0..g.num_atoms() {
                prop_assert_eq!(a.get(l, v), b.get(l, perm[v]));
            }
        }
        prop_assert_eq!(
            molvec_core::molgraph::canonical_signature(&g),
            molvec_core::molgraph::canonical_signature(&p)
        );
    }

    #[test]
    fn forward_is_equivariant_and_bounded((g, perm) in graph_and_perm(14), seed in any::<u64>()) {
        let (params, _) = params(seed);
        let f = forward_levels(&g, &params, LEVELS).unwrap();
        let fp = forward_levels(&g.permuted(&perm).unwrap(), &params, LEVELS).unwrap();
        for l in 0..LEVELS {
            for v in 0..g.num_atoms() {
                for (x, y) in f.get(l, v).iter().zip(fp.get(l, perm[v])) {
                    prop_assert!((x - y).abs() <= 1e-9);
                }
                if l >= 1 {
                    prop_assert!(f.get(l, v).iter().all(|&x| x > 0.0 && x < 1.0));
                }
            }
        }
    }

    #[test]
    fn fingerprint_is_invariant_and_conserves_mass((g, perm) in graph_and_perm(14), seed in any::<u64>()) {
        let (params, w) = params(seed);
        let a = fingerprint(&forward_levels(&g, &params, LEVELS).unwrap(), &w, D_FP).unwrap();
        let b = fingerprint(&forward_levels(&g.permuted(&perm).unwrap(), &params, LEVELS).unwrap(), &w, D_FP).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
        let mass: f64 = a.iter().sum();
        prop_assert!((mass - (LEVELS * g.num_atoms()) as f64).abs() <= 1e-9);
    }

    #[test]
    fn fingerprint_adds_over_components(a in graph(8), b in graph(8), seed in any::<u64>()) {
        let (params, w) = params(seed);
        let fp = |g: &MoleculeGraph| fingerprint(&forward_levels(g, &params, LEVELS).unwrap(), &w, D_FP).unwrap();
        let (fa, fb, fu) = (fp(&a), fp(&b), fp(&disjoint_union(&a, &b)));
        for i in 0..D_FP {
            prop_assert!((fa[i] + fb[i] - fu[i]).abs() <= 1e-9);
        }
    }

    #[test]
    fn features_are_local(g in graph(14), target in any::<prop::sample::Index>(), seed in any::<u64>()) {
        let (params, _) = params(seed);
        let x = target.index(g.num_atoms());
        let mut atoms = g.atoms().to_vec();
        atoms[x] = (atoms[x] + 1) % VOCAB;
        let edited = MoleculeGraph::new(0, atoms, g.bonds().to_vec()).unwrap();
        let before = forward_levels(&g, &params, LEVELS).unwrap();
        let after = forward_levels(&edited, &params, LEVELS).unwrap();
        let dist = distances(&g, x);
        for v in 0..g.num_atoms() {
            for l in 0..LEVELS {
                if dist[v] > l {
                    prop_assert_eq!(before.get(l, v), after.get(l, v));
                }
            }
        }
        // the edited atom's own embedding always changes
        prop_assert_ne!(before.get(0, x), after.get(0, x));
    }

    #[test]
    fn negative_order_does_not_matter(
        u in prop::collection::vec(-1.0..1.0f64, 5),
        h in prop::collection::vec(0.0..1.0f64, 5),
        negs in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 5), 1..12),
        shuffle_seed in any::<u64>(),
    ) {
        let mut order: Vec<usize> = (0..negs.len()).collect();
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng::stream(shuffle_seed, 0));
        let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        let shuffled: Vec<&[f64]> = order.iter().map(|&i| refs[i]).collect();
        let a = ns_loss_and_grads(&u, &h, &refs, 0.5).unwrap();
        let b = ns_loss_and_grads(&u, &h, &shuffled, 0.5).unwrap();
        prop_assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        prop_assert_eq!(&a.grad_u, &b.grad_u);
        prop_assert_eq!(&a.grad_anchor, &b.grad_anchor);
        for (j, &i) in order.iter().enumerate() {
            prop_assert_eq!(&a.grad_negatives[i], &b.grad_negatives[j]);
        }
    }

    #[test]
    fn agreement_moves_the_objective_the_right_way(
        u in prop::collection::vec(0.1..1.0f64, 4),
        h in prop::collection::vec(0.0..1.0f64, 4),
        neg in prop::collection::vec(0.0..1.0f64, 4),
    ) {
        let bumped = |x: &[f64]| -> Vec<f64> { x.iter().zip(&u).map(|(a, b)| a + 1e-3 * b).collect() };
        let base = ns_loss_and_grads(&u, &h, &[&neg], 0.5).unwrap().objective;
        let pos = ns_loss_and_grads(&u, &bumped(&h), &[&neg], 0.5).unwrap().objective;
        let negd = ns_loss_and_grads(&u, &h, &[&bumped(&neg)], 0.5).unwrap().objective;
        prop_assert!(pos > base);
        prop_assert!(negd < base);
    }

    #[test]
    fn rmse_bounds_mae(pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..40)) {
        let (p, o): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (rmse, mae) = regression_metrics(&p, &o).unwrap();
        prop_assert!(rmse >= mae - 1e-12);
    }

    #[test]
    fn splits_partition(n in 2usize..300, frac in 0.01..0.99f64, seed in any::<u64>()) {
        if let Ok((train, test)) = dataset::split_indices(n, frac, seed) {
            prop_assert_eq!(test.len(), dataset::floor_count(frac, n));
            let all: BTreeSet<usize> = train.iter().chain(&test).copied().collect();
            prop_assert_eq!(all.len(), n);
            prop_assert_eq!(train.len() + test.len(), n);
        }
    }
}

#[test]
fn rmse_equals_mae_for_equal_errors() {
    let (rmse, mae) = regression_metrics(&[1.0, 3.0, -2.0], &[2.0, 2.0, -1.0]).unwrap();
    assert_eq!(rmse, mae);
}

#[test]
fn sampled_negatives_never_match_the_anchor_code() {
    let corpus = molvec_core::gradcheck::random_graphs(3, 30, 9, 3).unwrap();
    let wl = pvns::corpus_wl_codes(&corpus, LEVELS).unwrap();
    let all: Vec<usize> = (0..corpus.len()).collect();
    let draw = |seed| {
        let mut r = rng::stream(seed, 0);
        let mut out = Vec::new();
        let mut i = 0usize;
        while out.len() < 10_000 {
            let mol = i % corpus.len();
            let anchor = Anchor {
                mol,
                level: (i / corpus.len()) % LEVELS,
                atom: i % corpus[mol].num_atoms(),
            };
            if let Some((m, v)) = pvns::sample_negative(anchor, &all, &corpus, &wl, 50, &mut r) {
                assert_ne!(wl[m].get(anchor.level, v), wl[mol].get(anchor.level, anchor.atom));
                out.push((m, v));
            }
            i += 1;
        }
        out
    };
    assert_eq!(draw(5), draw(5));
    assert_ne!(draw(5), draw(6));
}
