//! Checks that tie modules to each other rather than to their own references.

mod common;

use std::collections::BTreeSet;

use hybridts::formula::random_kcnf;
use hybridts::latticesat::{copy_chains_consistent, equisat_check, lattice_to_cnf, reduce_3sat_to_lattice};
use hybridts::qcircuit::{complexify, qpe_standard_state};
use hybridts::qwalk::{build_walk_operator, SparseWalk, WalkTree};
use hybridts::sia::{sia_reference, SiaKind, StopReason};
use hybridts::treesearch::{build_tree, EngineConfig, LeafReason, NodeKind, SearchTree, DEFAULT_NODE_LIMIT};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Guess bits on the path from the root to `v`, branch 0 meaning false.
fn guesses_to(tree: &SearchTree, v: usize) -> Vec<bool> {
    let mut bits = Vec::new();
    let mut cur = v;
    while let Some(p) = tree.nodes[cur].parent {
        if tree.nodes[p].kind == NodeKind::Branch {
            bits.push(tree.nodes[p].children[1] == cur);
        }
        cur = p;
    }
    bits.reverse();
    bits
}

#[test]
fn advice_strings_enumerate_the_satisfying_leaves() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..60 {
        let n = 3 + i % 6;
        let f = random_kcnf(n, (2 + i % 4) * n, 3, &mut rng);
        let s = 1 + i % 3;
        let identity: Vec<usize> = (1..=n).collect();
        let tree = build_tree(&f, &EngineConfig::dnc_ppsz(identity, s, n), DEFAULT_NODE_LIMIT).unwrap();
        let sat_leaves: BTreeSet<Vec<bool>> = (0..tree.len())
            .filter(|&v| tree.nodes[v].kind == NodeKind::Leaf(LeafReason::Satisfied))
            .map(|v| guesses_to(&tree, v))
            .collect();
        let br = tree.stats().max_branching;
        let mut from_advice = BTreeSet::new();
        for bits in 0..1u32 << br {
            let advice: Vec<bool> = (0..br).map(|j| (bits >> j) & 1 == 1).collect();
            let out = sia_reference(&f, &advice, s);
            if out.kind == (SiaKind::ZeroChildren { reason: StopReason::Satisfied }) {
                from_advice.insert(advice[..out.advice_consumed].to_vec());
            }
        }
        assert_eq!(from_advice, sat_leaves, "instance {i}");
    }
}

#[test]
fn walk_phase_estimation_matches_the_circuit() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut compared = 0;
    for i in 0..80 {
        let n = 2 + i % 5;
        let f = random_kcnf(n, (1 + i % 5) * n, 3.min(n), &mut rng);
        let tree = build_tree(&f, &EngineConfig::dpll(n), DEFAULT_NODE_LIMIT).unwrap();
        let Ok(wt) = WalkTree::from_search_tree(&tree) else { continue };
        if wt.len() > 64 {
            continue;
        }
        let op = build_walk_operator(&wt).unwrap();
        let dim = wt.len().next_power_of_two().max(2);
        let mut u = DMatrix::<f64>::identity(dim, dim);
        u.view_mut((0, 0), (wt.len(), wt.len())).copy_from(&op.product());
        let mut root = vec![Complex64::new(0.0, 0.0); dim];
        root[0] = Complex64::new(1.0, 0.0);
        for t in 1..=5u32 {
            let circuit = qpe_standard_state(&complexify(&u), &root, t as usize).unwrap();
            let sparse = SparseWalk::new(&wt).qpe_zero_probability(t);
            assert!((circuit - sparse).abs() < 1e-6, "instance {i}, t = {t}: {circuit} vs {sparse}");
        }
        compared += 1;
    }
    assert!(compared > 20);
}

#[test]
fn lattice_copy_chains_carry_one_value_and_mutations_break_them() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    for i in 0..40 {
        let n = 3 + i % 4;
        let f = random_kcnf(n, 2 * n, 3, &mut rng);
        let (lat, art) = reduce_3sat_to_lattice(&f).unwrap();
        let eq = equisat_check(&f, &lat).unwrap();
        let Some(model) = eq.lattice_model else { continue };
        assert!(copy_chains_consistent(&lat, &art, &model));
        let lf = lattice_to_cnf(&lat).unwrap();
        assert!(common::satisfies(&lf, &model));
        // Flipping one interior wire cell breaks both the chain and some equality constraint.
        let wire = art.wires.iter().find(|w| w.cells.len() >= 3).unwrap();
        let (r, c) = wire.cells[wire.cells.len() / 2];
        let mut mutated = model.clone();
        let v = lat.var_of(r, c) - 1;
        mutated[v] = !mutated[v];
        assert!(!copy_chains_consistent(&lat, &art, &mutated));
        assert!(!common::satisfies(&lf, &mutated));
        checked += 1;
    }
    assert!(checked > 10);
}
