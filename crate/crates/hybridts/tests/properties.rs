mod common;

use hybridts::decomposition::{decompose, leaves_bound_check, LeavesBound, Measure, SubtreeProfile};
use hybridts::formula::{
    parse_dimacs, restrict, s_implied, serialize_dimacs, CnfFormula, FormulaError, Implication, Literal,
    PartialAssignment, Verdict,
};
use hybridts::latticesat::{equisat_check, lattice_to_cnf, reduce_3sat_to_lattice, validate_lattice};
use hybridts::qcircuit::{run_classical, Circuit, Gate};
use hybridts::qwalk::{build_walk_operator, qpe_zero_probability_spectral, SparseWalk, WalkTree};
use hybridts::sia::{random_banded_kcnf, sia_reference, siar_execute, SiaInstance};
use hybridts::treesearch::{
    build_tree, dnc_ppsz_solve, dpll_solve, tree_stats, truncated_size_bound, EngineConfig,
    DEFAULT_NODE_LIMIT,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn formula(max_vars: usize, max_clauses: usize, max_width: usize) -> impl Strategy<Value = CnfFormula> {
    (1..=max_vars).prop_flat_map(move |n| {
        let lit = (1..=n, any::<bool>()).prop_map(|(v, p)| Literal::new(v, p));
        let clause = prop::collection::vec(lit, 1..=max_width.min(n));
        prop::collection::vec(clause, 0..=max_clauses).prop_map(move |cs| CnfFormula::new(n, cs).unwrap())
    })
}

fn partial(n: usize) -> impl Strategy<Value = PartialAssignment> {
    prop::collection::vec(prop::option::of(any::<bool>()), n).prop_map(PartialAssignment::from_values)
}

fn formula_and_partial() -> impl Strategy<Value = (CnfFormula, PartialAssignment)> {
    formula(7, 12, 3).prop_flat_map(|f| {
        let n = f.num_vars();
        (Just(f), partial(n))
    })
}

fn consistent(a: &PartialAssignment, x: u64) -> bool {
    (1..=a.len()).all(|v| a.get(v).is_none_or(|b| b == ((x >> (v - 1)) & 1 == 1)))
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((1..=n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dimacs_round_trips(f in formula(9, 14, 4)) {
        prop_assert_eq!(parse_dimacs(&serialize_dimacs(&f)).unwrap(), f);
    }

    #[test]
    fn restriction_preserves_consistent_models((f, a) in formula_and_partial()) {
        let n = f.num_vars();
        match restrict(&f, &a) {
            Ok(r) => {
                for x in (0..1u64 << n).filter(|&x| consistent(&a, x)) {
                    prop_assert_eq!(r.eval_bits(x), f.eval_bits(x));
                }
            }
            Err(FormulaError::Contradicted) => {
                prop_assert!((0..1u64 << n).filter(|&x| consistent(&a, x)).all(|x| !f.eval_bits(x)));
            }
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn predicate_is_sound((f, a) in formula_and_partial()) {
        let n = f.num_vars();
        let completions = (0..1u64 << n).filter(|&x| consistent(&a, x));
        match f.predicate(&a) {
            Verdict::Satisfied => prop_assert!(completions.clone().all(|x| f.eval_bits(x))),
            Verdict::Contradiction => prop_assert!(completions.clone().all(|x| !f.eval_bits(x))),
            Verdict::Undetermined => {}
        }
    }

    #[test]
    fn s_implication_is_sound((f, a) in formula_and_partial(), s in 1usize..=3) {
        let n = f.num_vars();
        let Some(var) = a.first_unset() else { return Ok(()); };
        let Ok(imp) = s_implied(&f, &a, var, s) else { return Ok(()); };
        let models: Vec<u64> = (0..1u64 << n).filter(|&x| consistent(&a, x) && f.eval_bits(x)).collect();
        match imp {
            Implication::ForcedTrue => prop_assert!(models.iter().all(|x| (x >> (var - 1)) & 1 == 1)),
            Implication::ForcedFalse => prop_assert!(models.iter().all(|x| (x >> (var - 1)) & 1 == 0)),
            Implication::Conflict => prop_assert!(models.is_empty()),
            Implication::Free => {}
        }
    }

    #[test]
    fn engines_agree_with_brute_force(f in formula(9, 30, 3), seed in any::<u64>()) {
        let n = f.num_vars();
        let truth = !common::brute_force_models(&f).is_empty();
        prop_assert_eq!(dpll_solve(&f, &EngineConfig::dpll(n)).unwrap().outcome.is_sat(), truth);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let perm = hybridts::treesearch::random_permutation(n, &mut rng);
        prop_assert_eq!(dnc_ppsz_solve(&f, &EngineConfig::dnc_ppsz(perm, 2, n)).unwrap().outcome.is_sat(), truth);
    }

    #[test]
    fn truncated_trees_obey_size_and_leaf_bounds(
        (f, perm) in formula(8, 24, 3).prop_flat_map(|f| { let n = f.num_vars(); (Just(f), permutation(n)) }),
        g in 0usize..=8,
        s in 1usize..=3,
    ) {
        let n = f.num_vars();
        let cfg = EngineConfig::dnc_ppsz(perm, s, g.min(n));
        let tree = build_tree(&f, &cfg, DEFAULT_NODE_LIMIT).unwrap();
        let stats = tree.stats();
        prop_assert_eq!(stats, tree_stats(&f, &cfg).unwrap());
        prop_assert!(stats.size as u128 <= truncated_size_bound(n, g.min(n)));
        prop_assert!(stats.effective_size <= stats.size);
        prop_assert!(stats.max_branching <= g.min(n));
        prop_assert_eq!(leaves_bound_check(&tree), LeavesBound::Holds);
    }

    #[test]
    fn decomposition_reconstitutes_tree(f in formula(8, 24, 3), budget in 0usize..=9, branching in any::<bool>()) {
        let tree = build_tree(&f, &EngineConfig::dpll(f.num_vars()), DEFAULT_NODE_LIMIT).unwrap();
        let measure = if branching { Measure::BranchingNumber } else { Measure::Height };
        let d = decompose(&tree, measure, budget).unwrap();
        prop_assert_eq!(d.reconstituted_size(), tree.stats().size);
        let prof = SubtreeProfile::of(&tree);
        for c in &d.cutoffs {
            if let Some(r) = c.root {
                prop_assert!(prof.measure(r, measure) <= budget);
            }
        }
    }

    #[test]
    fn walk_operator_is_an_orthogonal_product(f in formula(5, 12, 3)) {
        let tree = build_tree(&f, &EngineConfig::dpll(f.num_vars()), DEFAULT_NODE_LIMIT).unwrap();
        let Ok(wt) = WalkTree::from_search_tree(&tree) else { return Ok(()); };
        let op = build_walk_operator(&wt).unwrap();
        prop_assert!(op.unitarity_residual() < 1e-9);
        prop_assert!(op.involution_residual() < 1e-9);
        for t in 1..=6 {
            let sparse = SparseWalk::new(&wt).qpe_zero_probability(t);
            prop_assert!((sparse - qpe_zero_probability_spectral(&op, t)).abs() < 1e-9);
        }
        let (invariant, overlap) = op.invariant_root_overlap();
        prop_assert_eq!(invariant && overlap > 1e-9, wt.has_marked());
    }

    #[test]
    fn classical_circuits_invert(ops in prop::collection::vec((0u8..5, 0usize..8, 0usize..8, 0usize..8, any::<bool>()), 0..40), x in 0u128..256) {
        let mut c = Circuit::new(8);
        for (kind, a, b, d, pol) in ops {
            match kind {
                0 => c.push(Gate::x(a)),
                1 if a != b => c.push(Gate::cnot(a, b)),
                2 if a != b && b != d && a != d => c.push(Gate::mcx(vec![(a, pol), (b, true)], d)),
                3 if a != b && b != d && a != d => c.push(Gate::inc(vec![(a, pol)], vec![b, d])),
                4 if a != b && b != d && a != d => c.push(Gate::dec(vec![(a, pol)], vec![b, d])),
                _ => {}
            }
        }
        c.validate().unwrap();
        prop_assert_eq!(run_classical(&c.inverse(), run_classical(&c, x)), x);
    }

    #[test]
    fn siar_matches_reference(seed in any::<u64>(), w in 1usize..=5, s in 1usize..=3, blocks in 1usize..=8, advice in prop::collection::vec(any::<bool>(), 0..24)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (blocks * w).max(1);
        let f = random_banded_kcnf(n, 2 * n, 3.min(n).min(w + 1), w, &mut rng);
        let inst = SiaInstance::new(&f, w, s).unwrap();
        let trace = siar_execute(&inst, &advice).unwrap();
        prop_assert_eq!(&trace.outcome, &sia_reference(&f, &advice, s));
        prop_assert!(trace.self_inverse && trace.intermediates_clear);
        prop_assert_eq!(trace.leaf_calls, 3usize.pow(inst.k as u32));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lattice_reduction_is_valid_and_equisatisfiable(f in formula(5, 10, 3)) {
        let (lat, _) = reduce_3sat_to_lattice(&f).unwrap();
        prop_assert!(validate_lattice(&lat).ok);
        let lf = lattice_to_cnf(&lat).unwrap();
        prop_assert!(hybridts::formula::index_width(&lf) <= lat.grid_side + 1);
        let eq = equisat_check(&f, &lat).unwrap();
        prop_assert!(eq.agree);
        prop_assert_eq!(eq.source_sat, !common::brute_force_models(&f).is_empty());
    }
}
