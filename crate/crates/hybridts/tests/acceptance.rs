//! One PASS/FAIL line per acceptance criterion, written straight to stderr so the table shows
//! without `--nocapture`.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use hybridts::cli::{self, Command, ExperimentSpec};
use hybridts::decomposition::{
    hybrid_exponent_experiment, leaves_bound_check, sia_memory_ok, sia_region_feasible, sia_speedup_ok, LeavesBound,
};
use hybridts::formula::{index_width, random_kcnf, CnfFormula};
use hybridts::latticesat::{equisat_check, lattice_to_cnf, reduce_3sat_to_lattice};
use hybridts::qcircuit::{build_clause_oracle, grover_circuit_success, grover_search, oracle_phase_deviation, OracleKind};
use hybridts::qwalk::{build_walk_operator, detect_with_acceptance, trial_acceptance, DetectionParams, DetectionVerdict, WalkTree};
use hybridts::sia::{random_banded_kcnf, schedule_peak_live, sia_reference, siar_execute, siar_schedule, SiaInstance};
use hybridts::treesearch::{
    build_tree, dnc_ppsz_solve, dpll_solve, random_permutation, EngineConfig, Outcome, DEFAULT_NODE_LIMIT,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, v: &Verdict) {
    let line = format!("[{}] criterion {id:>2} {name}: {}\n", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    // The harness captures print macros only.
    std::io::stderr().write_all(line.as_bytes()).unwrap();
}

fn formula_mix(rng: &mut ChaCha8Rng, n: usize, i: usize) -> CnfFormula {
    let density = [2.0, 3.0, 4.26, 5.0, 6.5][i % 5];
    let m = ((density * n as f64).round() as usize).max(1);
    random_kcnf(n, m, 3.min(n), rng)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut disagreements = 0;
    let mut sat = 0;
    for i in 0..500 {
        let n = 3 + i % 12;
        let f = formula_mix(&mut rng, n, i);
        let truth = !common::brute_force_models(&f).is_empty();
        sat += usize::from(truth);
        let d = dpll_solve(&f, &EngineConfig::dpll(n)).unwrap().outcome;
        let perm = random_permutation(n, &mut rng);
        let p = dnc_ppsz_solve(&f, &EngineConfig::dnc_ppsz(perm, 2, n)).unwrap().outcome;
        let ok_model = |o: &Outcome| match o {
            Outcome::Sat(m) => common::satisfies(&f, m),
            _ => true,
        };
        if d.is_sat() != truth || p.is_sat() != truth || !ok_model(&d) || !ok_model(&p) {
            disagreements += 1;
        }
    }
    let elapsed = start.elapsed();
    Verdict {
        pass: disagreements == 0 && elapsed < Duration::from_secs(120),
        detail: format!("500 instances ({sat} sat), {disagreements} disagreements, {:.1}s", elapsed.as_secs_f64()),
    }
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut violations = 0;
    for i in 0..1000 {
        let n = 2 + i % 11;
        let f = formula_mix(&mut rng, n, i);
        let cfg = if i % 2 == 0 {
            EngineConfig::dpll(n)
        } else {
            let perm = random_permutation(n, &mut rng);
            let budget = rng.gen_range(0..=n);
            EngineConfig::dnc_ppsz(perm, 1 + i % 3, budget)
        };
        let tree = build_tree(&f, &cfg, DEFAULT_NODE_LIMIT).unwrap();
        if let LeavesBound::Violated { .. } = leaves_bound_check(&tree) {
            violations += 1;
        }
    }
    Verdict { pass: violations == 0, detail: format!("1000 trees, {violations} violations") }
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let params = DetectionParams::default();
    let delta = 0.1;
    let reps = 50;
    let (mut trees, mut root_marked, mut marked, mut worst_rate, mut eigen_failures, mut max_t) = (0, 0, 0, 0.0f64, 0, 0);
    // Unit/pure DPLL trees stay small on random formulas; the sparse rule-free tail pushes T
    // toward the 2^(n+1) ceiling.
    for i in 0..162 {
        let (cfg, f) = if i < 150 {
            let n = 2 + i % 9;
            (EngineConfig::dpll(n), formula_mix(&mut rng, n, i))
        } else {
            let n = 7 + i % 4;
            (EngineConfig::dpll_with(n, vec![]), random_kcnf(n, 1 + i % 3, 3, &mut rng))
        };
        let tree = build_tree(&f, &cfg, DEFAULT_NODE_LIMIT).unwrap();
        max_t = max_t.max(tree.len());
        assert!(tree.len() <= 2048);
        let Ok(wt) = WalkTree::from_search_tree(&tree) else {
            root_marked += 1;
            continue;
        };
        trees += 1;
        let truth = wt.has_marked();
        let p = trial_acceptance(&wt, &params);
        let wrong = (0..reps)
            .filter(|_| (detect_with_acceptance(p, delta, &params, &mut rng).verdict == DetectionVerdict::MarkedExists) != truth)
            .count();
        worst_rate = worst_rate.max(wrong as f64 / reps as f64);
        if truth {
            marked += 1;
            let (invariant, overlap) = build_walk_operator(&wt).unwrap().invariant_root_overlap();
            if !(invariant && overlap > 1e-9) {
                eigen_failures += 1;
            }
        }
    }
    Verdict {
        pass: worst_rate <= delta && eigen_failures == 0,
        detail: format!(
            "{trees} walk trees ({marked} marked, {root_marked} root-marked skipped, max T {max_t}), worst failure rate {worst_rate:.2}, {eigen_failures} eigen exceptions"
        ),
    }
}

fn criterion_4() -> Verdict {
    let mut worst = 0.0f64;
    let mut bad_ancillas = 0;
    for i in 0..100 {
        let mut rng = cli::instance_rng(404, i);
        let c = cli::qpe_random_comparison(&mut rng).unwrap();
        worst = worst.max((c.p0 - c.p0_counter).abs());
        let expected = 1 + (c.t as f64).log2().ceil() as usize;
        if c.circuit_ancillas != expected || c.ancillas != expected {
            bad_ancillas += 1;
        }
    }
    Verdict {
        pass: worst <= 1e-9 && bad_ancillas == 0,
        detail: format!("100 triples, max |p0 - p0'| = {worst:.2e}, {bad_ancillas} ancilla mismatches"),
    }
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut phase_worst = 0.0f64;
    for n in 1..=12 {
        for i in 0..6 {
            let f = formula_mix(&mut rng, n, i);
            let m = common::brute_force_models(&f).len() as u64;
            let kmax = if m == 0 { 3 } else { ((std::f64::consts::FRAC_PI_4 * ((1u64 << n) as f64 / m as f64).sqrt()) as usize) + 2 };
            for k in 0..=kmax {
                worst = worst.max((grover_search(&f, k).success_probability - common::grover_oracle(n, m, k)).abs());
                checked += 1;
            }
            if n <= 4 {
                for kind in [OracleKind::Naive, OracleKind::Counter] {
                    let p = grover_circuit_success(&f, 1, kind).unwrap();
                    worst = worst.max((p - common::grover_oracle(n, m, 1)).abs());
                }
            }
            if n <= 10 {
                for kind in [OracleKind::Naive, OracleKind::Counter] {
                    let (dev, leak) = oracle_phase_deviation(&f, &build_clause_oracle(&f, kind)).unwrap();
                    phase_worst = phase_worst.max(dev).max(leak);
                }
            }
        }
    }
    Verdict {
        pass: worst <= 1e-6 && phase_worst <= 1e-9,
        detail: format!("{checked} (n, M, k) points, max deviation {worst:.2e}; oracle phase deviation {phase_worst:.2e}"),
    }
}

/// Reference k = 3 listing, one line per leaf call.
const REFERENCE_K3: [&str; 27] = [
    "M[0] ^= SIAB_1(M[-1])",
    "M[1] ^= SIAB_2(M[0])",
    "M[0] ^= SIAB_1(M[-1])",
    "M[0] ^= SIAB_3(M[1])",
    "M[2] ^= SIAB_4(M[0])",
    "M[0] ^= SIAB_3(M[1])",
    "M[0] ^= SIAB_1(M[-1])",
    "M[1] ^= SIAB_2(M[0])",
    "M[0] ^= SIAB_1(M[-1])",
    "M[0] ^= SIAB_5(M[2])",
    "M[1] ^= SIAB_6(M[0])",
    "M[0] ^= SIAB_5(M[2])",
    "M[0] ^= SIAB_6(M[1])",
    "M[3] ^= SIAB_7(M[0])",
    "M[0] ^= SIAB_6(M[1])",
    "M[0] ^= SIAB_5(M[2])",
    "M[1] ^= SIAB_6(M[0])",
    "M[0] ^= SIAB_5(M[2])",
    "M[0] ^= SIAB_1(M[-1])",
    "M[1] ^= SIAB_2(M[0])",
    "M[0] ^= SIAB_1(M[-1])",
    "M[0] ^= SIAB_3(M[1])",
    "M[2] ^= SIAB_4(M[0])",
    "M[0] ^= SIAB_3(M[1])",
    "M[0] ^= SIAB_1(M[-1])",
    "M[1] ^= SIAB_2(M[0])",
    "M[0] ^= SIAB_1(M[-1])",
];

/// Lines where the reference listing departs from the recursion: it repeats block 6 and
/// never calls block 8.
const KNOWN_LISTING_TYPO: [usize; 3] = [13, 14, 15];

struct SiarChecks {
    calls_ok: bool,
    peak_ok: bool,
    listing_mismatches: Vec<usize>,
    equivalence_failures: usize,
    self_inverse_failures: usize,
}

fn siar_checks() -> SiarChecks {
    let mut calls_ok = true;
    let mut peak_ok = true;
    for k in 0..=6 {
        let s = siar_schedule(k);
        calls_ok &= s.entries.len() == 3usize.pow(k as u32);
        peak_ok &= schedule_peak_live(&s) <= k.max(1);
    }
    let text = siar_schedule(3).to_text();
    let ours: Vec<&str> = text.lines().collect();
    let listing_mismatches: Vec<usize> = (0..27).filter(|&i| ours.get(i) != Some(&REFERENCE_K3[i])).map(|i| i + 1).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut equivalence_failures, mut self_inverse_failures) = (0, 0);
    for i in 0..200 {
        let w = 1 + i % 5;
        let n = rng.gen_range(1..=8 * w).max(1);
        let k = 3.min(n).min(w + 1);
        let f = random_banded_kcnf(n, rng.gen_range(1..=3 * n), k, w, &mut rng);
        let s = 1 + i % 3;
        let advice: Vec<bool> = (0..rng.gen_range(0..=n)).map(|_| rng.gen()).collect();
        let inst = SiaInstance::new(&f, w, s).unwrap();
        let trace = siar_execute(&inst, &advice).unwrap();
        if trace.outcome != sia_reference(&f, &advice, s) {
            equivalence_failures += 1;
        }
        if !trace.self_inverse {
            self_inverse_failures += 1;
        }
        calls_ok &= trace.leaf_calls == 3usize.pow(inst.k as u32);
        peak_ok &= trace.peak_live <= inst.k.max(1);
    }
    SiarChecks { calls_ok, peak_ok, listing_mismatches, equivalence_failures, self_inverse_failures }
}

fn criterion_6(c: &SiarChecks) -> Verdict {
    Verdict {
        pass: c.calls_ok
            && c.peak_ok
            && c.listing_mismatches.is_empty()
            && c.equivalence_failures == 0
            && c.self_inverse_failures == 0,
        detail: format!(
            "3^k calls for k <= 6: {}, peak <= k: {}, k=3 listing lines differing: {:?}, 200 runs: {} mismatches, {} not self-inverse",
            c.calls_ok, c.peak_ok, c.listing_mismatches, c.equivalence_failures, c.self_inverse_failures
        ),
    }
}

fn criterion_7() -> Verdict {
    let sizes: Vec<usize> = (16..=28).collect();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for lambda in [0.5, 0.8, 1.0] {
        for kp in [0.25, 0.5] {
            let e = hybrid_exponent_experiment(lambda, kp, &sizes).unwrap();
            let err = (e.fit.slope - e.predicted).abs();
            worst = worst.max(err);
            parts.push(format!("({lambda}, {kp}): {:.3} vs {:.3}", e.fit.slope, e.predicted));
        }
    }
    Verdict { pass: worst <= 0.05, detail: format!("worst |slope - predicted| = {worst:.3}; {}", parts.join(", ")) }
}

fn criterion_8() -> Verdict {
    let mut spec = ExperimentSpec::new(Command::SethHybrid, 808);
    spec.args.kappa = Some(0.5);
    spec.args.n = Some(16);
    spec.args.n_max = Some(20);
    let report = cli::run(&spec).unwrap();
    // Independent count: every subcube of an unsatisfiable formula costs
    // floor(pi/4 * 2^(q/2)) iterations plus one verification.
    let counts_ok = report.records.iter().all(|r| {
        let n = r["n"].as_u64().unwrap();
        let q = n / 2;
        let per = (std::f64::consts::FRAC_PI_4 * (2f64).powf(q as f64 / 2.0)).floor() as u64 + 1;
        r["verdict"] == "unsat" && r["oracleQueries"].as_u64() == Some((1u64 << (n - q)) * per)
    });
    let slope = report.aggregate["measuredExponent"].as_f64().unwrap_or(f64::NAN);
    Verdict {
        pass: counts_ok && (slope - 0.75).abs() <= 0.05 && report.ok(),
        detail: format!("measured exponent {slope:.4} vs 0.75, query counts match closed form: {counts_ok}"),
    }
}

fn criterion_9() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let (mut disagreements, mut wide) = (0, 0);
    let mut sat = 0;
    for i in 0..100 {
        let n = 3 + i % 6;
        let f = formula_mix(&mut rng, n, i);
        let (lat, _) = reduce_3sat_to_lattice(&f).unwrap();
        let truth = !common::brute_force_models(&f).is_empty();
        let eq = equisat_check(&f, &lat).unwrap();
        sat += usize::from(truth);
        if !eq.agree || eq.lattice_sat != truth {
            disagreements += 1;
        }
        if index_width(&lattice_to_cnf(&lat).unwrap()) > lat.grid_side + 1 {
            wide += 1;
        }
    }
    Verdict {
        pass: disagreements == 0 && wide == 0,
        detail: format!("100 instances ({sat} sat), {disagreements} disagreements, {wide} over the width bound"),
    }
}

fn criterion_10() -> Verdict {
    let epsilon = 0.1;
    let mut failures = 0;
    for ki in 1..=10 {
        for ci in 1..=10 {
            let (kappa, c) = (ki as f64 / 10.0, ci as f64 / 10.0);
            match sia_region_feasible(kappa, c, epsilon).unwrap() {
                Some(p)
                    if p.beta > 0.0
                        && p.zeta > 0.0
                        && sia_memory_ok(p.beta, p.zeta, kappa, epsilon)
                        && sia_speedup_ok(p.beta, p.zeta, kappa, c)
                        // Direct re-substitution without the library predicates.
                        && p.zeta * (1.0 / p.zeta).log2() <= (1.0 - p.beta - epsilon) * kappa
                        && p.beta * kappa < 2.0 * c * p.zeta => {}
                _ => failures += 1,
            }
        }
    }
    Verdict { pass: failures == 0, detail: format!("100 (kappa, c) cells at epsilon = {epsilon}, {failures} failures") }
}

#[test]
fn acceptance() {
    let siar = siar_checks();
    let results = [
        (1, "solver oracle equivalence", criterion_1()),
        (2, "leaf-count bounds", criterion_2()),
        (3, "walk detection fidelity", criterion_3()),
        (4, "QPE equivalence", criterion_4()),
        (5, "Grover closed form", criterion_5()),
        (6, "SIAR resources", criterion_6(&siar)),
        (7, "hybrid exponent fit", criterion_7()),
        (8, "SETH hybrid exponent", criterion_8()),
        (9, "lattice reduction", criterion_9()),
        (10, "SIA feasibility region", criterion_10()),
    ];
    for (id, name, v) in &results {
        report(*id, name, v);
    }
    for (id, _, v) in &results {
        if *id != 6 {
            assert!(v.pass, "criterion {id} failed: {}", v.detail);
        }
    }
    // Criterion 6 fails only on the reference listing typo; everything else must hold.
    assert!(siar.calls_ok && siar.peak_ok);
    assert_eq!(siar.equivalence_failures, 0);
    assert_eq!(siar.self_inverse_failures, 0);
    assert_eq!(siar.listing_mismatches, KNOWN_LISTING_TYPO);
}
