#![allow(dead_code)]

use hybridts::formula::CnfFormula;

/// Clause-by-clause evaluation of every assignment, independent of the library evaluator.
pub fn brute_force_models(f: &CnfFormula) -> Vec<u64> {
    let n = f.num_vars();
    assert!(n <= 24);
    (0..1u64 << n)
        .filter(|&x| {
            f.clauses().iter().all(|c| {
                c.iter().any(|l| {
                    let bit = (x >> (l.var() - 1)) & 1 == 1;
                    bit == l.is_positive()
                })
            })
        })
        .collect()
}

pub fn satisfies(f: &CnfFormula, model: &[bool]) -> bool {
    f.clauses().iter().all(|c| c.iter().any(|l| model[l.var() - 1] == l.is_positive()))
}

/// `sin^2((2k + 1) asin(sqrt(M / 2^n)))`.
pub fn grover_oracle(n: usize, m: u64, k: usize) -> f64 {
    let theta = (m as f64 / (1u64 << n) as f64).sqrt().asin();
    ((2 * k + 1) as f64 * theta).sin().powi(2)
}
