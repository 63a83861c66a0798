//! Brute force over the top variables with Grover on each suffix subcube: counts oracle
//! queries on unsatisfiable formulas and fits their growth exponent.

use hybridts::cli::{instance_rng, seth_hybrid_search, unsat_3cnf};
use hybridts::decomposition::fit_line;

fn main() {
    let kappa = 0.5;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in 12..=20 {
        let mut rng = instance_rng(21, n);
        let f = unsat_3cnf(n, &mut rng).unwrap();
        let run = seth_hybrid_search(&f, kappa, &mut rng).unwrap();
        println!("n = {n}: {} subcubes x {} iterations -> {} queries", run.subcubes, run.iterations_per_subcube, run.oracle_queries);
        xs.push(n as f64);
        ys.push((run.oracle_queries as f64).log2());
    }
    println!("measured exponent {:.4}, predicted {:.4}", fit_line(&xs, &ys).slope, 1.0 - kappa / 2.0);
}
