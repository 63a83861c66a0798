//! Parses a DIMACS instance, solves it with DPLL and with dncPPSZ over a seeded
//! permutation, and prints the search-tree statistics of both engines.

use hybridts::formula::parse_dimacs;
use hybridts::treesearch::{dnc_ppsz_solve, dpll_solve, ppsz_proper, random_permutation, tree_stats, EngineConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const INSTANCE: &str = "c small satisfiable instance
p cnf 6 9
1 2 -3 0
-1 3 4 0
2 -4 5 0
-2 -5 6 0
3 5 -6 0
-3 -4 -6 0
1 -2 6 0
-1 4 -5 0
4 5 6 0
";

fn main() {
    let f = parse_dimacs(INSTANCE).expect("valid DIMACS");
    let n = f.num_vars();
    let dpll = EngineConfig::dpll(n);
    let r = dpll_solve(&f, &dpll).unwrap();
    println!("dpll: {} after {} vertices, {:?}", r.outcome.label(), r.visited, tree_stats(&f, &dpll).unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dnc = EngineConfig::dnc_ppsz(random_permutation(n, &mut rng), 2, n);
    let r = dnc_ppsz_solve(&f, &dnc).unwrap();
    println!("dncPPSZ: {} after {} vertices, {:?}", r.outcome.label(), r.visited, tree_stats(&f, &dnc).unwrap());

    let p = ppsz_proper(&f, 2, 0.1, 20, 7).unwrap();
    println!("ppsz with budget {}: {} in {} rounds", p.budget, p.outcome.label(), p.rounds);
}
