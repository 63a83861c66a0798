//! Reduces a 3-CNF formula to Lattice SAT, validates the plaquettes and checks that both
//! sides agree on satisfiability.

use hybridts::formula::{index_width, CnfFormula};
use hybridts::latticesat::{copy_chains_consistent, equisat_check, lattice_to_cnf, reduce_3sat_to_lattice, validate_lattice};

fn main() {
    let f = CnfFormula::from_dimacs_clauses(4, &[vec![1, -2, 3], vec![-1, 2, 4], vec![2, -3, -4], vec![-1, -2]]).unwrap();
    let (lat, art) = reduce_3sat_to_lattice(&f).unwrap();
    let lf = lattice_to_cnf(&lat).unwrap();
    println!(
        "grid {0}x{0}: {1} constraints, {2} crossings, {3} wires, index width {4}",
        lat.grid_side,
        lat.constraints.len(),
        art.crossings.len(),
        art.wires.len(),
        index_width(&lf)
    );
    println!("plaquettes valid: {}", validate_lattice(&lat).ok);
    let eq = equisat_check(&f, &lat).unwrap();
    println!("source sat {}, lattice sat {}, compacted to {} variables", eq.source_sat, eq.lattice_sat, eq.compacted_vars);
    if let Some(m) = &eq.lattice_model {
        println!("copy chains consistent: {}", copy_chains_consistent(&lat, &art, m));
    }
}
