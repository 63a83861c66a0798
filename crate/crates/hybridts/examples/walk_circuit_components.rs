//! Synthesizes the reversible components of the DPLL walk for one formula and prints their
//! gate counts and the qubit accounting.

use hybridts::formula::CnfFormula;
use hybridts::qcircuit::{build_walk_components, qubit_report, run_classical, WalkLayout};
use hybridts::formula::PartialAssignment;

fn main() {
    let f = CnfFormula::from_dimacs_clauses(4, &[vec![1, -2], vec![2, 3, -4], vec![-1, 4], vec![-3]]).unwrap();
    let c = build_walk_components(&f);
    for (name, circ) in [
        ("V_leaf", &c.v_leaf),
        ("V_marked", &c.v_marked),
        ("V_unit", &c.v_unit),
        ("V_pure", &c.v_pure),
        ("V_next", &c.v_next),
        ("V_A", &c.v_a),
        ("R_A", &c.r_a),
    ] {
        println!("{name:<9} {:>6} gates on {} wires", circ.primitive_gate_count(), circ.num_wires);
    }
    println!("{:#?}", qubit_report(&f));
    let lay = WalkLayout::new(&f);
    let root = lay.encode(&PartialAssignment::empty(4), &lay.x);
    let out = run_classical(&c.v_unit, root);
    println!("unit rule at the root picks variable {}", lay.read(out, &lay.unit_j));
}
