//! Builds both clause oracles for a small formula, checks their phases, and runs Grover
//! functionally and as a synthesized circuit against the closed form.

use hybridts::formula::CnfFormula;
use hybridts::qcircuit::{
    build_clause_oracle, grover_circuit_success, grover_closed_form, grover_optimal_iterations, grover_search,
    oracle_phase_deviation, OracleKind,
};

fn main() {
    let f = CnfFormula::from_dimacs_clauses(4, &[vec![1, 2], vec![-1, 3], vec![-2, -3, 4], vec![-4, 1]]).unwrap();
    let solutions = f.model_count();
    println!("n = {}, m = {}, solutions = {solutions}", f.num_vars(), f.num_clauses());
    for kind in [OracleKind::Naive, OracleKind::Counter] {
        let o = build_clause_oracle(&f, kind);
        let (dev, leak) = oracle_phase_deviation(&f, &o).unwrap();
        println!(
            "{kind:?} oracle: {} wires, {} gates, phase deviation {dev:.1e}, ancilla leak {leak:.1e}",
            o.circuit.num_wires,
            o.circuit.primitive_gate_count()
        );
    }
    let kopt = grover_optimal_iterations(f.num_vars(), solutions);
    for k in 0..=kopt + 1 {
        println!(
            "k = {k}: functional {:.6}, circuit {:.6}, closed form {:.6}",
            grover_search(&f, k).success_probability,
            grover_circuit_success(&f, k, OracleKind::Counter).unwrap(),
            grover_closed_form(f.num_vars(), solutions, k)
        );
    }
}
