//! Compares textbook phase estimation with the counter variant on random unitaries and
//! prints the wire budgets of both.

use hybridts::cli::{instance_rng, qpe_random_comparison};

fn main() {
    for i in 0..12 {
        let c = qpe_random_comparison(&mut instance_rng(99, i)).unwrap();
        println!(
            "t = {} theta = {:.4}: p0 = {:.9} counter = {:.9} closed form = {:.9} (ancillas {} vs readout {})",
            c.t, c.theta, c.p0, c.p0_counter, c.closed_form, c.circuit_ancillas, c.t
        );
    }
}
