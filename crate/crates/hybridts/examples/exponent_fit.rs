//! Fits the hybrid query exponent on the synthetic uniform tree family and prints it next
//! to `(1 - kappa'/2) lambda`.

use hybridts::decomposition::{hybrid_exponent_experiment, EXPONENT_TOLERANCE};

fn main() {
    let sizes: Vec<usize> = (16..=28).collect();
    for lambda in [0.5, 0.8, 1.0] {
        for kappa_prime in [0.25, 0.5, 0.75] {
            let e = hybrid_exponent_experiment(lambda, kappa_prime, &sizes).unwrap();
            let ok = (e.fit.slope - e.predicted).abs() <= EXPONENT_TOLERANCE;
            println!(
                "lambda {lambda:.2} kappa' {kappa_prime:.2}: fitted {:.4} predicted {:.4} residual {:.3} {}",
                e.fit.slope,
                e.predicted,
                e.fit.residual,
                if ok { "ok" } else { "off" }
            );
        }
    }
}
