//! Tabulates the (beta, zeta) point chosen for each (kappa, c) cell.

use hybridts::decomposition::sia_region_feasible;

fn main() {
    let epsilon = 0.1;
    for ki in [1, 3, 5, 7, 10] {
        let kappa = ki as f64 / 10.0;
        let row: Vec<String> = [1, 3, 5, 7, 10]
            .iter()
            .map(|&ci| match sia_region_feasible(kappa, ci as f64 / 10.0, epsilon).unwrap() {
                Some(p) => format!("({:.3}, {:.3})", p.beta, p.zeta),
                None => "none".into(),
            })
            .collect();
        println!("kappa {kappa:.1}: {}", row.join(" "));
    }
}
