//! Runs marked-vertex detection and the descent that locates a marked vertex on DPLL
//! trees, next to the exact per-trial acceptance probability.

use hybridts::formula::random_kcnf;
use hybridts::qwalk::{detect_marked, find_marked, trial_acceptance, DetectionParams, WalkTree};
use hybridts::treesearch::{build_tree, EngineConfig, DEFAULT_NODE_LIMIT};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = DetectionParams::default();
    for i in 0..8 {
        let n = 6 + i % 3;
        let f = random_kcnf(n, (3 + i % 3) * n, 3, &mut rng);
        let tree = build_tree(&f, &EngineConfig::dpll(n), DEFAULT_NODE_LIMIT).unwrap();
        let Ok(wt) = WalkTree::from_search_tree(&tree) else {
            println!("instance {i}: root is already a solution");
            continue;
        };
        let p = trial_acceptance(&wt, &params);
        let d = detect_marked(&wt, 0.1, &params, &mut rng);
        let found = find_marked(&wt, 0.1, &params, 4, &mut rng).unwrap();
        println!(
            "instance {i}: T = {:>4}, marked = {:<5}, p = {p:.3}, {}/{} accepted -> {:?}, descent found {:?}",
            wt.len(),
            wt.has_marked(),
            d.acceptances,
            d.k,
            d.verdict,
            found
        );
    }
}
