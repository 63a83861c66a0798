//! Sweeps the detection precision constant beta over a corpus of DPLL trees and reports the
//! exact per-trial acceptance range on marked and unmarked trees, plus the resulting
//! per-detection failure probability at delta = 0.1.

use hybridts::formula::random_kcnf;
use hybridts::qwalk::{trial_acceptance, DetectionParams, WalkTree, GAMMA};
use hybridts::treesearch::{build_tree, EngineConfig, DEFAULT_NODE_LIMIT};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn binom_tail_below(k: usize, p: f64, threshold: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..threshold {
        let mut c = 1.0;
        for j in 0..i {
            c *= (k - j) as f64 / (j + 1) as f64;
        }
        total += c * p.powi(i as i32) * (1.0 - p).powi((k - i) as i32);
    }
    total
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut trees = Vec::new();
    for i in 0..60 {
        let n = 4 + i % 7;
        let m = ((3.0 + (i % 5) as f64 * 0.5) * n as f64) as usize;
        let f = random_kcnf(n, m, 3, &mut rng);
        let t = build_tree(&f, &EngineConfig::dpll(n), DEFAULT_NODE_LIMIT).unwrap();
        if let Ok(w) = WalkTree::from_search_tree(&t) {
            trees.push(w);
        }
    }
    let marked = trees.iter().filter(|t| t.has_marked()).count();
    println!("corpus: {} trees, {} marked", trees.len(), marked);
    for b in 1..=10 {
        let params = DetectionParams { gamma: GAMMA, beta: b as f64 / 10.0 };
        let k = params.repetitions(0.1);
        let thr = (3 * k).div_ceil(8);
        let (mut lo_marked, mut hi_unmarked) = (1.0f64, 0.0f64);
        for t in &trees {
            let p = trial_acceptance(t, &params);
            if t.has_marked() {
                lo_marked = lo_marked.min(p);
            } else {
                hi_unmarked = hi_unmarked.max(p);
            }
        }
        let miss = binom_tail_below(k, lo_marked, thr);
        let false_alarm = (1.0 - binom_tail_below(k, hi_unmarked, thr)).max(0.0);
        println!(
            "beta={:.1} K={k} min marked p={lo_marked:.4} max unmarked p={hi_unmarked:.4} worst miss={miss:.4} worst false alarm={false_alarm:.4}",
            params.beta
        );
    }
}
