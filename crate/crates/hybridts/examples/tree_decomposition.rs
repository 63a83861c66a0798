//! Splits a DPLL search tree into a classical top tree and cut-off subtrees at several
//! height budgets and compares the hybrid query count with the classical tree size.

use hybridts::decomposition::{decompose, hybrid_query_count, leaves_bound_check, CostModel, Measure, Phi};
use hybridts::formula::random_kcnf;
use hybridts::treesearch::{build_tree, EngineConfig, DEFAULT_NODE_LIMIT};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 14;
    let f = random_kcnf(n, 50, 3, &mut rng);
    let tree = build_tree(&f, &EngineConfig::dpll_with(n, vec![]), DEFAULT_NODE_LIMIT).unwrap();
    let stats = tree.stats();
    println!("T = {}, height = {}, br = {}, K = {}", stats.size, stats.height, stats.max_branching, stats.leaf_count);
    println!("leaf-count bound: {:?}", leaves_bound_check(&tree));
    let model = CostModel::new(Phi::Sqrt, Measure::Height);
    for budget in [0, 2, 4, 6, 8, 10, 14] {
        let d = decompose(&tree, Measure::Height, budget).unwrap();
        println!(
            "budget {budget:>2}: T0 = {:>5}, subtrees = {:>5}, avg size = {:>8.2}, hybrid queries = {:>10.1}",
            d.top_tree_size,
            d.subtree_count(),
            d.average_subtree_size(),
            hybrid_query_count(&d, &model)
        );
    }
}
