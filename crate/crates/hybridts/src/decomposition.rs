//! Search-tree decomposition at a quantum space budget, hybrid query-cost prediction,
//! leaf-count bounds, exponent fitting, density scans and the SIA feasibility region.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::treesearch::{NodeKind, SearchTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompositionError {
    #[error("measure increases from node {parent} to child {child}")]
    NonMonotoneMeasure { parent: usize, child: usize },
    #[error("need at least {need} sizes in the series, got {got}")]
    SeriesTooShort { need: usize, got: usize },
    #[error("parameter {0} must be positive")]
    NonPositive(&'static str),
    #[error("parameter {name} = {value} out of range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("empty tree")]
    EmptyTree,
}

/// Effective-size measure that decides whether a subtree fits the quantum device.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Measure {
    Height,
    BranchingNumber,
}

/// Query cost of handing a subtree to the quantum side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Phi {
    /// Backtracking-walk cost `sqrt(T_j)`.
    Sqrt,
    /// Grover over branch strings, `2^(br_j / 2)`.
    GroverBranch,
    /// No speed-up, `T_j`.
    Classical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CostModel {
    pub phi: Phi,
    pub effective_size_measure: Measure,
}

impl CostModel {
    pub fn new(phi: Phi, effective_size_measure: Measure) -> Self {
        CostModel { phi, effective_size_measure }
    }

    pub fn cost(&self, entry: &CutoffEntry) -> f64 {
        match self.phi {
            Phi::Sqrt => (entry.size as f64).sqrt(),
            Phi::GroverBranch => 2f64.powf(entry.branching as f64 / 2.0),
            Phi::Classical => entry.size as f64,
        }
    }

    /// `phi` applied to a bare size; branch-based costs treat the size as a full binary tree.
    pub fn cost_of_size(&self, size: f64) -> f64 {
        match self.phi {
            Phi::Sqrt => size.sqrt(),
            Phi::GroverBranch => ((size + 1.0) / 2.0).max(1.0).sqrt(),
            Phi::Classical => size,
        }
    }
}

/// A class of identical cut-off subtrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CutoffEntry {
    /// Root index in the explicit tree; absent for analytic families.
    pub root: Option<usize>,
    pub size: u64,
    pub height: usize,
    pub branching: usize,
    pub multiplicity: u64,
}

impl CutoffEntry {
    /// A single-vertex subtree; the extended decomposition replaces it by two empty trees.
    pub fn is_trivial(&self) -> bool {
        self.size <= 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TreeDecomposition {
    pub measure: Measure,
    pub budget: usize,
    pub total_size: u64,
    pub top_tree_size: u64,
    pub cutoffs: Vec<CutoffEntry>,
    pub extended_j: u64,
}

impl TreeDecomposition {
    pub fn subtree_count(&self) -> u64 {
        self.cutoffs.iter().map(|c| c.multiplicity).sum()
    }

    /// Sum of all cut-off subtree sizes, trivial ones included.
    pub fn subtree_total(&self) -> u64 {
        self.cutoffs.iter().map(|c| c.size * c.multiplicity).sum()
    }

    /// `T_0 + sum T_j`; equals the tree size.
    pub fn reconstituted_size(&self) -> u64 {
        self.top_tree_size + self.subtree_total()
    }

    /// Average size over the extended decomposition; trivial cut-offs count as two empty trees.
    pub fn average_subtree_size(&self) -> f64 {
        if self.extended_j == 0 {
            return 0.0;
        }
        let nontrivial: u64 = self.cutoffs.iter().filter(|c| !c.is_trivial()).map(|c| c.size * c.multiplicity).sum();
        nontrivial as f64 / self.extended_j as f64
    }

    pub fn nontrivial_count(&self) -> u64 {
        self.cutoffs.iter().filter(|c| !c.is_trivial()).map(|c| c.multiplicity).sum()
    }
}

fn extended_j(cutoffs: &[CutoffEntry]) -> u64 {
    cutoffs.iter().map(|c| if c.is_trivial() { 2 * c.multiplicity } else { c.multiplicity }).sum()
}

/// Per-vertex subtree size, height and branching number for an explicit tree.
#[derive(Clone, Debug)]
pub struct SubtreeProfile {
    pub size: Vec<u64>,
    pub height: Vec<usize>,
    pub branching: Vec<usize>,
}

impl SubtreeProfile {
    pub fn of(tree: &SearchTree) -> Self {
        let n = tree.nodes.len();
        let mut size = vec![1u64; n];
        let mut height = vec![0usize; n];
        let mut branching = vec![0usize; n];
        // Preorder puts every child after its parent.
        for v in (0..n).rev() {
            let node = &tree.nodes[v];
            let is_branch = usize::from(node.children.len() >= 2);
            for &c in &node.children {
                size[v] += size[c];
                height[v] = height[v].max(height[c] + 1);
                branching[v] = branching[v].max(branching[c] + is_branch);
            }
        }
        SubtreeProfile { size, height, branching }
    }

    pub fn measure(&self, v: usize, m: Measure) -> usize {
        match m {
            Measure::Height => self.height[v],
            Measure::BranchingNumber => self.branching[v],
        }
    }
}

/// Splits an explicit tree at the maximal vertices whose measure fits `budget`.
pub fn decompose(tree: &SearchTree, measure: Measure, budget: usize) -> Result<TreeDecomposition, DecompositionError> {
    if tree.is_empty() {
        return Err(DecompositionError::EmptyTree);
    }
    let prof = SubtreeProfile::of(tree);
    for (v, node) in tree.nodes.iter().enumerate() {
        for &c in &node.children {
            if prof.measure(c, measure) > prof.measure(v, measure) {
                return Err(DecompositionError::NonMonotoneMeasure { parent: v, child: c });
            }
        }
    }
    let mut top = 0u64;
    let mut cutoffs = Vec::new();
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        if prof.measure(v, measure) <= budget {
            cutoffs.push(CutoffEntry {
                root: Some(v),
                size: prof.size[v],
                height: prof.height[v],
                branching: prof.branching[v],
                multiplicity: 1,
            });
        } else {
            top += 1;
            for &c in tree.nodes[v].children.iter().rev() {
                stack.push(c);
            }
        }
    }
    Ok(TreeDecomposition {
        measure,
        budget,
        total_size: prof.size[0],
        top_tree_size: top,
        extended_j: extended_j(&cutoffs),
        cutoffs,
    })
}

/// Level-uniform tree: every vertex at depth `d < len` has `branching[d]` children, all of
/// the same shape; vertices at depth `len` are leaves. Sizes stay exact up to `2^63`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformTree {
    pub branching: Vec<u8>,
}

impl UniformTree {
    /// `n` levels with `round(lambda n)` of them branching, spread evenly.
    pub fn spread(n: usize, lambda: f64) -> Self {
        let b = (lambda * n as f64).round() as usize;
        let branching = (0..n).map(|d| if (d + 1) * b / n > d * b / n { 2 } else { 1 }).collect();
        UniformTree { branching }
    }

    pub fn complete(height: usize) -> Self {
        UniformTree { branching: vec![2; height] }
    }

    pub fn height(&self) -> usize {
        self.branching.len()
    }

    /// Vertex count at each depth `0..=height`.
    pub fn level_widths(&self) -> Vec<u64> {
        let mut w = vec![1u64];
        for &b in &self.branching {
            let last = *w.last().unwrap();
            w.push(last * u64::from(b));
        }
        w
    }

    fn suffix(&self, d: usize) -> UniformTree {
        UniformTree { branching: self.branching[d..].to_vec() }
    }

    pub fn size(&self) -> u64 {
        self.level_widths().iter().sum()
    }

    pub fn max_branching(&self) -> usize {
        self.branching.iter().filter(|&&b| b >= 2).count()
    }

    pub fn leaf_count(&self) -> u64 {
        *self.level_widths().last().unwrap()
    }

    fn measure_at(&self, d: usize, m: Measure) -> usize {
        match m {
            Measure::Height => self.height() - d,
            Measure::BranchingNumber => self.branching[d..].iter().filter(|&&b| b >= 2).count(),
        }
    }

    /// Materializes the tree; only for small heights.
    pub fn to_search_tree(&self) -> SearchTree {
        let widths = self.level_widths();
        let total: u64 = widths.iter().sum();
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); total as usize];
        let mut level_start = 0usize;
        for d in 0..self.height() {
            let next_start = level_start + widths[d] as usize;
            let b = self.branching[d] as usize;
            for i in 0..widths[d] as usize {
                children[level_start + i] = (0..b).map(|j| next_start + i * b + j).collect();
            }
            level_start = next_start;
        }
        SearchTree::from_children(self.height(), &children, &vec![false; total as usize])
    }
}

/// Decomposition of a level-uniform tree computed per level.
pub fn decompose_uniform(tree: &UniformTree, measure: Measure, budget: usize) -> TreeDecomposition {
    let widths = tree.level_widths();
    let cut = (0..=tree.height()).find(|&d| tree.measure_at(d, measure) <= budget).expect("leaves have measure 0");
    let sub = tree.suffix(cut);
    let cutoffs = vec![CutoffEntry {
        root: None,
        size: sub.size(),
        height: sub.height(),
        branching: sub.max_branching(),
        multiplicity: widths[cut],
    }];
    TreeDecomposition {
        measure,
        budget,
        total_size: tree.size(),
        top_tree_size: widths[..cut].iter().sum(),
        extended_j: extended_j(&cutoffs),
        cutoffs,
    }
}

/// `T_0 + sum_j phi(T_j)`.
pub fn hybrid_query_count(decomp: &TreeDecomposition, model: &CostModel) -> f64 {
    decomp.top_tree_size as f64
        + decomp.cutoffs.iter().map(|c| c.multiplicity as f64 * model.cost(c)).sum::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "status")]
pub enum LeavesBound {
    Holds,
    Violated { size: u64, leaves: u64, path_vertices: usize, lower: f64, upper: f64 },
}

/// `(T/n + 1)/2 <= K <= (T + 1)/2` with `n` the vertex count of the longest root-leaf path,
/// the largest chain a one-child run can collapse.
pub fn leaves_bound_check(tree: &SearchTree) -> LeavesBound {
    let s = tree.stats();
    let n = s.height + 1;
    let t = s.size as f64;
    let k = s.leaf_count as f64;
    let lower = (t / n as f64 + 1.0) / 2.0;
    let upper = (t + 1.0) / 2.0;
    if lower <= k + 1e-9 && k <= upper + 1e-9 {
        LeavesBound::Holds
    } else {
        LeavesBound::Violated { size: s.size, leaves: s.leaf_count, path_vertices: n, lower, upper }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>() / n).sqrt();
    LineFit { slope, intercept, residual }
}

/// Tolerance on fitted exponents when judging the metatheorem conditions.
pub const EXPONENT_TOLERANCE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetatheoremReport {
    pub average_fit: LineFit,
    pub phi_fit: LineFit,
    pub fitted_delta: f64,
    pub condition1: bool,
    pub condition2: bool,
    /// Every node query here is polynomial time.
    pub condition3: bool,
}

/// Fits `log2(avg T_j)` and `log2 phi(avg T_j)` against `n` over a family of decompositions.
pub fn check_metatheorem_conditions(
    series: &[(usize, TreeDecomposition)],
    model: &CostModel,
    lambda: f64,
    delta: f64,
) -> Result<MetatheoremReport, DecompositionError> {
    if series.len() < 3 {
        return Err(DecompositionError::SeriesTooShort { need: 3, got: series.len() });
    }
    let xs: Vec<f64> = series.iter().map(|(n, _)| *n as f64).collect();
    let avg: Vec<f64> = series.iter().map(|(_, d)| d.average_subtree_size().max(f64::MIN_POSITIVE)).collect();
    let ya: Vec<f64> = avg.iter().map(|a| a.log2()).collect();
    let yp: Vec<f64> = avg.iter().map(|&a| model.cost_of_size(a).max(f64::MIN_POSITIVE).log2()).collect();
    let average_fit = fit_line(&xs, &ya);
    let phi_fit = fit_line(&xs, &yp);
    let fitted_delta = if average_fit.slope.abs() > 1e-12 { 1.0 - phi_fit.slope / average_fit.slope } else { 0.0 };
    Ok(MetatheoremReport {
        condition1: lambda > 0.0 && (average_fit.slope - lambda).abs() <= EXPONENT_TOLERANCE,
        condition2: delta > 0.0 && (phi_fit.slope - lambda * (1.0 - delta)).abs() <= EXPONENT_TOLERANCE,
        condition3: true,
        average_fit,
        phi_fit,
        fitted_delta,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DensityScan {
    pub scanned: usize,
    pub min_density: f64,
    pub max_density: f64,
    pub fraction_exponential: f64,
}

/// Densities at or above this count as exponential.
pub const DENSE_THRESHOLD: f64 = 0.5;

/// Scans subtrees tall enough for a window of `h = max(1, floor(eta n))` levels and reports
/// `(log2(T_h + 1) - 1) / h`, where `T_h` counts the subtree's vertices within the window.
/// The window is measured in depth or in branchings per `measure`. A complete window gives 1.
pub fn uniform_density_scan(tree: &SearchTree, eta: f64, measure: Measure) -> Result<DensityScan, DecompositionError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(DecompositionError::OutOfRange { name: "eta", value: eta });
    }
    let n = tree.num_vars.max(1);
    let h = ((eta * n as f64).floor() as usize).max(1);
    let prof = SubtreeProfile::of(tree);
    let mut densities = Vec::new();
    for (v, node) in tree.nodes.iter().enumerate() {
        let eligible = match measure {
            Measure::Height => node.depth + h <= n && prof.height[v] >= h,
            Measure::BranchingNumber => prof.branching[v] >= h,
        };
        if !eligible {
            continue;
        }
        let mut count = 0u64;
        let mut stack = vec![(v, 0usize)];
        while let Some((u, level)) = stack.pop() {
            count += 1;
            if level == h {
                continue;
            }
            let step = match measure {
                Measure::Height => 1,
                Measure::BranchingNumber => usize::from(tree.nodes[u].kind == NodeKind::Branch),
            };
            for &c in &tree.nodes[u].children {
                stack.push((c, level + step));
            }
        }
        densities.push((((count + 1) as f64).log2() - 1.0) / h as f64);
    }
    if densities.is_empty() {
        return Ok(DensityScan { scanned: 0, min_density: 0.0, max_density: 0.0, fraction_exponential: 0.0 });
    }
    let dense = densities.iter().filter(|&&d| d >= DENSE_THRESHOLD).count();
    Ok(DensityScan {
        scanned: densities.len(),
        min_density: densities.iter().cloned().fold(f64::INFINITY, f64::min),
        max_density: densities.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        fraction_exponential: dense as f64 / densities.len() as f64,
    })
}

/// Exponent of the hybrid runtime `2^((1 - kappa'/2) lambda n)`.
pub fn predicted_exponent(kappa_prime: f64, lambda: f64) -> Result<f64, DecompositionError> {
    if !(0.0..=1.0).contains(&kappa_prime) {
        return Err(DecompositionError::OutOfRange { name: "kappaPrime", value: kappa_prime });
    }
    if lambda <= 0.0 {
        return Err(DecompositionError::NonPositive("lambda"));
    }
    Ok((1.0 - kappa_prime / 2.0) * lambda)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExponentExperiment {
    pub lambda: f64,
    pub kappa_prime: f64,
    pub sizes: Vec<usize>,
    pub hybrid_queries: Vec<f64>,
    pub fit: LineFit,
    pub predicted: f64,
}

/// Height-budget `floor(kappa' n)` decompositions of `UniformTree::spread(n, lambda)` under
/// `phi = sqrt`, with the slope of `log2 T_H` against `n`.
pub fn hybrid_exponent_experiment(
    lambda: f64,
    kappa_prime: f64,
    sizes: &[usize],
) -> Result<ExponentExperiment, DecompositionError> {
    if sizes.len() < 3 {
        return Err(DecompositionError::SeriesTooShort { need: 3, got: sizes.len() });
    }
    let predicted = predicted_exponent(kappa_prime, lambda)?;
    let model = CostModel::new(Phi::Sqrt, Measure::Height);
    let hybrid_queries: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let t = UniformTree::spread(n, lambda);
            let budget = (kappa_prime * n as f64).floor() as usize;
            hybrid_query_count(&decompose_uniform(&t, Measure::Height, budget), &model)
        })
        .collect();
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = hybrid_queries.iter().map(|q| q.log2()).collect();
    Ok(ExponentExperiment {
        lambda,
        kappa_prime,
        sizes: sizes.to_vec(),
        hybrid_queries,
        fit: fit_line(&xs, &ys),
        predicted,
    })
}

const GRID: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SiaRegionPoint {
    pub beta: f64,
    pub zeta: f64,
}

/// Memory inequality: `zeta log2(1/zeta) <= (1 - beta - epsilon) kappa`.
pub fn sia_memory_ok(beta: f64, zeta: f64, kappa: f64, epsilon: f64) -> bool {
    zeta * (1.0 / zeta).log2() <= (1.0 - beta - epsilon) * kappa
}

/// Speed-up inequality: `beta kappa < 2 c zeta`.
pub fn sia_speedup_ok(beta: f64, zeta: f64, kappa: f64, c: f64) -> bool {
    beta * kappa < 2.0 * c * zeta
}

/// Fixes `beta' = (1 - epsilon)/2`, lowers `zeta` from `1/e` on a 1e-3 grid until the memory
/// inequality holds, then lowers `beta` on the same grid until the speed-up inequality holds.
pub fn sia_region_feasible(kappa: f64, c: f64, epsilon: f64) -> Result<Option<SiaRegionPoint>, DecompositionError> {
    for (name, v) in [("kappa", kappa), ("c", c), ("epsilon", epsilon)] {
        if v <= 0.0 || v.is_nan() {
            return Err(DecompositionError::NonPositive(name));
        }
    }
    if epsilon >= 1.0 {
        return Err(DecompositionError::OutOfRange { name: "epsilon", value: epsilon });
    }
    let beta_start = ((1.0 - epsilon) / 2.0 / GRID).floor() as i64;
    // zeta log(1/zeta) is increasing below 1/e.
    let zeta_start = ((-1f64).exp() / GRID).floor() as i64;
    let Some(zeta_steps) = (1..=zeta_start)
        .rev()
        .find(|&z| sia_memory_ok(beta_start as f64 * GRID, z as f64 * GRID, kappa, epsilon))
    else {
        return Ok(None);
    };
    let zeta = zeta_steps as f64 * GRID;
    let Some(beta_steps) = (1..=beta_start).rev().find(|&b| sia_speedup_ok(b as f64 * GRID, zeta, kappa, c)) else {
        return Ok(None);
    };
    let beta = beta_steps as f64 * GRID;
    if sia_memory_ok(beta, zeta, kappa, epsilon) && sia_speedup_ok(beta, zeta, kappa, c) {
        Ok(Some(SiaRegionPoint { beta, zeta }))
    } else {
        Ok(None)
    }
}

/// Query cost `n^(3/2) sqrt(T')` of quantum tree-size estimation over the effective tree.
pub fn tree_size_estimation_cost(effective_size: u64, n: usize) -> f64 {
    assert!(effective_size >= 1);
    (n as f64).powf(1.5) * (effective_size as f64).sqrt()
}

/// Effective size at which estimation and classical traversal cost the same: `T' = n^3`.
pub fn estimation_crossover(n: usize) -> f64 {
    (n as f64).powi(3)
}

/// Comb with `spine` branching vertices whose last spine vertex carries a complete subtree
/// of the given height: a single large subtree under a long classical top.
pub fn comb_with_complete_tail(spine: usize, tail_height: usize) -> SearchTree {
    let mut children: Vec<Vec<usize>> = Vec::new();
    let mut next = 1usize;
    children.push(Vec::new());
    let mut cur = 0usize;
    for _ in 0..spine {
        let leaf = next;
        let down = next + 1;
        next += 2;
        children.push(Vec::new());
        children.push(Vec::new());
        children[cur] = vec![leaf, down];
        cur = down;
    }
    // Complete subtree hanging from `cur`, built breadth first.
    let mut frontier = vec![cur];
    for _ in 0..tail_height {
        let mut nf = Vec::new();
        for &v in &frontier {
            let a = next;
            let b = next + 1;
            next += 2;
            children.push(Vec::new());
            children.push(Vec::new());
            children[v] = vec![a, b];
            nf.push(a);
            nf.push(b);
        }
        frontier = nf;
    }
    let total = children.len();
    SearchTree::from_children(spine + tail_height, &children, &vec![false; total])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_height_four_budget_two() {
        let d = decompose(&SearchTree::complete(4), Measure::Height, 2).unwrap();
        assert_eq!(d.top_tree_size, 3);
        assert_eq!(d.subtree_count(), 4);
        assert!(d.cutoffs.iter().all(|c| c.size == 7));
        assert_eq!(d.reconstituted_size(), 31);
        let q = hybrid_query_count(&d, &CostModel::new(Phi::Sqrt, Measure::Height));
        assert!((q - (3.0 + 4.0 * 7f64.sqrt())).abs() < 1e-12);
        assert!((q - 13.583).abs() < 1e-3);
        let classical = hybrid_query_count(&d, &CostModel::new(Phi::Classical, Measure::Height));
        assert_eq!(classical, 31.0);
    }

    #[test]
    fn degenerate_budget() {
        let t = SearchTree::complete(4);
        let d = decompose(&t, Measure::Height, 9).unwrap();
        assert_eq!(d.top_tree_size, 0);
        assert_eq!(d.cutoffs.len(), 1);
        assert_eq!(d.cutoffs[0].size, 31);
    }

    #[test]
    fn comb_has_one_nontrivial_subtree() {
        let d = decompose(&SearchTree::comb(12), Measure::Height, 3).unwrap();
        assert_eq!(d.nontrivial_count(), 1);
        assert!(d.extended_j > 2 * 7);
        assert_eq!(d.reconstituted_size(), 23);
    }

    #[test]
    fn uniform_matches_explicit() {
        for lambda in [0.5, 0.8, 1.0] {
            let u = UniformTree::spread(10, lambda);
            let e = u.to_search_tree();
            for m in [Measure::Height, Measure::BranchingNumber] {
                for b in 0..=10 {
                    let a = decompose_uniform(&u, m, b);
                    let x = decompose(&e, m, b).unwrap();
                    assert_eq!(a.top_tree_size, x.top_tree_size);
                    assert_eq!(a.subtree_total(), x.subtree_total());
                    assert_eq!(a.subtree_count(), x.subtree_count());
                    assert_eq!(a.extended_j, x.extended_j);
                }
            }
        }
    }

    #[test]
    fn leaves_bound_examples() {
        assert_eq!(leaves_bound_check(&SearchTree::complete(2)), LeavesBound::Holds);
        assert_eq!(SearchTree::complete(2).stats().leaf_count, 4);
        let path: Vec<Vec<usize>> = (0..6).map(|i| if i < 5 { vec![i + 1] } else { vec![] }).collect();
        let p = SearchTree::from_children(5, &path, &[false; 6]);
        assert_eq!(p.stats().leaf_count, 1);
        assert_eq!(leaves_bound_check(&p), LeavesBound::Holds);
    }

    #[test]
    fn predicted_exponent_examples() {
        assert_eq!(predicted_exponent(1.0, 1.0).unwrap(), 0.5);
        assert_eq!(predicted_exponent(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(predicted_exponent(0.5, 1.0).unwrap(), 0.75);
    }

    #[test]
    fn half_split_of_complete_tree() {
        for n in [10usize, 16, 20] {
            let d = decompose_uniform(&UniformTree::complete(n), Measure::Height, n / 2);
            let q = hybrid_query_count(&d, &CostModel::new(Phi::Sqrt, Measure::Height));
            let gap = q.log2() - 0.75 * n as f64;
            assert!(gap.abs() <= 1.0, "n={n} gap={gap}");
        }
    }

    #[test]
    fn sia_region_example() {
        let p = sia_region_feasible(0.5, 0.5, 0.01).unwrap().unwrap();
        assert!(sia_memory_ok(p.beta, p.zeta, 0.5, 0.01));
        assert!(sia_speedup_ok(p.beta, p.zeta, 0.5, 0.5));
        assert!(sia_region_feasible(0.0, 0.5, 0.01).is_err());
    }

    #[test]
    fn estimation_cost_examples() {
        assert_eq!(tree_size_estimation_cost(1, 4), 8.0);
        let n = 10;
        let x = estimation_crossover(n);
        assert!((tree_size_estimation_cost(x as u64, n) - x).abs() < 1e-6);
    }
}
