//! Exact simulation of the backtracking walk over the vertex basis of a search tree:
//! star diffusions, `R_A`/`R_B`, phase-estimation detection and descent-based finding.
//!
//! Phase estimation is simulated exactly: the probability that a `t`-bit estimate reads 0 on
//! input `|r>` is `|| 2^-t sum_{k < 2^t} U^k |r> ||^2`, computed with sparse applications of
//! `U = R_B R_A`. The dense operators are only materialized for spectral checks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::treesearch::{LeafReason, NodeKind, SearchTree};

/// Default cap on the vertex-basis dimension of dense operators.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// K = ceil(GAMMA log2(1/delta)) phase estimations per detection. Trees whose only marked
/// vertex hangs off the root accept with probability exactly 1/2, so K must be large enough
/// for Bin(K, 1/2) to clear 3K/8 with probability 1 - delta/10; GAMMA = 24 gives K = 80.
pub const GAMMA: f64 = 24.0;

/// Precision constant: estimates resolve eigenphases to `BETA / sqrt(T n)` radians.
/// Largest value on the grid {0.1, ..., 1.0} keeping unmarked acceptance below 0.02 on the
/// calibration corpus (see the `walk_calibration` example).
pub const BETA: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WalkError {
    #[error("dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("the root must not be marked")]
    RootMarked,
    #[error("empty tree")]
    EmptyTree,
    #[error("descent verdicts stayed inconsistent after {0} attempts")]
    Inconsistent(usize),
}

/// Cap from `HYBRIDTS_DIM_CAP` or the default.
pub fn dim_cap() -> usize {
    crate::env_dim_cap().unwrap_or(DEFAULT_DIM_CAP)
}

/// A rooted tree for the walk. Vertex 0 is the root; `n` bounds the depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WalkTree {
    pub n: usize,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub depth: Vec<usize>,
    pub marked: Vec<bool>,
}

impl WalkTree {
    /// `children` lists must describe a tree rooted at 0.
    pub fn new(n: usize, children: Vec<Vec<usize>>, marked: Vec<bool>) -> Result<Self, WalkError> {
        if children.is_empty() {
            return Err(WalkError::EmptyTree);
        }
        if marked[0] {
            return Err(WalkError::RootMarked);
        }
        let t = children.len();
        let mut parent = vec![None; t];
        let mut depth = vec![0; t];
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            for &c in &children[v] {
                parent[c] = Some(v);
                depth[c] = depth[v] + 1;
                stack.push(c);
            }
        }
        let height = depth.iter().copied().max().unwrap_or(0);
        Ok(WalkTree { n: n.max(height).max(1), parent, children, depth, marked })
    }

    /// Satisfying leaves become marked vertices.
    pub fn from_search_tree(tree: &SearchTree) -> Result<Self, WalkError> {
        let children = tree.nodes.iter().map(|v| v.children.clone()).collect();
        let marked = tree.nodes.iter().map(|v| v.kind == NodeKind::Leaf(LeafReason::Satisfied)).collect();
        Self::new(tree.num_vars, children, marked)
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn has_marked(&self) -> bool {
        self.marked.iter().any(|&m| m)
    }

    /// The subtree under `v`, keeping this tree's `n`.
    pub fn subtree(&self, v: usize) -> Result<WalkTree, WalkError> {
        let mut order = vec![];
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            order.push(u);
            for &c in self.children[u].iter().rev() {
                stack.push(c);
            }
        }
        let mut id = std::collections::HashMap::new();
        for (i, &u) in order.iter().enumerate() {
            id.insert(u, i);
        }
        let children = order.iter().map(|u| self.children[*u].iter().map(|c| id[c]).collect()).collect();
        let marked = order.iter().map(|u| self.marked[*u]).collect();
        Self::new(self.n, children, marked)
    }

    /// Original vertex ids in the order `subtree(v)` numbers them.
    pub fn subtree_order(&self, v: usize) -> Vec<usize> {
        let mut order = vec![];
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            order.push(u);
            for &c in self.children[u].iter().rev() {
                stack.push(c);
            }
        }
        order
    }
}

/// Reflection attached to the star of `vertex`: identity, or `I - 2|psi><psi|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Diffusion {
    pub vertex: usize,
    pub identity: bool,
    /// `vertex` followed by its children.
    pub support: Vec<usize>,
    /// Unit vector over `support`; empty for the identity.
    pub psi: Vec<f64>,
}

pub fn build_diffusion(tree: &WalkTree, x: usize) -> Diffusion {
    let mut support = vec![x];
    support.extend_from_slice(&tree.children[x]);
    if tree.marked[x] {
        return Diffusion { vertex: x, identity: true, support, psi: vec![] };
    }
    let d = tree.children[x].len() as f64;
    let psi = if x == 0 {
        let norm = (1.0 + d * tree.n as f64).sqrt();
        let w = (tree.n as f64).sqrt() / norm;
        std::iter::once(1.0 / norm).chain(std::iter::repeat_n(w, tree.children[x].len())).collect()
    } else {
        let norm = (1.0 + d).sqrt();
        vec![1.0 / norm; support.len()]
    };
    Diffusion { vertex: x, identity: false, support, psi }
}

impl Diffusion {
    fn apply(&self, v: &mut [f64]) {
        if self.identity {
            return;
        }
        let dot: f64 = self.support.iter().zip(&self.psi).map(|(&i, p)| v[i] * p).sum();
        for (&i, p) in self.support.iter().zip(&self.psi) {
            v[i] -= 2.0 * dot * p;
        }
    }

    fn write_into(&self, m: &mut DMatrix<f64>) {
        for (a, &i) in self.support.iter().enumerate() {
            for (b, &j) in self.support.iter().enumerate() {
                let id = if i == j { 1.0 } else { 0.0 };
                m[(i, j)] = if self.identity { id } else { id - 2.0 * self.psi[a] * self.psi[b] };
            }
        }
    }
}

/// Sparse form of the walk: the diffusions of the even-depth and odd-depth stars.
#[derive(Clone, Debug)]
pub struct SparseWalk {
    pub dim: usize,
    pub a_stars: Vec<Diffusion>,
    pub b_stars: Vec<Diffusion>,
}

impl SparseWalk {
    pub fn new(tree: &WalkTree) -> Self {
        let mut a_stars = Vec::new();
        let mut b_stars = Vec::new();
        for x in 0..tree.len() {
            let d = build_diffusion(tree, x);
            if tree.depth[x].is_multiple_of(2) {
                a_stars.push(d);
            } else {
                b_stars.push(d);
            }
        }
        SparseWalk { dim: tree.len(), a_stars, b_stars }
    }

    pub fn apply_r_a(&self, v: &mut [f64]) {
        for d in &self.a_stars {
            d.apply(v);
        }
    }

    pub fn apply_r_b(&self, v: &mut [f64]) {
        for d in &self.b_stars {
            d.apply(v);
        }
    }

    /// `v <- R_B R_A v`.
    pub fn apply(&self, v: &mut [f64]) {
        self.apply_r_a(v);
        self.apply_r_b(v);
    }

    /// Probability that a `t`-bit phase estimate of `R_B R_A` on `|r>` reads 0.
    pub fn qpe_zero_probability(&self, t: u32) -> f64 {
        let steps = 1usize << t;
        let mut v = vec![0.0; self.dim];
        v[0] = 1.0;
        let mut acc = v.clone();
        for _ in 1..steps {
            self.apply(&mut v);
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += x;
            }
        }
        let s = steps as f64;
        acc.iter().map(|a| (a / s) * (a / s)).sum()
    }
}

/// Dense `R_A` and `R_B` over the vertex basis.
#[derive(Clone, Debug)]
pub struct WalkOperator {
    pub dim: usize,
    pub r_a: DMatrix<f64>,
    pub r_b: DMatrix<f64>,
}

pub fn build_walk_operator(tree: &WalkTree) -> Result<WalkOperator, WalkError> {
    build_walk_operator_capped(tree, dim_cap())
}

pub fn build_walk_operator_capped(tree: &WalkTree, cap: usize) -> Result<WalkOperator, WalkError> {
    let t = tree.len();
    if t > cap {
        return Err(WalkError::DimensionCap { dim: t, cap });
    }
    let mut r_a = DMatrix::zeros(t, t);
    let mut r_b = DMatrix::zeros(t, t);
    r_b[(0, 0)] = 1.0;
    for x in 0..t {
        let d = build_diffusion(tree, x);
        if tree.depth[x].is_multiple_of(2) {
            d.write_into(&mut r_a);
        } else {
            d.write_into(&mut r_b);
        }
    }
    Ok(WalkOperator { dim: t, r_a, r_b })
}

/// One eigenvalue class of `R_B R_A` seen from the root.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpectralComponent {
    /// Eigenphase magnitude in `[0, pi]`; `+theta` and `-theta` are merged.
    pub theta: f64,
    pub root_weight: f64,
}

impl WalkOperator {
    pub fn product(&self) -> DMatrix<f64> {
        &self.r_b * &self.r_a
    }

    /// `max |M^T M - I|` over both reflections.
    pub fn unitarity_residual(&self) -> f64 {
        let id = DMatrix::<f64>::identity(self.dim, self.dim);
        let ra = (self.r_a.transpose() * &self.r_a - &id).abs().max();
        let rb = (self.r_b.transpose() * &self.r_b - &id).abs().max();
        ra.max(rb)
    }

    /// `max |R^2 - I|` over both reflections.
    pub fn involution_residual(&self) -> f64 {
        let id = DMatrix::<f64>::identity(self.dim, self.dim);
        let ra = (&self.r_a * &self.r_a - &id).abs().max();
        let rb = (&self.r_b * &self.r_b - &id).abs().max();
        ra.max(rb)
    }

    /// Spectrum of the real orthogonal product via `(U + U^T)/2`, whose eigenvalue `cos theta`
    /// eigenspace is the span of the `e^{+-i theta}` eigenspaces of `U`.
    pub fn spectrum(&self) -> Vec<SpectralComponent> {
        let u = self.product();
        let h = (&u + u.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        (0..self.dim)
            .map(|k| SpectralComponent {
                theta: eig.eigenvalues[k].clamp(-1.0, 1.0).acos(),
                root_weight: eig.eigenvectors[(0, k)].powi(2),
            })
            .collect()
    }

    /// Largest `|<r|v>|^2` over unit vectors `v` with `U v = v`, and whether that space is
    /// nontrivial.
    pub fn invariant_root_overlap(&self) -> (bool, f64) {
        let u = self.product();
        let h = (&u + u.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut exists = false;
        let mut overlap = 0.0;
        for k in 0..self.dim {
            if (eig.eigenvalues[k] - 1.0).abs() < 1e-9 {
                let col: DVector<f64> = eig.eigenvectors.column(k).into();
                if (&u * &col - &col).norm() < 1e-7 {
                    exists = true;
                    overlap += col[0] * col[0];
                }
            }
        }
        (exists, overlap)
    }
}

/// Root weight on eigenphases with `|theta| < precision` (radians).
pub fn phase_mass_at_zero(op: &WalkOperator, precision: f64) -> f64 {
    op.spectrum().iter().filter(|c| c.theta < precision).map(|c| c.root_weight).sum()
}

/// Ideal `t`-bit phase estimation reads 0 with probability `sin^2(2^t x/2) / (4^t sin^2(x/2))`.
pub fn qpe_zero_kernel(theta: f64, t: u32) -> f64 {
    let m = (1u64 << t) as f64;
    let s = (theta / 2.0).sin();
    if s.abs() < 1e-300 {
        return 1.0;
    }
    ((m * theta / 2.0).sin() / (m * s)).powi(2)
}

/// QPE zero-readout probability from the spectrum.
pub fn qpe_zero_probability_spectral(op: &WalkOperator, t: u32) -> f64 {
    op.spectrum().iter().map(|c| c.root_weight * qpe_zero_kernel(c.theta, t)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectionParams {
    pub gamma: f64,
    pub beta: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams { gamma: GAMMA, beta: BETA }
    }
}

impl DetectionParams {
    pub fn repetitions(&self, delta: f64) -> usize {
        (self.gamma * (1.0 / delta).log2()).ceil().max(1.0) as usize
    }

    pub fn precision(&self, size: usize, n: usize) -> f64 {
        self.beta / ((size * n) as f64).sqrt()
    }

    /// Bits so that the estimate resolution `2 pi / 2^t` is within the precision.
    pub fn qpe_bits(&self, size: usize, n: usize) -> u32 {
        (2.0 * std::f64::consts::PI / self.precision(size, n)).log2().ceil().max(1.0) as u32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DetectionVerdict {
    MarkedExists,
    NoMarked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectionResult {
    pub verdict: DetectionVerdict,
    pub acceptances: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub per_trial_phase_mass: Vec<f64>,
}

/// Zero-readout probability of one detection trial on `tree`.
pub fn trial_acceptance(tree: &WalkTree, params: &DetectionParams) -> f64 {
    let t = params.qpe_bits(tree.len(), tree.n);
    SparseWalk::new(tree).qpe_zero_probability(t).clamp(0.0, 1.0)
}

/// `K` phase estimations on `|r>`; marked iff at least `3K/8` read 0.
pub fn detect_marked<R: Rng + ?Sized>(
    tree: &WalkTree,
    delta: f64,
    params: &DetectionParams,
    rng: &mut R,
) -> DetectionResult {
    let p = trial_acceptance(tree, params);
    detect_with_acceptance(p, delta, params, rng)
}

/// Samples a detection from a precomputed per-trial acceptance probability.
pub fn detect_with_acceptance<R: Rng + ?Sized>(
    p: f64,
    delta: f64,
    params: &DetectionParams,
    rng: &mut R,
) -> DetectionResult {
    let k = params.repetitions(delta);
    let acceptances = (0..k).filter(|_| rng.gen_bool(p)).count();
    let verdict =
        if 8 * acceptances >= 3 * k { DetectionVerdict::MarkedExists } else { DetectionVerdict::NoMarked };
    DetectionResult { verdict, acceptances, k, per_trial_phase_mass: vec![p; k] }
}

/// Descends from the root along children whose subtree detection is positive.
pub fn find_marked<R: Rng + ?Sized>(
    tree: &WalkTree,
    delta: f64,
    params: &DetectionParams,
    max_attempts: usize,
    rng: &mut R,
) -> Result<Option<usize>, WalkError> {
    if detect_marked(tree, delta, params, rng).verdict == DetectionVerdict::NoMarked {
        return Ok(None);
    }
    'attempt: for _ in 0..max_attempts {
        let mut v = 0usize;
        loop {
            if tree.marked[v] {
                return Ok(Some(v));
            }
            if let Some(&c) = tree.children[v].iter().find(|&&c| tree.marked[c]) {
                return Ok(Some(c));
            }
            let mut next = None;
            for &c in &tree.children[v] {
                let sub = tree.subtree(c)?;
                if detect_marked(&sub, delta, params, rng).verdict == DetectionVerdict::MarkedExists {
                    next = Some(c);
                    break;
                }
            }
            match next {
                Some(c) => v = c,
                None => continue 'attempt,
            }
        }
    }
    Err(WalkError::Inconsistent(max_attempts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_psi_example() {
        let t = WalkTree::new(3, vec![vec![1, 2], vec![], vec![]], vec![false; 3]).unwrap();
        let d = build_diffusion(&t, 0);
        let s7 = 7f64.sqrt();
        let want = [1.0 / s7, 3f64.sqrt() / s7, 3f64.sqrt() / s7];
        for (a, b) in d.psi.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn leaf_and_marked_diffusions() {
        let t = WalkTree::new(2, vec![vec![1, 2], vec![], vec![]], vec![false, false, true]).unwrap();
        let leaf = build_diffusion(&t, 1);
        assert_eq!(leaf.support, vec![1]);
        assert_eq!(leaf.psi, vec![1.0]);
        assert!(build_diffusion(&t, 2).identity);
    }

    #[test]
    fn two_vertex_spectrum() {
        // Root with one unmarked leaf, n = 1: R_A reflects about (1,1)/sqrt2, R_B = diag(1,-1).
        let t = WalkTree::new(1, vec![vec![1], vec![]], vec![false, false]).unwrap();
        let op = build_walk_operator(&t).unwrap();
        assert!(op.unitarity_residual() < 1e-12);
        // U = diag(1,-1)[[0,-1],[-1,0]] = [[0,-1],[1,0]]: rotation by pi/2.
        for c in op.spectrum() {
            assert!((c.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        }
        assert!(!op.invariant_root_overlap().0);
        // Marked leaf: R_B is the identity and U = R_A has the invariant vector (1,-1)/sqrt2.
        let m = WalkTree::new(1, vec![vec![1], vec![]], vec![false, true]).unwrap();
        let op = build_walk_operator(&m).unwrap();
        let (exists, overlap) = op.invariant_root_overlap();
        assert!(exists);
        assert!(overlap >= 0.5 - 1e-12);
    }

    #[test]
    fn sparse_and_spectral_qpe_agree() {
        let t = WalkTree::new(
            3,
            vec![vec![1, 2], vec![3], vec![4, 5], vec![], vec![], vec![]],
            vec![false, false, false, false, true, false],
        )
        .unwrap();
        let op = build_walk_operator(&t).unwrap();
        let sw = SparseWalk::new(&t);
        for bits in 1..8 {
            let a = sw.qpe_zero_probability(bits);
            let b = qpe_zero_probability_spectral(&op, bits);
            assert!((a - b).abs() < 1e-9, "t={bits}: {a} vs {b}");
        }
    }
}
