//! Backtracking framework (chNo / ch1 / ch2 over a search predicate), the DPLL and dncPPSZ
//! engines, PPSZ-proper's randomized outer loop and exhaustive tree instrumentation.
//!
//! Children are always generated with branch value 0 before 1, so depth-first order and the
//! effective size `T'` are deterministic.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{restrict, s_implied_in, CnfFormula, PartialAssignment, Verdict};

/// Asymptotic guess fraction of PPSZ for 3-SAT.
pub const GAMMA_3: f64 = 0.38;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error("permutation is not a bijection on 1..={0}")]
    BadPermutation(usize),
    #[error("guess budget {budget} exceeds n = {n}")]
    BudgetTooLarge { budget: usize, n: usize },
    #[error("s must be at least 1")]
    ZeroS,
    #[error("node does not match formula dimensions")]
    DimensionMismatch,
    #[error("chNo reports {actual:?}, requested {requested}")]
    WrongArity { actual: ChildCount, requested: &'static str },
    #[error("search tree exceeds the node limit of {0}")]
    NodeLimit(usize),
    #[error("formula is unsatisfiable")]
    Unsatisfiable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EngineKind {
    Dpll,
    DncPpsz,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Rule {
    Unit,
    PureLiteral,
    SImplication,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EngineConfig {
    pub kind: EngineKind,
    pub reduction_rules: Vec<Rule>,
    pub s: usize,
    /// Branching order for dncPPSZ, a permutation of 1..=n. Ignored by DPLL.
    pub permutation: Vec<usize>,
    pub guess_budget: usize,
    pub rng_seed: u64,
}

impl EngineConfig {
    /// DPLL with unit and pure-literal rules.
    pub fn dpll(n: usize) -> Self {
        EngineConfig {
            kind: EngineKind::Dpll,
            reduction_rules: vec![Rule::Unit, Rule::PureLiteral],
            s: 1,
            permutation: (1..=n).collect(),
            guess_budget: n,
            rng_seed: 0,
        }
    }

    /// DPLL with an explicit rule list; an empty list gives plain backtracking.
    pub fn dpll_with(n: usize, rules: Vec<Rule>) -> Self {
        EngineConfig { reduction_rules: rules, ..Self::dpll(n) }
    }

    /// dncPPSZ with s-implication over `permutation`.
    pub fn dnc_ppsz(permutation: Vec<usize>, s: usize, guess_budget: usize) -> Self {
        EngineConfig {
            kind: EngineKind::DncPpsz,
            reduction_rules: vec![Rule::SImplication],
            s,
            permutation,
            guess_budget,
            rng_seed: 0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), SearchError> {
        if self.s == 0 {
            return Err(SearchError::ZeroS);
        }
        if self.kind == EngineKind::DncPpsz {
            let mut seen = vec![false; n + 1];
            if self.permutation.len() != n {
                return Err(SearchError::BadPermutation(n));
            }
            for &v in &self.permutation {
                if v == 0 || v > n || seen[v] {
                    return Err(SearchError::BadPermutation(n));
                }
                seen[v] = true;
            }
            if self.guess_budget > n {
                return Err(SearchError::BudgetTooLarge { budget: self.guess_budget, n });
            }
        }
        Ok(())
    }
}

/// A vertex of the search tree: a partial assignment plus the guesses spent reaching it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub assignment: PartialAssignment,
    pub depth: usize,
    pub guess_count: usize,
}

impl TreeNode {
    pub fn root(n: usize) -> Self {
        TreeNode { assignment: PartialAssignment::empty(n), depth: 0, guess_count: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LeafReason {
    Satisfied,
    Contradiction,
    OutOfGuesses,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ChildCount {
    ZeroLeaf(LeafReason),
    OneChild,
    TwoChildren,
}

/// What a node does: stop, extend by a forced value, or branch on a variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Step {
    Leaf(LeafReason),
    Forced { var: usize, value: bool },
    Branch { var: usize },
}

impl Step {
    pub fn child_count(self) -> ChildCount {
        match self {
            Step::Leaf(r) => ChildCount::ZeroLeaf(r),
            Step::Forced { .. } => ChildCount::OneChild,
            Step::Branch { .. } => ChildCount::TwoChildren,
        }
    }
}

fn forcing_on_var(f: &CnfFormula, a: &PartialAssignment, var: usize, config: &EngineConfig) -> Option<bool> {
    let r = restrict(f, a).expect("dimensions checked");
    for rule in &config.reduction_rules {
        let hit = match rule {
            Rule::Unit => {
                let pos = r.clauses().iter().any(|c| c.len() == 1 && c[0].var() == var && c[0].is_positive());
                let neg = r.clauses().iter().any(|c| c.len() == 1 && c[0].var() == var && !c[0].is_positive());
                if pos {
                    Some(true)
                } else if neg {
                    Some(false)
                } else {
                    None
                }
            }
            Rule::PureLiteral => {
                let pos = r.clauses().iter().flatten().any(|l| l.var() == var && l.is_positive());
                let neg = r.clauses().iter().flatten().any(|l| l.var() == var && !l.is_positive());
                if !(pos && neg) {
                    Some(!neg)
                } else {
                    None
                }
            }
            Rule::SImplication => s_implied_in(r.clauses(), var, config.s).forced_value(),
        };
        if hit.is_some() {
            return hit;
        }
    }
    None
}

/// Reference decision procedure working from the restriction.
pub fn decide(node: &TreeNode, f: &CnfFormula, config: &EngineConfig) -> Step {
    let a = &node.assignment;
    match f.predicate(a) {
        Verdict::Satisfied => return Step::Leaf(LeafReason::Satisfied),
        Verdict::Contradiction => return Step::Leaf(LeafReason::Contradiction),
        Verdict::Undetermined => {}
    }
    match config.kind {
        EngineKind::Dpll => {
            for rule in &config.reduction_rules {
                let hit = match rule {
                    Rule::Unit => crate::formula::unit_rule(f, a).expect("not contradicted"),
                    Rule::PureLiteral => crate::formula::pure_literal_rule(f, a).expect("not contradicted"),
                    Rule::SImplication => {
                        let r = restrict(f, a).expect("dimensions checked");
                        (1..=f.num_vars()).filter(|&v| a.get(v).is_none()).find_map(|v| {
                            s_implied_in(r.clauses(), v, config.s).forced_value().map(|b| (v, b))
                        })
                    }
                };
                if let Some((var, value)) = hit {
                    return Step::Forced { var, value };
                }
            }
            Step::Branch { var: a.first_unset().expect("undetermined node has a free variable") }
        }
        EngineKind::DncPpsz => {
            let var = *config
                .permutation
                .iter()
                .find(|&&v| a.get(v).is_none())
                .expect("undetermined node has a free variable");
            if let Some(value) = forcing_on_var(f, a, var, config) {
                return Step::Forced { var, value };
            }
            if node.guess_count >= config.guess_budget {
                return Step::Leaf(LeafReason::OutOfGuesses);
            }
            Step::Branch { var }
        }
    }
}

fn check_node(node: &TreeNode, f: &CnfFormula) -> Result<(), SearchError> {
    if node.assignment.len() != f.num_vars() {
        return Err(SearchError::DimensionMismatch);
    }
    Ok(())
}

pub fn ch_no(node: &TreeNode, f: &CnfFormula, config: &EngineConfig) -> Result<ChildCount, SearchError> {
    check_node(node, f)?;
    Ok(decide(node, f, config).child_count())
}

/// The single forced child.
pub fn ch1(node: &TreeNode, f: &CnfFormula, config: &EngineConfig) -> Result<TreeNode, SearchError> {
    check_node(node, f)?;
    match decide(node, f, config) {
        Step::Forced { var, value } => Ok(TreeNode {
            assignment: node.assignment.with(var, value),
            depth: node.depth + 1,
            guess_count: node.guess_count,
        }),
        other => Err(SearchError::WrongArity { actual: other.child_count(), requested: "oneChild" }),
    }
}

/// The branch-`b` child of a branching node.
pub fn ch2(node: &TreeNode, f: &CnfFormula, config: &EngineConfig, b: bool) -> Result<TreeNode, SearchError> {
    check_node(node, f)?;
    match decide(node, f, config) {
        Step::Branch { var } => Ok(TreeNode {
            assignment: node.assignment.with(var, b),
            depth: node.depth + 1,
            guess_count: node.guess_count + 1,
        }),
        other => Err(SearchError::WrongArity { actual: other.child_count(), requested: "twoChildren" }),
    }
}

/// Incremental DPLL bookkeeping: clause counters, unit and pure candidates under undo.
struct DpllState<'a> {
    f: &'a CnfFormula,
    rules: Vec<Rule>,
    occ: Vec<Vec<(usize, bool)>>,
    assign: Vec<Option<bool>>,
    sat_cnt: Vec<u32>,
    false_cnt: Vec<u32>,
    open_clauses: usize,
    empty_clauses: usize,
    unit_pos: Vec<u32>,
    unit_neg: Vec<u32>,
    unit_vars: BTreeSet<usize>,
    alive_pos: Vec<u32>,
    alive_neg: Vec<u32>,
    pure: BTreeSet<usize>,
    free: BTreeSet<usize>,
}

impl<'a> DpllState<'a> {
    fn new(f: &'a CnfFormula, rules: &[Rule]) -> Self {
        let n = f.num_vars();
        let mut occ = vec![Vec::new(); n + 1];
        let mut alive_pos = vec![0; n + 1];
        let mut alive_neg = vec![0; n + 1];
        let mut unit_pos = vec![0; n + 1];
        let mut unit_neg = vec![0; n + 1];
        let mut unit_vars = BTreeSet::new();
        for (ci, c) in f.clauses().iter().enumerate() {
            for l in c {
                occ[l.var()].push((ci, l.is_positive()));
                if l.is_positive() {
                    alive_pos[l.var()] += 1;
                } else {
                    alive_neg[l.var()] += 1;
                }
            }
            if c.len() == 1 {
                if c[0].is_positive() {
                    unit_pos[c[0].var()] += 1;
                } else {
                    unit_neg[c[0].var()] += 1;
                }
                unit_vars.insert(c[0].var());
            }
        }
        let pure = (1..=n).filter(|&v| alive_pos[v] == 0 || alive_neg[v] == 0).collect();
        DpllState {
            f,
            rules: rules.to_vec(),
            occ,
            assign: vec![None; n + 1],
            sat_cnt: vec![0; f.num_clauses()],
            false_cnt: vec![0; f.num_clauses()],
            open_clauses: f.num_clauses(),
            empty_clauses: 0,
            unit_pos,
            unit_neg,
            unit_vars,
            alive_pos,
            alive_neg,
            pure,
            free: (1..=n).collect(),
        }
    }

    fn refresh_pure(&mut self, v: usize) {
        if self.assign[v].is_none() && (self.alive_pos[v] == 0 || self.alive_neg[v] == 0) {
            self.pure.insert(v);
        } else {
            self.pure.remove(&v);
        }
    }

    fn add_unit(&mut self, v: usize, pos: bool, delta: i32) {
        let slot = if pos { &mut self.unit_pos[v] } else { &mut self.unit_neg[v] };
        *slot = (*slot as i32 + delta) as u32;
        if self.unit_pos[v] + self.unit_neg[v] > 0 {
            self.unit_vars.insert(v);
        } else {
            self.unit_vars.remove(&v);
        }
    }

    fn alive_delta(&mut self, ci: usize, delta: i32) {
        let f = self.f;
        for l in &f.clauses()[ci] {
            let v = l.var();
            let slot = if l.is_positive() { &mut self.alive_pos[v] } else { &mut self.alive_neg[v] };
            *slot = (*slot as i32 + delta) as u32;
            self.refresh_pure(v);
        }
    }

    fn other_open_literal(&self, ci: usize, skip: usize) -> (usize, bool) {
        self.f.clauses()[ci]
            .iter()
            .find(|l| l.var() != skip && self.assign[l.var()].is_none())
            .map(|l| (l.var(), l.is_positive()))
            .expect("unit clause has an open literal")
    }

    fn assign(&mut self, v: usize, value: bool) {
        self.assign[v] = Some(value);
        self.free.remove(&v);
        self.pure.remove(&v);
        for i in 0..self.occ[v].len() {
            let (ci, pos) = self.occ[v][i];
            let len = self.f.clauses()[ci].len() as u32;
            if pos == value {
                self.sat_cnt[ci] += 1;
                if self.sat_cnt[ci] == 1 {
                    if self.false_cnt[ci] == len - 1 {
                        self.add_unit(v, pos, -1);
                    }
                    self.open_clauses -= 1;
                    self.alive_delta(ci, -1);
                }
            } else {
                self.false_cnt[ci] += 1;
                if self.sat_cnt[ci] == 0 {
                    if self.false_cnt[ci] == len {
                        self.empty_clauses += 1;
                        self.add_unit(v, pos, -1);
                    } else if self.false_cnt[ci] == len - 1 {
                        let (u, upos) = self.other_open_literal(ci, v);
                        self.add_unit(u, upos, 1);
                    }
                }
            }
        }
        self.refresh_pure(v);
    }

    fn unassign(&mut self, v: usize) {
        let value = self.assign[v].expect("assigned");
        for i in (0..self.occ[v].len()).rev() {
            let (ci, pos) = self.occ[v][i];
            let len = self.f.clauses()[ci].len() as u32;
            if pos == value {
                self.sat_cnt[ci] -= 1;
                if self.sat_cnt[ci] == 0 {
                    self.alive_delta(ci, 1);
                    self.open_clauses += 1;
                    if self.false_cnt[ci] == len - 1 {
                        self.add_unit(v, pos, 1);
                    }
                }
            } else {
                if self.sat_cnt[ci] == 0 {
                    if self.false_cnt[ci] == len {
                        self.empty_clauses -= 1;
                        self.add_unit(v, pos, 1);
                    } else if self.false_cnt[ci] == len - 1 {
                        let (u, upos) = self.other_open_literal(ci, v);
                        self.add_unit(u, upos, -1);
                    }
                }
                self.false_cnt[ci] -= 1;
            }
        }
        self.assign[v] = None;
        self.free.insert(v);
        self.refresh_pure(v);
    }

    fn decide(&self) -> Step {
        if self.empty_clauses > 0 {
            return Step::Leaf(LeafReason::Contradiction);
        }
        if self.open_clauses == 0 {
            return Step::Leaf(LeafReason::Satisfied);
        }
        for rule in &self.rules {
            match rule {
                Rule::Unit => {
                    if let Some(&v) = self.unit_vars.iter().next() {
                        return Step::Forced { var: v, value: self.unit_pos[v] > 0 };
                    }
                }
                Rule::PureLiteral => {
                    if let Some(&v) = self.pure.iter().next() {
                        return Step::Forced { var: v, value: self.alive_neg[v] == 0 };
                    }
                }
                Rule::SImplication => unreachable!("s-implication uses the reference decider"),
            }
        }
        Step::Branch { var: *self.free.iter().next().expect("open clause has a free variable") }
    }

    fn assignment(&self) -> PartialAssignment {
        PartialAssignment::from_values(self.assign[1..].to_vec())
    }
}

/// Decision source for the depth-first walkers.
trait Walker {
    fn step(&mut self, guesses: usize) -> Step;
    fn push(&mut self, var: usize, value: bool);
    fn pop(&mut self, var: usize);
    fn assignment(&self) -> PartialAssignment;
}

impl Walker for DpllState<'_> {
    fn step(&mut self, _guesses: usize) -> Step {
        self.decide()
    }
    fn push(&mut self, var: usize, value: bool) {
        self.assign(var, value);
    }
    fn pop(&mut self, var: usize) {
        self.unassign(var);
    }
    fn assignment(&self) -> PartialAssignment {
        DpllState::assignment(self)
    }
}

struct ReferenceWalker<'a> {
    f: &'a CnfFormula,
    config: &'a EngineConfig,
    node: TreeNode,
}

impl Walker for ReferenceWalker<'_> {
    fn step(&mut self, guesses: usize) -> Step {
        self.node.guess_count = guesses;
        decide(&self.node, self.f, self.config)
    }
    fn push(&mut self, var: usize, value: bool) {
        self.node.assignment.set(var, value);
        self.node.depth += 1;
    }
    fn pop(&mut self, var: usize) {
        self.node.assignment.unset(var);
        self.node.depth -= 1;
    }
    fn assignment(&self) -> PartialAssignment {
        self.node.assignment.clone()
    }
}

fn walker<'a>(f: &'a CnfFormula, config: &'a EngineConfig) -> Box<dyn Walker + 'a> {
    let incremental = config.kind == EngineKind::Dpll && !config.reduction_rules.contains(&Rule::SImplication);
    if incremental {
        Box::new(DpllState::new(f, &config.reduction_rules))
    } else {
        Box::new(ReferenceWalker { f, config, node: TreeNode::root(f.num_vars()) })
    }
}

/// Kind of a stored tree vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NodeKind {
    Leaf(LeafReason),
    Forced,
    Branch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeRec {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub depth: usize,
    pub guesses: usize,
    pub kind: NodeKind,
    /// Partial assignment labelling the vertex; absent for synthetic trees.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label: Option<PartialAssignment>,
}

/// An explicit rooted tree in depth-first preorder (root at index 0, branch 0 first).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchTree {
    pub num_vars: usize,
    pub nodes: Vec<NodeRec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchTreeStats {
    pub size: u64,
    pub height: usize,
    pub max_branching: usize,
    pub leaf_count: u64,
    pub sat_leaves: u64,
    /// Vertices visited depth-first up to and including the first satisfying leaf.
    pub effective_size: u64,
}

impl SearchTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_marked(&self, v: usize) -> bool {
        self.nodes[v].kind == NodeKind::Leaf(LeafReason::Satisfied)
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.nodes[v].children.is_empty()
    }

    /// Builds from parent-first child lists; `marked` flags satisfying leaves.
    pub fn from_children(num_vars: usize, children: &[Vec<usize>], marked: &[bool]) -> Self {
        let mut order = Vec::with_capacity(children.len());
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            order.push(v);
            for &c in children[v].iter().rev() {
                stack.push(c);
            }
        }
        let mut new_id = vec![usize::MAX; children.len()];
        for (i, &v) in order.iter().enumerate() {
            new_id[v] = i;
        }
        let mut nodes: Vec<NodeRec> = Vec::with_capacity(order.len());
        for &v in &order {
            let kind = match children[v].len() {
                0 if marked[v] => NodeKind::Leaf(LeafReason::Satisfied),
                0 => NodeKind::Leaf(LeafReason::Contradiction),
                1 => NodeKind::Forced,
                _ => NodeKind::Branch,
            };
            nodes.push(NodeRec {
                parent: None,
                children: children[v].iter().map(|&c| new_id[c]).collect(),
                depth: 0,
                guesses: 0,
                kind,
                label: None,
            });
        }
        for i in 0..nodes.len() {
            for j in 0..nodes[i].children.len() {
                let c = nodes[i].children[j];
                nodes[c].parent = Some(i);
                nodes[c].depth = nodes[i].depth + 1;
                nodes[c].guesses = nodes[i].guesses + usize::from(nodes[i].kind == NodeKind::Branch);
            }
        }
        SearchTree { num_vars, nodes }
    }

    /// Complete binary tree of the given height; no leaf is marked.
    pub fn complete(height: usize) -> Self {
        let total = (1usize << (height + 1)) - 1;
        let children: Vec<Vec<usize>> =
            (0..total).map(|v| if 2 * v + 2 < total { vec![2 * v + 1, 2 * v + 2] } else { vec![] }).collect();
        Self::from_children(height, &children, &vec![false; total])
    }

    /// Comb of `n` levels: every spine vertex branches into a leaf and the next spine vertex.
    /// Has `2n - 1` vertices and `n - 1` branchings.
    pub fn comb(n: usize) -> Self {
        assert!(n >= 1);
        let total = 2 * n - 1;
        let mut children = vec![Vec::new(); total];
        for i in 0..n - 1 {
            let spine = 2 * i;
            children[spine] = vec![spine + 1, spine + 2];
        }
        Self::from_children(n, &children, &vec![false; total])
    }

    /// Subtree rooted at `v`, relabelled in preorder.
    pub fn subtree(&self, v: usize) -> SearchTree {
        let mut map = std::collections::HashMap::new();
        let mut nodes = Vec::new();
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            map.insert(u, nodes.len());
            nodes.push(u);
            for &c in self.nodes[u].children.iter().rev() {
                stack.push(c);
            }
        }
        let base_depth = self.nodes[v].depth;
        let base_guesses = self.nodes[v].guesses;
        let out = nodes
            .iter()
            .map(|&u| {
                let n = &self.nodes[u];
                NodeRec {
                    parent: if u == v { None } else { n.parent.map(|p| map[&p]) },
                    children: n.children.iter().map(|c| map[c]).collect(),
                    depth: n.depth - base_depth,
                    guesses: n.guesses - base_guesses,
                    kind: n.kind,
                    label: n.label.clone(),
                }
            })
            .collect();
        SearchTree { num_vars: self.num_vars - base_depth.min(self.num_vars), nodes: out }
    }

    pub fn stats(&self) -> SearchTreeStats {
        let mut height = 0;
        let mut br = 0;
        let mut leaves = 0u64;
        let mut sat = 0u64;
        let mut first_sat: Option<usize> = None;
        let mut branchings = vec![0usize; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                branchings[i] = branchings[p] + usize::from(self.nodes[p].kind == NodeKind::Branch);
            }
            if n.children.is_empty() {
                leaves += 1;
                height = height.max(n.depth);
                br = br.max(branchings[i]);
                if n.kind == NodeKind::Leaf(LeafReason::Satisfied) {
                    sat += 1;
                    first_sat.get_or_insert(i);
                }
            }
        }
        SearchTreeStats {
            size: self.nodes.len() as u64,
            height,
            max_branching: br,
            leaf_count: leaves,
            sat_leaves: sat,
            effective_size: first_sat.map_or(self.nodes.len() as u64, |i| i as u64 + 1),
        }
    }
}

/// Default cap on explicitly stored trees.
pub const DEFAULT_NODE_LIMIT: usize = 1 << 22;

/// Builds the full search tree of `f` under `config`.
pub fn build_tree(f: &CnfFormula, config: &EngineConfig, node_limit: usize) -> Result<SearchTree, SearchError> {
    config.validate(f.num_vars())?;
    let mut w = walker(f, config);
    let mut nodes: Vec<NodeRec> = Vec::new();
    grow(w.as_mut(), &mut nodes, None, 0, 0, node_limit)?;
    Ok(SearchTree { num_vars: f.num_vars(), nodes })
}

fn grow(
    w: &mut dyn Walker,
    nodes: &mut Vec<NodeRec>,
    parent: Option<usize>,
    depth: usize,
    guesses: usize,
    limit: usize,
) -> Result<usize, SearchError> {
    if nodes.len() >= limit {
        return Err(SearchError::NodeLimit(limit));
    }
    let id = nodes.len();
    let step = w.step(guesses);
    let kind = match step {
        Step::Leaf(r) => NodeKind::Leaf(r),
        Step::Forced { .. } => NodeKind::Forced,
        Step::Branch { .. } => NodeKind::Branch,
    };
    nodes.push(NodeRec { parent, children: Vec::new(), depth, guesses, kind, label: Some(w.assignment()) });
    match step {
        Step::Leaf(_) => {}
        Step::Forced { var, value } => {
            w.push(var, value);
            let c = grow(w, nodes, Some(id), depth + 1, guesses, limit)?;
            w.pop(var);
            nodes[id].children.push(c);
        }
        Step::Branch { var } => {
            for b in [false, true] {
                w.push(var, b);
                let c = grow(w, nodes, Some(id), depth + 1, guesses + 1, limit)?;
                w.pop(var);
                nodes[id].children.push(c);
            }
        }
    }
    Ok(id)
}

/// Exhaustive statistics of the search tree.
pub fn tree_stats(f: &CnfFormula, config: &EngineConfig) -> Result<SearchTreeStats, SearchError> {
    config.validate(f.num_vars())?;
    let mut w = walker(f, config);
    let mut acc = StatsAcc::default();
    count(w.as_mut(), 0, 0, 0, &mut acc);
    Ok(SearchTreeStats {
        size: acc.size,
        height: acc.height,
        max_branching: acc.br,
        leaf_count: acc.leaves,
        sat_leaves: acc.sat,
        effective_size: acc.first_sat.unwrap_or(acc.size),
    })
}

#[derive(Default)]
struct StatsAcc {
    size: u64,
    height: usize,
    br: usize,
    leaves: u64,
    sat: u64,
    first_sat: Option<u64>,
}

fn count(w: &mut dyn Walker, depth: usize, guesses: usize, branchings: usize, acc: &mut StatsAcc) {
    acc.size += 1;
    match w.step(guesses) {
        Step::Leaf(r) => {
            acc.leaves += 1;
            acc.height = acc.height.max(depth);
            acc.br = acc.br.max(branchings);
            if r == LeafReason::Satisfied {
                acc.sat += 1;
                if acc.first_sat.is_none() {
                    acc.first_sat = Some(acc.size);
                }
            }
        }
        Step::Forced { var, value } => {
            w.push(var, value);
            count(w, depth + 1, guesses, branchings, acc);
            w.pop(var);
        }
        Step::Branch { var } => {
            for b in [false, true] {
                w.push(var, b);
                count(w, depth + 1, guesses + 1, branchings + 1, acc);
                w.pop(var);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "verdict", content = "assignment")]
pub enum Outcome {
    Sat(Vec<bool>),
    Unsat,
    /// dncPPSZ found nothing within its guess budget.
    NotFound,
}

impl Outcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, Outcome::Sat(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Sat(_) => "sat",
            Outcome::Unsat => "unsat",
            Outcome::NotFound => "notFound",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolveResult {
    pub outcome: Outcome,
    /// Vertices visited before stopping; equals `T'`.
    pub visited: u64,
}

fn first_solution(w: &mut dyn Walker, guesses: usize, visited: &mut u64) -> Option<PartialAssignment> {
    *visited += 1;
    match w.step(guesses) {
        Step::Leaf(LeafReason::Satisfied) => Some(w.assignment()),
        Step::Leaf(_) => None,
        Step::Forced { var, value } => {
            w.push(var, value);
            let r = first_solution(w, guesses, visited);
            w.pop(var);
            r
        }
        Step::Branch { var } => {
            for b in [false, true] {
                w.push(var, b);
                let r = first_solution(w, guesses + 1, visited);
                w.pop(var);
                if r.is_some() {
                    return r;
                }
            }
            None
        }
    }
}

fn solve(f: &CnfFormula, config: &EngineConfig, miss: Outcome) -> Result<SolveResult, SearchError> {
    config.validate(f.num_vars())?;
    let mut w = walker(f, config);
    let mut visited = 0;
    let outcome = match first_solution(w.as_mut(), 0, &mut visited) {
        Some(a) => Outcome::Sat(a.completed(true)),
        None => miss,
    };
    Ok(SolveResult { outcome, visited })
}

/// Depth-first DPLL with early exit on the first satisfying leaf.
pub fn dpll_solve(f: &CnfFormula, config: &EngineConfig) -> Result<SolveResult, SearchError> {
    let config = EngineConfig { kind: EngineKind::Dpll, ..config.clone() };
    solve(f, &config, Outcome::Unsat)
}

/// dncPPSZ over `config.permutation` with the guess budget; a miss is one-sided.
pub fn dnc_ppsz_solve(f: &CnfFormula, config: &EngineConfig) -> Result<SolveResult, SearchError> {
    let config = EngineConfig { kind: EngineKind::DncPpsz, ..config.clone() };
    solve(f, &config, Outcome::NotFound)
}

/// Guess fraction used to truncate PPSZ trees for clause width `k`. Only the 3-SAT value is
/// known; wider formulas are not truncated.
pub fn gamma_k(k: usize) -> f64 {
    if k <= 3 {
        GAMMA_3
    } else {
        1.0
    }
}

pub fn ppsz_budget(n: usize, k: usize, epsilon: f64) -> usize {
    (((gamma_k(k) + epsilon) * n as f64).ceil() as usize).min(n)
}

pub fn random_permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (1..=n).collect();
    p.shuffle(rng);
    p
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PpszResult {
    pub outcome: Outcome,
    pub rounds: usize,
    pub budget: usize,
    pub visited: u64,
}

/// Repeats dncPPSZ over fresh ChaCha8 permutations seeded by `seed`.
pub fn ppsz_proper(
    f: &CnfFormula,
    s: usize,
    epsilon: f64,
    max_rounds: usize,
    seed: u64,
) -> Result<PpszResult, SearchError> {
    assert!(max_rounds >= 1);
    let n = f.num_vars();
    let budget = ppsz_budget(n, f.max_clause_size(), epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut visited = 0;
    for round in 1..=max_rounds {
        let config = EngineConfig::dnc_ppsz(random_permutation(n, &mut rng), s, budget);
        let r = dnc_ppsz_solve(f, &config)?;
        visited += r.visited;
        if r.outcome.is_sat() {
            return Ok(PpszResult { outcome: r.outcome, rounds: round, budget, visited });
        }
    }
    Ok(PpszResult { outcome: Outcome::NotFound, rounds: max_rounds, budget, visited })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GuessBoundReport {
    pub min_guesses: Vec<usize>,
    pub threshold: usize,
    pub fraction_exceeding: f64,
}

/// Minimum guesses on any root-to-solution path of the untruncated dncPPSZ tree.
pub fn min_guesses(f: &CnfFormula, permutation: &[usize], s: usize) -> Result<Option<usize>, SearchError> {
    let config = EngineConfig::dnc_ppsz(permutation.to_vec(), s, f.num_vars());
    config.validate(f.num_vars())?;
    let mut w = walker(f, &config);
    Ok(min_guess_rec(w.as_mut(), 0))
}

fn min_guess_rec(w: &mut dyn Walker, guesses: usize) -> Option<usize> {
    match w.step(guesses) {
        Step::Leaf(LeafReason::Satisfied) => Some(guesses),
        Step::Leaf(_) => None,
        Step::Forced { var, value } => {
            w.push(var, value);
            let r = min_guess_rec(w, guesses);
            w.pop(var);
            r
        }
        Step::Branch { var } => {
            let mut best = None;
            for b in [false, true] {
                w.push(var, b);
                let r = min_guess_rec(w, guesses + 1);
                w.pop(var);
                best = match (best, r) {
                    (Some(x), Some(y)) => Some(usize::min(x, y)),
                    (x, y) => x.or(y),
                };
            }
            best
        }
    }
}

/// Samples permutations and records the fewest guesses each needs to reach a solution.
pub fn estimate_permutation_guess_bound(
    f: &CnfFormula,
    s: usize,
    samples: usize,
    threshold: usize,
    seed: u64,
) -> Result<GuessBoundReport, SearchError> {
    if !dpll_solve(f, &EngineConfig::dpll(f.num_vars()))?.outcome.is_sat() {
        return Err(SearchError::Unsatisfiable);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min = Vec::with_capacity(samples);
    for _ in 0..samples {
        let p = random_permutation(f.num_vars(), &mut rng);
        min.push(min_guesses(f, &p, s)?.expect("satisfiable formula has a solution path"));
    }
    let exceeding = min.iter().filter(|&&g| g > threshold).count();
    let fraction_exceeding = if samples == 0 { 0.0 } else { exceeding as f64 / samples as f64 };
    Ok(GuessBoundReport { min_guesses: min, threshold, fraction_exceeding })
}

/// Size bound for a tree with at most `g` branchings per path over `n` variables:
/// at most `2^g` leaves, each ending a path of at most `n + 1` vertices.
pub fn truncated_size_bound(n: usize, g: usize) -> u128 {
    (n as u128 + 1) << g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(n: usize, cs: &[&[i64]]) -> CnfFormula {
        let v: Vec<Vec<i64>> = cs.iter().map(|c| c.to_vec()).collect();
        CnfFormula::from_dimacs_clauses(n, &v).unwrap()
    }

    #[test]
    fn ch_no_examples() {
        let g = f(1, &[&[1]]);
        let unit = EngineConfig::dpll_with(1, vec![Rule::Unit]);
        assert_eq!(ch_no(&TreeNode::root(1), &g, &unit).unwrap(), ChildCount::OneChild);
        let h = f(2, &[&[1, 2]]);
        let unit2 = EngineConfig::dpll_with(2, vec![Rule::Unit]);
        assert_eq!(ch_no(&TreeNode::root(2), &h, &unit2).unwrap(), ChildCount::TwoChildren);
        let ppsz = EngineConfig::dnc_ppsz(vec![1, 2], 1, 0);
        assert_eq!(
            ch_no(&TreeNode::root(2), &h, &ppsz).unwrap(),
            ChildCount::ZeroLeaf(LeafReason::OutOfGuesses)
        );
    }

    #[test]
    fn ch1_ch2_examples() {
        let g = f(1, &[&[1]]);
        let unit = EngineConfig::dpll_with(1, vec![Rule::Unit]);
        assert_eq!(ch1(&TreeNode::root(1), &g, &unit).unwrap().assignment.get(1), Some(true));
        let h = f(2, &[&[1, 2]]);
        let unit2 = EngineConfig::dpll_with(2, vec![Rule::Unit]);
        let c = ch2(&TreeNode::root(2), &h, &unit2, false).unwrap();
        assert_eq!(c.assignment.get(1), Some(false));
        assert_eq!(c.guess_count, 1);
        assert!(ch1(&TreeNode::root(2), &h, &unit2).is_err());
        let k = f(2, &[&[-2], &[1, 2]]);
        let child = ch1(&TreeNode::root(2), &k, &unit2).unwrap();
        assert_eq!(child.assignment.get(2), Some(false));
        let grandchild = ch1(&child, &k, &unit2).unwrap();
        assert_eq!(grandchild.assignment.get(1), Some(true));
    }

    #[test]
    fn dpll_examples() {
        let r = dpll_solve(&f(1, &[&[1], &[-1]]), &EngineConfig::dpll(1)).unwrap();
        assert_eq!(r.outcome, Outcome::Unsat);
        assert!(r.visited <= 3);
        let r = dpll_solve(&f(2, &[&[1, 2], &[-1, 2]]), &EngineConfig::dpll(2)).unwrap();
        match r.outcome {
            Outcome::Sat(a) => assert!(a[1]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dnc_examples() {
        let r = dnc_ppsz_solve(&f(1, &[&[1]]), &EngineConfig::dnc_ppsz(vec![1], 1, 0)).unwrap();
        assert!(r.outcome.is_sat());
        let r = dnc_ppsz_solve(&f(2, &[&[1, 2]]), &EngineConfig::dnc_ppsz(vec![2, 1], 1, 0)).unwrap();
        assert_eq!(r.outcome, Outcome::NotFound);
    }

    #[test]
    fn complete_and_comb_shapes() {
        let all: Vec<Vec<i64>> = (0..16)
            .map(|m| (1..=4).map(|v| if m >> (v - 1) & 1 == 1 { v } else { -v }).collect())
            .collect();
        let g = CnfFormula::from_dimacs_clauses(4, &all).unwrap();
        let s = tree_stats(&g, &EngineConfig::dpll_with(4, vec![])).unwrap();
        assert_eq!((s.size, s.max_branching, s.leaf_count), (31, 4, 16));
        let comb = SearchTree::comb(6).stats();
        assert_eq!((comb.size, comb.max_branching), (11, 5));
    }

    #[test]
    fn incremental_state_matches_reference() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let g = crate::formula::random_kcnf(7, 20, 3, &mut rng);
            for rules in [vec![Rule::Unit, Rule::PureLiteral], vec![Rule::PureLiteral], vec![]] {
                let cfg = EngineConfig::dpll_with(7, rules);
                let fast = build_tree(&g, &cfg, 1 << 20).unwrap();
                let mut slow_w = ReferenceWalker { f: &g, config: &cfg, node: TreeNode::root(7) };
                let mut slow = Vec::new();
                grow(&mut slow_w, &mut slow, None, 0, 0, 1 << 20).unwrap();
                assert_eq!(fast.nodes, slow);
            }
        }
    }
}
