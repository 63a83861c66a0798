//! Lattice SAT: clauses living on unit squares of a square grid whose corners are the
//! variables. Includes the reduction from 3-CNF, the CNF view in row-major order, an
//! equisatisfiability checker and a seeded instance generator.
//!
//! The reduction lays every variable out as a horizontal copy chain (its trunk), drops one
//! vertical copy chain per clause literal down to a clause row, and closes each clause on
//! three corners of one plaquette. A drop that crosses another trunk takes one diagonal of a
//! plaquette while the trunk dips through the other diagonal, so wires never share a corner.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{CnfFormula, FormulaError, Literal};
use crate::treesearch::{dpll_solve, EngineConfig, Outcome, SearchError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("invalid lattice instance: {0:?}")]
    Invalid(Vec<String>),
    #[error("clause {0} has more than 3 literals")]
    NotThreeCnf(usize),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("{0} variables after compaction exceed the solver cap")]
    ResourceCap(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Corner {
    NW,
    NE,
    SW,
    SE,
}

impl Corner {
    pub const ALL: [Corner; 4] = [Corner::NW, Corner::NE, Corner::SW, Corner::SE];

    /// Row and column offset from the plaquette's top-left corner.
    pub fn offset(self) -> (usize, usize) {
        match self {
            Corner::NW => (0, 0),
            Corner::NE => (0, 1),
            Corner::SW => (1, 0),
            Corner::SE => (1, 1),
        }
    }

    fn from_offset(dr: usize, dc: usize) -> Corner {
        match (dr, dc) {
            (0, 0) => Corner::NW,
            (0, 1) => Corner::NE,
            (1, 0) => Corner::SW,
            _ => Corner::SE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlaquetteConstraint {
    pub row: usize,
    pub col: usize,
    /// Corners with literal polarity (`true` = positive).
    pub corners: Vec<(Corner, bool)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LatticeInstance {
    pub grid_side: usize,
    pub constraints: Vec<PlaquetteConstraint>,
}

impl LatticeInstance {
    /// One variable per grid point.
    pub fn num_vars(&self) -> usize {
        self.grid_side * self.grid_side
    }

    /// Row-major 1-based variable of grid point `(row, col)`.
    pub fn var_of(&self, row: usize, col: usize) -> usize {
        row * self.grid_side + col + 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LatticeValidation {
    pub ok: bool,
    pub violations: Vec<String>,
}

pub fn validate_lattice(inst: &LatticeInstance) -> LatticeValidation {
    let mut v = Vec::new();
    let side = inst.grid_side;
    if side < 2 {
        v.push(format!("grid side {side} has no plaquette"));
    }
    let n = inst.num_vars();
    if (side as f64) > (n as f64).sqrt() + 1e-9 {
        v.push(format!("grid side {side} exceeds sqrt of {n} variables"));
    }
    for (i, c) in inst.constraints.iter().enumerate() {
        if c.row + 1 >= side || c.col + 1 >= side {
            v.push(format!("constraint {i} plaquette ({}, {}) off the grid", c.row, c.col));
        }
        if !(2..=3).contains(&c.corners.len()) {
            v.push(format!("constraint {i} has {} corners", c.corners.len()));
        }
        let mut seen: Vec<Corner> = c.corners.iter().map(|x| x.0).collect();
        seen.sort();
        seen.dedup();
        if seen.len() != c.corners.len() {
            v.push(format!("constraint {i} repeats a corner"));
        }
    }
    if !inst.constraints.iter().any(|c| c.corners.len() == 3) {
        v.push("no plaquette uses 3 corners".into());
    }
    LatticeValidation { ok: v.is_empty(), violations: v }
}

/// One clause per constraint, variables in row-major order.
pub fn lattice_to_cnf(inst: &LatticeInstance) -> Result<CnfFormula, LatticeError> {
    let val = validate_lattice(inst);
    if !val.ok {
        return Err(LatticeError::Invalid(val.violations));
    }
    let clauses = inst
        .constraints
        .iter()
        .map(|c| {
            c.corners
                .iter()
                .map(|&(corner, pos)| {
                    let (dr, dc) = corner.offset();
                    Literal::new(inst.var_of(c.row + dr, c.col + dc), pos)
                })
                .collect()
        })
        .collect();
    Ok(CnfFormula::new(inst.num_vars(), clauses)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "family")]
pub enum WireFamily {
    /// Horizontal copy chain of a (possibly slack) variable.
    Trunk { var: usize },
    /// Vertical copy chain from a trunk to literal `position` of clause `clause`.
    Drop { clause: usize, position: usize, var: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Wire {
    pub family: WireFamily,
    /// Grid points in path order; consecutive points share a plaquette.
    pub cells: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReductionArtifacts {
    /// Variables after padding; slack variables follow the originals.
    pub num_vars: usize,
    pub num_original_vars: usize,
    /// The 3-literal clauses actually laid out.
    pub padded_clauses: Vec<Vec<Literal>>,
    /// `(variable, clause index)` to the trunk point the clause's copy branches from.
    pub placement: Vec<((usize, usize), (usize, usize))>,
    pub wires: Vec<Wire>,
    /// Plaquettes where a drop crossed a trunk along the opposite diagonal.
    pub crossings: Vec<(usize, usize)>,
}

/// Pads 1- and 2-literal clauses to 3 literals with fresh slack variables, each slack both
/// ways so the conjunction is equivalent to the original clause.
pub fn pad_to_three(f: &CnfFormula) -> Result<(usize, Vec<Vec<Literal>>), LatticeError> {
    let mut next = f.num_vars();
    let mut out = Vec::new();
    for (i, c) in f.clauses().iter().enumerate() {
        if c.len() > 3 {
            return Err(LatticeError::NotThreeCnf(i));
        }
        let mut layer = vec![c.clone()];
        while layer[0].len() < 3 {
            next += 1;
            layer = layer
                .into_iter()
                .flat_map(|c| {
                    let mut a = c.clone();
                    a.push(Literal::pos(next));
                    let mut b = c;
                    b.push(Literal::neg(next));
                    [a, b]
                })
                .collect();
        }
        out.extend(layer);
    }
    Ok((next, out))
}

struct Layout {
    side: usize,
    owner: HashMap<(usize, usize), usize>,
    wires: Vec<Wire>,
    constraints: Vec<PlaquetteConstraint>,
}

impl Layout {
    fn add_wire(&mut self, family: WireFamily, cells: Vec<(usize, usize)>) {
        let id = self.wires.len();
        for &c in &cells {
            let prev = self.owner.insert(c, id);
            debug_assert!(prev.is_none(), "grid point {c:?} claimed twice");
        }
        for w in cells.windows(2) {
            self.link(w[0], w[1]);
        }
        self.wires.push(Wire { family, cells });
    }

    fn plaquette_of(&self, cells: &[(usize, usize)]) -> (usize, usize) {
        let r = cells.iter().map(|c| c.0).min().unwrap().min(self.side - 2);
        let c = cells.iter().map(|c| c.1).min().unwrap().min(self.side - 2);
        (r, c)
    }

    fn constraint(&mut self, lits: &[((usize, usize), bool)]) {
        let cells: Vec<(usize, usize)> = lits.iter().map(|x| x.0).collect();
        let (r, c) = self.plaquette_of(&cells);
        let corners = lits.iter().map(|&((a, b), pos)| (Corner::from_offset(a - r, b - c), pos)).collect();
        self.constraints.push(PlaquetteConstraint { row: r, col: c, corners });
    }

    /// `a = b` as `(a or !b)` and `(!a or b)`.
    fn link(&mut self, a: (usize, usize), b: (usize, usize)) {
        debug_assert!(a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1 && a != b);
        self.constraint(&[(a, true), (b, false)]);
        self.constraint(&[(a, false), (b, true)]);
    }
}

const TRUNK_PITCH: usize = 3;
const CLAUSE_PITCH: usize = 6;

fn trunk_row(v: usize) -> usize {
    TRUNK_PITCH * (v - 1)
}

fn literal_col(clause: usize, position: usize) -> usize {
    CLAUSE_PITCH * clause + 1 + 2 * position
}

/// Reduces a CNF with clauses of at most 3 literals to a lattice instance.
pub fn reduce_3sat_to_lattice(f: &CnfFormula) -> Result<(LatticeInstance, ReductionArtifacts), LatticeError> {
    let (num_vars, mut clauses) = pad_to_three(f)?;
    if clauses.is_empty() {
        // A satisfiable stand-in so the instance keeps one 3-corner plaquette.
        let inst = LatticeInstance {
            grid_side: 2,
            constraints: vec![PlaquetteConstraint {
                row: 0,
                col: 0,
                corners: vec![(Corner::NW, true), (Corner::NE, true), (Corner::SE, true)],
            }],
        };
        let art = ReductionArtifacts {
            num_vars,
            num_original_vars: f.num_vars(),
            padded_clauses: vec![],
            placement: vec![],
            wires: vec![],
            crossings: vec![],
        };
        return Ok((inst, art));
    }
    for c in clauses.iter_mut() {
        c.sort();
    }
    let l = clauses.len();
    let side = (TRUNK_PITCH * num_vars + 3).max(CLAUSE_PITCH * l + 1);
    let bottom = TRUNK_PITCH * num_vars;
    let mut lay = Layout { side, owner: HashMap::new(), wires: Vec::new(), constraints: Vec::new() };

    let mut taps: Vec<Vec<usize>> = vec![Vec::new(); num_vars + 1];
    let mut drop_var: HashMap<usize, usize> = HashMap::new();
    for (ci, c) in clauses.iter().enumerate() {
        for (j, lit) in c.iter().enumerate() {
            taps[lit.var()].push(literal_col(ci, j));
            drop_var.insert(literal_col(ci, j), lit.var());
        }
    }
    let span = |v: usize| -> Option<(usize, usize)> {
        let t = &taps[v];
        Some((*t.iter().min()?, *t.iter().max()?))
    };
    // Drops of earlier variables pass every later trunk; inside a span they must cross it.
    let crosses = |v: usize, col: usize| -> bool {
        matches!(drop_var.get(&col), Some(&u) if u < v)
            && matches!(span(v), Some((lo, hi)) if lo < col && col < hi)
    };

    let mut crossings = Vec::new();
    let mut placement = Vec::new();
    for v in 1..=num_vars {
        let Some((lo, hi)) = span(v) else { continue };
        let r = trunk_row(v);
        let cells = (lo..=hi).map(|c| if crosses(v, c) { (r + 1, c) } else { (r, c) }).collect();
        lay.add_wire(WireFamily::Trunk { var: v }, cells);
    }
    for (ci, c) in clauses.iter().enumerate() {
        let mut ends = Vec::with_capacity(3);
        for (j, lit) in c.iter().enumerate() {
            let v = lit.var();
            let col = literal_col(ci, j);
            let r0 = trunk_row(v);
            placement.push(((v, ci), (r0, col)));
            let mut cells = vec![(r0 + 1, col), (r0 + 2, col)];
            for u in v + 1..=num_vars {
                let r = trunk_row(u);
                if crosses(u, col) {
                    crossings.push((r, col - 1));
                    cells.extend([(r, col), (r + 1, col - 1), (r + 2, col)]);
                } else {
                    cells.extend([(r, col), (r + 1, col), (r + 2, col)]);
                }
            }
            // Gather the three drops onto plaquette (bottom + 1, first column).
            let b = literal_col(ci, 0);
            match j {
                0 => cells.extend([(bottom, col), (bottom + 1, b)]),
                1 => cells.extend([(bottom, col), (bottom + 1, b + 1)]),
                _ => cells.extend([(bottom, col), (bottom + 1, col - 1), (bottom + 2, b + 2), (bottom + 2, b + 1)]),
            }
            ends.push((*cells.last().unwrap(), lit.is_positive()));
            let mut full = vec![(r0, col)];
            full.extend(cells);
            // The tap point belongs to the trunk; only link it here.
            let family = WireFamily::Drop { clause: ci, position: j, var: v };
            let id = lay.wires.len();
            for &p in &full[1..] {
                let prev = lay.owner.insert(p, id);
                debug_assert!(prev.is_none(), "grid point {p:?} claimed twice");
            }
            for w in full.windows(2) {
                lay.link(w[0], w[1]);
            }
            lay.wires.push(Wire { family, cells: full });
        }
        lay.constraint(&ends);
    }
    let inst = LatticeInstance { grid_side: side, constraints: lay.constraints };
    let art = ReductionArtifacts {
        num_vars,
        num_original_vars: f.num_vars(),
        padded_clauses: clauses,
        placement,
        wires: lay.wires,
        crossings,
    };
    Ok((inst, art))
}

/// Union-find with parity over literals: `parity[v]` relates `v` to its parent.
struct ParityUnion {
    parent: Vec<usize>,
    parity: Vec<bool>,
}

impl ParityUnion {
    fn new(n: usize) -> Self {
        ParityUnion { parent: (0..=n).collect(), parity: vec![false; n + 1] }
    }

    fn find(&mut self, v: usize) -> (usize, bool) {
        let p = self.parent[v];
        if p == v {
            return (v, false);
        }
        let (root, par) = self.find(p);
        self.parent[v] = root;
        self.parity[v] ^= par;
        (root, self.parity[v])
    }

    /// Records `a xor b = odd`; returns false on a parity conflict.
    fn union(&mut self, a: usize, b: usize, odd: bool) -> bool {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            return pa ^ pb == odd;
        }
        self.parent[ra] = rb;
        self.parity[ra] = pa ^ pb ^ odd;
        true
    }
}

/// The formula after merging variables tied by two-clause equivalences, with the map that
/// expands a model back. `None` when the equivalences alone are contradictory.
#[derive(Clone, Debug)]
pub struct Compacted {
    pub formula: Option<CnfFormula>,
    /// Per original variable: compact variable (0 = unconstrained) and parity.
    pub map: Vec<(usize, bool)>,
}

/// Contracts every `a = b` or `a = !b` pair implied by two binary clauses, then renumbers.
/// Equisatisfiable with the input, and much smaller for wire-heavy lattice formulas.
pub fn compact_equivalences(f: &CnfFormula) -> Compacted {
    let n = f.num_vars();
    let mut uf = ParityUnion::new(n);
    let binary: std::collections::HashSet<(Literal, Literal)> =
        f.clauses().iter().filter(|c| c.len() == 2).map(|c| (c[0], c[1])).collect();
    let mut consistent = true;
    for &(a, b) in &binary {
        // (a or b) with (!a or !b) means a = !b.
        let (na, nb) = (a.negate(), b.negate());
        let mirrored = binary.contains(&(na, nb)) || binary.contains(&(nb, na));
        if mirrored {
            // a or b, !a or !b: exactly one literal true.
            let odd = a.is_positive() == b.is_positive();
            consistent &= uf.union(a.var(), b.var(), odd);
        }
    }
    let mut index = vec![0usize; n + 1];
    let mut next = 0;
    let mut map = vec![(0usize, false); n + 1];
    let used: std::collections::HashSet<usize> = f.clauses().iter().flatten().map(|l| l.var()).collect();
    for v in 1..=n {
        if !used.contains(&v) {
            continue;
        }
        let (r, p) = uf.find(v);
        if index[r] == 0 {
            next += 1;
            index[r] = next;
        }
        map[v] = (index[r], p);
    }
    if !consistent {
        return Compacted { formula: None, map };
    }
    let clauses: Vec<Vec<Literal>> = f
        .clauses()
        .iter()
        .map(|c| {
            c.iter()
                .map(|l| {
                    let (v, p) = map[l.var()];
                    Literal::new(v, l.is_positive() ^ p)
                })
                .collect()
        })
        .collect();
    let formula = CnfFormula::new(next.max(1), clauses).ok();
    Compacted { formula, map }
}

impl Compacted {
    /// Expands a compact model to the original variables; unconstrained ones get false.
    pub fn expand(&self, model: &[bool]) -> Vec<bool> {
        self.map[1..].iter().map(|&(v, p)| if v == 0 { false } else { model[v - 1] ^ p }).collect()
    }
}

/// Variable cap for the compacted lattice formula handed to the solver.
pub const EQUISAT_VAR_CAP: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EquisatReport {
    pub agree: bool,
    pub source_sat: bool,
    pub lattice_sat: bool,
    pub lattice_vars: usize,
    pub compacted_vars: usize,
    /// Model of the full lattice formula when satisfiable, checked against every clause.
    #[serde(skip)]
    pub lattice_model: Option<Vec<bool>>,
}

fn solve_sat(f: &CnfFormula) -> Result<Option<Vec<bool>>, LatticeError> {
    Ok(match dpll_solve(f, &EngineConfig::dpll(f.num_vars()))?.outcome {
        Outcome::Sat(m) => Some(m),
        _ => None,
    })
}

/// Solves both sides with DPLL and compares verdicts. The lattice side is solved after
/// equivalence compaction; its model is expanded and re-checked on the full formula.
pub fn equisat_check(f: &CnfFormula, inst: &LatticeInstance) -> Result<EquisatReport, LatticeError> {
    let lf = lattice_to_cnf(inst)?;
    let source_sat = solve_sat(f)?.is_some();
    let comp = compact_equivalences(&lf);
    let compacted_vars = comp.formula.as_ref().map_or(0, |g| g.num_vars());
    if compacted_vars > EQUISAT_VAR_CAP {
        return Err(LatticeError::ResourceCap(compacted_vars));
    }
    let lattice_model = match &comp.formula {
        None => None,
        Some(g) => solve_sat(g)?.map(|m| comp.expand(&m)),
    };
    if let Some(m) = &lattice_model {
        assert!(lf.eval_full(m), "expanded model must satisfy the lattice formula");
    }
    let lattice_sat = lattice_model.is_some();
    Ok(EquisatReport {
        agree: source_sat == lattice_sat,
        source_sat,
        lattice_sat,
        lattice_vars: lf.num_vars(),
        compacted_vars,
        lattice_model,
    })
}

/// Whether every wire carries one value under `model` (row-major lattice variables).
pub fn copy_chains_consistent(inst: &LatticeInstance, art: &ReductionArtifacts, model: &[bool]) -> bool {
    let mut value_of_var: HashMap<usize, bool> = HashMap::new();
    for w in &art.wires {
        let var = match w.family {
            WireFamily::Trunk { var } | WireFamily::Drop { var, .. } => var,
        };
        for &(r, c) in &w.cells {
            let x = model[inst.var_of(r, c) - 1];
            if *value_of_var.entry(var).or_insert(x) != x {
                return false;
            }
        }
    }
    true
}

/// Seeded random instance: each plaquette is constrained with probability `density`, on 2 or
/// 3 random corners with random signs. At least one constraint uses 3 corners.
pub fn random_lattice_instance(seed: u64, grid_side: usize, density: f64) -> LatticeInstance {
    assert!(grid_side >= 2 && density > 0.0 && density <= 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut constraints = Vec::new();
    for row in 0..grid_side - 1 {
        for col in 0..grid_side - 1 {
            if !rng.gen_bool(density) {
                continue;
            }
            let k = rng.gen_range(2..=3);
            let mut corners: Vec<(Corner, bool)> = rand::seq::index::sample(&mut rng, 4, k)
                .iter()
                .map(|i| (Corner::ALL[i], false))
                .collect();
            corners.sort();
            for c in corners.iter_mut() {
                c.1 = rng.gen();
            }
            constraints.push(PlaquetteConstraint { row, col, corners });
        }
    }
    if !constraints.iter().any(|c| c.corners.len() == 3) {
        let c = PlaquetteConstraint {
            row: 0,
            col: 0,
            corners: vec![(Corner::NW, rng.gen()), (Corner::NE, rng.gen()), (Corner::SW, rng.gen())],
        };
        match constraints.first_mut() {
            Some(first) if first.row == 0 && first.col == 0 => *first = c,
            _ => constraints.insert(0, c),
        }
    }
    LatticeInstance { grid_side, constraints }
}
