//! CNF formulas, partial assignments and the resolution rules shared by every engine.
//!
//! Variables are 1-based. Bit-level helpers map variable `i` to bit `i - 1`.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("formula must have at least one variable")]
    NoVariables,
    #[error("literal refers to variable {var} but the formula has {num_vars} variables")]
    LiteralOutOfRange { var: usize, num_vars: usize },
    #[error("variable index 0 is not a literal")]
    ZeroVariable,
    #[error("empty clause in input")]
    EmptyClause,
    #[error("assignment has length {got}, formula has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("restriction already contains an empty clause")]
    Contradicted,
    #[error("variable {0} is already assigned")]
    AlreadyAssigned(usize),
    #[error("s must be at least 1")]
    ZeroS,
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("malformed token `{0}`")]
    MalformedToken(String),
    #[error("header declares {declared} clauses, found {found}")]
    ClauseCountMismatch { declared: usize, found: usize },
}

/// A variable together with a polarity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    var: u32,
    positive: bool,
}

impl Literal {
    pub fn new(var: usize, positive: bool) -> Self {
        assert!(var >= 1, "variables are 1-based");
        Literal { var: var as u32, positive }
    }

    pub fn pos(var: usize) -> Self {
        Self::new(var, true)
    }

    pub fn neg(var: usize) -> Self {
        Self::new(var, false)
    }

    /// Parses a signed DIMACS literal; 0 is rejected.
    pub fn from_dimacs(lit: i64) -> Option<Self> {
        if lit == 0 {
            None
        } else {
            Some(Self::new(lit.unsigned_abs() as usize, lit > 0))
        }
    }

    pub fn to_dimacs(self) -> i64 {
        if self.positive {
            self.var as i64
        } else {
            -(self.var as i64)
        }
    }

    pub fn var(self) -> usize {
        self.var as usize
    }

    pub fn is_positive(self) -> bool {
        self.positive
    }

    pub fn negate(self) -> Self {
        Literal { var: self.var, positive: !self.positive }
    }

    /// Truth value of the literal when its variable takes `value`.
    pub fn eval(self, value: bool) -> bool {
        value == self.positive
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "x{}", self.var)
        } else {
            write!(f, "¬x{}", self.var)
        }
    }
}

pub type Clause = Vec<Literal>;

/// Outcome of the search predicate on a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Verdict {
    Satisfied,
    Contradiction,
    Undetermined,
}

/// Result of an s-implication test on one variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Implication {
    ForcedTrue,
    ForcedFalse,
    Free,
    /// Both polarities are implied: the restriction is unsatisfiable around this variable.
    Conflict,
}

impl Implication {
    /// Value assigned when the variable is treated as forced; a conflict assigns true.
    pub fn forced_value(self) -> Option<bool> {
        match self {
            Implication::ForcedTrue | Implication::Conflict => Some(true),
            Implication::ForcedFalse => Some(false),
            Implication::Free => None,
        }
    }
}

/// Trit-valued assignment: `None` is unset.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartialAssignment {
    values: Vec<Option<bool>>,
}

impl PartialAssignment {
    pub fn empty(num_vars: usize) -> Self {
        PartialAssignment { values: vec![None; num_vars] }
    }

    pub fn from_values(values: Vec<Option<bool>>) -> Self {
        PartialAssignment { values }
    }

    /// Full assignment from bits, variable `i` at bit `i - 1`.
    pub fn from_bits(num_vars: usize, bits: u64) -> Self {
        PartialAssignment {
            values: (0..num_vars).map(|i| Some(bits >> i & 1 == 1)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, var: usize) -> Option<bool> {
        self.values[var - 1]
    }

    pub fn set(&mut self, var: usize, value: bool) {
        self.values[var - 1] = Some(value);
    }

    pub fn unset(&mut self, var: usize) {
        self.values[var - 1] = None;
    }

    pub fn with(&self, var: usize, value: bool) -> Self {
        let mut next = self.clone();
        next.set(var, value);
        next
    }

    pub fn values(&self) -> &[Option<bool>] {
        &self.values
    }

    pub fn num_set(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn is_full(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// Lowest unset variable.
    pub fn first_unset(&self) -> Option<usize> {
        self.values.iter().position(Option::is_none).map(|i| i + 1)
    }

    /// Unset entries become `fill`.
    pub fn completed(&self, fill: bool) -> Vec<bool> {
        self.values.iter().map(|v| v.unwrap_or(fill)).collect()
    }

    /// Literal value under the assignment, `None` when the variable is unset.
    pub fn eval(&self, lit: Literal) -> Option<bool> {
        self.get(lit.var()).map(|v| lit.eval(v))
    }
}

impl fmt::Display for PartialAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.values {
            let c = match v {
                Some(true) => '1',
                Some(false) => '0',
                None => '*',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// A set of clauses over `num_vars` variables.
///
/// Constructed formulas are normalized: literals sorted and deduplicated, tautologies and
/// duplicate clauses dropped, no empty clause. Only [`restrict`] produces empty clauses.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Clause>,
    max_clause_size: usize,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Result<Self, FormulaError> {
        if num_vars == 0 {
            return Err(FormulaError::NoVariables);
        }
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(clauses.len());
        for mut clause in clauses {
            if clause.is_empty() {
                return Err(FormulaError::EmptyClause);
            }
            for lit in &clause {
                if lit.var() > num_vars {
                    return Err(FormulaError::LiteralOutOfRange { var: lit.var(), num_vars });
                }
            }
            clause.sort();
            clause.dedup();
            if clause.windows(2).any(|w| w[0].var() == w[1].var()) {
                continue;
            }
            if seen.insert(clause.clone()) {
                out.push(clause);
            }
        }
        let max_clause_size = out.iter().map(Vec::len).max().unwrap_or(0);
        Ok(CnfFormula { num_vars, clauses: out, max_clause_size })
    }

    /// Builds from signed DIMACS literal lists.
    pub fn from_dimacs_clauses(num_vars: usize, clauses: &[Vec<i64>]) -> Result<Self, FormulaError> {
        let mut cs = Vec::with_capacity(clauses.len());
        for c in clauses {
            let mut clause = Vec::with_capacity(c.len());
            for &l in c {
                clause.push(Literal::from_dimacs(l).ok_or(FormulaError::ZeroVariable)?);
            }
            cs.push(clause);
        }
        Self::new(num_vars, cs)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn max_clause_size(&self) -> usize {
        self.max_clause_size
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn has_empty_clause(&self) -> bool {
        self.clauses.iter().any(Vec::is_empty)
    }

    /// Maximum number of clauses any variable occurs in.
    pub fn degree(&self) -> usize {
        let mut occ = vec![0usize; self.num_vars + 1];
        for c in &self.clauses {
            for l in c {
                occ[l.var()] += 1;
            }
        }
        occ.into_iter().max().unwrap_or(0)
    }

    fn check_dims(&self, a: &PartialAssignment) -> Result<(), FormulaError> {
        if a.len() != self.num_vars {
            return Err(FormulaError::DimensionMismatch { expected: self.num_vars, got: a.len() });
        }
        Ok(())
    }

    /// Predicate without materializing the restriction.
    pub fn predicate(&self, a: &PartialAssignment) -> Verdict {
        let mut all_sat = true;
        for c in &self.clauses {
            let mut sat = false;
            let mut open = false;
            for &l in c {
                match a.eval(l) {
                    Some(true) => {
                        sat = true;
                        break;
                    }
                    Some(false) => {}
                    None => open = true,
                }
            }
            if !sat {
                if !open {
                    return Verdict::Contradiction;
                }
                all_sat = false;
            }
        }
        if all_sat {
            Verdict::Satisfied
        } else {
            Verdict::Undetermined
        }
    }

    /// Evaluates a full assignment given as bits.
    pub fn eval_bits(&self, bits: u64) -> bool {
        self.clauses.iter().all(|c| {
            c.iter().any(|l| l.eval(bits >> (l.var() - 1) & 1 == 1))
        })
    }

    pub fn eval_full(&self, values: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|l| l.eval(values[l.var() - 1])))
    }

    /// Number of satisfying full assignments by enumeration. Requires `num_vars <= 30`.
    pub fn model_count(&self) -> u64 {
        assert!(self.num_vars <= 30, "model_count enumerates 2^n assignments");
        (0..1u64 << self.num_vars).filter(|&x| self.eval_bits(x)).count() as u64
    }
}

impl fmt::Display for CnfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .clauses
            .iter()
            .map(|c| {
                let lits: Vec<String> = c.iter().map(ToString::to_string).collect();
                format!("({})", lits.join(" ∨ "))
            })
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Restriction of `f` by `a`: satisfied clauses dropped, false literals removed.
/// An all-false clause survives as an empty clause.
pub fn restrict(f: &CnfFormula, a: &PartialAssignment) -> Result<CnfFormula, FormulaError> {
    f.check_dims(a)?;
    let mut clauses = Vec::new();
    'clauses: for c in &f.clauses {
        let mut kept = Vec::with_capacity(c.len());
        for &l in c {
            match a.eval(l) {
                Some(true) => continue 'clauses,
                Some(false) => {}
                None => kept.push(l),
            }
        }
        clauses.push(kept);
    }
    let max_clause_size = clauses.iter().map(Vec::len).max().unwrap_or(0);
    Ok(CnfFormula { num_vars: f.num_vars, clauses, max_clause_size })
}

pub fn evaluate_predicate(f: &CnfFormula, a: &PartialAssignment) -> Result<Verdict, FormulaError> {
    f.check_dims(a)?;
    Ok(f.predicate(a))
}

fn contradicted_restriction(f: &CnfFormula, a: &PartialAssignment) -> Result<CnfFormula, FormulaError> {
    let r = restrict(f, a)?;
    if r.has_empty_clause() {
        return Err(FormulaError::Contradicted);
    }
    Ok(r)
}

/// Lowest variable owning a unit clause of the restriction, with the value satisfying it.
/// When both polarities are unit the positive one wins.
pub fn unit_rule(f: &CnfFormula, a: &PartialAssignment) -> Result<Option<(usize, bool)>, FormulaError> {
    let r = contradicted_restriction(f, a)?;
    let mut best: Option<(usize, bool)> = None;
    for c in r.clauses.iter().filter(|c| c.len() == 1) {
        let l = c[0];
        best = match best {
            Some((v, val)) if v < l.var() => Some((v, val)),
            Some((v, val)) if v == l.var() => Some((v, val || l.is_positive())),
            _ => Some((l.var(), l.is_positive())),
        };
    }
    Ok(best)
}

/// Lowest unset variable occurring in one polarity only (or not at all) in the restriction.
/// Absent and positive-only variables get true.
pub fn pure_literal_rule(
    f: &CnfFormula,
    a: &PartialAssignment,
) -> Result<Option<(usize, bool)>, FormulaError> {
    let r = contradicted_restriction(f, a)?;
    let mut pos = vec![false; f.num_vars + 1];
    let mut neg = vec![false; f.num_vars + 1];
    for c in &r.clauses {
        for l in c {
            if l.is_positive() {
                pos[l.var()] = true;
            } else {
                neg[l.var()] = true;
            }
        }
    }
    for v in 1..=f.num_vars {
        if a.get(v).is_none() && !(pos[v] && neg[v]) {
            return Ok(Some((v, !neg[v])));
        }
    }
    Ok(None)
}

/// Decides whether some set of at most `s` clauses of the restriction fixes `var`.
///
/// Only clause sets that contain `var` and are connected through shared variables are
/// enumerated; any implying set contains such a subset. An unsatisfiable set reports
/// [`Implication::Conflict`], as does an empty clause in the restriction.
pub fn s_implied(
    f: &CnfFormula,
    a: &PartialAssignment,
    var: usize,
    s: usize,
) -> Result<Implication, FormulaError> {
    f.check_dims(a)?;
    if s == 0 {
        return Err(FormulaError::ZeroS);
    }
    if a.get(var).is_some() {
        return Err(FormulaError::AlreadyAssigned(var));
    }
    let r = restrict(f, a)?;
    Ok(s_implied_in(&r.clauses, var, s))
}

/// s-implication on an already restricted clause list.
pub fn s_implied_in(clauses: &[Clause], var: usize, s: usize) -> Implication {
    if clauses.iter().any(Vec::is_empty) {
        return Implication::Conflict;
    }
    let mut by_var: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, c) in clauses.iter().enumerate() {
        for l in c {
            by_var.entry(l.var()).or_default().push(i);
        }
    }
    let Some(seeds) = by_var.get(&var) else {
        return Implication::Free;
    };
    let mut forced_true = false;
    let mut forced_false = false;
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut stack: Vec<Vec<usize>> = seeds.iter().map(|&c| vec![c]).collect();
    while let Some(set) = stack.pop() {
        if !seen.insert(set.clone()) {
            continue;
        }
        match implication_of(clauses, &set, var) {
            Implication::ForcedTrue => forced_true = true,
            Implication::ForcedFalse => forced_false = true,
            Implication::Conflict => return Implication::Conflict,
            Implication::Free => {}
        }
        if forced_true && forced_false {
            return Implication::Conflict;
        }
        if set.len() < s {
            let mut neighbours: Vec<usize> = set
                .iter()
                .flat_map(|&c| clauses[c].iter())
                .flat_map(|l| by_var[&l.var()].iter().copied())
                .filter(|c| !set.contains(c))
                .collect();
            neighbours.sort_unstable();
            neighbours.dedup();
            for n in neighbours {
                let mut next = set.clone();
                next.push(n);
                next.sort_unstable();
                if !seen.contains(&next) {
                    stack.push(next);
                }
            }
        }
    }
    match (forced_true, forced_false) {
        (true, false) => Implication::ForcedTrue,
        (false, true) => Implication::ForcedFalse,
        _ => Implication::Free,
    }
}

fn implication_of(clauses: &[Clause], set: &[usize], var: usize) -> Implication {
    let mut vars: Vec<usize> = set.iter().flat_map(|&c| clauses[c].iter().map(|l| l.var())).collect();
    vars.sort_unstable();
    vars.dedup();
    debug_assert!(vars.len() <= 24);
    let target = vars.iter().position(|&v| v == var).expect("set mentions var");
    let local: Vec<Vec<(usize, bool)>> = set
        .iter()
        .map(|&c| {
            clauses[c]
                .iter()
                .map(|l| (vars.binary_search(&l.var()).unwrap(), l.is_positive()))
                .collect()
        })
        .collect();
    let mut sat_true = false;
    let mut sat_false = false;
    for x in 0u32..1 << vars.len() {
        let ok = local.iter().all(|c| c.iter().any(|&(i, p)| (x >> i & 1 == 1) == p));
        if ok {
            if x >> target & 1 == 1 {
                sat_true = true;
            } else {
                sat_false = true;
            }
            if sat_true && sat_false {
                return Implication::Free;
            }
        }
    }
    match (sat_true, sat_false) {
        (true, false) => Implication::ForcedTrue,
        (false, true) => Implication::ForcedFalse,
        (false, false) => Implication::Conflict,
        (true, true) => Implication::Free,
    }
}

/// Largest index gap between two variables sharing a clause.
pub fn index_width(f: &CnfFormula) -> usize {
    f.clauses
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| {
            let lo = c.iter().map(|l| l.var()).min().unwrap();
            let hi = c.iter().map(|l| l.var()).max().unwrap();
            hi - lo
        })
        .max()
        .unwrap_or(0)
}

/// Parses DIMACS CNF text. Comment lines start with `c`; a trailing clause may omit its `0`.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, FormulaError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Vec<i64>> = Vec::new();
    let mut current: Vec<i64> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if header.is_some() || parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(FormulaError::MalformedHeader(line.to_string()));
            }
            let n = parts[2].parse().map_err(|_| FormulaError::MalformedHeader(line.to_string()))?;
            let m = parts[3].parse().map_err(|_| FormulaError::MalformedHeader(line.to_string()))?;
            header = Some((n, m));
            continue;
        }
        let (n, _) = header.ok_or(FormulaError::MissingHeader)?;
        for tok in line.split_whitespace() {
            let lit: i64 = tok.parse().map_err(|_| FormulaError::MalformedToken(tok.to_string()))?;
            if lit == 0 {
                if current.is_empty() {
                    return Err(FormulaError::EmptyClause);
                }
                clauses.push(std::mem::take(&mut current));
            } else {
                let var = lit.unsigned_abs() as usize;
                if var > n {
                    return Err(FormulaError::LiteralOutOfRange { var, num_vars: n });
                }
                current.push(lit);
            }
        }
    }
    if !current.is_empty() {
        clauses.push(current);
    }
    let (n, m) = header.ok_or(FormulaError::MissingHeader)?;
    if clauses.len() != m {
        return Err(FormulaError::ClauseCountMismatch { declared: m, found: clauses.len() });
    }
    CnfFormula::from_dimacs_clauses(n, &clauses)
}

pub fn serialize_dimacs(f: &CnfFormula) -> String {
    let mut out = format!("p cnf {} {}\n", f.num_vars, f.clauses.len());
    for c in &f.clauses {
        for l in c {
            out.push_str(&l.to_dimacs().to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    out
}

/// Uniform random k-CNF: each clause draws k distinct variables and random signs.
pub fn random_kcnf<R: Rng + ?Sized>(num_vars: usize, num_clauses: usize, k: usize, rng: &mut R) -> CnfFormula {
    assert!(k <= num_vars && k >= 1);
    let vars: Vec<usize> = (1..=num_vars).collect();
    let clauses = (0..num_clauses)
        .map(|_| {
            vars.choose_multiple(rng, k)
                .map(|&v| Literal::new(v, rng.gen_bool(0.5)))
                .collect()
        })
        .collect();
    CnfFormula::new(num_vars, clauses).expect("generated clauses are in range")
}

/// Random k-CNF whose clauses are all satisfied by `planted` (bits, variable `i` at bit `i - 1`).
pub fn planted_kcnf<R: Rng + ?Sized>(
    num_vars: usize,
    num_clauses: usize,
    k: usize,
    planted: u64,
    rng: &mut R,
) -> CnfFormula {
    assert!(k <= num_vars && k >= 1);
    let vars: Vec<usize> = (1..=num_vars).collect();
    let mut clauses = Vec::with_capacity(num_clauses);
    while clauses.len() < num_clauses {
        let clause: Clause = vars
            .choose_multiple(rng, k)
            .map(|&v| Literal::new(v, rng.gen_bool(0.5)))
            .collect();
        if clause.iter().any(|l| l.eval(planted >> (l.var() - 1) & 1 == 1)) {
            clauses.push(clause);
        }
    }
    CnfFormula::new(num_vars, clauses).expect("generated clauses are in range")
}

/// Planted k-CNF grown clause by clause until the planted assignment is the only model.
/// Requires `num_vars <= 20`.
pub fn unique_sat_kcnf<R: Rng + ?Sized>(num_vars: usize, k: usize, rng: &mut R) -> (CnfFormula, u64) {
    assert!(num_vars <= 20);
    let planted: u64 = rng.gen_range(0..1u64 << num_vars);
    let mut m = num_vars;
    loop {
        let f = planted_kcnf(num_vars, m, k, planted, rng);
        if f.model_count() == 1 {
            return (f, planted);
        }
        m += num_vars / 2 + 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(n: usize, cs: &[&[i64]]) -> CnfFormula {
        let v: Vec<Vec<i64>> = cs.iter().map(|c| c.to_vec()).collect();
        CnfFormula::from_dimacs_clauses(n, &v).unwrap()
    }

    fn asg(vals: &[Option<bool>]) -> PartialAssignment {
        PartialAssignment::from_values(vals.to_vec())
    }

    #[test]
    fn restrict_examples() {
        let g = f(2, &[&[1, 2]]);
        let r = restrict(&g, &asg(&[Some(true), None])).unwrap();
        assert!(r.is_empty());
        let r = restrict(&g, &asg(&[Some(false), None])).unwrap();
        assert_eq!(r.clauses(), &[vec![Literal::pos(2)]]);
        let h = f(1, &[&[1], &[-1]]);
        let r = restrict(&h, &asg(&[Some(true)])).unwrap();
        assert_eq!(r.clauses(), &[Vec::<Literal>::new()]);
        assert!(r.has_empty_clause());
        assert!(matches!(
            restrict(&g, &PartialAssignment::empty(3)),
            Err(FormulaError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn predicate_examples() {
        let g = f(1, &[&[1]]);
        assert_eq!(evaluate_predicate(&g, &asg(&[Some(true)])).unwrap(), Verdict::Satisfied);
        assert_eq!(evaluate_predicate(&g, &asg(&[Some(false)])).unwrap(), Verdict::Contradiction);
        let h = f(2, &[&[1, 2]]);
        assert_eq!(evaluate_predicate(&h, &PartialAssignment::empty(2)).unwrap(), Verdict::Undetermined);
    }

    #[test]
    fn unit_rule_examples() {
        let g = f(3, &[&[2], &[1, 3]]);
        assert_eq!(unit_rule(&g, &PartialAssignment::empty(3)).unwrap(), Some((2, true)));
        let h = f(2, &[&[1, 2]]);
        assert_eq!(unit_rule(&h, &asg(&[Some(false), None])).unwrap(), Some((2, true)));
        assert_eq!(unit_rule(&h, &PartialAssignment::empty(2)).unwrap(), None);
        let c = f(1, &[&[1]]);
        assert_eq!(unit_rule(&c, &asg(&[Some(false)])), Err(FormulaError::Contradicted));
    }

    #[test]
    fn pure_rule_examples() {
        let g = f(2, &[&[1, 2], &[1, -2]]);
        assert_eq!(pure_literal_rule(&g, &PartialAssignment::empty(2)).unwrap(), Some((1, true)));
        let h = f(2, &[&[1, 2]]);
        assert_eq!(pure_literal_rule(&h, &asg(&[Some(true), None])).unwrap(), Some((2, true)));
        let k = f(2, &[&[1, 2], &[-1, -2]]);
        assert_eq!(pure_literal_rule(&k, &PartialAssignment::empty(2)).unwrap(), None);
    }

    #[test]
    fn s_implied_examples() {
        let e = PartialAssignment::empty(3);
        assert_eq!(s_implied(&f(1, &[&[-1]]), &PartialAssignment::empty(1), 1, 1).unwrap(), Implication::ForcedFalse);
        assert_eq!(s_implied(&f(3, &[&[1, 3], &[1, -3]]), &e, 1, 2).unwrap(), Implication::ForcedTrue);
        assert_eq!(s_implied(&f(3, &[&[1, 3], &[1, -3]]), &e, 1, 1).unwrap(), Implication::Free);
        assert_eq!(s_implied(&f(2, &[&[1, 2]]), &PartialAssignment::empty(2), 1, 1).unwrap(), Implication::Free);
        assert_eq!(s_implied(&f(1, &[&[1], &[-1]]), &PartialAssignment::empty(1), 1, 1).unwrap(), Implication::Conflict);
        assert_eq!(s_implied(&f(1, &[&[1]]), &asg(&[Some(true)]), 1, 1), Err(FormulaError::AlreadyAssigned(1)));
    }

    #[test]
    fn index_width_examples() {
        assert_eq!(index_width(&f(5, &[&[1, 3, 5]])), 4);
        assert_eq!(index_width(&f(3, &[&[1, 2], &[2, 3]])), 1);
        assert_eq!(index_width(&f(3, &[&[1], &[-3]])), 0);
    }

    #[test]
    fn dimacs_examples() {
        let g = parse_dimacs("p cnf 2 1\n1 -2 0").unwrap();
        assert_eq!(g.clauses(), &[vec![Literal::pos(1), Literal::neg(2)]]);
        let text = "p cnf 3 3\n1 -2 0\n2 3 0\n-1 -3 0\n";
        assert_eq!(serialize_dimacs(&parse_dimacs(text).unwrap()), text);
        assert!(matches!(parse_dimacs("p cnf 1 1\n2 0"), Err(FormulaError::LiteralOutOfRange { .. })));
        assert!(matches!(parse_dimacs("1 2 0"), Err(FormulaError::MissingHeader)));
        assert!(matches!(parse_dimacs("p cnf x 1\n1 0"), Err(FormulaError::MalformedHeader(_))));
    }

    #[test]
    fn normalization_drops_tautologies_and_duplicates() {
        let g = f(2, &[&[1, -1], &[2, 1, 2], &[1, 2]]);
        assert_eq!(g.clauses(), &[vec![Literal::pos(1), Literal::pos(2)]]);
        assert_eq!(g.max_clause_size(), 2);
        assert!(CnfFormula::new(2, vec![vec![]]).is_err());
    }
}
