//! Gate-level emulation: a small gate set, a dense statevector simulator, a sparse simulator
//! for wide registers with few live basis states, and a classical trace for reversible
//! circuits. On top sit the clause oracles, Grover search, standard and counter-based phase
//! estimation, and the reversible components of the DPLL walk.
//!
//! Wire `i` is bit `i` of a basis index. Multi-wire registers list their least significant
//! wire first.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{CnfFormula, Literal, PartialAssignment};
use crate::treesearch::{decide, EngineConfig, Step, TreeNode};

/// Default cap on dense statevector width.
pub const DEFAULT_WIRE_CAP: usize = 24;

/// Widest register the classical and sparse paths address.
pub const MAX_WIRES: usize = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("{wires} wires exceed the dense cap of {cap}")]
    WireCap { wires: usize, cap: usize },
    #[error("{0} wires exceed the addressable maximum")]
    TooWide(usize),
    #[error("gate {gate} uses wire {wire} outside 0..{num_wires}")]
    WireOutOfRange { gate: usize, wire: usize, num_wires: usize },
    #[error("gate {gate} repeats wire {wire}")]
    RepeatedWire { gate: usize, wire: usize },
    #[error("block of gate {gate} is not unitary (residual {residual:e})")]
    NonUnitary { gate: usize, residual: f64 },
    #[error("gate {0} is not classical reversible")]
    NotClassical(usize),
    #[error("input state has {got} amplitudes, expected {expected}")]
    StateSize { expected: usize, got: usize },
    #[error("state is not an eigenvector (residual {0:e})")]
    NotEigenvector(f64),
    #[error("unitary acts on {0} wires; at most 6 supported")]
    UnitaryTooWide(usize),
}

/// Dense cap in wires, from `HYBRIDTS_DIM_CAP` (an amplitude count) when set.
pub fn wire_cap() -> usize {
    match crate::env_dim_cap() {
        Some(dim) if dim >= 1 => (usize::BITS - 1 - dim.leading_zeros()) as usize,
        _ => DEFAULT_WIRE_CAP,
    }
}

/// A control: the wire and the value it must carry.
pub type Control = (usize, bool);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "gate")]
pub enum Gate {
    PauliX { target: usize },
    Hadamard { target: usize },
    Cnot { control: usize, target: usize },
    /// Multi-controlled X with per-control polarity.
    Toffoli { controls: Vec<Control>, target: usize },
    /// Controlled dense block; `targets[0]` is the block's least significant bit.
    ControlledUnitary {
        controls: Vec<Control>,
        targets: Vec<usize>,
        #[serde(skip, default = "empty_block")]
        block: DMatrix<Complex64>,
    },
    /// Adds one (or subtracts one) modulo `2^width` on `wires` when the controls hold.
    Incrementer { controls: Vec<Control>, wires: Vec<usize>, decrement: bool },
    /// `2|0><0| - I` on the listed wires.
    ReflectionAboutZero { wires: Vec<usize> },
    /// Multiplies by -1 when every control holds.
    PhaseFlip { controls: Vec<Control> },
}

fn empty_block() -> DMatrix<Complex64> {
    DMatrix::zeros(0, 0)
}

fn controls_hold(controls: &[Control], state: u128) -> bool {
    controls.iter().all(|&(w, v)| ((state >> w) & 1 == 1) == v)
}

fn register_value(wires: &[usize], state: u128) -> u128 {
    wires.iter().enumerate().fold(0, |acc, (i, &w)| acc | (((state >> w) & 1) << i))
}

fn with_register(wires: &[usize], state: u128, value: u128) -> u128 {
    let mut s = state;
    for (i, &w) in wires.iter().enumerate() {
        s = (s & !(1u128 << w)) | (((value >> i) & 1) << w);
    }
    s
}

impl Gate {
    pub fn x(target: usize) -> Self {
        Gate::PauliX { target }
    }

    pub fn h(target: usize) -> Self {
        Gate::Hadamard { target }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    pub fn mcx(controls: Vec<Control>, target: usize) -> Self {
        Gate::Toffoli { controls, target }
    }

    pub fn inc(controls: Vec<Control>, wires: Vec<usize>) -> Self {
        Gate::Incrementer { controls, wires, decrement: false }
    }

    pub fn dec(controls: Vec<Control>, wires: Vec<usize>) -> Self {
        Gate::Incrementer { controls, wires, decrement: true }
    }

    pub fn wires(&self) -> Vec<usize> {
        match self {
            Gate::PauliX { target } | Gate::Hadamard { target } => vec![*target],
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::Toffoli { controls, target } => controls.iter().map(|c| c.0).chain([*target]).collect(),
            Gate::ControlledUnitary { controls, targets, .. } => {
                controls.iter().map(|c| c.0).chain(targets.iter().copied()).collect()
            }
            Gate::Incrementer { controls, wires, .. } => {
                controls.iter().map(|c| c.0).chain(wires.iter().copied()).collect()
            }
            Gate::ReflectionAboutZero { wires } => wires.clone(),
            Gate::PhaseFlip { controls } => controls.iter().map(|c| c.0).collect(),
        }
    }

    pub fn is_classical(&self) -> bool {
        matches!(self, Gate::PauliX { .. } | Gate::Cnot { .. } | Gate::Toffoli { .. } | Gate::Incrementer { .. })
    }

    pub fn inverse(&self) -> Gate {
        match self {
            Gate::ControlledUnitary { controls, targets, block } => Gate::ControlledUnitary {
                controls: controls.clone(),
                targets: targets.clone(),
                block: block.adjoint(),
            },
            Gate::Incrementer { controls, wires, decrement } => {
                Gate::Incrementer { controls: controls.clone(), wires: wires.clone(), decrement: !decrement }
            }
            g => g.clone(),
        }
    }

    /// Basis-state image for classical gates.
    pub fn apply_classical(&self, s: u128) -> Option<u128> {
        match self {
            Gate::PauliX { target } => Some(s ^ (1 << target)),
            Gate::Cnot { control, target } => Some(if (s >> control) & 1 == 1 { s ^ (1 << target) } else { s }),
            Gate::Toffoli { controls, target } => {
                Some(if controls_hold(controls, s) { s ^ (1 << target) } else { s })
            }
            Gate::Incrementer { controls, wires, decrement } => {
                if !controls_hold(controls, s) || wires.is_empty() {
                    return Some(s);
                }
                let modulus = 1u128 << wires.len();
                let v = register_value(wires, s);
                let nv = if *decrement { (v + modulus - 1) % modulus } else { (v + 1) % modulus };
                Some(with_register(wires, s, nv))
            }
            _ => None,
        }
    }

    /// Ripple expansion of an incrementer into multi-controlled X gates, most significant
    /// bit first so every carry condition still reads the old lower bits.
    pub fn incrementer_cascade(controls: &[Control], wires: &[usize], decrement: bool) -> Vec<Gate> {
        let mut out = Vec::new();
        for i in (0..wires.len()).rev() {
            let mut c = controls.to_vec();
            // Increment flips bit i when all lower bits are 1; decrement when all are 0.
            c.extend(wires[..i].iter().map(|&w| (w, !decrement)));
            out.push(Gate::Toffoli { controls: c, target: wires[i] });
        }
        out
    }

    fn name(&self) -> &'static str {
        match self {
            Gate::PauliX { .. } => "x",
            Gate::Hadamard { .. } => "h",
            Gate::Cnot { .. } => "cnot",
            Gate::Toffoli { .. } => "toffoli",
            Gate::ControlledUnitary { .. } => "cu",
            Gate::Incrementer { decrement: false, .. } => "inc",
            Gate::Incrementer { decrement: true, .. } => "dec",
            Gate::ReflectionAboutZero { .. } => "refl0",
            Gate::PhaseFlip { .. } => "phase",
        }
    }
}

fn fmt_controls(controls: &[Control]) -> String {
    controls.iter().map(|&(w, v)| if v { format!("{w}") } else { format!("!{w}") }).collect::<Vec<_>>().join(",")
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Circuit {
    pub num_wires: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(num_wires: usize) -> Self {
        Circuit { num_wires, gates: Vec::new() }
    }

    pub fn push(&mut self, g: Gate) {
        self.gates.push(g);
    }

    pub fn extend(&mut self, other: &Circuit) {
        self.num_wires = self.num_wires.max(other.num_wires);
        self.gates.extend(other.gates.iter().cloned());
    }

    pub fn inverse(&self) -> Circuit {
        Circuit { num_wires: self.num_wires, gates: self.gates.iter().rev().map(Gate::inverse).collect() }
    }

    pub fn is_classical(&self) -> bool {
        self.gates.iter().all(Gate::is_classical)
    }

    /// Gate count after expanding incrementers into their cascades.
    pub fn primitive_gate_count(&self) -> usize {
        self.gates
            .iter()
            .map(|g| match g {
                Gate::Incrementer { wires, .. } => wires.len(),
                _ => 1,
            })
            .sum()
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        for (i, g) in self.gates.iter().enumerate() {
            let ws = g.wires();
            for (a, &w) in ws.iter().enumerate() {
                if w >= self.num_wires {
                    return Err(CircuitError::WireOutOfRange { gate: i, wire: w, num_wires: self.num_wires });
                }
                if ws[..a].contains(&w) {
                    return Err(CircuitError::RepeatedWire { gate: i, wire: w });
                }
            }
            if let Gate::ControlledUnitary { block, targets, .. } = g {
                let dim = 1usize << targets.len();
                let residual = if block.nrows() != dim || block.ncols() != dim {
                    f64::INFINITY
                } else {
                    (block.adjoint() * block - DMatrix::<Complex64>::identity(dim, dim))
                        .iter()
                        .map(|z| z.norm())
                        .fold(0.0, f64::max)
                };
                if residual > 1e-12 {
                    return Err(CircuitError::NonUnitary { gate: i, residual });
                }
            }
        }
        Ok(())
    }

    /// Line-oriented audit format: gate name, controls, targets.
    pub fn to_text(&self) -> String {
        let mut s = format!("wires {}\n", self.num_wires);
        for (i, g) in self.gates.iter().enumerate() {
            let line = match g {
                Gate::PauliX { target } | Gate::Hadamard { target } => format!("{} {target}", g.name()),
                Gate::Cnot { control, target } => format!("cnot {control} -> {target}"),
                Gate::Toffoli { controls, target } => format!("toffoli {} -> {target}", fmt_controls(controls)),
                Gate::ControlledUnitary { controls, targets, .. } => {
                    format!("cu [{}] -> {:?} block#{i}", fmt_controls(controls), targets)
                }
                Gate::Incrementer { controls, wires, .. } => {
                    format!("{} [{}] -> {:?}", g.name(), fmt_controls(controls), wires)
                }
                Gate::ReflectionAboutZero { wires } => format!("refl0 {wires:?}"),
                Gate::PhaseFlip { controls } => format!("phase [{}]", fmt_controls(controls)),
            };
            let _ = writeln!(s, "{line}");
        }
        s
    }
}

/// Exact wire count of a built component.
pub fn qubit_cost(c: &Circuit) -> usize {
    c.num_wires
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub num_wires: usize,
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn basis(num_wires: usize, index: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_wires];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        StateVector { num_wires, amplitudes }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Probability that `wires` read `value`.
    pub fn probability(&self, wires: &[usize], value: usize) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| register_value(wires, *i as u128) == value as u128)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }
}

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn apply_dense(g: &Gate, amps: &mut Vec<Complex64>) {
    let len = amps.len();
    match g {
        Gate::Hadamard { target } => {
            let bit = 1usize << target;
            for i in 0..len {
                if i & bit == 0 {
                    let (a, b) = (amps[i], amps[i | bit]);
                    amps[i] = (a + b) * SQRT_HALF;
                    amps[i | bit] = (a - b) * SQRT_HALF;
                }
            }
        }
        Gate::ControlledUnitary { controls, targets, block } => {
            let dim = 1usize << targets.len();
            let mask: usize = targets.iter().map(|&t| 1usize << t).sum();
            let mut buf = vec![Complex64::new(0.0, 0.0); dim];
            for base in 0..len {
                if base & mask != 0 || !controls_hold(controls, base as u128) {
                    continue;
                }
                let idx = |k: usize| with_register(targets, base as u128, k as u128) as usize;
                for (k, b) in buf.iter_mut().enumerate() {
                    *b = amps[idx(k)];
                }
                for r in 0..dim {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for c in 0..dim {
                        acc += block[(r, c)] * buf[c];
                    }
                    amps[idx(r)] = acc;
                }
            }
        }
        Gate::ReflectionAboutZero { wires } => {
            for (i, a) in amps.iter_mut().enumerate() {
                if register_value(wires, i as u128) != 0 {
                    *a = -*a;
                }
            }
        }
        Gate::PhaseFlip { controls } => {
            for (i, a) in amps.iter_mut().enumerate() {
                if controls_hold(controls, i as u128) {
                    *a = -*a;
                }
            }
        }
        classical => {
            let mut out = vec![Complex64::new(0.0, 0.0); len];
            for (i, a) in amps.iter().enumerate() {
                out[classical.apply_classical(i as u128).expect("classical gate") as usize] = *a;
            }
            *amps = out;
        }
    }
}

/// Dense simulation under the wire cap.
pub fn simulate(circuit: &Circuit, input: &StateVector) -> Result<StateVector, CircuitError> {
    simulate_capped(circuit, input, wire_cap())
}

pub fn simulate_capped(circuit: &Circuit, input: &StateVector, cap: usize) -> Result<StateVector, CircuitError> {
    if circuit.num_wires > cap {
        return Err(CircuitError::WireCap { wires: circuit.num_wires, cap });
    }
    circuit.validate()?;
    let expected = 1usize << circuit.num_wires;
    if input.amplitudes.len() != expected {
        return Err(CircuitError::StateSize { expected, got: input.amplitudes.len() });
    }
    // A basis input through a classical circuit stays a basis state.
    if circuit.is_classical() {
        let nonzero: Vec<usize> = (0..expected).filter(|&i| input.amplitudes[i].norm_sqr() > 0.0).collect();
        if nonzero.len() == 1 {
            let t = trace(circuit, nonzero[0] as u128, &[])?;
            let mut out = StateVector::basis(circuit.num_wires, t.output() as usize);
            out.amplitudes[t.output() as usize] = input.amplitudes[nonzero[0]];
            return Ok(out);
        }
    }
    let mut amps = input.amplitudes.clone();
    for g in &circuit.gates {
        apply_dense(g, &mut amps);
    }
    Ok(StateVector { num_wires: circuit.num_wires, amplitudes: amps })
}

/// Sparse amplitudes over at most 128 wires.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseState {
    pub amplitudes: HashMap<u128, Complex64>,
}

const PRUNE: f64 = 1e-14;

impl SparseState {
    pub fn basis(index: u128) -> Self {
        let mut amplitudes = HashMap::new();
        amplitudes.insert(index, Complex64::new(1.0, 0.0));
        SparseState { amplitudes }
    }

    pub fn from_terms(terms: &[(u128, f64)]) -> Self {
        let mut s = SparseState::default();
        for &(i, a) in terms {
            *s.amplitudes.entry(i).or_default() += Complex64::new(a, 0.0);
        }
        s
    }

    pub fn get(&self, i: u128) -> Complex64 {
        self.amplitudes.get(&i).copied().unwrap_or_default()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest amplitude difference against `other`.
    pub fn distance(&self, other: &SparseState) -> f64 {
        let mut d: f64 = 0.0;
        for (k, v) in &self.amplitudes {
            d = d.max((v - other.get(*k)).norm());
        }
        for (k, v) in &other.amplitudes {
            d = d.max((v - self.get(*k)).norm());
        }
        d
    }

    fn add(map: &mut HashMap<u128, Complex64>, k: u128, v: Complex64) {
        *map.entry(k).or_default() += v;
    }

    pub fn apply(&mut self, g: &Gate) {
        let mut out: HashMap<u128, Complex64> = HashMap::with_capacity(self.amplitudes.len());
        match g {
            Gate::Hadamard { target } => {
                let bit = 1u128 << target;
                for (&k, &v) in &self.amplitudes {
                    let lo = k & !bit;
                    let hi = k | bit;
                    let s = if k & bit == 0 { 1.0 } else { -1.0 };
                    Self::add(&mut out, lo, v * SQRT_HALF);
                    Self::add(&mut out, hi, v * SQRT_HALF * s);
                }
            }
            Gate::ControlledUnitary { controls, targets, block } => {
                let dim = 1u128 << targets.len();
                for (&k, &v) in &self.amplitudes {
                    if !controls_hold(controls, k) {
                        Self::add(&mut out, k, v);
                        continue;
                    }
                    let col = register_value(targets, k) as usize;
                    for r in 0..dim {
                        let z = block[(r as usize, col)];
                        if z.norm_sqr() > 0.0 {
                            Self::add(&mut out, with_register(targets, k, r), v * z);
                        }
                    }
                }
            }
            Gate::ReflectionAboutZero { wires } => {
                for (&k, &v) in &self.amplitudes {
                    Self::add(&mut out, k, if register_value(wires, k) != 0 { -v } else { v });
                }
            }
            Gate::PhaseFlip { controls } => {
                for (&k, &v) in &self.amplitudes {
                    Self::add(&mut out, k, if controls_hold(controls, k) { -v } else { v });
                }
            }
            classical => {
                for (&k, &v) in &self.amplitudes {
                    Self::add(&mut out, classical.apply_classical(k).expect("classical gate"), v);
                }
            }
        }
        out.retain(|_, v| v.norm_sqr() > PRUNE * PRUNE);
        self.amplitudes = out;
    }
}

pub fn simulate_sparse(circuit: &Circuit, input: &SparseState) -> Result<SparseState, CircuitError> {
    if circuit.num_wires > MAX_WIRES {
        return Err(CircuitError::TooWide(circuit.num_wires));
    }
    circuit.validate()?;
    let mut s = input.clone();
    for g in &circuit.gates {
        s.apply(g);
    }
    Ok(s)
}

/// Basis-state trajectory of a classical reversible circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReversibleTrace {
    pub input: u128,
    /// State after each gate.
    pub states: Vec<u128>,
    /// Whether the checked ancillas are back at their input values at the end.
    pub ancillas_restored: bool,
}

impl ReversibleTrace {
    pub fn output(&self) -> u128 {
        self.states.last().copied().unwrap_or(self.input)
    }

    /// Whether `wires` carry their input values after gate `checkpoint` (exclusive index).
    pub fn restored_at(&self, checkpoint: usize, wires: &[usize]) -> bool {
        let s = if checkpoint == 0 { self.input } else { self.states[checkpoint - 1] };
        register_value(wires, s) == register_value(wires, self.input)
    }
}

pub fn trace(circuit: &Circuit, input: u128, ancillas: &[usize]) -> Result<ReversibleTrace, CircuitError> {
    if circuit.num_wires > MAX_WIRES {
        return Err(CircuitError::TooWide(circuit.num_wires));
    }
    let mut s = input;
    let mut states = Vec::with_capacity(circuit.gates.len());
    for (i, g) in circuit.gates.iter().enumerate() {
        s = g.apply_classical(s).ok_or(CircuitError::NotClassical(i))?;
        states.push(s);
    }
    let ancillas_restored = register_value(ancillas, s) == register_value(ancillas, input);
    Ok(ReversibleTrace { input, states, ancillas_restored })
}

/// Final state only, without recording the trajectory.
pub fn run_classical(circuit: &Circuit, input: u128) -> u128 {
    circuit.gates.iter().fold(input, |s, g| g.apply_classical(s).expect("classical circuit"))
}

// ---------------------------------------------------------------------------------------
// Clause oracles and Grover.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum OracleKind {
    Naive,
    Counter,
}

/// A phase oracle on wires `0..n` (variable `i` on wire `i - 1`) with scratch above.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClauseOracle {
    pub kind: OracleKind,
    pub circuit: Circuit,
    pub input_wires: Vec<usize>,
    pub ancilla_wires: Vec<usize>,
}

/// Controls that hold exactly when every literal of `clause` is false.
fn all_false_controls(clause: &[Literal], var_wire: impl Fn(usize) -> usize) -> Vec<Control> {
    clause.iter().map(|l| (var_wire(l.var()), !l.is_positive())).collect()
}

/// One ancilla per clause, one for the conjunction and one phase wire: `n + m + 2` wires.
pub fn build_clause_oracle_naive(f: &CnfFormula) -> ClauseOracle {
    let n = f.num_vars();
    let m = f.num_clauses();
    let conj = n + m;
    let phase = n + m + 1;
    let mut compute = Circuit::new(n + m + 2);
    for (i, c) in f.clauses().iter().enumerate() {
        // anc_i = NOT(all literals false) = C_i(x).
        compute.push(Gate::mcx(all_false_controls(c, |v| v - 1), n + i));
        compute.push(Gate::x(n + i));
    }
    compute.push(Gate::mcx((0..m).map(|i| (n + i, true)).collect(), conj));
    let mut circuit = compute.clone();
    // Phase kickback through |->.
    circuit.push(Gate::x(phase));
    circuit.push(Gate::h(phase));
    circuit.push(Gate::cnot(conj, phase));
    circuit.push(Gate::h(phase));
    circuit.push(Gate::x(phase));
    circuit.extend(&compute.inverse());
    ClauseOracle {
        kind: OracleKind::Naive,
        circuit,
        input_wires: (0..n).collect(),
        ancilla_wires: (n..n + m + 2).collect(),
    }
}

/// Width `floor(log2 m) + 1` of the satisfied-clause counter.
pub fn counter_width(m: usize) -> usize {
    (usize::BITS - m.max(1).leading_zeros()) as usize
}

/// Satisfied-clause counter compared against `m`: `n + floor(log2 m) + 1 + 1` wires.
pub fn build_clause_oracle_counter(f: &CnfFormula) -> ClauseOracle {
    let n = f.num_vars();
    let m = f.num_clauses();
    let p = counter_width(m);
    let counter: Vec<usize> = (n..n + p).collect();
    let phase = n + p;
    let mut compute = Circuit::new(n + p + 1);
    for c in f.clauses() {
        // +1 always, -1 back when the clause is false: net +1 iff satisfied.
        compute.push(Gate::inc(vec![], counter.clone()));
        compute.push(Gate::dec(all_false_controls(c, |v| v - 1), counter.clone()));
    }
    let mut circuit = compute.clone();
    let equals_m: Vec<Control> = counter.iter().enumerate().map(|(i, &w)| (w, (m >> i) & 1 == 1)).collect();
    circuit.push(Gate::x(phase));
    circuit.push(Gate::h(phase));
    circuit.push(Gate::mcx(equals_m, phase));
    circuit.push(Gate::h(phase));
    circuit.push(Gate::x(phase));
    circuit.extend(&compute.inverse());
    ClauseOracle {
        kind: OracleKind::Counter,
        circuit,
        input_wires: (0..n).collect(),
        ancilla_wires: (n..n + p + 1).collect(),
    }
}

pub fn build_clause_oracle(f: &CnfFormula, kind: OracleKind) -> ClauseOracle {
    match kind {
        OracleKind::Naive => build_clause_oracle_naive(f),
        OracleKind::Counter => build_clause_oracle_counter(f),
    }
}

/// Runs the oracle once on the uniform superposition of inputs with ancillas at 0 and
/// returns the largest deviation from `(-1)^F(x) / sqrt(2^n)` on the ancilla-zero slice,
/// together with the probability mass left outside that slice.
pub fn oracle_phase_deviation(f: &CnfFormula, oracle: &ClauseOracle) -> Result<(f64, f64), CircuitError> {
    let n = f.num_vars();
    let amp = 1.0 / ((1u64 << n) as f64).sqrt();
    let input = SparseState::from_terms(&(0..1u128 << n).map(|x| (x, amp)).collect::<Vec<_>>());
    let out = simulate_sparse(&oracle.circuit, &input)?;
    let mut worst: f64 = 0.0;
    let mut inside = 0.0;
    for x in 0..1u64 << n {
        let a = out.get(x as u128);
        inside += a.norm_sqr();
        let want = if f.eval_bits(x) { -amp } else { amp };
        worst = worst.max((a - Complex64::new(want, 0.0)).norm());
    }
    Ok((worst, (1.0 - inside).max(0.0)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GroverResult {
    /// Most likely measured input, bit `i - 1` for variable `i`.
    pub assignment: u64,
    pub success_probability: f64,
    pub solutions: u64,
    pub iterations: usize,
}

/// `sin^2((2k+1) theta)` with `sin theta = sqrt(M/N)`.
pub fn grover_closed_form(n: usize, solutions: u64, iterations: usize) -> f64 {
    let theta = ((solutions as f64) / (1u64 << n) as f64).sqrt().asin();
    ((2 * iterations + 1) as f64 * theta).sin().powi(2)
}

/// `floor(pi/4 sqrt(N/M))`.
pub fn grover_optimal_iterations(n: usize, solutions: u64) -> usize {
    if solutions == 0 {
        return 0;
    }
    (std::f64::consts::FRAC_PI_4 * ((1u64 << n) as f64 / solutions as f64).sqrt()).floor() as usize
}

/// Grover on the `n` input wires with the phase oracle `(-1)^F(x)` applied functionally.
pub fn grover_search(f: &CnfFormula, iterations: usize) -> GroverResult {
    let n = f.num_vars();
    assert!(n <= 26, "grover_search keeps 2^n amplitudes");
    let marks: Vec<bool> = (0..1u64 << n).map(|x| f.eval_bits(x)).collect();
    grover_on_marks(&marks, iterations)
}

/// Grover over an explicit marked set of size `2^q`; each iteration is one oracle call.
pub fn grover_on_marks(marks: &[bool], iterations: usize) -> GroverResult {
    let size = marks.len();
    assert!(size.is_power_of_two());
    let mut amps = vec![1.0 / (size as f64).sqrt(); size];
    for _ in 0..iterations {
        for (a, &m) in amps.iter_mut().zip(marks) {
            if m {
                *a = -*a;
            }
        }
        // H (2|0><0| - I) H = 2|s><s| - I.
        let mean = amps.iter().sum::<f64>() / size as f64;
        for a in amps.iter_mut() {
            *a = 2.0 * mean - *a;
        }
    }
    let success_probability = amps.iter().zip(marks).filter(|(_, &m)| m).map(|(a, _)| a * a).sum();
    let assignment = (0..size).max_by(|&a, &b| amps[a].abs().total_cmp(&amps[b].abs())).unwrap() as u64;
    GroverResult {
        assignment,
        success_probability,
        solutions: marks.iter().filter(|&&m| m).count() as u64,
        iterations,
    }
}

/// The full Grover circuit with a synthesized oracle; input wires start in `|0>`.
pub fn grover_circuit(f: &CnfFormula, iterations: usize, kind: OracleKind) -> (Circuit, ClauseOracle) {
    let oracle = build_clause_oracle(f, kind);
    let n = f.num_vars();
    let mut c = Circuit::new(oracle.circuit.num_wires);
    for w in 0..n {
        c.push(Gate::h(w));
    }
    for _ in 0..iterations {
        c.extend(&oracle.circuit);
        for w in 0..n {
            c.push(Gate::h(w));
        }
        c.push(Gate::ReflectionAboutZero { wires: (0..n).collect() });
        for w in 0..n {
            c.push(Gate::h(w));
        }
    }
    (c, oracle)
}

/// Success probability of the synthesized Grover circuit, read on the ancilla-zero slice.
pub fn grover_circuit_success(f: &CnfFormula, iterations: usize, kind: OracleKind) -> Result<f64, CircuitError> {
    let (c, _) = grover_circuit(f, iterations, kind);
    let out = simulate_sparse(&c, &SparseState::basis(0))?;
    Ok(out
        .amplitudes
        .iter()
        .filter(|(&k, _)| k >> f.num_vars() == 0 && f.eval_bits(k as u64))
        .map(|(_, a)| a.norm_sqr())
        .sum())
}

// ---------------------------------------------------------------------------------------
// Phase estimation.

fn matrix_power(u: &DMatrix<Complex64>, e: u64) -> DMatrix<Complex64> {
    let mut result = DMatrix::<Complex64>::identity(u.nrows(), u.ncols());
    let mut base = u.clone();
    let mut k = e;
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        k >>= 1;
    }
    result
}

fn unitary_wires(u: &DMatrix<Complex64>) -> Result<usize, CircuitError> {
    let m = u.nrows().trailing_zeros() as usize;
    if m > 6 {
        return Err(CircuitError::UnitaryTooWide(m));
    }
    Ok(m)
}

fn check_eigenvector(u: &DMatrix<Complex64>, psi: &[Complex64]) -> Result<(), CircuitError> {
    let v = nalgebra::DVector::from_column_slice(psi);
    let uv = u * &v;
    let lambda = v.dotc(&uv);
    let residual = (uv - v * lambda).norm();
    if residual > 1e-8 {
        return Err(CircuitError::NotEigenvector(residual));
    }
    Ok(())
}

fn system_input(offset: usize, total: usize, psi: &[Complex64]) -> StateVector {
    let mut s = StateVector { num_wires: total, amplitudes: vec![Complex64::new(0.0, 0.0); 1 << total] };
    for (k, a) in psi.iter().enumerate() {
        s.amplitudes[k << offset] = *a;
    }
    s
}

/// Textbook QPE without the final inverse Fourier transform: `H^t`, controlled powers,
/// `H^t`. The all-zero readout has the same amplitude as with the full transform.
pub fn qpe_standard_circuit(u: &DMatrix<Complex64>, t: usize) -> Result<Circuit, CircuitError> {
    let m = unitary_wires(u)?;
    let mut c = Circuit::new(t + m);
    let system: Vec<usize> = (t..t + m).collect();
    for j in 0..t {
        c.push(Gate::h(j));
    }
    for j in 0..t {
        c.push(Gate::ControlledUnitary {
            controls: vec![(j, true)],
            targets: system.clone(),
            block: matrix_power(u, 1 << j),
        });
    }
    for j in 0..t {
        c.push(Gate::h(j));
    }
    Ok(c)
}

/// `p0` for an arbitrary input state.
pub fn qpe_standard_state(u: &DMatrix<Complex64>, psi: &[Complex64], t: usize) -> Result<f64, CircuitError> {
    let c = qpe_standard_circuit(u, t)?;
    let out = simulate(&c, &system_input(t, c.num_wires, psi))?;
    Ok(out.probability(&(0..t).collect::<Vec<_>>(), 0))
}

/// Probability that the `t`-bit estimate of an eigenphase reads all zeros.
pub fn qpe_standard(u: &DMatrix<Complex64>, eigenstate: &[Complex64], t: usize) -> Result<f64, CircuitError> {
    check_eigenvector(u, eigenstate)?;
    qpe_standard_state(u, eigenstate, t)
}

/// Counter width `ceil(log2 t)`.
pub fn qpe_counter_width(t: usize) -> usize {
    if t <= 1 {
        0
    } else {
        (usize::BITS - (t - 1).leading_zeros()) as usize
    }
}

/// Counter-based zero test: per round, `H` on one ancilla, controlled `U^(2^j)`, `H`, and an
/// increment of a `ceil(log2 t)`-wide counter controlled on the ancilla. Wires: counter
/// `0..p`, ancilla `p`, system above.
pub fn qpe_counter_circuit(u: &DMatrix<Complex64>, t: usize) -> Result<Circuit, CircuitError> {
    let m = unitary_wires(u)?;
    let p = qpe_counter_width(t);
    let a = p;
    let counter: Vec<usize> = (0..p).collect();
    let system: Vec<usize> = (p + 1..p + 1 + m).collect();
    let mut c = Circuit::new(p + 1 + m);
    for j in 0..t {
        c.push(Gate::h(a));
        c.push(Gate::ControlledUnitary {
            controls: vec![(a, true)],
            targets: system.clone(),
            block: matrix_power(u, 1 << j),
        });
        c.push(Gate::h(a));
        if p > 0 {
            c.push(Gate::inc(vec![(a, true)], counter.clone()));
        }
    }
    Ok(c)
}

/// Ancilla wires used by the counter circuit.
pub fn qpe_counter_ancillas(t: usize) -> usize {
    qpe_counter_width(t) + 1
}

/// `p0'`: probability that the counter and the round ancilla both read zero. With `t = 2^p`
/// the counter wraps to zero exactly when every round fired, and then the ancilla reads 1.
pub fn qpe_counter_state(u: &DMatrix<Complex64>, psi: &[Complex64], t: usize) -> Result<f64, CircuitError> {
    let c = qpe_counter_circuit(u, t)?;
    let p = qpe_counter_width(t);
    let out = simulate(&c, &system_input(p + 1, c.num_wires, psi))?;
    Ok(out.probability(&(0..=p).collect::<Vec<_>>(), 0))
}

pub fn qpe_counter(u: &DMatrix<Complex64>, eigenstate: &[Complex64], t: usize) -> Result<f64, CircuitError> {
    check_eigenvector(u, eigenstate)?;
    qpe_counter_state(u, eigenstate, t)
}

/// `prod_{j<t} cos^2(pi 2^j theta)` for eigenphase `e^{2 pi i theta}`.
pub fn qpe_zero_closed_form(theta: f64, t: usize) -> f64 {
    (0..t).map(|j| (std::f64::consts::PI * (1u64 << j) as f64 * theta).cos().powi(2)).product()
}

/// `V diag(e^{2 pi i theta_k}) V^dagger` with `V` from the QR factorization of a complex
/// Gaussian matrix; returns the unitary and `V`, whose columns are the eigenvectors.
pub fn random_unitary<R: rand::Rng + ?Sized>(
    m: usize,
    thetas: &[f64],
    rng: &mut R,
) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    use rand_distr_normal::standard_normal;
    let dim = 1usize << m;
    assert_eq!(thetas.len(), dim);
    let g = DMatrix::<Complex64>::from_fn(dim, dim, |_, _| Complex64::new(standard_normal(rng), standard_normal(rng)));
    let v = g.qr().q();
    let d = DMatrix::<Complex64>::from_diagonal(&nalgebra::DVector::from_iterator(
        dim,
        thetas.iter().map(|&th| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * th)),
    ));
    (&v * d * v.adjoint(), v)
}

mod rand_distr_normal {
    /// Box-Muller standard normal.
    pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Real matrix lifted to complex entries.
pub fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

// ---------------------------------------------------------------------------------------
// DPLL walk components.

/// Wire allocation shared by every walk component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WalkLayout {
    pub n: usize,
    pub m: usize,
    /// `(set, value)` wires per variable of the vertex register.
    pub x: Vec<(usize, usize)>,
    /// `(set, value)` wires per variable of the child register.
    pub y: Vec<(usize, usize)>,
    /// Child index register: 0 = the vertex itself, 1 and 2 = children.
    pub index: Vec<usize>,
    pub lit: Vec<usize>,
    pub unsat: usize,
    pub sat_count: Vec<usize>,
    pub false_count: Vec<usize>,
    pub leaf: usize,
    pub marked: usize,
    pub cnt_pos: Vec<usize>,
    pub cnt_neg: Vec<usize>,
    pub zero_pos: usize,
    pub zero_neg: usize,
    pub hit: usize,
    pub found: Vec<usize>,
    pub unit_j: Vec<usize>,
    pub unit_s: usize,
    pub pure_j: Vec<usize>,
    pub pure_s: usize,
    pub free_j: Vec<usize>,
    pub unit_flag: usize,
    pub pure_flag: usize,
    pub j: Vec<usize>,
    pub s: usize,
    pub forced: usize,
    pub branch: usize,
    pub root: usize,
    pub next_j: Vec<usize>,
    pub next_b: usize,
    pub parity: usize,
    pub num_wires: usize,
}

/// `ceil(log2(n + 1))` bits for a variable index in `0..=n`.
pub fn index_bits(n: usize) -> usize {
    (usize::BITS - n.leading_zeros()) as usize
}

impl WalkLayout {
    pub fn new(f: &CnfFormula) -> Self {
        let n = f.num_vars();
        let m = f.num_clauses();
        let k = f.max_clause_size().max(1);
        let mut next = 0usize;
        let mut reg = |w: usize| {
            let r: Vec<usize> = (next..next + w).collect();
            next += w;
            r
        };
        let xr = reg(2 * n);
        let yr = reg(2 * n);
        let x = (0..n).map(|i| (xr[2 * i], xr[2 * i + 1])).collect();
        let y = (0..n).map(|i| (yr[2 * i], yr[2 * i + 1])).collect();
        let cw = counter_width(m);
        let jw = index_bits(n);
        let occ_w = counter_width(m);
        let index = reg(2);
        let lit = reg(k);
        let unsat = reg(1)[0];
        let sat_count = reg(cw);
        let false_count = reg(cw);
        let leaf = reg(1)[0];
        let marked = reg(1)[0];
        let cnt_pos = reg(occ_w);
        let cnt_neg = reg(occ_w);
        let zero_pos = reg(1)[0];
        let zero_neg = reg(1)[0];
        let hit = reg(1)[0];
        let found = reg(jw);
        let unit_j = reg(jw);
        let unit_s = reg(1)[0];
        let pure_j = reg(jw);
        let pure_s = reg(1)[0];
        let free_j = reg(jw);
        let unit_flag = reg(1)[0];
        let pure_flag = reg(1)[0];
        let j = reg(jw);
        let s = reg(1)[0];
        let forced = reg(1)[0];
        let branch = reg(1)[0];
        let root = reg(1)[0];
        let next_j = reg(jw);
        let next_b = reg(1)[0];
        let parity = reg(1)[0];
        WalkLayout {
            n,
            m,
            x,
            y,
            index,
            lit,
            unsat,
            sat_count,
            false_count,
            leaf,
            marked,
            cnt_pos,
            cnt_neg,
            zero_pos,
            zero_neg,
            hit,
            found,
            unit_j,
            unit_s,
            pure_j,
            pure_s,
            free_j,
            unit_flag,
            pure_flag,
            j,
            s,
            forced,
            branch,
            root,
            next_j,
            next_b,
            parity,
            num_wires: next,
        }
    }

    /// Ancilla wires beyond the two vertex registers.
    pub fn ancilla_count(&self) -> usize {
        self.num_wires - 4 * self.n
    }

    pub fn encode(&self, a: &PartialAssignment, reg: &[(usize, usize)]) -> u128 {
        let mut s = 0u128;
        for (i, &(set, val)) in reg.iter().enumerate() {
            if let Some(b) = a.get(i + 1) {
                s |= 1 << set;
                if b {
                    s |= 1 << val;
                }
            }
        }
        s
    }

    pub fn decode(&self, state: u128, reg: &[(usize, usize)]) -> PartialAssignment {
        PartialAssignment::from_values(
            reg.iter().map(|&(set, val)| if (state >> set) & 1 == 1 { Some((state >> val) & 1 == 1) } else { None }).collect(),
        )
    }

    pub fn read(&self, state: u128, wires: &[usize]) -> usize {
        register_value(wires, state) as usize
    }

    fn eq_controls(wires: &[usize], value: usize) -> Vec<Control> {
        wires.iter().enumerate().map(|(i, &w)| (w, (value >> i) & 1 == 1)).collect()
    }
}

/// Controls meaning "literal `l` is assigned true" need two wires; this sets `target` to that.
fn literal_true_gate(lay: &WalkLayout, l: &Literal, target: usize) -> Gate {
    let (set, val) = lay.x[l.var() - 1];
    Gate::mcx(vec![(set, true), (val, l.is_positive())], target)
}

/// Controls meaning "literal `l` is assigned false".
fn literal_false_controls(lay: &WalkLayout, l: &Literal) -> Vec<Control> {
    let (set, val) = lay.x[l.var() - 1];
    vec![(set, true), (val, !l.is_positive())]
}

/// Sets `lay.unsat` to "no literal of `lits` is true", using `lay.lit` as scratch.
fn clause_unsat_compute(lay: &WalkLayout, lits: &[Literal]) -> Circuit {
    let mut c = Circuit::new(lay.num_wires);
    for (i, l) in lits.iter().enumerate() {
        c.push(literal_true_gate(lay, l, lay.lit[i]));
    }
    c.push(Gate::mcx(lits.iter().enumerate().map(|(i, _)| (lay.lit[i], false)).collect(), lay.unsat));
    c
}

fn sandwich(compute: &Circuit, middle: &Circuit) -> Circuit {
    let mut c = compute.clone();
    c.extend(middle);
    c.extend(&compute.inverse());
    c
}

/// Counts satisfied and falsified clauses into the two counters.
fn clause_counting(lay: &WalkLayout, f: &CnfFormula) -> Circuit {
    let mut c = Circuit::new(lay.num_wires);
    for clause in f.clauses() {
        let compute = clause_unsat_compute(lay, clause);
        let mut mid = Circuit::new(lay.num_wires);
        mid.push(Gate::inc(vec![(lay.unsat, false)], lay.sat_count.clone()));
        c.extend(&sandwich(&compute, &mid));
        let all_false: Vec<Control> = clause.iter().flat_map(|l| literal_false_controls(lay, l)).collect();
        c.push(Gate::inc(all_false, lay.false_count.clone()));
    }
    c
}

/// `leaf ^= [predicate decides]` from the vertex register.
pub fn build_v_leaf(lay: &WalkLayout, f: &CnfFormula) -> Circuit {
    let counting = clause_counting(lay, f);
    let mut mid = Circuit::new(lay.num_wires);
    // leaf = [false_count != 0] XOR [sat_count == m]; the two events exclude each other.
    mid.push(Gate::x(lay.leaf));
    mid.push(Gate::mcx(WalkLayout::eq_controls(&lay.false_count, 0), lay.leaf));
    mid.push(Gate::mcx(WalkLayout::eq_controls(&lay.sat_count, lay.m), lay.leaf));
    sandwich(&counting, &mid)
}

/// `marked ^= [every clause satisfied]`.
pub fn build_v_marked(lay: &WalkLayout, f: &CnfFormula) -> Circuit {
    let counting = clause_counting(lay, f);
    let mut mid = Circuit::new(lay.num_wires);
    mid.push(Gate::mcx(WalkLayout::eq_controls(&lay.sat_count, lay.m), lay.marked));
    sandwich(&counting, &mid)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ScanRule {
    Unit,
    Pure,
    Free,
}

/// Per-variable occurrence counting into `cnt_pos`/`cnt_neg` and the `hit` flag.
fn scan_variable(lay: &WalkLayout, f: &CnfFormula, v: usize, rule: ScanRule) -> Circuit {
    let mut c = Circuit::new(lay.num_wires);
    let (set_v, _) = lay.x[v - 1];
    match rule {
        ScanRule::Free => {
            c.push(Gate::mcx(vec![(set_v, false)], lay.hit));
            return c;
        }
        ScanRule::Unit => {
            for clause in f.clauses() {
                let Some(lv) = clause.iter().find(|l| l.var() == v) else { continue };
                let mut ctl = vec![(set_v, false)];
                for l in clause.iter().filter(|l| l.var() != v) {
                    ctl.extend(literal_false_controls(lay, l));
                }
                let counter = if lv.is_positive() { &lay.cnt_pos } else { &lay.cnt_neg };
                c.push(Gate::inc(ctl, counter.clone()));
            }
            c.push(Gate::mcx(WalkLayout::eq_controls(&lay.cnt_pos, 0), lay.zero_pos));
            c.push(Gate::mcx(WalkLayout::eq_controls(&lay.cnt_neg, 0), lay.zero_neg));
            // hit = some unit clause on v.
            c.push(Gate::x(lay.hit));
            c.push(Gate::mcx(vec![(lay.zero_pos, true), (lay.zero_neg, true)], lay.hit));
        }
        ScanRule::Pure => {
            for clause in f.clauses() {
                let Some(lv) = clause.iter().find(|l| l.var() == v) else { continue };
                let others: Vec<Literal> = clause.iter().filter(|l| l.var() != v).copied().collect();
                let compute = clause_unsat_compute(lay, &others);
                let counter = if lv.is_positive() { &lay.cnt_pos } else { &lay.cnt_neg };
                let mut mid = Circuit::new(lay.num_wires);
                mid.push(Gate::inc(vec![(lay.unsat, true)], counter.clone()));
                c.extend(&sandwich(&compute, &mid));
            }
            c.push(Gate::mcx(WalkLayout::eq_controls(&lay.cnt_pos, 0), lay.zero_pos));
            c.push(Gate::mcx(WalkLayout::eq_controls(&lay.cnt_neg, 0), lay.zero_neg));
            // hit = unset and one polarity absent.
            c.push(Gate::mcx(vec![(set_v, false), (lay.zero_pos, false), (lay.zero_neg, false)], lay.hit));
            c.push(Gate::mcx(vec![(set_v, false)], lay.hit));
        }
    }
    c
}

/// First variable (by index) satisfying the rule: writes its index and sign, counting hits in
/// `found`, then a second pass clears `found`.
fn build_first_hit(lay: &WalkLayout, f: &CnfFormula, rule: ScanRule, out_j: &[usize], out_s: Option<usize>) -> Circuit {
    let mut c = Circuit::new(lay.num_wires);
    let first = WalkLayout::eq_controls(&lay.found, 0);
    for v in 1..=lay.n {
        let scan = scan_variable(lay, f, v, rule);
        let mut mid = Circuit::new(lay.num_wires);
        let mut guard = first.clone();
        guard.push((lay.hit, true));
        for (b, &w) in out_j.iter().enumerate() {
            if (v >> b) & 1 == 1 {
                mid.push(Gate::mcx(guard.clone(), w));
            }
        }
        if let Some(sw) = out_s {
            let mut g = guard.clone();
            match rule {
                // Positive wins when both polarities are unit.
                ScanRule::Unit => g.push((lay.zero_pos, false)),
                // True unless v occurs only negatively, i.e. s = [cnt_neg == 0].
                ScanRule::Pure => g.push((lay.zero_neg, true)),
                ScanRule::Free => {}
            }
            mid.push(Gate::mcx(g, sw));
        }
        mid.push(Gate::inc(vec![(lay.hit, true)], lay.found.clone()));
        c.extend(&sandwich(&scan, &mid));
    }
    for v in 1..=lay.n {
        let scan = scan_variable(lay, f, v, rule);
        let mut mid = Circuit::new(lay.num_wires);
        mid.push(Gate::dec(vec![(lay.hit, true)], lay.found.clone()));
        c.extend(&sandwich(&scan, &mid));
    }
    c
}

/// `(unit_j, unit_s) ^= (j, s)` of the lowest variable with a unit clause, `(0, 0)` if none.
pub fn build_v_unit(lay: &WalkLayout, f: &CnfFormula) -> Circuit {
    build_first_hit(lay, f, ScanRule::Unit, &lay.unit_j, Some(lay.unit_s))
}

/// `(pure_j, pure_s) ^=` the lowest unset variable occurring in at most one polarity.
pub fn build_v_pure(lay: &WalkLayout, f: &CnfFormula) -> Circuit {
    build_first_hit(lay, f, ScanRule::Pure, &lay.pure_j, Some(lay.pure_s))
}

/// `free_j ^=` the lowest unset variable.
pub fn build_v_free(lay: &WalkLayout, f: &CnfFormula) -> Circuit {
    build_first_hit(lay, f, ScanRule::Free, &lay.free_j, None)
}

/// Unit, then pure, then first free: writes `j`, `s` and `forced`.
pub fn build_v_decide(lay: &WalkLayout, f: &CnfFormula) -> Circuit {
    let mut rules = build_v_unit(lay, f);
    rules.extend(&build_v_pure(lay, f));
    rules.extend(&build_v_free(lay, f));
    let mut flags = Circuit::new(lay.num_wires);
    flags.push(Gate::x(lay.unit_flag));
    flags.push(Gate::mcx(WalkLayout::eq_controls(&lay.unit_j, 0), lay.unit_flag));
    flags.push(Gate::x(lay.pure_flag));
    flags.push(Gate::mcx(WalkLayout::eq_controls(&lay.pure_j, 0), lay.pure_flag));
    let mut select = Circuit::new(lay.num_wires);
    let by_unit = vec![(lay.unit_flag, true)];
    let by_pure = vec![(lay.unit_flag, false), (lay.pure_flag, true)];
    let by_free = vec![(lay.unit_flag, false), (lay.pure_flag, false)];
    for b in 0..lay.j.len() {
        let mut g = by_unit.clone();
        g.push((lay.unit_j[b], true));
        select.push(Gate::mcx(g, lay.j[b]));
        let mut g = by_pure.clone();
        g.push((lay.pure_j[b], true));
        select.push(Gate::mcx(g, lay.j[b]));
        let mut g = by_free.clone();
        g.push((lay.free_j[b], true));
        select.push(Gate::mcx(g, lay.j[b]));
    }
    let mut g = by_unit.clone();
    g.push((lay.unit_s, true));
    select.push(Gate::mcx(g, lay.s));
    let mut g = by_pure.clone();
    g.push((lay.pure_s, true));
    select.push(Gate::mcx(g, lay.s));
    select.push(Gate::mcx(by_unit, lay.forced));
    select.push(Gate::mcx(by_pure, lay.forced));
    let mut prep = rules;
    prep.extend(&flags);
    sandwich(&prep, &select)
}

/// `y ^= x[j := b]` from `next_j`, `next_b`, with every gate also controlled by `enable`.
pub fn build_v_next(lay: &WalkLayout, enable: &[Control]) -> Circuit {
    let mut c = Circuit::new(lay.num_wires);
    for i in 0..lay.n {
        for (from, to) in [(lay.x[i].0, lay.y[i].0), (lay.x[i].1, lay.y[i].1)] {
            let mut g = enable.to_vec();
            g.push((from, true));
            c.push(Gate::mcx(g, to));
        }
    }
    for v in 1..=lay.n {
        let mut g = enable.to_vec();
        g.extend(WalkLayout::eq_controls(&lay.next_j, v));
        c.push(Gate::mcx(g.clone(), lay.y[v - 1].0));
        g.push((lay.next_b, true));
        c.push(Gate::mcx(g, lay.y[v - 1].1));
    }
    c
}

/// Householder reflection sending `e_0` to the unit vector `v`.
fn prep_block(v: &[f64]) -> DMatrix<Complex64> {
    let dim = v.len();
    let mut u: Vec<f64> = v.iter().map(|x| -x).collect();
    u[0] += 1.0;
    let nn: f64 = u.iter().map(|x| x * x).sum();
    DMatrix::from_fn(dim, dim, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        let val = if nn < 1e-30 { id } else { id - 2.0 * u[r] * u[c] / nn };
        Complex64::new(val, 0.0)
    })
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn decision_prep(lay: &WalkLayout, f: &CnfFormula) -> Circuit {
    let mut c = build_v_leaf(lay, f);
    c.extend(&build_v_decide(lay, f));
    c.push(Gate::mcx(vec![(lay.leaf, false), (lay.forced, false)], lay.branch));
    c.push(Gate::mcx(lay.x.iter().map(|&(set, _)| (set, false)).collect(), lay.root));
    c
}

/// Loads `next_j`, `next_b` for child `i` given controls, runs `body`, then unloads.
fn with_child_selector(lay: &WalkLayout, i: usize, guard: &[Control], body: &Circuit) -> Circuit {
    let mut load = Circuit::new(lay.num_wires);
    for b in 0..lay.j.len() {
        let mut g = guard.to_vec();
        g.push((lay.j[b], true));
        load.push(Gate::mcx(g, lay.next_j[b]));
    }
    if i == 1 {
        // Forced child takes s; the first branch child takes 0.
        let mut g = guard.to_vec();
        g.extend([(lay.forced, true), (lay.s, true)]);
        load.push(Gate::mcx(g, lay.next_b));
    } else {
        load.push(Gate::mcx(guard.to_vec(), lay.next_b));
    }
    sandwich(&load, body)
}

/// `|x>|0>_y|0>_index -> |x> sum_i a_i |x_i>`: the vertex followed by its children, with the
/// star amplitudes of the walk. The index register is cleared by the disentangling step.
pub fn build_v_a(lay: &WalkLayout, f: &CnfFormula) -> Circuit {
    let n = lay.n as f64;
    let prep = decision_prep(lay, f);
    let mut body = Circuit::new(lay.num_wires);
    let i0 = lay.index[0];
    let i1 = lay.index[1];
    for (root, one, two) in [
        (false, normalized(&[1.0, 1.0]), normalized(&[1.0, 1.0, 1.0, 0.0])),
        (true, normalized(&[1.0, n.sqrt()]), normalized(&[1.0, n.sqrt(), n.sqrt(), 0.0])),
    ] {
        body.push(Gate::ControlledUnitary {
            controls: vec![(lay.leaf, false), (lay.forced, true), (lay.root, root)],
            targets: vec![i0],
            block: prep_block(&one),
        });
        body.push(Gate::ControlledUnitary {
            controls: vec![(lay.branch, true), (lay.root, root)],
            targets: vec![i0, i1],
            block: prep_block(&two),
        });
    }
    // Controlled children: index 0 copies x, index 1 and 2 set variable j.
    let next_any = build_v_next(lay, &[]);
    let mut load = Circuit::new(lay.num_wires);
    for b in 0..lay.j.len() {
        load.push(Gate::mcx(vec![(i0, true), (lay.j[b], true)], lay.next_j[b]));
        load.push(Gate::mcx(vec![(i1, true), (lay.j[b], true)], lay.next_j[b]));
    }
    load.push(Gate::mcx(vec![(i0, true), (lay.forced, true), (lay.s, true)], lay.next_b));
    load.push(Gate::mcx(vec![(i1, true)], lay.next_b));
    body.extend(&sandwich(&load, &next_any));
    // Disentangle: child i is the only branch whose y cancels against x_i.
    let y_zero: Vec<Control> = lay.y.iter().flat_map(|&(s, v)| [(s, false), (v, false)]).collect();
    for (i, guard) in [(1usize, vec![(lay.leaf, false)]), (2, vec![(lay.branch, true)])] {
        let xor_child = with_child_selector(lay, i, &guard, &build_v_next(lay, &guard));
        body.extend(&xor_child);
        let mut g = guard.clone();
        g.extend(y_zero.iter().copied());
        body.push(Gate::mcx(g, if i == 1 { i0 } else { i1 }));
        body.extend(&xor_child);
    }
    sandwich(&prep, &body)
}

/// `U_A (I - 2|0><0|) U_A^dagger` restricted to unmarked vertices of even depth: reflects
/// `|x>|phi_x>` and fixes everything orthogonal to it within the star.
pub fn build_r_a(lay: &WalkLayout, f: &CnfFormula) -> Circuit {
    let u_a = build_v_a(lay, f);
    let mut mid = build_v_marked(lay, f);
    let mut parity = Circuit::new(lay.num_wires);
    for &(set, _) in &lay.x {
        parity.push(Gate::cnot(set, lay.parity));
    }
    mid.extend(&parity);
    let mut ctl: Vec<Control> = lay.y.iter().flat_map(|&(s, v)| [(s, false), (v, false)]).collect();
    ctl.extend(lay.index.iter().map(|&w| (w, false)));
    ctl.push((lay.marked, false));
    ctl.push((lay.parity, false));
    let mut flip = Circuit::new(lay.num_wires);
    flip.push(Gate::PhaseFlip { controls: ctl });
    let inner = sandwich(&mid, &flip);
    let mut c = u_a.inverse();
    c.extend(&inner);
    c.extend(&u_a);
    c
}

#[derive(Clone, Debug)]
pub struct WalkComponents {
    pub layout: WalkLayout,
    pub v_leaf: Circuit,
    pub v_marked: Circuit,
    pub v_unit: Circuit,
    pub v_pure: Circuit,
    pub v_next: Circuit,
    pub v_a: Circuit,
    pub r_a: Circuit,
}

pub fn build_walk_components(f: &CnfFormula) -> WalkComponents {
    let layout = WalkLayout::new(f);
    WalkComponents {
        v_leaf: build_v_leaf(&layout, f),
        v_marked: build_v_marked(&layout, f),
        v_unit: build_v_unit(&layout, f),
        v_pure: build_v_pure(&layout, f),
        v_next: build_v_next(&layout, &[]),
        v_a: build_v_a(&layout, f),
        r_a: build_r_a(&layout, f),
        layout,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QubitReport {
    pub n: usize,
    pub m: usize,
    pub walk_wires: usize,
    pub vertex_wires: usize,
    pub ancillas: usize,
    pub ancillas_per_log2n: f64,
    pub naive_oracle_wires: usize,
    pub counter_oracle_wires: usize,
    pub one_qubit_program_wires: usize,
    pub counter_bits: usize,
}

/// Wire accounting of the walk against `4n + w` next to the Grover oracle variants.
pub fn qubit_report(f: &CnfFormula) -> QubitReport {
    let lay = WalkLayout::new(f);
    let n = f.num_vars();
    QubitReport {
        n,
        m: f.num_clauses(),
        walk_wires: lay.num_wires,
        vertex_wires: 4 * n,
        ancillas: lay.ancilla_count(),
        ancillas_per_log2n: lay.ancilla_count() as f64 / (n.max(2) as f64).log2(),
        naive_oracle_wires: n + f.num_clauses() + 2,
        counter_oracle_wires: n + counter_width(f.num_clauses()) + 1,
        one_qubit_program_wires: n + 2,
        counter_bits: counter_width(f.num_clauses()),
    }
}

/// Children of `a` under DPLL with unit and pure rules, in index order.
pub fn classical_children(f: &CnfFormula, a: &PartialAssignment) -> Vec<PartialAssignment> {
    let node = TreeNode { assignment: a.clone(), depth: a.num_set(), guess_count: 0 };
    match decide(&node, f, &EngineConfig::dpll(f.num_vars())) {
        Step::Leaf(_) => vec![],
        Step::Forced { var, value } => vec![a.with(var, value)],
        Step::Branch { var } => vec![a.with(var, false), a.with(var, true)],
    }
}

/// Star amplitudes `(vertex, children...)` of a non-marked vertex.
pub fn star_amplitudes(n: usize, is_root: bool, children: usize) -> Vec<f64> {
    let w = if is_root { (n as f64).sqrt() } else { 1.0 };
    let mut v = vec![1.0];
    v.extend(std::iter::repeat_n(w, children));
    normalized(&v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f(n: usize, cs: &[&[i64]]) -> CnfFormula {
        let v: Vec<Vec<i64>> = cs.iter().map(|c| c.to_vec()).collect();
        CnfFormula::from_dimacs_clauses(n, &v).unwrap()
    }

    #[test]
    fn x_and_hh() {
        let mut c = Circuit::new(1);
        c.push(Gate::x(0));
        let out = simulate(&c, &StateVector::basis(1, 0)).unwrap();
        assert!((out.amplitudes[1].re - 1.0).abs() < 1e-15);
        let mut c = Circuit::new(1);
        c.push(Gate::h(0));
        c.push(Gate::h(0));
        let out = simulate(&c, &StateVector::basis(1, 1)).unwrap();
        assert!((out.amplitudes[1].re - 1.0).abs() < 1e-12 && out.amplitudes[0].norm() < 1e-12);
    }

    #[test]
    fn incrementer_matches_cascade() {
        let wires = vec![0, 1, 2];
        for decrement in [false, true] {
            let g = Gate::Incrementer { controls: vec![(3, true)], wires: wires.clone(), decrement };
            let cascade = Gate::incrementer_cascade(&[(3, true)], &wires, decrement);
            for s in 0..16u128 {
                let a = g.apply_classical(s).unwrap();
                let b = cascade.iter().fold(s, |x, h| h.apply_classical(x).unwrap());
                assert_eq!(a, b);
            }
        }
        let mut c = Circuit::new(3);
        c.push(Gate::inc(vec![], vec![0, 1, 2]));
        assert_eq!(qubit_cost(&c), 3);
    }

    #[test]
    fn clause_example_is_unmarked() {
        // (!x or !y or z) on x=1, y=1, z=0 is false.
        let g = f(3, &[&[-1, -2, 3]]);
        let o = build_clause_oracle_naive(&g);
        let input = 0b011u128;
        let mut st = SparseState::basis(input);
        for gate in &o.circuit.gates {
            st.apply(gate);
        }
        assert!((st.get(input).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_wire_counts() {
        let g = f(4, &[&[1, 2], &[-1, 3], &[2, -4]]);
        assert_eq!(qubit_cost(&build_clause_oracle_naive(&g).circuit), 9);
        assert_eq!(qubit_cost(&build_clause_oracle_counter(&g).circuit), 4 + 2 + 1);
    }

    #[test]
    fn oracles_flip_exact_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let g = crate::formula::random_kcnf(6, 12, 3, &mut rng);
            for kind in [OracleKind::Naive, OracleKind::Counter] {
                let (dev, leak) = oracle_phase_deviation(&g, &build_clause_oracle(&g, kind)).unwrap();
                assert!(dev < 1e-12 && leak < 1e-12);
            }
        }
    }

    #[test]
    fn grover_two_variables() {
        let g = f(2, &[&[1], &[2]]);
        let r = grover_search(&g, 1);
        assert!((r.success_probability - 1.0).abs() < 1e-12);
        assert_eq!(r.assignment, 0b11);
        assert!((grover_closed_form(2, 1, 1) - 1.0).abs() < 1e-12);
        for kind in [OracleKind::Naive, OracleKind::Counter] {
            assert!((grover_circuit_success(&g, 1, kind).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn qpe_examples() {
        let u = DMatrix::<Complex64>::identity(2, 2);
        let e0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!((qpe_standard(&u, &e0, 3).unwrap() - 1.0).abs() < 1e-12);
        assert!((qpe_counter(&u, &e0, 3).unwrap() - 1.0).abs() < 1e-12);
        let z = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ]));
        let e1 = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        assert!(qpe_standard(&z, &e1, 1).unwrap() < 1e-12);
        assert_eq!(qpe_counter_ancillas(4), 3);
        assert_eq!(qpe_counter_ancillas(5), 4);
        assert_eq!(qpe_counter_ancillas(1), 1);
    }

    #[test]
    fn v_unit_and_v_pure_examples() {
        let g = f(3, &[&[2], &[1, 3]]);
        let lay = WalkLayout::new(&g);
        let out = run_classical(&build_v_unit(&lay, &g), 0);
        assert_eq!(lay.read(out, &lay.unit_j), 2);
        assert_eq!(lay.read(out, &[lay.unit_s]), 1);
        let h = f(2, &[&[1, 2], &[1, -2]]);
        let lay = WalkLayout::new(&h);
        let out = run_classical(&build_v_pure(&lay, &h), 0);
        assert_eq!(lay.read(out, &lay.pure_j), 1);
        assert_eq!(lay.read(out, &[lay.pure_s]), 1);
    }

    fn all_partials(n: usize) -> Vec<PartialAssignment> {
        (0..3usize.pow(n as u32))
            .map(|mut code| {
                PartialAssignment::from_values(
                    (0..n)
                        .map(|_| {
                            let d = code % 3;
                            code /= 3;
                            [None, Some(false), Some(true)][d]
                        })
                        .collect(),
                )
            })
            .collect()
    }

    fn small_formulas() -> Vec<CnfFormula> {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut v = vec![f(3, &[&[2], &[1, 3]]), f(3, &[&[1, 2], &[1, -2], &[-1, 3]])];
        for (n, m, k) in [(4, 5, 2), (4, 6, 3), (4, 9, 3)] {
            v.push(crate::formula::random_kcnf(n, m, k, &mut rng));
        }
        v
    }

    #[test]
    fn components_match_classical_rules() {
        for g in small_formulas() {
            let lay = WalkLayout::new(&g);
            let leaf = build_v_leaf(&lay, &g);
            let marked = build_v_marked(&lay, &g);
            let unit = build_v_unit(&lay, &g);
            let pure = build_v_pure(&lay, &g);
            let dec = build_v_decide(&lay, &g);
            for a in all_partials(g.num_vars()) {
                let x = lay.encode(&a, &lay.x);
                let verdict = g.predicate(&a);
                let out = run_classical(&leaf, x);
                assert_eq!(out & !(1 << lay.leaf), x);
                assert_eq!((out >> lay.leaf) & 1 == 1, verdict != crate::formula::Verdict::Undetermined);
                let out = run_classical(&marked, x);
                assert_eq!(out & !(1 << lay.marked), x);
                assert_eq!((out >> lay.marked) & 1 == 1, verdict == crate::formula::Verdict::Satisfied);
                if verdict != crate::formula::Verdict::Undetermined {
                    continue;
                }
                let expect = crate::formula::unit_rule(&g, &a).unwrap().unwrap_or((0, false));
                let out = run_classical(&unit, x);
                assert_eq!((lay.read(out, &lay.unit_j), lay.read(out, &[lay.unit_s]) == 1), expect, "{a:?}");
                let cleared = out & !lay.unit_j.iter().chain([&lay.unit_s]).fold(0u128, |m, &w| m | 1 << w);
                assert_eq!(cleared, x);
                let expect = crate::formula::pure_literal_rule(&g, &a).unwrap().unwrap_or((0, false));
                let out = run_classical(&pure, x);
                assert_eq!((lay.read(out, &lay.pure_j), lay.read(out, &[lay.pure_s]) == 1), expect, "{a:?}");
                let out = run_classical(&dec, x);
                let kids = classical_children(&g, &a);
                let j = lay.read(out, &lay.j);
                let forced = lay.read(out, &[lay.forced]) == 1;
                assert_eq!(forced, kids.len() == 1);
                assert!(j >= 1 && kids[0].get(j).is_some() && a.get(j).is_none());
                if forced {
                    assert_eq!(kids[0].get(j), Some(lay.read(out, &[lay.s]) == 1));
                }
                let outputs = lay.j.iter().chain([&lay.s, &lay.forced]).fold(0u128, |m, &w| m | 1 << w);
                assert_eq!(out & !outputs, x);
            }
        }
    }

    #[test]
    fn v_a_builds_star_and_disentangles() {
        for g in small_formulas() {
            let lay = WalkLayout::new(&g);
            let v_a = build_v_a(&lay, &g);
            for a in all_partials(g.num_vars()) {
                let x = lay.encode(&a, &lay.x);
                let out = simulate_sparse(&v_a, &SparseState::basis(x)).unwrap();
                let kids = classical_children(&g, &a);
                let amps = star_amplitudes(g.num_vars(), a.num_set() == 0, kids.len());
                let mut terms = vec![(x | lay.encode(&a, &lay.y), amps[0])];
                for (k, c) in kids.iter().enumerate() {
                    terms.push((x | lay.encode(c, &lay.y), amps[k + 1]));
                }
                assert!(out.distance(&SparseState::from_terms(&terms)) < 1e-10, "{a:?}");
            }
        }
    }

    #[test]
    fn r_a_reflects_the_star() {
        let g = f(3, &[&[1, 2], &[1, -2], &[-1, 3]]);
        let lay = WalkLayout::new(&g);
        let r_a = build_r_a(&lay, &g);
        let v_a = build_v_a(&lay, &g);
        for a in all_partials(3) {
            let x = lay.encode(&a, &lay.x);
            let star = simulate_sparse(&v_a, &SparseState::basis(x)).unwrap();
            let out = simulate_sparse(&r_a, &star).unwrap();
            let reflect = a.num_set() % 2 == 0 && g.predicate(&a) != crate::formula::Verdict::Satisfied;
            let mut want = star.clone();
            if reflect {
                want.amplitudes.values_mut().for_each(|z| *z = -*z);
            }
            assert!(out.distance(&want) < 1e-10, "{a:?}");
            let kids = classical_children(&g, &a);
            if let Some(c) = kids.first() {
                // |x>|x_1> - |x>|x> is orthogonal to the star and must be fixed.
                let perp = SparseState::from_terms(&[
                    (x | lay.encode(c, &lay.y), SQRT_HALF),
                    (x | lay.encode(&a, &lay.y), -SQRT_HALF),
                ]);
                let amps = star_amplitudes(3, a.num_set() == 0, kids.len());
                if (amps[0] - amps[1]).abs() < 1e-12 {
                    assert!(simulate_sparse(&r_a, &perp).unwrap().distance(&perp) < 1e-10);
                }
            }
        }
        let rep = qubit_report(&g);
        assert_eq!(rep.walk_wires, rep.vertex_wires + rep.ancillas);
    }
}
