//! s-implication with advice: the sequential reference, its split into width-`w` blocks that
//! only see the previous block, and the Bennett pebbling schedule that runs the blocks
//! reversibly under xor-write semantics with `k = log2(blocks)` intermediate cells.

use std::fmt::Write as _;
use std::ops::BitXorAssign;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{index_width, restrict, s_implied_in, Clause, CnfFormula, Literal, PartialAssignment};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SiaError {
    #[error("index width {width} exceeds block width {w}")]
    WidthExceeded { width: usize, w: usize },
    #[error("block width must be in 1..=64, got {0}")]
    BadBlockWidth(usize),
    #[error("s must be at least 1")]
    ZeroS,
    #[error("cell M[{0}] not restored to zero")]
    CellNotRestored(i64),
    #[error("local and full s-implication disagree on variable {var} with prefix {prefix:?}")]
    LocalityMismatch { var: usize, prefix: Vec<bool> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum StopReason {
    Contradiction,
    Satisfied,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum SiaKind {
    ZeroChildren { reason: StopReason },
    /// Advice ran out where a guess was needed.
    TwoChildren { at_variable: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SiaOutcome {
    pub kind: SiaKind,
    pub advice_consumed: usize,
    /// Nonzero status code of the stopping cell, see [`Cell::status`].
    pub flag_r: u8,
    /// Variable at which the run stopped; `n + 1` when every variable was assigned.
    pub stop: usize,
    /// Values of variables `1..stop`.
    pub assignment: Vec<bool>,
}

pub const STATUS_RUNNING: u8 = 0;
pub const STATUS_CONTRADICTION: u8 = 1;
pub const STATUS_OUT_OF_ADVICE: u8 = 2;
pub const STATUS_SATISFIED: u8 = 3;

fn outcome_from(status: u8, stop: usize, consumed: usize, assignment: Vec<bool>) -> SiaOutcome {
    let kind = match status {
        STATUS_CONTRADICTION => SiaKind::ZeroChildren { reason: StopReason::Contradiction },
        STATUS_SATISFIED => SiaKind::ZeroChildren { reason: StopReason::Satisfied },
        STATUS_OUT_OF_ADVICE => SiaKind::TwoChildren { at_variable: stop },
        _ => unreachable!("running cells carry no outcome"),
    };
    SiaOutcome { kind, advice_consumed: consumed, flag_r: status, stop, assignment }
}

/// Assigns variables `1..=n` in order: stop on contradiction or satisfaction, take s-implied
/// values for free, otherwise read the next advice bit. The stop test also runs once after
/// the last variable, so a full assignment ends as satisfied or contradicted.
pub fn sia_reference(f: &CnfFormula, advice: &[bool], s: usize) -> SiaOutcome {
    let n = f.num_vars();
    let mut a = PartialAssignment::empty(n);
    let mut p = 0usize;
    for i in 1..=n + 1 {
        let r = restrict(f, &a).expect("dimensions match");
        let done = |status| outcome_from(status, i, p, a.completed(false)[..i - 1].to_vec());
        if r.has_empty_clause() {
            return done(STATUS_CONTRADICTION);
        }
        if r.is_empty() {
            return done(STATUS_SATISFIED);
        }
        debug_assert!(i <= n, "a full assignment is always decided");
        let value = match s_implied_in(r.clauses(), i, s).forced_value() {
            Some(v) => v,
            None if p == advice.len() => return done(STATUS_OUT_OF_ADVICE),
            None => {
                p += 1;
                advice[p - 1]
            }
        };
        a.set(i, value);
    }
    unreachable!("the stop test after variable n always fires")
}

/// One memory cell: the values of a block, the advice cursor, the status code and the stop
/// variable. Cells combine by xor, field by field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Cell {
    /// Bit `j` is the value of the block's `j`-th variable.
    pub values: u64,
    pub cursor: u32,
    /// 0 running, 1 contradiction, 2 out of advice, 3 satisfied. Nonzero means dead.
    pub status: u8,
    pub stop: u32,
}

impl BitXorAssign for Cell {
    fn bitxor_assign(&mut self, o: Cell) {
        self.values ^= o.values;
        self.cursor ^= o.cursor;
        self.status ^= o.status;
        self.stop ^= o.stop;
    }
}

impl Cell {
    pub fn is_zero(&self) -> bool {
        *self == Cell::default()
    }
}

/// A formula prepared for block-wise evaluation with `w` variables per block and `2^k`
/// blocks. Variables past `n` are padding: they are never reached because the stop test
/// fires right after variable `n`.
#[derive(Clone, Debug)]
pub struct SiaInstance {
    pub f: CnfFormula,
    pub w: usize,
    pub s: usize,
    pub k: usize,
    pub blocks: usize,
    clauses_by_max: Vec<Vec<Clause>>,
}

impl SiaInstance {
    pub fn new(f: &CnfFormula, w: usize, s: usize) -> Result<Self, SiaError> {
        if w == 0 || w > 64 {
            return Err(SiaError::BadBlockWidth(w));
        }
        if s == 0 {
            return Err(SiaError::ZeroS);
        }
        let width = index_width(f);
        if width > w {
            return Err(SiaError::WidthExceeded { width, w });
        }
        let n = f.num_vars();
        let needed = n.div_ceil(w).max(1);
        let blocks = needed.next_power_of_two();
        let mut clauses_by_max = vec![Vec::new(); n + 2];
        for c in f.clauses() {
            let hi = c.iter().map(|l| l.var()).max().unwrap_or(0);
            clauses_by_max[hi].push(c.clone());
        }
        Ok(SiaInstance { f: f.clone(), w, s, k: blocks.trailing_zeros() as usize, blocks, clauses_by_max })
    }

    pub fn n(&self) -> usize {
        self.f.num_vars()
    }

    /// Variables after padding.
    pub fn padded_n(&self) -> usize {
        self.blocks * self.w
    }

    /// Cell width in bits: values, cursor, status, stop index.
    pub fn cell_bits(&self, advice_len: usize) -> usize {
        self.w + bits_for(advice_len) + 2 + bits_for(self.n() + 1)
    }

    /// Stop test before assigning variable `i`, reading earlier values through `value`.
    /// Clauses whose top variable precedes `i - 1` were checked at earlier steps.
    fn stop_status(&self, i: usize, value: &dyn Fn(usize) -> bool) -> u8 {
        let lit_true = |l: &Literal| l.eval(value(l.var()));
        let n = self.n();
        if i == 1 && !self.clauses_by_max[0].is_empty() {
            return STATUS_CONTRADICTION;
        }
        if i >= 2 && self.clauses_by_max[i - 1].iter().any(|c| !c.iter().any(lit_true)) {
            return STATUS_CONTRADICTION;
        }
        let open_satisfied = self.clauses_by_max[i.min(n + 1)..]
            .iter()
            .flatten()
            .all(|c| c.iter().any(|l| l.var() < i && lit_true(l)));
        if open_satisfied {
            STATUS_SATISFIED
        } else {
            STATUS_RUNNING
        }
    }

    /// The restriction of clauses still open at `i`, from earlier values only.
    fn local_restriction(&self, i: usize, value: &dyn Fn(usize) -> bool) -> Vec<Clause> {
        self.clauses_by_max[i..=self.n()]
            .iter()
            .flatten()
            .filter(|c| !c.iter().any(|l| l.var() < i && l.eval(value(l.var()))))
            .map(|c| c.iter().filter(|l| l.var() >= i).copied().collect())
            .collect()
    }

    /// `SIAB_a` (blocks numbered from 1): variables `(a-1)w + 1 ..= a w` from the previous
    /// block's cell. Dead inputs pass through unchanged; block 1 ignores its input.
    pub fn siab(&self, a: usize, input: &Cell, advice: &[bool]) -> Cell {
        let input = if a == 1 { Cell::default() } else { *input };
        if input.status != STATUS_RUNNING {
            return input;
        }
        let w = self.w;
        let n = self.n();
        let start = (a - 1) * w + 1;
        let mut out = Cell { values: 0, cursor: input.cursor, status: STATUS_RUNNING, stop: 0 };
        if a == 1 {
            let status = self.stop_status(1, &|_| false);
            if status != STATUS_RUNNING {
                out.status = status;
                out.stop = 1;
                return out;
            }
        }
        // The stop test for i + 1 runs right after assigning i, while every variable it
        // reads is still inside the window of the last w values.
        for i in start..start + w {
            let cur = out.values;
            let value = |v: usize| {
                if v >= start {
                    (cur >> (v - start)) & 1 == 1
                } else {
                    (input.values >> (v + w - start)) & 1 == 1
                }
            };
            let local = self.local_restriction(i, &value);
            let bit = match s_implied_in(&local, i, self.s).forced_value() {
                Some(v) => v,
                None if out.cursor as usize == advice.len() => {
                    out.status = STATUS_OUT_OF_ADVICE;
                    out.stop = i as u32;
                    return out;
                }
                None => {
                    out.cursor += 1;
                    advice[out.cursor as usize - 1]
                }
            };
            if bit {
                out.values |= 1 << (i - start);
            }
            let cur = out.values;
            let value = |v: usize| {
                if v >= start {
                    (cur >> (v - start)) & 1 == 1
                } else {
                    (input.values >> (v + w - start)) & 1 == 1
                }
            };
            let status = self.stop_status(i + 1, &value);
            if status != STATUS_RUNNING {
                out.status = status;
                out.stop = (i + 1) as u32;
                return out;
            }
        }
        debug_assert!(start + w - 1 < n, "the stop test after variable n always fires");
        out
    }

    /// Irreversible composition of all blocks, keeping every block's output.
    pub fn siac(&self, advice: &[bool]) -> (SiaOutcome, Vec<Cell>) {
        let mut cells = Vec::with_capacity(self.blocks);
        let mut cur = Cell::default();
        for a in 1..=self.blocks {
            cur = self.siab(a, &cur, advice);
            cells.push(cur);
        }
        let last = cur;
        let stop = last.stop as usize;
        let assignment = (1..stop)
            .map(|v| {
                let b = (v - 1) / self.w;
                (cells[b].values >> ((v - 1) % self.w)) & 1 == 1
            })
            .collect();
        (outcome_from(last.status, stop, last.cursor as usize, assignment), cells)
    }
}

fn bits_for(max_value: usize) -> usize {
    (usize::BITS - max_value.leading_zeros()) as usize
}

/// One schedule line: `M[target] ^= SIAB_block(M[source])`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScheduleEntry {
    pub block: usize,
    pub source: i64,
    pub target: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PebbleSchedule {
    pub entries: Vec<ScheduleEntry>,
    pub pebble_count: usize,
}

impl PebbleSchedule {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let _ = writeln!(s, "M[{}] ^= SIAB_{}(M[{}])", e.target, e.block, e.source);
        }
        s
    }
}

fn siar(a: usize, s: i64, t: i64, p: usize, out: &mut Vec<ScheduleEntry>) {
    if p == 0 {
        out.push(ScheduleEntry { block: a, source: s, target: t });
        return;
    }
    let r = (p - 1) as i64;
    let b = a + (1 << (p - 1));
    siar(a, s, r, p - 1, out);
    siar(b, r, t, p - 1, out);
    siar(a, s, r, p - 1, out);
}

/// Bennett schedule over `2^k` blocks from `M[-1]` into `M[k]` using cells `M[0..k-1]`.
pub fn siar_schedule(k: usize) -> PebbleSchedule {
    let mut entries = Vec::with_capacity(3usize.pow(k as u32));
    siar(1, -1, k as i64, k, &mut entries);
    PebbleSchedule { entries, pebble_count: k }
}

/// Largest number of intermediate cells holding a value at once, tracking occupancy by the
/// parity of writes so a block that happens to output zero still counts as occupied.
pub fn schedule_peak_live(schedule: &PebbleSchedule) -> usize {
    let mut live = vec![false; schedule.pebble_count];
    let mut peak = 0;
    for e in &schedule.entries {
        if (e.target as usize) < schedule.pebble_count {
            live[e.target as usize] ^= true;
        }
        peak = peak.max(live.iter().filter(|&&b| b).count());
    }
    peak
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SiarTrace {
    pub outcome: SiaOutcome,
    pub leaf_calls: usize,
    pub peak_live: usize,
    /// Cells `M[-1..=k]` after the run.
    pub final_cells: Vec<Cell>,
    pub intermediates_clear: bool,
    /// Whether a second run of the schedule returned every cell to zero.
    pub self_inverse: bool,
    /// Cell index touched by each step, in order.
    pub accesses: Vec<ScheduleEntry>,
}

/// Runs the schedule under `M[t] ^= SIAB_a(M[s])` and decodes the outcome from `M[k]`.
pub fn siar_execute(inst: &SiaInstance, advice: &[bool]) -> Result<SiarTrace, SiaError> {
    let schedule = siar_schedule(inst.k);
    let k = inst.k;
    let mut cells = vec![Cell::default(); k + 2];
    let idx = |m: i64| (m + 1) as usize;
    let run = |cells: &mut Vec<Cell>| {
        for e in &schedule.entries {
            let v = inst.siab(e.block, &cells[idx(e.source)], advice);
            cells[idx(e.target)] ^= v;
        }
    };
    run(&mut cells);
    let final_cells = cells.clone();
    let intermediates_clear = cells[1..=k].iter().all(Cell::is_zero);
    if !intermediates_clear {
        let bad = cells[1..=k].iter().position(|c| !c.is_zero()).unwrap();
        return Err(SiaError::CellNotRestored(bad as i64));
    }
    let out = cells[idx(k as i64)];
    let (_, blocks) = inst.siac(advice);
    let stop = out.stop as usize;
    let assignment = (1..stop)
        .map(|v| (blocks[(v - 1) / inst.w].values >> ((v - 1) % inst.w)) & 1 == 1)
        .collect();
    let outcome = outcome_from(out.status, stop, out.cursor as usize, assignment);
    run(&mut cells);
    let self_inverse = cells.iter().all(Cell::is_zero);
    Ok(SiarTrace {
        outcome,
        leaf_calls: schedule.entries.len(),
        peak_live: schedule_peak_live(&schedule),
        final_cells,
        intermediates_clear,
        self_inverse,
        accesses: schedule.entries,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LocalityReport {
    pub prefixes_checked: usize,
    pub mismatches: usize,
}

/// Compares s-implication of variable `i` computed from the whole prefix against the value
/// computed from only the last `w` prefix values, for sampled prefixes.
pub fn locality_check<R: rand::Rng + ?Sized>(
    f: &CnfFormula,
    w: usize,
    s: usize,
    samples: usize,
    rng: &mut R,
) -> Result<LocalityReport, SiaError> {
    let inst = SiaInstance::new(f, w, s)?;
    let n = f.num_vars();
    let mut checked = 0;
    for _ in 0..samples {
        if n == 0 {
            break;
        }
        let i = rng.gen_range(1..=n);
        let prefix: Vec<bool> = (1..i).map(|_| rng.gen()).collect();
        let mut a = PartialAssignment::empty(n);
        for (v, &b) in prefix.iter().enumerate() {
            a.set(v + 1, b);
        }
        let r = restrict(f, &a).expect("dimensions match");
        if r.has_empty_clause() {
            continue;
        }
        let full = s_implied_in(r.clauses(), i, s).forced_value();
        let lo = i.saturating_sub(w).max(1);
        let window = |v: usize| {
            assert!(v >= lo, "local evaluation read variable {v} outside the window");
            prefix[v - 1]
        };
        let local = s_implied_in(&inst.local_restriction(i, &window), i, s).forced_value();
        checked += 1;
        if full != local {
            return Err(SiaError::LocalityMismatch { var: i, prefix });
        }
    }
    Ok(LocalityReport { prefixes_checked: checked, mismatches: 0 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResourceReport {
    pub n: usize,
    pub w: usize,
    pub blocks: usize,
    pub k: usize,
    pub cell_bits: usize,
    pub cursor_bits: usize,
    pub flag_bits: usize,
    pub siab_ancillas: usize,
    /// `k` intermediate cells plus the output cell.
    pub space_wires: usize,
    /// `w log2(n/w)`, the leading space term.
    pub leading_space: usize,
    pub schedule_length: usize,
    /// `w d^s ceil(log2 log2 n)` per block.
    pub block_time: f64,
    pub time: f64,
}

fn ceil_log2(x: usize) -> usize {
    if x <= 1 {
        0
    } else {
        bits_for(x - 1)
    }
}

/// Space and time of the pebbled circuit for `n` variables, block width `w`, implication
/// size `s` and degree `d`. Cells use the cursor/flag layout `w + ceil(log2 n) + ceil(log2 w)`.
pub fn resource_account(n: usize, w: usize, s: usize, d: usize) -> ResourceReport {
    let blocks = n.div_ceil(w.max(1)).max(1).next_power_of_two();
    let k = blocks.trailing_zeros() as usize;
    let cursor_bits = ceil_log2(n).max(1);
    let flag_bits = ceil_log2(w).max(1);
    let cell_bits = w + cursor_bits + flag_bits;
    let loglog = ((n.max(2) as f64).log2().log2().ceil()).max(1.0);
    let block_time = w as f64 * (d.max(1) as f64).powi(s as i32) * loglog;
    let schedule_length = 3usize.pow(k as u32);
    ResourceReport {
        n,
        w,
        blocks,
        k,
        cell_bits,
        cursor_bits,
        flag_bits,
        siab_ancillas: ceil_log2(n).max(1),
        space_wires: (k + 1) * cell_bits,
        leading_space: w * k,
        schedule_length,
        block_time,
        time: schedule_length as f64 * block_time,
    }
}

/// Random formula of index width at most `w`: every clause draws its variables from a
/// window of `w + 1` consecutive indices.
pub fn random_banded_kcnf<R: rand::Rng + ?Sized>(n: usize, m: usize, k: usize, w: usize, rng: &mut R) -> CnfFormula {
    let span = (w + 1).min(n);
    let k = k.min(span);
    let clauses: Vec<Vec<i64>> = (0..m)
        .map(|_| {
            let lo = rng.gen_range(1..=n + 1 - span);
            let vars = rand::seq::index::sample(rng, span, k);
            vars.iter().map(|d| {
                let v = (lo + d) as i64;
                if rng.gen() { v } else { -v }
            }).collect()
        })
        .collect();
    CnfFormula::from_dimacs_clauses(n, &clauses).expect("valid banded formula")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f(n: usize, cs: &[&[i64]]) -> CnfFormula {
        let v: Vec<Vec<i64>> = cs.iter().map(|c| c.to_vec()).collect();
        CnfFormula::from_dimacs_clauses(n, &v).unwrap()
    }

    #[test]
    fn reference_examples() {
        let o = sia_reference(&f(1, &[&[1]]), &[], 1);
        assert_eq!(o.kind, SiaKind::ZeroChildren { reason: StopReason::Satisfied });
        assert_eq!(o.advice_consumed, 0);
        let o = sia_reference(&f(2, &[&[1, 2]]), &[], 1);
        assert_eq!(o.kind, SiaKind::TwoChildren { at_variable: 1 });
        let o = sia_reference(&f(2, &[&[1, 2], &[-1, 2], &[-2]]), &[true], 1);
        assert_eq!(o.kind, SiaKind::ZeroChildren { reason: StopReason::Contradiction });
        assert_eq!(o.advice_consumed, 1);
    }

    #[test]
    fn small_schedules() {
        let s0 = siar_schedule(0);
        assert_eq!(s0.entries, vec![ScheduleEntry { block: 1, source: -1, target: 0 }]);
        let s1 = siar_schedule(1);
        let e = |block, source, target| ScheduleEntry { block, source, target };
        assert_eq!(s1.entries, vec![e(1, -1, 0), e(2, 0, 1), e(1, -1, 0)]);
        for k in 0..=6 {
            let s = siar_schedule(k);
            assert_eq!(s.entries.len(), 3usize.pow(k as u32));
            assert_eq!(schedule_peak_live(&s), k);
        }
    }

    #[test]
    fn flagged_input_passes_through() {
        let g = f(4, &[&[1, 2], &[2, 3], &[3, 4]]);
        let inst = SiaInstance::new(&g, 2, 1).unwrap();
        let dead = Cell { values: 0b10, cursor: 1, status: STATUS_CONTRADICTION, stop: 2 };
        assert_eq!(inst.siab(2, &dead, &[true]), dead);
    }

    #[test]
    fn unit_chain_block_reads_no_advice() {
        // x1, x1 -> x2, x2 -> x3, x3 -> x4.
        let g = f(4, &[&[1], &[-1, 2], &[-2, 3], &[-3, 4]]);
        let inst = SiaInstance::new(&g, 2, 1).unwrap();
        let b1 = inst.siab(1, &Cell::default(), &[]);
        assert_eq!((b1.values, b1.cursor, b1.status), (0b11, 0, STATUS_RUNNING));
        let b2 = inst.siab(2, &b1, &[]);
        assert_eq!((b2.values, b2.cursor, b2.status), (0b11, 0, STATUS_SATISFIED));
    }

    #[test]
    fn blocks_and_pebbling_match_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..60 {
            let n = rng.gen_range(2..=12);
            let w = rng.gen_range(1..=4).min(n);
            let g = random_banded_kcnf(n, rng.gen_range(1..=2 * n), 3, w, &mut rng);
            let s = rng.gen_range(1..=3);
            let inst = SiaInstance::new(&g, w, s).unwrap();
            let advice: Vec<bool> = (0..rng.gen_range(0..=n)).map(|_| rng.gen()).collect();
            let want = sia_reference(&g, &advice, s);
            assert_eq!(inst.siac(&advice).0, want);
            let t = siar_execute(&inst, &advice).unwrap();
            assert_eq!(t.outcome, want);
            assert!(t.self_inverse && t.peak_live <= inst.k);
        }
    }

    #[test]
    fn locality_holds_and_guards_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_banded_kcnf(12, 20, 3, 3, &mut rng);
        assert_eq!(locality_check(&g, 3, 2, 200, &mut rng).unwrap().mismatches, 0);
        let wide = f(5, &[&[1, 5]]);
        assert!(matches!(locality_check(&wide, 2, 1, 10, &mut rng), Err(SiaError::WidthExceeded { .. })));
    }

    #[test]
    fn resource_examples() {
        let r = resource_account(8, 1, 1, 3);
        assert_eq!(r.schedule_length, 27);
        let r = resource_account(8, 8, 1, 3);
        assert_eq!((r.blocks, r.space_wires), (1, r.cell_bits));
    }
}
