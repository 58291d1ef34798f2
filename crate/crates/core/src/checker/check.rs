// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::cpu::MemoryImage;
use crate::harness::{RvfiField, RvfiRecord, RvfiTrace};
use crate::isa::ArchState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ViolationKind {
    DuplicateOrder,
    OrderGap,
    InsnMismatch,
    Rs1Mismatch,
    Rs2Mismatch,
    RdMismatch,
    PcMismatch,
    MemMismatch,
    X0Nonzero,
    TrapMismatch,
    HaltMismatch,
    IncompleteTrace,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub order: u64,
    /// The first differing field, when the violation is about one.
    pub field: Option<String>,
    pub expected: u64,
    pub actual: u64,
    /// Position of the offending record in presentation order.
    pub position: Option<usize>,
    /// Index of the generated program, for fuzz and pair runs.
    pub program: Option<u64>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at order {}", self.kind, self.order)?;
        if let Some(field) = &self.field {
            write!(
                f,
                ": {field} expected {:#x}, got {:#x}",
                self.expected, self.actual
            )?;
        }
        if let Some(p) = self.position {
            write!(f, " (record #{p})")?;
        }
        if let Some(p) = self.program {
            write!(f, " [program {p}]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub pass: bool,
    pub violations: Vec<Violation>,
    /// Records compared against the golden model.
    pub instructions: u64,
    pub programs: u64,
}

impl CheckReport {
    /// The vacuous report: nothing checked, nothing wrong.
    pub fn empty() -> CheckReport {
        CheckReport {
            pass: true,
            ..CheckReport::default()
        }
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.violations.extend(other.violations);
        self.instructions += other.instructions;
        self.programs += other.programs;
        self.pass = self.violations.is_empty();
    }

    pub fn kinds(&self) -> BTreeSet<ViolationKind> {
        self.violations.iter().map(|v| v.kind).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn violation(kind: ViolationKind, order: u64) -> Violation {
    Violation {
        kind,
        order,
        field: None,
        expected: 0,
        actual: 0,
        position: None,
        program: None,
    }
}

/// Field groups in reporting priority; the first group that differs names
/// the violation.
const GROUPS: &[(ViolationKind, &[RvfiField])] = &[
    (ViolationKind::InsnMismatch, &[RvfiField::Insn]),
    (ViolationKind::TrapMismatch, &[RvfiField::Trap, RvfiField::Intr]),
    (ViolationKind::HaltMismatch, &[RvfiField::Halt]),
    (ViolationKind::Rs1Mismatch, &[RvfiField::Rs1Addr, RvfiField::Rs1Rdata]),
    (ViolationKind::Rs2Mismatch, &[RvfiField::Rs2Addr, RvfiField::Rs2Rdata]),
    (ViolationKind::RdMismatch, &[RvfiField::RdAddr, RvfiField::RdWdata]),
    (ViolationKind::PcMismatch, &[RvfiField::PcRdata, RvfiField::PcWdata]),
    (
        ViolationKind::MemMismatch,
        &[
            RvfiField::MemAddr,
            RvfiField::MemRmask,
            RvfiField::MemWmask,
            RvfiField::MemRdata,
            RvfiField::MemWdata,
        ],
    ),
];

/// First divergence of `actual` from the golden `expected`, if any.
pub fn compare_record(expected: &RvfiRecord, actual: &RvfiRecord) -> Option<Violation> {
    let diff = |kind, f: RvfiField| Violation {
        kind,
        order: actual.order,
        field: Some(f.to_string()),
        expected: expected.get(f),
        actual: actual.get(f),
        position: None,
        program: None,
    };
    for &(kind, fields) in GROUPS {
        if kind == ViolationKind::RdMismatch && actual.rd_addr == 0 && actual.rd_wdata != 0 {
            return Some(diff(ViolationKind::X0Nonzero, RvfiField::RdWdata));
        }
        if let Some(&f) = fields.iter().find(|&&f| expected.get(f) != actual.get(f)) {
            return Some(diff(kind, f));
        }
    }
    None
}

/// Checks a trace against golden replay of `image` in a `mem_size`-byte
/// memory.
pub fn check_trace(trace: &RvfiTrace, image: &MemoryImage, mem_size: u32) -> CheckReport {
    let mut violations = Vec::new();
    let mut positions: Vec<(u64, usize)> = trace
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.order, i))
        .collect();
    positions.sort();

    // Density: every order 0..N-1 exactly once.
    let mut unique: Vec<(u64, usize)> = Vec::with_capacity(positions.len());
    for &(order, pos) in &positions {
        if unique.last().is_some_and(|&(o, _)| o == order) {
            let mut v = violation(ViolationKind::DuplicateOrder, order);
            v.position = Some(pos);
            violations.push(v);
        } else {
            unique.push((order, pos));
        }
    }
    let mut expect_next = 0u64;
    for &(order, pos) in &unique {
        if order != expect_next {
            let mut v = violation(ViolationKind::OrderGap, expect_next);
            v.field = Some(RvfiField::Order.to_string());
            v.expected = expect_next;
            v.actual = order;
            v.position = Some(pos);
            violations.push(v);
        }
        expect_next = order.saturating_add(1);
    }

    // Golden replay in order; missing orders are executed but not compared.
    let mut golden = ArchState::with_image(&image.words, mem_size as usize);
    let mut checked = 0u64;
    let step_budget = (trace.records.len() as u64 + 16) * 2;
    let mut steps = 0u64;
    let mut halted_at: Option<u64> = None;
    'records: for &(order, pos) in &unique {
        if let Some(h) = halted_at {
            let mut v = violation(ViolationKind::HaltMismatch, order);
            v.field = Some(RvfiField::Order.to_string());
            v.expected = h;
            v.actual = order;
            v.position = Some(pos);
            violations.push(v);
            break;
        }
        let record = &trace.records[pos];
        loop {
            if steps >= step_budget {
                break 'records;
            }
            steps += 1;
            let expected = match golden.step() {
                Ok(r) => r,
                Err(_) => {
                    let mut v = violation(ViolationKind::PcMismatch, order);
                    v.field = Some(RvfiField::PcRdata.to_string());
                    v.expected = golden.pc as u64;
                    v.actual = record.pc_rdata as u64;
                    v.position = Some(pos);
                    violations.push(v);
                    break 'records;
                }
            };
            if expected.order < order {
                if expected.halt {
                    let mut v = violation(ViolationKind::HaltMismatch, order);
                    v.position = Some(pos);
                    violations.push(v);
                    break 'records;
                }
                continue;
            }
            checked += 1;
            if let Some(mut v) = compare_record(&expected, record) {
                v.position = Some(pos);
                violations.push(v);
            }
            if expected.halt {
                halted_at = Some(order);
            }
            break;
        }
    }

    // Traces read from disk are complete iff they contain a halt.
    if !trace.complete {
        violations.push(violation(ViolationKind::IncompleteTrace, expect_next));
    }
    CheckReport {
        pass: violations.is_empty(),
        violations,
        instructions: checked,
        programs: 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{assemble, ArchState};

    fn golden_trace(src: &str) -> (RvfiTrace, MemoryImage) {
        let image = MemoryImage::new(assemble(src).unwrap());
        let mut s = ArchState::with_image(&image.words, 4096);
        let mut records = Vec::new();
        loop {
            let r = s.step().unwrap();
            records.push(r);
            if r.halt {
                break;
            }
        }
        let trace = RvfiTrace {
            records,
            cycles: 0,
            complete: true,
        };
        (trace, image)
    }

    #[test]
    fn golden_trace_checks_clean() {
        let (t, img) = golden_trace("addi x1, x0, 3\nsw x1, 8(x0)\nlw x2, 8(x0)\nebreak\n");
        let r = check_trace(&t, &img, 4096);
        assert!(r.pass, "{:?}", r.violations);
        assert_eq!((r.instructions, r.programs), (4, 1));
    }

    #[test]
    fn earliest_group_names_the_violation() {
        let (t, _) = golden_trace("addi x1, x0, 3\nebreak\n");
        let good = t.records[0];
        let mut bad = good;
        bad.rd_wdata = 9;
        bad.insn ^= 1 << 20;
        assert_eq!(compare_record(&good, &bad).unwrap().kind, ViolationKind::InsnMismatch);
        assert!(compare_record(&good, &good).is_none());
    }

    #[test]
    fn x0_write_is_its_own_kind() {
        let (t, _) = golden_trace("addi x0, x0, 3\nebreak\n");
        let mut bad = t.records[0];
        bad.rd_wdata = 3;
        let v = compare_record(&t.records[0], &bad).unwrap();
        assert_eq!(v.kind, ViolationKind::X0Nonzero);
    }

    #[test]
    fn missing_range_is_one_gap() {
        let (mut t, img) = golden_trace("nop\nnop\nnop\nnop\nnop\nebreak\n");
        t.records.retain(|r| !(1..=3).contains(&r.order));
        let r = check_trace(&t, &img, 4096);
        assert_eq!(r.violations.len(), 1);
        let v = &r.violations[0];
        assert_eq!((v.kind, v.expected, v.actual), (ViolationKind::OrderGap, 1, 4));
        assert_eq!(r.instructions, 3);
    }

    #[test]
    fn merge_tracks_pass() {
        let mut a = CheckReport::empty();
        let (t, img) = golden_trace("ebreak\n");
        a.merge(check_trace(&t, &img, 4096));
        assert!(a.pass);
        let mut incomplete = t.clone();
        incomplete.complete = false;
        a.merge(check_trace(&incomplete, &img, 4096));
        assert!(!a.pass);
        assert_eq!(a.programs, 2);
        assert_eq!(a.kinds().into_iter().collect::<Vec<_>>(), vec![ViolationKind::IncompleteTrace]);
    }
}
