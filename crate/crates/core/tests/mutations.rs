// SPDX-License-Identifier: Apache-2.0

mod common;

use common::*;
use warpkit::checker::{fuzz, ViolationKind};
use warpkit::cpu::Mutation;
use warpkit::isa::{decode, Kind};

/// Violation kinds a mutant is expected to raise; any one suffices.
fn expected(m: Mutation) -> &'static [ViolationKind] {
    use ViolationKind::*;
    match m {
        Mutation::ScoreboardOff => &[Rs1Mismatch, Rs2Mismatch],
        Mutation::SquashShort => &[InsnMismatch],
        Mutation::RecircLate | Mutation::RecircEarly => &[OrderGap],
        Mutation::RdWdataStale => &[RdMismatch],
        Mutation::Rs1ZeroingDropped => &[Rs1Mismatch],
        Mutation::LoadOrderTag => &[OrderGap],
    }
}

#[test]
fn every_mutant_is_caught_within_500_programs() {
    for n in [5, 7] {
        for m in Mutation::ALL {
            let mut config = preset(n);
            config.mutation = Some(m);
            let r = fuzz(&config, 2024, 500, 100).unwrap();
            let hit = r
                .violations
                .iter()
                .find(|v| expected(m).contains(&v.kind))
                .unwrap_or_else(|| panic!("{m} on {n}-stage: only {:?}", r.kinds()));
            assert!(hit.program.unwrap() < 500);
        }
    }
}

#[test]
fn healthy_build_is_clean_on_the_same_programs() {
    for n in [5, 7] {
        let r = fuzz(&preset(n), 2024, 500, 100).unwrap();
        assert!(r.pass, "{:?}", r.violations.first());
    }
}

#[test]
fn rs1_zeroing_mutant_breaks_the_is_reg_rule() {
    // lui has no rs1: the field bits must be reported as x0
    let src = "lui x1, 0x12345\njal x2, next\nnext: auipc x3, 7\nebreak\n";
    let mut config = preset(5);
    config.mutation = Some(Mutation::Rs1ZeroingDropped);
    let (trace, _) = run(&config, src);
    let img = image(src);
    let r = warpkit::checker::check_trace(&trace, &img, config.mem_size);
    assert!(!r.pass);
    for v in &r.violations {
        assert_eq!(v.kind, ViolationKind::Rs1Mismatch);
        assert_eq!(v.field.as_deref(), Some("rvfi_rs1_addr"));
        assert_eq!(v.expected, 0);
        let insn = img.words[v.order as usize];
        assert!(!decode(insn).kind.reads_rs1());
        assert_eq!(v.actual, u64::from(insn >> 15 & 31));
    }
    assert!(matches!(decode(img.words[0]).kind, Kind::Lui));
}
