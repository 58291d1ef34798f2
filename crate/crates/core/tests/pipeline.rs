// SPDX-License-Identifier: Apache-2.0

mod common;

use common::*;
use warpkit::checker::check_trace;
use warpkit::cpu::CoreConfig;
use warpkit::isa::ArchState;
use warpkit::stagegraph::{StageMap, VirtualStage};

fn clean(config: &CoreConfig, src: &str) {
    let (trace, _) = run(config, src);
    let report = check_trace(&trace, &image(src), config.mem_size);
    assert!(report.pass, "{}: {:?}", config.stage_map, report.violations);
}

#[test]
fn smoke_program_retires_eleven_everywhere() {
    for config in configs() {
        let (trace, stats) = run(&config, SMOKE);
        assert!(trace.complete);
        assert_eq!(trace.records.len(), 11, "{}", config.stage_map);
        assert_eq!(stats.retirements, 11);
        assert_eq!(stats.load_issues, 1);
        assert_eq!(stats.load_returns, 1);
        clean(&config, SMOKE);
    }
}

#[test]
fn straight_line_alu_is_one_per_cycle_on_single_stage() {
    let src: String = (1..=20)
        .map(|i| format!("addi x{}, x0, {i}\n", i % 8 + 1))
        .chain(std::iter::once("ebreak\n".to_string()))
        .collect();
    let (trace, views) = run_views(&preset(1), &src);
    assert_eq!(trace.records.len(), 21);
    let cycles: Vec<u64> = views.iter().filter(|v| v.record.is_some()).map(|v| v.cycle).collect();
    // after the first retirement, one per cycle
    assert!(cycles.windows(2).all(|w| w[1] == w[0] + 1), "{cycles:?}");
}

#[test]
fn taken_branch_squashes_execute_distance_slots() {
    let src = "beq x0, x0, t\naddi x1, x0, 1\naddi x2, x0, 2\naddi x3, x0, 3\n\
               addi x4, x0, 4\naddi x5, x0, 5\naddi x6, x0, 6\naddi x7, x0, 7\nt: addi x8, x0, 8\nebreak\n";
    for map in StageMap::presets() {
        let expect = map.physical_of(VirtualStage::Execute) - map.physical_of(VirtualStage::NextPc);
        let config = CoreConfig::with_map(map.clone());
        let (trace, views) = run_views(&config, src);
        assert_eq!(trace.records.len(), 3, "wrong-path instruction retired on {map}");
        let at: Vec<u64> = views.iter().filter(|v| v.record.is_some()).map(|v| v.cycle).collect();
        let gap = (at[1] - at[0] - 1) as u32;
        assert_eq!(gap, expect, "{map}");
        let squashed: u32 = views
            .iter()
            .filter(|v| v.cycle > at[0] - u64::from(expect) && v.cycle <= at[1])
            .map(|v| v.squashed)
            .sum();
        assert!(squashed >= expect, "{map}: {squashed}");
    }
    // the seven-stage numbers from the contract
    let m = StageMap::seven_stage();
    assert_eq!(m.physical_of(VirtualStage::Execute) - m.physical_of(VirtualStage::NextPc), 4);
}

#[test]
fn load_use_waits_for_the_return() {
    let src = "addi x1, x0, 42\nsw x1, 64(x0)\nlw x2, 64(x0)\nadd x3, x2, x2\nebreak\n";
    for config in configs() {
        let (trace, stats) = run(&config, src);
        let sorted = trace.sorted();
        assert_eq!(sorted[3].rd_wdata, 84, "{} lat {}", config.stage_map, config.mem_latency);
        assert!(stats.stalls > 0);
        clean(&config, src);
    }
}

#[test]
fn outstanding_loads_bounded_by_config() {
    let src = "lw x1, 0(x0)\nlw x2, 4(x0)\nlw x3, 8(x0)\nlw x4, 12(x0)\nlw x5, 16(x0)\nlw x6, 20(x0)\n\
               add x7, x1, x6\nebreak\n";
    for limit in [1, 2, 4] {
        let mut config = preset(5);
        config.mem_latency = 5;
        config.max_pending_loads = limit;
        let (trace, views) = run_views(&config, src);
        assert!(trace.complete);
        let mut outstanding = 0i64;
        let mut peak = 0;
        for v in &views {
            outstanding += v.load_issued as i64 - v.load_returned as i64;
            peak = peak.max(outstanding);
        }
        assert!(peak <= limit as i64 && peak >= 1, "peak {peak} limit {limit}");
        clean(&config, src);
    }
}

#[test]
fn counted_backward_loop() {
    // sum 1..=10 with a backward branch: 3 setup + 10 * 3 loop + ebreak
    let src = "addi x1, x0, 10\naddi x2, x0, 0\naddi x3, x0, 0\n\
               loop: add x2, x2, x1\naddi x1, x1, -1\nbne x1, x0, loop\nebreak\n";
    let mut golden = ArchState::with_image(&image(src).words, 65536);
    while !golden.step().unwrap().halt {}
    assert_eq!(golden.regs[2], 55);
    for config in configs() {
        let (trace, _) = run(&config, src);
        assert_eq!(trace.records.len(), 34);
        assert_eq!(trace.sorted().iter().rev().nth(3).unwrap().rd_wdata, 55);
        clean(&config, src);
    }
}

#[test]
fn traps_retire_and_do_not_write() {
    let src = "addi x1, x0, 1\nlw x2, 2(x0)\nsw x1, 1(x1)\njalr x3, 2(x0)\n.word 0xffffffff\naddi x4, x0, 4\nebreak\n";
    for config in configs() {
        let (trace, _) = run(&config, src);
        let sorted = trace.sorted();
        assert!(sorted[1].trap && sorted[2].trap && sorted[3].trap && sorted[4].trap);
        assert_eq!(sorted[1].rd_addr, 0);
        clean(&config, src);
    }
}

#[test]
fn timeout_leaves_incomplete_trace() {
    let mut config = preset(5);
    config.max_cycles = 6;
    let (trace, stats) = run(&config, SMOKE);
    assert!(!trace.complete);
    assert_eq!(stats.cycles, 6);
    let report = check_trace(&trace, &image(SMOKE), config.mem_size);
    assert!(report.kinds().contains(&warpkit::checker::ViolationKind::IncompleteTrace));
}

#[test]
fn exactly_once_retirement() {
    for config in configs() {
        let (trace, stats) = run(&config, SMOKE);
        let mut orders: Vec<u64> = trace.records.iter().map(|r| r.order).collect();
        orders.sort();
        assert_eq!(orders, (0..11).collect::<Vec<_>>());
        assert_eq!(stats.retirements, trace.records.len() as u64);
        assert!(trace.records.iter().all(|r| r.valid));
    }
}
