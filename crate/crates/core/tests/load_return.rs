// SPDX-License-Identifier: Apache-2.0

mod common;

use common::*;
use warpkit::checker::{gen_program, program_seed, Weights};
use warpkit::cpu::Simulator;
use warpkit::isa::{decode, ArchState};
use warpkit::stagegraph::VirtualStage;

const LOAD_USE: &str = "addi x1, x0, 0x55\nsw x1, 128(x0)\nlw x2, 128(x5)\nadd x3, x2, x1\nebreak\n";

#[test]
fn load_presented_by_its_return_with_original_fields() {
    let mut golden = ArchState::with_image(&image(LOAD_USE).words, 65536);
    let expected: Vec<_> = (0..5).map(|_| golden.step().unwrap()).collect();
    for config in configs() {
        let (trace, views) = run_views(&config, LOAD_USE);
        let (pos, lw) = trace
            .records
            .iter()
            .enumerate()
            .find(|(_, r)| decode(r.insn).kind.is_load())
            .expect("load retires");
        // original order, insn, pc and source operands
        assert_eq!(lw.order, 2);
        assert_eq!(*lw, expected[2], "{} lat {}", config.stage_map, config.mem_latency);
        assert_eq!(lw.rs1_addr, 5);
        assert_eq!(lw.rd_wdata, 0x55);
        // it surfaces exactly when the pseudo-load-return reaches REG_WR
        let view = views.iter().filter(|v| v.record.is_some()).nth(pos).unwrap();
        assert_eq!(view.record.unwrap(), *lw);
        let injected = views.iter().find(|v| v.load_returned).unwrap().cycle;
        let m = &config.stage_map;
        let travel = m.physical_of(VirtualStage::RegWr) - m.physical_of(VirtualStage::NextPc);
        assert_eq!(view.cycle, injected + u64::from(travel));
        // orders are dense
        let mut orders: Vec<u64> = trace.records.iter().map(|r| r.order).collect();
        orders.sort();
        assert_eq!(orders, vec![0, 1, 2, 3, 4]);
    }
}

#[test]
fn only_loads_are_presented_out_of_order() {
    let weights = Weights::default();
    for config in configs() {
        let sim = Simulator::new(&config).unwrap();
        let mut reordered_loads = 0;
        for i in 0..40 {
            let img = gen_program(program_seed(11, i), 120, &weights);
            let (trace, _) = sim.run(&img).unwrap();
            let mut max_seen: Option<u64> = None;
            for r in &trace.records {
                if let Some(m) = max_seen {
                    if r.order < m {
                        assert!(
                            decode(r.insn).kind.is_load() && !r.trap,
                            "non-load {:#x} out of order on {}",
                            r.insn,
                            config.stage_map
                        );
                        reordered_loads += 1;
                    }
                }
                max_seen = Some(max_seen.map_or(r.order, |m| m.max(r.order)));
            }
        }
        if config.stage_map.depth() > 0 || config.mem_latency > 1 {
            assert!(reordered_loads > 0, "no load ever overtaken on {}", config.stage_map);
        }
    }
}
