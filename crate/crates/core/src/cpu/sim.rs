// SPDX-License-Identifier: Apache-2.0

use crate::harness::{attach_rvfi_with, RvfiPorts, RvfiRecord, RvfiTrace};
use crate::stagegraph::{elaborate, ArrayId, ElaboratedDesign, Engine};

use super::{build_core, CoreConfig, CoreError, MemoryImage};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimStats {
    pub cycles: u64,
    pub retirements: u64,
    /// Wrong-path or replayed-over slots cancelled by an epoch check.
    pub squashed: u64,
    /// Replays issued at REG_RD (the pipeline's stall mechanism).
    pub stalls: u64,
    pub load_issues: u64,
    pub load_returns: u64,
}

/// What one simulated cycle did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleView {
    pub cycle: u64,
    pub record: Option<RvfiRecord>,
    pub fetched: bool,
    /// A load accessed memory at RESULT.
    pub load_issued: bool,
    /// A pseudo-load-return entered the pipeline at NEXT_PC.
    pub load_returned: bool,
    pub replayed: bool,
    /// Transactions killed this cycle.
    pub squashed: u32,
}

#[derive(Debug, Clone, Copy)]
struct DebugPorts {
    fetch: usize,
    ret: usize,
    issue: usize,
    replay: usize,
    squash_rr: usize,
    squash_ex: usize,
    outstanding: usize,
    halted: usize,
}

/// A core + harness elaborated once and runnable many times.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: CoreConfig,
    design: ElaboratedDesign,
    ports: RvfiPorts,
    debug: DebugPorts,
    mem: ArrayId,
}

impl Simulator {
    pub fn new(config: &CoreConfig) -> Result<Simulator, CoreError> {
        let core = build_core(config)?;
        let graph = attach_rvfi_with(core, config.mutation)?;
        let design = elaborate(&graph, &config.stage_map)?;
        let ports = RvfiPorts::locate(&design).expect("harness attached");
        let o = |n: &str| design.output_index(n).expect("core debug port");
        let debug = DebugPorts {
            fetch: o("dbg_fetch"),
            ret: o("dbg_return"),
            issue: o("dbg_issue"),
            replay: o("dbg_replay"),
            squash_rr: o("dbg_squash_rr"),
            squash_ex: o("dbg_squash_ex"),
            outstanding: o("dbg_outstanding"),
            halted: o("dbg_halted"),
        };
        let mem = graph.array_by_name("mem").expect("core memory");
        Ok(Simulator {
            config: config.clone(),
            design,
            ports,
            debug,
            mem,
        })
    }

    pub fn config(&self) -> &CoreConfig {
        &self.config
    }

    pub fn design(&self) -> &ElaboratedDesign {
        &self.design
    }

    pub fn run(&self, image: &MemoryImage) -> Result<(RvfiTrace, SimStats), CoreError> {
        self.run_observed(image, |_| {})
    }

    /// Runs until the halt has retired and no load is outstanding, or
    /// until `max_cycles`; `observe` sees every cycle.
    pub fn run_observed(
        &self,
        image: &MemoryImage,
        mut observe: impl FnMut(&CycleView),
    ) -> Result<(RvfiTrace, SimStats), CoreError> {
        if image.len_bytes() > self.config.mem_size as usize {
            return Err(CoreError::ImageTooLarge {
                bytes: image.len_bytes(),
                mem_size: self.config.mem_size,
            });
        }
        let mut state = self.design.initial_state();
        state.load_bytes(self.mem, &image.bytes());
        let mut engine = Engine::new(&self.design);
        let mut trace = RvfiTrace::default();
        let mut stats = SimStats::default();
        let d = self.debug;
        let mut halt_seen = false;
        while stats.cycles < self.config.max_cycles {
            engine.step(&mut state, &[])?;
            let bit = |i: usize| engine.output(i) & 1 == 1;
            let record = self.ports.extract(&engine);
            let view = CycleView {
                cycle: stats.cycles,
                record,
                fetched: bit(d.fetch),
                load_issued: bit(d.issue),
                load_returned: bit(d.ret),
                replayed: bit(d.replay),
                squashed: bit(d.squash_rr) as u32 + bit(d.squash_ex) as u32,
            };
            observe(&view);
            stats.cycles += 1;
            stats.squashed += view.squashed as u64;
            stats.stalls += view.replayed as u64;
            stats.load_issues += view.load_issued as u64;
            stats.load_returns += view.load_returned as u64;
            if let Some(r) = record {
                halt_seen |= r.halt;
                stats.retirements += 1;
                trace.records.push(r);
            }
            if halt_seen && bit(d.halted) && engine.output(d.outstanding) == 0 {
                trace.complete = true;
                break;
            }
        }
        trace.cycles = stats.cycles;
        Ok((trace, stats))
    }
}

/// Builds, elaborates and runs in one go.
pub fn simulate(
    config: &CoreConfig,
    image: &MemoryImage,
) -> Result<(RvfiTrace, SimStats), CoreError> {
    Simulator::new(config)?.run(image)
}
