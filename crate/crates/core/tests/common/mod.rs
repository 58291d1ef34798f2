// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use warpkit::cpu::{simulate, CoreConfig, CycleView, MemoryImage, SimStats, Simulator};
use warpkit::harness::RvfiTrace;
use warpkit::isa::assemble;

pub const SMOKE: &str = include_str!("../../../../programs/smoke.s");

pub const PRESETS: [u32; 3] = [1, 5, 7];
pub const LATENCIES: [u32; 3] = [1, 2, 5];

pub fn preset(n: u32) -> CoreConfig {
    CoreConfig::preset(n).expect("preset")
}

pub fn configs() -> Vec<CoreConfig> {
    let mut out = Vec::new();
    for n in PRESETS {
        for lat in LATENCIES {
            let mut c = preset(n);
            c.mem_latency = lat;
            out.push(c);
        }
    }
    out
}

pub fn image(src: &str) -> MemoryImage {
    MemoryImage::new(assemble(src).expect("test program assembles"))
}

pub fn run(config: &CoreConfig, src: &str) -> (RvfiTrace, SimStats) {
    simulate(config, &image(src)).expect("simulates")
}

/// Runs and keeps every cycle's view.
pub fn run_views(config: &CoreConfig, src: &str) -> (RvfiTrace, Vec<CycleView>) {
    let sim = Simulator::new(config).expect("builds");
    let mut views = Vec::new();
    let (trace, _) = sim
        .run_observed(&image(src), |v| views.push(*v))
        .expect("simulates");
    (trace, views)
}
