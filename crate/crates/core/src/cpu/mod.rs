// SPDX-License-Identifier: Apache-2.0

//! The pipelined RV32I core: configuration, graph construction and
//! cycle-accurate simulation.

mod build;
mod image;
mod sim;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::stagegraph::{self, StageMap, VirtualStage};

pub use build::{build_core, LOAD_RETURN_ARC};
pub(crate) use build::expand_mask;
pub use image::{ImageError, MemoryImage};
pub use sim::{simulate, CycleView, SimStats, Simulator};

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] stagegraph::Error),
    #[error("image of {bytes} bytes does not fit {mem_size}-byte memory")]
    ImageTooLarge { bytes: usize, mem_size: u32 },
}

/// Seeded design defects used to measure how sensitive the checker is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mutation {
    /// Readers ignore the scoreboard's pending bits.
    ScoreboardOff,
    /// The slot directly behind a redirect is not squashed.
    SquashShort,
    /// The harness recirculates original-load fields one cycle too late.
    RecircLate,
    /// ... or one cycle too early.
    RecircEarly,
    /// RVFI `rd_wdata` is taken one cycle late.
    RdWdataStale,
    /// RVFI `rs1_addr` reports the raw field even when it is not a source.
    Rs1ZeroingDropped,
    /// A returning load is tagged with the wrong order id.
    LoadOrderTag,
}

impl Mutation {
    pub const ALL: [Mutation; 7] = [
        Mutation::ScoreboardOff,
        Mutation::SquashShort,
        Mutation::RecircLate,
        Mutation::RecircEarly,
        Mutation::RdWdataStale,
        Mutation::Rs1ZeroingDropped,
        Mutation::LoadOrderTag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mutation::ScoreboardOff => "scoreboard-off",
            Mutation::SquashShort => "squash-short",
            Mutation::RecircLate => "recirc-late",
            Mutation::RecircEarly => "recirc-early",
            Mutation::RdWdataStale => "rd-wdata-stale",
            Mutation::Rs1ZeroingDropped => "rs1-zeroing-dropped",
            Mutation::LoadOrderTag => "load-order-tag",
        }
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mutation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mutation::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mutation `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreConfig {
    pub stage_map: StageMap,
    /// Cycles from a load's memory access to its data being usable; ≥ 1.
    pub mem_latency: u32,
    /// Bytes; a multiple of 4.
    pub mem_size: u32,
    pub max_pending_loads: u32,
    pub max_cycles: u64,
    pub mutation: Option<Mutation>,
}

impl Default for CoreConfig {
    fn default() -> Self {
        CoreConfig {
            stage_map: StageMap::five_stage(),
            mem_latency: 1,
            mem_size: 65536,
            max_pending_loads: 4,
            max_cycles: 100_000,
            mutation: None,
        }
    }
}

impl CoreConfig {
    pub fn with_map(stage_map: StageMap) -> Self {
        CoreConfig {
            stage_map,
            ..CoreConfig::default()
        }
    }

    /// Default configuration on the 1-, 5- or 7-stage preset.
    pub fn preset(stages: u32) -> Option<Self> {
        StageMap::preset(stages).map(CoreConfig::with_map)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        self.stage_map.validate()?;
        if self.mem_latency == 0 {
            return Err(CoreError::Config("mem_latency must be at least 1".into()));
        }
        if self.mem_size == 0 || !self.mem_size.is_multiple_of(4) {
            return Err(CoreError::Config(format!(
                "mem_size {} is not a positive multiple of 4",
                self.mem_size
            )));
        }
        if self.max_pending_loads == 0 || self.max_pending_loads > 0xffff {
            return Err(CoreError::Config(format!(
                "max_pending_loads {} outside 1..=65535",
                self.max_pending_loads
            )));
        }
        Ok(())
    }
}

/// Cycles between the original load occupying a stage and its
/// pseudo-load-return occupying the same stage.
pub fn load_return_alignment(config: &CoreConfig) -> u32 {
    let m = &config.stage_map;
    m.physical_of(VirtualStage::Result) - m.physical_of(VirtualStage::NextPc)
        + config.mem_latency
        + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stagegraph::elaborate;

    #[test]
    fn alignment_formula() {
        let mut c = CoreConfig::preset(1).unwrap();
        assert_eq!(load_return_alignment(&c), 2);
        c.stage_map = StageMap::seven_stage();
        assert_eq!(load_return_alignment(&c), 7);
        c.stage_map = StageMap::five_stage();
        c.mem_latency = 5;
        assert_eq!(load_return_alignment(&c), 9);
    }

    #[test]
    fn construction_is_map_independent() {
        let logs: Vec<Vec<String>> = [1, 5, 7]
            .iter()
            .map(|&n| {
                build_core(&CoreConfig::preset(n).unwrap())
                    .unwrap()
                    .construction_log()
                    .to_vec()
            })
            .collect();
        assert_eq!(logs[0], logs[1]);
        assert_eq!(logs[1], logs[2]);
    }

    #[test]
    fn one_feedback_arc_and_flat_map_needs_no_staging() {
        let c = CoreConfig::preset(1).unwrap();
        let g = build_core(&c).unwrap();
        assert_eq!(g.arcs().len(), 1);
        let d = elaborate(&g, &c.stage_map).unwrap();
        assert_eq!(d.staging_stats().registers, 0);
        let deep = elaborate(&g, &StageMap::seven_stage()).unwrap();
        assert!(deep.staging_stats().registers > 0);
    }

    #[test]
    fn config_validation() {
        let mut c = CoreConfig::default();
        assert!(c.validate().is_ok());
        c.mem_latency = 0;
        assert!(c.validate().is_err());
        c.mem_latency = 1;
        c.mem_size = 10;
        assert!(c.validate().is_err());
    }

    #[test]
    fn mutation_names_round_trip() {
        for m in Mutation::ALL {
            assert_eq!(m.name().parse::<Mutation>(), Ok(m));
        }
    }
}
