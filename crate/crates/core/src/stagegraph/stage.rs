// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use super::Error;

/// A logical pipeline position, independent of clocking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VirtualStage {
    NextPc,
    Fetch,
    Decode,
    RegRd,
    Execute,
    Result,
    RegWr,
}

impl VirtualStage {
    pub const ALL: [VirtualStage; 7] = [
        VirtualStage::NextPc,
        VirtualStage::Fetch,
        VirtualStage::Decode,
        VirtualStage::RegRd,
        VirtualStage::Execute,
        VirtualStage::Result,
        VirtualStage::RegWr,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            VirtualStage::NextPc => "NEXT_PC",
            VirtualStage::Fetch => "FETCH",
            VirtualStage::Decode => "DECODE",
            VirtualStage::RegRd => "REG_RD",
            VirtualStage::Execute => "EXECUTE",
            VirtualStage::Result => "RESULT",
            VirtualStage::RegWr => "REG_WR",
        }
    }
}

impl fmt::Display for VirtualStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VirtualStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VirtualStage::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownStage(s.to_string()))
    }
}

/// Assignment of every virtual stage to a physical (clocked) stage index.
///
/// This is the only thing that differs between a single-cycle core and a
/// deeply pipelined one; the design graph itself never sees it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StageMap {
    name: String,
    physical: [u32; 7],
}

impl StageMap {
    /// Builds a map without validating it. See [`StageMap::validate`].
    pub fn new(name: impl Into<String>, physical: [u32; 7]) -> Self {
        StageMap {
            name: name.into(),
            physical,
        }
    }

    pub fn single_stage() -> Self {
        StageMap::new("1-stage", [0; 7])
    }

    pub fn five_stage() -> Self {
        StageMap::new("5-stage", [0, 0, 1, 1, 2, 3, 4])
    }

    pub fn seven_stage() -> Self {
        StageMap::new("7-stage", [0, 1, 2, 3, 4, 5, 6])
    }

    pub fn presets() -> [StageMap; 3] {
        [
            StageMap::single_stage(),
            StageMap::five_stage(),
            StageMap::seven_stage(),
        ]
    }

    /// Looks up a preset by its physical stage count (1, 5 or 7).
    pub fn preset(stages: u32) -> Option<StageMap> {
        match stages {
            1 => Some(StageMap::single_stage()),
            5 => Some(StageMap::five_stage()),
            7 => Some(StageMap::seven_stage()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn physical(&self) -> &[u32; 7] {
        &self.physical
    }

    pub fn physical_of(&self, stage: VirtualStage) -> u32 {
        self.physical[stage.index()]
    }

    /// Number of physical stages between NEXT_PC and REG_WR.
    pub fn depth(&self) -> u32 {
        self.physical_of(VirtualStage::RegWr)
            .saturating_sub(self.physical_of(VirtualStage::NextPc))
    }

    pub fn is_flat(&self) -> bool {
        self.physical.iter().all(|&p| p == self.physical[0])
    }

    pub fn validate(&self) -> Result<(), Error> {
        for pair in VirtualStage::ALL.windows(2) {
            if self.physical_of(pair[0]) > self.physical_of(pair[1]) {
                return Err(Error::NonMonotone {
                    earlier: pair[0],
                    later: pair[1],
                });
            }
        }
        let min = self.physical.iter().copied().min().unwrap_or(0);
        if min != 0 {
            return Err(Error::MinNotZero { min });
        }
        Ok(())
    }

    /// Registers needed to carry a value produced at `producer` to `consumer`.
    pub fn staging_depth(
        &self,
        producer: VirtualStage,
        consumer: VirtualStage,
    ) -> Result<u32, Error> {
        let (p, c) = (self.physical_of(producer), self.physical_of(consumer));
        if c < p {
            return Err(Error::NegativeDepth {
                producer,
                consumer,
                producer_physical: p,
                consumer_physical: c,
            });
        }
        Ok(c - p)
    }
}

impl fmt::Display for StageMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [", self.name)?;
        for (i, s) in VirtualStage::ALL.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}={}", s, self.physical_of(*s))?;
        }
        f.write_str("]")
    }
}

/// `staging_depth` as a free function, for callers holding only a map.
pub fn staging_depth(
    map: &StageMap,
    producer: VirtualStage,
    consumer: VirtualStage,
) -> Result<u32, Error> {
    map.staging_depth(producer, consumer)
}

/// `validate_stage_map` as a free function.
pub fn validate_stage_map(map: &StageMap) -> Result<(), Error> {
    map.validate()
}
