// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use super::{NodeId, VirtualStage};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("stage map is not monotone: {earlier} maps after {later}")]
    NonMonotone {
        earlier: VirtualStage,
        later: VirtualStage,
    },
    #[error("stage map minimum physical index is {min}, expected 0")]
    MinNotZero { min: u32 },
    #[error(
        "negative staging depth: {producer} (physical {producer_physical}) feeds \
         {consumer} (physical {consumer_physical})"
    )]
    NegativeDepth {
        producer: VirtualStage,
        consumer: VirtualStage,
        producer_physical: u32,
        consumer_physical: u32,
    },
    #[error("{what}: value produced at {producer} is read at earlier stage {consumer}")]
    StageOrderViolation {
        what: String,
        producer: VirtualStage,
        consumer: VirtualStage,
    },
    #[error("combinational loop through {0}")]
    CombinationalLoop(String),
    #[error("width mismatch: {0}")]
    WidthMismatch(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("unknown stage `{0}`")]
    UnknownStage(String),
    #[error("recirculated signal {0} was declared but never bound")]
    UnboundRecirculation(String),
    #[error("node {0:?} does not produce a readable value")]
    NotAValue(NodeId),
}
