// SPDX-License-Identifier: Apache-2.0

//! Timing-abstract pipeline IR.
//!
//! Logic is declared against [`VirtualStage`]s; a [`StageMap`] assigns them
//! to physical stages at elaboration time, and [`elaborate`] inserts the
//! staging registers implied by every cross-stage read.

mod elaborate;
mod error;
mod eval;
mod graph;
mod stage;

pub use elaborate::{elaborate, ElaboratedDesign, Source, StagingChain, StagingStats};
pub use error::Error;
pub use eval::{ArrayData, Engine, SimState};
pub use graph::{
    ArcId, ArcMember, Array, ArrayId, ArrayKind, Bundle, DesignGraph, FeedbackArc, Node, NodeId,
    Op, RegId, Section, StateReg,
};
pub use stage::{staging_depth, validate_stage_map, StageMap, VirtualStage};
