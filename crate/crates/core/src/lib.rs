// SPDX-License-Identifier: Apache-2.0

//! Timing-abstract pipeline construction for an RV32I core, with an RVFI
//! retirement harness and a golden-model trace checker.

pub mod stagegraph;
pub mod isa;
pub mod harness;
pub mod cpu;
pub mod checker;
pub mod backend;
