// SPDX-License-Identifier: Apache-2.0

//! Trace checking against the golden model, plus the random and exhaustive
//! program sources that feed it.

mod check;
mod fuzz;
mod gen;

pub use check::{check_trace, compare_record, CheckReport, Violation, ViolationKind};
pub use fuzz::{
    check_program, exhaustive_pairs, exhaustive_pairs_with, flags, fuzz, fuzz_with, pair_count,
    program_seed, variants, FuzzError, FuzzOptions, OperandPool, PAIR_BOUND,
};
pub use gen::{gen_program, scratch_base, Weights, LINK_REG, SCRATCH_REG, SCRATCH_WORDS};
