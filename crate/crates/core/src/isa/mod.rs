// SPDX-License-Identifier: Apache-2.0

//! RV32I decode, a golden in-order reference executor and a small
//! assembler.

mod asm;
mod decode;
mod golden;

pub use asm::{assemble, assemble_lines, AsmError};
pub use decode::{
    decode, encode, imm_b, imm_i, imm_j, imm_s, imm_u, EncodeError, Format, Instr, Kind,
    EBREAK_WORD, OPCODE_AUIPC, OPCODE_BRANCH, OPCODE_JAL, OPCODE_JALR, OPCODE_LOAD, OPCODE_LUI,
    OPCODE_OP, OPCODE_OP_IMM, OPCODE_STORE,
};
pub use golden::{golden_step, ArchState, GoldenError};

/// The golden model's view of one retirement; same fields as the RVFI
/// record the pipeline presents.
pub type RetireInfo = crate::harness::RvfiRecord;

/// Bytes a load/store of `kind` touches, or 0 for non-memory kinds.
pub fn access_size(kind: Kind) -> u32 {
    use Kind::*;
    match kind {
        Lb | Lbu | Sb => 1,
        Lh | Lhu | Sh => 2,
        Lw | Sw => 4,
        _ => 0,
    }
}
