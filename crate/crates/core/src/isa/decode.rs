// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    Lui,
    Auipc,
    Jal,
    Jalr,
    Beq,
    Bne,
    Blt,
    Bge,
    Bltu,
    Bgeu,
    Lb,
    Lh,
    Lw,
    Lbu,
    Lhu,
    Sb,
    Sh,
    Sw,
    Addi,
    Slti,
    Sltiu,
    Xori,
    Ori,
    Andi,
    Slli,
    Srli,
    Srai,
    Add,
    Sub,
    Sll,
    Slt,
    Sltu,
    Xor,
    Srl,
    Sra,
    Or,
    And,
    Ebreak,
    Illegal,
}

/// Operand layout of an instruction kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// rd, rs1, rs2
    R,
    /// rd, rs1, imm
    I,
    /// rd, rs1, shamt
    Shift,
    /// rd, imm(rs1)
    Load,
    /// rs2, imm(rs1)
    Store,
    /// rs1, rs2, offset
    Branch,
    /// rd, upper immediate
    Upper,
    /// rd, offset
    Jump,
    /// rd, imm(rs1)
    Jalr,
    None,
}

impl Kind {
    pub const ALL: [Kind; 39] = [
        Kind::Lui,
        Kind::Auipc,
        Kind::Jal,
        Kind::Jalr,
        Kind::Beq,
        Kind::Bne,
        Kind::Blt,
        Kind::Bge,
        Kind::Bltu,
        Kind::Bgeu,
        Kind::Lb,
        Kind::Lh,
        Kind::Lw,
        Kind::Lbu,
        Kind::Lhu,
        Kind::Sb,
        Kind::Sh,
        Kind::Sw,
        Kind::Addi,
        Kind::Slti,
        Kind::Sltiu,
        Kind::Xori,
        Kind::Ori,
        Kind::Andi,
        Kind::Slli,
        Kind::Srli,
        Kind::Srai,
        Kind::Add,
        Kind::Sub,
        Kind::Sll,
        Kind::Slt,
        Kind::Sltu,
        Kind::Xor,
        Kind::Srl,
        Kind::Sra,
        Kind::Or,
        Kind::And,
        Kind::Ebreak,
        Kind::Illegal,
    ];

    pub fn mnemonic(self) -> &'static str {
        use Kind::*;
        match self {
            Lui => "lui",
            Auipc => "auipc",
            Jal => "jal",
            Jalr => "jalr",
            Beq => "beq",
            Bne => "bne",
            Blt => "blt",
            Bge => "bge",
            Bltu => "bltu",
            Bgeu => "bgeu",
            Lb => "lb",
            Lh => "lh",
            Lw => "lw",
            Lbu => "lbu",
            Lhu => "lhu",
            Sb => "sb",
            Sh => "sh",
            Sw => "sw",
            Addi => "addi",
            Slti => "slti",
            Sltiu => "sltiu",
            Xori => "xori",
            Ori => "ori",
            Andi => "andi",
            Slli => "slli",
            Srli => "srli",
            Srai => "srai",
            Add => "add",
            Sub => "sub",
            Sll => "sll",
            Slt => "slt",
            Sltu => "sltu",
            Xor => "xor",
            Srl => "srl",
            Sra => "sra",
            Or => "or",
            And => "and",
            Ebreak => "ebreak",
            Illegal => "illegal",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Kind> {
        Kind::ALL
            .into_iter()
            .find(|k| k.mnemonic().eq_ignore_ascii_case(s))
    }

    pub fn format(self) -> Format {
        use Kind::*;
        match self {
            Lui | Auipc => Format::Upper,
            Jal => Format::Jump,
            Jalr => Format::Jalr,
            Beq | Bne | Blt | Bge | Bltu | Bgeu => Format::Branch,
            Lb | Lh | Lw | Lbu | Lhu => Format::Load,
            Sb | Sh | Sw => Format::Store,
            Addi | Slti | Sltiu | Xori | Ori | Andi => Format::I,
            Slli | Srli | Srai => Format::Shift,
            Add | Sub | Sll | Slt | Sltu | Xor | Srl | Sra | Or | And => Format::R,
            Ebreak | Illegal => Format::None,
        }
    }

    pub fn is_load(self) -> bool {
        self.format() == Format::Load
    }

    pub fn is_store(self) -> bool {
        self.format() == Format::Store
    }

    pub fn is_branch(self) -> bool {
        self.format() == Format::Branch
    }

    pub fn writes_rd(self) -> bool {
        !matches!(
            self.format(),
            Format::Store | Format::Branch | Format::None
        )
    }

    pub fn reads_rs1(self) -> bool {
        !matches!(self.format(), Format::Upper | Format::Jump | Format::None)
    }

    pub fn reads_rs2(self) -> bool {
        matches!(self.format(), Format::R | Format::Store | Format::Branch)
    }

    /// funct3 of the encoding, where there is one.
    pub fn funct3(self) -> u32 {
        use Kind::*;
        match self {
            Beq | Lb | Sb | Addi | Add | Sub | Jalr => 0,
            Bne | Lh | Sh | Slli | Sll => 1,
            Lw | Sw | Slti | Slt => 2,
            Sltiu | Sltu => 3,
            Blt | Lbu | Xori | Xor => 4,
            Bge | Lhu | Srli | Srai | Srl | Sra => 5,
            Bltu | Ori | Or => 6,
            Bgeu | Andi | And => 7,
            Lui | Auipc | Jal | Ebreak | Illegal => 0,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// A decoded instruction. Register fields always hold the raw encoding bits;
/// `rs1_is_reg`/`rs2_is_reg` say whether they name architectural sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instr {
    pub kind: Kind,
    pub rd: u8,
    pub rs1: u8,
    pub rs2: u8,
    pub imm: i32,
    pub raw: u32,
    pub rs1_is_reg: bool,
    pub rs2_is_reg: bool,
}

pub const OPCODE_LOAD: u32 = 0b000_0011;
pub const OPCODE_OP_IMM: u32 = 0b001_0011;
pub const OPCODE_AUIPC: u32 = 0b001_0111;
pub const OPCODE_STORE: u32 = 0b010_0011;
pub const OPCODE_OP: u32 = 0b011_0011;
pub const OPCODE_LUI: u32 = 0b011_0111;
pub const OPCODE_BRANCH: u32 = 0b110_0011;
pub const OPCODE_JALR: u32 = 0b110_0111;
pub const OPCODE_JAL: u32 = 0b110_1111;
pub const EBREAK_WORD: u32 = 0x0010_0073;

fn bits(w: u32, hi: u32, lo: u32) -> u32 {
    (w >> lo) & ((1u32 << (hi - lo + 1)) - 1)
}

fn sext(v: u32, width: u32) -> i32 {
    let shift = 32 - width;
    ((v << shift) as i32) >> shift
}

pub fn imm_i(w: u32) -> i32 {
    (w as i32) >> 20
}

pub fn imm_s(w: u32) -> i32 {
    sext((bits(w, 31, 25) << 5) | bits(w, 11, 7), 12)
}

pub fn imm_b(w: u32) -> i32 {
    sext(
        (bits(w, 31, 31) << 12) | (bits(w, 7, 7) << 11) | (bits(w, 30, 25) << 5) | (bits(w, 11, 8) << 1),
        13,
    )
}

pub fn imm_u(w: u32) -> i32 {
    (w & 0xffff_f000) as i32
}

pub fn imm_j(w: u32) -> i32 {
    sext(
        (bits(w, 31, 31) << 20)
            | (bits(w, 19, 12) << 12)
            | (bits(w, 20, 20) << 11)
            | (bits(w, 30, 21) << 1),
        21,
    )
}

/// Decodes any 32-bit word; words outside RV32I decode as `Illegal`.
pub fn decode(raw: u32) -> Instr {
    use Kind::*;
    let opcode = bits(raw, 6, 0);
    let f3 = bits(raw, 14, 12);
    let f7 = bits(raw, 31, 25);
    let kind = match opcode {
        OPCODE_LUI => Lui,
        OPCODE_AUIPC => Auipc,
        OPCODE_JAL => Jal,
        OPCODE_JALR if f3 == 0 => Jalr,
        OPCODE_BRANCH => match f3 {
            0 => Beq,
            1 => Bne,
            4 => Blt,
            5 => Bge,
            6 => Bltu,
            7 => Bgeu,
            _ => Illegal,
        },
        OPCODE_LOAD => match f3 {
            0 => Lb,
            1 => Lh,
            2 => Lw,
            4 => Lbu,
            5 => Lhu,
            _ => Illegal,
        },
        OPCODE_STORE => match f3 {
            0 => Sb,
            1 => Sh,
            2 => Sw,
            _ => Illegal,
        },
        OPCODE_OP_IMM => match (f3, f7) {
            (0, _) => Addi,
            (2, _) => Slti,
            (3, _) => Sltiu,
            (4, _) => Xori,
            (6, _) => Ori,
            (7, _) => Andi,
            (1, 0) => Slli,
            (5, 0) => Srli,
            (5, 0x20) => Srai,
            _ => Illegal,
        },
        OPCODE_OP => match (f3, f7) {
            (0, 0) => Add,
            (0, 0x20) => Sub,
            (1, 0) => Sll,
            (2, 0) => Slt,
            (3, 0) => Sltu,
            (4, 0) => Xor,
            (5, 0) => Srl,
            (5, 0x20) => Sra,
            (6, 0) => Or,
            (7, 0) => And,
            _ => Illegal,
        },
        _ if raw == EBREAK_WORD => Ebreak,
        _ => Illegal,
    };
    let imm = match kind.format() {
        Format::I | Format::Load | Format::Jalr => imm_i(raw),
        Format::Shift => bits(raw, 24, 20) as i32,
        Format::Store => imm_s(raw),
        Format::Branch => imm_b(raw),
        Format::Upper => imm_u(raw),
        Format::Jump => imm_j(raw),
        Format::R | Format::None => 0,
    };
    Instr {
        kind,
        rd: bits(raw, 11, 7) as u8,
        rs1: bits(raw, 19, 15) as u8,
        rs2: bits(raw, 24, 20) as u8,
        imm,
        raw,
        rs1_is_reg: kind.reads_rs1(),
        rs2_is_reg: kind.reads_rs2(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("immediate {value} out of range for {kind}")]
    ImmediateOutOfRange { kind: Kind, value: i64 },
    #[error("register x{0} out of range")]
    BadRegister(u32),
    #[error("`illegal` has no canonical encoding")]
    NoEncoding,
}

fn check_range(kind: Kind, v: i64, lo: i64, hi: i64, align: i64) -> Result<u32, EncodeError> {
    if v < lo || v > hi || v % align != 0 {
        return Err(EncodeError::ImmediateOutOfRange { kind, value: v });
    }
    Ok(v as i32 as u32)
}

/// Encodes one instruction. `imm` is the architectural immediate: the
/// sign-extended value for I/S/B/J formats, the shift amount for shifts,
/// and the 20-bit upper value (not shifted) for LUI/AUIPC.
pub fn encode(kind: Kind, rd: u32, rs1: u32, rs2: u32, imm: i64) -> Result<u32, EncodeError> {
    for r in [rd, rs1, rs2] {
        if r > 31 {
            return Err(EncodeError::BadRegister(r));
        }
    }
    let f3 = kind.funct3() << 12;
    let (rd, rs1, rs2) = (rd << 7, rs1 << 15, rs2 << 20);
    let word = match kind.format() {
        Format::R => {
            let f7 = if matches!(kind, Kind::Sub | Kind::Sra) { 0x20 << 25 } else { 0 };
            f7 | rs2 | rs1 | f3 | rd | OPCODE_OP
        }
        Format::I => {
            let i = check_range(kind, imm, -2048, 2047, 1)?;
            (i << 20) | rs1 | f3 | rd | OPCODE_OP_IMM
        }
        Format::Shift => {
            let sh = check_range(kind, imm, 0, 31, 1)?;
            let f7 = if kind == Kind::Srai { 0x20 << 25 } else { 0 };
            f7 | (sh << 20) | rs1 | f3 | rd | OPCODE_OP_IMM
        }
        Format::Load | Format::Jalr => {
            let i = check_range(kind, imm, -2048, 2047, 1)?;
            let op = if kind == Kind::Jalr { OPCODE_JALR } else { OPCODE_LOAD };
            (i << 20) | rs1 | f3 | rd | op
        }
        Format::Store => {
            let i = check_range(kind, imm, -2048, 2047, 1)?;
            (bits(i, 11, 5) << 25) | rs2 | rs1 | f3 | (bits(i, 4, 0) << 7) | OPCODE_STORE
        }
        Format::Branch => {
            let i = check_range(kind, imm, -4096, 4094, 2)?;
            (bits(i, 12, 12) << 31)
                | (bits(i, 10, 5) << 25)
                | rs2
                | rs1
                | f3
                | (bits(i, 4, 1) << 8)
                | (bits(i, 11, 11) << 7)
                | OPCODE_BRANCH
        }
        Format::Upper => {
            let u = check_range(kind, imm, -(1 << 19), (1 << 20) - 1, 1)? & 0xfffff;
            let op = if kind == Kind::Lui { OPCODE_LUI } else { OPCODE_AUIPC };
            (u << 12) | rd | op
        }
        Format::Jump => {
            let i = check_range(kind, imm, -(1 << 20), (1 << 20) - 2, 2)?;
            (bits(i, 20, 20) << 31)
                | (bits(i, 10, 1) << 21)
                | (bits(i, 11, 11) << 20)
                | (bits(i, 19, 12) << 12)
                | rd
                | OPCODE_JAL
        }
        Format::None => match kind {
            Kind::Ebreak => EBREAK_WORD,
            _ => return Err(EncodeError::NoEncoding),
        },
    };
    Ok(word)
}

impl Instr {
    pub fn reg(r: u8) -> String {
        format!("x{r}")
    }
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.kind.mnemonic();
        let (rd, rs1, rs2) = (self.rd, self.rs1, self.rs2);
        match self.kind.format() {
            Format::R => write!(f, "{m} x{rd}, x{rs1}, x{rs2}"),
            Format::I | Format::Shift => write!(f, "{m} x{rd}, x{rs1}, {}", self.imm),
            Format::Load | Format::Jalr => write!(f, "{m} x{rd}, {}(x{rs1})", self.imm),
            Format::Store => write!(f, "{m} x{rs2}, {}(x{rs1})", self.imm),
            Format::Branch => write!(f, "{m} x{rs1}, x{rs2}, {}", self.imm),
            Format::Upper => write!(f, "{m} x{rd}, {:#x}", (self.imm as u32) >> 12),
            Format::Jump => write!(f, "{m} x{rd}, {}", self.imm),
            Format::None => match self.kind {
                Kind::Ebreak => f.write_str(m),
                _ => write!(f, ".word {:#010x}", self.raw),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Reference encodings produced by an independent assembler
    // (clang --target=riscv32 -march=rv32i).
    const GAS: &[(&str, u32)] = &[
        ("addi x0, x0, 0", 0x0000_0013),
        ("addi x1, x0, 5", 0x0050_0093),
        ("ebreak", 0x0010_0073),
        ("lw x2, 8(x1)", 0x0080_a103),
        ("sw x2, 12(x1)", 0x0020_a623),
        ("add x3, x1, x2", 0x0020_81b3),
        ("sub x3, x1, x2", 0x4020_81b3),
        ("srai x5, x6, 3", 0x4033_5293),
        ("lui x1, 0x12345", 0x1234_50b7),
        ("jal x1, 8", 0x0080_00ef),
        ("beq x1, x2, -4", 0xfe20_8ee3),
        ("jalr x0, 0(x1)", 0x0000_8067),
    ];

    #[test]
    fn decode_reference_words() {
        let nop = decode(0x0000_0013);
        assert_eq!((nop.kind, nop.rd, nop.rs1, nop.imm), (Kind::Addi, 0, 0, 0));
        let li = decode(0x0050_0093);
        assert_eq!((li.kind, li.rd, li.rs1, li.imm), (Kind::Addi, 1, 0, 5));
        assert_eq!(decode(0).kind, Kind::Illegal);
        assert_eq!(decode(0).raw, 0);
        for &(text, word) in GAS {
            assert_eq!(decode(word).to_string(), text, "{word:#010x}");
        }
    }

    #[test]
    fn unsupported_system_and_fence_are_illegal() {
        // ecall, fence, csrrw
        for w in [0x0000_0073, 0x0ff0_000f, 0x3400_9073] {
            assert_eq!(decode(w).kind, Kind::Illegal);
        }
        // slli with funct7 != 0
        assert_eq!(decode(0x4010_9093).kind, Kind::Illegal);
    }

    #[test]
    fn source_flags() {
        assert!(!decode(0x1234_50b7).rs1_is_reg);
        assert!(!decode(0x1234_50b7).rs2_is_reg);
        assert!(decode(0x0080_a103).rs1_is_reg);
        assert!(!decode(0x0080_a103).rs2_is_reg);
        assert!(decode(0x0020_a623).rs2_is_reg);
    }

    #[test]
    fn encode_rejects_bad_immediates() {
        assert!(encode(Kind::Addi, 1, 0, 0, 2048).is_err());
        assert!(encode(Kind::Beq, 0, 1, 2, 3).is_err());
        assert!(encode(Kind::Slli, 1, 1, 0, 32).is_err());
        assert!(encode(Kind::Illegal, 0, 0, 0, 0).is_err());
    }

    fn imm_for(kind: Kind) -> BoxedStrategy<i64> {
        match kind.format() {
            Format::I | Format::Load | Format::Jalr | Format::Store => (-2048i64..=2047).boxed(),
            Format::Shift => (0i64..32).boxed(),
            Format::Branch => (-2048i64..=2047).prop_map(|v| v * 2).boxed(),
            Format::Upper => (0i64..1 << 20).boxed(),
            Format::Jump => (-(1i64 << 19)..(1 << 19)).prop_map(|v| v * 2).boxed(),
            Format::R | Format::None => Just(0i64).boxed(),
        }
    }

    fn kind_and_imm() -> impl Strategy<Value = (Kind, i64)> {
        proptest::sample::select(&Kind::ALL[..38]).prop_flat_map(|k| (Just(k), imm_for(k)))
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(
            (kind, imm) in kind_and_imm(),
            rd in 0u32..32, rs1 in 0u32..32, rs2 in 0u32..32,
        ) {
            let word = encode(kind, rd, rs1, rs2, imm).unwrap();
            let i = decode(word);
            prop_assert_eq!(i.kind, kind);
            prop_assert_eq!(i.raw, word);
            if kind.writes_rd() { prop_assert_eq!(i.rd as u32, rd); }
            if kind.reads_rs1() { prop_assert_eq!(i.rs1 as u32, rs1); }
            if kind.reads_rs2() { prop_assert_eq!(i.rs2 as u32, rs2); }
            let expect = match kind.format() {
                Format::Upper => (imm << 12) as i32 as i64,
                _ => imm,
            };
            prop_assert_eq!(i.imm as i64, expect);
        }

        #[test]
        fn decode_is_total_and_stable(w in any::<u32>()) {
            let i = decode(w);
            prop_assert_eq!(i.raw, w);
            prop_assert_eq!(decode(w), i);
            if i.kind != Kind::Illegal {
                // Every legal word re-encodes bit-exactly from its own fields.
                let imm = match i.kind.format() {
                    Format::Upper => ((i.imm as u32) >> 12) as i64,
                    _ => i.imm as i64,
                };
                let re = encode(i.kind, i.rd as u32, i.rs1 as u32, i.rs2 as u32, imm).unwrap();
                prop_assert_eq!(re, w);
            }
        }
    }
}
