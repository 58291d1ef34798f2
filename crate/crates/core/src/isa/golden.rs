// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use super::{access_size, decode, Kind, RetireInfo};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GoldenError {
    #[error("pc {pc:#010x} outside {mem_size}-byte memory")]
    PcOutOfRange { pc: u32, mem_size: usize },
    #[error("pc {0:#010x} is not word aligned")]
    PcMisaligned(u32),
}

/// Architectural state of the reference executor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchState {
    pub pc: u32,
    /// `regs[0]` is always zero.
    pub regs: [u32; 32],
    /// Little-endian, byte addressed.
    pub mem: Vec<u8>,
    /// Retirements so far; the next retirement's order id.
    pub retired: u64,
}

impl ArchState {
    pub fn new(mem_size: usize) -> Self {
        ArchState {
            pc: 0,
            regs: [0; 32],
            mem: vec![0; mem_size],
            retired: 0,
        }
    }

    /// Reset state with `words` loaded from address 0. Words past the end
    /// of memory are dropped.
    pub fn with_image(words: &[u32], mem_size: usize) -> Self {
        let mut s = ArchState::new(mem_size);
        for (i, w) in words.iter().enumerate() {
            let a = i * 4;
            if a + 4 > mem_size {
                break;
            }
            s.mem[a..a + 4].copy_from_slice(&w.to_le_bytes());
        }
        s
    }

    pub fn read_word(&self, addr: u32) -> u32 {
        let a = (addr & !3) as usize;
        match self.mem.get(a..a + 4) {
            Some(b) => u32::from_le_bytes([b[0], b[1], b[2], b[3]]),
            None => 0,
        }
    }

    fn in_range(&self, addr: u32, size: u32) -> bool {
        addr as u64 + size as u64 <= self.mem.len() as u64
    }

    /// Executes one instruction in place.
    pub fn step(&mut self) -> Result<RetireInfo, GoldenError> {
        let pc = self.pc;
        if pc & 3 != 0 {
            return Err(GoldenError::PcMisaligned(pc));
        }
        if !self.in_range(pc, 4) {
            return Err(GoldenError::PcOutOfRange {
                pc,
                mem_size: self.mem.len(),
            });
        }
        let insn = self.read_word(pc);
        let i = decode(insn);
        let rs1_addr = if i.rs1_is_reg { i.rs1 as u32 } else { 0 };
        let rs2_addr = if i.rs2_is_reg { i.rs2 as u32 } else { 0 };
        let a = self.regs[rs1_addr as usize];
        let b = self.regs[rs2_addr as usize];
        let imm = i.imm as u32;
        let next = pc.wrapping_add(4);

        let mut r = RetireInfo {
            valid: true,
            order: self.retired,
            insn,
            rs1_addr,
            rs2_addr,
            rs1_rdata: a,
            rs2_rdata: b,
            pc_rdata: pc,
            pc_wdata: next,
            ..RetireInfo::default()
        };
        self.retired += 1;

        use Kind::*;
        let mut rd_value: Option<u32> = None;
        let mut target: Option<u32> = None;
        let mut trap = false;
        match i.kind {
            Lui => rd_value = Some(imm),
            Auipc => rd_value = Some(pc.wrapping_add(imm)),
            Jal => {
                rd_value = Some(next);
                target = Some(pc.wrapping_add(imm));
            }
            Jalr => {
                rd_value = Some(next);
                target = Some(a.wrapping_add(imm) & !1);
            }
            Beq | Bne | Blt | Bge | Bltu | Bgeu => {
                let taken = match i.kind {
                    Beq => a == b,
                    Bne => a != b,
                    Blt => (a as i32) < (b as i32),
                    Bge => (a as i32) >= (b as i32),
                    Bltu => a < b,
                    _ => a >= b,
                };
                if taken {
                    target = Some(pc.wrapping_add(imm));
                }
            }
            Lb | Lh | Lw | Lbu | Lhu => {
                let addr = a.wrapping_add(imm);
                let size = access_size(i.kind);
                if !addr.is_multiple_of(size) || !self.in_range(addr, size) {
                    trap = true;
                } else {
                    let off = addr & 3;
                    let word = self.read_word(addr);
                    let mask = (1u64 << (size * 8)) - 1;
                    let raw = ((word >> (8 * off)) as u64 & mask) as u32;
                    rd_value = Some(match i.kind {
                        Lb => raw as u8 as i8 as i32 as u32,
                        Lh => raw as u16 as i16 as i32 as u32,
                        _ => raw,
                    });
                    r.mem_addr = addr & !3;
                    r.mem_rmask = ((1u32 << size) - 1) << off;
                    r.mem_rdata = word & byte_mask_bits(r.mem_rmask);
                }
            }
            Sb | Sh | Sw => {
                let addr = a.wrapping_add(imm);
                let size = access_size(i.kind);
                if !addr.is_multiple_of(size) || !self.in_range(addr, size) {
                    trap = true;
                } else {
                    let off = addr & 3;
                    r.mem_addr = addr & !3;
                    r.mem_wmask = ((1u32 << size) - 1) << off;
                    r.mem_wdata = (b << (8 * off)) & byte_mask_bits(r.mem_wmask);
                    for k in 0..size {
                        self.mem[(addr + k) as usize] = (b >> (8 * k)) as u8;
                    }
                }
            }
            Addi => rd_value = Some(a.wrapping_add(imm)),
            Slti => rd_value = Some(((a as i32) < (imm as i32)) as u32),
            Sltiu => rd_value = Some((a < imm) as u32),
            Xori => rd_value = Some(a ^ imm),
            Ori => rd_value = Some(a | imm),
            Andi => rd_value = Some(a & imm),
            Slli => rd_value = Some(a << (imm & 31)),
            Srli => rd_value = Some(a >> (imm & 31)),
            Srai => rd_value = Some(((a as i32) >> (imm & 31)) as u32),
            Add => rd_value = Some(a.wrapping_add(b)),
            Sub => rd_value = Some(a.wrapping_sub(b)),
            Sll => rd_value = Some(a << (b & 31)),
            Slt => rd_value = Some(((a as i32) < (b as i32)) as u32),
            Sltu => rd_value = Some((a < b) as u32),
            Xor => rd_value = Some(a ^ b),
            Srl => rd_value = Some(a >> (b & 31)),
            Sra => rd_value = Some(((a as i32) >> (b & 31)) as u32),
            Or => rd_value = Some(a | b),
            And => rd_value = Some(a & b),
            Ebreak => r.halt = true,
            Illegal => trap = true,
        }

        // A taken control transfer to a non-word-aligned target traps.
        if let Some(t) = target {
            if t & 3 != 0 {
                trap = true;
            }
        }
        if trap {
            r.trap = true;
            r.mem_addr = 0;
            r.mem_rmask = 0;
            r.mem_rdata = 0;
            self.pc = next;
            return Ok(r);
        }
        if let Some(t) = target {
            r.pc_wdata = t;
        }
        if let Some(v) = rd_value {
            if i.rd != 0 {
                r.rd_addr = i.rd as u32;
                r.rd_wdata = v;
                self.regs[i.rd as usize] = v;
            }
        }
        self.pc = r.pc_wdata;
        Ok(r)
    }
}

/// Expands a 4-bit byte mask to a 32-bit bit mask.
pub(crate) fn byte_mask_bits(mask: u32) -> u32 {
    (0..4)
        .filter(|i| mask >> i & 1 == 1)
        .fold(0, |acc, i| acc | (0xff << (8 * i)))
}

/// Pure form of [`ArchState::step`].
pub fn golden_step(state: &ArchState) -> Result<(ArchState, RetireInfo), GoldenError> {
    let mut next = state.clone();
    let info = next.step()?;
    Ok((next, info))
}
