// SPDX-License-Identifier: Apache-2.0

//! Seeded random RV32I programs that always terminate: control flow only
//! moves forward and the last instruction is EBREAK.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cpu::MemoryImage;
use crate::isa::{access_size, encode, Format, Kind};

/// Register holding the scratch-region base address.
pub const SCRATCH_REG: u32 = 31;
/// Register reserved for AUIPC/JALR pairs.
pub const LINK_REG: u32 = 30;
pub const SCRATCH_WORDS: u32 = 64;

/// Relative frequency of each instruction kind in generated bodies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Weights {
    pub per_kind: BTreeMap<Kind, u32>,
}

impl Default for Weights {
    fn default() -> Self {
        let mut per_kind = BTreeMap::new();
        for k in Kind::ALL {
            let w = match k {
                Kind::Ebreak | Kind::Illegal => 0,
                Kind::Lw | Kind::Sw => 6,
                Kind::Addi | Kind::Add => 5,
                k if k.is_load() || k.is_store() => 3,
                Kind::Jal | Kind::Jalr => 2,
                k if k.is_branch() => 2,
                _ => 3,
            };
            per_kind.insert(k, w);
        }
        Weights { per_kind }
    }
}

impl Weights {
    /// Default weights with loads and stores switched off.
    pub fn without_memory() -> Self {
        let mut w = Weights::default();
        for (k, v) in w.per_kind.iter_mut() {
            if k.is_load() || k.is_store() {
                *v = 0;
            }
        }
        w
    }

    pub fn set(&mut self, kind: Kind, weight: u32) -> &mut Self {
        self.per_kind.insert(kind, weight);
        self
    }
}

/// Start of the data region used by generated loads and stores.
pub fn scratch_base(length: usize) -> u32 {
    let code = (length as u32) * 4;
    let aligned = code.div_ceil(256) * 256;
    aligned.max(0x800)
}

fn word(kind: Kind, rd: u32, rs1: u32, rs2: u32, imm: i64) -> u32 {
    encode(kind, rd, rs1, rs2, imm).expect("generator keeps operands in range")
}

/// A program of exactly `length` instructions (at least one) followed by a
/// data region; deterministic in `seed`.
pub fn gen_program(seed: u64, length: usize, weights: &Weights) -> MemoryImage {
    let length = length.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = scratch_base(length);
    let mut code: Vec<u32> = Vec::with_capacity(3);

    if length >= 3 {
        // x31 = scratch base
        let hi = (base.wrapping_add(0x800) >> 12) as i64;
        let lo = (base as i32 - ((hi as i32) << 12)) as i64;
        code.push(word(Kind::Lui, SCRATCH_REG, 0, 0, hi));
        code.push(word(Kind::Addi, SCRATCH_REG, SCRATCH_REG, 0, lo));
    }
    let body_end = length - 1; // index of the final EBREAK

    let kinds: Vec<(Kind, u32)> = weights
        .per_kind
        .iter()
        .filter(|(k, w)| **w > 0 && !matches!(k, Kind::Ebreak | Kind::Illegal))
        .map(|(k, w)| (*k, *w))
        .collect();
    let dist = if kinds.is_empty() {
        None
    } else {
        Some(WeightedIndex::new(kinds.iter().map(|(_, w)| *w)).expect("positive weights"))
    };

    let reg = |rng: &mut ChaCha8Rng| rng.gen_range(0..10u32);
    let dst = |rng: &mut ChaCha8Rng| {
        // x0 as a destination now and then
        if rng.gen_ratio(1, 20) {
            0
        } else {
            rng.gen_range(1..10u32)
        }
    };

    // Forward targets are resolved once the layout is known, so that no
    // branch lands on the JALR half of an AUIPC/JALR pair.
    enum Slot {
        Word(u32),
        Branch(Kind, u32, u32),
        Jump(u32),
        PairJalr(u32),
    }
    let mut slots: Vec<Slot> = code.drain(..).map(Slot::Word).collect();
    let mut protected = vec![false; length];
    while slots.len() < body_end {
        let Some(dist) = &dist else {
            slots.push(Slot::Word(word(Kind::Addi, 0, 0, 0, 0)));
            continue;
        };
        let kind = kinds[dist.sample(&mut rng)].0;
        let remaining = body_end - slots.len();
        let w = match kind.format() {
            Format::R => word(kind, dst(&mut rng), reg(&mut rng), reg(&mut rng), 0),
            Format::I => {
                let imm = if rng.gen_bool(0.7) {
                    rng.gen_range(-16..16)
                } else {
                    rng.gen_range(-2048..2048)
                };
                word(kind, dst(&mut rng), reg(&mut rng), 0, imm)
            }
            Format::Shift => word(kind, dst(&mut rng), reg(&mut rng), 0, rng.gen_range(0..32)),
            Format::Upper => word(kind, dst(&mut rng), 0, 0, rng.gen_range(0..1 << 20)),
            Format::Load | Format::Store => {
                let size = access_size(kind) as i64;
                let mut off = rng.gen_range(0..SCRATCH_WORDS as i64 * 4 / size) * size;
                if size > 1 && rng.gen_ratio(1, 25) {
                    off += 1; // the occasional misaligned access traps
                }
                if kind.is_load() {
                    word(kind, dst(&mut rng), SCRATCH_REG, 0, off)
                } else {
                    word(kind, 0, SCRATCH_REG, reg(&mut rng), off)
                }
            }
            Format::Branch => {
                slots.push(Slot::Branch(kind, reg(&mut rng), reg(&mut rng)));
                continue;
            }
            Format::Jump => {
                slots.push(Slot::Jump(dst(&mut rng)));
                continue;
            }
            Format::Jalr => {
                if remaining < 2 {
                    word(Kind::Addi, 0, 0, 0, 0)
                } else {
                    slots.push(Slot::Word(word(Kind::Auipc, LINK_REG, 0, 0, 0)));
                    protected[slots.len()] = true;
                    slots.push(Slot::PairJalr(dst(&mut rng)));
                    continue;
                }
            }
            Format::None => unreachable!("filtered above"),
        };
        slots.push(Slot::Word(w));
    }

    let pick = |rng: &mut ChaCha8Rng, from: usize| -> i64 {
        let candidates: Vec<usize> = (1..=(body_end - from).min(12))
            .filter(|k| !protected[from + k])
            .collect();
        candidates[rng.gen_range(0..candidates.len())] as i64
    };
    let mut code: Vec<u32> = Vec::with_capacity(length);
    for (i, slot) in slots.into_iter().enumerate() {
        code.push(match slot {
            Slot::Word(w) => w,
            Slot::Branch(kind, a, b) => word(kind, 0, a, b, 4 * pick(&mut rng, i)),
            Slot::Jump(rd) => word(Kind::Jal, rd, 0, 0, 4 * pick(&mut rng, i)),
            // target is relative to the AUIPC one slot back
            Slot::PairJalr(rd) => word(Kind::Jalr, rd, LINK_REG, 0, 4 * (pick(&mut rng, i) + 1)),
        });
    }
    code.push(crate::isa::EBREAK_WORD);

    let mut words = code;
    words.resize((base / 4) as usize, 0);
    for _ in 0..SCRATCH_WORDS {
        words.push(rng.gen());
    }
    MemoryImage::new(words)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::decode;

    #[test]
    fn deterministic_in_seed() {
        let w = Weights::default();
        assert_eq!(gen_program(7, 50, &w), gen_program(7, 50, &w));
        assert_ne!(gen_program(7, 50, &w), gen_program(8, 50, &w));
    }

    #[test]
    fn shape() {
        for seed in 0..50 {
            let img = gen_program(seed, 40, &Weights::default());
            let code = &img.words[..40];
            assert_eq!(code[39], crate::isa::EBREAK_WORD);
            for (i, &w) in code.iter().enumerate() {
                let d = decode(w);
                assert_ne!(d.kind, Kind::Illegal, "word {i}");
                if d.kind.is_branch() || d.kind == Kind::Jal {
                    assert!(d.imm > 0 && i as i32 + d.imm / 4 <= 39);
                }
                if i < 39 {
                    assert_ne!(d.kind, Kind::Ebreak);
                }
            }
            assert_eq!(img.words.len() as u32, (scratch_base(40) / 4) + SCRATCH_WORDS);
        }
    }

    #[test]
    fn memory_weights_zero_means_no_memory_ops() {
        let img = gen_program(3, 200, &Weights::without_memory());
        assert!(img.words[..200]
            .iter()
            .all(|&w| !decode(w).kind.is_load() && !decode(w).kind.is_store()));
    }

    #[test]
    fn tiny_lengths() {
        assert_eq!(gen_program(0, 1, &Weights::default()).words[0], crate::isa::EBREAK_WORD);
        assert_eq!(gen_program(0, 0, &Weights::default()).words[0], crate::isa::EBREAK_WORD);
        let two = gen_program(0, 2, &Weights::default());
        assert_eq!(two.words[1], crate::isa::EBREAK_WORD);
    }
}
