// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;
use thiserror::Error;

use super::check::{check_trace, CheckReport, Violation, ViolationKind};
use super::gen::{gen_program, Weights};
use crate::cpu::{CoreConfig, CoreError, MemoryImage, Simulator};
use crate::isa::{encode, Format, Kind, EBREAK_WORD};

/// Most pair programs `exhaustive_pairs` agrees to enumerate.
pub const PAIR_BOUND: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum FuzzError {
    #[error("{count} pair programs exceed the bound of {bound}")]
    BoundExceeded { count: u64, bound: u64 },
    #[error(transparent)]
    Core(#[from] CoreError),
}

#[derive(Debug, Clone, Default)]
pub struct FuzzOptions {
    pub weights: Weights,
    /// Cap on concurrently running simulations; 0 means one per core.
    pub jobs: usize,
}

/// Seed of program `index` in a run started from `seed`.
pub fn program_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 over the pair so neighbouring runs don't share programs
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulate one image and check its trace.
pub fn check_program(sim: &Simulator, image: &MemoryImage) -> Result<CheckReport, CoreError> {
    let (trace, _) = sim.run(image)?;
    let mut report = check_trace(&trace, image, sim.config().mem_size);
    report.programs = 1;
    Ok(report)
}

fn run_all<F>(sim: &Simulator, count: u64, jobs: usize, make: F) -> Result<CheckReport, CoreError>
where
    F: Fn(u64) -> MemoryImage + Sync,
{
    let one = |i: u64| -> Result<CheckReport, CoreError> {
        let mut r = check_program(sim, &make(i))?;
        for v in &mut r.violations {
            v.program = Some(i);
        }
        Ok(r)
    };
    let reports: Vec<Result<CheckReport, CoreError>> = if jobs == 1 {
        (0..count).map(one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        // collect keeps index order whatever the completion order
        pool.install(|| (0..count).into_par_iter().map(one).collect())
    };
    let mut total = CheckReport::empty();
    for r in reports {
        total.merge(r?);
    }
    Ok(total)
}

pub fn fuzz(
    config: &CoreConfig,
    seed: u64,
    n_programs: u64,
    length: usize,
) -> Result<CheckReport, CoreError> {
    fuzz_with(config, seed, n_programs, length, &FuzzOptions::default())
}

pub fn fuzz_with(
    config: &CoreConfig,
    seed: u64,
    n_programs: u64,
    length: usize,
    options: &FuzzOptions,
) -> Result<CheckReport, CoreError> {
    if n_programs == 0 {
        return Ok(CheckReport::empty());
    }
    let sim = Simulator::new(config)?;
    run_all(&sim, n_programs, options.jobs, |i| {
        gen_program(program_seed(seed, i), length, &options.weights)
    })
}

/// Registers and immediates the pair enumerator draws operands from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperandPool {
    pub registers: Vec<u32>,
    pub immediates: Vec<i32>,
}

impl OperandPool {
    pub fn new(registers: Vec<u32>, immediates: Vec<i32>) -> Self {
        OperandPool { registers, immediates }
    }
}

impl Default for OperandPool {
    fn default() -> Self {
        OperandPool::new(vec![1, 2], vec![0, 1, -1])
    }
}

/// Every encoding of `kind` over the pool.
pub fn variants(kind: Kind, pool: &OperandPool) -> Vec<u32> {
    let regs = &pool.registers;
    let imms = &pool.immediates;
    let mut out = Vec::new();
    let mut push = |rd: u32, rs1: u32, rs2: u32, imm: i64| {
        if let Ok(w) = encode(kind, rd, rs1, rs2, imm) {
            out.push(w);
        }
    };
    match kind.format() {
        Format::R => {
            for &rd in regs {
                for &a in regs {
                    for &b in regs {
                        push(rd, a, b, 0);
                    }
                }
            }
        }
        Format::I | Format::Load => {
            for &rd in regs {
                for &a in regs {
                    for &v in imms {
                        push(rd, a, 0, v as i64);
                    }
                }
            }
        }
        Format::Shift => {
            for &rd in regs {
                for &a in regs {
                    for &v in imms {
                        push(rd, a, 0, v.rem_euclid(32) as i64);
                    }
                }
            }
        }
        Format::Jalr => {
            for &rd in regs {
                for &a in regs {
                    for &v in imms {
                        push(rd, a, 0, v as i64);
                    }
                }
            }
        }
        Format::Store => {
            for &a in regs {
                for &b in regs {
                    for &v in imms {
                        push(0, a, b, v as i64);
                    }
                }
            }
        }
        Format::Branch => {
            // offsets stay inside the trailing EBREAKs
            for &a in regs {
                for &b in regs {
                    for &v in imms {
                        push(0, a, b, 4 * (v.rem_euclid(2) as i64 + 1));
                    }
                }
            }
        }
        Format::Jump => {
            for &rd in regs {
                for &v in imms {
                    push(rd, 0, 0, 4 * (v.rem_euclid(2) as i64 + 1));
                }
            }
        }
        Format::Upper => {
            for &rd in regs {
                for &v in imms {
                    push(rd, 0, 0, (v as i64) & 0xf_ffff);
                }
            }
        }
        Format::None => {
            if kind == Kind::Ebreak {
                push(0, 0, 0, 0);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Number of programs `exhaustive_pairs` would run.
pub fn pair_count(kinds: &[Kind], pool: &OperandPool) -> u64 {
    let per: u64 = kinds.iter().map(|&k| variants(k, pool).len() as u64).sum();
    per * per
}

/// Every two-instruction program over `kinds` and `pool`, each followed by
/// EBREAKs, simulated and checked.
pub fn exhaustive_pairs(
    config: &CoreConfig,
    kinds: &[Kind],
    pool: &OperandPool,
) -> Result<CheckReport, FuzzError> {
    exhaustive_pairs_with(config, kinds, pool, 0)
}

pub fn exhaustive_pairs_with(
    config: &CoreConfig,
    kinds: &[Kind],
    pool: &OperandPool,
    jobs: usize,
) -> Result<CheckReport, FuzzError> {
    let count = pair_count(kinds, pool);
    if count > PAIR_BOUND {
        return Err(FuzzError::BoundExceeded {
            count,
            bound: PAIR_BOUND,
        });
    }
    if count == 0 {
        return Ok(CheckReport::empty());
    }
    let words: Vec<u32> = kinds.iter().flat_map(|&k| variants(k, pool)).collect();
    let n = words.len() as u64;
    let sim = Simulator::new(config)?;
    Ok(run_all(&sim, count, jobs, |i| {
        let a = words[(i / n) as usize];
        let b = words[(i % n) as usize];
        MemoryImage::new(vec![a, b, EBREAK_WORD, EBREAK_WORD, EBREAK_WORD])
    })?)
}

/// True if the report holds at least one violation of `kind`.
pub fn flags(report: &CheckReport, kind: ViolationKind) -> bool {
    report.violations.iter().any(|v: &Violation| v.kind == kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn program_seeds_differ() {
        let s: std::collections::BTreeSet<u64> = (0..1000).map(|i| program_seed(0, i)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(program_seed(1, 0), program_seed(0, 1));
    }

    #[test]
    fn variant_counts() {
        let pool = OperandPool::default();
        assert_eq!(variants(Kind::Add, &pool).len(), 8);
        assert_eq!(variants(Kind::Addi, &pool).len(), 12);
        assert_eq!(variants(Kind::Sw, &pool).len(), 12);
        assert_eq!(variants(Kind::Beq, &pool).len(), 8);
        assert_eq!(pair_count(&[], &pool), 0);
        assert_eq!(pair_count(&[Kind::Addi, Kind::Add], &pool), 400);
    }

    #[test]
    fn bound_is_enforced() {
        let pool = OperandPool::new((0..32).collect(), (-8..8).collect());
        let kinds: Vec<Kind> = Kind::ALL.to_vec();
        match exhaustive_pairs(&CoreConfig::default(), &kinds, &pool) {
            Err(FuzzError::BoundExceeded { count, .. }) => assert!(count > PAIR_BOUND),
            other => panic!("expected BoundExceeded, got {other:?}"),
        }
    }

    #[test]
    fn vacuous_runs() {
        let cfg = CoreConfig::default();
        let r = fuzz(&cfg, 1, 0, 10).unwrap();
        assert!(r.pass && r.programs == 0 && r.instructions == 0);
        let r = exhaustive_pairs(&cfg, &[], &OperandPool::default()).unwrap();
        assert!(r.pass && r.programs == 0);
    }
}
