// SPDX-License-Identifier: Apache-2.0

//! Acceptance criteria 1-8. Every criterion runs even if an earlier one
//! fails; each prints a single PASS/FAIL line.

mod common;

use std::time::{Duration, Instant};

use common::*;
use warpkit::backend::{emit_checked, size_report};
use warpkit::checker::{
    check_trace, exhaustive_pairs, fuzz, gen_program, program_seed, OperandPool, ViolationKind,
    Weights,
};
use warpkit::cpu::{build_core, CoreConfig, Mutation, Simulator};
use warpkit::harness::attach_rvfi;
use warpkit::isa::{decode, ArchState, Kind};
use warpkit::stagegraph::VirtualStage;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut programs = 0;
    let mut instructions = 0;
    for config in configs() {
        let r = fuzz(&config, 1, 500, 200).map_err(|e| e.to_string())?;
        ensure(r.pass, || {
            format!(
                "{} lat {}: {} violations, first {}",
                config.stage_map.name(),
                config.mem_latency,
                r.violations.len(),
                r.violations[0]
            )
        })?;
        programs += r.programs;
        instructions += r.instructions;
    }
    let took = started.elapsed();
    ensure(took < Duration::from_secs(300), || format!("took {took:.1?}"))?;
    Ok(format!("{programs} programs, {instructions} instructions, 0 violations in {took:.1?}"))
}

fn criterion_2() -> Outcome {
    let sims: Vec<Simulator> = configs().iter().map(|c| Simulator::new(c).unwrap()).collect();
    let mut records = 0;
    for i in 0..100 {
        let img = gen_program(program_seed(2, i), 150, &Weights::default());
        let reference = sims[0].run(&img).unwrap().0.sorted();
        for sim in &sims[1..] {
            let (trace, _) = sim.run(&img).unwrap();
            ensure(trace.complete && trace.sorted() == reference, || {
                format!(
                    "program {i} differs on {} lat {}",
                    sim.config().stage_map.name(),
                    sim.config().mem_latency
                )
            })?;
        }
        records += reference.len();
    }
    Ok(format!("100 programs ({records} records each config) identical across {} configs", sims.len()))
}

fn criterion_3() -> Outcome {
    let src = "addi x1, x0, 7\nsw x1, 96(x0)\nlw x2, 96(x0)\nadd x3, x2, x2\nebreak\n";
    let mut golden = ArchState::with_image(&image(src).words, 65536);
    let expected: Vec<_> = (0..5).map(|_| golden.step().unwrap()).collect();
    for config in configs() {
        let (trace, views) = run_views(&config, src);
        let tag = format!("{} lat {}", config.stage_map.name(), config.mem_latency);
        // (a) original-load fields on the return's record
        let (pos, lw) = trace
            .records
            .iter()
            .enumerate()
            .find(|(_, r)| decode(r.insn).kind == Kind::Lw)
            .ok_or_else(|| format!("{tag}: load never presented"))?;
        ensure(*lw == expected[2], || format!("{tag}: load record {lw:?}"))?;
        let at = views.iter().filter(|v| v.record.is_some()).nth(pos).unwrap().cycle;
        let injected = views
            .iter()
            .find(|v| v.load_returned)
            .ok_or_else(|| format!("{tag}: no load return"))?
            .cycle;
        let m = &config.stage_map;
        let travel = m.physical_of(VirtualStage::RegWr) - m.physical_of(VirtualStage::NextPc);
        ensure(at == injected + u64::from(travel), || {
            format!("{tag}: load presented at {at}, return injected at {injected}")
        })?;
        // (b) only loads out of order
        let mut high = 0;
        for (i, r) in trace.records.iter().enumerate() {
            if i > 0 && r.order < high {
                ensure(decode(r.insn).kind.is_load(), || format!("{tag}: non-load overtaken"))?;
            }
            high = high.max(r.order);
        }
        // (c) density
        let mut orders: Vec<u64> = trace.records.iter().map(|r| r.order).collect();
        orders.sort();
        ensure(orders == (0..5).collect::<Vec<_>>(), || format!("{tag}: orders {orders:?}"))?;
    }
    Ok("load presented by its return with original fields; dense orders; only loads reordered".into())
}

fn criterion_4() -> Outcome {
    let configs: Vec<CoreConfig> = PRESETS.iter().map(|&n| preset(n)).collect();
    let r = size_report(&configs).map_err(|e| e.to_string())?;
    let regs: Vec<u32> = r.rows.iter().map(|row| row.staging_registers).collect();
    ensure(regs[0] == 0, || format!("1-stage has {} staging registers", regs[0]))?;
    ensure(regs.windows(2).all(|w| w[0] < w[1]), || format!("staging {regs:?}"))?;
    let (core, harness) = (r.core_growth().unwrap(), r.harness_growth().unwrap());
    ensure(harness >= core, || format!("harness growth {harness:.2} < core growth {core:.2}"))?;
    let logs: Vec<Vec<String>> = configs
        .iter()
        .map(|c| attach_rvfi(build_core(c).unwrap()).unwrap().construction_log().to_vec())
        .collect();
    ensure(logs.windows(2).all(|w| w[0] == w[1]), || "construction logs differ".into())?;
    Ok(format!(
        "staging {regs:?}, core growth {core:.2}, harness growth {harness:.2}, {} construction ops identical",
        logs[0].len()
    ))
}

fn criterion_5() -> Outcome {
    let expected = |m: Mutation| -> &'static [ViolationKind] {
        use ViolationKind::*;
        match m {
            Mutation::ScoreboardOff => &[Rs1Mismatch, Rs2Mismatch],
            Mutation::SquashShort => &[InsnMismatch],
            Mutation::RecircLate | Mutation::RecircEarly => &[OrderGap],
            Mutation::RdWdataStale => &[RdMismatch],
            Mutation::Rs1ZeroingDropped => &[Rs1Mismatch],
            Mutation::LoadOrderTag => &[OrderGap],
        }
    };
    let mut found = Vec::new();
    for m in Mutation::ALL {
        let mut config = preset(5);
        config.mutation = Some(m);
        let r = fuzz(&config, 5, 500, 100).map_err(|e| e.to_string())?;
        let hit = r
            .violations
            .iter()
            .find(|v| expected(m).contains(&v.kind))
            .ok_or_else(|| format!("{m} not caught (saw {:?})", r.kinds()))?;
        if m == Mutation::Rs1ZeroingDropped {
            let rule = r.violations.iter().any(|v| {
                v.field.as_deref() == Some("rvfi_rs1_addr") && v.expected == 0 && v.actual != 0
            });
            ensure(rule, || "rs1 mutant never reported a non-register rs1".into())?;
        }
        found.push(format!("{m}:{}@{}", hit.kind, hit.program.unwrap()));
    }
    Ok(found.join(" "))
}

fn criterion_6() -> Outcome {
    let kinds = [Kind::Addi, Kind::Add, Kind::Lw, Kind::Sw, Kind::Beq];
    let pool = OperandPool::new(vec![1, 2], vec![0, 1, -1]);
    let started = Instant::now();
    let mut total = 0;
    for n in PRESETS {
        let r = exhaustive_pairs(&preset(n), &kinds, &pool).map_err(|e| e.to_string())?;
        ensure(r.pass, || format!("{n}-stage: {}", r.violations[0]))?;
        total += r.programs;
    }
    let took = started.elapsed();
    ensure(took < Duration::from_secs(600), || format!("took {took:.1?}"))?;
    Ok(format!("{total} sequences over 3 presets in {took:.1?}"))
}

fn criterion_7() -> Outcome {
    for n in PRESETS {
        let config = preset(n);
        let (trace, _) = run(&config, SMOKE);
        ensure(trace.records.len() == 11, || format!("{n}-stage: {} records", trace.records.len()))?;
        let r = check_trace(&trace, &image(SMOKE), config.mem_size);
        ensure(r.pass, || format!("{n}-stage: {}", r.violations[0]))?;
    }
    Ok("11 records, checker-clean on 1/5/7 stages".into())
}

fn criterion_8() -> Outcome {
    let once = || {
        let mut out = Vec::new();
        for n in PRESETS {
            let config = preset(n);
            let sim = Simulator::new(&config).unwrap();
            let img = gen_program(8, 120, &Weights::default());
            out.push(sim.run(&img).unwrap().0.to_jsonl());
            out.push(fuzz(&config, 8, 20, 80).unwrap().to_json());
            out.push(emit_checked(sim.design()).unwrap());
        }
        out
    };
    let (a, b) = (once(), once());
    ensure(a == b, || "outputs differ between runs".into())?;
    Ok(format!("{} artifacts byte-identical across two runs", a.len()))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("cross-configuration correctness", criterion_1),
        ("architectural equivalence", criterion_2),
        ("load-return contract", criterion_3),
        ("staging trends", criterion_4),
        ("oracle sensitivity", criterion_5),
        ("bounded-exhaustive pairs", criterion_6),
        ("smoke test", criterion_7),
        ("determinism", criterion_8),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check)
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>())));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} -- {detail}", i + 1),
            Err(why) => {
                println!("criterion {}: FAIL {name} -- {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
