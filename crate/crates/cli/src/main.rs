// SPDX-License-Identifier: Apache-2.0

//! `warpkit` command-line front end.
//!
//! Exit codes: 0 pass, 1 usage or parse error, 2 simulation timeout,
//! 3 verification failure.

mod config;

use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use warpkit::backend::{emit_verilog, lint, size_report};
use warpkit::checker::{
    check_trace, exhaustive_pairs_with, fuzz_with, gen_program, CheckReport, FuzzError,
    FuzzOptions, OperandPool, Weights,
};
use warpkit::cpu::{CoreConfig, MemoryImage, Simulator};
use warpkit::harness::RvfiTrace;
use warpkit::isa::{assemble, Kind};

use crate::config::parse_config;

const EXIT_PASS: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_TIMEOUT: u8 = 2;
const EXIT_FAIL: u8 = 3;

#[derive(Parser)]
#[command(name = "warpkit", version, about = "Stage-map-independent RV32I core: simulate, check, fuzz, emit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// key=value configuration file (default: 5-stage preset)
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an image and write its retirement trace.
    Run {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Check a trace against golden replay of an image.
    Check {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// Write the report as JSON here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate and check seeded random programs.
    Fuzz {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        programs: u64,
        #[arg(long, default_value_t = 100)]
        length: usize,
        /// Concurrent simulations (0 = one per core)
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate and check every two-instruction program over a small pool.
    Pairs {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated mnemonics
        #[arg(long, default_value = "addi,add,lw,sw,beq")]
        kinds: String,
        #[arg(long, default_value = "1,2")]
        registers: String,
        #[arg(long, default_value = "0,1,-1", allow_hyphen_values = true)]
        immediates: String,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lint the elaborated design and emit Verilog.
    Gen {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Size report across configurations (default: the 1-, 5- and 7-stage presets).
    Report {
        /// Configuration files, in column order
        #[arg(long = "config")]
        configs: Vec<PathBuf>,
        /// Write the report as JSON here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble a source file into a hex image.
    Asm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one generated random program as a hex image.
    Genprog {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        length: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_config(arg: &ConfigArg) -> Result<CoreConfig> {
    match &arg.config {
        None => Ok(CoreConfig::default()),
        Some(p) => parse_config(&read(p)?).with_context(|| format!("{}", p.display())),
    }
}

fn load_image(path: &Path) -> Result<MemoryImage> {
    MemoryImage::parse(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn color() -> bool {
    std::env::var("WARPKIT_COLOR").is_ok_and(|v| v == "1")
}

fn summarize(report: &CheckReport, out: Option<&Path>) -> Result<u8> {
    let stdout = io::stdout();
    let mut w = stdout.lock();
    for v in &report.violations {
        writeln!(w, "violation: {v}")?;
    }
    writeln!(
        w,
        "{}: {} programs, {} instructions checked, {} violations",
        if report.pass { "PASS" } else { "FAIL" },
        report.programs,
        report.instructions,
        report.violations.len()
    )?;
    if let Some(path) = out {
        write(path, &report.to_json())?;
    }
    Ok(if report.pass { EXIT_PASS } else { EXIT_FAIL })
}

fn parse_list<T: std::str::FromStr>(what: &str, text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| anyhow::anyhow!("bad {what} `{s}`")))
        .collect()
}

fn execute(command: Command) -> Result<u8> {
    match command {
        Command::Run { config, image, trace } => {
            let config = load_config(&config)?;
            let image = load_image(&image)?;
            let (t, stats) = Simulator::new(&config)?.run(&image)?;
            write(&trace, &t.to_jsonl())?;
            println!(
                "cycles={} retired={} squashed={} replays={} load_issues={} load_returns={}",
                stats.cycles,
                stats.retirements,
                stats.squashed,
                stats.stalls,
                stats.load_issues,
                stats.load_returns
            );
            if t.complete {
                Ok(EXIT_PASS)
            } else {
                eprintln!("timeout after {} cycles; trace is partial", stats.cycles);
                Ok(EXIT_TIMEOUT)
            }
        }
        Command::Check { config, trace, image, out } => {
            let config = load_config(&config)?;
            let image = load_image(&image)?;
            let t = RvfiTrace::from_jsonl(&read(&trace)?)
                .with_context(|| format!("{}", trace.display()))?;
            summarize(&check_trace(&t, &image, config.mem_size), out.as_deref())
        }
        Command::Fuzz { config, seed, programs, length, jobs, out } => {
            let config = load_config(&config)?;
            if length == 0 {
                bail!("--length must be at least 1");
            }
            let options = FuzzOptions { weights: Weights::default(), jobs };
            let report = fuzz_with(&config, seed, programs, length, &options)?;
            summarize(&report, out.as_deref())
        }
        Command::Pairs { config, kinds, registers, immediates, jobs, out } => {
            let config = load_config(&config)?;
            let kinds: Vec<Kind> = kinds
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    Kind::from_mnemonic(&s.to_ascii_lowercase())
                        .ok_or_else(|| anyhow::anyhow!("unknown instruction `{s}`"))
                })
                .collect::<Result<_>>()?;
            let pool = OperandPool::new(
                parse_list("register", &registers.replace('x', ""))?,
                parse_list("immediate", &immediates)?,
            );
            if pool.registers.iter().any(|&r| r > 31) {
                bail!("registers must be 0..=31");
            }
            let started = Instant::now();
            let report = match exhaustive_pairs_with(&config, &kinds, &pool, jobs) {
                Err(FuzzError::BoundExceeded { count, bound }) => {
                    bail!("{count} sequences exceed the bound of {bound}")
                }
                r => r?,
            };
            println!("enumerated {} sequences in {:.2?}", report.programs, started.elapsed());
            summarize(&report, out.as_deref())
        }
        Command::Gen { config, out } => {
            let config = load_config(&config)?;
            let sim = Simulator::new(&config)?;
            if let Err(violations) = lint(sim.design()) {
                for v in &violations {
                    eprintln!("lint: {v}");
                }
                return Ok(EXIT_FAIL);
            }
            let text = emit_verilog(sim.design())?;
            write(&out, &text)?;
            println!(
                "wrote {} ({} staging registers)",
                out.display(),
                sim.design().staging_stats().registers
            );
            Ok(EXIT_PASS)
        }
        Command::Report { configs, out } => {
            let configs: Vec<CoreConfig> = if configs.is_empty() {
                [1, 5, 7].iter().map(|&n| CoreConfig::preset(n).expect("preset")).collect()
            } else {
                configs
                    .iter()
                    .map(|p| load_config(&ConfigArg { config: Some(p.clone()) }))
                    .collect::<Result<_>>()?
            };
            let report = size_report(&configs)?;
            print!("{}", report.to_text(color()));
            if let Some(path) = out {
                write(&path, &report.to_json())?;
            }
            Ok(EXIT_PASS)
        }
        Command::Asm { input, out } => {
            let words = assemble(&read(&input)?).with_context(|| format!("{}", input.display()))?;
            write(&out, &MemoryImage::new(words).to_text())?;
            Ok(EXIT_PASS)
        }
        Command::Genprog { seed, length, out } => {
            write(&out, &gen_program(seed, length, &Weights::default()).to_text())?;
            Ok(EXIT_PASS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS });
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
