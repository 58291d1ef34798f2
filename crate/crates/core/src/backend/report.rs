// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::verilog::{emit_verilog, section_text, staging_register_names, stripped_len};
use super::BackendError;
use crate::cpu::{build_core, CoreConfig};
use crate::harness::attach_rvfi_with;
use crate::stagegraph::{elaborate, Section};

/// Size measurements for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeRow {
    pub config: String,
    pub stages: u32,
    pub mem_latency: u32,
    /// Graph-construction operations, split by section. Map-independent.
    pub core_ops: usize,
    pub harness_ops: usize,
    /// SHA-256 of the whole construction log.
    pub log_digest: String,
    pub staging_registers: u32,
    pub staging_bits: u64,
    pub core_staging_registers: u32,
    pub harness_staging_registers: u32,
    pub core_staging_bits: u64,
    pub harness_staging_bits: u64,
    pub feedback_registers: u32,
    /// Emitted characters, comments and whitespace runs stripped.
    pub core_chars: usize,
    pub harness_chars: usize,
    pub verilog_digest: String,
    #[serde(skip)]
    pub staging_names: Vec<String>,
}

impl SizeRow {
    /// Emitted harness characters per harness construction operation.
    pub fn harness_expansion(&self) -> f64 {
        self.harness_chars as f64 / self.harness_ops.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeReport {
    pub rows: Vec<SizeRow>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn digest(text: &str) -> String {
    hex(&Sha256::digest(text.as_bytes()))
}

pub fn size_row(config: &CoreConfig) -> Result<SizeRow, BackendError> {
    config.validate()?;
    let graph = attach_rvfi_with(build_core(config)?, config.mutation)?;
    let design = elaborate(&graph, &config.stage_map)?;
    let verilog = emit_verilog(&design)?;
    let stats = design.staging_stats();
    Ok(SizeRow {
        config: config.stage_map.name().to_string(),
        stages: config.stage_map.depth() + 1,
        mem_latency: config.mem_latency,
        core_ops: graph.construction_log_for(Section::Core).len(),
        harness_ops: graph.construction_log_for(Section::Harness).len(),
        log_digest: digest(&graph.construction_log().join("\n")),
        staging_registers: stats.registers,
        staging_bits: stats.bits,
        core_staging_registers: stats.core_registers,
        harness_staging_registers: stats.harness_registers,
        core_staging_bits: stats.core_bits,
        harness_staging_bits: stats.harness_bits,
        feedback_registers: stats.feedback_registers,
        core_chars: stripped_len(section_text(&verilog, Section::Core)),
        harness_chars: stripped_len(section_text(&verilog, Section::Harness)),
        verilog_digest: digest(&verilog),
        staging_names: staging_register_names(&design),
    })
}

/// Builds, attaches the harness, elaborates and emits every configuration.
pub fn size_report(configs: &[CoreConfig]) -> Result<SizeReport, BackendError> {
    if configs.is_empty() {
        return Err(BackendError::NoConfigs);
    }
    let rows = configs.iter().map(size_row).collect::<Result<_, _>>()?;
    Ok(SizeReport { rows })
}

impl SizeReport {
    fn growth(&self, f: impl Fn(&SizeRow) -> usize) -> Option<f64> {
        let first = self.rows.first()?;
        let last = self.rows.last()?;
        (f(first) > 0).then(|| f(last) as f64 / f(first) as f64)
    }

    /// Last row's core size over the first row's.
    pub fn core_growth(&self) -> Option<f64> {
        self.growth(|r| r.core_chars)
    }

    pub fn harness_growth(&self) -> Option<f64> {
        self.growth(|r| r.harness_chars)
    }

    pub fn logs_identical(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].log_digest == w[1].log_digest)
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Wire<'a> {
            rows: &'a [SizeRow],
            core_growth: Option<f64>,
            harness_growth: Option<f64>,
            logs_identical: bool,
        }
        serde_json::to_string_pretty(&Wire {
            rows: &self.rows,
            core_growth: self.core_growth(),
            harness_growth: self.harness_growth(),
            logs_identical: self.logs_identical(),
        })
        .expect("report serializes")
    }

    /// Aligned-column table; `color` bolds the header.
    pub fn to_text(&self, color: bool) -> String {
        let header = [
            "config", "stages", "core ops", "harness ops", "staging regs", "staging bits",
            "core regs", "harness regs", "core chars", "harness chars", "chars/op",
        ];
        let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for r in &self.rows {
            cells.push(vec![
                r.config.clone(),
                r.stages.to_string(),
                r.core_ops.to_string(),
                r.harness_ops.to_string(),
                r.staging_registers.to_string(),
                r.staging_bits.to_string(),
                r.core_staging_registers.to_string(),
                r.harness_staging_registers.to_string(),
                r.core_chars.to_string(),
                r.harness_chars.to_string(),
                format!("{:.1}", r.harness_expansion()),
            ]);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in cells.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| if c == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect();
            let line = line.join("  ");
            if i == 0 && color {
                writeln!(out, "\x1b[1m{line}\x1b[0m").unwrap();
            } else {
                writeln!(out, "{line}").unwrap();
            }
        }
        let ratio = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.2}"));
        writeln!(out).unwrap();
        writeln!(out, "core growth     {}", ratio(self.core_growth())).unwrap();
        writeln!(out, "harness growth  {}", ratio(self.harness_growth())).unwrap();
        writeln!(
            out,
            "construction logs {}",
            if self.logs_identical() { "identical" } else { "DIFFER" }
        )
        .unwrap();
        out
    }
}
