// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One retired instruction as seen on the RVFI port.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct RvfiRecord {
    /// Implicit in trace files: every stored record is valid.
    pub valid: bool,
    pub order: u64,
    pub insn: u32,
    pub trap: bool,
    pub halt: bool,
    pub intr: bool,
    pub rs1_addr: u32,
    pub rs2_addr: u32,
    pub rs1_rdata: u32,
    pub rs2_rdata: u32,
    pub rd_addr: u32,
    pub rd_wdata: u32,
    pub pc_rdata: u32,
    pub pc_wdata: u32,
    pub mem_addr: u32,
    pub mem_rmask: u32,
    pub mem_wmask: u32,
    pub mem_rdata: u32,
    pub mem_wdata: u32,
}

/// The eighteen value-carrying RVFI fields, in trace-file key order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RvfiField {
    Order,
    Insn,
    Trap,
    Halt,
    Intr,
    Rs1Addr,
    Rs2Addr,
    Rs1Rdata,
    Rs2Rdata,
    RdAddr,
    RdWdata,
    PcRdata,
    PcWdata,
    MemAddr,
    MemRmask,
    MemWmask,
    MemRdata,
    MemWdata,
}

impl RvfiField {
    pub const ALL: [RvfiField; 18] = [
        RvfiField::Order,
        RvfiField::Insn,
        RvfiField::Trap,
        RvfiField::Halt,
        RvfiField::Intr,
        RvfiField::Rs1Addr,
        RvfiField::Rs2Addr,
        RvfiField::Rs1Rdata,
        RvfiField::Rs2Rdata,
        RvfiField::RdAddr,
        RvfiField::RdWdata,
        RvfiField::PcRdata,
        RvfiField::PcWdata,
        RvfiField::MemAddr,
        RvfiField::MemRmask,
        RvfiField::MemWmask,
        RvfiField::MemRdata,
        RvfiField::MemWdata,
    ];

    /// Name without the `rvfi_` prefix.
    pub fn name(self) -> &'static str {
        use RvfiField::*;
        match self {
            Order => "order",
            Insn => "insn",
            Trap => "trap",
            Halt => "halt",
            Intr => "intr",
            Rs1Addr => "rs1_addr",
            Rs2Addr => "rs2_addr",
            Rs1Rdata => "rs1_rdata",
            Rs2Rdata => "rs2_rdata",
            RdAddr => "rd_addr",
            RdWdata => "rd_wdata",
            PcRdata => "pc_rdata",
            PcWdata => "pc_wdata",
            MemAddr => "mem_addr",
            MemRmask => "mem_rmask",
            MemWmask => "mem_wmask",
            MemRdata => "mem_rdata",
            MemWdata => "mem_wdata",
        }
    }

    pub fn width(self) -> u8 {
        use RvfiField::*;
        match self {
            Order => 64,
            Trap | Halt | Intr => 1,
            Rs1Addr | Rs2Addr | RdAddr => 5,
            MemRmask | MemWmask => 4,
            _ => 32,
        }
    }
}

impl fmt::Display for RvfiField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rvfi_{}", self.name())
    }
}

impl RvfiRecord {
    pub fn get(&self, field: RvfiField) -> u64 {
        use RvfiField::*;
        match field {
            Order => self.order,
            Insn => self.insn as u64,
            Trap => self.trap as u64,
            Halt => self.halt as u64,
            Intr => self.intr as u64,
            Rs1Addr => self.rs1_addr as u64,
            Rs2Addr => self.rs2_addr as u64,
            Rs1Rdata => self.rs1_rdata as u64,
            Rs2Rdata => self.rs2_rdata as u64,
            RdAddr => self.rd_addr as u64,
            RdWdata => self.rd_wdata as u64,
            PcRdata => self.pc_rdata as u64,
            PcWdata => self.pc_wdata as u64,
            MemAddr => self.mem_addr as u64,
            MemRmask => self.mem_rmask as u64,
            MemWmask => self.mem_wmask as u64,
            MemRdata => self.mem_rdata as u64,
            MemWdata => self.mem_wdata as u64,
        }
    }

    /// Sets a field, truncating `value` to the field's width.
    pub fn set(&mut self, field: RvfiField, value: u64) {
        use RvfiField::*;
        let w = field.width();
        let v = if w == 64 { value } else { value & ((1u64 << w) - 1) };
        let v32 = v as u32;
        match field {
            Order => self.order = v,
            Insn => self.insn = v32,
            Trap => self.trap = v == 1,
            Halt => self.halt = v == 1,
            Intr => self.intr = v == 1,
            Rs1Addr => self.rs1_addr = v32,
            Rs2Addr => self.rs2_addr = v32,
            Rs1Rdata => self.rs1_rdata = v32,
            Rs2Rdata => self.rs2_rdata = v32,
            RdAddr => self.rd_addr = v32,
            RdWdata => self.rd_wdata = v32,
            PcRdata => self.pc_rdata = v32,
            PcWdata => self.pc_wdata = v32,
            MemAddr => self.mem_addr = v32,
            MemRmask => self.mem_rmask = v32,
            MemWmask => self.mem_wmask = v32,
            MemRdata => self.mem_rdata = v32,
            MemWdata => self.mem_wdata = v32,
        }
    }

    /// One JSON line, keys in the fixed trace order.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&Wire::from(self)).expect("plain integers serialize")
    }

    pub fn from_json_line(line: &str) -> Result<RvfiRecord, String> {
        let w: Wire = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let mut r = RvfiRecord {
            valid: true,
            ..RvfiRecord::default()
        };
        for f in RvfiField::ALL {
            let v = w.get(f);
            if f.width() < 64 && v >> f.width() != 0 {
                return Err(format!("{f} = {v} exceeds {} bits", f.width()));
            }
            r.set(f, v);
        }
        Ok(r)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Wire {
    rvfi_order: u64,
    rvfi_insn: u64,
    rvfi_trap: u64,
    rvfi_halt: u64,
    rvfi_intr: u64,
    rvfi_rs1_addr: u64,
    rvfi_rs2_addr: u64,
    rvfi_rs1_rdata: u64,
    rvfi_rs2_rdata: u64,
    rvfi_rd_addr: u64,
    rvfi_rd_wdata: u64,
    rvfi_pc_rdata: u64,
    rvfi_pc_wdata: u64,
    rvfi_mem_addr: u64,
    rvfi_mem_rmask: u64,
    rvfi_mem_wmask: u64,
    rvfi_mem_rdata: u64,
    rvfi_mem_wdata: u64,
}

impl Wire {
    fn get(&self, f: RvfiField) -> u64 {
        use RvfiField::*;
        match f {
            Order => self.rvfi_order,
            Insn => self.rvfi_insn,
            Trap => self.rvfi_trap,
            Halt => self.rvfi_halt,
            Intr => self.rvfi_intr,
            Rs1Addr => self.rvfi_rs1_addr,
            Rs2Addr => self.rvfi_rs2_addr,
            Rs1Rdata => self.rvfi_rs1_rdata,
            Rs2Rdata => self.rvfi_rs2_rdata,
            RdAddr => self.rvfi_rd_addr,
            RdWdata => self.rvfi_rd_wdata,
            PcRdata => self.rvfi_pc_rdata,
            PcWdata => self.rvfi_pc_wdata,
            MemAddr => self.rvfi_mem_addr,
            MemRmask => self.rvfi_mem_rmask,
            MemWmask => self.rvfi_mem_wmask,
            MemRdata => self.rvfi_mem_rdata,
            MemWdata => self.rvfi_mem_wdata,
        }
    }
}

impl From<&RvfiRecord> for Wire {
    fn from(r: &RvfiRecord) -> Wire {
        let g = |f| r.get(f);
        use RvfiField::*;
        Wire {
            rvfi_order: g(Order),
            rvfi_insn: g(Insn),
            rvfi_trap: g(Trap),
            rvfi_halt: g(Halt),
            rvfi_intr: g(Intr),
            rvfi_rs1_addr: g(Rs1Addr),
            rvfi_rs2_addr: g(Rs2Addr),
            rvfi_rs1_rdata: g(Rs1Rdata),
            rvfi_rs2_rdata: g(Rs2Rdata),
            rvfi_rd_addr: g(RdAddr),
            rvfi_rd_wdata: g(RdWdata),
            rvfi_pc_rdata: g(PcRdata),
            rvfi_pc_wdata: g(PcWdata),
            rvfi_mem_addr: g(MemAddr),
            rvfi_mem_rmask: g(MemRmask),
            rvfi_mem_wmask: g(MemWmask),
            rvfi_mem_rdata: g(MemRdata),
            rvfi_mem_wdata: g(MemWdata),
        }
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: malformed trace record: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Records in presentation (cycle) order plus run metadata.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RvfiTrace {
    pub records: Vec<RvfiRecord>,
    /// Cycles simulated; 0 for traces read back from a file.
    pub cycles: u64,
    /// False when the run hit its cycle bound before halting.
    pub complete: bool,
}

impl RvfiTrace {
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            writeln!(out, "{}", r.to_json_line())?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Parses JSON Lines; blank lines are skipped. A file carries no
    /// completion flag, so a trace is taken as complete iff some record
    /// halts.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<RvfiTrace, TraceError> {
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r = RvfiRecord::from_json_line(&line).map_err(|message| TraceError::Malformed {
                line: i + 1,
                message,
            })?;
            records.push(r);
        }
        let complete = records.iter().any(|r| r.halt);
        Ok(RvfiTrace {
            records,
            cycles: 0,
            complete,
        })
    }

    pub fn from_jsonl(text: &str) -> Result<RvfiTrace, TraceError> {
        Self::read_jsonl(text.as_bytes())
    }

    /// Records sorted by order id (stable for duplicates).
    pub fn sorted(&self) -> Vec<RvfiRecord> {
        let mut v = self.records.clone();
        v.sort_by_key(|r| r.order);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_record() -> impl Strategy<Value = RvfiRecord> {
        proptest::collection::vec(any::<u64>(), 18).prop_map(|vals| {
            let mut r = RvfiRecord {
                valid: true,
                ..Default::default()
            };
            for (f, v) in RvfiField::ALL.into_iter().zip(vals) {
                r.set(f, v);
            }
            r
        })
    }

    #[test]
    fn key_order_is_fixed() {
        let line = RvfiRecord::default().to_json_line();
        let keys: Vec<String> = RvfiField::ALL.iter().map(|f| format!("\"{f}\":0")).collect();
        assert_eq!(line, format!("{{{}}}", keys.join(",")));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(RvfiRecord::from_json_line("{\"rvfi_order\":1").is_err());
        let mut good = RvfiRecord::default().to_json_line();
        good = good.replace("\"rvfi_rd_addr\":0", "\"rvfi_rd_addr\":32");
        assert!(RvfiRecord::from_json_line(&good).is_err());
        let extra = RvfiRecord::default()
            .to_json_line()
            .replace('}', ",\"rvfi_valid\":1}");
        assert!(RvfiRecord::from_json_line(&extra).is_err());
        let err = RvfiTrace::from_jsonl("\n{}\n").unwrap_err();
        assert!(matches!(err, TraceError::Malformed { line: 2, .. }));
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(recs in proptest::collection::vec(arb_record(), 0..8)) {
            let t = RvfiTrace { records: recs.clone(), cycles: 0, complete: recs.iter().any(|r| r.halt) };
            let back = RvfiTrace::from_jsonl(&t.to_jsonl()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
