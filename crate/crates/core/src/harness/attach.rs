// SPDX-License-Identifier: Apache-2.0

//! The verification harness: RVFI fields are expressed at REG_WR and the
//! elaborator stages them; a returning load presents the fields of the
//! original load, carried around the load-return recirculation arc.

use crate::cpu::{Mutation, LOAD_RETURN_ARC};
use crate::stagegraph::{
    DesignGraph, ElaboratedDesign, Engine, Error, NodeId, Section, VirtualStage,
};

use super::{RvfiField, RvfiRecord};

use VirtualStage::{Execute, NextPc, RegWr};

/// Fields a load presents that its pseudo-load-return cannot reconstruct.
const ORIGINAL_LOAD_FIELDS: [RvfiField; 11] = [
    RvfiField::Order,
    RvfiField::Insn,
    RvfiField::PcRdata,
    RvfiField::PcWdata,
    RvfiField::Rs1Addr,
    RvfiField::Rs1Rdata,
    RvfiField::Rs2Addr,
    RvfiField::Rs2Rdata,
    RvfiField::RdAddr,
    RvfiField::MemAddr,
    RvfiField::MemRmask,
];

pub fn attach_rvfi(graph: DesignGraph) -> Result<DesignGraph, Error> {
    attach_rvfi_with(graph, None)
}

/// Attaches the harness, optionally with a seeded defect (harness-side
/// mutations only; others are ignored here).
pub fn attach_rvfi_with(
    mut graph: DesignGraph,
    mutation: Option<Mutation>,
) -> Result<DesignGraph, Error> {
    let g = &mut graph;
    let arc = g
        .arc_by_name(LOAD_RETURN_ARC)
        .ok_or_else(|| Error::UnknownSignal(LOAD_RETURN_ARC.to_string()))?;
    let delay = g.arc(arc).delay;
    let s = |g: &DesignGraph, n: &str| g.require(n);
    let pc = s(g, "pc")?;
    let pc_plus4 = s(g, "pc_plus4")?;
    let insn = s(g, "insn")?;
    let rs1_addr = if mutation == Some(Mutation::Rs1ZeroingDropped) {
        s(g, "rs1_field")?
    } else {
        s(g, "rs1_addr")?
    };
    let rs2_addr = s(g, "rs2_addr")?;
    let rs1_val = s(g, "rs1_val")?;
    let rs2_val = s(g, "rs2_val")?;
    let rd = s(g, "rd")?;
    let writes_rd = s(g, "writes_rd")?;
    let is_store = s(g, "is_store")?;
    let is_ebreak = s(g, "is_ebreak")?;
    let order = s(g, "order")?;
    let trap = s(g, "trap")?;
    let taken = s(g, "taken")?;
    let target = s(g, "target")?;
    let valid_ex = s(g, "valid_ex")?;
    let issue_ld = s(g, "issue_ld")?;
    let addr = s(g, "mem_addr")?;
    let byte_mask = s(g, "byte_mask")?;
    let rd_val = s(g, "rd_val")?;
    let store_data = s(g, "store_data")?;
    let returning = s(g, "returning_ld")?;
    let ret_data = s(g, "ret_data")?;
    let ld_value = s(g, "ld_value")?;

    g.set_section(Section::Harness);

    // ---- in-pipeline instruction ---------------------------------------------
    g.set_stage(Execute);
    let not_trap = g.not(trap);
    let zero5 = g.constant(0, 5);
    let rd_nz = g.ne(rd, zero5);
    let rd_we = g.all(&[writes_rd, not_trap, rd_nz]);
    let rd_addr = g.gate(rd_we, rd);
    let jumps = g.and(taken, not_trap);
    let pc_wdata = g.mux(jumps, target, pc_plus4);
    let word_mask = g.constant(!3u64, 32);
    let aligned = g.and(addr, word_mask);
    let stores = g.and(is_store, not_trap);
    let not_issue = g.not(issue_ld);
    let presents = g.and(valid_ex, not_issue);
    let ld_order = if mutation == Some(Mutation::LoadOrderTag) {
        let one = g.constant(1, 64);
        g.add(order, one)
    } else {
        order
    };

    g.set_stage(VirtualStage::Result);
    let rd_wdata = g.gate(rd_we, rd_val);
    let st_addr = g.gate(stores, aligned);
    let wmask = g.gate(stores, byte_mask);
    let wbits = crate::cpu::expand_mask(g, byte_mask);
    let wdata_m = g.and(store_data, wbits);
    let wdata = g.gate(stores, wdata_m);

    // ---- original load, around the recirculation arc ---------------------------
    let original = g.bundle(
        "original_ld",
        &[
            ("order", ld_order),
            ("insn", insn),
            ("pc_rdata", pc),
            ("pc_wdata", pc_wdata),
            ("rs1_addr", rs1_addr),
            ("rs1_rdata", rs1_val),
            ("rs2_addr", rs2_addr),
            ("rs2_rdata", rs2_val),
            ("rd_addr", rd_addr),
            ("mem_addr", aligned),
            ("mem_rmask", byte_mask),
        ],
    )?;
    let at_result = g.align_bundle(&original, VirtualStage::Result)?;
    let returned = match mutation {
        Some(Mutation::RecircLate) => g.recirculate_bundle(&at_result, delay + 1, NextPc)?,
        Some(Mutation::RecircEarly) => g.recirculate_bundle(&at_result, delay - 1, NextPc)?,
        _ => {
            let mut members = Vec::new();
            for (name, id) in at_result.members() {
                let out = g.extend_recirculation(arc, &format!("original_{name}"), *id)?;
                members.push((name.clone(), out));
            }
            let refs: Vec<(&str, NodeId)> =
                members.iter().map(|(n, id)| (n.as_str(), *id)).collect();
            g.bundle("original_ld>>", &refs)?
        }
    };

    // ---- REG_WR: align, then choose between the two -----------------------
    g.set_stage(RegWr);
    let zero1 = g.constant(0, 1);
    let zero4 = g.constant(0, 4);
    let zero32 = g.constant(0, 32);
    let pipe = g.bundle(
        "rvfi_pipe",
        &[
            ("valid", presents),
            ("order", order),
            ("insn", insn),
            ("trap", trap),
            ("halt", is_ebreak),
            ("intr", zero1),
            ("rs1_addr", rs1_addr),
            ("rs2_addr", rs2_addr),
            ("rs1_rdata", rs1_val),
            ("rs2_rdata", rs2_val),
            ("rd_addr", rd_addr),
            ("rd_wdata", rd_wdata),
            ("pc_rdata", pc),
            ("pc_wdata", pc_wdata),
            ("mem_addr", st_addr),
            ("mem_rmask", zero4),
            ("mem_wmask", wmask),
            ("mem_rdata", zero32),
            ("mem_wdata", wdata),
        ],
    )?;
    let pipe = g.align_bundle(&pipe, RegWr)?;
    let p = |n: &str| pipe.get(n).expect("member exists");
    let r = |n: &str| returned.get(n).expect("member exists");

    let valid = g.or(returning, p("valid"));
    g.output("rvfi_valid", valid)?;
    let not_ret = g.not(returning);
    let ret_rd_nz = g.ne(r("rd_addr"), zero5);
    let ret_wdata = g.gate(ret_rd_nz, ld_value);
    let rbits = crate::cpu::expand_mask(g, r("mem_rmask"));
    let ret_rdata = g.and(ret_data, rbits);
    for f in RvfiField::ALL {
        let name = f.name();
        let id = if ORIGINAL_LOAD_FIELDS.contains(&f) {
            g.mux(returning, r(name), p(name))
        } else {
            match f {
                RvfiField::RdWdata => g.mux(returning, ret_wdata, p(name)),
                RvfiField::MemRdata => g.mux(returning, ret_rdata, p(name)),
                _ => g.gate(not_ret, p(name)),
            }
        };
        if f == RvfiField::RdWdata && mutation == Some(Mutation::RdWdataStale) {
            // Report the value one cycle late.
            let stale = g.state_register("rvfi_rd_wdata_prev", 32);
            g.drive_reg(stale, id);
            let late = g.read_reg(stale);
            g.output(&f.to_string(), late)?;
            continue;
        }
        g.output(&f.to_string(), id)?;
    }
    g.set_section(Section::Core);
    Ok(graph)
}

/// Output indices of the RVFI ports in an elaborated design.
#[derive(Debug, Clone)]
pub struct RvfiPorts {
    valid: usize,
    fields: [usize; 18],
}

impl RvfiPorts {
    pub fn locate(design: &ElaboratedDesign) -> Option<RvfiPorts> {
        let valid = design.output_index("rvfi_valid")?;
        let mut fields = [0; 18];
        for (slot, f) in fields.iter_mut().zip(RvfiField::ALL) {
            *slot = design.output_index(&f.to_string())?;
        }
        Some(RvfiPorts { valid, fields })
    }

    /// The record presented in the cycle `engine` just evaluated, if any.
    pub fn extract(&self, engine: &Engine<'_>) -> Option<RvfiRecord> {
        if engine.output(self.valid) & 1 == 0 {
            return None;
        }
        let mut r = RvfiRecord {
            valid: true,
            ..RvfiRecord::default()
        };
        for (&i, f) in self.fields.iter().zip(RvfiField::ALL) {
            r.set(f, engine.output(i));
        }
        Some(r)
    }
}

/// Convenience form of [`RvfiPorts::extract`].
pub fn extract_record(engine: &Engine<'_>) -> Option<RvfiRecord> {
    RvfiPorts::locate(engine.design())?.extract(engine)
}
