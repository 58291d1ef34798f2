// SPDX-License-Identifier: Apache-2.0

//! The RV32I pipeline as a timing-abstract design graph.
//!
//! Every transaction is born at NEXT_PC and moves one physical stage per
//! cycle; the pipeline never stalls in place. Hazards are resolved by
//! replaying from REG_RD, wrong-path work is cancelled by epoch tags, and
//! a returning load reserves the NEXT_PC slot that fetch would have used.

use crate::stagegraph::{DesignGraph, NodeId, VirtualStage};

use super::{CoreConfig, CoreError, Mutation};

use VirtualStage::{Decode, Execute, Fetch, NextPc, RegRd, RegWr};

pub const LOAD_RETURN_ARC: &str = "ld_return";

fn k(g: &mut DesignGraph, v: u64, w: u8) -> NodeId {
    g.constant(v, w)
}

fn eqk(g: &mut DesignGraph, a: NodeId, v: u64) -> NodeId {
    let w = g.node(a).width;
    let c = k(g, v, w);
    g.eq(a, c)
}

fn nz(g: &mut DesignGraph, a: NodeId) -> NodeId {
    let w = g.node(a).width;
    let z = k(g, 0, w);
    g.ne(a, z)
}

/// `1 << index` over 32 bits.
fn onehot(g: &mut DesignGraph, index: NodeId) -> NodeId {
    let one = k(g, 1, 32);
    let i = g.zext(index, 32);
    g.shl(one, i)
}

/// Bit `index` of a 32-bit vector.
fn select_bit(g: &mut DesignGraph, v: NodeId, index: NodeId) -> NodeId {
    let i = g.zext(index, 32);
    let s = g.shr(v, i);
    g.bit(s, 0)
}

/// Widens a 4-bit byte mask into a 32-bit bit mask.
pub(crate) fn expand_mask(g: &mut DesignGraph, m: NodeId) -> NodeId {
    let bytes: Vec<NodeId> = (0..4u8)
        .rev()
        .map(|i| {
            let b = g.bit(m, i);
            g.sext(b, 8)
        })
        .collect();
    g.concat_all(&bytes)
}

fn named(g: &mut DesignGraph, name: &str, id: NodeId) -> Result<NodeId, CoreError> {
    Ok(g.named(name, id)?)
}

pub fn build_core(config: &CoreConfig) -> Result<DesignGraph, CoreError> {
    config.validate()?;
    let mut graph = DesignGraph::new("warp_core");
    let g = &mut graph;
    let mutation = config.mutation;
    let mut redirect_last = None;

    let mem = g.memory("mem", config.mem_size);
    let rf = g.regfile("regs", 32, 32);
    let pc_reg = g.state_register("pc", 32);
    let br_epoch = g.state_register("br_epoch", 1);
    let rp_epoch = g.state_register("rp_epoch", 1);
    let halted_reg = g.state_register("halted", 1);
    let order_reg = g.state_register("order", 64);
    let pending_reg = g.state_register("pending", 32);
    let ld_count_reg = g.state_register("ld_count", 16);
    let arc = g.push_arc_unchecked(LOAD_RETURN_ARC, config.mem_latency + 1, NextPc);

    // ---- NEXT_PC: a returning load wins the slot over fetch ----------------
    g.set_stage(NextPc);
    let pc = g.read_reg(pc_reg);
    named(g, "pc", pc)?;
    let ret = g.declare_recirculation(arc, "ld_valid", 1)?;
    named(g, "returning_ld", ret)?;
    let ret_rd = g.declare_recirculation(arc, "ld_rd", 5)?;
    named(g, "ret_rd", ret_rd)?;
    let ret_data = g.declare_recirculation(arc, "ld_data", 32)?;
    named(g, "ret_data", ret_data)?;
    let ret_f3 = g.declare_recirculation(arc, "ld_f3", 3)?;
    let ret_off = g.declare_recirculation(arc, "ld_off", 2)?;
    let halted = g.read_reg(halted_reg);
    let not_ret = g.not(ret);
    let not_halted = g.not(halted);
    let fetch_valid = g.and(not_ret, not_halted);
    named(g, "fetch_valid", fetch_valid)?;
    let br_tag = g.read_reg(br_epoch);
    let rp_tag = g.read_reg(rp_epoch);
    let four = k(g, 4, 32);
    let pc_plus4 = g.add(pc, four);
    named(g, "pc_plus4", pc_plus4)?;

    // ---- FETCH -------------------------------------------------------------
    g.set_stage(Fetch);
    let insn = g.mem_read(mem, pc);
    named(g, "insn", insn)?;

    // ---- DECODE ------------------------------------------------------------
    g.set_stage(Decode);
    let opcode = g.slice(insn, 6, 0);
    let rd = g.slice(insn, 11, 7);
    named(g, "rd", rd)?;
    let f3 = g.slice(insn, 14, 12);
    named(g, "funct3", f3)?;
    let rs1 = g.slice(insn, 19, 15);
    named(g, "rs1_field", rs1)?;
    let rs2 = g.slice(insn, 24, 20);
    named(g, "rs2_field", rs2)?;
    let f7 = g.slice(insn, 31, 25);
    let f3_is: Vec<NodeId> = (0..8).map(|v| eqk(g, f3, v)).collect();
    let f7_zero = eqk(g, f7, 0);
    let f7_alt = eqk(g, f7, 0x20);

    let op_lui = eqk(g, opcode, 0b011_0111);
    let op_auipc = eqk(g, opcode, 0b001_0111);
    let op_jal = eqk(g, opcode, 0b110_1111);
    let op_jalr = eqk(g, opcode, 0b110_0111);
    let op_branch = eqk(g, opcode, 0b110_0011);
    let op_load = eqk(g, opcode, 0b000_0011);
    let op_store = eqk(g, opcode, 0b010_0011);
    let op_imm = eqk(g, opcode, 0b001_0011);
    let op_reg = eqk(g, opcode, 0b011_0011);

    let is_lui = op_lui;
    let is_auipc = op_auipc;
    let is_jal = op_jal;
    let is_jalr = g.and(op_jalr, f3_is[0]);
    let br_f3 = g.any(&[f3_is[0], f3_is[1], f3_is[4], f3_is[5], f3_is[6], f3_is[7]]);
    let is_branch = g.and(op_branch, br_f3);
    let ld_f3 = g.any(&[f3_is[0], f3_is[1], f3_is[2], f3_is[4], f3_is[5]]);
    let is_load = g.and(op_load, ld_f3);
    named(g, "is_load", is_load)?;
    let st_f3 = g.any(&[f3_is[0], f3_is[1], f3_is[2]]);
    let is_store = g.and(op_store, st_f3);
    named(g, "is_store", is_store)?;
    let imm_plain = g.any(&[f3_is[0], f3_is[2], f3_is[3], f3_is[4], f3_is[6], f3_is[7]]);
    let slli_ok = g.and(f3_is[1], f7_zero);
    let f7_shift = g.or(f7_zero, f7_alt);
    let sr_ok = g.and(f3_is[5], f7_shift);
    let imm_f = g.any(&[imm_plain, slli_ok, sr_ok]);
    let is_opimm = g.and(op_imm, imm_f);
    let alt_f3 = g.or(f3_is[0], f3_is[5]);
    let alt_ok = g.and(f7_alt, alt_f3);
    let reg_f = g.or(f7_zero, alt_ok);
    let is_op = g.and(op_reg, reg_f);
    let is_ebreak = eqk(g, insn, 0x0010_0073);
    named(g, "is_ebreak", is_ebreak)?;
    let legal = g.any(&[
        is_lui, is_auipc, is_jal, is_jalr, is_branch, is_load, is_store, is_opimm, is_op,
        is_ebreak,
    ]);
    let illegal = g.not(legal);
    let writes_rd = g.any(&[is_lui, is_auipc, is_jal, is_jalr, is_load, is_opimm, is_op]);
    named(g, "writes_rd", writes_rd)?;
    let reads_rs1 = g.any(&[is_jalr, is_branch, is_load, is_store, is_opimm, is_op]);
    let reads_rs2 = g.any(&[is_branch, is_store, is_op]);
    // A source field that is not a register read is reported as x0.
    let rs1_addr = g.gate(reads_rs1, rs1);
    named(g, "rs1_addr", rs1_addr)?;
    let rs2_addr = g.gate(reads_rs2, rs2);
    named(g, "rs2_addr", rs2_addr)?;
    let rd_nz = nz(g, rd);

    let hi12 = g.slice(insn, 31, 20);
    let imm_i = g.sext(hi12, 32);
    let s_hi = g.slice(insn, 31, 25);
    let s_lo = g.slice(insn, 11, 7);
    let s_cat = g.concat(s_hi, s_lo);
    let imm_s = g.sext(s_cat, 32);
    let b31 = g.bit(insn, 31);
    let b7 = g.bit(insn, 7);
    let b30_25 = g.slice(insn, 30, 25);
    let b11_8 = g.slice(insn, 11, 8);
    let zero1 = k(g, 0, 1);
    let b_cat = g.concat_all(&[b31, b7, b30_25, b11_8, zero1]);
    let imm_b = g.sext(b_cat, 32);
    let u_hi = g.slice(insn, 31, 12);
    let zero12 = k(g, 0, 12);
    let imm_u = g.concat(u_hi, zero12);
    let j19_12 = g.slice(insn, 19, 12);
    let j20 = g.bit(insn, 20);
    let j30_21 = g.slice(insn, 30, 21);
    let j_cat = g.concat_all(&[b31, j19_12, j20, j30_21, zero1]);
    let imm_j = g.sext(j_cat, 32);
    let alt_bit = g.bit(insn, 30);

    // ---- REG_RD: epoch check, scoreboard, register read --------------------
    g.set_stage(RegRd);
    let br_now = g.read_reg(br_epoch);
    let rp_now = g.read_reg(rp_epoch);
    let br_ok = g.eq(br_tag, br_now);
    let rp_ok = g.eq(rp_tag, rp_now);
    let valid_rr = g.all(&[fetch_valid, br_ok, rp_ok]);
    let pending = g.read_reg(pending_reg);
    let haz_rs1 = select_bit(g, pending, rs1_addr);
    let haz_rs2 = select_bit(g, pending, rs2_addr);
    let pend_rd = select_bit(g, pending, rd);
    let haz_rd = g.and(writes_rd, pend_rd);
    let ld_count = g.read_reg(ld_count_reg);
    let max_loads = k(g, config.max_pending_loads as u64, 16);
    let below_max = g.lt_u(ld_count, max_loads);
    let at_max = g.not(below_max);
    let ld_full = g.and(is_load, at_max);
    let hazard = if mutation == Some(Mutation::ScoreboardOff) {
        ld_full
    } else {
        g.any(&[haz_rs1, haz_rs2, haz_rd, ld_full])
    };
    let replay = g.and(valid_rr, hazard);
    named(g, "replay", replay)?;
    let no_hazard = g.not(hazard);
    let proceed = g.and(valid_rr, no_hazard);
    let rs1_val = g.regfile_read(rf, rs1_addr);
    named(g, "rs1_val", rs1_val)?;
    let rs2_val = g.regfile_read(rf, rs2_addr);
    named(g, "rs2_val", rs2_val)?;
    let sb_set = g.all(&[proceed, writes_rd, rd_nz]);
    let set_bit = onehot(g, rd);
    let set_mask = g.gate(sb_set, set_bit);
    let ld_take = g.and(proceed, is_load);
    let replay_pc = g.copy(pc);
    let rr_squash = {
        let not_valid = g.not(valid_rr);
        g.and(fetch_valid, not_valid)
    };

    // ---- EXECUTE -----------------------------------------------------------
    g.set_stage(Execute);
    let br_ex = g.read_reg(br_epoch);
    let ex_ok = g.eq(br_tag, br_ex);
    let ex_ok = if mutation == Some(Mutation::SquashShort) {
        // The slot directly behind a redirecting instruction escapes.
        let last_reg = g.state_register("redirected_last", 1);
        let last = g.read_reg(last_reg);
        let ok = g.or(ex_ok, last);
        redirect_last = Some(last_reg);
        ok
    } else {
        ex_ok
    };
    let valid_ex = g.and(proceed, ex_ok);
    named(g, "valid_ex", valid_ex)?;
    let op_b = g.mux(is_op, rs2_val, imm_i);
    let sum = g.add(rs1_val, op_b);
    let diff = g.sub(rs1_val, op_b);
    let sh5 = g.slice(op_b, 4, 0);
    let shamt = g.zext(sh5, 32);
    let sll = g.shl(rs1_val, shamt);
    let srl = g.shr(rs1_val, shamt);
    let sra = g.sra(rs1_val, shamt);
    let slt1 = g.lt_s(rs1_val, op_b);
    let slt = g.zext(slt1, 32);
    let sltu1 = g.lt_u(rs1_val, op_b);
    let sltu = g.zext(sltu1, 32);
    let xor = g.xor(rs1_val, op_b);
    let or = g.or(rs1_val, op_b);
    let and = g.and(rs1_val, op_b);
    let use_sub = g.and(is_op, alt_bit);
    let addsub = g.mux(use_sub, diff, sum);
    let shr = g.mux(alt_bit, sra, srl);
    let f3_0 = g.bit(f3, 0);
    let f3_1 = g.bit(f3, 1);
    let f3_2 = g.bit(f3, 2);
    let m01 = g.mux(f3_0, sll, addsub);
    let m23 = g.mux(f3_0, sltu, slt);
    let m45 = g.mux(f3_0, shr, xor);
    let m67 = g.mux(f3_0, and, or);
    let m03 = g.mux(f3_1, m23, m01);
    let m47 = g.mux(f3_1, m67, m45);
    let alu = g.mux(f3_2, m47, m03);

    let c_eq = g.eq(rs1_val, rs2_val);
    let c_lt = g.lt_s(rs1_val, rs2_val);
    let c_ltu = g.lt_u(rs1_val, rs2_val);
    let c_rel = g.mux(f3_1, c_ltu, c_lt);
    let c_base = g.mux(f3_2, c_rel, c_eq);
    let cond = g.xor(c_base, f3_0);
    let br_taken = g.and(is_branch, cond);
    let taken = g.any(&[is_jal, is_jalr, br_taken]);
    named(g, "taken", taken)?;
    let jalr_sum = g.add(rs1_val, imm_i);
    let not1 = k(g, !1u64, 32);
    let jalr_t = g.and(jalr_sum, not1);
    let pc_off = g.mux(is_jal, imm_j, imm_b);
    let pc_t = g.add(pc, pc_off);
    let target = g.mux(is_jalr, jalr_t, pc_t);
    named(g, "target", target)?;
    let t_low = g.slice(target, 1, 0);
    let t_mis = nz(g, t_low);
    let tgt_trap = g.and(taken, t_mis);

    let is_mem = g.or(is_load, is_store);
    let mem_off = g.mux(is_store, imm_s, imm_i);
    let addr = g.add(rs1_val, mem_off);
    named(g, "mem_addr", addr)?;
    let size_code = g.slice(f3, 1, 0);
    let a0 = g.bit(addr, 0);
    let a10 = g.slice(addr, 1, 0);
    let a10_nz = nz(g, a10);
    let is_half = eqk(g, size_code, 1);
    let is_word = eqk(g, size_code, 2);
    let half_mis = g.and(is_half, a0);
    let word_mis = g.and(is_word, a10_nz);
    let misaligned = g.or(half_mis, word_mis);
    let size_half = k(g, 2, 33);
    let size_word = k(g, 4, 33);
    let size_byte = k(g, 1, 33);
    let size_hw = g.mux(is_half, size_half, size_byte);
    let size = g.mux(is_word, size_word, size_hw);
    let addr33 = g.zext(addr, 33);
    let end = g.add(addr33, size);
    let limit = k(g, config.mem_size as u64, 33);
    let oob = g.lt_u(limit, end);
    let bad_access = g.or(misaligned, oob);
    let mem_trap = g.and(is_mem, bad_access);
    let trap = g.any(&[illegal, mem_trap, tgt_trap]);
    named(g, "trap", trap)?;
    let not_trap = g.not(trap);
    let redirect_br = g.all(&[valid_ex, taken, not_trap]);
    let halt_commit = g.and(valid_ex, is_ebreak);
    let redirect = g.or(redirect_br, halt_commit);
    let order = g.read_reg(order_reg);
    named(g, "order", order)?;
    let issue_ld = g.all(&[valid_ex, is_load, not_trap]);
    named(g, "issue_ld", issue_ld)?;
    let not_valid_ex = g.not(valid_ex);
    let ex_squash = g.and(proceed, not_valid_ex);
    let sb_drop = g.and(sb_set, not_valid_ex);
    let clr_ex = g.gate(sb_drop, set_bit);
    let not_issue = g.not(issue_ld);
    let ld_drop = g.and(ld_take, not_issue);
    let one4 = k(g, 1, 4);
    let three4 = k(g, 3, 4);
    let fifteen4 = k(g, 15, 4);
    let hw_mask = g.mux(is_half, three4, one4);
    let size_mask = g.mux(is_word, fifteen4, hw_mask);
    let off4 = g.zext(a10, 4);
    let byte_mask = g.shl(size_mask, off4);
    named(g, "byte_mask", byte_mask)?;

    // ---- RESULT: result select, memory access ------------------------------
    g.set_stage(VirtualStage::Result);
    let auipc_v = g.add(pc, imm_u);
    let is_link = g.or(is_jal, is_jalr);
    let r1 = g.mux(is_link, pc_plus4, alu);
    let r2 = g.mux(is_auipc, auipc_v, r1);
    let rd_val = g.mux(is_lui, imm_u, r2);
    named(g, "rd_val", rd_val)?;
    let zero3 = k(g, 0, 3);
    let off_bits = g.concat(a10, zero3);
    let off_sh = g.zext(off_bits, 32);
    let store_data = g.shl(rs2_val, off_sh);
    named(g, "store_data", store_data)?;
    let store_en = g.all(&[valid_ex, is_store, not_trap]);
    g.mem_write(mem, store_en, addr, store_data, byte_mask);
    let mem_word = g.mem_read(mem, addr);
    let src_valid = g.copy(issue_ld);
    let src_rd = g.copy(rd);
    let src_f3 = g.copy(f3);
    let src_off = g.copy(a10);
    g.bind_recirculation(arc, "ld_valid", src_valid)?;
    g.bind_recirculation(arc, "ld_rd", src_rd)?;
    g.bind_recirculation(arc, "ld_data", mem_word)?;
    g.bind_recirculation(arc, "ld_f3", src_f3)?;
    g.bind_recirculation(arc, "ld_off", src_off)?;
    let dbg_issue = g.copy(issue_ld);

    // ---- REG_WR: register write for instructions and load returns ----------
    g.set_stage(RegWr);
    let ret_off_bits = g.concat(ret_off, zero3);
    let ret_sh = g.zext(ret_off_bits, 32);
    let shifted = g.shr(ret_data, ret_sh);
    let lb8 = g.slice(shifted, 7, 0);
    let lh16 = g.slice(shifted, 15, 0);
    let lb_s = g.sext(lb8, 32);
    let lb_u = g.zext(lb8, 32);
    let lh_s = g.sext(lh16, 32);
    let lh_u = g.zext(lh16, 32);
    let unsigned = g.bit(ret_f3, 2);
    let ret_f3_0 = g.bit(ret_f3, 0);
    let ret_f3_1 = g.bit(ret_f3, 1);
    let bval = g.mux(unsigned, lb_u, lb_s);
    let hval = g.mux(unsigned, lh_u, lh_s);
    let bh = g.mux(ret_f3_0, hval, bval);
    let ld_value = g.mux(ret_f3_1, shifted, bh);
    named(g, "ld_value", ld_value)?;
    let not_load = g.not(is_load);
    let alu_we = g.all(&[valid_ex, writes_rd, not_trap, not_load, rd_nz]);
    let ret_rd_nz = nz(g, ret_rd);
    let ret_we = g.and(ret, ret_rd_nz);
    let rf_we = g.or(alu_we, ret_we);
    let rf_idx = g.mux(ret, ret_rd, rd);
    let rf_data = g.mux(ret, ld_value, rd_val);
    g.regfile_write(rf, rf_we, rf_idx, rf_data);
    let wb_clear = g.all(&[sb_set, valid_ex, not_issue]);
    let clr_wb_alu = g.gate(wb_clear, set_bit);
    let ret_bit = onehot(g, ret_rd);
    let clr_wb_ret = g.gate(ret, ret_bit);
    let clr_wb = g.or(clr_wb_alu, clr_wb_ret);
    let ret_commit = g.copy(ret);
    let load_drop_wb = g.zext(ret_commit, 16);

    // ---- next-state logic (reads every stage in the current cycle) ---------
    g.set_stage(NextPc);
    let s_redirect = g.same_cycle(redirect);
    let s_target = g.same_cycle(target);
    let s_replay = g.same_cycle(replay);
    let s_replay_pc = g.same_cycle(replay_pc);
    let hold = g.mux(ret, pc, pc_plus4);
    let after_replay = g.mux(s_replay, s_replay_pc, hold);
    // EBREAK squashes younger slots like a redirect but stops fetch
    // instead of steering it.
    let s_redirect_br = g.same_cycle(redirect_br);
    let next_pc = g.mux(s_redirect_br, s_target, after_replay);
    g.drive_reg(pc_reg, next_pc);
    let s_halt_commit = g.same_cycle(halt_commit);
    let br_next = g.xor(br_tag, s_redirect);
    g.drive_reg(br_epoch, br_next);
    let rp_next = g.xor(rp_tag, s_replay);
    g.drive_reg(rp_epoch, rp_next);
    let halted_next = g.or(halted, s_halt_commit);
    g.drive_reg(halted_reg, halted_next);

    let pend_now = g.read_reg(pending_reg);
    let s_set = g.same_cycle(set_mask);
    let s_clr_ex = g.same_cycle(clr_ex);
    let s_clr_wb = g.same_cycle(clr_wb);
    let set = g.or(pend_now, s_set);
    let clr = g.or(s_clr_ex, s_clr_wb);
    let keep = g.not(clr);
    let pend_next = g.and(set, keep);
    g.drive_reg(pending_reg, pend_next);

    let cnt_now = g.read_reg(ld_count_reg);
    let s_take = g.same_cycle(ld_take);
    let s_drop = g.same_cycle(ld_drop);
    let s_ret = g.same_cycle(load_drop_wb);
    let take16 = g.zext(s_take, 16);
    let drop16 = g.zext(s_drop, 16);
    let up = g.add(cnt_now, take16);
    let down = g.sub(up, drop16);
    let cnt_next = g.sub(down, s_ret);
    g.drive_reg(ld_count_reg, cnt_next);

    let ord_now = g.read_reg(order_reg);
    let s_commit = g.same_cycle(valid_ex);
    let commit64 = g.zext(s_commit, 64);
    let ord_next = g.add(ord_now, commit64);
    g.drive_reg(order_reg, ord_next);

    if let Some(last_reg) = redirect_last {
        g.drive_reg(last_reg, s_redirect);
    }

    // ---- observation ports ---------------------------------------------------
    g.output("dbg_fetch", fetch_valid)?;
    g.output("dbg_return", ret)?;
    g.output("dbg_issue", dbg_issue)?;
    g.output("dbg_replay", replay)?;
    g.output("dbg_squash_rr", rr_squash)?;
    g.output("dbg_squash_ex", ex_squash)?;
    g.output("dbg_outstanding", cnt_now)?;
    g.output("dbg_halted", halted)?;
    Ok(graph)
}
