// SPDX-License-Identifier: Apache-2.0

//! Reference interpreter for elaborated designs.

use super::elaborate::{Code, Step};
use super::{ArrayId, ArrayKind, ElaboratedDesign, Error, NodeId, RegId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArrayData {
    Words(Vec<u64>),
    Bytes(Vec<u8>),
}

/// Every register (staging, recirculation, state) plus array contents.
/// All zero at reset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimState {
    regs: Vec<u64>,
    arrays: Vec<ArrayData>,
}

impl SimState {
    pub fn register(&self, design: &ElaboratedDesign, reg: RegId) -> u64 {
        self.regs[design.tape.state_slot[reg.0 as usize] as usize - design.tape.value_slots]
    }

    /// Value held by tap `depth` (1-based) of staging chain `chain`.
    pub fn staged(&self, design: &ElaboratedDesign, chain: usize, depth: u32) -> u64 {
        let slot = design.tape.chain_slot[chain] + depth - 1;
        self.regs[slot as usize - design.tape.value_slots]
    }

    pub fn array(&self, id: ArrayId) -> &ArrayData {
        &self.arrays[id.0 as usize]
    }

    /// Copies `bytes` into a byte array starting at address 0. Bytes past
    /// the end of the array are dropped; returns how many were stored.
    pub fn load_bytes(&mut self, id: ArrayId, bytes: &[u8]) -> usize {
        match &mut self.arrays[id.0 as usize] {
            ArrayData::Bytes(mem) => {
                let n = bytes.len().min(mem.len());
                mem[..n].copy_from_slice(&bytes[..n]);
                n
            }
            ArrayData::Words(_) => 0,
        }
    }

    pub fn bytes(&self, id: ArrayId) -> Option<&[u8]> {
        match &self.arrays[id.0 as usize] {
            ArrayData::Bytes(b) => Some(b),
            ArrayData::Words(_) => None,
        }
    }

    pub fn words(&self, id: ArrayId) -> Option<&[u64]> {
        match &self.arrays[id.0 as usize] {
            ArrayData::Words(w) => Some(w),
            ArrayData::Bytes(_) => None,
        }
    }
}

impl ElaboratedDesign {
    pub fn initial_state(&self) -> SimState {
        SimState {
            regs: vec![0; self.tape.reg_slots],
            arrays: self
                .array_sizes()
                .into_iter()
                .map(|k| match k {
                    ArrayKind::RegFile { entries, .. } => ArrayData::Words(vec![0; entries as usize]),
                    ArrayKind::Memory { bytes } => ArrayData::Bytes(vec![0; bytes as usize]),
                })
                .collect(),
        }
    }

    /// One clock cycle as a pure function: returns the next state and the
    /// external output values (in declaration order).
    pub fn eval_cycle(
        &self,
        state: &SimState,
        inputs: &[u64],
    ) -> Result<(SimState, Vec<u64>), Error> {
        let mut next = state.clone();
        let mut engine = Engine::new(self);
        engine.step(&mut next, inputs)?;
        Ok((next, engine.outputs()))
    }
}

/// Reusable evaluation scratch space for stepping a design in place.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    design: &'a ElaboratedDesign,
    buf: Vec<u64>,
}

impl<'a> Engine<'a> {
    pub fn new(design: &'a ElaboratedDesign) -> Self {
        let tape = &design.tape;
        let mut buf = vec![0; tape.value_slots + tape.reg_slots];
        for &(slot, v) in &tape.consts {
            buf[slot as usize] = v;
        }
        Engine { design, buf }
    }

    pub fn design(&self) -> &'a ElaboratedDesign {
        self.design
    }

    /// Advances `state` by one cycle. Output and node values of the cycle
    /// just evaluated remain readable until the next call.
    pub fn step(&mut self, state: &mut SimState, inputs: &[u64]) -> Result<(), Error> {
        let tape = &self.design.tape;
        if inputs.len() != tape.input_widths.len() {
            return Err(Error::WidthMismatch(format!(
                "expected {} inputs, got {}",
                tape.input_widths.len(),
                inputs.len()
            )));
        }
        for (i, (&v, &w)) in inputs.iter().zip(&tape.input_widths).enumerate() {
            if w < 64 && v >> w != 0 {
                return Err(Error::WidthMismatch(format!(
                    "input #{i} value {v:#x} exceeds {w} bits"
                )));
            }
        }
        if state.regs.len() != tape.reg_slots {
            return Err(Error::WidthMismatch(format!(
                "state has {} registers, design has {}",
                state.regs.len(),
                tape.reg_slots
            )));
        }

        let buf = &mut self.buf;
        buf[tape.value_slots..].copy_from_slice(&state.regs);
        for s in &tape.steps {
            let v = eval_step(s, buf, inputs, &state.arrays);
            buf[s.dst as usize] = v & s.mask;
        }

        for (i, (&src, &m)) in tape.reg_next.iter().zip(&tape.reg_masks).enumerate() {
            state.regs[i] = buf[src as usize] & m;
        }
        for w in &tape.writes {
            apply_write(w, buf, &mut state.arrays);
        }
        Ok(())
    }

    pub fn output(&self, index: usize) -> u64 {
        self.buf[self.design.tape.outputs[index] as usize]
    }

    pub fn outputs(&self) -> Vec<u64> {
        self.design
            .tape
            .outputs
            .iter()
            .map(|&i| self.buf[i as usize])
            .collect()
    }

    pub fn value(&self, node: NodeId) -> u64 {
        self.buf[node.index()]
    }
}

#[inline]
fn sign_extend(v: u64, width: u32) -> i64 {
    if width >= 64 {
        v as i64
    } else {
        let shift = 64 - width;
        ((v << shift) as i64) >> shift
    }
}

#[inline]
fn eval_step(s: &Step, buf: &[u64], inputs: &[u64], arrays: &[ArrayData]) -> u64 {
    let a = buf[s.args[0] as usize];
    let b = || buf[s.args[1] as usize];
    let width = 64 - s.mask.leading_zeros();
    match s.code {
        Code::Input => inputs[s.aux as usize],
        Code::Add => a.wrapping_add(b()),
        Code::Sub => a.wrapping_sub(b()),
        Code::And => a & b(),
        Code::Or => a | b(),
        Code::Xor => a ^ b(),
        Code::Shl => {
            let n = b();
            if n >= width as u64 {
                0
            } else {
                a << n
            }
        }
        Code::Shr => {
            let n = b();
            if n >= width as u64 {
                0
            } else {
                a >> n
            }
        }
        Code::Sra => {
            let n = b().min(63);
            (sign_extend(a, s.aux) >> n) as u64
        }
        Code::Eq => (a == b()) as u64,
        Code::LtS => (sign_extend(a, s.aux) < sign_extend(b(), s.aux)) as u64,
        Code::LtU => (a < b()) as u64,
        Code::Mux => {
            if a & 1 == 1 {
                b()
            } else {
                buf[s.args[2] as usize]
            }
        }
        Code::Slice => a >> s.aux,
        Code::Concat => {
            if s.aux >= 64 {
                b()
            } else {
                (a << s.aux) | b()
            }
        }
        Code::SignExt => sign_extend(a, s.aux) as u64,
        Code::Copy => a,
        Code::RfRead => match &arrays[s.aux as usize] {
            ArrayData::Words(w) => w.get(a as usize).copied().unwrap_or(0),
            ArrayData::Bytes(_) => 0,
        },
        Code::MemRead => match &arrays[s.aux as usize] {
            ArrayData::Bytes(m) => read_word(m, a),
            ArrayData::Words(_) => 0,
        },
        Code::RfWrite | Code::MemWrite => 0,
    }
}

fn read_word(mem: &[u8], addr: u64) -> u64 {
    let base = (addr & !3) as usize;
    match mem.get(base..base + 4) {
        Some(b) => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as u64,
        None => 0,
    }
}

fn apply_write(s: &Step, buf: &[u64], arrays: &mut [ArrayData]) {
    let enable = buf[s.args[0] as usize] & 1 == 1;
    if !enable {
        return;
    }
    let addr = buf[s.args[1] as usize];
    let data = buf[s.args[2] as usize];
    match (&mut arrays[s.aux as usize], s.code) {
        (ArrayData::Words(w), Code::RfWrite) => {
            if let Some(slot) = w.get_mut(addr as usize) {
                *slot = data;
            }
        }
        (ArrayData::Bytes(m), Code::MemWrite) => {
            let byte_mask = buf[s.args[3] as usize];
            let base = (addr & !3) as usize;
            if base + 4 <= m.len() {
                for i in 0..4 {
                    if byte_mask >> i & 1 == 1 {
                        m[base + i] = (data >> (8 * i)) as u8;
                    }
                }
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stagegraph::{elaborate, DesignGraph, StageMap, VirtualStage};
    use proptest::prelude::*;

    #[test]
    fn constant_is_stable() {
        let mut g = DesignGraph::new("t");
        let c = g.constant(42, 8);
        g.output("c", c).unwrap();
        let d = elaborate(&g, &StageMap::seven_stage()).unwrap();
        let mut st = d.initial_state();
        for _ in 0..5 {
            let (n, out) = d.eval_cycle(&st, &[]).unwrap();
            assert_eq!(out, vec![42]);
            st = n;
        }
    }

    #[test]
    fn add_wraps_at_width() {
        let mut g = DesignGraph::new("t");
        let a = g.input("a", 32).unwrap();
        let b = g.input("b", 32).unwrap();
        let s = g.add(a, b);
        g.output("s", s).unwrap();
        let d = elaborate(&g, &StageMap::single_stage()).unwrap();
        let st = d.initial_state();
        assert_eq!(d.eval_cycle(&st, &[2, 3]).unwrap().1, vec![5]);
        assert_eq!(d.eval_cycle(&st, &[0xffff_ffff, 2]).unwrap().1, vec![1]);
    }

    #[test]
    fn oversized_input_is_rejected() {
        let mut g = DesignGraph::new("t");
        let a = g.input("a", 4).unwrap();
        g.output("a", a).unwrap();
        let d = elaborate(&g, &StageMap::single_stage()).unwrap();
        assert!(matches!(
            d.eval_cycle(&d.initial_state(), &[16]),
            Err(Error::WidthMismatch(_))
        ));
        assert!(d.eval_cycle(&d.initial_state(), &[]).is_err());
    }

    #[test]
    fn shifts_and_compares() {
        let mut g = DesignGraph::new("t");
        let a = g.input("a", 8).unwrap();
        let n = g.input("n", 5).unwrap();
        let outs = [g.shl(a, n), g.shr(a, n), g.sra(a, n)];
        let b = g.constant(1, 8);
        let lts = g.lt_s(a, b);
        let ltu = g.lt_u(a, b);
        let sx = g.sext(a, 16);
        let sl = g.slice(a, 7, 4);
        let cc = g.concat(sl, sl);
        for (i, o) in outs.iter().chain([lts, ltu, sx, cc].iter()).enumerate() {
            g.output(&format!("o{i}"), *o).unwrap();
        }
        let d = elaborate(&g, &StageMap::single_stage()).unwrap();
        let out = d.eval_cycle(&d.initial_state(), &[0x90, 2]).unwrap().1;
        assert_eq!(out, vec![0x40, 0x24, 0xe4, 1, 0, 0xff90, 0x99]);
        let out = d.eval_cycle(&d.initial_state(), &[0x90, 9]).unwrap().1;
        assert_eq!(&out[..3], &[0, 0, 0xff]);
    }

    #[test]
    fn state_register_counts() {
        let mut g = DesignGraph::new("t");
        let r = g.state_register("r", 3);
        let v = g.read_reg(r);
        let one = g.constant(1, 3);
        let n = g.add(v, one);
        g.drive_reg(r, n);
        g.output("v", v).unwrap();
        let d = elaborate(&g, &StageMap::single_stage()).unwrap();
        let mut st = d.initial_state();
        let mut seen = vec![];
        for _ in 0..10 {
            let (n, out) = d.eval_cycle(&st, &[]).unwrap();
            seen.push(out[0]);
            st = n;
        }
        assert_eq!(seen, vec![0, 1, 2, 3, 4, 5, 6, 7, 0, 1]);
    }

    /// Drives a fresh token every cycle at `from` and reads it at `to`.
    fn staged_probe(map: &StageMap, from: VirtualStage, to: VirtualStage) -> (u32, Vec<u64>) {
        let mut g = DesignGraph::new("probe");
        g.set_stage(from);
        let tok = g.input("tok", 16).unwrap();
        let held = g.copy(tok);
        g.set_stage(to);
        let seen = g.copy(held);
        g.output("seen", seen).unwrap();
        let d = elaborate(&g, map).unwrap();
        let depth = map.staging_depth(from, to).unwrap();
        let mut st = d.initial_state();
        let mut eng = Engine::new(&d);
        let mut outs = vec![];
        for t in 0..12u64 {
            eng.step(&mut st, &[100 + t]).unwrap();
            outs.push(eng.output(0));
        }
        (depth, outs)
    }

    #[test]
    fn alignment_returns_token_from_depth_cycles_earlier() {
        for map in StageMap::presets() {
            for (i, &from) in VirtualStage::ALL.iter().enumerate() {
                for &to in &VirtualStage::ALL[i..] {
                    let (depth, outs) = staged_probe(&map, from, to);
                    assert_eq!(depth, map.staging_depth(from, to).unwrap());
                    for (t, &v) in outs.iter().enumerate() {
                        let expect = if (t as u32) < depth { 0 } else { 100 + t as u64 - depth as u64 };
                        assert_eq!(v, expect, "{map} {from}->{to} cycle {t}");
                    }
                }
            }
        }
    }

    #[test]
    fn memory_ports() {
        let mut g = DesignGraph::new("t");
        let mem = g.memory("mem", 16);
        let addr = g.input("addr", 32).unwrap();
        let data = g.input("data", 32).unwrap();
        let we = g.input("we", 1).unwrap();
        let m = g.input("mask", 4).unwrap();
        g.mem_write(mem, we, addr, data, m);
        let rd = g.mem_read(mem, addr);
        g.output("rd", rd).unwrap();
        let d = elaborate(&g, &StageMap::single_stage()).unwrap();
        let mut st = d.initial_state();
        let mut e = Engine::new(&d);
        e.step(&mut st, &[4, 0xdead_beef, 1, 0b0110]).unwrap();
        // write lands at end of cycle
        assert_eq!(e.output(0), 0);
        e.step(&mut st, &[5, 0, 0, 0]).unwrap();
        assert_eq!(e.output(0), 0x00ad_be00);
        e.step(&mut st, &[14, 0, 0, 0]).unwrap();
        assert_eq!(e.output(0), 0);
        e.step(&mut st, &[16, 0, 0, 0]).unwrap();
        assert_eq!(e.output(0), 0);
    }

    proptest! {
        #[test]
        fn eval_is_deterministic(a in 0u64..1 << 32, b in 0u64..1 << 32) {
            let mut g = DesignGraph::new("t");
            let x = g.input("a", 32).unwrap();
            let y = g.input("b", 32).unwrap();
            g.set_stage(VirtualStage::Execute);
            let s = g.sub(x, y);
            let r = g.state_register("acc", 32);
            let acc = g.read_reg(r);
            let n = g.xor(acc, s);
            g.drive_reg(r, n);
            g.output("n", n).unwrap();
            let d = elaborate(&g, &StageMap::seven_stage()).unwrap();
            let st = d.initial_state();
            let (s1, o1) = d.eval_cycle(&st, &[a, b]).unwrap();
            let (s2, o2) = d.eval_cycle(&st, &[a, b]).unwrap();
            prop_assert_eq!(s1, s2);
            prop_assert_eq!(o1, o2);
        }

        #[test]
        fn recirculation_is_bit_exact(values in proptest::collection::vec(0u64..1 << 40, 1..20), delay in 1u32..6) {
            let mut g = DesignGraph::new("t");
            g.set_stage(VirtualStage::Result);
            let v = g.input("v", 40).unwrap();
            let tag = g.slice(v, 7, 0);
            let b = g.bundle("b", &[("v", v), ("tag", tag)]).unwrap();
            let r = g.recirculate_bundle(&b, delay, VirtualStage::NextPc).unwrap();
            g.output("v", r.get("v").unwrap()).unwrap();
            g.output("tag", r.get("tag").unwrap()).unwrap();
            for map in StageMap::presets() {
                let d = elaborate(&g, &map).unwrap();
                let mut st = d.initial_state();
                let mut e = Engine::new(&d);
                for t in 0..values.len() + delay as usize {
                    let input = values.get(t).copied().unwrap_or(0);
                    e.step(&mut st, &[input]).unwrap();
                    if t >= delay as usize {
                        let src = values.get(t - delay as usize).copied().unwrap_or(0);
                        prop_assert_eq!(e.output(0), src);
                        prop_assert_eq!(e.output(1), src & 0xff);
                    }
                }
            }
        }
    }

    #[test]
    fn constant_recirculation_settles() {
        let mut g = DesignGraph::new("t");
        g.set_stage(VirtualStage::Execute);
        let c = g.constant(0x5a, 8);
        let v = g.copy(c);
        let b = g.bundle("b", &[("c", v)]).unwrap();
        let r = g.recirculate_bundle(&b, 3, VirtualStage::Fetch).unwrap();
        g.output("r", r.get("c").unwrap()).unwrap();
        let d = elaborate(&g, &StageMap::five_stage()).unwrap();
        let mut st = d.initial_state();
        let mut e = Engine::new(&d);
        let outs: Vec<u64> = (0..6)
            .map(|_| {
                e.step(&mut st, &[]).unwrap();
                e.output(0)
            })
            .collect();
        assert_eq!(outs, vec![0, 0, 0, 0x5a, 0x5a, 0x5a]);
    }
}
