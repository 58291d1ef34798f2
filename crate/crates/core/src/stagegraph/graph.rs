// SPDX-License-Identifier: Apache-2.0

//! The timing-abstract design graph.
//!
//! Every node is created "at" a virtual stage (the builder's current stage
//! cursor). A node reading an operand from an earlier stage reads the value
//! belonging to the same transaction; the elaborator inserts whatever
//! registers the stage map requires. State registers, arrays and feedback
//! arcs are the only ways a transaction observes another one, apart from
//! [`DesignGraph::same_cycle`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Error, VirtualStage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegId(pub(crate) u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArrayId(pub(crate) u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArcId(pub(crate) u32);

/// Which part of the design a construct belongs to. Only used for
/// reporting and for splitting emitted text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Section {
    Core,
    Harness,
}

impl Section {
    pub fn name(self) -> &'static str {
        match self {
            Section::Core => "core",
            Section::Harness => "harness",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Const(u64),
    Input(usize),
    Add,
    Sub,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Sra,
    Eq,
    LtS,
    LtU,
    /// operands: select (1 bit), value when 1, value when 0
    Mux,
    /// Bits `[lo + width - 1 : lo]` of the operand.
    Slice { lo: u8 },
    /// operands: high part, low part
    Concat,
    SignExt,
    ZeroExt,
    /// Identity; used to pin a value to a later stage.
    Copy,
    /// The operand's value in the current cycle, whichever transaction
    /// produced it. Never staged.
    SameCycle,
    RegRead(RegId),
    Recirculated { arc: ArcId, member: usize },
    /// operands: index
    RegfileRead(ArrayId),
    /// operands: enable, index, data
    RegfileWrite(ArrayId),
    /// operands: byte address; yields the little-endian word at `addr & !3`
    MemRead(ArrayId),
    /// operands: enable, byte address, word data, 4-bit byte mask
    MemWrite(ArrayId),
}

impl Op {
    pub fn mnemonic(&self) -> &'static str {
        match self {
            Op::Const(_) => "const",
            Op::Input(_) => "input",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::And => "and",
            Op::Or => "or",
            Op::Xor => "xor",
            Op::Shl => "shl",
            Op::Shr => "shr",
            Op::Sra => "sra",
            Op::Eq => "eq",
            Op::LtS => "lts",
            Op::LtU => "ltu",
            Op::Mux => "mux",
            Op::Slice { .. } => "slice",
            Op::Concat => "concat",
            Op::SignExt => "sext",
            Op::ZeroExt => "zext",
            Op::Copy => "copy",
            Op::SameCycle => "same_cycle",
            Op::RegRead(_) => "reg_read",
            Op::Recirculated { .. } => "recirculated",
            Op::RegfileRead(_) => "rf_read",
            Op::RegfileWrite(_) => "rf_write",
            Op::MemRead(_) => "mem_read",
            Op::MemWrite(_) => "mem_write",
        }
    }

    /// Write ports have side effects only.
    pub fn is_sink(&self) -> bool {
        matches!(self, Op::RegfileWrite(_) | Op::MemWrite(_))
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub op: Op,
    pub operands: Vec<NodeId>,
    pub width: u8,
    pub stage: VirtualStage,
    pub section: Section,
    pub name: Option<String>,
}

#[derive(Debug, Clone)]
pub struct StateReg {
    pub name: String,
    pub width: u8,
    pub next: Option<NodeId>,
    pub section: Section,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayKind {
    RegFile { entries: u32, width: u8 },
    /// Byte-addressed, accessed a little-endian word at a time.
    Memory { bytes: u32 },
}

#[derive(Debug, Clone)]
pub struct Array {
    pub name: String,
    pub kind: ArrayKind,
    pub section: Section,
}

#[derive(Debug, Clone)]
pub struct ArcMember {
    pub name: String,
    /// `None` until a declared member is bound.
    pub source: Option<NodeId>,
    pub output: NodeId,
}

/// A recirculation path: every member's output yields, at cycle `t`, the
/// member source's value at cycle `t - delay`.
#[derive(Debug, Clone)]
pub struct FeedbackArc {
    pub name: String,
    pub delay: u32,
    pub target: VirtualStage,
    pub members: Vec<ArcMember>,
    pub section: Section,
}

/// Named group of signals moved, staged or recirculated as a unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    name: String,
    members: Vec<(String, NodeId)>,
    arc: Option<ArcId>,
}

impl Bundle {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn members(&self) -> &[(String, NodeId)] {
        &self.members
    }

    pub fn get(&self, member: &str) -> Option<NodeId> {
        self.members
            .iter()
            .find(|(n, _)| n == member)
            .map(|(_, id)| *id)
    }

    /// The feedback arc this bundle was produced by, if any.
    pub fn arc(&self) -> Option<ArcId> {
        self.arc
    }

    pub fn width(&self, graph: &DesignGraph) -> u32 {
        self.members
            .iter()
            .map(|(_, id)| graph.node(*id).width as u32)
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct DesignGraph {
    name: String,
    nodes: Vec<Node>,
    signals: BTreeMap<String, NodeId>,
    inputs: Vec<(String, NodeId)>,
    outputs: Vec<(String, NodeId)>,
    regs: Vec<StateReg>,
    arrays: Vec<Array>,
    arcs: Vec<FeedbackArc>,
    bundles: Vec<Bundle>,
    stage: VirtualStage,
    section: Section,
    log: Vec<String>,
}

impl DesignGraph {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        DesignGraph {
            log: vec![format!("design {name}")],
            name,
            nodes: Vec::new(),
            signals: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            regs: Vec::new(),
            arrays: Vec::new(),
            arcs: Vec::new(),
            bundles: Vec::new(),
            stage: VirtualStage::NextPc,
            section: Section::Core,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn signal(&self, name: &str) -> Option<NodeId> {
        self.signals.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<NodeId, Error> {
        self.signal(name)
            .ok_or_else(|| Error::UnknownSignal(name.to_string()))
    }

    pub fn signals(&self) -> &BTreeMap<String, NodeId> {
        &self.signals
    }

    pub fn inputs(&self) -> &[(String, NodeId)] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[(String, NodeId)] {
        &self.outputs
    }

    pub fn registers(&self) -> &[StateReg] {
        &self.regs
    }

    pub fn register_by_name(&self, name: &str) -> Option<RegId> {
        self.regs
            .iter()
            .position(|r| r.name == name)
            .map(|i| RegId(i as u32))
    }

    pub fn register(&self, id: RegId) -> &StateReg {
        &self.regs[id.0 as usize]
    }

    pub fn arrays(&self) -> &[Array] {
        &self.arrays
    }

    pub fn array(&self, id: ArrayId) -> &Array {
        &self.arrays[id.0 as usize]
    }

    pub fn array_by_name(&self, name: &str) -> Option<ArrayId> {
        self.arrays
            .iter()
            .position(|a| a.name == name)
            .map(|i| ArrayId(i as u32))
    }

    pub fn arcs(&self) -> &[FeedbackArc] {
        &self.arcs
    }

    pub fn arc(&self, id: ArcId) -> &FeedbackArc {
        &self.arcs[id.0 as usize]
    }

    pub fn arc_by_name(&self, name: &str) -> Option<ArcId> {
        self.arcs
            .iter()
            .position(|a| a.name == name)
            .map(|i| ArcId(i as u32))
    }

    pub fn bundles(&self) -> &[Bundle] {
        &self.bundles
    }

    /// Every mutation ever applied, one line each, in order.
    pub fn construction_log(&self) -> &[String] {
        &self.log
    }

    /// Log entries made while the given section was current.
    pub fn construction_log_for(&self, section: Section) -> Vec<&str> {
        let tag = format!("[{}]", section.name());
        self.log
            .iter()
            .filter(|l| l.starts_with(&tag))
            .map(String::as_str)
            .collect()
    }

    // ---- cursor ----------------------------------------------------------

    pub fn set_stage(&mut self, stage: VirtualStage) {
        if stage != self.stage {
            self.stage = stage;
            self.record(format!("@{stage}"));
        }
    }

    pub fn stage(&self) -> VirtualStage {
        self.stage
    }

    pub fn set_section(&mut self, section: Section) {
        if section != self.section {
            self.section = section;
            self.record(format!("section {}", section.name()));
        }
    }

    pub fn section(&self) -> Section {
        self.section
    }

    fn record(&mut self, entry: String) {
        self.log
            .push(format!("[{}] {}", self.section.name(), entry));
    }

    fn push(&mut self, op: Op, operands: Vec<NodeId>, width: u8) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        let mut entry = format!("n{} = {}", id.0, op.mnemonic());
        match &op {
            Op::Const(v) => write!(entry, " {v:#x}").unwrap(),
            Op::Slice { lo } => write!(entry, " lo={lo}").unwrap(),
            Op::Input(i) => write!(entry, " #{i}").unwrap(),
            Op::RegRead(r) => write!(entry, " {}", self.regs[r.0 as usize].name).unwrap(),
            Op::Recirculated { arc, member } => {
                write!(entry, " {}.{member}", self.arcs[arc.0 as usize].name).unwrap()
            }
            Op::RegfileRead(a) | Op::RegfileWrite(a) | Op::MemRead(a) | Op::MemWrite(a) => {
                write!(entry, " {}", self.arrays[a.0 as usize].name).unwrap()
            }
            _ => {}
        }
        for o in &operands {
            write!(entry, " n{}", o.0).unwrap();
        }
        write!(entry, " :{width}").unwrap();
        self.record(entry);
        self.nodes.push(Node {
            op,
            operands,
            width,
            stage: self.stage,
            section: self.section,
            name: None,
        });
        id
    }

    fn w(&self, id: NodeId) -> u8 {
        self.nodes[id.index()].width
    }

    // ---- leaves ----------------------------------------------------------

    pub fn constant(&mut self, value: u64, width: u8) -> NodeId {
        self.push(Op::Const(value & mask(width)), vec![], width)
    }

    pub fn input(&mut self, name: &str, width: u8) -> Result<NodeId, Error> {
        let id = self.push(Op::Input(self.inputs.len()), vec![], width);
        self.inputs.push((name.to_string(), id));
        self.named(name, id)
    }

    // ---- arithmetic and logic ----------------------------------------------

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Add, vec![a, b], self.w(a))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Sub, vec![a, b], self.w(a))
    }

    pub fn and(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::And, vec![a, b], self.w(a))
    }

    pub fn or(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Or, vec![a, b], self.w(a))
    }

    pub fn xor(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Xor, vec![a, b], self.w(a))
    }

    pub fn not(&mut self, a: NodeId) -> NodeId {
        let w = self.w(a);
        let ones = self.constant(u64::MAX, w);
        self.xor(a, ones)
    }

    pub fn shl(&mut self, a: NodeId, amount: NodeId) -> NodeId {
        self.push(Op::Shl, vec![a, amount], self.w(a))
    }

    pub fn shr(&mut self, a: NodeId, amount: NodeId) -> NodeId {
        self.push(Op::Shr, vec![a, amount], self.w(a))
    }

    pub fn sra(&mut self, a: NodeId, amount: NodeId) -> NodeId {
        self.push(Op::Sra, vec![a, amount], self.w(a))
    }

    pub fn eq(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Eq, vec![a, b], 1)
    }

    pub fn ne(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let e = self.eq(a, b);
        self.not(e)
    }

    pub fn lt_s(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::LtS, vec![a, b], 1)
    }

    pub fn lt_u(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::LtU, vec![a, b], 1)
    }

    pub fn mux(&mut self, sel: NodeId, when_set: NodeId, when_clear: NodeId) -> NodeId {
        self.push(Op::Mux, vec![sel, when_set, when_clear], self.w(when_set))
    }

    /// Bits `hi..=lo` of `a`.
    pub fn slice(&mut self, a: NodeId, hi: u8, lo: u8) -> NodeId {
        let width = hi.saturating_sub(lo) + 1;
        self.push(Op::Slice { lo }, vec![a], width)
    }

    pub fn bit(&mut self, a: NodeId, i: u8) -> NodeId {
        self.slice(a, i, i)
    }

    pub fn concat(&mut self, hi: NodeId, lo: NodeId) -> NodeId {
        let width = self.w(hi).saturating_add(self.w(lo));
        self.push(Op::Concat, vec![hi, lo], width)
    }

    /// Concatenation of several parts, most significant first.
    pub fn concat_all(&mut self, parts: &[NodeId]) -> NodeId {
        let mut acc = parts[0];
        for &p in &parts[1..] {
            acc = self.concat(acc, p);
        }
        acc
    }

    pub fn sext(&mut self, a: NodeId, width: u8) -> NodeId {
        self.push(Op::SignExt, vec![a], width)
    }

    pub fn zext(&mut self, a: NodeId, width: u8) -> NodeId {
        self.push(Op::ZeroExt, vec![a], width)
    }

    pub fn copy(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Copy, vec![a], self.w(a))
    }

    pub fn same_cycle(&mut self, a: NodeId) -> NodeId {
        self.push(Op::SameCycle, vec![a], self.w(a))
    }

    /// OR of any number of 1-bit terms (constant 0 when empty).
    pub fn any(&mut self, terms: &[NodeId]) -> NodeId {
        match terms.split_first() {
            None => self.constant(0, 1),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &t| self.or(acc, t)),
        }
    }

    /// AND of any number of 1-bit terms (constant 1 when empty).
    pub fn all(&mut self, terms: &[NodeId]) -> NodeId {
        match terms.split_first() {
            None => self.constant(1, 1),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &t| self.and(acc, t)),
        }
    }

    /// `cond ? value : 0`
    pub fn gate(&mut self, cond: NodeId, value: NodeId) -> NodeId {
        let zero = self.constant(0, self.w(value));
        self.mux(cond, value, zero)
    }

    // ---- state -----------------------------------------------------------

    pub fn state_register(&mut self, name: &str, width: u8) -> RegId {
        let id = RegId(self.regs.len() as u32);
        self.record(format!("reg {name} :{width}"));
        self.regs.push(StateReg {
            name: name.to_string(),
            width,
            next: None,
            section: self.section,
        });
        id
    }

    pub fn read_reg(&mut self, reg: RegId) -> NodeId {
        let w = self.regs[reg.0 as usize].width;
        self.push(Op::RegRead(reg), vec![], w)
    }

    /// Sets the value the register takes at the end of every cycle.
    pub fn drive_reg(&mut self, reg: RegId, next: NodeId) {
        self.record(format!("drive {} <= n{}", self.regs[reg.0 as usize].name, next.0));
        self.regs[reg.0 as usize].next = Some(next);
    }

    pub fn regfile(&mut self, name: &str, entries: u32, width: u8) -> ArrayId {
        self.add_array(name, ArrayKind::RegFile { entries, width })
    }

    pub fn memory(&mut self, name: &str, bytes: u32) -> ArrayId {
        self.add_array(name, ArrayKind::Memory { bytes })
    }

    fn add_array(&mut self, name: &str, kind: ArrayKind) -> ArrayId {
        let id = ArrayId(self.arrays.len() as u32);
        self.record(format!("array {name} {kind:?}"));
        self.arrays.push(Array {
            name: name.to_string(),
            kind,
            section: self.section,
        });
        id
    }

    pub fn regfile_read(&mut self, rf: ArrayId, index: NodeId) -> NodeId {
        let width = match self.arrays[rf.0 as usize].kind {
            ArrayKind::RegFile { width, .. } => width,
            ArrayKind::Memory { .. } => 32,
        };
        self.push(Op::RegfileRead(rf), vec![index], width)
    }

    pub fn regfile_write(&mut self, rf: ArrayId, enable: NodeId, index: NodeId, data: NodeId) {
        self.push(Op::RegfileWrite(rf), vec![enable, index, data], 1);
    }

    pub fn mem_read(&mut self, mem: ArrayId, addr: NodeId) -> NodeId {
        self.push(Op::MemRead(mem), vec![addr], 32)
    }

    pub fn mem_write(
        &mut self,
        mem: ArrayId,
        enable: NodeId,
        addr: NodeId,
        data: NodeId,
        byte_mask: NodeId,
    ) {
        self.push(Op::MemWrite(mem), vec![enable, addr, data, byte_mask], 1);
    }

    // ---- naming ----------------------------------------------------------

    /// Gives a node a unique signal name.
    pub fn named(&mut self, name: &str, id: NodeId) -> Result<NodeId, Error> {
        if self.signals.contains_key(name) {
            return Err(Error::DuplicateName(name.to_string()));
        }
        self.record(format!("${name} = n{}", id.0));
        self.signals.insert(name.to_string(), id);
        let node = &mut self.nodes[id.index()];
        if node.name.is_none() {
            node.name = Some(name.to_string());
        }
        Ok(id)
    }

    pub fn output(&mut self, name: &str, id: NodeId) -> Result<(), Error> {
        if self.outputs.iter().any(|(n, _)| n == name) {
            return Err(Error::DuplicateName(name.to_string()));
        }
        self.record(format!("output {name} = n{}", id.0));
        self.outputs.push((name.to_string(), id));
        Ok(())
    }

    // ---- bundles ---------------------------------------------------------

    pub fn bundle(&mut self, name: &str, members: &[(&str, NodeId)]) -> Result<Bundle, Error> {
        let mut list: Vec<(String, NodeId)> = Vec::with_capacity(members.len());
        for (n, id) in members {
            if list.iter().any(|(m, _)| m == n) {
                return Err(Error::DuplicateName(format!("{name}.{n}")));
            }
            list.push((n.to_string(), *id));
        }
        let bundle = Bundle {
            name: name.to_string(),
            members: list,
            arc: None,
        };
        self.register_bundle(&bundle);
        Ok(bundle)
    }

    fn register_bundle(&mut self, bundle: &Bundle) {
        let mut entry = format!("bundle {}", bundle.name);
        for (n, id) in &bundle.members {
            write!(entry, " {n}=n{}", id.0).unwrap();
        }
        self.record(entry);
        self.bundles.push(bundle.clone());
    }

    /// Re-expresses every member at `target`; the elaborator supplies each
    /// member's individual staging depth.
    pub fn align_bundle(&mut self, bundle: &Bundle, target: VirtualStage) -> Result<Bundle, Error> {
        for (n, id) in &bundle.members {
            let stage = self.node(*id).stage;
            if stage > target {
                return Err(Error::StageOrderViolation {
                    what: format!("{}.{n}", bundle.name),
                    producer: stage,
                    consumer: target,
                });
            }
        }
        let saved = self.stage;
        self.set_stage(target);
        let members = bundle
            .members
            .iter()
            .map(|(n, id)| {
                let aligned = if self.node(*id).stage == target {
                    *id
                } else {
                    self.copy(*id)
                };
                (n.clone(), aligned)
            })
            .collect();
        self.set_stage(saved);
        let aligned = Bundle {
            name: format!("{}@{}", bundle.name, target),
            members,
            arc: None,
        };
        self.register_bundle(&aligned);
        Ok(aligned)
    }

    /// Feeds `bundle` back through `delay` cycles; the returned bundle lives
    /// at `target`.
    pub fn recirculate_bundle(
        &mut self,
        bundle: &Bundle,
        delay: u32,
        target: VirtualStage,
    ) -> Result<Bundle, Error> {
        if delay == 0 {
            return Err(Error::CombinationalLoop(format!(
                "zero-delay recirculation of {}",
                bundle.name
            )));
        }
        let arc = self.push_arc_unchecked(&format!("{}_recirc", bundle.name), delay, target);
        let mut members = Vec::with_capacity(bundle.members.len());
        for (n, id) in &bundle.members {
            let out = self.extend_recirculation(arc, n, *id)?;
            members.push((n.clone(), out));
        }
        let out = Bundle {
            name: format!("{}>>{delay}", bundle.name),
            members,
            arc: Some(arc),
        };
        self.register_bundle(&out);
        Ok(out)
    }

    /// Creates an empty feedback arc without any legality checks; used by
    /// [`DesignGraph::recirculate_bundle`] and by tests that need an
    /// ill-formed design for the linter.
    pub fn push_arc_unchecked(&mut self, name: &str, delay: u32, target: VirtualStage) -> ArcId {
        let id = ArcId(self.arcs.len() as u32);
        self.record(format!("arc {name} >>{delay} @{target}"));
        self.arcs.push(FeedbackArc {
            name: name.to_string(),
            delay,
            target,
            members: Vec::new(),
            section: self.section,
        });
        id
    }

    /// Pulls one more signal through an existing arc. Pulling the same
    /// source twice yields the same output.
    pub fn extend_recirculation(
        &mut self,
        arc: ArcId,
        name: &str,
        source: NodeId,
    ) -> Result<NodeId, Error> {
        let a = &self.arcs[arc.0 as usize];
        if let Some(m) = a.members.iter().find(|m| m.source == Some(source)) {
            return Ok(m.output);
        }
        if a.members.iter().any(|m| m.name == name) {
            return Err(Error::DuplicateName(format!("{}.{name}", a.name)));
        }
        let (target, member) = (a.target, a.members.len());
        let saved = self.stage;
        self.set_stage(target);
        let width = self.w(source);
        let out = self.push(Op::Recirculated { arc, member }, vec![], width);
        self.set_stage(saved);
        self.record(format!("recirculate {name} n{} -> n{}", source.0, out.0));
        self.arcs[arc.0 as usize].members.push(ArcMember {
            name: name.to_string(),
            source: Some(source),
            output: out,
        });
        Ok(out)
    }

    /// Declares a recirculated signal before its source exists, so logic
    /// at the arc's target can be built first. The source must be supplied
    /// with [`DesignGraph::bind_recirculation`] before elaboration.
    pub fn declare_recirculation(
        &mut self,
        arc: ArcId,
        name: &str,
        width: u8,
    ) -> Result<NodeId, Error> {
        let a = &self.arcs[arc.0 as usize];
        if a.members.iter().any(|m| m.name == name) {
            return Err(Error::DuplicateName(format!("{}.{name}", a.name)));
        }
        let (target, member) = (a.target, a.members.len());
        let saved = self.stage;
        self.set_stage(target);
        let out = self.push(Op::Recirculated { arc, member }, vec![], width);
        self.set_stage(saved);
        self.record(format!("declare {name} -> n{}", out.0));
        self.arcs[arc.0 as usize].members.push(ArcMember {
            name: name.to_string(),
            source: None,
            output: out,
        });
        Ok(out)
    }

    pub fn bind_recirculation(&mut self, arc: ArcId, name: &str, source: NodeId) -> Result<(), Error> {
        let width = self.w(source);
        let a = &mut self.arcs[arc.0 as usize];
        let arc_name = a.name.clone();
        let m = a
            .members
            .iter_mut()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::UnknownSignal(format!("{arc_name}.{name}")))?;
        if m.source.is_some() {
            return Err(Error::DuplicateName(format!("{arc_name}.{name}")));
        }
        let out = m.output;
        m.source = Some(source);
        if self.nodes[out.index()].width != width {
            return Err(Error::WidthMismatch(format!(
                "{arc_name}.{name}: declared {} bits, source has {width}",
                self.nodes[out.index()].width
            )));
        }
        self.record(format!("bind {name} n{} -> n{}", source.0, out.0));
        Ok(())
    }

    // ---- structural checks -----------------------------------------------

    /// Operand-width problems of a single node, if any.
    pub fn width_problem(&self, id: NodeId) -> Option<String> {
        let n = self.node(id);
        let w = |i: usize| self.node(n.operands[i]).width;
        let label = || format!("n{} ({})", id.0, n.op.mnemonic());
        if n.width == 0 || n.width > 64 {
            return Some(format!("{} has width {}", label(), n.width));
        }
        let problem = match &n.op {
            Op::Add | Op::Sub | Op::And | Op::Or | Op::Xor => {
                (w(0) != w(1) || w(0) != n.width).then(|| format!("operands {} and {}", w(0), w(1)))
            }
            Op::Eq | Op::LtS | Op::LtU => {
                (w(0) != w(1)).then(|| format!("operands {} and {}", w(0), w(1)))
            }
            Op::Shl | Op::Shr | Op::Sra | Op::Copy | Op::SameCycle => {
                (w(0) != n.width).then(|| format!("operand {} result {}", w(0), n.width))
            }
            Op::Mux => {
                if w(0) != 1 {
                    Some(format!("selector width {}", w(0)))
                } else if w(1) != w(2) || w(1) != n.width {
                    Some(format!("arms {} and {}", w(1), w(2)))
                } else {
                    None
                }
            }
            Op::Slice { lo } => (*lo as u32 + n.width as u32 > w(0) as u32)
                .then(|| format!("slice past operand width {}", w(0))),
            Op::Concat => (w(0) as u32 + w(1) as u32 != n.width as u32)
                .then(|| format!("parts {} + {} != {}", w(0), w(1), n.width)),
            Op::SignExt | Op::ZeroExt => {
                (w(0) > n.width).then(|| format!("extends {} down to {}", w(0), n.width))
            }
            Op::RegfileWrite(_) => (w(0) != 1).then(|| format!("enable width {}", w(0))),
            Op::MemWrite(_) => {
                if w(0) != 1 || w(2) != 32 || w(3) != 4 {
                    Some(format!("enable/data/mask widths {}/{}/{}", w(0), w(2), w(3)))
                } else {
                    None
                }
            }
            Op::MemRead(_) => (n.width != 32).then(|| "memory reads are 32 bits".to_string()),
            Op::Recirculated { arc, member } => {
                let src = self.arcs[arc.0 as usize].members.get(*member).and_then(|m| m.source);
                match src {
                    Some(s) if self.node(s).width != n.width => {
                        Some(format!("source width {}", self.node(s).width))
                    }
                    None => Some("dangling arc member".to_string()),
                    _ => None,
                }
            }
            Op::Const(_) | Op::Input(_) | Op::RegRead(_) | Op::RegfileRead(_) => None,
        };
        problem.map(|p| format!("{}: {p}", label()))
    }
}

pub(crate) fn mask(width: u8) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}
