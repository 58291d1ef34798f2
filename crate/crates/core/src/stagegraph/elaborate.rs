// SPDX-License-Identifier: Apache-2.0

//! Elaboration: apply a stage map, insert staging registers for every
//! cross-stage read, order the combinational logic and compile it into a
//! flat evaluation tape.

use std::collections::{BTreeMap, VecDeque};

use super::graph::mask;
use super::{ArrayKind, DesignGraph, Error, NodeId, Op, Section, StageMap};

/// Registers carrying one producer's value to one consumer physical stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StagingChain {
    pub producer: NodeId,
    pub consumer_physical: u32,
    pub depth: u32,
    pub width: u8,
    pub section: Section,
}

/// Where an operand's value comes from after elaboration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// Same-cycle combinational read.
    Node(NodeId),
    /// Tap `depth` of a staging chain (`depth` cycles after production).
    Staged { chain: usize, depth: u32 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StagingStats {
    pub registers: u32,
    pub bits: u64,
    pub core_registers: u32,
    pub core_bits: u64,
    pub harness_registers: u32,
    pub harness_bits: u64,
    /// Registers in recirculation delay lines (map-independent).
    pub feedback_registers: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Code {
    Input,
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
    Mux,
    Slice,
    Concat,
    SignExt,
    Copy,
    RfRead,
    MemRead,
    RfWrite,
    MemWrite,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Step {
    pub code: Code,
    pub dst: u32,
    pub args: [u32; 4],
    pub mask: u64,
    /// Slice offset, source width, concat low width, input or array index.
    pub aux: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct Tape {
    pub value_slots: usize,
    pub reg_slots: usize,
    pub consts: Vec<(u32, u64)>,
    pub steps: Vec<Step>,
    pub writes: Vec<Step>,
    /// Per register slot: buffer index latched at end of cycle.
    pub reg_next: Vec<u32>,
    pub reg_masks: Vec<u64>,
    /// First register slot of each state register.
    pub state_slot: Vec<u32>,
    /// First register slot of each staging chain.
    pub chain_slot: Vec<u32>,
    pub input_widths: Vec<u8>,
    pub outputs: Vec<u32>,
}

/// A design graph bound to a stage map, ready to evaluate or emit.
#[derive(Debug, Clone)]
pub struct ElaboratedDesign {
    graph: DesignGraph,
    map: StageMap,
    chains: Vec<StagingChain>,
    sources: Vec<Vec<Source>>,
    order: Vec<NodeId>,
    pub(crate) tape: Tape,
}

pub fn elaborate(graph: &DesignGraph, map: &StageMap) -> Result<ElaboratedDesign, Error> {
    map.validate()?;
    for arc in graph.arcs() {
        if let Some(m) = arc.members.iter().find(|m| m.source.is_none()) {
            return Err(Error::UnboundRecirculation(format!("{}.{}", arc.name, m.name)));
        }
    }
    let phys = |id: NodeId| map.physical_of(graph.node(id).stage);

    let mut chains: Vec<StagingChain> = Vec::new();
    let mut chain_index: BTreeMap<(NodeId, u32), usize> = BTreeMap::new();
    let mut sources: Vec<Vec<Source>> = Vec::with_capacity(graph.nodes().len());

    for id in graph.node_ids() {
        let node = graph.node(id);
        let mut srcs = Vec::with_capacity(node.operands.len());
        for &operand in &node.operands {
            let producer = graph.node(operand);
            if matches!(node.op, Op::SameCycle) || matches!(producer.op, Op::Const(_)) {
                srcs.push(Source::Node(operand));
                continue;
            }
            if producer.stage > node.stage {
                return Err(Error::StageOrderViolation {
                    what: describe(graph, id),
                    producer: producer.stage,
                    consumer: node.stage,
                });
            }
            let depth = map.staging_depth(producer.stage, node.stage)?;
            if depth == 0 {
                srcs.push(Source::Node(operand));
                continue;
            }
            let consumer_physical = phys(id);
            let chain = *chain_index
                .entry((operand, consumer_physical))
                .or_insert_with(|| {
                    chains.push(StagingChain {
                        producer: operand,
                        consumer_physical,
                        depth,
                        width: producer.width,
                        section: node.section,
                    });
                    chains.len() - 1
                });
            // A chain feeding any core logic is core logic.
            if node.section == Section::Core {
                chains[chain].section = Section::Core;
            }
            srcs.push(Source::Staged { chain, depth });
        }
        sources.push(srcs);
    }

    let order = topo_order(graph, &sources)?;
    let tape = compile(graph, &chains, &sources, &order);
    Ok(ElaboratedDesign {
        graph: graph.clone(),
        map: map.clone(),
        chains,
        sources,
        order,
        tape,
    })
}

fn describe(graph: &DesignGraph, id: NodeId) -> String {
    let n = graph.node(id);
    match &n.name {
        Some(name) => format!("${name}"),
        None => format!("n{} ({})", id.index(), n.op.mnemonic()),
    }
}

fn topo_order(graph: &DesignGraph, sources: &[Vec<Source>]) -> Result<Vec<NodeId>, Error> {
    let n = graph.nodes().len();
    let mut indegree = vec![0u32; n];
    let mut users: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, srcs) in sources.iter().enumerate() {
        for s in srcs {
            if let Source::Node(p) = s {
                indegree[i] += 1;
                users[p.index()].push(i as u32);
            }
        }
    }
    let mut ready: VecDeque<u32> = (0..n as u32).filter(|&i| indegree[i as usize] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_front() {
        order.push(NodeId(i));
        for &u in &users[i as usize] {
            indegree[u as usize] -= 1;
            if indegree[u as usize] == 0 {
                ready.push_back(u);
            }
        }
    }
    if order.len() != n {
        let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap();
        return Err(Error::CombinationalLoop(describe(graph, NodeId(stuck as u32))));
    }
    Ok(order)
}

fn compile(
    graph: &DesignGraph,
    chains: &[StagingChain],
    sources: &[Vec<Source>],
    order: &[NodeId],
) -> Tape {
    let value_slots = graph.nodes().len();
    let mut reg_next: Vec<u32> = Vec::new();
    let mut reg_masks: Vec<u64> = Vec::new();
    let mut next_slot = |src: u32, m: u64, reg_next: &mut Vec<u32>| -> u32 {
        let slot = (value_slots + reg_next.len()) as u32;
        reg_next.push(src);
        reg_masks.push(m);
        slot
    };

    let mut chain_slot = Vec::with_capacity(chains.len());
    for c in chains {
        let mut prev = c.producer.0;
        for k in 0..c.depth {
            let slot = next_slot(prev, mask(c.width), &mut reg_next);
            if k == 0 {
                chain_slot.push(slot);
            }
            prev = slot;
        }
    }

    // Recirculation delay lines; remember where each output reads from.
    let mut arc_taps: BTreeMap<(u32, usize), u32> = BTreeMap::new();
    for (ai, arc) in graph.arcs().iter().enumerate() {
        for (mi, m) in arc.members.iter().enumerate() {
            let source = m.source.expect("checked on entry");
            let w = graph.node(source).width;
            let mut prev = source.0;
            for _ in 0..arc.delay {
                prev = next_slot(prev, mask(w), &mut reg_next);
            }
            arc_taps.insert((ai as u32, mi), prev);
        }
    }

    let mut state_slot = Vec::with_capacity(graph.registers().len());
    for r in graph.registers() {
        let slot = (value_slots + reg_next.len()) as u32;
        let src = r.next.map(|n| n.0).unwrap_or(slot);
        next_slot(src, mask(r.width), &mut reg_next);
        state_slot.push(slot);
    }

    let resolve = |s: &Source| -> u32 {
        match *s {
            Source::Node(id) => id.0,
            Source::Staged { chain, depth } => chain_slot[chain] + depth - 1,
        }
    };

    let mut consts = Vec::new();
    let mut steps = Vec::with_capacity(order.len());
    let mut writes = Vec::new();
    for &id in order {
        let node = graph.node(id);
        let mut args = [0u32; 4];
        for (i, s) in sources[id.index()].iter().enumerate() {
            args[i] = resolve(s);
        }
        let operand_width = |i: usize| graph.node(node.operands[i]).width as u32;
        let (code, aux) = match &node.op {
            Op::Const(v) => {
                consts.push((id.0, *v & mask(node.width)));
                continue;
            }
            Op::Input(i) => (Code::Input, *i as u32),
            Op::Add => (Code::Add, 0),
            Op::Sub => (Code::Sub, 0),
            Op::And => (Code::And, 0),
            Op::Or => (Code::Or, 0),
            Op::Xor => (Code::Xor, 0),
            Op::Shl => (Code::Shl, 0),
            Op::Shr => (Code::Shr, 0),
            Op::Sra => (Code::Sra, operand_width(0)),
            Op::Eq => (Code::Eq, 0),
            Op::LtS => (Code::LtS, operand_width(0)),
            Op::LtU => (Code::LtU, 0),
            Op::Mux => (Code::Mux, 0),
            Op::Slice { lo } => (Code::Slice, *lo as u32),
            Op::Concat => (Code::Concat, operand_width(1)),
            Op::SignExt => (Code::SignExt, operand_width(0)),
            Op::ZeroExt | Op::Copy | Op::SameCycle => (Code::Copy, 0),
            Op::RegRead(r) => {
                args[0] = state_slot[r.0 as usize];
                (Code::Copy, 0)
            }
            Op::Recirculated { arc, member } => {
                args[0] = arc_taps[&(arc.0, *member)];
                (Code::Copy, 0)
            }
            Op::RegfileRead(a) => (Code::RfRead, a.0),
            Op::MemRead(a) => (Code::MemRead, a.0),
            Op::RegfileWrite(a) => (Code::RfWrite, a.0),
            Op::MemWrite(a) => (Code::MemWrite, a.0),
        };
        let step = Step {
            code,
            dst: id.0,
            args,
            mask: mask(node.width),
            aux,
        };
        if node.op.is_sink() {
            writes.push(step);
        } else {
            steps.push(step);
        }
    }

    Tape {
        value_slots,
        reg_slots: reg_next.len(),
        consts,
        steps,
        writes,
        reg_next,
        reg_masks,
        state_slot,
        chain_slot,
        input_widths: graph.inputs().iter().map(|(_, id)| graph.node(*id).width).collect(),
        outputs: graph.outputs().iter().map(|(_, id)| id.0).collect(),
    }
}

impl ElaboratedDesign {
    pub fn graph(&self) -> &DesignGraph {
        &self.graph
    }

    pub fn map(&self) -> &StageMap {
        &self.map
    }

    pub fn staging_chains(&self) -> &[StagingChain] {
        &self.chains
    }

    /// Operand sources of `id`, parallel to its operand list.
    pub fn sources(&self, id: NodeId) -> &[Source] {
        &self.sources[id.index()]
    }

    pub fn evaluation_order(&self) -> &[NodeId] {
        &self.order
    }

    pub fn physical_stage(&self, id: NodeId) -> u32 {
        self.map.physical_of(self.graph.node(id).stage)
    }

    pub fn staging_stats(&self) -> StagingStats {
        let mut s = StagingStats::default();
        for c in &self.chains {
            let bits = c.depth as u64 * c.width as u64;
            s.registers += c.depth;
            s.bits += bits;
            match c.section {
                Section::Core => {
                    s.core_registers += c.depth;
                    s.core_bits += bits;
                }
                Section::Harness => {
                    s.harness_registers += c.depth;
                    s.harness_bits += bits;
                }
            }
        }
        s.feedback_registers = self
            .graph
            .arcs()
            .iter()
            .map(|a| a.delay * a.members.len() as u32)
            .sum();
        s
    }

    pub fn output_index(&self, name: &str) -> Option<usize> {
        self.graph.outputs().iter().position(|(n, _)| n == name)
    }

    pub(crate) fn array_sizes(&self) -> Vec<ArrayKind> {
        self.graph.arrays().iter().map(|a| a.kind).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stagegraph::VirtualStage;

    fn chain_graph() -> DesignGraph {
        let mut g = DesignGraph::new("t");
        g.set_stage(VirtualStage::Decode);
        let a = g.input("a", 8).unwrap();
        g.set_stage(VirtualStage::Execute);
        let b = g.copy(a);
        g.set_stage(VirtualStage::RegWr);
        let c = g.add(a, b);
        g.output("c", c).unwrap();
        g
    }

    #[test]
    fn flat_map_inserts_nothing() {
        let d = elaborate(&chain_graph(), &StageMap::single_stage()).unwrap();
        assert_eq!(d.staging_stats().registers, 0);
    }

    #[test]
    fn deeper_maps_insert_per_read_depth() {
        let g = chain_graph();
        let d = elaborate(&g, &StageMap::seven_stage()).unwrap();
        // a: DECODE(2)->EXECUTE(4) = 2, a: DECODE->REG_WR(6) = 4, b: EXECUTE->REG_WR = 2
        assert_eq!(d.staging_stats().registers, 8);
        let d5 = elaborate(&g, &StageMap::five_stage()).unwrap();
        // DECODE=1, EXECUTE=2, REG_WR=4: 1 + 3 + 2
        assert_eq!(d5.staging_stats().registers, 6);
    }

    #[test]
    fn backwards_read_is_rejected() {
        let mut g = DesignGraph::new("t");
        g.set_stage(VirtualStage::Result);
        let a = g.constant(1, 4);
        let b = g.copy(a);
        g.set_stage(VirtualStage::Decode);
        g.copy(b);
        assert!(matches!(
            elaborate(&g, &StageMap::seven_stage()),
            Err(Error::StageOrderViolation { .. })
        ));
    }

    #[test]
    fn order_puts_producers_first() {
        let g = chain_graph();
        let d = elaborate(&g, &StageMap::single_stage()).unwrap();
        let pos = |id: NodeId| d.evaluation_order().iter().position(|&x| x == id).unwrap();
        for id in g.node_ids() {
            for s in d.sources(id) {
                if let Source::Node(p) = s {
                    assert!(pos(*p) < pos(id));
                }
            }
        }
    }

    #[test]
    fn invalid_map_is_rejected() {
        let map = StageMap::new("bad", [0, 2, 1, 3, 4, 5, 6]);
        assert!(matches!(
            elaborate(&chain_graph(), &map),
            Err(Error::NonMonotone { .. })
        ));
    }
}
