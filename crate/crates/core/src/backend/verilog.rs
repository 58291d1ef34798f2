// SPDX-License-Identifier: Apache-2.0

//! Flat Verilog-2001 emission. Core and harness text are kept in separate
//! marked sections so their sizes can be measured independently.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use super::BackendError;
use crate::stagegraph::{ArrayKind, ElaboratedDesign, NodeId, Op, Section, Source};

pub const SECTION_BEGIN: &str = "// ==== section: ";
pub const SECTION_END: &str = "// ==== end section ====";

const KEYWORDS: &[&str] = &[
    "always", "and", "assign", "begin", "buf", "case", "default", "else", "end", "endcase",
    "endmodule", "for", "function", "if", "initial", "inout", "input", "integer", "module",
    "nand", "negedge", "nor", "not", "or", "output", "parameter", "posedge", "reg", "signed",
    "wire", "xor", "xnor", "clk", "rst",
];

fn sanitize(raw: &str) -> String {
    let mut s: String = raw
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit()) {
        s.insert(0, '_');
    }
    s
}

#[derive(Default)]
struct Names {
    used: BTreeSet<String>,
}

impl Names {
    fn claim(&mut self, preferred: String, fallback: impl Fn() -> String) -> String {
        let mut name = preferred;
        if KEYWORDS.contains(&name.as_str()) || self.used.contains(&name) {
            name = fallback();
            let mut k = 1;
            while self.used.contains(&name) {
                name = format!("{}_{k}", fallback());
                k += 1;
            }
        }
        self.used.insert(name.clone());
        name
    }
}

fn range(width: u8) -> String {
    format!("[{}:0]", width.max(1) - 1)
}

/// Staging register names, one entry per register: `(section, width, name)`.
fn staging_names(design: &ElaboratedDesign, wires: &[String], names: &mut Names) -> Vec<Vec<String>> {
    let mut per_producer: BTreeMap<NodeId, u32> = BTreeMap::new();
    for c in design.staging_chains() {
        *per_producer.entry(c.producer).or_default() += 1;
    }
    design
        .staging_chains()
        .iter()
        .map(|c| {
            let base = &wires[c.producer.index()];
            let from = design.physical_stage(c.producer);
            let shared = per_producer[&c.producer] > 1;
            (1..=c.depth)
                .map(|k| {
                    let pref = if shared {
                        format!("{base}_a{}_to{}", from + k, c.consumer_physical)
                    } else {
                        format!("{base}_a{}", from + k)
                    };
                    let fb = pref.clone();
                    names.claim(pref, move || format!("{fb}_s"))
                })
                .collect()
        })
        .collect()
}

/// Names of every staging register the emitter declares.
pub fn staging_register_names(design: &ElaboratedDesign) -> Vec<String> {
    let (names, _) = plan(design);
    names.chains.into_iter().flatten().collect()
}

struct Plan {
    wires: Vec<String>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    regs: Vec<String>,
    arrays: Vec<String>,
    chains: Vec<Vec<String>>,
    /// Per arc, per member: delay-line register names.
    arcs: Vec<Vec<Vec<String>>>,
}

fn plan(design: &ElaboratedDesign) -> (Plan, Names) {
    let graph = design.graph();
    let mut names = Names::default();
    let inputs: Vec<String> = graph
        .inputs()
        .iter()
        .map(|(n, _)| {
            let s = sanitize(n);
            names.claim(s.clone(), || format!("{s}_in"))
        })
        .collect();
    let outputs: Vec<String> = graph
        .outputs()
        .iter()
        .map(|(n, _)| {
            let s = sanitize(n);
            names.claim(s.clone(), || format!("{s}_out"))
        })
        .collect();
    let arrays: Vec<String> = graph
        .arrays()
        .iter()
        .map(|a| {
            let s = sanitize(&a.name);
            names.claim(s.clone(), || format!("{s}_array"))
        })
        .collect();
    let regs: Vec<String> = graph
        .registers()
        .iter()
        .map(|r| {
            let s = format!("{}_q", sanitize(&r.name));
            names.claim(s.clone(), || format!("{s}_r"))
        })
        .collect();
    let wires: Vec<String> = graph
        .node_ids()
        .map(|id| {
            let i = id.index();
            match &graph.node(id).name {
                Some(n) => {
                    let s = sanitize(n);
                    names.claim(s, || format!("{}_n{i}", sanitize(n)))
                }
                None => names.claim(format!("n{i}"), || format!("n{i}_w")),
            }
        })
        .collect();
    let chains = staging_names(design, &wires, &mut names);
    let arcs = graph
        .arcs()
        .iter()
        .map(|a| {
            a.members
                .iter()
                .map(|m| {
                    (1..=a.delay)
                        .map(|k| {
                            let s = format!("{}_{}_d{k}", sanitize(&a.name), sanitize(&m.name));
                            names.claim(s.clone(), || format!("{s}_r"))
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    (
        Plan {
            wires,
            inputs,
            outputs,
            regs,
            arrays,
            chains,
            arcs,
        },
        names,
    )
}

/// The emitted module as text. Deterministic in the design.
pub fn emit_verilog(design: &ElaboratedDesign) -> Result<String, BackendError> {
    let graph = design.graph();
    let (p, _) = plan(design);
    let operand = |id: NodeId, i: usize| -> String {
        match design.sources(id)[i] {
            Source::Node(src) => p.wires[src.index()].clone(),
            Source::Staged { chain, depth } => p.chains[chain][depth as usize - 1].clone(),
        }
    };
    let arc_tap = |arc: usize, member: usize| -> String {
        let line = &p.arcs[arc][member];
        match line.last() {
            Some(r) => r.clone(),
            None => {
                let src = graph.arcs()[arc].members[member].source.expect("bound");
                p.wires[src.index()].clone()
            }
        }
    };

    let mut out = String::new();
    let module = sanitize(graph.name());
    let map = design.map();
    writeln!(out, "// {module}: stage map {map}").unwrap();
    let mut ports = vec!["clk".to_string(), "rst".to_string()];
    ports.extend(p.inputs.iter().cloned());
    ports.extend(p.outputs.iter().cloned());
    writeln!(out, "module {module} (").unwrap();
    writeln!(out, "  {}", ports.join(",\n  ")).unwrap();
    writeln!(out, ");").unwrap();
    writeln!(out, "  input clk;").unwrap();
    writeln!(out, "  input rst;").unwrap();

    for section in [Section::Core, Section::Harness] {
        writeln!(out).unwrap();
        writeln!(out, "{SECTION_BEGIN}{} ====", section.name()).unwrap();
        let mut body = String::new();
        let mut resets: Vec<String> = Vec::new();
        let mut updates: Vec<(String, String)> = Vec::new();
        let mut writes = String::new();

        for (i, (_, id)) in graph.inputs().iter().enumerate() {
            if graph.node(*id).section == section {
                writeln!(body, "  input {} {};", range(graph.node(*id).width), p.inputs[i]).unwrap();
            }
        }
        for (i, (_, id)) in graph.outputs().iter().enumerate() {
            if graph.node(*id).section == section {
                writeln!(body, "  output {} {};", range(graph.node(*id).width), p.outputs[i]).unwrap();
            }
        }
        for (i, a) in graph.arrays().iter().enumerate() {
            if a.section != section {
                continue;
            }
            match a.kind {
                ArrayKind::RegFile { entries, width } => writeln!(
                    body,
                    "  reg {} {} [0:{}];",
                    range(width),
                    p.arrays[i],
                    entries.max(1) - 1
                ),
                ArrayKind::Memory { bytes } => {
                    writeln!(body, "  reg [7:0] {} [0:{}];", p.arrays[i], bytes.max(1) - 1)
                }
            }
            .unwrap();
        }
        for (i, r) in graph.registers().iter().enumerate() {
            if r.section != section {
                continue;
            }
            writeln!(body, "  reg {} {};", range(r.width), p.regs[i]).unwrap();
            resets.push(p.regs[i].clone());
            if let Some(next) = r.next {
                updates.push((p.regs[i].clone(), p.wires[next.index()].clone()));
            }
        }
        let chains: Vec<usize> = (0..design.staging_chains().len())
            .filter(|&c| design.staging_chains()[c].section == section)
            .collect();
        if !chains.is_empty() {
            writeln!(body, "  // staging").unwrap();
        }
        for c in chains {
            let chain = &design.staging_chains()[c];
            let mut prev = p.wires[chain.producer.index()].clone();
            for r in &p.chains[c] {
                writeln!(body, "  reg {} {};", range(chain.width), r).unwrap();
                resets.push(r.clone());
                updates.push((r.clone(), prev));
                prev = r.clone();
            }
        }
        // A delay line lives with its source, so members pulled through a
        // core arc by the harness stay in the harness section.
        for (ai, arc) in graph.arcs().iter().enumerate() {
            for (mi, m) in arc.members.iter().enumerate() {
                let src = m.source.expect("bound");
                if graph.node(src).section != section {
                    continue;
                }
                let w = graph.node(src).width;
                let mut prev = p.wires[src.index()].clone();
                for r in &p.arcs[ai][mi] {
                    writeln!(body, "  reg {} {};", range(w), r).unwrap();
                    resets.push(r.clone());
                    updates.push((r.clone(), prev));
                    prev = r.clone();
                }
            }
        }

        for &id in design.evaluation_order() {
            let node = graph.node(id);
            if node.section != section {
                continue;
            }
            let w = node.width;
            let a = || operand(id, 0);
            let b = || operand(id, 1);
            let c = || operand(id, 2);
            let ow = |i: usize| graph.node(node.operands[i]).width;
            let expr = match &node.op {
                Op::Const(v) => {
                    let m = if w >= 64 { u64::MAX } else { (1u64 << w) - 1 };
                    format!("{w}'h{:x}", v & m)
                }
                Op::Input(i) => p.inputs[*i].clone(),
                Op::Add => format!("{} + {}", a(), b()),
                Op::Sub => format!("{} - {}", a(), b()),
                Op::And => format!("{} & {}", a(), b()),
                Op::Or => format!("{} | {}", a(), b()),
                Op::Xor => format!("{} ^ {}", a(), b()),
                Op::Shl => format!("{} << {}", a(), b()),
                Op::Shr => format!("{} >> {}", a(), b()),
                Op::Sra => format!("$unsigned($signed({}) >>> {})", a(), b()),
                Op::Eq => format!("{} == {}", a(), b()),
                Op::LtS => format!("$signed({}) < $signed({})", a(), b()),
                Op::LtU => format!("{} < {}", a(), b()),
                Op::Mux => format!("{}[0] ? {} : {}", a(), b(), c()),
                Op::Slice { lo } => {
                    if w == 1 {
                        format!("{}[{lo}]", a())
                    } else {
                        format!("{}[{}:{lo}]", a(), *lo as u32 + w as u32 - 1)
                    }
                }
                Op::Concat => format!("{{{}, {}}}", a(), b()),
                Op::SignExt => {
                    let from = ow(0);
                    if w > from {
                        format!("{{{{{}{{{}[{}]}}}}, {}}}", w - from, a(), from - 1, a())
                    } else {
                        a()
                    }
                }
                Op::ZeroExt => {
                    let from = ow(0);
                    if w > from {
                        format!("{{{}'h0, {}}}", w - from, a())
                    } else {
                        a()
                    }
                }
                Op::Copy | Op::SameCycle => a(),
                Op::RegRead(r) => p.regs[r.0 as usize].clone(),
                Op::Recirculated { arc, member } => arc_tap(arc.0 as usize, *member),
                Op::RegfileRead(arr) => {
                    let entries = match graph.array(*arr).kind {
                        ArrayKind::RegFile { entries, .. } => entries,
                        ArrayKind::Memory { .. } => {
                            return Err(BackendError::UnsupportedNode(format!("n{}", id.index())))
                        }
                    };
                    format!(
                        "({} < {entries}) ? {}[{}] : {w}'h0",
                        a(),
                        p.arrays[arr.0 as usize],
                        a()
                    )
                }
                Op::MemRead(arr) => {
                    let bytes = match graph.array(*arr).kind {
                        ArrayKind::Memory { bytes } => bytes,
                        ArrayKind::RegFile { .. } => {
                            return Err(BackendError::UnsupportedNode(format!("n{}", id.index())))
                        }
                    };
                    let m = &p.arrays[arr.0 as usize];
                    let base = format!("({} & ~{}'h3)", a(), ow(0));
                    let lanes: Vec<String> =
                        (0..4).rev().map(|k| format!("{m}[{base} + {k}]")).collect();
                    format!(
                        "(({} >> 2) < {}) ? {{{}}} : {w}'h0",
                        a(),
                        bytes / 4,
                        lanes.join(", ")
                    )
                }
                Op::RegfileWrite(arr) => {
                    let entries = match graph.array(*arr).kind {
                        ArrayKind::RegFile { entries, .. } => entries,
                        ArrayKind::Memory { .. } => {
                            return Err(BackendError::UnsupportedNode(format!("n{}", id.index())))
                        }
                    };
                    writeln!(
                        writes,
                        "    if ({}[0] && {} < {entries}) {}[{}] <= {};",
                        a(),
                        b(),
                        p.arrays[arr.0 as usize],
                        b(),
                        c()
                    )
                    .unwrap();
                    continue;
                }
                Op::MemWrite(arr) => {
                    let bytes = match graph.array(*arr).kind {
                        ArrayKind::Memory { bytes } => bytes,
                        ArrayKind::RegFile { .. } => {
                            return Err(BackendError::UnsupportedNode(format!("n{}", id.index())))
                        }
                    };
                    if ow(2) < 32 || ow(3) < 4 {
                        return Err(BackendError::UnsupportedNode(format!(
                            "n{} (mem_write narrower than a word)",
                            id.index()
                        )));
                    }
                    let m = &p.arrays[arr.0 as usize];
                    let base = format!("({} & ~{}'h3)", b(), ow(1));
                    writeln!(writes, "    if ({}[0] && ({} >> 2) < {}) begin", a(), b(), bytes / 4)
                        .unwrap();
                    for k in 0..4 {
                        writeln!(
                            writes,
                            "      if ({}[{k}]) {m}[{base} + {k}] <= {}[{}:{}];",
                            operand(id, 3),
                            c(),
                            8 * k + 7,
                            8 * k
                        )
                        .unwrap();
                    }
                    writeln!(writes, "    end").unwrap();
                    continue;
                }
            };
            writeln!(body, "  wire {} {} = {};", range(w), p.wires[id.index()], expr).unwrap();
        }
        for (i, (_, id)) in graph.outputs().iter().enumerate() {
            if graph.node(*id).section == section {
                writeln!(body, "  assign {} = {};", p.outputs[i], p.wires[id.index()]).unwrap();
            }
        }
        if !updates.is_empty() || !writes.is_empty() {
            writeln!(body, "  always @(posedge clk) begin").unwrap();
            if !resets.is_empty() {
                writeln!(body, "    if (rst) begin").unwrap();
                for r in &resets {
                    writeln!(body, "      {r} <= 0;").unwrap();
                }
                writeln!(body, "    end else begin").unwrap();
                for (r, next) in &updates {
                    writeln!(body, "      {r} <= {next};").unwrap();
                }
                writeln!(body, "    end").unwrap();
            }
            body.push_str(&writes);
            writeln!(body, "  end").unwrap();
        }
        out.push_str(&body);
        writeln!(out, "{SECTION_END}").unwrap();
    }
    writeln!(out, "endmodule").unwrap();
    Ok(out)
}

/// Text of one section, markers excluded; empty if the section is absent.
pub fn section_text(verilog: &str, section: Section) -> &str {
    let begin = format!("{SECTION_BEGIN}{} ====\n", section.name());
    let Some(start) = verilog.find(&begin).map(|i| i + begin.len()) else {
        return "";
    };
    let len = verilog[start..].find(SECTION_END).unwrap_or(verilog.len() - start);
    &verilog[start..start + len]
}

/// Character count with comments removed and whitespace runs collapsed to
/// one space.
pub fn stripped_len(text: &str) -> usize {
    let mut cleaned = String::with_capacity(text.len());
    let mut rest = text;
    while !rest.is_empty() {
        if let Some(r) = rest.strip_prefix("//") {
            rest = r.find('\n').map_or("", |i| &r[i..]);
        } else if let Some(r) = rest.strip_prefix("/*") {
            rest = r.find("*/").map_or("", |i| &r[i + 2..]);
            cleaned.push(' ');
        } else {
            let c = rest.chars().next().unwrap();
            cleaned.push(c);
            rest = &rest[c.len_utf8()..];
        }
    }
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ").len()
}
