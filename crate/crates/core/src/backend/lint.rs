// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::Serialize;

use crate::stagegraph::{ElaboratedDesign, NodeId, Op, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum LintKind {
    /// A consumer sits at an earlier physical stage than its producer.
    StageOrder,
    /// A staging tap's depth disagrees with the stage distance.
    StagingDepth,
    Width,
    ZeroDelayFeedback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LintViolation {
    pub kind: LintKind,
    pub message: String,
}

impl fmt::Display for LintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

fn label(design: &ElaboratedDesign, id: NodeId) -> String {
    let n = design.graph().node(id);
    match &n.name {
        Some(name) => format!("n{} `{name}` ({})", id.index(), n.op.mnemonic()),
        None => format!("n{} ({})", id.index(), n.op.mnemonic()),
    }
}

/// Structural self-check run before emission.
pub fn lint(design: &ElaboratedDesign) -> Result<(), Vec<LintViolation>> {
    let graph = design.graph();
    let mut out = Vec::new();
    let mut push = |kind, message| out.push(LintViolation { kind, message });

    for id in graph.node_ids() {
        let node = graph.node(id);
        if let Some(p) = graph.width_problem(id) {
            push(LintKind::Width, p);
        }
        let here = design.physical_stage(id);
        for (&operand, src) in node.operands.iter().zip(design.sources(id)) {
            let producer = graph.node(operand);
            if matches!(node.op, Op::SameCycle) || matches!(producer.op, Op::Const(_)) {
                continue;
            }
            let there = design.physical_stage(operand);
            if there > here || producer.stage > node.stage {
                push(
                    LintKind::StageOrder,
                    format!(
                        "{} at stage {here} reads {} available at stage {there}",
                        label(design, id),
                        label(design, operand)
                    ),
                );
                continue;
            }
            let tapped = match *src {
                Source::Node(_) => 0,
                Source::Staged { depth, .. } => depth,
            };
            if tapped != here - there {
                push(
                    LintKind::StagingDepth,
                    format!(
                        "{} reads {} through {tapped} staging registers, distance is {}",
                        label(design, id),
                        label(design, operand),
                        here - there
                    ),
                );
            }
        }
    }
    for arc in graph.arcs() {
        if arc.delay == 0 {
            push(
                LintKind::ZeroDelayFeedback,
                format!("feedback arc `{}` has zero delay", arc.name),
            );
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stagegraph::{elaborate, DesignGraph, StageMap, VirtualStage};

    #[test]
    fn elaborated_valid_graph_is_clean() {
        let mut g = DesignGraph::new("ok");
        g.set_stage(VirtualStage::Decode);
        let a = g.input("a", 8).unwrap();
        g.set_stage(VirtualStage::RegWr);
        let b = g.add(a, a);
        g.output("b", b).unwrap();
        for m in StageMap::presets() {
            assert_eq!(lint(&elaborate(&g, &m).unwrap()), Ok(()));
        }
    }

    #[test]
    fn zero_delay_arc_is_flagged() {
        let mut g = DesignGraph::new("bad");
        let a = g.input("a", 4).unwrap();
        let arc = g.push_arc_unchecked("loop", 0, VirtualStage::NextPc);
        let r = g.extend_recirculation(arc, "a", a).unwrap();
        g.output("r", r).unwrap();
        let d = elaborate(&g, &StageMap::five_stage()).unwrap();
        let v = lint(&d).unwrap_err();
        assert!(v.iter().any(|v| v.kind == LintKind::ZeroDelayFeedback));
    }

    #[test]
    fn width_mismatched_mux_is_flagged() {
        let mut g = DesignGraph::new("bad");
        let s = g.input("s", 1).unwrap();
        let a = g.input("a", 8).unwrap();
        let b = g.input("b", 4).unwrap();
        let m = g.mux(s, a, b);
        g.output("m", m).unwrap();
        let d = elaborate(&g, &StageMap::single_stage()).unwrap();
        let v = lint(&d).unwrap_err();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, LintKind::Width);
    }
}
