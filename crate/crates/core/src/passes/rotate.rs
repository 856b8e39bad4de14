//! Loop rotation: the node where a loop is entered is duplicated so that
//! the loop is entered one node further along.

use std::collections::{BTreeSet, HashMap};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;

use crate::cfg::{CfgNode, CfgProgram, Label};

use super::PassError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoopSpec {
    /// The instruction node jumping into the loop.
    pub before: Label,
    pub entry: Label,
    /// The strongly connected component.
    pub labels: BTreeSet<Label>,
}

/// A performed rotation: `copy` duplicates `entry`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rotation {
    pub entry: Label,
    pub copy: Label,
}

fn invalid(msg: String) -> PassError {
    PassError::InvalidLoop(msg)
}

/// Checks the loop conditions against `g`.
pub fn validate_loop(g: &CfgProgram, spec: &LoopSpec) -> Result<(), PassError> {
    let sg = g.successor_graph();
    let entering: Vec<&(Label, Label)> = sg
        .edges
        .iter()
        .filter(|(a, b)| !spec.labels.contains(a) && spec.labels.contains(b))
        .collect();
    if entering.len() != 1 || entering[0] != &(spec.before.clone(), spec.entry.clone()) {
        let list: Vec<String> = entering.iter().map(|(a, b)| format!("{a}->{b}")).collect();
        return Err(invalid(format!(
            "loop at `{}` must be entered only by `{}->{}`, found [{}]",
            spec.entry,
            spec.before,
            spec.entry,
            list.join(", ")
        )));
    }
    match g.node(&spec.before) {
        Some(CfgNode::Instr { next, .. }) if next == &spec.entry => Ok(()),
        _ => Err(invalid(format!(
            "`{}` must be an instruction node whose only successor is `{}`",
            spec.before, spec.entry
        ))),
    }
}

/// Every loop (non-trivial strongly connected component) of `g` that has
/// a single entry edge from an instruction node.
pub fn detect_loops(g: &CfgProgram) -> Vec<LoopSpec> {
    let sg = g.successor_graph();
    let mut graph: DiGraph<Label, ()> = DiGraph::new();
    let mut idx: HashMap<Label, NodeIndex> = HashMap::new();
    for l in &sg.labels {
        idx.insert(l.clone(), graph.add_node(l.clone()));
    }
    for (a, b) in &sg.edges {
        graph.add_edge(idx[a], idx[b], ());
    }
    let mut out = Vec::new();
    for comp in tarjan_scc(&graph) {
        let labels: BTreeSet<Label> = comp.iter().map(|&i| graph[i].clone()).collect();
        let cyclic = labels.len() > 1 || labels.iter().any(|l| sg.edges.contains(&(l.clone(), l.clone())));
        if !cyclic {
            continue;
        }
        let entering: Vec<&(Label, Label)> = sg
            .edges
            .iter()
            .filter(|(a, b)| !labels.contains(a) && labels.contains(b))
            .collect();
        if let [(before, entry)] = entering.as_slice() {
            let spec = LoopSpec {
                before: before.clone(),
                entry: entry.clone(),
                labels,
            };
            if validate_loop(g, &spec).is_ok() {
                out.push(spec);
            }
        }
    }
    out.sort_by(|a, b| a.entry.cmp(&b.entry));
    out
}

/// Duplicates the loop entry under a fresh label and redirects the
/// predecessor to the copy.
pub fn loop_rotate(g: &CfgProgram, spec: &LoopSpec) -> Result<(CfgProgram, Rotation), PassError> {
    validate_loop(g, spec)?;
    let copy = g.fresh_label(spec.entry.as_str());
    let entry_node = g
        .node(&spec.entry)
        .ok_or_else(|| invalid(format!("no node labelled `{}`", spec.entry)))?;
    let mut nodes: Vec<CfgNode> = g
        .nodes()
        .iter()
        .map(|n| match n {
            CfgNode::Instr { label, cmd, .. } if label == &spec.before => CfgNode::Instr {
                label: label.clone(),
                cmd: cmd.clone(),
                next: copy.clone(),
            },
            other => other.clone(),
        })
        .collect();
    nodes.push(entry_node.relabel(copy.clone()));
    let out = CfgProgram::new(g.entry().clone(), g.exit().clone(), nodes)
        .map_err(|e| invalid(e.to_string()))?;
    Ok((
        out,
        Rotation {
            entry: spec.entry.clone(),
            copy,
        },
    ))
}

/// Rotates every detected loop once.
pub fn rotate_all(g: &CfgProgram) -> Result<(CfgProgram, Vec<Rotation>), PassError> {
    let mut cur = g.clone();
    let mut done = Vec::new();
    for spec in detect_loops(g) {
        let (next, r) = loop_rotate(&cur, &spec)?;
        cur = next;
        done.push(r);
    }
    Ok((cur, done))
}
