//! Structural analysis: recovers `while` and `if` statements from a CFG.
//!
//! Every branch node must head either a natural loop whose only exit is
//! its false edge, or a diamond whose arms meet at the branch's immediate
//! post-dominator. Regions must be well-nested.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use petgraph::algo::dominators::simple_fast;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;

use crate::cfg::{CfgNode, CfgProgram, Label};
use crate::structured::{Cmd, Stmt};

use super::PassError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    /// `body` contains the header.
    While { header: Label, body: BTreeSet<Label> },
    If {
        head: Label,
        then_labels: BTreeSet<Label>,
        else_labels: BTreeSet<Label>,
        join: Label,
    },
}

impl Region {
    /// All labels the region covers.
    pub fn labels(&self) -> BTreeSet<Label> {
        match self {
            Region::While { body, .. } => body.clone(),
            Region::If {
                head,
                then_labels,
                else_labels,
                ..
            } => {
                let mut out: BTreeSet<Label> = then_labels.union(else_labels).cloned().collect();
                out.insert(head.clone());
                out
            }
        }
    }
}

/// One region per branch node.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RegionAnnotation {
    pub regions: BTreeMap<Label, Region>,
}

fn irreducible(msg: String) -> PassError {
    PassError::Irreducible(msg)
}

struct Analysis<'g> {
    g: &'g CfgProgram,
    edges: BTreeSet<(Label, Label)>,
    ipdom: HashMap<Label, Label>,
}

impl<'g> Analysis<'g> {
    fn new(g: &'g CfgProgram) -> Self {
        let sg = g.successor_graph();
        let mut graph: DiGraph<Label, ()> = DiGraph::new();
        let mut idx: HashMap<Label, NodeIndex> = HashMap::new();
        let mut all = sg.labels.clone();
        all.insert(g.exit().clone());
        for l in &all {
            idx.insert(l.clone(), graph.add_node(l.clone()));
        }
        // post-dominators are dominators of the reversed graph
        for (a, b) in &sg.edges {
            graph.add_edge(idx[b], idx[a], ());
        }
        let doms = simple_fast(&graph, idx[g.exit()]);
        let mut ipdom = HashMap::new();
        for l in &all {
            if let Some(d) = doms.immediate_dominator(idx[l]) {
                ipdom.insert(l.clone(), graph[d].clone());
            }
        }
        Analysis {
            g,
            edges: sg.edges,
            ipdom,
        }
    }

    /// Node labels reachable from `start` without passing through `stop`.
    fn reach(&self, start: &Label, stop: &Label) -> BTreeSet<Label> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(l) = queue.pop_front() {
            if &l == stop || !self.g.contains(&l) || !seen.insert(l.clone()) {
                continue;
            }
            for s in self.g.node(&l).into_iter().flat_map(CfgNode::successors) {
                queue.push_back(s.clone());
            }
        }
        seen
    }

    fn edges_leaving<'a>(&'a self, set: &'a BTreeSet<Label>) -> impl Iterator<Item = &'a (Label, Label)> + 'a {
        self.edges
            .iter()
            .filter(move |(a, b)| set.contains(a) && !set.contains(b))
    }

    fn edges_entering<'a>(&'a self, set: &'a BTreeSet<Label>) -> impl Iterator<Item = &'a (Label, Label)> + 'a {
        self.edges
            .iter()
            .filter(move |(a, b)| !set.contains(a) && set.contains(b))
    }

    fn while_region(&self, l: &Label, t: &Label, f: &Label) -> Option<Region> {
        let mut body = self.reach(t, l);
        body.insert(l.clone());
        let has_back_edge = t == l || self.edges.iter().any(|(a, b)| b == l && a != l && body.contains(a));
        if !has_back_edge || body.contains(f) {
            return None;
        }
        let exits_ok = self.edges_leaving(&body).all(|(a, b)| a == l && b == f);
        let entries_ok = self.edges_entering(&body).all(|(_, b)| b == l);
        (exits_ok && entries_ok).then(|| Region::While {
            header: l.clone(),
            body,
        })
    }

    fn if_region(&self, l: &Label, t: &Label, f: &Label) -> Option<Region> {
        let join = self.ipdom.get(l)?;
        let then_labels = self.reach(t, join);
        let else_labels = self.reach(f, join);
        if then_labels.contains(l) || else_labels.contains(l) || !then_labels.is_disjoint(&else_labels) {
            return None;
        }
        let arm_ok = |arm: &BTreeSet<Label>, start: &Label| {
            self.edges_entering(arm).all(|(a, b)| a == l && b == start)
                && self.edges_leaving(arm).all(|(_, b)| b == join)
        };
        (arm_ok(&then_labels, t) && arm_ok(&else_labels, f)).then(|| Region::If {
            head: l.clone(),
            then_labels,
            else_labels,
            join: join.clone(),
        })
    }
}

/// Finds a region for every branch node and checks that they nest.
pub fn annotate_regions(g: &CfgProgram) -> Result<RegionAnnotation, PassError> {
    let a = Analysis::new(g);
    let mut regions = BTreeMap::new();
    for n in g.nodes() {
        if let CfgNode::Branch {
            label,
            on_true,
            on_false,
            ..
        } = n
        {
            let r = a
                .while_region(label, on_true, on_false)
                .or_else(|| a.if_region(label, on_true, on_false))
                .ok_or_else(|| {
                    irreducible(format!(
                        "irreducible control flow: branch `{label}` heads neither a loop nor a diamond"
                    ))
                })?;
            regions.insert(label.clone(), r);
        }
    }
    let sets: Vec<(&Label, BTreeSet<Label>)> = regions.iter().map(|(l, r)| (l, r.labels())).collect();
    for (i, (l1, s1)) in sets.iter().enumerate() {
        for (l2, s2) in &sets[i + 1..] {
            if !(s1.is_subset(s2) || s2.is_subset(s1) || s1.is_disjoint(s2)) {
                return Err(irreducible(format!(
                    "irreducible control flow: regions of `{l1}` and `{l2}` overlap without nesting"
                )));
            }
        }
    }
    Ok(RegionAnnotation { regions })
}

/// Structured code for the CFG run from `start` until `stop` is reached.
pub fn hofl(g: &CfgProgram, regions: &RegionAnnotation, start: &Label, stop: &Label) -> Result<Cmd, PassError> {
    let mut out = Cmd::nil();
    let mut seen = BTreeSet::new();
    let mut l = start.clone();
    while &l != stop {
        if &l == g.exit() {
            return Err(irreducible(format!(
                "irreducible control flow: `{start}` leaves its region before `{stop}`"
            )));
        }
        if !seen.insert(l.clone()) {
            return Err(irreducible(format!(
                "irreducible control flow: cycle through `{l}` is not a recognised loop"
            )));
        }
        let node = g
            .node(&l)
            .ok_or_else(|| irreducible(format!("no node labelled `{l}`")))?;
        l = match node {
            CfgNode::Instr { cmd, next, label } => {
                let a = cmd.as_ref().ok_or_else(|| {
                    PassError::Unsupported(format!("`{label}` is a nop, which has no structured counterpart"))
                })?;
                out = out.then(Cmd::atomic(a.clone()));
                next.clone()
            }
            CfgNode::Branch {
                label,
                cond,
                on_true,
                on_false,
            } => match regions.regions.get(label) {
                Some(Region::While { .. }) => {
                    let body = hofl(g, regions, on_true, label)?;
                    out = out.then(Cmd::stmt(Stmt::While(cond.clone(), body)));
                    on_false.clone()
                }
                Some(Region::If { join, .. }) => {
                    let t = hofl(g, regions, on_true, join)?;
                    let f = hofl(g, regions, on_false, join)?;
                    out = out.then(Cmd::stmt(Stmt::If(cond.clone(), t, f)));
                    join.clone()
                }
                None => {
                    return Err(irreducible(format!(
                        "irreducible control flow: branch `{label}` has no region"
                    )))
                }
            },
        };
    }
    Ok(out)
}

/// Translates a CFG with a valid region annotation to a structured program.
pub fn structure_cfg(g: &CfgProgram, regions: &RegionAnnotation) -> Result<Cmd, PassError> {
    hofl(g, regions, g.entry(), g.exit())
}

/// Region analysis followed by translation.
pub fn structure(g: &CfgProgram) -> Result<Cmd, PassError> {
    structure_cfg(g, &annotate_regions(g)?)
}

/// Structured code corresponding to each CFG label reachable from the
/// entry; a CFG state at label `l` corresponds to the structured state
/// running `map[l]`.
pub fn structured_points(g: &CfgProgram, regions: &RegionAnnotation) -> Result<HashMap<Label, Cmd>, PassError> {
    let mut out = HashMap::new();
    out.insert(g.exit().clone(), Cmd::nil());
    let mut queue = VecDeque::from([g.entry().clone()]);
    while let Some(l) = queue.pop_front() {
        if out.contains_key(&l) {
            continue;
        }
        out.insert(l.clone(), hofl(g, regions, &l, g.exit())?);
        for s in g.node(&l).into_iter().flat_map(CfgNode::successors) {
            queue.push_back(s.clone());
        }
    }
    Ok(out)
}
