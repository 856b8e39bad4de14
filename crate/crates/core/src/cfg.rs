//! The assembly-like CFG language and its leakage semantics.
//!
//! A program is a set of labelled nodes with a distinguished entry label
//! and a distinguished exit label that names no node. The program point of
//! a state is its label.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;
use crate::obs::{Observation, Trace};
use crate::semantics::{run_with, RunError, RunOutcome, Semantics, StepError};
use crate::store::{Memory, RegisterMap};
use crate::structured::{eval_cond, AtomicCmd};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(Arc<str>);

impl Label {
    pub fn new(s: &str) -> Self {
        Label(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::new(s)
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CfgNode {
    /// `ℓ: a -> ℓ'`; `cmd` is `None` for `nop`.
    Instr {
        label: Label,
        cmd: Option<AtomicCmd>,
        next: Label,
    },
    /// `ℓ: br e ? ℓt : ℓf`
    Branch {
        label: Label,
        cond: Expr,
        on_true: Label,
        on_false: Label,
    },
}

impl CfgNode {
    pub fn instr(label: &str, cmd: AtomicCmd, next: &str) -> Self {
        CfgNode::Instr {
            label: Label::new(label),
            cmd: Some(cmd),
            next: Label::new(next),
        }
    }

    pub fn nop(label: &str, next: &str) -> Self {
        CfgNode::Instr {
            label: Label::new(label),
            cmd: None,
            next: Label::new(next),
        }
    }

    pub fn branch(label: &str, cond: Expr, on_true: &str, on_false: &str) -> Self {
        CfgNode::Branch {
            label: Label::new(label),
            cond,
            on_true: Label::new(on_true),
            on_false: Label::new(on_false),
        }
    }

    pub fn label(&self) -> &Label {
        match self {
            CfgNode::Instr { label, .. } | CfgNode::Branch { label, .. } => label,
        }
    }

    pub fn successors(&self) -> Vec<&Label> {
        match self {
            CfgNode::Instr { next, .. } => vec![next],
            CfgNode::Branch {
                on_true, on_false, ..
            } => vec![on_true, on_false],
        }
    }

    /// Same node under a different label.
    pub fn relabel(&self, new: Label) -> CfgNode {
        let mut out = self.clone();
        match &mut out {
            CfgNode::Instr { label, .. } | CfgNode::Branch { label, .. } => *label = new,
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CfgError {
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("node `{from}` jumps to undefined label `{to}`")]
    DanglingSuccessor { from: String, to: String },
    #[error("entry label `{0}` names no node")]
    MissingEntry(String),
    #[error("exit label `{0}` must not name a node")]
    ExitHasNode(String),
}

/// `SG(G) = (L_G, E_G)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SuccessorGraph {
    pub labels: BTreeSet<Label>,
    pub edges: BTreeSet<(Label, Label)>,
}

impl SuccessorGraph {
    pub fn successors<'a>(&'a self, l: &'a Label) -> impl Iterator<Item = &'a Label> + 'a {
        self.edges.iter().filter(move |(a, _)| a == l).map(|(_, b)| b)
    }
}

#[derive(Clone)]
pub struct CfgProgram {
    entry: Label,
    exit: Label,
    nodes: Vec<CfgNode>,
    index: HashMap<Label, usize>,
}

impl CfgProgram {
    pub fn new(entry: Label, exit: Label, nodes: Vec<CfgNode>) -> Result<Self, CfgError> {
        let mut index = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.label().clone(), i).is_some() {
                return Err(CfgError::DuplicateLabel(n.label().to_string()));
            }
        }
        let g = CfgProgram {
            entry,
            exit,
            nodes,
            index,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn entry(&self) -> &Label {
        &self.entry
    }

    pub fn exit(&self) -> &Label {
        &self.exit
    }

    pub fn nodes(&self) -> &[CfgNode] {
        &self.nodes
    }

    pub fn node(&self, l: &Label) -> Option<&CfgNode> {
        self.index.get(l).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, l: &Label) -> bool {
        self.index.contains_key(l)
    }

    /// Checks the structural invariants and computes the successor graph.
    pub fn validate(&self) -> Result<SuccessorGraph, CfgError> {
        if self.index.contains_key(&self.exit) {
            return Err(CfgError::ExitHasNode(self.exit.to_string()));
        }
        if self.entry != self.exit && !self.index.contains_key(&self.entry) {
            return Err(CfgError::MissingEntry(self.entry.to_string()));
        }
        let mut sg = SuccessorGraph::default();
        for n in &self.nodes {
            sg.labels.insert(n.label().clone());
            for s in n.successors() {
                if s != &self.exit && !self.index.contains_key(s) {
                    return Err(CfgError::DanglingSuccessor {
                        from: n.label().to_string(),
                        to: s.to_string(),
                    });
                }
                sg.labels.insert(s.clone());
                sg.edges.insert((n.label().clone(), s.clone()));
            }
        }
        sg.labels.insert(self.entry.clone());
        Ok(sg)
    }

    pub fn successor_graph(&self) -> SuccessorGraph {
        self.validate().expect("CfgProgram invariants are checked at construction")
    }

    /// A label not yet used, derived from `base`.
    pub fn fresh_label(&self, base: &str) -> Label {
        (1..)
            .map(|k| Label::new(&format!("{base}_{k}")))
            .find(|l| !self.contains(l) && l != &self.exit && l != &self.entry)
            .expect("label space is unbounded")
    }
}

impl PartialEq for CfgProgram {
    fn eq(&self, other: &Self) -> bool {
        if self.entry != other.entry || self.exit != other.exit || self.nodes.len() != other.nodes.len() {
            return false;
        }
        self.nodes
            .iter()
            .all(|n| other.node(n.label()) == Some(n))
    }
}

impl Eq for CfgProgram {}

impl fmt::Debug for CfgProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CfgState {
    pub label: Label,
    pub regs: RegisterMap,
    pub mem: Memory,
}

pub fn step_cfg(g: &CfgProgram, s: &CfgState) -> Result<(Observation, CfgState), StepError> {
    CfgSemantics::new(g).step(s)
}

pub fn run_cfg(g: &CfgProgram, s: &CfgState, fuel: usize) -> Result<RunOutcome<CfgState>, RunError> {
    run_with(&CfgSemantics::new(g), s.clone(), fuel)
}

pub fn behavior_cfg(
    g: &CfgProgram,
    spec: &crate::input::InputSpec,
    input: &crate::input::ConcreteInput,
    fuel: usize,
) -> Result<(Trace, bool), RunError> {
    let (regs, mem) = spec.initial_state(input);
    let sem = CfgSemantics::new(g);
    let out = run_with(&sem, sem.initial(regs, mem), fuel)?;
    Ok((out.trace, out.terminated))
}

#[derive(Debug, Clone, Copy)]
pub struct CfgSemantics<'g> {
    pub graph: &'g CfgProgram,
}

impl<'g> CfgSemantics<'g> {
    pub fn new(graph: &'g CfgProgram) -> Self {
        CfgSemantics { graph }
    }

    pub fn initial(&self, regs: RegisterMap, mem: Memory) -> CfgState {
        CfgState {
            label: self.graph.entry.clone(),
            regs,
            mem,
        }
    }
}

impl Semantics for CfgSemantics<'_> {
    type State = CfgState;
    type Point = Label;

    fn is_final(&self, s: &CfgState) -> bool {
        s.label == self.graph.exit
    }

    fn step_mut(&self, s: &mut CfgState) -> Result<Observation, StepError> {
        if self.is_final(s) {
            return Err(StepError::Final);
        }
        let node = self
            .graph
            .node(&s.label)
            .ok_or_else(|| StepError::UnknownLabel(s.label.to_string()))?;
        match node {
            CfgNode::Instr { cmd, next, .. } => {
                let o = match cmd {
                    Some(a) => a.exec(&mut s.regs, &mut s.mem)?,
                    None => Observation::Silent,
                };
                s.label = next.clone();
                Ok(o)
            }
            CfgNode::Branch {
                cond,
                on_true,
                on_false,
                ..
            } => {
                let b = eval_cond(cond, &s.regs)?;
                s.label = if b { on_true.clone() } else { on_false.clone() };
                Ok(Observation::Branch(b))
            }
        }
    }

    fn point(&self, s: &CfgState) -> Label {
        s.label.clone()
    }

    fn regs<'s>(&self, s: &'s CfgState) -> &'s RegisterMap {
        &s.regs
    }

    fn mem<'s>(&self, s: &'s CfgState) -> &'s Memory {
        &s.mem
    }
}
