//! The structured while-language and its small-step leakage semantics.
//!
//! Commands are kept in a flat normal form: a command is the sequence of
//! its non-sequence statements. `nil` is the empty sequence, so `nil` is
//! neutral for `;` and `;` is associative by construction, and derived
//! equality is equality of normal forms.

use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::expr::{Expr, Value, Var};
use crate::obs::{Observation, Trace};
use crate::semantics::{RunError, RunOutcome, Semantics, StepError};
use crate::store::{Memory, RegisterMap};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AtomicCmd {
    Assign(Var, Expr),
    /// `x := load[e]`
    Load(Var, Expr),
    /// `store[e] := x`; the stored operand is always a variable.
    Store(Expr, Var),
}

impl AtomicCmd {
    pub fn expr(&self) -> &Expr {
        match self {
            AtomicCmd::Assign(_, e) | AtomicCmd::Load(_, e) | AtomicCmd::Store(e, _) => e,
        }
    }

    pub fn map_expr(&self, f: impl FnOnce(&Expr) -> Expr) -> AtomicCmd {
        match self {
            AtomicCmd::Assign(x, e) => AtomicCmd::Assign(x.clone(), f(e)),
            AtomicCmd::Load(x, e) => AtomicCmd::Load(x.clone(), f(e)),
            AtomicCmd::Store(e, x) => AtomicCmd::Store(f(e), x.clone()),
        }
    }

    /// Register written by the command, if any.
    pub fn def(&self) -> Option<&Var> {
        match self {
            AtomicCmd::Assign(x, _) | AtomicCmd::Load(x, _) => Some(x),
            AtomicCmd::Store(..) => None,
        }
    }

    /// Registers read by the command.
    pub fn uses(&self) -> BTreeSet<Var> {
        let mut out = self.expr().vars();
        if let AtomicCmd::Store(_, x) = self {
            out.insert(x.clone());
        }
        out
    }

    pub fn is_memory_access(&self) -> bool {
        !matches!(self, AtomicCmd::Assign(..))
    }

    /// Executes the command in place and returns its observation.
    pub fn exec(&self, regs: &mut RegisterMap, mem: &mut Memory) -> Result<Observation, StepError> {
        match self {
            AtomicCmd::Assign(x, e) => {
                let v = e.eval(regs)?;
                regs.set(x.clone(), v);
                Ok(Observation::Silent)
            }
            AtomicCmd::Load(x, e) => {
                let a = eval_addr(e, regs)?;
                regs.set(x.clone(), mem.get(a));
                Ok(Observation::Addr(a))
            }
            AtomicCmd::Store(e, x) => {
                let a = eval_addr(e, regs)?;
                mem.set(a, regs.get(x));
                Ok(Observation::Addr(a))
            }
        }
    }
}

pub(crate) fn eval_addr(e: &Expr, regs: &RegisterMap) -> Result<i64, StepError> {
    match e.eval(regs)? {
        Value::Int(a) => Ok(a),
        v => Err(StepError::NotAnAddress(e.to_string(), v.type_name())),
    }
}

pub(crate) fn eval_cond(e: &Expr, regs: &RegisterMap) -> Result<bool, StepError> {
    match e.eval(regs)? {
        Value::Bool(b) => Ok(b),
        v => Err(StepError::NotACondition(e.to_string(), v.type_name())),
    }
}

/// `⟨e_s ▷ e_t⟩`: every occurrence of `from` in the node's expression is
/// to be replaced by `to`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Substitution {
    pub from: Expr,
    pub to: Expr,
}

/// Live registers before and after a node. Every register outside the
/// set is dead there; memory is never dead.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Liveness {
    pub live_in: BTreeSet<Var>,
    pub live_out: BTreeSet<Var>,
}

/// Analysis results attached to a node. Annotations never take part in
/// equality or hashing of commands.
#[derive(Debug, Clone, Default)]
pub struct Annotation {
    pub subst: Vec<Substitution>,
    pub liveness: Option<Arc<Liveness>>,
}

impl Annotation {
    pub fn is_empty(&self) -> bool {
        self.subst.is_empty() && self.liveness.is_none()
    }
}

impl PartialEq for Annotation {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Annotation {}

impl Hash for Annotation {
    fn hash<H: Hasher>(&self, _: &mut H) {}
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Stmt {
    Atomic(AtomicCmd),
    If(Expr, Cmd, Cmd),
    While(Expr, Cmd),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    pub stmt: Stmt,
    pub ann: Annotation,
}

impl Node {
    pub fn new(stmt: Stmt) -> Self {
        Node {
            stmt,
            ann: Annotation::default(),
        }
    }

    /// The single expression the node evaluates when it steps.
    pub fn expr(&self) -> &Expr {
        match &self.stmt {
            Stmt::Atomic(a) => a.expr(),
            Stmt::If(e, ..) | Stmt::While(e, _) => e,
        }
    }

    pub fn with_stmt(&self, stmt: Stmt) -> Node {
        Node {
            stmt,
            ann: self.ann.clone(),
        }
    }
}

/// A command in normal form.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Cmd(Vec<Arc<Node>>);

impl Cmd {
    pub fn nil() -> Self {
        Cmd(Vec::new())
    }

    pub fn is_nil(&self) -> bool {
        self.0.is_empty()
    }

    pub fn from_nodes(nodes: Vec<Arc<Node>>) -> Self {
        Cmd(nodes)
    }

    pub fn node(node: Node) -> Self {
        Cmd(vec![Arc::new(node)])
    }

    pub fn stmt(stmt: Stmt) -> Self {
        Cmd::node(Node::new(stmt))
    }

    pub fn atomic(a: AtomicCmd) -> Self {
        Cmd::stmt(Stmt::Atomic(a))
    }

    pub fn assign(x: &str, e: Expr) -> Self {
        Cmd::atomic(AtomicCmd::Assign(Var::new(x), e))
    }

    pub fn load(x: &str, e: Expr) -> Self {
        Cmd::atomic(AtomicCmd::Load(Var::new(x), e))
    }

    pub fn store(e: Expr, x: &str) -> Self {
        Cmd::atomic(AtomicCmd::Store(e, Var::new(x)))
    }

    pub fn if_(cond: Expr, then: Cmd, els: Cmd) -> Self {
        Cmd::stmt(Stmt::If(cond, then, els))
    }

    pub fn while_(cond: Expr, body: Cmd) -> Self {
        Cmd::stmt(Stmt::While(cond, body))
    }

    /// `self ; other`
    pub fn then(mut self, other: Cmd) -> Self {
        self.0.extend(other.0);
        self
    }

    pub fn seq<I: IntoIterator<Item = Cmd>>(parts: I) -> Self {
        parts.into_iter().fold(Cmd::nil(), Cmd::then)
    }

    pub fn nodes(&self) -> &[Arc<Node>] {
        &self.0
    }

    pub fn head(&self) -> Option<&Arc<Node>> {
        self.0.first()
    }

    /// Everything after the head.
    pub fn tail(&self) -> Cmd {
        Cmd(self.0.iter().skip(1).cloned().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, node: Arc<Node>) {
        self.0.push(node);
    }

    /// Number of statement nodes, counting nested bodies.
    pub fn node_count(&self) -> usize {
        self.0
            .iter()
            .map(|n| match &n.stmt {
                Stmt::Atomic(_) => 1,
                Stmt::If(_, t, f) => 1 + t.node_count() + f.node_count(),
                Stmt::While(_, b) => 1 + b.node_count(),
            })
            .sum()
    }

    /// All registers mentioned anywhere in the command.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.visit(&mut |n| {
            n.expr().collect_vars(&mut out);
            if let Stmt::Atomic(a) = &n.stmt {
                if let Some(x) = a.def() {
                    out.insert(x.clone());
                }
                if let AtomicCmd::Store(_, x) = a {
                    out.insert(x.clone());
                }
            }
        });
        out
    }

    /// Pre-order visit of every node, including nested bodies.
    pub fn visit<F: FnMut(&Node)>(&self, f: &mut F) {
        for n in &self.0 {
            f(n);
            match &n.stmt {
                Stmt::Atomic(_) => {}
                Stmt::If(_, t, e) => {
                    t.visit(f);
                    e.visit(f);
                }
                Stmt::While(_, b) => b.visit(f),
            }
        }
    }

    /// Rebuilds the command bottom-up. `f` receives each node with its
    /// bodies already rewritten and returns its replacement sequence.
    pub fn rewrite<F: FnMut(Node) -> Cmd>(&self, f: &mut F) -> Cmd {
        let mut out = Cmd::nil();
        for n in &self.0 {
            let rebuilt = match &n.stmt {
                Stmt::Atomic(_) => (**n).clone(),
                Stmt::If(e, t, el) => n.with_stmt(Stmt::If(e.clone(), t.rewrite(f), el.rewrite(f))),
                Stmt::While(e, b) => n.with_stmt(Stmt::While(e.clone(), b.rewrite(f))),
            };
            out = out.then(f(rebuilt));
        }
        out
    }

    /// Copy of the command with every annotation removed.
    pub fn strip_annotations(&self) -> Cmd {
        self.rewrite(&mut |mut n| {
            n.ann = Annotation::default();
            Cmd::node(n)
        })
    }
}

impl fmt::Debug for Cmd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cmd({})", crate::syntax::print_inline(self))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StructState {
    pub code: Cmd,
    pub regs: RegisterMap,
    pub mem: Memory,
}

impl StructState {
    pub fn new(code: Cmd, regs: RegisterMap, mem: Memory) -> Self {
        StructState { code, regs, mem }
    }

    /// The program point is the remaining code.
    pub fn point(&self) -> &Cmd {
        &self.code
    }

    pub fn is_final(&self) -> bool {
        self.code.is_nil()
    }

    pub fn step_in_place(&mut self) -> Result<Observation, StepError> {
        let Some(head) = self.code.0.first().cloned() else {
            return Err(StepError::Final);
        };
        let rest = &self.code.0[1..];
        let (obs, code) = match &head.stmt {
            Stmt::Atomic(a) => {
                let o = a.exec(&mut self.regs, &mut self.mem)?;
                (o, rest.to_vec())
            }
            Stmt::If(e, t, f) => {
                let b = eval_cond(e, &self.regs)?;
                let branch = if b { t } else { f };
                let mut code = Vec::with_capacity(branch.0.len() + rest.len());
                code.extend(branch.0.iter().cloned());
                code.extend(rest.iter().cloned());
                (Observation::Branch(b), code)
            }
            Stmt::While(e, body) => {
                let b = eval_cond(e, &self.regs)?;
                if b {
                    let mut code = Vec::with_capacity(body.0.len() + 1 + rest.len());
                    code.extend(body.0.iter().cloned());
                    code.push(head.clone());
                    code.extend(rest.iter().cloned());
                    (Observation::Branch(true), code)
                } else {
                    (Observation::Branch(false), rest.to_vec())
                }
            }
        };
        self.code = Cmd(code);
        Ok(obs)
    }
}

/// One small step. Fails on final states and ill-typed expressions.
pub fn step(s: &StructState) -> Result<(Observation, StructState), StepError> {
    let mut next = s.clone();
    let o = next.step_in_place()?;
    Ok((o, next))
}

/// Steps until final or until `fuel` steps have been taken.
pub fn run(s: &StructState, fuel: usize) -> Result<RunOutcome<StructState>, RunError> {
    crate::semantics::run_with(&StructuredSemantics, s.clone(), fuel)
}

/// Maximal trace of `prog` from the initial state an input determines.
pub fn behavior(
    prog: &Cmd,
    spec: &crate::input::InputSpec,
    input: &crate::input::ConcreteInput,
    fuel: usize,
) -> Result<(Trace, bool), RunError> {
    let (regs, mem) = spec.initial_state(input);
    let out = run(&StructState::new(prog.clone(), regs, mem), fuel)?;
    Ok((out.trace, out.terminated))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StructuredSemantics;

impl StructuredSemantics {
    pub fn initial(&self, prog: &Cmd, regs: RegisterMap, mem: Memory) -> StructState {
        StructState::new(prog.clone(), regs, mem)
    }
}

impl Semantics for StructuredSemantics {
    type State = StructState;
    type Point = Cmd;

    fn is_final(&self, s: &StructState) -> bool {
        s.is_final()
    }

    fn step_mut(&self, s: &mut StructState) -> Result<Observation, StepError> {
        s.step_in_place()
    }

    fn point(&self, s: &StructState) -> Cmd {
        s.code.clone()
    }

    fn regs<'s>(&self, s: &'s StructState) -> &'s RegisterMap {
        &s.regs
    }

    fn mem<'s>(&self, s: &'s StructState) -> &'s Memory {
        &s.mem
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::OpKind;

    fn state(code: Cmd, regs: &[(&str, i64)]) -> StructState {
        let mut r = RegisterMap::new();
        for (k, v) in regs {
            r.set(Var::new(k), Value::Int(*v));
        }
        StructState::new(code, r, Memory::new())
    }

    #[test]
    fn store_step() {
        let s = state(Cmd::store(Expr::int(5), "x"), &[("x", 7)]);
        let (o, s2) = step(&s).unwrap();
        assert_eq!(o, Observation::Addr(5));
        assert!(s2.is_final());
        assert_eq!(s2.mem.get(5), Value::Int(7));
        assert_eq!(s2.regs, s.regs);
    }

    #[test]
    fn cond_step() {
        let s = state(
            Cmd::if_(Expr::bool(true), Cmd::assign("x", Expr::int(1)), Cmd::assign("x", Expr::int(2))),
            &[],
        );
        let (o, s2) = step(&s).unwrap();
        assert_eq!(o, Observation::Branch(true));
        assert_eq!(s2.code, Cmd::assign("x", Expr::int(1)));
    }

    #[test]
    fn while_unfolds() {
        let i = Expr::var("i");
        let body = Cmd::assign("i", Expr::binary(OpKind::Add, i.clone(), Expr::int(1)));
        let w = Cmd::while_(Expr::binary(OpKind::Lt, i, Expr::int(1)), body.clone());
        let (o, s2) = step(&state(w.clone(), &[("i", 0)])).unwrap();
        assert_eq!(o, Observation::Branch(true));
        assert_eq!(s2.code, body.then(w));
    }

    #[test]
    fn stepping_final_state_fails() {
        assert_eq!(step(&state(Cmd::nil(), &[])).unwrap_err(), StepError::Final);
    }

    #[test]
    fn run_examples() {
        let nil = state(Cmd::nil(), &[]);
        let out = run(&nil, 5).unwrap();
        assert!(out.trace.is_empty() && out.terminated && out.state == nil);

        let p = Cmd::assign("x", Expr::int(1)).then(Cmd::store(Expr::int(0), "x"));
        let out = run(&state(p, &[]), 10).unwrap();
        assert_eq!(out.trace, vec![Observation::Silent, Observation::Addr(0)]);
        assert!(out.terminated);

        let spin = Cmd::while_(Expr::bool(true), Cmd::assign("x", Expr::var("x")));
        let out = run(&state(spin, &[]), 4).unwrap();
        assert_eq!(
            out.trace,
            vec![
                Observation::Branch(true),
                Observation::Silent,
                Observation::Branch(true),
                Observation::Silent
            ]
        );
        assert!(!out.terminated);
    }

    #[test]
    fn run_reports_step_index_of_errors() {
        let p = Cmd::assign("x", Expr::int(1)).then(Cmd::if_(Expr::var("x"), Cmd::nil(), Cmd::nil()));
        let err = run(&state(p, &[]), 10).unwrap_err();
        assert_eq!(err.step, 1);
        assert!(matches!(err.error, StepError::NotACondition(..)));
    }

    #[test]
    fn normal_form_laws() {
        let a = Cmd::assign("a", Expr::int(1));
        let b = Cmd::assign("b", Expr::int(2));
        let c = Cmd::assign("c", Expr::int(3));
        assert_eq!(Cmd::nil().then(a.clone()), a);
        assert_eq!(a.clone().then(Cmd::nil()), a);
        assert_eq!(
            a.clone().then(b.clone()).then(c.clone()),
            a.clone().then(b.then(c))
        );
    }

    #[test]
    fn annotations_do_not_affect_equality() {
        let mut n = Node::new(Stmt::Atomic(AtomicCmd::Assign(Var::new("x"), Expr::int(1))));
        n.ann.subst.push(Substitution {
            from: Expr::int(1),
            to: Expr::int(1),
        });
        assert_eq!(Cmd::node(n), Cmd::assign("x", Expr::int(1)));
    }
}
