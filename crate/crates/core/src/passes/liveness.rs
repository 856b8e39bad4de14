//! Backward register liveness over the structured language.
//!
//! Memory is never considered dead. Loop bodies are iterated to a fixpoint.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::expr::Var;
use crate::structured::{AtomicCmd, Cmd, Liveness, Stmt};

/// Annotates every node with the registers live before and after it,
/// assuming every register the program mentions is live at exit.
pub fn liveness_analyze(c: &Cmd) -> Cmd {
    liveness_analyze_with_exit(c, &c.vars())
}

/// As [`liveness_analyze`], with an explicit set of registers live at exit.
pub fn liveness_analyze_with_exit(c: &Cmd, live_at_exit: &BTreeSet<Var>) -> Cmd {
    analyze_seq(c, live_at_exit.clone()).0
}

/// Registers live on entry to `c` given the live set after it.
pub fn live_in(c: &Cmd, live_out: &BTreeSet<Var>) -> BTreeSet<Var> {
    analyze_seq(c, live_out.clone()).1
}

fn transfer_atomic(a: &AtomicCmd, out: &BTreeSet<Var>) -> BTreeSet<Var> {
    let mut live = out.clone();
    if let Some(x) = a.def() {
        live.remove(x);
    }
    live.extend(a.uses());
    live
}

fn analyze_seq(c: &Cmd, out: BTreeSet<Var>) -> (Cmd, BTreeSet<Var>) {
    let mut live = out;
    let mut rebuilt = Vec::with_capacity(c.len());
    for n in c.nodes().iter().rev() {
        let mut node = (**n).clone();
        let live_out = live.clone();
        let live_in = match &n.stmt {
            Stmt::Atomic(a) => transfer_atomic(a, &live_out),
            Stmt::If(e, t, f) => {
                let (t2, in_t) = analyze_seq(t, live_out.clone());
                let (f2, in_f) = analyze_seq(f, live_out.clone());
                node.stmt = Stmt::If(e.clone(), t2, f2);
                let mut l: BTreeSet<Var> = in_t.union(&in_f).cloned().collect();
                e.collect_vars(&mut l);
                l
            }
            Stmt::While(e, body) => {
                let mut head = live_out.clone();
                e.collect_vars(&mut head);
                loop {
                    let (_, in_b) = analyze_seq(body, head.clone());
                    let mut next = live_out.clone();
                    e.collect_vars(&mut next);
                    next.extend(in_b);
                    if next == head {
                        break;
                    }
                    head = next;
                }
                let (b2, _) = analyze_seq(body, head.clone());
                node.stmt = Stmt::While(e.clone(), b2);
                head
            }
        };
        node.ann.liveness = Some(Arc::new(Liveness {
            live_in: live_in.clone(),
            live_out,
        }));
        rebuilt.push(Arc::new(node));
        live = live_in;
    }
    rebuilt.reverse();
    (Cmd::from_nodes(rebuilt), live)
}
