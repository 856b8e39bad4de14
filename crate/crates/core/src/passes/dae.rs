//! Dead assignment and dead load elimination over liveness annotations.

use crate::structured::{AtomicCmd, Cmd, Node, Stmt};

fn dead_after(n: &Node, x: &crate::expr::Var) -> bool {
    n.ann
        .liveness
        .as_ref()
        .is_some_and(|l| !l.live_out.contains(x))
}

/// An assignment whose target is dead afterwards. Never a load or store.
pub fn is_dead_assignment(n: &Node) -> bool {
    matches!(&n.stmt, Stmt::Atomic(AtomicCmd::Assign(x, _)) if dead_after(n, x))
}

pub fn is_dead_load(n: &Node) -> bool {
    matches!(&n.stmt, Stmt::Atomic(AtomicCmd::Load(x, _)) if dead_after(n, x))
}

/// Removes assignments to registers that are dead afterwards. Nodes
/// without liveness annotations are kept.
pub fn dead_assignment_eliminate(annotated: &Cmd) -> Cmd {
    annotated.rewrite(&mut |n| if is_dead_assignment(&n) { Cmd::nil() } else { Cmd::node(n) })
}

/// Removes loads into registers that are dead afterwards.
pub fn dead_load_eliminate(annotated: &Cmd) -> Cmd {
    annotated.rewrite(&mut |n| if is_dead_load(&n) { Cmd::nil() } else { Cmd::node(n) })
}
