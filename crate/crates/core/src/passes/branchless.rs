//! Passes that change which branches and memory accesses a program
//! performs: if conversion and its inverse, branch coalescing, and dead
//! store elimination.

use std::sync::Arc;

use crate::cfg::{CfgNode, CfgProgram};
use crate::expr::{Expr, OpKind};
use crate::structured::{AtomicCmd, Cmd, Node, Stmt};

use super::liveness::liveness_analyze;

fn single_assign(c: &Cmd) -> Option<(&crate::expr::Var, &Expr)> {
    match c.nodes() {
        [n] => match &n.stmt {
            Stmt::Atomic(AtomicCmd::Assign(x, e)) => Some((x, e)),
            _ => None,
        },
        _ => None,
    }
}

/// `if (e) { x := a; } else { x := b; }` becomes `x := mux(e, a, b);`.
pub fn if_convert(c: &Cmd) -> Cmd {
    c.rewrite(&mut |n| {
        if let Stmt::If(e, t, f) = &n.stmt {
            if let (Some((x, a)), Some((y, b))) = (single_assign(t), single_assign(f)) {
                if x == y {
                    let mux = Expr::mux(e.clone(), a.clone(), b.clone());
                    return Cmd::node(n.with_stmt(Stmt::Atomic(AtomicCmd::Assign(x.clone(), mux))));
                }
            }
        }
        Cmd::node(n)
    })
}

/// `x := mux(e, a, b);` becomes `if (e) { x := a; } else { x := b; }`.
/// Only a mux at the top of an assignment is converted.
pub fn inverse_if_convert(c: &Cmd) -> Cmd {
    c.rewrite(&mut |n| {
        if let Stmt::Atomic(AtomicCmd::Assign(x, Expr::Op(OpKind::Mux, args))) = &n.stmt {
            if let [e, a, b] = args.as_slice() {
                return Cmd::if_(
                    e.clone(),
                    Cmd::assign(x.as_str(), a.clone()),
                    Cmd::assign(x.as_str(), b.clone()),
                );
            }
        }
        Cmd::node(n)
    })
}

/// `if (e) { c } else { c }` becomes `c`.
pub fn branch_coalesce(c: &Cmd) -> Cmd {
    c.rewrite(&mut |n| match &n.stmt {
        Stmt::If(_, t, f) if t == f => t.clone(),
        _ => Cmd::node(n),
    })
}

/// A branch whose two successors coincide becomes a `nop`.
pub fn cfg_empty_branch_coalesce(g: &CfgProgram) -> CfgProgram {
    let nodes = g
        .nodes()
        .iter()
        .map(|n| match n {
            CfgNode::Branch {
                label,
                on_true,
                on_false,
                ..
            } if on_true == on_false => CfgNode::Instr {
                label: label.clone(),
                cmd: None,
                next: on_true.clone(),
            },
            other => other.clone(),
        })
        .collect();
    CfgProgram::new(g.entry().clone(), g.exit().clone(), nodes)
        .expect("successors are unchanged, so the graph stays valid")
}

/// Removes `store[e] := y` directly after `y := load[e]` when `y` does
/// not occur in `e`: the store writes back the value already there. When
/// `y` is dead after the store, the load goes too, so the access
/// disappears entirely.
pub fn dead_store_eliminate(c: &Cmd) -> Cmd {
    self_stores(&liveness_analyze(c)).strip_annotations()
}

fn self_stores(c: &Cmd) -> Cmd {
    let nodes = c.nodes();
    let mut out: Vec<Arc<Node>> = Vec::with_capacity(nodes.len());
    for (i, n) in nodes.iter().enumerate() {
        if i > 0 {
            if let (Stmt::Atomic(AtomicCmd::Load(y, e1)), Stmt::Atomic(AtomicCmd::Store(e2, y2))) =
                (&nodes[i - 1].stmt, &n.stmt)
            {
                if y == y2 && e1 == e2 && !e1.mentions(y) {
                    let y_dead = n.ann.liveness.as_ref().is_some_and(|l| !l.live_out.contains(y));
                    if y_dead {
                        out.pop();
                    }
                    continue;
                }
            }
        }
        let mut node = (**n).clone();
        node.stmt = match &n.stmt {
            Stmt::If(e, t, f) => Stmt::If(e.clone(), self_stores(t), self_stores(f)),
            Stmt::While(e, b) => Stmt::While(e.clone(), self_stores(b)),
            s => s.clone(),
        };
        out.push(Arc::new(node));
    }
    Cmd::from_nodes(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_cfg, parse_structured};

    fn p(s: &str) -> Cmd {
        parse_structured(s).unwrap()
    }

    #[test]
    fn if_conversion() {
        assert_eq!(
            if_convert(&p("if (sec) { coef := 1665; } else { coef := 0; }")),
            p("coef := mux(sec, 1665, 0);")
        );
        let with_store = p("if (sec) { store[0] := x; } else { x := 0; }");
        assert_eq!(if_convert(&with_store), with_store);
        let different_targets = p("if (sec) { x := 1; } else { y := 0; }");
        assert_eq!(if_convert(&different_targets), different_targets);
        assert_eq!(
            if_convert(&p("while (i < 2) { if (s) { x := 1; } else { x := 2; } i := i + 1; }")),
            p("while (i < 2) { x := mux(s, 1, 2); i := i + 1; }")
        );
    }

    #[test]
    fn inverse_if_conversion() {
        assert_eq!(
            inverse_if_convert(&p("x := mux(d == 1, 3, 5);")),
            p("if (d == 1) { x := 3; } else { x := 5; }")
        );
        let plain = p("x := y + 1;");
        assert_eq!(inverse_if_convert(&plain), plain);
        let src = p("if (a < b) { m := a; } else { m := b; } store[m] := m;");
        assert_eq!(inverse_if_convert(&if_convert(&src)), src);
    }

    #[test]
    fn coalescing() {
        assert_eq!(branch_coalesce(&p("if (sec) { x := 1; } else { x := 1; }")), p("x := 1;"));
        assert!(branch_coalesce(&p("if (sec) { } else { }")).is_nil());
        let differ = p("if (sec) { x := 1; } else { x := 2; }");
        assert_eq!(branch_coalesce(&differ), differ);
        let g = parse_cfg("cfg\nentry a\nexit r\na: br s == 0 ? t : t\nt: x := 1 -> r\n").unwrap();
        let out = cfg_empty_branch_coalesce(&g);
        assert_eq!(out.nodes()[0], CfgNode::nop("a", "t"));
    }

    #[test]
    fn self_store_removed() {
        assert_eq!(dead_store_eliminate(&p("y := load[sec]; store[sec] := y;")), p("y := load[sec];"));
        let other = p("y := load[a]; store[b] := y;");
        assert_eq!(dead_store_eliminate(&other), other);
        let self_ref = p("y := load[y]; store[y] := y;");
        assert_eq!(dead_store_eliminate(&self_ref), self_ref);
        assert_eq!(
            dead_store_eliminate(&p("y := load[a + s]; store[a + s] := y; y := 0;")),
            p("y := 0;")
        );
    }
}
