//! Expression substitution driven by per-node annotations, and the two
//! annotation strategies that feed it (constant folding and untiling).

use crate::expr::Expr;
use crate::store::RegisterMap;
use crate::structured::{AtomicCmd, Cmd, Node, Stmt, Substitution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubstStrategy {
    /// Replace closed, non-constant subexpressions by their value.
    ConstFold,
    /// Inline `x := e0` into an immediately following use of `x`.
    Untile,
}

/// Same node with its expression replaced.
pub(crate) fn replace_expr(n: &Node, e: Expr) -> Node {
    let stmt = match &n.stmt {
        Stmt::Atomic(a) => Stmt::Atomic(a.map_expr(|_| e)),
        Stmt::If(_, t, f) => Stmt::If(e, t.clone(), f.clone()),
        Stmt::While(_, b) => Stmt::While(e, b.clone()),
    };
    n.with_stmt(stmt)
}

/// Applies the substitutions in order.
pub fn apply_substitutions(e: &Expr, subst: &[Substitution]) -> Expr {
    subst
        .iter()
        .fold(e.clone(), |acc, s| acc.substitute(&s.from, &s.to))
}

fn maximal_closed(e: &Expr, out: &mut Vec<Substitution>) {
    if e.is_closed() {
        if matches!(e, Expr::Const(_)) {
            return;
        }
        if let Ok(v) = e.eval(&RegisterMap::new()) {
            let s = Substitution {
                from: e.clone(),
                to: Expr::Const(v),
            };
            if !out.contains(&s) {
                out.push(s);
            }
            return;
        }
    }
    if let Expr::Op(_, args) = e {
        for a in args {
            maximal_closed(a, out);
        }
    }
}

fn annotate_const_fold(c: &Cmd) -> Cmd {
    c.rewrite(&mut |mut n| {
        let mut found = Vec::new();
        maximal_closed(n.expr(), &mut found);
        n.ann.subst.extend(found);
        Cmd::node(n)
    })
}

fn annotate_untile(c: &Cmd) -> Cmd {
    let rebuilt = c.rewrite(&mut |n| Cmd::node(n));
    untile_seq(&rebuilt)
}

fn untile_seq(c: &Cmd) -> Cmd {
    let nodes = c.nodes();
    let mut out = Cmd::nil();
    for (i, n) in nodes.iter().enumerate() {
        let mut node = (**n).clone();
        node.stmt = match &n.stmt {
            Stmt::If(e, t, f) => Stmt::If(e.clone(), untile_seq(t), untile_seq(f)),
            Stmt::While(e, b) => Stmt::While(e.clone(), untile_seq(b)),
            s => s.clone(),
        };
        if i > 0 {
            if let Stmt::Atomic(AtomicCmd::Assign(x, e0)) = &nodes[i - 1].stmt {
                let eligible = !matches!(n.stmt, Stmt::While(..))
                    && n.expr().mentions(x)
                    && !e0.mentions(x);
                if eligible {
                    node.ann.subst.push(Substitution {
                        from: Expr::Var(x.clone()),
                        to: e0.clone(),
                    });
                }
            }
        }
        out = out.then(Cmd::node(node));
    }
    out
}

/// Attaches substitution annotations. Existing annotations are kept.
pub fn annotate_substitutions(c: &Cmd, strategy: SubstStrategy) -> Cmd {
    match strategy {
        SubstStrategy::ConstFold => annotate_const_fold(c),
        SubstStrategy::Untile => annotate_untile(c),
    }
}

/// Rewrites every annotated expression and drops the substitution
/// annotations. Structure and node count are unchanged.
pub fn expr_substitute(c: &Cmd) -> Cmd {
    c.rewrite(&mut |n| {
        let e = apply_substitutions(n.expr(), &n.ann.subst);
        let mut out = replace_expr(&n, e);
        out.ann.subst.clear();
        Cmd::node(out)
    })
}

/// Whether every substitution annotated on `n` holds under `regs`.
pub fn substitutions_hold(n: &Node, regs: &RegisterMap) -> bool {
    n.ann
        .subst
        .iter()
        .all(|s| match (s.from.eval(regs), s.to.eval(regs)) {
            (Ok(a), Ok(b)) => a == b,
            // An ill-typed source expression fails in both programs alike.
            (Err(_), _) => true,
            (Ok(_), Err(_)) => false,
        })
}

pub fn const_fold(c: &Cmd) -> Cmd {
    expr_substitute(&annotate_substitutions(c, SubstStrategy::ConstFold))
}

pub fn untile(c: &Cmd) -> Cmd {
    expr_substitute(&annotate_substitutions(c, SubstStrategy::Untile))
}
