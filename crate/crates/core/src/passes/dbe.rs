//! Dead branch elimination: conditionals on a literal condition.

use crate::expr::Expr;
use crate::structured::{Cmd, Node, Stmt};

/// The branch a node takes unconditionally, if it is a dead conditional.
pub fn dead_branch(n: &Node) -> Option<&Cmd> {
    match &n.stmt {
        Stmt::If(Expr::Const(crate::expr::Value::Bool(b)), t, f) => Some(if *b { t } else { f }),
        _ => None,
    }
}

/// Replaces every `if` with a literal condition by the branch it takes,
/// recursively. Nothing else changes.
pub fn dead_branch_eliminate(c: &Cmd) -> Cmd {
    c.rewrite(&mut |n| match dead_branch(&n) {
        Some(taken) => taken.clone(),
        None => Cmd::node(n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_structured;

    fn p(s: &str) -> Cmd {
        parse_structured(s).unwrap()
    }

    #[test]
    fn literal_conditions_are_resolved() {
        assert_eq!(
            dead_branch_eliminate(&p("if (true) { x := 1; } else { store[0] := x; }")),
            p("x := 1;")
        );
        assert_eq!(dead_branch_eliminate(&p("if (false) { x := 1; } y := 2;")), p("y := 2;"));
    }

    #[test]
    fn other_conditions_are_kept() {
        let c = p("if (y == 0) { x := 1; } else { x := 2; }");
        assert_eq!(dead_branch_eliminate(&c), c);
    }

    #[test]
    fn nested_inside_loops_and_dead_branches() {
        let c = p("while (i < 2) { if (false) { x := 1; } else { if (true) { y := 1; } } i := i + 1; }");
        assert_eq!(
            dead_branch_eliminate(&c),
            p("while (i < 2) { y := 1; i := i + 1; }")
        );
    }
}
