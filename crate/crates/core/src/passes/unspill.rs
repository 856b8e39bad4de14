//! Unspilling: stack slots at constant offsets from a stack pointer become
//! fresh registers.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::expr::{Expr, OpKind, Value, Var};
use crate::structured::{AtomicCmd, Cmd, Node, Stmt};

use super::PassError;

/// Prefix of registers introduced by unspilling; user programs cannot
/// mention it.
pub const SPILL_PREFIX: &str = "__spill_";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpillSlot {
    pub offset: i64,
    pub var: Var,
}

/// Offset of a spill-form address `sp + n`.
pub fn slot_offset(addr: &Expr, sp: &Var) -> Option<i64> {
    match addr {
        Expr::Op(OpKind::Add, args) if args.len() == 2 => match (&args[0], &args[1]) {
            (Expr::Var(v), Expr::Const(Value::Int(n))) if v == sp => Some(*n),
            _ => None,
        },
        _ => None,
    }
}

fn check_node(n: &Node, sp: &Var, slots: &mut Vec<SpillSlot>) -> Result<(), PassError> {
    let Stmt::Atomic(a) = &n.stmt else {
        return Ok(());
    };
    if a.def() == Some(sp) {
        return Err(PassError::NotSpillForm(format!("`{a}` assigns the stack pointer")));
    }
    if let AtomicCmd::Load(_, e) | AtomicCmd::Store(e, _) = a {
        let Some(off) = slot_offset(e, sp) else {
            return Err(PassError::NotSpillForm(format!(
                "address of `{a}` is not `{sp} + <constant>`"
            )));
        };
        if !slots.iter().any(|s| s.offset == off) {
            let var = Var::new(&format!("{SPILL_PREFIX}{}", slots.len()));
            slots.push(SpillSlot { offset: off, var });
        }
    }
    Ok(())
}

/// Slot table of a program in spill form, in order of first occurrence.
pub fn spill_slots(c: &Cmd, sp: &Var) -> Result<Vec<SpillSlot>, PassError> {
    let mut slots = Vec::new();
    let mut err = None;
    c.visit(&mut |n| {
        if err.is_none() {
            if let Err(e) = check_node(n, sp, &mut slots) {
                err = Some(e);
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(slots),
    }
}

/// Rewrites slot accesses with a given slot table. Accesses outside the
/// table are left alone.
pub fn unspill_with(c: &Cmd, sp: &Var, slots: &[SpillSlot]) -> Cmd {
    let table: BTreeMap<i64, &Var> = slots.iter().map(|s| (s.offset, &s.var)).collect();
    c.rewrite(&mut |n| {
        let replaced = match &n.stmt {
            Stmt::Atomic(AtomicCmd::Store(e, x)) => slot_offset(e, sp)
                .and_then(|o| table.get(&o))
                .map(|y| AtomicCmd::Assign((*y).clone(), Expr::Var(x.clone()))),
            Stmt::Atomic(AtomicCmd::Load(x, e)) => slot_offset(e, sp)
                .and_then(|o| table.get(&o))
                .map(|y| AtomicCmd::Assign(x.clone(), Expr::Var((*y).clone()))),
            _ => None,
        };
        match replaced {
            Some(a) => Cmd::node(n.with_stmt(Stmt::Atomic(a))),
            None => Cmd::node(n),
        }
    })
}

/// Replaces every spill and reload through `sp` by register moves.
pub fn unspill(c: &Cmd, sp: &Var) -> Result<(Cmd, Vec<SpillSlot>), PassError> {
    let slots = spill_slots(c, sp)?;
    Ok((unspill_with(c, sp, &slots), slots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_structured, parse_structured_with, ParseOptions};

    fn sp() -> Var {
        Var::new("sp")
    }

    #[test]
    fn spill_pair_becomes_moves() {
        let c = parse_structured("store[sp + 4] := x; x := x + 1; x := load[sp + 4];").unwrap();
        let (out, slots) = unspill(&c, &sp()).unwrap();
        let expected = parse_structured_with(
            "__spill_0 := x; x := x + 1; x := __spill_0;",
            &ParseOptions::internal(),
        )
        .unwrap();
        assert_eq!(out, expected);
        assert_eq!(slots, vec![SpillSlot { offset: 4, var: "__spill_0".into() }]);
    }

    #[test]
    fn no_memory_ops_no_slots() {
        let c = parse_structured("x := 1; if (x < 2) { y := x; }").unwrap();
        assert_eq!(unspill(&c, &sp()).unwrap(), (c, vec![]));
    }

    #[test]
    fn distinct_offsets_get_distinct_registers() {
        let c = parse_structured("store[sp + 8] := a; store[sp + -8] := b; a := load[sp + 8];").unwrap();
        let (_, slots) = unspill(&c, &sp()).unwrap();
        assert_eq!(slots.len(), 2);
        assert_ne!(slots[0].var, slots[1].var);
        assert_eq!(slots[1].offset, -8);
    }

    #[test]
    fn rejects_programs_not_in_spill_form() {
        for bad in ["x := load[a];", "sp := 3; store[sp + 1] := x;", "store[sp + x] := y;"] {
            let c = parse_structured(bad).unwrap();
            assert!(matches!(unspill(&c, &sp()), Err(PassError::NotSpillForm(_))), "{bad}");
        }
    }
}
