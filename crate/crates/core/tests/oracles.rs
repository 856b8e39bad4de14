//! Independent oracles for the analyses behind the elimination passes.

use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;

use ctlab::ct::{run_all, DEFAULT_FUEL};
use ctlab::gen::{generate_programs, Features, MAX_NODES};
use ctlab::passes::dae::{is_dead_assignment, is_dead_load};
use ctlab::passes::dbe::dead_branch;
use ctlab::passes::{
    dead_assignment_eliminate, dead_branch_eliminate, dead_load_eliminate, dead_store_eliminate, liveness_analyze,
};
use ctlab::structured::{Node, StructState};
use ctlab::{AtomicCmd, Cmd, Expr, InputSpec, Observation, Program, Stmt, Var};

fn one(seed: u64, features: Features) -> (Cmd, InputSpec) {
    let g = generate_programs(seed, MAX_NODES, features).next().unwrap();
    (g.program, g.spec)
}

/// Straight-line liveness by scanning forward for the next read or write.
fn scan_live_out(nodes: &[&AtomicCmd], i: usize, vars: &BTreeSet<Var>) -> BTreeSet<Var> {
    vars.iter()
        .filter(|v| {
            for a in &nodes[i + 1..] {
                if a.uses().contains(*v) {
                    return true;
                }
                if a.def() == Some(*v) {
                    return false;
                }
            }
            // Everything is observable at exit.
            true
        })
        .cloned()
        .collect()
}

/// Pre-order list of the nodes of `c`.
fn preorder(c: &Cmd) -> Vec<Arc<Node>> {
    let mut out = Vec::new();
    for n in c.nodes() {
        out.push(n.clone());
        match &n.stmt {
            Stmt::Atomic(_) => {}
            Stmt::If(_, t, f) => {
                out.extend(preorder(t));
                out.extend(preorder(f));
            }
            Stmt::While(_, b) => out.extend(preorder(b)),
        }
    }
    out
}

/// Rebuilds `c` with its `k`-th node (pre-order) replaced.
fn replace_nth(c: &Cmd, k: &mut usize, f: &dyn Fn(&Node) -> Node) -> Cmd {
    let mut nodes = Vec::new();
    for n in c.nodes() {
        let here = *k == 0;
        *k = k.wrapping_sub(1);
        let n2 = if here {
            f(n)
        } else {
            match &n.stmt {
                Stmt::Atomic(_) => (**n).clone(),
                Stmt::If(e, t, el) => {
                    let t2 = replace_nth(t, k, f);
                    let e2 = replace_nth(el, k, f);
                    n.with_stmt(Stmt::If(e.clone(), t2, e2))
                }
                Stmt::While(e, b) => n.with_stmt(Stmt::While(e.clone(), replace_nth(b, k, f))),
            }
        };
        nodes.push(Arc::new(n2));
    }
    Cmd::from_nodes(nodes)
}

const POISON: i64 = 987_654_321;

/// Overwriting the value a dead node writes changes neither the final
/// state nor, for assignments, the trace.
fn assert_semantically_dead(c: &Cmd, spec: &InputSpec, k: usize, load: bool) {
    let mutated = replace_nth(c, &mut k.clone(), &|n| {
        let Stmt::Atomic(a) = &n.stmt else { unreachable!() };
        let x = a.def().unwrap().clone();
        n.with_stmt(Stmt::Atomic(AtomicCmd::Assign(x, Expr::int(POISON))))
    });
    let before = run_all(&Program::Structured(c.clone()), spec, DEFAULT_FUEL).unwrap();
    let after = run_all(&Program::Structured(mutated.clone()), spec, DEFAULT_FUEL).unwrap();
    for ((i, s), (_, t)) in before.iter().zip(&after) {
        assert_eq!(s.regs, t.regs, "input {i}\n{c}\n-- mutated --\n{mutated}");
        assert_eq!(s.mem, t.mem, "input {i}\n{c}");
        if !load {
            assert_eq!(s.trace, t.trace, "input {i}\n{c}");
        }
    }
}

/// Counts steps whose head node satisfies `pred`.
fn count_steps(c: &Cmd, spec: &InputSpec, input: &ctlab::ConcreteInput, pred: &dyn Fn(&Node) -> bool) -> usize {
    let (regs, mem) = spec.initial_state(input);
    let mut s = StructState::new(c.clone(), regs, mem);
    let mut n = 0;
    while !s.is_final() {
        if pred(s.code.head().unwrap()) {
            n += 1;
        }
        s.step_in_place().unwrap();
    }
    n
}

/// `target` is `source` with some entries deleted, all satisfying `gone`.
fn assert_deletion(source: &[Observation], target: &[Observation], gone: &dyn Fn(&Observation) -> bool) {
    let mut j = 0;
    for o in source {
        if j < target.len() && target[j] == *o {
            j += 1;
        } else {
            assert!(gone(o), "{o} removed from {source:?} giving {target:?}");
        }
    }
    assert_eq!(j, target.len(), "{target:?} is not a subsequence of {source:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn liveness_matches_forward_scan(seed in any::<u64>()) {
        let features = Features::LOAD | Features::STORE | Features::DEAD_ASSIGN | Features::DEAD_LOAD | Features::UNTILE;
        let (c, _) = one(seed, features);
        let vars = c.vars();
        let annotated = liveness_analyze(&c);
        let atoms: Vec<&AtomicCmd> = annotated
            .nodes()
            .iter()
            .map(|n| match &n.stmt {
                Stmt::Atomic(a) => a,
                _ => unreachable!("straight-line program"),
            })
            .collect();
        for (i, n) in annotated.nodes().iter().enumerate() {
            let l = n.ann.liveness.as_ref().unwrap();
            prop_assert_eq!(&l.live_out, &scan_live_out(&atoms, i, &vars), "node {} of\n{}", i, c);
        }
    }

    #[test]
    fn dead_nodes_are_semantically_dead(seed in any::<u64>()) {
        let features = Features::basic() | Features::DEAD_ASSIGN | Features::DEAD_LOAD;
        let (c, spec) = one(seed, features);
        let annotated = liveness_analyze(&c);
        for (k, n) in preorder(&annotated).iter().enumerate() {
            if is_dead_assignment(n) {
                assert_semantically_dead(&c, &spec, k, false);
            } else if is_dead_load(n) {
                assert_semantically_dead(&c, &spec, k, true);
            }
        }
    }

    #[test]
    fn dae_deletes_exactly_the_dead_executions(seed in any::<u64>()) {
        let (c, spec) = one(seed, Features::basic() | Features::DEAD_ASSIGN);
        let annotated = liveness_analyze(&c);
        let target = dead_assignment_eliminate(&annotated);
        let src = run_all(&Program::Structured(c.clone()), &spec, DEFAULT_FUEL).unwrap();
        let tgt = run_all(&Program::Structured(target), &spec, DEFAULT_FUEL).unwrap();
        for ((i, s), (_, t)) in src.iter().zip(&tgt) {
            assert_deletion(&s.trace, &t.trace, &|o| *o == Observation::Silent);
            let removed = count_steps(&annotated, &spec, i, &|n| is_dead_assignment(n));
            prop_assert_eq!(s.trace.len() - t.trace.len(), removed);
        }
    }

    #[test]
    fn dbe_deletes_exactly_the_dead_branches(seed in any::<u64>()) {
        let (c, spec) = one(seed, Features::basic() | Features::CONST_COND);
        let target = dead_branch_eliminate(&c);
        let src = run_all(&Program::Structured(c.clone()), &spec, DEFAULT_FUEL).unwrap();
        let tgt = run_all(&Program::Structured(target), &spec, DEFAULT_FUEL).unwrap();
        for ((i, s), (_, t)) in src.iter().zip(&tgt) {
            assert_deletion(&s.trace, &t.trace, &|o| matches!(o, Observation::Branch(_)));
            let removed = count_steps(&c, &spec, i, &|n| dead_branch(n).is_some());
            prop_assert_eq!(s.trace.len() - t.trace.len(), removed);
        }
    }

    #[test]
    fn memory_elimination_deletes_only_accesses(seed in any::<u64>()) {
        let (c, spec) = one(seed, Features::basic() | Features::DEAD_LOAD | Features::SELF_STORE);
        let is_addr = |o: &Observation| matches!(o, Observation::Addr(_));
        let src = run_all(&Program::Structured(c.clone()), &spec, DEFAULT_FUEL).unwrap();
        for target in [dead_load_eliminate(&liveness_analyze(&c)), dead_store_eliminate(&c)] {
            let tgt = run_all(&Program::Structured(target), &spec, DEFAULT_FUEL).unwrap();
            for ((_, s), (_, t)) in src.iter().zip(&tgt) {
                assert_deletion(&s.trace, &t.trace, &is_addr);
                prop_assert_eq!(&s.regs, &t.regs);
                prop_assert_eq!(&s.mem, &t.mem);
            }
        }
    }
}

#[test]
fn self_store_oracle_on_fixed_program() {
    let c = ctlab::syntax::parse_structured("y := load[a + s]; store[a + s] := y; y := 0;").unwrap();
    let spec = InputSpec::parse("input a public 16..17\ninput s secret 0..1").unwrap();
    let src = run_all(&Program::Structured(c.clone()), &spec, DEFAULT_FUEL).unwrap();
    let tgt = run_all(&Program::Structured(dead_store_eliminate(&c)), &spec, DEFAULT_FUEL).unwrap();
    for ((_, s), (_, t)) in src.iter().zip(&tgt) {
        assert_eq!(s.trace.len(), 3);
        assert_eq!(t.trace, vec![Observation::Silent]);
    }
}
