//! Compilation of structured programs to CFGs.

use crate::cfg::{CfgNode, CfgProgram, Label};
use crate::structured::{Cmd, Stmt};

struct Lowering {
    nodes: Vec<CfgNode>,
    counter: usize,
}

impl Lowering {
    fn fresh(&mut self) -> Label {
        let l = Label::new(&format!("l{}", self.counter));
        self.counter += 1;
        l
    }

    /// Lowers `c` so that it continues at `next`; returns its first label.
    fn seq(&mut self, c: &Cmd, next: Label) -> Label {
        let labels: Vec<Label> = c.nodes().iter().map(|_| self.fresh()).collect();
        for (i, n) in c.nodes().iter().enumerate() {
            let after = labels.get(i + 1).cloned().unwrap_or_else(|| next.clone());
            let here = labels[i].clone();
            let node = match &n.stmt {
                Stmt::Atomic(a) => CfgNode::Instr {
                    label: here,
                    cmd: Some(a.clone()),
                    next: after,
                },
                Stmt::If(e, t, f) => {
                    let on_true = self.seq(t, after.clone());
                    let on_false = self.seq(f, after);
                    CfgNode::Branch {
                        label: here,
                        cond: e.clone(),
                        on_true,
                        on_false,
                    }
                }
                Stmt::While(e, b) => {
                    let on_true = self.seq(b, here.clone());
                    CfgNode::Branch {
                        label: here,
                        cond: e.clone(),
                        on_true,
                        on_false: after,
                    }
                }
            };
            self.nodes.push(node);
        }
        labels.first().cloned().unwrap_or(next)
    }
}

/// One CFG node per statement; the exit label is `ret`.
pub fn lower(c: &Cmd) -> CfgProgram {
    let mut lw = Lowering {
        nodes: Vec::new(),
        counter: 0,
    };
    let exit = Label::new("ret");
    let entry = lw.seq(c, exit.clone());
    let mut nodes = lw.nodes;
    nodes.sort_by_key(|n| {
        n.label().as_str()[1..]
            .parse::<usize>()
            .expect("lowering labels are l<n>")
    });
    CfgProgram::new(entry, exit, nodes).expect("lowering produces a well-formed graph")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::passes::structural::structure;
    use crate::syntax::parse_structured;

    #[test]
    fn lowering_round_trips_through_structural_analysis() {
        for src in [
            "skip;",
            "x := 1; y := load[x];",
            "i := 0; while (i < 3) { if (s) { x := 1; } else { } i := i + 1; } store[0] := x;",
            "if (a) { if (b) { x := 1; } } else { while (c) { c := false; } }",
        ] {
            let c = parse_structured(src).unwrap();
            assert_eq!(structure(&lower(&c)).unwrap(), c, "{src}");
        }
    }
}
