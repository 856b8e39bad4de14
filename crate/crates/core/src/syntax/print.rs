use std::fmt::{self, Write};

use super::parser::precedence;
use crate::cfg::{CfgNode, CfgProgram};
use crate::expr::{Expr, OpKind, Value};
use crate::structured::{AtomicCmd, Cmd, Node, Stmt};

const INDENT: &str = "    ";

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Op(k, args) if args.len() == k.arity() => precedence(*k),
        // Negative literals print with a leading `-`, like a unary operator.
        Expr::Const(Value::Int(n)) if *n < 0 => 7,
        _ => 9,
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, needs_parens: bool) -> fmt::Result {
    if needs_parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Var(x) => write!(f, "{x}"),
            Expr::Op(OpKind::Mux, args) if args.len() == 3 => {
                write!(f, "mux({}, {}, {})", args[0], args[1], args[2])
            }
            Expr::Op(k @ (OpKind::Neg | OpKind::Not), args) if args.len() == 1 => {
                f.write_str(k.symbol())?;
                let a = &args[0];
                // `-(5)` is negation of a literal, `-5` is the literal itself.
                let parens = expr_prec(a) < 7 || matches!(a, Expr::Const(Value::Int(_)));
                write_operand(f, a, parens)
            }
            Expr::Op(k, args) if args.len() == 2 => {
                let p = precedence(*k);
                write_operand(f, &args[0], expr_prec(&args[0]) < p)?;
                write!(f, " {} ", k.symbol())?;
                write_operand(f, &args[1], expr_prec(&args[1]) <= p)
            }
            Expr::Op(k, args) => {
                write!(f, "{}(", k.symbol())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for AtomicCmd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomicCmd::Assign(x, e) => write!(f, "{x} := {e}"),
            AtomicCmd::Load(x, e) => write!(f, "{x} := load[{e}]"),
            AtomicCmd::Store(e, x) => write!(f, "store[{e}] := {x}"),
        }
    }
}

/// Multi-line rendering; `nil` prints as `skip;`.
impl fmt::Display for Cmd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        if self.is_nil() {
            out.push_str("skip;\n");
        } else {
            write_block(&mut out, self, 0, false);
        }
        f.write_str(&out)
    }
}

fn write_block(out: &mut String, c: &Cmd, depth: usize, annotate: bool) {
    for n in c.nodes() {
        write_node(out, n, depth, annotate);
    }
}

fn write_annotation(out: &mut String, n: &Node, pad: &str) {
    for s in &n.ann.subst {
        let _ = writeln!(out, "{pad}# subst {} => {}", s.from, s.to);
    }
    if let Some(l) = &n.ann.liveness {
        let names = |set: &std::collections::BTreeSet<crate::expr::Var>| {
            set.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
        };
        let _ = writeln!(
            out,
            "{pad}# live in {{{}}} out {{{}}}",
            names(&l.live_in),
            names(&l.live_out)
        );
    }
}

fn write_node(out: &mut String, n: &Node, depth: usize, annotate: bool) {
    let pad = INDENT.repeat(depth);
    if annotate {
        write_annotation(out, n, &pad);
    }
    match &n.stmt {
        Stmt::Atomic(a) => {
            let _ = writeln!(out, "{pad}{a};");
        }
        Stmt::If(e, t, els) => {
            let _ = writeln!(out, "{pad}if ({e}) {{");
            write_block(out, t, depth + 1, annotate);
            if els.is_nil() {
                let _ = writeln!(out, "{pad}}}");
            } else {
                let _ = writeln!(out, "{pad}}} else {{");
                write_block(out, els, depth + 1, annotate);
                let _ = writeln!(out, "{pad}}}");
            }
        }
        Stmt::While(e, body) => {
            let _ = writeln!(out, "{pad}while ({e}) {{");
            write_block(out, body, depth + 1, annotate);
            let _ = writeln!(out, "{pad}}}");
        }
    }
}

/// Multi-line rendering with node annotations as comments.
pub fn print_annotated(c: &Cmd) -> String {
    let mut out = String::new();
    if c.is_nil() {
        out.push_str("skip;\n");
    } else {
        write_block(&mut out, c, 0, true);
    }
    out
}

/// Single-line rendering, used in diagnostics and witnesses.
pub fn print_inline(c: &Cmd) -> String {
    if c.is_nil() {
        return "skip;".to_string();
    }
    let mut out = String::new();
    inline_block(&mut out, c);
    out
}

fn inline_block(out: &mut String, c: &Cmd) {
    for (i, n) in c.nodes().iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        match &n.stmt {
            Stmt::Atomic(a) => {
                let _ = write!(out, "{a};");
            }
            Stmt::If(e, t, els) => {
                let _ = write!(out, "if ({e}) {{");
                inline_inner(out, t);
                out.push_str("} else {");
                inline_inner(out, els);
                out.push('}');
            }
            Stmt::While(e, body) => {
                let _ = write!(out, "while ({e}) {{");
                inline_inner(out, body);
                out.push('}');
            }
        }
    }
}

fn inline_inner(out: &mut String, c: &Cmd) {
    if !c.is_nil() {
        out.push(' ');
        inline_block(out, c);
        out.push(' ');
    }
}

impl fmt::Display for CfgNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CfgNode::Instr { label, cmd, next } => match cmd {
                Some(a) => write!(f, "{label}: {a} -> {next}"),
                None => write!(f, "{label}: nop -> {next}"),
            },
            CfgNode::Branch {
                label,
                cond,
                on_true,
                on_false,
            } => write!(f, "{label}: br {cond} ? {on_true} : {on_false}"),
        }
    }
}

impl fmt::Display for CfgProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cfg")?;
        writeln!(f, "entry {}", self.entry())?;
        writeln!(f, "exit {}", self.exit())?;
        for n in self.nodes() {
            writeln!(f, "{n}")?;
        }
        Ok(())
    }
}
