//! Concrete text syntax for both languages.
//!
//! Structured programs are sequences of `;`-terminated statements with
//! `if`/`while` blocks. CFG programs are line-based:
//!
//! ```text
//! cfg
//! entry l0
//! exit done
//! l0: x := load[a] -> l1
//! l1: br x < 3 ? l0 : done
//! ```

mod lexer;
mod parser;
mod print;

use thiserror::Error;

use crate::cfg::CfgProgram;
use crate::expr::Expr;
use crate::structured::Cmd;

pub use print::{print_inline, print_annotated};

pub(crate) const KEYWORDS: &[&str] = &[
    "if", "else", "while", "skip", "load", "store", "mux", "true", "false", "cfg", "entry", "exit",
    "br", "nop",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept identifiers starting with `__`, which passes use for fresh
    /// registers.
    pub allow_reserved: bool,
}

impl ParseOptions {
    pub fn internal() -> Self {
        ParseOptions {
            allow_reserved: true,
        }
    }
}

pub fn parse_structured(text: &str) -> Result<Cmd, ParseError> {
    parser::parse_structured_with(text, &ParseOptions::default())
}

pub fn parse_structured_with(text: &str, opts: &ParseOptions) -> Result<Cmd, ParseError> {
    parser::parse_structured_with(text, opts)
}

pub fn parse_cfg(text: &str) -> Result<CfgProgram, ParseError> {
    parser::parse_cfg_with(text, &ParseOptions::default())
}

pub fn parse_cfg_with(text: &str, opts: &ParseOptions) -> Result<CfgProgram, ParseError> {
    parser::parse_cfg_with(text, opts)
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    parser::parse_expr_with(text, &ParseOptions::internal())
}

/// Whether a word may be used as a variable or label.
pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::CfgNode;
    use crate::expr::OpKind;
    use crate::structured::AtomicCmd;

    #[test]
    fn skip_is_nil() {
        assert!(parse_structured("skip;").unwrap().is_nil());
        assert!(parse_structured("# nothing\n").unwrap().is_nil());
        assert_eq!(Cmd::nil().to_string(), "skip;\n");
    }

    #[test]
    fn statements_parse() {
        let c = parse_structured(
            "x := 3 * y - 1;\nv := load[a + x];\nstore[a] := v;\nif (x == 0) { skip; } else { x := 1; }\nwhile (i < 4) { i := i + 1; }",
        )
        .unwrap();
        assert_eq!(c.len(), 5);
        let expected = Cmd::seq([
            Cmd::assign(
                "x",
                Expr::binary(
                    OpKind::Sub,
                    Expr::binary(OpKind::Mul, Expr::int(3), Expr::var("y")),
                    Expr::int(1),
                ),
            ),
            Cmd::load("v", Expr::binary(OpKind::Add, Expr::var("a"), Expr::var("x"))),
            Cmd::store(Expr::var("a"), "v"),
            Cmd::if_(
                Expr::binary(OpKind::Eq, Expr::var("x"), Expr::int(0)),
                Cmd::nil(),
                Cmd::assign("x", Expr::int(1)),
            ),
            Cmd::while_(
                Expr::binary(OpKind::Lt, Expr::var("i"), Expr::int(4)),
                Cmd::assign("i", Expr::binary(OpKind::Add, Expr::var("i"), Expr::int(1))),
            ),
        ]);
        assert_eq!(c, expected);
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expr("a - b - c").unwrap();
        assert_eq!(
            e,
            Expr::binary(
                OpKind::Sub,
                Expr::binary(OpKind::Sub, Expr::var("a"), Expr::var("b")),
                Expr::var("c")
            )
        );
        let e = parse_expr("x < 1 || !b && c == d").unwrap();
        assert_eq!(e.to_string(), "x < 1 || !b && c == d");
        assert_eq!(parse_expr("a - (b - c)").unwrap().to_string(), "a - (b - c)");
        assert_eq!(parse_expr("(a + b) * c").unwrap().to_string(), "(a + b) * c");
        assert_eq!(parse_expr("-5").unwrap(), Expr::int(-5));
        assert_eq!(parse_expr("-(5)").unwrap(), Expr::unary(OpKind::Neg, Expr::int(5)));
        assert_eq!(Expr::unary(OpKind::Neg, Expr::int(5)).to_string(), "-(5)");
        assert_eq!(parse_expr("-9223372036854775808").unwrap(), Expr::int(i64::MIN));
        assert_eq!(
            parse_expr("mux(d == 1, 3, 5)").unwrap(),
            Expr::mux(
                Expr::binary(OpKind::Eq, Expr::var("d"), Expr::int(1)),
                Expr::int(3),
                Expr::int(5)
            )
        );
    }

    #[test]
    fn store_value_must_be_a_variable() {
        let err = parse_structured("store[e] := 3;").unwrap_err();
        assert!(err.message.contains("must be a variable"), "{err}");
        let err = parse_structured("store[e] := x + 1;").unwrap_err();
        assert!(err.message.contains("must be a variable"), "{err}");
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_structured("x := 1;\ny := ;").unwrap_err();
        assert_eq!((err.line, err.col), (2, 6));
        let err = parse_structured("x := 1").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.contains("`;`"));
        assert!(parse_structured("x := 1 $ 2;").is_err());
        assert!(parse_structured("if := 1;").is_err());
    }

    #[test]
    fn reserved_prefix_rejected_unless_allowed() {
        assert!(parse_structured("__spill_0 := 1;").is_err());
        assert!(parse_structured_with("__spill_0 := 1;", &ParseOptions::internal()).is_ok());
    }

    #[test]
    fn structured_round_trip() {
        let text = "i := 0;\nwhile (i < 8) {\n    if (s == 1) {\n        c := 1665;\n    } else {\n        c := 0;\n    }\n    store[p + i] := c;\n    i := i + 1;\n}\n";
        let c = parse_structured(text).unwrap();
        assert_eq!(c.to_string(), text);
        assert_eq!(parse_structured(&print_inline(&c)).unwrap(), c);
    }

    #[test]
    fn cfg_parse_and_print() {
        let text = "cfg\nentry l0\nexit done\nl0: i := 0 -> l1\nl1: br i < 2 ? l2 : done\nl2: i := i + 1 -> l1\n";
        let g = parse_cfg(text).unwrap();
        assert_eq!(g.nodes().len(), 3);
        assert_eq!(
            g.node(&"l1".into()),
            Some(&CfgNode::branch(
                "l1",
                Expr::binary(OpKind::Lt, Expr::var("i"), Expr::int(2)),
                "l2",
                "done"
            ))
        );
        assert_eq!(g.to_string(), text);
        assert_eq!(parse_cfg(&g.to_string()).unwrap(), g);
        let nop = parse_cfg("cfg\nentry a\nexit b\na: nop -> b\n").unwrap();
        assert_eq!(nop.nodes()[0], CfgNode::nop("a", "b"));
        let st = parse_cfg("cfg\nentry a\nexit b\na: store[4] := x -> b\n").unwrap();
        assert_eq!(
            st.nodes()[0],
            CfgNode::instr("a", AtomicCmd::Store(Expr::int(4), "x".into()), "b")
        );
    }

    #[test]
    fn cfg_errors() {
        assert!(parse_cfg("entry a\nexit b\n").is_err());
        assert!(parse_cfg("cfg\nexit b\na: nop -> b\n").is_err());
        let dup = parse_cfg("cfg\nentry a\nexit b\na: nop -> b\na: nop -> b\n").unwrap_err();
        assert!(dup.message.contains("duplicate"), "{dup}");
        let dangling = parse_cfg("cfg\nentry a\nexit b\na: nop -> c\n").unwrap_err();
        assert!(dangling.message.contains("`c`"), "{dangling}");
        let bad = parse_cfg("cfg\nentry a\nexit b\na: br x ? b\n").unwrap_err();
        assert_eq!(bad.line, 4);
    }
}
