use super::lexer::{lex, Spanned, Tok};
use super::{ParseError, ParseOptions, KEYWORDS};
use crate::cfg::{CfgNode, CfgProgram, Label};
use crate::expr::{Expr, OpKind, Value, Var};
use crate::structured::{AtomicCmd, Cmd};

pub(crate) struct Parser<'o> {
    toks: Vec<Spanned>,
    pos: usize,
    /// Position reported when input runs out.
    end: (usize, usize),
    opts: &'o ParseOptions,
}

impl<'o> Parser<'o> {
    pub(crate) fn new(toks: Vec<Spanned>, end: (usize, usize), opts: &'o ParseOptions) -> Self {
        Parser {
            toks,
            pos: 0,
            end,
            opts,
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|s| (s.line, s.col))
            .unwrap_or(self.end)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError {
            line,
            col,
            message: message.into(),
        })
    }

    fn found(&self) -> String {
        self.peek()
            .map(Tok::describe)
            .unwrap_or_else(|| "end of input".to_string())
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.error(format!("expected {}, found {}", t.describe(), self.found()))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", self.found()))
        }
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub(crate) fn expect_end(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            self.error(format!("unexpected {}", self.found()))
        }
    }

    pub(crate) fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.error(format!("expected {what}, found {}", self.found())),
        }
    }

    fn variable(&mut self) -> Result<Var, ParseError> {
        let (line, col) = self.here();
        let name = self.ident("a variable")?;
        if name.starts_with("__") && !self.opts.allow_reserved {
            return Err(ParseError {
                line,
                col,
                message: format!("identifier `{name}` uses the reserved `__` prefix"),
            });
        }
        Ok(Var::new(&name))
    }

    // ---- expressions ----

    pub(crate) fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(0)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some((kind, prec)) = self.peek().and_then(binary_op) {
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::binary(kind, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                if let Some(Tok::Int(n)) = self.peek().cloned() {
                    self.pos += 1;
                    if n > i64::MAX as u64 + 1 {
                        return self.error(format!("integer literal `-{n}` out of range"));
                    }
                    return Ok(Expr::int((n as i64).wrapping_neg()));
                }
                Ok(Expr::unary(OpKind::Neg, self.unary()?))
            }
            Some(Tok::Bang) => {
                self.pos += 1;
                Ok(Expr::unary(OpKind::Not, self.unary()?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Int(n)) => {
                if n > i64::MAX as u64 {
                    return self.error(format!("integer literal `{n}` out of range"));
                }
                self.pos += 1;
                Ok(Expr::int(n as i64))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(s)) if s == "true" || s == "false" => {
                self.pos += 1;
                Ok(Expr::Const(Value::Bool(s == "true")))
            }
            Some(Tok::Ident(s)) if s == "mux" => {
                self.pos += 1;
                self.expect(Tok::LParen)?;
                let c = self.expr()?;
                self.expect(Tok::Comma)?;
                let t = self.expr()?;
                self.expect(Tok::Comma)?;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(Expr::mux(c, t, e))
            }
            Some(Tok::Ident(_)) => Ok(Expr::Var(self.variable()?)),
            _ => self.error(format!("expected an expression, found {}", self.found())),
        }
    }

    // ---- atomic commands (shared by both languages) ----

    /// `x := e`, `x := load[e]`, `store[e] := x`
    pub(crate) fn atomic(&mut self) -> Result<AtomicCmd, ParseError> {
        if self.eat_keyword("store") {
            self.expect(Tok::LBracket)?;
            let addr = self.expr()?;
            self.expect(Tok::RBracket)?;
            self.expect(Tok::Assign)?;
            let is_var = matches!(self.peek(), Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()))
                && !matches!(
                    self.peek_at(1),
                    Some(
                        Tok::Plus
                            | Tok::Minus
                            | Tok::Star
                            | Tok::EqEq
                            | Tok::NotEq
                            | Tok::Lt
                            | Tok::Le
                            | Tok::AndAnd
                            | Tok::OrOr
                    )
                );
            if !is_var {
                return self.error(format!(
                    "the stored value must be a variable, found {}",
                    self.found()
                ));
            }
            let x = self.variable()?;
            return Ok(AtomicCmd::Store(addr, x));
        }
        let x = self.variable()?;
        self.expect(Tok::Assign)?;
        if self.eat_keyword("load") {
            self.expect(Tok::LBracket)?;
            let addr = self.expr()?;
            self.expect(Tok::RBracket)?;
            return Ok(AtomicCmd::Load(x, addr));
        }
        Ok(AtomicCmd::Assign(x, self.expr()?))
    }

    // ---- structured commands ----

    pub(crate) fn block_items(&mut self) -> Result<Cmd, ParseError> {
        let mut out = Cmd::nil();
        while !self.at_end() && self.peek() != Some(&Tok::RBrace) {
            out = out.then(self.statement()?);
        }
        Ok(out)
    }

    fn block(&mut self) -> Result<Cmd, ParseError> {
        self.expect(Tok::LBrace)?;
        let c = self.block_items()?;
        self.expect(Tok::RBrace)?;
        Ok(c)
    }

    fn statement(&mut self) -> Result<Cmd, ParseError> {
        if self.eat_keyword("skip") {
            self.expect(Tok::Semi)?;
            return Ok(Cmd::nil());
        }
        if self.eat_keyword("if") {
            self.expect(Tok::LParen)?;
            let c = self.expr()?;
            self.expect(Tok::RParen)?;
            let t = self.block()?;
            let f = if self.eat_keyword("else") {
                self.block()?
            } else {
                Cmd::nil()
            };
            return Ok(Cmd::if_(c, t, f));
        }
        if self.eat_keyword("while") {
            self.expect(Tok::LParen)?;
            let c = self.expr()?;
            self.expect(Tok::RParen)?;
            let body = self.block()?;
            return Ok(Cmd::while_(c, body));
        }
        let a = self.atomic()?;
        self.expect(Tok::Semi)?;
        Ok(Cmd::atomic(a))
    }

    // ---- CFG lines ----

    fn label(&mut self) -> Result<Label, ParseError> {
        Ok(Label::new(&self.ident("a label")?))
    }
}

fn binary_op(t: &Tok) -> Option<(OpKind, u8)> {
    Some(match t {
        Tok::OrOr => (OpKind::Or, 1),
        Tok::AndAnd => (OpKind::And, 2),
        Tok::EqEq => (OpKind::Eq, 3),
        Tok::NotEq => (OpKind::Ne, 3),
        Tok::Lt => (OpKind::Lt, 4),
        Tok::Le => (OpKind::Le, 4),
        Tok::Plus => (OpKind::Add, 5),
        Tok::Minus => (OpKind::Sub, 5),
        Tok::Star => (OpKind::Mul, 6),
        _ => return None,
    })
}

pub(crate) fn precedence(kind: OpKind) -> u8 {
    match kind {
        OpKind::Or => 1,
        OpKind::And => 2,
        OpKind::Eq | OpKind::Ne => 3,
        OpKind::Lt | OpKind::Le => 4,
        OpKind::Add | OpKind::Sub => 5,
        OpKind::Mul => 6,
        OpKind::Neg | OpKind::Not => 7,
        OpKind::Mux => 8,
    }
}

fn end_of(text: &str) -> (usize, usize) {
    let lines: Vec<&str> = text.lines().collect();
    match lines.last() {
        Some(l) => (lines.len(), l.chars().count() + 1),
        None => (1, 1),
    }
}

pub fn parse_structured_with(text: &str, opts: &ParseOptions) -> Result<Cmd, ParseError> {
    let mut p = Parser::new(lex(text, 1)?, end_of(text), opts);
    let c = p.block_items()?;
    p.expect_end()?;
    Ok(c)
}

pub fn parse_expr_with(text: &str, opts: &ParseOptions) -> Result<Expr, ParseError> {
    let mut p = Parser::new(lex(text, 1)?, end_of(text), opts);
    let e = p.expr()?;
    p.expect_end()?;
    Ok(e)
}

pub fn parse_cfg_with(text: &str, opts: &ParseOptions) -> Result<CfgProgram, ParseError> {
    let mut header = false;
    let mut entry: Option<Label> = None;
    let mut exit: Option<Label> = None;
    let mut nodes = Vec::new();
    let mut last_line = 1;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let toks = lex(line, line_no)?;
        if toks.is_empty() {
            continue;
        }
        last_line = line_no;
        let mut p = Parser::new(toks, (line_no, line.chars().count() + 1), opts);
        if !header {
            p.expect_keyword("cfg")?;
            p.expect_end()?;
            header = true;
            continue;
        }
        if p.eat_keyword("entry") {
            if entry.is_some() {
                return p.error("duplicate `entry` line").map_err(|e| at_line(e, line_no));
            }
            entry = Some(p.label()?);
            p.expect_end()?;
            continue;
        }
        if p.eat_keyword("exit") {
            if exit.is_some() {
                return p.error("duplicate `exit` line").map_err(|e| at_line(e, line_no));
            }
            exit = Some(p.label()?);
            p.expect_end()?;
            continue;
        }
        let label = p.label()?;
        p.expect(Tok::Colon)?;
        let node = if p.eat_keyword("br") {
            let cond = p.expr()?;
            p.expect(Tok::Question)?;
            let on_true = p.label()?;
            p.expect(Tok::Colon)?;
            let on_false = p.label()?;
            CfgNode::Branch {
                label,
                cond,
                on_true,
                on_false,
            }
        } else {
            let cmd = if p.eat_keyword("nop") {
                None
            } else {
                Some(p.atomic()?)
            };
            p.expect(Tok::Arrow)?;
            let next = p.label()?;
            CfgNode::Instr { label, cmd, next }
        };
        p.expect_end()?;
        nodes.push(node);
    }
    let missing = |what: &str| ParseError {
        line: last_line,
        col: 1,
        message: format!("missing `{what}` line"),
    };
    if !header {
        return Err(missing("cfg"));
    }
    let entry = entry.ok_or_else(|| missing("entry"))?;
    let exit = exit.ok_or_else(|| missing("exit"))?;
    CfgProgram::new(entry, exit, nodes).map_err(|e| ParseError {
        line: last_line,
        col: 1,
        message: e.to_string(),
    })
}

fn at_line(mut e: ParseError, line: usize) -> ParseError {
    e.line = line;
    e
}
