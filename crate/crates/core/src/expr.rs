//! Values, pure expressions and their evaluation.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::RegisterMap;

/// A register variable name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: &str) -> Self {
        Var(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Runtime values. Integers wrap modulo 2^64; booleans never coerce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

impl Value {
    pub fn type_name(self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
        }
    }
}

impl Default for Value {
    fn default() -> Self {
        Value::Int(0)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    Neg,
    Not,
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    And,
    Or,
    /// Branchless select: `mux(cond, then, else)`.
    Mux,
}

impl OpKind {
    pub fn arity(self) -> usize {
        match self {
            OpKind::Neg | OpKind::Not => 1,
            OpKind::Mux => 3,
            _ => 2,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            OpKind::Neg => "-",
            OpKind::Not => "!",
            OpKind::Add => "+",
            OpKind::Sub => "-",
            OpKind::Mul => "*",
            OpKind::Eq => "==",
            OpKind::Ne => "!=",
            OpKind::Lt => "<",
            OpKind::Le => "<=",
            OpKind::And => "&&",
            OpKind::Or => "||",
            OpKind::Mux => "mux",
        }
    }
}

/// Pure expression over registers. Never touches memory, never leaks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    Const(Value),
    Var(Var),
    Op(OpKind, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("type mismatch in `{expr}`: expected {expected}, found {found}")]
    TypeMismatch {
        expr: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("operator `{op}` expects {expected} operands, found {found} in `{expr}`")]
    Arity {
        expr: String,
        op: &'static str,
        expected: usize,
        found: usize,
    },
}

impl Expr {
    pub fn int(n: i64) -> Self {
        Expr::Const(Value::Int(n))
    }

    pub fn bool(b: bool) -> Self {
        Expr::Const(Value::Bool(b))
    }

    pub fn var(name: &str) -> Self {
        Expr::Var(Var::new(name))
    }

    pub fn op(kind: OpKind, args: Vec<Expr>) -> Self {
        Expr::Op(kind, args)
    }

    pub fn unary(kind: OpKind, a: Expr) -> Self {
        Expr::Op(kind, vec![a])
    }

    pub fn binary(kind: OpKind, a: Expr, b: Expr) -> Self {
        Expr::Op(kind, vec![a, b])
    }

    pub fn mux(c: Expr, t: Expr, e: Expr) -> Self {
        Expr::Op(OpKind::Mux, vec![c, t, e])
    }

    pub fn as_bool_const(&self) -> Option<bool> {
        match self {
            Expr::Const(Value::Bool(b)) => Some(*b),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Expr::Var(v) => Some(v),
            _ => None,
        }
    }

    /// Variables read by the expression.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Op(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn mentions(&self, x: &Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => v == x,
            Expr::Op(_, args) => args.iter().any(|a| a.mentions(x)),
        }
    }

    pub fn is_closed(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(_) => false,
            Expr::Op(_, args) => args.iter().all(Expr::is_closed),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Op(_, args) => 1 + args.iter().map(Expr::node_count).sum::<usize>(),
            _ => 1,
        }
    }

    /// Replaces every occurrence of `from` by `to`. Occurrences are matched
    /// outermost first; the replacement is not rescanned.
    pub fn substitute(&self, from: &Expr, to: &Expr) -> Expr {
        if self == from {
            return to.clone();
        }
        match self {
            Expr::Op(kind, args) => {
                Expr::Op(*kind, args.iter().map(|a| a.substitute(from, to)).collect())
            }
            _ => self.clone(),
        }
    }

    pub fn eval(&self, regs: &RegisterMap) -> Result<Value, EvalError> {
        match self {
            Expr::Const(v) => Ok(*v),
            Expr::Var(x) => Ok(regs.get(x)),
            Expr::Op(kind, args) => {
                if args.len() != kind.arity() {
                    return Err(EvalError::Arity {
                        expr: self.to_string(),
                        op: kind.symbol(),
                        expected: kind.arity(),
                        found: args.len(),
                    });
                }
                self.eval_op(*kind, args, regs)
            }
        }
    }

    fn eval_op(&self, kind: OpKind, args: &[Expr], regs: &RegisterMap) -> Result<Value, EvalError> {
        let int = |e: &Expr| -> Result<i64, EvalError> {
            match e.eval(regs)? {
                Value::Int(n) => Ok(n),
                v => Err(mismatch(e, "int", v)),
            }
        };
        let boolean = |e: &Expr| -> Result<bool, EvalError> {
            match e.eval(regs)? {
                Value::Bool(b) => Ok(b),
                v => Err(mismatch(e, "bool", v)),
            }
        };
        Ok(match kind {
            OpKind::Neg => Value::Int(int(&args[0])?.wrapping_neg()),
            OpKind::Not => Value::Bool(!boolean(&args[0])?),
            OpKind::Add => Value::Int(int(&args[0])?.wrapping_add(int(&args[1])?)),
            OpKind::Sub => Value::Int(int(&args[0])?.wrapping_sub(int(&args[1])?)),
            OpKind::Mul => Value::Int(int(&args[0])?.wrapping_mul(int(&args[1])?)),
            OpKind::Lt => Value::Bool(int(&args[0])? < int(&args[1])?),
            OpKind::Le => Value::Bool(int(&args[0])? <= int(&args[1])?),
            OpKind::And => Value::Bool(boolean(&args[0])? & boolean(&args[1])?),
            OpKind::Or => Value::Bool(boolean(&args[0])? | boolean(&args[1])?),
            OpKind::Eq | OpKind::Ne => {
                let a = args[0].eval(regs)?;
                let b = args[1].eval(regs)?;
                if a.type_name() != b.type_name() {
                    return Err(mismatch(&args[1], a.type_name(), b));
                }
                Value::Bool((a == b) == (kind == OpKind::Eq))
            }
            OpKind::Mux => {
                // Both arms are evaluated: a select has no control dependency.
                let c = boolean(&args[0])?;
                let t = args[1].eval(regs)?;
                let e = args[2].eval(regs)?;
                if t.type_name() != e.type_name() {
                    return Err(mismatch(&args[2], t.type_name(), e));
                }
                if c {
                    t
                } else {
                    e
                }
            }
        })
    }
}

fn mismatch(e: &Expr, expected: &'static str, found: Value) -> EvalError {
    EvalError::TypeMismatch {
        expr: e.to_string(),
        expected,
        found: found.type_name(),
    }
}
