//! Total register and memory maps.
//!
//! Both maps default to integer 0. Entries holding the default are never
//! stored, so the derived equality is equality of the total maps.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{Value, Var};

#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegisterMap(BTreeMap<Var, Value>);

impl RegisterMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, x: &Var) -> Value {
        self.0.get(x).copied().unwrap_or_default()
    }

    pub fn set(&mut self, x: Var, v: Value) {
        if v == Value::default() {
            self.0.remove(&x);
        } else {
            self.0.insert(x, v);
        }
    }

    /// Functional update.
    pub fn with(&self, x: Var, v: Value) -> Self {
        let mut out = self.clone();
        out.set(x, v);
        out
    }

    /// Registers holding a non-default value.
    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Value)> {
        self.0.iter()
    }

    /// Equality restricted to the variables accepted by `keep`.
    pub fn agrees_on<F: Fn(&Var) -> bool>(&self, other: &Self, keep: F) -> bool {
        self.0
            .keys()
            .chain(other.0.keys())
            .filter(|x| keep(x))
            .all(|x| self.get(x) == other.get(x))
    }
}

impl fmt::Debug for RegisterMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.0.iter()).finish()
    }
}

impl fmt::Display for RegisterMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Memory(BTreeMap<i64, Value>);

impl Memory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, addr: i64) -> Value {
        self.0.get(&addr).copied().unwrap_or_default()
    }

    pub fn set(&mut self, addr: i64, v: Value) {
        if v == Value::default() {
            self.0.remove(&addr);
        } else {
            self.0.insert(addr, v);
        }
    }

    pub fn with(&self, addr: i64, v: Value) -> Self {
        let mut out = self.clone();
        out.set(addr, v);
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (&i64, &Value)> {
        self.0.iter()
    }

    pub fn agrees_on<F: Fn(i64) -> bool>(&self, other: &Self, keep: F) -> bool {
        self.0
            .keys()
            .chain(other.0.keys())
            .filter(|a| keep(**a))
            .all(|a| self.get(*a) == other.get(*a))
    }
}

impl fmt::Debug for Memory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.0.iter()).finish()
    }
}

impl fmt::Display for Memory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "[{k}]={v}")?;
        }
        f.write_str("}")
    }
}
