//! Finite input domains and the indistinguishability relation they induce.
//!
//! Two concrete inputs are related iff every public register and every
//! public memory cell holds the same value in both.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Value, Var};
use crate::store::{Memory, RegisterMap};

pub const DEFAULT_MAX_RANGE: u64 = 16;
pub const DEFAULT_MAX_DOMAIN: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Secret,
}

impl fmt::Display for Visibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Visibility::Public => "public",
            Visibility::Secret => "secret",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InputKey {
    Reg(Var),
    Mem(i64),
}

impl fmt::Display for InputKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputKey::Reg(x) => write!(f, "{x}"),
            InputKey::Mem(a) => write!(f, "[{a}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputEntry {
    pub key: InputKey,
    pub visibility: Visibility,
    pub lo: i64,
    pub hi: i64,
}

impl InputEntry {
    pub fn size(&self) -> u64 {
        (self.hi as i128 - self.lo as i128 + 1).max(0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainBounds {
    pub max_range: u64,
    pub max_domain: u64,
}

impl Default for DomainBounds {
    fn default() -> Self {
        DomainBounds {
            max_range: DEFAULT_MAX_RANGE,
            max_domain: DEFAULT_MAX_DOMAIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("empty range {lo}..{hi} for `{key}`")]
    EmptyRange { key: String, lo: i64, hi: i64 },
    #[error("range of `{key}` has {size} values, bound is {bound}")]
    RangeTooLarge { key: String, size: u64, bound: u64 },
    #[error("input domain has {size} elements, bound is {bound}")]
    DomainTooLarge { size: u128, bound: u64 },
    #[error("duplicate input `{0}`")]
    Duplicate(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// Input domain: ranged public/secret entries plus fixed memory contents.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    entries: Vec<InputEntry>,
    inits: Vec<(i64, i64)>,
    bounds: DomainBounds,
}

/// One point of an input domain, in spec entry order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConcreteInput {
    pub values: Vec<(InputKey, i64)>,
}

impl ConcreteInput {
    pub fn get(&self, key: &InputKey) -> Option<i64> {
        self.values.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

impl fmt::Display for ConcreteInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

impl InputSpec {
    pub fn new(
        entries: Vec<InputEntry>,
        inits: Vec<(i64, i64)>,
        bounds: DomainBounds,
    ) -> Result<Self, SpecError> {
        let spec = InputSpec {
            entries,
            inits,
            bounds,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[InputEntry] {
        &self.entries
    }

    pub fn inits(&self) -> &[(i64, i64)] {
        &self.inits
    }

    pub fn bounds(&self) -> DomainBounds {
        self.bounds
    }

    pub fn with_bounds(mut self, bounds: DomainBounds) -> Result<Self, SpecError> {
        self.bounds = bounds;
        self.validate()?;
        Ok(self)
    }

    /// Same domain with a different public/secret partition.
    pub fn with_visibilities(&self, vis: &[Visibility]) -> Self {
        let mut out = self.clone();
        for (e, v) in out.entries.iter_mut().zip(vis) {
            e.visibility = *v;
        }
        out
    }

    fn validate(&self) -> Result<(), SpecError> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if e.lo > e.hi {
                return Err(SpecError::EmptyRange {
                    key: e.key.to_string(),
                    lo: e.lo,
                    hi: e.hi,
                });
            }
            if e.size() > self.bounds.max_range {
                return Err(SpecError::RangeTooLarge {
                    key: e.key.to_string(),
                    size: e.size(),
                    bound: self.bounds.max_range,
                });
            }
            if !seen.insert(e.key.clone()) {
                return Err(SpecError::Duplicate(e.key.to_string()));
            }
        }
        let mut init_addrs = BTreeSet::new();
        for (a, _) in &self.inits {
            if !init_addrs.insert(*a) || seen.contains(&InputKey::Mem(*a)) {
                return Err(SpecError::Duplicate(InputKey::Mem(*a).to_string()));
            }
        }
        let size = self.domain_size();
        if size > self.bounds.max_domain as u128 {
            return Err(SpecError::DomainTooLarge {
                size,
                bound: self.bounds.max_domain,
            });
        }
        Ok(())
    }

    pub fn domain_size(&self) -> u128 {
        self.entries.iter().map(|e| e.size() as u128).product()
    }

    /// Cartesian product of all ranges, first entry most significant.
    pub fn enumerate(&self) -> Result<Vec<ConcreteInput>, SpecError> {
        self.validate()?;
        let mut out = vec![ConcreteInput { values: Vec::new() }];
        for e in &self.entries {
            let mut next = Vec::with_capacity(out.len() * e.size() as usize);
            for prefix in &out {
                for v in e.lo..=e.hi {
                    let mut values = prefix.values.clone();
                    values.push((e.key.clone(), v));
                    next.push(ConcreteInput { values });
                }
            }
            out = next;
        }
        Ok(out)
    }

    /// Indistinguishability: all public entries agree.
    pub fn related(&self, a: &ConcreteInput, b: &ConcreteInput) -> bool {
        self.entries
            .iter()
            .filter(|e| e.visibility == Visibility::Public)
            .all(|e| a.get(&e.key) == b.get(&e.key))
    }

    /// The public part of an input; related inputs share it.
    pub fn public_projection(&self, i: &ConcreteInput) -> Vec<Option<i64>> {
        self.entries
            .iter()
            .filter(|e| e.visibility == Visibility::Public)
            .map(|e| i.get(&e.key))
            .collect()
    }

    /// Initial register map and memory determined by an input.
    pub fn initial_state(&self, i: &ConcreteInput) -> (RegisterMap, Memory) {
        let mut regs = RegisterMap::new();
        let mut mem = Memory::new();
        for (a, v) in &self.inits {
            mem.set(*a, Value::Int(*v));
        }
        for (k, v) in &i.values {
            match k {
                InputKey::Reg(x) => regs.set(x.clone(), Value::Int(*v)),
                InputKey::Mem(a) => mem.set(*a, Value::Int(*v)),
            }
        }
        (regs, mem)
    }

    pub fn parse(text: &str) -> Result<Self, SpecError> {
        parse_spec_with(text, DomainBounds::default())
    }
}

impl FromStr for InputSpec {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InputSpec::parse(s)
    }
}

impl fmt::Display for InputSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            match &e.key {
                InputKey::Reg(x) => writeln!(f, "input {x} {} {}..{}", e.visibility, e.lo, e.hi)?,
                InputKey::Mem(a) => writeln!(f, "mem {a} {} {}..{}", e.visibility, e.lo, e.hi)?,
            }
        }
        for (a, v) in &self.inits {
            writeln!(f, "mem {a} init {v}")?;
        }
        Ok(())
    }
}

/// Parses the line-oriented spec format:
/// `input <name> public|secret <lo>..<hi>`, `mem <addr> public|secret <lo>..<hi>`,
/// `mem <addr> init <value>`; `#` starts a comment.
pub fn parse_spec_with(text: &str, bounds: DomainBounds) -> Result<InputSpec, SpecError> {
    let mut entries = Vec::new();
    let mut inits = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| SpecError::Syntax {
            line: line_no,
            message,
        };
        let words: Vec<&str> = line.split_whitespace().collect();
        let int = |s: &str| -> Result<i64, SpecError> {
            s.parse::<i64>()
                .map_err(|_| err(format!("expected an integer, found `{s}`")))
        };
        let range = |s: &str| -> Result<(i64, i64), SpecError> {
            let (lo, hi) = s
                .split_once("..")
                .ok_or_else(|| err(format!("expected `<lo>..<hi>`, found `{s}`")))?;
            Ok((int(lo)?, int(hi)?))
        };
        let visibility = |s: &str| -> Result<Visibility, SpecError> {
            match s {
                "public" => Ok(Visibility::Public),
                "secret" => Ok(Visibility::Secret),
                _ => Err(err(format!("expected `public` or `secret`, found `{s}`"))),
            }
        };
        match words.as_slice() {
            ["input", name, vis, r] => {
                if !is_identifier(name) {
                    return Err(err(format!("invalid register name `{name}`")));
                }
                if name.starts_with("__") {
                    return Err(err(format!("identifier `{name}` uses the reserved `__` prefix")));
                }
                let (lo, hi) = range(r)?;
                entries.push(InputEntry {
                    key: InputKey::Reg(Var::new(name)),
                    visibility: visibility(vis)?,
                    lo,
                    hi,
                });
            }
            ["mem", addr, "init", v] => inits.push((int(addr)?, int(v)?)),
            ["mem", addr, vis, r] => {
                let (lo, hi) = range(r)?;
                entries.push(InputEntry {
                    key: InputKey::Mem(int(addr)?),
                    visibility: visibility(vis)?,
                    lo,
                    hi,
                });
            }
            _ => return Err(err(format!("unrecognised spec line `{line}`"))),
        }
    }
    InputSpec::new(entries, inits, bounds)
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_public_range() {
        let spec = InputSpec::parse("input x public 0..1").unwrap();
        let inputs = spec.enumerate().unwrap();
        assert_eq!(inputs.len(), 2);
        assert_eq!(inputs[0].to_string(), "{x=0}");
        assert_eq!(inputs[1].to_string(), "{x=1}");
    }

    #[test]
    fn lexicographic_order() {
        let spec = InputSpec::parse("input x public 0..1\ninput s secret 0..1\n").unwrap();
        let got: Vec<String> = spec.enumerate().unwrap().iter().map(|i| i.to_string()).collect();
        assert_eq!(got, ["{x=0, s=0}", "{x=0, s=1}", "{x=1, s=0}", "{x=1, s=1}"]);
    }

    #[test]
    fn empty_spec_has_one_input() {
        let inputs = InputSpec::empty().enumerate().unwrap();
        assert_eq!(inputs.len(), 1);
        assert!(inputs[0].values.is_empty());
    }

    #[test]
    fn related_examples() {
        let spec = InputSpec::parse("input x public 0..1\ninput s secret 0..1").unwrap();
        let inputs = spec.enumerate().unwrap();
        assert!(spec.related(&inputs[0], &inputs[0]));
        // x differs
        assert!(!spec.related(&inputs[0], &inputs[2]));
        // only s differs
        assert!(spec.related(&inputs[0], &inputs[1]));
    }

    #[test]
    fn related_is_an_equivalence() {
        let spec = InputSpec::parse(
            "input a public 0..2\ninput s secret 0..1\nmem 4 public 0..1\nmem 8 secret 1..2",
        )
        .unwrap();
        let xs = spec.enumerate().unwrap();
        for a in &xs {
            assert!(spec.related(a, a));
            for b in &xs {
                assert_eq!(spec.related(a, b), spec.related(b, a));
                for c in &xs {
                    if spec.related(a, b) && spec.related(b, c) {
                        assert!(spec.related(a, c));
                    }
                }
            }
        }
    }

    #[test]
    fn bounds_are_enforced() {
        assert!(matches!(
            InputSpec::parse("input x public 0..16"),
            Err(SpecError::RangeTooLarge { .. })
        ));
        assert!(matches!(
            InputSpec::parse("input x public 3..2"),
            Err(SpecError::EmptyRange { .. })
        ));
        assert!(matches!(
            InputSpec::parse("input x public 0..1\ninput x secret 0..1"),
            Err(SpecError::Duplicate(_))
        ));
        let big = "input a public 0..15\ninput b public 0..15\ninput c public 0..15\ninput d public 0..1\n";
        assert!(matches!(InputSpec::parse(big), Err(SpecError::DomainTooLarge { .. })));
        let relaxed = parse_spec_with(
            big,
            DomainBounds {
                max_range: 16,
                max_domain: 8192,
            },
        );
        assert!(relaxed.is_ok());
    }

    #[test]
    fn initial_state_uses_inits_and_defaults() {
        let spec = InputSpec::parse("mem 10 init 100\nmem 11 init 101\ninput s secret 0..1").unwrap();
        let inputs = spec.enumerate().unwrap();
        let (regs, mem) = spec.initial_state(&inputs[1]);
        assert_eq!(regs.get(&Var::new("s")), Value::Int(1));
        assert_eq!(regs.get(&Var::new("other")), Value::Int(0));
        assert_eq!(mem.get(10), Value::Int(100));
        assert_eq!(mem.get(11), Value::Int(101));
    }

    #[test]
    fn display_round_trips() {
        let text = "input x public -2..1\nmem 8 secret 0..3\nmem 3 init 7\n";
        let spec = InputSpec::parse(text).unwrap();
        assert_eq!(spec.to_string(), text);
        assert_eq!(InputSpec::parse(&spec.to_string()).unwrap(), spec);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        match InputSpec::parse("# header\ninput x maybe 0..1") {
            Err(SpecError::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(InputSpec::parse("input __x public 0..1").is_err());
    }
}
