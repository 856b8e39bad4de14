//! Built-in counterexample corpus.
//!
//! Each entry pairs a program with an input specification and the pass it
//! exercises. The expected classification is data only; the harness
//! re-derives it with the constant-time oracle every time.

use std::fmt;

use serde::Serialize;

use crate::ct::{PropertyStatus, TransparencyReport};
use crate::input::InputSpec;
use crate::passes::PassName;
use crate::semantics::{Language, Program};
use crate::syntax::{parse_cfg, parse_structured};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    ReflectionFail,
    PreservationFail,
    Transparent,
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Expectation::ReflectionFail => "reflection-fail",
            Expectation::PreservationFail => "preservation-fail",
            Expectation::Transparent => "transparent",
        })
    }
}

impl Expectation {
    /// Classification of a report, if it is definite.
    pub fn of_report(r: &TransparencyReport) -> Option<Expectation> {
        match (r.reflection.status, r.preservation.status) {
            (PropertyStatus::Fail, PropertyStatus::Ok) => Some(Expectation::ReflectionFail),
            (PropertyStatus::Ok, PropertyStatus::Fail) => Some(Expectation::PreservationFail),
            (PropertyStatus::Ok, PropertyStatus::Ok) => Some(Expectation::Transparent),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub language: Language,
    pub program: &'static str,
    pub spec: &'static str,
    pub pass: PassName,
    pub expectation: Expectation,
}

impl CorpusEntry {
    pub fn parse_program(&self) -> Program {
        match self.language {
            Language::Structured => Program::Structured(
                parse_structured(self.program).unwrap_or_else(|e| panic!("corpus entry {}: {e}", self.name)),
            ),
            Language::Cfg => {
                Program::Cfg(parse_cfg(self.program).unwrap_or_else(|e| panic!("corpus entry {}: {e}", self.name)))
            }
        }
    }

    pub fn parse_spec(&self) -> InputSpec {
        InputSpec::parse(self.spec).unwrap_or_else(|e| panic!("corpus entry {} spec: {e}", self.name))
    }

    /// File name of the program, with the extension of its language.
    pub fn file_name(&self) -> String {
        match self.language {
            Language::Structured => format!("{}.sct", self.name),
            Language::Cfg => format!("{}.cfg", self.name),
        }
    }
}

macro_rules! entry {
    ($name:literal, $lang:ident, $ext:literal, $pass:ident, $exp:ident) => {
        CorpusEntry {
            name: $name,
            language: Language::$lang,
            program: include_str!(concat!("../corpus/", $name, ".", $ext)),
            spec: include_str!(concat!("../corpus/", $name, ".spec")),
            pass: PassName::$pass,
            expectation: Expectation::$exp,
        }
    };
}

/// All entries, sorted by name.
pub fn corpus() -> Vec<CorpusEntry> {
    let mut entries = vec![
        entry!("binsec_empty_branch", Cfg, "cfg", EmptyBranchCoalesce, ReflectionFail),
        entry!("branch_coalescing", Structured, "sct", BranchCoalesce, ReflectionFail),
        entry!("clangover", Structured, "sct", IfConvert, ReflectionFail),
        entry!("const_fold", Structured, "sct", ConstFold, Transparent),
        entry!("dae", Structured, "sct", Dae, Transparent),
        entry!("dbe", Structured, "sct", Dbe, Transparent),
        entry!("dead_load", Structured, "sct", DeadLoadElim, ReflectionFail),
        entry!("inverse_if_conversion", Structured, "sct", InvIfConvert, PreservationFail),
        entry!("loop_rotate", Cfg, "cfg", LoopRotate, Transparent),
        entry!("self_store", Structured, "sct", DeadStoreElim, ReflectionFail),
        entry!("structure", Cfg, "cfg", Structure, Transparent),
        entry!("unspill", Structured, "sct", Unspill, Transparent),
        entry!("untile", Structured, "sct", Untile, Transparent),
    ];
    entries.sort_by_key(|e| e.name);
    entries
}

pub fn find(name: &str) -> Option<CorpusEntry> {
    corpus().into_iter().find(|e| e.name == name)
}
