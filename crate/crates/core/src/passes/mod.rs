//! Program transformations and the analyses they rely on.

pub mod branchless;
pub mod dae;
pub mod dbe;
pub mod liveness;
pub mod lower;
pub mod rotate;
pub mod structural;
pub mod subst;
pub mod unspill;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::expr::Var;
use crate::semantics::{Language, Program};

pub use branchless::{
    branch_coalesce, cfg_empty_branch_coalesce, dead_store_eliminate, if_convert, inverse_if_convert,
};
pub use dae::{dead_assignment_eliminate, dead_load_eliminate};
pub use dbe::dead_branch_eliminate;
pub use liveness::{liveness_analyze, liveness_analyze_with_exit};
pub use lower::lower;
pub use rotate::{detect_loops, loop_rotate, rotate_all, LoopSpec, Rotation};
pub use structural::{annotate_regions, hofl, structure, structure_cfg, Region, RegionAnnotation};
pub use subst::{annotate_substitutions, expr_substitute, SubstStrategy};
pub use unspill::{unspill, SpillSlot};

/// Name of the stack pointer register the unspilling pass works with.
pub const STACK_POINTER: &str = "sp";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PassError {
    #[error("pass `{pass}` expects a {expected} program, got a {found} program")]
    WrongLanguage {
        pass: PassName,
        expected: Language,
        found: Language,
    },
    #[error("not in spill form: {0}")]
    NotSpillForm(String),
    #[error("{0}")]
    Irreducible(String),
    #[error("invalid loop: {0}")]
    InvalidLoop(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(into = "String")]
pub enum PassName {
    ConstFold,
    Untile,
    Dbe,
    Dae,
    Unspill,
    Structure,
    LoopRotate,
    IfConvert,
    InvIfConvert,
    BranchCoalesce,
    EmptyBranchCoalesce,
    DeadLoadElim,
    DeadStoreElim,
}

impl PassName {
    pub const ALL: [PassName; 13] = [
        PassName::ConstFold,
        PassName::Untile,
        PassName::Dbe,
        PassName::Dae,
        PassName::Unspill,
        PassName::Structure,
        PassName::LoopRotate,
        PassName::IfConvert,
        PassName::InvIfConvert,
        PassName::BranchCoalesce,
        PassName::EmptyBranchCoalesce,
        PassName::DeadLoadElim,
        PassName::DeadStoreElim,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PassName::ConstFold => "const-fold",
            PassName::Untile => "untile",
            PassName::Dbe => "dbe",
            PassName::Dae => "dae",
            PassName::Unspill => "unspill",
            PassName::Structure => "structure",
            PassName::LoopRotate => "loop-rotate",
            PassName::IfConvert => "if-convert",
            PassName::InvIfConvert => "inv-if-convert",
            PassName::BranchCoalesce => "branch-coalesce",
            PassName::EmptyBranchCoalesce => "empty-branch-coalesce",
            PassName::DeadLoadElim => "dead-load-elim",
            PassName::DeadStoreElim => "dead-store-elim",
        }
    }

    /// Language of the programs the pass consumes.
    pub fn input_language(self) -> Language {
        match self {
            PassName::Structure | PassName::LoopRotate | PassName::EmptyBranchCoalesce => Language::Cfg,
            _ => Language::Structured,
        }
    }

    /// The seven passes with a simulation certificate.
    pub fn is_certified(self) -> bool {
        matches!(
            self,
            PassName::ConstFold
                | PassName::Untile
                | PassName::Dbe
                | PassName::Dae
                | PassName::Unspill
                | PassName::Structure
                | PassName::LoopRotate
        )
    }
}

impl fmt::Display for PassName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl From<PassName> for String {
    fn from(p: PassName) -> String {
        p.as_str().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown pass `{0}`")]
pub struct UnknownPass(pub String);

impl FromStr for PassName {
    type Err = UnknownPass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PassName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| UnknownPass(s.to_string()))
    }
}

/// Runs a pass on a program of the right language.
pub fn apply_pass(pass: PassName, prog: &Program) -> Result<Program, PassError> {
    let wrong = || PassError::WrongLanguage {
        pass,
        expected: pass.input_language(),
        found: prog.language(),
    };
    match pass.input_language() {
        Language::Structured => {
            let c = prog.as_structured().ok_or_else(wrong)?;
            let out = match pass {
                PassName::ConstFold => subst::const_fold(c),
                PassName::Untile => subst::untile(c),
                PassName::Dbe => dead_branch_eliminate(c),
                PassName::Dae => dead_assignment_eliminate(&liveness_analyze(c)).strip_annotations(),
                PassName::Unspill => unspill(c, &Var::new(STACK_POINTER))?.0,
                PassName::IfConvert => if_convert(c),
                PassName::InvIfConvert => inverse_if_convert(c),
                PassName::BranchCoalesce => branch_coalesce(c),
                PassName::DeadLoadElim => dead_load_eliminate(&liveness_analyze(c)).strip_annotations(),
                PassName::DeadStoreElim => dead_store_eliminate(c),
                PassName::Structure | PassName::LoopRotate | PassName::EmptyBranchCoalesce => {
                    unreachable!("CFG passes are handled below")
                }
            };
            Ok(Program::Structured(out))
        }
        Language::Cfg => {
            let g = prog.as_cfg().ok_or_else(wrong)?;
            Ok(match pass {
                PassName::Structure => Program::Structured(structure(g)?),
                PassName::LoopRotate => Program::Cfg(rotate_all(g)?.0),
                _ => Program::Cfg(cfg_empty_branch_coalesce(g)),
            })
        }
    }
}
