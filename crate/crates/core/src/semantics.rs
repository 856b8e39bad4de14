//! Language-independent view of a deterministic leakage semantics.

use std::fmt;
use std::hash::Hash;

use serde::Serialize;
use thiserror::Error;

use crate::cfg::{CfgProgram, CfgSemantics};
use crate::expr::EvalError;
use crate::input::{ConcreteInput, InputSpec};
use crate::obs::{Observation, Trace};
use crate::store::{Memory, RegisterMap};
use crate::structured::{Cmd, StructState, StructuredSemantics};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("cannot step a final state")]
    Final,
    #[error("no node labelled `{0}`")]
    UnknownLabel(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("address `{0}` evaluated to a {1}")]
    NotAnAddress(String, &'static str),
    #[error("condition `{0}` evaluated to a {1}")]
    NotACondition(String, &'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {step}: {error}")]
pub struct RunError {
    pub step: usize,
    pub error: StepError,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome<S> {
    pub trace: Trace,
    /// Whether a final state was reached within the fuel.
    pub terminated: bool,
    pub state: S,
}

/// A deterministic small-step semantics with observations and program points.
pub trait Semantics {
    type State: Clone + fmt::Debug;
    type Point: Clone + Eq + Hash + fmt::Debug;

    fn is_final(&self, s: &Self::State) -> bool;
    fn step_mut(&self, s: &mut Self::State) -> Result<Observation, StepError>;
    fn point(&self, s: &Self::State) -> Self::Point;
    fn regs<'s>(&self, s: &'s Self::State) -> &'s RegisterMap;
    fn mem<'s>(&self, s: &'s Self::State) -> &'s Memory;

    fn step(&self, s: &Self::State) -> Result<(Observation, Self::State), StepError> {
        let mut next = s.clone();
        let o = self.step_mut(&mut next)?;
        Ok((o, next))
    }
}

pub fn run_with<S: Semantics>(
    sem: &S,
    mut state: S::State,
    fuel: usize,
) -> Result<RunOutcome<S::State>, RunError> {
    let mut trace = Vec::new();
    while !sem.is_final(&state) {
        if trace.len() == fuel {
            return Ok(RunOutcome {
                trace,
                terminated: false,
                state,
            });
        }
        let o = sem.step_mut(&mut state).map_err(|error| RunError {
            step: trace.len(),
            error,
        })?;
        trace.push(o);
    }
    Ok(RunOutcome {
        trace,
        terminated: true,
        state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Structured,
    Cfg,
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Language::Structured => "structured",
            Language::Cfg => "cfg",
        })
    }
}

/// A program in either language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Program {
    Structured(Cmd),
    Cfg(CfgProgram),
}

/// End state of a run, language-independently.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Execution {
    pub trace: Trace,
    pub terminated: bool,
    pub regs: RegisterMap,
    pub mem: Memory,
    /// Observation the run would emit next, when it was cut by fuel.
    pub next: Option<Observation>,
}

impl Program {
    pub fn language(&self) -> Language {
        match self {
            Program::Structured(_) => Language::Structured,
            Program::Cfg(_) => Language::Cfg,
        }
    }

    pub fn as_structured(&self) -> Option<&Cmd> {
        match self {
            Program::Structured(c) => Some(c),
            Program::Cfg(_) => None,
        }
    }

    pub fn as_cfg(&self) -> Option<&CfgProgram> {
        match self {
            Program::Cfg(g) => Some(g),
            Program::Structured(_) => None,
        }
    }

    pub fn execute(&self, regs: RegisterMap, mem: Memory, fuel: usize) -> Result<Execution, RunError> {
        match self {
            Program::Structured(c) => {
                let sem = StructuredSemantics;
                finish(&sem, run_with(&sem, StructState::new(c.clone(), regs, mem), fuel)?)
            }
            Program::Cfg(g) => {
                let sem = CfgSemantics::new(g);
                let init = sem.initial(regs, mem);
                finish(&sem, run_with(&sem, init, fuel)?)
            }
        }
    }

    /// Runs the program on the initial state of `input`.
    pub fn behavior(&self, spec: &InputSpec, input: &ConcreteInput, fuel: usize) -> Result<Execution, RunError> {
        let (regs, mem) = spec.initial_state(input);
        self.execute(regs, mem, fuel)
    }
}

fn finish<S: Semantics>(sem: &S, out: RunOutcome<S::State>) -> Result<Execution, RunError> {
    let next = if out.terminated {
        None
    } else {
        let step = out.trace.len();
        Some(
            sem.step(&out.state)
                .map_err(|error| RunError { step, error })?
                .0,
        )
    };
    Ok(Execution {
        regs: sem.regs(&out.state).clone(),
        mem: sem.mem(&out.state).clone(),
        trace: out.trace,
        terminated: out.terminated,
        next,
    })
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Program::Structured(c) => write!(f, "{c}"),
            Program::Cfg(g) => write!(f, "{g}"),
        }
    }
}
