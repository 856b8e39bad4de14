//! Constant-time transparency of compiler passes.
//!
//! Two small languages (a structured while-language and a CFG language)
//! share one leakage model: assignments leak nothing, memory accesses leak
//! their address and branches leak their condition. On top of them sit a
//! brute-force constant-time checker, the passes under study, simulation
//! certificates and a random program generator.

pub mod cfg;
pub mod corpus;
pub mod ct;
pub mod expr;
pub mod gen;
pub mod harness;
pub mod input;
pub mod obs;
pub mod passes;
pub mod semantics;
pub mod sim;
pub mod store;
pub mod structured;
pub mod syntax;

pub use cfg::{CfgNode, CfgProgram, Label};
pub use expr::{Expr, OpKind, Value, Var};
pub use input::{ConcreteInput, InputKey, InputSpec, Visibility};
pub use obs::{Observation, Trace};
pub use semantics::{Language, Program};
pub use store::{Memory, RegisterMap};
pub use structured::{AtomicCmd, Cmd, Stmt};
