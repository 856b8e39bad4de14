//! Leakage observations.

use std::fmt;

use serde::{Deserialize, Serialize};

/// What one execution step leaks to a cache-observing attacker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observation {
    /// Assignments and `nop`.
    #[serde(rename = "none")]
    Silent,
    /// Address of a load or store.
    Addr(i64),
    /// Outcome of a branch condition.
    Branch(bool),
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observation::Silent => f.write_str("none"),
            Observation::Addr(a) => write!(f, "addr({a})"),
            Observation::Branch(b) => write!(f, "branch({b})"),
        }
    }
}

/// One observation per step taken.
pub type Trace = Vec<Observation>;

pub fn format_trace(trace: &[Observation]) -> String {
    let parts: Vec<String> = trace.iter().map(Observation::to_string).collect();
    format!("[{}]", parts.join(", "))
}
