//! Brute-force constant-time checking and transparency verdicts.
//!
//! A program is constant-time for an input specification when every two
//! inputs agreeing on their public entries produce the same leakage
//! trace. Runs are cut after a fuel budget; two runs that agree up to the
//! budget give a budget-limited verdict instead of a guess.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::input::{ConcreteInput, InputSpec, SpecError};
use crate::obs::Observation;
use crate::passes::{apply_pass, PassError, PassName};
use crate::semantics::{Execution, Program, RunError};
use crate::sim::{certify, CertificateReport};

pub const DEFAULT_FUEL: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CtStatus {
    #[serde(rename = "CT")]
    Ct,
    #[serde(rename = "NotCT")]
    NotCt,
    #[serde(rename = "BudgetLimited")]
    BudgetLimited,
}

impl fmt::Display for CtStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CtStatus::Ct => "CT",
            CtStatus::NotCt => "NotCT",
            CtStatus::BudgetLimited => "BudgetLimited",
        })
    }
}

/// Two related inputs whose traces differ. `None` means the trace has
/// already ended at `index`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    #[serde(serialize_with = "display")]
    pub first: ConcreteInput,
    #[serde(serialize_with = "display")]
    pub second: ConcreteInput,
    pub index: usize,
    pub left: Option<Observation>,
    pub right: Option<Observation>,
}

fn display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn show(o: &Option<Observation>) -> String {
    o.map(|o| o.to_string()).unwrap_or_else(|| "end".to_string())
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "inputs {} and {} differ at step {}: {} vs {}",
            self.first,
            self.second,
            self.index,
            show(&self.left),
            show(&self.right)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CtVerdict {
    pub status: CtStatus,
    pub witness: Option<Witness>,
    /// Number of enumerated inputs.
    pub inputs: usize,
}

impl CtVerdict {
    pub fn is_ct(&self) -> bool {
        self.status == CtStatus::Ct
    }

    pub fn is_not_ct(&self) -> bool {
        self.status == CtStatus::NotCt
    }
}

impl fmt::Display for CtVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.status)?;
        if let Some(w) = &self.witness {
            write!(f, " ({w})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CtError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("run on input {input} failed: {error}")]
    Run { input: String, error: RunError },
    #[error(transparent)]
    Pass(#[from] PassError),
}

/// How two maximal runs compare.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceComparison {
    Equal,
    Differ {
        index: usize,
        left: Option<Observation>,
        right: Option<Observation>,
    },
    /// Both runs were cut with equal traces; nothing more can be said.
    BudgetLimited,
}

fn obs_at(e: &Execution, i: usize) -> Option<Observation> {
    match e.trace.get(i) {
        Some(o) => Some(*o),
        None if i == e.trace.len() => e.next,
        None => None,
    }
}

/// Compares two runs. A run cut by fuel is not final, so it would emit
/// its `next` observation; that settles comparisons with a shorter
/// terminated run.
pub fn compare_executions(a: &Execution, b: &Execution) -> TraceComparison {
    let common = a.trace.len().min(b.trace.len());
    if let Some(i) = (0..common).find(|&i| a.trace[i] != b.trace[i]) {
        return TraceComparison::Differ {
            index: i,
            left: Some(a.trace[i]),
            right: Some(b.trace[i]),
        };
    }
    if a.trace.len() == b.trace.len() && a.terminated && b.terminated {
        return TraceComparison::Equal;
    }
    if !a.terminated && !b.terminated && a.trace.len() == b.trace.len() {
        return TraceComparison::BudgetLimited;
    }
    let (left, right) = (obs_at(a, common), obs_at(b, common));
    if left == right {
        // Both cut, at different lengths: equal as far as we can see.
        TraceComparison::BudgetLimited
    } else {
        TraceComparison::Differ {
            index: common,
            left,
            right,
        }
    }
}

/// Runs `prog` on every input of `spec`, in enumeration order.
pub fn run_all(
    prog: &Program,
    spec: &InputSpec,
    fuel: usize,
) -> Result<Vec<(ConcreteInput, Execution)>, CtError> {
    let inputs = spec.enumerate()?;
    inputs
        .into_par_iter()
        .map(|i| match prog.behavior(spec, &i, fuel) {
            Ok(e) => Ok((i, e)),
            Err(error) => Err(CtError::Run {
                input: i.to_string(),
                error,
            }),
        })
        .collect()
}

/// Decides φ-CT by enumerating the input domain.
///
/// The witness is the lexicographically first related pair (in
/// enumeration order) with differing traces, reported at the first index
/// where they differ.
pub fn check_ct(prog: &Program, spec: &InputSpec, fuel: usize) -> Result<CtVerdict, CtError> {
    let runs = run_all(prog, spec, fuel)?;
    Ok(verdict_from_runs(spec, &runs))
}

pub fn verdict_from_runs(spec: &InputSpec, runs: &[(ConcreteInput, Execution)]) -> CtVerdict {
    // Related inputs are exactly those with the same public projection.
    let mut classes: BTreeMap<Vec<Option<i64>>, Vec<usize>> = BTreeMap::new();
    for (idx, (i, _)) in runs.iter().enumerate() {
        classes.entry(spec.public_projection(i)).or_default().push(idx);
    }
    let mut best: Option<(usize, usize, TraceComparison)> = None;
    let mut budget = false;
    for members in classes.values() {
        let first = members[0];
        for &j in &members[1..] {
            match compare_executions(&runs[first].1, &runs[j].1) {
                TraceComparison::Equal => {}
                TraceComparison::BudgetLimited => budget = true,
                d @ TraceComparison::Differ { .. } => {
                    if best.as_ref().is_none_or(|(bi, bj, _)| (first, j) < (*bi, *bj)) {
                        best = Some((first, j, d));
                    }
                    break;
                }
            }
        }
    }
    let inputs = runs.len();
    match best {
        Some((i, j, TraceComparison::Differ { index, left, right })) => CtVerdict {
            status: CtStatus::NotCt,
            witness: Some(Witness {
                first: runs[i].0.clone(),
                second: runs[j].0.clone(),
                index,
                left,
                right,
            }),
            inputs,
        },
        _ if budget => CtVerdict {
            status: CtStatus::BudgetLimited,
            witness: None,
            inputs,
        },
        _ => CtVerdict {
            status: CtStatus::Ct,
            witness: None,
            inputs,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyStatus {
    Ok,
    Fail,
    /// A budget-limited verdict on either side.
    Inconclusive,
}

impl fmt::Display for PropertyStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PropertyStatus::Ok => "OK",
            PropertyStatus::Fail => "FAIL",
            PropertyStatus::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyCheck {
    pub status: PropertyStatus,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransparencyReport {
    pub program: String,
    pub pass: PassName,
    pub source: CtVerdict,
    pub target: CtVerdict,
    pub preservation: PropertyCheck,
    pub reflection: PropertyCheck,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
}

impl TransparencyReport {
    pub fn is_transparent(&self) -> bool {
        self.preservation.status == PropertyStatus::Ok && self.reflection.status == PropertyStatus::Ok
    }

    /// Any definite failure, including a failed certificate check.
    pub fn has_failure(&self) -> bool {
        self.preservation.status == PropertyStatus::Fail
            || self.reflection.status == PropertyStatus::Fail
            || self.certificate.as_ref().is_some_and(|c| !c.passed())
    }

    /// Line-oriented rendering.
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("program: {}", self.program),
            format!("pass: {}", self.pass),
            format!("source: {}", self.source),
            format!("target: {}", self.target),
        ];
        for (name, p) in [("preservation", &self.preservation), ("reflection", &self.reflection)] {
            match &p.witness {
                Some(w) => lines.push(format!("{name}: {} ({w})", p.status)),
                None => lines.push(format!("{name}: {}", p.status)),
            }
        }
        if let Some(c) = &self.certificate {
            lines.push(format!("simulation: {}", c.simulation));
            lines.push(format!("injectivity: {}", c.injectivity));
        }
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

/// Classifies a pair of verdicts.
pub fn classify(source: &CtVerdict, target: &CtVerdict) -> (PropertyCheck, PropertyCheck) {
    let limited = source.status == CtStatus::BudgetLimited || target.status == CtStatus::BudgetLimited;
    let check = |fail: bool, witness: &Option<Witness>| {
        if limited {
            PropertyCheck {
                status: PropertyStatus::Inconclusive,
                witness: None,
            }
        } else if fail {
            PropertyCheck {
                status: PropertyStatus::Fail,
                witness: witness.clone(),
            }
        } else {
            PropertyCheck {
                status: PropertyStatus::Ok,
                witness: None,
            }
        }
    };
    let preservation = check(source.is_ct() && target.is_not_ct(), &target.witness);
    let reflection = check(source.is_not_ct() && target.is_ct(), &source.witness);
    (preservation, reflection)
}

/// Applies `pass` and compares the CT verdicts of source and target over
/// the same specification. Certified passes also get their simulation
/// certificate checked.
pub fn check_transparency(
    name: &str,
    prog: &Program,
    pass: PassName,
    spec: &InputSpec,
    fuel: usize,
) -> Result<TransparencyReport, CtError> {
    let target = apply_pass(pass, prog)?;
    let source_v = check_ct(prog, spec, fuel)?;
    let target_v = check_ct(&target, spec, fuel)?;
    let (preservation, reflection) = classify(&source_v, &target_v);
    let certificate = if pass.is_certified() {
        Some(certify(pass, prog, spec, fuel)?)
    } else {
        None
    };
    Ok(TransparencyReport {
        program: name.to_string(),
        pass,
        source: source_v,
        target: target_v,
        preservation,
        reflection,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_structured;

    fn prog(s: &str) -> Program {
        Program::Structured(parse_structured(s).unwrap())
    }

    fn spec(s: &str) -> InputSpec {
        InputSpec::parse(s).unwrap()
    }

    #[test]
    fn nil_is_ct() {
        let v = check_ct(&prog("skip;"), &spec("input s secret 0..3"), 100).unwrap();
        assert_eq!(v.status, CtStatus::Ct);
        assert_eq!(v.inputs, 4);
    }

    #[test]
    fn secret_branch_is_not_ct() {
        let v = check_ct(
            &prog("if (s == 1) { c := 1665; } else { c := 0; }"),
            &spec("input p public 0..1\ninput s secret 0..1"),
            100,
        )
        .unwrap();
        assert_eq!(v.status, CtStatus::NotCt);
        let w = v.witness.unwrap();
        assert_eq!(w.first.to_string(), "{p=0, s=0}");
        assert_eq!(w.second.to_string(), "{p=0, s=1}");
        assert_eq!(w.index, 0);
        assert_eq!((w.left, w.right), (Some(Observation::Branch(false)), Some(Observation::Branch(true))));
    }

    #[test]
    fn public_dependence_is_fine() {
        let v = check_ct(
            &prog("x := load[p]; if (p == 1) { x := s; }"),
            &spec("input p public 0..2\ninput s secret 0..5"),
            100,
        )
        .unwrap();
        assert!(v.is_ct());
    }

    #[test]
    fn length_difference_is_a_divergence() {
        let v = check_ct(
            &prog("i := 0; while (i < s) { i := i + 1; }"),
            &spec("input s secret 0..2"),
            100,
        )
        .unwrap();
        assert!(v.is_not_ct());
        let w = v.witness.unwrap();
        assert_eq!(w.index, 1);
        assert_eq!(w.left, Some(Observation::Branch(false)));
        assert_eq!(w.right, Some(Observation::Branch(true)));
    }

    #[test]
    fn equal_divergent_runs_are_budget_limited() {
        let v = check_ct(&prog("while (true) { x := s; }"), &spec("input s secret 0..1"), 50).unwrap();
        assert_eq!(v.status, CtStatus::BudgetLimited);
        let alone = check_ct(&prog("while (true) { x := 1; }"), &spec("input p public 0..1"), 50).unwrap();
        assert_eq!(alone.status, CtStatus::Ct);
    }

    #[test]
    fn cut_run_against_finished_run_differs() {
        let v = check_ct(
            &prog("while (s == 1) { x := 1; }"),
            &spec("input s secret 0..1"),
            10,
        )
        .unwrap();
        assert!(v.is_not_ct());
    }

    #[test]
    fn classification() {
        let ct = CtVerdict { status: CtStatus::Ct, witness: None, inputs: 1 };
        let not = CtVerdict { status: CtStatus::NotCt, witness: None, inputs: 1 };
        let lim = CtVerdict { status: CtStatus::BudgetLimited, witness: None, inputs: 1 };
        assert_eq!(classify(&not, &ct).1.status, PropertyStatus::Fail);
        assert_eq!(classify(&not, &ct).0.status, PropertyStatus::Ok);
        assert_eq!(classify(&ct, &not).0.status, PropertyStatus::Fail);
        assert_eq!(classify(&ct, &ct).1.status, PropertyStatus::Ok);
        assert_eq!(classify(&not, &not).1.status, PropertyStatus::Ok);
        assert_eq!(classify(&lim, &ct).1.status, PropertyStatus::Inconclusive);
    }
}
