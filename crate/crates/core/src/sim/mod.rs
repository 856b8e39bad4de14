//! Runtime checking of simulation certificates.
//!
//! A certificate relates source and target states and explains each
//! target observation as the image of a segment of source observations.
//! The checkers drive both programs from every input of a specification
//! and report the first place where the diagram breaks. Injectivity of the
//! observation transformer is checked separately over every application
//! the runs performed.

mod certs;

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use rayon::prelude::*;
use serde::Serialize;

use crate::ct::CtError;
use crate::input::{ConcreteInput, InputSpec};
use crate::obs::{format_trace, Observation, Trace};
use crate::semantics::Semantics;
use crate::store::{Memory, RegisterMap};

pub use certs::{
    certify, DaeCertificate, DbeCertificate, ExprSubstCertificate, IfConvertCertificate,
    LoopRotateCertificate, StructureCertificate, UnspillCertificate,
};

pub type State<S> = <S as Semantics>::State;
pub type Point<S> = <S as Semantics>::Point;

/// A simulation diagram between a source and a target program.
pub trait SimulationCertificate: Sync {
    type Source: Semantics + Sync;
    type Target: Semantics + Sync;

    fn source(&self) -> Self::Source;
    fn target(&self) -> Self::Target;
    /// Initial states of both programs for one initial register map and memory.
    fn initial(&self, regs: &RegisterMap, mem: &Memory) -> (State<Self::Source>, State<Self::Target>);
    fn related(&self, s: &State<Self::Source>, t: &State<Self::Target>) -> bool;
    /// Target observation produced by a segment of source observations
    /// taken from program point `p`, if any.
    fn transform(&self, p: &Point<Self::Source>, segment: &[Observation]) -> Option<Observation>;
    /// Number of source steps matching one target step. At least 1.
    fn nsteps(&self, _p: &Point<Self::Source>) -> usize {
        1
    }
    /// Source observations still to come once the target has finished.
    fn suffix(&self, _p: &Point<Self::Source>) -> Trace {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagramKind {
    Lockstep,
    Relaxed,
}

impl fmt::Display for DiagramKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiagramKind::Lockstep => "lock-step",
            DiagramKind::Relaxed => "relaxed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiagramFailure {
    pub input: String,
    /// Index of the target step at which the diagram broke.
    pub step: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimReport {
    pub kind: DiagramKind,
    pub inputs: usize,
    /// Target steps checked over all inputs.
    pub steps: usize,
    /// Runs that hit the fuel budget before finishing.
    pub cut: usize,
    pub failure: Option<DiagramFailure>,
}

impl SimReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

impl fmt::Display for SimReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.failure {
            None => write!(
                f,
                "{} diagram holds on {} inputs ({} target steps)",
                self.kind, self.inputs, self.steps
            ),
            Some(d) => write!(
                f,
                "{} diagram FAILED on input {} at step {}: {}",
                self.kind, d.input, d.step, d.reason
            ),
        }
    }
}

/// One use of the observation transformer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Application<P> {
    pub point: P,
    pub segment: Trace,
    pub output: Observation,
}

/// Collected transformer applications, deduplicated.
#[derive(Debug, Clone)]
pub struct InjectivityScan<P: Eq + Hash> {
    seen: HashMap<(P, Observation), Vec<Trace>>,
    samples: usize,
}

impl<P: Eq + Hash> Default for InjectivityScan<P> {
    fn default() -> Self {
        InjectivityScan {
            seen: HashMap::new(),
            samples: 0,
        }
    }
}

impl<P: Eq + Hash + Clone + fmt::Debug> InjectivityScan<P> {
    pub fn record(&mut self, app: Application<P>) {
        self.samples += 1;
        let segs = self.seen.entry((app.point, app.output)).or_default();
        if !segs.contains(&app.segment) {
            segs.push(app.segment);
        }
    }

    pub fn extend(&mut self, apps: impl IntoIterator<Item = Application<P>>) {
        for a in apps {
            self.record(a);
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Looks for two source segments mapped to the same target
    /// observation at the same program point.
    pub fn check(&self) -> InjectivityReport {
        let mut collisions: Vec<Collision> = self
            .seen
            .iter()
            .filter(|(_, segs)| segs.len() > 1)
            .map(|((p, o), segs)| {
                let mut segs = segs.clone();
                segs.sort();
                Collision {
                    point: format!("{p:?}"),
                    target: *o,
                    first: segs[0].clone(),
                    second: segs[1].clone(),
                }
            })
            .collect();
        collisions.sort_by(|a, b| (&a.point, a.target).cmp(&(&b.point, b.target)));
        InjectivityReport {
            samples: self.samples,
            points: self.seen.len(),
            collision: collisions.into_iter().next(),
        }
    }
}

/// Checks a batch of applications for injectivity.
pub fn check_injectivity<P: Eq + Hash + Clone + fmt::Debug>(
    apps: impl IntoIterator<Item = Application<P>>,
) -> InjectivityReport {
    let mut scan = InjectivityScan::default();
    scan.extend(apps);
    scan.check()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Collision {
    pub point: String,
    pub target: Observation,
    pub first: Trace,
    pub second: Trace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InjectivityReport {
    pub samples: usize,
    /// Distinct (point, target observation) keys.
    pub points: usize,
    pub collision: Option<Collision>,
}

impl InjectivityReport {
    pub fn passed(&self) -> bool {
        self.collision.is_none()
    }
}

impl fmt::Display for InjectivityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.collision {
            None => write!(f, "no collision over {} samples", self.samples),
            Some(c) => write!(
                f,
                "COLLISION at {}: {} and {} both map to {}",
                c.point,
                format_trace(&c.first),
                format_trace(&c.second),
                c.target
            ),
        }
    }
}

/// Diagram and injectivity results for one certified pass application.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CertificateReport {
    pub simulation: SimReport,
    pub injectivity: InjectivityReport,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.simulation.passed() && self.injectivity.passed()
    }
}

/// Result of driving a certificate over a specification.
#[derive(Debug, Clone)]
pub struct SimOutcome<P> {
    pub report: SimReport,
    pub applications: Vec<Application<P>>,
}

struct RunResult<P> {
    steps: usize,
    cut: bool,
    failure: Option<(usize, String)>,
    applications: Vec<Application<P>>,
}

fn fail<P>(steps: usize, apps: Vec<Application<P>>, reason: String) -> RunResult<P> {
    RunResult {
        steps,
        cut: false,
        failure: Some((steps, reason)),
        applications: apps,
    }
}

fn lockstep_one<C: SimulationCertificate>(
    cert: &C,
    regs: &RegisterMap,
    mem: &Memory,
    fuel: usize,
) -> RunResult<Point<C::Source>> {
    let (src, tgt) = (cert.source(), cert.target());
    let (mut s, mut t) = cert.initial(regs, mem);
    let mut apps = Vec::new();
    if !cert.related(&s, &t) {
        return fail(0, apps, "initial states are not related".into());
    }
    let mut steps = 0;
    loop {
        match (src.is_final(&s), tgt.is_final(&t)) {
            (true, true) => break,
            (true, false) => return fail(steps, apps, "source finished before target".into()),
            (false, true) => return fail(steps, apps, "target finished before source".into()),
            (false, false) => {}
        }
        if steps == fuel {
            return RunResult {
                steps,
                cut: true,
                failure: None,
                applications: apps,
            };
        }
        let p = src.point(&s);
        let os = match src.step_mut(&mut s) {
            Ok(o) => o,
            Err(e) => return fail(steps, apps, format!("source step failed: {e}")),
        };
        let ot = match tgt.step_mut(&mut t) {
            Ok(o) => o,
            Err(e) => return fail(steps, apps, format!("target step failed: {e}")),
        };
        let expected = cert.transform(&p, &[os]);
        if expected != Some(ot) {
            return fail(
                steps,
                apps,
                format!(
                    "target emitted {ot} but the transformer maps {os} to {}",
                    expected.map_or("nothing".to_string(), |o| o.to_string())
                ),
            );
        }
        apps.push(Application {
            point: p,
            segment: vec![os],
            output: ot,
        });
        steps += 1;
        if !cert.related(&s, &t) {
            return fail(steps, apps, "states are not related after the step".into());
        }
    }
    RunResult {
        steps,
        cut: false,
        failure: None,
        applications: apps,
    }
}

fn relaxed_one<C: SimulationCertificate>(
    cert: &C,
    regs: &RegisterMap,
    mem: &Memory,
    fuel: usize,
) -> RunResult<Point<C::Source>> {
    let (src, tgt) = (cert.source(), cert.target());
    let (mut s, mut t) = cert.initial(regs, mem);
    let mut apps = Vec::new();
    if !cert.related(&s, &t) {
        return fail(0, apps, "initial states are not related".into());
    }
    let mut steps = 0;
    let mut source_steps = 0;
    while !tgt.is_final(&t) {
        if steps == fuel || source_steps >= fuel.saturating_mul(4) {
            return RunResult {
                steps,
                cut: true,
                failure: None,
                applications: apps,
            };
        }
        let p = src.point(&s);
        let n = cert.nsteps(&p);
        if n == 0 {
            return fail(steps, apps, "certificate asks for zero source steps".into());
        }
        let mut segment = Vec::with_capacity(n);
        for _ in 0..n {
            if src.is_final(&s) {
                return fail(
                    steps,
                    apps,
                    format!("source finished after {} of {n} steps", segment.len()),
                );
            }
            match src.step_mut(&mut s) {
                Ok(o) => segment.push(o),
                Err(e) => return fail(steps, apps, format!("source step failed: {e}")),
            }
        }
        source_steps += n;
        let ot = match tgt.step_mut(&mut t) {
            Ok(o) => o,
            Err(e) => return fail(steps, apps, format!("target step failed: {e}")),
        };
        let expected = cert.transform(&p, &segment);
        if expected != Some(ot) {
            return fail(
                steps,
                apps,
                format!(
                    "target emitted {ot} but the transformer maps {} to {}",
                    format_trace(&segment),
                    expected.map_or("nothing".to_string(), |o| o.to_string())
                ),
            );
        }
        apps.push(Application {
            point: p,
            segment,
            output: ot,
        });
        steps += 1;
        if !cert.related(&s, &t) {
            return fail(steps, apps, "states are not related after the step".into());
        }
    }
    let p = src.point(&s);
    let suffix = cert.suffix(&p);
    let mut rest = Vec::with_capacity(suffix.len());
    while rest.len() < suffix.len() && !src.is_final(&s) {
        match src.step_mut(&mut s) {
            Ok(o) => rest.push(o),
            Err(e) => return fail(steps, apps, format!("source step failed: {e}")),
        }
    }
    if rest != suffix || !src.is_final(&s) {
        return fail(
            steps,
            apps,
            format!(
                "target finished; source continued with {}{} but the suffix is {}",
                format_trace(&rest),
                if src.is_final(&s) { "" } else { " ..." },
                format_trace(&suffix)
            ),
        );
    }
    if !cert.related(&s, &t) {
        return fail(steps, apps, "final states are not related".into());
    }
    RunResult {
        steps,
        cut: false,
        failure: None,
        applications: apps,
    }
}

fn drive<C, F>(
    cert: &C,
    kind: DiagramKind,
    spec: &InputSpec,
    fuel: usize,
    one: F,
) -> Result<SimOutcome<Point<C::Source>>, CtError>
where
    C: SimulationCertificate,
    F: Fn(&C, &RegisterMap, &Memory, usize) -> RunResult<Point<C::Source>> + Sync,
    Point<C::Source>: Send,
{
    let inputs: Vec<ConcreteInput> = spec.enumerate()?;
    let results: Vec<RunResult<Point<C::Source>>> = inputs
        .par_iter()
        .map(|i| {
            let (regs, mem) = spec.initial_state(i);
            one(cert, &regs, &mem, fuel)
        })
        .collect();
    let mut report = SimReport {
        kind,
        inputs: inputs.len(),
        steps: 0,
        cut: 0,
        failure: None,
    };
    let mut applications = Vec::new();
    for (i, r) in inputs.iter().zip(results) {
        report.steps += r.steps;
        report.cut += usize::from(r.cut);
        applications.extend(r.applications);
        if let Some((step, reason)) = r.failure {
            report.failure = Some(DiagramFailure {
                input: i.to_string(),
                step,
                reason,
            });
            break;
        }
    }
    Ok(SimOutcome {
        report,
        applications,
    })
}

/// Checks a lock-step diagram: one source step per target step.
pub fn check_lockstep<C>(cert: &C, spec: &InputSpec, fuel: usize) -> Result<SimOutcome<Point<C::Source>>, CtError>
where
    C: SimulationCertificate,
    Point<C::Source>: Send,
{
    drive(cert, DiagramKind::Lockstep, spec, fuel, lockstep_one::<C>)
}

/// Checks a relaxed diagram with step counts and final suffixes.
pub fn check_relaxed<C>(cert: &C, spec: &InputSpec, fuel: usize) -> Result<SimOutcome<Point<C::Source>>, CtError>
where
    C: SimulationCertificate,
    Point<C::Source>: Send,
{
    drive(cert, DiagramKind::Relaxed, spec, fuel, relaxed_one::<C>)
}

/// Runs a diagram check and scans its applications for collisions.
pub fn check_certificate<C>(
    cert: &C,
    kind: DiagramKind,
    spec: &InputSpec,
    fuel: usize,
) -> Result<CertificateReport, CtError>
where
    C: SimulationCertificate,
    Point<C::Source>: Send + Clone + fmt::Debug,
{
    let out = match kind {
        DiagramKind::Lockstep => check_lockstep(cert, spec, fuel)?,
        DiagramKind::Relaxed => check_relaxed(cert, spec, fuel)?,
    };
    Ok(CertificateReport {
        injectivity: check_injectivity(out.applications),
        simulation: out.report,
    })
}
