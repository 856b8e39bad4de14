//! Certificates for the individual passes.

use std::collections::{BTreeSet, HashMap};

use crate::cfg::{CfgProgram, CfgSemantics, CfgState, Label};
use crate::ct::CtError;
use crate::expr::{Value, Var};
use crate::input::InputSpec;
use crate::obs::{Observation, Trace};
use crate::passes::dae::{dead_assignment_eliminate, is_dead_assignment};
use crate::passes::dbe::{dead_branch, dead_branch_eliminate};
use crate::passes::liveness::liveness_analyze;
use crate::passes::rotate::{rotate_all, Rotation};
use crate::passes::structural::{annotate_regions, structured_points};
use crate::passes::subst::{annotate_substitutions, expr_substitute, substitutions_hold, SubstStrategy};
use crate::passes::unspill::{slot_offset, unspill, unspill_with, SpillSlot};
use crate::passes::{if_convert, PassError, PassName, STACK_POINTER};
use crate::semantics::Program;
use crate::store::{Memory, RegisterMap};
use crate::structured::{AtomicCmd, Cmd, Stmt, StructState, StructuredSemantics};

use super::{check_certificate, CertificateReport, DiagramKind, SimulationCertificate};

fn same_store(a: &StructState, b: &StructState) -> bool {
    a.regs == b.regs && a.mem == b.mem
}

/// Expression substitution (constant folding, untiling): lock-step, the
/// identity transformer, and annotations that hold whenever reached.
#[derive(Debug, Clone)]
pub struct ExprSubstCertificate {
    pub source: Cmd,
    pub target: Cmd,
}

impl ExprSubstCertificate {
    /// `source` carries the substitution annotations.
    pub fn new(source: Cmd) -> Self {
        let target = expr_substitute(&source);
        ExprSubstCertificate { source, target }
    }
}

impl SimulationCertificate for ExprSubstCertificate {
    type Source = StructuredSemantics;
    type Target = StructuredSemantics;

    fn source(&self) -> StructuredSemantics {
        StructuredSemantics
    }

    fn target(&self) -> StructuredSemantics {
        StructuredSemantics
    }

    fn initial(&self, regs: &RegisterMap, mem: &Memory) -> (StructState, StructState) {
        (
            StructState::new(self.source.clone(), regs.clone(), mem.clone()),
            StructState::new(self.target.clone(), regs.clone(), mem.clone()),
        )
    }

    fn related(&self, s: &StructState, t: &StructState) -> bool {
        same_store(s, t)
            && s.code.head().is_none_or(|n| substitutions_hold(n, &s.regs))
            && t.code == expr_substitute(&s.code)
    }

    fn transform(&self, _p: &Cmd, segment: &[Observation]) -> Option<Observation> {
        match segment {
            [o] => Some(*o),
            _ => None,
        }
    }
}

/// Dead branch elimination: the target skips the branch observations of
/// conditionals on literals.
#[derive(Debug, Clone)]
pub struct DbeCertificate {
    pub source: Cmd,
    pub target: Cmd,
}

impl DbeCertificate {
    pub fn new(source: Cmd) -> Self {
        let target = dead_branch_eliminate(&source);
        DbeCertificate { source, target }
    }
}

/// Unfolds a leading dead conditional: its outcome and the code after it.
fn unfold_dead(c: &Cmd) -> Option<(bool, Cmd)> {
    let head = c.head()?;
    let taken = dead_branch(head)?;
    let b = matches!(&head.stmt, Stmt::If(e, ..) if e.as_bool_const() == Some(true));
    Some((b, taken.clone().then(c.tail())))
}

impl SimulationCertificate for DbeCertificate {
    type Source = StructuredSemantics;
    type Target = StructuredSemantics;

    fn source(&self) -> StructuredSemantics {
        StructuredSemantics
    }

    fn target(&self) -> StructuredSemantics {
        StructuredSemantics
    }

    fn initial(&self, regs: &RegisterMap, mem: &Memory) -> (StructState, StructState) {
        (
            StructState::new(self.source.clone(), regs.clone(), mem.clone()),
            StructState::new(self.target.clone(), regs.clone(), mem.clone()),
        )
    }

    fn related(&self, s: &StructState, t: &StructState) -> bool {
        same_store(s, t) && t.code == dead_branch_eliminate(&s.code)
    }

    fn transform(&self, p: &Cmd, segment: &[Observation]) -> Option<Observation> {
        match unfold_dead(p) {
            Some((b, rest)) => match segment.split_first() {
                Some((Observation::Branch(o), tail)) if *o == b => self.transform(&rest, tail),
                _ => None,
            },
            None => match segment {
                [o] => Some(*o),
                _ => None,
            },
        }
    }

    fn nsteps(&self, p: &Cmd) -> usize {
        match unfold_dead(p) {
            Some((_, rest)) => 1 + self.nsteps(&rest),
            None => 1,
        }
    }

    fn suffix(&self, p: &Cmd) -> Trace {
        let mut out = Vec::new();
        let mut c = p.clone();
        while let Some((b, rest)) = unfold_dead(&c) {
            out.push(Observation::Branch(b));
            c = rest;
        }
        out
    }
}

/// Dead assignment elimination: the target skips the silent steps of
/// removed assignments; registers agree on what is live.
#[derive(Debug, Clone)]
pub struct DaeCertificate {
    /// Source with liveness annotations.
    pub source: Cmd,
    pub target: Cmd,
    pub live_at_exit: BTreeSet<Var>,
}

impl DaeCertificate {
    /// Analyses `source` with every register live at exit.
    pub fn new(source: &Cmd) -> Self {
        let annotated = liveness_analyze(source);
        let target = dead_assignment_eliminate(&annotated).strip_annotations();
        DaeCertificate {
            source: annotated,
            target,
            live_at_exit: source.vars(),
        }
    }

    fn leading_dead(c: &Cmd) -> usize {
        c.nodes().iter().take_while(|n| is_dead_assignment(n)).count()
    }
}

impl SimulationCertificate for DaeCertificate {
    type Source = StructuredSemantics;
    type Target = StructuredSemantics;

    fn source(&self) -> StructuredSemantics {
        StructuredSemantics
    }

    fn target(&self) -> StructuredSemantics {
        StructuredSemantics
    }

    fn initial(&self, regs: &RegisterMap, mem: &Memory) -> (StructState, StructState) {
        (
            StructState::new(self.source.clone(), regs.clone(), mem.clone()),
            StructState::new(self.target.clone(), regs.clone(), mem.clone()),
        )
    }

    fn related(&self, s: &StructState, t: &StructState) -> bool {
        let live = match s.code.head() {
            None => &self.live_at_exit,
            Some(n) => match &n.ann.liveness {
                Some(l) => &l.live_in,
                None => return false,
            },
        };
        s.mem == t.mem
            && s.regs.agrees_on(&t.regs, |x| live.contains(x))
            && t.code == dead_assignment_eliminate(&s.code)
    }

    fn transform(&self, p: &Cmd, segment: &[Observation]) -> Option<Observation> {
        let k = Self::leading_dead(p);
        match segment.split_at_checked(k) {
            Some((skipped, [o])) if skipped.iter().all(|o| *o == Observation::Silent) => Some(*o),
            _ => None,
        }
    }

    fn nsteps(&self, p: &Cmd) -> usize {
        Self::leading_dead(p) + 1
    }

    fn suffix(&self, p: &Cmd) -> Trace {
        vec![Observation::Silent; Self::leading_dead(p)]
    }
}

/// Unspilling: slot accesses become silent register moves; the slot
/// contents live in the fresh registers.
#[derive(Debug, Clone)]
pub struct UnspillCertificate {
    pub source: Cmd,
    pub target: Cmd,
    pub sp: Var,
    pub slots: Vec<SpillSlot>,
}

impl UnspillCertificate {
    pub fn new(source: Cmd, sp: Var) -> Result<Self, PassError> {
        let (target, slots) = unspill(&source, &sp)?;
        Ok(UnspillCertificate {
            source,
            target,
            sp,
            slots,
        })
    }

    fn is_slot_access(&self, c: &Cmd) -> bool {
        match c.head().map(|n| &n.stmt) {
            Some(Stmt::Atomic(AtomicCmd::Load(_, e) | AtomicCmd::Store(e, _))) => {
                slot_offset(e, &self.sp).is_some_and(|o| self.slots.iter().any(|s| s.offset == o))
            }
            _ => false,
        }
    }
}

impl SimulationCertificate for UnspillCertificate {
    type Source = StructuredSemantics;
    type Target = StructuredSemantics;

    fn source(&self) -> StructuredSemantics {
        StructuredSemantics
    }

    fn target(&self) -> StructuredSemantics {
        StructuredSemantics
    }

    fn initial(&self, regs: &RegisterMap, mem: &Memory) -> (StructState, StructState) {
        (
            StructState::new(self.source.clone(), regs.clone(), mem.clone()),
            StructState::new(self.target.clone(), regs.clone(), mem.clone()),
        )
    }

    fn related(&self, s: &StructState, t: &StructState) -> bool {
        let fresh: BTreeSet<&Var> = self.slots.iter().map(|s| &s.var).collect();
        if !s.regs.agrees_on(&t.regs, |x| !fresh.contains(x)) {
            return false;
        }
        let addrs: Vec<(i64, &Var)> = if self.slots.is_empty() {
            Vec::new()
        } else {
            let Value::Int(base) = s.regs.get(&self.sp) else {
                return false;
            };
            self.slots
                .iter()
                .map(|slot| (base.wrapping_add(slot.offset), &slot.var))
                .collect()
        };
        addrs.iter().all(|(a, y)| s.mem.get(*a) == t.regs.get(y))
            && s.mem.agrees_on(&t.mem, |a| !addrs.iter().any(|(b, _)| *b == a))
            && t.code == unspill_with(&s.code, &self.sp, &self.slots)
    }

    fn transform(&self, p: &Cmd, segment: &[Observation]) -> Option<Observation> {
        match segment {
            [Observation::Addr(_)] if self.is_slot_access(p) => Some(Observation::Silent),
            [o] => Some(*o),
            _ => None,
        }
    }
}

/// Structural analysis: a CFG state at label `l` corresponds to the
/// structured state running the code recovered from `l`.
#[derive(Debug, Clone)]
pub struct StructureCertificate<'g> {
    pub source: &'g CfgProgram,
    pub points: HashMap<Label, Cmd>,
}

impl<'g> StructureCertificate<'g> {
    pub fn new(source: &'g CfgProgram) -> Result<Self, PassError> {
        let regions = annotate_regions(source)?;
        let points = structured_points(source, &regions)?;
        Ok(StructureCertificate { source, points })
    }

    pub fn target_program(&self) -> &Cmd {
        &self.points[self.source.entry()]
    }
}

impl<'g> SimulationCertificate for StructureCertificate<'g> {
    type Source = CfgSemantics<'g>;
    type Target = StructuredSemantics;

    fn source(&self) -> CfgSemantics<'g> {
        CfgSemantics::new(self.source)
    }

    fn target(&self) -> StructuredSemantics {
        StructuredSemantics
    }

    fn initial(&self, regs: &RegisterMap, mem: &Memory) -> (CfgState, StructState) {
        (
            CfgSemantics::new(self.source).initial(regs.clone(), mem.clone()),
            StructState::new(self.target_program().clone(), regs.clone(), mem.clone()),
        )
    }

    fn related(&self, s: &CfgState, t: &StructState) -> bool {
        s.regs == t.regs && s.mem == t.mem && self.points.get(&s.label) == Some(&t.code)
    }

    fn transform(&self, _p: &Label, segment: &[Observation]) -> Option<Observation> {
        match segment {
            [o] => Some(*o),
            _ => None,
        }
    }
}

/// Loop rotation: labels agree, except that a copy stands for the entry
/// it duplicates.
#[derive(Debug, Clone)]
pub struct LoopRotateCertificate<'g> {
    pub source: &'g CfgProgram,
    pub target: &'g CfgProgram,
    pub rotations: Vec<Rotation>,
}

impl<'g> SimulationCertificate for LoopRotateCertificate<'g> {
    type Source = CfgSemantics<'g>;
    type Target = CfgSemantics<'g>;

    fn source(&self) -> CfgSemantics<'g> {
        CfgSemantics::new(self.source)
    }

    fn target(&self) -> CfgSemantics<'g> {
        CfgSemantics::new(self.target)
    }

    fn initial(&self, regs: &RegisterMap, mem: &Memory) -> (CfgState, CfgState) {
        (
            CfgSemantics::new(self.source).initial(regs.clone(), mem.clone()),
            CfgSemantics::new(self.target).initial(regs.clone(), mem.clone()),
        )
    }

    fn related(&self, s: &CfgState, t: &CfgState) -> bool {
        let labels_match = s.label == t.label
            || self
                .rotations
                .iter()
                .any(|r| r.entry == s.label && r.copy == t.label);
        labels_match && s.regs == t.regs && s.mem == t.mem
    }

    fn transform(&self, _p: &Label, segment: &[Observation]) -> Option<Observation> {
        match segment {
            [o] => Some(*o),
            _ => None,
        }
    }
}

/// A diagram for if conversion. It holds, but its transformer sends both
/// outcomes of the converted branch to the same silent observation, so it
/// is not injective.
#[derive(Debug, Clone)]
pub struct IfConvertCertificate {
    pub source: Cmd,
    pub target: Cmd,
}

impl IfConvertCertificate {
    pub fn new(source: Cmd) -> Self {
        let target = if_convert(&source);
        IfConvertCertificate { source, target }
    }

    fn converted_head(c: &Cmd) -> bool {
        c.head().is_some_and(|n| {
            let single = Cmd::node((**n).clone());
            matches!(n.stmt, Stmt::If(..)) && if_convert(&single) != single
        })
    }
}

impl SimulationCertificate for IfConvertCertificate {
    type Source = StructuredSemantics;
    type Target = StructuredSemantics;

    fn source(&self) -> StructuredSemantics {
        StructuredSemantics
    }

    fn target(&self) -> StructuredSemantics {
        StructuredSemantics
    }

    fn initial(&self, regs: &RegisterMap, mem: &Memory) -> (StructState, StructState) {
        (
            StructState::new(self.source.clone(), regs.clone(), mem.clone()),
            StructState::new(self.target.clone(), regs.clone(), mem.clone()),
        )
    }

    fn related(&self, s: &StructState, t: &StructState) -> bool {
        same_store(s, t) && t.code == if_convert(&s.code)
    }

    fn transform(&self, p: &Cmd, segment: &[Observation]) -> Option<Observation> {
        if Self::converted_head(p) {
            match segment {
                [Observation::Branch(_), Observation::Silent] => Some(Observation::Silent),
                _ => None,
            }
        } else {
            match segment {
                [o] => Some(*o),
                _ => None,
            }
        }
    }

    fn nsteps(&self, p: &Cmd) -> usize {
        if Self::converted_head(p) {
            2
        } else {
            1
        }
    }
}

/// Builds the certificate of `pass` for `prog` and checks it over `spec`.
/// If conversion gets its (non-injective) diagram too; other passes have
/// no certificate.
pub fn certify(pass: PassName, prog: &Program, spec: &InputSpec, fuel: usize) -> Result<CertificateReport, CtError> {
    let wrong = || PassError::WrongLanguage {
        pass,
        expected: pass.input_language(),
        found: prog.language(),
    };
    let structured = || prog.as_structured().ok_or_else(wrong);
    let cfg = || prog.as_cfg().ok_or_else(wrong);
    match pass {
        PassName::ConstFold | PassName::Untile => {
            let strategy = if pass == PassName::ConstFold {
                SubstStrategy::ConstFold
            } else {
                SubstStrategy::Untile
            };
            let cert = ExprSubstCertificate::new(annotate_substitutions(structured()?, strategy));
            check_certificate(&cert, DiagramKind::Lockstep, spec, fuel)
        }
        PassName::Dbe => check_certificate(&DbeCertificate::new(structured()?.clone()), DiagramKind::Relaxed, spec, fuel),
        PassName::Dae => check_certificate(&DaeCertificate::new(structured()?), DiagramKind::Relaxed, spec, fuel),
        PassName::Unspill => {
            let cert = UnspillCertificate::new(structured()?.clone(), Var::new(STACK_POINTER))?;
            check_certificate(&cert, DiagramKind::Relaxed, spec, fuel)
        }
        PassName::Structure => {
            let cert = StructureCertificate::new(cfg()?)?;
            check_certificate(&cert, DiagramKind::Lockstep, spec, fuel)
        }
        PassName::LoopRotate => {
            let g = cfg()?;
            let (target, rotations) = rotate_all(g)?;
            let cert = LoopRotateCertificate {
                source: g,
                target: &target,
                rotations,
            };
            check_certificate(&cert, DiagramKind::Lockstep, spec, fuel)
        }
        PassName::IfConvert => {
            let cert = IfConvertCertificate::new(structured()?.clone());
            check_certificate(&cert, DiagramKind::Relaxed, spec, fuel)
        }
        _ => Err(PassError::Unsupported(format!("pass `{pass}` has no simulation certificate")).into()),
    }
}
