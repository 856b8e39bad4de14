use ctlab::corpus::find;
use ctlab::ct::DEFAULT_FUEL;
use ctlab::passes::{annotate_substitutions, PassName, SubstStrategy};
use ctlab::sim::{
    certify, check_certificate, check_injectivity, check_lockstep, check_relaxed, Application, DbeCertificate,
    DiagramKind, ExprSubstCertificate, IfConvertCertificate, LoopRotateCertificate, SimulationCertificate,
    StructureCertificate,
};
use ctlab::structured::{StructState, StructuredSemantics};
use ctlab::syntax::{parse_cfg, parse_structured};
use ctlab::{Cmd, InputSpec, Memory, Observation, Program, RegisterMap};

fn spec(s: &str) -> InputSpec {
    InputSpec::parse(s).unwrap()
}

/// Wraps a certificate and breaks its relation.
struct Corrupted<C>(C);

impl<C: SimulationCertificate<Source = StructuredSemantics, Target = StructuredSemantics>> SimulationCertificate
    for Corrupted<C>
{
    type Source = StructuredSemantics;
    type Target = StructuredSemantics;

    fn source(&self) -> StructuredSemantics {
        StructuredSemantics
    }

    fn target(&self) -> StructuredSemantics {
        StructuredSemantics
    }

    fn initial(&self, regs: &RegisterMap, mem: &Memory) -> (StructState, StructState) {
        self.0.initial(regs, mem)
    }

    fn related(&self, s: &StructState, t: &StructState) -> bool {
        // Demands equal code, which constant folding breaks immediately.
        s.code == t.code && self.0.related(s, t)
    }

    fn transform(&self, p: &Cmd, segment: &[Observation]) -> Option<Observation> {
        self.0.transform(p, segment)
    }
}

const FOLDABLE: &str = "x := 2 + 3; y := load[x + p]; if (s < 1 + 1) { z := 1; } else { z := 2; }";
const FOLD_SPEC: &str = "input p public 0..3\ninput s secret 0..2";

#[test]
fn const_fold_certificate_holds_in_lockstep() {
    let cert = ExprSubstCertificate::new(annotate_substitutions(
        &parse_structured(FOLDABLE).unwrap(),
        SubstStrategy::ConstFold,
    ));
    assert_ne!(cert.source, cert.target);
    let out = check_lockstep(&cert, &spec(FOLD_SPEC), DEFAULT_FUEL).unwrap();
    assert!(out.report.passed(), "{}", out.report);
    assert_eq!(out.report.inputs, 12);
    // Identity transformer: injective by construction.
    assert!(check_injectivity(out.applications).passed());
}

#[test]
fn corrupted_relation_fails_at_step_zero() {
    let cert = Corrupted(ExprSubstCertificate::new(annotate_substitutions(
        &parse_structured(FOLDABLE).unwrap(),
        SubstStrategy::ConstFold,
    )));
    let out = check_lockstep(&cert, &spec(FOLD_SPEC), DEFAULT_FUEL).unwrap();
    let failure = out.report.failure.expect("the corrupted relation must be caught");
    assert_eq!(failure.step, 0);
    assert!(failure.reason.contains("initial"), "{}", failure.reason);
}

#[test]
fn dbe_certificate_holds_and_is_injective_on_corpus() {
    let entry = find("dbe").unwrap();
    let Program::Structured(c) = entry.parse_program() else {
        panic!("dbe entry is structured")
    };
    let cert = DbeCertificate::new(c);
    let out = check_relaxed(&cert, &entry.parse_spec(), DEFAULT_FUEL).unwrap();
    assert!(out.report.passed(), "{}", out.report);
    let inj = check_injectivity(out.applications);
    assert!(inj.passed(), "{inj}");
    assert!(inj.samples > 0);
}

#[test]
fn relaxed_checker_rejects_wrong_step_count() {
    struct OneStep(IfConvertCertificate);
    impl SimulationCertificate for OneStep {
        type Source = StructuredSemantics;
        type Target = StructuredSemantics;
        fn source(&self) -> StructuredSemantics {
            StructuredSemantics
        }
        fn target(&self) -> StructuredSemantics {
            StructuredSemantics
        }
        fn initial(&self, regs: &RegisterMap, mem: &Memory) -> (StructState, StructState) {
            self.0.initial(regs, mem)
        }
        fn related(&self, s: &StructState, t: &StructState) -> bool {
            self.0.related(s, t)
        }
        fn transform(&self, p: &Cmd, segment: &[Observation]) -> Option<Observation> {
            self.0.transform(p, segment)
        }
        // nsteps left at the default of 1
    }
    let c = parse_structured("if (s == 1) { x := 1; } else { x := 2; }").unwrap();
    let out = check_relaxed(&OneStep(IfConvertCertificate::new(c)), &spec("input s secret 0..1"), 100).unwrap();
    assert_eq!(out.report.failure.unwrap().step, 0);
}

#[test]
fn if_conversion_transformer_collides() {
    let entry = find("clangover").unwrap();
    let report = certify(PassName::IfConvert, &entry.parse_program(), &entry.parse_spec(), DEFAULT_FUEL).unwrap();
    // The diagram itself holds; only injectivity breaks.
    assert!(report.simulation.passed(), "{}", report.simulation);
    let c = report.injectivity.collision.expect("branch(true) and branch(false) both map to none");
    assert_eq!(c.target, Observation::Silent);
    let mut segs = [c.first.clone(), c.second.clone()];
    segs.sort();
    assert_eq!(
        segs,
        [
            vec![Observation::Branch(false), Observation::Silent],
            vec![Observation::Branch(true), Observation::Silent]
        ]
    );
}

#[test]
fn hand_built_collision_is_reported() {
    let apps = vec![
        Application {
            point: 7u32,
            segment: vec![Observation::Branch(true)],
            output: Observation::Silent,
        },
        Application {
            point: 7u32,
            segment: vec![Observation::Branch(false)],
            output: Observation::Silent,
        },
        Application {
            point: 8u32,
            segment: vec![Observation::Addr(3)],
            output: Observation::Silent,
        },
    ];
    let r = check_injectivity(apps);
    assert_eq!(r.samples, 3);
    let c = r.collision.unwrap();
    assert_eq!(c.point, "7");
}

#[test]
fn structure_and_rotation_certificates_hold() {
    let g = parse_cfg(
        "cfg\nentry a\nexit ret\na: i := 0 -> h\nh: br i < s ? b : ret\nb: i := i + 1 -> h\n",
    )
    .unwrap();
    let sp = spec("input s secret 0..3");
    let cert = StructureCertificate::new(&g).unwrap();
    let r = check_certificate(&cert, DiagramKind::Lockstep, &sp, DEFAULT_FUEL).unwrap();
    assert!(r.passed(), "{} / {}", r.simulation, r.injectivity);

    let (target, rotations) = ctlab::passes::rotate_all(&g).unwrap();
    assert_eq!(rotations.len(), 1);
    let cert = LoopRotateCertificate {
        source: &g,
        target: &target,
        rotations,
    };
    let r = check_certificate(&cert, DiagramKind::Lockstep, &sp, DEFAULT_FUEL).unwrap();
    assert!(r.passed(), "{} / {}", r.simulation, r.injectivity);
}

#[test]
fn every_certified_pass_certifies_its_corpus_entry() {
    for entry in ctlab::corpus::corpus() {
        if !entry.pass.is_certified() {
            continue;
        }
        let r = certify(entry.pass, &entry.parse_program(), &entry.parse_spec(), DEFAULT_FUEL).unwrap();
        assert!(r.passed(), "{}: {} / {}", entry.name, r.simulation, r.injectivity);
    }
}
