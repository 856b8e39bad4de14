//! Acceptance gate: one line per criterion, nonzero exit if any fails.

mod common;

use std::time::{Duration, Instant};

use ctlab::cfg::CfgSemantics;
use ctlab::corpus::{corpus, find};
use ctlab::ct::{check_transparency, run_all, CtStatus, PropertyStatus, TransparencyReport, DEFAULT_FUEL};
use ctlab::gen::{generate_programs, Features, MAX_INPUTS, MAX_NODES};
use ctlab::harness::{check_equivalence, run_matrix, run_suite, suite_cases, Cell, SuiteConfig};
use ctlab::passes::{lower, structure, PassName};
use ctlab::semantics::Program;
use ctlab::sim::certify;
use ctlab::structured::{StructState, StructuredSemantics};
use ctlab::Observation;

use common::revelation_samples;

type Outcome = Result<String, String>;

/// Name, time limit in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn corpus_report(name: &str) -> Result<TransparencyReport, String> {
    let e = find(name).ok_or_else(|| format!("no corpus entry {name}"))?;
    check_transparency(e.name, &e.parse_program(), e.pass, &e.parse_spec(), DEFAULT_FUEL).map_err(|err| err.to_string())
}

/// Source NotCT, target CT, reflection FAIL, and a witness that re-runs.
fn reflection_failure(name: &str) -> Result<String, String> {
    let r = corpus_report(name)?;
    ensure(r.source.status == CtStatus::NotCt, || format!("{name}: source is {}", r.source))?;
    ensure(r.target.status == CtStatus::Ct, || format!("{name}: target is {}", r.target))?;
    ensure(r.reflection.status == PropertyStatus::Fail, || format!("{name}: reflection {}", r.reflection.status))?;
    ensure(r.preservation.status == PropertyStatus::Ok, || format!("{name}: preservation {}", r.preservation.status))?;
    let w = r.source.witness.clone().ok_or("missing witness")?;
    let e = find(name).unwrap();
    let (p, spec) = (e.parse_program(), e.parse_spec());
    let a = p.behavior(&spec, &w.first, DEFAULT_FUEL).map_err(|e| e.to_string())?;
    let b = p.behavior(&spec, &w.second, DEFAULT_FUEL).map_err(|e| e.to_string())?;
    ensure(
        spec.related(&w.first, &w.second)
            && a.trace[..w.index] == b.trace[..w.index]
            && a.trace.get(w.index).copied() == w.left
            && b.trace.get(w.index).copied() == w.right
            && w.left != w.right,
        || format!("{name}: witness does not reproduce: {w}"),
    )?;
    Ok(format!("{name}: {} -> {}, witness {w}", r.source.status, r.target.status))
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let out = match out {
        Ok(_) if took > limit => Err(format!("took {took:.2?}, limit {limit:?}")),
        other => other,
    };
    (out, took)
}

fn criterion_1() -> Outcome {
    let detail = reflection_failure("clangover")?;
    let r = corpus_report("clangover")?;
    let w = r.source.witness.unwrap();
    let branches = [w.left, w.right];
    ensure(
        branches.contains(&Some(Observation::Branch(true))) && branches.contains(&Some(Observation::Branch(false))),
        || format!("witness is not a branch(true)/branch(false) split: {w}"),
    )?;
    let e = find("clangover").unwrap();
    let Program::Structured(c) = e.parse_program() else {
        return Err("clangover must be structured".into());
    };
    let mut loops = 0;
    c.visit(&mut |n| loops += matches!(n.stmt, ctlab::Stmt::While(..)) as usize);
    ensure(loops == 1, || format!("expected one loop, found {loops}"))?;
    ensure(r.source.inputs == 256, || format!("expected 256 inputs, got {}", r.source.inputs))?;
    Ok(detail)
}

fn criterion_2() -> Outcome {
    let detail = reflection_failure("dead_load")?;
    let r = corpus_report("dead_load")?;
    let w = r.source.witness.unwrap();
    ensure(
        (w.left, w.right) == (Some(Observation::Addr(16)), Some(Observation::Addr(17))),
        || format!("expected addr(16) vs addr(17), got {w}"),
    )?;
    Ok(detail)
}

fn criterion_3() -> Outcome {
    let parts = ["binsec_empty_branch", "branch_coalescing", "self_store"]
        .iter()
        .map(|n| reflection_failure(n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(parts.join("; "))
}

fn criterion_4() -> Outcome {
    let r = corpus_report("inverse_if_conversion")?;
    ensure(r.source.status == CtStatus::Ct, || format!("source is {}", r.source))?;
    ensure(r.target.status == CtStatus::NotCt, || format!("target is {}", r.target))?;
    ensure(r.preservation.status == PropertyStatus::Fail, || "preservation did not fail".into())?;
    ensure(r.reflection.status == PropertyStatus::Ok, || "reflection did not hold".into())?;
    Ok(format!("CT -> NotCT, witness {}", r.target.witness.unwrap()))
}

fn criterion_5() -> Outcome {
    let report = run_matrix(&SuiteConfig::default()).map_err(|e| e.to_string())?;
    println!("{}", report.to_text().trim_end());
    ensure(report.passed(), || report.mismatches.join("; "))?;
    let table: Vec<_> = report.rows.iter().filter(|r| !r.extra).collect();
    ensure(table.len() == 10, || format!("{} table rows", table.len()))?;
    let transparent = table.iter().filter(|r| r.reflection == Cell::Check && r.preservation == Cell::Check).count();
    let reflection_x = table.iter().filter(|r| r.reflection == Cell::Cross && r.preservation == Cell::Check).count();
    ensure(transparent == 7 && reflection_x == 3, || {
        format!("{transparent} rows ✓/✓ and {reflection_x} rows ✗/✓")
    })?;
    Ok(format!("7 rows ✓/✓, 3 rows reflection ✗, {} corpus entries, 0 mismatches", report.corpus.len()))
}

fn transparent_passes() -> Vec<PassName> {
    PassName::ALL.into_iter().filter(|p| p.is_certified()).collect()
}

fn criterion_6() -> Outcome {
    let config = SuiteConfig {
        seed: 6,
        count: 500,
        partitions: 2,
        fuel: DEFAULT_FUEL,
        max_nodes: MAX_NODES,
    };
    let mut summary = Vec::new();
    for pass in transparent_passes() {
        for case in suite_cases(pass, &config) {
            ensure(case.spec.domain_size() <= MAX_INPUTS as u128, || format!("{}: domain too large", case.name))?;
            if let Program::Structured(c) = &case.program {
                ensure(c.node_count() <= MAX_NODES, || format!("{}: too many nodes", case.name))?;
            }
        }
        let r = run_suite(pass, &config);
        ensure(r.programs >= 500, || format!("{pass}: only {} programs", r.programs))?;
        ensure(r.verdict_mismatches == 0 && r.transparent_evidence(), || {
            let first = r.findings.first().map(|f| f.to_string()).unwrap_or_default();
            format!("{pass}: {} verdict mismatches\n{first}", r.verdict_mismatches)
        })?;
        summary.push(format!("{pass} {}/{}", r.programs, r.checks));
    }
    Ok(format!("programs/checks with identical verdicts: {}", summary.join(", ")))
}

fn criterion_7() -> Outcome {
    let mut checked = 0;
    let mut samples = 0;
    for e in corpus().iter().filter(|e| e.pass.is_certified()) {
        let r = certify(e.pass, &e.parse_program(), &e.parse_spec(), DEFAULT_FUEL).map_err(|x| x.to_string())?;
        ensure(r.passed(), || format!("{}: {} / {}", e.name, r.simulation, r.injectivity))?;
        checked += 1;
        samples += r.injectivity.samples;
    }
    let config = SuiteConfig {
        seed: 7,
        count: 200,
        ..SuiteConfig::default()
    };
    for pass in transparent_passes() {
        for case in suite_cases(pass, &config) {
            let r = certify(pass, &case.program, &case.spec, DEFAULT_FUEL).map_err(|x| x.to_string())?;
            ensure(r.passed(), || format!("{}: {} / {}\n{}", case.name, r.simulation, r.injectivity, case.program))?;
            checked += 1;
            samples += r.injectivity.samples;
        }
    }
    let clangover = find("clangover").unwrap();
    let adversarial = certify(PassName::IfConvert, &clangover.parse_program(), &clangover.parse_spec(), DEFAULT_FUEL)
        .map_err(|x| x.to_string())?;
    ensure(adversarial.simulation.passed(), || format!("if-convert diagram: {}", adversarial.simulation))?;
    ensure(adversarial.injectivity.collision.is_some(), || "adversarial transformer not detected".into())?;
    Ok(format!(
        "{checked} certificates hold, 0 collisions over {samples} samples; adversarial: {}",
        adversarial.injectivity
    ))
}

fn criterion_8() -> Outcome {
    let config = SuiteConfig {
        seed: 8,
        count: 200,
        ..SuiteConfig::default()
    };
    let mut programs = 0;
    for e in corpus() {
        let d = check_equivalence(e.pass, &e.parse_program(), &e.parse_spec(), DEFAULT_FUEL).map_err(|x| x.to_string())?;
        ensure(d.is_none(), || format!("{}: {}", e.name, d.clone().unwrap()))?;
        programs += 1;
    }
    for pass in PassName::ALL {
        for case in suite_cases(pass, &config) {
            let d = check_equivalence(pass, &case.program, &case.spec, DEFAULT_FUEL).map_err(|x| x.to_string())?;
            ensure(d.is_none(), || format!("{} ({pass}): {}\n{}", case.name, d.clone().unwrap(), case.program))?;
            programs += 1;
        }
    }
    Ok(format!("{programs} programs over all 13 passes agree on final state and termination"))
}

fn criterion_9() -> Outcome {
    let mut graphs = 0;
    let mut runs = 0;
    for g in generate_programs(9, MAX_NODES, Features::all() - Features::SPILL).take(500) {
        let cfg = lower(&g.program);
        let structured = structure(&cfg).map_err(|e| format!("{e}\n{cfg}"))?;
        let src = run_all(&Program::Cfg(cfg.clone()), &g.spec, DEFAULT_FUEL).map_err(|e| e.to_string())?;
        let tgt = run_all(&Program::Structured(structured.clone()), &g.spec, DEFAULT_FUEL).map_err(|e| e.to_string())?;
        for ((i, s), (_, t)) in src.iter().zip(&tgt) {
            ensure(s.trace == t.trace && s.terminated == t.terminated, || {
                format!("input {i}: traces differ\n{cfg}\n{structured}")
            })?;
            runs += 1;
        }
        graphs += 1;
    }
    Ok(format!("{graphs} CFGs, {runs} runs with identical traces"))
}

fn criterion_10() -> Outcome {
    let mut samples = 0;
    let mut programs = 0;
    let target = 10_000;
    for g in generate_programs(10, MAX_NODES, Features::all() - Features::SPILL) {
        let inputs = g.spec.enumerate().map_err(|e| e.to_string())?;
        let cfg = lower(&g.program);
        let cfg_sem = CfgSemantics::new(&cfg);
        for (k, i) in inputs.iter().enumerate() {
            let j = &inputs[(k * 5 + 1) % inputs.len()];
            let (r1, m1) = g.spec.initial_state(i);
            let (r2, m2) = g.spec.initial_state(j);
            samples += revelation_samples(
                &StructuredSemantics,
                StructState::new(g.program.clone(), r1.clone(), m1.clone()),
                StructState::new(g.program.clone(), r2.clone(), m2.clone()),
                DEFAULT_FUEL,
            )?;
            samples += revelation_samples(&cfg_sem, cfg_sem.initial(r1, m1), cfg_sem.initial(r2, m2), DEFAULT_FUEL)?;
        }
        programs += 1;
        if samples >= target && programs >= 100 {
            break;
        }
    }
    ensure(samples >= target, || format!("only {samples} samples"))?;
    Ok(format!("{samples} state pairs from {programs} programs, deterministic and control-flow revealing"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("clangover reflection failure", 1, criterion_1),
        ("dead-load reflection failure", 1, criterion_2),
        ("empty-branch, branch-coalescing and self-store reflection failures", 1, criterion_3),
        ("inverse if conversion preservation failure", 1, criterion_4),
        ("transparency matrix", 30, criterion_5),
        ("randomized transparency suite", 300, criterion_6),
        ("simulation certificates", 300, criterion_7),
        ("semantic equivalence of every pass", 300, criterion_8),
        ("structural analysis round trip", 300, criterion_9),
        ("semantics invariants", 300, criterion_10),
    ];
    let mut failed = 0;
    for (n, (name, limit, f)) in criteria.iter().enumerate() {
        let (out, took) = timed(Duration::from_secs(*limit), f);
        match out {
            Ok(detail) => println!("criterion {} PASS ({name}, {took:.2?}): {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL ({name}, {took:.2?}): {why}", n + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 10 criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria pass");
}
