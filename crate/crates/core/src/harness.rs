//! Randomized transparency suites and the pass summary matrix.
//!
//! Every matrix cell is derived from the constant-time oracle: a
//! reflection cell is ✗ as soon as some corpus entry or generated program
//! shows a source that is not constant-time turning into a constant-time
//! target, and likewise for preservation.

use std::collections::BTreeSet;
use std::fmt::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{corpus, CorpusEntry, Expectation};
use crate::ct::{check_transparency, run_all, CtError, PropertyStatus, TransparencyReport, DEFAULT_FUEL};
use crate::expr::Var;
use crate::gen::{generate_programs, random_partition, Features, MAX_NODES};
use crate::input::InputSpec;
use crate::passes::unspill::{unspill, SPILL_PREFIX};
use crate::passes::{apply_pass, lower, PassName, STACK_POINTER};
use crate::semantics::{Language, Program};

/// Generator features that give a pass something to do.
pub fn suite_features(pass: PassName) -> Features {
    let base = Features::basic();
    base | match pass {
        PassName::ConstFold => Features::CONST_EXPR | Features::CONST_COND,
        PassName::Untile => Features::UNTILE,
        PassName::Dbe => Features::CONST_COND,
        PassName::Dae => Features::DEAD_ASSIGN | Features::DEAD_LOAD,
        PassName::Unspill => Features::SPILL | Features::DEAD_ASSIGN,
        PassName::Structure | PassName::LoopRotate => Features::CONST_COND,
        PassName::IfConvert => Features::CONVERTIBLE_IF,
        PassName::InvIfConvert => Features::empty(),
        PassName::BranchCoalesce => Features::IDENTICAL_BRANCHES,
        PassName::EmptyBranchCoalesce => Features::EMPTY_IF,
        PassName::DeadLoadElim => Features::DEAD_LOAD,
        PassName::DeadStoreElim => Features::SELF_STORE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Generated programs per pass.
    pub count: usize,
    /// Random public/secret partitions tried per program, on top of the
    /// generated one.
    pub partitions: usize,
    pub fuel: usize,
    pub max_nodes: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0,
            count: 100,
            partitions: 2,
            fuel: DEFAULT_FUEL,
            max_nodes: MAX_NODES,
        }
    }
}

/// A generated test case: a named program in the pass's input language.
#[derive(Debug, Clone)]
pub struct Case {
    pub name: String,
    pub program: Program,
    pub spec: InputSpec,
}

/// The programs a suite runs for `pass`, lowered for CFG passes.
pub fn suite_cases(pass: PassName, config: &SuiteConfig) -> Vec<Case> {
    // Distinct streams per pass so the suites do not test the same programs.
    let seed = config.seed ^ ((pass as u64 + 1) << 32);
    generate_programs(seed, config.max_nodes, suite_features(pass))
        .take(config.count)
        .enumerate()
        .map(|(i, g)| Case {
            name: format!("gen-{pass}-{}-{i}", config.seed),
            program: match pass.input_language() {
                Language::Structured => Program::Structured(g.program),
                Language::Cfg => Program::Cfg(lower(&g.program)),
            },
            spec: g.spec,
        })
        .collect()
}

/// The generated specification plus `n` random re-partitions of it.
pub fn partitions(spec: &InputSpec, seed: u64, n: usize) -> Vec<InputSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![spec.clone()];
    out.extend((0..n).map(|_| random_partition(&mut rng, spec)));
    out
}

/// Compares final states of source and target on every input: termination
/// status, registers other than the ones unspilling introduces, and memory
/// outside spill slots. Returns a description of the first disagreement.
pub fn check_equivalence(
    pass: PassName,
    prog: &Program,
    spec: &InputSpec,
    fuel: usize,
) -> Result<Option<String>, CtError> {
    let target = apply_pass(pass, prog)?;
    let offsets: Vec<i64> = match (pass, prog) {
        (PassName::Unspill, Program::Structured(c)) => unspill(c, &Var::new(STACK_POINTER))?
            .1
            .iter()
            .map(|s| s.offset)
            .collect(),
        _ => Vec::new(),
    };
    let source_runs = run_all(prog, spec, fuel)?;
    let target_runs = run_all(&target, spec, fuel)?;
    for ((input, s), (_, t)) in source_runs.iter().zip(&target_runs) {
        if s.terminated != t.terminated {
            return Ok(Some(format!(
                "input {input}: source terminated = {}, target terminated = {}",
                s.terminated, t.terminated
            )));
        }
        if !s.terminated {
            continue;
        }
        if !s.regs.agrees_on(&t.regs, |x| !x.as_str().starts_with(SPILL_PREFIX)) {
            return Ok(Some(format!("input {input}: registers {:?} vs {:?}", s.regs, t.regs)));
        }
        let sp = match s.regs.get(&Var::new(STACK_POINTER)) {
            crate::expr::Value::Int(n) => n,
            crate::expr::Value::Bool(_) => 0,
        };
        let slots: BTreeSet<i64> = offsets.iter().map(|o| sp.wrapping_add(*o)).collect();
        if !s.mem.agrees_on(&t.mem, |a| !slots.contains(&a)) {
            return Ok(Some(format!("input {input}: memory {:?} vs {:?}", s.mem, t.mem)));
        }
    }
    Ok(None)
}

/// One suite finding, with enough context to reproduce it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub case: String,
    pub kind: String,
    pub detail: String,
    pub program: String,
    pub spec: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} [{}]: {}", self.case, self.kind, self.detail)?;
        writeln!(f, "--- program")?;
        write!(f, "{}", self.program)?;
        writeln!(f, "--- spec")?;
        write!(f, "{}", self.spec)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SuiteResult {
    pub programs: usize,
    /// Transparency checks, one per program and partition.
    pub checks: usize,
    pub reflection_failures: usize,
    pub preservation_failures: usize,
    /// Source and target verdicts with different status.
    pub verdict_mismatches: usize,
    pub inconclusive: usize,
    pub certificate_failures: usize,
    pub equivalence_failures: usize,
    pub errors: usize,
    /// Certificate-checked target steps, summed.
    pub certificate_steps: usize,
    /// Programs the pass actually rewrote.
    pub changed: usize,
    /// Checks whose source program was not constant-time.
    pub not_ct_sources: usize,
    /// Findings in case order, at most [`MAX_FINDINGS`].
    pub findings: Vec<Finding>,
}

pub const MAX_FINDINGS: usize = 5;

impl SuiteResult {
    fn merge(&mut self, other: SuiteResult) {
        self.programs += other.programs;
        self.checks += other.checks;
        self.reflection_failures += other.reflection_failures;
        self.preservation_failures += other.preservation_failures;
        self.verdict_mismatches += other.verdict_mismatches;
        self.inconclusive += other.inconclusive;
        self.certificate_failures += other.certificate_failures;
        self.equivalence_failures += other.equivalence_failures;
        self.errors += other.errors;
        self.certificate_steps += other.certificate_steps;
        self.changed += other.changed;
        self.not_ct_sources += other.not_ct_sources;
        for f in other.findings {
            if self.findings.len() < MAX_FINDINGS {
                self.findings.push(f);
            }
        }
    }

    /// No finding that would contradict transparency of the pass.
    pub fn transparent_evidence(&self) -> bool {
        self.reflection_failures == 0
            && self.preservation_failures == 0
            && self.verdict_mismatches == 0
            && self.inconclusive == 0
            && self.certificate_failures == 0
            && self.equivalence_failures == 0
            && self.errors == 0
    }
}

fn finding(case: &Case, spec: &InputSpec, kind: &str, detail: String) -> Finding {
    Finding {
        case: case.name.clone(),
        kind: kind.to_string(),
        detail,
        program: case.program.to_string(),
        spec: spec.to_string(),
    }
}

fn tally_report(case: &Case, spec: &InputSpec, r: &TransparencyReport, out: &mut SuiteResult) {
    out.checks += 1;
    if r.source.is_not_ct() {
        out.not_ct_sources += 1;
    }
    if r.source.status != r.target.status {
        out.verdict_mismatches += 1;
    }
    let note = |kind: &str, detail: String, out: &mut SuiteResult| {
        out.findings.push(finding(case, spec, kind, detail));
    };
    match r.reflection.status {
        PropertyStatus::Fail => {
            out.reflection_failures += 1;
            note("reflection", format!("source {} / target {}", r.source, r.target), out);
        }
        PropertyStatus::Inconclusive => out.inconclusive += 1,
        PropertyStatus::Ok => {}
    }
    match r.preservation.status {
        PropertyStatus::Fail => {
            out.preservation_failures += 1;
            note("preservation", format!("source {} / target {}", r.source, r.target), out);
        }
        PropertyStatus::Inconclusive if r.reflection.status != PropertyStatus::Inconclusive => out.inconclusive += 1,
        _ => {}
    }
    if let Some(c) = &r.certificate {
        out.certificate_steps += c.simulation.steps;
        if !c.passed() {
            out.certificate_failures += 1;
            note("certificate", format!("{}; {}", c.simulation, c.injectivity), out);
        }
    }
}

/// Runs one case through transparency checks on every partition and the
/// equivalence oracle.
pub fn run_case(pass: PassName, case: &Case, config: &SuiteConfig, index: usize) -> SuiteResult {
    let mut out = SuiteResult {
        programs: 1,
        ..SuiteResult::default()
    };
    if apply_pass(pass, &case.program).is_ok_and(|t| t != case.program) {
        out.changed = 1;
    }
    let seed = config.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index as u64;
    for spec in partitions(&case.spec, seed, config.partitions) {
        match check_transparency(&case.name, &case.program, pass, &spec, config.fuel) {
            Ok(r) => tally_report(case, &spec, &r, &mut out),
            Err(e) => {
                out.errors += 1;
                out.findings.push(finding(case, &spec, "error", e.to_string()));
            }
        }
    }
    match check_equivalence(pass, &case.program, &case.spec, config.fuel) {
        Ok(None) => {}
        Ok(Some(d)) => {
            out.equivalence_failures += 1;
            out.findings.push(finding(case, &case.spec, "equivalence", d));
        }
        Err(e) => {
            out.errors += 1;
            out.findings.push(finding(case, &case.spec, "error", e.to_string()));
        }
    }
    out
}

/// Randomized suite for one pass. Cases run in parallel; results are
/// merged in case order, so the outcome does not depend on scheduling.
pub fn run_suite(pass: PassName, config: &SuiteConfig) -> SuiteResult {
    let cases = suite_cases(pass, config);
    let results: Vec<SuiteResult> = cases
        .par_iter()
        .enumerate()
        .map(|(i, c)| run_case(pass, c, config, i))
        .collect();
    let mut total = SuiteResult::default();
    for r in results {
        total.merge(r);
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Cell {
    #[serde(rename = "yes")]
    Check,
    #[serde(rename = "no")]
    Cross,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Cell::Check => "✓",
            Cell::Cross => "✗",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowSpec {
    pub name: &'static str,
    pub passes: &'static [PassName],
    pub reflection: Cell,
    pub preservation: Cell,
    /// Rows beyond the ten-pass summary table.
    pub extra: bool,
}

/// Matrix rows with their expected cells.
pub fn rows() -> Vec<RowSpec> {
    use Cell::*;
    use PassName::*;
    let row = |name, passes, reflection, preservation| RowSpec {
        name,
        passes,
        reflection,
        preservation,
        extra: false,
    };
    vec![
        row("Branch Coalescing", &[BranchCoalesce, EmptyBranchCoalesce], Cross, Check),
        row("If Conversion", &[IfConvert], Cross, Check),
        row("Memory Access Elimination", &[DeadLoadElim, DeadStoreElim], Cross, Check),
        row("Constant Folding", &[ConstFold], Check, Check),
        row("Untiling", &[Untile], Check, Check),
        row("Dead Branch Elimination", &[Dbe], Check, Check),
        row("Dead Assignment Elimination", &[Dae], Check, Check),
        row("Unspilling", &[Unspill], Check, Check),
        row("Structural Analysis", &[Structure], Check, Check),
        row("Loop Rotation", &[LoopRotate], Check, Check),
        RowSpec {
            extra: true,
            ..row("Inverse If Conversion", &[InvIfConvert], Check, Cross)
        },
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusResult {
    pub name: String,
    pub pass: PassName,
    pub expected: Expectation,
    pub derived: Option<Expectation>,
    pub report: TransparencyReport,
}

impl CorpusResult {
    pub fn matches(&self) -> bool {
        self.derived == Some(self.expected) && self.report.certificate.as_ref().is_none_or(|c| c.passed())
    }
}

pub fn check_entry(entry: &CorpusEntry, fuel: usize) -> Result<CorpusResult, CtError> {
    let report = check_transparency(entry.name, &entry.parse_program(), entry.pass, &entry.parse_spec(), fuel)?;
    Ok(CorpusResult {
        name: entry.name.to_string(),
        pass: entry.pass,
        expected: entry.expectation,
        derived: Expectation::of_report(&report),
        report,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PassSuite {
    pub pass: PassName,
    pub result: SuiteResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct RowResult {
    pub name: String,
    pub extra: bool,
    pub reflection: Cell,
    pub preservation: Cell,
    pub expected_reflection: Cell,
    pub expected_preservation: Cell,
    pub corpus_entries: usize,
    pub generated: usize,
}

impl RowResult {
    pub fn matches(&self) -> bool {
        self.reflection == self.expected_reflection && self.preservation == self.expected_preservation
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixReport {
    pub rows: Vec<RowResult>,
    pub corpus: Vec<CorpusResult>,
    pub suites: Vec<PassSuite>,
    pub mismatches: Vec<String>,
}

impl MatrixReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<30} {:<11} {:<13} evidence", "pass", "reflection", "preservation");
        for r in &self.rows {
            if r.extra {
                let _ = writeln!(out, "{}", "-".repeat(72));
            }
            let flag = if r.matches() { "" } else { "  MISMATCH" };
            let _ = writeln!(
                out,
                "{:<30} {:<11} {:<13} {} corpus, {} generated{flag}",
                r.name, r.reflection, r.preservation, r.corpus_entries, r.generated
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "corpus:");
        for c in &self.corpus {
            let derived = c.derived.map(|d| d.to_string()).unwrap_or_else(|| "inconclusive".to_string());
            let _ = writeln!(
                out,
                "  {:<24} {:<22} expected {:<18} derived {:<18} {}",
                c.name,
                c.pass,
                c.expected,
                derived,
                if c.matches() { "ok" } else { "MISMATCH" }
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "generated suites:");
        for s in &self.suites {
            let r = &s.result;
            let _ = writeln!(
                out,
                "  {:<22} {} programs ({} changed), {} checks ({} not CT), reflection fail {}, preservation fail {}, certificate fail {}, equivalence fail {}, errors {}",
                s.pass,
                r.programs,
                r.changed,
                r.checks,
                r.not_ct_sources,
                r.reflection_failures,
                r.preservation_failures,
                r.certificate_failures,
                r.equivalence_failures,
                r.errors
            );
        }
        let _ = writeln!(out);
        if self.mismatches.is_empty() {
            let _ = writeln!(out, "all cells match");
        } else {
            for m in &self.mismatches {
                let _ = writeln!(out, "mismatch: {m}");
            }
        }
        out
    }
}

/// Runs the corpus and one randomized suite per pass, then derives the
/// matrix. Corpus expectations, certificate results, equivalence and the
/// expected cells are all checked; disagreements land in `mismatches`.
pub fn run_matrix(config: &SuiteConfig) -> Result<MatrixReport, CtError> {
    let entries = corpus();
    let corpus_results = entries
        .par_iter()
        .map(|e| check_entry(e, config.fuel))
        .collect::<Result<Vec<_>, _>>()?;
    let suites: Vec<PassSuite> = PassName::ALL
        .par_iter()
        .map(|&pass| PassSuite {
            pass,
            result: run_suite(pass, config),
        })
        .collect();

    let mut mismatches = Vec::new();
    for c in &corpus_results {
        if !c.matches() {
            mismatches.push(format!(
                "corpus entry {} ({}): expected {}, derived {}",
                c.name,
                c.pass,
                c.expected,
                c.derived.map(|d| d.to_string()).unwrap_or_else(|| "inconclusive".to_string())
            ));
        }
    }
    for s in &suites {
        let r = &s.result;
        let certified = s.pass.is_certified();
        let bad = r.equivalence_failures
            + r.errors
            + r.inconclusive
            + if certified {
                r.certificate_failures + r.verdict_mismatches
            } else {
                0
            };
        if bad > 0 {
            let detail = r
                .findings
                .iter()
                .find(|f| certified || (f.kind != "reflection" && f.kind != "preservation"))
                .map(|f| format!("; first: {} [{}] {}", f.case, f.kind, f.detail))
                .unwrap_or_default();
            mismatches.push(format!("suite {}: {bad} failing checks{detail}", s.pass));
        }
    }

    let mut row_results = Vec::new();
    for spec in rows() {
        let in_row = |p: &PassName| spec.passes.contains(p);
        let row_corpus: Vec<&CorpusResult> = corpus_results.iter().filter(|c| in_row(&c.pass)).collect();
        let row_suites: Vec<&PassSuite> = suites.iter().filter(|s| in_row(&s.pass)).collect();
        let reflection_fail = row_corpus.iter().any(|c| c.report.reflection.status == PropertyStatus::Fail)
            || row_suites.iter().any(|s| s.result.reflection_failures > 0);
        let preservation_fail = row_corpus.iter().any(|c| c.report.preservation.status == PropertyStatus::Fail)
            || row_suites.iter().any(|s| s.result.preservation_failures > 0);
        let cell = |fail: bool| if fail { Cell::Cross } else { Cell::Check };
        let result = RowResult {
            name: spec.name.to_string(),
            extra: spec.extra,
            reflection: cell(reflection_fail),
            preservation: cell(preservation_fail),
            expected_reflection: spec.reflection,
            expected_preservation: spec.preservation,
            corpus_entries: row_corpus.len(),
            generated: row_suites.iter().map(|s| s.result.programs).sum(),
        };
        if !result.matches() {
            mismatches.push(format!(
                "row {}: derived {}/{}, expected {}/{}",
                result.name, result.reflection, result.preservation, result.expected_reflection, result.expected_preservation
            ));
        }
        row_results.push(result);
    }
    Ok(MatrixReport {
        rows: row_results,
        corpus: corpus_results,
        suites,
        mismatches,
    })
}
