//! `ctlab` command-line front end.
//!
//! Exit status: 0 when everything checked holds, 1 when a check fails
//! (including a program judged not constant-time by `ct-check`), 2 for
//! usage, I/O and parse errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use ctlab::corpus;
use ctlab::ct::{check_ct, check_transparency, run_all, CtError, CtStatus, DEFAULT_FUEL};
use ctlab::harness::{run_matrix, suite_cases, SuiteConfig};
use ctlab::obs::format_trace;
use ctlab::passes::{apply_pass, PassError, PassName};
use ctlab::sim::{certify, CertificateReport};
use ctlab::syntax::{parse_cfg, parse_structured};
use ctlab::{InputSpec, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Debug, Parser)]
#[command(name = "ctlab", version, about = "Constant-time transparency of program transformations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Input specification (`.spec`); defaults to the empty domain.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FUEL)]
    fuel: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a program on every input of a spec and print traces and final states.
    Run {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Decide constant-time by enumerating the input domain.
    CtCheck {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Apply a pass and print the result.
    Transform {
        file: PathBuf,
        #[arg(long)]
        pass: PassName,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Compare CT verdicts before and after a pass.
    Transparency {
        file: PathBuf,
        #[arg(long)]
        pass: PassName,
        #[command(flatten)]
        common: Common,
    },
    /// Check a pass's simulation certificate, on a file or on generated programs.
    Simcheck {
        file: Option<PathBuf>,
        #[arg(long)]
        pass: PassName,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run the corpus and randomized suites and print the pass matrix.
    Corpus {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Generated programs per pass.
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Write the corpus files to this directory and exit.
        #[arg(long)]
        export: Option<PathBuf>,
    },
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

impl From<CtError> for Failure {
    fn from(e: CtError) -> Self {
        match e {
            CtError::Spec(_) | CtError::Pass(_) => usage(e.to_string()),
            CtError::Run { .. } => Failure {
                code: 1,
                message: e.to_string(),
            },
        }
    }
}

impl From<PassError> for Failure {
    fn from(e: PassError) -> Self {
        usage(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Program, Failure> {
    let text = read(path)?;
    let parsed = match path.extension().and_then(|e| e.to_str()) {
        Some("sct") => parse_structured(&text).map(Program::Structured),
        Some("cfg") => parse_cfg(&text).map(Program::Cfg),
        _ => return Err(usage(format!("{}: expected a .sct or .cfg file", path.display()))),
    };
    parsed.map_err(|e| usage(format!("{}:{e}", path.display())))
}

fn load_spec(path: Option<&Path>) -> Result<InputSpec, Failure> {
    match path {
        None => Ok(InputSpec::empty()),
        Some(p) => InputSpec::parse(&read(p)?).map_err(|e| usage(format!("{}: {e}", p.display()))),
    }
}

fn json_text(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

/// Output text and whether every check held.
type Outcome = (String, bool);

fn cmd_run(file: &Path, c: &Common) -> Result<Outcome, Failure> {
    let prog = load_program(file)?;
    let spec = load_spec(c.spec.as_deref())?;
    let runs = run_all(&prog, &spec, c.fuel)?;
    let out = match c.format {
        Format::Structured => json_text(&runs.iter().map(|(i, e)| json!({"input": i.to_string(), "run": e})).collect::<Vec<_>>()),
        Format::Text => {
            let mut out = String::new();
            for (i, e) in &runs {
                let status = if e.terminated { "final" } else { "out of fuel" };
                let _ = writeln!(out, "input {i}");
                let _ = writeln!(out, "  trace: {}", format_trace(&e.trace));
                let _ = writeln!(out, "  status: {status} after {} steps", e.trace.len());
                let _ = writeln!(out, "  registers: {}", e.regs);
                let _ = writeln!(out, "  memory: {}", e.mem);
            }
            out
        }
    };
    Ok((out, true))
}

fn cmd_ct_check(file: &Path, c: &Common) -> Result<Outcome, Failure> {
    let prog = load_program(file)?;
    let spec = load_spec(c.spec.as_deref())?;
    let v = check_ct(&prog, &spec, c.fuel)?;
    let out = match c.format {
        Format::Structured => json_text(&v),
        Format::Text => {
            let mut out = format!("{}\n", v.status);
            if let Some(w) = &v.witness {
                let _ = writeln!(out, "witness: {w}");
            }
            let _ = writeln!(out, "inputs: {}", v.inputs);
            out
        }
    };
    Ok((out, v.status == CtStatus::Ct))
}

fn cmd_transform(file: &Path, pass: PassName, format: Format) -> Result<Outcome, Failure> {
    let prog = load_program(file)?;
    let out = apply_pass(pass, &prog)?;
    let text = match format {
        Format::Text => out.to_string(),
        Format::Structured => json_text(&json!({
            "pass": pass,
            "language": out.language(),
            "program": out.to_string(),
        })),
    };
    Ok((text, true))
}

fn cmd_transparency(file: &Path, pass: PassName, c: &Common) -> Result<Outcome, Failure> {
    let prog = load_program(file)?;
    let spec = load_spec(c.spec.as_deref())?;
    let name = file.display().to_string();
    let r = check_transparency(&name, &prog, pass, &spec, c.fuel)?;
    let out = match c.format {
        Format::Text => r.to_text(),
        Format::Structured => json_text(&r),
    };
    Ok((out, !r.has_failure()))
}

fn certificate_text(name: &str, r: &CertificateReport) -> String {
    format!(
        "{name}: {}\n  simulation: {}\n  injectivity: {}\n",
        if r.passed() { "PASS" } else { "FAIL" },
        r.simulation,
        r.injectivity
    )
}

fn cmd_simcheck(file: Option<&Path>, pass: PassName, seed: u64, count: usize, c: &Common) -> Result<Outcome, Failure> {
    let cases: Vec<(String, Program, InputSpec)> = match file {
        Some(f) => vec![(f.display().to_string(), load_program(f)?, load_spec(c.spec.as_deref())?)],
        None => {
            let config = SuiteConfig {
                seed,
                count,
                fuel: c.fuel,
                ..SuiteConfig::default()
            };
            suite_cases(pass, &config)
                .into_iter()
                .map(|case| (case.name, case.program, case.spec))
                .collect()
        }
    };
    let mut reports = Vec::new();
    for (name, prog, spec) in &cases {
        reports.push((name.clone(), certify(pass, prog, spec, c.fuel)?));
    }
    let ok = reports.iter().all(|(_, r)| r.passed());
    let out = match c.format {
        Format::Structured => json_text(
            &reports
                .iter()
                .map(|(name, r)| json!({"program": name, "pass": pass, "passed": r.passed(), "certificate": r}))
                .collect::<Vec<_>>(),
        ),
        Format::Text => {
            let mut out: String = reports.iter().map(|(n, r)| certificate_text(n, r)).collect();
            let failed = reports.iter().filter(|(_, r)| !r.passed()).count();
            let _ = writeln!(out, "{} programs, {failed} failed", reports.len());
            out
        }
    };
    Ok((out, ok))
}

fn export(dir: &Path) -> Result<Outcome, Failure> {
    fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    let mut out = String::new();
    for e in corpus::corpus() {
        let write = |name: String, text: &str| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|err| usage(format!("{}: {err}", path.display())))?;
            Ok::<_, Failure>(path)
        };
        let prog = write(e.file_name(), e.program)?;
        write(format!("{}.spec", e.name), e.spec)?;
        let _ = writeln!(out, "{} ({}, {})", prog.display(), e.pass, e.expectation);
    }
    Ok((out, true))
}

fn cmd_corpus(seed: u64, count: usize, fuel: usize, format: Format, export_dir: Option<&Path>) -> Result<Outcome, Failure> {
    if let Some(dir) = export_dir {
        return export(dir);
    }
    let config = SuiteConfig {
        seed,
        count,
        fuel,
        ..SuiteConfig::default()
    };
    let report = run_matrix(&config)?;
    let out = match format {
        Format::Text => report.to_text(),
        Format::Structured => json_text(&report),
    };
    Ok((out, report.passed()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Run { file, common } => cmd_run(file, common),
        Command::CtCheck { file, common } => cmd_ct_check(file, common),
        Command::Transform { file, pass, format } => cmd_transform(file, *pass, *format),
        Command::Transparency { file, pass, common } => cmd_transparency(file, *pass, common),
        Command::Simcheck {
            file,
            pass,
            seed,
            count,
            common,
        } => cmd_simcheck(file.as_deref(), *pass, *seed, *count, common),
        Command::Corpus {
            seed,
            count,
            fuel,
            format,
            export: dir,
        } => cmd_corpus(*seed, *count, *fuel, *format, dir.as_deref()),
    };
    match result {
        Ok((out, ok)) => {
            print!("{out}");
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
