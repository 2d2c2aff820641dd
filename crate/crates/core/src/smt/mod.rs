//! SMT-LIB 2 emission and external solver orchestration.

mod emit;

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::ir::IrProgram;
use crate::vcgen::Vc;

pub use emit::{sort, Emitter};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SmtError {
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

/// One SMT-LIB 2 script per VC.
pub fn emit_smtlib(p: &IrProgram, vc: &Vc) -> Result<String, SmtError> {
    Emitter::new(p).script(vc)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Solver {
    pub name: String,
    pub path: PathBuf,
}

impl Solver {
    /// Command-line options selecting SMT-LIB input on stdin and a time limit.
    fn args(&self, timeout: u64) -> Vec<String> {
        match self.name.as_str() {
            "z3" => vec!["-in".into(), "-smt2".into(), format!("-T:{timeout}")],
            "cvc5" | "cvc4" => vec!["--lang=smt2".into(), format!("--tlimit={}", timeout * 1000)],
            "alt-ergo" => vec!["--input=smtlib2".into(), format!("--timelimit={timeout}")],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SolverConfig {
    /// Tried in order; later solvers run only when earlier ones do not answer.
    pub solvers: Vec<Solver>,
    pub timeout_secs: u64,
    pub logic: String,
    pub jobs: usize,
    pub dump_dir: Option<PathBuf>,
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        SolverConfig {
            solvers: vec![Solver { name: "z3".into(), path: PathBuf::from("z3") }],
            timeout_secs: 5,
            logic: "ALL".into(),
            jobs: 1,
            dump_dir: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SmtError> {
        if self.timeout_secs == 0 {
            return Err(SmtError::Config("timeout must be positive".into()));
        }
        if self.jobs == 0 {
            return Err(SmtError::Config("jobs must be at least 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(SmtError::Config("no solver configured".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Valid,
    Unknown,
    Timeout,
    InvalidWithModel,
    SolverError,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Valid => "valid",
            Status::Unknown => "unknown",
            Status::Timeout => "timeout",
            Status::InvalidWithModel => "invalid-with-model",
            Status::SolverError => "solver-error",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DischargeResult {
    pub id: String,
    pub status: Status,
    pub seconds: f64,
    /// Solver that produced the status; empty for trivial VCs.
    pub solver: String,
    /// Raw solver output for non-valid answers.
    pub detail: Option<String>,
}

/// Discharges `vcs` with up to `cfg.jobs` solver processes; results are in VC order.
pub fn discharge(p: &IrProgram, vcs: &[Vc], cfg: &SolverConfig) -> Result<Vec<DischargeResult>, SmtError> {
    cfg.validate()?;
    let em = Emitter::new(p).with_logic(&cfg.logic);
    let mut scripts = Vec::with_capacity(vcs.len());
    for vc in vcs {
        scripts.push(em.script(vc)?);
    }
    if let Some(dir) = &cfg.dump_dir {
        dump(dir, vcs, &scripts).map_err(|e| SmtError::Config(format!("dump directory: {e}")))?;
    }
    let results: Mutex<Vec<Option<DischargeResult>>> = Mutex::new(vec![None; vcs.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..cfg.jobs.min(vcs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= vcs.len() {
                    break;
                }
                let r = discharge_one(&em, &vcs[i], &scripts[i], cfg);
                results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    Ok(results.into_inner().unwrap_or_else(|e| e.into_inner()).into_iter().flatten().collect())
}

fn dump(dir: &Path, vcs: &[Vc], scripts: &[String]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (vc, s) in vcs.iter().zip(scripts) {
        std::fs::write(dir.join(format!("{}.smt2", vc.id)), s)?;
    }
    Ok(())
}

fn discharge_one(em: &Emitter, vc: &Vc, script: &str, cfg: &SolverConfig) -> DischargeResult {
    let start = Instant::now();
    if vc.is_trivial() {
        return DischargeResult { id: vc.id.clone(), status: Status::Valid, seconds: 0.0, solver: String::new(), detail: None };
    }
    let mut last = (Status::SolverError, String::new(), Some("no solver answered".to_string()));
    for solver in &cfg.solvers {
        let (status, out) = run_solver(solver, script, cfg.timeout_secs);
        let detail = match status {
            Status::Valid => None,
            Status::InvalidWithModel => Some(model(em, vc, solver, cfg.timeout_secs).unwrap_or(out)),
            _ => Some(out),
        };
        last = (status, solver.name.clone(), detail);
        if matches!(status, Status::Valid | Status::InvalidWithModel) {
            break;
        }
    }
    DischargeResult {
        id: vc.id.clone(),
        status: last.0,
        seconds: start.elapsed().as_secs_f64(),
        solver: last.1,
        detail: last.2,
    }
}

fn model(em: &Emitter, vc: &Vc, solver: &Solver, timeout: u64) -> Option<String> {
    let script = em.script_with(vc, true).ok()?;
    let (status, out) = run_solver(solver, &script, timeout);
    (status == Status::InvalidWithModel).then_some(out)
}

/// Runs one solver process; the first output line decides the status.
pub fn run_solver(solver: &Solver, script: &str, timeout: u64) -> (Status, String) {
    let child = Command::new(&solver.path)
        .args(solver.args(timeout))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn();
    let mut child = match child {
        Ok(c) => c,
        Err(e) => return (Status::SolverError, format!("spawn {}: {e}", solver.path.display())),
    };
    if let Some(mut stdin) = child.stdin.take() {
        let _ = stdin.write_all(script.as_bytes());
    }
    let mut stdout = child.stdout.take();
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        if let Some(o) = stdout.as_mut() {
            let _ = o.read_to_string(&mut s);
        }
        s
    });
    let deadline = Instant::now() + Duration::from_secs(timeout) + Duration::from_millis(500);
    let exit = loop {
        match child.try_wait() {
            Ok(Some(st)) => break Some(st),
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            Err(_) => break None,
        }
    };
    let out = reader.join().unwrap_or_default();
    let Some(exit) = exit else { return (Status::Timeout, out) };
    match out.lines().next().map(str::trim) {
        Some("unsat") if exit.success() => (Status::Valid, out),
        Some("sat") => (Status::InvalidWithModel, out),
        Some("unknown") => (Status::Unknown, out),
        Some("timeout") => (Status::Timeout, out),
        _ => (Status::SolverError, out),
    }
}
