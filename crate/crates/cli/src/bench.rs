use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use effv_core::smt::{SolverConfig, Status};
use serde::Serialize;

use crate::lines::{count_lines, LineCounts};
use crate::pipeline::{self, StageError};

pub const REPORT_SCHEMA: &str = "effv-bench";
/// Bumped on any incompatible change to the JSON layout.
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileReport {
    pub file: String,
    pub case: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<StageError>,
    pub lines: LineCounts,
    pub vcs: usize,
    pub valid: usize,
    pub invalid: usize,
    pub unknown: usize,
    pub timeout: usize,
    pub solver_error: usize,
    pub prove_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Totals {
    pub files: usize,
    pub errors: usize,
    pub lines: LineCounts,
    pub vcs: usize,
    pub valid: usize,
    pub prove_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub version: u32,
    pub solver: String,
    pub timeout_secs: u64,
    pub files: Vec<FileReport>,
    pub totals: Totals,
}

/// Row name: the `(* case: ... *)` header if present, else the file stem.
pub fn case_name(path: &Path, text: &str) -> String {
    text.lines()
        .next()
        .and_then(|l| l.trim().strip_prefix("(* case:"))
        .and_then(|l| l.strip_suffix("*)"))
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| path.file_stem().unwrap_or_default().to_string_lossy().into_owned())
}

/// Runs the whole pipeline on one file. Failures are recorded, not raised.
pub fn bench_file(path: &Path, cfg: &SolverConfig) -> FileReport {
    let text = std::fs::read_to_string(path);
    let mut r = FileReport {
        file: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
        case: String::new(),
        ok: false,
        error: None,
        lines: LineCounts::default(),
        vcs: 0,
        valid: 0,
        invalid: 0,
        unknown: 0,
        timeout: 0,
        solver_error: 0,
        prove_seconds: 0.0,
    };
    let text = match text {
        Ok(t) => t,
        Err(e) => {
            r.case = case_name(path, "");
            r.error = Some(StageError { stage: pipeline::Stage::Parse, message: e.to_string() });
            return r;
        }
    };
    r.case = case_name(path, &text);
    r.lines = count_lines(&text);
    let proof = pipeline::check(&text).and_then(|tp| {
        let t = pipeline::translate(&tp)?;
        let vcs = pipeline::vcs(&t.ir)?;
        pipeline::prove(&t.ir, &vcs, cfg)
    });
    match proof {
        Ok(p) => {
            r.ok = true;
            r.vcs = p.vcs.len();
            r.valid = p.count(Status::Valid);
            r.invalid = p.count(Status::InvalidWithModel);
            r.unknown = p.count(Status::Unknown);
            r.timeout = p.count(Status::Timeout);
            r.solver_error = p.count(Status::SolverError);
            r.prove_seconds = p.seconds;
        }
        Err(e) => r.error = Some(e),
    }
    r
}

/// Source files directly inside `dir`, sorted by name.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut fs: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "eff"))
        .collect();
    fs.sort();
    Ok(fs)
}

/// Benchmarks every file of `dir`, `cfg.jobs` files at a time; each file's
/// VCs are discharged one after another.
pub fn bench(dir: &Path, cfg: &SolverConfig) -> Result<Report> {
    let files = corpus_files(dir)?;
    let per_file = SolverConfig { jobs: 1, ..cfg.clone() };
    let slots: Mutex<Vec<Option<FileReport>>> = Mutex::new(vec![None; files.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..cfg.jobs.clamp(1, files.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= files.len() {
                    break;
                }
                let r = bench_file(&files[i], &per_file);
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    let files: Vec<FileReport> = slots.into_inner().unwrap_or_else(|e| e.into_inner()).into_iter().flatten().collect();
    let mut totals = Totals::default();
    for f in &files {
        totals.files += 1;
        totals.errors += (!f.ok) as usize;
        totals.lines += f.lines;
        totals.vcs += f.vcs;
        totals.valid += f.valid;
        totals.prove_seconds += f.prove_seconds;
    }
    Ok(Report {
        schema: REPORT_SCHEMA,
        version: REPORT_VERSION,
        solver: cfg.solvers.first().map(|s| s.name.clone()).unwrap_or_default(),
        timeout_secs: cfg.timeout_secs,
        files,
        totals,
    })
}

/// Aligned text table, one row per file and a totals row.
pub fn table(r: &Report) -> String {
    let head = ["Case", "VCs", "Valid", "LOC", "Spec", "Ghost", "Time (s)"];
    let mut rows: Vec<[String; 7]> = Vec::new();
    for f in &r.files {
        if f.ok {
            rows.push([
                f.case.clone(),
                f.vcs.to_string(),
                f.valid.to_string(),
                f.lines.code.to_string(),
                f.lines.spec.to_string(),
                f.lines.ghost.to_string(),
                format!("{:.2}", f.prove_seconds),
            ]);
        } else {
            let e = f.error.as_ref().map(|e| e.stage.to_string()).unwrap_or_default();
            rows.push([
                f.case.clone(),
                "-".into(),
                "-".into(),
                f.lines.code.to_string(),
                f.lines.spec.to_string(),
                f.lines.ghost.to_string(),
                format!("error ({e})"),
            ]);
        }
    }
    if !r.files.is_empty() {
        let t = &r.totals;
        rows.push([
            "Total".into(),
            t.vcs.to_string(),
            t.valid.to_string(),
            t.lines.code.to_string(),
            t.lines.spec.to_string(),
            t.lines.ghost.to_string(),
            format!("{:.2}", t.prove_seconds),
        ]);
    }
    let mut width = head.map(str::len);
    for row in &rows {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(width).enumerate() {
            if i == 0 {
                s.push_str(&format!("{c:<w$}"));
            } else {
                s.push_str(&format!("  {c:>w$}"));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(&head.map(String::from));
    out.push_str(&line(&width.map(|w| "-".repeat(w))));
    for row in &rows {
        out.push_str(&line(row));
    }
    out
}
