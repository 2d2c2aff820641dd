use std::fmt;
use std::time::Instant;

use effv_core::ir::IrProgram;
use effv_core::sema::{check_effect_rows, typecheck, TypedProgram};
use effv_core::smt::{discharge, DischargeResult, SolverConfig, Status};
use effv_core::surface::parse_program;
use effv_core::translator::{translate_program, Translation};
use effv_core::vcgen::{gen_simplified, Vc};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Parse,
    Typecheck,
    EffectRows,
    Translate,
    VcGen,
    Solver,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Parse => "parse",
            Stage::Typecheck => "typecheck",
            Stage::EffectRows => "effect-rows",
            Stage::Translate => "translate",
            Stage::VcGen => "vc-gen",
            Stage::Solver => "solver",
        })
    }
}

/// A program rejected by one of the pipeline stages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.stage, self.message)
    }
}

impl std::error::Error for StageError {}

fn at<E: fmt::Display>(stage: Stage) -> impl Fn(E) -> StageError {
    move |e| StageError { stage, message: e.to_string() }
}

/// Parsing, type checking and effect-row checking.
pub fn check(text: &str) -> Result<TypedProgram, StageError> {
    let p = parse_program(text).map_err(at(Stage::Parse))?;
    let tp = typecheck(&p).map_err(at(Stage::Typecheck))?;
    check_effect_rows(&tp).map_err(at(Stage::EffectRows))?;
    Ok(tp)
}

pub fn translate(tp: &TypedProgram) -> Result<Translation, StageError> {
    translate_program(tp).map_err(at(Stage::Translate))
}

pub fn vcs(ir: &IrProgram) -> Result<Vec<Vc>, StageError> {
    gen_simplified(ir).map_err(at(Stage::VcGen))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VcOutcome {
    pub id: String,
    pub routine: String,
    pub kind: String,
    pub line: u32,
    pub status: Status,
    pub seconds: f64,
    pub solver: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Proof {
    pub vcs: Vec<VcOutcome>,
    pub seconds: f64,
}

impl Proof {
    pub fn all_valid(&self) -> bool {
        self.vcs.iter().all(|v| v.status == Status::Valid)
    }

    pub fn count(&self, s: Status) -> usize {
        self.vcs.iter().filter(|v| v.status == s).count()
    }
}

/// Discharges every VC of `ir`.
pub fn prove(ir: &IrProgram, vcs: &[Vc], cfg: &SolverConfig) -> Result<Proof, StageError> {
    let start = Instant::now();
    let rs: Vec<DischargeResult> = discharge(ir, vcs, cfg).map_err(at(Stage::Solver))?;
    let vcs = vcs
        .iter()
        .zip(rs)
        .map(|(v, r)| VcOutcome {
            id: v.id.clone(),
            routine: v.routine.clone(),
            kind: v.kind.name().to_string(),
            line: v.span.line,
            status: r.status,
            seconds: r.seconds,
            solver: r.solver,
            detail: r.detail,
        })
        .collect();
    Ok(Proof { vcs, seconds: start.elapsed().as_secs_f64() })
}
