//! Verification conditions by forward symbolic execution of the IR.
//!
//! Each routine body is executed over symbolic values; paths are merged at
//! joins, so every obligation site yields exactly one condition.

mod exec;
mod simplify;

use std::fmt;

use serde::Serialize;

use crate::ir::{print_term, IrProgram, IrType, LOp, Term};
use crate::surface::Span;

pub use simplify::{simplify, Unfold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VcKind {
    Postcondition,
    PreconditionAtCall,
    RaisesAtPerform,
    ContinuationValidity,
    ContinuationPrecondition,
    HandlerInvariantNormal,
    HandlerInvariantExceptional,
    VariantDecrease,
    WritesFrame,
}

impl VcKind {
    pub fn name(self) -> &'static str {
        match self {
            VcKind::Postcondition => "postcondition",
            VcKind::PreconditionAtCall => "precondition-at-call",
            VcKind::RaisesAtPerform => "raises-at-perform",
            VcKind::ContinuationValidity => "continuation-validity",
            VcKind::ContinuationPrecondition => "continuation-precondition",
            VcKind::HandlerInvariantNormal => "handler-invariant-normal",
            VcKind::HandlerInvariantExceptional => "handler-invariant-exceptional",
            VcKind::VariantDecrease => "variant-decrease",
            VcKind::WritesFrame => "writes-frame",
        }
    }
}

impl fmt::Display for VcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vc {
    /// `routine.n`, numbered in generation order.
    pub id: String,
    /// Top-level routine the obligation belongs to.
    pub routine: String,
    pub kind: VcKind,
    pub span: Span,
    pub hyps: Vec<Term>,
    pub goal: Term,
}

impl Vc {
    /// `forall free. hyps -> goal`.
    pub fn formula(&self) -> Term {
        let body = Term::implies(Term::and_all(self.hyps.iter().cloned()), self.goal.clone());
        let mut free = self.goal.free_vars();
        for h in &self.hyps {
            for v in h.free_vars() {
                if !free.iter().any(|(x, _)| *x == v.0) {
                    free.push(v);
                }
            }
        }
        Term::forall(free, Vec::new(), body)
    }

    /// Free symbols with their types, goal first.
    pub fn symbols(&self) -> Vec<(String, IrType)> {
        match self.formula() {
            Term::Forall(bs, _, _) => bs,
            _ => Vec::new(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.goal == Term::Bool(true) || self.hyps.iter().any(|h| *h == Term::Bool(false))
    }
}

/// Renders a VC with its provenance, one hypothesis per line.
pub fn print_vc(vc: &Vc, fields: &[(String, IrType)]) -> String {
    let mut out = format!("vc {} [{}] {} at {}\n", vc.id, vc.kind, vc.routine, vc.span);
    for h in &vc.hyps {
        out.push_str("  assume ");
        out.push_str(&print_term(fields, h));
        out.push('\n');
    }
    out.push_str("  prove  ");
    out.push_str(&print_term(fields, &vc.goal));
    out.push('\n');
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcError {
    pub routine: String,
    pub message: String,
}

impl fmt::Display for VcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.routine, self.message)
    }
}

impl std::error::Error for VcError {}

/// All obligations of a well-formed program, unsimplified.
pub fn gen_vcs(p: &IrProgram) -> Result<Vec<Vc>, VcError> {
    exec::generate(p)
}

/// Simplifies hypotheses and goal; a goal of `true` marks the VC trivial.
pub fn simplify_vc(vc: &Vc, u: &Unfold) -> Vc {
    let mut hyps = Vec::new();
    for h in &vc.hyps {
        flatten(simplify(h, u), &mut hyps);
    }
    hyps.retain(|h| *h != Term::Bool(true));
    let goal = simplify(&vc.goal, u);
    Vc {
        hyps,
        goal,
        ..vc.clone()
    }
}

fn flatten(t: Term, out: &mut Vec<Term>) {
    match t {
        Term::Bin(LOp::And, a, b) => {
            flatten(*a, out);
            flatten(*b, out);
        }
        t => out.push(t),
    }
}

/// Generation followed by simplification with logic unfolding.
pub fn gen_simplified(p: &IrProgram) -> Result<Vec<Vc>, VcError> {
    let u = Unfold::of_program(p);
    Ok(gen_vcs(p)?.iter().map(|v| simplify_vc(v, &u)).collect())
}
