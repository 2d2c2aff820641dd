//! Typing of specification terms.

use std::collections::BTreeSet;

use super::exhaustive::{bind_pattern, is_exhaustive};
use super::{Globals, SemaError, SemaResult};
use crate::surface::{BinOp, SourceType, Term, TermKind, UnOp};

pub const BUILTINS: [&str; 4] = ["length", "valid", "pre", "post"];

/// Scope for typing a term: local names plus whether `old` is permitted.
pub struct TermCtx<'g> {
    pub g: &'g Globals,
    pub vars: Vec<(String, SourceType)>,
    pub allow_old: bool,
}

pub fn first_order(t: &SourceType) -> bool {
    match t {
        SourceType::Int | SourceType::Bool | SourceType::Unit | SourceType::Named(_) => true,
        _ => false,
    }
}

impl<'g> TermCtx<'g> {
    pub fn new(g: &'g Globals, vars: Vec<(String, SourceType)>, allow_old: bool) -> TermCtx<'g> {
        TermCtx { g, vars, allow_old }
    }

    fn lookup(&self, x: &str) -> Option<&SourceType> {
        self.vars.iter().rev().find(|(y, _)| y == x).map(|(_, t)| t)
    }

    pub fn check_bool(&mut self, t: &Term) -> SemaResult<()> {
        self.expect(t, &SourceType::Bool)
    }

    pub fn expect(&mut self, t: &Term, want: &SourceType) -> SemaResult<()> {
        let got = self.infer(t)?;
        if &got != want {
            return Err(SemaError::new(
                t.span,
                format!("term has type `{got}`, expected `{want}`"),
            ));
        }
        Ok(())
    }

    pub fn infer(&mut self, t: &Term) -> SemaResult<SourceType> {
        let err = |m: String| Err(SemaError::new(t.span, m));
        match &t.kind {
            TermKind::Int(_) => Ok(SourceType::Int),
            TermKind::Bool(_) => Ok(SourceType::Bool),
            TermKind::Unit => Ok(SourceType::Unit),
            TermKind::Var(x) => {
                if let Some(ty) = self.lookup(x) {
                    return Ok(ty.clone());
                }
                match self.g.state.get(x) {
                    Some(SourceType::Array(e)) => Ok(SourceType::Array(e.clone())),
                    Some(_) => err(format!("reference `{x}` must be read with `!{x}`")),
                    None => err(format!("unbound variable `{x}`")),
                }
            }
            TermKind::Deref(x) => match self.g.state.get(x) {
                Some(SourceType::Ref(e)) => Ok((**e).clone()),
                Some(_) => err(format!("`{x}` is an array, not a reference")),
                None => err(format!("unknown reference `{x}`")),
            },
            TermKind::Old(a) => {
                if !self.allow_old {
                    return err("`old` is only allowed in postconditions".into());
                }
                self.infer(a)
            }
            TermKind::Get(a, i) => match self.infer(a)? {
                SourceType::Array(e) => {
                    self.expect(i, &SourceType::Int)?;
                    Ok(*e)
                }
                other => err(format!("indexing a value of type `{other}`")),
            },
            TermKind::Binary(op, a, b) => self.binary(*op, a, b, t),
            TermKind::Unary(UnOp::Neg, a) => {
                self.expect(a, &SourceType::Int)?;
                Ok(SourceType::Int)
            }
            TermKind::Unary(UnOp::Not, a) => {
                self.check_bool(a)?;
                Ok(SourceType::Bool)
            }
            TermKind::Implies(a, b) | TermKind::Iff(a, b) => {
                self.check_bool(a)?;
                self.check_bool(b)?;
                Ok(SourceType::Bool)
            }
            TermKind::Forall(bs, body) | TermKind::Exists(bs, body) => {
                for (x, ty) in bs {
                    if !first_order(ty) {
                        return err(format!("cannot quantify `{x}` over `{ty}`"));
                    }
                    if let SourceType::Named(n) = ty {
                        if !self.g.datatypes.contains_key(n) {
                            return err(format!("unknown type `{n}`"));
                        }
                    }
                }
                let n = self.vars.len();
                self.vars.extend(bs.iter().cloned());
                let r = self.check_bool(body);
                self.vars.truncate(n);
                r?;
                Ok(SourceType::Bool)
            }
            TermKind::App(f, args) => self.app(f, args, t),
            TermKind::Ctor(c, args) => {
                let Some((dt, tys)) = self.g.ctors.get(c).cloned() else {
                    return err(format!("unknown constructor `{c}`"));
                };
                if tys.len() != args.len() {
                    return err(format!(
                        "constructor `{c}` expects {} arguments, got {}",
                        tys.len(),
                        args.len()
                    ));
                }
                for (a, ty) in args.iter().zip(&tys) {
                    self.expect(a, ty)?;
                }
                Ok(SourceType::Named(dt))
            }
            TermKind::If(c, a, b) => {
                self.check_bool(c)?;
                let ty = self.infer(a)?;
                self.expect(b, &ty)?;
                Ok(ty)
            }
            TermKind::Match(s, arms) => {
                let sty = self.infer(s)?;
                let mut result: Option<SourceType> = None;
                for (p, body) in arms {
                    let mut binds = Vec::new();
                    bind_pattern(self.g, p, &sty, t.span, &mut binds)?;
                    let n = self.vars.len();
                    self.vars.extend(binds);
                    let r = match &result {
                        Some(ty) => self.expect(body, &ty.clone()).map(|_| ty.clone()),
                        None => self.infer(body),
                    };
                    self.vars.truncate(n);
                    result = Some(r?);
                }
                let rows = arms.iter().map(|(p, _)| vec![p.clone()]).collect();
                if !is_exhaustive(self.g, rows, &[sty]) {
                    return err("non-exhaustive match in term".into());
                }
                result.ok_or_else(|| SemaError::new(t.span, "empty match"))
            }
        }
    }

    fn binary(&mut self, op: BinOp, a: &Term, b: &Term, t: &Term) -> SemaResult<SourceType> {
        match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod => {
                self.expect(a, &SourceType::Int)?;
                self.expect(b, &SourceType::Int)?;
                Ok(SourceType::Int)
            }
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                self.expect(a, &SourceType::Int)?;
                self.expect(b, &SourceType::Int)?;
                Ok(SourceType::Bool)
            }
            BinOp::And | BinOp::Or => {
                self.check_bool(a)?;
                self.check_bool(b)?;
                Ok(SourceType::Bool)
            }
            BinOp::Eq | BinOp::Ne => {
                let ty = self.infer(a)?;
                if matches!(ty, SourceType::Arrow(..) | SourceType::Cont(..)) {
                    return Err(SemaError::new(
                        t.span,
                        format!("equality on `{ty}` is not supported"),
                    ));
                }
                self.expect(b, &ty)?;
                Ok(SourceType::Bool)
            }
        }
    }

    fn app(&mut self, f: &str, args: &[Term], t: &Term) -> SemaResult<SourceType> {
        let err = |m: String| Err(SemaError::new(t.span, m));
        let arity = |n: usize| -> SemaResult<()> {
            if args.len() != n {
                return Err(SemaError::new(
                    t.span,
                    format!("`{f}` expects {n} arguments, got {}", args.len()),
                ));
            }
            Ok(())
        };
        match f {
            "length" => {
                arity(1)?;
                match self.infer(&args[0])? {
                    SourceType::Array(_) => Ok(SourceType::Int),
                    other => err(format!("`length` of a value of type `{other}`")),
                }
            }
            "valid" => {
                arity(1)?;
                match self.infer(&args[0])? {
                    SourceType::Cont(..) => Ok(SourceType::Bool),
                    other => err(format!("`valid` of a value of type `{other}`")),
                }
            }
            "pre" | "post" => {
                arity(if f == "pre" { 2 } else { 3 })?;
                let (a, b) = match self.infer(&args[0])? {
                    SourceType::Arrow(a, b) | SourceType::Cont(a, b) => (*a, *b),
                    other => return err(format!("`{f}` of a value of type `{other}`")),
                };
                self.expect(&args[1], &a)?;
                if f == "post" {
                    self.expect(&args[2], &b)?;
                }
                Ok(SourceType::Bool)
            }
            _ => {
                let Some(d) = self.g.logic.get(f).cloned() else {
                    return err(format!("unknown logic symbol `{f}`"));
                };
                arity(d.params.len())?;
                for (a, (_, ty)) in args.iter().zip(&d.params) {
                    self.expect(a, ty)?;
                }
                Ok(d.result_type())
            }
        }
    }
}

/// Free variables of a term, excluding `!x` state reads and logic symbols.
pub fn free_term_vars(t: &Term) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect(t, &mut Vec::new(), &mut out);
    out
}

fn collect(t: &Term, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    match &t.kind {
        TermKind::Var(x) => {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
        TermKind::Int(_) | TermKind::Bool(_) | TermKind::Unit | TermKind::Deref(_) => {}
        TermKind::Old(a) | TermKind::Unary(_, a) => collect(a, bound, out),
        TermKind::Get(a, b)
        | TermKind::Binary(_, a, b)
        | TermKind::Implies(a, b)
        | TermKind::Iff(a, b) => {
            collect(a, bound, out);
            collect(b, bound, out);
        }
        TermKind::Forall(bs, body) | TermKind::Exists(bs, body) => {
            let n = bound.len();
            bound.extend(bs.iter().map(|(x, _)| x.clone()));
            collect(body, bound, out);
            bound.truncate(n);
        }
        TermKind::App(_, args) | TermKind::Ctor(_, args) => {
            args.iter().for_each(|a| collect(a, bound, out))
        }
        TermKind::If(a, b, c) => {
            collect(a, bound, out);
            collect(b, bound, out);
            collect(c, bound, out);
        }
        TermKind::Match(s, arms) => {
            collect(s, bound, out);
            for (p, a) in arms {
                let n = bound.len();
                let mut bs = Vec::new();
                p.binders(&mut bs);
                bound.extend(bs);
                collect(a, bound, out);
                bound.truncate(n);
            }
        }
    }
}
