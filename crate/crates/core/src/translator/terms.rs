//! Specification terms to IR terms over an explicit state.

use super::{combine_terms, ir_type, TransError, TransResult};
use crate::ir::{field_name, IrType, LOp, PredKind, Term, TypeEnv};
use crate::sema::Globals;
use crate::surface::{Pattern, SourceType, Term as STerm, TermKind};

/// `cur` reads the current state; `old`, when present, the pre-state.
pub(crate) struct TermCx<'a> {
    pub g: &'a Globals,
    pub tenv: &'a TypeEnv,
    pub cur: Term,
    pub old: Option<Term>,
    pub vars: Vec<(String, IrType)>,
}

impl<'a> TermCx<'a> {
    pub fn new(
        g: &'a Globals,
        tenv: &'a TypeEnv,
        cur: Term,
        old: Option<Term>,
        vars: Vec<(String, IrType)>,
    ) -> Self {
        TermCx {
            g,
            tenv,
            cur,
            old,
            vars,
        }
    }

    pub fn all(&mut self, ts: &[STerm]) -> TransResult<Term> {
        let ts = ts
            .iter()
            .map(|t| self.tr(t))
            .collect::<TransResult<Vec<_>>>()?;
        Ok(combine_terms(&ts))
    }

    fn lookup(&self, x: &str) -> Option<&IrType> {
        self.vars.iter().rev().find(|(y, _)| y == x).map(|(_, t)| t)
    }

    fn state_field(&self, x: &str, t: &STerm) -> TransResult<Term> {
        if self.g.state.get(x).is_none() {
            return Err(TransError::new(
                t.span,
                format!("unknown state variable `{x}`"),
            ));
        }
        Ok(Term::field(self.cur.clone(), &field_name(x)))
    }

    fn closure_arg(&mut self, f: &STerm) -> TransResult<(Term, IrType)> {
        let ft = self.tr(f)?;
        let ty = self.tenv.type_of(&ft);
        if !ty.is_closure() {
            return Err(TransError::new(
                f.span,
                "`pre`/`post` expect a function or continuation",
            ));
        }
        Ok((ft, ty))
    }

    pub fn tr(&mut self, t: &STerm) -> TransResult<Term> {
        Ok(match &t.kind {
            TermKind::Int(n) => Term::Int(*n),
            TermKind::Bool(b) => Term::Bool(*b),
            TermKind::Unit => Term::Unit,
            TermKind::Var(x) => match self.lookup(x) {
                Some(ty) => Term::var(x, ty.clone()),
                None => self.state_field(x, t)?,
            },
            TermKind::Deref(x) => self.state_field(x, t)?,
            TermKind::Old(a) => {
                let Some(old) = self.old.clone() else {
                    return Err(TransError::new(t.span, "`old` has no pre-state here"));
                };
                let saved = std::mem::replace(&mut self.cur, old);
                let r = self.tr(a);
                self.cur = saved;
                r?
            }
            TermKind::Get(a, i) => Term::select(self.tr(a)?, self.tr(i)?),
            TermKind::Binary(op, a, b) => Term::bin(LOp::from_binop(*op), self.tr(a)?, self.tr(b)?),
            TermKind::Unary(op, a) => Term::Un(*op, Box::new(self.tr(a)?)),
            TermKind::Implies(a, b) => Term::implies(self.tr(a)?, self.tr(b)?),
            TermKind::Iff(a, b) => Term::iff(self.tr(a)?, self.tr(b)?),
            TermKind::Forall(bs, body) | TermKind::Exists(bs, body) => {
                let bs: Vec<(String, IrType)> =
                    bs.iter().map(|(x, ty)| (x.clone(), ir_type(ty))).collect();
                let n = self.vars.len();
                self.vars.extend(bs.iter().cloned());
                let body = self.tr(body);
                self.vars.truncate(n);
                let body = Box::new(body?);
                match &t.kind {
                    TermKind::Forall(..) => Term::Forall(bs, Vec::new(), body),
                    _ => Term::Exists(bs, body),
                }
            }
            TermKind::App(f, args) => self.app(f, args, t)?,
            TermKind::Ctor(c, args) => {
                let Some((dt, _)) = self.g.ctors.get(c) else {
                    return Err(TransError::new(
                        t.span,
                        format!("unknown constructor `{c}`"),
                    ));
                };
                let dt = IrType::Data(dt.clone());
                Term::Ctor(
                    c.clone(),
                    args.iter()
                        .map(|a| self.tr(a))
                        .collect::<TransResult<_>>()?,
                    dt,
                )
            }
            TermKind::If(c, a, b) => Term::ite(self.tr(c)?, self.tr(a)?, self.tr(b)?),
            TermKind::Match(s, arms) => {
                let st = self.tr(s)?;
                let sty = self.tenv.type_of(&st);
                let mut out = Vec::new();
                for (p, body) in arms {
                    let mut binds = Vec::new();
                    bind_pattern(self.tenv, p, &sty, &mut binds);
                    let n = self.vars.len();
                    self.vars.extend(binds);
                    let b = self.tr(body);
                    self.vars.truncate(n);
                    out.push((p.clone(), b?));
                }
                Term::Match(Box::new(st), out)
            }
        })
    }

    fn app(&mut self, f: &str, args: &[STerm], t: &STerm) -> TransResult<Term> {
        let arity = |n: usize| -> TransResult<()> {
            if args.len() != n {
                return Err(TransError::new(
                    t.span,
                    format!("`{f}` expects {n} arguments"),
                ));
            }
            Ok(())
        };
        match f {
            "length" => {
                arity(1)?;
                let inner = match &args[0].kind {
                    TermKind::Old(a) => a.as_ref(),
                    _ => &args[0],
                };
                match &inner.kind {
                    TermKind::Var(a)
                        if self.lookup(a).is_none() && self.g.state.get(a).is_some() =>
                    {
                        Ok(Term::Length(a.clone()))
                    }
                    _ => Err(TransError::new(t.span, "`length` applies to a state array")),
                }
            }
            "valid" => {
                arity(1)?;
                Ok(Term::valid(self.tr(&args[0])?, self.cur.clone()))
            }
            "pre" => {
                arity(2)?;
                let (k, ty) = self.closure_arg(&args[0])?;
                let x = self.tr(&args[1])?;
                Ok(Term::Pred(PredKind::Pre, ty, vec![k, x, self.cur.clone()]))
            }
            "post" => {
                arity(3)?;
                let (k, ty) = self.closure_arg(&args[0])?;
                let x = self.tr(&args[1])?;
                let r = self.tr(&args[2])?;
                let old = self.old.clone().unwrap_or_else(|| self.cur.clone());
                Ok(Term::Pred(
                    PredKind::Post,
                    ty,
                    vec![k, x, old, self.cur.clone(), r],
                ))
            }
            _ => Ok(Term::App(
                f.to_string(),
                args.iter()
                    .map(|a| self.tr(a))
                    .collect::<TransResult<_>>()?,
            )),
        }
    }
}

/// Binder types of a pattern matched against a value of type `ty`.
pub(crate) fn bind_pattern(
    tenv: &TypeEnv,
    p: &Pattern,
    ty: &IrType,
    out: &mut Vec<(String, IrType)>,
) {
    match p {
        Pattern::Wildcard => {}
        Pattern::Var(x) => out.push((x.clone(), ty.clone())),
        Pattern::Ctor(c, ps) => {
            if let Some((_, args)) = tenv.ctors.get(c) {
                for (q, t) in ps.iter().zip(args) {
                    bind_pattern(tenv, q, t, out);
                }
            }
        }
    }
}

/// Type environment for terms before the IR program exists.
pub(crate) fn type_env(g: &Globals, fields: &[(String, IrType)]) -> TypeEnv {
    let mut env = TypeEnv::default();
    env.fields = fields.iter().cloned().collect();
    for (name, l) in &g.logic {
        env.logic.insert(
            name.clone(),
            ir_type(&l.ret.clone().unwrap_or(SourceType::Bool)),
        );
    }
    for (c, (dt, args)) in &g.ctors {
        env.ctors.insert(
            c.clone(),
            (IrType::Data(dt.clone()), args.iter().map(ir_type).collect()),
        );
    }
    env
}
