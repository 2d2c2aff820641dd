//! Expression translation: one rule per syntactic form, threading mu.

use std::collections::BTreeSet;

use super::terms::{bind_pattern, TermCx};
use super::{ir_type, Rule, TraceEntry, TransEnv, TransError, TransResult};
use crate::ir::{field_name, Decl, Expr, ExprKind, IrType, Term, TypeEnv};
use crate::sema::{Globals, TypedProgram};
use crate::surface::{self as s, BinOp, Span};

#[derive(Debug, Clone)]
pub(crate) enum Local {
    Val(IrType),
    Fun {
        writes: BTreeSet<String>,
        performs: Vec<String>,
    },
}

pub(crate) struct Tx<'a> {
    pub tp: &'a TypedProgram,
    pub g: &'a Globals,
    pub tenv: TypeEnv,
    pub env: TransEnv,
    pub trace: Vec<TraceEntry>,
    pub next_id: u32,
    pub fresh: u32,
    pub scope: Vec<(String, Local)>,
    /// Continuation types introduced so far; each gets a validity field.
    pub cont_types: BTreeSet<IrType>,
    /// Effects that may escape the expression being translated.
    pub raised: BTreeSet<String>,
    /// Local protocol declarations awaiting placement before their owner.
    pub pending: Vec<Decl>,
    /// Local protocols already emitted.
    pub emitted: BTreeSet<String>,
}

impl<'a> Tx<'a> {
    pub fn new(tp: &'a TypedProgram, tenv: TypeEnv) -> Tx<'a> {
        Tx {
            tp,
            g: &tp.globals,
            tenv,
            env: TransEnv::default(),
            trace: Vec::new(),
            next_id: 0,
            fresh: 0,
            scope: Vec::new(),
            cont_types: BTreeSet::new(),
            raised: BTreeSet::new(),
            pending: Vec::new(),
            emitted: BTreeSet::new(),
        }
    }

    pub fn mk(&mut self, span: Span, ty: IrType, kind: ExprKind) -> Expr {
        self.next_id += 1;
        Expr {
            id: self.next_id,
            span,
            ty,
            kind,
        }
    }

    pub fn record(&mut self, rule: Rule, src: &s::Expr, ir: &Expr) {
        self.trace.push(TraceEntry {
            rule,
            span: src.span,
            source: Some(src.id),
            ir_node: ir.id,
        });
    }

    pub fn record_decl(&mut self, rule: Rule, span: Span) {
        self.trace.push(TraceEntry {
            rule,
            span,
            source: None,
            ir_node: 0,
        });
    }

    pub fn fresh_name(&mut self, base: &str) -> String {
        self.fresh += 1;
        format!("_{base}{}", self.fresh)
    }

    /// Names of `_` and `()` parameters become fresh reserved names.
    pub fn param_name(&mut self, name: &str) -> String {
        if name == "_" || name == "()" {
            self.fresh_name("p")
        } else {
            name.to_string()
        }
    }

    pub fn push_val(&mut self, x: &str, ty: IrType) {
        if ty.is_closure() {
            self.env.nu.insert(x.to_string());
        }
        self.scope.push((x.to_string(), Local::Val(ty)));
    }

    pub fn lookup(&self, x: &str) -> Option<&Local> {
        self.scope
            .iter()
            .rev()
            .find(|(y, _)| y == x)
            .map(|(_, l)| l)
    }

    /// Value bindings visible to specification terms.
    pub fn term_vars(&self) -> Vec<(String, IrType)> {
        self.scope
            .iter()
            .filter_map(|(x, l)| match l {
                Local::Val(t) => Some((x.clone(), t.clone())),
                Local::Fun { .. } => None,
            })
            .collect()
    }

    pub fn term_cx(&self, cur: Term, old: Option<Term>, extra: &[(String, IrType)]) -> TermCx<'_> {
        let mut vars = self.term_vars();
        vars.extend(extra.iter().cloned());
        TermCx::new(self.g, &self.tenv, cur, old, vars)
    }

    pub fn ty_of(&self, e: &s::Expr) -> IrType {
        ir_type(self.tp.type_of(e.id))
    }

    pub fn all_state_vars(&self) -> BTreeSet<String> {
        self.g.state.names().map(str::to_string).collect()
    }

    /// State fields of `vars`, in state-model order.
    pub fn fields_of(&self, vars: &BTreeSet<String>) -> Vec<String> {
        self.g
            .state
            .names()
            .filter(|x| vars.contains(*x))
            .map(field_name)
            .collect()
    }

    /// Exception payload binders of an effect: protocol captures, then
    /// the effect arguments under the protocol's parameter names.
    pub fn effect_binders(&self, eff: &str, span: Span) -> TransResult<Vec<(String, IrType)>> {
        let Some(info) = self.g.protocols.get(eff) else {
            return Err(TransError::new(
                span,
                format!("no protocol for effect `{eff}`"),
            ));
        };
        let Some((args, _)) = self.env.sigma.get(eff) else {
            return Err(TransError::new(span, format!("unknown effect `{eff}`")));
        };
        let mut out: Vec<(String, IrType)> = info
            .captures
            .iter()
            .map(|c| (c.name.clone(), ir_type(&c.ty)))
            .collect();
        if info.protocol.params.is_empty() {
            out.extend(args.iter().map(|t| ("_u".to_string(), t.clone())));
        } else {
            for (i, (x, t)) in info.protocol.params.iter().zip(args).enumerate() {
                let x = if x == "_" {
                    format!("_a{i}")
                } else {
                    x.clone()
                };
                out.push((x, t.clone()));
            }
        }
        Ok(out)
    }

    pub fn effect_modifies(&self, eff: &str) -> BTreeSet<String> {
        self.g
            .protocols
            .get(eff)
            .map(|i| i.protocol.modifies.iter().cloned().collect())
            .unwrap_or_default()
    }

    pub fn pre_app(eff: &str, args: Vec<Term>, state: Term) -> Term {
        let mut args = args;
        args.push(state);
        Term::App(format!("pre_{eff}"), args)
    }

    pub fn expr(&mut self, e: &s::Expr) -> TransResult<Expr> {
        use s::ExprKind as K;
        let ty = self.ty_of(e);
        let sp = e.span;
        let (rule, out) = match &e.kind {
            K::Int(n) => (Rule::THom, self.mk(sp, ty, ExprKind::Int(*n))),
            K::Bool(b) => (Rule::THom, self.mk(sp, ty, ExprKind::Bool(*b))),
            K::Unit => (Rule::THom, self.mk(sp, ty, ExprKind::Unit)),
            K::Var(x) => match self.lookup(x) {
                Some(Local::Val(_)) => (Rule::THom, self.mk(sp, ty, ExprKind::Var(x.clone()))),
                _ => {
                    return Err(TransError::new(
                        sp,
                        format!("function `{x}` used as a value; wrap it in `fun`"),
                    ));
                }
            },
            K::Binary(BinOp::And, a, b) => {
                let a = self.expr(a)?;
                let b = self.expr(b)?;
                let f = self.mk(sp, IrType::Bool, ExprKind::Bool(false));
                (
                    Rule::THom,
                    self.mk(sp, ty, ExprKind::If(Box::new(a), Box::new(b), Box::new(f))),
                )
            }
            K::Binary(BinOp::Or, a, b) => {
                let a = self.expr(a)?;
                let b = self.expr(b)?;
                let t = self.mk(sp, IrType::Bool, ExprKind::Bool(true));
                (
                    Rule::THom,
                    self.mk(sp, ty, ExprKind::If(Box::new(a), Box::new(t), Box::new(b))),
                )
            }
            K::Binary(op, a, b) => {
                let a = self.expr(a)?;
                let b = self.expr(b)?;
                (
                    Rule::THom,
                    self.mk(sp, ty, ExprKind::Bin(*op, Box::new(a), Box::new(b))),
                )
            }
            K::Unary(op, a) => {
                let a = self.expr(a)?;
                (Rule::THom, self.mk(sp, ty, ExprKind::Un(*op, Box::new(a))))
            }
            K::Deref(x) => (Rule::THom, self.mk(sp, ty, ExprKind::Read(x.clone()))),
            K::Assign(x, v) => {
                let v = self.expr(v)?;
                self.env.mu.insert(x.clone());
                (
                    Rule::THom,
                    self.mk(sp, ty, ExprKind::Write(x.clone(), Box::new(v))),
                )
            }
            K::ArrayGet(a, i) => {
                let i = self.expr(i)?;
                (
                    Rule::THom,
                    self.mk(sp, ty, ExprKind::ArrayGet(a.clone(), Box::new(i))),
                )
            }
            K::ArraySet(a, i, v) => {
                let i = self.expr(i)?;
                let v = self.expr(v)?;
                self.env.mu.insert(a.clone());
                (
                    Rule::THom,
                    self.mk(
                        sp,
                        ty,
                        ExprKind::ArraySet(a.clone(), Box::new(i), Box::new(v)),
                    ),
                )
            }
            K::ArrayLength(a) => (
                Rule::THom,
                self.mk(sp, ty, ExprKind::ArrayLength(a.clone())),
            ),
            K::Let(x, _, v, rest) => {
                let v = self.expr(v)?;
                self.push_val(x, v.ty.clone());
                let rest = self.expr(rest);
                self.scope.pop();
                let rest = rest?;
                (
                    Rule::TLetIn,
                    self.mk(
                        sp,
                        ty,
                        ExprKind::Let(x.clone(), Box::new(v), Box::new(rest)),
                    ),
                )
            }
            K::LetFun(def, rest) => {
                let sig = self.tp.local_funs.get(&e.id).cloned().ok_or_else(|| {
                    TransError::new(
                        sp,
                        format!("local function `{}` was not type checked", def.name),
                    )
                })?;
                let (mu, raised) = (self.env.mu.clone(), std::mem::take(&mut self.raised));
                let r = self.fun_routine(def, &sig, crate::ir::RoutineKind::Local, sp);
                self.env.mu = mu;
                self.raised = raised;
                let r = r?;
                let local = Local::Fun {
                    writes: self.vars_of_fields(&r.effective_writes),
                    performs: sig.spec.performs.clone(),
                };
                self.scope.push((def.name.clone(), local));
                let rest = self.expr(rest);
                self.scope.pop();
                let rest = rest?;
                (
                    Rule::TLetIn,
                    self.mk(sp, ty, ExprKind::LetRoutine(Box::new(r), Box::new(rest))),
                )
            }
            K::Fun {
                spec, param, body, ..
            } => (Rule::TFun, self.lambda(e, spec, param, body)?),
            K::App(callee, args) => self.app(e, callee, args)?,
            K::If(c, t, f) => {
                let c = self.expr(c)?;
                let t = self.expr(t)?;
                let f = match f {
                    Some(f) => self.expr(f)?,
                    None => self.mk(sp, IrType::Unit, ExprKind::Unit),
                };
                (
                    Rule::TIf,
                    self.mk(sp, ty, ExprKind::If(Box::new(c), Box::new(t), Box::new(f))),
                )
            }
            K::Seq(a, b) => {
                let a = self.expr(a)?;
                let b = self.expr(b)?;
                (
                    Rule::TSeq,
                    self.mk(sp, ty, ExprKind::Seq(Box::new(a), Box::new(b))),
                )
            }
            K::Match(scrut, arms) => {
                let sv = self.expr(scrut)?;
                let mut out = Vec::new();
                for (p, a) in arms {
                    let mut binds = Vec::new();
                    bind_pattern(&self.tenv, p, &sv.ty, &mut binds);
                    let n = self.scope.len();
                    for (x, t) in binds {
                        self.push_val(&x, t);
                    }
                    let a = self.expr(a);
                    self.scope.truncate(n);
                    out.push((p.clone(), a?));
                }
                (
                    Rule::TMatch,
                    self.mk(sp, ty, ExprKind::Match(Box::new(sv), out)),
                )
            }
            K::Ctor(c, args) => {
                let args = args
                    .iter()
                    .map(|a| self.expr(a))
                    .collect::<TransResult<Vec<_>>>()?;
                (Rule::THom, self.mk(sp, ty, ExprKind::Ctor(c.clone(), args)))
            }
            K::Perform(eff, args) => (Rule::TPerform, self.perform(e, eff, args)?),
            K::Try(h) => (Rule::TTry, self.handler(e, h)?),
            K::Continue(k, arg) => {
                let arg = self.expr(arg)?;
                let kty = match self.lookup(k) {
                    Some(Local::Val(t @ IrType::Cont(..))) => t.clone(),
                    _ => return Err(TransError::new(sp, format!("`{k}` is not a continuation"))),
                };
                let kv = self.mk(sp, kty, ExprKind::Var(k.clone()));
                let kind = ExprKind::Continue {
                    k: Box::new(kv),
                    arg: Box::new(arg),
                    writes: Vec::new(),
                };
                (Rule::TApp, self.mk(sp, ty, kind))
            }
        };
        self.record(rule, e, &out);
        Ok(out)
    }

    pub fn vars_of_fields(&self, fields: &[String]) -> BTreeSet<String> {
        self.g
            .state
            .names()
            .filter(|x| fields.contains(&field_name(x)))
            .map(str::to_string)
            .collect()
    }

    fn perform(&mut self, e: &s::Expr, eff: &str, args: &[s::Expr]) -> TransResult<Expr> {
        let sp = e.span;
        let Some((arg_tys, reply)) = self.env.sigma.get(eff).cloned() else {
            return Err(TransError::new(
                sp,
                format!("perform of undeclared effect `{eff}`"),
            ));
        };
        let Some(info) = self.g.protocols.get(eff).cloned() else {
            return Err(TransError::new(
                sp,
                format!("no protocol in scope for effect `{eff}`"),
            ));
        };
        let mut actuals = Vec::new();
        for c in &info.captures {
            let t = ir_type(&c.ty);
            actuals.push(self.mk(sp, t, ExprKind::Var(c.name.clone())));
        }
        if args.is_empty() {
            for t in arg_tys {
                actuals.push(self.mk(sp, t, ExprKind::Unit));
            }
        } else {
            for a in args {
                actuals.push(self.expr(a)?);
            }
        }
        self.env.mu.extend(info.protocol.modifies.iter().cloned());
        self.raised.insert(eff.to_string());
        Ok(self.mk(sp, reply, ExprKind::Call(format!("perform_{eff}"), actuals)))
    }

    fn app(
        &mut self,
        e: &s::Expr,
        callee: &s::Expr,
        args: &[s::Expr],
    ) -> TransResult<(Rule, Expr)> {
        let sp = e.span;
        let ty = self.ty_of(e);
        if let s::ExprKind::Var(f) = &callee.kind {
            let named = match self.lookup(f) {
                Some(Local::Fun {
                    writes, performs, ..
                }) => Some((writes.clone(), performs.clone())),
                Some(Local::Val(_)) => None,
                None => self.g.functions.get(f).map(|sig| {
                    (
                        self.env.delta.get(f).cloned().unwrap_or_default(),
                        sig.spec.performs.clone(),
                    )
                }),
            };
            if let Some((writes, performs)) = named {
                let args = args
                    .iter()
                    .map(|a| self.expr(a))
                    .collect::<TransResult<Vec<_>>>()?;
                self.env.mu.extend(writes);
                self.raised.extend(performs);
                let call = self.mk(sp, ty, ExprKind::Call(f.clone(), args));
                self.record(Rule::THom, callee, &call);
                return Ok((Rule::TApp, call));
            }
        }
        let mut acc = self.expr(callee)?;
        for a in args {
            let a = self.expr(a)?;
            let rty = match &acc.ty {
                IrType::Lambda(_, b) => (**b).clone(),
                other => {
                    return Err(TransError::new(
                        sp,
                        format!("applying a value of type {other}"),
                    ))
                }
            };
            acc = self.mk(sp, rty, ExprKind::Apply(Box::new(acc), Box::new(a)));
        }
        self.env.mu = self.all_state_vars();
        Ok((Rule::TAppDefun, acc))
    }
}
