//! Bidirectional type checking of expressions and function specifications.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::env::{check_protocol, known_type, register_protocol};
use super::exhaustive::{bind_pattern, is_exhaustive};
use super::terms::{first_order, TermCtx};
use super::{FunParam, FunSig, Globals, SemaError, SemaResult, TypedProgram};
use crate::surface::*;

#[derive(Debug, Clone)]
enum Local {
    Val(SourceType),
    Fun(FunSig),
    Cont { arg: SourceType, ret: SourceType },
}

struct Checker {
    g: Globals,
    types: HashMap<NodeId, SourceType>,
    local_funs: HashMap<NodeId, FunSig>,
    closure_performs: BTreeSet<String>,
    scope: Vec<(String, Local)>,
    /// Names of the named functions enclosing the current point.
    owners: Vec<String>,
}

fn mismatch(span: Span, got: &SourceType, want: &SourceType) -> SemaError {
    SemaError::new(
        span,
        format!("expression has type `{got}`, expected `{want}`"),
    )
}

pub fn check_program(p: &SourceProgram, g: Globals) -> SemaResult<TypedProgram> {
    let mut c = Checker {
        g,
        types: HashMap::new(),
        local_funs: HashMap::new(),
        closure_performs: BTreeSet::new(),
        scope: Vec::new(),
        owners: Vec::new(),
    };
    let mut rows = BTreeMap::new();
    for d in &p.decls {
        match d {
            Decl::State(s) => {
                let elem = match &s.ty {
                    SourceType::Ref(a) | SourceType::Array(a) => (**a).clone(),
                    _ => unreachable!("state types are validated with the globals"),
                };
                match &s.init {
                    StateInit::Ref(e) => c.check(e, &elem)?,
                    StateInit::Array(n, v) => {
                        c.check(n, &SourceType::Int)?;
                        c.check(v, &elem)?;
                    }
                }
            }
            Decl::Fun(f) => {
                if c.g.functions.contains_key(&f.def.name) {
                    return Err(SemaError::new(
                        f.span,
                        format!("duplicate function `{}`", f.def.name),
                    ));
                }
                let sig = c.fun_def(&f.def, f.span)?;
                rows.insert(
                    sig.name.clone(),
                    sig.spec.performs.iter().cloned().collect(),
                );
                c.g.functions.insert(sig.name.clone(), sig);
            }
            _ => {}
        }
    }
    Ok(TypedProgram {
        program: p.clone(),
        globals: c.g,
        types: c.types,
        effect_rows: rows,
        local_funs: c.local_funs,
        closure_performs: c.closure_performs,
    })
}

impl Checker {
    fn lookup(&self, x: &str) -> Option<&Local> {
        self.scope
            .iter()
            .rev()
            .find(|(y, _)| y == x)
            .map(|(_, l)| l)
    }

    fn push(&mut self, x: &str, l: Local) {
        if x != "_" && x != "()" {
            self.scope.push((x.to_string(), l));
        }
    }

    /// Values and continuations visible to specification terms.
    fn term_scope(&self) -> Vec<(String, SourceType)> {
        self.scope
            .iter()
            .filter_map(|(x, l)| match l {
                Local::Val(t) => Some((x.clone(), t.clone())),
                Local::Cont { arg, ret } => Some((
                    x.clone(),
                    SourceType::Cont(Box::new(arg.clone()), Box::new(ret.clone())),
                )),
                Local::Fun(_) => None,
            })
            .collect()
    }

    fn params(&self, ps: &[Param]) -> SemaResult<Vec<FunParam>> {
        let mut out: Vec<FunParam> = Vec::new();
        for p in ps {
            let Some(ty) = &p.ty else {
                return Err(SemaError::new(
                    p.span,
                    format!("parameter `{}` needs a type annotation", p.name),
                ));
            };
            known_type(&self.g, ty, p.span)?;
            if matches!(ty, SourceType::Ref(_) | SourceType::Array(_)) {
                return Err(SemaError::new(
                    p.span,
                    "mutable values cannot be passed as parameters",
                ));
            }
            if p.name != "_" && p.name != "()" && out.iter().any(|q| q.name == p.name) {
                return Err(SemaError::new(
                    p.span,
                    format!("duplicate parameter `{}`", p.name),
                ));
            }
            out.push(FunParam {
                name: p.name.clone(),
                ty: ty.clone(),
                ghost: p.ghost,
            });
        }
        if out.is_empty() {
            return Err(SemaError::new(
                ps.first().map(|p| p.span).unwrap_or_default(),
                "functions take at least one parameter",
            ));
        }
        Ok(out)
    }

    /// Checks a named function (top-level or local) and returns its signature.
    fn fun_def(&mut self, d: &FunDef, span: Span) -> SemaResult<FunSig> {
        if d.params.is_empty() {
            return Err(SemaError::new(
                span,
                format!("function `{}` needs a parameter (use `()`)", d.name),
            ));
        }
        let params = self.params(&d.params)?;
        if let Some(r) = &d.ret {
            known_type(&self.g, r, span)?;
        }
        if d.recursive && d.ret.is_none() {
            return Err(SemaError::new(
                span,
                format!(
                    "recursive function `{}` needs a return type annotation",
                    d.name
                ),
            ));
        }
        for pr in &d.spec.protocols {
            let info = check_protocol(&self.g, pr, Some(&d.name), &params)?;
            register_protocol(&mut self.g, info)?;
        }
        let base = self.scope.len();
        for p in &params {
            self.push(&p.name, Local::Val(p.ty.clone()));
        }
        self.check_pre_spec(&d.spec, span)?;
        let mut sig = FunSig {
            name: d.name.clone(),
            params: params.clone(),
            ret: d.ret.clone().unwrap_or(SourceType::Unit),
            recursive: d.recursive,
            spec: d.spec.clone(),
        };
        if d.recursive {
            self.scope.push((d.name.clone(), Local::Fun(sig.clone())));
        }
        self.owners.push(d.name.clone());
        let body = match &d.ret {
            Some(r) => self.check(&d.body, r).map(|_| r.clone()),
            None => self.infer(&d.body),
        };
        self.owners.pop();
        if d.recursive {
            self.scope.pop();
        }
        sig.ret = body?;
        self.check_post_spec(&d.spec, &sig.ret, span)?;
        if let Some(v) = &d.spec.variant {
            if !d.recursive {
                return Err(SemaError::new(span, "variant on a non-recursive function"));
            }
            let mut ctx = TermCtx::new(&self.g, self.term_scope(), false);
            match ctx.infer(v)? {
                SourceType::Int | SourceType::Named(_) => {}
                other => {
                    return Err(SemaError::new(
                        v.span,
                        format!("variant of type `{other}` has no well-founded order"),
                    ))
                }
            }
        }
        self.scope.truncate(base);
        Ok(sig)
    }

    fn check_pre_spec(&mut self, s: &SpecClauses, span: Span) -> SemaResult<()> {
        let mut ctx = TermCtx::new(&self.g, self.term_scope(), false);
        for t in &s.requires {
            ctx.check_bool(t)?;
        }
        for m in &s.modifies {
            if self.g.state.get(m).is_none() {
                return Err(SemaError::new(
                    span,
                    format!("`{m}` in modifies is not a top-level mutable variable"),
                ));
            }
        }
        for e in &s.performs {
            if !self.g.effects.contains_key(e) {
                return Err(SemaError::new(
                    span,
                    format!("`performs` names undeclared effect `{e}`"),
                ));
            }
        }
        Ok(())
    }

    fn check_post_spec(
        &mut self,
        s: &SpecClauses,
        ret: &SourceType,
        _span: Span,
    ) -> SemaResult<()> {
        let mut vars = self.term_scope();
        vars.push(("result".into(), ret.clone()));
        let mut ctx = TermCtx::new(&self.g, vars, true);
        for t in &s.ensures {
            ctx.check_bool(t)?;
        }
        Ok(())
    }

    fn record(&mut self, e: &Expr, t: SourceType) -> SourceType {
        self.types.insert(e.id, t.clone());
        t
    }

    fn infer(&mut self, e: &Expr) -> SemaResult<SourceType> {
        self.synth(e, None)
    }

    fn check(&mut self, e: &Expr, want: &SourceType) -> SemaResult<()> {
        let got = self.synth(e, Some(want))?;
        if &got != want {
            return Err(mismatch(e.span, &got, want));
        }
        Ok(())
    }

    fn synth(&mut self, e: &Expr, want: Option<&SourceType>) -> SemaResult<SourceType> {
        let t = self.synth_inner(e, want)?;
        Ok(self.record(e, t))
    }

    fn state_elem(&self, x: &str, array: bool, span: Span) -> SemaResult<SourceType> {
        match (self.g.state.get(x), array) {
            (Some(SourceType::Ref(a)), false) | (Some(SourceType::Array(a)), true) => {
                Ok((**a).clone())
            }
            (Some(_), false) => Err(SemaError::new(
                span,
                format!("`{x}` is an array, not a reference"),
            )),
            (Some(_), true) => Err(SemaError::new(
                span,
                format!("`{x}` is a reference, not an array"),
            )),
            (None, _) => Err(SemaError::new(
                span,
                format!("unknown mutable variable `{x}`"),
            )),
        }
    }

    fn synth_inner(&mut self, e: &Expr, want: Option<&SourceType>) -> SemaResult<SourceType> {
        let err = |m: String| Err(SemaError::new(e.span, m));
        match &e.kind {
            ExprKind::Int(_) => Ok(SourceType::Int),
            ExprKind::Bool(_) => Ok(SourceType::Bool),
            ExprKind::Unit => Ok(SourceType::Unit),
            ExprKind::Var(x) => match self.lookup(x) {
                Some(Local::Val(t)) => Ok(t.clone()),
                Some(Local::Fun(_)) => err(format!(
                    "function `{x}` must be applied to all its arguments"
                )),
                Some(Local::Cont { .. }) => err(format!(
                    "continuation `{x}` may only be resumed with `continue`"
                )),
                None if self.g.functions.contains_key(x) => err(format!(
                    "function `{x}` must be applied to all its arguments"
                )),
                None if self.g.state.get(x).is_some() => {
                    err(format!("mutable variable `{x}` must be read explicitly"))
                }
                None => err(format!("unbound variable `{x}`")),
            },
            ExprKind::Binary(op, a, b) => match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod => {
                    self.check(a, &SourceType::Int)?;
                    self.check(b, &SourceType::Int)?;
                    Ok(SourceType::Int)
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    self.check(a, &SourceType::Int)?;
                    self.check(b, &SourceType::Int)?;
                    Ok(SourceType::Bool)
                }
                BinOp::And | BinOp::Or => {
                    self.check(a, &SourceType::Bool)?;
                    self.check(b, &SourceType::Bool)?;
                    Ok(SourceType::Bool)
                }
                BinOp::Eq | BinOp::Ne => {
                    let t = self.infer(a)?;
                    if !first_order(&t) {
                        return err(format!("equality on `{t}` is not supported"));
                    }
                    self.check(b, &t)?;
                    Ok(SourceType::Bool)
                }
            },
            ExprKind::Unary(UnOp::Neg, a) => {
                self.check(a, &SourceType::Int)?;
                Ok(SourceType::Int)
            }
            ExprKind::Unary(UnOp::Not, a) => {
                self.check(a, &SourceType::Bool)?;
                Ok(SourceType::Bool)
            }
            ExprKind::Deref(x) => self.state_elem(x, false, e.span),
            ExprKind::Assign(x, v) => {
                let t = self.state_elem(x, false, e.span)?;
                self.check(v, &t)?;
                Ok(SourceType::Unit)
            }
            ExprKind::ArrayGet(a, i) => {
                let t = self.state_elem(a, true, e.span)?;
                self.check(i, &SourceType::Int)?;
                Ok(t)
            }
            ExprKind::ArraySet(a, i, v) => {
                let t = self.state_elem(a, true, e.span)?;
                self.check(i, &SourceType::Int)?;
                self.check(v, &t)?;
                Ok(SourceType::Unit)
            }
            ExprKind::ArrayLength(a) => {
                self.state_elem(a, true, e.span)?;
                Ok(SourceType::Int)
            }
            ExprKind::Let(x, ty, v, rest) => {
                let t = match ty {
                    Some(t) => {
                        known_type(&self.g, t, e.span)?;
                        self.check(v, t)?;
                        t.clone()
                    }
                    None => self.infer(v)?,
                };
                let n = self.scope.len();
                self.push(x, Local::Val(t));
                let r = self.synth(rest, want);
                self.scope.truncate(n);
                r
            }
            ExprKind::LetFun(def, rest) => {
                if self.g.functions.contains_key(&def.name) {
                    return err(format!(
                        "local function `{}` shadows a top-level function",
                        def.name
                    ));
                }
                let sig = self.fun_def(def, e.span)?;
                self.local_funs.insert(e.id, sig.clone());
                let n = self.scope.len();
                self.scope.push((def.name.clone(), Local::Fun(sig)));
                let r = self.synth(rest, want);
                self.scope.truncate(n);
                r
            }
            ExprKind::Fun {
                spec,
                param,
                ret,
                body,
            } => self.closure(e, spec, param, ret.as_ref(), body, want),
            ExprKind::App(callee, args) => self.app(e, callee, args),
            ExprKind::If(c, t, f) => {
                self.check(c, &SourceType::Bool)?;
                match f {
                    Some(f) => {
                        let ty = self.synth(t, want)?;
                        self.check(f, &ty)?;
                        Ok(ty)
                    }
                    None => {
                        self.check(t, &SourceType::Unit)?;
                        Ok(SourceType::Unit)
                    }
                }
            }
            ExprKind::Seq(a, b) => {
                self.check(a, &SourceType::Unit)?;
                self.synth(b, want)
            }
            ExprKind::Match(s, arms) => {
                let sty = self.infer(s)?;
                if !matches!(sty, SourceType::Named(_)) {
                    return err(format!("cannot match on a value of type `{sty}`"));
                }
                let mut result: Option<SourceType> = want.cloned();
                for (p, body) in arms {
                    let mut binds = Vec::new();
                    bind_pattern(&self.g, p, &sty, e.span, &mut binds)?;
                    let n = self.scope.len();
                    for (x, t) in binds {
                        self.push(&x, Local::Val(t));
                    }
                    let r = match result.clone() {
                        Some(t) => self.check(body, &t).map(|_| t),
                        None => self.infer(body),
                    };
                    self.scope.truncate(n);
                    result = Some(r?);
                }
                if !is_exhaustive(
                    &self.g,
                    arms.iter().map(|(p, _)| vec![p.clone()]).collect(),
                    &[sty],
                ) {
                    return err("non-exhaustive match".into());
                }
                result.ok_or_else(|| SemaError::new(e.span, "empty match"))
            }
            ExprKind::Ctor(c, args) => {
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
                for (a, t) in args.iter().zip(&tys) {
                    self.check(a, t)?;
                }
                Ok(SourceType::Named(dt))
            }
            ExprKind::Perform(eff, args) => self.perform(e, eff, args),
            ExprKind::Try(h) => self.handler(e, h, want),
            ExprKind::Continue(k, v) => match self.lookup(k).cloned() {
                Some(Local::Cont { arg, ret }) => {
                    self.check(v, &arg)?;
                    Ok(ret)
                }
                _ => err(format!(
                    "`{k}` is not a continuation bound by an enclosing handler branch"
                )),
            },
        }
    }

    fn closure(
        &mut self,
        e: &Expr,
        spec: &SpecClauses,
        param: &Param,
        ret: Option<&SourceType>,
        body: &Expr,
        want: Option<&SourceType>,
    ) -> SemaResult<SourceType> {
        let (want_a, want_b) = match want {
            Some(SourceType::Arrow(a, b)) => (Some((**a).clone()), Some((**b).clone())),
            Some(other) => {
                return Err(SemaError::new(
                    e.span,
                    format!("function where `{other}` was expected"),
                ))
            }
            None => (None, None),
        };
        let pty = match (&param.ty, want_a) {
            (Some(t), Some(w)) if *t != w => return Err(mismatch(param.span, t, &w)),
            (Some(t), _) => t.clone(),
            (None, Some(w)) => w,
            (None, None) => {
                return Err(SemaError::new(
                    param.span,
                    "cannot infer the parameter type of this function",
                ))
            }
        };
        known_type(&self.g, &pty, param.span)?;
        if !spec.protocols.is_empty() || spec.variant.is_some() {
            return Err(SemaError::new(
                spec.span,
                "anonymous functions cannot declare protocols or variants",
            ));
        }
        let n = self.scope.len();
        self.push(&param.name, Local::Val(pty.clone()));
        self.check_pre_spec(spec, e.span)?;
        let want_ret = ret.cloned().or(want_b);
        let rty = match &want_ret {
            Some(r) => self.check(body, r).map(|_| r.clone()),
            None => self.infer(body),
        };
        let rty = match rty {
            Ok(t) => t,
            Err(x) => {
                self.scope.truncate(n);
                return Err(x);
            }
        };
        let post = self.check_post_spec(spec, &rty, e.span);
        self.scope.truncate(n);
        post?;
        self.closure_performs.extend(spec.performs.iter().cloned());
        Ok(SourceType::arrow(pty, rty))
    }

    fn app(&mut self, e: &Expr, callee: &Expr, args: &[Expr]) -> SemaResult<SourceType> {
        if let ExprKind::Var(f) = &callee.kind {
            let sig = match self.lookup(f) {
                Some(Local::Fun(s)) => Some(s.clone()),
                Some(_) => None,
                None => self.g.functions.get(f).cloned(),
            };
            if let Some(sig) = sig {
                if sig.params.len() != args.len() {
                    return Err(SemaError::new(
                        e.span,
                        format!(
                            "`{f}` expects {} arguments, got {}",
                            sig.params.len(),
                            args.len()
                        ),
                    ));
                }
                for (a, p) in args.iter().zip(&sig.params) {
                    self.check(a, &p.ty)?;
                }
                let fty = sig.params.iter().rev().fold(sig.ret.clone(), |acc, p| {
                    SourceType::arrow(p.ty.clone(), acc)
                });
                self.record(callee, fty);
                return Ok(sig.ret);
            }
        }
        let mut t = self.infer(callee)?;
        for a in args {
            match t {
                SourceType::Arrow(dom, cod) => {
                    self.check(a, &dom)?;
                    t = *cod;
                }
                other => {
                    return Err(SemaError::new(
                        e.span,
                        format!("applying a value of type `{other}`"),
                    ))
                }
            }
        }
        Ok(t)
    }

    fn perform(&mut self, e: &Expr, eff: &str, args: &[Expr]) -> SemaResult<SourceType> {
        let Some(sig) = self.g.effects.get(eff).cloned() else {
            return Err(SemaError::new(e.span, format!("undeclared effect `{eff}`")));
        };
        if sig.args.len() != args.len() {
            return Err(SemaError::new(
                e.span,
                format!(
                    "effect `{eff}` takes {} arguments, got {}",
                    sig.args.len(),
                    args.len()
                ),
            ));
        }
        for (a, t) in args.iter().zip(&sig.args) {
            self.check(a, t)?;
        }
        let Some(info) = self.g.protocols.get(eff).cloned() else {
            return Err(SemaError::new(
                e.span,
                format!("no protocol in scope for effect `{eff}`"),
            ));
        };
        if let Some(owner) = &info.owner {
            if !self.owners.contains(owner) {
                return Err(SemaError::new(
                    e.span,
                    format!("effect `{eff}` is performed outside `{owner}`, which declares its protocol"),
                ));
            }
            for c in &info.captures {
                match self.lookup(&c.name) {
                    Some(Local::Val(t)) if *t == c.ty => {}
                    _ => {
                        return Err(SemaError::new(
                            e.span,
                            format!(
                                "protocol parameter `{}` of `{eff}` is shadowed here",
                                c.name
                            ),
                        ))
                    }
                }
            }
        }
        Ok(sig.reply)
    }

    fn handler(
        &mut self,
        e: &Expr,
        h: &Handler,
        want: Option<&SourceType>,
    ) -> SemaResult<SourceType> {
        let declared = match h.spec.as_ref().and_then(|s| s.returns.as_ref()) {
            Some(r) => {
                known_type(&self.g, r, e.span)?;
                Some(r.clone())
            }
            None => None,
        };
        let want = want.cloned().or(declared.clone());
        let body_want = if h.value_branch.is_none() {
            want.clone()
        } else {
            None
        };
        let tb = self.synth(&h.body, body_want.as_ref())?;
        let tr = match &h.value_branch {
            Some((x, v)) => {
                let n = self.scope.len();
                self.push(x, Local::Val(tb));
                let r = self.synth(v, want.as_ref());
                self.scope.truncate(n);
                r?
            }
            None => tb,
        };
        if let Some(w) = &want {
            if &tr != w {
                return Err(mismatch(e.span, &tr, w));
            }
        }
        let mut seen = BTreeSet::new();
        for b in &h.branches {
            let Some(sig) = self.g.effects.get(&b.effect).cloned() else {
                return Err(SemaError::new(
                    b.span,
                    format!("undeclared effect `{}`", b.effect),
                ));
            };
            if !seen.insert(b.effect.clone()) {
                return Err(SemaError::new(
                    b.span,
                    format!("effect `{}` is handled twice", b.effect),
                ));
            }
            if b.binders.len() != sig.args.len() {
                return Err(SemaError::new(
                    b.span,
                    format!(
                        "effect `{}` carries {} values, branch binds {}",
                        b.effect,
                        sig.args.len(),
                        b.binders.len()
                    ),
                ));
            }
            let n = self.scope.len();
            for (x, t) in b.binders.iter().zip(&sig.args) {
                self.push(x, Local::Val(t.clone()));
            }
            self.push(
                &b.cont,
                Local::Cont {
                    arg: sig.reply.clone(),
                    ret: tr.clone(),
                },
            );
            let r = self.check(&b.body, &tr);
            self.scope.truncate(n);
            r?;
        }
        if let Some(s) = &h.spec {
            let mut vars = self.term_scope();
            vars.push(("result".into(), tr.clone()));
            let mut ctx = TermCtx::new(&self.g, vars, true);
            for t in &s.try_ensures {
                ctx.check_bool(t)?;
            }
        }
        Ok(tr)
    }
}
