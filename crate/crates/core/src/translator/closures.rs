//! Handlers, anonymous functions and named function bodies.

use std::collections::BTreeSet;

use super::exprs::{Local, Tx};
use super::{ir_type, unmodified_state, TransError, TransResult};
use crate::ir::{
    validity_field, Contract, ExnHandler, Expr, ExprKind, IrType, PredKind, Raises, Routine,
    RoutineKind, Term,
};
use crate::sema::FunSig;
use crate::surface::{self as s, Span};

fn state_var(x: &str) -> Term {
    Term::var(x, IrType::State)
}

/// A name for `let f = result in ...` that captures nothing in `body`.
fn let_name(body: &Term) -> String {
    let free: Vec<String> = body.free_vars().into_iter().map(|(x, _)| x).collect();
    let mut name = "f".to_string();
    let mut i = 0;
    while free.contains(&name) {
        i += 1;
        name = format!("f{i}");
    }
    name
}

/// `let f = result in forall arg old state result. post f arg old state result <-> body`.
fn post_equivalence(fty: &IrType, arg: (&str, IrType), old: &str, ret: IrType, body: Term) -> Term {
    let f = let_name(&body);
    let fv = Term::var(&f, fty.clone());
    let app = Term::Pred(
        PredKind::Post,
        fty.clone(),
        vec![
            fv,
            Term::var(arg.0, arg.1.clone()),
            state_var(old),
            state_var("state"),
            Term::var("result", ret.clone()),
        ],
    );
    let q = Term::Forall(
        vec![
            (arg.0.to_string(), arg.1),
            (old.to_string(), IrType::State),
            ("state".into(), IrType::State),
            ("result".into(), ret),
        ],
        vec![app.clone()],
        Box::new(Term::iff(app, body)),
    );
    Term::Let(
        f,
        fty.clone(),
        Box::new(Term::var("result", fty.clone())),
        Box::new(q),
    )
}

/// `forall arg state. pre result arg state <-> body`.
fn pre_equivalence(fty: &IrType, arg: (&str, IrType), body: Term) -> Term {
    let app = Term::Pred(
        PredKind::Pre,
        fty.clone(),
        vec![
            Term::var("result", fty.clone()),
            Term::var(arg.0, arg.1.clone()),
            state_var("state"),
        ],
    );
    Term::Forall(
        vec![(arg.0.to_string(), arg.1), ("state".into(), IrType::State)],
        vec![app.clone()],
        Box::new(Term::iff(app, body)),
    )
}

/// `let state_old = snapshot in body`, omitted when `body` ignores it.
fn rebind_old(snapshot: &str, body: Term) -> Term {
    if !body.free_vars().iter().any(|(x, _)| x == "state_old") {
        return body;
    }
    Term::Let(
        "state_old".into(),
        IrType::State,
        Box::new(state_var(snapshot)),
        Box::new(body),
    )
}

fn and(a: Term, b: Term) -> Term {
    super::combine_terms(&[a, b])
}

fn generator(name: &str, ret: IrType, ensures: Vec<Term>, span: Span) -> Routine {
    Routine {
        name: name.into(),
        params: Vec::new(),
        ret,
        contract: Contract {
            ensures,
            writes: Some(Vec::new()),
            ..Contract::default()
        },
        body: None,
        kind: RoutineKind::Generator,
        recursive: false,
        effective_writes: Vec::new(),
        span,
    }
}

struct Branch {
    effect: String,
    cont: String,
    kty: IrType,
    reply: IrType,
    binders: Vec<(String, IrType)>,
    body: Expr,
    span: Span,
}

impl Tx<'_> {
    pub(crate) fn lambda(
        &mut self,
        e: &s::Expr,
        spec: &s::SpecClauses,
        param: &s::Param,
        body: &s::Expr,
    ) -> TransResult<Expr> {
        let sp = e.span;
        if !spec.performs.is_empty() {
            return Err(TransError::new(
                sp,
                "anonymous functions cannot perform effects",
            ));
        }
        let fty = self.ty_of(e);
        let IrType::Lambda(a, b) = fty.clone() else {
            return Err(TransError::new(
                sp,
                "anonymous function without an arrow type",
            ));
        };
        let (a, b) = (*a, *b);
        let x = self.param_name(&param.name);
        let (mu, raised) = (
            std::mem::take(&mut self.env.mu),
            std::mem::take(&mut self.raised),
        );
        self.push_val(&x, a.clone());
        let body = self.expr(body);
        self.scope.pop();
        let escaping = std::mem::replace(&mut self.raised, raised);
        self.env.mu = mu;
        let body = body?;
        if !escaping.is_empty() {
            return Err(TransError::new(
                sp,
                "anonymous functions cannot perform effects",
            ));
        }
        let px = [(x.clone(), a.clone())];
        let pr = [(x.clone(), a.clone()), ("result".to_string(), b.clone())];
        let requires = self.term_cx(Term::Cur, None, &px).all(&spec.requires)?;
        let ensures = self
            .term_cx(Term::Cur, Some(Term::Old), &pr)
            .all(&spec.ensures)?;
        let term_pre = self
            .term_cx(state_var("state"), None, &px)
            .all(&spec.requires)?;
        let term_post = self
            .term_cx(state_var("state"), Some(state_var("old_state")), &pr)
            .all(&spec.ensures)?;
        let all = self.all_state_vars();
        let lam = Routine {
            name: "lambda_body".into(),
            params: vec![(x.clone(), a.clone())],
            ret: b.clone(),
            contract: Contract {
                requires: vec![requires],
                ensures: vec![ensures],
                ..Contract::default()
            },
            body: Some(body),
            kind: RoutineKind::Lambda,
            recursive: false,
            effective_writes: self.fields_of(&all),
            span: sp,
        };
        let gen = generator(
            "gen_f",
            fty.clone(),
            vec![
                pre_equivalence(&fty, (&x, a.clone()), term_pre),
                post_equivalence(&fty, (&x, a), "old_state", b, term_post),
            ],
            sp,
        );
        let call = self.mk(sp, fty.clone(), ExprKind::Call("gen_f".into(), Vec::new()));
        let inner = self.mk(
            sp,
            fty.clone(),
            ExprKind::LetRoutine(Box::new(gen), Box::new(call)),
        );
        Ok(self.mk(
            sp,
            fty,
            ExprKind::LetRoutine(Box::new(lam), Box::new(inner)),
        ))
    }

    pub(crate) fn handler(&mut self, e: &s::Expr, h: &s::Handler) -> TransResult<Expr> {
        let sp = e.span;
        let Some(spec) = h.spec.as_ref().filter(|s| !s.try_ensures.is_empty()) else {
            return Err(TransError::new(sp, "handler lacks a `try_ensures` clause"));
        };
        let tau = self.ty_of(e);
        let mu_in = std::mem::take(&mut self.env.mu);
        let raised_in = std::mem::take(&mut self.raised);
        let body = self.expr(&h.body)?;
        let body_raised = std::mem::take(&mut self.raised);
        let handled: BTreeSet<String> = h.branches.iter().map(|b| b.effect.clone()).collect();
        let value = match &h.value_branch {
            Some((x, v)) => {
                self.push_val(x, body.ty.clone());
                let v = self.expr(v);
                self.scope.pop();
                Some((x.clone(), Box::new(v?)))
            }
            None => None,
        };
        let mut branches = Vec::new();
        for b in &h.branches {
            branches.push(self.branch(b, &tau)?);
        }
        let mu_final = std::mem::take(&mut self.env.mu);
        let mut escaping: BTreeSet<String> = body_raised.difference(&handled).cloned().collect();
        escaping.extend(std::mem::take(&mut self.raised));
        self.raised = raised_in;
        self.raised.extend(escaping.iter().cloned());
        self.env.mu = &mu_in | &mu_final;

        let result = [("result".to_string(), tau.clone())];
        let ensures = self
            .term_cx(Term::Cur, Some(Term::Old), &result)
            .all(&spec.try_ensures)?;
        let term_post = self
            .term_cx(state_var("state"), Some(state_var("state_old")), &result)
            .all(&spec.try_ensures)?;
        let unchanged: Vec<String> = self
            .g
            .state
            .names()
            .filter(|x| !mu_final.contains(*x))
            .map(str::to_string)
            .collect();
        let invariant = rebind_old("init_state", and(term_post, unmodified_state(&unchanged)));
        let mut handlers = Vec::new();
        for br in branches {
            handlers.push(self.branch_handler(br, &invariant, &mu_final, &tau)?);
        }
        let inner = if handlers.is_empty() {
            match value {
                Some((x, v)) => self.mk(sp, tau.clone(), ExprKind::Let(x, Box::new(body), v)),
                None => body,
            }
        } else {
            self.mk(
                sp,
                tau.clone(),
                ExprKind::Try {
                    body: Box::new(body),
                    value,
                    handlers,
                },
            )
        };
        let snap = self.mk(
            sp,
            tau.clone(),
            ExprKind::Snapshot("init_state".into(), Box::new(inner)),
        );
        let mut raises = Vec::new();
        for eff in &escaping {
            let binders = self.effect_binders(eff, sp)?;
            let args = binders
                .iter()
                .map(|(x, t)| Term::var(x, t.clone()))
                .collect();
            raises.push(Raises {
                exn: eff.clone(),
                binders,
                post: Tx::pre_app(eff, args, Term::Cur),
            });
        }
        let writes = self.fields_of(&mu_final);
        let routine = Routine {
            name: "handler".into(),
            params: Vec::new(),
            ret: tau.clone(),
            contract: Contract {
                ensures: vec![ensures],
                raises,
                writes: Some(writes.clone()),
                ..Contract::default()
            },
            body: Some(snap),
            kind: RoutineKind::Handler,
            recursive: false,
            effective_writes: writes,
            span: sp,
        };
        let call = self.mk(
            sp,
            tau.clone(),
            ExprKind::Call("handler".into(), Vec::new()),
        );
        Ok(self.mk(
            sp,
            tau,
            ExprKind::LetRoutine(Box::new(routine), Box::new(call)),
        ))
    }

    fn branch(&mut self, b: &s::EffectBranch, tau: &IrType) -> TransResult<Branch> {
        let Some((_, reply)) = self.env.sigma.get(&b.effect).cloned() else {
            return Err(TransError::new(
                b.span,
                format!("handler for undeclared effect `{}`", b.effect),
            ));
        };
        let Some(info) = self.g.protocols.get(&b.effect).cloned() else {
            return Err(TransError::new(
                b.span,
                format!("effect `{}` has no protocol", b.effect),
            ));
        };
        let std_binders = self.effect_binders(&b.effect, b.span)?;
        let ncaps = info.captures.len();
        let mut binders: Vec<(String, IrType)> = info
            .captures
            .iter()
            .map(|c| (format!("_c_{}", c.name), ir_type(&c.ty)))
            .collect();
        if b.binders.is_empty() {
            binders.extend(
                std_binders[ncaps..]
                    .iter()
                    .map(|(_, t)| (self.fresh_name("u"), t.clone())),
            );
        } else {
            binders.extend(
                b.binders
                    .iter()
                    .zip(&std_binders[ncaps..])
                    .map(|(x, (_, t))| (x.clone(), t.clone())),
            );
        }
        let kty = IrType::cont(reply.clone(), tau.clone());
        self.cont_types.insert(kty.clone());
        let n = self.scope.len();
        for (x, t) in &binders[ncaps..] {
            self.push_val(x, t.clone());
        }
        self.push_val(&b.cont, kty.clone());
        let body = self.expr(&b.body);
        self.scope.truncate(n);
        Ok(Branch {
            effect: b.effect.clone(),
            cont: b.cont.clone(),
            kty,
            reply,
            binders,
            body: body?,
            span: b.span,
        })
    }

    fn branch_handler(
        &mut self,
        br: Branch,
        invariant: &Term,
        mu_final: &BTreeSet<String>,
        tau: &IrType,
    ) -> TransResult<ExnHandler> {
        let sp = br.span;
        let modifies = self.effect_modifies(&br.effect);
        let mut cont_writes = vec![validity_field(&br.kty)];
        cont_writes.extend(self.fields_of(&(&modifies | mu_final)));
        let mut body = br.body;
        let (kname, kty) = (br.cont.clone(), br.kty.clone());
        body.walk_mut(&mut |x| {
            if let ExprKind::Continue { k, writes, .. } = &mut x.kind {
                if writes.is_empty()
                    && matches!(&k.kind, ExprKind::Var(v) if *v == kname)
                    && k.ty == kty
                {
                    *writes = cont_writes.clone();
                }
            }
        });
        let mut post_args: Vec<Term> = br
            .binders
            .iter()
            .map(|(x, t)| Term::var(x, t.clone()))
            .collect();
        post_args.extend([
            state_var("eff_state"),
            state_var("state"),
            Term::var("arg", br.reply.clone()),
        ]);
        let untouched: Vec<String> = self
            .g
            .state
            .names()
            .filter(|x| !modifies.contains(*x))
            .map(str::to_string)
            .collect();
        let frame = rebind_old("eff_state", unmodified_state(&untouched));
        let pre_body = and(Term::App(format!("post_{}", br.effect), post_args), frame);
        let gen = generator(
            "gen_k",
            kty.clone(),
            vec![
                Term::valid(Term::var("result", kty.clone()), Term::Cur),
                pre_equivalence(&kty, ("arg", br.reply.clone()), pre_body),
                post_equivalence(
                    &kty,
                    ("arg", br.reply),
                    "irrelevant_old_state",
                    tau.clone(),
                    invariant.clone(),
                ),
            ],
            sp,
        );
        let bty = body.ty.clone();
        let call = self.mk(sp, kty.clone(), ExprKind::Call("gen_k".into(), Vec::new()));
        let bind = self.mk(
            sp,
            bty.clone(),
            ExprKind::Let(br.cont, Box::new(call), Box::new(body)),
        );
        let with_gen = self.mk(
            sp,
            bty.clone(),
            ExprKind::LetRoutine(Box::new(gen), Box::new(bind)),
        );
        let snap = self.mk(
            sp,
            bty,
            ExprKind::Snapshot("eff_state".into(), Box::new(with_gen)),
        );
        Ok(ExnHandler {
            exn: br.effect,
            binders: br.binders,
            body: snap,
        })
    }

    /// Translates a named function definition. Recursive functions without a
    /// `modifies` clause are re-translated until their write set is stable.
    pub(crate) fn fun_routine(
        &mut self,
        def: &s::FunDef,
        sig: &FunSig,
        kind: RoutineKind,
        span: Span,
    ) -> TransResult<Routine> {
        let params: Vec<(String, IrType)> = sig
            .params
            .iter()
            .map(|p| (self.param_name(&p.name), ir_type(&p.ty)))
            .collect();
        let ret = ir_type(&sig.ret);
        let base = self.scope.len();
        for (x, t) in &params {
            self.push_val(x, t.clone());
        }
        let r = self.fun_routine_in_scope(def, sig, kind, span, params, ret);
        self.scope.truncate(base);
        r
    }

    fn fun_routine_in_scope(
        &mut self,
        def: &s::FunDef,
        sig: &FunSig,
        kind: RoutineKind,
        span: Span,
        params: Vec<(String, IrType)>,
        ret: IrType,
    ) -> TransResult<Routine> {
        let spec = &sig.spec;
        self.emit_local_protocols(&def.name, span)?;
        let requires = self.term_cx(Term::Cur, None, &[]).all(&spec.requires)?;
        let ensures = self
            .term_cx(
                Term::Cur,
                Some(Term::Old),
                &[("result".into(), ret.clone())],
            )
            .all(&spec.ensures)?;
        let variant = match &spec.variant {
            Some(v) => Some(self.term_cx(Term::Cur, None, &[]).tr(v)?),
            None => None,
        };
        let mut raises = Vec::new();
        for eff in &spec.performs {
            let binders = self.effect_binders(eff, span)?;
            let args = binders
                .iter()
                .map(|(x, t)| Term::var(x, t.clone()))
                .collect();
            raises.push(Raises {
                exn: eff.clone(),
                binders,
                post: Tx::pre_app(eff, args, Term::Cur),
            });
        }
        let declared: Option<BTreeSet<String>> =
            (!spec.modifies.is_empty()).then(|| spec.modifies.iter().cloned().collect());
        let mut guess = declared.clone().unwrap_or_default();
        let trace_len = self.trace.len();
        let body = loop {
            self.env.mu.clear();
            self.raised.clear();
            if def.recursive {
                let local = Local::Fun {
                    writes: guess.clone(),
                    performs: spec.performs.clone(),
                };
                self.scope.push((def.name.clone(), local));
            }
            let body = self.expr(&def.body);
            if def.recursive {
                self.scope.pop();
            }
            let body = body?;
            if declared.is_some() || self.env.mu.is_subset(&guess) {
                break body;
            }
            guess.extend(self.env.mu.iter().cloned());
            self.trace.truncate(trace_len);
        };
        let effective = declared.clone().unwrap_or_else(|| self.env.mu.clone());
        Ok(Routine {
            name: def.name.clone(),
            params,
            ret,
            contract: Contract {
                requires: vec![requires],
                ensures: vec![ensures],
                raises,
                writes: declared.as_ref().map(|d| self.fields_of(d)),
                variant,
            },
            body: Some(body),
            kind,
            recursive: def.recursive,
            effective_writes: self.fields_of(&effective),
            span,
        })
    }
}
