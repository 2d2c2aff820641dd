//! Declaration lists, protocols and reserved names.

use super::exprs::Tx;
use super::terms::{type_env, TermCx};
use super::{ir_type, translate_effect, Rule, RuleTrace, TransError, TransResult, Translation};
use crate::ir::{
    field_name, validity_field, Contract, Decl, IrProgram, IrType, LogicDef, Raises, Routine,
    RoutineKind, Term,
};
use crate::sema::TypedProgram;
use crate::surface::{self as s, walk_expr, Span, TermKind};

const RESERVED: [&str; 11] = [
    "arg",
    "state",
    "old_state",
    "irrelevant_old_state",
    "state_old",
    "init_state",
    "eff_state",
    "result",
    "reply",
    "handler",
    "lambda_body",
];
const RESERVED_PREFIXES: [&str; 5] = ["perform_", "pre_", "post_", "gen_", "_"];

fn reserved(name: &str) -> bool {
    if name == "_" || name == "()" {
        return false;
    }
    RESERVED.contains(&name) || RESERVED_PREFIXES.iter().any(|p| name.starts_with(p))
}

fn check_name(name: &str, span: Span) -> TransResult<()> {
    if reserved(name) {
        return Err(TransError::new(
            span,
            format!("`{name}` is reserved by the translation"),
        ));
    }
    Ok(())
}

fn check_term(t: &s::Term) -> TransResult<()> {
    match &t.kind {
        TermKind::Forall(bs, body) | TermKind::Exists(bs, body) => {
            for (x, _) in bs {
                check_name(x, t.span)?;
            }
            check_term(body)
        }
        TermKind::Match(sc, arms) => {
            check_term(sc)?;
            for (p, a) in arms {
                let mut bs = Vec::new();
                p.binders(&mut bs);
                for x in bs {
                    check_name(&x, t.span)?;
                }
                check_term(a)?;
            }
            Ok(())
        }
        TermKind::Old(a) | TermKind::Unary(_, a) => check_term(a),
        TermKind::Get(a, b)
        | TermKind::Binary(_, a, b)
        | TermKind::Implies(a, b)
        | TermKind::Iff(a, b) => {
            check_term(a)?;
            check_term(b)
        }
        TermKind::If(a, b, c) => {
            check_term(a)?;
            check_term(b)?;
            check_term(c)
        }
        TermKind::App(_, args) | TermKind::Ctor(_, args) => args.iter().try_for_each(check_term),
        TermKind::Int(_)
        | TermKind::Bool(_)
        | TermKind::Unit
        | TermKind::Var(_)
        | TermKind::Deref(_) => Ok(()),
    }
}

fn check_spec(sp: &s::SpecClauses) -> TransResult<()> {
    for t in sp.requires.iter().chain(&sp.ensures).chain(&sp.variant) {
        check_term(t)?;
    }
    for pr in &sp.protocols {
        check_protocol(pr)?;
    }
    Ok(())
}

fn check_protocol(pr: &s::Protocol) -> TransResult<()> {
    for x in &pr.params {
        check_name(x, pr.span)?;
    }
    pr.requires
        .iter()
        .chain(&pr.ensures)
        .try_for_each(check_term)
}

fn check_fundef(d: &s::FunDef, span: Span) -> TransResult<()> {
    check_name(&d.name, span)?;
    for p in &d.params {
        check_name(&p.name, p.span)?;
    }
    check_spec(&d.spec)?;
    check_body(&d.body)
}

fn check_body(body: &s::Expr) -> TransResult<()> {
    let mut err = None;
    walk_expr(body, &mut |e| {
        if err.is_some() {
            return;
        }
        let r = (|| -> TransResult<()> {
            match &e.kind {
                s::ExprKind::Let(x, _, _, _) => check_name(x, e.span),
                s::ExprKind::LetFun(d, _) => {
                    check_name(&d.name, e.span)?;
                    for p in &d.params {
                        check_name(&p.name, p.span)?;
                    }
                    check_spec(&d.spec)
                }
                s::ExprKind::Fun { spec, param, .. } => {
                    check_name(&param.name, param.span)?;
                    check_spec(spec)
                }
                s::ExprKind::Match(_, arms) => {
                    for (p, _) in arms {
                        let mut bs = Vec::new();
                        p.binders(&mut bs);
                        bs.iter().try_for_each(|x| check_name(x, e.span))?;
                    }
                    Ok(())
                }
                s::ExprKind::Try(h) => {
                    for b in &h.branches {
                        check_name(&b.cont, b.span)?;
                        b.binders.iter().try_for_each(|x| check_name(x, b.span))?;
                    }
                    if let Some((x, _)) = &h.value_branch {
                        check_name(x, e.span)?;
                    }
                    if let Some(sp) = &h.spec {
                        sp.try_ensures.iter().try_for_each(check_term)?;
                    }
                    Ok(())
                }
                _ => Ok(()),
            }
        })();
        if let Err(x) = r {
            err = Some(x);
        }
    });
    err.map_or(Ok(()), Err)
}

/// Rejects user identifiers that collide with names introduced by the translation.
pub fn check_reserved_names(p: &s::SourceProgram) -> TransResult<()> {
    for d in &p.decls {
        match d {
            s::Decl::Fun(f) => check_fundef(&f.def, f.span)?,
            s::Decl::Logic(l) => {
                check_name(&l.name, l.span)?;
                l.params
                    .iter()
                    .try_for_each(|(x, _)| check_name(x, l.span))?;
                check_term(&l.body)?;
            }
            s::Decl::State(st) => check_name(&st.name, st.span)?,
            s::Decl::Protocol(pr) => check_protocol(pr)?,
            s::Decl::Effect(_) | s::Decl::Type(_) => {}
        }
    }
    Ok(())
}

fn mentions(t: &Term, name: &str) -> bool {
    let mut found = false;
    t.walk(&mut |x| {
        if matches!(x, Term::App(f, _) if f == name) {
            found = true;
        }
    });
    found
}

impl Tx<'_> {
    /// `pre_E`, `post_E` and the abstract `perform_E`.
    pub(crate) fn protocol_decls(&mut self, eff: &str, span: Span) -> TransResult<Vec<Decl>> {
        let info = self.g.protocols[eff].clone();
        let pr = &info.protocol;
        let binders = self.effect_binders(eff, span)?;
        let reply = self.env.sigma[eff].1.clone();
        let st = |x: &str| Term::var(x, IrType::State);
        let pre_body = TermCx::new(self.g, &self.tenv, st("state"), None, binders.clone())
            .all(&pr.requires)?;
        let mut post_vars = binders.clone();
        post_vars.push(("reply".into(), reply.clone()));
        let post_body = TermCx::new(
            self.g,
            &self.tenv,
            st("state"),
            Some(st("old_state")),
            post_vars,
        )
        .all(&pr.ensures)?;
        let mut pre_params = binders.clone();
        pre_params.push(("state".into(), IrType::State));
        let mut post_params = binders.clone();
        post_params.extend([
            ("old_state".into(), IrType::State),
            ("state".into(), IrType::State),
            ("reply".into(), reply.clone()),
        ]);
        let args: Vec<Term> = binders
            .iter()
            .map(|(x, t)| Term::var(x, t.clone()))
            .collect();
        let mut post_args = args.clone();
        post_args.extend([Term::Old, Term::Cur, Term::var("result", reply.clone())]);
        let writes: Vec<String> = self
            .g
            .state
            .names()
            .filter(|x| pr.modifies.iter().any(|m| m == x))
            .map(field_name)
            .collect();
        let perform = Routine {
            name: format!("perform_{eff}"),
            params: binders.clone(),
            ret: reply,
            contract: Contract {
                requires: vec![Tx::pre_app(eff, args.clone(), Term::Cur)],
                ensures: vec![Term::App(format!("post_{eff}"), post_args)],
                raises: vec![Raises {
                    exn: eff.to_string(),
                    binders,
                    post: Tx::pre_app(eff, args, Term::Cur),
                }],
                writes: Some(writes.clone()),
                variant: None,
            },
            body: None,
            kind: RoutineKind::Perform,
            recursive: false,
            effective_writes: writes,
            span,
        };
        Ok(vec![
            Decl::Logic(LogicDef {
                name: format!("pre_{eff}"),
                params: pre_params,
                ret: IrType::Bool,
                body: pre_body,
                recursive: false,
            }),
            Decl::Logic(LogicDef {
                name: format!("post_{eff}"),
                params: post_params,
                ret: IrType::Bool,
                body: post_body,
                recursive: false,
            }),
            Decl::Routine(perform),
        ])
    }

    /// Queues the protocols declared locally by `owner`.
    pub(crate) fn emit_local_protocols(&mut self, owner: &str, span: Span) -> TransResult<()> {
        let effs: Vec<String> = self
            .g
            .protocols
            .iter()
            .filter(|(e, i)| i.owner.as_deref() == Some(owner) && !self.emitted.contains(*e))
            .map(|(e, _)| e.clone())
            .collect();
        for eff in effs {
            self.emitted.insert(eff.clone());
            let span = self.g.protocols[&eff].protocol.span;
            let ds = self.protocol_decls(&eff, span)?;
            self.pending.extend(ds);
            self.record_decl(Rule::TProtocol, span);
        }
        let _ = span;
        Ok(())
    }
}

pub(crate) fn translate(tp: &TypedProgram) -> TransResult<Translation> {
    check_reserved_names(&tp.program)?;
    let g = &tp.globals;
    let user_fields: Vec<(String, IrType)> = g
        .state
        .vars
        .iter()
        .map(|(x, t)| (field_name(x), ir_type(t)))
        .collect();
    let mut tx = Tx::new(tp, type_env(g, &user_fields));
    let mut decls = Vec::new();
    let dts: Vec<(String, Vec<(String, Vec<IrType>)>)> = tp
        .program
        .types()
        .map(|t| {
            (
                t.name.clone(),
                t.ctors
                    .iter()
                    .map(|(c, args)| (c.clone(), args.iter().map(ir_type).collect()))
                    .collect(),
            )
        })
        .collect();
    if !dts.is_empty() {
        decls.push(Decl::Datatypes(dts));
    }
    let state_at = decls.len();
    for e in tp.program.effects() {
        let (d, env) = translate_effect(e, std::mem::take(&mut tx.env))?;
        tx.env = env;
        decls.push(d);
        tx.record_decl(Rule::TEffect, e.span);
    }
    for d in &tp.program.decls {
        match d {
            s::Decl::Effect(_) => {}
            s::Decl::Type(t) => tx.record_decl(Rule::TDecl, t.span),
            s::Decl::State(st) => tx.record_decl(Rule::TDecl, st.span),
            s::Decl::Logic(l) => {
                let params: Vec<(String, IrType)> = l
                    .params
                    .iter()
                    .map(|(x, t)| (x.clone(), ir_type(t)))
                    .collect();
                let body = TermCx::new(g, &tx.tenv, Term::Cur, None, params.clone()).tr(&l.body)?;
                let recursive = mentions(&body, &l.name);
                decls.push(Decl::Logic(LogicDef {
                    name: l.name.clone(),
                    params,
                    ret: ir_type(&l.result_type()),
                    body,
                    recursive,
                }));
                tx.record_decl(Rule::TDecl, l.span);
            }
            s::Decl::Protocol(pr) => {
                decls.extend(tx.protocol_decls(&pr.effect, pr.span)?);
                tx.emitted.insert(pr.effect.clone());
                tx.record_decl(Rule::TProtocol, pr.span);
            }
            s::Decl::Fun(f) => {
                let name = &f.def.name;
                let Some(sig) = g.functions.get(name) else {
                    return Err(TransError::new(
                        f.span,
                        format!("function `{name}` was not type checked"),
                    ));
                };
                tx.env.mu.clear();
                tx.raised.clear();
                let r = tx.fun_routine(&f.def, sig, RoutineKind::Function, f.span)?;
                let written = tx.vars_of_fields(&r.effective_writes);
                tx.env.delta.insert(name.clone(), written);
                decls.append(&mut tx.pending);
                decls.push(Decl::Routine(r));
                tx.record_decl(Rule::TLet, f.span);
                for _ in &sig.spec.performs {
                    tx.record_decl(Rule::TPerformsClause, f.span);
                }
                if !sig.spec.modifies.is_empty() {
                    tx.record_decl(Rule::TModifies, f.span);
                }
            }
        }
    }
    if tp.program.decls.is_empty() {
        tx.record_decl(Rule::TEmpty, Span::default());
    } else {
        let mut fields = user_fields;
        fields.extend(tx.cont_types.iter().map(|k| (validity_field(k), k.clone())));
        decls.insert(state_at, Decl::State(fields));
        tx.record_decl(Rule::TDecl, Span::default());
    }
    tx.env.mu.clear();
    Ok(Translation {
        ir: IrProgram { decls },
        trace: RuleTrace { entries: tx.trace },
        env: tx.env,
    })
}
