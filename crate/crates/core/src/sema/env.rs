//! Global environment: effects, datatypes, state, logic symbols, protocols.

use std::collections::BTreeSet;

use super::terms::{first_order, free_term_vars, TermCtx, BUILTINS};
use super::{DataType, EffectSig, FunParam, Globals, ProtocolInfo, SemaError, SemaResult};
use crate::surface::{Decl, Protocol, SourceProgram, SourceType, Span};

/// Splits an effect signature `a1 -> ... -> an -> r` into arguments and reply.
pub fn split_signature(sig: &SourceType) -> (Vec<SourceType>, SourceType) {
    let mut args = Vec::new();
    let mut t = sig;
    while let SourceType::Arrow(a, b) = t {
        args.push((**a).clone());
        t = b;
    }
    (args, t.clone())
}

pub fn known_type(g: &Globals, t: &SourceType, span: Span) -> SemaResult<()> {
    match t {
        SourceType::Int | SourceType::Bool | SourceType::Unit => Ok(()),
        SourceType::Named(n) if g.datatypes.contains_key(n) => Ok(()),
        SourceType::Named(n) => Err(SemaError::new(span, format!("unknown type `{n}`"))),
        SourceType::Ref(a) | SourceType::Array(a) => known_type(g, a, span),
        SourceType::Arrow(a, b) | SourceType::Cont(a, b) => {
            known_type(g, a, span)?;
            known_type(g, b, span)
        }
    }
}

pub fn build_globals(p: &SourceProgram) -> SemaResult<Globals> {
    let mut g = Globals::default();
    for t in p.types() {
        if g.datatypes.contains_key(&t.name) || matches!(t.name.as_str(), "int" | "bool" | "unit") {
            return Err(SemaError::new(
                t.span,
                format!("duplicate type `{}`", t.name),
            ));
        }
        g.datatypes.insert(
            t.name.clone(),
            DataType {
                name: t.name.clone(),
                ctors: t.ctors.clone(),
            },
        );
        for (c, args) in &t.ctors {
            if g.ctors
                .insert(c.clone(), (t.name.clone(), args.clone()))
                .is_some()
            {
                return Err(SemaError::new(
                    t.span,
                    format!("duplicate constructor `{c}`"),
                ));
            }
        }
    }
    for t in p.types() {
        for (c, args) in &t.ctors {
            for a in args {
                known_type(&g, a, t.span)?;
                if !first_order(a) {
                    return Err(SemaError::new(
                        t.span,
                        format!("constructor `{c}` has a non first-order field"),
                    ));
                }
            }
        }
    }
    for e in p.effects() {
        let (args, reply) = split_signature(&e.signature);
        for t in args.iter().chain([&reply]) {
            known_type(&g, t, e.span)?;
            if !first_order(t) {
                return Err(SemaError::new(
                    e.span,
                    format!("effect `{}` has a non first-order payload", e.name),
                ));
            }
        }
        g.effects.insert(
            e.name.clone(),
            EffectSig {
                name: e.name.clone(),
                args,
                reply,
            },
        );
    }
    for s in p.states() {
        if g.state.get(&s.name).is_some() {
            return Err(SemaError::new(
                s.span,
                format!("duplicate state variable `{}`", s.name),
            ));
        }
        match &s.ty {
            SourceType::Ref(a) | SourceType::Array(a) if first_order(a) => {
                known_type(&g, a, s.span)?
            }
            other => {
                return Err(SemaError::new(
                    s.span,
                    format!(
                        "state `{}` must be a ref or array of first-order values, not `{other}`",
                        s.name
                    ),
                ))
            }
        }
        g.state.vars.push((s.name.clone(), s.ty.clone()));
    }
    for l in p.logic_decls() {
        if g.logic.contains_key(&l.name) || BUILTINS.contains(&l.name.as_str()) {
            return Err(SemaError::new(
                l.span,
                format!("duplicate logic symbol `{}`", l.name),
            ));
        }
        for (_, t) in &l.params {
            known_type(&g, t, l.span)?;
        }
        known_type(&g, &l.result_type(), l.span)?;
        g.logic.insert(l.name.clone(), l.clone());
    }
    for l in p.logic_decls() {
        let mut ctx = TermCtx::new(&g, l.params.clone(), false);
        ctx.expect(&l.body, &l.result_type())?;
    }
    for d in &p.decls {
        if let Decl::Protocol(pr) = d {
            let info = check_protocol(&g, pr, None, &[])?;
            register_protocol(&mut g, info)?;
        }
    }
    Ok(g)
}

pub fn register_protocol(g: &mut Globals, info: ProtocolInfo) -> SemaResult<()> {
    let e = info.protocol.effect.clone();
    if g.protocols.contains_key(&e) {
        return Err(SemaError::new(
            info.protocol.span,
            format!("conflicting protocols for effect `{e}`"),
        ));
    }
    g.protocols.insert(e, info);
    Ok(())
}

/// Types a protocol. `owner_params` are in scope for local protocols.
pub fn check_protocol(
    g: &Globals,
    pr: &Protocol,
    owner: Option<&str>,
    owner_params: &[FunParam],
) -> SemaResult<ProtocolInfo> {
    let Some(sig) = g.effects.get(&pr.effect) else {
        return Err(SemaError::new(
            pr.span,
            format!("protocol for undeclared effect `{}`", pr.effect),
        ));
    };
    if sig.args.len() != pr.params.len() {
        return Err(SemaError::new(
            pr.span,
            format!(
                "effect `{}` takes {} arguments, protocol names {}",
                pr.effect,
                sig.args.len(),
                pr.params.len()
            ),
        ));
    }
    let mut scope: Vec<(String, SourceType)> = owner_params
        .iter()
        .map(|p| (p.name.clone(), p.ty.clone()))
        .collect();
    scope.extend(
        pr.params
            .iter()
            .cloned()
            .zip(sig.args.iter().cloned())
            .filter(|(x, _)| x != "_"),
    );
    for t in &pr.requires {
        TermCtx::new(g, scope.clone(), false).check_bool(t)?;
    }
    let mut post_scope = scope.clone();
    post_scope.push(("reply".into(), sig.reply.clone()));
    for t in &pr.ensures {
        TermCtx::new(g, post_scope.clone(), true).check_bool(t)?;
    }
    for m in &pr.modifies {
        if g.state.get(m).is_none() {
            return Err(SemaError::new(
                pr.span,
                format!("`{m}` in modifies is not a top-level mutable variable"),
            ));
        }
    }
    let mut used = BTreeSet::new();
    for t in pr.requires.iter().chain(&pr.ensures) {
        used.extend(free_term_vars(t));
    }
    let captures = owner_params
        .iter()
        .filter(|p| used.contains(&p.name) && !pr.params.contains(&p.name))
        .cloned()
        .collect();
    Ok(ProtocolInfo {
        protocol: pr.clone(),
        owner: owner.map(str::to_string),
        captures,
    })
}
