//! Erasure of spans and node ids, for comparing programs structurally.

use super::ast::*;

pub fn strip_locations(p: &SourceProgram) -> SourceProgram {
    let mut p = p.clone();
    p.next_id = 0;
    for d in &mut p.decls {
        match d {
            Decl::Effect(e) => e.span = Span::default(),
            Decl::Type(t) => t.span = Span::default(),
            Decl::Protocol(pr) => protocol(pr),
            Decl::Logic(l) => {
                l.span = Span::default();
                term(&mut l.body);
            }
            Decl::State(s) => {
                s.span = Span::default();
                match &mut s.init {
                    StateInit::Ref(e) => expr(e),
                    StateInit::Array(a, b) => {
                        expr(a);
                        expr(b);
                    }
                }
            }
            Decl::Fun(f) => {
                f.span = Span::default();
                fundef(&mut f.def);
            }
        }
    }
    p
}

fn protocol(pr: &mut Protocol) {
    pr.span = Span::default();
    pr.requires.iter_mut().for_each(term);
    pr.ensures.iter_mut().for_each(term);
}

fn spec(s: &mut SpecClauses) {
    s.span = Span::default();
    s.requires.iter_mut().for_each(term);
    s.ensures.iter_mut().for_each(term);
    if let Some(v) = &mut s.variant {
        term(v);
    }
    s.protocols.iter_mut().for_each(protocol);
}

fn param(p: &mut Param) {
    p.span = Span::default();
}

fn fundef(d: &mut FunDef) {
    d.params.iter_mut().for_each(param);
    expr(&mut d.body);
    spec(&mut d.spec);
}

fn term(t: &mut Term) {
    t.span = Span::default();
    match &mut t.kind {
        TermKind::Int(_)
        | TermKind::Bool(_)
        | TermKind::Unit
        | TermKind::Var(_)
        | TermKind::Deref(_) => {}
        TermKind::Old(a)
        | TermKind::Unary(_, a)
        | TermKind::Forall(_, a)
        | TermKind::Exists(_, a) => term(a),
        TermKind::Get(a, b)
        | TermKind::Binary(_, a, b)
        | TermKind::Implies(a, b)
        | TermKind::Iff(a, b) => {
            term(a);
            term(b);
        }
        TermKind::App(_, args) | TermKind::Ctor(_, args) => args.iter_mut().for_each(term),
        TermKind::If(a, b, c) => {
            term(a);
            term(b);
            term(c);
        }
        TermKind::Match(s, arms) => {
            term(s);
            arms.iter_mut().for_each(|(_, a)| term(a));
        }
    }
}

fn expr(e: &mut Expr) {
    e.span = Span::default();
    e.id = 0;
    match &mut e.kind {
        ExprKind::Int(_)
        | ExprKind::Bool(_)
        | ExprKind::Unit
        | ExprKind::Var(_)
        | ExprKind::Deref(_)
        | ExprKind::ArrayLength(_) => {}
        ExprKind::Binary(_, a, b)
        | ExprKind::Seq(a, b)
        | ExprKind::Let(_, _, a, b)
        | ExprKind::ArraySet(_, a, b) => {
            expr(a);
            expr(b);
        }
        ExprKind::Unary(_, a)
        | ExprKind::Assign(_, a)
        | ExprKind::ArrayGet(_, a)
        | ExprKind::Continue(_, a) => expr(a),
        ExprKind::LetFun(def, rest) => {
            fundef(def);
            expr(rest);
        }
        ExprKind::Fun {
            spec: s,
            param: p,
            body,
            ..
        } => {
            spec(s);
            param(p);
            expr(body);
        }
        ExprKind::App(c, args) => {
            expr(c);
            args.iter_mut().for_each(expr);
        }
        ExprKind::If(c, t, f) => {
            expr(c);
            expr(t);
            if let Some(f) = f {
                expr(f);
            }
        }
        ExprKind::Match(s, arms) => {
            expr(s);
            arms.iter_mut().for_each(|(_, a)| expr(a));
        }
        ExprKind::Ctor(_, args) | ExprKind::Perform(_, args) => args.iter_mut().for_each(expr),
        ExprKind::Try(h) => {
            expr(&mut h.body);
            for b in &mut h.branches {
                b.span = Span::default();
                expr(&mut b.body);
            }
            if let Some((_, v)) = &mut h.value_branch {
                expr(v);
            }
            if let Some(s) = &mut h.spec {
                s.span = Span::default();
                s.try_ensures.iter_mut().for_each(term);
            }
        }
    }
}
