//! Effect-row checking against `performs` clauses.

use std::collections::BTreeMap;

use super::{FunSig, SemaError, TypedProgram};
use crate::surface::{walk_expr, Expr, ExprKind, Span};

/// Escaping effects, each with the first site that lets it escape.
pub type Row = BTreeMap<String, Span>;

struct Rows<'a> {
    tp: &'a TypedProgram,
    /// `None` marks a value binding that shadows a function name.
    scope: Vec<(String, Option<FunSig>)>,
    errors: Vec<SemaError>,
}

pub fn row_violations(tp: &TypedProgram) -> Vec<SemaError> {
    let mut r = Rows {
        tp,
        scope: Vec::new(),
        errors: Vec::new(),
    };
    for f in tp.program.functions() {
        let n = r.scope.len();
        for p in &f.def.params {
            r.scope.push((p.name.clone(), None));
        }
        if f.def.recursive {
            let sig = tp.globals.functions[&f.def.name].clone();
            r.scope.push((f.def.name.clone(), Some(sig)));
        }
        let row = r.expr(&f.def.body);
        r.scope.truncate(n);
        r.check_row(&f.def.name, &row, &f.def.spec.performs);
    }
    r.errors
}

/// Escaping effects of one expression, evaluated in an empty local scope.
pub fn escaping(tp: &TypedProgram, e: &Expr) -> Row {
    let mut r = Rows {
        tp,
        scope: Vec::new(),
        errors: Vec::new(),
    };
    r.expr(e)
}

fn union(into: &mut Row, from: Row) {
    for (k, v) in from {
        into.entry(k).or_insert(v);
    }
}

impl Rows<'_> {
    fn check_row(&mut self, name: &str, row: &Row, performs: &[String]) {
        for (eff, span) in row {
            if !performs.contains(eff) {
                self.errors.push(SemaError::new(
                    *span,
                    format!("effect `{eff}` may escape `{name}` but is not listed in its performs clause"),
                ));
            }
        }
    }

    fn callee_sig(&self, f: &str) -> Option<FunSig> {
        match self.scope.iter().rev().find(|(x, _)| x == f) {
            Some((_, s)) => s.clone(),
            None => self.tp.globals.functions.get(f).cloned(),
        }
    }

    fn expr(&mut self, e: &Expr) -> Row {
        let mut row = Row::new();
        match &e.kind {
            ExprKind::Perform(eff, args) => {
                for a in args {
                    union(&mut row, self.expr(a));
                }
                row.entry(eff.clone()).or_insert(e.span);
            }
            ExprKind::App(callee, args) => {
                for a in args {
                    union(&mut row, self.expr(a));
                }
                let named = match &callee.kind {
                    ExprKind::Var(f) => self.callee_sig(f),
                    _ => None,
                };
                match named {
                    Some(sig) => {
                        for eff in &sig.spec.performs {
                            row.entry(eff.clone()).or_insert(e.span);
                        }
                    }
                    None => {
                        union(&mut row, self.expr(callee));
                        for eff in &self.tp.closure_performs {
                            row.entry(eff.clone()).or_insert(e.span);
                        }
                    }
                }
            }
            ExprKind::Let(x, _, v, rest) => {
                row = self.expr(v);
                self.scope.push((x.clone(), None));
                union(&mut row, self.expr(rest));
                self.scope.pop();
            }
            ExprKind::LetFun(def, rest) => {
                let sig = self.tp.local_funs[&e.id].clone();
                let n = self.scope.len();
                for p in &def.params {
                    self.scope.push((p.name.clone(), None));
                }
                if def.recursive {
                    self.scope.push((def.name.clone(), Some(sig.clone())));
                }
                let body = self.expr(&def.body);
                self.scope.truncate(n);
                self.check_row(&def.name, &body, &def.spec.performs);
                self.scope.push((def.name.clone(), Some(sig)));
                row = self.expr(rest);
                self.scope.truncate(n);
            }
            ExprKind::Fun {
                spec, param, body, ..
            } => {
                self.scope.push((param.name.clone(), None));
                let b = self.expr(body);
                self.scope.pop();
                self.check_row("anonymous function", &b, &spec.performs);
            }
            ExprKind::Match(s, arms) => {
                row = self.expr(s);
                for (p, a) in arms {
                    let mut bs = Vec::new();
                    p.binders(&mut bs);
                    let n = self.scope.len();
                    self.scope.extend(bs.into_iter().map(|b| (b, None)));
                    union(&mut row, self.expr(a));
                    self.scope.truncate(n);
                }
            }
            ExprKind::Try(h) => {
                let body = self.expr(&h.body);
                let handled: Vec<&str> = h.branches.iter().map(|b| b.effect.as_str()).collect();
                let unhandled: Row = body
                    .into_iter()
                    .filter(|(k, _)| !handled.contains(&k.as_str()))
                    .collect();
                let resumes = h.branches.iter().any(|b| {
                    let mut found = false;
                    walk_expr(&b.body, &mut |x| {
                        found |= matches!(&x.kind, ExprKind::Continue(k, _) if *k == b.cont)
                    });
                    found
                });
                if resumes {
                    if let Some((eff, span)) = unhandled.iter().next() {
                        self.errors.push(SemaError::new(
                            *span,
                            format!("effect `{eff}` passes through a handler that resumes its continuations; handle it inside"),
                        ));
                    }
                }
                row = unhandled;
                for b in &h.branches {
                    let n = self.scope.len();
                    self.scope
                        .extend(b.binders.iter().map(|x| (x.clone(), None)));
                    union(&mut row, self.expr(&b.body));
                    self.scope.truncate(n);
                }
                if let Some((x, v)) = &h.value_branch {
                    self.scope.push((x.clone(), None));
                    union(&mut row, self.expr(v));
                    self.scope.pop();
                }
            }
            ExprKind::Int(_)
            | ExprKind::Bool(_)
            | ExprKind::Unit
            | ExprKind::Var(_)
            | ExprKind::Deref(_)
            | ExprKind::ArrayLength(_) => {}
            ExprKind::Binary(_, a, b) | ExprKind::Seq(a, b) | ExprKind::ArraySet(_, a, b) => {
                row = self.expr(a);
                union(&mut row, self.expr(b));
            }
            ExprKind::Unary(_, a)
            | ExprKind::Assign(_, a)
            | ExprKind::ArrayGet(_, a)
            | ExprKind::Continue(_, a) => {
                row = self.expr(a);
            }
            ExprKind::If(c, t, f) => {
                row = self.expr(c);
                union(&mut row, self.expr(t));
                if let Some(f) = f {
                    union(&mut row, self.expr(f));
                }
            }
            ExprKind::Ctor(_, args) => {
                for a in args {
                    union(&mut row, self.expr(a));
                }
            }
        }
        row
    }
}
