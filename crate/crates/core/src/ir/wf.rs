//! Well-formedness of IR programs: first-order types, name resolution,
//! `pre`/`post` arities and writes-clause closure.

use std::collections::BTreeSet;
use std::fmt;

use super::*;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WfError {
    pub routine: String,
    /// IR node id of the offending expression; 0 for declaration-level errors.
    pub node: u32,
    pub message: String,
}

impl fmt::Display for WfError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (node {}): {}", self.routine, self.node, self.message)
    }
}

pub fn wf_check(p: &IrProgram) -> Vec<WfError> {
    let mut c = Checker {
        p,
        routine: String::new(),
        node: 0,
        scope: Vec::new(),
        routines: p.routines().map(|r| (r.name.clone(), r.clone())).collect(),
        errors: Vec::new(),
    };
    for (f, t) in p.state_fields() {
        if !f.starts_with("_valid_") && contains_closure(t) {
            c.err(format!("state field `{f}` is not first-order"));
        }
    }
    for d in &p.decls {
        match d {
            Decl::Exception(n, args) => {
                if args.iter().any(contains_closure) {
                    c.routine = n.clone();
                    c.err(format!("exception `{n}` carries a higher-order payload"));
                }
            }
            Decl::Logic(l) => {
                c.routine = l.name.clone();
                c.scope = l.params.iter().map(|(x, _)| x.clone()).collect();
                c.term(&l.body);
            }
            Decl::Routine(r) => {
                c.scope.clear();
                c.routine(r);
            }
            Decl::Datatypes(_) | Decl::State(_) => {}
        }
    }
    c.errors
}

fn contains_closure(t: &IrType) -> bool {
    match t {
        IrType::Cont(..) | IrType::Lambda(..) => true,
        IrType::Array(a) => contains_closure(a),
        _ => false,
    }
}

struct Checker<'a> {
    p: &'a IrProgram,
    routine: String,
    node: u32,
    scope: Vec<String>,
    /// Global and in-scope local routines.
    routines: Vec<(String, Routine)>,
    errors: Vec<WfError>,
}

impl Checker<'_> {
    fn err(&mut self, message: String) {
        self.errors.push(WfError {
            routine: self.routine.clone(),
            node: self.node,
            message,
        });
    }

    fn lookup(&self, f: &str) -> Option<&Routine> {
        self.routines
            .iter()
            .rev()
            .find(|(n, _)| n == f)
            .map(|(_, r)| r)
    }

    fn routine(&mut self, r: &Routine) {
        let saved = (self.routine.clone(), self.node);
        self.routine = r.name.clone();
        let n = self.scope.len();
        self.scope.extend(r.params.iter().map(|(x, _)| x.clone()));
        let fields: BTreeSet<&str> = self
            .p
            .state_fields()
            .iter()
            .map(|(f, _)| f.as_str())
            .collect();
        if let Some(w) = &r.contract.writes {
            for f in w {
                if !fields.contains(f.as_str()) {
                    self.err(format!("writes clause names unknown field `{f}`"));
                }
            }
        }
        for t in &r.contract.requires {
            self.term(t);
        }
        if let Some(v) = &r.contract.variant {
            self.term(v);
        }
        self.scope.push("result".into());
        for t in &r.contract.ensures {
            self.term(t);
        }
        self.scope.pop();
        for rs in &r.contract.raises {
            if self.p.exception(&rs.exn).is_none() {
                self.err(format!("raises unknown exception `{}`", rs.exn));
            }
            let m = self.scope.len();
            self.scope.extend(rs.binders.iter().map(|(x, _)| x.clone()));
            self.term(&rs.post);
            self.scope.truncate(m);
        }
        if let Some(b) = &r.body {
            if r.recursive {
                self.routines.push((r.name.clone(), r.clone()));
            }
            self.expr(b, r);
            if r.recursive {
                self.routines.pop();
            }
        }
        self.scope.truncate(n);
        (self.routine, self.node) = saved;
    }

    fn check_written(&mut self, field: &str, owner: &Routine) {
        if let Some(w) = &owner.contract.writes {
            if !w.iter().any(|f| f == field) {
                self.err(format!(
                    "`{}` is written but not declared writable",
                    &field[1..]
                ));
            }
        }
    }

    fn expr(&mut self, e: &Expr, owner: &Routine) {
        self.node = e.id;
        match &e.kind {
            ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Unit => {}
            ExprKind::Var(x) => {
                if !self.scope.contains(x) {
                    self.err(format!("unbound variable `{x}`"));
                }
            }
            ExprKind::Read(x) | ExprKind::ArrayLength(x) => self.state_var(x),
            ExprKind::Write(x, v) => {
                self.state_var(x);
                self.check_written(&field_name(x), owner);
                self.expr(v, owner);
            }
            ExprKind::ArrayGet(a, i) => {
                self.state_var(a);
                self.expr(i, owner);
            }
            ExprKind::ArraySet(a, i, v) => {
                self.state_var(a);
                self.check_written(&field_name(a), owner);
                self.expr(i, owner);
                self.expr(v, owner);
            }
            ExprKind::Un(_, a) => self.expr(a, owner),
            ExprKind::Bin(_, a, b) | ExprKind::Seq(a, b) => {
                self.expr(a, owner);
                self.expr(b, owner);
            }
            ExprKind::Ctor(_, args) => args.iter().for_each(|a| self.expr(a, owner)),
            ExprKind::Let(x, v, rest) => {
                self.expr(v, owner);
                self.scope.push(x.clone());
                self.expr(rest, owner);
                self.scope.pop();
            }
            ExprKind::Snapshot(x, rest) => {
                self.scope.push(x.clone());
                self.expr(rest, owner);
                self.scope.pop();
            }
            ExprKind::If(c, t, f) => {
                self.expr(c, owner);
                self.expr(t, owner);
                self.expr(f, owner);
            }
            ExprKind::Match(s, arms) => {
                self.expr(s, owner);
                for (p, a) in arms {
                    let mut bs = Vec::new();
                    p.binders(&mut bs);
                    let n = self.scope.len();
                    self.scope.extend(bs);
                    self.expr(a, owner);
                    self.scope.truncate(n);
                }
            }
            ExprKind::Call(f, args) => {
                args.iter().for_each(|a| self.expr(a, owner));
                self.node = e.id;
                match self.lookup(f).cloned() {
                    None => self.err(format!("call to unknown routine `{f}`")),
                    Some(r) => {
                        if r.params.len() != args.len() {
                            self.err(format!(
                                "`{f}` expects {} arguments, got {}",
                                r.params.len(),
                                args.len()
                            ));
                        }
                        for w in &r.effective_writes {
                            self.check_written(w, owner);
                        }
                    }
                }
            }
            ExprKind::Apply(f, a) => {
                self.expr(f, owner);
                self.expr(a, owner);
                if !matches!(f.ty, IrType::Lambda(..)) {
                    self.node = e.id;
                    self.err("`apply` on a value that is not a closure".into());
                }
            }
            ExprKind::Continue { k, arg, writes } => {
                self.expr(k, owner);
                self.expr(arg, owner);
                self.node = e.id;
                if !matches!(k.ty, IrType::Cont(..)) {
                    self.err("`continue` on a value that is not a continuation".into());
                }
                for w in writes.iter().filter(|w| !w.starts_with("_valid_")) {
                    self.check_written(w, owner);
                }
            }
            ExprKind::Try {
                body,
                value,
                handlers,
            } => {
                self.expr(body, owner);
                if let Some((x, v)) = value {
                    self.scope.push(x.clone());
                    self.expr(v, owner);
                    self.scope.pop();
                }
                for h in handlers {
                    self.node = e.id;
                    match self.p.exception(&h.exn) {
                        None => self.err(format!("handler for unknown exception `{}`", h.exn)),
                        Some(args) if args.len() != h.binders.len() => self.err(format!(
                            "exception `{}` carries {} values",
                            h.exn,
                            args.len()
                        )),
                        Some(_) => {}
                    }
                    let n = self.scope.len();
                    self.scope.extend(h.binders.iter().map(|(x, _)| x.clone()));
                    self.expr(&h.body, owner);
                    self.scope.truncate(n);
                }
            }
            ExprKind::LetRoutine(r, rest) => {
                self.routine(r);
                for w in &r.effective_writes {
                    if r.kind == RoutineKind::Handler {
                        self.node = e.id;
                        self.check_written(w, owner);
                    }
                }
                self.routines.push((r.name.clone(), (**r).clone()));
                self.expr(rest, owner);
                self.routines.pop();
            }
        }
    }

    fn state_var(&mut self, x: &str) {
        let f = field_name(x);
        if !self.p.state_fields().iter().any(|(n, _)| *n == f) {
            self.err(format!("unknown state variable `{x}`"));
        }
    }

    fn term(&mut self, t: &Term) {
        match t {
            Term::Var(x, _) => {
                if !self.scope.contains(x) {
                    self.err(format!("unbound logical variable `{x}`"));
                }
            }
            Term::Forall(bs, trs, body) => {
                let n = self.scope.len();
                self.scope.extend(bs.iter().map(|(x, _)| x.clone()));
                trs.iter().for_each(|t| self.term(t));
                self.term(body);
                self.scope.truncate(n);
            }
            Term::Exists(bs, body) => {
                let n = self.scope.len();
                self.scope.extend(bs.iter().map(|(x, _)| x.clone()));
                self.term(body);
                self.scope.truncate(n);
            }
            Term::Match(s, arms) => {
                self.term(s);
                for (p, a) in arms {
                    let mut bs = Vec::new();
                    p.binders(&mut bs);
                    let n = self.scope.len();
                    self.scope.extend(bs);
                    self.term(a);
                    self.scope.truncate(n);
                }
            }
            Term::Pred(k, ty, args) => {
                if args.len() != k.arity() {
                    self.err(format!(
                        "`{}` applied to {} arguments, expected {}",
                        k.name(),
                        args.len(),
                        k.arity()
                    ));
                }
                if !ty.is_closure() {
                    self.err(format!("`{}` applied to a value of type {ty}", k.name()));
                }
                args.iter().for_each(|a| self.term(a));
            }
            Term::App(f, args) => {
                match self.p.logic(f) {
                    None => self.err(format!("unknown logic symbol `{f}`")),
                    Some(l) if l.params.len() != args.len() => self.err(format!(
                        "`{f}` expects {} arguments, got {}",
                        l.params.len(),
                        args.len()
                    )),
                    Some(_) => {}
                }
                args.iter().for_each(|a| self.term(a));
            }
            Term::Field(s, f) => {
                if !self.p.state_fields().iter().any(|(n, _)| n == f) {
                    self.err(format!("unknown state field `{f}`"));
                }
                self.term(s);
            }
            Term::Length(a) => self.state_var(a),
            Term::Let(x, _, v, body) => {
                self.term(v);
                self.scope.push(x.clone());
                self.term(body);
                self.scope.pop();
            }
            Term::IsCtor(_, a) | Term::CtorArg(_, _, _, a) => self.term(a),
            Term::Int(_)
            | Term::Bool(_)
            | Term::Unit
            | Term::Cur
            | Term::Old
            | Term::Record(_)
            | Term::Select(..)
            | Term::Store(..)
            | Term::Bin(..)
            | Term::Un(..)
            | Term::Ite(..)
            | Term::Ctor(..)
            | Term::Valid(..) => {
                for k in direct_children(t) {
                    self.term(k);
                }
            }
        }
    }
}

fn direct_children(t: &Term) -> Vec<&Term> {
    match t {
        Term::Record(fs) => fs.iter().map(|(_, t)| t).collect(),
        Term::Select(a, b) | Term::Bin(_, a, b) | Term::Valid(a, b) => vec![a, b],
        Term::Store(a, b, c) | Term::Ite(a, b, c) => vec![a, b, c],
        Term::Un(_, a) => vec![a],
        Term::Ctor(_, args, _) => args.iter().collect(),
        _ => Vec::new(),
    }
}
