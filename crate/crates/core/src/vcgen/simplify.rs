//! Equivalence-preserving term simplification.

use std::collections::BTreeMap;

use crate::ir::{IrProgram, LOp, LogicDef, Term};
use crate::surface::{Pattern, UnOp};

/// Non-recursive logic definitions, unfolded at their use sites.
#[derive(Debug, Clone, Default)]
pub struct Unfold {
    defs: BTreeMap<String, LogicDef>,
}

impl Unfold {
    pub fn of_program(p: &IrProgram) -> Unfold {
        let mut defs = BTreeMap::new();
        for d in &p.decls {
            if let crate::ir::Decl::Logic(l) = d {
                if !l.recursive {
                    defs.insert(l.name.clone(), l.clone());
                }
            }
        }
        Unfold { defs }
    }

    pub fn none() -> Unfold {
        Unfold::default()
    }
}

pub fn simplify(t: &Term, u: &Unfold) -> Term {
    let mut s = Simp { u, depth: 0 };
    s.go(t)
}

struct Simp<'a> {
    u: &'a Unfold,
    depth: usize,
}

fn t() -> Term {
    Term::Bool(true)
}

fn f() -> Term {
    Term::Bool(false)
}

/// Syntactically distinct values that are certainly different.
fn distinct_values(a: &Term, b: &Term) -> bool {
    match (a, b) {
        (Term::Int(x), Term::Int(y)) => x != y,
        (Term::Bool(x), Term::Bool(y)) => x != y,
        (Term::Ctor(c, xs, _), Term::Ctor(d, ys, _)) => {
            c != d || xs.iter().zip(ys).any(|(x, y)| distinct_values(x, y))
        }
        _ => false,
    }
}

fn is_value(a: &Term) -> bool {
    match a {
        Term::Int(_) | Term::Bool(_) | Term::Unit => true,
        Term::Ctor(_, xs, _) => xs.iter().all(is_value),
        _ => false,
    }
}

impl Simp<'_> {
    fn go(&mut self, term: &Term) -> Term {
        match term {
            Term::Int(_)
            | Term::Bool(_)
            | Term::Unit
            | Term::Var(..)
            | Term::Cur
            | Term::Old
            | Term::Length(_) => term.clone(),
            Term::Let(x, _, v, body) => {
                let v = self.go(v);
                let b = body.subst(&[(x.clone(), v)]);
                self.go(&b)
            }
            Term::Field(s, fld) => match self.go(s) {
                Term::Record(fs) => match fs.into_iter().find(|(n, _)| n == fld) {
                    Some((_, v)) => v,
                    None => Term::Field(Box::new(Term::Record(Vec::new())), fld.clone()),
                },
                s => Term::Field(Box::new(s), fld.clone()),
            },
            Term::Record(fs) => {
                Term::Record(fs.iter().map(|(n, v)| (n.clone(), self.go(v))).collect())
            }
            Term::Select(a, i) => {
                let a = self.go(a);
                let i = self.go(i);
                self.select(a, i)
            }
            Term::Store(a, i, v) => Term::Store(
                Box::new(self.go(a)),
                Box::new(self.go(i)),
                Box::new(self.go(v)),
            ),
            Term::Valid(k, s) => {
                let k = self.go(k);
                let s = self.go(s);
                match (&k, &s) {
                    (Term::Var(_, ty), Term::Record(fs)) => {
                        let fld = crate::ir::validity_field(ty);
                        match fs.iter().find(|(n, _)| *n == fld) {
                            Some((_, m)) => self.select(m.clone(), k),
                            None => Term::Valid(Box::new(k), Box::new(s)),
                        }
                    }
                    _ => Term::Valid(Box::new(k), Box::new(s)),
                }
            }
            Term::Bin(op, a, b) => {
                let a = self.go(a);
                let b = self.go(b);
                self.bin(*op, a, b)
            }
            Term::Un(op, a) => {
                let a = self.go(a);
                match (op, a) {
                    (UnOp::Not, Term::Bool(b)) => Term::Bool(!b),
                    (UnOp::Not, Term::Un(UnOp::Not, x)) => *x,
                    (UnOp::Neg, Term::Int(n)) => Term::Int(n.wrapping_neg()),
                    (op, a) => Term::Un(*op, Box::new(a)),
                }
            }
            Term::Ite(c, a, b) => match self.go(c) {
                Term::Bool(true) => self.go(a),
                Term::Bool(false) => self.go(b),
                c => {
                    let a = self.go(a);
                    let b = self.go(b);
                    if a == b {
                        a
                    } else {
                        Term::Ite(Box::new(c), Box::new(a), Box::new(b))
                    }
                }
            },
            Term::Forall(bs, trs, body) => match self.go(body) {
                Term::Bool(b) => Term::Bool(b),
                body => {
                    let trs = trs.iter().map(|x| self.go(x)).collect();
                    Term::Forall(bs.clone(), trs, Box::new(body))
                }
            },
            Term::Exists(bs, body) => match self.go(body) {
                Term::Bool(b) => Term::Bool(b),
                body => Term::Exists(bs.clone(), Box::new(body)),
            },
            Term::App(name, args) => {
                let args: Vec<Term> = args.iter().map(|a| self.go(a)).collect();
                match self.u.defs.get(name) {
                    Some(def) if self.depth < 32 => {
                        let sigma: Vec<(String, Term)> = def
                            .params
                            .iter()
                            .map(|(x, _)| x.clone())
                            .zip(args)
                            .collect();
                        let body = def.body.subst(&sigma);
                        self.depth += 1;
                        let r = self.go(&body);
                        self.depth -= 1;
                        r
                    }
                    _ => Term::App(name.clone(), args),
                }
            }
            Term::Ctor(c, args, ty) => Term::Ctor(
                c.clone(),
                args.iter().map(|a| self.go(a)).collect(),
                ty.clone(),
            ),
            Term::Pred(k, ty, args) => {
                Term::Pred(*k, ty.clone(), args.iter().map(|a| self.go(a)).collect())
            }
            Term::IsCtor(c, a) => match self.go(a) {
                Term::Ctor(d, _, _) => Term::Bool(*c == d),
                a => Term::IsCtor(c.clone(), Box::new(a)),
            },
            Term::CtorArg(c, i, ty, a) => match self.go(a) {
                Term::Ctor(d, args, _) if *c == d && *i < args.len() => args[*i].clone(),
                a => Term::CtorArg(c.clone(), *i, ty.clone(), Box::new(a)),
            },
            Term::Match(s, arms) => {
                let s = self.go(s);
                if let Term::Ctor(..) = &s {
                    for (p, body) in arms {
                        match match_value(p, &s) {
                            Fit::Yes(binds) => {
                                let b = body.subst(&binds);
                                return self.go(&b);
                            }
                            Fit::No => continue,
                            Fit::Unknown => break,
                        }
                    }
                }
                let arms = arms.iter().map(|(p, b)| (p.clone(), self.go(b))).collect();
                Term::Match(Box::new(s), arms)
            }
        }
    }

    fn select(&mut self, a: Term, i: Term) -> Term {
        match a {
            Term::Store(base, j, v) => {
                if *j == i {
                    *v
                } else if is_value(&j) && is_value(&i) {
                    self.select(*base, i)
                } else {
                    Term::select(Term::Store(base, j, v), i)
                }
            }
            a => Term::select(a, i),
        }
    }

    fn bin(&mut self, op: LOp, a: Term, b: Term) -> Term {
        use LOp::*;
        match (op, &a, &b) {
            (And, Term::Bool(true), _) => b,
            (And, _, Term::Bool(true)) => a,
            (And, Term::Bool(false), _) | (And, _, Term::Bool(false)) => f(),
            (Or, Term::Bool(false), _) => b,
            (Or, _, Term::Bool(false)) => a,
            (Or, Term::Bool(true), _) | (Or, _, Term::Bool(true)) => t(),
            (Implies, Term::Bool(true), _) => b,
            (Implies, Term::Bool(false), _) | (Implies, _, Term::Bool(true)) => t(),
            (Implies, _, Term::Bool(false)) => Term::not(a),
            (Iff, Term::Bool(true), _) => b,
            (Iff, _, Term::Bool(true)) => a,
            (Iff, Term::Bool(false), _) => Term::not(b),
            (Iff, _, Term::Bool(false)) => Term::not(a),
            (Eq, _, _) if a == b => t(),
            (Eq, _, _) if distinct_values(&a, &b) => f(),
            (Ne, _, _) if a == b => f(),
            (Ne, _, _) if distinct_values(&a, &b) => t(),
            (Iff | Implies, _, _) if a == b => t(),
            (Add, Term::Int(x), Term::Int(y)) => x
                .checked_add(*y)
                .map(Term::Int)
                .unwrap_or(Term::bin(op, a, b)),
            (Sub, Term::Int(x), Term::Int(y)) => x
                .checked_sub(*y)
                .map(Term::Int)
                .unwrap_or(Term::bin(op, a, b)),
            (Mul, Term::Int(x), Term::Int(y)) => x
                .checked_mul(*y)
                .map(Term::Int)
                .unwrap_or(Term::bin(op, a, b)),
            (Add, _, Term::Int(0)) | (Sub, _, Term::Int(0)) => a,
            (Add, Term::Int(0), _) => b,
            (Lt, Term::Int(x), Term::Int(y)) => Term::Bool(x < y),
            (Le, Term::Int(x), Term::Int(y)) => Term::Bool(x <= y),
            (Gt, Term::Int(x), Term::Int(y)) => Term::Bool(x > y),
            (Ge, Term::Int(x), Term::Int(y)) => Term::Bool(x >= y),
            _ => Term::bin(op, a, b),
        }
    }
}

enum Fit {
    Yes(Vec<(String, Term)>),
    No,
    Unknown,
}

/// Bindings of `p` against a value whose head constructors are known.
fn match_value(p: &Pattern, v: &Term) -> Fit {
    match p {
        Pattern::Wildcard => Fit::Yes(Vec::new()),
        Pattern::Var(x) => Fit::Yes(vec![(x.clone(), v.clone())]),
        Pattern::Ctor(c, ps) => match v {
            Term::Ctor(d, args, _) if c == d && args.len() == ps.len() => {
                let mut out = Vec::new();
                for (q, a) in ps.iter().zip(args) {
                    match match_value(q, a) {
                        Fit::Yes(b) => out.extend(b),
                        other => return other,
                    }
                }
                Fit::Yes(out)
            }
            Term::Ctor(..) => Fit::No,
            _ => Fit::Unknown,
        },
    }
}
