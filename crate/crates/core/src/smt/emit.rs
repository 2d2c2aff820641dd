//! SMT-LIB 2 rendering of verification conditions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::SmtError;
use crate::ir::{Decl, IrProgram, IrType, LOp, LogicDef, PredKind, Term};
use crate::surface::{Pattern, UnOp};
use crate::vcgen::Vc;

/// Program-level declarations shared by every script of one program.
pub struct Emitter {
    groups: Vec<Vec<(String, Vec<(String, Vec<IrType>)>)>>,
    ctors: BTreeMap<String, Vec<IrType>>,
    fields: Vec<(String, IrType)>,
    logic: Vec<LogicDef>,
    logic_name: String,
}

fn sym(prefix: &str, x: &str) -> String {
    let ok = |c: char| c.is_ascii_alphanumeric() || "_!@.$".contains(c);
    let body: String = x.chars().map(|c| if ok(c) { c } else { '$' }).collect();
    format!("{prefix}{body}")
}

fn var(x: &str) -> String {
    sym("v_", x)
}

fn ctor(c: &str) -> String {
    sym("c_", c)
}

fn field(f: &str) -> String {
    sym("f", f)
}

pub fn sort(t: &IrType) -> String {
    match t {
        IrType::Int => "Int".into(),
        IrType::Bool => "Bool".into(),
        IrType::Unit => "Unit".into(),
        IrType::Data(n) => sym("t_", n),
        IrType::Array(e) if e.is_closure() => format!("(Array {} Bool)", sort(e)),
        IrType::Array(e) => format!("(Array Int {})", sort(e)),
        IrType::State => "State".into(),
        IrType::Cont(..) | IrType::Lambda(..) => format!("K_{}", t.tag()),
    }
}

fn closure_types(t: &IrType, out: &mut BTreeSet<IrType>) {
    match t {
        IrType::Array(e) => closure_types(e, out),
        IrType::Cont(a, b) | IrType::Lambda(a, b) => {
            out.insert(t.clone());
            closure_types(a, out);
            closure_types(b, out);
        }
        _ => {}
    }
}

fn term_types(t: &Term, closures: &mut BTreeSet<IrType>, lengths: &mut BTreeSet<String>) {
    t.walk(&mut |x| match x {
        Term::Var(_, ty) | Term::Ctor(_, _, ty) | Term::CtorArg(_, _, ty, _) | Term::Pred(_, ty, _) => {
            closure_types(ty, closures)
        }
        Term::Let(_, ty, _, _) => closure_types(ty, closures),
        Term::Forall(bs, _, _) | Term::Exists(bs, _) => bs.iter().for_each(|(_, ty)| closure_types(ty, closures)),
        Term::Length(a) => {
            lengths.insert(a.clone());
        }
        _ => {}
    });
}

fn mentions(t: &Term, name: &str) -> bool {
    let mut found = false;
    t.walk(&mut |x| {
        if let Term::App(f, _) = x {
            found |= f == name;
        }
    });
    found
}

impl Emitter {
    pub fn new(p: &IrProgram) -> Emitter {
        let mut groups = Vec::new();
        let mut ctors = BTreeMap::new();
        let mut logic = Vec::new();
        for d in &p.decls {
            match d {
                Decl::Datatypes(g) => {
                    for (_, cs) in g {
                        for (c, args) in cs {
                            ctors.insert(c.clone(), args.clone());
                        }
                    }
                    groups.push(g.clone());
                }
                Decl::Logic(l) => logic.push(l.clone()),
                _ => {}
            }
        }
        Emitter { groups, ctors, fields: p.state_fields().to_vec(), logic, logic_name: "ALL".into() }
    }

    pub fn with_logic(mut self, logic: &str) -> Emitter {
        self.logic_name = logic.to_string();
        self
    }

    fn field_sort(&self, f: &str, t: &IrType) -> String {
        if f.starts_with("_valid_") {
            format!("(Array {} Bool)", sort(t))
        } else {
            sort(t)
        }
    }

    /// A closed script whose `unsat` answer means the VC holds.
    pub fn script(&self, vc: &Vc) -> Result<String, SmtError> {
        self.script_with(vc, false)
    }

    /// As [`Emitter::script`], with a model request after `check-sat`.
    pub fn script_with(&self, vc: &Vc, model: bool) -> Result<String, SmtError> {
        let mut closures = BTreeSet::new();
        let mut lengths = BTreeSet::new();
        for (_, t) in &self.fields {
            closure_types(t, &mut closures);
        }
        for l in &self.logic {
            l.params.iter().for_each(|(_, t)| closure_types(t, &mut closures));
            term_types(&l.body, &mut closures, &mut lengths);
        }
        for h in &vc.hyps {
            term_types(h, &mut closures, &mut lengths);
        }
        term_types(&vc.goal, &mut closures, &mut lengths);
        let mut subterms = BTreeSet::new();
        for t in vc.hyps.iter().chain(std::iter::once(&vc.goal)) {
            t.walk(&mut |x| {
                if let Term::App(f, _) = x {
                    if let Some(d) = f.strip_prefix("subterm_") {
                        subterms.insert(d.to_string());
                    }
                }
            });
        }

        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "; {} [{}] {}", vc.id, vc.kind, vc.span);
        if model {
            let _ = writeln!(w, "(set-option :produce-models true)");
        }
        let _ = writeln!(w, "(set-logic {})", self.logic_name);
        let _ = writeln!(w, "(declare-datatypes ((Unit 0)) (((unit))))");
        for k in &closures {
            let _ = writeln!(w, "(declare-sort {} 0)", sort(k));
        }
        for g in &self.groups {
            let heads: Vec<String> = g.iter().map(|(n, _)| format!("({} 0)", sym("t_", n))).collect();
            let bodies: Vec<String> = g
                .iter()
                .map(|(_, cs)| {
                    let cs: Vec<String> = cs
                        .iter()
                        .map(|(c, args)| {
                            if args.is_empty() {
                                format!("({})", ctor(c))
                            } else {
                                let sels: Vec<String> = args
                                    .iter()
                                    .enumerate()
                                    .map(|(i, t)| format!("({}_{i} {})", ctor(c), sort(t)))
                                    .collect();
                                format!("({} {})", ctor(c), sels.join(" "))
                            }
                        })
                        .collect();
                    format!("({})", cs.join(" "))
                })
                .collect();
            let _ = writeln!(w, "(declare-datatypes ({}) ({}))", heads.join(" "), bodies.join(" "));
        }
        let fs: String =
            self.fields.iter().map(|(f, t)| format!(" ({} {})", field(f), self.field_sort(f, t))).collect();
        let _ = writeln!(w, "(declare-datatypes ((State 0)) (((mk_state{fs}))))");
        for k in &closures {
            let (a, b) = match k {
                IrType::Cont(a, b) | IrType::Lambda(a, b) => (sort(a), sort(b)),
                _ => continue,
            };
            let tag = k.tag();
            let _ = writeln!(w, "(declare-fun pre_{tag} ({} {a} State) Bool)", sort(k));
            let _ = writeln!(w, "(declare-fun post_{tag} ({} {a} State State {b}) Bool)", sort(k));
        }
        for a in &lengths {
            let _ = writeln!(w, "(declare-const {} Int)", sym("length_", a));
            let _ = writeln!(w, "(assert (<= 0 {}))", sym("length_", a));
        }
        for d in &subterms {
            self.subterm_def(w, d);
        }
        for l in &self.logic {
            let ps: Vec<String> = l.params.iter().map(|(x, t)| format!("({} {})", var(x), sort(t))).collect();
            let body = self.term(&l.body)?;
            let name = sym("l_", &l.name);
            if !(l.recursive || mentions(&l.body, &l.name)) || l.params.is_empty() {
                let _ = writeln!(w, "(define-fun {name} ({}) {} {body})", ps.join(" "), sort(&l.ret));
                continue;
            }
            // Recursive definitions unfold by instantiation on their head.
            let sorts: Vec<String> = l.params.iter().map(|(_, t)| sort(t)).collect();
            let args: Vec<String> = l.params.iter().map(|(x, _)| var(x)).collect();
            let head = format!("({name} {})", args.join(" "));
            let _ = writeln!(w, "(declare-fun {name} ({}) {})", sorts.join(" "), sort(&l.ret));
            let _ = writeln!(w, "(assert (forall ({}) (! (= {head} {body}) :pattern ({head}))))", ps.join(" "));
        }
        for (x, t) in vc.symbols() {
            let _ = writeln!(w, "(declare-const {} {})", var(&x), sort(&t));
        }
        for h in &vc.hyps {
            let _ = writeln!(w, "(assert {})", self.term(h)?);
        }
        let _ = writeln!(w, "(assert (not {}))", self.term(&vc.goal)?);
        let _ = writeln!(w, "(check-sat)");
        if model {
            let _ = writeln!(w, "(get-model)");
        }
        Ok(out)
    }

    /// Strict structural subterm order on one datatype.
    fn subterm_def(&self, w: &mut String, d: &str) {
        let t = sym("t_", d);
        let me = IrType::Data(d.to_string());
        let mut arms = Vec::new();
        for g in &self.groups {
            for (n, cs) in g {
                if n != d {
                    continue;
                }
                for (c, args) in cs {
                    let direct: Vec<String> = args
                        .iter()
                        .enumerate()
                        .filter(|(_, a)| **a == me)
                        .map(|(i, _)| {
                            let s = format!("({}_{i} b)", ctor(c));
                            format!("(= a {s}) (subterm_{d} a {s})", d = sym("", d))
                        })
                        .collect();
                    if !direct.is_empty() {
                        arms.push(format!("(and ((_ is {}) b) (or {}))", ctor(c), direct.join(" ")));
                    }
                }
            }
        }
        let body = match arms.len() {
            0 => "false".to_string(),
            1 => arms.remove(0),
            _ => format!("(or {})", arms.join(" ")),
        };
        let name = format!("subterm_{}", sym("", d));
        let _ = writeln!(w, "(declare-fun {name} ({t} {t}) Bool)");
        let _ = writeln!(w, "(assert (forall ((a {t}) (b {t})) (! (= ({name} a b) {body}) :pattern (({name} a b)))))");
    }

    fn pattern(&self, p: &Pattern, s: &Term, binds: &mut Vec<(String, Term)>) -> Term {
        match p {
            Pattern::Wildcard => Term::Bool(true),
            Pattern::Var(x) => {
                binds.push((x.clone(), s.clone()));
                Term::Bool(true)
            }
            Pattern::Ctor(c, ps) => {
                let tys = self.ctors.get(c).cloned().unwrap_or_default();
                let mut conds = vec![Term::IsCtor(c.clone(), Box::new(s.clone()))];
                for (i, q) in ps.iter().enumerate() {
                    let ty = tys.get(i).cloned().unwrap_or(IrType::Unit);
                    conds.push(self.pattern(q, &Term::CtorArg(c.clone(), i, ty, Box::new(s.clone())), binds));
                }
                Term::and_all(conds)
            }
        }
    }

    fn app(&self, head: &str, args: &[Term]) -> Result<String, SmtError> {
        if args.is_empty() {
            return Ok(head.to_string());
        }
        let mut s = format!("({head}");
        for a in args {
            s.push(' ');
            s.push_str(&self.term(a)?);
        }
        s.push(')');
        Ok(s)
    }

    fn binders(bs: &[(String, IrType)]) -> String {
        let v: Vec<String> = bs.iter().map(|(x, t)| format!("({} {})", var(x), sort(t))).collect();
        v.join(" ")
    }

    pub fn term(&self, t: &Term) -> Result<String, SmtError> {
        Ok(match t {
            Term::Int(n) if *n < 0 => format!("(- {})", n.unsigned_abs()),
            Term::Int(n) => n.to_string(),
            Term::Bool(b) => b.to_string(),
            Term::Unit => "unit".into(),
            Term::Var(x, _) => var(x),
            Term::Cur | Term::Old => {
                return Err(SmtError::Unsupported("state reference outside a routine contract".into()))
            }
            Term::Field(s, f) => format!("({} {})", field(f), self.term(s)?),
            Term::Record(fs) => {
                let mut parts = Vec::new();
                for (f, _) in &self.fields {
                    match fs.iter().find(|(n, _)| n == f) {
                        Some((_, v)) => parts.push(self.term(v)?),
                        None => return Err(SmtError::Unsupported(format!("record without field `{f}`"))),
                    }
                }
                if parts.is_empty() {
                    "mk_state".into()
                } else {
                    format!("(mk_state {})", parts.join(" "))
                }
            }
            Term::Select(a, i) => format!("(select {} {})", self.term(a)?, self.term(i)?),
            Term::Store(a, i, v) => format!("(store {} {} {})", self.term(a)?, self.term(i)?, self.term(v)?),
            Term::Length(a) => sym("length_", a),
            Term::Bin(op, a, b) => {
                let (a, b) = (self.term(a)?, self.term(b)?);
                let head = match op {
                    LOp::Add => "+",
                    LOp::Sub => "-",
                    LOp::Mul => "*",
                    LOp::Div => "div",
                    LOp::Mod => "mod",
                    LOp::Eq | LOp::Iff => "=",
                    LOp::Ne => return Ok(format!("(not (= {a} {b}))")),
                    LOp::Lt => "<",
                    LOp::Le => "<=",
                    LOp::Gt => ">",
                    LOp::Ge => ">=",
                    LOp::And => "and",
                    LOp::Or => "or",
                    LOp::Implies => "=>",
                };
                format!("({head} {a} {b})")
            }
            Term::Un(UnOp::Neg, a) => format!("(- {})", self.term(a)?),
            Term::Un(UnOp::Not, a) => format!("(not {})", self.term(a)?),
            Term::Ite(c, a, b) => format!("(ite {} {} {})", self.term(c)?, self.term(a)?, self.term(b)?),
            Term::Forall(bs, trs, body) if bs.is_empty() => {
                let _ = trs;
                self.term(body)?
            }
            Term::Forall(bs, trs, body) => {
                let body = self.term(body)?;
                if trs.is_empty() {
                    format!("(forall ({}) {body})", Self::binders(bs))
                } else {
                    let ts: Vec<String> = trs.iter().map(|x| self.term(x)).collect::<Result<_, _>>()?;
                    format!("(forall ({}) (! {body} :pattern ({})))", Self::binders(bs), ts.join(" "))
                }
            }
            Term::Exists(bs, body) if bs.is_empty() => self.term(body)?,
            Term::Exists(bs, body) => format!("(exists ({}) {})", Self::binders(bs), self.term(body)?),
            Term::App(f, args) if f.starts_with("subterm_") => {
                self.app(&sym("subterm_", &f["subterm_".len()..]), args)?
            }
            Term::App(f, args) => self.app(&sym("l_", f), args)?,
            Term::Ctor(c, args, _) => self.app(&ctor(c), args)?,
            Term::Match(s, arms) => {
                let mut compiled: Option<Term> = None;
                for (p, body) in arms.iter().rev() {
                    let mut binds = Vec::new();
                    let cond = self.pattern(p, s, &mut binds);
                    let body = body.subst(&binds);
                    compiled = Some(match compiled {
                        None => body,
                        Some(rest) => Term::ite(cond, body, rest),
                    });
                }
                match compiled {
                    Some(c) => self.term(&c)?,
                    None => return Err(SmtError::Unsupported("match without arms".into())),
                }
            }
            Term::Pred(k, ty, args) => {
                let head = match k {
                    PredKind::Pre => format!("pre_{}", ty.tag()),
                    PredKind::Post => format!("post_{}", ty.tag()),
                };
                self.app(&head, args)?
            }
            Term::Valid(k, s) => {
                let ty = match &**k {
                    Term::Var(_, ty) => ty.clone(),
                    _ => return Err(SmtError::Unsupported("validity of a non-variable continuation".into())),
                };
                format!("(select ({} {}) {})", field(&crate::ir::validity_field(&ty)), self.term(s)?, self.term(k)?)
            }
            Term::Let(x, _, v, body) => format!("(let (({} {})) {})", var(x), self.term(v)?, self.term(body)?),
            Term::IsCtor(c, a) => format!("((_ is {}) {})", ctor(c), self.term(a)?),
            Term::CtorArg(c, i, _, a) => format!("({}_{i} {})", ctor(c), self.term(a)?),
        })
    }
}
