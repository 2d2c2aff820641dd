//! Forward symbolic execution producing one VC per obligation site.

use std::collections::BTreeMap;
use std::rc::Rc;

use super::{Vc, VcError, VcKind};
use crate::ir::{
    field_name, validity_field, Decl, ExnHandler, Expr, ExprKind, IrProgram, IrType, LOp, PredKind,
    Routine, RoutineKind, Term, TypeEnv,
};
use crate::surface::{Pattern, Span};

type R<T> = Result<T, VcError>;

/// Path condition and current value of every state field.
#[derive(Clone)]
struct St {
    facts: Vec<Rc<Term>>,
    store: Vec<(String, Term)>,
}

impl St {
    fn get(&self, f: &str) -> Term {
        self.store
            .iter()
            .find(|(n, _)| n == f)
            .map(|(_, v)| v.clone())
            .unwrap_or(Term::Unit)
    }

    fn set(&mut self, f: &str, v: Term) {
        if let Some(slot) = self.store.iter_mut().find(|(n, _)| n == f) {
            slot.1 = v;
        }
    }

    fn record(&self) -> Term {
        Term::Record(self.store.clone())
    }

    fn assume(&mut self, t: Term) {
        if t != Term::Bool(true) {
            self.facts.push(Rc::new(t));
        }
    }
}

/// Raised exception; the payload carries protocol captures before arguments.
struct Exn {
    name: String,
    st: St,
    payload: Vec<Term>,
    tys: Vec<IrType>,
}

#[derive(Default)]
struct Out {
    normal: Option<(St, Term)>,
    exns: Vec<Exn>,
}

impl Out {
    fn val(st: St, v: Term) -> Out {
        Out {
            normal: Some((st, v)),
            exns: Vec::new(),
        }
    }
}

struct RDef {
    r: Routine,
    env: Env,
}

#[derive(Clone, Default)]
struct Env {
    vals: Vec<(String, Term)>,
    routines: Vec<(String, Rc<RDef>)>,
}

impl Env {
    fn with(&self, x: &str, v: Term) -> Env {
        let mut e = self.clone();
        e.vals.push((x.to_string(), v));
        e
    }

    fn val(&self, x: &str) -> Option<Term> {
        self.vals
            .iter()
            .rev()
            .find(|(n, _)| n == x)
            .map(|(_, v)| v.clone())
    }
}

struct Gen<'a> {
    fields: Vec<(String, IrType)>,
    tenv: TypeEnv,
    globals: BTreeMap<String, Rc<RDef>>,
    ctors: BTreeMap<String, Vec<IrType>>,
    counter: usize,
    vcs: Vec<Vc>,
    top: String,
    seq: usize,
    /// Routine whose recursive calls must decrease, with its entry measure.
    variant: Option<(Rc<RDef>, Term)>,
    _p: &'a IrProgram,
}

pub(super) fn generate(p: &IrProgram) -> R<Vec<Vc>> {
    let mut g = Gen {
        fields: p.state_fields().to_vec(),
        tenv: TypeEnv::of_program(p),
        globals: BTreeMap::new(),
        ctors: BTreeMap::new(),
        counter: 0,
        vcs: Vec::new(),
        top: String::new(),
        seq: 0,
        variant: None,
        _p: p,
    };
    for d in &p.decls {
        if let Decl::Datatypes(ds) = d {
            for (_, cs) in ds {
                for (c, args) in cs {
                    g.ctors.insert(c.clone(), args.clone());
                }
            }
        }
    }
    for r in p.routines() {
        g.globals.insert(
            r.name.clone(),
            Rc::new(RDef {
                r: r.clone(),
                env: Env::default(),
            }),
        );
    }
    for r in p.routines() {
        if r.kind == RoutineKind::Function && r.body.is_some() {
            g.top = r.name.clone();
            g.seq = 0;
            g.counter = 0;
            let def = g.globals[&r.name].clone();
            g.verify_routine(def, Vec::new())?;
        }
    }
    Ok(g.vcs)
}

fn is_validity(f: &str) -> bool {
    f.starts_with("_valid_")
}

fn atomic(t: &Term) -> bool {
    matches!(t, Term::Int(_) | Term::Bool(_) | Term::Unit | Term::Var(..))
}

impl Gen<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> R<T> {
        Err(VcError {
            routine: self.top.clone(),
            message: msg.into(),
        })
    }

    fn fresh(&mut self, base: &str, ty: IrType) -> Term {
        self.counter += 1;
        let base = base.trim_start_matches('_');
        let base = if base.is_empty() { "v" } else { base };
        Term::Var(format!("{base}!{}", self.counter), ty)
    }

    /// Symbol for the current value of a state field.
    fn fresh_field(&mut self, f: &str) -> Term {
        let ty = self.field_ty(f);
        self.fresh(f, ty)
    }

    fn field_ty(&self, f: &str) -> IrType {
        let ty = self
            .fields
            .iter()
            .find(|(n, _)| n == f)
            .map(|(_, t)| t.clone())
            .unwrap_or(IrType::Unit);
        if is_validity(f) {
            IrType::Array(Box::new(ty))
        } else {
            ty
        }
    }

    fn fresh_store(&mut self) -> Vec<(String, Term)> {
        let names: Vec<String> = self.fields.iter().map(|(n, _)| n.clone()).collect();
        names
            .into_iter()
            .map(|n| (n.clone(), self.fresh_field(&n)))
            .collect()
    }

    fn emit(&mut self, st: &St, kind: VcKind, span: Span, goal: Term) {
        self.seq += 1;
        self.vcs.push(Vc {
            id: format!("{}.{}", self.top, self.seq),
            routine: self.top.clone(),
            kind,
            span,
            hyps: st.facts.iter().map(|h| (**h).clone()).collect(),
            goal,
        });
    }

    /// Contract term under `env` and `extra`, with `Cur`/`Old` replaced.
    fn inst(
        &self,
        t: &Term,
        env: &Env,
        extra: &[(String, Term)],
        cur: &Term,
        old: Option<&Term>,
    ) -> Term {
        let fv = t.free_vars();
        let mut sigma: Vec<(String, Term)> = Vec::new();
        for (x, _) in &fv {
            let v = extra
                .iter()
                .rev()
                .find(|(n, _)| n == x)
                .map(|(_, v)| v.clone())
                .or_else(|| env.val(x));
            if let Some(v) = v {
                sigma.push((x.clone(), v));
            }
        }
        let t = if sigma.is_empty() {
            t.clone()
        } else {
            t.subst(&sigma)
        };
        t.map(&mut |x| match x {
            Term::Cur => Some(cur.clone()),
            Term::Old => Some(old.cloned().unwrap_or_else(|| cur.clone())),
            _ => None,
        })
    }

    fn combined(ts: &[Term]) -> Term {
        Term::and_all(ts.iter().cloned())
    }

    /// Replaces the named user fields with fresh symbols.
    fn havoc(&mut self, st: &mut St, fields: &[String]) {
        for f in fields {
            if !is_validity(f) && st.store.iter().any(|(n, _)| n == f) {
                let v = self.fresh_field(f);
                st.set(f, v);
            }
        }
    }

    /// Validity maps may only lose entries.
    fn havoc_validity(&mut self, st: &mut St, only: Option<&str>) {
        let names: Vec<String> = self
            .fields
            .iter()
            .map(|(n, _)| n.clone())
            .filter(|n| is_validity(n) && only.is_none_or(|o| o == n))
            .collect();
        for f in names {
            let old = st.get(&f);
            let new = self.fresh_field(&f);
            let kty = match self.field_ty(&f) {
                IrType::Array(k) => *k,
                t => t,
            };
            let c = Term::var("c", kty.clone());
            st.assume(Term::forall(
                vec![("c".into(), kty)],
                vec![Term::select(new.clone(), c.clone())],
                Term::implies(Term::select(new.clone(), c.clone()), Term::select(old, c)),
            ));
            st.set(&f, new);
        }
    }

    fn lookup_routine(&self, env: &Env, name: &str) -> R<Rc<RDef>> {
        if let Some((_, d)) = env.routines.iter().rev().find(|(n, _)| n == name) {
            return Ok(d.clone());
        }
        match self.globals.get(name) {
            Some(d) => Ok(d.clone()),
            None => self.err(format!("unknown routine `{name}`")),
        }
    }
}

impl Gen<'_> {
    /// Joins paths: shared fact prefix, then one disjunction of the suffixes
    /// with the differing store and result values named by fresh symbols.
    fn merge(
        &mut self,
        mut paths: Vec<(St, Vec<Term>)>,
        tys: &[IrType],
    ) -> Option<(St, Vec<Term>)> {
        if paths.len() <= 1 {
            return paths.pop();
        }
        let n = paths.iter().map(|(s, _)| s.facts.len()).min().unwrap_or(0);
        let mut pre = 0;
        while pre < n
            && paths
                .iter()
                .all(|(s, _)| Rc::ptr_eq(&s.facts[pre], &paths[0].0.facts[pre]))
        {
            pre += 1;
        }
        let mut eqs: Vec<Vec<Term>> = vec![Vec::new(); paths.len()];
        let mut store = paths[0].0.store.clone();
        for (i, (f, v0)) in paths[0].0.store.iter().enumerate() {
            if paths.iter().all(|(s, _)| s.store[i].1 == *v0) {
                continue;
            }
            let v = self.fresh_field(f);
            for (j, (s, _)) in paths.iter().enumerate() {
                eqs[j].push(Term::eq(v.clone(), s.store[i].1.clone()));
            }
            store[i].1 = v;
        }
        let mut vals = paths[0].1.clone();
        for (i, ty) in tys.iter().enumerate() {
            if paths.iter().all(|(_, vs)| vs[i] == paths[0].1[i]) {
                continue;
            }
            let v = self.fresh("join", ty.clone());
            for (j, (_, vs)) in paths.iter().enumerate() {
                eqs[j].push(Term::eq(v.clone(), vs[i].clone()));
            }
            vals[i] = v;
        }
        let disjuncts: Vec<Term> = paths
            .iter()
            .zip(eqs)
            .map(|((s, _), eq)| {
                Term::and_all(s.facts[pre..].iter().map(|f| (**f).clone()).chain(eq))
            })
            .collect();
        let mut facts: Vec<Rc<Term>> = paths[0].0.facts[..pre].to_vec();
        let disj = disjuncts
            .into_iter()
            .reduce(|a, b| Term::bin(LOp::Or, a, b))
            .unwrap_or(Term::Bool(false));
        if disj != Term::Bool(true) {
            facts.push(Rc::new(disj));
        }
        Some((St { facts, store }, vals))
    }

    fn merge_normal(&mut self, outs: Vec<(St, Term)>, ty: &IrType) -> Option<(St, Term)> {
        let paths = outs.into_iter().map(|(s, v)| (s, vec![v])).collect();
        self.merge(paths, std::slice::from_ref(ty))
            .map(|(s, mut v)| (s, v.remove(0)))
    }

    /// Groups raised exceptions by name, first-raise order, one merged path each.
    fn merge_exns(&mut self, exns: Vec<Exn>) -> Vec<Exn> {
        let mut names: Vec<String> = Vec::new();
        for e in &exns {
            if !names.contains(&e.name) {
                names.push(e.name.clone());
            }
        }
        let mut groups: BTreeMap<String, (Vec<IrType>, Vec<(St, Vec<Term>)>)> = BTreeMap::new();
        for e in exns {
            let g = groups.entry(e.name).or_insert_with(|| (e.tys, Vec::new()));
            g.1.push((e.st, e.payload));
        }
        let mut out = Vec::new();
        for n in names {
            let (tys, paths) = groups.remove(&n).unwrap_or_default();
            if let Some((st, payload)) = self.merge(paths, &tys) {
                out.push(Exn {
                    name: n,
                    st,
                    payload,
                    tys,
                });
            }
        }
        out
    }

    /// Checks a routine body against its contract, starting from a fresh
    /// store under the hypotheses `facts`.
    fn verify_routine(&mut self, def: Rc<RDef>, facts: Vec<Rc<Term>>) -> R<()> {
        let r = &def.r;
        let Some(body) = &r.body else { return Ok(()) };
        let store = self.fresh_store();
        let mut st = St { facts, store };
        let mut env = def.env.clone();
        if r.recursive {
            env.routines.push((r.name.clone(), def.clone()));
        }
        for (x, ty) in &r.params {
            let v = self.fresh(x, ty.clone());
            env.vals.push((x.clone(), v));
        }
        let entry = st.record();
        for q in &r.contract.requires {
            let t = self.inst(q, &env, &[], &entry, None);
            st.assume(t);
        }
        let saved = self.variant.take();
        if let (true, Some(v)) = (r.recursive, &r.contract.variant) {
            let v0 = self.inst(v, &env, &[], &entry, None);
            self.variant = Some((def.clone(), v0));
        }
        let out = self.exec(body, st, &env)?;
        self.variant = saved;
        if let Some((st, v)) = out.normal {
            let goal = self.inst(
                &Self::combined(&r.contract.ensures),
                &env,
                &[("result".into(), v)],
                &st.record(),
                Some(&entry),
            );
            self.emit(&st, VcKind::Postcondition, r.span, goal);
            self.frame_check(&st, r, &entry);
        }
        for e in self.merge_exns(out.exns) {
            self.raises_check(&e, r, &env, &entry, VcKind::Postcondition);
            self.frame_check(&e.st, r, &entry);
        }
        Ok(())
    }

    /// Declared writes cover every modified user field.
    fn frame_check(&mut self, st: &St, r: &Routine, entry: &Term) {
        let Some(writes) = &r.contract.writes else {
            return;
        };
        let Term::Record(old) = entry else { return };
        let eqs: Vec<Term> = old
            .iter()
            .filter(|(f, _)| !is_validity(f) && !writes.contains(f))
            .map(|(f, v)| Term::eq(st.get(f), v.clone()))
            .collect();
        if !eqs.is_empty() {
            self.emit(st, VcKind::WritesFrame, r.span, Term::and_all(eqs));
        }
    }

    fn raises_check(&mut self, e: &Exn, r: &Routine, env: &Env, entry: &Term, kind: VcKind) {
        let goal = match r.contract.raises.iter().find(|x| x.exn == e.name) {
            Some(rs) => {
                let extra: Vec<(String, Term)> = rs
                    .binders
                    .iter()
                    .map(|(b, _)| b.clone())
                    .zip(e.payload.iter().cloned())
                    .collect();
                self.inst(&rs.post, env, &extra, &e.st.record(), Some(entry))
            }
            None => Term::Bool(false),
        };
        self.emit(&e.st, kind, r.span, goal);
    }
}

impl Gen<'_> {
    fn exec(&mut self, e: &Expr, st: St, env: &Env) -> R<Out> {
        match &e.kind {
            ExprKind::Int(n) => Ok(Out::val(st, Term::Int(*n))),
            ExprKind::Bool(b) => Ok(Out::val(st, Term::Bool(*b))),
            ExprKind::Unit => Ok(Out::val(st, Term::Unit)),
            ExprKind::Var(x) => match env.val(x) {
                Some(v) => Ok(Out::val(st, v)),
                None => self.err(format!("unbound variable `{x}`")),
            },
            ExprKind::Read(x) => {
                let v = st.get(&field_name(x));
                Ok(Out::val(st, v))
            }
            ExprKind::ArrayLength(a) => Ok(Out::val(st, Term::Length(a.clone()))),
            ExprKind::Write(x, v) => self.list(&[&**v], st, env, |_, mut st, vs| {
                st.set(&field_name(x), vs[0].clone());
                Ok(Out::val(st, Term::Unit))
            }),
            ExprKind::ArrayGet(a, i) => self.list(&[&**i], st, env, |_, st, vs| {
                let v = Term::select(st.get(&field_name(a)), vs[0].clone());
                Ok(Out::val(st, v))
            }),
            ExprKind::ArraySet(a, i, v) => self.list(&[&**i, &**v], st, env, |_, mut st, vs| {
                let f = field_name(a);
                let arr = Term::Store(
                    Box::new(st.get(&f)),
                    Box::new(vs[0].clone()),
                    Box::new(vs[1].clone()),
                );
                st.set(&f, arr);
                Ok(Out::val(st, Term::Unit))
            }),
            ExprKind::Un(op, a) => self.list(&[&**a], st, env, |_, st, vs| {
                Ok(Out::val(st, Term::Un(*op, Box::new(vs[0].clone()))))
            }),
            ExprKind::Bin(op, a, b) => self.list(&[&**a, &**b], st, env, |_, st, vs| {
                Ok(Out::val(
                    st,
                    Term::bin(LOp::from_binop(*op), vs[0].clone(), vs[1].clone()),
                ))
            }),
            ExprKind::Ctor(c, args) => {
                self.list(&args.iter().collect::<Vec<_>>(), st, env, |_, st, vs| {
                    Ok(Out::val(st, Term::Ctor(c.clone(), vs, e.ty.clone())))
                })
            }
            ExprKind::Let(x, v, body) => self.list(&[&**v], st, env, |g, mut st, vs| {
                let val = if atomic(&vs[0]) {
                    vs[0].clone()
                } else {
                    let sym = g.fresh(x, v.ty.clone());
                    st.assume(Term::eq(sym.clone(), vs[0].clone()));
                    sym
                };
                g.exec(body, st, &env.with(x, val))
            }),
            ExprKind::Seq(a, b) => self.list(&[&**a], st, env, |g, st, _| g.exec(b, st, env)),
            ExprKind::If(c, t, f) => self.list(&[&**c], st, env, |g, st, vs| {
                let mut st_t = st.clone();
                st_t.assume(vs[0].clone());
                let mut st_f = st;
                st_f.assume(Term::not(vs[0].clone()));
                let ot = g.exec(t, st_t, env)?;
                let of = g.exec(f, st_f, env)?;
                let normal =
                    g.merge_normal(ot.normal.into_iter().chain(of.normal).collect(), &e.ty);
                let mut exns = ot.exns;
                exns.extend(of.exns);
                Ok(Out { normal, exns })
            }),
            ExprKind::Match(s, arms) => self.list(&[&**s], st, env, |g, st, vs| {
                let mut normals = Vec::new();
                let mut exns = Vec::new();
                let mut earlier: Vec<Term> = Vec::new();
                for (p, body) in arms {
                    let mut binds = Vec::new();
                    let cond = g.pattern(p, &vs[0], &mut binds);
                    let mut sa = st.clone();
                    for c in &earlier {
                        sa.assume(Term::not(c.clone()));
                    }
                    sa.assume(cond.clone());
                    let mut ea = env.clone();
                    ea.vals.extend(binds);
                    let out = g.exec(body, sa, &ea)?;
                    normals.extend(out.normal);
                    exns.extend(out.exns);
                    earlier.push(cond);
                }
                let normal = g.merge_normal(normals, &e.ty);
                Ok(Out { normal, exns })
            }),
            ExprKind::Call(name, args) => {
                let def = self.lookup_routine(env, name)?;
                self.list(&args.iter().collect::<Vec<_>>(), st, env, |g, st, vs| {
                    g.call(def, vs, st, e)
                })
            }
            ExprKind::Apply(f, a) => self.list(&[&**f, &**a], st, env, |g, st, vs| {
                g.apply(&f.ty, vs, st, e)
            }),
            ExprKind::Continue { k, arg, writes } => {
                self.list(&[&**k, &**arg], st, env, |g, st, vs| {
                    g.resume(&k.ty, vs, writes, st, e)
                })
            }
            ExprKind::Try {
                body,
                value,
                handlers,
            } => {
                let (bn, brs, exns) = self.exec_try(body, value, handlers, st, env)?;
                let normals = bn
                    .into_iter()
                    .chain(brs.into_iter().map(|(s, v, _)| (s, v)))
                    .collect();
                let normal = self.merge_normal(normals, &e.ty);
                Ok(Out { normal, exns })
            }
            ExprKind::LetRoutine(r, rest) => {
                let def = Rc::new(RDef {
                    r: (**r).clone(),
                    env: env.clone(),
                });
                if matches!(r.kind, RoutineKind::Local | RoutineKind::Lambda) && r.body.is_some() {
                    let saved = self.variant.take();
                    self.verify_routine(def.clone(), st.facts.clone())?;
                    self.variant = saved;
                }
                let mut env2 = env.clone();
                env2.routines.push((r.name.clone(), def));
                self.exec(rest, st, &env2)
            }
            ExprKind::Snapshot(x, rest) => {
                let snap = st.record();
                self.exec(rest, st, &env.with(x, snap))
            }
        }
    }

    /// Evaluates `es` left to right, then continues with their values.
    fn list(
        &mut self,
        es: &[&Expr],
        mut st: St,
        env: &Env,
        k: impl FnOnce(&mut Self, St, Vec<Term>) -> R<Out>,
    ) -> R<Out> {
        let mut exns = Vec::new();
        let mut vals = Vec::new();
        for e in es {
            let out = self.exec(e, st, env)?;
            exns.extend(out.exns);
            match out.normal {
                Some((s, v)) => {
                    st = s;
                    vals.push(v);
                }
                None => return Ok(Out { normal: None, exns }),
            }
        }
        let rest = k(self, st, vals)?;
        exns.extend(rest.exns);
        Ok(Out {
            normal: rest.normal,
            exns,
        })
    }

    /// Match condition of `p` against `v`, collecting bindings.
    fn pattern(&self, p: &Pattern, v: &Term, out: &mut Vec<(String, Term)>) -> Term {
        match p {
            Pattern::Wildcard => Term::Bool(true),
            Pattern::Var(x) => {
                out.push((x.clone(), v.clone()));
                Term::Bool(true)
            }
            Pattern::Ctor(c, ps) => {
                let tys = self.ctors.get(c).cloned().unwrap_or_default();
                let mut conds = vec![Term::IsCtor(c.clone(), Box::new(v.clone()))];
                for (i, q) in ps.iter().enumerate() {
                    let ty = tys.get(i).cloned().unwrap_or(IrType::Unit);
                    let arg = Term::CtorArg(c.clone(), i, ty, Box::new(v.clone()));
                    conds.push(self.pattern(q, &arg, out));
                }
                Term::and_all(conds)
            }
        }
    }

    /// Runs a `try`: the body's normal exit through `value`, each handler
    /// on the merged raises of its exception, and the escaping exceptions.
    #[allow(clippy::type_complexity)]
    fn exec_try(
        &mut self,
        body: &Expr,
        value: &Option<(String, Box<Expr>)>,
        handlers: &[ExnHandler],
        st: St,
        env: &Env,
    ) -> R<(Option<(St, Term)>, Vec<(St, Term, Span)>, Vec<Exn>)> {
        let out = self.exec(body, st, env)?;
        let mut escaping = Vec::new();
        let normal = match (out.normal, value) {
            (Some((s, v)), Some((x, ve))) => {
                let o = self.exec(ve, s, &env.with(x, v))?;
                escaping.extend(o.exns);
                o.normal
            }
            (n, _) => n,
        };
        let mut raised = Vec::new();
        for ex in out.exns {
            if handlers.iter().any(|h| h.exn == ex.name) {
                raised.push(ex);
            } else {
                escaping.push(ex);
            }
        }
        let mut branches = Vec::new();
        for ex in self.merge_exns(raised) {
            let Some(h) = handlers.iter().find(|h| h.exn == ex.name) else {
                continue;
            };
            let mut eh = env.clone();
            for ((b, _), v) in h.binders.iter().zip(&ex.payload) {
                eh.vals.push((b.clone(), v.clone()));
            }
            let o = self.exec(&h.body, ex.st, &eh)?;
            escaping.extend(o.exns);
            if let Some((s, v)) = o.normal {
                branches.push((s, v, h.body.span));
            }
        }
        Ok((normal, branches, escaping))
    }
}

impl Gen<'_> {
    /// A call assumes the callee contract; handlers are checked in place first.
    fn call(&mut self, def: Rc<RDef>, args: Vec<Term>, st: St, e: &Expr) -> R<Out> {
        let r = &def.r;
        let mut cenv = def.env.clone();
        for ((x, _), a) in r.params.iter().zip(&args) {
            cenv.vals.push((x.clone(), a.clone()));
        }
        let cur = st.record();
        let pre = self.inst(
            &Self::combined(&r.contract.requires),
            &cenv,
            &[],
            &cur,
            None,
        );
        match r.kind {
            RoutineKind::Perform => self.emit(&st, VcKind::RaisesAtPerform, e.span, pre),
            RoutineKind::Generator => {}
            RoutineKind::Handler => {
                self.emit(&st, VcKind::PreconditionAtCall, e.span, pre);
                self.verify_handler(&def, &cenv, &st)?;
            }
            RoutineKind::Function | RoutineKind::Local | RoutineKind::Lambda => {
                self.emit(&st, VcKind::PreconditionAtCall, e.span, pre)
            }
        }
        if let Some((vdef, v0)) = &self.variant {
            if Rc::ptr_eq(vdef, &def) {
                if let Some(v) = &r.contract.variant {
                    let v0 = v0.clone();
                    let v1 = self.inst(v, &cenv, &[], &cur, None);
                    let goal = self.decreases(v1, v0);
                    self.emit(&st, VcKind::VariantDecrease, e.span, goal);
                }
            }
        }
        let writes = r.effective_writes.clone();
        let closures = matches!(r.kind, RoutineKind::Function | RoutineKind::Local)
            && r.params.iter().any(|(_, t)| t.is_closure());
        let mut sn = st.clone();
        self.havoc(&mut sn, &writes);
        if closures {
            self.havoc_validity(&mut sn, None);
        }
        let res = self.fresh(&r.name, r.ret.clone());
        let post = self.inst(
            &Self::combined(&r.contract.ensures),
            &cenv,
            &[("result".into(), res.clone())],
            &sn.record(),
            Some(&cur),
        );
        sn.assume(post);
        let mut out = Out::val(sn, res);
        for rs in &r.contract.raises {
            let mut se = st.clone();
            let payload: Vec<Term> = if r.kind == RoutineKind::Perform {
                args.clone()
            } else {
                self.havoc(&mut se, &writes);
                if closures {
                    self.havoc_validity(&mut se, None);
                }
                rs.binders
                    .iter()
                    .map(|(b, t)| self.fresh(b, t.clone()))
                    .collect()
            };
            let extra: Vec<(String, Term)> = rs
                .binders
                .iter()
                .map(|(b, _)| b.clone())
                .zip(payload.iter().cloned())
                .collect();
            let post = self.inst(&rs.post, &cenv, &extra, &se.record(), Some(&cur));
            se.assume(post);
            let tys = rs.binders.iter().map(|(_, t)| t.clone()).collect();
            out.exns.push(Exn {
                name: rs.exn.clone(),
                st: se,
                payload,
                tys,
            });
        }
        Ok(out)
    }

    fn decreases(&self, new: Term, old: Term) -> Term {
        match self.tenv.type_of(&new) {
            IrType::Data(t) => Term::App(format!("subterm_{t}"), vec![new, old]),
            _ => Term::and_all([
                Term::bin(LOp::Le, Term::Int(0), old.clone()),
                Term::bin(LOp::Lt, new, old),
            ]),
        }
    }

    /// The handler body runs in the caller's store; its exits establish the
    /// handler invariant.
    fn verify_handler(&mut self, def: &Rc<RDef>, env: &Env, st: &St) -> R<()> {
        let r = &def.r;
        let Some(body) = &r.body else { return Ok(()) };
        let entry = st.record();
        let (env, inner) = match &body.kind {
            ExprKind::Snapshot(x, inner) => (env.with(x, entry.clone()), &**inner),
            _ => (env.clone(), body),
        };
        let (normal, branches, exns) = match &inner.kind {
            ExprKind::Try {
                body,
                value,
                handlers,
            } => self.exec_try(body, value, handlers, st.clone(), &env)?,
            _ => {
                let out = self.exec(inner, st.clone(), &env)?;
                (out.normal, Vec::new(), out.exns)
            }
        };
        let ens = Self::combined(&r.contract.ensures);
        if let Some((s, v)) = normal {
            let goal = self.inst(
                &ens,
                &env,
                &[("result".into(), v)],
                &s.record(),
                Some(&entry),
            );
            self.emit(&s, VcKind::HandlerInvariantNormal, inner.span, goal);
            self.frame_check(&s, r, &entry);
        }
        for (s, v, span) in branches {
            let goal = self.inst(
                &ens,
                &env,
                &[("result".into(), v)],
                &s.record(),
                Some(&entry),
            );
            self.emit(&s, VcKind::HandlerInvariantExceptional, span, goal);
            self.frame_check(&s, r, &entry);
        }
        for ex in self.merge_exns(exns) {
            self.raises_check(&ex, r, &env, &entry, VcKind::Postcondition);
            self.frame_check(&ex.st, r, &entry);
        }
        Ok(())
    }

    /// `apply f a` through the closure's `pre`/`post`.
    fn apply(&mut self, fty: &IrType, vs: Vec<Term>, st: St, e: &Expr) -> R<Out> {
        let (f, a) = (vs[0].clone(), vs[1].clone());
        let cur = st.record();
        self.emit(
            &st,
            VcKind::PreconditionAtCall,
            e.span,
            Term::Pred(
                PredKind::Pre,
                fty.clone(),
                vec![f.clone(), a.clone(), cur.clone()],
            ),
        );
        let mut sn = st;
        let user: Vec<String> = self
            .fields
            .iter()
            .map(|(n, _)| n.clone())
            .filter(|n| !is_validity(n))
            .collect();
        self.havoc(&mut sn, &user);
        self.havoc_validity(&mut sn, None);
        let r = self.fresh("apply", e.ty.clone());
        sn.assume(Term::Pred(
            PredKind::Post,
            fty.clone(),
            vec![f, a, cur, sn.record(), r.clone()],
        ));
        Ok(Out::val(sn, r))
    }

    /// `continue k a`: `k` must be valid and its precondition hold; afterwards
    /// `k` is spent.
    fn resume(
        &mut self,
        kty: &IrType,
        vs: Vec<Term>,
        writes: &[String],
        st: St,
        e: &Expr,
    ) -> R<Out> {
        let (k, a) = (vs[0].clone(), vs[1].clone());
        let cur = st.record();
        self.emit(
            &st,
            VcKind::ContinuationValidity,
            e.span,
            Term::valid(k.clone(), cur.clone()),
        );
        self.emit(
            &st,
            VcKind::ContinuationPrecondition,
            e.span,
            Term::Pred(
                PredKind::Pre,
                kty.clone(),
                vec![k.clone(), a.clone(), cur.clone()],
            ),
        );
        let mut sn = st;
        self.havoc(&mut sn, writes);
        let vf = validity_field(kty);
        self.havoc_validity(&mut sn, Some(&vf));
        sn.assume(Term::not(Term::select(sn.get(&vf), k.clone())));
        let r = self.fresh("resume", e.ty.clone());
        sn.assume(Term::Pred(
            PredKind::Post,
            kty.clone(),
            vec![k, a, cur, sn.record(), r.clone()],
        ));
        Ok(Out::val(sn, r))
    }
}
