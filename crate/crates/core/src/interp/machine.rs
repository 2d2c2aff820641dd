//! CEK-style machine. The control stack is explicit so that `perform` can
//! split it at the nearest matching handler and `continue` can splice the
//! captured segment back.

use std::collections::HashMap;
use std::rc::Rc;

use super::spec::{binop, match_pattern, SpecEval};
use super::value::{Blame, Closure, Env, Event, EventKind, RunError, Store, Value, Violation};
use super::{Interp, Stats};
use crate::sema::free_term_vars;
use crate::surface::{BinOp, Expr, ExprKind, Handler, NodeId, Param, Pattern, SourceType, SpecClauses, Term, UnOp};

/// Callable code: top-level functions, local functions and lambdas.
pub(crate) struct Code<'p> {
    pub name: String,
    pub params: Vec<&'p Param>,
    pub body: &'p Expr,
    pub spec: &'p SpecClauses,
    /// Name under which a recursive function sees itself.
    pub rec_name: Option<&'p str>,
}

enum ArgsKind<'p> {
    Ctor(&'p str),
    Perform(&'p str),
    Call(Value),
}

enum Frame<'p> {
    BinL(BinOp, &'p Expr, Env),
    BinR(BinOp, Value),
    Un(UnOp),
    Assign(&'p str),
    ArrGet(&'p str),
    ArrSetIdx(&'p str, &'p Expr, Env),
    ArrSetVal(&'p str, i64),
    Let(&'p str, &'p Expr, Env),
    Seq(&'p Expr, Env),
    If(&'p Expr, Option<&'p Expr>, Env),
    Match(&'p [(Pattern, Expr)], Env),
    AppFun(&'p [Expr], Env),
    Args { kind: ArgsKind<'p>, done: Vec<Value>, rest: &'p [Expr], env: Env },
    ApplyRest(Vec<Value>),
    Continue(&'p str, Env),
    /// Installed handler; `old` is the store when the `try` was entered.
    Handle { h: &'p Handler, env: Env, old: Store },
    /// Checks `try_ensures` on the value leaving the handler.
    HandlerDone { h: &'p Handler, env: Env, old: Store },
    /// Checks `ensures` on return.
    Return { code: usize, vars: Vec<(String, Value)>, old: Store },
}

struct ContRec<'p> {
    frames: Vec<Frame<'p>>,
    consumed: bool,
    snapshot: Store,
    effect: String,
    /// Protocol variables: captures, then effect arguments.
    vars: Vec<(String, Value)>,
}

enum Ctl<'p> {
    Eval(&'p Expr, Env),
    Ret(Value),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Mode {
    pub checked: bool,
    /// Record performs escaping the entry and resume those with unit replies.
    pub record_escapes: bool,
}

pub(crate) struct Machine<'p, 'i> {
    it: &'i Interp<'p>,
    mode: Mode,
    pub store: Store,
    stack: Vec<Frame<'p>>,
    conts: Vec<ContRec<'p>>,
    pub trace: Vec<Event>,
    pub stats: Stats,
    fuel: u64,
}

type Step<'p> = Result<Ctl<'p>, RunError>;

fn violation(blame: Blame, subject: &str, clause: String, before: &Store, after: &Store) -> RunError {
    RunError::Contract(Box::new(Violation {
        blame,
        subject: subject.to_string(),
        clause,
        before: before.clone(),
        after: after.clone(),
    }))
}

impl<'p, 'i> Machine<'p, 'i> {
    pub fn new(it: &'i Interp<'p>, mode: Mode, store: Store, fuel: u64) -> Self {
        Machine {
            it,
            mode,
            store,
            stack: Vec::new(),
            conts: Vec::new(),
            trace: Vec::new(),
            stats: Stats::default(),
            fuel,
        }
    }

    /// Evaluates `e` to a value on an empty stack.
    pub fn eval(&mut self, e: &'p Expr, env: Env) -> Result<Value, RunError> {
        let base = self.stack.len();
        let mut ctl = Ctl::Eval(e, env);
        loop {
            if self.fuel == 0 {
                return Err(RunError::FuelExhausted);
            }
            self.fuel -= 1;
            self.stats.steps += 1;
            ctl = match ctl {
                Ctl::Eval(e, env) => self.eval_step(e, env)?,
                Ctl::Ret(v) => {
                    if self.stack.len() == base {
                        return Ok(v);
                    }
                    let f = self.stack.pop().expect("stack is above base");
                    self.ret_step(f, v)?
                }
            };
        }
    }

    /// Applies a function value to arguments as a fresh computation.
    pub fn call(&mut self, f: Value, args: Vec<Value>) -> Result<Value, RunError> {
        let ctl = self.apply(f, args)?;
        match ctl {
            Ctl::Ret(v) => Ok(v),
            Ctl::Eval(e, env) => self.eval(e, env),
        }
    }

    fn lookup(&self, x: &str, env: &Env) -> Result<Value, RunError> {
        if let Some(v) = env.get(x) {
            return Ok(v.clone());
        }
        if let Some(id) = self.it.globals.get(x) {
            return Ok(self.it.closure(*id, Env::default()));
        }
        if let Some(v) = self.store.get(x) {
            return Ok(v.clone());
        }
        Err(RunError::Other(format!("unbound variable `{x}`")))
    }

    fn eval_step(&mut self, e: &'p Expr, env: Env) -> Step<'p> {
        Ok(match &e.kind {
            ExprKind::Int(n) => Ctl::Ret(Value::Int(*n)),
            ExprKind::Bool(b) => Ctl::Ret(Value::Bool(*b)),
            ExprKind::Unit => Ctl::Ret(Value::Unit),
            ExprKind::Var(x) => Ctl::Ret(self.lookup(x, &env)?),
            ExprKind::Binary(op, a, b) => {
                self.stack.push(Frame::BinL(*op, b, env.clone()));
                Ctl::Eval(a, env)
            }
            ExprKind::Unary(op, a) => {
                self.stack.push(Frame::Un(*op));
                Ctl::Eval(a, env)
            }
            ExprKind::Deref(x) => Ctl::Ret(self.state(x)?.clone()),
            ExprKind::Assign(x, a) => {
                self.stack.push(Frame::Assign(x));
                Ctl::Eval(a, env)
            }
            ExprKind::ArrayGet(x, i) => {
                self.stack.push(Frame::ArrGet(x));
                Ctl::Eval(i, env)
            }
            ExprKind::ArraySet(x, i, v) => {
                self.stack.push(Frame::ArrSetIdx(x, v, env.clone()));
                Ctl::Eval(i, env)
            }
            ExprKind::ArrayLength(x) => match self.state(x)? {
                Value::Array(xs) => Ctl::Ret(Value::Int(xs.len() as i64)),
                _ => return Err(RunError::Other(format!("`{x}` is not an array"))),
            },
            ExprKind::Let(x, _, a, b) => {
                self.stack.push(Frame::Let(x, b, env.clone()));
                Ctl::Eval(a, env)
            }
            ExprKind::LetFun(def, body) => {
                let f = self.it.closure(self.it.local[&e.id], env.clone());
                Ctl::Eval(body, env.with(&def.name, f))
            }
            ExprKind::Fun { .. } => Ctl::Ret(self.it.closure(self.it.local[&e.id], env)),
            ExprKind::App(f, args) => {
                self.stack.push(Frame::AppFun(args, env.clone()));
                Ctl::Eval(f, env)
            }
            ExprKind::If(c, t, f) => {
                self.stack.push(Frame::If(t, f.as_deref(), env.clone()));
                Ctl::Eval(c, env)
            }
            ExprKind::Seq(a, b) => {
                self.stack.push(Frame::Seq(b, env.clone()));
                Ctl::Eval(a, env)
            }
            ExprKind::Match(s, arms) => {
                self.stack.push(Frame::Match(arms, env.clone()));
                Ctl::Eval(s, env)
            }
            ExprKind::Ctor(c, args) => self.args(ArgsKind::Ctor(c), args, env)?,
            ExprKind::Perform(eff, args) => self.args(ArgsKind::Perform(eff), args, env)?,
            ExprKind::Try(h) => {
                self.stats.handler_installs += 1;
                self.stack.push(Frame::Handle { h, env: env.clone(), old: self.store.clone() });
                Ctl::Eval(&h.body, env)
            }
            ExprKind::Continue(k, a) => {
                self.stack.push(Frame::Continue(k, env.clone()));
                Ctl::Eval(a, env)
            }
        })
    }

    fn args(&mut self, kind: ArgsKind<'p>, args: &'p [Expr], env: Env) -> Step<'p> {
        match args.split_first() {
            Some((first, rest)) => {
                self.stack.push(Frame::Args { kind, done: Vec::with_capacity(args.len()), rest, env: env.clone() });
                Ok(Ctl::Eval(first, env))
            }
            None => self.args_done(kind, Vec::new(), &env),
        }
    }

    fn args_done(&mut self, kind: ArgsKind<'p>, vals: Vec<Value>, env: &Env) -> Step<'p> {
        match kind {
            ArgsKind::Ctor(c) => Ok(Ctl::Ret(Value::ctor(c, vals))),
            ArgsKind::Call(f) => self.apply(f, vals),
            ArgsKind::Perform(eff) => self.perform(eff, vals, env),
        }
    }

    fn state(&self, x: &str) -> Result<&Value, RunError> {
        self.store.get(x).ok_or_else(|| RunError::Other(format!("unknown state variable `{x}`")))
    }

    fn array(&mut self, x: &str) -> Result<&mut Vec<Value>, RunError> {
        match self.store.get_mut(x) {
            Some(Value::Array(xs)) => Ok(xs),
            _ => Err(RunError::Other(format!("`{x}` is not an array"))),
        }
    }
}

impl<'p> Machine<'p, '_> {
    fn ret_step(&mut self, f: Frame<'p>, v: Value) -> Step<'p> {
        Ok(match f {
            Frame::BinL(BinOp::And, b, env) => match v {
                Value::Bool(false) => Ctl::Ret(v),
                _ => Ctl::Eval(b, env),
            },
            Frame::BinL(BinOp::Or, b, env) => match v {
                Value::Bool(true) => Ctl::Ret(v),
                _ => Ctl::Eval(b, env),
            },
            Frame::BinL(op, b, env) => {
                self.stack.push(Frame::BinR(op, v));
                Ctl::Eval(b, env)
            }
            Frame::BinR(op, a) => Ctl::Ret(binop(op, &a, &v)?),
            Frame::Un(UnOp::Neg) => Ctl::Ret(Value::Int(
                v.as_int().ok_or_else(|| RunError::Other("negation of a non-integer".into()))?.checked_neg().ok_or(RunError::Overflow)?,
            )),
            Frame::Un(UnOp::Not) => {
                Ctl::Ret(Value::Bool(!v.as_bool().ok_or_else(|| RunError::Other("`not` of a non-boolean".into()))?))
            }
            Frame::Assign(x) => {
                self.state(x)?;
                self.store.set(x, v);
                Ctl::Ret(Value::Unit)
            }
            Frame::ArrGet(x) => {
                let i = index(&v)?;
                let xs = self.array(x)?;
                Ctl::Ret(xs.get(checked_index(i, xs.len())?).cloned().expect("index checked"))
            }
            Frame::ArrSetIdx(x, e, env) => {
                self.stack.push(Frame::ArrSetVal(x, index(&v)?));
                Ctl::Eval(e, env)
            }
            Frame::ArrSetVal(x, i) => {
                let xs = self.array(x)?;
                let j = checked_index(i, xs.len())?;
                xs[j] = v;
                Ctl::Ret(Value::Unit)
            }
            Frame::Let(x, b, env) => Ctl::Eval(b, env.with(x, v)),
            Frame::Seq(b, env) => Ctl::Eval(b, env),
            Frame::If(t, f, env) => match (v, f) {
                (Value::Bool(true), _) => Ctl::Eval(t, env),
                (Value::Bool(false), Some(f)) => Ctl::Eval(f, env),
                (Value::Bool(false), None) => Ctl::Ret(Value::Unit),
                _ => return Err(RunError::Other("condition is not a boolean".into())),
            },
            Frame::Match(arms, env) => {
                for (p, body) in arms {
                    let mut binds = Vec::new();
                    if match_pattern(p, &v, &mut binds) {
                        let env = binds.iter().fold(env, |env, (x, v)| env.with(x, v.clone()));
                        return Ok(Ctl::Eval(body, env));
                    }
                }
                return Err(RunError::MatchFailure);
            }
            Frame::AppFun(args, env) => self.args(ArgsKind::Call(v), args, env)?,
            Frame::Args { kind, mut done, rest, env } => {
                done.push(v);
                match rest.split_first() {
                    Some((next, rest)) => {
                        self.stack.push(Frame::Args { kind, done, rest, env: env.clone() });
                        Ctl::Eval(next, env)
                    }
                    None => self.args_done(kind, done, &env)?,
                }
            }
            Frame::ApplyRest(rest) => self.apply(v, rest)?,
            Frame::Continue(k, env) => self.resume(k, v, &env)?,
            Frame::Handle { h, env, old } => {
                self.stack.push(Frame::HandlerDone { h, env: env.clone(), old });
                match &h.value_branch {
                    Some((x, body)) => Ctl::Eval(body, env.with(x, v)),
                    None => Ctl::Ret(v),
                }
            }
            Frame::HandlerDone { h, env, old } => {
                if self.mode.checked {
                    if let Some(spec) = &h.spec {
                        let mut vars = self.term_vars(&spec.try_ensures, &env, &[]);
                        vars.push(("result".into(), v.clone()));
                        self.check(&spec.try_ensures, &vars, Some(&old), Blame::Server, "handler", &old)?;
                    }
                }
                Ctl::Ret(v)
            }
            Frame::Return { code, mut vars, old } => {
                let code = &self.it.codes[code];
                vars.push(("result".into(), v.clone()));
                self.check(&code.spec.ensures, &vars, Some(&old), Blame::Server, &code.name, &old)?;
                Ctl::Ret(v)
            }
        })
    }

    fn apply(&mut self, f: Value, args: Vec<Value>) -> Step<'p> {
        let Value::Closure(c) = f else {
            return Err(RunError::Other(format!("`{f}` is not a function")));
        };
        let code = &self.it.codes[c.code];
        let mut all = c.bound.clone();
        all.extend(args);
        let n = code.params.len();
        if all.len() < n {
            return Ok(Ctl::Ret(Value::Closure(Rc::new(Closure { code: c.code, env: c.env.clone(), bound: all }))));
        }
        let rest = all.split_off(n);
        if !rest.is_empty() {
            self.stack.push(Frame::ApplyRest(rest));
        }
        let mut env = c.env.clone();
        if let Some(r) = code.rec_name {
            env = env.with(r, Value::Closure(c.clone()));
        }
        for (p, v) in code.params.iter().zip(all) {
            env = env.with(&p.name, v);
        }
        if self.mode.checked {
            let vars = self.term_vars(&code.spec.requires, &env, &[]);
            self.check(&code.spec.requires, &vars, None, Blame::Client, &code.name, &self.store)?;
            if !code.spec.ensures.is_empty() {
                let vars = self.term_vars(&code.spec.ensures, &env, &[]);
                self.stack.push(Frame::Return { code: c.code, vars, old: self.store.clone() });
            }
        }
        Ok(Ctl::Eval(code.body, env))
    }

    fn perform(&mut self, eff: &'p str, vals: Vec<Value>, env: &Env) -> Step<'p> {
        let proto = self.it.tp.globals.protocols.get(eff);
        let mut vars = Vec::new();
        if let Some(info) = proto {
            for c in &info.captures {
                if let Some(v) = env.get(&c.name) {
                    vars.push((c.name.clone(), v.clone()));
                }
            }
            for (x, v) in info.protocol.params.iter().zip(&vals) {
                if x != "_" {
                    vars.push((x.clone(), v.clone()));
                }
            }
            if self.mode.checked {
                self.check(&info.protocol.requires, &vars, None, Blame::Client, eff, &self.store)?;
            }
        }
        let found = self.stack.iter().rposition(|f| match f {
            Frame::Handle { h, .. } => h.branches.iter().any(|b| b.effect == eff),
            _ => false,
        });
        let Some(i) = found else {
            if !self.mode.record_escapes {
                return Err(RunError::Unhandled(eff.to_string()));
            }
            self.trace.push(Event {
                kind: EventKind::Escape,
                effect: eff.to_string(),
                payload: vals,
                before: self.store.clone(),
                after: self.store.clone(),
            });
            return match self.it.tp.globals.effects.get(eff).map(|s| &s.reply) {
                Some(SourceType::Unit) => Ok(Ctl::Ret(Value::Unit)),
                _ => Err(RunError::Unhandled(eff.to_string())),
            };
        };
        let frames = self.stack.split_off(i);
        let Frame::Handle { h, env: henv, old } = &frames[0] else { unreachable!("split at a handler") };
        let (h, henv, old) = (*h, henv.clone(), old.clone());
        let branch = h.branches.iter().find(|b| b.effect == eff).expect("handler has the branch");
        let id = self.conts.len();
        self.trace.push(Event {
            kind: EventKind::Perform,
            effect: eff.to_string(),
            payload: vals.clone(),
            before: self.store.clone(),
            after: self.store.clone(),
        });
        self.conts.push(ContRec { frames, consumed: false, snapshot: self.store.clone(), effect: eff.to_string(), vars });
        self.stats.performs_handled += 1;
        self.stack.push(Frame::HandlerDone { h, env: henv.clone(), old });
        let mut benv = henv;
        for (x, v) in branch.binders.iter().zip(vals) {
            if x != "_" {
                benv = benv.with(x, v);
            }
        }
        benv = benv.with(&branch.cont, Value::Cont(id));
        Ok(Ctl::Eval(&branch.body, benv))
    }

    fn resume(&mut self, k: &str, v: Value, env: &Env) -> Step<'p> {
        let Some(Value::Cont(id)) = env.get(k) else {
            return Err(RunError::Other(format!("`{k}` is not a continuation")));
        };
        let id = *id;
        let rec = &mut self.conts[id];
        if rec.consumed {
            return Err(RunError::OneShot);
        }
        rec.consumed = true;
        let frames = std::mem::take(&mut rec.frames);
        let effect = rec.effect.clone();
        if self.mode.checked {
            self.check_reply(id, &v)?;
        }
        let rec = &self.conts[id];
        self.trace.push(Event {
            kind: EventKind::Continue,
            effect,
            payload: vec![v.clone()],
            before: rec.snapshot.clone(),
            after: self.store.clone(),
        });
        self.stats.handler_reinstalls += 1;
        self.stack.extend(frames);
        Ok(Ctl::Ret(v))
    }

    /// Protocol postcondition and frame at a `continue`.
    fn check_reply(&self, id: usize, reply: &Value) -> Result<(), RunError> {
        let rec = &self.conts[id];
        let Some(info) = self.it.tp.globals.protocols.get(&rec.effect) else { return Ok(()) };
        let mut vars = rec.vars.clone();
        vars.push(("reply".into(), reply.clone()));
        self.check(&info.protocol.ensures, &vars, Some(&rec.snapshot), Blame::Server, &rec.effect, &rec.snapshot)?;
        for (x, before) in &rec.snapshot.vars {
            if !info.protocol.modifies.contains(x) && self.store.get(x) != Some(before) {
                return Err(violation(
                    Blame::Server,
                    &rec.effect,
                    format!("{x} is not in modifies but changed"),
                    &rec.snapshot,
                    &self.store,
                ));
            }
        }
        Ok(())
    }

    /// Bindings from `env` for the free variables of `terms`.
    fn term_vars(&self, terms: &[Term], env: &Env, skip: &[&str]) -> Vec<(String, Value)> {
        let mut out: Vec<(String, Value)> = Vec::new();
        for t in terms {
            for x in free_term_vars(t) {
                if skip.contains(&x.as_str()) || out.iter().any(|(y, _)| *y == x) {
                    continue;
                }
                if let Some(v) = env.get(&x) {
                    out.push((x, v.clone()));
                }
            }
        }
        out
    }

    /// Fails on the first clause that evaluates to false; clauses that
    /// cannot be evaluated are skipped.
    fn check(
        &self,
        terms: &[Term],
        vars: &[(String, Value)],
        old: Option<&Store>,
        blame: Blame,
        subject: &str,
        before: &Store,
    ) -> Result<(), RunError> {
        if terms.is_empty() {
            return Ok(());
        }
        let conts = &self.conts;
        let valid = |id: usize| conts.get(id).is_some_and(|c| !c.consumed);
        let ev = SpecEval {
            logic: &self.it.tp.globals.logic,
            datatypes: &self.it.tp.globals.datatypes,
            cur: &self.store,
            old,
            valid: &valid,
        };
        for t in terms {
            if ev.holds(t, vars) == Some(false) {
                return Err(violation(blame, subject, crate::surface::print_term(t), before, &self.store));
            }
        }
        Ok(())
    }
}

fn index(v: &Value) -> Result<i64, RunError> {
    v.as_int().ok_or_else(|| RunError::Other("array index is not an integer".into()))
}

fn checked_index(i: i64, len: usize) -> Result<usize, RunError> {
    usize::try_from(i).ok().filter(|&j| j < len).ok_or(RunError::OutOfBounds(i))
}

/// Code table entries for every local function and lambda in `e`, indexed
/// by the defining node.
pub(crate) fn collect_codes<'p>(e: &'p Expr, codes: &mut Vec<Code<'p>>, local: &mut HashMap<NodeId, usize>) {
    crate::surface::walk_expr(e, &mut |e| match &e.kind {
        ExprKind::LetFun(def, _) => {
            local.insert(e.id, codes.len());
            codes.push(
                Code {
                    name: def.name.clone(),
                    params: def.params.iter().collect(),
                    body: &def.body,
                    spec: &def.spec,
                    rec_name: def.recursive.then_some(def.name.as_str()),
                },
            );
        }
        ExprKind::Fun { spec, param, body, .. } => {
            local.insert(e.id, codes.len());
            codes.push(Code { name: "fun".into(), params: vec![param], body, spec, rec_name: None });
        }
        _ => {}
    });
}
