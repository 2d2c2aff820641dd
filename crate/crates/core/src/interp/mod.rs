//! Reference interpreter with deep handlers, one-shot continuations and
//! optional dynamic checking of protocols and function contracts.

mod machine;
mod spec;
mod value;

use std::collections::HashMap;
use std::rc::Rc;

use serde::Serialize;

use crate::sema::TypedProgram;
use crate::surface::{Expr, NodeId, StateInit};
use machine::{collect_codes, Code, Machine, Mode};
use spec::SpecEval;

pub use value::{Blame, Closure, Env, Event, EventKind, RunError, Store, Value, Violation};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub steps: u64,
    /// `try` entries.
    pub handler_installs: u64,
    /// Handler frames put back by `continue`.
    pub handler_reinstalls: u64,
    pub performs_handled: u64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub result: Result<Value, RunError>,
    /// Every perform, continue and escape, in order.
    pub trace: Vec<Event>,
    /// Store at the end of the run, or at the point of failure.
    pub store: Store,
    pub stats: Stats,
}

pub struct Interp<'p> {
    pub(crate) tp: &'p TypedProgram,
    pub(crate) codes: Vec<Code<'p>>,
    /// Defining `let` or `fun` node to code index.
    pub(crate) local: HashMap<NodeId, usize>,
    /// Top-level function name to code index.
    pub(crate) globals: HashMap<&'p str, usize>,
}

impl<'p> Interp<'p> {
    pub fn new(tp: &'p TypedProgram) -> Interp<'p> {
        let mut codes = Vec::new();
        let mut local = HashMap::new();
        let mut globals = HashMap::new();
        for f in tp.program.functions() {
            let d = &f.def;
            globals.insert(d.name.as_str(), codes.len());
            codes.push(
                Code {
                    name: d.name.clone(),
                    params: d.params.iter().collect(),
                    body: &d.body,
                    spec: &d.spec,
                    rec_name: None,
                },
            );
            collect_codes(&d.body, &mut codes, &mut local);
        }
        Interp { tp, codes, local, globals }
    }

    pub(crate) fn closure(&self, code: usize, env: Env) -> Value {
        Value::Closure(Rc::new(Closure { code, env, bound: Vec::new() }))
    }

    pub fn has_function(&self, name: &str) -> bool {
        self.globals.contains_key(name)
    }

    /// Store given by the state declarations' initializers.
    pub fn initial_store(&self) -> Result<Store, RunError> {
        let mut m = Machine::new(self, Mode { checked: false, record_escapes: false }, Store::default(), 1_000_000);
        for s in self.tp.program.states() {
            let v = match &s.init {
                StateInit::Ref(e) => m.eval(e, Env::default())?,
                StateInit::Array(len, init) => {
                    let n = m.eval(len, Env::default())?;
                    let x = m.eval(init, Env::default())?;
                    let n = n.as_int().and_then(|n| usize::try_from(n).ok()).ok_or_else(|| {
                        RunError::Other(format!("array `{}` has an invalid length", s.name))
                    })?;
                    Value::Array(vec![x; n])
                }
            };
            m.store.vars.push((s.name.clone(), v));
        }
        Ok(m.store)
    }

    /// Evaluates a closed expression, such as a command-line argument.
    pub fn eval_closed(&self, e: &'p Expr) -> Result<Value, RunError> {
        let mut m = Machine::new(self, Mode { checked: false, record_escapes: false }, Store::default(), 1_000_000);
        m.eval(e, Env::default())
    }

    fn go(&self, mode: Mode, entry: &str, args: Vec<Value>, fuel: u64, store: Option<Store>) -> Outcome {
        let store = match store {
            Some(s) => s,
            None => match self.initial_store() {
                Ok(s) => s,
                Err(e) => {
                    return Outcome { result: Err(e), trace: Vec::new(), store: Store::default(), stats: Stats::default() }
                }
            },
        };
        let mut m = Machine::new(self, mode, store, fuel);
        let result = match self.globals.get(entry) {
            None => Err(RunError::Other(format!("no function `{entry}`"))),
            Some(&id) => {
                let mut args = args;
                // A unit parameter may be omitted.
                if args.is_empty() && self.codes[id].params.len() == 1 {
                    args.push(Value::Unit);
                }
                m.call(self.closure(id, Env::default()), args)
            }
        };
        Outcome { result, trace: m.trace, store: m.store, stats: m.stats }
    }

    /// Whether the preconditions of `entry` hold for `args` in `store`;
    /// `None` when some clause cannot be evaluated.
    pub fn requires_hold(&self, entry: &str, args: &[Value], store: &Store) -> Option<bool> {
        let code = &self.codes[*self.globals.get(entry)?];
        let vars: Vec<(String, Value)> =
            code.params.iter().zip(args).map(|(p, v)| (p.name.clone(), v.clone())).collect();
        let valid = |_| true;
        let ev = SpecEval {
            logic: &self.tp.globals.logic,
            datatypes: &self.tp.globals.datatypes,
            cur: store,
            old: None,
            valid: &valid,
        };
        let mut known = true;
        for t in &code.spec.requires {
            match ev.holds(t, &vars) {
                Some(false) => return Some(false),
                Some(true) => {}
                None => known = false,
            }
        }
        known.then_some(true)
    }

    /// Plain evaluation; `store` defaults to `initial_store()`.
    pub fn run(&self, entry: &str, args: Vec<Value>, fuel: u64, store: Option<Store>) -> Outcome {
        self.go(Mode { checked: false, record_escapes: false }, entry, args, fuel, store)
    }

    /// Evaluation that also checks protocols at each perform and continue,
    /// and function and handler contracts. Clauses outside the decidable
    /// fragment are skipped.
    pub fn run_checked(&self, entry: &str, args: Vec<Value>, fuel: u64, store: Option<Store>) -> Outcome {
        self.go(Mode { checked: true, record_escapes: false }, entry, args, fuel, store)
    }

    /// Effects performed by `entry` that no handler of the program catches,
    /// in order, each with the store at the perform. Unit-reply effects are
    /// resumed with `()`; the first other one ends the enumeration.
    pub fn enumerate_effects(
        &self,
        entry: &str,
        args: Vec<Value>,
        fuel: u64,
        store: Option<Store>,
    ) -> Result<Vec<Event>, RunError> {
        let out = self.go(Mode { checked: false, record_escapes: true }, entry, args, fuel, store);
        let escapes: Vec<Event> = out.trace.into_iter().filter(|e| e.kind == EventKind::Escape).collect();
        match out.result {
            Ok(_) => Ok(escapes),
            Err(RunError::Unhandled(eff)) if escapes.last().is_some_and(|e| e.effect == eff) => Ok(escapes),
            Err(e) => Err(e),
        }
    }
}
