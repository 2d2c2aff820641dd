//! Randomized contract checking: runs effect-free entry points of a program
//! on random inputs and stores under the checking interpreter.

use effv_core::interp::{Blame, Interp, RunError, Store, Value};
use effv_core::sema::{DataType, TypedProgram};
use effv_core::surface::SourceType;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    pub samples: usize,
    pub seed: u64,
    pub fuel: u64,
    /// Integers are drawn from `-int_bound..=int_bound`.
    pub int_bound: i64,
    /// Maximum constructor nesting of generated data.
    pub depth: usize,
}

impl Default for OracleConfig {
    fn default() -> OracleConfig {
        OracleConfig { samples: 100, seed: 0, fuel: 1_000_000, int_bound: 20, depth: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub sample: usize,
    pub blame: Option<Blame>,
    pub error: String,
    pub args: Vec<Value>,
    pub store: Store,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EntryReport {
    pub entry: String,
    pub runs: usize,
    /// Samples whose inputs violate the entry's own precondition.
    pub skipped: usize,
    pub contract_violations: usize,
    pub one_shot_violations: usize,
    /// Other runtime errors such as fuel exhaustion.
    pub errors: usize,
    /// First few failures, for diagnosis.
    pub failures: Vec<Failure>,
}

impl EntryReport {
    pub fn clean(&self) -> bool {
        self.contract_violations == 0 && self.one_shot_violations == 0
    }
}

/// Top-level functions that let no effect escape and take first-order
/// arguments; these can be run without a surrounding handler.
pub fn closed_entries(tp: &TypedProgram) -> Vec<String> {
    tp.program
        .functions()
        .filter(|f| tp.effect_rows.get(&f.def.name).map_or(true, |r| r.is_empty()))
        .filter(|f| {
            tp.globals.functions.get(&f.def.name).is_some_and(|s| s.params.iter().all(|p| first_order(&p.ty)))
        })
        .map(|f| f.def.name.clone())
        .collect()
}

fn first_order(t: &SourceType) -> bool {
    match t {
        SourceType::Int | SourceType::Bool | SourceType::Unit | SourceType::Named(_) => true,
        SourceType::Ref(t) | SourceType::Array(t) => first_order(t),
        SourceType::Arrow(..) | SourceType::Cont(..) => false,
    }
}

struct Gen<'a> {
    tp: &'a TypedProgram,
    rng: StdRng,
    cfg: OracleConfig,
}

impl Gen<'_> {
    fn value(&mut self, t: &SourceType, depth: usize) -> Value {
        match t {
            SourceType::Int => Value::Int(self.rng.gen_range(-self.cfg.int_bound..=self.cfg.int_bound)),
            SourceType::Bool => Value::Bool(self.rng.gen()),
            SourceType::Named(n) => match self.tp.globals.datatypes.get(n) {
                Some(dt) => self.data(dt, depth),
                None => Value::Unit,
            },
            SourceType::Ref(t) => self.value(t, depth),
            _ => Value::Unit,
        }
    }

    fn data(&mut self, dt: &DataType, depth: usize) -> Value {
        let recursive = |args: &[SourceType]| args.iter().any(|a| *a == SourceType::Named(dt.name.clone()));
        let pool: Vec<&(String, Vec<SourceType>)> = if depth == 0 {
            let base: Vec<_> = dt.ctors.iter().filter(|(_, a)| !recursive(a)).collect();
            if base.is_empty() {
                dt.ctors.iter().collect()
            } else {
                base
            }
        } else {
            dt.ctors.iter().collect()
        };
        let (c, args) = pool[self.rng.gen_range(0..pool.len())];
        let vals = args.iter().map(|a| self.value(a, depth.saturating_sub(1))).collect();
        Value::ctor(c, vals)
    }

    /// Random contents for every state variable; arrays keep their length.
    fn store(&mut self, init: &Store) -> Store {
        let mut s = init.clone();
        for (x, t) in &self.tp.globals.state.vars {
            let v = match (t, init.get(x)) {
                (SourceType::Array(e), Some(Value::Array(xs))) => {
                    Value::Array((0..xs.len()).map(|_| self.value(e, self.cfg.depth)).collect())
                }
                (t, _) => self.value(t, self.cfg.depth),
            };
            s.set(x, v);
        }
        s
    }
}

const KEPT_FAILURES: usize = 5;

pub fn check_entry(tp: &TypedProgram, entry: &str, cfg: OracleConfig) -> Result<EntryReport, RunError> {
    let it = Interp::new(tp);
    let init = it.initial_store()?;
    let params: Vec<SourceType> = tp
        .globals
        .functions
        .get(entry)
        .map(|s| s.params.iter().map(|p| p.ty.clone()).collect())
        .ok_or_else(|| RunError::Other(format!("no function `{entry}`")))?;
    let mut g = Gen { tp, rng: StdRng::seed_from_u64(cfg.seed), cfg };
    let mut rep = EntryReport { entry: entry.to_string(), ..EntryReport::default() };
    for sample in 0..cfg.samples {
        let args: Vec<Value> = params.iter().map(|t| g.value(t, cfg.depth)).collect();
        let store = g.store(&init);
        if it.requires_hold(entry, &args, &store) == Some(false) {
            rep.skipped += 1;
            continue;
        }
        rep.runs += 1;
        let out = it.run_checked(entry, args.clone(), cfg.fuel, Some(store.clone()));
        let Err(e) = out.result else { continue };
        match e {
            RunError::Contract(_) => rep.contract_violations += 1,
            RunError::OneShot => rep.one_shot_violations += 1,
            _ => rep.errors += 1,
        }
        if rep.failures.len() < KEPT_FAILURES {
            rep.failures.push(Failure { sample, blame: e.blame(), error: e.to_string(), args, store });
        }
    }
    Ok(rep)
}
