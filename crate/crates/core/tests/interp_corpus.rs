use effv_core::interp::{Blame, EventKind, Interp, RunError, Store, Value};
use effv_core::sema::{typecheck, TypedProgram};
use effv_core::surface::parse_program;

const FUEL: u64 = 1_000_000;

fn corpus(name: &str) -> String {
    let path = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn load(text: &str) -> TypedProgram {
    typecheck(&parse_program(text).unwrap()).unwrap()
}

fn with(store: &Store, x: &str, v: Value) -> Store {
    let mut s = store.clone();
    s.set(x, v);
    s
}

fn int_ctor(c: &str, n: i64) -> Value {
    Value::ctor(c, vec![Value::Int(n)])
}

#[test]
fn xchg_returns_initial_p() {
    let tp = load(&corpus("xchg.eff"));
    let it = Interp::new(&tp);
    let store = with(&it.initial_store().unwrap(), "p", Value::Int(42));
    let out = it.run("server", vec![], FUEL, Some(store));
    assert_eq!(out.result, Ok(Value::Int(42)));
    assert_eq!(out.store.get("p"), Some(&Value::Int(42)));
    let kinds: Vec<EventKind> = out.trace.iter().map(|e| e.kind).collect();
    assert_eq!(
        kinds,
        [EventKind::Perform, EventKind::Continue, EventKind::Perform, EventKind::Continue]
    );
}

#[test]
fn xchg_checked_has_no_violations() {
    let tp = load(&corpus("xchg.eff"));
    let it = Interp::new(&tp);
    let init = it.initial_store().unwrap();
    for p in [-7, 0, 1, 42, 1000] {
        let out = it.run_checked("server", vec![], FUEL, Some(with(&init, "p", Value::Int(p))));
        assert_eq!(out.result, Ok(Value::Int(42)));
        assert_eq!(out.store.get("p"), Some(&Value::Int(p)));
    }
}

#[test]
fn references_environment_returns_one() {
    let tp = load(&corpus("references.eff"));
    let it = Interp::new(&tp);
    let out = it.run_checked("run", vec![], FUEL, None);
    assert_eq!(out.result, Ok(Value::Int(1)));
    assert_eq!(out.stats.performs_handled, 2);
    assert_eq!(out.stats.handler_reinstalls, 2);
}

#[test]
fn division_by_zero_is_one_event() {
    let tp = load(&corpus("division_interpreter.eff"));
    let it = Interp::new(&tp);
    let e = Value::ctor("Div", vec![int_ctor("Int", 1), int_ctor("Int", 0)]);
    let evs = it.enumerate_effects("eval", vec![e.clone()], FUEL, None).unwrap();
    assert_eq!(evs.len(), 1);
    assert_eq!(evs[0].effect, "Div_by_zero");
    let out = it.run_checked("main", vec![e], FUEL, None);
    assert_eq!(out.result, Ok(Value::Int(0)));
}

#[test]
fn division_euclidean_semantics() {
    let tp = load(&corpus("division_interpreter.eff"));
    let it = Interp::new(&tp);
    let e = Value::ctor("Div", vec![int_ctor("Int", -7), int_ctor("Int", 2)]);
    let out = it.run_checked("main", vec![e], FUEL, None);
    assert_eq!(out.result, Ok(Value::Int(-4)));
}

#[test]
fn control_inversion_totals() {
    let tp = load(&corpus("control_inversion.eff"));
    let it = Interp::new(&tp);
    let mut l = Value::ctor("Nil", vec![]);
    for x in [3, 5, 9] {
        l = Value::ctor("Cons", vec![Value::Int(x), l]);
    }
    let out = it.run_checked("sum_all", vec![l], FUEL, None);
    assert_eq!(out.result, Ok(Value::Unit));
    assert_eq!(out.store.get("total"), Some(&Value::Int(17)));
    assert!(it.enumerate_effects("sum_all", vec![Value::ctor("Nil", vec![])], FUEL, None).unwrap().is_empty());
}

const TWICE: &str = "
effect Tick : unit
(*@ protocol Tick : ensures true *)
let twice () : unit =
  try perform Tick with
  | effect Tick k -> continue k (); continue k ()
  (*@ try_ensures true *)
";

#[test]
fn second_resume_is_a_one_shot_violation() {
    let tp = load(TWICE);
    let it = Interp::new(&tp);
    let out = it.run("twice", vec![], FUEL, None);
    assert_eq!(out.result, Err(RunError::OneShot));
    assert_eq!(out.result.unwrap_err().blame(), Some(Blame::Server));
}

#[test]
fn unhandled_and_fuel() {
    let tp = load(&corpus("division_interpreter.eff"));
    let it = Interp::new(&tp);
    let e = Value::ctor("Div", vec![int_ctor("Int", 1), int_ctor("Int", 0)]);
    let out = it.run("eval", vec![e.clone()], FUEL, None);
    assert_eq!(out.result, Err(RunError::Unhandled("Div_by_zero".into())));
    let out = it.run("main", vec![e], 3, None);
    assert_eq!(out.result, Err(RunError::FuelExhausted));
}

#[test]
fn runs_are_deterministic() {
    let tp = load(&corpus("xchg.eff"));
    let it = Interp::new(&tp);
    let a = it.run("server", vec![], FUEL, None);
    let b = it.run("server", vec![], FUEL, None);
    assert_eq!(a.result, b.result);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.stats, b.stats);
}
