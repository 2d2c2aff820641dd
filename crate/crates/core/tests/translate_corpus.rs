use effv_core::ir::{print_program, wf_check};
use effv_core::sema::{check_effect_rows, typecheck};
use effv_core::surface::parse_program;
use effv_core::translator::{translate_program, Translation};

fn corpus(name: &str) -> String {
    let path = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn translate(name: &str) -> Translation {
    let p = parse_program(&corpus(name)).unwrap();
    let tp = typecheck(&p).unwrap();
    check_effect_rows(&tp).unwrap();
    translate_program(&tp).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn corpus_ir_is_well_formed() {
    for name in [
        "xchg.eff",
        "references.eff",
        "division_interpreter.eff",
        "control_inversion.eff",
    ] {
        let t = translate(name);
        let errs = wf_check(&t.ir);
        assert!(
            errs.is_empty(),
            "{name}: {errs:?}\n{}",
            print_program(&t.ir)
        );
    }
}

#[test]
fn xchg_ir_shape() {
    let ir = print_program(&translate("xchg.eff").ir);
    for needle in [
        "exception XCHG (int)",
        "predicate post_XCHG (x : int) (old_state : state) (state : state) (reply : int) =\n  state._p = x && reply = old_state._p",
        "val perform_XCHG (x : int) : int\n  requires { pre_XCHG x {_p = !p} }\n  ensures  { post_XCHG x (old {_p = !p}) {_p = !p} result }\n  raises   { XCHG x -> pre_XCHG x {_p = !p} }\n  writes   { p }",
        "let init_state = {_p = !p} in",
        "let eff_state = {_p = !p} in",
        "val gen_k () : continuation int int",
        "pre result arg state <-> post_XCHG n eff_state state arg",
        "post f arg irrelevant_old_state state result <-> (let state_old = init_state in state._p = state_old._p && result = 42)",
        "continue k old_p",
    ] {
        assert!(ir.contains(needle), "missing {needle:?} in\n{ir}");
    }
}

#[test]
fn translation_is_deterministic() {
    for n in ["xchg.eff", "references.eff", "division_interpreter.eff", "control_inversion.eff", "koda_ruskey.eff"] {
        let a = print_program(&translate(n).ir);
        for _ in 0..2 {
            assert_eq!(a, print_program(&translate(n).ir), "{n}");
        }
    }
}
