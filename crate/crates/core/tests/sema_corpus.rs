use effv_core::sema::{build_state_model, check_effect_rows, typecheck};
use effv_core::surface::parse_program;

fn corpus(name: &str) -> String {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/");
    std::fs::read_to_string(format!("{dir}{name}")).unwrap()
}

#[test]
fn corpus_programs_typecheck() {
    for f in [
        "xchg.eff",
        "division_interpreter.eff",
        "control_inversion.eff",
        "references.eff",
    ] {
        let p = parse_program(&corpus(f)).unwrap_or_else(|e| panic!("{f}: {e}"));
        let tp = typecheck(&p).unwrap_or_else(|e| panic!("{f}: {e}"));
        check_effect_rows(&tp).unwrap_or_else(|e| panic!("{f}: {e}"));
        let _ = build_state_model(&tp);
    }
}
