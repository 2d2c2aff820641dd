use effv_core::sema::{check_effect_rows, typecheck};
use effv_core::surface::parse_program;
use effv_core::translator::translate_program;
use effv_core::vcgen::{gen_simplified, print_vc, Vc, VcKind};

fn corpus(name: &str) -> String {
    let path = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn vcs(name: &str) -> (Vec<Vc>, Vec<(String, effv_core::ir::IrType)>) {
    let p = parse_program(&corpus(name)).unwrap();
    let tp = typecheck(&p).unwrap();
    check_effect_rows(&tp).unwrap();
    let t = translate_program(&tp).unwrap();
    (gen_simplified(&t.ir).unwrap(), t.ir.state_fields().to_vec())
}

fn nontrivial<'a>(vs: &'a [Vc], routine: &str) -> Vec<&'a Vc> {
    vs.iter()
        .filter(|v| v.routine == routine && !v.is_trivial())
        .collect()
}

#[test]
fn xchg_obligation_taxonomy() {
    let (vs, fields) = vcs("xchg.eff");
    for v in &vs {
        if !v.is_trivial() {
            println!("{}", print_vc(v, &fields));
        }
    }
    let client = nontrivial(&vs, "xchg");
    assert_eq!(client.len(), 1);
    assert_eq!(client[0].kind, VcKind::Postcondition);
    let mut server: Vec<VcKind> = nontrivial(&vs, "server").iter().map(|v| v.kind).collect();
    server.sort();
    assert_eq!(
        server,
        vec![
            VcKind::ContinuationValidity,
            VcKind::ContinuationPrecondition,
            VcKind::HandlerInvariantNormal,
            VcKind::HandlerInvariantExceptional,
        ]
    );
}

#[test]
fn corpus_generates() {
    for name in [
        "references.eff",
        "division_interpreter.eff",
        "control_inversion.eff",
        "koda_ruskey.eff",
    ] {
        let (vs, _) = vcs(name);
        assert!(!vs.is_empty(), "{name}");
    }
}

#[test]
fn koda_ruskey_scripts_emit() {
    let p = parse_program(&corpus("koda_ruskey.eff")).unwrap();
    let tp = typecheck(&p).unwrap();
    check_effect_rows(&tp).unwrap();
    let t = translate_program(&tp).unwrap();
    let vs = gen_simplified(&t.ir).unwrap();
    for v in &vs {
        let s = effv_core::smt::emit_smtlib(&t.ir, v).unwrap();
        assert!(s.contains("(check-sat)"), "{}", v.id);
        assert!(s.contains("(Array Int t_color)"), "{}", v.id);
    }
}
