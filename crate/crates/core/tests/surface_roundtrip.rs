use effv_core::surface::{parse_program, pretty_print, strip_locations};

fn corpus(name: &str) -> String {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/");
    std::fs::read_to_string(format!("{dir}{name}")).unwrap()
}

fn roundtrip(text: &str) {
    let p = parse_program(text).unwrap_or_else(|e| panic!("{e}"));
    let printed = pretty_print(&p);
    let q = parse_program(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
    assert_eq!(strip_locations(&p), strip_locations(&q), "\n{printed}");
    assert_eq!(printed, pretty_print(&q));
}

#[test]
fn xchg_roundtrips() {
    roundtrip(&corpus("xchg.eff"));
    println!(
        "{}",
        pretty_print(&parse_program(&corpus("xchg.eff")).unwrap())
    );
}

#[test]
fn underscore_names_are_reserved() {
    for src in ["let _x = 1", "let f (_u : int) : int = 1", "let f (x : int) : int = _c_x"] {
        let e = parse_program(src).unwrap_err();
        assert!(e.to_string().contains("reserved"), "{src}: {e}");
    }
    assert!(parse_program("let f (x : int) : int = match x with _ -> 1").is_ok());
}
