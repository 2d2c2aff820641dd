use std::collections::BTreeSet;

use effv_core::interp::{Interp, Store, Value};
use effv_core::sema::typecheck;
use effv_core::surface::parse_program;

/// First child / next sibling encoding, nodes numbered in preorder.
#[derive(Debug, Clone)]
enum Forest {
    E,
    N(usize, Box<Forest>, Box<Forest>),
}

/// Every shape with `n` nodes, all labelled 0.
fn shapes(n: usize) -> Vec<Forest> {
    if n == 0 {
        return vec![Forest::E];
    }
    let mut out = Vec::new();
    for k in 0..n {
        for l in shapes(k) {
            for r in shapes(n - 1 - k) {
                out.push(Forest::N(0, Box::new(l.clone()), Box::new(r)));
            }
        }
    }
    out
}

fn label(f: &Forest, next: &mut usize) -> Forest {
    match f {
        Forest::E => Forest::E,
        Forest::N(_, l, r) => {
            let i = *next;
            *next += 1;
            let l = label(l, next);
            let r = label(r, next);
            Forest::N(i, Box::new(l), Box::new(r))
        }
    }
}

fn to_value(f: &Forest) -> Value {
    match f {
        Forest::E => Value::ctor("E", vec![]),
        Forest::N(i, l, r) => Value::ctor("N", vec![Value::Int(*i as i64), to_value(l), to_value(r)]),
    }
}

/// (node, parent) pairs of the n-ary forest.
fn parents(f: &Forest, parent: Option<usize>, out: &mut Vec<(usize, Option<usize>)>) {
    if let Forest::N(i, l, r) = f {
        out.push((*i, parent));
        parents(l, Some(*i), out);
        parents(r, parent, out);
    }
}

/// Colorings where every child of a white node is white; `true` is black.
fn brute_force(f: &Forest, n: usize) -> BTreeSet<Vec<bool>> {
    let mut ps = Vec::new();
    parents(f, None, &mut ps);
    (0..1u32 << n)
        .map(|m| (0..n).map(|i| m >> i & 1 == 1).collect::<Vec<bool>>())
        .filter(|c| ps.iter().all(|&(i, p)| p.map_or(true, |p| c[p] || !c[i])))
        .collect()
}

#[test]
fn enumeration_matches_brute_force_up_to_four_nodes() {
    let path = format!("{}/../../corpus/koda_ruskey.eff", env!("CARGO_MANIFEST_DIR"));
    let tp = typecheck(&parse_program(&std::fs::read_to_string(path).unwrap()).unwrap()).unwrap();
    let it = Interp::new(&tp);
    let mut forests = 0;
    for n in 0..=4 {
        for shape in shapes(n) {
            let f = label(&shape, &mut 0);
            let store = Store { vars: vec![("bits".into(), Value::Array(vec![Value::ctor("White", vec![]); n]))] };
            let evs = it.enumerate_effects("koda_ruskey", vec![to_value(&f)], 1_000_000, Some(store)).unwrap();
            let colorings: Vec<Vec<bool>> = evs
                .iter()
                .map(|e| match e.before.get("bits") {
                    Some(Value::Array(xs)) => xs.iter().map(|c| *c == Value::ctor("Black", vec![])).collect(),
                    other => panic!("{other:?}"),
                })
                .collect();
            let distinct: BTreeSet<Vec<bool>> = colorings.iter().cloned().collect();
            let expected = brute_force(&f, n);
            assert_eq!(distinct.len(), colorings.len(), "{f:?}: repeated coloring");
            assert!(distinct.is_subset(&expected), "{f:?}: invalid coloring");
            assert_eq!(colorings.len(), expected.len(), "{f:?}");
            forests += 1;
        }
    }
    // Catalan numbers 1, 1, 2, 5, 14.
    assert_eq!(forests, 23);
}
