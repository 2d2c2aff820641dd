use effv_core::ir::{field_name, IrType, LOp, Term};
use effv_core::surface::SourceType;
use effv_core::translator::{combine_terms, effect_type_split, unmodified_state};

fn size(t: &SourceType) -> usize {
    match t {
        SourceType::Arrow(a, b) | SourceType::Cont(a, b) => 1 + size(a) + size(b),
        SourceType::Ref(a) | SourceType::Array(a) => 1 + size(a),
        _ => 1,
    }
}

/// Every type of at most `n` constructors over a small base.
fn types(n: usize) -> Vec<SourceType> {
    if n == 0 {
        return Vec::new();
    }
    let mut out = vec![SourceType::Int, SourceType::Bool, SourceType::Unit, SourceType::Named("t".into())];
    for a in types(n - 1) {
        out.push(SourceType::Array(Box::new(a.clone())));
        out.push(SourceType::Ref(Box::new(a)));
    }
    for i in 1..n {
        for a in types(i) {
            for b in types(n - 1 - i) {
                if size(&a) + size(&b) < n {
                    out.push(SourceType::Arrow(Box::new(a.clone()), Box::new(b)));
                }
            }
        }
    }
    out.sort_by_key(|t| format!("{t:?}"));
    out.dedup();
    out
}

fn split_ref(t: &SourceType) -> (Vec<SourceType>, SourceType) {
    fn chain(t: &SourceType) -> (Vec<SourceType>, SourceType) {
        match t {
            SourceType::Arrow(a, b) => {
                let (mut rest, r) = chain(b);
                rest.insert(0, (**a).clone());
                (rest, r)
            }
            other => (Vec::new(), other.clone()),
        }
    }
    match t {
        SourceType::Arrow(..) => chain(t),
        other => (vec![SourceType::Unit], other.clone()),
    }
}

#[test]
fn effect_split_small_cases() {
    let arrow = |a, b| SourceType::Arrow(Box::new(a), Box::new(b));
    assert_eq!(effect_type_split(&SourceType::Int), (vec![SourceType::Unit], SourceType::Int));
    assert_eq!(effect_type_split(&arrow(SourceType::Int, SourceType::Unit)), (vec![SourceType::Int], SourceType::Unit));
    assert_eq!(
        effect_type_split(&arrow(SourceType::Int, arrow(SourceType::Int, SourceType::Bool))),
        (vec![SourceType::Int, SourceType::Int], SourceType::Bool)
    );
}

#[test]
fn effect_split_exhaustive_to_size_4() {
    let ts = types(4);
    assert!(ts.len() > 50);
    for t in &ts {
        let (args, reply) = effect_type_split(t);
        assert_eq!((args.clone(), reply.clone()), split_ref(t), "{t:?}");
        assert!(!args.is_empty());
        assert!(!matches!(reply, SourceType::Arrow(..)));
        if matches!(t, SourceType::Arrow(..)) {
            let rebuilt = args.iter().rev().fold(reply, |r, a| SourceType::Arrow(Box::new(a.clone()), Box::new(r)));
            assert_eq!(&rebuilt, t);
        }
    }
}

fn atom(i: usize) -> Term {
    Term::var(&format!("a{i}"), IrType::Bool)
}

/// Truth value of a conjunction of atoms and literals.
fn eval(t: &Term, env: u32) -> bool {
    match t {
        Term::Bool(b) => *b,
        Term::Var(x, _) => env >> x[1..].parse::<u32>().unwrap() & 1 == 1,
        Term::Bin(LOp::And, a, b) => eval(a, env) && eval(b, env),
        other => panic!("unexpected term {other:?}"),
    }
}

fn conj_ref(ts: &[Term]) -> Term {
    match ts {
        [] => Term::Bool(true),
        [t] => t.clone(),
        [t, rest @ ..] => Term::bin(LOp::And, t.clone(), conj_ref(rest)),
    }
}

fn lists(len: usize, pool: &[Term]) -> Vec<Vec<Term>> {
    if len == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for l in lists(len - 1, pool) {
        for p in pool {
            let mut l = l.clone();
            l.push(p.clone());
            out.push(l);
        }
    }
    out
}

#[test]
fn combine_small_cases() {
    assert_eq!(combine_terms(&[]), Term::Bool(true));
    assert_eq!(combine_terms(&[atom(0)]), atom(0));
    assert_eq!(combine_terms(&[atom(0), atom(1)]), Term::bin(LOp::And, atom(0), atom(1)));
}

#[test]
fn combine_exhaustive_to_length_4() {
    let atoms: Vec<Term> = (0..3).map(atom).collect();
    for n in 0..=4 {
        for l in lists(n, &atoms) {
            assert_eq!(combine_terms(&l), conj_ref(&l), "{l:?}");
        }
    }
    let mut pool = atoms.clone();
    pool.push(Term::Bool(true));
    pool.push(Term::Bool(false));
    for n in 0..=4 {
        for l in lists(n, &pool) {
            let c = combine_terms(&l);
            for env in 0..8 {
                assert_eq!(eval(&c, env), l.iter().all(|t| eval(t, env)), "{l:?} under {env:03b}");
            }
        }
    }
}

fn frame_eq(x: &str) -> Term {
    let f = field_name(x);
    Term::eq(
        Term::field(Term::var("state", IrType::State), &f),
        Term::field(Term::var("state_old", IrType::State), &f),
    )
}

#[test]
fn unmodified_small_cases() {
    assert_eq!(unmodified_state(&[]), Term::Bool(true));
    assert_eq!(unmodified_state(&["p".into()]), frame_eq("p"));
    assert_eq!(field_name("p"), "_p");
}

#[test]
fn unmodified_exhaustive_to_length_4() {
    let names = ["p", "q", "bits", "x"];
    for n in 0..=4 {
        for mask in 0u32..(1 << names.len()) {
            if mask.count_ones() as usize != n {
                continue;
            }
            let vs: Vec<String> = names.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, v)| v.to_string()).collect();
            let eqs: Vec<Term> = vs.iter().map(|v| frame_eq(v)).collect();
            assert_eq!(unmodified_state(&vs), conj_ref(&eqs), "{vs:?}");
        }
    }
}
