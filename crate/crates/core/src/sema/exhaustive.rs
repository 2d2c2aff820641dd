//! Pattern typing and exhaustiveness.

use super::{Globals, SemaError, SemaResult};
use crate::surface::{Pattern, SourceType, Span};

/// Types `p` against `ty` and appends its binders.
pub fn bind_pattern(
    g: &Globals,
    p: &Pattern,
    ty: &SourceType,
    span: Span,
    out: &mut Vec<(String, SourceType)>,
) -> SemaResult<()> {
    match p {
        Pattern::Wildcard => Ok(()),
        Pattern::Var(x) => {
            if out.iter().any(|(y, _)| y == x) {
                return Err(SemaError::new(
                    span,
                    format!("variable `{x}` bound twice in pattern"),
                ));
            }
            out.push((x.clone(), ty.clone()));
            Ok(())
        }
        Pattern::Ctor(c, args) => {
            let Some((dt, arg_tys)) = g.ctors.get(c) else {
                return Err(SemaError::new(span, format!("unknown constructor `{c}`")));
            };
            if &SourceType::Named(dt.clone()) != ty {
                return Err(SemaError::new(
                    span,
                    format!("constructor `{c}` builds `{dt}`, expected `{ty}`"),
                ));
            }
            if args.len() != arg_tys.len() {
                return Err(SemaError::new(
                    span,
                    format!(
                        "constructor `{c}` expects {} arguments, got {}",
                        arg_tys.len(),
                        args.len()
                    ),
                ));
            }
            for (a, t) in args.iter().zip(arg_tys) {
                bind_pattern(g, a, t, span, out)?;
            }
            Ok(())
        }
    }
}

fn is_default(p: &Pattern) -> bool {
    matches!(p, Pattern::Wildcard | Pattern::Var(_))
}

/// Classic matrix check: does every value of `tys` match some row?
pub fn is_exhaustive(g: &Globals, rows: Vec<Vec<Pattern>>, tys: &[SourceType]) -> bool {
    if tys.is_empty() {
        return !rows.is_empty();
    }
    let head_ctor = rows.iter().any(|r| !is_default(&r[0]));
    let dt = match &tys[0] {
        SourceType::Named(n) if head_ctor => g.datatypes.get(n),
        _ => None,
    };
    match dt {
        Some(dt) => dt.ctors.iter().all(|(c, arg_tys)| {
            let spec: Vec<Vec<Pattern>> = rows
                .iter()
                .filter_map(|r| {
                    let args = match &r[0] {
                        Pattern::Ctor(c2, args) if c2 == c => args.clone(),
                        Pattern::Ctor(..) => return None,
                        _ => vec![Pattern::Wildcard; arg_tys.len()],
                    };
                    Some(args.into_iter().chain(r[1..].iter().cloned()).collect())
                })
                .collect();
            let sub: Vec<SourceType> = arg_tys.iter().chain(&tys[1..]).cloned().collect();
            is_exhaustive(g, spec, &sub)
        }),
        None => {
            let rest: Vec<Vec<Pattern>> = rows
                .iter()
                .filter(|r| is_default(&r[0]))
                .map(|r| r[1..].to_vec())
                .collect();
            is_exhaustive(g, rest, &tys[1..])
        }
    }
}
