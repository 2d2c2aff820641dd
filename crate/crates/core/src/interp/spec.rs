//! Runtime evaluation of specification terms. `None` means the term is not
//! decidable by evaluation (unbounded quantifier, closure predicate, ...).

use std::collections::BTreeMap;

use super::value::{Store, Value};
use crate::sema::DataType;
use crate::surface::{BinOp, LogicDecl, Pattern, SourceType, Term, TermKind, UnOp};

const MAX_DEPTH: usize = 4000;
const MAX_RANGE: i64 = 100_000;

pub(crate) struct SpecEval<'a> {
    pub logic: &'a BTreeMap<String, LogicDecl>,
    pub datatypes: &'a BTreeMap<String, DataType>,
    pub cur: &'a Store,
    pub old: Option<&'a Store>,
    /// Whether a continuation may still be resumed.
    pub valid: &'a dyn Fn(usize) -> bool,
}

pub(crate) fn match_pattern(p: &Pattern, v: &Value, out: &mut Vec<(String, Value)>) -> bool {
    match p {
        Pattern::Wildcard => true,
        Pattern::Var(x) => {
            out.push((x.clone(), v.clone()));
            true
        }
        Pattern::Ctor(c, ps) => match v {
            Value::Ctor(d, args) if c == d && args.len() == ps.len() => {
                ps.iter().zip(args).all(|(q, a)| match_pattern(q, a, out))
            }
            // A unit-argument constructor pattern written with a binder.
            Value::Ctor(d, args) if c == d && args.is_empty() && ps.len() == 1 => true,
            _ => false,
        },
    }
}

fn flatten_and<'t>(t: &'t Term, out: &mut Vec<&'t Term>) {
    match &t.kind {
        TermKind::Binary(BinOp::And, a, b) => {
            flatten_and(a, out);
            flatten_and(b, out);
        }
        _ => out.push(t),
    }
}

fn is_var(t: &Term, x: &str) -> bool {
    matches!(&t.kind, TermKind::Var(y) if y == x)
}

impl SpecEval<'_> {
    pub fn holds(&self, t: &Term, vars: &[(String, Value)]) -> Option<bool> {
        let mut vars = vars.to_vec();
        self.eval(t, &mut vars, false, 0)?.as_bool()
    }

    fn store(&self, in_old: bool) -> Option<&Store> {
        if in_old {
            self.old
        } else {
            Some(self.cur)
        }
    }

    fn eval(&self, t: &Term, vars: &mut Vec<(String, Value)>, in_old: bool, depth: usize) -> Option<Value> {
        if depth > MAX_DEPTH {
            return None;
        }
        let d = depth + 1;
        Some(match &t.kind {
            TermKind::Int(n) => Value::Int(*n),
            TermKind::Bool(b) => Value::Bool(*b),
            TermKind::Unit => Value::Unit,
            TermKind::Var(x) => match vars.iter().rev().find(|(n, _)| n == x) {
                Some((_, v)) => v.clone(),
                None => self.store(in_old)?.get(x)?.clone(),
            },
            TermKind::Deref(x) => self.store(in_old)?.get(x)?.clone(),
            TermKind::Old(a) => {
                self.old?;
                return self.eval(a, vars, true, d);
            }
            TermKind::Get(a, i) => {
                let a = self.eval(a, vars, in_old, d)?;
                let i = self.eval(i, vars, in_old, d)?.as_int()?;
                match a {
                    Value::Array(xs) => xs.get(usize::try_from(i).ok()?)?.clone(),
                    _ => return None,
                }
            }
            TermKind::Binary(BinOp::And, a, b) => {
                let x = self.eval(a, vars, in_old, d).and_then(|v| v.as_bool());
                if x == Some(false) {
                    return Some(Value::Bool(false));
                }
                let y = self.eval(b, vars, in_old, d).and_then(|v| v.as_bool());
                match (x, y) {
                    (_, Some(false)) => Value::Bool(false),
                    (Some(true), Some(true)) => Value::Bool(true),
                    _ => return None,
                }
            }
            TermKind::Binary(BinOp::Or, a, b) => {
                let x = self.eval(a, vars, in_old, d).and_then(|v| v.as_bool());
                if x == Some(true) {
                    return Some(Value::Bool(true));
                }
                let y = self.eval(b, vars, in_old, d).and_then(|v| v.as_bool());
                match (x, y) {
                    (_, Some(true)) => Value::Bool(true),
                    (Some(false), Some(false)) => Value::Bool(false),
                    _ => return None,
                }
            }
            TermKind::Binary(op, a, b) => {
                let x = self.eval(a, vars, in_old, d)?;
                let y = self.eval(b, vars, in_old, d)?;
                binop(*op, &x, &y).ok()?
            }
            TermKind::Unary(UnOp::Not, a) => Value::Bool(!self.eval(a, vars, in_old, d)?.as_bool()?),
            TermKind::Unary(UnOp::Neg, a) => Value::Int(self.eval(a, vars, in_old, d)?.as_int()?.checked_neg()?),
            TermKind::Implies(a, b) => {
                let x = self.eval(a, vars, in_old, d).and_then(|v| v.as_bool());
                if x == Some(false) {
                    return Some(Value::Bool(true));
                }
                let y = self.eval(b, vars, in_old, d).and_then(|v| v.as_bool());
                match (x, y) {
                    (_, Some(true)) => Value::Bool(true),
                    (Some(true), Some(false)) => Value::Bool(false),
                    _ => return None,
                }
            }
            TermKind::Iff(a, b) => {
                let x = self.eval(a, vars, in_old, d)?.as_bool()?;
                let y = self.eval(b, vars, in_old, d)?.as_bool()?;
                Value::Bool(x == y)
            }
            TermKind::Forall(bs, body) => Value::Bool(self.quant(bs, body, true, vars, in_old, d)?),
            TermKind::Exists(bs, body) => Value::Bool(self.quant(bs, body, false, vars, in_old, d)?),
            TermKind::App(f, args) => return self.app(f, args, vars, in_old, d),
            TermKind::Ctor(c, args) => {
                let mut vs = Vec::with_capacity(args.len());
                for a in args {
                    vs.push(self.eval(a, vars, in_old, d)?);
                }
                Value::Ctor(c.clone(), vs)
            }
            TermKind::If(c, a, b) => {
                if self.eval(c, vars, in_old, d)?.as_bool()? {
                    return self.eval(a, vars, in_old, d);
                } else {
                    return self.eval(b, vars, in_old, d);
                }
            }
            TermKind::Match(s, arms) => {
                let v = self.eval(s, vars, in_old, d)?;
                for (p, body) in arms {
                    let mut binds = Vec::new();
                    if match_pattern(p, &v, &mut binds) {
                        let n = vars.len();
                        vars.extend(binds);
                        let r = self.eval(body, vars, in_old, d);
                        vars.truncate(n);
                        return r;
                    }
                }
                return None;
            }
        })
    }

    fn app(&self, f: &str, args: &[Term], vars: &mut Vec<(String, Value)>, in_old: bool, d: usize) -> Option<Value> {
        match (f, args) {
            ("length", [a]) => match self.eval(a, vars, in_old, d)? {
                Value::Array(xs) => Some(Value::Int(xs.len() as i64)),
                _ => None,
            },
            ("valid", [k]) => match self.eval(k, vars, in_old, d)? {
                Value::Cont(id) => Some(Value::Bool((self.valid)(id))),
                _ => None,
            },
            ("pre" | "post", _) => None,
            _ => {
                let def = self.logic.get(f)?;
                let mut frame = Vec::with_capacity(def.params.len());
                for ((x, _), a) in def.params.iter().zip(args) {
                    frame.push((x.clone(), self.eval(a, vars, in_old, d)?));
                }
                self.eval(&def.body, &mut frame, in_old, d)
            }
        }
    }

    /// Finite-domain quantifiers: booleans, enumerations, and integers
    /// bounded by the guard.
    fn quant(
        &self,
        bs: &[(String, SourceType)],
        body: &Term,
        forall: bool,
        vars: &mut Vec<(String, Value)>,
        in_old: bool,
        d: usize,
    ) -> Option<bool> {
        let Some(((x, ty), rest)) = bs.split_first() else {
            return self.eval(body, vars, in_old, d)?.as_bool();
        };
        let domain = self.domain(x, ty, body, forall, vars, in_old, d)?;
        let mut unknown = false;
        for v in domain {
            vars.push((x.clone(), v));
            let r = self.quant(rest, body, forall, vars, in_old, d);
            vars.pop();
            match r {
                Some(b) if b != forall => return Some(!forall),
                Some(_) => {}
                None => unknown = true,
            }
        }
        if unknown {
            None
        } else {
            Some(forall)
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn domain(
        &self,
        x: &str,
        ty: &SourceType,
        body: &Term,
        forall: bool,
        vars: &mut Vec<(String, Value)>,
        in_old: bool,
        d: usize,
    ) -> Option<Vec<Value>> {
        match ty {
            SourceType::Bool => Some(vec![Value::Bool(false), Value::Bool(true)]),
            SourceType::Unit => Some(vec![Value::Unit]),
            SourceType::Named(n) => {
                let dt = self.datatypes.get(n)?;
                if dt.ctors.iter().all(|(_, args)| args.is_empty()) {
                    Some(dt.ctors.iter().map(|(c, _)| Value::ctor(c, Vec::new())).collect())
                } else {
                    None
                }
            }
            SourceType::Int => {
                let guard = match (&body.kind, forall) {
                    (TermKind::Implies(g, _), true) => &**g,
                    (_, false) => body,
                    _ => return None,
                };
                let mut conj = Vec::new();
                flatten_and(guard, &mut conj);
                let mut lo: Option<i64> = None;
                let mut hi: Option<i64> = None;
                for c in conj {
                    let TermKind::Binary(op, a, b) = &c.kind else { continue };
                    // Normalize to `x op e`.
                    let (op, e) = if is_var(a, x) {
                        (*op, &**b)
                    } else if is_var(b, x) {
                        let flipped = match op {
                            BinOp::Lt => BinOp::Gt,
                            BinOp::Le => BinOp::Ge,
                            BinOp::Gt => BinOp::Lt,
                            BinOp::Ge => BinOp::Le,
                            o => *o,
                        };
                        (flipped, &**a)
                    } else {
                        continue;
                    };
                    let Some(n) = self.eval(e, vars, in_old, d).and_then(|v| v.as_int()) else { continue };
                    match op {
                        BinOp::Gt => lo = Some(lo.map_or(n + 1, |l| l.max(n + 1))),
                        BinOp::Ge => lo = Some(lo.map_or(n, |l| l.max(n))),
                        BinOp::Lt => hi = Some(hi.map_or(n - 1, |h| h.min(n - 1))),
                        BinOp::Le => hi = Some(hi.map_or(n, |h| h.min(n))),
                        BinOp::Eq => {
                            lo = Some(lo.map_or(n, |l| l.max(n)));
                            hi = Some(hi.map_or(n, |h| h.min(n)));
                        }
                        _ => {}
                    }
                }
                let (lo, hi) = (lo?, hi?);
                if hi < lo {
                    return Some(Vec::new());
                }
                if hi - lo > MAX_RANGE {
                    return None;
                }
                Some((lo..=hi).map(Value::Int).collect())
            }
            _ => None,
        }
    }
}

/// Integer division and remainder are Euclidean, matching the logic.
pub(crate) fn binop(op: BinOp, x: &Value, y: &Value) -> Result<Value, super::RunError> {
    use super::RunError;
    let ints = || match (x, y) {
        (Value::Int(a), Value::Int(b)) => Ok((*a, *b)),
        _ => Err(RunError::Other(format!("`{}` expects integers", op.symbol()))),
    };
    Ok(match op {
        BinOp::Add => Value::Int({
            let (a, b) = ints()?;
            a.checked_add(b).ok_or(RunError::Overflow)?
        }),
        BinOp::Sub => Value::Int({
            let (a, b) = ints()?;
            a.checked_sub(b).ok_or(RunError::Overflow)?
        }),
        BinOp::Mul => Value::Int({
            let (a, b) = ints()?;
            a.checked_mul(b).ok_or(RunError::Overflow)?
        }),
        BinOp::Div | BinOp::Mod => {
            let (a, b) = ints()?;
            if b == 0 {
                return Err(RunError::DivisionByZero);
            }
            let r = if op == BinOp::Div { a.checked_div_euclid(b) } else { a.checked_rem_euclid(b) };
            Value::Int(r.ok_or(RunError::Overflow)?)
        }
        BinOp::Eq => Value::Bool(x == y),
        BinOp::Ne => Value::Bool(x != y),
        BinOp::Lt => Value::Bool({
            let (a, b) = ints()?;
            a < b
        }),
        BinOp::Le => Value::Bool({
            let (a, b) = ints()?;
            a <= b
        }),
        BinOp::Gt => Value::Bool({
            let (a, b) = ints()?;
            a > b
        }),
        BinOp::Ge => Value::Bool({
            let (a, b) = ints()?;
            a >= b
        }),
        BinOp::And | BinOp::Or => {
            let (Value::Bool(a), Value::Bool(b)) = (x, y) else {
                return Err(RunError::Other("boolean operator on non-booleans".into()));
            };
            Value::Bool(if op == BinOp::And { *a && *b } else { *a || *b })
        }
    })
}
