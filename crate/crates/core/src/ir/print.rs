//! Stable WhyML-like rendering of the IR, one declaration per block.

use std::fmt::Write;

use super::*;
use crate::surface::Pattern;

pub fn print_program(p: &IrProgram) -> String {
    let pr = Printer {
        fields: p.state_fields().to_vec(),
    };
    let mut out = String::new();
    for (i, d) in p.decls.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        pr.decl(&mut out, d);
        out.push('\n');
    }
    out
}

pub fn print_decl(p: &IrProgram, d: &Decl) -> String {
    let pr = Printer {
        fields: p.state_fields().to_vec(),
    };
    let mut out = String::new();
    pr.decl(&mut out, d);
    out
}

/// Renders a term; state records print through `fields`.
pub fn print_term(fields: &[(String, IrType)], t: &Term) -> String {
    let pr = Printer {
        fields: fields.to_vec(),
    };
    let mut out = String::new();
    pr.term(&mut out, t, 0);
    out
}

struct Printer {
    fields: Vec<(String, IrType)>,
}

fn pad(out: &mut String, n: usize) {
    for _ in 0..n {
        out.push_str("  ");
    }
}

fn binders(bs: &[(String, IrType)]) -> String {
    bs.iter()
        .map(|(x, t)| format!("({x} : {t})"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn pattern(p: &Pattern) -> String {
    match p {
        Pattern::Wildcard => "_".into(),
        Pattern::Var(x) => x.clone(),
        Pattern::Ctor(c, ps) if ps.is_empty() => c.clone(),
        Pattern::Ctor(c, ps) => format!(
            "{c} ({})",
            ps.iter().map(pattern).collect::<Vec<_>>().join(", ")
        ),
    }
}

/// `_p` prints as `p` in writes clauses; validity fields keep their name.
fn written(f: &str) -> String {
    if f.starts_with("_valid_") {
        f.to_string()
    } else {
        f.trim_start_matches('_').to_string()
    }
}

fn op_level(op: LOp) -> u8 {
    match op {
        LOp::Implies | LOp::Iff => 1,
        LOp::Or => 2,
        LOp::And => 3,
        LOp::Eq | LOp::Ne | LOp::Lt | LOp::Le | LOp::Gt | LOp::Ge => 5,
        LOp::Add | LOp::Sub => 6,
        LOp::Mul | LOp::Div | LOp::Mod => 7,
    }
}

const ATOM: u8 = 10;

impl Printer {
    fn decl(&self, out: &mut String, d: &Decl) {
        match d {
            Decl::Datatypes(ds) => {
                for (i, (name, ctors)) in ds.iter().enumerate() {
                    let kw = if i == 0 { "type" } else { "with" };
                    let _ = write!(out, "{kw} {name} =");
                    for (c, args) in ctors {
                        let _ = write!(out, "\n  | {c}");
                        for a in args {
                            let _ = write!(out, " ({a})");
                        }
                    }
                    if i + 1 < ds.len() {
                        out.push('\n');
                    }
                }
            }
            Decl::State(fs) => {
                out.push_str("type state = {");
                for (x, t) in fs {
                    if x.starts_with("_valid_") {
                        let _ = write!(out, "\n  mutable {x} : map ({t}) bool;");
                    } else {
                        let _ = write!(out, "\n  mutable {x} : {t};");
                    }
                }
                out.push_str("\n}");
            }
            Decl::Exception(n, args) => {
                let _ = write!(out, "exception {n}");
                for a in args {
                    let _ = write!(out, " ({a})");
                }
            }
            Decl::Logic(l) => {
                let kw = match (&l.ret, l.recursive) {
                    (IrType::Bool, false) => "predicate",
                    (IrType::Bool, true) => "predicate rec",
                    (_, false) => "function",
                    (_, true) => "function rec",
                };
                let _ = write!(out, "{kw} {} {}", l.name, binders(&l.params));
                if l.ret != IrType::Bool {
                    let _ = write!(out, " : {}", l.ret);
                }
                out.push_str(" =\n  ");
                self.term(out, &l.body, 0);
            }
            Decl::Routine(r) => self.routine(out, r, 0, "let"),
        }
    }

    fn routine(&self, out: &mut String, r: &Routine, ind: usize, kw: &str) {
        let params = if r.params.is_empty() {
            "()".to_string()
        } else {
            binders(&r.params)
        };
        match &r.body {
            None => {
                let _ = write!(out, "val {} {params} : {}", r.name, r.ret);
            }
            Some(_) => {
                let rec = if r.recursive { " rec" } else { "" };
                let _ = write!(out, "{kw}{rec} {} {params} : {}", r.name, r.ret);
            }
        }
        let c = &r.contract;
        for t in &c.requires {
            out.push('\n');
            pad(out, ind + 1);
            out.push_str("requires { ");
            self.term(out, t, 0);
            out.push_str(" }");
        }
        for t in &c.ensures {
            out.push('\n');
            pad(out, ind + 1);
            out.push_str("ensures  { ");
            self.term(out, t, 0);
            out.push_str(" }");
        }
        for rs in &c.raises {
            out.push('\n');
            pad(out, ind + 1);
            let _ = write!(out, "raises   {{ {}", rs.exn);
            for (x, _) in &rs.binders {
                let _ = write!(out, " {x}");
            }
            out.push_str(" -> ");
            self.term(out, &rs.post, 0);
            out.push_str(" }");
        }
        if let Some(w) = &c.writes {
            out.push('\n');
            pad(out, ind + 1);
            let ws: Vec<String> = w.iter().map(|f| written(f)).collect();
            if ws.is_empty() {
                out.push_str("writes   {}");
            } else {
                let _ = write!(out, "writes   {{ {} }}", ws.join(", "));
            }
        }
        if let Some(v) = &c.variant {
            out.push('\n');
            pad(out, ind + 1);
            out.push_str("variant  { ");
            self.term(out, v, 0);
            out.push_str(" }");
        }
        if let Some(b) = &r.body {
            out.push('\n');
            pad(out, ind);
            out.push_str("= ");
            self.expr(out, b, ind + 1);
        }
    }

    fn record(&self, out: &mut String, val: &dyn Fn(&str) -> String) {
        out.push('{');
        for (i, (f, _)) in self
            .fields
            .iter()
            .filter(|(f, _)| !f.starts_with("_valid_"))
            .enumerate()
        {
            if i > 0 {
                out.push_str("; ");
            }
            let _ = write!(out, "{f} = {}", val(f));
        }
        out.push('}');
    }

    fn term(&self, out: &mut String, t: &Term, ctx: u8) {
        match t {
            Term::Int(n) if *n < 0 => {
                let _ = write!(out, "({n})");
            }
            Term::Int(n) => {
                let _ = write!(out, "{n}");
            }
            Term::Bool(b) => {
                let _ = write!(out, "{b}");
            }
            Term::Unit => out.push_str("()"),
            Term::Var(x, _) => out.push_str(x),
            Term::Cur => self.record(out, &|f| format!("!{}", &f[1..])),
            Term::Old => {
                out.push_str("(old ");
                self.record(out, &|f| format!("!{}", &f[1..]));
                out.push(')');
            }
            Term::Field(s, f) => match &**s {
                Term::Cur => {
                    let _ = write!(out, "!{}", &f[1..]);
                }
                Term::Old => {
                    let _ = write!(out, "(old !{})", &f[1..]);
                }
                s => {
                    self.term(out, s, ATOM);
                    let _ = write!(out, ".{f}");
                }
            },
            Term::Record(fs) => {
                out.push('{');
                for (i, (f, v)) in fs.iter().enumerate() {
                    if i > 0 {
                        out.push_str("; ");
                    }
                    let _ = write!(out, "{f} = ");
                    self.term(out, v, 0);
                }
                out.push('}');
            }
            Term::Select(a, i) => {
                self.term(out, a, ATOM);
                out.push('[');
                self.term(out, i, 0);
                out.push(']');
            }
            Term::Store(a, i, v) => {
                self.term(out, a, ATOM);
                out.push('[');
                self.term(out, i, 0);
                out.push_str(" <- ");
                self.term(out, v, 0);
                out.push(']');
            }
            Term::Length(a) => {
                let _ = write!(out, "length {a}");
            }
            Term::Bin(op, a, b) => {
                let lvl = op_level(*op);
                let open = lvl < ctx || (lvl == ctx && lvl <= 1);
                if open {
                    out.push('(');
                }
                // `&&`, `||`, `->` associate to the right; arithmetic to the left.
                let right_assoc = matches!(op, LOp::And | LOp::Or | LOp::Implies);
                let (la, lb) = if right_assoc {
                    (lvl + 1, lvl)
                } else if lvl == 5 || *op == LOp::Iff {
                    (lvl + 1, lvl + 1)
                } else {
                    (lvl, lvl + 1)
                };
                self.term(out, a, la);
                let _ = write!(out, " {} ", op.symbol());
                self.term(out, b, lb);
                if open {
                    out.push(')');
                }
            }
            Term::Un(op, a) => {
                let (s, lvl) = match op {
                    UnOp::Not => ("not ", 4),
                    UnOp::Neg => ("- ", 8),
                };
                if lvl < ctx {
                    out.push('(');
                }
                out.push_str(s);
                self.term(out, a, lvl);
                if lvl < ctx {
                    out.push(')');
                }
            }
            Term::Ite(c, a, b) => self.open(out, ctx, |out| {
                out.push_str("if ");
                self.term(out, c, 0);
                out.push_str(" then ");
                self.term(out, a, 0);
                out.push_str(" else ");
                self.term(out, b, 0);
            }),
            Term::Forall(bs, trs, body) => self.open(out, ctx, |out| {
                let xs: Vec<String> = bs.iter().map(|(x, t)| format!("{x} : {t}")).collect();
                let _ = write!(out, "forall {}", xs.join(", "));
                if !trs.is_empty() {
                    out.push_str(" [");
                    for (i, tr) in trs.iter().enumerate() {
                        if i > 0 {
                            out.push_str(" | ");
                        }
                        self.term(out, tr, 0);
                    }
                    out.push(']');
                }
                out.push_str(". ");
                self.term(out, body, 0);
            }),
            Term::Exists(bs, body) => self.open(out, ctx, |out| {
                let xs: Vec<String> = bs.iter().map(|(x, t)| format!("{x} : {t}")).collect();
                let _ = write!(out, "exists {}. ", xs.join(", "));
                self.term(out, body, 0);
            }),
            Term::App(f, args) => self.app(out, ctx, f, args),
            Term::Ctor(c, args, _) => {
                if args.is_empty() {
                    out.push_str(c);
                } else {
                    let _ = write!(out, "{c} (");
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        self.term(out, a, 0);
                    }
                    out.push(')');
                }
            }
            Term::Match(s, arms) => self.open(out, ctx, |out| {
                out.push_str("match ");
                self.term(out, s, 0);
                out.push_str(" with");
                for (p, a) in arms {
                    let _ = write!(out, " | {} -> ", pattern(p));
                    self.term(out, a, 2);
                }
                out.push_str(" end");
            }),
            Term::Pred(k, _, args) => self.app(out, ctx, k.name(), args),
            Term::Valid(k, s) => match &**s {
                Term::Cur => {
                    self.term(out, k, ATOM);
                    out.push_str("._valid");
                }
                s => self.app(out, ctx, "valid", &[(**k).clone(), s.clone()]),
            },
            Term::Let(x, _, v, body) => self.open(out, ctx, |out| {
                let _ = write!(out, "let {x} = ");
                self.term(out, v, 0);
                out.push_str(" in ");
                self.term(out, body, 0);
            }),
            Term::IsCtor(c, a) => {
                if ctx >= ATOM {
                    out.push('(');
                }
                let _ = write!(out, "is_{c} ");
                self.term(out, a, ATOM);
                if ctx >= ATOM {
                    out.push(')');
                }
            }
            Term::CtorArg(c, i, _, a) => {
                if ctx >= ATOM {
                    out.push('(');
                }
                let _ = write!(out, "{c}_{i} ");
                self.term(out, a, ATOM);
                if ctx >= ATOM {
                    out.push(')');
                }
            }
        }
    }

    fn open(&self, out: &mut String, ctx: u8, body: impl FnOnce(&mut String)) {
        if ctx > 0 {
            out.push('(');
        }
        body(out);
        if ctx > 0 {
            out.push(')');
        }
    }

    fn app(&self, out: &mut String, ctx: u8, f: &str, args: &[Term]) {
        if args.is_empty() {
            out.push_str(f);
            return;
        }
        if ctx >= ATOM {
            out.push('(');
        }
        out.push_str(f);
        for a in args {
            out.push(' ');
            self.term(out, a, ATOM);
        }
        if ctx >= ATOM {
            out.push(')');
        }
    }

    fn line(&self, out: &mut String, ind: usize) {
        out.push('\n');
        pad(out, ind);
    }

    fn atom(&self, out: &mut String, e: &Expr, ind: usize) {
        match &e.kind {
            ExprKind::Int(n) if *n >= 0 => {
                let _ = write!(out, "{n}");
            }
            ExprKind::Bool(_) | ExprKind::Unit | ExprKind::Var(_) | ExprKind::Read(_) => {
                self.expr(out, e, ind)
            }
            ExprKind::Ctor(_, args) if args.is_empty() => self.expr(out, e, ind),
            _ => {
                out.push('(');
                self.expr(out, e, ind);
                out.push(')');
            }
        }
    }

    fn expr(&self, out: &mut String, e: &Expr, ind: usize) {
        match &e.kind {
            ExprKind::Int(n) => {
                let _ = write!(out, "{n}");
            }
            ExprKind::Bool(b) => {
                let _ = write!(out, "{b}");
            }
            ExprKind::Unit => out.push_str("()"),
            ExprKind::Var(x) => out.push_str(x),
            ExprKind::Read(x) => {
                let _ = write!(out, "!{x}");
            }
            ExprKind::Write(x, v) => {
                let _ = write!(out, "{x} := ");
                self.atom(out, v, ind);
            }
            ExprKind::ArrayGet(a, i) => {
                let _ = write!(out, "{a}[");
                self.expr(out, i, ind);
                out.push(']');
            }
            ExprKind::ArraySet(a, i, v) => {
                let _ = write!(out, "{a}[");
                self.expr(out, i, ind);
                out.push_str("] <- ");
                self.atom(out, v, ind);
            }
            ExprKind::ArrayLength(a) => {
                let _ = write!(out, "length {a}");
            }
            ExprKind::Un(op, a) => {
                out.push_str(if *op == UnOp::Not { "not " } else { "- " });
                self.atom(out, a, ind);
            }
            ExprKind::Bin(op, a, b) => {
                self.atom(out, a, ind);
                let _ = write!(out, " {} ", op.symbol());
                self.atom(out, b, ind);
            }
            ExprKind::Ctor(c, args) => {
                out.push_str(c);
                if !args.is_empty() {
                    out.push_str(" (");
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        self.expr(out, a, ind);
                    }
                    out.push(')');
                }
            }
            ExprKind::Let(x, v, rest) => {
                let _ = write!(out, "let {x} = ");
                self.expr(out, v, ind + 1);
                out.push_str(" in");
                self.line(out, ind);
                self.expr(out, rest, ind);
            }
            ExprKind::Seq(a, b) => {
                self.atom_seq(out, a, ind);
                out.push(';');
                self.line(out, ind);
                self.expr(out, b, ind);
            }
            ExprKind::If(c, t, f) => {
                out.push_str("if ");
                self.expr(out, c, ind + 1);
                out.push_str(" then begin");
                self.line(out, ind + 1);
                self.expr(out, t, ind + 1);
                self.line(out, ind);
                out.push_str("end else begin");
                self.line(out, ind + 1);
                self.expr(out, f, ind + 1);
                self.line(out, ind);
                out.push_str("end");
            }
            ExprKind::Match(s, arms) => {
                out.push_str("match ");
                self.expr(out, s, ind + 1);
                out.push_str(" with");
                for (p, a) in arms {
                    self.line(out, ind);
                    let _ = write!(out, "| {} ->", pattern(p));
                    self.line(out, ind + 1);
                    self.expr(out, a, ind + 1);
                }
                self.line(out, ind);
                out.push_str("end");
            }
            ExprKind::Call(f, args) => {
                out.push_str(f);
                if args.is_empty() {
                    out.push_str(" ()");
                }
                for a in args {
                    out.push(' ');
                    self.atom(out, a, ind);
                }
            }
            ExprKind::Apply(f, a) => {
                out.push_str("apply ");
                self.atom(out, f, ind);
                out.push(' ');
                self.atom(out, a, ind);
            }
            ExprKind::Continue { k, arg, writes } => {
                out.push_str("continue ");
                self.atom(out, k, ind);
                out.push(' ');
                self.atom(out, arg, ind);
                let ws: Vec<String> = writes.iter().map(|f| written(f)).collect();
                let _ = write!(out, " (* writes {{ {} }} *)", ws.join(", "));
            }
            ExprKind::Try {
                body,
                value,
                handlers,
            } => {
                out.push_str("try");
                self.line(out, ind + 1);
                self.expr(out, body, ind + 1);
                self.line(out, ind);
                out.push_str("with");
                if let Some((x, v)) = value {
                    self.line(out, ind);
                    let _ = write!(out, "| {x} ->");
                    self.line(out, ind + 1);
                    self.expr(out, v, ind + 1);
                }
                for h in handlers {
                    self.line(out, ind);
                    let _ = write!(out, "| {}", h.exn);
                    for (x, _) in &h.binders {
                        let _ = write!(out, " {x}");
                    }
                    out.push_str(" ->");
                    self.line(out, ind + 1);
                    self.expr(out, &h.body, ind + 1);
                }
                self.line(out, ind);
                out.push_str("end");
            }
            ExprKind::LetRoutine(r, rest) => {
                self.routine(out, r, ind, "let");
                out.push_str(" in");
                self.line(out, ind);
                self.expr(out, rest, ind);
            }
            ExprKind::Snapshot(x, rest) => {
                let _ = write!(out, "let {x} = ");
                self.record(out, &|f| format!("!{}", &f[1..]));
                out.push_str(" in");
                self.line(out, ind);
                self.expr(out, rest, ind);
            }
        }
    }

    fn atom_seq(&self, out: &mut String, e: &Expr, ind: usize) {
        match &e.kind {
            ExprKind::Let(..)
            | ExprKind::LetRoutine(..)
            | ExprKind::Snapshot(..)
            | ExprKind::Seq(..) => {
                out.push_str("begin");
                self.line(out, ind + 1);
                self.expr(out, e, ind + 1);
                self.line(out, ind);
                out.push_str("end");
            }
            _ => self.expr(out, e, ind),
        }
    }
}
