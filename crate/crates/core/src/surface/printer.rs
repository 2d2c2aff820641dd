//! Pretty-printer whose output reparses to the same tree.
//!
//! Expressions that extend as far right as possible (`let`, `if`, `match`,
//! `try`, `fun`, quantifiers) are printed bare only in tail position; any
//! other position parenthesizes them.

use super::ast::*;
use std::fmt::Write;

const SEQ: u8 = 0;
const STMT: u8 = 1;
const APP: u8 = 7;
const ARG: u8 = 8;

pub fn pretty_print(p: &SourceProgram) -> String {
    let mut out = String::new();
    for (i, d) in p.decls.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        decl(&mut out, d);
        out.push('\n');
    }
    out
}

pub fn print_expr(e: &Expr) -> String {
    let mut pr = Printer {
        out: String::new(),
        indent: 0,
    };
    pr.expr(e, SEQ, true);
    pr.out
}

pub fn print_term(t: &Term) -> String {
    let mut s = String::new();
    term(&mut s, t, 0, true);
    s
}

fn ty_atomic(t: &SourceType) -> String {
    if t.is_arrow() {
        format!("({t})")
    } else {
        t.to_string()
    }
}

fn decl(out: &mut String, d: &Decl) {
    match d {
        Decl::Effect(e) => {
            let _ = write!(out, "effect {} : {}", e.name, e.signature);
        }
        Decl::Type(t) => {
            let _ = write!(out, "type {} =", t.name);
            for (c, args) in &t.ctors {
                let _ = write!(out, "\n  | {c}");
                if !args.is_empty() {
                    let a: Vec<String> = args.iter().map(ty_atomic).collect();
                    let _ = write!(out, " of {}", a.join(" * "));
                }
            }
        }
        Decl::Protocol(pr) => {
            out.push_str("(*@ ");
            protocol(out, pr, "  ");
            out.push_str(" *)");
        }
        Decl::Logic(l) => {
            let kw = if l.ret.is_some() {
                "function"
            } else {
                "predicate"
            };
            let _ = write!(out, "(*@ {kw} {}", l.name);
            for (x, t) in &l.params {
                let _ = write!(out, " ({x} : {t})");
            }
            if let Some(r) = &l.ret {
                let _ = write!(out, " : {r}");
            }
            out.push_str(" =\n    ");
            term(out, &l.body, 0, true);
            out.push_str(" *)");
        }
        Decl::State(s) => {
            let mut pr = Printer {
                out: String::new(),
                indent: 1,
            };
            match &s.init {
                StateInit::Ref(e) => {
                    pr.out.push_str("ref ");
                    pr.expr(e, ARG, false);
                }
                StateInit::Array(n, v) => {
                    pr.out.push_str("Array.make ");
                    pr.expr(n, ARG, false);
                    pr.out.push(' ');
                    pr.expr(v, ARG, false);
                }
            }
            let _ = write!(out, "let {} : {} = {}", s.name, s.ty, pr.out);
        }
        Decl::Fun(f) => {
            let mut pr = Printer {
                out: String::new(),
                indent: 0,
            };
            pr.fun_header(&f.def);
            pr.out.push_str(" =");
            pr.indent = 1;
            pr.newline();
            pr.expr(&f.def.body, SEQ, true);
            pr.indent = 0;
            if !f.def.spec.is_empty() {
                pr.newline();
                pr.spec(&f.def.spec);
            }
            out.push_str(&pr.out);
        }
    }
}

fn protocol(out: &mut String, pr: &Protocol, sep: &str) {
    let _ = write!(out, "protocol {}", pr.effect);
    for p in &pr.params {
        let _ = write!(out, " {p}");
    }
    out.push_str(if pr.braced { " {" } else { " :" });
    for t in &pr.requires {
        let _ = write!(out, "\n{sep}requires ");
        term(out, t, 0, true);
    }
    for t in &pr.ensures {
        let _ = write!(out, "\n{sep}ensures ");
        term(out, t, 0, true);
    }
    if !pr.modifies.is_empty() {
        let _ = write!(out, "\n{sep}modifies {}", pr.modifies.join(", "));
    }
    if pr.braced {
        out.push_str(" }");
    }
}

fn pattern(out: &mut String, p: &Pattern) {
    match p {
        Pattern::Wildcard => out.push('_'),
        Pattern::Var(x) => out.push_str(x),
        Pattern::Ctor(c, args) => {
            out.push_str(c);
            if !args.is_empty() {
                out.push_str(" (");
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    pattern(out, a);
                }
                out.push(')');
            }
        }
    }
}

fn open_term(t: &Term) -> bool {
    matches!(
        t.kind,
        TermKind::Forall(..) | TermKind::Exists(..) | TermKind::If(..) | TermKind::Match(..)
    )
}

/// Levels: 0 iff, 1 implication, 1+p binary operators, 7 prefix/application, 8 atom.
fn term(out: &mut String, t: &Term, lvl: u8, tail: bool) {
    let need = match &t.kind {
        TermKind::Iff(..) => 0,
        TermKind::Implies(..) => 1,
        TermKind::Binary(op, ..) => 1 + op.precedence(),
        TermKind::Unary(..) | TermKind::Old(_) => APP,
        TermKind::App(_, args) if !args.is_empty() => APP,
        TermKind::Int(n) if *n < 0 => SEQ,
        _ if open_term(t) => {
            if tail {
                APP
            } else {
                SEQ
            }
        }
        _ => ARG,
    };
    let paren = lvl > need || (open_term(t) && !tail);
    if paren {
        out.push('(');
    }
    let tail = tail || paren;
    match &t.kind {
        TermKind::Int(n) => {
            let _ = write!(out, "{n}");
        }
        TermKind::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        TermKind::Unit => out.push_str("()"),
        TermKind::Var(x) => out.push_str(x),
        TermKind::Deref(x) => {
            let _ = write!(out, "!{x}");
        }
        TermKind::Old(a) => {
            out.push_str("old ");
            term(out, a, ARG, false);
        }
        TermKind::Get(a, i) => {
            term(out, a, ARG, false);
            out.push('[');
            term(out, i, 0, true);
            out.push(']');
        }
        TermKind::Binary(op, a, b) => {
            let p = 1 + op.precedence();
            let (la, lb) = if op.is_comparison() {
                (p + 1, p + 1)
            } else if matches!(op, BinOp::And | BinOp::Or) {
                (p + 1, p)
            } else {
                (p, p + 1)
            };
            term(out, a, la, false);
            let _ = write!(out, " {} ", op.symbol());
            term(out, b, lb, tail);
        }
        TermKind::Unary(op, a) => {
            out.push_str(match op {
                UnOp::Neg => "-",
                UnOp::Not => "not ",
            });
            term(out, a, if *op == UnOp::Neg { ARG } else { APP }, tail);
        }
        TermKind::Implies(a, b) => {
            term(out, a, 2, false);
            out.push_str(" -> ");
            term(out, b, 1, tail);
        }
        TermKind::Iff(a, b) => {
            term(out, a, 1, false);
            out.push_str(" <-> ");
            term(out, b, 1, tail);
        }
        TermKind::Forall(bs, body) | TermKind::Exists(bs, body) => {
            out.push_str(if matches!(t.kind, TermKind::Forall(..)) {
                "forall"
            } else {
                "exists"
            });
            for (x, ty) in bs {
                let _ = write!(out, " ({x} : {ty})");
            }
            out.push_str(". ");
            term(out, body, 0, true);
        }
        TermKind::App(f, args) => {
            out.push_str(f);
            for a in args {
                out.push(' ');
                term(out, a, ARG, false);
            }
        }
        TermKind::Ctor(c, args) => {
            out.push_str(c);
            if !args.is_empty() {
                out.push_str(" (");
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    term(out, a, 0, true);
                }
                out.push(')');
            }
        }
        TermKind::If(c, a, b) => {
            out.push_str("if ");
            term(out, c, 0, true);
            out.push_str(" then ");
            term(out, a, 0, true);
            out.push_str(" else ");
            term(out, b, 0, true);
        }
        TermKind::Match(s, arms) => {
            out.push_str("match ");
            term(out, s, 0, true);
            out.push_str(" with");
            for (i, (p, a)) in arms.iter().enumerate() {
                out.push_str(" | ");
                pattern(out, p);
                out.push_str(" -> ");
                term(out, a, 1, i + 1 == arms.len());
            }
        }
    }
    if paren {
        out.push(')');
    }
}

struct Printer {
    out: String,
    indent: usize,
}

fn open_expr(e: &Expr) -> bool {
    matches!(
        e.kind,
        ExprKind::Let(..)
            | ExprKind::LetFun(..)
            | ExprKind::If(..)
            | ExprKind::Match(..)
            | ExprKind::Try(..)
            | ExprKind::Fun { .. }
    )
}

fn simple(e: &Expr) -> bool {
    !open_expr(e) && !matches!(e.kind, ExprKind::Seq(..))
}

/// True if a following `(*@ try_ensures` would be claimed by a handler inside `e`.
fn ends_in_bare_try(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Try(h) => h.spec.is_none(),
        ExprKind::Let(_, _, _, r) | ExprKind::LetFun(_, r) | ExprKind::Seq(_, r) => {
            ends_in_bare_try(r)
        }
        ExprKind::Fun { body, .. } => ends_in_bare_try(body),
        ExprKind::If(_, t, f) => ends_in_bare_try(f.as_deref().unwrap_or(t)),
        ExprKind::Match(_, arms) => arms.last().is_some_and(|(_, a)| ends_in_bare_try(a)),
        _ => false,
    }
}

impl Printer {
    fn newline(&mut self) {
        self.out.push('\n');
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
    }

    fn param(&mut self, p: &Param) {
        match (&p.ty, p.name.as_str()) {
            (Some(SourceType::Unit), "()") => self.out.push_str("()"),
            (None, n) => self.out.push_str(n),
            (Some(t), n) => {
                let _ = write!(self.out, "({n} : {t})");
                if p.ghost {
                    self.out.push_str("[@ghost]");
                }
            }
        }
    }

    fn fun_header(&mut self, d: &FunDef) {
        self.out.push_str("let ");
        if d.recursive {
            self.out.push_str("rec ");
        }
        self.out.push_str(&d.name);
        for p in &d.params {
            self.out.push(' ');
            self.param(p);
        }
        if let Some(r) = &d.ret {
            let _ = write!(self.out, " : {r}");
        }
    }

    fn spec(&mut self, s: &SpecClauses) {
        self.out.push_str("(*@");
        self.indent += 1;
        let ind = "  ".repeat(self.indent + 1);
        for t in &s.requires {
            self.newline();
            self.out.push_str("requires ");
            term(&mut self.out, t, 0, true);
        }
        for t in &s.ensures {
            self.newline();
            self.out.push_str("ensures ");
            term(&mut self.out, t, 0, true);
        }
        if !s.modifies.is_empty() {
            self.newline();
            let _ = write!(self.out, "modifies {}", s.modifies.join(", "));
        }
        if !s.performs.is_empty() {
            self.newline();
            let _ = write!(self.out, "performs {}", s.performs.join(", "));
        }
        if let Some(v) = &s.variant {
            self.newline();
            self.out.push_str("variant ");
            term(&mut self.out, v, 0, true);
        }
        for pr in &s.protocols {
            self.newline();
            let mut braced = pr.clone();
            braced.braced = true;
            protocol(&mut self.out, &braced, &ind);
        }
        self.indent -= 1;
        self.out.push_str(" *)");
    }

    /// Levels: 0 sequence, 1 statement, 1+p binary operators, 7 application, 8 atom.
    fn expr(&mut self, e: &Expr, lvl: u8, tail: bool) {
        let need = match &e.kind {
            ExprKind::Seq(..) => SEQ,
            ExprKind::Assign(..) | ExprKind::ArraySet(..) => STMT,
            ExprKind::Binary(op, ..) => 1 + op.precedence(),
            ExprKind::Unary(..) | ExprKind::App(..) | ExprKind::Continue(..) => APP,
            ExprKind::Perform(_, args) if !args.is_empty() => ARG,
            ExprKind::Int(n) if *n < 0 => SEQ,
            _ if open_expr(e) => STMT,
            _ => ARG,
        };
        let paren = lvl > need || (open_expr(e) && !tail);
        if paren {
            self.out.push('(');
        }
        let tail = tail || paren;
        self.expr_inner(e, tail);
        if paren {
            self.out.push(')');
        }
    }

    fn expr_inner(&mut self, e: &Expr, tail: bool) {
        match &e.kind {
            ExprKind::Int(n) => {
                let _ = write!(self.out, "{n}");
            }
            ExprKind::Bool(b) => {
                let _ = write!(self.out, "{b}");
            }
            ExprKind::Unit => self.out.push_str("()"),
            ExprKind::Var(x) => self.out.push_str(x),
            ExprKind::Deref(x) => {
                let _ = write!(self.out, "!{x}");
            }
            ExprKind::ArrayLength(a) => {
                let _ = write!(self.out, "Array.length {a}");
            }
            ExprKind::ArrayGet(a, i) => {
                let _ = write!(self.out, "{a}.(");
                self.expr(i, SEQ, true);
                self.out.push(')');
            }
            ExprKind::ArraySet(a, i, v) => {
                let _ = write!(self.out, "{a}.(");
                self.expr(i, SEQ, true);
                self.out.push_str(") <- ");
                self.expr(v, 2, tail);
            }
            ExprKind::Assign(x, v) => {
                let _ = write!(self.out, "{x} := ");
                self.expr(v, 2, tail);
            }
            ExprKind::Binary(op, a, b) => {
                let p = 1 + op.precedence();
                let (la, lb) = if op.is_comparison() {
                    (p + 1, p + 1)
                } else if matches!(op, BinOp::And | BinOp::Or) {
                    (p + 1, p)
                } else {
                    (p, p + 1)
                };
                self.expr(a, la, false);
                let _ = write!(self.out, " {} ", op.symbol());
                self.expr(b, lb, tail);
            }
            ExprKind::Unary(op, a) => {
                self.out.push_str(match op {
                    UnOp::Neg => "-",
                    UnOp::Not => "not ",
                });
                self.expr(a, if *op == UnOp::Neg { ARG } else { APP }, tail);
            }
            ExprKind::Seq(a, b) => {
                self.expr(a, STMT, false);
                self.out.push(';');
                self.newline();
                self.expr(b, SEQ, tail);
            }
            ExprKind::Let(x, ty, v, rest) => {
                let _ = write!(self.out, "let {x}");
                if let Some(t) = ty {
                    let _ = write!(self.out, " : {t}");
                }
                if simple(v) {
                    self.out.push_str(" = ");
                    self.expr(v, SEQ, true);
                    self.out.push_str(" in");
                } else {
                    self.out.push_str(" =");
                    self.indent += 1;
                    self.newline();
                    self.expr(v, SEQ, true);
                    self.indent -= 1;
                    self.newline();
                    self.out.push_str("in");
                }
                self.newline();
                self.expr(rest, SEQ, tail);
            }
            ExprKind::LetFun(d, rest) => {
                self.fun_header(d);
                self.out.push_str(" =");
                self.indent += 1;
                self.newline();
                self.expr(&d.body, SEQ, true);
                self.indent -= 1;
                if !d.spec.is_empty() {
                    self.newline();
                    self.spec(&d.spec);
                }
                self.newline();
                self.out.push_str("in");
                self.newline();
                self.expr(rest, SEQ, tail);
            }
            ExprKind::Fun {
                spec,
                param,
                ret,
                body,
            } => {
                self.out.push_str("fun ");
                if !spec.is_empty() {
                    self.spec(spec);
                    self.out.push(' ');
                }
                self.param(param);
                if let Some(r) = ret {
                    let _ = write!(self.out, " : {}", ty_atomic(r));
                }
                self.out.push_str(" ->");
                self.indent += 1;
                self.newline();
                self.expr(body, SEQ, tail);
                self.indent -= 1;
            }
            ExprKind::App(c, args) => {
                self.expr(c, ARG, false);
                for a in args {
                    self.out.push(' ');
                    self.expr(a, ARG, false);
                }
            }
            ExprKind::If(c, t, f) => {
                self.out.push_str("if ");
                self.expr(c, SEQ, true);
                self.out.push_str(" then");
                self.indent += 1;
                self.newline();
                self.expr(t, STMT, f.is_none() && tail);
                self.indent -= 1;
                if let Some(f) = f {
                    self.newline();
                    self.out.push_str("else");
                    self.indent += 1;
                    self.newline();
                    self.expr(f, STMT, tail);
                    self.indent -= 1;
                }
            }
            ExprKind::Match(s, arms) => {
                self.out.push_str("match ");
                self.expr(s, SEQ, true);
                self.out.push_str(" with");
                for (i, (p, a)) in arms.iter().enumerate() {
                    self.newline();
                    self.out.push_str("| ");
                    pattern(&mut self.out, p);
                    self.out.push_str(" ->");
                    self.indent += 1;
                    self.newline();
                    self.expr(a, SEQ, tail && i + 1 == arms.len());
                    self.indent -= 1;
                }
            }
            ExprKind::Ctor(c, args) => {
                self.out.push_str(c);
                if !args.is_empty() {
                    self.out.push_str(" (");
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            self.out.push_str(", ");
                        }
                        self.expr(a, SEQ, true);
                    }
                    self.out.push(')');
                }
            }
            ExprKind::Perform(eff, args) => {
                if args.is_empty() {
                    let _ = write!(self.out, "perform {eff}");
                } else {
                    let _ = write!(self.out, "perform ({eff}");
                    for a in args {
                        self.out.push(' ');
                        self.expr(a, ARG, false);
                    }
                    self.out.push(')');
                }
            }
            ExprKind::Continue(k, a) => {
                let _ = write!(self.out, "continue {k} ");
                self.expr(a, ARG, false);
            }
            ExprKind::Try(h) => self.handler(h, tail),
        }
    }

    fn handler(&mut self, h: &Handler, tail: bool) {
        if simple(&h.body) {
            self.out.push_str("try ");
            self.expr(&h.body, SEQ, true);
            self.out.push_str(" with");
        } else {
            self.out.push_str("try");
            self.indent += 1;
            self.newline();
            self.expr(&h.body, SEQ, true);
            self.indent -= 1;
            self.newline();
            self.out.push_str("with");
        }
        let n = h.branches.len() + usize::from(h.value_branch.is_some());
        let last_tail = match h.spec {
            None => tail,
            Some(_) => !h.value_branch.as_ref().map_or_else(
                || h.branches.last().is_some_and(|b| ends_in_bare_try(&b.body)),
                |(_, v)| ends_in_bare_try(v),
            ),
        };
        for (i, b) in h.branches.iter().enumerate() {
            self.newline();
            if b.binders.is_empty() {
                let _ = write!(self.out, "| effect {} {} ->", b.effect, b.cont);
            } else {
                let _ = write!(
                    self.out,
                    "| effect ({} {}) {} ->",
                    b.effect,
                    b.binders.join(" "),
                    b.cont
                );
            }
            self.indent += 1;
            self.newline();
            self.expr(&b.body, SEQ, last_tail && i + 1 == n);
            self.indent -= 1;
        }
        if let Some((x, v)) = &h.value_branch {
            self.newline();
            let _ = write!(self.out, "| {x} ->");
            self.indent += 1;
            self.newline();
            self.expr(v, SEQ, last_tail);
            self.indent -= 1;
        }
        if let Some(s) = &h.spec {
            self.newline();
            self.out.push_str("(*@");
            for t in &s.try_ensures {
                self.out.push_str(" try_ensures ");
                term(&mut self.out, t, 0, true);
            }
            if let Some(r) = &s.returns {
                let _ = write!(self.out, " returns {r}");
            }
            self.out.push_str(" *)");
        }
    }
}
