//! First-order target IR: exceptions, abstract and concrete routines,
//! predicates over an explicit state record, and the closure/continuation
//! encoding through uninterpreted `pre`/`post` families.

mod print;
mod wf;

use std::fmt;

use crate::surface::{BinOp, Pattern, Span, UnOp};

pub use print::{print_decl, print_program, print_term};
pub use wf::{wf_check, WfError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IrType {
    Int,
    Bool,
    Unit,
    Data(String),
    /// Element type; only state arrays have this type.
    Array(Box<IrType>),
    /// The state record.
    State,
    /// `continuation arg result`
    Cont(Box<IrType>, Box<IrType>),
    /// `lambda arg result`, produced by defunctionalization.
    Lambda(Box<IrType>, Box<IrType>),
}

impl IrType {
    pub fn cont(a: IrType, b: IrType) -> IrType {
        IrType::Cont(Box::new(a), Box::new(b))
    }

    pub fn lambda(a: IrType, b: IrType) -> IrType {
        IrType::Lambda(Box::new(a), Box::new(b))
    }

    pub fn is_closure(&self) -> bool {
        matches!(self, IrType::Cont(..) | IrType::Lambda(..))
    }

    /// Identifier-safe rendering, unique per type.
    pub fn tag(&self) -> String {
        match self {
            IrType::Int => "int".into(),
            IrType::Bool => "bool".into(),
            IrType::Unit => "unit".into(),
            IrType::Data(n) => n.clone(),
            IrType::Array(t) => format!("arr_{}", t.tag()),
            IrType::State => "state".into(),
            IrType::Cont(a, b) => format!("k_{}_{}_", a.tag(), b.tag()),
            IrType::Lambda(a, b) => format!("f_{}_{}_", a.tag(), b.tag()),
        }
    }
}

impl fmt::Display for IrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IrType::Int => write!(f, "int"),
            IrType::Bool => write!(f, "bool"),
            IrType::Unit => write!(f, "unit"),
            IrType::Data(n) => write!(f, "{n}"),
            IrType::Array(t) => write!(f, "array {}", Paren(t)),
            IrType::State => write!(f, "state"),
            IrType::Cont(a, b) => write!(f, "continuation {} {}", Paren(a), Paren(b)),
            IrType::Lambda(a, b) => write!(f, "lambda {} {}", Paren(a), Paren(b)),
        }
    }
}

struct Paren<'a>(&'a IrType);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            IrType::Array(_) | IrType::Cont(..) | IrType::Lambda(..) => write!(f, "({})", self.0),
            t => write!(f, "{t}"),
        }
    }
}

/// Logical connectives and arithmetic on terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Implies,
    Iff,
}

impl LOp {
    pub fn from_binop(op: BinOp) -> LOp {
        match op {
            BinOp::Add => LOp::Add,
            BinOp::Sub => LOp::Sub,
            BinOp::Mul => LOp::Mul,
            BinOp::Div => LOp::Div,
            BinOp::Mod => LOp::Mod,
            BinOp::Eq => LOp::Eq,
            BinOp::Ne => LOp::Ne,
            BinOp::Lt => LOp::Lt,
            BinOp::Le => LOp::Le,
            BinOp::Gt => LOp::Gt,
            BinOp::Ge => LOp::Ge,
            BinOp::And => LOp::And,
            BinOp::Or => LOp::Or,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            LOp::Add => "+",
            LOp::Sub => "-",
            LOp::Mul => "*",
            LOp::Div => "div",
            LOp::Mod => "mod",
            LOp::Eq => "=",
            LOp::Ne => "<>",
            LOp::Lt => "<",
            LOp::Le => "<=",
            LOp::Gt => ">",
            LOp::Ge => ">=",
            LOp::And => "&&",
            LOp::Or => "||",
            LOp::Implies => "->",
            LOp::Iff => "<->",
        }
    }

    pub fn is_logical(self) -> bool {
        matches!(self, LOp::And | LOp::Or | LOp::Implies | LOp::Iff)
    }
}

/// Closure predicate family: `pre f arg state` or `post f arg old state result`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PredKind {
    Pre,
    Post,
}

impl PredKind {
    pub fn arity(self) -> usize {
        match self {
            PredKind::Pre => 3,
            PredKind::Post => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PredKind::Pre => "pre",
            PredKind::Post => "post",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Int(i64),
    Bool(bool),
    Unit,
    Var(String, IrType),
    /// The current state record (`{_x = !x; ...}`).
    Cur,
    /// The state record at routine entry.
    Old,
    /// `s._x`
    Field(Box<Term>, String),
    /// `{_x = t; ...}` over every state field, in record order.
    Record(Vec<(String, Term)>),
    /// `a[i]`
    Select(Box<Term>, Box<Term>),
    /// `a[i <- v]`
    Store(Box<Term>, Box<Term>, Box<Term>),
    /// Length of a state array; arrays never change length.
    Length(String),
    Bin(LOp, Box<Term>, Box<Term>),
    Un(UnOp, Box<Term>),
    Ite(Box<Term>, Box<Term>, Box<Term>),
    Forall(Vec<(String, IrType)>, Vec<Term>, Box<Term>),
    Exists(Vec<(String, IrType)>, Box<Term>),
    /// Logic function or predicate application.
    App(String, Vec<Term>),
    Ctor(String, Vec<Term>, IrType),
    Match(Box<Term>, Vec<(Pattern, Term)>),
    /// `pre`/`post` applied to a closure or continuation of type `ty`.
    Pred(PredKind, IrType, Vec<Term>),
    /// `valid k` in the given state.
    Valid(Box<Term>, Box<Term>),
    /// `let x = v in t`
    Let(String, IrType, Box<Term>, Box<Term>),
    /// Constructor test.
    IsCtor(String, Box<Term>),
    /// `i`-th field of a value built with the constructor.
    CtorArg(String, usize, IrType, Box<Term>),
}

impl Term {
    pub fn var(x: &str, t: IrType) -> Term {
        Term::Var(x.to_string(), t)
    }

    pub fn bin(op: LOp, a: Term, b: Term) -> Term {
        Term::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn field(s: Term, x: &str) -> Term {
        Term::Field(Box::new(s), x.to_string())
    }

    pub fn not(a: Term) -> Term {
        Term::Un(UnOp::Not, Box::new(a))
    }

    pub fn eq(a: Term, b: Term) -> Term {
        Term::bin(LOp::Eq, a, b)
    }

    pub fn implies(a: Term, b: Term) -> Term {
        Term::bin(LOp::Implies, a, b)
    }

    pub fn iff(a: Term, b: Term) -> Term {
        Term::bin(LOp::Iff, a, b)
    }

    pub fn select(a: Term, i: Term) -> Term {
        Term::Select(Box::new(a), Box::new(i))
    }

    pub fn valid(k: Term, s: Term) -> Term {
        Term::Valid(Box::new(k), Box::new(s))
    }

    pub fn ite(c: Term, a: Term, b: Term) -> Term {
        Term::Ite(Box::new(c), Box::new(a), Box::new(b))
    }

    /// Conjunction; an empty list is `true`.
    pub fn and_all(ts: impl IntoIterator<Item = Term>) -> Term {
        let mut ts: Vec<Term> = ts.into_iter().collect();
        match ts.len() {
            0 => Term::Bool(true),
            _ => {
                let mut acc = ts.pop().unwrap();
                while let Some(t) = ts.pop() {
                    acc = Term::bin(LOp::And, t, acc);
                }
                acc
            }
        }
    }

    pub fn forall(bs: Vec<(String, IrType)>, triggers: Vec<Term>, body: Term) -> Term {
        if bs.is_empty() {
            body
        } else {
            Term::Forall(bs, triggers, Box::new(body))
        }
    }

    /// Visits every subterm in pre-order.
    pub fn walk(&self, f: &mut dyn FnMut(&Term)) {
        f(self);
        match self {
            Term::Int(_)
            | Term::Bool(_)
            | Term::Unit
            | Term::Var(..)
            | Term::Cur
            | Term::Old
            | Term::Length(_) => {}
            Term::Field(a, _)
            | Term::Un(_, a)
            | Term::Exists(_, a)
            | Term::IsCtor(_, a)
            | Term::CtorArg(_, _, _, a) => a.walk(f),
            Term::Let(_, _, v, b) => {
                v.walk(f);
                b.walk(f);
            }
            Term::Record(fs) => fs.iter().for_each(|(_, t)| t.walk(f)),
            Term::Select(a, b) | Term::Bin(_, a, b) | Term::Valid(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Term::Store(a, b, c) | Term::Ite(a, b, c) => {
                a.walk(f);
                b.walk(f);
                c.walk(f);
            }
            Term::Forall(_, trs, b) => {
                trs.iter().for_each(|t| t.walk(f));
                b.walk(f);
            }
            Term::App(_, args) | Term::Ctor(_, args, _) | Term::Pred(_, _, args) => {
                args.iter().for_each(|t| t.walk(f))
            }
            Term::Match(s, arms) => {
                s.walk(f);
                arms.iter().for_each(|(_, t)| t.walk(f));
            }
        }
    }

    /// Rebuilds the term bottom-up, giving `f` the first chance at each node.
    pub fn map(&self, f: &mut dyn FnMut(&Term) -> Option<Term>) -> Term {
        if let Some(t) = f(self) {
            return t;
        }
        let b = |t: &Term, f: &mut dyn FnMut(&Term) -> Option<Term>| Box::new(t.map(f));
        match self {
            Term::Int(_)
            | Term::Bool(_)
            | Term::Unit
            | Term::Var(..)
            | Term::Cur
            | Term::Old
            | Term::Length(_) => self.clone(),
            Term::Field(a, x) => Term::Field(b(a, f), x.clone()),
            Term::Record(fs) => {
                Term::Record(fs.iter().map(|(x, t)| (x.clone(), t.map(f))).collect())
            }
            Term::Select(a, i) => Term::Select(b(a, f), b(i, f)),
            Term::Store(a, i, v) => Term::Store(b(a, f), b(i, f), b(v, f)),
            Term::Bin(op, x, y) => Term::Bin(*op, b(x, f), b(y, f)),
            Term::Un(op, x) => Term::Un(*op, b(x, f)),
            Term::Ite(c, x, y) => Term::Ite(b(c, f), b(x, f), b(y, f)),
            Term::Forall(bs, trs, body) => Term::Forall(
                bs.clone(),
                trs.iter().map(|t| t.map(f)).collect(),
                b(body, f),
            ),
            Term::Exists(bs, body) => Term::Exists(bs.clone(), b(body, f)),
            Term::App(n, args) => Term::App(n.clone(), args.iter().map(|t| t.map(f)).collect()),
            Term::Ctor(c, args, t) => Term::Ctor(
                c.clone(),
                args.iter().map(|a| a.map(f)).collect(),
                t.clone(),
            ),
            Term::Match(s, arms) => Term::Match(
                b(s, f),
                arms.iter().map(|(p, t)| (p.clone(), t.map(f))).collect(),
            ),
            Term::Pred(k, t, args) => {
                Term::Pred(*k, t.clone(), args.iter().map(|a| a.map(f)).collect())
            }
            Term::Valid(k, s) => Term::Valid(b(k, f), b(s, f)),
            Term::Let(x, t, v, body) => Term::Let(x.clone(), t.clone(), b(v, f), b(body, f)),
            Term::IsCtor(c, a) => Term::IsCtor(c.clone(), b(a, f)),
            Term::CtorArg(c, i, t, a) => Term::CtorArg(c.clone(), *i, t.clone(), b(a, f)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub id: u32,
    pub span: Span,
    pub ty: IrType,
    pub kind: ExprKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExnHandler {
    pub exn: String,
    pub binders: Vec<(String, IrType)>,
    pub body: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Unit,
    Var(String),
    /// `!x`
    Read(String),
    /// `x := e`
    Write(String, Box<Expr>),
    ArrayGet(String, Box<Expr>),
    ArraySet(String, Box<Expr>, Box<Expr>),
    ArrayLength(String),
    Un(UnOp, Box<Expr>),
    /// Arithmetic and comparisons; `&&`/`||` are lowered to `if`.
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Ctor(String, Vec<Expr>),
    Let(String, Box<Expr>, Box<Expr>),
    Seq(Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Match(Box<Expr>, Vec<(Pattern, Expr)>),
    /// Direct call of a routine.
    Call(String, Vec<Expr>),
    /// `apply f arg` on a defunctionalized closure.
    Apply(Box<Expr>, Box<Expr>),
    /// The abstract continue routine; `writes` lists the record fields it havocs.
    Continue {
        k: Box<Expr>,
        arg: Box<Expr>,
        writes: Vec<String>,
    },
    /// `value` runs on normal completion of `body`, outside the handlers.
    Try {
        body: Box<Expr>,
        value: Option<(String, Box<Expr>)>,
        handlers: Vec<ExnHandler>,
    },
    /// Local concrete or abstract routine.
    LetRoutine(Box<Routine>, Box<Expr>),
    /// `let name = {_x = !x; ...} in e`
    Snapshot(String, Box<Expr>),
}

impl Expr {
    /// Visits every expression node in pre-order, including local routine bodies.
    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Int(_)
            | ExprKind::Bool(_)
            | ExprKind::Unit
            | ExprKind::Var(_)
            | ExprKind::Read(_)
            | ExprKind::ArrayLength(_) => {}
            ExprKind::Write(_, a)
            | ExprKind::ArrayGet(_, a)
            | ExprKind::Un(_, a)
            | ExprKind::Snapshot(_, a) => a.walk(f),
            ExprKind::ArraySet(_, a, b)
            | ExprKind::Bin(_, a, b)
            | ExprKind::Let(_, a, b)
            | ExprKind::Seq(a, b)
            | ExprKind::Apply(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            ExprKind::Continue { k, arg, .. } => {
                k.walk(f);
                arg.walk(f);
            }
            ExprKind::Ctor(_, args) | ExprKind::Call(_, args) => {
                args.iter().for_each(|a| a.walk(f))
            }
            ExprKind::If(c, t, e) => {
                c.walk(f);
                t.walk(f);
                e.walk(f);
            }
            ExprKind::Match(s, arms) => {
                s.walk(f);
                arms.iter().for_each(|(_, a)| a.walk(f));
            }
            ExprKind::Try {
                body,
                value,
                handlers,
            } => {
                body.walk(f);
                if let Some((_, v)) = value {
                    v.walk(f);
                }
                handlers.iter().for_each(|h| h.body.walk(f));
            }
            ExprKind::LetRoutine(r, rest) => {
                if let Some(b) = &r.body {
                    b.walk(f);
                }
                rest.walk(f);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raises {
    pub exn: String,
    pub binders: Vec<(String, IrType)>,
    pub post: Term,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Contract {
    pub requires: Vec<Term>,
    /// May mention `result`.
    pub ensures: Vec<Term>,
    pub raises: Vec<Raises>,
    /// `None`: writes are inferred and not checked.
    pub writes: Option<Vec<String>>,
    pub variant: Option<Term>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoutineKind {
    Function,
    /// Local function from a `let ... in`; verified with a fresh store.
    Local,
    /// Body of a `try`; verified in the store of its single call site.
    Handler,
    /// Body of an anonymous function.
    Lambda,
    /// `perform_E`; raising leaves the store untouched.
    Perform,
    /// `gen_k` or `gen_f`.
    Generator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Routine {
    pub name: String,
    pub params: Vec<(String, IrType)>,
    pub ret: IrType,
    pub contract: Contract,
    /// `None` for abstract routines.
    pub body: Option<Expr>,
    pub kind: RoutineKind,
    pub recursive: bool,
    /// Effective write set used by callers; covers inferred writes.
    pub effective_writes: Vec<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogicDef {
    pub name: String,
    pub params: Vec<(String, IrType)>,
    /// `Bool` for predicates.
    pub ret: IrType,
    pub body: Term,
    pub recursive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    /// One mutually recursive group.
    Datatypes(Vec<(String, Vec<(String, Vec<IrType>)>)>),
    /// Fields in state-model order, then validity fields.
    State(Vec<(String, IrType)>),
    Exception(String, Vec<IrType>),
    Logic(LogicDef),
    Routine(Routine),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IrProgram {
    pub decls: Vec<Decl>,
}

impl IrProgram {
    pub fn state_fields(&self) -> &[(String, IrType)] {
        self.decls
            .iter()
            .find_map(|d| match d {
                Decl::State(fs) => Some(fs.as_slice()),
                _ => None,
            })
            .unwrap_or(&[])
    }

    pub fn routines(&self) -> impl Iterator<Item = &Routine> {
        self.decls.iter().filter_map(|d| match d {
            Decl::Routine(r) => Some(r),
            _ => None,
        })
    }

    pub fn routine(&self, name: &str) -> Option<&Routine> {
        self.routines().find(|r| r.name == name)
    }

    pub fn logic(&self, name: &str) -> Option<&LogicDef> {
        self.decls.iter().find_map(|d| match d {
            Decl::Logic(l) if l.name == name => Some(l),
            _ => None,
        })
    }

    pub fn datatypes(&self) -> impl Iterator<Item = &(String, Vec<(String, Vec<IrType>)>)> {
        self.decls.iter().flat_map(|d| match d {
            Decl::Datatypes(ds) => ds.as_slice(),
            _ => &[],
        })
    }

    pub fn exception(&self, name: &str) -> Option<&[IrType]> {
        self.decls.iter().find_map(|d| match d {
            Decl::Exception(n, args) if n == name => Some(args.as_slice()),
            _ => None,
        })
    }
}

/// Record field name of a state variable.
pub fn field_name(var: &str) -> String {
    format!("_{var}")
}

/// Record field holding the validity map of continuations of type `k`.
pub fn validity_field(k: &IrType) -> String {
    format!("_valid_{}", k.tag())
}

/// Types of state fields, logic symbols and constructors, for term typing.
#[derive(Debug, Clone, Default)]
pub struct TypeEnv {
    pub fields: std::collections::BTreeMap<String, IrType>,
    pub logic: std::collections::BTreeMap<String, IrType>,
    /// Constructor to (datatype, field types).
    pub ctors: std::collections::BTreeMap<String, (IrType, Vec<IrType>)>,
}

impl TypeEnv {
    pub fn of_program(p: &IrProgram) -> TypeEnv {
        let mut env = TypeEnv::default();
        env.fields = p.state_fields().iter().cloned().collect();
        for d in &p.decls {
            if let Decl::Logic(l) = d {
                env.logic.insert(l.name.clone(), l.ret.clone());
            }
        }
        for (name, ctors) in p.datatypes() {
            for (c, args) in ctors {
                env.ctors
                    .insert(c.clone(), (IrType::Data(name.clone()), args.clone()));
            }
        }
        env
    }

    pub fn type_of(&self, t: &Term) -> IrType {
        match t {
            Term::Int(_) | Term::Length(_) => IrType::Int,
            Term::Bool(_)
            | Term::Forall(..)
            | Term::Exists(..)
            | Term::Pred(..)
            | Term::Valid(..)
            | Term::IsCtor(..)
            | Term::Un(UnOp::Not, _) => IrType::Bool,
            Term::Un(UnOp::Neg, _) => IrType::Int,
            Term::Unit => IrType::Unit,
            Term::Var(_, t) | Term::Ctor(_, _, t) | Term::CtorArg(_, _, t, _) => t.clone(),
            Term::Cur | Term::Old | Term::Record(_) => IrType::State,
            Term::Field(_, f) => match self.fields.get(f) {
                Some(k) if f.starts_with("_valid_") => IrType::Array(Box::new(k.clone())),
                Some(t) => t.clone(),
                None => IrType::Unit,
            },
            Term::Select(a, _) => match self.type_of(a) {
                IrType::Array(e) if e.is_closure() => IrType::Bool,
                IrType::Array(e) => *e,
                other => other,
            },
            Term::Store(a, _, _) => self.type_of(a),
            Term::Bin(op, _, _) => match op {
                LOp::Add | LOp::Sub | LOp::Mul | LOp::Div | LOp::Mod => IrType::Int,
                _ => IrType::Bool,
            },
            Term::Ite(_, a, _) | Term::Let(_, _, _, a) => self.type_of(a),
            Term::App(f, _) => self.logic.get(f).cloned().unwrap_or(IrType::Bool),
            Term::Match(_, arms) => arms
                .first()
                .map(|(_, a)| self.type_of(a))
                .unwrap_or(IrType::Unit),
        }
    }
}

impl Expr {
    /// Mutable pre-order traversal, including local routine bodies.
    pub fn walk_mut(&mut self, f: &mut dyn FnMut(&mut Expr)) {
        f(self);
        match &mut self.kind {
            ExprKind::Int(_)
            | ExprKind::Bool(_)
            | ExprKind::Unit
            | ExprKind::Var(_)
            | ExprKind::Read(_)
            | ExprKind::ArrayLength(_) => {}
            ExprKind::Write(_, a)
            | ExprKind::ArrayGet(_, a)
            | ExprKind::Un(_, a)
            | ExprKind::Snapshot(_, a) => a.walk_mut(f),
            ExprKind::ArraySet(_, a, b)
            | ExprKind::Bin(_, a, b)
            | ExprKind::Let(_, a, b)
            | ExprKind::Seq(a, b)
            | ExprKind::Apply(a, b) => {
                a.walk_mut(f);
                b.walk_mut(f);
            }
            ExprKind::Continue { k, arg, .. } => {
                k.walk_mut(f);
                arg.walk_mut(f);
            }
            ExprKind::Ctor(_, args) | ExprKind::Call(_, args) => {
                args.iter_mut().for_each(|a| a.walk_mut(f))
            }
            ExprKind::If(c, t, e) => {
                c.walk_mut(f);
                t.walk_mut(f);
                e.walk_mut(f);
            }
            ExprKind::Match(s, arms) => {
                s.walk_mut(f);
                arms.iter_mut().for_each(|(_, a)| a.walk_mut(f));
            }
            ExprKind::Try {
                body,
                value,
                handlers,
            } => {
                body.walk_mut(f);
                if let Some((_, v)) = value {
                    v.walk_mut(f);
                }
                handlers.iter_mut().for_each(|h| h.body.walk_mut(f));
            }
            ExprKind::LetRoutine(r, rest) => {
                if let Some(b) = &mut r.body {
                    b.walk_mut(f);
                }
                rest.walk_mut(f);
            }
        }
    }
}

fn pattern_binders(p: &Pattern, out: &mut Vec<String>) {
    p.binders(out)
}

impl Term {
    /// Free variables with their types, in first-occurrence order.
    pub fn free_vars(&self) -> Vec<(String, IrType)> {
        let mut out = Vec::new();
        let mut bound = Vec::new();
        self.collect_free(&mut bound, &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut Vec<(String, IrType)>) {
        match self {
            Term::Var(x, t) => {
                if !bound.contains(x) && !out.iter().any(|(y, _)| y == x) {
                    out.push((x.clone(), t.clone()));
                }
            }
            Term::Forall(bs, trs, body) => {
                let n = bound.len();
                bound.extend(bs.iter().map(|(x, _)| x.clone()));
                trs.iter().for_each(|t| t.collect_free(bound, out));
                body.collect_free(bound, out);
                bound.truncate(n);
            }
            Term::Exists(bs, body) => {
                let n = bound.len();
                bound.extend(bs.iter().map(|(x, _)| x.clone()));
                body.collect_free(bound, out);
                bound.truncate(n);
            }
            Term::Let(x, _, v, body) => {
                v.collect_free(bound, out);
                bound.push(x.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            Term::Match(s, arms) => {
                s.collect_free(bound, out);
                for (p, a) in arms {
                    let n = bound.len();
                    pattern_binders(p, bound);
                    a.collect_free(bound, out);
                    bound.truncate(n);
                }
            }
            _ => self
                .children()
                .into_iter()
                .for_each(|c| c.collect_free(bound, out)),
        }
    }

    /// Immediate subterms of non-binding forms.
    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Int(_)
            | Term::Bool(_)
            | Term::Unit
            | Term::Var(..)
            | Term::Cur
            | Term::Old
            | Term::Length(_) => Vec::new(),
            Term::Field(a, _) | Term::Un(_, a) | Term::IsCtor(_, a) | Term::CtorArg(_, _, _, a) => {
                vec![a]
            }
            Term::Record(fs) => fs.iter().map(|(_, t)| t).collect(),
            Term::Select(a, b) | Term::Bin(_, a, b) | Term::Valid(a, b) => vec![a, b],
            Term::Store(a, b, c) | Term::Ite(a, b, c) => vec![a, b, c],
            Term::App(_, args) | Term::Ctor(_, args, _) | Term::Pred(_, _, args) => {
                args.iter().collect()
            }
            Term::Forall(_, _, b) | Term::Exists(_, b) => vec![b],
            Term::Let(_, _, v, b) => vec![v, b],
            Term::Match(s, arms) => std::iter::once(&**s)
                .chain(arms.iter().map(|(_, t)| t))
                .collect(),
        }
    }

    /// Capture-avoiding substitution of free variables.
    pub fn subst(&self, sigma: &[(String, Term)]) -> Term {
        if sigma.is_empty() {
            return self.clone();
        }
        let without = |names: &[String]| -> Vec<(String, Term)> {
            sigma
                .iter()
                .filter(|(x, _)| !names.contains(x))
                .cloned()
                .collect()
        };
        match self {
            Term::Var(x, _) => match sigma.iter().rev().find(|(y, _)| y == x) {
                Some((_, t)) => t.clone(),
                None => self.clone(),
            },
            Term::Forall(bs, trs, body) => {
                let (bs, renames) = avoid_capture(bs, sigma);
                let inner: Vec<(String, Term)> = renames
                    .into_iter()
                    .chain(without(
                        &bs.iter().map(|(x, _)| x.clone()).collect::<Vec<_>>(),
                    ))
                    .collect();
                Term::Forall(
                    bs,
                    trs.iter().map(|t| t.subst(&inner)).collect(),
                    Box::new(body.subst(&inner)),
                )
            }
            Term::Exists(bs, body) => {
                let (bs, renames) = avoid_capture(bs, sigma);
                let inner: Vec<(String, Term)> = renames
                    .into_iter()
                    .chain(without(
                        &bs.iter().map(|(x, _)| x.clone()).collect::<Vec<_>>(),
                    ))
                    .collect();
                Term::Exists(bs, Box::new(body.subst(&inner)))
            }
            Term::Let(x, t, v, body) => {
                let v = v.subst(sigma);
                let (bs, renames) = avoid_capture(&[(x.clone(), t.clone())], sigma);
                let inner: Vec<(String, Term)> = renames
                    .into_iter()
                    .chain(without(&[bs[0].0.clone()]))
                    .collect();
                Term::Let(
                    bs[0].0.clone(),
                    t.clone(),
                    Box::new(v),
                    Box::new(body.subst(&inner)),
                )
            }
            Term::Match(s, arms) => Term::Match(
                Box::new(s.subst(sigma)),
                arms.iter()
                    .map(|(p, a)| {
                        let mut bs = Vec::new();
                        p.binders(&mut bs);
                        (p.clone(), a.subst(&without(&bs)))
                    })
                    .collect(),
            ),
            _ => self.map(&mut |t| match t {
                Term::Var(..)
                | Term::Forall(..)
                | Term::Exists(..)
                | Term::Let(..)
                | Term::Match(..) => Some(t.subst(sigma)),
                _ => None,
            }),
        }
    }
}

/// Renames binders that would capture a free variable of the substituted terms.
fn avoid_capture(
    bs: &[(String, IrType)],
    sigma: &[(String, Term)],
) -> (Vec<(String, IrType)>, Vec<(String, Term)>) {
    let mut incoming = Vec::new();
    for (x, t) in sigma {
        if !bs.iter().any(|(b, _)| b == x) {
            incoming.extend(t.free_vars().into_iter().map(|(v, _)| v));
        }
    }
    let mut out = Vec::new();
    let mut renames = Vec::new();
    for (x, ty) in bs {
        if incoming.contains(x) {
            let mut i = 1;
            let fresh = loop {
                let c = format!("{x}{i}");
                if !incoming.contains(&c) && !bs.iter().any(|(b, _)| *b == c) {
                    break c;
                }
                i += 1;
            };
            renames.push((x.clone(), Term::Var(fresh.clone(), ty.clone())));
            out.push((fresh, ty.clone()));
        } else {
            out.push((x.clone(), ty.clone()));
        }
    }
    (out, renames)
}
