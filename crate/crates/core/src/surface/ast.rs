//! Abstract syntax of the source language and of its specification sublanguage.

use std::fmt;

/// Byte range into the source file, plus the 1-based line/column of its start.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn to(self, other: Span) -> Span {
        Span {
            start: self.start,
            end: other.end.max(self.end),
            line: self.line,
            col: self.col,
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Identifies an expression node; types and rule traces are keyed by it.
pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SourceType {
    Int,
    Bool,
    Unit,
    Named(String),
    Ref(Box<SourceType>),
    Array(Box<SourceType>),
    Arrow(Box<SourceType>, Box<SourceType>),
    /// Only produced by the checker for continuation identifiers.
    Cont(Box<SourceType>, Box<SourceType>),
}

impl SourceType {
    pub fn arrow(a: SourceType, b: SourceType) -> SourceType {
        SourceType::Arrow(Box::new(a), Box::new(b))
    }

    pub fn is_arrow(&self) -> bool {
        matches!(self, SourceType::Arrow(..))
    }
}

impl fmt::Display for SourceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceType::Int => write!(f, "int"),
            SourceType::Bool => write!(f, "bool"),
            SourceType::Unit => write!(f, "unit"),
            SourceType::Named(n) => write!(f, "{n}"),
            SourceType::Ref(t) => write!(f, "{} ref", Atomic(t)),
            SourceType::Array(t) => write!(f, "{} array", Atomic(t)),
            SourceType::Arrow(a, b) => match **a {
                SourceType::Arrow(..) => write!(f, "({a}) -> {b}"),
                _ => write!(f, "{a} -> {b}"),
            },
            SourceType::Cont(a, b) => write!(f, "({a}, {b}) continuation"),
        }
    }
}

struct Atomic<'a>(&'a SourceType);

impl fmt::Display for Atomic<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            SourceType::Arrow(..) => write!(f, "({})", self.0),
            t => write!(f, "{t}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
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
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "mod",
            BinOp::Eq => "=",
            BinOp::Ne => "<>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 5,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

// ---------------------------------------------------------------------------
// Specification terms

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub span: Span,
    pub kind: TermKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TermKind {
    Int(i64),
    Bool(bool),
    Unit,
    /// Logical variable, parameter, `result`, `reply`, or an array state variable.
    Var(String),
    /// `!x`
    Deref(String),
    /// `old t`
    Old(Box<Term>),
    /// `a[i]` (also accepted as `a.(i)`)
    Get(Box<Term>, Box<Term>),
    Binary(BinOp, Box<Term>, Box<Term>),
    Unary(UnOp, Box<Term>),
    Implies(Box<Term>, Box<Term>),
    Iff(Box<Term>, Box<Term>),
    Forall(Vec<(String, SourceType)>, Box<Term>),
    Exists(Vec<(String, SourceType)>, Box<Term>),
    /// Application of a logic function or predicate, or of the builtins
    /// `length`, `valid`, `pre`, `post`.
    App(String, Vec<Term>),
    Ctor(String, Vec<Term>),
    If(Box<Term>, Box<Term>, Box<Term>),
    Match(Box<Term>, Vec<(Pattern, Term)>),
}

impl Term {
    pub fn new(kind: TermKind, span: Span) -> Term {
        Term { span, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Wildcard,
    Var(String),
    Ctor(String, Vec<Pattern>),
}

impl Pattern {
    pub fn binders(&self, out: &mut Vec<String>) {
        match self {
            Pattern::Wildcard => {}
            Pattern::Var(x) => out.push(x.clone()),
            Pattern::Ctor(_, ps) => ps.iter().for_each(|p| p.binders(out)),
        }
    }
}

// ---------------------------------------------------------------------------
// Specification clauses

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpecClauses {
    pub requires: Vec<Term>,
    pub ensures: Vec<Term>,
    pub modifies: Vec<String>,
    pub performs: Vec<String>,
    pub variant: Option<Term>,
    /// Protocols declared inside this function's specification block.
    pub protocols: Vec<Protocol>,
    pub span: Span,
}

impl SpecClauses {
    pub fn is_empty(&self) -> bool {
        self.requires.is_empty()
            && self.ensures.is_empty()
            && self.modifies.is_empty()
            && self.performs.is_empty()
            && self.variant.is_none()
            && self.protocols.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandlerSpec {
    pub try_ensures: Vec<Term>,
    pub returns: Option<SourceType>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub effect: String,
    pub params: Vec<String>,
    pub requires: Vec<Term>,
    pub ensures: Vec<Term>,
    pub modifies: Vec<String>,
    /// Local protocols are printed with braces so further clauses can follow.
    pub braced: bool,
    pub span: Span,
}

// ---------------------------------------------------------------------------
// Expressions

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: Option<SourceType>,
    pub ghost: bool,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub id: NodeId,
    pub span: Span,
    pub kind: ExprKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunDef {
    pub name: String,
    pub recursive: bool,
    pub params: Vec<Param>,
    pub ret: Option<SourceType>,
    pub body: Box<Expr>,
    pub spec: SpecClauses,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectBranch {
    pub effect: String,
    pub binders: Vec<String>,
    pub cont: String,
    pub body: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Handler {
    pub body: Box<Expr>,
    pub branches: Vec<EffectBranch>,
    pub value_branch: Option<(String, Box<Expr>)>,
    pub spec: Option<HandlerSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Unit,
    Var(String),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    /// `!x`
    Deref(String),
    /// `x := e`
    Assign(String, Box<Expr>),
    /// `a.(i)`
    ArrayGet(String, Box<Expr>),
    /// `a.(i) <- e`
    ArraySet(String, Box<Expr>, Box<Expr>),
    /// `Array.length a`
    ArrayLength(String),
    /// `let x [: t] = e1 in e2`
    Let(String, Option<SourceType>, Box<Expr>, Box<Expr>),
    /// `let [rec] f params = e1 [spec] in e2`
    LetFun(FunDef, Box<Expr>),
    /// `fun [spec] (x : t) [: t] -> e`
    Fun {
        spec: SpecClauses,
        param: Param,
        ret: Option<SourceType>,
        body: Box<Expr>,
    },
    App(Box<Expr>, Vec<Expr>),
    If(Box<Expr>, Box<Expr>, Option<Box<Expr>>),
    Seq(Box<Expr>, Box<Expr>),
    Match(Box<Expr>, Vec<(Pattern, Expr)>),
    Ctor(String, Vec<Expr>),
    Perform(String, Vec<Expr>),
    Try(Handler),
    Continue(String, Box<Expr>),
}

// ---------------------------------------------------------------------------
// Declarations

#[derive(Debug, Clone, PartialEq)]
pub struct EffectDecl {
    pub name: String,
    pub signature: SourceType,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeDecl {
    pub name: String,
    pub ctors: Vec<(String, Vec<SourceType>)>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateInit {
    Ref(Expr),
    Array(Expr, Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDecl {
    pub name: String,
    pub ty: SourceType,
    pub init: StateInit,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogicDecl {
    pub name: String,
    pub params: Vec<(String, SourceType)>,
    /// `None` for predicates.
    pub ret: Option<SourceType>,
    pub body: Term,
    pub span: Span,
}

impl LogicDecl {
    pub fn result_type(&self) -> SourceType {
        self.ret.clone().unwrap_or(SourceType::Bool)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunDecl {
    pub def: FunDef,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Effect(EffectDecl),
    Type(TypeDecl),
    Protocol(Protocol),
    Logic(LogicDecl),
    State(StateDecl),
    Fun(FunDecl),
}

impl Decl {
    pub fn span(&self) -> Span {
        match self {
            Decl::Effect(d) => d.span,
            Decl::Type(d) => d.span,
            Decl::Protocol(d) => d.span,
            Decl::Logic(d) => d.span,
            Decl::State(d) => d.span,
            Decl::Fun(d) => d.span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SourceProgram {
    pub decls: Vec<Decl>,
    /// One past the largest node id handed out by the parser.
    pub next_id: NodeId,
}

impl SourceProgram {
    pub fn effects(&self) -> impl Iterator<Item = &EffectDecl> {
        self.decls.iter().filter_map(|d| match d {
            Decl::Effect(e) => Some(e),
            _ => None,
        })
    }

    pub fn functions(&self) -> impl Iterator<Item = &FunDecl> {
        self.decls.iter().filter_map(|d| match d {
            Decl::Fun(f) => Some(f),
            _ => None,
        })
    }

    pub fn function(&self, name: &str) -> Option<&FunDecl> {
        self.functions().find(|f| f.def.name == name)
    }

    pub fn states(&self) -> impl Iterator<Item = &StateDecl> {
        self.decls.iter().filter_map(|d| match d {
            Decl::State(s) => Some(s),
            _ => None,
        })
    }

    pub fn types(&self) -> impl Iterator<Item = &TypeDecl> {
        self.decls.iter().filter_map(|d| match d {
            Decl::Type(t) => Some(t),
            _ => None,
        })
    }

    pub fn logic_decls(&self) -> impl Iterator<Item = &LogicDecl> {
        self.decls.iter().filter_map(|d| match d {
            Decl::Logic(l) => Some(l),
            _ => None,
        })
    }
}

/// Visits every expression node in pre-order.
pub fn walk_expr<'a>(e: &'a Expr, f: &mut dyn FnMut(&'a Expr)) {
    f(e);
    match &e.kind {
        ExprKind::Int(_)
        | ExprKind::Bool(_)
        | ExprKind::Unit
        | ExprKind::Var(_)
        | ExprKind::Deref(_)
        | ExprKind::ArrayLength(_) => {}
        ExprKind::Binary(_, a, b) | ExprKind::Seq(a, b) | ExprKind::Let(_, _, a, b) => {
            walk_expr(a, f);
            walk_expr(b, f);
        }
        ExprKind::Unary(_, a) | ExprKind::Assign(_, a) | ExprKind::ArrayGet(_, a) => {
            walk_expr(a, f)
        }
        ExprKind::Continue(_, a) => walk_expr(a, f),
        ExprKind::ArraySet(_, i, v) => {
            walk_expr(i, f);
            walk_expr(v, f);
        }
        ExprKind::LetFun(def, rest) => {
            walk_expr(&def.body, f);
            walk_expr(rest, f);
        }
        ExprKind::Fun { body, .. } => walk_expr(body, f),
        ExprKind::App(c, args) => {
            walk_expr(c, f);
            args.iter().for_each(|a| walk_expr(a, f));
        }
        ExprKind::If(c, t, e2) => {
            walk_expr(c, f);
            walk_expr(t, f);
            if let Some(e2) = e2 {
                walk_expr(e2, f);
            }
        }
        ExprKind::Match(s, arms) => {
            walk_expr(s, f);
            arms.iter().for_each(|(_, a)| walk_expr(a, f));
        }
        ExprKind::Ctor(_, args) | ExprKind::Perform(_, args) => {
            args.iter().for_each(|a| walk_expr(a, f))
        }
        ExprKind::Try(h) => {
            walk_expr(&h.body, f);
            h.branches.iter().for_each(|b| walk_expr(&b.body, f));
            if let Some((_, v)) = &h.value_branch {
                walk_expr(v, f);
            }
        }
    }
}
