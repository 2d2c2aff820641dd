//! Rule-directed translation of typed source programs into the first-order IR.
//!
//! Effects become exceptions, `perform` becomes a call to an abstract
//! `perform_E` routine, handlers become local routines whose continuations
//! are abstract values axiomatized through `pre`/`post`, and anonymous
//! functions are defunctionalized the same way.

mod closures;
mod decls;
mod exprs;
mod terms;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::ir::{field_name, Decl, IrProgram, IrType, LOp, Term};
use crate::sema::TypedProgram;
use crate::surface::{EffectDecl, NodeId, SourceType, Span};

pub use decls::check_reserved_names;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransError {
    pub span: Span,
    pub message: String,
}

impl TransError {
    pub fn new(span: Span, message: impl Into<String>) -> TransError {
        TransError {
            span,
            message: message.into(),
        }
    }
}

impl fmt::Display for TransError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

impl std::error::Error for TransError {}

pub type TransResult<T> = Result<T, TransError>;

/// The four translation environments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransEnv {
    /// Effect to (argument types, reply type).
    pub sigma: BTreeMap<String, (Vec<IrType>, IrType)>,
    /// Top-level function to the state variables it may modify.
    pub delta: BTreeMap<String, BTreeSet<String>>,
    /// Names bound to defunctionalized closures.
    pub nu: BTreeSet<String>,
    /// State variables modified so far on the current path.
    pub mu: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    TEffect,
    TPerform,
    TProtocol,
    TFun,
    TPerformsClause,
    TAppDefun,
    TApp,
    TTry,
    TLet,
    TIf,
    TSeq,
    TLetIn,
    TMatch,
    TModifies,
    TEmpty,
    TDecl,
    /// Homomorphic cases with no dedicated rule: literals, variables,
    /// operators, state access, constructors.
    THom,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::TEffect => "TEffect",
            Rule::TPerform => "TPerform",
            Rule::TProtocol => "TProtocol",
            Rule::TFun => "TFun",
            Rule::TPerformsClause => "TPerformsClause",
            Rule::TAppDefun => "TAppDefun",
            Rule::TApp => "TApp",
            Rule::TTry => "TTry",
            Rule::TLet => "TLet",
            Rule::TIf => "TIf",
            Rule::TSeq => "TSeq",
            Rule::TLetIn => "TLetIn",
            Rule::TMatch => "TMatch",
            Rule::TModifies => "TModifies",
            Rule::TEmpty => "TEmpty",
            Rule::TDecl => "TDecl",
            Rule::THom => "THom",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub rule: Rule,
    pub span: Span,
    /// Source expression node; `None` for declaration-level rules.
    pub source: Option<NodeId>,
    /// Produced IR expression node; 0 for declarations.
    pub ir_node: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleTrace {
    pub entries: Vec<TraceEntry>,
}

impl RuleTrace {
    pub fn for_source(&self, id: NodeId) -> impl Iterator<Item = &TraceEntry> {
        self.entries.iter().filter(move |e| e.source == Some(id))
    }

    pub fn count(&self, rule: Rule) -> usize {
        self.entries.iter().filter(|e| e.rule == rule).count()
    }
}

#[derive(Debug, Clone)]
pub struct Translation {
    pub ir: IrProgram,
    pub trace: RuleTrace,
    pub env: TransEnv,
}

/// Translates a checked program. Effect rows must already be validated.
pub fn translate_program(tp: &TypedProgram) -> TransResult<Translation> {
    decls::translate(tp)
}

/// Splits an effect signature into argument types and reply type. A bare
/// type carries a single `unit` argument.
pub fn effect_type_split(t: &SourceType) -> (Vec<SourceType>, SourceType) {
    match t {
        SourceType::Arrow(..) => {
            let mut args = Vec::new();
            let mut cur = t;
            while let SourceType::Arrow(a, b) = cur {
                args.push((**a).clone());
                cur = b;
            }
            (args, cur.clone())
        }
        other => (vec![SourceType::Unit], other.clone()),
    }
}

/// Conjunction of clause terms; the empty list is `true`.
pub fn combine_terms(ts: &[Term]) -> Term {
    match ts.split_first() {
        None => Term::Bool(true),
        Some((t, rest)) => match combine_terms(rest) {
            Term::Bool(true) => t.clone(),
            tail => Term::bin(LOp::And, t.clone(), tail),
        },
    }
}

/// Field-wise equality of `state` and `state_old` over `vars`.
pub fn unmodified_state(vars: &[String]) -> Term {
    let eqs: Vec<Term> = vars
        .iter()
        .map(|x| {
            let f = field_name(x);
            Term::eq(
                Term::field(Term::var("state", IrType::State), &f),
                Term::field(Term::var("state_old", IrType::State), &f),
            )
        })
        .collect();
    combine_terms(&eqs)
}

/// Emits the exception for an effect and extends sigma.
pub fn translate_effect(d: &EffectDecl, mut env: TransEnv) -> TransResult<(Decl, TransEnv)> {
    if env.sigma.contains_key(&d.name) {
        return Err(TransError::new(
            d.span,
            format!("duplicate effect `{}`", d.name),
        ));
    }
    let (args, reply) = effect_type_split(&d.signature);
    let args: Vec<IrType> = args.iter().map(ir_type).collect();
    env.sigma
        .insert(d.name.clone(), (args.clone(), ir_type(&reply)));
    Ok((Decl::Exception(d.name.clone(), args), env))
}

pub fn ir_type(t: &SourceType) -> IrType {
    match t {
        SourceType::Int => IrType::Int,
        SourceType::Bool => IrType::Bool,
        SourceType::Unit => IrType::Unit,
        SourceType::Named(n) => IrType::Data(n.clone()),
        SourceType::Ref(a) => ir_type(a),
        SourceType::Array(a) => IrType::Array(Box::new(ir_type(a))),
        SourceType::Arrow(a, b) => IrType::lambda(ir_type(a), ir_type(b)),
        SourceType::Cont(a, b) => IrType::cont(ir_type(a), ir_type(b)),
    }
}
