//! Type checking, effect-row checking and the global state model.

mod env;
mod exhaustive;
mod rows;
mod terms;
mod typeck;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::surface::{LogicDecl, NodeId, Protocol, SourceProgram, SourceType, Span, SpecClauses};

pub use env::split_signature;
pub use terms::{free_term_vars, TermCtx};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemaError {
    pub span: Span,
    pub message: String,
}

impl SemaError {
    pub fn new(span: Span, message: impl Into<String>) -> SemaError {
        SemaError {
            span,
            message: message.into(),
        }
    }
}

impl fmt::Display for SemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

impl std::error::Error for SemaError {}

pub type SemaResult<T> = Result<T, SemaError>;

#[derive(Debug, Clone, PartialEq)]
pub struct EffectSig {
    pub name: String,
    pub args: Vec<SourceType>,
    pub reply: SourceType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataType {
    pub name: String,
    pub ctors: Vec<(String, Vec<SourceType>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunParam {
    pub name: String,
    pub ty: SourceType,
    pub ghost: bool,
}

/// Signature of a top-level or local named function.
#[derive(Debug, Clone, PartialEq)]
pub struct FunSig {
    pub name: String,
    pub params: Vec<FunParam>,
    pub ret: SourceType,
    pub recursive: bool,
    pub spec: SpecClauses,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolInfo {
    pub protocol: Protocol,
    /// Local protocols: the function whose specification declares it.
    pub owner: Option<String>,
    /// Owner parameters mentioned by the protocol, in parameter order.
    pub captures: Vec<FunParam>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateModel {
    /// Declaration order; types are `t ref` or `t array`.
    pub vars: Vec<(String, SourceType)>,
}

impl StateModel {
    pub fn get(&self, name: &str) -> Option<&SourceType> {
        self.vars.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.iter().map(|(n, _)| n.as_str())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Globals {
    pub effects: BTreeMap<String, EffectSig>,
    pub datatypes: BTreeMap<String, DataType>,
    /// Constructor name to (datatype, argument types).
    pub ctors: BTreeMap<String, (String, Vec<SourceType>)>,
    pub state: StateModel,
    pub logic: BTreeMap<String, LogicDecl>,
    pub functions: BTreeMap<String, FunSig>,
    pub protocols: BTreeMap<String, ProtocolInfo>,
}

#[derive(Debug, Clone)]
pub struct TypedProgram {
    pub program: SourceProgram,
    pub globals: Globals,
    /// Type of every expression node.
    pub types: HashMap<NodeId, SourceType>,
    /// Declared `performs` set of each top-level function.
    pub effect_rows: BTreeMap<String, BTreeSet<String>>,
    /// Signatures of local functions, keyed by the `let` node.
    pub local_funs: HashMap<NodeId, FunSig>,
    /// Union of the `performs` sets of all anonymous functions.
    pub closure_performs: BTreeSet<String>,
}

impl TypedProgram {
    pub fn type_of(&self, id: NodeId) -> &SourceType {
        &self.types[&id]
    }
}

/// Types every node. Rejects type errors, continuation escapes, and
/// protocols that conflict or mention unknown names.
pub fn typecheck(p: &SourceProgram) -> SemaResult<TypedProgram> {
    let globals = env::build_globals(p)?;
    typeck::check_program(p, globals)
}

/// Checks that every function lets escape only effects from its `performs`.
pub fn check_effect_rows(tp: &TypedProgram) -> SemaResult<()> {
    match rows::row_violations(tp).into_iter().next() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Every row violation, in program order.
pub fn effect_row_violations(tp: &TypedProgram) -> Vec<SemaError> {
    rows::row_violations(tp)
}

/// Escaping effects of an expression, per the row rules.
pub fn escaping_effects(tp: &TypedProgram, e: &crate::surface::Expr) -> BTreeSet<String> {
    rows::escaping(tp, e).into_keys().collect()
}

pub fn build_state_model(tp: &TypedProgram) -> StateModel {
    tp.globals.state.clone()
}
