use std::fmt;
use std::rc::Rc;

use serde::ser::{SerializeMap, SerializeSeq, Serializer};
use serde::Serialize;


/// Runtime values. Closures and continuations are opaque outside the machine.
#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Unit,
    Ctor(String, Vec<Value>),
    /// Contents of a state array.
    Array(Vec<Value>),
    Closure(Rc<Closure>),
    /// Index into the machine's continuation table.
    Cont(usize),
}

#[derive(Debug)]
pub struct Closure {
    /// Index into the interpreter's code table.
    pub(crate) code: usize,
    pub(crate) env: Env,
    /// Arguments of a partial application.
    pub(crate) bound: Vec<Value>,
}

impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Unit, Value::Unit) => true,
            (Value::Ctor(c, xs), Value::Ctor(d, ys)) => c == d && xs == ys,
            (Value::Array(xs), Value::Array(ys)) => xs == ys,
            (Value::Closure(a), Value::Closure(b)) => Rc::ptr_eq(a, b),
            (Value::Cont(a), Value::Cont(b)) => a == b,
            _ => false,
        }
    }
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn ctor(c: &str, args: Vec<Value>) -> Value {
        Value::Ctor(c.to_string(), args)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Unit => write!(f, "()"),
            Value::Ctor(c, args) if args.is_empty() => write!(f, "{c}"),
            Value::Ctor(c, args) => {
                write!(f, "{c} (")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Value::Array(xs) => {
                write!(f, "[|")?;
                for (i, a) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, "|]")
            }
            Value::Closure(_) => write!(f, "<fun>"),
            Value::Cont(k) => write!(f, "<continuation {k}>"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(n) => s.serialize_i64(*n),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Unit => s.serialize_unit(),
            Value::Ctor(c, args) => {
                let mut m = s.serialize_map(Some(2))?;
                m.serialize_entry("ctor", c)?;
                m.serialize_entry("args", args)?;
                m.end()
            }
            Value::Array(xs) => {
                let mut q = s.serialize_seq(Some(xs.len()))?;
                for x in xs {
                    q.serialize_element(x)?;
                }
                q.end()
            }
            Value::Closure(_) => s.serialize_str("<fun>"),
            Value::Cont(k) => s.serialize_str(&format!("<continuation {k}>")),
        }
    }
}

/// Persistent environment; extension shares the tail.
#[derive(Debug, Clone, Default)]
pub struct Env(Option<Rc<EnvNode>>);

#[derive(Debug)]
struct EnvNode {
    name: String,
    value: Value,
    next: Env,
}

impl Env {
    pub fn with(&self, name: &str, value: Value) -> Env {
        Env(Some(Rc::new(EnvNode { name: name.to_string(), value, next: self.clone() })))
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        let mut cur = &self.0;
        while let Some(n) = cur {
            if n.name == name {
                return Some(&n.value);
            }
            cur = &n.next.0;
        }
        None
    }
}

/// Values of the state variables, in declaration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Store {
    pub vars: Vec<(String, Value)>,
}

impl Store {
    pub fn get(&self, x: &str) -> Option<&Value> {
        self.vars.iter().find(|(n, _)| n == x).map(|(_, v)| v)
    }

    pub fn get_mut(&mut self, x: &str) -> Option<&mut Value> {
        self.vars.iter_mut().find(|(n, _)| n == x).map(|(_, v)| v)
    }

    pub fn set(&mut self, x: &str, v: Value) {
        if let Some(slot) = self.get_mut(x) {
            *slot = v;
        }
    }
}

impl Serialize for Store {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.vars.len()))?;
        for (k, v) in &self.vars {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// Perform caught by a handler of the program.
    Perform,
    Continue,
    /// Perform that escaped the entry function.
    Escape,
}

/// A perform or continue, with the store around it. For `continue`,
/// `before` is the perform-time snapshot and `payload` the reply.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub kind: EventKind,
    pub effect: String,
    pub payload: Vec<Value>,
    pub before: Store,
    pub after: Store,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Blame {
    /// The performing or calling side broke a precondition.
    Client,
    /// The handler or callee broke a postcondition, frame or one-shot use.
    Server,
}

impl fmt::Display for Blame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Blame::Client => "client",
            Blame::Server => "server",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub blame: Blame,
    /// Effect name, or the function or handler whose contract failed.
    pub subject: String,
    pub clause: String,
    pub before: Store,
    pub after: Store,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("unhandled effect `{0}`")]
    Unhandled(String),
    #[error("continuation resumed twice")]
    OneShot,
    #[error("fuel exhausted")]
    FuelExhausted,
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("index {0} out of bounds")]
    OutOfBounds(i64),
    #[error("no match arm applies")]
    MatchFailure,
    #[error("contract violation ({} blame) on {}: {}", .0.blame, .0.subject, .0.clause)]
    Contract(Box<Violation>),
    #[error("{0}")]
    Other(String),
}

impl RunError {
    pub fn violation(&self) -> Option<&Violation> {
        match self {
            RunError::Contract(v) => Some(v),
            _ => None,
        }
    }

    /// Side responsible for the failure, where one is determined.
    pub fn blame(&self) -> Option<Blame> {
        match self {
            RunError::Contract(v) => Some(v.blame),
            RunError::OneShot => Some(Blame::Server),
            _ => None,
        }
    }
}
