//! Lexing, parsing and pretty-printing of source programs.

pub mod ast;
pub mod lexer;
pub mod locations;
pub mod parser;
pub mod printer;

use std::collections::HashSet;
use std::fmt;

pub use ast::*;
pub use locations::strip_locations;
pub use parser::parse_expr;
pub use printer::{pretty_print, print_expr, print_term};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub span: Span,
    pub message: String,
    /// Token descriptions that would have been accepted at `span`.
    pub expected: Vec<String>,
}

impl SyntaxError {
    pub fn new(span: Span, message: impl Into<String>, expected: Vec<String>) -> SyntaxError {
        SyntaxError {
            span,
            message: message.into(),
            expected,
        }
    }
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

impl std::error::Error for SyntaxError {}

/// Parses a whole program and checks effect/protocol declarations for
/// duplicates and dangling references.
pub fn parse_program(text: &str) -> Result<SourceProgram, SyntaxError> {
    let p = parser::parse_program(text)?;
    let mut effects = HashSet::new();
    for e in p.effects() {
        if !effects.insert(e.name.as_str()) {
            return Err(SyntaxError::new(
                e.span,
                format!("duplicate effect `{}`", e.name),
                vec![],
            ));
        }
    }
    let check = |pr: &Protocol| {
        if effects.contains(pr.effect.as_str()) {
            Ok(())
        } else {
            Err(SyntaxError::new(
                pr.span,
                format!("protocol for undeclared effect `{}`", pr.effect),
                vec![],
            ))
        }
    };
    for d in &p.decls {
        match d {
            Decl::Protocol(pr) => check(pr)?,
            Decl::Fun(f) => {
                for pr in &f.def.spec.protocols {
                    check(pr)?;
                }
                let mut res = Ok(());
                walk_expr(&f.def.body, &mut |e| {
                    let spec = match &e.kind {
                        ExprKind::LetFun(def, _) => &def.spec,
                        ExprKind::Fun { spec, .. } => spec,
                        _ => return,
                    };
                    for pr in &spec.protocols {
                        if res.is_ok() {
                            res = check(pr);
                        }
                    }
                });
                res?;
            }
            _ => {}
        }
    }
    Ok(p)
}
