//! Recursive-descent parser for programs and specification blocks.

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::SyntaxError;

pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
    next_id: NodeId,
}

type PResult<T> = Result<T, SyntaxError>;

pub fn parse_program(text: &str) -> PResult<SourceProgram> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        next_id: 0,
    };
    let mut decls = Vec::new();
    while !p.at(&Tok::Eof) {
        p.decl(&mut decls)?;
    }
    Ok(SourceProgram {
        decls,
        next_id: p.next_id,
    })
}

/// Parses a standalone expression, e.g. a command-line argument.
pub fn parse_expr(text: &str) -> PResult<Expr> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        next_id: 1_000_000,
    };
    let e = p.expr()?;
    p.expect(Tok::Eof)?;
    Ok(e)
}

fn starts_atom(t: &Tok) -> bool {
    matches!(
        t,
        Tok::Int(_)
            | Tok::True
            | Tok::False
            | Tok::LParen
            | Tok::Ident(_)
            | Tok::UIdent(_)
            | Tok::Bang
            | Tok::Begin
            | Tok::ArrayLength
    )
}

fn starts_term_atom(t: &Tok) -> bool {
    matches!(
        t,
        Tok::Int(_)
            | Tok::True
            | Tok::False
            | Tok::LParen
            | Tok::Ident(_)
            | Tok::UIdent(_)
            | Tok::Bang
    )
}

impl Parser {
    // -- token plumbing ----------------------------------------------------

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, off: usize) -> &Tok {
        let i = (self.pos + off).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.at(t) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn err<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(SyntaxError::new(
            self.span(),
            format!("unexpected {}", self.peek().describe()),
            expected.iter().map(|s| s.to_string()).collect(),
        ))
    }

    fn expect(&mut self, t: Tok) -> PResult<Span> {
        if self.at(&t) {
            Ok(self.bump().span)
        } else {
            let want = if t == Tok::Eof {
                "end of input".to_string()
            } else {
                t.text().to_string()
            };
            self.err(&[&want])
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.err(&["identifier"]),
        }
    }

    fn uident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::UIdent(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.err(&["capitalized identifier"]),
        }
    }

    fn mk(&mut self, kind: ExprKind, span: Span) -> Expr {
        let id = self.next_id;
        self.next_id += 1;
        Expr { id, span, kind }
    }

    // -- declarations ------------------------------------------------------

    fn decl(&mut self, out: &mut Vec<Decl>) -> PResult<()> {
        let start = self.span();
        match self.peek() {
            Tok::Effect => {
                self.bump();
                let name = self.uident()?;
                self.expect(Tok::Colon)?;
                let signature = self.ty()?;
                out.push(Decl::Effect(EffectDecl {
                    name,
                    signature,
                    span: start.to(self.prev_span()),
                }));
            }
            Tok::Type => {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::Eq)?;
                self.eat(&Tok::Bar);
                let mut ctors = vec![self.ctor_decl()?];
                while self.eat(&Tok::Bar) {
                    ctors.push(self.ctor_decl()?);
                }
                out.push(Decl::Type(TypeDecl {
                    name,
                    ctors,
                    span: start.to(self.prev_span()),
                }));
            }
            Tok::SpecOpen => {
                self.bump();
                while !self.at(&Tok::SpecClose) {
                    match self.peek() {
                        Tok::Protocol => out.push(Decl::Protocol(self.protocol(false)?)),
                        Tok::Predicate | Tok::Function => out.push(Decl::Logic(self.logic_decl()?)),
                        _ => return self.err(&["protocol", "predicate", "function", "*)"]),
                    }
                }
                self.bump();
            }
            Tok::Let => {
                self.bump();
                let recursive = self.eat(&Tok::Rec);
                let name = self.ident()?;
                let params = self.params()?;
                let ret = if self.eat(&Tok::Colon) {
                    Some(self.ty()?)
                } else {
                    None
                };
                self.expect(Tok::Eq)?;
                if params.is_empty()
                    && !recursive
                    && matches!(self.peek(), Tok::Ref | Tok::ArrayMake)
                {
                    let init = if self.eat(&Tok::Ref) {
                        StateInit::Ref(self.atom()?)
                    } else {
                        self.bump();
                        let len = self.atom()?;
                        let v = self.atom()?;
                        StateInit::Array(len, v)
                    };
                    let Some(ty) = ret else {
                        return Err(SyntaxError::new(
                            start,
                            "mutable state needs a type annotation",
                            vec![":".into()],
                        ));
                    };
                    out.push(Decl::State(StateDecl {
                        name,
                        ty,
                        init,
                        span: start.to(self.prev_span()),
                    }));
                    return Ok(());
                }
                let body = self.expr()?;
                let spec = if self.at(&Tok::SpecOpen) {
                    self.fun_spec()?
                } else {
                    SpecClauses::default()
                };
                let def = FunDef {
                    name,
                    recursive,
                    params,
                    ret,
                    body: Box::new(body),
                    spec,
                };
                out.push(Decl::Fun(FunDecl {
                    def,
                    span: start.to(self.prev_span()),
                }));
            }
            _ => return self.err(&["effect", "type", "let", "(*@"]),
        }
        Ok(())
    }

    fn ctor_decl(&mut self) -> PResult<(String, Vec<SourceType>)> {
        let name = self.uident()?;
        let mut args = Vec::new();
        if self.eat(&Tok::Of) {
            args.push(self.ty_app()?);
            while self.eat(&Tok::Star) {
                args.push(self.ty_app()?);
            }
        }
        Ok((name, args))
    }

    fn logic_decl(&mut self) -> PResult<LogicDecl> {
        let start = self.span();
        let is_fn = matches!(self.bump().tok, Tok::Function);
        let name = self.ident()?;
        let mut params = Vec::new();
        while self.eat(&Tok::LParen) {
            let x = self.ident()?;
            self.expect(Tok::Colon)?;
            let t = self.ty()?;
            self.expect(Tok::RParen)?;
            params.push((x, t));
        }
        let ret = if is_fn {
            self.expect(Tok::Colon)?;
            Some(self.ty()?)
        } else {
            None
        };
        self.expect(Tok::Eq)?;
        let body = self.term()?;
        Ok(LogicDecl {
            name,
            params,
            ret,
            body,
            span: start.to(self.prev_span()),
        })
    }

    fn protocol(&mut self, local: bool) -> PResult<Protocol> {
        let start = self.expect(Tok::Protocol)?;
        let effect = self.uident()?;
        let mut params = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Ident(x) => {
                    self.bump();
                    params.push(x);
                }
                Tok::Underscore => {
                    self.bump();
                    params.push("_".into());
                }
                _ => break,
            }
        }
        let braced = if self.eat(&Tok::LBrace) {
            true
        } else {
            self.expect(Tok::Colon)?;
            false
        };
        let mut pr = Protocol {
            effect,
            params,
            requires: vec![],
            ensures: vec![],
            modifies: vec![],
            braced: braced || local,
            span: start,
        };
        loop {
            match self.peek() {
                Tok::Requires => {
                    self.bump();
                    pr.requires.push(self.term()?);
                }
                Tok::Ensures => {
                    self.bump();
                    pr.ensures.push(self.term()?);
                }
                Tok::Modifies => {
                    self.bump();
                    pr.modifies.extend(self.ident_list()?);
                }
                _ => break,
            }
        }
        if braced {
            self.expect(Tok::RBrace)?;
        } else if local {
            return Err(SyntaxError::new(
                start,
                "a protocol inside a function specification must use braces",
                vec!["{".into()],
            ));
        }
        pr.span = start.to(self.prev_span());
        Ok(pr)
    }

    fn ident_list(&mut self) -> PResult<Vec<String>> {
        let mut v = vec![self.ident()?];
        while self.eat(&Tok::Comma) {
            v.push(self.ident()?);
        }
        Ok(v)
    }

    fn fun_spec(&mut self) -> PResult<SpecClauses> {
        let start = self.expect(Tok::SpecOpen)?;
        let mut s = SpecClauses::default();
        loop {
            match self.peek() {
                Tok::Requires => {
                    self.bump();
                    s.requires.push(self.term()?);
                }
                Tok::Ensures => {
                    self.bump();
                    s.ensures.push(self.term()?);
                }
                Tok::Modifies => {
                    self.bump();
                    s.modifies.extend(self.ident_list()?);
                }
                Tok::Performs => {
                    self.bump();
                    s.performs.push(self.uident()?);
                    while self.eat(&Tok::Comma) {
                        s.performs.push(self.uident()?);
                    }
                }
                Tok::Variant => {
                    self.bump();
                    if s.variant.is_some() {
                        return Err(SyntaxError::new(
                            self.prev_span(),
                            "duplicate variant clause",
                            vec![],
                        ));
                    }
                    s.variant = Some(self.term()?);
                }
                Tok::Protocol => s.protocols.push(self.protocol(true)?),
                Tok::SpecClose => break,
                _ => {
                    return self.err(&[
                        "requires", "ensures", "modifies", "performs", "variant", "protocol", "*)",
                    ])
                }
            }
        }
        self.bump();
        s.span = start.to(self.prev_span());
        Ok(s)
    }

    fn handler_spec(&mut self) -> PResult<HandlerSpec> {
        let start = self.expect(Tok::SpecOpen)?;
        let mut hs = HandlerSpec {
            try_ensures: vec![],
            returns: None,
            span: start,
        };
        loop {
            match self.peek() {
                Tok::TryEnsures => {
                    self.bump();
                    hs.try_ensures.push(self.term()?);
                }
                Tok::Returns => {
                    self.bump();
                    hs.returns = Some(self.ty()?);
                }
                Tok::SpecClose => break,
                _ => return self.err(&["try_ensures", "returns", "*)"]),
            }
        }
        self.bump();
        hs.span = start.to(self.prev_span());
        Ok(hs)
    }

    // -- types -------------------------------------------------------------

    fn ty(&mut self) -> PResult<SourceType> {
        let a = self.ty_app()?;
        if self.eat(&Tok::Arrow) {
            Ok(SourceType::arrow(a, self.ty()?))
        } else {
            Ok(a)
        }
    }

    fn ty_app(&mut self) -> PResult<SourceType> {
        let mut t = match self.peek().clone() {
            Tok::Ident(n) => {
                self.bump();
                match n.as_str() {
                    "int" => SourceType::Int,
                    "bool" => SourceType::Bool,
                    "unit" => SourceType::Unit,
                    _ => SourceType::Named(n),
                }
            }
            Tok::LParen => {
                self.bump();
                let t = self.ty()?;
                self.expect(Tok::RParen)?;
                t
            }
            _ => return self.err(&["type"]),
        };
        loop {
            match self.peek() {
                Tok::Ref => {
                    self.bump();
                    t = SourceType::Ref(Box::new(t));
                }
                Tok::Ident(n) if n == "array" => {
                    self.bump();
                    t = SourceType::Array(Box::new(t));
                }
                _ => return Ok(t),
            }
        }
    }

    // -- parameters and patterns ------------------------------------------

    fn params(&mut self) -> PResult<Vec<Param>> {
        let mut ps = Vec::new();
        while let Some(p) = self.param()? {
            ps.push(p);
        }
        Ok(ps)
    }

    fn param(&mut self) -> PResult<Option<Param>> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(Some(Param {
                    name,
                    ty: None,
                    ghost: false,
                    span: start,
                }))
            }
            Tok::Underscore => {
                self.bump();
                Ok(Some(Param {
                    name: "_".into(),
                    ty: None,
                    ghost: false,
                    span: start,
                }))
            }
            Tok::LParen if self.peek_at(1) == &Tok::RParen => {
                self.bump();
                self.bump();
                Ok(Some(Param {
                    name: "()".into(),
                    ty: Some(SourceType::Unit),
                    ghost: false,
                    span: start.to(self.prev_span()),
                }))
            }
            Tok::LParen if matches!(self.peek_at(1), Tok::LParen) => {
                // ((x : t)[@ghost])
                self.bump();
                let inner = self
                    .param()?
                    .ok_or_else(|| SyntaxError::new(self.span(), "expected parameter", vec![]))?;
                self.expect(Tok::RParen)?;
                Ok(Some(inner))
            }
            Tok::LParen
                if matches!(self.peek_at(1), Tok::Ident(_) | Tok::Underscore)
                    && self.peek_at(2) == &Tok::Colon =>
            {
                self.bump();
                let name = match self.bump().tok {
                    Tok::Ident(n) => n,
                    _ => "_".into(),
                };
                self.expect(Tok::Colon)?;
                let ty = self.ty()?;
                self.expect(Tok::RParen)?;
                let ghost = self.eat(&Tok::GhostAttr);
                Ok(Some(Param {
                    name,
                    ty: Some(ty),
                    ghost,
                    span: start.to(self.prev_span()),
                }))
            }
            _ => Ok(None),
        }
    }

    fn pattern(&mut self) -> PResult<Pattern> {
        match self.peek().clone() {
            Tok::Underscore => {
                self.bump();
                Ok(Pattern::Wildcard)
            }
            Tok::Ident(x) => {
                self.bump();
                Ok(Pattern::Var(x))
            }
            Tok::UIdent(c) => {
                self.bump();
                let args = match self.peek() {
                    Tok::LParen => {
                        self.bump();
                        let mut v = vec![self.pattern()?];
                        while self.eat(&Tok::Comma) {
                            v.push(self.pattern()?);
                        }
                        self.expect(Tok::RParen)?;
                        v
                    }
                    Tok::Ident(_) | Tok::Underscore | Tok::UIdent(_) => vec![self.pattern()?],
                    _ => vec![],
                };
                Ok(Pattern::Ctor(c, args))
            }
            Tok::LParen => {
                self.bump();
                let p = self.pattern()?;
                self.expect(Tok::RParen)?;
                Ok(p)
            }
            _ => self.err(&["pattern"]),
        }
    }

    // -- expressions -------------------------------------------------------

    pub fn expr(&mut self) -> PResult<Expr> {
        let first = self.stmt()?;
        if self.eat(&Tok::Semi) {
            let rest = self.expr()?;
            let span = first.span.to(rest.span);
            Ok(self.mk(ExprKind::Seq(Box::new(first), Box::new(rest)), span))
        } else {
            Ok(first)
        }
    }

    fn stmt(&mut self) -> PResult<Expr> {
        let start = self.span();
        match self.peek() {
            Tok::Let => self.let_expr(),
            Tok::Fun => {
                self.bump();
                let spec = if self.at(&Tok::SpecOpen) {
                    self.fun_spec()?
                } else {
                    SpecClauses::default()
                };
                let param = self.param()?.ok_or_else(|| {
                    SyntaxError::new(self.span(), "expected parameter", vec!["parameter".into()])
                })?;
                let ret = if self.eat(&Tok::Colon) {
                    Some(self.ty_app()?)
                } else {
                    None
                };
                self.expect(Tok::Arrow)?;
                let body = self.expr()?;
                let span = start.to(body.span);
                Ok(self.mk(
                    ExprKind::Fun {
                        spec,
                        param,
                        ret,
                        body: Box::new(body),
                    },
                    span,
                ))
            }
            Tok::If => {
                self.bump();
                let c = self.expr()?;
                self.expect(Tok::Then)?;
                let t = self.stmt()?;
                let e = if self.eat(&Tok::Else) {
                    Some(Box::new(self.stmt()?))
                } else {
                    None
                };
                let span = start.to(self.prev_span());
                Ok(self.mk(ExprKind::If(Box::new(c), Box::new(t), e), span))
            }
            Tok::Match => {
                self.bump();
                let s = self.expr()?;
                self.expect(Tok::With)?;
                self.eat(&Tok::Bar);
                let mut arms = Vec::new();
                loop {
                    if self.at(&Tok::Effect) {
                        // `match e with | effect ...` is a handler
                        return self.handler_arms(start, s, arms);
                    }
                    let p = self.pattern()?;
                    self.expect(Tok::Arrow)?;
                    let body = self.expr()?;
                    arms.push((p, body));
                    if !self.eat(&Tok::Bar) {
                        break;
                    }
                }
                let span = start.to(self.prev_span());
                Ok(self.mk(ExprKind::Match(Box::new(s), arms), span))
            }
            Tok::Try => self.try_expr(),
            _ => self.assign(),
        }
    }

    fn let_expr(&mut self) -> PResult<Expr> {
        let start = self.expect(Tok::Let)?;
        let recursive = self.eat(&Tok::Rec);
        let name = match self.peek().clone() {
            Tok::Ident(x) => {
                self.bump();
                x
            }
            Tok::Underscore => {
                self.bump();
                "_".into()
            }
            Tok::LParen if self.peek_at(1) == &Tok::RParen => {
                self.bump();
                self.bump();
                "_".into()
            }
            _ => return self.err(&["identifier"]),
        };
        let params = self.params()?;
        let ret = if self.eat(&Tok::Colon) {
            Some(self.ty()?)
        } else {
            None
        };
        self.expect(Tok::Eq)?;
        let body = self.expr()?;
        if params.is_empty() && !recursive {
            if self.at(&Tok::SpecOpen) {
                return Err(SyntaxError::new(
                    self.span(),
                    "specification on a non-function let",
                    vec!["in".into()],
                ));
            }
            self.expect(Tok::In)?;
            let rest = self.expr()?;
            let span = start.to(rest.span);
            return Ok(self.mk(
                ExprKind::Let(name, ret, Box::new(body), Box::new(rest)),
                span,
            ));
        }
        let spec = if self.at(&Tok::SpecOpen) {
            self.fun_spec()?
        } else {
            SpecClauses::default()
        };
        self.expect(Tok::In)?;
        let rest = self.expr()?;
        let span = start.to(rest.span);
        let def = FunDef {
            name,
            recursive,
            params,
            ret,
            body: Box::new(body),
            spec,
        };
        Ok(self.mk(ExprKind::LetFun(def, Box::new(rest)), span))
    }

    fn try_expr(&mut self) -> PResult<Expr> {
        let start = self.expect(Tok::Try)?;
        let body = self.expr()?;
        self.expect(Tok::With)?;
        self.eat(&Tok::Bar);
        self.handler_arms(start, body, Vec::new())
    }

    /// Parses handler branches; `prior` holds value arms already parsed
    /// in the `match` form.
    fn handler_arms(
        &mut self,
        start: Span,
        body: Expr,
        prior: Vec<(Pattern, Expr)>,
    ) -> PResult<Expr> {
        let mut branches = Vec::new();
        let mut value_branch = None;
        for (p, b) in prior {
            let x = match p {
                Pattern::Var(x) => x,
                Pattern::Wildcard => "_".into(),
                _ => {
                    return Err(SyntaxError::new(
                        b.span,
                        "a handler's value branch must bind a variable",
                        vec![],
                    ))
                }
            };
            if value_branch.is_some() {
                return Err(SyntaxError::new(b.span, "duplicate value branch", vec![]));
            }
            value_branch = Some((x, Box::new(b)));
        }
        loop {
            let bstart = self.span();
            if self.eat(&Tok::Effect) {
                let (effect, binders) = if self.eat(&Tok::LParen) {
                    let e = self.uident()?;
                    let mut bs = Vec::new();
                    loop {
                        match self.peek().clone() {
                            Tok::Ident(x) => {
                                self.bump();
                                bs.push(x);
                            }
                            Tok::Underscore => {
                                self.bump();
                                bs.push("_".into());
                            }
                            _ => break,
                        }
                    }
                    self.expect(Tok::RParen)?;
                    (e, bs)
                } else {
                    (self.uident()?, vec![])
                };
                let cont = self.ident()?;
                self.expect(Tok::Arrow)?;
                let b = self.expr()?;
                let span = bstart.to(self.prev_span());
                branches.push(EffectBranch {
                    effect,
                    binders,
                    cont,
                    body: b,
                    span,
                });
            } else {
                let x = match self.peek().clone() {
                    Tok::Ident(x) => x,
                    Tok::Underscore => "_".into(),
                    _ => return self.err(&["effect", "identifier"]),
                };
                self.bump();
                if value_branch.is_some() {
                    return Err(SyntaxError::new(bstart, "duplicate value branch", vec![]));
                }
                self.expect(Tok::Arrow)?;
                let b = self.expr()?;
                value_branch = Some((x, Box::new(b)));
            }
            if !self.eat(&Tok::Bar) {
                break;
            }
        }
        let spec = if self.at(&Tok::SpecOpen)
            && matches!(self.peek_at(1), Tok::TryEnsures | Tok::Returns)
        {
            Some(self.handler_spec()?)
        } else {
            None
        };
        let span = start.to(self.prev_span());
        Ok(self.mk(
            ExprKind::Try(Handler {
                body: Box::new(body),
                branches,
                value_branch,
                spec,
            }),
            span,
        ))
    }

    fn assign(&mut self) -> PResult<Expr> {
        let start = self.span();
        if let Tok::Ident(x) = self.peek().clone() {
            if self.peek_at(1) == &Tok::ColonEq {
                self.bump();
                self.bump();
                let v = self.op(0)?;
                let span = start.to(v.span);
                return Ok(self.mk(ExprKind::Assign(x, Box::new(v)), span));
            }
            if self.peek_at(1) == &Tok::DotLParen {
                let save = self.pos;
                self.bump();
                self.bump();
                let idx = self.expr()?;
                self.expect(Tok::RParen)?;
                if self.eat(&Tok::LeftArrow) {
                    let v = self.op(0)?;
                    let span = start.to(v.span);
                    return Ok(self.mk(ExprKind::ArraySet(x, Box::new(idx), Box::new(v)), span));
                }
                self.pos = save;
            }
        }
        self.op(0)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::Mod => BinOp::Mod,
            _ => return None,
        })
    }

    /// Precedence climbing; `&&`/`||` are right-associative, the rest left.
    fn op(&mut self, min: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec <= min {
                break;
            }
            self.bump();
            let next_min = if matches!(op, BinOp::And | BinOp::Or) {
                prec - 1
            } else {
                prec
            };
            let rhs = if op.is_comparison() {
                self.op(prec)?
            } else {
                self.op(next_min)?
            };
            let span = lhs.span.to(rhs.span);
            lhs = self.mk(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
            if op.is_comparison() && self.binop().is_some_and(|o| o.is_comparison()) {
                return self.err(&["parenthesized comparison"]);
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.span();
        match self.peek() {
            Tok::Minus => {
                self.bump();
                let e = self.unary()?;
                let span = start.to(e.span);
                if let ExprKind::Int(n) = e.kind {
                    return Ok(self.mk(ExprKind::Int(-n), span));
                }
                Ok(self.mk(ExprKind::Unary(UnOp::Neg, Box::new(e)), span))
            }
            Tok::Not => {
                self.bump();
                let e = self.unary()?;
                let span = start.to(e.span);
                Ok(self.mk(ExprKind::Unary(UnOp::Not, Box::new(e)), span))
            }
            _ => self.app(),
        }
    }

    fn app(&mut self) -> PResult<Expr> {
        let start = self.span();
        match self.peek() {
            Tok::Perform => {
                self.bump();
                let (eff, args) = if self.eat(&Tok::LParen) {
                    let e = self.uident()?;
                    let mut args = Vec::new();
                    while starts_atom(self.peek()) {
                        args.push(self.atom()?);
                    }
                    self.expect(Tok::RParen)?;
                    (e, args)
                } else {
                    (self.uident()?, vec![])
                };
                let span = start.to(self.prev_span());
                Ok(self.mk(ExprKind::Perform(eff, args), span))
            }
            Tok::Continue => {
                self.bump();
                let k = self.ident()?;
                let arg = self.atom()?;
                let span = start.to(arg.span);
                Ok(self.mk(ExprKind::Continue(k, Box::new(arg)), span))
            }
            _ => {
                let callee = self.atom()?;
                let mut args = Vec::new();
                while starts_atom(self.peek()) {
                    args.push(self.atom()?);
                }
                if args.is_empty() {
                    return Ok(callee);
                }
                let span = start.to(self.prev_span());
                Ok(self.mk(ExprKind::App(Box::new(callee), args), span))
            }
        }
    }

    fn atom(&mut self) -> PResult<Expr> {
        let start = self.span();
        let e = match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                self.mk(ExprKind::Int(n), start)
            }
            Tok::True => {
                self.bump();
                self.mk(ExprKind::Bool(true), start)
            }
            Tok::False => {
                self.bump();
                self.mk(ExprKind::Bool(false), start)
            }
            Tok::Ident(x) => {
                self.bump();
                if self.at(&Tok::DotLParen) {
                    self.bump();
                    let idx = self.expr()?;
                    self.expect(Tok::RParen)?;
                    let span = start.to(self.prev_span());
                    return Ok(self.mk(ExprKind::ArrayGet(x, Box::new(idx)), span));
                }
                self.mk(ExprKind::Var(x), start)
            }
            Tok::UIdent(c) => {
                self.bump();
                let args = if self.at(&Tok::LParen) && self.peek_at(1) != &Tok::RParen {
                    self.bump();
                    let mut v = vec![self.expr()?];
                    while self.eat(&Tok::Comma) {
                        v.push(self.expr()?);
                    }
                    self.expect(Tok::RParen)?;
                    v
                } else {
                    vec![]
                };
                let span = start.to(self.prev_span());
                self.mk(ExprKind::Ctor(c, args), span)
            }
            Tok::Bang => {
                self.bump();
                let x = self.ident()?;
                let span = start.to(self.prev_span());
                self.mk(ExprKind::Deref(x), span)
            }
            Tok::ArrayLength => {
                self.bump();
                let x = self.ident()?;
                let span = start.to(self.prev_span());
                self.mk(ExprKind::ArrayLength(x), span)
            }
            Tok::LParen => {
                self.bump();
                if self.eat(&Tok::RParen) {
                    let span = start.to(self.prev_span());
                    return Ok(self.mk(ExprKind::Unit, span));
                }
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                e
            }
            Tok::Begin => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::End)?;
                e
            }
            Tok::Ref | Tok::ArrayMake => {
                return Err(SyntaxError::new(
                    start,
                    "mutable state can only be declared at top level",
                    vec!["expression".into()],
                ))
            }
            _ => return self.err(&["expression"]),
        };
        Ok(e)
    }

    // -- terms -------------------------------------------------------------

    pub fn term(&mut self) -> PResult<Term> {
        let lhs = self.term_imp()?;
        if self.eat(&Tok::Iff) {
            let rhs = self.term_imp()?;
            let span = lhs.span.to(rhs.span);
            return Ok(Term::new(TermKind::Iff(Box::new(lhs), Box::new(rhs)), span));
        }
        Ok(lhs)
    }

    fn term_imp(&mut self) -> PResult<Term> {
        let lhs = self.term_op(0)?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.term_imp()?;
            let span = lhs.span.to(rhs.span);
            return Ok(Term::new(
                TermKind::Implies(Box::new(lhs), Box::new(rhs)),
                span,
            ));
        }
        Ok(lhs)
    }

    fn term_op(&mut self, min: u8) -> PResult<Term> {
        let mut lhs = self.term_unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec <= min {
                break;
            }
            self.bump();
            let next_min = if matches!(op, BinOp::And | BinOp::Or) {
                prec - 1
            } else {
                prec
            };
            let rhs = self.term_op(next_min)?;
            let span = lhs.span.to(rhs.span);
            lhs = Term::new(TermKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn term_unary(&mut self) -> PResult<Term> {
        let start = self.span();
        match self.peek() {
            Tok::Not => {
                self.bump();
                let t = self.term_unary()?;
                let span = start.to(t.span);
                Ok(Term::new(TermKind::Unary(UnOp::Not, Box::new(t)), span))
            }
            Tok::Minus => {
                self.bump();
                let t = self.term_unary()?;
                let span = start.to(t.span);
                if let TermKind::Int(n) = t.kind {
                    return Ok(Term::new(TermKind::Int(-n), span));
                }
                Ok(Term::new(TermKind::Unary(UnOp::Neg, Box::new(t)), span))
            }
            Tok::Forall | Tok::Exists => {
                let universal = matches!(self.bump().tok, Tok::Forall);
                let binders = self.binders()?;
                self.expect(Tok::Dot)?;
                let body = self.term()?;
                let span = start.to(body.span);
                let kind = if universal {
                    TermKind::Forall(binders, Box::new(body))
                } else {
                    TermKind::Exists(binders, Box::new(body))
                };
                Ok(Term::new(kind, span))
            }
            Tok::Old => {
                self.bump();
                let t = self.term_atom()?;
                let span = start.to(t.span);
                Ok(Term::new(TermKind::Old(Box::new(t)), span))
            }
            Tok::If => {
                self.bump();
                let c = self.term()?;
                self.expect(Tok::Then)?;
                let a = self.term()?;
                self.expect(Tok::Else)?;
                let b = self.term()?;
                let span = start.to(b.span);
                Ok(Term::new(
                    TermKind::If(Box::new(c), Box::new(a), Box::new(b)),
                    span,
                ))
            }
            Tok::Match => {
                self.bump();
                let s = self.term()?;
                self.expect(Tok::With)?;
                self.eat(&Tok::Bar);
                let mut arms = Vec::new();
                loop {
                    let p = self.pattern()?;
                    self.expect(Tok::Arrow)?;
                    arms.push((p, self.term_imp()?));
                    if !self.eat(&Tok::Bar) {
                        break;
                    }
                }
                let span = start.to(self.prev_span());
                Ok(Term::new(TermKind::Match(Box::new(s), arms), span))
            }
            _ => self.term_app(),
        }
    }

    fn binders(&mut self) -> PResult<Vec<(String, SourceType)>> {
        let mut out = Vec::new();
        let mut pending = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Ident(x) => {
                    self.bump();
                    pending.push(x);
                }
                Tok::LParen => {
                    self.bump();
                    let mut names = vec![self.ident()?];
                    while let Tok::Ident(x) = self.peek().clone() {
                        self.bump();
                        names.push(x);
                    }
                    self.expect(Tok::Colon)?;
                    let t = self.ty()?;
                    self.expect(Tok::RParen)?;
                    out.extend(names.into_iter().map(|n| (n, t.clone())));
                }
                Tok::Colon => {
                    self.bump();
                    let t = self.ty()?;
                    out.extend(pending.drain(..).map(|n| (n, t.clone())));
                    self.eat(&Tok::Comma);
                }
                _ => break,
            }
        }
        out.extend(pending.into_iter().map(|n| (n, SourceType::Int)));
        if out.is_empty() {
            return self.err(&["binder"]);
        }
        Ok(out)
    }

    fn term_app(&mut self) -> PResult<Term> {
        let start = self.span();
        if let Tok::Ident(f) = self.peek().clone() {
            if starts_term_atom(self.peek_at(1)) {
                self.bump();
                let mut args = Vec::new();
                while starts_term_atom(self.peek()) {
                    args.push(self.term_atom()?);
                }
                let span = start.to(self.prev_span());
                return Ok(Term::new(TermKind::App(f, args), span));
            }
        }
        self.term_atom()
    }

    fn term_atom(&mut self) -> PResult<Term> {
        let start = self.span();
        let mut t = match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Term::new(TermKind::Int(n), start)
            }
            Tok::True => {
                self.bump();
                Term::new(TermKind::Bool(true), start)
            }
            Tok::False => {
                self.bump();
                Term::new(TermKind::Bool(false), start)
            }
            Tok::Ident(x) => {
                self.bump();
                Term::new(TermKind::Var(x), start)
            }
            Tok::Bang => {
                self.bump();
                let x = self.ident()?;
                Term::new(TermKind::Deref(x), start.to(self.prev_span()))
            }
            Tok::UIdent(c) => {
                self.bump();
                let args = if self.at(&Tok::LParen) && self.peek_at(1) != &Tok::RParen {
                    self.bump();
                    let mut v = vec![self.term()?];
                    while self.eat(&Tok::Comma) {
                        v.push(self.term()?);
                    }
                    self.expect(Tok::RParen)?;
                    v
                } else {
                    vec![]
                };
                Term::new(TermKind::Ctor(c, args), start.to(self.prev_span()))
            }
            Tok::LParen => {
                self.bump();
                if self.eat(&Tok::RParen) {
                    Term::new(TermKind::Unit, start.to(self.prev_span()))
                } else {
                    let t = self.term()?;
                    self.expect(Tok::RParen)?;
                    t
                }
            }
            _ => return self.err(&["term"]),
        };
        loop {
            match self.peek() {
                Tok::LBracket | Tok::DotLParen => {
                    let close = if self.at(&Tok::LBracket) {
                        Tok::RBracket
                    } else {
                        Tok::RParen
                    };
                    self.bump();
                    let idx = self.term()?;
                    self.expect(close)?;
                    let span = t.span.to(self.prev_span());
                    t = Term::new(TermKind::Get(Box::new(t), Box::new(idx)), span);
                }
                _ => return Ok(t),
            }
        }
    }
}
