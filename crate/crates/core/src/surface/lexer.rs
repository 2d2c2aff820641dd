use super::ast::Span;
use super::SyntaxError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    UIdent(String),
    Int(i64),
    // keywords
    Let,
    Rec,
    In,
    Fun,
    If,
    Then,
    Else,
    Match,
    With,
    Try,
    Effect,
    Perform,
    Continue,
    Type,
    Of,
    Ref,
    Begin,
    End,
    True,
    False,
    Not,
    Mod,
    Old,
    Forall,
    Exists,
    Protocol,
    Requires,
    Ensures,
    Modifies,
    Performs,
    Variant,
    TryEnsures,
    Returns,
    Predicate,
    Function,
    ArrayMake,
    ArrayLength,
    // punctuation
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    DotLParen,
    Comma,
    Semi,
    Colon,
    Arrow,
    LeftArrow,
    Iff,
    ColonEq,
    Bang,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    AndAnd,
    OrOr,
    Bar,
    Dot,
    Underscore,
    GhostAttr,
    SpecOpen,
    SpecClose,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::UIdent(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Eof => "end of input".to_string(),
            t => format!("`{}`", t.text()),
        }
    }

    pub fn text(&self) -> &'static str {
        match self {
            Tok::Let => "let",
            Tok::Rec => "rec",
            Tok::In => "in",
            Tok::Fun => "fun",
            Tok::If => "if",
            Tok::Then => "then",
            Tok::Else => "else",
            Tok::Match => "match",
            Tok::With => "with",
            Tok::Try => "try",
            Tok::Effect => "effect",
            Tok::Perform => "perform",
            Tok::Continue => "continue",
            Tok::Type => "type",
            Tok::Of => "of",
            Tok::Ref => "ref",
            Tok::Begin => "begin",
            Tok::End => "end",
            Tok::True => "true",
            Tok::False => "false",
            Tok::Not => "not",
            Tok::Mod => "mod",
            Tok::Old => "old",
            Tok::Forall => "forall",
            Tok::Exists => "exists",
            Tok::Protocol => "protocol",
            Tok::Requires => "requires",
            Tok::Ensures => "ensures",
            Tok::Modifies => "modifies",
            Tok::Performs => "performs",
            Tok::Variant => "variant",
            Tok::TryEnsures => "try_ensures",
            Tok::Returns => "returns",
            Tok::Predicate => "predicate",
            Tok::Function => "function",
            Tok::ArrayMake => "Array.make",
            Tok::ArrayLength => "Array.length",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::DotLParen => ".(",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Arrow => "->",
            Tok::LeftArrow => "<-",
            Tok::Iff => "<->",
            Tok::ColonEq => ":=",
            Tok::Bang => "!",
            Tok::Eq => "=",
            Tok::Ne => "<>",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Bar => "|",
            Tok::Dot => ".",
            Tok::Underscore => "_",
            Tok::GhostAttr => "[@ghost]",
            Tok::SpecOpen => "(*@",
            Tok::SpecClose => "*)",
            Tok::Ident(_) | Tok::UIdent(_) | Tok::Int(_) | Tok::Eof => "",
        }
    }
}

fn keyword(s: &str) -> Option<Tok> {
    Some(match s {
        "let" => Tok::Let,
        "rec" => Tok::Rec,
        "in" => Tok::In,
        "fun" => Tok::Fun,
        "if" => Tok::If,
        "then" => Tok::Then,
        "else" => Tok::Else,
        "match" => Tok::Match,
        "with" => Tok::With,
        "try" => Tok::Try,
        "effect" => Tok::Effect,
        "perform" => Tok::Perform,
        "continue" => Tok::Continue,
        "type" => Tok::Type,
        "of" => Tok::Of,
        "ref" => Tok::Ref,
        "begin" => Tok::Begin,
        "end" => Tok::End,
        "true" => Tok::True,
        "false" => Tok::False,
        "not" => Tok::Not,
        "mod" => Tok::Mod,
        "old" => Tok::Old,
        "forall" => Tok::Forall,
        "exists" => Tok::Exists,
        "protocol" => Tok::Protocol,
        "requires" => Tok::Requires,
        "ensures" => Tok::Ensures,
        "modifies" => Tok::Modifies,
        "performs" => Tok::Performs,
        "variant" => Tok::Variant,
        "try_ensures" => Tok::TryEnsures,
        "returns" => Tok::Returns,
        "predicate" => Tok::Predicate,
        "function" => Tok::Function,
        _ => return None,
    })
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl Cursor<'_> {
    fn peek(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn bump(&mut self) {
        if let Some(c) = self.peek(0) {
            self.pos += 1;
            if c == b'\n' {
                self.line += 1;
                self.col = 1;
            } else if c & 0xC0 != 0x80 {
                self.col += 1;
            }
        }
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s.as_bytes())
    }

    fn here(&self) -> Span {
        Span {
            start: self.pos,
            end: self.pos,
            line: self.line,
            col: self.col,
        }
    }
}

pub fn lex(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut c = Cursor {
        src: text.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    let mut in_spec = false;
    loop {
        // whitespace and ordinary comments
        loop {
            match c.peek(0) {
                Some(b' ' | b'\t' | b'\r' | b'\n') => c.bump(),
                Some(b'(') if c.peek(1) == Some(b'*') && c.peek(2) != Some(b'@') => {
                    skip_comment(&mut c)?;
                }
                _ => break,
            }
        }
        let start = c.here();
        let Some(ch) = c.peek(0) else {
            if in_spec {
                return Err(SyntaxError::new(
                    start,
                    "unterminated specification block",
                    vec!["*)".into()],
                ));
            }
            out.push(Token {
                tok: Tok::Eof,
                span: start,
            });
            return Ok(out);
        };
        let tok = if ch.is_ascii_digit() {
            let mut n: i64 = 0;
            while let Some(d) = c.peek(0).filter(u8::is_ascii_digit) {
                n = n
                    .checked_mul(10)
                    .and_then(|n| n.checked_add(i64::from(d - b'0')))
                    .ok_or_else(|| SyntaxError::new(start, "integer literal too large", vec![]))?;
                c.bump();
            }
            Tok::Int(n)
        } else if ch.is_ascii_alphabetic() || ch == b'_' {
            let begin = c.pos;
            while let Some(d) = c.peek(0) {
                if d.is_ascii_alphanumeric() || d == b'_' || d == b'\'' {
                    c.bump();
                } else {
                    break;
                }
            }
            let word = &text[begin..c.pos];
            if word == "Array" && c.starts_with(".make") {
                (0..5).for_each(|_| c.bump());
                Tok::ArrayMake
            } else if word == "Array" && c.starts_with(".length") {
                (0..7).for_each(|_| c.bump());
                Tok::ArrayLength
            } else if word == "_" {
                Tok::Underscore
            } else if ch == b'_' {
                // Names starting with `_` belong to the translation.
                return Err(SyntaxError::new(start, format!("identifier `{word}` is reserved"), vec![]));
            } else if let Some(k) = keyword(word) {
                k
            } else if ch.is_ascii_uppercase() {
                Tok::UIdent(word.to_string())
            } else {
                Tok::Ident(word.to_string())
            }
        } else {
            let (tok, len) = punct(&c).ok_or_else(|| {
                let shown = text[c.pos..].chars().next().unwrap_or('?');
                SyntaxError::new(start, format!("unexpected character `{shown}`"), vec![])
            })?;
            (0..len).for_each(|_| c.bump());
            match tok {
                Tok::SpecOpen if in_spec => {
                    return Err(SyntaxError::new(
                        start,
                        "nested specification block",
                        vec![],
                    ));
                }
                Tok::SpecOpen => in_spec = true,
                Tok::SpecClose if !in_spec => {
                    return Err(SyntaxError::new(start, "`*)` outside of a comment", vec![]));
                }
                Tok::SpecClose => in_spec = false,
                _ => {}
            }
            tok
        };
        let end = c.pos;
        out.push(Token {
            tok,
            span: Span { end, ..start },
        });
    }
}

fn skip_comment(c: &mut Cursor<'_>) -> Result<(), SyntaxError> {
    let start = c.here();
    c.bump();
    c.bump();
    let mut depth = 1;
    while depth > 0 {
        match (c.peek(0), c.peek(1)) {
            (None, _) => {
                return Err(SyntaxError::new(
                    start,
                    "unterminated comment",
                    vec!["*)".into()],
                ))
            }
            (Some(b'('), Some(b'*')) => {
                depth += 1;
                c.bump();
                c.bump();
            }
            (Some(b'*'), Some(b')')) => {
                depth -= 1;
                c.bump();
                c.bump();
            }
            _ => c.bump(),
        }
    }
    Ok(())
}

fn punct(c: &Cursor<'_>) -> Option<(Tok, usize)> {
    const TABLE: &[(&str, Tok)] = &[
        ("[@ghost]", Tok::GhostAttr),
        ("(*@", Tok::SpecOpen),
        ("<->", Tok::Iff),
        ("*)", Tok::SpecClose),
        (".(", Tok::DotLParen),
        ("->", Tok::Arrow),
        ("<-", Tok::LeftArrow),
        (":=", Tok::ColonEq),
        ("<>", Tok::Ne),
        ("<=", Tok::Le),
        (">=", Tok::Ge),
        ("&&", Tok::AndAnd),
        ("||", Tok::OrOr),
        ("(", Tok::LParen),
        (")", Tok::RParen),
        ("[", Tok::LBracket),
        ("]", Tok::RBracket),
        ("{", Tok::LBrace),
        ("}", Tok::RBrace),
        (",", Tok::Comma),
        (";", Tok::Semi),
        (":", Tok::Colon),
        ("!", Tok::Bang),
        ("=", Tok::Eq),
        ("<", Tok::Lt),
        (">", Tok::Gt),
        ("+", Tok::Plus),
        ("-", Tok::Minus),
        ("*", Tok::Star),
        ("/", Tok::Slash),
        ("|", Tok::Bar),
        (".", Tok::Dot),
    ];
    TABLE
        .iter()
        .find(|(s, _)| c.starts_with(s))
        .map(|(s, t)| (t.clone(), s.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn spec_blocks_and_comments() {
        assert_eq!(
            toks("(* plain *) (*@ ensures !p = 1 *)"),
            vec![
                Tok::SpecOpen,
                Tok::Ensures,
                Tok::Bang,
                Tok::Ident("p".into()),
                Tok::Eq,
                Tok::Int(1),
                Tok::SpecClose,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn nested_plain_comments() {
        assert_eq!(
            toks("(* a (* b *) c *) x"),
            vec![Tok::Ident("x".into()), Tok::Eof]
        );
    }

    #[test]
    fn array_builtins_and_arrows() {
        assert_eq!(
            toks("Array.make a.(i) <- x <-> y"),
            vec![
                Tok::ArrayMake,
                Tok::Ident("a".into()),
                Tok::DotLParen,
                Tok::Ident("i".into()),
                Tok::RParen,
                Tok::LeftArrow,
                Tok::Ident("x".into()),
                Tok::Iff,
                Tok::Ident("y".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_tracked() {
        let ts = lex("let\n  x").unwrap();
        assert_eq!((ts[1].span.line, ts[1].span.col), (2, 3));
    }

    #[test]
    fn unterminated_spec_is_an_error() {
        let e = lex("(*@ ensures true").unwrap_err();
        assert!(e.message.contains("unterminated"));
    }
}
