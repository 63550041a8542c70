//! Tokenizer for transformer sources.
//!
//! Only a handful of words are lexical keywords; names such as `prev`,
//! `curr`, `max` or `map` are identifiers that the parser and validator
//! resolve by position.

use std::fmt;

use super::diagnostic::{Diagnostic, DiagnosticCode, Span};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Keyword {
    Def,
    Shape,
    As,
    Transformer,
    Func,
    True,
    False,
    And,
    Or,
    Xor,
    Not,
    Traverse,
    Lp,
}

impl Keyword {
    pub fn from_word(word: &str) -> Option<Keyword> {
        Some(match word {
            "def" => Keyword::Def,
            "Shape" => Keyword::Shape,
            "as" => Keyword::As,
            "transformer" => Keyword::Transformer,
            "func" => Keyword::Func,
            "true" => Keyword::True,
            "false" => Keyword::False,
            "and" => Keyword::And,
            "or" => Keyword::Or,
            "xor" => Keyword::Xor,
            "not" => Keyword::Not,
            "traverse" => Keyword::Traverse,
            "lp" => Keyword::Lp,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Def => "def",
            Keyword::Shape => "Shape",
            Keyword::As => "as",
            Keyword::Transformer => "transformer",
            Keyword::Func => "func",
            Keyword::True => "true",
            Keyword::False => "false",
            Keyword::And => "and",
            Keyword::Or => "or",
            Keyword::Xor => "xor",
            Keyword::Not => "not",
            Keyword::Traverse => "traverse",
            Keyword::Lp => "lp",
        }
    }

    pub const ALL: [Keyword; 13] = [
        Keyword::Def,
        Keyword::Shape,
        Keyword::As,
        Keyword::Transformer,
        Keyword::Func,
        Keyword::True,
        Keyword::False,
        Keyword::And,
        Keyword::Or,
        Keyword::Xor,
        Keyword::Not,
        Keyword::Traverse,
        Keyword::Lp,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Plus,
    Minus,
    Star,
    Slash,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    Question,
    Colon,
    Arrow,
    Assign,
    Dot,
    /// `<>`, zonotope membership in shape constraints.
    Within,
}

impl Op {
    pub fn as_str(self) -> &'static str {
        match self {
            Op::Plus => "+",
            Op::Minus => "-",
            Op::Star => "*",
            Op::Slash => "/",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::EqEq => "==",
            Op::Ne => "!=",
            Op::Question => "?",
            Op::Colon => ":",
            Op::Arrow => "->",
            Op::Assign => "=",
            Op::Dot => ".",
            Op::Within => "<>",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Delim {
    LParen,
    RParen,
    LSqr,
    RSqr,
    LBrace,
    RBrace,
    Comma,
    Semi,
}

impl Delim {
    pub fn as_str(self) -> &'static str {
        match self {
            Delim::LParen => "(",
            Delim::RParen => ")",
            Delim::LSqr => "[",
            Delim::RSqr => "]",
            Delim::LBrace => "{",
            Delim::RBrace => "}",
            Delim::Comma => ",",
            Delim::Semi => ";",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident(String),
    Int(i64),
    Float(f64),
    Op(Op),
    Delim(Delim),
}

/// Coarse token classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenClass {
    Keyword,
    Identifier,
    IntLiteral,
    FloatLiteral,
    Operator,
    Delimiter,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: Span,
}

impl Token {
    pub fn class(&self) -> TokenClass {
        match self.kind {
            TokenKind::Keyword(_) => TokenClass::Keyword,
            TokenKind::Ident(_) => TokenClass::Identifier,
            TokenKind::Int(_) => TokenClass::IntLiteral,
            TokenKind::Float(_) => TokenClass::FloatLiteral,
            TokenKind::Op(_) => TokenClass::Operator,
            TokenKind::Delim(_) => TokenClass::Delimiter,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.lexeme)
    }
}

/// Tokenizes `source`. Every illegal character or operator is reported; the
/// token stream is only returned when there are none.
pub fn lex(source: &str) -> Result<Vec<Token>, Vec<Diagnostic>> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut diags = Vec::new();
    let mut i = 0;

    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;

        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &source[start..i];
            let kind = match Keyword::from_word(word) {
                Some(kw) => TokenKind::Keyword(kw),
                None => TokenKind::Ident(word.to_string()),
            };
            tokens.push(Token {
                kind,
                lexeme: word.to_string(),
                span: Span::new(start, i),
            });
            continue;
        }

        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            match lex_number(source, start) {
                Ok((kind, end)) => {
                    tokens.push(Token {
                        kind,
                        lexeme: source[start..end].to_string(),
                        span: Span::new(start, end),
                    });
                    i = end;
                }
                Err((diag, end)) => {
                    diags.push(diag);
                    i = end;
                }
            }
            continue;
        }

        let two = bytes.get(i + 1).copied();
        let (kind, len) = match (c, two) {
            (b'&', Some(b'&')) | (b'|', Some(b'|')) => {
                let op = &source[i..i + 2];
                let hint = if op == "&&" { "and" } else { "or" };
                diags.push(Diagnostic::new(
                    DiagnosticCode::IllegalLogicalOp,
                    format!("illegal logical operator `{op}`, use `{hint}`"),
                    Span::new(i, i + 2),
                ));
                i += 2;
                continue;
            }
            (b'<', Some(b'=')) => (TokenKind::Op(Op::Le), 2),
            (b'<', Some(b'>')) => (TokenKind::Op(Op::Within), 2),
            (b'>', Some(b'=')) => (TokenKind::Op(Op::Ge), 2),
            (b'=', Some(b'=')) => (TokenKind::Op(Op::EqEq), 2),
            (b'!', Some(b'=')) => (TokenKind::Op(Op::Ne), 2),
            (b'-', Some(b'>')) => (TokenKind::Op(Op::Arrow), 2),
            (b'+', _) => (TokenKind::Op(Op::Plus), 1),
            (b'-', _) => (TokenKind::Op(Op::Minus), 1),
            (b'*', _) => (TokenKind::Op(Op::Star), 1),
            (b'/', _) => (TokenKind::Op(Op::Slash), 1),
            (b'<', _) => (TokenKind::Op(Op::Lt), 1),
            (b'>', _) => (TokenKind::Op(Op::Gt), 1),
            (b'?', _) => (TokenKind::Op(Op::Question), 1),
            (b':', _) => (TokenKind::Op(Op::Colon), 1),
            (b'=', _) => (TokenKind::Op(Op::Assign), 1),
            (b'.', _) => (TokenKind::Op(Op::Dot), 1),
            (b'(', _) => (TokenKind::Delim(Delim::LParen), 1),
            (b')', _) => (TokenKind::Delim(Delim::RParen), 1),
            (b'[', _) => (TokenKind::Delim(Delim::LSqr), 1),
            (b']', _) => (TokenKind::Delim(Delim::RSqr), 1),
            (b'{', _) => (TokenKind::Delim(Delim::LBrace), 1),
            (b'}', _) => (TokenKind::Delim(Delim::RBrace), 1),
            (b',', _) => (TokenKind::Delim(Delim::Comma), 1),
            (b';', _) => (TokenKind::Delim(Delim::Semi), 1),
            _ => {
                // Report whole UTF-8 scalars, not bytes.
                let ch = source[i..].chars().next().unwrap_or('\u{fffd}');
                let width = ch.len_utf8();
                diags.push(Diagnostic::new(
                    DiagnosticCode::UnexpectedToken,
                    format!("unexpected character `{ch}`"),
                    Span::new(i, i + width),
                ));
                i += width;
                continue;
            }
        };
        tokens.push(Token {
            kind,
            lexeme: source[i..i + len].to_string(),
            span: Span::new(i, i + len),
        });
        i += len;
    }

    if diags.is_empty() {
        Ok(tokens)
    } else {
        Err(diags)
    }
}

fn lex_number(source: &str, start: usize) -> Result<(TokenKind, usize), (Diagnostic, usize)> {
    let bytes = source.as_bytes();
    let mut i = start;
    let mut is_float = false;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    // A '.' followed by a letter is a method call on an integer, not a fraction.
    if i < bytes.len()
        && bytes[i] == b'.'
        && !bytes
            .get(i + 1)
            .is_some_and(|b| b.is_ascii_alphabetic() || *b == b'_')
    {
        is_float = true;
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            is_float = true;
            i = j;
        }
    }
    let text = &source[start..i];
    let span = Span::new(start, i);
    if is_float {
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok((TokenKind::Float(v), i)),
            _ => Err((
                Diagnostic::new(
                    DiagnosticCode::UnexpectedToken,
                    format!("float literal `{text}` is not a finite number"),
                    span,
                ),
                i,
            )),
        }
    } else {
        match text.parse::<i64>() {
            Ok(v) => Ok((TokenKind::Int(v), i)),
            Err(_) => Err((
                Diagnostic::new(
                    DiagnosticCode::UnexpectedToken,
                    format!("integer literal `{text}` is out of range"),
                    span,
                ),
                i,
            )),
        }
    }
}
