//! Lexer for the supported C subset.

use std::fmt;

use super::{FrontendError, SourceLocation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Int,
    Char,
    Void,
    Float,
    Double,
    Long,
    Short,
    Unsigned,
    Signed,
    Struct,
    Const,
    If,
    Else,
    For,
    While,
    Break,
    Continue,
    Return,
    /// A C keyword outside the subset (`goto`, `switch`, ...); never parsed.
    Unsupported,
}

impl Keyword {
    fn from_ident(s: &str) -> Option<Keyword> {
        Some(match s {
            "int" => Keyword::Int,
            "char" => Keyword::Char,
            "void" => Keyword::Void,
            "float" => Keyword::Float,
            "double" => Keyword::Double,
            "long" => Keyword::Long,
            "short" => Keyword::Short,
            "unsigned" => Keyword::Unsigned,
            "signed" => Keyword::Signed,
            "struct" => Keyword::Struct,
            "const" => Keyword::Const,
            "if" => Keyword::If,
            "else" => Keyword::Else,
            "for" => Keyword::For,
            "while" => Keyword::While,
            "break" => Keyword::Break,
            "continue" => Keyword::Continue,
            "return" => Keyword::Return,
            "goto" | "switch" | "case" | "default" | "do" | "typedef" | "sizeof" | "enum"
            | "union" | "static" | "extern" | "volatile" | "register" => Keyword::Unsupported,
            _ => return None,
        })
    }

    /// True for keywords that may start a type specifier.
    pub fn is_type_specifier(self) -> bool {
        matches!(
            self,
            Keyword::Int
                | Keyword::Char
                | Keyword::Void
                | Keyword::Float
                | Keyword::Double
                | Keyword::Long
                | Keyword::Short
                | Keyword::Unsigned
                | Keyword::Signed
                | Keyword::Struct
                | Keyword::Const
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Punct {
    EqualEqual,
    NotEqual,
    AndAnd,
    OrOr,
    Amp,
    Pipe,
    Bang,
    Arrow,
    Star,
    Assign,
    Less,
    Greater,
    LessEqual,
    GreaterEqual,
    Plus,
    Minus,
    Slash,
    Percent,
    Dot,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semicolon,
    Comma,
}

impl Punct {
    pub fn spelling(self) -> &'static str {
        match self {
            Punct::EqualEqual => "==",
            Punct::NotEqual => "!=",
            Punct::AndAnd => "&&",
            Punct::OrOr => "||",
            Punct::Amp => "&",
            Punct::Pipe => "|",
            Punct::Bang => "!",
            Punct::Arrow => "->",
            Punct::Star => "*",
            Punct::Assign => "=",
            Punct::Less => "<",
            Punct::Greater => ">",
            Punct::LessEqual => "<=",
            Punct::GreaterEqual => ">=",
            Punct::Plus => "+",
            Punct::Minus => "-",
            Punct::Slash => "/",
            Punct::Percent => "%",
            Punct::Dot => ".",
            Punct::LParen => "(",
            Punct::RParen => ")",
            Punct::LBrace => "{",
            Punct::RBrace => "}",
            Punct::Semicolon => ";",
            Punct::Comma => ",",
        }
    }
}

// Longest match first.
const PUNCTS: &[(&str, Punct)] = &[
    ("==", Punct::EqualEqual),
    ("!=", Punct::NotEqual),
    ("&&", Punct::AndAnd),
    ("||", Punct::OrOr),
    ("->", Punct::Arrow),
    ("<=", Punct::LessEqual),
    (">=", Punct::GreaterEqual),
    ("&", Punct::Amp),
    ("|", Punct::Pipe),
    ("!", Punct::Bang),
    ("*", Punct::Star),
    ("=", Punct::Assign),
    ("<", Punct::Less),
    (">", Punct::Greater),
    ("+", Punct::Plus),
    ("-", Punct::Minus),
    ("/", Punct::Slash),
    ("%", Punct::Percent),
    (".", Punct::Dot),
    ("(", Punct::LParen),
    (")", Punct::RParen),
    ("{", Punct::LBrace),
    ("}", Punct::RBrace),
    (";", Punct::Semicolon),
    (",", Punct::Comma),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Keyword(Keyword),
    /// Integer or floating literal, spelled as written.
    Number(String),
    /// Character literal including the quotes.
    CharLit(String),
    /// String literal including the quotes.
    StringLit(String),
    Punct(Punct),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub spelling: String,
    pub loc: SourceLocation,
}

impl Token {
    pub fn is_punct(&self, p: Punct) -> bool {
        self.kind == TokenKind::Punct(p)
    }

    pub fn is_keyword(&self, k: Keyword) -> bool {
        self.kind == TokenKind::Keyword(k)
    }

    pub fn ident(&self) -> Option<&str> {
        match &self.kind {
            TokenKind::Ident(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spelling)
    }
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    column: u32,
    file: &'a str,
}

impl Cursor<'_> {
    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn loc(&self) -> SourceLocation {
        SourceLocation::new(self.file, self.line, self.column)
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(i, c)| self.peek(i) == Some(c))
    }
}

/// Splits `source` into tokens. Comments and whitespace are discarded.
pub fn lex(file: &str, source: &str) -> Result<Vec<Token>, FrontendError> {
    let mut cur = Cursor {
        chars: source.chars().collect(),
        pos: 0,
        line: 1,
        column: 1,
        file,
    };
    let mut tokens = Vec::new();

    while let Some(c) = cur.peek(0) {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if cur.starts_with("//") {
            while let Some(c) = cur.peek(0) {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if cur.starts_with("/*") {
            let start = cur.loc();
            cur.bump();
            cur.bump();
            loop {
                if cur.starts_with("*/") {
                    cur.bump();
                    cur.bump();
                    break;
                }
                if cur.bump().is_none() {
                    return Err(FrontendError::Lex {
                        loc: start,
                        message: "unterminated block comment".into(),
                    });
                }
            }
            continue;
        }

        let loc = cur.loc();
        let start = cur.pos;
        let kind = if c.is_ascii_alphabetic() || c == '_' {
            while matches!(cur.peek(0), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                cur.bump();
            }
            let text: String = cur.chars[start..cur.pos].iter().collect();
            match Keyword::from_ident(&text) {
                Some(k) => TokenKind::Keyword(k),
                None => TokenKind::Ident(text),
            }
        } else if c.is_ascii_digit() || (c == '.' && matches!(cur.peek(1), Some(d) if d.is_ascii_digit()))
        {
            while matches!(cur.peek(0), Some(c) if c.is_ascii_alphanumeric() || c == '.') {
                cur.bump();
            }
            TokenKind::Number(cur.chars[start..cur.pos].iter().collect())
        } else if c == '"' || c == '\'' {
            cur.bump();
            loop {
                match cur.bump() {
                    Some('\\') => {
                        if cur.bump().is_none() {
                            break;
                        }
                    }
                    Some(q) if q == c => break,
                    Some('\n') | None => {
                        return Err(FrontendError::Lex {
                            loc,
                            message: "unterminated literal".into(),
                        })
                    }
                    Some(_) => {}
                }
            }
            let text: String = cur.chars[start..cur.pos].iter().collect();
            if c == '"' {
                TokenKind::StringLit(text)
            } else {
                TokenKind::CharLit(text)
            }
        } else if let Some(&(s, p)) = PUNCTS.iter().find(|(s, _)| cur.starts_with(s)) {
            for _ in 0..s.chars().count() {
                cur.bump();
            }
            TokenKind::Punct(p)
        } else {
            return Err(FrontendError::Lex {
                loc,
                message: format!("unrecognized character {c:?}"),
            });
        };
        let spelling = cur.chars[start..cur.pos].iter().collect();
        tokens.push(Token { kind, spelling, loc });
    }
    Ok(tokens)
}
