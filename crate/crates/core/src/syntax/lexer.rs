//! Tokenizer shared by the model parser and the temporal-property parser.

use std::fmt;

use super::ast::Span;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    // keywords
    Module,
    End,
    Interface,
    Locals,
    Timers,
    Depends,
    Events,
    In,
    Out,
    Share,
    Fair,
    Just,
    Compassionate,
    Spontaneous,
    When,
    Start,
    Stop,
    Do,
    If,
    Then,
    Elseif,
    Else,
    Fi,
    Skip,
    Sync,
    As,
    With,
    Instances,
    System,
    Properties,
    Const,
    Type,
    Predicate,
    Globals,
    True,
    False,
    Bool,
    Array,
    Of,
    Queue,
    Call,
    Forall,
    Exists,
    Mono,
    // punctuation
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    ColonColon,
    Assign,
    Rename,
    Eq,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Bang,
    AndAnd,
    OrOr,
    Arrow,
    FatArrow,
    DotDot,
    Dot,
    At,
    Prime,
    Box,
    Diamond,
    Eof,
}

impl TokenKind {
    fn keyword(word: &str) -> Option<TokenKind> {
        use TokenKind::*;
        Some(match word {
            "module" => Module,
            "end" => End,
            "interface" => Interface,
            "locals" => Locals,
            "timers" => Timers,
            "depends" => Depends,
            "events" => Events,
            "in" => In,
            "out" => Out,
            "share" => Share,
            "fair" => Fair,
            "just" => Just,
            "compassionate" => Compassionate,
            "spontaneous" => Spontaneous,
            "when" => When,
            "start" => Start,
            "stop" => Stop,
            "do" => Do,
            "if" => If,
            "then" => Then,
            "elseif" => Elseif,
            "else" => Else,
            "fi" => Fi,
            "skip" => Skip,
            "sync" => Sync,
            "as" => As,
            "with" => With,
            "instances" => Instances,
            "system" => System,
            "properties" => Properties,
            "const" => Const,
            "type" => Type,
            "predicate" => Predicate,
            "globals" => Globals,
            "true" => True,
            "false" => False,
            "bool" => Bool,
            "array" => Array,
            "of" => Of,
            "queue" => Queue,
            "call" => Call,
            "forall" => Forall,
            "exists" => Exists,
            "mono" => Mono,
            _ => return None,
        })
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use TokenKind::*;
        let s = match self {
            Ident(name) => return write!(f, "identifier `{name}`"),
            Int(n) => return write!(f, "integer `{n}`"),
            Eof => "end of input",
            LParen => "`(`",
            RParen => "`)`",
            LBracket => "`[`",
            RBracket => "`]`",
            LBrace => "`{`",
            RBrace => "`}`",
            Comma => "`,`",
            Semi => "`;`",
            Colon => "`:`",
            ColonColon => "`::`",
            Assign => "`:=`",
            Rename => "`::=`",
            Eq => "`=`",
            EqEq => "`==`",
            NotEq => "`!=`",
            Lt => "`<`",
            Le => "`<=`",
            Gt => "`>`",
            Ge => "`>=`",
            Plus => "`+`",
            Minus => "`-`",
            Star => "`*`",
            Slash => "`/`",
            Percent => "`%`",
            Bang => "`!`",
            AndAnd => "`&&`",
            OrOr => "`||`",
            Arrow => "`->`",
            FatArrow => "`=>`",
            DotDot => "`..`",
            Dot => "`.`",
            At => "`@`",
            Prime => "`'`",
            Box => "`[]`",
            Diamond => "`<>`",
            other => return write!(f, "keyword `{}`", format!("{other:?}").to_lowercase()),
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    pub message: String,
    pub span: Span,
}

/// Splits `source` into tokens. `line`/`col` are 1-based and count chars.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    Lexer::new(source).run()
}

struct Lexer<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            chars: src.char_indices().collect(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).map(|&(_, c)| c)
    }

    fn offset(&self) -> usize {
        self.chars
            .get(self.pos)
            .map(|&(o, _)| o)
            .unwrap_or(self.src.len())
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek(0)?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let (line, col, start) = (self.line, self.col, self.offset());
            let Some(c) = self.peek(0) else {
                out.push(Token {
                    kind: TokenKind::Eof,
                    span: Span::new(line, col, start, start),
                });
                return Ok(out);
            };
            let kind = if c.is_ascii_alphabetic() || c == '_' {
                let mut word = String::new();
                while let Some(c) = self.peek(0) {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        word.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                TokenKind::keyword(&word).unwrap_or(TokenKind::Ident(word))
            } else if c.is_ascii_digit() {
                let mut digits = String::new();
                while let Some(c) = self.peek(0) {
                    if c.is_ascii_digit() {
                        digits.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                match digits.parse::<i64>() {
                    Ok(n) => TokenKind::Int(n),
                    Err(_) => {
                        return Err(LexError {
                            message: format!("integer literal `{digits}` out of range"),
                            span: Span::new(line, col, start, self.offset()),
                        })
                    }
                }
            } else {
                self.punct(c).ok_or_else(|| LexError {
                    message: format!("unexpected character `{c}`"),
                    span: Span::new(line, col, start, start + c.len_utf8()),
                })?
            };
            out.push(Token {
                kind,
                span: Span::new(line, col, start, self.offset()),
            });
        }
    }

    fn skip_trivia(&mut self) {
        loop {
            match (self.peek(0), self.peek(1)) {
                (Some(c), _) if c.is_whitespace() => {
                    self.bump();
                }
                (Some('-'), Some('-')) | (Some('/'), Some('/')) => {
                    while let Some(c) = self.peek(0) {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    fn punct(&mut self, c: char) -> Option<TokenKind> {
        use TokenKind::*;
        let next = self.peek(1);
        let next2 = self.peek(2);
        let (kind, len) = match (c, next) {
            (':', Some(':')) if next2 == Some('=') => (Rename, 3),
            (':', Some(':')) => (ColonColon, 2),
            (':', Some('=')) => (Assign, 2),
            (':', _) => (Colon, 1),
            ('=', Some('=')) => (EqEq, 2),
            ('=', Some('>')) => (FatArrow, 2),
            ('=', _) => (Eq, 1),
            ('!', Some('=')) => (NotEq, 2),
            ('!', _) => (Bang, 1),
            ('<', Some('=')) => (Le, 2),
            ('<', Some('>')) => (Diamond, 2),
            ('<', _) => (Lt, 1),
            ('>', Some('=')) => (Ge, 2),
            ('>', _) => (Gt, 1),
            ('&', Some('&')) => (AndAnd, 2),
            ('|', Some('|')) => (OrOr, 2),
            ('-', Some('>')) => (Arrow, 2),
            ('-', _) => (Minus, 1),
            ('.', Some('.')) => (DotDot, 2),
            ('.', _) => (Dot, 1),
            ('[', Some(']')) => (Box, 2),
            ('[', _) => (LBracket, 1),
            (']', _) => (RBracket, 1),
            ('(', _) => (LParen, 1),
            (')', _) => (RParen, 1),
            ('{', _) => (LBrace, 1),
            ('}', _) => (RBrace, 1),
            (',', _) => (Comma, 1),
            (';', _) => (Semi, 1),
            ('+', _) => (Plus, 1),
            ('*', _) => (Star, 1),
            ('/', _) => (Slash, 1),
            ('%', _) => (Percent, 1),
            ('@', _) => (At, 1),
            ('\'', _) => (Prime, 1),
            _ => return None,
        };
        for _ in 0..len {
            self.bump();
        }
        Some(kind)
    }
}
