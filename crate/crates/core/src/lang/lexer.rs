//! Tokenizer for program source files.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(String),
    /// `->`, or `-N->` with an explicit delay.
    Arrow(Option<u32>),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Colon,
    ColonColon,
    Plus,
    Par,
    Question,
    Slash,
    Minus,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(s) => write!(f, "`{s}`"),
            Tok::Arrow(None) => write!(f, "`->`"),
            Tok::Arrow(Some(n)) => write!(f, "`-{n}->`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::ColonColon => write!(f, "`::`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Par => write!(f, "`||`"),
            Tok::Question => write!(f, "`?`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, col {col}: {msg}")]
pub struct LexError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

struct Cursor<'a> {
    rest: std::str::Chars<'a>,
    peeked: Option<char>,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor {
            rest: src.chars(),
            peeked: None,
            line: 1,
            col: 1,
        }
    }

    fn peek(&mut self) -> Option<char> {
        if self.peeked.is_none() {
            self.peeked = self.rest.next();
        }
        self.peeked
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.peeked = None;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, msg: impl Into<String>) -> LexError {
        LexError {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }
}

pub fn lex(src: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor::new(src);
    let mut out = Vec::new();
    loop {
        while let Some(c) = cur.peek() {
            if c == '#' {
                while let Some(c) = cur.peek() {
                    if c == '\n' {
                        break;
                    }
                    cur.bump();
                }
            } else if c.is_whitespace() {
                cur.bump();
            } else {
                break;
            }
        }
        let (line, col) = (cur.line, cur.col);
        let Some(c) = cur.peek() else {
            out.push(Token {
                tok: Tok::Eof,
                line,
                col,
            });
            return Ok(out);
        };
        let tok = match c {
            'a'..='z' | 'A'..='Z' | '_' => {
                let mut s = String::new();
                while let Some(c) = cur.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        cur.bump();
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            }
            '0'..='9' => {
                let mut s = String::new();
                while let Some(c) = cur.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        cur.bump();
                    } else {
                        break;
                    }
                }
                if cur.peek() == Some('.') {
                    let mut probe = cur.rest.clone();
                    if matches!(probe.next(), Some(d) if d.is_ascii_digit()) {
                        s.push('.');
                        cur.bump();
                        while let Some(c) = cur.peek() {
                            if c.is_ascii_digit() {
                                s.push(c);
                                cur.bump();
                            } else {
                                break;
                            }
                        }
                    }
                }
                Tok::Number(s)
            }
            '-' => {
                cur.bump();
                match cur.peek() {
                    Some('>') => {
                        cur.bump();
                        Tok::Arrow(None)
                    }
                    Some(d) if d.is_ascii_digit() => {
                        let mut n = String::new();
                        while let Some(c) = cur.peek() {
                            if c.is_ascii_digit() {
                                n.push(c);
                                cur.bump();
                            } else {
                                break;
                            }
                        }
                        if cur.bump() != Some('-') || cur.bump() != Some('>') {
                            return Err(cur.error("expected `->` after a delay"));
                        }
                        let delay: u32 = n
                            .parse()
                            .map_err(|_| cur.error(format!("delay `{n}` is out of range")))?;
                        Tok::Arrow(Some(delay))
                    }
                    _ => Tok::Minus,
                }
            }
            ':' => {
                cur.bump();
                if cur.peek() == Some(':') {
                    cur.bump();
                    Tok::ColonColon
                } else {
                    Tok::Colon
                }
            }
            '|' => {
                cur.bump();
                if cur.peek() == Some('|') {
                    cur.bump();
                    Tok::Par
                } else {
                    return Err(cur.error("expected `||`"));
                }
            }
            '$' | '@' => {
                return Err(cur.error(format!("`{c}` is reserved for generated names")));
            }
            '(' => {
                cur.bump();
                Tok::LParen
            }
            ')' => {
                cur.bump();
                Tok::RParen
            }
            '{' => {
                cur.bump();
                Tok::LBrace
            }
            '}' => {
                cur.bump();
                Tok::RBrace
            }
            '[' => {
                cur.bump();
                Tok::LBracket
            }
            ']' => {
                cur.bump();
                Tok::RBracket
            }
            ',' => {
                cur.bump();
                Tok::Comma
            }
            '.' => {
                cur.bump();
                Tok::Dot
            }
            '+' => {
                cur.bump();
                Tok::Plus
            }
            '?' => {
                cur.bump();
                Tok::Question
            }
            '/' => {
                cur.bump();
                Tok::Slash
            }
            other => {
                return Err(cur.error(format!("unexpected character `{other}`")));
            }
        };
        out.push(Token { tok, line, col });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        lex(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn lexes_arrows_and_delays() {
        assert_eq!(
            toks("tell(c1) -2->[inf] success"),
            vec![
                Tok::Ident("tell".into()),
                Tok::LParen,
                Tok::Ident("c1".into()),
                Tok::RParen,
                Tok::Arrow(Some(2)),
                Tok::LBracket,
                Tok::Ident("inf".into()),
                Tok::RBracket,
                Tok::Ident("success".into()),
                Tok::Eof,
            ]
        );
        assert_eq!(toks("->"), vec![Tok::Arrow(None), Tok::Eof]);
        assert_eq!(toks("a - b"), toks("a -b").to_vec());
    }

    #[test]
    fn lexes_numbers_and_rationals() {
        assert_eq!(
            toks("3/2 0.25 10"),
            vec![
                Tok::Number("3".into()),
                Tok::Slash,
                Tok::Number("2".into()),
                Tok::Number("0.25".into()),
                Tok::Number("10".into()),
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn comments_and_positions() {
        let tokens = lex("a # rest\n  b").unwrap();
        assert_eq!(tokens[0].tok, Tok::Ident("a".into()));
        assert_eq!((tokens[1].line, tokens[1].col), (2, 3));
        assert_eq!(tokens[1].tok, Tok::Ident("b".into()));
    }

    #[test]
    fn rejects_reserved_characters() {
        let err = lex("tell($x)").unwrap_err();
        assert!(err.to_string().contains("reserved"));
        assert!(lex("p@watch1").is_err());
    }

    #[test]
    fn dialect_minus_splits() {
        assert_eq!(
            toks("tsccp-i"),
            vec![
                Tok::Ident("tsccp".into()),
                Tok::Minus,
                Tok::Ident("i".into()),
                Tok::Eof,
            ]
        );
    }
}
