//! Tokenizer and s-expression reader shared by the PDDL parser and the
//! literal syntax used in knowledge documents, task files and LLM replies.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SexprError {
    #[error("lex error at {line}:{column}: unexpected character {found:?}")]
    Lex { line: usize, column: usize, found: char },
    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Open,
    Close,
    /// Symbols are lowercased; PDDL is case-insensitive.
    Symbol(String),
    /// Text after `;` up to end of line, trimmed.
    Comment(String),
}

fn is_symbol_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '?' | ':' | '.' | '=')
}

pub fn tokenize(text: &str) -> Result<Vec<(Token, Pos)>, SexprError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                column = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                column += 1;
            }
            '(' => {
                chars.next();
                column += 1;
                out.push((Token::Open, pos));
            }
            ')' => {
                chars.next();
                column += 1;
                out.push((Token::Close, pos));
            }
            ';' => {
                let mut body = String::new();
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    body.push(c);
                    chars.next();
                    column += 1;
                }
                out.push((
                    Token::Comment(body.trim_start_matches(';').trim().to_string()),
                    pos,
                ));
            }
            c if is_symbol_char(c) => {
                let mut sym = String::new();
                while let Some(&c) = chars.peek() {
                    if !is_symbol_char(c) {
                        break;
                    }
                    sym.push(c.to_ascii_lowercase());
                    chars.next();
                    column += 1;
                }
                out.push((Token::Symbol(sym), pos));
            }
            other => {
                return Err(SexprError::Lex {
                    line,
                    column,
                    found: other,
                })
            }
        }
    }
    Ok(out)
}

/// A parsed s-expression. Comments are kept as leaf nodes so that the
/// problem parser can read goal-partition annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexpr {
    Symbol(String, Pos),
    Comment(String, Pos),
    List(Vec<Sexpr>, Pos),
}

impl Sexpr {
    pub fn pos(&self) -> Pos {
        match self {
            Sexpr::Symbol(_, p) | Sexpr::Comment(_, p) | Sexpr::List(_, p) => *p,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            Sexpr::Symbol(s, _) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::List(items, _) => Some(items),
            _ => None,
        }
    }

    /// List elements with comments filtered out.
    pub fn elements(&self) -> Vec<&Sexpr> {
        match self {
            Sexpr::List(items, _) => items
                .iter()
                .filter(|e| !matches!(e, Sexpr::Comment(..)))
                .collect(),
            _ => Vec::new(),
        }
    }
}

pub fn parse_error(pos: Pos, message: impl Into<String>) -> SexprError {
    SexprError::Parse {
        line: pos.line,
        column: pos.column,
        message: message.into(),
    }
}

/// Reads every top-level expression in `text`. Top-level comments are dropped.
pub fn parse_all(text: &str) -> Result<Vec<Sexpr>, SexprError> {
    let tokens = tokenize(text)?;
    let mut stack: Vec<(Vec<Sexpr>, Pos)> = Vec::new();
    let mut top = Vec::new();
    let mut last = Pos { line: 1, column: 1 };
    for (tok, pos) in tokens {
        last = pos;
        match tok {
            Token::Open => stack.push((Vec::new(), pos)),
            Token::Close => {
                let (items, open) = stack
                    .pop()
                    .ok_or_else(|| parse_error(pos, "unbalanced ')'"))?;
                let list = Sexpr::List(items, open);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => top.push(list),
                }
            }
            Token::Symbol(s) => match stack.last_mut() {
                Some((parent, _)) => parent.push(Sexpr::Symbol(s, pos)),
                None => top.push(Sexpr::Symbol(s, pos)),
            },
            Token::Comment(c) => {
                if let Some((parent, _)) = stack.last_mut() {
                    parent.push(Sexpr::Comment(c, pos));
                }
            }
        }
    }
    if let Some((_, open)) = stack.last() {
        return Err(parse_error(
            *open,
            format!("unbalanced '(' (input ends at {last})"),
        ));
    }
    Ok(top)
}

/// Reads exactly one expression.
pub fn parse_one(text: &str) -> Result<Sexpr, SexprError> {
    let mut all = parse_all(text)?;
    match all.len() {
        1 => Ok(all.remove(0)),
        0 => Err(parse_error(Pos { line: 1, column: 1 }, "empty input")),
        _ => Err(parse_error(all[1].pos(), "trailing input after expression")),
    }
}
