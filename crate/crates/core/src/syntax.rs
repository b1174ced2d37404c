//! A small character-level lexer shared by the text parsers.

use crate::error::{Error, Result};

/// Characters allowed in symbol and state names.
pub fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '\'' | '^' | '.' | '#' | '%' | '@' | ':' | '$')
}

pub fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_ident_char)
}

#[derive(Clone)]
pub struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    pub fn skip_ws(&mut self) {
        let r = self.rest();
        self.pos += r.len() - r.trim_start().len();
    }

    pub fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    pub fn peek2(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().nth(1)
    }

    pub fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }

    pub fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    pub fn eat_str(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected {c:?}")))
        }
    }

    pub fn expect_end(&mut self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error("unexpected trailing input"))
        }
    }

    pub fn peek_ident(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let r = self.rest();
        let n = r.find(|c: char| !is_ident_char(c)).unwrap_or(r.len());
        (n > 0).then(|| &r[..n])
    }

    pub fn ident(&mut self) -> Result<String> {
        match self.peek_ident() {
            Some(id) => {
                self.pos += id.len();
                Ok(id.to_string())
            }
            None => Err(self.error("expected identifier")),
        }
    }

    pub fn integer(&mut self) -> Result<i64> {
        self.skip_ws();
        let neg = self.eat('-');
        let id = self.peek_ident().filter(|s| s.bytes().all(|b| b.is_ascii_digit()));
        match id.and_then(|s| s.parse::<i64>().ok().map(|v| (s.len(), v))) {
            Some((n, v)) => {
                self.pos += n;
                Ok(if neg { -v } else { v })
            }
            None => Err(self.error("expected integer")),
        }
    }

    pub fn error(&self, msg: impl Into<String>) -> Error {
        Error::parse(0, format!("{} at column {}", msg.into(), self.pos + 1))
    }
}

/// Attaches a line number to parse errors produced on a single line.
pub fn at_line<T>(line: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line: 0, message } => Error::Parse { line, message },
        other => other,
    })
}

/// Strips a `#` comment. A `#` only starts a comment at the beginning of a
/// line or after whitespace, so annotated names like `f#01` survive.
pub fn strip_comment(line: &str) -> &str {
    let mut prev_ws = true;
    for (i, c) in line.char_indices() {
        if c == '#' && prev_ws {
            return &line[..i];
        }
        prev_ws = c.is_whitespace();
    }
    line
}
