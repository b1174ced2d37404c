//! Ranked signatures, finite terms and positions.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::syntax::Lexer;

/// Function symbol name. Cheap to clone.
pub type Symbol = Arc<str>;

/// A finite ranked alphabet.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    symbols: Vec<(Symbol, usize)>,
    index: HashMap<Symbol, usize>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, usize)>) -> Result<Self> {
        let mut sig = Signature::new();
        for (name, arity) in pairs {
            sig.add(name, arity)?;
        }
        Ok(sig)
    }

    /// Adds a symbol. Re-adding with the same arity is a no-op.
    pub fn add(&mut self, name: &str, arity: usize) -> Result<Symbol> {
        if let Some(&i) = self.index.get(name) {
            let (sym, a) = &self.symbols[i];
            if *a != arity {
                return Err(Error::Signature(format!(
                    "symbol {name} declared with arities {a} and {arity}"
                )));
            }
            return Ok(sym.clone());
        }
        let sym: Symbol = Arc::from(name);
        self.index.insert(sym.clone(), self.symbols.len());
        self.symbols.push((sym.clone(), arity));
        Ok(sym)
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.index.get(name).map(|&i| self.symbols[i].1)
    }

    pub fn symbol(&self, name: &str) -> Option<Symbol> {
        self.index.get(name).map(|&i| self.symbols[i].0.clone())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, usize)> {
        self.symbols.iter().map(|(s, a)| (s, *a))
    }

    pub fn constants(&self) -> impl Iterator<Item = &Symbol> {
        self.symbols.iter().filter(|(_, a)| *a == 0).map(|(s, _)| s)
    }

    pub fn max_arity(&self) -> usize {
        self.symbols.iter().map(|(_, a)| *a).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Union of two signatures; fails on an arity clash.
    pub fn merge(&self, other: &Signature) -> Result<Signature> {
        let mut out = self.clone();
        for (s, a) in other.iter() {
            out.add(s, a)?;
        }
        Ok(out)
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (s, a)) in self.symbols.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{s}:{a}")?;
        }
        Ok(())
    }
}

/// A position in a term: the path of 1-based child indices from the root.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position(pub Vec<usize>);

impl Position {
    pub fn root() -> Self {
        Position(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, i: usize) -> Position {
        let mut v = self.0.clone();
        v.push(i);
        Position(v)
    }

    pub fn parent(&self) -> Option<Position> {
        if self.0.is_empty() {
            None
        } else {
            Some(Position(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// True when `self` is a (non-strict) prefix of `other`.
    pub fn is_prefix_of(&self, other: &Position) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn is_parallel(&self, other: &Position) -> bool {
        !self.is_prefix_of(other) && !other.is_prefix_of(self)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "@");
        }
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{k}")?;
        }
        Ok(())
    }
}

impl FromStr for Position {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "@" || s.is_empty() {
            return Ok(Position::root());
        }
        let mut path = Vec::new();
        for part in s.split('.') {
            match part.parse::<usize>() {
                Ok(k) if k > 0 => path.push(k),
                _ => return Err(Error::parse(0, format!("bad position {s:?}"))),
            }
        }
        Ok(Position(path))
    }
}

/// A finite ranked term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    pub symbol: Symbol,
    pub children: Vec<Term>,
}

impl Term {
    pub fn new(symbol: impl Into<Symbol>, children: Vec<Term>) -> Self {
        Term { symbol: symbol.into(), children }
    }

    pub fn leaf(symbol: impl Into<Symbol>) -> Self {
        Term { symbol: symbol.into(), children: Vec::new() }
    }

    pub fn arity(&self) -> usize {
        self.children.len()
    }

    /// Height of the term; constants have height 0.
    pub fn height(&self) -> usize {
        self.children.iter().map(|c| c.height() + 1).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Term::size).sum::<usize>()
    }

    /// All positions in preorder.
    pub fn positions(&self) -> Vec<Position> {
        let mut out = Vec::with_capacity(self.size());
        fn go(t: &Term, p: &mut Vec<usize>, out: &mut Vec<Position>) {
            out.push(Position(p.clone()));
            for (i, c) in t.children.iter().enumerate() {
                p.push(i + 1);
                go(c, p, out);
                p.pop();
            }
        }
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn subterm(&self, p: &Position) -> Result<&Term> {
        let mut t = self;
        for &k in &p.0 {
            t = t
                .children
                .get(k.wrapping_sub(1))
                .ok_or_else(|| Error::Position(p.to_string()))?;
        }
        Ok(t)
    }

    pub fn symbol_at(&self, p: &Position) -> Result<&Symbol> {
        self.subterm(p).map(|t| &t.symbol)
    }

    /// Returns `self[s]_p`.
    pub fn replace(&self, p: &Position, s: Term) -> Result<Term> {
        let mut out = self.clone();
        let mut slot = &mut out;
        for &k in &p.0 {
            slot = slot
                .children
                .get_mut(k.wrapping_sub(1))
                .ok_or_else(|| Error::Position(p.to_string()))?;
        }
        *slot = s;
        Ok(out)
    }

    /// Checks that every symbol is declared with the arity it is used at.
    pub fn check(&self, sig: &Signature) -> Result<()> {
        match sig.arity(&self.symbol) {
            None => Err(Error::Signature(format!("undeclared symbol {}", self.symbol))),
            Some(a) if a != self.arity() => Err(Error::Signature(format!(
                "symbol {} has arity {a} but is applied to {} arguments",
                self.symbol,
                self.arity()
            ))),
            Some(_) => self.children.iter().try_for_each(|c| c.check(sig)),
        }
    }

    /// Parses the text syntax `f(t1,...,tn)`.
    pub fn parse(src: &str) -> Result<Term> {
        let mut lx = Lexer::new(src);
        let t = parse_term(&mut lx)?;
        lx.expect_end()?;
        Ok(t)
    }
}

pub(crate) fn parse_term(lx: &mut Lexer<'_>) -> Result<Term> {
    let name = lx.ident()?;
    let mut children = Vec::new();
    if lx.eat('(') {
        if !lx.eat(')') {
            loop {
                children.push(parse_term(lx)?);
                if lx.eat(')') {
                    break;
                }
                lx.expect(',')?;
            }
        }
    }
    Ok(Term::new(name.as_str(), children))
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol)?;
        if !self.children.is_empty() {
            write!(f, "(")?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Term::parse(s)
    }
}
