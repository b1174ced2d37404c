//! Flat equational theories and a decision procedure for `=_E`.
//!
//! A flat equation has sides of height at most one with equal heights and
//! equal variable sets. Such theories preserve term height, so congruence
//! classes can be computed one height level at a time: once every class of
//! height below `h` is final, a node of height `h` is determined by its
//! symbol and the classes of its children, and equation instances only ever
//! connect nodes of the same height.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::syntax::{at_line, Lexer};
use crate::term::{parse_term, Signature, Symbol, Term};

/// Default cap on nodes created lazily while saturating.
pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PatArg {
    Var(String),
    Const(Symbol),
}

/// One side of a flat equation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pattern {
    Var(String),
    /// A symbol applied to variables and constants. Constants have no args.
    App(Symbol, Vec<PatArg>),
}

impl Pattern {
    pub fn height(&self) -> usize {
        match self {
            Pattern::App(_, args) if !args.is_empty() => 1,
            _ => 0,
        }
    }

    pub fn vars(&self) -> BTreeSet<&str> {
        match self {
            Pattern::Var(x) => [x.as_str()].into_iter().collect(),
            Pattern::App(_, args) => args
                .iter()
                .filter_map(|a| match a {
                    PatArg::Var(x) => Some(x.as_str()),
                    PatArg::Const(_) => None,
                })
                .collect(),
        }
    }

    fn from_term(t: &Term, vars: &BTreeSet<String>) -> Result<Pattern> {
        if vars.contains(&*t.symbol) {
            if !t.children.is_empty() {
                return Err(Error::Theory(format!("variable {} applied to arguments", t.symbol)));
            }
            return Ok(Pattern::Var(t.symbol.to_string()));
        }
        let mut args = Vec::with_capacity(t.children.len());
        for c in &t.children {
            if !c.children.is_empty() {
                return Err(Error::Theory(format!("side {t} has height greater than one")));
            }
            if vars.contains(&*c.symbol) {
                args.push(PatArg::Var(c.symbol.to_string()));
            } else {
                args.push(PatArg::Const(c.symbol.clone()));
            }
        }
        Ok(Pattern::App(t.symbol.clone(), args))
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Var(x) => write!(f, "{x}"),
            Pattern::App(s, args) => {
                write!(f, "{s}")?;
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        match a {
                            PatArg::Var(x) => write!(f, "{x}")?,
                            PatArg::Const(c) => write!(f, "{c}")?,
                        }
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FlatEquation {
    pub lhs: Pattern,
    pub rhs: Pattern,
}

impl fmt::Display for FlatEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.lhs, self.rhs)
    }
}

/// A finite set of flat equations over a signature.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlatTheory {
    equations: Vec<FlatEquation>,
    vars: BTreeSet<String>,
}

impl FlatTheory {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates and collects equations. Trivial `x = x` equations are dropped.
    pub fn new(
        sig: &Signature,
        vars: impl IntoIterator<Item = String>,
        equations: Vec<FlatEquation>,
    ) -> Result<Self> {
        let vars: BTreeSet<String> = vars.into_iter().collect();
        for v in &vars {
            if sig.contains(v) {
                return Err(Error::Theory(format!("variable {v} clashes with a symbol")));
            }
        }
        let mut kept = Vec::new();
        for eq in equations {
            if let (Pattern::Var(x), Pattern::Var(y)) = (&eq.lhs, &eq.rhs) {
                if x == y {
                    continue;
                }
            }
            check_equation(sig, &eq)?;
            if !kept.contains(&eq) {
                kept.push(eq);
            }
        }
        Ok(FlatTheory { equations: kept, vars })
    }

    /// Parses the right-hand side of an `eq` line.
    pub fn parse_equation(src: &str, vars: &BTreeSet<String>) -> Result<FlatEquation> {
        let mut lx = Lexer::new(src);
        let l = parse_term(&mut lx)?;
        lx.expect('=')?;
        let r = parse_term(&mut lx)?;
        lx.expect_end()?;
        Ok(FlatEquation {
            lhs: Pattern::from_term(&l, vars)?,
            rhs: Pattern::from_term(&r, vars)?,
        })
    }

    /// Parses `vars` and `eq` lines; other directives are ignored.
    pub fn parse(src: &str, sig: &Signature) -> Result<Self> {
        let mut vars = BTreeSet::new();
        let mut raw = Vec::new();
        for (i, line) in src.lines().enumerate() {
            let line = crate::syntax::strip_comment(line).trim();
            if let Some(rest) = line.strip_prefix("vars") {
                vars.extend(rest.split_whitespace().map(str::to_string));
            } else if let Some(rest) = line.strip_prefix("eq ") {
                raw.push((i + 1, rest.to_string()));
            }
        }
        let mut eqs = Vec::new();
        for (line, src) in raw {
            eqs.push(at_line(line, Self::parse_equation(&src, &vars))?);
        }
        FlatTheory::new(sig, vars, eqs)
    }

    pub fn equations(&self) -> &[FlatEquation] {
        &self.equations
    }

    pub fn vars(&self) -> impl Iterator<Item = &String> {
        self.vars.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }

    /// Both orientations of every equation.
    pub fn oriented(&self) -> impl Iterator<Item = (&Pattern, &Pattern)> {
        self.equations.iter().flat_map(|e| [(&e.lhs, &e.rhs), (&e.rhs, &e.lhs)])
    }
}

fn check_equation(sig: &Signature, eq: &FlatEquation) -> Result<()> {
    for side in [&eq.lhs, &eq.rhs] {
        if let Pattern::App(s, args) = side {
            match sig.arity(s) {
                Some(a) if a == args.len() => {}
                Some(a) => {
                    return Err(Error::Theory(format!(
                        "{s} has arity {a} in equation {eq}"
                    )))
                }
                None => return Err(Error::Theory(format!("undeclared symbol {s} in {eq}"))),
            }
            for arg in args {
                if let PatArg::Const(c) = arg {
                    if sig.arity(c) != Some(0) {
                        return Err(Error::Theory(format!("{c} is not a constant in {eq}")));
                    }
                }
            }
        }
    }
    if eq.lhs.height() != eq.rhs.height() {
        return Err(Error::Theory(format!("sides of {eq} have different heights")));
    }
    if eq.lhs.vars() != eq.rhs.vars() {
        return Err(Error::Theory(format!("sides of {eq} have different variables")));
    }
    Ok(())
}

/// Identifier of an `=_E` class inside one [`CongruenceIndex`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId(pub u32);

type NodeKey = (Symbol, Vec<u32>);

/// Congruence classes of every subterm of a fixed set of root terms.
#[derive(Debug, Clone)]
pub struct CongruenceIndex {
    lookup: HashMap<NodeKey, u32>,
    class: Vec<u32>,
    height: Vec<usize>,
}

impl CongruenceIndex {
    pub fn build(theory: &FlatTheory, roots: &[&Term]) -> Result<Self> {
        Self::build_with_budget(theory, roots, DEFAULT_NODE_BUDGET)
    }

    pub fn build_with_budget(theory: &FlatTheory, roots: &[&Term], budget: usize) -> Result<Self> {
        Builder::new(theory, budget).run(roots)
    }

    /// Class of a term all of whose subterms were indexed.
    pub fn class_of(&self, t: &Term) -> Option<ClassId> {
        self.node_of(t).map(|n| ClassId(self.class[n as usize]))
    }

    fn node_of(&self, t: &Term) -> Option<u32> {
        let mut kids = Vec::with_capacity(t.children.len());
        for c in &t.children {
            kids.push(self.class[self.node_of(c)? as usize]);
        }
        self.lookup.get(&(t.symbol.clone(), kids)).copied()
    }

    /// Classes of every position of `t`, in preorder.
    pub fn classes_preorder(&self, t: &Term) -> Option<Vec<ClassId>> {
        fn go(ix: &CongruenceIndex, t: &Term, out: &mut Vec<ClassId>) -> Option<u32> {
            let slot = out.len();
            out.push(ClassId(0));
            let mut kids = Vec::with_capacity(t.children.len());
            for c in &t.children {
                kids.push(go(ix, c, out)?);
            }
            let n = *ix.lookup.get(&(t.symbol.clone(), kids))?;
            let c = ix.class[n as usize];
            out[slot] = ClassId(c);
            Some(c)
        }
        let mut out = Vec::new();
        go(self, t, &mut out)?;
        Some(out)
    }

    pub fn same_class(&self, s: &Term, t: &Term) -> Option<bool> {
        Some(self.class_of(s)? == self.class_of(t)?)
    }

    pub fn height_of(&self, c: ClassId) -> usize {
        self.height[c.0 as usize]
    }

    /// Number of nodes, including those created while saturating.
    pub fn node_count(&self) -> usize {
        self.class.len()
    }
}

/// Decides `s =_E t`.
pub fn eq_modulo(theory: &FlatTheory, s: &Term, t: &Term) -> Result<bool> {
    if s.height() != t.height() {
        return Ok(false);
    }
    if theory.is_empty() {
        return Ok(s == t);
    }
    let ix = CongruenceIndex::build(theory, &[s, t])?;
    Ok(ix.same_class(s, t).expect("roots are indexed"))
}

struct Builder<'a> {
    theory: &'a FlatTheory,
    budget: usize,
    created: usize,
    parent: Vec<u32>,
    height: Vec<usize>,
    lookup: HashMap<NodeKey, u32>,
    keys: Vec<NodeKey>,
    constants: HashMap<Symbol, u32>,
}

impl<'a> Builder<'a> {
    fn new(theory: &'a FlatTheory, budget: usize) -> Self {
        Builder {
            theory,
            budget,
            created: 0,
            parent: Vec::new(),
            height: Vec::new(),
            lookup: HashMap::new(),
            keys: Vec::new(),
            constants: HashMap::new(),
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }

    fn intern(&mut self, key: NodeKey, height: usize) -> (u32, bool) {
        if let Some(&n) = self.lookup.get(&key) {
            return (n, false);
        }
        let n = self.keys.len() as u32;
        self.lookup.insert(key.clone(), n);
        self.keys.push(key);
        self.parent.push(n);
        self.height.push(height);
        (n, true)
    }

    fn run(mut self, roots: &[&Term]) -> Result<CongruenceIndex> {
        // Flatten the roots into a hash-consed DAG grouped by height.
        let mut raw: HashMap<(Symbol, Vec<u32>), u32> = HashMap::new();
        let mut raw_nodes: Vec<(Symbol, Vec<u32>, usize)> = Vec::new();
        fn flatten(
            t: &Term,
            raw: &mut HashMap<(Symbol, Vec<u32>), u32>,
            nodes: &mut Vec<(Symbol, Vec<u32>, usize)>,
        ) -> (u32, usize) {
            let mut kids = Vec::with_capacity(t.children.len());
            let mut h = 0;
            for c in &t.children {
                let (id, ch) = flatten(c, raw, nodes);
                kids.push(id);
                h = h.max(ch + 1);
            }
            let key = (t.symbol.clone(), kids);
            if let Some(&id) = raw.get(&key) {
                return (id, h);
            }
            let id = nodes.len() as u32;
            nodes.push((key.0.clone(), key.1.clone(), h));
            raw.insert(key, id);
            (id, h)
        }
        for r in roots {
            flatten(r, &mut raw, &mut raw_nodes);
        }
        let max_h = raw_nodes.iter().map(|n| n.2).max().unwrap_or(0);
        let mut by_height: Vec<Vec<u32>> = vec![Vec::new(); max_h + 1];
        for (i, n) in raw_nodes.iter().enumerate() {
            by_height[n.2].push(i as u32);
        }

        // Level 0: constants of the roots and of the equations.
        let mut consts: Vec<Symbol> = by_height[0].iter().map(|&i| raw_nodes[i as usize].0.clone()).collect();
        for (l, _) in self.theory.oriented() {
            if let Pattern::App(s, args) = l {
                if args.is_empty() {
                    consts.push(s.clone());
                }
                for a in args {
                    if let PatArg::Const(c) = a {
                        consts.push(c.clone());
                    }
                }
            }
        }
        for c in consts {
            let (n, _) = self.intern((c.clone(), Vec::new()), 0);
            self.constants.insert(c, n);
        }
        let eqs: Vec<(Pattern, Pattern)> =
            self.theory.oriented().map(|(l, r)| (l.clone(), r.clone())).collect();
        for (l, r) in &eqs {
            if let (Pattern::App(a, x), Pattern::App(b, y)) = (l, r) {
                if x.is_empty() && y.is_empty() {
                    let (na, nb) = (self.constants[a], self.constants[b]);
                    self.union(na, nb);
                }
            }
        }
        let mut raw_class: Vec<u32> = vec![u32::MAX; raw_nodes.len()];
        for &i in &by_height[0] {
            let n = self.constants[&raw_nodes[i as usize].0];
            raw_class[i as usize] = self.find(n);
        }
        let level0: Vec<u32> = (0..self.keys.len() as u32).collect();
        self.finalize(&level0);

        for h in 1..=max_h {
            let mut level: Vec<u32> = Vec::new();
            let mut work: Vec<u32> = Vec::new();
            for &i in &by_height[h] {
                let (sym, kids, _) = &raw_nodes[i as usize];
                let key = (sym.clone(), kids.iter().map(|&k| raw_class[k as usize]).collect());
                let (n, fresh) = self.intern(key, h);
                if fresh {
                    level.push(n);
                    work.push(n);
                }
            }
            while let Some(n) = work.pop() {
                let (sym, kids) = self.keys[n as usize].clone();
                for (l, r) in &eqs {
                    let Some(target) = self.instantiate(l, r, &sym, &kids) else {
                        continue;
                    };
                    let (m, fresh) = self.intern(target, h);
                    if fresh {
                        self.created += 1;
                        if self.created > self.budget {
                            return Err(Error::Budget { what: "congruence nodes", limit: self.budget });
                        }
                        level.push(m);
                        work.push(m);
                    }
                    self.union(n, m);
                }
            }
            self.finalize(&level);
            for &i in &by_height[h] {
                let (sym, kids, _) = &raw_nodes[i as usize];
                let key = (sym.clone(), kids.iter().map(|&k| raw_class[k as usize]).collect());
                let n = self.lookup[&key];
                raw_class[i as usize] = self.parent[n as usize];
            }
        }

        let class = self.parent.clone();
        let mut height = vec![0; class.len()];
        for (n, &c) in class.iter().enumerate() {
            height[c as usize] = self.height[n];
        }
        Ok(CongruenceIndex { lookup: self.lookup, class, height })
    }

    /// Points every node of a finished level directly at its class root.
    fn finalize(&mut self, level: &[u32]) {
        for &n in level {
            let r = self.find(n);
            self.parent[n as usize] = r;
        }
    }

    /// Applies `l -> r` at the root of the node `(sym, kids)` if it matches.
    fn instantiate(&self, l: &Pattern, r: &Pattern, sym: &Symbol, kids: &[u32]) -> Option<NodeKey> {
        let (Pattern::App(ls, largs), Pattern::App(rs, rargs)) = (l, r) else {
            return None;
        };
        if ls != sym || largs.len() != kids.len() || largs.is_empty() {
            return None;
        }
        let mut binding: Vec<(&str, u32)> = Vec::new();
        for (a, &k) in largs.iter().zip(kids) {
            match a {
                PatArg::Const(c) => {
                    if self.parent[self.constants[c] as usize] != k {
                        return None;
                    }
                }
                PatArg::Var(x) => match binding.iter().find(|(y, _)| y == x) {
                    Some(&(_, b)) if b != k => return None,
                    Some(_) => {}
                    None => binding.push((x, k)),
                },
            }
        }
        let out = rargs
            .iter()
            .map(|a| match a {
                PatArg::Const(c) => self.parent[self.constants[c] as usize],
                PatArg::Var(x) => binding.iter().find(|(y, _)| y == x).expect("same variables").1,
            })
            .collect();
        Some((rs.clone(), out))
    }
}
