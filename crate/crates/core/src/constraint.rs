//! Global constraints: syntax, evaluation over run statistics, normalization.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::syntax::Lexer;
use crate::theory::ClassId;

/// Index of a state in an automaton's state list.
pub type StateId = usize;

/// Default cap on the number of conjuncts produced by [`to_dnf`].
pub const DEFAULT_DNF_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CountKind {
    /// `|q|`: number of positions labelled `q`.
    Occurrences,
    /// `||q||`: number of distinct classes at positions labelled `q`.
    Classes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
    Lt,
    Gt,
}

impl Cmp {
    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Cmp::Le => lhs <= rhs,
            Cmp::Ge => lhs >= rhs,
            Cmp::Eq => lhs == rhs,
            Cmp::Lt => lhs < rhs,
            Cmp::Gt => lhs > rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Eq => "=",
            Cmp::Lt => "<",
            Cmp::Gt => ">",
        }
    }
}

/// `sum a_i * count(q_i) cmp bound`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearAtom {
    pub kind: CountKind,
    pub terms: Vec<(i64, StateId)>,
    pub cmp: Cmp,
    pub bound: i64,
}

/// Sign class of a normalized linear atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Natural,
    Integer,
}

impl LinearAtom {
    pub fn new(kind: CountKind, terms: Vec<(i64, StateId)>, cmp: Cmp, bound: i64) -> Self {
        LinearAtom { kind, terms, cmp, bound }
    }

    /// Natural when all coefficients and the bound share one sign.
    pub fn sign(&self) -> Sign {
        let pos = self.terms.iter().all(|(a, _)| *a >= 0) && self.bound >= 0;
        let neg = self.terms.iter().all(|(a, _)| *a <= 0) && self.bound <= 0;
        if pos || neg {
            Sign::Natural
        } else {
            Sign::Integer
        }
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.terms.iter().map(|(_, q)| *q)
    }

    fn value(&self, stats: &RunStats) -> i64 {
        self.terms.iter().map(|&(a, q)| a * stats.count(self.kind, q) as i64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    /// `q ~ q'`: distinct positions labelled `q`, `q'` carry equal subterms.
    Eq(StateId, StateId),
    /// `q !~ q'`: distinct positions labelled `q`, `q'` carry different subterms.
    Neq(StateId, StateId),
    Lin(LinearAtom),
}

impl Atom {
    pub fn states(&self) -> Vec<StateId> {
        match self {
            Atom::Eq(a, b) | Atom::Neq(a, b) => vec![*a, *b],
            Atom::Lin(l) => l.states().collect(),
        }
    }

    fn ordered(self) -> Atom {
        match self {
            Atom::Eq(a, b) if a > b => Atom::Eq(b, a),
            Atom::Neq(a, b) if a > b => Atom::Neq(b, a),
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Constraint {
    True,
    False,
    Atom(Atom),
    Not(Box<Constraint>),
    And(Vec<Constraint>),
    Or(Vec<Constraint>),
}

impl Constraint {
    pub fn eq(a: StateId, b: StateId) -> Self {
        Constraint::Atom(Atom::Eq(a, b))
    }

    pub fn neq(a: StateId, b: StateId) -> Self {
        Constraint::Atom(Atom::Neq(a, b))
    }

    pub fn lin(kind: CountKind, terms: Vec<(i64, StateId)>, cmp: Cmp, bound: i64) -> Self {
        Constraint::Atom(Atom::Lin(LinearAtom::new(kind, terms, cmp, bound)))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(c: Constraint) -> Self {
        Constraint::Not(Box::new(c))
    }

    /// Conjunction, flattening nested conjunctions and dropping `true`.
    pub fn and(parts: impl IntoIterator<Item = Constraint>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Constraint::True => {}
                Constraint::False => return Constraint::False,
                Constraint::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Constraint::True,
            1 => out.pop().unwrap(),
            _ => Constraint::And(out),
        }
    }

    /// Disjunction, flattening nested disjunctions and dropping `false`.
    pub fn or(parts: impl IntoIterator<Item = Constraint>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Constraint::False => {}
                Constraint::True => return Constraint::True,
                Constraint::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Constraint::False,
            1 => out.pop().unwrap(),
            _ => Constraint::Or(out),
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        fn go<'a>(c: &'a Constraint, out: &mut Vec<&'a Atom>) {
            match c {
                Constraint::True | Constraint::False => {}
                Constraint::Atom(a) => out.push(a),
                Constraint::Not(c) => go(c, out),
                Constraint::And(cs) | Constraint::Or(cs) => cs.iter().for_each(|c| go(c, out)),
            }
        }
        go(self, &mut out);
        out
    }

    pub fn max_state(&self) -> Option<StateId> {
        self.atoms().into_iter().flat_map(Atom::states).max()
    }

    pub fn has_linear(&self) -> bool {
        self.atoms().iter().any(|a| matches!(a, Atom::Lin(_)))
    }

    pub fn has_class_count(&self) -> bool {
        self.atoms()
            .iter()
            .any(|a| matches!(a, Atom::Lin(l) if l.kind == CountKind::Classes))
    }

    /// True for `true`, `false`, and conjunctions of `~` / `!~` atoms.
    pub fn is_positive_conjunctive(&self) -> bool {
        let eq_atom = |c: &Constraint| matches!(c, Constraint::Atom(Atom::Eq(..) | Atom::Neq(..)));
        match self {
            Constraint::True | Constraint::False => true,
            Constraint::And(cs) => cs.iter().all(eq_atom),
            c => eq_atom(c),
        }
    }

    /// Applies `f` to every state mentioned.
    pub fn map_states(&self, f: &impl Fn(StateId) -> StateId) -> Constraint {
        match self {
            Constraint::True => Constraint::True,
            Constraint::False => Constraint::False,
            Constraint::Atom(a) => Constraint::Atom(match a {
                Atom::Eq(x, y) => Atom::Eq(f(*x), f(*y)),
                Atom::Neq(x, y) => Atom::Neq(f(*x), f(*y)),
                Atom::Lin(l) => Atom::Lin(LinearAtom {
                    terms: l.terms.iter().map(|&(a, q)| (a, f(q))).collect(),
                    ..l.clone()
                }),
            }),
            Constraint::Not(c) => Constraint::not(c.map_states(f)),
            Constraint::And(cs) => Constraint::And(cs.iter().map(|c| c.map_states(f)).collect()),
            Constraint::Or(cs) => Constraint::Or(cs.iter().map(|c| c.map_states(f)).collect()),
        }
    }

    /// Replaces every atom by a constraint.
    pub fn map_atoms(&self, f: &mut impl FnMut(&Atom) -> Constraint) -> Constraint {
        match self {
            Constraint::True => Constraint::True,
            Constraint::False => Constraint::False,
            Constraint::Atom(a) => f(a),
            Constraint::Not(c) => Constraint::not(c.map_atoms(f)),
            Constraint::And(cs) => Constraint::And(cs.iter().map(|c| c.map_atoms(f)).collect()),
            Constraint::Or(cs) => Constraint::Or(cs.iter().map(|c| c.map_atoms(f)).collect()),
        }
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> DisplayConstraint<'a> {
        DisplayConstraint { c: self, names }
    }
}

/// Per-state occurrence and class multiplicities of a (partial) run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    classes: Vec<BTreeMap<ClassId, u32>>,
    occ: Vec<u64>,
}

impl RunStats {
    pub fn new(n_states: usize) -> Self {
        RunStats { classes: vec![BTreeMap::new(); n_states], occ: vec![0; n_states] }
    }

    pub fn from_pairs(n_states: usize, pairs: impl IntoIterator<Item = (StateId, ClassId)>) -> Self {
        let mut s = RunStats::new(n_states);
        for (q, c) in pairs {
            s.add(q, c);
        }
        s
    }

    pub fn add(&mut self, q: StateId, c: ClassId) {
        *self.classes[q].entry(c).or_insert(0) += 1;
        self.occ[q] += 1;
    }

    pub fn remove(&mut self, q: StateId, c: ClassId) {
        let m = self.classes[q].get_mut(&c).expect("class was added");
        *m -= 1;
        if *m == 0 {
            self.classes[q].remove(&c);
        }
        self.occ[q] -= 1;
    }

    pub fn occurrences(&self, q: StateId) -> u64 {
        self.occ[q]
    }

    pub fn class_count(&self, q: StateId) -> u64 {
        self.classes[q].len() as u64
    }

    pub fn classes(&self, q: StateId) -> impl Iterator<Item = ClassId> + '_ {
        self.classes[q].keys().copied()
    }

    pub fn count(&self, kind: CountKind, q: StateId) -> u64 {
        match kind {
            CountKind::Occurrences => self.occurrences(q),
            CountKind::Classes => self.class_count(q),
        }
    }

    pub fn n_states(&self) -> usize {
        self.occ.len()
    }

    fn eq_violated(&self, a: StateId, b: StateId) -> bool {
        let (ca, cb) = (&self.classes[a], &self.classes[b]);
        if a == b {
            return ca.len() >= 2;
        }
        if ca.is_empty() || cb.is_empty() {
            return false;
        }
        !(ca.len() == 1 && cb.len() == 1 && ca.keys().next() == cb.keys().next())
    }

    fn neq_violated(&self, a: StateId, b: StateId) -> bool {
        if a == b {
            return self.classes[a].values().any(|&m| m >= 2);
        }
        let (small, large) = if self.classes[a].len() <= self.classes[b].len() {
            (&self.classes[a], &self.classes[b])
        } else {
            (&self.classes[b], &self.classes[a])
        };
        small.keys().any(|c| large.contains_key(c))
    }
}

/// Three-valued truth used when part of a run is still unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Unknown,
}

impl Truth {
    fn not(self) -> Truth {
        match self {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Unknown => Truth::Unknown,
        }
    }
}

/// Evaluates an atom on complete run statistics.
pub fn eval_atom(atom: &Atom, stats: &RunStats) -> bool {
    match atom {
        Atom::Eq(a, b) => !stats.eq_violated(*a, *b),
        Atom::Neq(a, b) => !stats.neq_violated(*a, *b),
        Atom::Lin(l) => l.cmp.holds(l.value(stats), l.bound),
    }
}

/// Evaluates a constraint on complete run statistics.
pub fn eval(c: &Constraint, stats: &RunStats) -> bool {
    match c {
        Constraint::True => true,
        Constraint::False => false,
        Constraint::Atom(a) => eval_atom(a, stats),
        Constraint::Not(c) => !eval(c, stats),
        Constraint::And(cs) => cs.iter().all(|c| eval(c, stats)),
        Constraint::Or(cs) => cs.iter().any(|c| eval(c, stats)),
    }
}

/// Evaluates a constraint on a partial run. `remaining` bounds the number
/// of positions still to be labelled (`None` for unbounded). Adding
/// positions can only add violating pairs to `~` and `!~`, and can only
/// increase counts, which is what makes the verdicts sound.
pub fn eval_partial(c: &Constraint, stats: &RunStats, remaining: Option<u64>) -> Truth {
    match c {
        Constraint::True => Truth::True,
        Constraint::False => Truth::False,
        Constraint::Atom(a) => eval_atom_partial(a, stats, remaining),
        Constraint::Not(c) => eval_partial(c, stats, remaining).not(),
        Constraint::And(cs) => {
            let mut out = Truth::True;
            for c in cs {
                match eval_partial(c, stats, remaining) {
                    Truth::False => return Truth::False,
                    Truth::Unknown => out = Truth::Unknown,
                    Truth::True => {}
                }
            }
            out
        }
        Constraint::Or(cs) => {
            let mut out = Truth::False;
            for c in cs {
                match eval_partial(c, stats, remaining) {
                    Truth::True => return Truth::True,
                    Truth::Unknown => out = Truth::Unknown,
                    Truth::False => {}
                }
            }
            out
        }
    }
}

fn eval_atom_partial(atom: &Atom, stats: &RunStats, remaining: Option<u64>) -> Truth {
    let settled = |violated: bool| {
        if violated {
            Truth::False
        } else if remaining == Some(0) {
            Truth::True
        } else {
            Truth::Unknown
        }
    };
    match atom {
        Atom::Eq(a, b) => settled(stats.eq_violated(*a, *b)),
        Atom::Neq(a, b) => settled(stats.neq_violated(*a, *b)),
        Atom::Lin(l) => {
            // Interval of the final value; None stands for an infinite end.
            let mut lo: Option<i64> = Some(0);
            let mut hi: Option<i64> = Some(0);
            for &(a, q) in &l.terms {
                let cur = stats.count(l.kind, q) as i64;
                let top = remaining.map(|r| cur + r as i64);
                let (tlo, thi) = if a >= 0 {
                    (Some(a * cur), top.map(|t| a * t))
                } else {
                    (top.map(|t| a * t), Some(a * cur))
                };
                lo = lo.zip(tlo).map(|(x, y)| x + y);
                hi = hi.zip(thi).map(|(x, y)| x + y);
            }
            let k = l.bound;
            let (le, ge) = match l.cmp {
                Cmp::Le => (Some(k), None),
                Cmp::Lt => (Some(k - 1), None),
                Cmp::Ge => (None, Some(k)),
                Cmp::Gt => (None, Some(k + 1)),
                Cmp::Eq => (Some(k), Some(k)),
            };
            let mut definitely = true;
            if let Some(u) = le {
                if lo.is_some_and(|lo| lo > u) {
                    return Truth::False;
                }
                definitely &= hi.is_some_and(|hi| hi <= u);
            }
            if let Some(d) = ge {
                if hi.is_some_and(|hi| hi < d) {
                    return Truth::False;
                }
                definitely &= lo.is_some_and(|lo| lo >= d);
            }
            if definitely {
                Truth::True
            } else {
                Truth::Unknown
            }
        }
    }
}

/// A literal of a normalized constraint. Negative literals only wrap `~`
/// and `!~` atoms; negated arithmetic is rewritten away.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub positive: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal { positive: true, atom }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal { positive: false, atom }
    }

    pub fn to_constraint(&self) -> Constraint {
        let a = Constraint::Atom(self.atom.clone());
        if self.positive {
            a
        } else {
            Constraint::not(a)
        }
    }

    /// Contribution to the termination measure.
    pub fn measure(&self) -> Measure {
        match (&self.atom, self.positive) {
            (Atom::Eq(..) | Atom::Neq(..), false) => Measure(1, 0),
            (Atom::Lin(l), _) if l.kind == CountKind::Classes => {
                Measure(0, l.terms.len() as u64 + l.bound.unsigned_abs())
            }
            _ => Measure(0, 0),
        }
    }
}

/// Lexicographically ordered pair (negated literals, class-count weight).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Measure(pub u64, pub u64);

impl std::ops::Add for Measure {
    type Output = Measure;

    fn add(self, o: Measure) -> Measure {
        Measure(self.0 + o.0, self.1 + o.1)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{}>", self.0, self.1)
    }
}

pub fn conjunct_measure(lits: &[Literal]) -> Measure {
    lits.iter().map(Literal::measure).fold(Measure::default(), |a, b| a + b)
}

/// Measure of a conjunctive constraint.
pub fn measure(c: &Constraint) -> Result<Measure> {
    let dnf = to_dnf(c, DEFAULT_DNF_CAP)?;
    match dnf.len() {
        0 => Ok(Measure::default()),
        1 => Ok(conjunct_measure(&dnf[0])),
        _ => Err(Error::Unsupported("measure of a non-conjunctive constraint".into())),
    }
}

/// A disjunction of conjunctions of literals; `[]` is false, `[[]]` is true.
pub type Dnf = Vec<Vec<Literal>>;

/// Normalizes one linear atom, `negated` when it sits under a negation.
fn normalize_linear(l: &LinearAtom, negated: bool) -> Constraint {
    let mut coef: BTreeMap<StateId, i64> = BTreeMap::new();
    for &(a, q) in &l.terms {
        *coef.entry(q).or_insert(0) += a;
    }
    let terms: Vec<(i64, StateId)> =
        coef.into_iter().filter(|(_, a)| *a != 0).map(|(q, a)| (a, q)).collect();
    let cmp = if negated {
        match l.cmp {
            Cmp::Le => Cmp::Gt,
            Cmp::Ge => Cmp::Lt,
            Cmp::Lt => Cmp::Ge,
            Cmp::Gt => Cmp::Le,
            Cmp::Eq => {
                let lt = LinearAtom { terms: terms.clone(), cmp: Cmp::Lt, ..l.clone() };
                let gt = LinearAtom { terms, cmp: Cmp::Gt, ..l.clone() };
                return Constraint::or([normalize_linear(&lt, false), normalize_linear(&gt, false)]);
            }
        }
    } else {
        l.cmp
    };
    let (mut cmp, mut bound) = match cmp {
        Cmp::Lt => (Cmp::Le, l.bound - 1),
        Cmp::Gt => (Cmp::Ge, l.bound + 1),
        c => (c, l.bound),
    };
    if terms.is_empty() {
        return if cmp.holds(0, bound) { Constraint::True } else { Constraint::False };
    }
    let mut terms = terms;
    if terms.iter().all(|(a, _)| *a < 0) {
        terms.iter_mut().for_each(|t| t.0 = -t.0);
        bound = -bound;
        cmp = match cmp {
            Cmp::Le => Cmp::Ge,
            Cmp::Ge => Cmp::Le,
            c => c,
        };
    }
    if terms.iter().all(|(a, _)| *a > 0) {
        let g = terms.iter().fold(0, |g, (a, _)| gcd(g, *a));
        if g > 1 {
            match cmp {
                Cmp::Le => bound = bound.div_euclid(g),
                Cmp::Ge => bound = -((-bound).div_euclid(g)),
                _ => {
                    if bound % g != 0 {
                        return Constraint::False;
                    }
                    bound /= g;
                }
            }
            terms.iter_mut().for_each(|t| t.0 /= g);
        }
        match cmp {
            Cmp::Ge if bound <= 0 => return Constraint::True,
            Cmp::Le | Cmp::Eq if bound < 0 => return Constraint::False,
            _ => {}
        }
    }
    Constraint::Atom(Atom::Lin(LinearAtom { kind: l.kind, terms, cmp, bound }))
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Negation normal form with normalized arithmetic literals.
fn nnf(c: &Constraint, positive: bool) -> Constraint {
    match c {
        Constraint::True => if positive { Constraint::True } else { Constraint::False },
        Constraint::False => if positive { Constraint::False } else { Constraint::True },
        Constraint::Atom(Atom::Lin(l)) => normalize_linear(l, !positive),
        Constraint::Atom(a) => {
            let a = Constraint::Atom(a.clone().ordered());
            if positive {
                a
            } else {
                Constraint::not(a)
            }
        }
        Constraint::Not(c) => nnf(c, !positive),
        Constraint::And(cs) => {
            let parts = cs.iter().map(|c| nnf(c, positive));
            if positive {
                Constraint::and(parts)
            } else {
                Constraint::or(parts)
            }
        }
        Constraint::Or(cs) => {
            let parts = cs.iter().map(|c| nnf(c, positive));
            if positive {
                Constraint::or(parts)
            } else {
                Constraint::and(parts)
            }
        }
    }
}

/// Disjunctive normal form of a constraint, after negation normal form.
pub fn to_dnf(c: &Constraint, cap: usize) -> Result<Dnf> {
    fn go(c: &Constraint, cap: usize) -> Result<Dnf> {
        Ok(match c {
            Constraint::True => vec![vec![]],
            Constraint::False => vec![],
            Constraint::Atom(a) => vec![vec![Literal::pos(a.clone())]],
            Constraint::Not(inner) => match &**inner {
                Constraint::Atom(a) => vec![vec![Literal::neg(a.clone())]],
                _ => unreachable!("input is in negation normal form"),
            },
            Constraint::Or(cs) => {
                let mut out: Dnf = Vec::new();
                for c in cs {
                    for conj in go(c, cap)? {
                        if !out.contains(&conj) {
                            out.push(conj);
                        }
                    }
                    if out.len() > cap {
                        return Err(Error::Budget { what: "DNF conjuncts", limit: cap });
                    }
                }
                out
            }
            Constraint::And(cs) => {
                let mut acc: Dnf = vec![vec![]];
                for c in cs {
                    let part = go(c, cap)?;
                    if acc.len().saturating_mul(part.len()) > cap {
                        return Err(Error::Budget { what: "DNF conjuncts", limit: cap });
                    }
                    let mut next = Vec::with_capacity(acc.len() * part.len());
                    for a in &acc {
                        for b in &part {
                            if let Some(m) = merge_conjuncts(a, b) {
                                if !next.contains(&m) {
                                    next.push(m);
                                }
                            }
                        }
                    }
                    acc = next;
                }
                acc
            }
        })
    }
    go(&nnf(c, true), cap)
}

/// Concatenates two conjuncts, dropping duplicates; `None` when a literal
/// meets its own negation.
fn merge_conjuncts(a: &[Literal], b: &[Literal]) -> Option<Vec<Literal>> {
    let mut out = a.to_vec();
    for l in b {
        if out.contains(l) {
            continue;
        }
        if out.iter().any(|m| m.atom == l.atom && m.positive != l.positive) {
            return None;
        }
        out.push(l.clone());
    }
    Some(out)
}

pub fn dnf_to_constraint(dnf: &Dnf) -> Constraint {
    Constraint::or(
        dnf.iter().map(|conj| Constraint::and(conj.iter().map(Literal::to_constraint))),
    )
}

/// Normal form: a disjunction of conjunctions of normalized literals.
pub fn normalize(c: &Constraint) -> Result<Constraint> {
    Ok(dnf_to_constraint(&to_dnf(c, DEFAULT_DNF_CAP)?))
}

/// Constraint syntax:
/// `q ~ q'`, `q !~ q'`, `2*|q1| + |q2| >= 3`, `||q|| = 1`, `&`, `|`, `!`,
/// parentheses, `true`, `false`.
pub fn parse_constraint(src: &str, resolve: &dyn Fn(&str) -> Option<StateId>) -> Result<Constraint> {
    let mut p = ConstraintParser { lx: Lexer::new(src), resolve };
    let c = p.or()?;
    p.lx.expect_end()?;
    Ok(c)
}

struct ConstraintParser<'a, 'r> {
    lx: Lexer<'a>,
    resolve: &'r dyn Fn(&str) -> Option<StateId>,
}

impl ConstraintParser<'_, '_> {
    fn state(&mut self) -> Result<StateId> {
        let name = self.lx.ident()?;
        (self.resolve)(&name).ok_or_else(|| self.lx.error(format!("unknown state {name}")))
    }

    fn or(&mut self) -> Result<Constraint> {
        let mut parts = vec![self.and()?];
        while self.lx.eat('|') {
            parts.push(self.and()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Constraint::Or(parts) })
    }

    fn and(&mut self) -> Result<Constraint> {
        let mut parts = vec![self.unary()?];
        while self.lx.eat('&') {
            self.lx.eat('&');
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Constraint::And(parts) })
    }

    fn unary(&mut self) -> Result<Constraint> {
        if self.lx.peek() == Some('!') && self.lx.peek2() != Some('~') {
            self.lx.eat('!');
            return Ok(Constraint::not(self.unary()?));
        }
        if self.lx.eat('(') {
            let c = self.or()?;
            self.lx.expect(')')?;
            return Ok(c);
        }
        match self.lx.peek_ident() {
            Some("true") => {
                self.lx.ident()?;
                return Ok(Constraint::True);
            }
            Some("false") => {
                self.lx.ident()?;
                return Ok(Constraint::False);
            }
            _ => {}
        }
        if self.starts_linear() {
            return self.linear();
        }
        let a = self.state()?;
        if self.lx.eat_str("!~") {
            Ok(Constraint::neq(a, self.state()?))
        } else if self.lx.eat('~') {
            Ok(Constraint::eq(a, self.state()?))
        } else {
            Err(self.lx.error("expected ~ or !~"))
        }
    }

    fn starts_linear(&mut self) -> bool {
        match self.lx.peek() {
            Some('|') | Some('-') => true,
            _ => match self.lx.peek_ident() {
                Some(id) if id.bytes().all(|b| b.is_ascii_digit()) => {
                    let mut copy = self.lx.clone();
                    copy.ident().ok();
                    copy.peek() == Some('*')
                }
                _ => false,
            },
        }
    }

    fn linear(&mut self) -> Result<Constraint> {
        let mut terms = Vec::new();
        let mut kind = None;
        let mut sign = 1;
        loop {
            let mut coef = 1;
            if self.lx.peek() != Some('|') {
                coef = self.lx.integer()?;
                self.lx.expect('*')?;
            }
            let k = if self.lx.eat_str("||") {
                let q = self.state()?;
                if !self.lx.eat_str("||") {
                    return Err(self.lx.error("expected ||"));
                }
                terms.push((sign * coef, q));
                CountKind::Classes
            } else {
                self.lx.expect('|')?;
                let q = self.state()?;
                self.lx.expect('|')?;
                terms.push((sign * coef, q));
                CountKind::Occurrences
            };
            if kind.is_some_and(|prev| prev != k) {
                return Err(self.lx.error("a sum cannot mix |q| and ||q||"));
            }
            kind = Some(k);
            if self.lx.eat('+') {
                sign = 1;
            } else if self.lx.peek() == Some('-') {
                self.lx.eat('-');
                sign = -1;
            } else {
                break;
            }
        }
        let cmp = if self.lx.eat_str("<=") {
            Cmp::Le
        } else if self.lx.eat_str(">=") {
            Cmp::Ge
        } else if self.lx.eat('<') {
            Cmp::Lt
        } else if self.lx.eat('>') {
            Cmp::Gt
        } else if self.lx.eat('=') {
            self.lx.eat('=');
            Cmp::Eq
        } else {
            return Err(self.lx.error("expected comparison"));
        };
        let bound = self.lx.integer()?;
        Ok(Constraint::lin(kind.expect("at least one term"), terms, cmp, bound))
    }
}

pub struct DisplayConstraint<'a> {
    c: &'a Constraint,
    names: &'a [String],
}

impl fmt::Display for DisplayConstraint<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_constraint(f, self.c, self.names)
    }
}

fn write_constraint(f: &mut fmt::Formatter<'_>, c: &Constraint, names: &[String]) -> fmt::Result {
    let child = |f: &mut fmt::Formatter<'_>, c: &Constraint| match c {
        Constraint::And(_) | Constraint::Or(_) => {
            write!(f, "(")?;
            write_constraint(f, c, names)?;
            write!(f, ")")
        }
        _ => write_constraint(f, c, names),
    };
    match c {
        Constraint::True => write!(f, "true"),
        Constraint::False => write!(f, "false"),
        Constraint::Atom(a) => write_atom(f, a, names),
        Constraint::Not(inner) => {
            write!(f, "!(")?;
            write_constraint(f, inner, names)?;
            write!(f, ")")
        }
        Constraint::And(cs) | Constraint::Or(cs) => {
            let sep = if matches!(c, Constraint::And(_)) { " & " } else { " | " };
            for (i, x) in cs.iter().enumerate() {
                if i > 0 {
                    write!(f, "{sep}")?;
                }
                child(f, x)?;
            }
            if cs.is_empty() {
                write!(f, "{}", if matches!(c, Constraint::And(_)) { "true" } else { "false" })?;
            }
            Ok(())
        }
    }
}

fn write_atom(f: &mut fmt::Formatter<'_>, a: &Atom, names: &[String]) -> fmt::Result {
    let name = |q: StateId| names.get(q).map(String::as_str).unwrap_or("?");
    match a {
        Atom::Eq(x, y) => write!(f, "{} ~ {}", name(*x), name(*y)),
        Atom::Neq(x, y) => write!(f, "{} !~ {}", name(*x), name(*y)),
        Atom::Lin(l) => {
            if l.terms.is_empty() {
                let v = if l.cmp.holds(0, l.bound) { "true" } else { "false" };
                return write!(f, "{v}");
            }
            let bar = if l.kind == CountKind::Classes { "||" } else { "|" };
            for (i, &(a, q)) in l.terms.iter().enumerate() {
                let count = format!("{bar}{}{bar}", name(q));
                match (i, a) {
                    (0, 1) => write!(f, "{count}")?,
                    (0, a) => write!(f, "{a}*{count}")?,
                    (_, 1) => write!(f, " + {count}")?,
                    (_, -1) => write!(f, " - {count}")?,
                    (_, a) if a < 0 => write!(f, " - {}*{count}", -a)?,
                    (_, a) => write!(f, " + {a}*{count}")?,
                }
            }
            write!(f, " {} {}", l.cmp.symbol(), l.bound)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        ["q", "q1", "q2", "p"].iter().map(|s| s.to_string()).collect()
    }

    fn parse(s: &str) -> Constraint {
        let n = names();
        parse_constraint(s, &|x| n.iter().position(|y| y == x)).unwrap()
    }

    fn show(c: &Constraint) -> String {
        c.display(&names()).to_string()
    }

    #[test]
    fn print_parse_roundtrip() {
        for src in [
            "q ~ q1",
            "q !~ q",
            "2*|q1| + |q2| >= 3",
            "||q|| = 1",
            "!(q ~ q) & (q1 !~ q2 | |p| <= 0)",
            "|q| - 2*|p| < 4",
            "true",
        ] {
            let c = parse(src);
            assert_eq!(parse(&show(&c)), c, "{src}");
        }
    }

    #[test]
    fn mixed_sum_rejected() {
        let n = names();
        assert!(parse_constraint("|q| + ||p|| >= 1", &|x| n.iter().position(|y| y == x)).is_err());
    }

    #[test]
    fn normalize_negated_equality() {
        let c = normalize(&parse("!(||q|| = 1)")).unwrap();
        assert_eq!(show(&c), "||q|| <= 0 | ||q|| >= 2");
    }

    #[test]
    fn normalize_strict_and_trivial() {
        assert_eq!(show(&normalize(&parse("|q| > 2")).unwrap()), "|q| >= 3");
        assert_eq!(normalize(&parse("|q| >= 0")).unwrap(), Constraint::True);
        assert_eq!(normalize(&parse("|q| < 0")).unwrap(), Constraint::False);
        assert_eq!(show(&normalize(&parse("-1*|q| >= -2")).unwrap()), "|q| <= 2");
        assert_eq!(show(&normalize(&parse("2*|q| <= 5")).unwrap()), "|q| <= 2");
    }

    #[test]
    fn measure_examples() {
        let c = normalize(&parse("!(q ~ q1) & (2*||q1|| + ||q2|| <= 3)")).unwrap();
        assert_eq!(measure(&c).unwrap(), Measure(1, 5));
        assert_eq!(measure(&parse("q ~ q & |q| >= 1")).unwrap(), Measure(0, 0));
    }

    #[test]
    fn sign_classes() {
        let nat = LinearAtom::new(CountKind::Occurrences, vec![(1, 0), (2, 1)], Cmp::Ge, 1);
        let int = LinearAtom::new(CountKind::Occurrences, vec![(1, 0), (-1, 1)], Cmp::Ge, 0);
        assert_eq!(nat.sign(), Sign::Natural);
        assert_eq!(int.sign(), Sign::Integer);
    }

    #[test]
    fn eq_atoms_on_stats() {
        let mut s = RunStats::new(2);
        s.add(0, ClassId(7));
        assert!(eval_atom(&Atom::Eq(0, 0), &s));
        assert!(eval_atom(&Atom::Neq(0, 0), &s));
        s.add(0, ClassId(7));
        assert!(eval_atom(&Atom::Eq(0, 0), &s));
        assert!(!eval_atom(&Atom::Neq(0, 0), &s));
        s.add(1, ClassId(8));
        assert!(!eval_atom(&Atom::Eq(0, 1), &s));
        assert!(eval_atom(&Atom::Neq(0, 1), &s));
        assert!(!eval(&Constraint::not(Constraint::neq(0, 1)), &s));
    }

    #[test]
    fn partial_eval_is_sound() {
        let mut s = RunStats::new(1);
        s.add(0, ClassId(1));
        let c = parse("|q| <= 2");
        assert_eq!(eval_partial(&c, &s, Some(3)), Truth::Unknown);
        assert_eq!(eval_partial(&c, &s, Some(1)), Truth::True);
        s.add(0, ClassId(2));
        s.add(0, ClassId(3));
        assert_eq!(eval_partial(&c, &s, None), Truth::False);
        assert_eq!(eval_partial(&parse("q ~ q"), &s, None), Truth::False);
        assert_eq!(eval_partial(&parse("!(q ~ q)"), &s, None), Truth::True);
    }
}
