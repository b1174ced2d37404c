//! Tree automata with brother constraints and a global constraint.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::constraint::{eval, Constraint, RunStats, StateId};
use crate::error::{Error, Result};
use crate::syntax::is_ident;
use crate::term::{Position, Signature, Symbol, Term};
use crate::theory::{ClassId, CongruenceIndex, FlatTheory};

/// A brother constraint between two children (1-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BrotherAtom {
    Eq(usize, usize),
    Neq(usize, usize),
}

impl BrotherAtom {
    pub fn holds(&self, classes: &[ClassId]) -> bool {
        match *self {
            BrotherAtom::Eq(i, j) => classes[i - 1] == classes[j - 1],
            BrotherAtom::Neq(i, j) => classes[i - 1] != classes[j - 1],
        }
    }

    fn indices(&self) -> (usize, usize) {
        match *self {
            BrotherAtom::Eq(i, j) | BrotherAtom::Neq(i, j) => (i, j),
        }
    }
}

impl fmt::Display for BrotherAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BrotherAtom::Eq(i, j) => write!(f, "{i}~{j}"),
            BrotherAtom::Neq(i, j) => write!(f, "{i}!~{j}"),
        }
    }
}

/// `symbol(lhs...) [brother] -> rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rule {
    pub symbol: Symbol,
    pub lhs: Vec<StateId>,
    pub brother: Vec<BrotherAtom>,
    pub rhs: StateId,
}

impl Rule {
    pub fn new(symbol: impl Into<Symbol>, lhs: Vec<StateId>, rhs: StateId) -> Self {
        Rule { symbol: symbol.into(), lhs, brother: Vec::new(), rhs }
    }

    pub fn with_brother(mut self, brother: Vec<BrotherAtom>) -> Self {
        self.brother = brother;
        self
    }

    pub fn brother_holds(&self, child_classes: &[ClassId]) -> bool {
        self.brother.iter().all(|b| b.holds(child_classes))
    }
}

/// Which subclasses an automaton falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub ta: bool,
    pub tab: bool,
    pub tag: bool,
    pub positive_conjunctive: bool,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut tags = Vec::new();
        if self.ta {
            tags.push("TA");
        }
        if self.tab {
            tags.push("TAB");
        }
        if self.tag {
            tags.push("TAG");
        }
        if self.positive_conjunctive {
            tags.push("POSITIVE-CONJUNCTIVE");
        }
        if tags.is_empty() {
            tags.push("TABG");
        }
        write!(f, "{}", tags.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Automaton {
    pub signature: Signature,
    states: Vec<String>,
    state_index: HashMap<String, StateId>,
    pub finals: BTreeSet<StateId>,
    pub rules: Vec<Rule>,
    pub theory: FlatTheory,
    pub global: Constraint,
}

impl Automaton {
    pub fn new(
        signature: Signature,
        states: Vec<String>,
        finals: BTreeSet<StateId>,
        rules: Vec<Rule>,
        theory: FlatTheory,
        global: Constraint,
    ) -> Result<Self> {
        let mut state_index = HashMap::with_capacity(states.len());
        for (i, s) in states.iter().enumerate() {
            if !is_ident(s) {
                return Err(Error::Automaton(format!("bad state name {s:?}")));
            }
            if state_index.insert(s.clone(), i).is_some() {
                return Err(Error::Automaton(format!("duplicate state {s}")));
            }
        }
        let a = Automaton { signature, states, state_index, finals, rules, theory, global };
        a.check()?;
        Ok(a)
    }

    fn check(&self) -> Result<()> {
        let n = self.states.len();
        if let Some(q) = self.finals.iter().find(|&&q| q >= n) {
            return Err(Error::Automaton(format!("final state {q} out of range")));
        }
        for (k, r) in self.rules.iter().enumerate() {
            match self.signature.arity(&r.symbol) {
                Some(a) if a == r.lhs.len() => {}
                Some(a) => {
                    return Err(Error::Automaton(format!(
                        "rule {k}: {} has arity {a} but {} arguments",
                        r.symbol,
                        r.lhs.len()
                    )))
                }
                None => return Err(Error::Automaton(format!("rule {k}: undeclared {}", r.symbol))),
            }
            if r.rhs >= n || r.lhs.iter().any(|&q| q >= n) {
                return Err(Error::Automaton(format!("rule {k}: state out of range")));
            }
            for b in &r.brother {
                let (i, j) = b.indices();
                if i == 0 || j == 0 || i > r.lhs.len() || j > r.lhs.len() {
                    return Err(Error::Automaton(format!("rule {k}: brother index out of range in {b}")));
                }
            }
        }
        if self.global.max_state().is_some_and(|q| q >= n) {
            return Err(Error::Automaton("global constraint mentions an unknown state".into()));
        }
        Ok(())
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.states[q]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.state_index.get(name).copied()
    }

    /// Appends a state whose name is `base` or, if taken, `base_2`, `base_3`, ...
    pub fn add_state(&mut self, base: &str) -> StateId {
        let name = fresh_name(base, |n| self.state_index.contains_key(n));
        let id = self.states.len();
        self.state_index.insert(name.clone(), id);
        self.states.push(name);
        id
    }

    pub fn is_final(&self, q: StateId) -> bool {
        self.finals.contains(&q)
    }

    pub fn classify(&self) -> Classification {
        let no_brother = self.rules.iter().all(|r| r.brother.is_empty());
        let global_true = self.global == Constraint::True;
        Classification {
            ta: no_brother && global_true && self.theory.is_empty(),
            tab: global_true,
            tag: no_brother && self.theory.is_empty(),
            positive_conjunctive: self.global.is_positive_conjunctive(),
        }
    }

    /// Maximal arity of the signature.
    pub fn max_arity(&self) -> usize {
        self.signature.max_arity()
    }

    /// States reachable bottom-up, ignoring all equality constraints.
    pub fn reachable_states(&self) -> BTreeSet<StateId> {
        let mut reach = vec![false; self.n_states()];
        loop {
            let mut changed = false;
            for r in &self.rules {
                if !reach[r.rhs] && r.lhs.iter().all(|&q| reach[q]) {
                    reach[r.rhs] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        (0..self.n_states()).filter(|&q| reach[q]).collect()
    }

    /// Least height of a run reaching each state, ignoring equality constraints.
    pub fn min_heights(&self) -> Vec<Option<usize>> {
        let mut h: Vec<Option<usize>> = vec![None; self.n_states()];
        loop {
            let mut changed = false;
            for r in &self.rules {
                let hs: Option<Vec<usize>> = r.lhs.iter().map(|&q| h[q]).collect();
                if let Some(hs) = hs {
                    let v = hs.iter().map(|x| x + 1).max().unwrap_or(0);
                    if h[r.rhs].is_none_or(|old| v < old) {
                        h[r.rhs] = Some(v);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        h
    }

    /// The same automaton with another global constraint.
    pub fn with_global(&self, global: Constraint) -> Automaton {
        Automaton { global, ..self.clone() }
    }

    pub fn rule_display<'a>(&'a self, r: &'a Rule) -> RuleDisplay<'a> {
        RuleDisplay { aut: self, rule: r }
    }
}

/// `base` if `taken` rejects it, else the first free `base_k` with `k >= 2`.
pub fn fresh_name(base: &str, taken: impl Fn(&str) -> bool) -> String {
    if !taken(base) {
        return base.to_string();
    }
    (2..)
        .map(|k| format!("{base}_{k}"))
        .find(|n| !taken(n))
        .expect("unbounded supply")
}

pub struct RuleDisplay<'a> {
    aut: &'a Automaton,
    rule: &'a Rule,
}

impl fmt::Display for RuleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.rule;
        write!(f, "{}", r.symbol)?;
        if !r.lhs.is_empty() {
            let lhs: Vec<&str> = r.lhs.iter().map(|&q| self.aut.state_name(q)).collect();
            write!(f, "({})", lhs.join(","))?;
        }
        if !r.brother.is_empty() {
            let b: Vec<String> = r.brother.iter().map(|b| b.to_string()).collect();
            write!(f, " [{}]", b.join(", "))?;
        }
        write!(f, " -> {}", self.aut.state_name(r.rhs))
    }
}

/// A run: every position carries the index of the rule applied there.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Run {
    pub symbol: Symbol,
    pub rule: usize,
    pub children: Vec<Run>,
}

impl Run {
    pub fn term(&self) -> Term {
        Term { symbol: self.symbol.clone(), children: self.children.iter().map(Run::term).collect() }
    }

    pub fn height(&self) -> usize {
        self.children.iter().map(|c| c.height() + 1).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Run::size).sum::<usize>()
    }

    pub fn state(&self, aut: &Automaton) -> StateId {
        aut.rules[self.rule].rhs
    }

    pub fn at(&self, p: &Position) -> Result<&Run> {
        let mut r = self;
        for &k in &p.0 {
            r = r.children.get(k.wrapping_sub(1)).ok_or_else(|| Error::Position(p.to_string()))?;
        }
        Ok(r)
    }

    pub fn replace(&self, p: &Position, sub: Run) -> Result<Run> {
        let mut out = self.clone();
        let mut slot = &mut out;
        for &k in &p.0 {
            slot = slot
                .children
                .get_mut(k.wrapping_sub(1))
                .ok_or_else(|| Error::Position(p.to_string()))?;
        }
        *slot = sub;
        Ok(out)
    }

    /// `(position, rule)` pairs in preorder.
    pub fn rule_map(&self) -> Vec<(Position, usize)> {
        let mut out = Vec::new();
        fn go(r: &Run, p: &mut Vec<usize>, out: &mut Vec<(Position, usize)>) {
            out.push((Position(p.clone()), r.rule));
            for (i, c) in r.children.iter().enumerate() {
                p.push(i + 1);
                go(c, p, out);
                p.pop();
            }
        }
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Builds a run over `term` from a position-to-rule map.
    pub fn from_rule_map(term: &Term, map: &HashMap<Position, usize>) -> Result<Run> {
        fn go(t: &Term, p: &mut Vec<usize>, map: &HashMap<Position, usize>) -> Result<Run> {
            let pos = Position(p.clone());
            let rule = *map.get(&pos).ok_or_else(|| Error::Run(format!("no rule at position {pos}")))?;
            let mut children = Vec::with_capacity(t.children.len());
            for (i, c) in t.children.iter().enumerate() {
                p.push(i + 1);
                children.push(go(c, p, map)?);
                p.pop();
            }
            Ok(Run { symbol: t.symbol.clone(), rule, children })
        }
        if map.len() != term.size() {
            return Err(Error::Run(format!(
                "run has {} positions but the term has {}",
                map.len(),
                term.size()
            )));
        }
        go(term, &mut Vec::new(), map)
    }
}

/// A term flattened in preorder together with congruence classes.
#[derive(Debug, Clone)]
pub struct TermTable {
    pub positions: Vec<Position>,
    pub symbols: Vec<Symbol>,
    pub children: Vec<Vec<usize>>,
    pub parent: Vec<Option<usize>>,
    pub heights: Vec<usize>,
    pub classes: Vec<ClassId>,
}

impl TermTable {
    pub fn new(term: &Term, theory: &FlatTheory) -> Result<Self> {
        let index = CongruenceIndex::build(theory, &[term])?;
        Ok(Self::with_index(term, &index))
    }

    pub fn with_index(term: &Term, index: &CongruenceIndex) -> Self {
        let classes = index.classes_preorder(term).expect("term is indexed");
        let mut t = TermTable {
            positions: Vec::new(),
            symbols: Vec::new(),
            children: Vec::new(),
            parent: Vec::new(),
            heights: Vec::new(),
            classes,
        };
        fn go(tb: &mut TermTable, t: &Term, parent: Option<usize>, p: &mut Vec<usize>) -> usize {
            let id = tb.positions.len();
            tb.positions.push(Position(p.clone()));
            tb.symbols.push(t.symbol.clone());
            tb.children.push(Vec::new());
            tb.parent.push(parent);
            tb.heights.push(0);
            let mut h = 0;
            for (i, c) in t.children.iter().enumerate() {
                p.push(i + 1);
                let k = go(tb, c, Some(id), p);
                p.pop();
                tb.children[id].push(k);
                h = h.max(tb.heights[k] + 1);
            }
            tb.heights[id] = h;
            id
        }
        go(&mut t, term, None, &mut Vec::new());
        t
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn child_classes(&self, node: usize) -> Vec<ClassId> {
        self.children[node].iter().map(|&k| self.classes[k]).collect()
    }
}

/// Why a run is not a run of an automaton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownRule { position: Position, rule: usize },
    SymbolMismatch { position: Position, rule: usize },
    ChildState { position: Position, child: usize },
    Brother { position: Position, atom: BrotherAtom },
    Global,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownRule { position, rule } => write!(f, "{position}: no rule {rule}"),
            Violation::SymbolMismatch { position, rule } => {
                write!(f, "{position}: rule {rule} does not match the symbol or arity")
            }
            Violation::ChildState { position, child } => {
                write!(f, "{position}: child {child} is not in the state the rule expects")
            }
            Violation::Brother { position, atom } => {
                write!(f, "{position}: brother constraint {atom} fails")
            }
            Violation::Global => write!(f, "global constraint fails"),
        }
    }
}

/// Statistics of a run's labelling for the global constraint.
pub fn run_stats(aut: &Automaton, run: &Run, table: &TermTable) -> RunStats {
    let rules: Vec<usize> = run.rule_map().into_iter().map(|(_, r)| r).collect();
    RunStats::from_pairs(
        aut.n_states(),
        rules.iter().zip(&table.classes).map(|(&r, &c)| (aut.rules[r].rhs, c)),
    )
}

/// Checks local rule application, brother constraints and the global
/// constraint. Acceptance (a final root state) is not part of validity.
pub fn validate_run(aut: &Automaton, run: &Run) -> Result<Vec<Violation>> {
    let term = run.term();
    let table = TermTable::new(&term, &aut.theory)?;
    let rules: Vec<usize> = run.rule_map().into_iter().map(|(_, r)| r).collect();
    let mut out = Vec::new();
    for (node, &k) in rules.iter().enumerate() {
        let position = table.positions[node].clone();
        let Some(rule) = aut.rules.get(k) else {
            out.push(Violation::UnknownRule { position, rule: k });
            continue;
        };
        let kids = &table.children[node];
        if rule.symbol != table.symbols[node] || rule.lhs.len() != kids.len() {
            out.push(Violation::SymbolMismatch { position, rule: k });
            continue;
        }
        for (i, (&child, &q)) in kids.iter().zip(&rule.lhs).enumerate() {
            if aut.rules.get(rules[child]).is_none_or(|r| r.rhs != q) {
                out.push(Violation::ChildState { position: position.clone(), child: i + 1 });
            }
        }
        let cc = table.child_classes(node);
        for b in &rule.brother {
            if !b.holds(&cc) {
                out.push(Violation::Brother { position: position.clone(), atom: *b });
            }
        }
    }
    if out.iter().all(|v| !matches!(v, Violation::UnknownRule { .. })) {
        let stats = run_stats(aut, run, &table);
        if !eval(&aut.global, &stats) {
            out.push(Violation::Global);
        }
    }
    Ok(out)
}

/// A valid run whose root state is final.
pub fn is_accepting_run(aut: &Automaton, run: &Run) -> Result<bool> {
    Ok(aut.rules.get(run.rule).is_some_and(|r| aut.is_final(r.rhs)) && validate_run(aut, run)?.is_empty())
}
