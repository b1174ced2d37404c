//! Hedge automata with global constraints over unranked terms, and their
//! translation to ranked automata through currying.
//!
//! Hedge automaton files extend the automaton format:
//!
//! ```text
//! states q qb
//! final q
//! nfa Bs: init s0; final s1; s0 -qb-> s1; s1 -qb-> s1
//! nfa Eps: init e; final e
//! hrule a (Bs) -> q
//! hrule b (Eps) -> qb
//! global qb ~ qb
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::automaton::{fresh_name, Automaton, Rule};
use crate::constraint::{eval, parse_constraint, Constraint, RunStats, StateId};
use crate::error::{Error, Result};
use crate::format::directives;
use crate::membership::member;
use crate::syntax::{at_line, Lexer};
use crate::term::{Signature, Symbol, Term};
use crate::theory::{ClassId, FlatTheory};

/// Unranked terms share the ranked representation; no arity is enforced.
pub type UnrankedTerm = Term;

/// The binary application symbol of curried terms.
pub const APPLY: &str = "@";

/// `curry(a) = a`, `curry(a(t1..tn)) = @(curry(a(t1..tn-1)), curry(tn))`.
pub fn curry(t: &UnrankedTerm) -> Term {
    let mut acc = Term::leaf(t.symbol.clone());
    for c in &t.children {
        acc = Term::new(APPLY, vec![acc, curry(c)]);
    }
    acc
}

pub fn uncurry(t: &Term) -> Result<UnrankedTerm> {
    if &*t.symbol == APPLY {
        let [l, r] = t.children.as_slice() else {
            return Err(Error::Unsupported(format!("{APPLY} must have two arguments in {t}")));
        };
        let mut head = uncurry(l)?;
        head.children.push(uncurry(r)?);
        Ok(head)
    } else if t.children.is_empty() {
        Ok(Term::leaf(t.symbol.clone()))
    } else {
        Err(Error::Unsupported(format!("{t} is not a curried term")))
    }
}

/// A word automaton over tree-automaton states.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WordAutomaton {
    pub states: Vec<String>,
    pub initial: BTreeSet<usize>,
    pub finals: BTreeSet<usize>,
    /// `(from, letter, to)`.
    pub transitions: Vec<(usize, StateId, usize)>,
}

impl WordAutomaton {
    pub fn accepts(&self, word: &[StateId]) -> bool {
        let mut cur = self.initial.clone();
        for &x in word {
            cur = self
                .transitions
                .iter()
                .filter(|(s, l, _)| cur.contains(s) && *l == x)
                .map(|&(_, _, t)| t)
                .collect();
        }
        cur.iter().any(|s| self.finals.contains(s))
    }

    pub fn accepts_empty(&self) -> bool {
        self.initial.iter().any(|s| self.finals.contains(s))
    }

    /// Disjoint union; states of `other` are renamed if they clash.
    pub fn union(&self, other: &WordAutomaton) -> WordAutomaton {
        let mut out = self.clone();
        let mut taken: BTreeSet<String> = out.states.iter().cloned().collect();
        let off = out.states.len();
        for s in &other.states {
            let n = fresh_name(s, |x| taken.contains(x));
            taken.insert(n.clone());
            out.states.push(n);
        }
        out.initial.extend(other.initial.iter().map(|s| s + off));
        out.finals.extend(other.finals.iter().map(|s| s + off));
        out.transitions.extend(other.transitions.iter().map(|&(s, l, t)| (s + off, l, t + off)));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HedgeRule {
    pub symbol: Symbol,
    pub horizontal: WordAutomaton,
    pub rhs: StateId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgeAutomaton {
    pub states: Vec<String>,
    pub symbols: Vec<Symbol>,
    pub finals: BTreeSet<StateId>,
    pub rules: Vec<HedgeRule>,
    pub global: Constraint,
}

impl HedgeAutomaton {
    /// One rule per (symbol, state) pair, merging horizontal languages by
    /// union.
    pub fn merged(&self) -> HedgeAutomaton {
        let mut by_key: BTreeMap<(usize, StateId), WordAutomaton> = BTreeMap::new();
        for r in &self.rules {
            let s = self.symbols.iter().position(|x| *x == r.symbol).expect("declared symbol");
            by_key
                .entry((s, r.rhs))
                .and_modify(|w| *w = w.union(&r.horizontal))
                .or_insert_with(|| r.horizontal.clone());
        }
        HedgeAutomaton {
            rules: by_key
                .into_iter()
                .map(|((s, q), horizontal)| HedgeRule { symbol: self.symbols[s].clone(), horizontal, rhs: q })
                .collect(),
            ..self.clone()
        }
    }
}

fn parse_nfa(line: usize, body: &str, index: &HashMap<&str, StateId>) -> Result<WordAutomaton> {
    let mut w = WordAutomaton::default();
    let mut names: HashMap<String, usize> = HashMap::new();
    let mut state = |w: &mut WordAutomaton, n: &str| -> usize {
        *names.entry(n.to_string()).or_insert_with(|| {
            w.states.push(n.to_string());
            w.states.len() - 1
        })
    };
    for item in body.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some(rest) = item.strip_prefix("init ") {
            for n in rest.split_whitespace() {
                let s = state(&mut w, n);
                w.initial.insert(s);
            }
        } else if let Some(rest) = item.strip_prefix("final ") {
            for n in rest.split_whitespace() {
                let s = state(&mut w, n);
                w.finals.insert(s);
            }
        } else {
            let mut lx = Lexer::new(item);
            let from = at_line(line, lx.ident())?;
            if !lx.eat('-') {
                return Err(Error::parse(line, format!("expected s -q-> s', got {item:?}")));
            }
            let letter = at_line(line, lx.ident())?;
            if !lx.eat_str("->") {
                return Err(Error::parse(line, format!("expected -> in {item:?}")));
            }
            let to = at_line(line, lx.ident())?;
            at_line(line, lx.expect_end())?;
            let q = *index
                .get(letter.as_str())
                .ok_or_else(|| Error::parse(line, format!("undeclared state {letter}")))?;
            let (f, t) = (state(&mut w, &from), state(&mut w, &to));
            w.transitions.push((f, q, t));
        }
    }
    if w.initial.is_empty() {
        return Err(Error::parse(line, "word automaton without initial state"));
    }
    Ok(w)
}

pub fn parse_hedge_automaton(src: &str) -> Result<HedgeAutomaton> {
    let mut states: Vec<String> = Vec::new();
    let mut symbols: Vec<Symbol> = Vec::new();
    let mut finals_raw = Vec::new();
    let mut nfas_raw: Vec<(usize, String, String)> = Vec::new();
    let mut rules_raw: Vec<(usize, String, String, String)> = Vec::new();
    let mut globals_raw = Vec::new();
    let add_symbol = |symbols: &mut Vec<Symbol>, s: &str| {
        if !symbols.iter().any(|x| &**x == s) {
            symbols.push(s.into());
        }
    };
    for (line, kw, rest) in directives(src) {
        match kw {
            "states" => states.extend(rest.split_whitespace().map(str::to_string)),
            "final" => finals_raw.extend(rest.split_whitespace().map(|s| (line, s.to_string()))),
            "sig" => rest.split_whitespace().for_each(|s| add_symbol(&mut symbols, s)),
            "nfa" => {
                let (name, body) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::parse(line, "expected nfa NAME: ..."))?;
                nfas_raw.push((line, name.trim().to_string(), body.to_string()));
            }
            "hrule" => {
                let mut lx = Lexer::new(rest);
                let sym = at_line(line, lx.ident())?;
                at_line(line, lx.expect('('))?;
                let nfa = at_line(line, lx.ident())?;
                at_line(line, lx.expect(')'))?;
                if !lx.eat_str("->") {
                    return Err(Error::parse(line, "expected ->"));
                }
                let q = at_line(line, lx.ident())?;
                at_line(line, lx.expect_end())?;
                add_symbol(&mut symbols, &sym);
                rules_raw.push((line, sym, nfa, q));
            }
            "global" => globals_raw.push((line, rest.to_string())),
            other => return Err(Error::parse(line, format!("unknown directive {other:?}"))),
        }
    }
    let index: HashMap<&str, StateId> = states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let resolve = |line: usize, n: &str| {
        index.get(n).copied().ok_or_else(|| Error::parse(line, format!("undeclared state {n}")))
    };
    let mut nfas = HashMap::new();
    for (line, name, body) in &nfas_raw {
        if nfas.insert(name.clone(), parse_nfa(*line, body, &index)?).is_some() {
            return Err(Error::parse(*line, format!("word automaton {name} defined twice")));
        }
    }
    let mut finals = BTreeSet::new();
    for (line, f) in &finals_raw {
        finals.insert(resolve(*line, f)?);
    }
    let mut rules = Vec::new();
    for (line, sym, nfa, q) in &rules_raw {
        let horizontal = nfas
            .get(nfa)
            .cloned()
            .ok_or_else(|| Error::parse(*line, format!("unknown word automaton {nfa}")))?;
        rules.push(HedgeRule { symbol: sym.as_str().into(), horizontal, rhs: resolve(*line, q)? });
    }
    let mut globals = Vec::new();
    for (line, g) in &globals_raw {
        globals.push(at_line(*line, parse_constraint(g, &|s| index.get(s).copied()))?);
    }
    Ok(HedgeAutomaton { states, symbols, finals, rules, global: Constraint::and(globals) })
}

pub fn write_hedge_automaton(h: &HedgeAutomaton) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "states {}", h.states.join(" "));
    let syms: Vec<&str> = h.symbols.iter().map(|s| &**s).collect();
    let _ = writeln!(out, "sig {}", syms.join(" "));
    let finals: Vec<&str> = h.finals.iter().map(|&q| h.states[q].as_str()).collect();
    if !finals.is_empty() {
        let _ = writeln!(out, "final {}", finals.join(" "));
    }
    for (k, r) in h.rules.iter().enumerate() {
        let w = &r.horizontal;
        let mut items = Vec::new();
        let names = |set: &BTreeSet<usize>| set.iter().map(|&s| w.states[s].as_str()).collect::<Vec<_>>().join(" ");
        items.push(format!("init {}", names(&w.initial)));
        if !w.finals.is_empty() {
            items.push(format!("final {}", names(&w.finals)));
        }
        for &(s, l, t) in &w.transitions {
            items.push(format!("{} -{}-> {}", w.states[s], h.states[l], w.states[t]));
        }
        let _ = writeln!(out, "nfa H{k}: {}", items.join("; "));
        let _ = writeln!(out, "hrule {} (H{k}) -> {}", r.symbol, h.states[r.rhs]);
    }
    if h.global != Constraint::True {
        let _ = writeln!(out, "global {}", h.global.display(&h.states));
    }
    out
}

/// Ranked automaton over the curried signature recognizing the curried
/// language. States of `h` keep their ids; word-automaton states follow.
pub fn hag_to_tag(h: &HedgeAutomaton) -> Result<Automaton> {
    let h = h.merged();
    let mut sig = Signature::new();
    for s in &h.symbols {
        if &**s == APPLY {
            return Err(Error::Signature(format!("{APPLY} is reserved for curried terms")));
        }
        sig.add(s, 0)?;
    }
    let apply = sig.add(APPLY, 2)?;
    let mut states = h.states.clone();
    let mut taken: BTreeSet<String> = states.iter().cloned().collect();
    let mut rules = Vec::new();
    for r in &h.rules {
        let w = &r.horizontal;
        let base = states.len();
        for s in &w.states {
            let name = fresh_name(&format!("{}:{}:{}", r.symbol, h.states[r.rhs], s), |n| taken.contains(n));
            taken.insert(name.clone());
            states.push(name);
        }
        if w.accepts_empty() {
            rules.push(Rule::new(r.symbol.clone(), vec![], r.rhs));
        }
        for &s in &w.initial {
            rules.push(Rule::new(r.symbol.clone(), vec![], base + s));
        }
        for &(s, q, t) in &w.transitions {
            rules.push(Rule::new(apply.clone(), vec![base + s, q], base + t));
        }
        for &(s, q, t) in &w.transitions {
            if w.finals.contains(&t) {
                rules.push(Rule::new(apply.clone(), vec![base + s, q], r.rhs));
            }
        }
    }
    let mut seen = BTreeSet::new();
    rules.retain(|r| seen.insert(r.clone()));
    Automaton::new(sig, states, h.finals.clone(), rules, FlatTheory::empty(), h.global.clone())
}

pub fn hag_member(h: &HedgeAutomaton, t: &UnrankedTerm) -> Result<bool> {
    let tag = hag_to_tag(h)?;
    let c = curry(t);
    if c.check(&tag.signature).is_err() {
        return Ok(false);
    }
    Ok(member(&tag, &c)?.is_some())
}

/// Decides acceptance by enumerating state labellings of `t` directly,
/// without translation. Exponential; meant for small documents.
pub fn hedge_run_exists(h: &HedgeAutomaton, t: &UnrankedTerm) -> Result<bool> {
    // Preorder flattening with syntactic classes.
    let mut symbols = Vec::new();
    let mut children: Vec<Vec<usize>> = Vec::new();
    let mut classes: Vec<ClassId> = Vec::new();
    let mut cons: HashMap<(Symbol, Vec<ClassId>), ClassId> = HashMap::new();
    fn go(
        t: &Term,
        symbols: &mut Vec<Symbol>,
        children: &mut Vec<Vec<usize>>,
        classes: &mut Vec<ClassId>,
        cons: &mut HashMap<(Symbol, Vec<ClassId>), ClassId>,
    ) -> usize {
        let id = symbols.len();
        symbols.push(t.symbol.clone());
        children.push(Vec::new());
        classes.push(ClassId(0));
        let kids: Vec<usize> = t.children.iter().map(|c| go(c, symbols, children, classes, cons)).collect();
        let key = (t.symbol.clone(), kids.iter().map(|&k| classes[k]).collect());
        let n = cons.len() as u32;
        classes[id] = *cons.entry(key).or_insert(ClassId(n));
        children[id] = kids;
        id
    }
    go(t, &mut symbols, &mut children, &mut classes, &mut cons);
    let n = symbols.len();
    let nq = h.states.len();
    let mut labels = vec![0usize; n];
    fn assign(
        k: usize,
        h: &HedgeAutomaton,
        symbols: &[Symbol],
        children: &[Vec<usize>],
        classes: &[ClassId],
        labels: &mut Vec<usize>,
        nq: usize,
    ) -> bool {
        if k == 0 {
            if !h.finals.contains(&labels[0]) {
                return false;
            }
            let stats = RunStats::from_pairs(nq, labels.iter().zip(classes).map(|(&q, &c)| (q, c)));
            return eval(&h.global, &stats);
        }
        let node = k - 1;
        for q in 0..nq {
            labels[node] = q;
            let word: Vec<StateId> = children[node].iter().map(|&c| labels[c]).collect();
            let ok = h.rules.iter().any(|r| r.symbol == symbols[node] && r.rhs == q && r.horizontal.accepts(&word));
            if ok && assign(node, h, symbols, children, classes, labels, nq) {
                return true;
            }
        }
        false
    }
    // Nodes are labelled from the last in preorder back to the root, so
    // children are always labelled before their parent.
    Ok(assign(n, h, &symbols, &children, &classes, &mut labels, nq))
}
