//! Line-oriented text formats for automata and runs.
//!
//! ```text
//! sig f:2 a:0
//! states q0 qf
//! final qf
//! vars x y
//! eq f(x,a) = f(a,x)
//! rule a -> q0
//! rule f(q0,q0) [1~2] -> qf | q0
//! global q0 !~ q0
//! ```
//!
//! A rule line with alternatives `-> q1 | q2` expands to one rule per
//! alternative, in order. Rule indexes count expanded rules from 0.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::automaton::{Automaton, BrotherAtom, Rule, Run};
use crate::constraint::{parse_constraint, Constraint, StateId};
use crate::error::{Error, Result};
use crate::syntax::{at_line, strip_comment, Lexer};
use crate::term::{Position, Signature, Term};
use crate::theory::FlatTheory;

/// Non-empty lines as `(line number, keyword, rest)`.
pub(crate) fn directives(src: &str) -> impl Iterator<Item = (usize, &str, &str)> {
    src.lines().enumerate().filter_map(|(i, raw)| {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            return None;
        }
        let (kw, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        Some((i + 1, kw, rest.trim()))
    })
}

pub(crate) fn parse_sig_entries(line: usize, rest: &str, sig: &mut Signature) -> Result<()> {
    for entry in rest.split_whitespace() {
        let (name, arity) = entry
            .rsplit_once(':')
            .ok_or_else(|| Error::parse(line, format!("expected name:arity, got {entry}")))?;
        let arity = arity
            .parse::<usize>()
            .map_err(|_| Error::parse(line, format!("bad arity in {entry}")))?;
        sig.add(name, arity).map_err(|e| Error::parse(line, e.to_string()))?;
    }
    Ok(())
}

/// A rule line before state names are resolved.
pub(crate) struct RawRule {
    pub symbol: String,
    pub lhs: Vec<String>,
    pub brother: Vec<BrotherAtom>,
    pub rhs: Vec<String>,
}

pub(crate) fn parse_rule_line(src: &str) -> Result<RawRule> {
    let mut lx = Lexer::new(src);
    let symbol = lx.ident()?;
    let mut lhs = Vec::new();
    if lx.eat('(') && !lx.eat(')') {
        loop {
            lhs.push(lx.ident()?);
            if lx.eat(')') {
                break;
            }
            lx.expect(',')?;
        }
    }
    let mut brother = Vec::new();
    if lx.eat('[') && !lx.eat(']') {
        loop {
            let i = lx.integer()? as usize;
            let neg = lx.eat_str("!~");
            if !neg {
                lx.expect('~')?;
            }
            let j = lx.integer()? as usize;
            brother.push(if neg { BrotherAtom::Neq(i, j) } else { BrotherAtom::Eq(i, j) });
            if lx.eat(']') {
                break;
            }
            lx.expect(',')?;
        }
    }
    if !lx.eat_str("->") {
        return Err(lx.error("expected ->"));
    }
    let mut rhs = vec![lx.ident()?];
    while lx.eat('|') {
        rhs.push(lx.ident()?);
    }
    lx.expect_end()?;
    Ok(RawRule { symbol, lhs, brother, rhs })
}

/// Parses a theory file: `sig`, `vars` and `eq` lines.
pub fn parse_theory_file(src: &str) -> Result<(Signature, FlatTheory)> {
    let mut sig = Signature::new();
    for (line, kw, rest) in directives(src) {
        match kw {
            "sig" => parse_sig_entries(line, rest, &mut sig)?,
            "vars" | "eq" => {}
            other => return Err(Error::parse(line, format!("unknown directive {other:?}"))),
        }
    }
    let theory = FlatTheory::parse(src, &sig)?;
    Ok((sig, theory))
}

pub fn parse_automaton(src: &str) -> Result<Automaton> {
    let mut sig = Signature::new();
    let mut states: Vec<String> = Vec::new();
    let mut finals_raw: Vec<(usize, String)> = Vec::new();
    let mut rules_raw: Vec<(usize, RawRule)> = Vec::new();
    let mut globals_raw: Vec<(usize, String)> = Vec::new();
    let mut theory_src = String::new();
    for (line, kw, rest) in directives(src) {
        match kw {
            "sig" => parse_sig_entries(line, rest, &mut sig)?,
            "states" => states.extend(rest.split_whitespace().map(str::to_string)),
            "final" => finals_raw.extend(rest.split_whitespace().map(|s| (line, s.to_string()))),
            "vars" | "eq" => {
                theory_src.push_str(&"\n".repeat(line - 1 - theory_src.matches('\n').count()));
                let _ = writeln!(theory_src, "{kw} {rest}");
            }
            "rule" => rules_raw.push((line, at_line(line, parse_rule_line(rest))?)),
            "global" => globals_raw.push((line, rest.to_string())),
            other => return Err(Error::parse(line, format!("unknown directive {other:?}"))),
        }
    }
    for (line, r) in &rules_raw {
        sig.add(&r.symbol, r.lhs.len()).map_err(|e| Error::parse(*line, e.to_string()))?;
    }
    let index: HashMap<&str, StateId> = states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let resolve = |line: usize, name: &str| {
        index.get(name).copied().ok_or_else(|| Error::parse(line, format!("undeclared state {name}")))
    };
    let mut finals = BTreeSet::new();
    for (line, f) in &finals_raw {
        finals.insert(resolve(*line, f)?);
    }
    let mut rules = Vec::new();
    for (line, r) in &rules_raw {
        let lhs = r.lhs.iter().map(|q| resolve(*line, q)).collect::<Result<Vec<_>>>()?;
        for rhs in &r.rhs {
            rules.push(Rule {
                symbol: sig.symbol(&r.symbol).expect("added above"),
                lhs: lhs.clone(),
                brother: r.brother.clone(),
                rhs: resolve(*line, rhs)?,
            });
        }
    }
    let mut globals = Vec::new();
    for (line, g) in &globals_raw {
        let c = at_line(*line, parse_constraint(g, &|s| index.get(s).copied()))?;
        globals.push(c);
    }
    let theory = FlatTheory::parse(&theory_src, &sig)?;
    Automaton::new(sig, states, finals, rules, theory, Constraint::and(globals))
}

pub fn write_automaton(a: &Automaton) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sig {}", a.signature);
    let _ = writeln!(out, "states {}", a.states().join(" "));
    let finals: Vec<&str> = a.finals.iter().map(|&q| a.state_name(q)).collect();
    if !finals.is_empty() {
        let _ = writeln!(out, "final {}", finals.join(" "));
    }
    let vars: Vec<&str> = a.theory.vars().map(String::as_str).collect();
    if !vars.is_empty() {
        let _ = writeln!(out, "vars {}", vars.join(" "));
    }
    for e in a.theory.equations() {
        let _ = writeln!(out, "eq {e}");
    }
    for r in &a.rules {
        let _ = writeln!(out, "rule {}", a.rule_display(r));
    }
    if a.global != Constraint::True {
        let _ = writeln!(out, "global {}", a.global.display(a.states()));
    }
    out
}

/// Parses a run file: an optional `term` line and `position: rule` lines.
/// Without a `term` line the term is read off the rules' symbols.
pub fn parse_run(src: &str, aut: &Automaton) -> Result<Run> {
    let mut term: Option<Term> = None;
    let mut map: HashMap<Position, usize> = HashMap::new();
    for (i, raw) in src.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("term ") {
            term = Some(at_line(i + 1, Term::parse(rest))?);
            continue;
        }
        let (p, r) = line
            .split_once(':')
            .ok_or_else(|| Error::parse(i + 1, "expected position: rule"))?;
        let pos: Position = at_line(i + 1, p.parse())?;
        let rule = r
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::parse(i + 1, format!("bad rule index {r:?}")))?;
        if map.insert(pos.clone(), rule).is_some() {
            return Err(Error::parse(i + 1, format!("position {pos} given twice")));
        }
    }
    let term = match term {
        Some(t) => t,
        None => term_from_rules(&map, aut)?,
    };
    Run::from_rule_map(&term, &map)
}

fn term_from_rules(map: &HashMap<Position, usize>, aut: &Automaton) -> Result<Term> {
    fn go(p: Position, map: &HashMap<Position, usize>, aut: &Automaton) -> Result<Term> {
        let k = *map.get(&p).ok_or_else(|| Error::Run(format!("no rule at position {p}")))?;
        let rule = aut.rules.get(k).ok_or_else(|| Error::Run(format!("no rule {k}")))?;
        let children = (1..=rule.lhs.len()).map(|i| go(p.child(i), map, aut)).collect::<Result<_>>()?;
        Ok(Term::new(rule.symbol.clone(), children))
    }
    go(Position::root(), map, aut)
}

pub fn write_run(run: &Run) -> String {
    let mut out = format!("term {}\n", run.term());
    for (p, r) in run.rule_map() {
        let _ = writeln!(out, "{p}: {r}");
    }
    out
}
