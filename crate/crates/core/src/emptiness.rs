//! Emptiness by height-bounded search, optionally certified by the pumping
//! bound.
//!
//! Terms are generated bottom-up by height, hash-consed, and annotated with
//! the states the underlying tree automaton reaches on them. Candidates
//! reaching a final state are handed to [`member`], which decides the
//! brother and global constraints.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::automaton::{is_accepting_run, Automaton, Run};
use crate::constraint::StateId;
use crate::error::{Error, Result};
use crate::membership::member;
use crate::pumping::{apply_pump, compute_bound, find_pump, index_for};
use crate::term::{Symbol, Term};
use crate::theory::ClassId;

/// Default cap on distinct terms generated during a search.
pub const DEFAULT_TERM_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Search terms up to the given height.
    Bounded { max_height: usize },
    /// Search up to the pumping bound, computed within `budget` tree nodes.
    Certified { budget: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Empty,
    NonEmpty(Run),
    EmptyUpTo(usize),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Empty => write!(f, "EMPTY"),
            Verdict::NonEmpty(r) => write!(f, "NONEMPTY {}", r.term()),
            Verdict::EmptyUpTo(h) => write!(f, "EMPTY_UP_TO {h}"),
        }
    }
}

pub fn emptiness(aut: &Automaton, mode: Mode) -> Result<Verdict> {
    emptiness_with_budget(aut, mode, DEFAULT_TERM_BUDGET)
}

pub fn emptiness_with_budget(aut: &Automaton, mode: Mode, term_budget: usize) -> Result<Verdict> {
    match mode {
        Mode::Bounded { max_height } => Ok(match search(aut, max_height, term_budget)? {
            Some(run) => Verdict::NonEmpty(minimize(aut, run)?),
            None => Verdict::EmptyUpTo(max_height),
        }),
        Mode::Certified { budget } => {
            if !aut.global.is_positive_conjunctive() {
                return Err(Error::Unsupported(
                    "certified emptiness needs a positive conjunctive global constraint; reduce first".into(),
                ));
            }
            if aut.finals.is_empty() || aut.n_states() == 0 {
                return Ok(Verdict::Empty);
            }
            let bound = compute_bound(aut.max_arity().max(1), aut.n_states(), budget)?;
            Ok(match search(aut, bound, term_budget)? {
                Some(run) => Verdict::NonEmpty(minimize(aut, run)?),
                None => Verdict::Empty,
            })
        }
    }
}

/// Pumps an accepting run down while the result stays accepting.
pub fn minimize(aut: &Automaton, mut run: Run) -> Result<Run> {
    loop {
        let index = index_for(aut, &run)?;
        let Some(plan) = find_pump(aut, &run, &index)? else { return Ok(run) };
        let next = apply_pump(aut, &run, &plan, &index)?;
        if !is_accepting_run(aut, &next)? {
            return Ok(run);
        }
        run = next;
    }
}

struct Node {
    symbol: usize,
    kids: Vec<u32>,
    reach: BTreeSet<StateId>,
}

/// Finds an accepting run of least height, at most `max_height`.
fn search(aut: &Automaton, max_height: usize, budget: usize) -> Result<Option<Run>> {
    if aut.finals.is_empty() {
        return Ok(None);
    }
    let symbols: Vec<(Symbol, usize)> = aut.signature.iter().map(|(s, k)| (s.clone(), k)).collect();
    let sym_index: HashMap<&str, usize> = symbols.iter().enumerate().map(|(i, (s, _))| (&**s, i)).collect();
    let mut rules_by_symbol: Vec<Vec<usize>> = vec![Vec::new(); symbols.len()];
    for (k, r) in aut.rules.iter().enumerate() {
        rules_by_symbol[sym_index[&*r.symbol]].push(k);
    }
    // Brother tests compare node ids, which are syntactic classes; with a
    // theory they are skipped here and left to `member`.
    let syntactic = aut.theory.is_empty();
    let mut nodes: Vec<Node> = Vec::new();
    let mut by_height: Vec<Vec<u32>> = Vec::new();
    let mut to_term: Vec<Option<Term>> = Vec::new();
    for h in 0..=max_height {
        let mut layer = Vec::new();
        for (s, &(_, arity)) in symbols.iter().enumerate() {
            if (arity == 0) != (h == 0) || rules_by_symbol[s].is_empty() {
                continue;
            }
            let below: Vec<u32> = by_height[..h.saturating_sub(1)].iter().flatten().copied().collect();
            let top: &[u32] = if h > 0 { &by_height[h - 1] } else { &[] };
            let mut combo = Vec::with_capacity(arity);
            let mut emit = |kids: &[u32]| -> Result<()> {
                let classes: Vec<ClassId> = kids.iter().map(|&k| ClassId(k)).collect();
                let mut reach = BTreeSet::new();
                for &k in &rules_by_symbol[s] {
                    let r = &aut.rules[k];
                    if r.lhs.iter().zip(kids).all(|(q, &c)| nodes[c as usize].reach.contains(q))
                        && (!syntactic || r.brother_holds(&classes))
                    {
                        reach.insert(r.rhs);
                    }
                }
                if !reach.is_empty() {
                    if nodes.len() >= budget {
                        return Err(Error::Budget { what: "emptiness terms", limit: budget });
                    }
                    layer.push(nodes.len() as u32);
                    nodes.push(Node { symbol: s, kids: kids.to_vec(), reach });
                }
                Ok(())
            };
            combos(arity, top, &below, false, &mut combo, &mut emit)?;
        }
        to_term.resize_with(nodes.len(), || None);
        for &id in &layer {
            if nodes[id as usize].reach.iter().any(|q| aut.is_final(*q)) {
                let t = build(id, &nodes, &symbols, &mut to_term);
                if let Some(run) = member(aut, &t)? {
                    return Ok(Some(run));
                }
            }
        }
        by_height.push(layer);
    }
    Ok(None)
}

/// Child tuples with every child from `top` or `below` and at least one
/// from `top`.
fn combos(
    arity: usize,
    top: &[u32],
    below: &[u32],
    hit: bool,
    acc: &mut Vec<u32>,
    emit: &mut dyn FnMut(&[u32]) -> Result<()>,
) -> Result<()> {
    if acc.len() == arity {
        return if hit || arity == 0 { emit(acc) } else { Ok(()) };
    }
    for (pool, is_top) in [(below, false), (top, true)] {
        for &k in pool {
            acc.push(k);
            combos(arity, top, below, hit || is_top, acc, emit)?;
            acc.pop();
        }
    }
    Ok(())
}

fn build(id: u32, nodes: &[Node], symbols: &[(Symbol, usize)], memo: &mut [Option<Term>]) -> Term {
    if let Some(t) = &memo[id as usize] {
        return t.clone();
    }
    let n = &nodes[id as usize];
    let kids = n.kids.iter().map(|&k| build(k, nodes, symbols, memo)).collect();
    let t = Term::new(symbols[n.symbol].0.clone(), kids);
    memo[id as usize] = Some(t.clone());
    t
}
