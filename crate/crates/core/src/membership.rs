//! Membership: find an accepting run of an automaton on a term.

use std::collections::HashMap;

use crate::automaton::{Automaton, Run, TermTable};
use crate::constraint::{eval_partial, Atom, Constraint, RunStats, StateId, Truth};
use crate::error::{Error, Result};
use crate::term::Term;
use crate::theory::ClassId;

/// Default cap on search nodes expanded by [`member`].
pub const DEFAULT_SEARCH_BUDGET: usize = 50_000_000;

/// Returns an accepting run of `aut` on `t`, if there is one.
pub fn member(aut: &Automaton, t: &Term) -> Result<Option<Run>> {
    member_with_budget(aut, t, DEFAULT_SEARCH_BUDGET)
}

pub fn member_with_budget(aut: &Automaton, t: &Term, budget: usize) -> Result<Option<Run>> {
    t.check(&aut.signature)?;
    let table = TermTable::new(t, &aut.theory)?;
    let n = table.len();
    let nq = aut.n_states();

    // Bottom-up: rules applicable at each node given what children can reach.
    let mut feasible: Vec<Vec<bool>> = vec![vec![false; nq]; n];
    let mut by_state: Vec<Vec<Vec<usize>>> = vec![Vec::new(); n];
    for node in (0..n).rev() {
        let kids = &table.children[node];
        let cc = table.child_classes(node);
        let mut cands = vec![Vec::new(); nq];
        for (k, r) in aut.rules.iter().enumerate() {
            if r.symbol != table.symbols[node] || r.lhs.len() != kids.len() {
                continue;
            }
            if !r.lhs.iter().zip(kids).all(|(&q, &c)| feasible[c][q]) || !r.brother_holds(&cc) {
                continue;
            }
            feasible[node][r.rhs] = true;
            cands[r.rhs].push(k);
        }
        by_state[node] = cands;
    }
    let roots: Vec<StateId> = aut.finals.iter().copied().filter(|&q| feasible[0][q]).collect();
    if roots.is_empty() || aut.global == Constraint::False {
        return Ok(None);
    }

    let mut search = Search {
        aut,
        table: &table,
        by_state: &by_state,
        assigned: vec![usize::MAX; n],
        stats: RunStats::new(nq),
        remaining: n as u64,
        expanded: 0,
        budget,
        greedy: aut.global == Constraint::True,
        pairwise: Pairwise::new(&aut.global, nq),
    };
    for q in roots {
        let mut pending = vec![(0usize, q)];
        if search.dfs(&mut pending)? {
            return Ok(Some(search.build(0)));
        }
    }
    Ok(None)
}

struct Search<'a> {
    aut: &'a Automaton,
    table: &'a TermTable,
    by_state: &'a [Vec<Vec<usize>>],
    assigned: Vec<usize>,
    stats: RunStats,
    remaining: u64,
    expanded: usize,
    budget: usize,
    greedy: bool,
    pairwise: Option<Pairwise>,
}

/// Incremental check of a conjunction of `~` / `!~` atoms: each new
/// position is compared against the positions already assigned.
struct Pairwise {
    eq: Vec<Vec<StateId>>,
    neq: Vec<Vec<StateId>>,
    seen: Vec<HashMap<ClassId, u32>>,
}

impl Pairwise {
    fn new(global: &Constraint, nq: usize) -> Option<Self> {
        let atoms: Vec<&Atom> = match global {
            Constraint::Atom(a) => vec![a],
            Constraint::And(cs) => cs
                .iter()
                .map(|c| match c {
                    Constraint::Atom(a) => Some(a),
                    _ => None,
                })
                .collect::<Option<_>>()?,
            _ => return None,
        };
        let mut out = Pairwise { eq: vec![Vec::new(); nq], neq: vec![Vec::new(); nq], seen: vec![HashMap::new(); nq] };
        for a in atoms {
            let (x, y, list) = match *a {
                Atom::Eq(x, y) => (x, y, &mut out.eq),
                Atom::Neq(x, y) => (x, y, &mut out.neq),
                Atom::Lin(_) => return None,
            };
            list[x].push(y);
            if x != y {
                list[y].push(x);
            }
        }
        Some(out)
    }

    fn admits(&self, q: StateId, c: ClassId) -> bool {
        self.eq[q].iter().all(|&y| self.seen[y].keys().all(|&k| k == c))
            && self.neq[q].iter().all(|&y| !self.seen[y].contains_key(&c))
    }

    fn add(&mut self, q: StateId, c: ClassId) {
        *self.seen[q].entry(c).or_default() += 1;
    }

    fn remove(&mut self, q: StateId, c: ClassId) {
        let n = self.seen[q].get_mut(&c).expect("class was added");
        *n -= 1;
        if *n == 0 {
            self.seen[q].remove(&c);
        }
    }
}

impl Search<'_> {
    fn dfs(&mut self, pending: &mut Vec<(usize, StateId)>) -> Result<bool> {
        let Some((node, q)) = pending.pop() else {
            return Ok(self.pairwise.is_some() || eval_partial(&self.aut.global, &self.stats, Some(0)) == Truth::True);
        };
        self.expanded += 1;
        if self.expanded > self.budget {
            return Err(Error::Budget { what: "membership search nodes", limit: self.budget });
        }
        let class = self.table.classes[node];
        if let Some(pw) = &mut self.pairwise {
            if !pw.admits(q, class) {
                pending.push((node, q));
                return Ok(false);
            }
            pw.add(q, class);
        }
        for &k in &self.by_state[node][q] {
            self.assigned[node] = k;
            self.stats.add(q, class);
            self.remaining -= 1;
            let alive = self.greedy
                || self.pairwise.is_some()
                || eval_partial(&self.aut.global, &self.stats, Some(self.remaining)) != Truth::False;
            if alive {
                let base = pending.len();
                let kids = &self.table.children[node];
                for (&c, &cq) in kids.iter().zip(&self.aut.rules[k].lhs).rev() {
                    pending.push((c, cq));
                }
                if self.dfs(pending)? {
                    return Ok(true);
                }
                pending.truncate(base);
            }
            self.remaining += 1;
            self.stats.remove(q, class);
            self.assigned[node] = usize::MAX;
            if self.greedy {
                // Every candidate has realizable children, so the first one
                // can only fail if the whole search fails.
                break;
            }
        }
        if let Some(pw) = &mut self.pairwise {
            pw.remove(q, class);
        }
        pending.push((node, q));
        Ok(false)
    }

    fn build(&self, node: usize) -> Run {
        Run {
            symbol: self.table.symbols[node].clone(),
            rule: self.assigned[node],
            children: self.table.children[node].iter().map(|&c| self.build(c)).collect(),
        }
    }
}
