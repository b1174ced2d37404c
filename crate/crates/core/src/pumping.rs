//! Height strata of a run, their state statistics, and global pumping.
//!
//! For a run `r` and `1 <= i <= h(r)`:
//!
//! * `H_i` holds the positions whose subterm has height exactly `i > 0`;
//! * `Ȟ_i` holds children of positions above height `i` whose own height is
//!   in `1..i`;
//! * `H̊_i` holds such children of height 0.
//!
//! Each stratum is summarized by the multiset of per-class state-count
//! tuples. When the summary at `i` is dominated by the one at `j < i`, the
//! subruns at stratum `i` can all be replaced at once by subruns from
//! stratum `j`, giving a shorter run that still satisfies the global
//! constraint.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use crate::automaton::{Automaton, Run, TermTable};
use crate::constraint::StateId;
use crate::error::{Error, Result};
use crate::term::Position;
use crate::theory::{ClassId, CongruenceIndex};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Stratum {
    pub h: Vec<Position>,
    pub h_check: Vec<Position>,
    pub h_ring: Vec<Position>,
}

impl Stratum {
    /// All positions of the stratum, in preorder.
    pub fn positions(&self) -> Vec<Position> {
        let mut all: Vec<Position> =
            self.h.iter().chain(&self.h_check).chain(&self.h_ring).cloned().collect();
        all.sort();
        all
    }
}

/// `levels[i - 1]` is the stratum at height `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strata {
    pub levels: Vec<Stratum>,
}

impl Strata {
    pub fn height(&self) -> usize {
        self.levels.len()
    }

    pub fn at(&self, i: usize) -> &Stratum {
        &self.levels[i - 1]
    }
}

/// A run flattened in preorder with per-position state and class.
struct View {
    table: TermTable,
    states: Vec<StateId>,
    node: HashMap<Position, usize>,
}

impl View {
    fn new(aut: &Automaton, run: &Run, index: &CongruenceIndex) -> Result<Self> {
        let table = TermTable::with_index(&run.term(), index);
        let mut states = Vec::with_capacity(table.len());
        for (_, k) in run.rule_map() {
            let r = aut.rules.get(k).ok_or_else(|| Error::Run(format!("no rule {k}")))?;
            states.push(r.rhs);
        }
        let node = table.positions.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        Ok(View { table, states, node })
    }

    fn class(&self, p: &Position) -> ClassId {
        self.table.classes[self.node[p]]
    }

    fn state(&self, p: &Position) -> StateId {
        self.states[self.node[p]]
    }
}

pub fn strata(run: &Run) -> Strata {
    let h = run.height();
    let mut levels = vec![Stratum::default(); h];
    // (position, height, parent height)
    let mut nodes: Vec<(Position, usize, Option<usize>)> = Vec::new();
    fn go(r: &Run, p: &mut Vec<usize>, parent: Option<usize>, out: &mut Vec<(Position, usize, Option<usize>)>) {
        let h = r.height();
        out.push((Position(p.clone()), h, parent));
        for (i, c) in r.children.iter().enumerate() {
            p.push(i + 1);
            go(c, p, Some(h), out);
            p.pop();
        }
    }
    go(run, &mut Vec::new(), None, &mut nodes);
    for (p, hp, parent) in nodes {
        if hp > 0 {
            levels[hp - 1].h.push(p.clone());
        }
        let Some(hq) = parent else { continue };
        for i in (hp + 1)..hq {
            let s = &mut levels[i - 1];
            if hp == 0 {
                s.h_ring.push(p.clone());
            } else {
                s.h_check.push(p.clone());
            }
        }
    }
    Strata { levels }
}

/// A multiset of state-count tuples, kept sorted.
pub type Multiset = Vec<Vec<u32>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratumStats {
    pub h: Multiset,
    pub h_check: Multiset,
    pub h_ring: Multiset,
}

fn multiset(view: &View, positions: &[Position], n: usize) -> Multiset {
    let mut by_class: BTreeMap<ClassId, Vec<u32>> = BTreeMap::new();
    for p in positions {
        by_class.entry(view.class(p)).or_insert_with(|| vec![0; n])[view.state(p)] += 1;
    }
    let mut out: Multiset = by_class.into_values().collect();
    out.sort();
    out
}

/// Statistics of every stratum; `result[i - 1]` belongs to height `i`.
/// Tuple coordinates follow the automaton's state order.
pub fn stats(aut: &Automaton, run: &Run, strata: &Strata, index: &CongruenceIndex) -> Result<Vec<StratumStats>> {
    let view = View::new(aut, run, index)?;
    let n = aut.n_states();
    Ok(strata
        .levels
        .iter()
        .map(|s| StratumStats {
            h: multiset(&view, &s.h, n),
            h_check: multiset(&view, &s.h_check, n),
            h_ring: multiset(&view, &s.h_ring, n),
        })
        .collect())
}

fn dominates(small: &[u32], big: &[u32]) -> bool {
    small.len() == big.len() && small.iter().zip(big).all(|(a, b)| a <= b)
}

/// A matching of every element of `small` to a distinct dominating
/// element of `big`, as `result[i] = index into big`.
fn domination_matching(small: &[Vec<u32>], big: &[Vec<u32>]) -> Option<Vec<usize>> {
    if small.len() > big.len() {
        return None;
    }
    fn augment(u: usize, small: &[Vec<u32>], big: &[Vec<u32>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for v in 0..big.len() {
            if !seen[v] && dominates(&small[u], &big[v]) {
                seen[v] = true;
                if owner[v].is_none_or(|w| augment(w, small, big, seen, owner)) {
                    owner[v] = Some(u);
                    return true;
                }
            }
        }
        false
    }
    let mut owner: Vec<Option<usize>> = vec![None; big.len()];
    for u in 0..small.len() {
        let mut seen = vec![false; big.len()];
        if !augment(u, small, big, &mut seen, &mut owner) {
            return None;
        }
    }
    let mut out = vec![0; small.len()];
    for (v, o) in owner.iter().enumerate() {
        if let Some(u) = o {
            out[*u] = v;
        }
    }
    Some(out)
}

/// Multiset ordering: an injection into coordinatewise larger tuples.
pub fn multiset_leq(x: &[Vec<u32>], y: &[Vec<u32>]) -> bool {
    domination_matching(x, y).is_some()
}

/// Ordering on pairs of multisets, componentwise.
pub fn wqo_leq(x: (&[Vec<u32>], &[Vec<u32>]), y: (&[Vec<u32>], &[Vec<u32>])) -> bool {
    multiset_leq(x.0, y.0) && multiset_leq(x.1, y.1)
}

/// Indexes `i > j` and an injection from stratum `i` into stratum `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PumpPlan {
    pub i: usize,
    pub j: usize,
    pub injection: Vec<(Position, Position)>,
}

impl fmt::Display for PumpPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "i={} j={}", self.i, self.j)?;
        for (p, q) in &self.injection {
            write!(f, " I({p})={q}")?;
        }
        Ok(())
    }
}

/// Groups positions by class, keeping first-appearance order.
fn groups(view: &View, positions: &[Position]) -> Vec<(ClassId, Vec<Position>)> {
    let mut out: Vec<(ClassId, Vec<Position>)> = Vec::new();
    for p in positions {
        let c = view.class(p);
        match out.iter_mut().find(|g| g.0 == c) {
            Some(g) => g.1.push(p.clone()),
            None => out.push((c, vec![p.clone()])),
        }
    }
    out
}

fn tuple(view: &View, ps: &[Position], n: usize) -> Vec<u32> {
    let mut t = vec![0; n];
    for p in ps {
        t[view.state(p)] += 1;
    }
    t
}

/// Maps one family of stratum `i` into the same family of stratum `j`:
/// classes to distinct dominating classes, then each (class, state) group
/// to the first target positions carrying that state.
fn inject(view: &View, from: &[Position], to: &[Position], n: usize) -> Option<Vec<(Position, Position)>> {
    let src = groups(view, from);
    let dst = groups(view, to);
    let st: Vec<Vec<u32>> = src.iter().map(|g| tuple(view, &g.1, n)).collect();
    let dt: Vec<Vec<u32>> = dst.iter().map(|g| tuple(view, &g.1, n)).collect();
    let m = domination_matching(&st, &dt)?;
    let mut out = Vec::new();
    for (g, &k) in src.iter().zip(&m) {
        let mut used: HashSet<&Position> = HashSet::new();
        for p in &g.1 {
            let q = view.state(p);
            let target = dst[k].1.iter().find(|t| view.state(t) == q && !used.contains(t))?;
            used.insert(target);
            out.push((p.clone(), target.clone()));
        }
    }
    Some(out)
}

/// Searches for a pump: `i` from the top down, and for each `i` the
/// closest `j` below it first.
pub fn find_pump(aut: &Automaton, run: &Run, index: &CongruenceIndex) -> Result<Option<PumpPlan>> {
    let st = strata(run);
    let stats = stats(aut, run, &st, index)?;
    let view = View::new(aut, run, index)?;
    let n = aut.n_states();
    for i in (2..=st.height()).rev() {
        let si = &stats[i - 1];
        for j in (1..i).rev() {
            let sj = &stats[j - 1];
            if !wqo_leq((&si.h, &si.h_check), (&sj.h, &sj.h_check)) {
                continue;
            }
            let (a, b) = (st.at(i), st.at(j));
            let mut injection = inject(&view, &a.h, &b.h, n).expect("dominated statistics admit an injection");
            injection.extend(inject(&view, &a.h_check, &b.h_check, n).expect("dominated statistics admit an injection"));
            injection.extend(a.h_ring.iter().map(|p| (p.clone(), p.clone())));
            injection.sort();
            return Ok(Some(PumpPlan { i, j, injection }));
        }
    }
    Ok(None)
}

/// Checks the injection conditions: families map into the same family,
/// leaves stay fixed, states are kept and the equality pattern is kept.
pub fn check_plan(aut: &Automaton, run: &Run, plan: &PumpPlan, index: &CongruenceIndex) -> Result<()> {
    let bad = |m: String| Err(Error::Plan(m));
    let st = strata(run);
    if !(1 <= plan.j && plan.j < plan.i && plan.i <= st.height()) {
        return bad(format!("indexes i={} j={} out of range", plan.i, plan.j));
    }
    let view = View::new(aut, run, index)?;
    let (a, b) = (st.at(plan.i), st.at(plan.j));
    let map: HashMap<&Position, &Position> = plan.injection.iter().map(|(p, q)| (p, q)).collect();
    if map.len() != plan.injection.len() || map.len() != a.positions().len() {
        return bad("the injection must cover the stratum exactly once".into());
    }
    let targets: HashSet<&Position> = map.values().copied().collect();
    if targets.len() != map.len() {
        return bad("the injection is not injective".into());
    }
    for (from, to) in [(&a.h, &b.h), (&a.h_check, &b.h_check), (&a.h_ring, &b.h_ring)] {
        for p in from {
            let Some(q) = map.get(p) else { return bad(format!("{p} is not mapped")) };
            if !to.contains(q) {
                return bad(format!("{p} is mapped outside its family"));
            }
        }
    }
    for p in &a.h_ring {
        if map[p] != p {
            return bad(format!("leaf {p} must map to itself"));
        }
    }
    for (p, q) in &plan.injection {
        if view.state(p) != view.state(q) {
            return bad(format!("{p} and {q} carry different states"));
        }
    }
    for (p1, q1) in &plan.injection {
        for (p2, q2) in &plan.injection {
            if (view.class(p1) == view.class(p2)) != (view.class(q1) == view.class(q2)) {
                return bad(format!("equality between {p1} and {p2} is not preserved"));
            }
        }
    }
    Ok(())
}

/// Replaces every subrun of stratum `i` by its image, simultaneously.
pub fn apply_pump(aut: &Automaton, run: &Run, plan: &PumpPlan, index: &CongruenceIndex) -> Result<Run> {
    check_plan(aut, run, plan, index)?;
    let mut out = run.clone();
    for (p, q) in &plan.injection {
        out = out.replace(p, run.at(q)?.clone())?;
    }
    Ok(out)
}

/// Shortcut building the congruence index for the run's own term.
pub fn index_for(aut: &Automaton, run: &Run) -> Result<CongruenceIndex> {
    CongruenceIndex::build(&aut.theory, &[&run.term()])
}

/// Length of the longest sequence of pairs of multisets of nonzero
/// `n`-tuples that starts with a single unit tuple in the first component,
/// whose totals shrink by at most the factor `a` per step, and in which no
/// element is dominated by a later one. Any accepting run taller than this
/// bound admits a pump.
pub fn compute_bound(a: usize, n: usize, budget: usize) -> Result<usize> {
    if a == 0 || n == 0 {
        return Err(Error::Unsupported("the bound needs a >= 1 and n >= 1".into()));
    }
    let mut search = BoundSearch { a, n, budget, visited: 0, best: 0, tuples: Vec::new() };
    let mut seq: Vec<(Multiset, Multiset)> = Vec::new();
    for k in 0..n {
        let mut unit = vec![0; n];
        unit[k] = 1;
        seq.push((vec![unit], Vec::new()));
        search.extend(&mut seq)?;
        seq.pop();
    }
    Ok(search.best)
}

struct BoundSearch {
    a: usize,
    n: usize,
    budget: usize,
    visited: usize,
    best: usize,
    /// Nonzero tuples grouped by coordinate sum, filled lazily.
    tuples: Vec<Vec<Vec<u32>>>,
}

fn total(m: &Multiset) -> usize {
    m.iter().flatten().map(|&x| x as usize).sum()
}

impl BoundSearch {
    fn tick(&mut self) -> Result<()> {
        self.visited += 1;
        if self.visited > self.budget {
            return Err(Error::Budget { what: "bound sequence tree", limit: self.budget });
        }
        Ok(())
    }

    /// Called on a sequence satisfying every condition.
    fn extend(&mut self, seq: &mut Vec<(Multiset, Multiset)>) -> Result<()> {
        self.tick()?;
        self.best = self.best.max(seq.len());
        let (t, c) = seq.last().expect("non-empty");
        let limit = self.a * total(t) + total(c);
        for next in self.pairs(limit)? {
            self.tick()?;
            let dominated = seq.iter().any(|(t0, c0)| wqo_leq((t0, c0), (&next.0, &next.1)));
            if dominated {
                continue;
            }
            seq.push(next);
            self.extend(seq)?;
            seq.pop();
        }
        Ok(())
    }

    fn tuples_of_sum(&mut self, s: usize) -> &[Vec<u32>] {
        while self.tuples.len() <= s {
            let k = self.tuples.len();
            let mut out = Vec::new();
            if k > 0 {
                compositions(k as u32, self.n, &mut Vec::new(), &mut out);
            }
            self.tuples.push(out);
        }
        &self.tuples[s]
    }

    /// Sorted multisets of nonzero tuples with total at most `limit`.
    fn multisets(&mut self, limit: usize) -> Result<Vec<Multiset>> {
        let mut all: Vec<Vec<u32>> = Vec::new();
        for s in 1..=limit {
            all.extend(self.tuples_of_sum(s).iter().cloned());
        }
        all.sort();
        let mut out = Vec::new();
        fn go(all: &[Vec<u32>], from: usize, room: usize, acc: &mut Multiset, out: &mut Vec<Multiset>, cap: usize) -> bool {
            out.push(acc.clone());
            if out.len() > cap {
                return false;
            }
            for k in from..all.len() {
                let s: usize = all[k].iter().map(|&x| x as usize).sum();
                if s <= room {
                    acc.push(all[k].clone());
                    let ok = go(all, k, room - s, acc, out, cap);
                    acc.pop();
                    if !ok {
                        return false;
                    }
                }
            }
            true
        }
        let cap = self.budget.saturating_sub(self.visited);
        if !go(&all, 0, limit, &mut Vec::new(), &mut out, cap) {
            return Err(Error::Budget { what: "bound sequence tree", limit: self.budget });
        }
        Ok(out)
    }

    fn pairs(&mut self, limit: usize) -> Result<Vec<(Multiset, Multiset)>> {
        let ms = self.multisets(limit)?;
        let mut out = Vec::new();
        for t in &ms {
            for c in &ms {
                if total(t) + total(c) <= limit {
                    out.push((t.clone(), c.clone()));
                    if out.len() > self.budget.saturating_sub(self.visited) {
                        return Err(Error::Budget { what: "bound sequence tree", limit: self.budget });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// All `n`-tuples of naturals with the given sum.
fn compositions(sum: u32, n: usize, acc: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if acc.len() + 1 == n {
        acc.push(sum);
        out.push(acc.clone());
        acc.pop();
        return;
    }
    for x in 0..=sum {
        acc.push(x);
        compositions(sum - x, n, acc, out);
        acc.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(xs: &[&[u32]]) -> Multiset {
        xs.iter().map(|x| x.to_vec()).collect()
    }

    #[test]
    fn multiset_order() {
        assert!(multiset_leq(&t(&[&[1, 0]]), &t(&[&[2, 0]])));
        assert!(!multiset_leq(&t(&[&[1, 1]]), &t(&[&[2, 0]])));
        assert!(!multiset_leq(&t(&[&[1], &[1]]), &t(&[&[2]])));
        assert!(multiset_leq(&t(&[&[1, 0], &[0, 1]]), &t(&[&[0, 2], &[1, 1]])));
        assert!(multiset_leq(&[], &t(&[&[1]])));
    }

    #[test]
    fn bound_for_unary_single_state() {
        assert_eq!(compute_bound(1, 1, 10_000).unwrap(), 3);
        assert!(compute_bound(1, 1, 0).unwrap_err().is_budget());
    }
}
