//! Reduction of arbitrary global constraints to positive conjunctions of
//! `~` / `!~` atoms.
//!
//! Each automaton is split into one automaton per disjunct of its normalized
//! constraint. Negated literals are removed with double synonyms, class-count
//! literals with a synonym split followed by the zero/one lemmas, and the
//! remaining occurrence counts are compiled into the states. The results are
//! joined with [`union`].

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::automaton::{Automaton, Rule};
use crate::constraint::{
    conjunct_measure, to_dnf, Atom, Cmp, Constraint, CountKind, LinearAtom, Literal, Measure, Sign,
    StateId, DEFAULT_DNF_CAP,
};
use crate::error::{Error, Result};
use crate::ops::union;

/// Default cap on states created while compiling occurrence counts.
pub const DEFAULT_COUNTING_CAP: usize = 100_000;

/// Default cap on lemma applications in one reduction.
pub const DEFAULT_STEP_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub dnf_conjuncts: usize,
    pub counting_states: usize,
    pub steps: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            dnf_conjuncts: DEFAULT_DNF_CAP,
            counting_states: DEFAULT_COUNTING_CAP,
            steps: DEFAULT_STEP_CAP,
        }
    }
}

/// One lemma application recorded by [`to_positive_conjunctive`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub lemma: &'static str,
    pub literal: String,
    pub before: Measure,
    pub after: Vec<Measure>,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let after: Vec<String> = self.after.iter().map(|m| m.to_string()).collect();
        write!(f, "{} on {}: {} -> [{}]", self.lemma, self.literal, self.before, after.join(", "))
    }
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub automaton: Automaton,
    pub trace: Vec<Step>,
}

/// The single conjunct of a conjunctive global constraint, `None` for false.
pub fn conjunct(a: &Automaton) -> Result<Option<Vec<Literal>>> {
    let dnf = to_dnf(&a.global, DEFAULT_DNF_CAP)?;
    match dnf.len() {
        0 => Ok(None),
        1 => Ok(dnf.into_iter().next()),
        _ => Err(Error::Unsupported("global constraint is not conjunctive".into())),
    }
}

fn and_of(lits: &[Literal]) -> Constraint {
    Constraint::and(lits.iter().map(Literal::to_constraint))
}

/// One automaton per disjunct of the normalized global constraint.
/// Unsatisfiable disjuncts are dropped.
pub fn subdivide(a: &Automaton, cap: usize) -> Result<Vec<Automaton>> {
    Ok(to_dnf(&a.global, cap)?.iter().map(|c| a.with_global(and_of(c))).collect())
}

/// Removes states that occur in no accepting run of the underlying tree
/// automaton. Atoms over removed states are replaced by their fixed value.
pub fn trim(a: &Automaton) -> Result<Automaton> {
    let reach = a.reachable_states();
    let mut useful: BTreeSet<StateId> = a.finals.intersection(&reach).copied().collect();
    loop {
        let mut changed = false;
        for r in &a.rules {
            if useful.contains(&r.rhs) && r.lhs.iter().all(|q| reach.contains(q)) {
                for &q in &r.lhs {
                    changed |= useful.insert(q);
                }
            }
        }
        if !changed {
            break;
        }
    }
    if useful.len() == a.n_states() {
        return Ok(a.clone());
    }
    let keep: Vec<StateId> = useful.iter().copied().collect();
    let new_id: HashMap<StateId, StateId> = keep.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let states = keep.iter().map(|&q| a.state_name(q).to_string()).collect();
    let rules = a
        .rules
        .iter()
        .filter(|r| useful.contains(&r.rhs) && r.lhs.iter().all(|q| useful.contains(q)))
        .map(|r| Rule {
            lhs: r.lhs.iter().map(|q| new_id[q]).collect(),
            rhs: new_id[&r.rhs],
            ..r.clone()
        })
        .collect();
    let finals = a.finals.iter().filter_map(|q| new_id.get(q).copied()).collect();
    let global = a.global.map_atoms(&mut |atom| match atom {
        Atom::Eq(x, y) | Atom::Neq(x, y) => match (new_id.get(x), new_id.get(y)) {
            (Some(&x), Some(&y)) => Constraint::Atom(if matches!(atom, Atom::Eq(..)) {
                Atom::Eq(x, y)
            } else {
                Atom::Neq(x, y)
            }),
            _ => Constraint::True,
        },
        Atom::Lin(l) => Constraint::Atom(Atom::Lin(LinearAtom {
            terms: l.terms.iter().filter_map(|&(k, q)| new_id.get(&q).map(|&q| (k, q))).collect(),
            ..l.clone()
        })),
    });
    let global = crate::constraint::normalize(&global)?;
    Automaton::new(a.signature.clone(), states, finals, rules, a.theory.clone(), global)
}

/// Adds a synonym `q^` of `q`: every rule is duplicated with any subset of
/// its `q` slots renamed, and the constraint becomes
/// `((||q|| = 0 & ||q^|| = 0) | (||q^|| = 1 & q !~ q^)) & C'` where `C'`
/// reads every atom about `q` as an atom about `q` or `q^`.
pub fn apply_synonym(a: &Automaton, q: StateId) -> Result<(Automaton, StateId)> {
    let mut out = a.clone();
    let base = format!("{}^syn{}", a.state_name(q), a.n_states());
    let h = out.add_state(&base);
    let mut rules = Vec::new();
    for r in &a.rules {
        let slots: Vec<usize> = r
            .lhs
            .iter()
            .chain(std::iter::once(&r.rhs))
            .enumerate()
            .filter(|(_, &s)| s == q)
            .map(|(i, _)| i)
            .collect();
        for mask in 0u64..(1u64 << slots.len()) {
            let mut v = r.clone();
            for (b, &slot) in slots.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    if slot == r.lhs.len() {
                        v.rhs = h;
                    } else {
                        v.lhs[slot] = h;
                    }
                }
            }
            rules.push(v);
        }
    }
    out.rules = rules;
    if a.is_final(q) {
        out.finals.insert(h);
    }
    let replaced = split_atoms(&a.global, q, h);
    let classes = |x: StateId, k: i64| Constraint::lin(CountKind::Classes, vec![(1, x)], Cmp::Eq, k);
    let prefix = Constraint::or([
        Constraint::and([classes(q, 0), classes(h, 0)]),
        Constraint::and([classes(h, 1), Constraint::neq(q, h)]),
    ]);
    out.global = Constraint::and([prefix, replaced]);
    Ok((out, h))
}

/// Reads each atom about `q` as the corresponding atom about `q` or `h`.
fn split_atoms(c: &Constraint, q: StateId, h: StateId) -> Constraint {
    let variants = |x: StateId| if x == q { vec![q, h] } else { vec![x] };
    c.map_atoms(&mut |atom| match atom {
        Atom::Eq(x, y) | Atom::Neq(x, y) => {
            let mut parts = Vec::new();
            for &x2 in &variants(*x) {
                for &y2 in &variants(*y) {
                    parts.push(if matches!(atom, Atom::Eq(..)) {
                        Constraint::eq(x2, y2)
                    } else {
                        Constraint::neq(x2, y2)
                    });
                }
            }
            Constraint::and(parts)
        }
        Atom::Lin(l) => {
            let mut terms = Vec::new();
            for &(k, x) in &l.terms {
                terms.extend(variants(x).into_iter().map(|x2| (k, x2)));
            }
            Constraint::Atom(Atom::Lin(LinearAtom { terms, ..l.clone() }))
        }
    })
}

fn literal_text(a: &Automaton, l: &Literal) -> String {
    l.to_constraint().display(a.states()).to_string()
}

/// Removes the leftmost negated literal of a conjunctive automaton.
pub fn eliminate_negative(a: &Automaton, cap: usize) -> Result<Vec<Automaton>> {
    Ok(eliminate_negative_traced(a, cap)?.0)
}

fn eliminate_negative_traced(a: &Automaton, cap: usize) -> Result<(Vec<Automaton>, Step)> {
    let lits = conjunct(a)?.ok_or_else(|| Error::Unsupported("constraint is false".into()))?;
    let i = lits
        .iter()
        .position(|l| !l.positive)
        .ok_or_else(|| Error::Unsupported("no negated literal".into()))?;
    let (x, y, eq) = match lits[i].atom {
        Atom::Eq(x, y) => (x, y, true),
        Atom::Neq(x, y) => (x, y, false),
        Atom::Lin(_) => unreachable!("arithmetic literals are positive after normalization"),
    };
    let rest: Vec<Literal> = lits.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, l)| l.clone()).collect();
    let (a1, hx) = apply_synonym(&a.with_global(and_of(&rest)), x)?;
    let one = |s: StateId| Constraint::lin(CountKind::Classes, vec![(1, s)], Cmp::Eq, 1);
    let b = if !eq && x == y {
        // Two equal subterms under `q` form one class with two occurrences.
        let twice = Constraint::lin(CountKind::Occurrences, vec![(1, hx)], Cmp::Ge, 2);
        a1.with_global(Constraint::and([one(hx), twice, a1.global.clone()]))
    } else {
        let (a2, hy) = apply_synonym(&a1, y)?;
        // Under a negated `~` the witnesses carry different subterms, under a
        // negated `!~` equal ones.
        let witness = if eq { Constraint::neq(hx, hy) } else { Constraint::eq(hx, hy) };
        a2.with_global(Constraint::and([one(hx), one(hy), witness, a2.global.clone()]))
    };
    let outs = finish(&b, cap)?;
    let step = Step {
        lemma: "remove-negative",
        literal: literal_text(a, &lits[i]),
        before: conjunct_measure(&lits),
        after: measures(&outs)?,
    };
    Ok((outs, step))
}

fn measures(auts: &[Automaton]) -> Result<Vec<Measure>> {
    auts.iter()
        .map(|a| Ok(conjunct(a)?.map(|l| conjunct_measure(&l)).unwrap_or_default()))
        .collect()
}

/// Normalizes, subdivides and trims.
fn finish(a: &Automaton, cap: usize) -> Result<Vec<Automaton>> {
    subdivide(a, cap)?.iter().map(trim).filter(|r| !matches!(r, Ok(a) if a.global == Constraint::False)).collect()
}

fn is_class_zero(l: &Literal) -> Option<StateId> {
    match &l.atom {
        Atom::Lin(LinearAtom { kind: CountKind::Classes, terms, cmp: Cmp::Eq | Cmp::Le, bound: 0 })
            if terms.len() == 1 && l.positive =>
        {
            Some(terms[0].1)
        }
        _ => None,
    }
}

fn is_class_one(l: &Literal) -> Option<StateId> {
    match &l.atom {
        Atom::Lin(LinearAtom { kind: CountKind::Classes, terms, cmp: Cmp::Eq, bound: 1 })
            if terms.len() == 1 && terms[0].0 == 1 && l.positive =>
        {
            Some(terms[0].1)
        }
        _ => None,
    }
}

/// Substitutes a constant for `||q||` in every class-count atom.
fn fix_class_count(c: &Constraint, q: StateId, value: i64) -> Constraint {
    c.map_atoms(&mut |atom| match atom {
        Atom::Lin(l) if l.kind == CountKind::Classes && l.terms.iter().any(|t| t.1 == q) => {
            let mut bound = l.bound;
            let mut terms = Vec::new();
            for &(k, x) in &l.terms {
                if x == q {
                    bound -= k * value;
                } else {
                    terms.push((k, x));
                }
            }
            Constraint::Atom(Atom::Lin(LinearAtom { terms, bound, ..l.clone() }))
        }
        other => Constraint::Atom(other.clone()),
    })
}

/// `||q|| = 0 & C'` becomes `|q| = 0 & C'[||q|| := 0]`.
fn remove0(c: &Constraint, q: StateId) -> Constraint {
    let occ = Constraint::lin(CountKind::Occurrences, vec![(1, q)], Cmp::Eq, 0);
    Constraint::and([occ, fix_class_count(c, q, 0)])
}

/// `||q|| = 1 & C'` becomes `|q| >= 1 & q ~ q & C'[||q|| := 1]`.
fn remove1(c: &Constraint, q: StateId) -> Constraint {
    let occ = Constraint::lin(CountKind::Occurrences, vec![(1, q)], Cmp::Ge, 1);
    Constraint::and([occ, Constraint::eq(q, q), fix_class_count(c, q, 1)])
}

/// Removes one class-count literal of a conjunctive automaton without
/// negated literals.
pub fn eliminate_class_literal(a: &Automaton, cap: usize) -> Result<Vec<Automaton>> {
    Ok(eliminate_class_literal_traced(a, cap)?.0)
}

fn eliminate_class_literal_traced(a: &Automaton, cap: usize) -> Result<(Vec<Automaton>, Step)> {
    let lits = conjunct(a)?.ok_or_else(|| Error::Unsupported("constraint is false".into()))?;
    if lits.iter().any(|l| !l.positive) {
        return Err(Error::Unsupported("negated literals must be removed first".into()));
    }
    let without = |i: usize| {
        and_of(&lits.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, l)| l.clone()).collect::<Vec<_>>())
    };
    let before = conjunct_measure(&lits);
    let zero = lits.iter().enumerate().find_map(|(i, l)| is_class_zero(l).map(|q| (i, q)));
    let one = lits.iter().enumerate().find_map(|(i, l)| is_class_one(l).map(|q| (i, q)));
    let (lemma, i, outs) = if let Some((i, q)) = zero {
        ("remove-zero", i, finish(&a.with_global(remove0(&without(i), q)), cap)?)
    } else if let Some((i, q)) = one {
        ("remove-one", i, finish(&a.with_global(remove1(&without(i), q)), cap)?)
    } else {
        let i = lits
            .iter()
            .position(|l| matches!(&l.atom, Atom::Lin(l) if l.kind == CountKind::Classes))
            .ok_or_else(|| Error::Unsupported("no class-count literal".into()))?;
        let Atom::Lin(l) = &lits[i].atom else { unreachable!() };
        let q = l.terms[0].1;
        let (syn, h) = apply_synonym(&a.with_global(Constraint::True), q)?;
        let c = split_atoms(&and_of(&lits), q, h);
        let zero_branch = remove0(&remove0(&c, q), h);
        let one_branch = Constraint::and([Constraint::neq(q, h), remove1(&c, h)]);
        let mut outs = finish(&syn.with_global(zero_branch), cap)?;
        outs.extend(finish(&syn.with_global(one_branch), cap)?);
        ("class-split", i, outs)
    };
    let step = Step { lemma, literal: literal_text(a, &lits[i]), before, after: measures(&outs)? };
    Ok((outs, step))
}

/// Compiles the occurrence-count literals of a conjunctive automaton into
/// its states. States count occurrences of the counted states in their
/// subtree, saturating at one more than the largest bound.
pub fn eliminate_counting(a: &Automaton, cap: usize) -> Result<Automaton> {
    let Some(lits) = conjunct(a)? else {
        return Ok(a.with_global(Constraint::False));
    };
    let mut lins: Vec<&LinearAtom> = Vec::new();
    let mut keep: Vec<Constraint> = Vec::new();
    for l in &lits {
        match (&l.atom, l.positive) {
            (Atom::Lin(x), true) if x.kind == CountKind::Occurrences => lins.push(x),
            (Atom::Eq(..) | Atom::Neq(..), true) => keep.push(l.to_constraint()),
            _ => {
                return Err(Error::Unsupported(
                    "counting elimination expects only positive ~, !~ and |q| literals".into(),
                ))
            }
        }
    }
    if lins.is_empty() {
        return Ok(a.with_global(Constraint::and(keep)));
    }
    let counted: Vec<StateId> =
        lins.iter().flat_map(|l| l.states()).collect::<BTreeSet<_>>().into_iter().collect();
    let slot: HashMap<StateId, usize> = counted.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let max = 1 + lins.iter().map(|l| l.bound).max().unwrap_or(0) as u32;
    let bound = (a.n_states() as f64) * ((max + 1) as f64).powi(counted.len() as i32);
    if bound > cap as f64 {
        return Err(Error::Budget { what: "counting states", limit: cap });
    }

    type Tally = Vec<u32>;
    let add = |acc: &mut Tally, t: &Tally| {
        for (x, y) in acc.iter_mut().zip(t) {
            *x = (*x + y).min(max);
        }
    };
    let own = |q: StateId| {
        let mut t = vec![0; counted.len()];
        if let Some(&i) = slot.get(&q) {
            t[i] = 1;
        }
        t
    };
    // Reachable (state, tally) pairs, discovered bottom-up.
    let mut variants: Vec<Vec<Tally>> = vec![Vec::new(); a.n_states()];
    let mut seen: BTreeSet<(StateId, Tally)> = BTreeSet::new();
    loop {
        let mut fresh = Vec::new();
        for r in &a.rules {
            for_each_combo(&r.lhs, &variants, &mut |combo| {
                let mut t = own(r.rhs);
                for c in combo {
                    add(&mut t, c);
                }
                if !seen.contains(&(r.rhs, t.clone())) {
                    fresh.push((r.rhs, t));
                }
            });
        }
        if fresh.is_empty() {
            break;
        }
        for (q, t) in fresh {
            if seen.insert((q, t.clone())) {
                variants[q].push(t);
                if seen.len() > cap {
                    return Err(Error::Budget { what: "counting states", limit: cap });
                }
            }
        }
    }

    let mut names = Vec::new();
    let mut id: HashMap<(StateId, Tally), StateId> = HashMap::new();
    let mut taken: BTreeSet<String> = BTreeSet::new();
    for q in 0..a.n_states() {
        for t in &variants[q] {
            let tally: Vec<String> = t.iter().map(|x| x.to_string()).collect();
            let base = format!("{}%{}", a.state_name(q), tally.join("."));
            let name = crate::automaton::fresh_name(&base, |n| taken.contains(n));
            taken.insert(name.clone());
            id.insert((q, t.clone()), names.len());
            names.push(name);
        }
    }
    let mut rules = Vec::new();
    for r in &a.rules {
        let mut err = None;
        for_each_combo(&r.lhs, &variants, &mut |combo| {
            let mut t = own(r.rhs);
            for c in combo {
                add(&mut t, c);
            }
            let lhs = r.lhs.iter().zip(combo).map(|(&q, c)| id[&(q, (*c).clone())]).collect();
            rules.push(Rule { symbol: r.symbol.clone(), lhs, brother: r.brother.clone(), rhs: id[&(r.rhs, t)] });
            if rules.len() > cap.saturating_mul(16) {
                err = Some(Error::Budget { what: "counting rules", limit: cap * 16 });
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    let holds = |t: &Tally| {
        lins.iter().all(|l| {
            let v: i64 = l.terms.iter().map(|&(k, q)| k * t[slot[&q]] as i64).sum();
            l.cmp.holds(v, l.bound)
        })
    };
    let finals = a
        .finals
        .iter()
        .flat_map(|&q| variants[q].iter().filter(|t| holds(t)).map(move |t| (q, t)))
        .map(|(q, t)| id[&(q, t.clone())])
        .collect();
    let of = |q: StateId| -> Vec<StateId> { variants[q].iter().map(|t| id[&(q, t.clone())]).collect() };
    let global = Constraint::and(keep.iter().map(|c| {
        c.map_atoms(&mut |atom| match atom {
            Atom::Eq(x, y) | Atom::Neq(x, y) => {
                let mut parts = Vec::new();
                for &x2 in &of(*x) {
                    for &y2 in &of(*y) {
                        parts.push(if matches!(atom, Atom::Eq(..)) {
                            Constraint::eq(x2, y2)
                        } else {
                            Constraint::neq(x2, y2)
                        });
                    }
                }
                Constraint::and(parts)
            }
            Atom::Lin(_) => unreachable!("linear atoms were split off"),
        })
    }));
    Automaton::new(a.signature.clone(), names, finals, rules, a.theory.clone(), global)
}

/// Calls `f` with every choice of one variant per argument state.
fn for_each_combo<T>(lhs: &[StateId], variants: &[Vec<T>], f: &mut dyn FnMut(&[&T])) {
    fn go<'a, T>(lhs: &[StateId], variants: &'a [Vec<T>], acc: &mut Vec<&'a T>, f: &mut dyn FnMut(&[&T])) {
        match lhs.split_first() {
            None => f(acc),
            Some((&q, rest)) => {
                for v in &variants[q] {
                    acc.push(v);
                    go(rest, variants, acc, f);
                    acc.pop();
                }
            }
        }
    }
    go(lhs, variants, &mut Vec::new(), f)
}

/// Reduces an automaton with natural arithmetic to one whose global
/// constraint is a conjunction of `~` / `!~` atoms, recognizing the same
/// language.
pub fn to_positive_conjunctive(a: &Automaton) -> Result<Reduction> {
    to_positive_conjunctive_with(a, Limits::default())
}

pub fn to_positive_conjunctive_with(a: &Automaton, limits: Limits) -> Result<Reduction> {
    let a = &dedup_rules(a);
    let dnf = to_dnf(&a.global, limits.dnf_conjuncts)?;
    for lit in dnf.iter().flatten() {
        if let Atom::Lin(l) = &lit.atom {
            if l.sign() == Sign::Integer {
                return Err(Error::Unsupported(format!(
                    "arithmetic with mixed signs: {}",
                    literal_text(a, lit)
                )));
            }
        }
    }
    let mut trace = Vec::new();
    let mut work: Vec<Automaton> = finish(a, limits.dnf_conjuncts)?;
    work.reverse();
    let mut done: Vec<Automaton> = Vec::new();
    while let Some(b) = work.pop() {
        if trace.len() >= limits.steps {
            return Err(Error::Budget { what: "reduction steps", limit: limits.steps });
        }
        let Some(lits) = conjunct(&b)? else { continue };
        let (outs, step) = if lits.iter().any(|l| !l.positive) {
            eliminate_negative_traced(&b, limits.dnf_conjuncts)?
        } else if lits.iter().any(|l| matches!(&l.atom, Atom::Lin(x) if x.kind == CountKind::Classes)) {
            eliminate_class_literal_traced(&b, limits.dnf_conjuncts)?
        } else {
            done.push(trim(&eliminate_counting(&b, limits.counting_states)?)?);
            continue;
        };
        trace.push(step);
        work.extend(outs.into_iter().rev());
    }
    let mut result: Option<Automaton> = None;
    for d in done {
        if d.global == Constraint::False {
            continue;
        }
        result = Some(match result {
            None => d,
            Some(acc) => union(&acc, &d)?,
        });
    }
    let automaton = match result {
        Some(r) => dedup_rules(&r),
        None => a.with_global(Constraint::False),
    };
    Ok(Reduction { automaton, trace })
}

/// Drops repeated rules, keeping the first copy.
fn dedup_rules(a: &Automaton) -> Automaton {
    let mut seen = HashSet::new();
    let mut out = a.clone();
    out.rules.retain(|r| seen.insert(r.clone()));
    out
}
