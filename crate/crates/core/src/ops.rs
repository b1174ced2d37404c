//! Boolean closure: union and intersection.

use std::collections::BTreeSet;

use crate::automaton::{fresh_name, Automaton, Rule};
use crate::constraint::{Atom, Constraint, LinearAtom, StateId};
use crate::error::{Error, Result};

fn same_theory(a1: &Automaton, a2: &Automaton) -> Result<()> {
    if a1.theory != a2.theory {
        return Err(Error::Unsupported("automata use different equational theories".into()));
    }
    Ok(())
}

/// Union of two automata with positive conjunctive global constraints.
pub fn union(a1: &Automaton, a2: &Automaton) -> Result<Automaton> {
    same_theory(a1, a2)?;
    for a in [a1, a2] {
        if !a.global.is_positive_conjunctive() {
            return Err(Error::Unsupported(
                "union needs positive conjunctive global constraints; reduce first".into(),
            ));
        }
    }
    let signature = a1.signature.merge(&a2.signature)?;
    if a1.global == Constraint::False {
        return Automaton::new(
            signature,
            a2.states().to_vec(),
            a2.finals.clone(),
            a2.rules.clone(),
            a2.theory.clone(),
            a2.global.clone(),
        );
    }
    if a2.global == Constraint::False {
        return Automaton::new(
            signature,
            a1.states().to_vec(),
            a1.finals.clone(),
            a1.rules.clone(),
            a1.theory.clone(),
            a1.global.clone(),
        );
    }
    let mut states = a1.states().to_vec();
    let mut taken: BTreeSet<String> = states.iter().cloned().collect();
    let offset = states.len();
    for s in a2.states() {
        let name = fresh_name(s, |n| taken.contains(n));
        taken.insert(name.clone());
        states.push(name);
    }
    let shift = |q: StateId| q + offset;
    let mut rules = a1.rules.clone();
    rules.extend(a2.rules.iter().map(|r| Rule {
        lhs: r.lhs.iter().map(|&q| shift(q)).collect(),
        rhs: shift(r.rhs),
        ..r.clone()
    }));
    let finals = a1.finals.iter().copied().chain(a2.finals.iter().map(|&q| shift(q))).collect();
    let global = Constraint::and([a1.global.clone(), a2.global.map_states(&shift)]);
    Automaton::new(signature, states, finals, rules, a1.theory.clone(), global)
}

/// Product automaton recognizing the intersection of the two languages.
/// Class-count atoms are not additive over product states, so inputs using
/// `||q||` must be reduced first.
pub fn intersect(a1: &Automaton, a2: &Automaton) -> Result<Automaton> {
    same_theory(a1, a2)?;
    if a1.global.has_class_count() || a2.global.has_class_count() {
        return Err(Error::Unsupported(
            "intersection of constraints with ||q|| atoms; reduce first".into(),
        ));
    }
    let signature = a1.signature.merge(&a2.signature)?;
    let (n1, n2) = (a1.n_states(), a2.n_states());
    let pair = |q1: StateId, q2: StateId| q1 * n2 + q2;
    let mut states = Vec::with_capacity(n1 * n2);
    let mut taken: BTreeSet<String> = BTreeSet::new();
    for q1 in 0..n1 {
        for q2 in 0..n2 {
            let base = format!("{}:{}", a1.state_name(q1), a2.state_name(q2));
            let name = fresh_name(&base, |n| taken.contains(n));
            taken.insert(name.clone());
            states.push(name);
        }
    }
    let mut rules = Vec::new();
    for r1 in &a1.rules {
        for r2 in a2.rules.iter().filter(|r2| r2.symbol == r1.symbol && r2.lhs.len() == r1.lhs.len()) {
            let mut brother = r1.brother.clone();
            for b in &r2.brother {
                if !brother.contains(b) {
                    brother.push(*b);
                }
            }
            rules.push(Rule {
                symbol: r1.symbol.clone(),
                lhs: r1.lhs.iter().zip(&r2.lhs).map(|(&p, &q)| pair(p, q)).collect(),
                brother,
                rhs: pair(r1.rhs, r2.rhs),
            });
        }
    }
    let finals = a1
        .finals
        .iter()
        .flat_map(|&f1| a2.finals.iter().map(move |&f2| pair(f1, f2)))
        .collect();
    let left = lift(&a1.global, n2, &|q, other| pair(q, other));
    let right = lift(&a2.global, n1, &|q, other| pair(other, q));
    let global = Constraint::and([left, right]);
    Automaton::new(signature, states, finals, rules, a1.theory.clone(), global)
}

/// Rewrites each atom over one factor into the product states.
fn lift(c: &Constraint, n_other: usize, pair: &dyn Fn(StateId, StateId) -> StateId) -> Constraint {
    c.map_atoms(&mut |a| match a {
        Atom::Eq(x, y) | Atom::Neq(x, y) => {
            let mut parts = Vec::with_capacity(n_other * n_other);
            for o in 0..n_other {
                for o2 in 0..n_other {
                    let (p, q) = (pair(*x, o), pair(*y, o2));
                    parts.push(if matches!(a, Atom::Eq(..)) {
                        Constraint::eq(p, q)
                    } else {
                        Constraint::neq(p, q)
                    });
                }
            }
            Constraint::and(parts)
        }
        Atom::Lin(l) => Constraint::Atom(Atom::Lin(LinearAtom {
            terms: l
                .terms
                .iter()
                .flat_map(|&(k, q)| (0..n_other).map(move |o| (k, pair(q, o))))
                .collect(),
            ..l.clone()
        })),
    })
}
