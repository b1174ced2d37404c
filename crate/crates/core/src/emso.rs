//! Compilation of existential monadic second-order queries with global
//! constraints into automata with global constraints.
//!
//! A query is given by a tree automaton over annotated symbols `f#b1..bn`,
//! where bit `i` says whether the position belongs to the set variable
//! `Xi`, together with a constraint over `X1..Xn` using `~`, `!~`, `|X|`
//! and `||X||`. The compiled automaton moves the bit vectors from the
//! symbols into the states and rewrites each variable atom into atoms over
//! the states carrying the corresponding bit.
//!
//! `||X||` counts the classes of the subterms at positions of `X`, which is
//! not the sum of the class counts of the states carrying the bit, since a
//! class can span several states. States therefore also carry a label per
//! variable; `||X|| >= m` is witnessed by `m` labels on pairwise different
//! classes and `||X|| <= m` by labelling every position of `X` with one of
//! `m` labels, each label on a single class.

use std::collections::{BTreeSet, HashMap};

use crate::automaton::{Automaton, Rule};
use crate::constraint::{parse_constraint, to_dnf, Atom, Cmp, Constraint, CountKind, LinearAtom, Sign, StateId, DEFAULT_DNF_CAP};
use crate::error::{Error, Result};
use crate::term::{Position, Signature, Symbol, Term};
use crate::theory::{CongruenceIndex, FlatTheory};

/// Sets of positions, one per variable.
pub type Assignment = Vec<BTreeSet<Position>>;

/// Splits `f#101` into `("f", [true, false, true])`.
pub fn split_symbol(s: &str) -> (&str, Vec<bool>) {
    match s.rsplit_once('#') {
        Some((base, bits)) if bits.chars().all(|c| c == '0' || c == '1') => {
            (base, bits.chars().map(|c| c == '1').collect())
        }
        _ => (s, Vec::new()),
    }
}

pub fn annotated_symbol(base: &str, bits: &[bool]) -> String {
    let b: String = bits.iter().map(|&x| if x { '1' } else { '0' }).collect();
    format!("{base}#{b}")
}

/// A tree automaton over symbols annotated with `n` bits.
#[derive(Debug, Clone)]
pub struct AnnotatedTa {
    pub automaton: Automaton,
    pub n: usize,
    base: Signature,
}

impl AnnotatedTa {
    pub fn new(automaton: Automaton, n: usize) -> Result<Self> {
        if automaton.global != Constraint::True || !automaton.theory.is_empty() {
            return Err(Error::Unsupported(
                "the annotated automaton must have no global constraint and no theory".into(),
            ));
        }
        let mut base = Signature::new();
        for (s, k) in automaton.signature.iter() {
            let (b, bits) = split_symbol(s);
            if bits.len() != n {
                return Err(Error::Signature(format!("symbol {s} does not carry {n} bits")));
            }
            base.add(b, k)?;
        }
        Ok(AnnotatedTa { automaton, n, base })
    }

    pub fn base_signature(&self) -> &Signature {
        &self.base
    }
}

/// `t ⊗ σ`: every symbol annotated with its membership bits.
pub fn annotate(t: &Term, sigma: &Assignment) -> Term {
    fn go(t: &Term, p: &mut Vec<usize>, sigma: &Assignment) -> Term {
        let pos = Position(p.clone());
        let bits: Vec<bool> = sigma.iter().map(|s| s.contains(&pos)).collect();
        let mut kids = Vec::with_capacity(t.children.len());
        for (i, c) in t.children.iter().enumerate() {
            p.push(i + 1);
            kids.push(go(c, p, sigma));
            p.pop();
        }
        Term::new(annotated_symbol(&t.symbol, &bits), kids)
    }
    go(t, &mut Vec::new(), sigma)
}

/// Parses a query constraint over the variables `X1..Xn`.
pub fn parse_query(src: &str, n: usize) -> Result<Constraint> {
    parse_constraint(src, &|s| {
        s.strip_prefix('X').and_then(|k| k.parse::<usize>().ok()).filter(|&k| 1 <= k && k <= n).map(|k| k - 1)
    })
}

/// A state of the compiled automaton: base state, bits and labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Variant {
    q: StateId,
    bits: Vec<bool>,
    labels: Vec<usize>,
}

struct Expanded {
    automaton: Automaton,
    variants: Vec<Variant>,
}

/// Label vectors allowed with the given bits: label `i` ranges over
/// `0..=max[i]` when bit `i` is set and is 0 otherwise.
fn label_vectors(bits: &[bool], max: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for (i, &b) in bits.iter().enumerate() {
        let top = if b { max[i] } else { 0 };
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..=top).map(move |l| {
                    let mut w = v.clone();
                    w.push(l);
                    w
                })
            })
            .collect();
    }
    out
}

fn all_bits(n: usize) -> Vec<Vec<bool>> {
    (0..1u32 << n).map(|m| (0..n).map(|i| m >> (n - 1 - i) & 1 == 1).collect()).collect()
}

fn expand(a0: &AnnotatedTa, max_labels: &[usize]) -> Result<Expanded> {
    let a = &a0.automaton;
    let n = a0.n;
    let labelled = max_labels.iter().any(|&m| m > 0);
    let mut variants = Vec::new();
    let mut names = Vec::new();
    let mut id: HashMap<Variant, StateId> = HashMap::new();
    let mut of_state: Vec<Vec<StateId>> = vec![Vec::new(); a.n_states()];
    for q in 0..a.n_states() {
        for bits in all_bits(n) {
            for labels in label_vectors(&bits, max_labels) {
                let v = Variant { q, bits: bits.clone(), labels: labels.clone() };
                let mut name = a.state_name(q).to_string();
                if n > 0 {
                    name = annotated_symbol(&name, &bits);
                }
                if labelled {
                    let ls: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
                    name = format!("{name}${}", ls.join("."));
                }
                id.insert(v.clone(), variants.len());
                of_state[q].push(variants.len());
                variants.push(v);
                names.push(name);
            }
        }
    }
    let mut rules = Vec::new();
    for r in &a.rules {
        let (base, bits) = split_symbol(&r.symbol);
        let symbol: Symbol = a0.base.symbol(base).expect("checked in AnnotatedTa::new");
        let parents: Vec<StateId> = label_vectors(&bits, max_labels)
            .into_iter()
            .map(|labels| id[&Variant { q: r.rhs, bits: bits.clone(), labels }])
            .collect();
        let mut combos: Vec<Vec<StateId>> = vec![Vec::new()];
        for &q in &r.lhs {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    of_state[q].iter().map(move |&s| {
                        let mut c = c.clone();
                        c.push(s);
                        c
                    })
                })
                .collect();
        }
        for lhs in &combos {
            for &rhs in &parents {
                rules.push(Rule { symbol: symbol.clone(), lhs: lhs.clone(), brother: r.brother.clone(), rhs });
            }
        }
    }
    let finals = a.finals.iter().flat_map(|&q| of_state[q].iter().copied()).collect();
    let automaton = Automaton::new(a0.base.clone(), names, finals, rules, FlatTheory::empty(), Constraint::True)?;
    Ok(Expanded { automaton, variants })
}

/// The tree automaton over the plain signature whose states carry the bit
/// vectors; it recognizes the projection of the annotated language.
pub fn shift_bits(a0: &AnnotatedTa) -> Result<Automaton> {
    Ok(expand(a0, &vec![0; a0.n])?.automaton)
}

/// Compiles `phi` over `X1..Xn` (variable `i` is index `i - 1`).
pub fn compile_query(a0: &AnnotatedTa, phi: &Constraint) -> Result<Automaton> {
    let n = a0.n;
    if phi.max_state().is_some_and(|m| m >= n) {
        return Err(Error::Unsupported(format!("query mentions a variable beyond X{n}")));
    }
    if !phi.has_class_count() {
        let ex = expand(a0, &vec![0; n])?;
        let global = rewrite_exact(phi, &ex.variants);
        return Ok(ex.automaton.with_global(global));
    }
    let dnf = to_dnf(phi, DEFAULT_DNF_CAP)?;
    let mut max_labels = vec![0; n];
    for lit in dnf.iter().flatten() {
        if let Atom::Lin(l) = &lit.atom {
            if l.kind == CountKind::Classes {
                if l.sign() == Sign::Integer {
                    return Err(Error::Unsupported("||X|| atoms with mixed signs".into()));
                }
                for &(_, x) in &l.terms {
                    max_labels[x] = max_labels[x].max(l.bound.max(0) as usize);
                }
            }
        }
    }
    let ex = expand(a0, &max_labels)?;
    let vs = &ex.variants;
    let global = Constraint::or(dnf.iter().map(|conj| {
        Constraint::and(conj.iter().map(|lit| match &lit.atom {
            Atom::Lin(l) if l.kind == CountKind::Classes => class_literal(l, vs),
            _ => rewrite_exact(&lit.to_constraint(), vs),
        }))
    }));
    Ok(ex.automaton.with_global(global))
}

fn carrying(vs: &[Variant], x: usize) -> Vec<StateId> {
    vs.iter().enumerate().filter(|(_, v)| v.bits[x]).map(|(s, _)| s).collect()
}

fn labelled(vs: &[Variant], x: usize, label: usize) -> Vec<StateId> {
    vs.iter().enumerate().filter(|(_, v)| v.bits[x] && v.labels[x] == label).map(|(s, _)| s).collect()
}

/// Rewrites `~`, `!~` and `|X|` atoms; exact under any polarity.
fn rewrite_exact(c: &Constraint, vs: &[Variant]) -> Constraint {
    c.map_atoms(&mut |atom| match atom {
        Atom::Eq(x, y) | Atom::Neq(x, y) => {
            let mut parts = Vec::new();
            for &s in &carrying(vs, *x) {
                for &t in &carrying(vs, *y) {
                    parts.push(if matches!(atom, Atom::Eq(..)) { Constraint::eq(s, t) } else { Constraint::neq(s, t) });
                }
            }
            Constraint::and(parts)
        }
        Atom::Lin(l) => {
            assert_eq!(l.kind, CountKind::Occurrences, "class counts are rewritten separately");
            let terms = l.terms.iter().flat_map(|&(k, x)| carrying(vs, x).into_iter().map(move |s| (k, s))).collect();
            Constraint::Atom(Atom::Lin(LinearAtom { terms, ..l.clone() }))
        }
    })
}

/// `||X|| >= m`: labels `1..=m` are all used, on pairwise different classes.
fn at_least(vs: &[Variant], x: usize, m: usize) -> Constraint {
    let mut parts = Vec::new();
    for v in 1..=m {
        let terms = labelled(vs, x, v).into_iter().map(|s| (1, s)).collect();
        parts.push(Constraint::lin(CountKind::Occurrences, terms, Cmp::Ge, 1));
        for w in (v + 1)..=m {
            for &s in &labelled(vs, x, v) {
                for &t in &labelled(vs, x, w) {
                    parts.push(Constraint::neq(s, t));
                }
            }
        }
    }
    Constraint::and(parts)
}

/// `||X|| <= m`: every position of `X` has a label in `1..=m`, and each
/// label sits on a single class.
fn at_most(vs: &[Variant], x: usize, m: usize) -> Constraint {
    let outside: Vec<(i64, StateId)> = vs
        .iter()
        .enumerate()
        .filter(|(_, v)| v.bits[x] && !(1..=m).contains(&v.labels[x]))
        .map(|(s, _)| (1, s))
        .collect();
    let mut parts = vec![Constraint::lin(CountKind::Occurrences, outside, Cmp::Le, 0)];
    for v in 1..=m {
        let group = labelled(vs, x, v);
        for &s in &group {
            for &t in &group {
                parts.push(Constraint::eq(s, t));
            }
        }
    }
    Constraint::and(parts)
}

/// A normalized class-count literal as a disjunction over the count
/// vectors that satisfy it.
fn class_literal(l: &LinearAtom, vs: &[Variant]) -> Constraint {
    let k = l.bound;
    let terms: Vec<(i64, usize)> = l.terms.clone();
    let caps: Vec<i64> = terms
        .iter()
        .map(|&(a, _)| match l.cmp {
            Cmp::Ge | Cmp::Gt => (k + a - 1).div_euclid(a).max(0),
            _ => k.div_euclid(a).max(0),
        })
        .collect();
    let mut out = Vec::new();
    let mut c = vec![0i64; terms.len()];
    loop {
        let sum: i64 = terms.iter().zip(&c).map(|(&(a, _), &ci)| a * ci).sum();
        let fits = match l.cmp {
            Cmp::Le => sum <= k,
            Cmp::Lt => sum < k,
            Cmp::Ge => sum >= k,
            Cmp::Gt => sum > k,
            Cmp::Eq => sum == k,
        };
        if fits {
            out.push(Constraint::and(terms.iter().zip(&c).map(|(&(_, x), &ci)| {
                let ci = ci as usize;
                match l.cmp {
                    Cmp::Le | Cmp::Lt => at_most(vs, x, ci),
                    Cmp::Ge | Cmp::Gt => at_least(vs, x, ci),
                    Cmp::Eq => Constraint::and([at_least(vs, x, ci), at_most(vs, x, ci)]),
                }
            })));
        }
        let mut i = 0;
        loop {
            if i == c.len() {
                return Constraint::or(out);
            }
            c[i] += 1;
            if c[i] <= caps[i] {
                break;
            }
            c[i] = 0;
            i += 1;
        }
    }
}

/// Direct evaluation of a variable constraint on a term and assignment.
pub fn holds(t: &Term, sigma: &Assignment, phi: &Constraint) -> Result<bool> {
    let index = CongruenceIndex::build(&FlatTheory::empty(), &[t])?;
    let classes: HashMap<Position, _> = t.positions().into_iter().zip(index.classes_preorder(t).expect("indexed")).collect();
    let pairs_all = |x: usize, y: usize, want_equal: bool| {
        sigma[x].iter().all(|p| {
            sigma[y].iter().all(|q| p == q || (classes[p] == classes[q]) == want_equal)
        })
    };
    fn go(c: &Constraint, f: &dyn Fn(&Atom) -> bool) -> bool {
        match c {
            Constraint::True => true,
            Constraint::False => false,
            Constraint::Atom(a) => f(a),
            Constraint::Not(c) => !go(c, f),
            Constraint::And(cs) => cs.iter().all(|c| go(c, f)),
            Constraint::Or(cs) => cs.iter().any(|c| go(c, f)),
        }
    }
    Ok(go(phi, &|a| match a {
        Atom::Eq(x, y) => pairs_all(*x, *y, true),
        Atom::Neq(x, y) => pairs_all(*x, *y, false),
        Atom::Lin(l) => {
            let value: i64 = l
                .terms
                .iter()
                .map(|&(k, x)| {
                    k * match l.kind {
                        CountKind::Occurrences => sigma[x].len() as i64,
                        CountKind::Classes => sigma[x].iter().map(|p| classes[p]).collect::<BTreeSet<_>>().len() as i64,
                    }
                })
                .sum();
            l.cmp.holds(value, l.bound)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::parse_automaton;
    use crate::membership::member;

    /// Any term over a:0 f:2, with X1 free.
    const FREE: &str = "\
states q
final q
rule a#0 -> q
rule a#1 -> q
rule f#0(q,q) -> q
rule f#1(q,q) -> q
";

    fn sets(t: &Term, n: usize) -> Vec<Assignment> {
        let ps = t.positions();
        let k = ps.len() * n;
        (0..1u64 << k)
            .map(|m| {
                (0..n)
                    .map(|x| ps.iter().enumerate().filter(|(i, _)| m >> (x * ps.len() + i) & 1 == 1).map(|(_, p)| p.clone()).collect())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn symbols() {
        assert_eq!(split_symbol("f#101"), ("f", vec![true, false, true]));
        assert_eq!(annotated_symbol("g", &[false, true]), "g#01");
    }

    #[test]
    fn shift_bits_counts_states() {
        let a0 = AnnotatedTa::new(parse_automaton(FREE).unwrap(), 1).unwrap();
        let s = shift_bits(&a0).unwrap();
        assert_eq!(s.states(), ["q#0", "q#1"]);
    }

    #[test]
    fn class_counts_agree_with_direct_semantics() {
        let a0 = AnnotatedTa::new(parse_automaton(FREE).unwrap(), 1).unwrap();
        for q in ["||X1|| = 2", "||X1|| <= 1 & |X1| >= 2", "!(||X1|| >= 2)", "2*||X1|| >= 3"] {
            let phi = parse_query(q, 1).unwrap();
            let c = compile_query(&a0, &phi).unwrap();
            for t in ["a", "f(a,a)", "f(f(a,a),a)"] {
                let t = Term::parse(t).unwrap();
                let expect = sets(&t, 1).iter().any(|s| holds(&t, s, &phi).unwrap());
                assert_eq!(member(&c, &t).unwrap().is_some(), expect, "{q} on {t}");
            }
        }
    }

    #[test]
    fn overlapping_variables() {
        let t = Term::parse("a").unwrap();
        let p: BTreeSet<Position> = [Position::root()].into();
        let phi = parse_query("X1 !~ X2", 2).unwrap();
        assert!(holds(&t, &vec![p.clone(), p], &phi).unwrap());
    }
}
