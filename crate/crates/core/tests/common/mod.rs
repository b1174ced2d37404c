//! Test oracles and random fixture generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabg::automaton::BrotherAtom;
use tabg::format::parse_automaton;
use tabg::membership::member;
use tabg::theory::{PatArg, Pattern};
use tabg::{Atom, Automaton, CountKind, FlatTheory, Position, Run, Term};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every term of height at most `h`.
pub fn all_terms(sig: &[(&str, usize)], h: usize) -> Vec<Term> {
    let mut layers: Vec<Vec<Term>> = Vec::new();
    let mut all: Vec<Term> = Vec::new();
    for height in 0..=h {
        let mut layer = Vec::new();
        for &(f, k) in sig {
            if (k == 0) != (height == 0) {
                continue;
            }
            if k == 0 {
                layer.push(Term::leaf(f));
                continue;
            }
            let mut tuples: Vec<Vec<Term>> = vec![Vec::new()];
            for _ in 0..k {
                tuples = tuples
                    .into_iter()
                    .flat_map(|t| {
                        all.iter().map(move |c| {
                            let mut t = t.clone();
                            t.push(c.clone());
                            t
                        })
                    })
                    .collect();
            }
            for kids in tuples {
                if kids.iter().any(|c| c.height() + 1 == height) {
                    layer.push(Term::new(f, kids));
                }
            }
        }
        all.extend(layer.iter().cloned());
        layers.push(layer);
    }
    all
}

pub fn random_term(rng: &mut impl Rng, sig: &[(&str, usize)], max_height: usize) -> Term {
    let leaves: Vec<_> = sig.iter().filter(|s| s.1 == 0).collect();
    let inner: Vec<_> = sig.iter().filter(|s| s.1 > 0).collect();
    if max_height == 0 || inner.is_empty() || rng.gen_bool(0.3) {
        return Term::leaf(leaves.choose(rng).unwrap().0);
    }
    let &&(f, k) = inner.choose(rng).unwrap();
    Term::new(f, (0..k).map(|_| random_term(rng, sig, max_height - 1)).collect())
}

// ---------------------------------------------------------------------------
// Equality modulo a flat theory, by breadth-first rewriting.

fn match_pattern(p: &Pattern, t: &Term, sub: &mut HashMap<String, Term>) -> bool {
    let bind = |x: &str, t: &Term, sub: &mut HashMap<String, Term>| match sub.get(x) {
        Some(u) => u == t,
        None => {
            sub.insert(x.to_string(), t.clone());
            true
        }
    };
    match p {
        Pattern::Var(x) => bind(x, t, sub),
        Pattern::App(f, args) => {
            if **f != *t.symbol || args.len() != t.children.len() {
                return false;
            }
            args.iter().zip(&t.children).all(|(a, c)| match a {
                PatArg::Var(x) => bind(x, c, sub),
                PatArg::Const(k) => c.children.is_empty() && *c.symbol == **k,
            })
        }
    }
}

fn instantiate(p: &Pattern, sub: &HashMap<String, Term>) -> Term {
    match p {
        Pattern::Var(x) => sub[x].clone(),
        Pattern::App(f, args) => Term::new(
            f.clone(),
            args.iter()
                .map(|a| match a {
                    PatArg::Var(x) => sub[x].clone(),
                    PatArg::Const(k) => Term::leaf(k.clone()),
                })
                .collect(),
        ),
    }
}

/// Terms reachable from `t` by one equation step at one position.
pub fn one_step(e: &FlatTheory, t: &Term) -> Vec<Term> {
    let mut out = Vec::new();
    for p in t.positions() {
        let u = t.subterm(&p).unwrap();
        for (l, r) in e.oriented() {
            let mut sub = HashMap::new();
            if match_pattern(l, u, &mut sub) {
                out.push(t.replace(&p, instantiate(r, &sub)).unwrap());
            }
        }
    }
    out
}

/// `Some(s =_E t)` when decided within `budget` explored terms.
pub fn oracle_eq_modulo(e: &FlatTheory, s: &Term, t: &Term, budget: usize) -> Option<bool> {
    if s.height() != t.height() {
        return Some(false);
    }
    let mut seen: HashSet<Term> = HashSet::from([s.clone()]);
    let mut queue = VecDeque::from([s.clone()]);
    while let Some(u) = queue.pop_front() {
        if &u == t {
            return Some(true);
        }
        for v in one_step(e, &u) {
            if seen.insert(v.clone()) {
                if seen.len() > budget {
                    return None;
                }
                queue.push_back(v);
            }
        }
    }
    Some(false)
}

// ---------------------------------------------------------------------------
// Membership by enumerating every run.

/// Every run of the rule set (ignoring all constraints) on `t`, up to `cap`.
pub fn all_runs(a: &Automaton, t: &Term, cap: usize) -> Option<Vec<Run>> {
    let mut kids: Vec<Vec<Run>> = Vec::new();
    for c in &t.children {
        kids.push(all_runs(a, c, cap)?);
    }
    let mut out = Vec::new();
    for (k, r) in a.rules.iter().enumerate() {
        if *r.symbol != *t.symbol || r.lhs.len() != t.children.len() {
            continue;
        }
        let mut partial: Vec<Vec<Run>> = vec![Vec::new()];
        for (i, &q) in r.lhs.iter().enumerate() {
            let choices: Vec<&Run> = kids[i].iter().filter(|c| a.rules[c.rule].rhs == q).collect();
            partial = partial
                .into_iter()
                .flat_map(|p| {
                    choices.iter().map(move |c| {
                        let mut p = p.clone();
                        p.push((*c).clone());
                        p
                    })
                })
                .collect();
            if partial.len() > cap {
                return None;
            }
        }
        for children in partial {
            out.push(Run { symbol: t.symbol.clone(), rule: k, children });
            if out.len() > cap {
                return None;
            }
        }
    }
    Some(out)
}

fn equal_mod(e: &FlatTheory, s: &Term, t: &Term) -> bool {
    if e.is_empty() {
        s == t
    } else {
        oracle_eq_modulo(e, s, t, 20_000).expect("oracle budget")
    }
}

/// Checks brother and global constraints directly on subterms.
pub fn run_satisfies(a: &Automaton, run: &Run) -> bool {
    let t = run.term();
    let mut at: Vec<(usize, Term)> = Vec::new();
    for (p, k) in run.rule_map() {
        let r = &a.rules[k];
        let sub = t.subterm(&p).unwrap();
        for b in &r.brother {
            let (i, j, eq) = match *b {
                BrotherAtom::Eq(i, j) => (i, j, true),
                BrotherAtom::Neq(i, j) => (i, j, false),
            };
            if equal_mod(&a.theory, &sub.children[i - 1], &sub.children[j - 1]) != eq {
                return false;
            }
        }
        at.push((r.rhs, sub.clone()));
    }
    let pairs_ok = |x: usize, y: usize, want: bool| {
        at.iter().enumerate().all(|(i, (q, s))| {
            at.iter().enumerate().all(|(j, (q2, s2))| i == j || *q != x || *q2 != y || equal_mod(&a.theory, s, s2) == want)
        })
    };
    let count = |q: usize, kind: CountKind| -> i64 {
        let subs: Vec<&Term> = at.iter().filter(|(r, _)| *r == q).map(|(_, s)| s).collect();
        match kind {
            CountKind::Occurrences => subs.len() as i64,
            CountKind::Classes => {
                let mut reps: Vec<&Term> = Vec::new();
                for s in subs {
                    if !reps.iter().any(|r| equal_mod(&a.theory, r, s)) {
                        reps.push(s);
                    }
                }
                reps.len() as i64
            }
        }
    };
    fn go(c: &tabg::Constraint, f: &dyn Fn(&Atom) -> bool) -> bool {
        use tabg::Constraint::*;
        match c {
            True => true,
            False => false,
            Atom(x) => f(x),
            Not(c) => !go(c, f),
            And(cs) => cs.iter().all(|c| go(c, f)),
            Or(cs) => cs.iter().any(|c| go(c, f)),
        }
    }
    go(&a.global, &|atom| match atom {
        Atom::Eq(x, y) => pairs_ok(*x, *y, true),
        Atom::Neq(x, y) => pairs_ok(*x, *y, false),
        Atom::Lin(l) => l.cmp.holds(l.terms.iter().map(|&(k, q)| k * count(q, l.kind)).sum(), l.bound),
    })
}

/// `Some(accepted)` when the runs fit in `cap`.
pub fn brute_member(a: &Automaton, t: &Term, cap: usize) -> Option<bool> {
    let runs = all_runs(a, t, cap)?;
    Some(runs.iter().any(|r| a.is_final(a.rules[r.rule].rhs) && run_satisfies(a, r)))
}

pub fn accepted(a: &Automaton, t: &Term) -> bool {
    member(a, t).unwrap().is_some()
}

// ---------------------------------------------------------------------------
// Random fixtures.

pub struct FixtureShape {
    pub states: usize,
    pub symbols: Vec<(&'static str, usize)>,
    pub brother: bool,
    pub literals: usize,
    pub class_counts: bool,
    pub theory: bool,
    pub positive: bool,
}

pub fn random_shape(rng: &mut impl Rng) -> FixtureShape {
    let k = if rng.gen_bool(0.5) { 1 } else { 2 };
    FixtureShape {
        states: rng.gen_range(1..=3),
        symbols: vec![("a", 0), (if k == 1 { "s" } else { "f" }, k)],
        brother: rng.gen_bool(0.5),
        literals: rng.gen_range(0..=2),
        class_counts: true,
        theory: false,
        positive: false,
    }
}

fn state_name(i: usize) -> String {
    format!("q{i}")
}

fn random_literal(rng: &mut impl Rng, n: usize, class_counts: bool, positive: bool) -> String {
    let q = |rng: &mut dyn rand::RngCore| state_name(rng.gen_range(0..n));
    let body = match rng.gen_range(0..5) {
        0 => format!("{} ~ {}", q(rng), q(rng)),
        1 => format!("{} !~ {}", q(rng), q(rng)),
        2 => {
            let cmp = ["<=", ">=", "="][rng.gen_range(0..3)];
            format!("|{}| {cmp} {}", q(rng), rng.gen_range(0..=2))
        }
        3 if class_counts => {
            let cmp = ["<=", ">=", "="][rng.gen_range(0..3)];
            format!("||{}|| {cmp} {}", q(rng), rng.gen_range(0..=2))
        }
        _ => format!("|{}| + 2*|{}| >= {}", q(rng), q(rng), rng.gen_range(1..=3)),
    };
    if !positive && rng.gen_bool(0.3) {
        format!("!({body})")
    } else {
        body
    }
}

fn random_equation(rng: &mut impl Rng, sig: &[(&str, usize)]) -> String {
    let consts: Vec<&str> = sig.iter().filter(|s| s.1 == 0).map(|s| s.0).collect();
    let inner: Vec<(&str, usize)> = sig.iter().copied().filter(|s| s.1 > 0).collect();
    if inner.is_empty() || rng.gen_bool(0.4) {
        return format!("{} = {}", consts.choose(rng).unwrap(), consts.choose(rng).unwrap());
    }
    let vars = ["x", "y"];
    let (f, k) = inner[rng.gen_range(0..inner.len())];
    let (g, m) = inner[rng.gen_range(0..inner.len())];
    let nv = rng.gen_range(0..=k.min(m).min(2));
    let mut side = |f: &str, k: usize, used: &[&str]| {
        let mut args: Vec<String> = used.iter().map(|v| v.to_string()).collect();
        while args.len() < k {
            args.push(consts.choose(rng).unwrap().to_string());
        }
        args.shuffle(rng);
        format!("{f}({})", args.join(","))
    };
    let l = side(f, k, &vars[..nv]);
    let r = side(g, m, &vars[..nv]);
    format!("{l} = {r}")
}

/// A random theory over `sig`, as `vars`/`eq` lines.
pub fn random_theory_text(rng: &mut impl Rng, sig: &[(&str, usize)], max_eqs: usize) -> String {
    let mut out = String::from("vars x y\n");
    for _ in 0..rng.gen_range(0..=max_eqs) {
        out += &format!("eq {}\n", random_equation(rng, sig));
    }
    out
}

pub fn random_automaton(rng: &mut impl Rng, shape: &FixtureShape) -> Automaton {
    let n = shape.states;
    let names: Vec<String> = (0..n).map(state_name).collect();
    let mut src = String::new();
    let sig: Vec<String> = shape.symbols.iter().map(|(f, k)| format!("{f}:{k}")).collect();
    src += &format!("sig {}\nstates {}\n", sig.join(" "), names.join(" "));
    let finals: Vec<&String> = names.iter().filter(|_| rng.gen_bool(0.5)).collect();
    let finals = if finals.is_empty() { vec![&names[n - 1]] } else { finals };
    src += &format!("final {}\n", finals.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" "));
    if shape.theory {
        src += &random_theory_text(rng, &shape.symbols, 2);
    }
    for &(f, k) in &shape.symbols {
        let count = if k == 0 { rng.gen_range(1..=n) } else { rng.gen_range(1..=4) };
        for _ in 0..count {
            let lhs: Vec<&str> = (0..k).map(|_| names[rng.gen_range(0..n)].as_str()).collect();
            let args = if k == 0 { String::new() } else { format!("({})", lhs.join(",")) };
            let brother = if shape.brother && k >= 2 && rng.gen_bool(0.4) {
                if rng.gen_bool(0.5) { " [1~2]" } else { " [1!~2]" }
            } else {
                ""
            };
            src += &format!("rule {f}{args}{brother} -> {}\n", names[rng.gen_range(0..n)]);
        }
    }
    if shape.literals > 0 {
        let lits: Vec<String> = (0..shape.literals).map(|_| random_literal(rng, n, shape.class_counts, shape.positive)).collect();
        let op = if shape.positive || rng.gen_bool(0.7) { " & " } else { " | " };
        src += &format!("global {}\n", lits.join(op));
    }
    parse_automaton(&src).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

/// A random run of the automaton's rules (constraints ignored) of height
/// at most `h`, built top-down from a random state.
pub fn random_run(rng: &mut impl Rng, a: &Automaton, h: usize) -> Option<Run> {
    let heights = a.min_heights();
    fn go(rng: &mut dyn rand::RngCore, a: &Automaton, q: usize, h: usize, heights: &[Option<usize>]) -> Option<Run> {
        let rules: Vec<usize> = (0..a.rules.len())
            .filter(|&k| {
                let r = &a.rules[k];
                r.rhs == q && (r.lhs.is_empty() || (h > 0 && r.lhs.iter().all(|&c| heights[c].is_some_and(|m| m < h))))
            })
            .collect();
        let &k = rules.choose(rng)?;
        let children = a.rules[k].lhs.iter().map(|&c| go(rng, a, c, h - 1, heights)).collect::<Option<Vec<_>>>()?;
        Some(Run { symbol: a.rules[k].symbol.clone(), rule: k, children })
    }
    let q = rng.gen_range(0..a.n_states());
    go(rng, a, q, h, &heights)
}

pub fn positions_of(t: &Term) -> BTreeSet<Position> {
    t.positions().into_iter().collect()
}

/// A term reached from `t` by up to `steps` random equation steps.
pub fn rewrite_walk(rng: &mut impl Rng, e: &FlatTheory, t: &Term, steps: usize) -> Term {
    let mut u = t.clone();
    for _ in 0..steps {
        let next = one_step(e, &u);
        match next.choose(rng) {
            Some(v) => u = v.clone(),
            None => break,
        }
    }
    u
}

pub const NIGHTMARE_SIG: &[(&str, usize)] = &[("a", 0), ("b", 0), ("c", 0), ("h", 1), ("f", 2), ("g", 2)];

pub struct Quadruple {
    pub theory: FlatTheory,
    pub s: Term,
    pub t: Term,
    pub s2: Term,
    pub t2: Term,
}

fn is_const(t: &Term) -> bool {
    t.children.is_empty()
}

/// Quadruples `s = f(si)`, `t = g(tj)`, `s' = f(si')`, `t' = g(tj')`
/// satisfying the replacement hypotheses, checked with the rewriting oracle.
pub fn replacement_quadruples(seed: u64, count: usize) -> Vec<Quadruple> {
    let mut rng = rng(seed);
    let sig = tabg::Signature::from_pairs(NIGHTMARE_SIG.iter().copied()).unwrap();
    let mut out = Vec::new();
    let eq = |e: &FlatTheory, x: &Term, y: &Term| oracle_eq_modulo(e, x, y, 5_000);
    while out.len() < count {
        let e = FlatTheory::parse(&random_theory_text(&mut rng, NIGHTMARE_SIG, 3), &sig).unwrap();
        let (f, g) = (["f", "g"][rng.gen_range(0..2)], ["f", "g"][rng.gen_range(0..2)]);
        let kids = |rng: &mut ChaCha8Rng| -> Vec<Term> { (0..2).map(|_| random_term(rng, NIGHTMARE_SIG, 2)).collect() };
        let s_kids = kids(&mut rng);
        let t_kids = if rng.gen_bool(0.5) {
            s_kids.iter().map(|k| rewrite_walk(&mut rng, &e, k, 3)).collect()
        } else {
            kids(&mut rng)
        };
        let twin = |rng: &mut ChaCha8Rng, k: &Term| -> Term {
            if rng.gen_bool(0.5) { rewrite_walk(rng, &e, k, 3) } else { random_term(rng, NIGHTMARE_SIG, 2) }
        };
        let s2_kids: Vec<Term> = s_kids.iter().map(|k| twin(&mut rng, k)).collect();
        let t2_kids: Vec<Term> = t_kids.iter().map(|k| twin(&mut rng, k)).collect();
        let leaves_ok = |a: &[Term], b: &[Term]| {
            a.iter().zip(b).all(|(x, y)| {
                is_const(x) == is_const(y) && (!is_const(x) || eq(&e, x, y) == Some(true))
            })
        };
        if !leaves_ok(&s_kids, &s2_kids) || !leaves_ok(&t_kids, &t2_kids) {
            continue;
        }
        let mut cross = true;
        for (x, x2) in s_kids.iter().zip(&s2_kids) {
            for (y, y2) in t_kids.iter().zip(&t2_kids) {
                match (eq(&e, x, y), eq(&e, x2, y2)) {
                    (Some(p), Some(q)) if p == q => {}
                    _ => cross = false,
                }
            }
        }
        if !cross {
            continue;
        }
        out.push(Quadruple {
            s: Term::new(f, s_kids),
            t: Term::new(g, t_kids),
            s2: Term::new(f, s2_kids),
            t2: Term::new(g, t2_kids),
            theory: e,
        });
    }
    out
}

// ---------------------------------------------------------------------------
// EMSO: exhaustive assignments.

/// States a plain tree automaton reaches on `t`, ignoring all constraints.
pub fn ta_states(a: &Automaton, t: &Term) -> BTreeSet<usize> {
    let kids: Vec<BTreeSet<usize>> = t.children.iter().map(|c| ta_states(a, c)).collect();
    a.rules
        .iter()
        .filter(|r| *r.symbol == *t.symbol && r.lhs.len() == kids.len() && r.lhs.iter().zip(&kids).all(|(q, k)| k.contains(q)))
        .map(|r| r.rhs)
        .collect()
}

pub fn assignments(t: &Term, n: usize) -> Vec<tabg::emso::Assignment> {
    let ps = t.positions();
    (0..1u64 << (n * ps.len()))
        .map(|m| {
            (0..n)
                .map(|x| ps.iter().enumerate().filter(|(i, _)| m >> (x * ps.len() + i) & 1 == 1).map(|(_, p)| p.clone()).collect())
                .collect()
        })
        .collect()
}

/// `∃σ. A0 accepts t⊗σ and t,σ ⊨ φ`.
pub fn emso_oracle(a0: &tabg::emso::AnnotatedTa, phi: &tabg::Constraint, t: &Term) -> bool {
    assignments(t, a0.n).iter().any(|s| {
        let annotated = tabg::emso::annotate(t, s);
        ta_states(&a0.automaton, &annotated).iter().any(|q| a0.automaton.is_final(*q))
            && tabg::emso::holds(t, s, phi).unwrap()
    })
}

// ---------------------------------------------------------------------------
// Hedge automata.

pub fn random_unranked(r: &mut impl Rng, symbols: &[&str], budget: &mut usize) -> Term {
    let f = *symbols.choose(r).unwrap();
    *budget = budget.saturating_sub(1);
    let mut kids = Vec::new();
    while *budget > 0 && r.gen_bool(0.45) {
        kids.push(random_unranked(r, symbols, budget));
    }
    Term::new(f, kids)
}

pub fn doc(r: &mut impl Rng, max_nodes: usize) -> Term {
    let mut budget = r.gen_range(1..=max_nodes);
    random_unranked(r, &["a", "b"], &mut budget)
}

pub fn random_hag(r: &mut impl Rng) -> tabg::hedge::HedgeAutomaton {
    let n = r.gen_range(1..=3);
    let q: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
    let mut src = format!("sig a b\nstates {}\nfinal {}\n", q.join(" "), q[r.gen_range(0..n)]);
    let mut k = 0;
    for f in ["a", "b"] {
        for rhs in &q {
            if r.gen_bool(0.4) {
                continue;
            }
            let m = r.gen_range(1..=2);
            let mut items = vec![format!("init s0"), format!("final s{}", r.gen_range(0..m))];
            for _ in 0..r.gen_range(0..=3) {
                items.push(format!("s{} -{}-> s{}", r.gen_range(0..m), q[r.gen_range(0..n)], r.gen_range(0..m)));
            }
            src += &format!("nfa N{k}: {}\nhrule {f} (N{k}) -> {rhs}\n", items.join("; "));
            k += 1;
        }
    }
    let atoms = [
        format!("{} ~ {}", q[r.gen_range(0..n)], q[r.gen_range(0..n)]),
        format!("{} !~ {}", q[r.gen_range(0..n)], q[r.gen_range(0..n)]),
        format!("|{}| <= 2", q[r.gen_range(0..n)]),
    ];
    if r.gen_bool(0.7) {
        src += &format!("global {}\n", atoms.choose(r).unwrap());
    }
    tabg::hedge::parse_hedge_automaton(&src).unwrap_or_else(|e| panic!("{e}\n{src}"))
}


// ---------------------------------------------------------------------------
// Annotated automata and queries.

pub const EMSO_SIG: &[(&str, usize)] = &[("c", 0), ("a", 1), ("f", 2)];

/// A random annotated automaton over `c:0 a:1 f:2` with `n` bits.
pub fn random_annotated(r: &mut impl Rng, n: usize) -> tabg::emso::AnnotatedTa {
    let k = r.gen_range(1..=2);
    let states: Vec<String> = (0..k).map(|i| format!("p{i}")).collect();
    let mut src = format!("states {}\nfinal {}\n", states.join(" "), states[r.gen_range(0..k)]);
    let bits = |r: &mut dyn rand::RngCore| (0..n).map(|_| r.gen_bool(0.5)).collect::<Vec<bool>>();
    // sometimes add a rule for every bit vector
    let dense = r.gen_bool(0.5);
    for &(f, arity) in EMSO_SIG {
        for _ in 0..r.gen_range(1..=4) {
            let lhs: Vec<&str> = (0..arity).map(|_| states[r.gen_range(0..k)].as_str()).collect();
            let args = if arity == 0 { String::new() } else { format!("({})", lhs.join(",")) };
            let b = bits(r);
            src += &format!("rule {}{args} -> {}\n", tabg::emso::annotated_symbol(f, &b), states[r.gen_range(0..k)]);
        }
        if dense {
            for m in 0..1u32 << n {
                let b: Vec<bool> = (0..n).map(|i| m >> i & 1 == 1).collect();
                let args = if arity == 0 { String::new() } else { format!("({})", vec![states[0].as_str(); arity].join(",")) };
                src += &format!("rule {}{args} -> {}\n", tabg::emso::annotated_symbol(f, &b), states[0]);
            }
        }
    }
    let mut sig = String::from("sig");
    for &(f, arity) in EMSO_SIG {
        for m in 0..1u32 << n {
            let b: Vec<bool> = (0..n).map(|i| m >> i & 1 == 1).collect();
            sig += &format!(" {}:{arity}", tabg::emso::annotated_symbol(f, &b));
        }
    }
    tabg::emso::AnnotatedTa::new(parse_automaton(&format!("{sig}\n{src}")).unwrap(), n).unwrap()
}

pub fn random_query(r: &mut impl Rng, n: usize) -> tabg::Constraint {
    let x = |r: &mut dyn rand::RngCore| format!("X{}", r.gen_range(1..=n));
    let lit = |r: &mut dyn rand::RngCore| {
        let cmp = ["<=", ">=", "="][r.gen_range(0..3)];
        let body = match r.gen_range(0..5) {
            0 => format!("{} ~ {}", x(r), x(r)),
            1 => format!("{} !~ {}", x(r), x(r)),
            2 => format!("|{}| {cmp} {}", x(r), r.gen_range(0..3)),
            3 => format!("||{}|| {cmp} {}", x(r), r.gen_range(0..3)),
            _ => format!("||{}|| + ||{}|| {cmp} {}", x(r), x(r), r.gen_range(1..4)),
        };
        if r.gen_bool(0.25) { format!("!({body})") } else { body }
    };
    let a = lit(r);
    let src = match r.gen_range(0..3) {
        0 => a,
        1 => format!("{a} & {}", lit(r)),
        _ => format!("{a} | {}", lit(r)),
    };
    tabg::emso::parse_query(&src, n).unwrap()
}


// ---------------------------------------------------------------------------
// The pumping bound by exhaustive search over statistics sequences.

type Stat = Vec<Vec<u32>>;

fn tuples_with_sum(n: usize, s: u32) -> Vec<Vec<u32>> {
    if n == 1 {
        return vec![vec![s]];
    }
    (0..=s)
        .flat_map(|x| {
            tuples_with_sum(n - 1, s - x).into_iter().map(move |mut t| {
                t.insert(0, x);
                t
            })
        })
        .collect()
}

/// Multisets of nonzero `n`-tuples with total at most `limit`, each sorted.
fn stat_multisets(n: usize, limit: u32) -> Vec<Stat> {
    let mut pool: Vec<Vec<u32>> = (1..=limit).flat_map(|s| tuples_with_sum(n, s)).collect();
    pool.sort();
    let mut out = Vec::new();
    fn go(pool: &[Vec<u32>], from: usize, room: u32, acc: &mut Stat, out: &mut Vec<Stat>) {
        out.push(acc.clone());
        for k in from..pool.len() {
            let s: u32 = pool[k].iter().sum();
            if s <= room {
                acc.push(pool[k].clone());
                go(pool, k, room - s, acc, out);
                acc.pop();
            }
        }
    }
    go(&pool, 0, limit, &mut Vec::new(), &mut out);
    out
}

/// Whether each tuple of `x` fits under a distinct tuple of `y`, by
/// trying every assignment.
fn dominated_by(x: &[Vec<u32>], y: &[Vec<u32>]) -> bool {
    fn go(x: &[Vec<u32>], y: &[Vec<u32>], used: &mut Vec<bool>) -> bool {
        let Some((first, rest)) = x.split_first() else { return true };
        for k in 0..y.len() {
            if !used[k] && first.iter().zip(&y[k]).all(|(a, b)| a <= b) {
                used[k] = true;
                if go(rest, y, used) {
                    return true;
                }
                used[k] = false;
            }
        }
        false
    }
    go(x, y, &mut vec![false; y.len()])
}

fn stat_total(m: &Stat) -> u32 {
    m.iter().flatten().sum()
}

/// Longest sequence of (H, Ȟ) statistics starting from one unit tuple and
/// an empty Ȟ, with `a·|H_i| + |Ȟ_i| >= |H_{i-1}| + |Ȟ_{i-1}|`, and with no
/// pair dominated by a later one.
pub fn oracle_bound(a: u32, n: usize) -> usize {
    fn go(a: u32, n: usize, seq: &mut Vec<(Stat, Stat)>) -> usize {
        let (h, c) = seq.last().unwrap().clone();
        let limit = a * stat_total(&h) + stat_total(&c);
        let ms = stat_multisets(n, limit);
        let mut best = seq.len();
        for x in &ms {
            for y in &ms {
                if stat_total(x) + stat_total(y) > limit {
                    continue;
                }
                if seq.iter().any(|(p, q)| dominated_by(p, x) && dominated_by(q, y)) {
                    continue;
                }
                seq.push((x.clone(), y.clone()));
                best = best.max(go(a, n, seq));
                seq.pop();
            }
        }
        best
    }
    (0..n)
        .map(|k| {
            let mut unit = vec![0; n];
            unit[k] = 1;
            go(a, n, &mut vec![(vec![unit], Vec::new())])
        })
        .max()
        .unwrap()
}
