//! One line per acceptance criterion; the process fails if any criterion does.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use tabg::automaton::{is_accepting_run, validate_run};
use tabg::emptiness::{emptiness, Mode, Verdict};
use tabg::emso::compile_query;
use tabg::fixtures;
use tabg::format::{parse_automaton, parse_run};
use tabg::hedge::{curry, hag_member, hag_to_tag, hedge_run_exists, uncurry};
use tabg::membership::member;
use tabg::pumping::{apply_pump, compute_bound, find_pump, index_for, strata};
use tabg::reduction::to_positive_conjunctive;
use tabg::{eq_modulo, Automaton, FlatTheory, Run, Signature, Term};

type Outcome = Result<String, String>;

const STRATA_TABLE: &str = "\
i  H                      H_check        H_ring
5  {@}                    {}             {}
4  {3}                    {2}            {1}
3  {3.3}                  {2,3.2}        {1,3.1}
2  {3.3.3}                {2,3.2,3.3.2}  {1,3.1,3.3.1}
1  {2,3.2,3.3.2,3.3.3.2}  {}             {1,3.1,3.3.1,3.3.3.1}
";

const STATS_TABLE: &str = "\
states <q_d,q_N,q_id,q_t,qL,qM>
i  r_H              r_H_check        r_H_ring
5  [<0,0,0,0,0,1>]  []               []
4  [<0,0,0,0,1,0>]  [<0,0,0,1,0,0>]  [<0,0,1,0,0,0>]
3  [<0,0,0,0,1,0>]  [<0,0,0,2,0,0>]  [<0,0,1,0,0,0>,<0,0,1,0,0,0>]
2  [<0,0,0,0,1,0>]  [<0,0,0,3,0,0>]  [<0,0,1,0,0,0>,<0,0,1,0,0,0>,<0,0,1,0,0,0>]
1  [<0,0,0,4,0,0>]  []               [<0,0,1,0,0,0>,<0,0,1,0,0,0>,<0,0,1,0,0,0>,<0,0,1,0,0,0>]
";

const MENU_DUPLICATE: &str = "M(1,N(2,0),L(2,N(2,0),L(2,N(2,0),L0(4,N(2,0)))))";
const ONE_SECOND: Duration = Duration::from_secs(1);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn fixture_path(name: &str) -> String {
    format!("{}/../core/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run_stats() -> Result<(String, Duration), String> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_tabg"))
        .args(["stats", &fixture_path("menu.tabg"), &fixture_path("menu_run.run")])
        .output()
        .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure(out.status.success(), || format!("exit {:?}", out.status.code()))?;
    Ok((String::from_utf8_lossy(&out.stdout).into_owned(), took))
}

fn menu() -> (Automaton, Run) {
    let a = parse_automaton(fixtures::MENU).unwrap();
    let run = parse_run(fixtures::MENU_RUN, &a).unwrap();
    (a, run)
}

fn t(s: &str) -> Term {
    Term::parse(s).unwrap()
}

fn terms_of(a: &Automaton, h: usize) -> Vec<Term> {
    let sig: Vec<(String, usize)> = a.signature.iter().map(|(f, k)| (f.to_string(), k)).collect();
    let sig: Vec<(&str, usize)> = sig.iter().map(|(f, k)| (f.as_str(), *k)).collect();
    all_terms(&sig, h)
}

fn criterion_1() -> Outcome {
    let (out, took) = run_stats()?;
    ensure(out.contains(STRATA_TABLE), || format!("strata table differs:\n{out}"))?;
    ensure(took < ONE_SECOND, || format!("took {took:?}"))?;
    Ok(format!("25 strata entries reproduced in {took:?}"))
}

fn criterion_2() -> Outcome {
    let (out, took) = run_stats()?;
    ensure(out.contains(STATS_TABLE), || format!("statistics table differs:\n{out}"))?;
    ensure(took < ONE_SECOND, || format!("took {took:?}"))?;
    Ok("r_H, r_H_check, r_H_ring reproduced".into())
}

fn criterion_3() -> Outcome {
    let (a, run) = menu();
    let index = index_for(&a, &run).map_err(|e| e.to_string())?;
    let plan = find_pump(&a, &run, &index).map_err(|e| e.to_string())?.ok_or("no pump found")?;
    ensure(plan.to_string() == "i=4 j=3 I(1)=1 I(2)=2 I(3)=3.3", || format!("plan {plan}"))?;
    let out = apply_pump(&a, &run, &plan, &index).map_err(|e| e.to_string())?;
    let term = out.term().to_string();
    ensure(term == "M(1,N(2,0),L(3,N(2,0),L0(4,N(2,0))))", || format!("pumped term {term}"))?;
    let violations = validate_run(&a, &out).map_err(|e| e.to_string())?;
    ensure(violations.is_empty(), || format!("{violations:?}"))?;
    ensure(out.height() == 4 && run.height() == 5, || format!("heights {} -> {}", run.height(), out.height()))?;
    Ok(format!("{plan}, pumped height 4"))
}

fn criterion_4() -> Outcome {
    let mut checks = Vec::new();
    for src in [fixtures::FTT_TAB, fixtures::FTT_TAG] {
        let a = parse_automaton(src).unwrap();
        checks.push((a.clone(), "f(a,a)", true));
        checks.push((a.clone(), "f(f(a,a),f(a,a))", true));
        checks.push((a, "f(a,f(a,a))", false));
    }
    let m = parse_automaton(fixtures::MENU).unwrap();
    checks.push((m.clone(), fixtures::MENU_TERM.trim(), true));
    checks.push((m, MENU_DUPLICATE, false));
    let mut slowest = Duration::ZERO;
    for (a, term, expect) in &checks {
        let start = Instant::now();
        let got = member(a, &t(term)).map_err(|e| e.to_string())?.is_some();
        let took = start.elapsed();
        slowest = slowest.max(took);
        ensure(got == *expect, || format!("{term}: expected {expect}"))?;
        ensure(took < ONE_SECOND, || format!("{term}: took {took:?}"))?;
    }
    Ok(format!("{} checks, slowest {slowest:?}", checks.len()))
}

fn criterion_5() -> Outcome {
    let (mut fixtures_done, mut steps) = (0, 0);
    for seed in 0..200u64 {
        let mut r = rng(5_000 + seed);
        let shape = random_shape(&mut r);
        let a = random_automaton(&mut r, &shape);
        let red = to_positive_conjunctive(&a).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(red.automaton.classify().positive_conjunctive, || format!("seed {seed}: not positive conjunctive"))?;
        for step in &red.trace {
            ensure(step.after.iter().all(|m| *m < step.before), || format!("seed {seed}: {step}"))?;
            steps += 1;
        }
        for term in terms_of(&a, 3) {
            ensure(accepted(&a, &term) == accepted(&red.automaton, &term), || format!("seed {seed}: {term}"))?;
        }
        fixtures_done += 1;
    }
    Ok(format!("{fixtures_done} fixtures, {steps} lemma steps"))
}

fn criterion_6() -> Outcome {
    let mut nonempty = 0;
    for seed in 0..200u64 {
        let mut r = rng(5_000 + seed);
        let shape = random_shape(&mut r);
        let a = random_automaton(&mut r, &shape);
        let v = emptiness(&a, Mode::Bounded { max_height: 4 }).map_err(|e| format!("seed {seed}: {e}"))?;
        let found = terms_of(&a, 4).iter().any(|term| accepted(&a, term));
        match v {
            Verdict::NonEmpty(run) => {
                ensure(found, || format!("seed {seed}: spurious witness"))?;
                ensure(is_accepting_run(&a, &run).unwrap(), || format!("seed {seed}: witness invalid"))?;
                nonempty += 1;
            }
            Verdict::EmptyUpTo(4) => ensure(!found, || format!("seed {seed}: missed a term"))?,
            other => return Err(format!("seed {seed}: {other}")),
        }
    }
    let bound = compute_bound(1, 1, 10_000).map_err(|e| e.to_string())?;
    let oracle = oracle_bound(1, 1);
    ensure(bound == 3 && oracle == 3, || format!("B(1,1) = {bound}, oracle {oracle}"))?;
    let mut certified = 0;
    for g in ["", "global q ~ q", "global q !~ q", "global q ~ q & q !~ q"] {
        for mask in 1..8u32 {
            let mut src = String::from("sig a:0 b:0 s:1\nstates q\nfinal q\n");
            for (k, rule) in ["rule a -> q\n", "rule b -> q\n", "rule s(q) -> q\n"].iter().enumerate() {
                if mask >> k & 1 == 1 {
                    src += rule;
                }
            }
            src += g;
            let a = parse_automaton(&src).unwrap();
            let v = emptiness(&a, Mode::Certified { budget: 10_000 }).map_err(|e| e.to_string())?;
            let found = terms_of(&a, 6).iter().any(|term| accepted(&a, term));
            ensure(matches!(v, Verdict::NonEmpty(_)) == found && matches!(v, Verdict::Empty) == !found, || format!("{src}: {v}"))?;
            certified += 1;
        }
    }
    Ok(format!("200 fixtures ({nonempty} nonempty), B(1,1)=3, {certified} certified (1,1) automata"))
}

fn tab_run(r: &mut impl Rng, max_height: usize) -> Option<(Automaton, Run)> {
    let mut s = random_shape(r);
    s.literals = 0;
    s.brother = true;
    s.theory = r.gen_bool(0.3);
    if r.gen_bool(0.5) {
        s.symbols = vec![("a", 0), ("b", 0), ("f", 2), ("g", 1)];
    }
    let a = random_automaton(r, &s);
    for _ in 0..20 {
        let run = random_run(r, &a, max_height)?;
        if run.height() >= 2 && validate_run(&a, &run).unwrap().is_empty() {
            return Some((a, run));
        }
    }
    None
}

fn criterion_7() -> Outcome {
    let (mut runs, mut pumped, mut seed) = (0, 0, 0u64);
    let mut r = rng(7);
    while runs < 500 {
        seed += 1;
        ensure(seed < 20_000, || format!("only {runs} valid runs generated"))?;
        let Some((a, run)) = tab_run(&mut r, 6) else { continue };
        runs += 1;
        let arity = a.max_arity().max(1);
        let st = strata(&run);
        for i in 2..=st.height() {
            let (hi, lo) = (st.at(i), st.at(i - 1));
            ensure(arity * hi.h.len() + hi.h_check.len() >= lo.h.len() + lo.h_check.len(), || format!("run {runs}: stratum {i}"))?;
        }
        let index = index_for(&a, &run).map_err(|e| e.to_string())?;
        if let Some(plan) = find_pump(&a, &run, &index).map_err(|e| e.to_string())? {
            let out = apply_pump(&a, &run, &plan, &index).map_err(|e| e.to_string())?;
            ensure(validate_run(&a, &out).unwrap().is_empty(), || format!("run {runs}: pumped run invalid"))?;
            ensure(out.height() < run.height(), || format!("run {runs}: height did not drop"))?;
            ensure(out.state(&a) == run.state(&a), || format!("run {runs}: root state changed"))?;
            pumped += 1;
        }
    }
    Ok(format!("{runs} runs, {pumped} pumped"))
}

fn criterion_8() -> Outcome {
    const SIG: &[(&str, usize)] = &[("a", 0), ("b", 0), ("f", 2), ("g", 1)];
    let sig = Signature::from_pairs(SIG.iter().copied()).unwrap();
    let (mut conclusive, mut equal) = (0, 0);
    let mut r = rng(8);
    for _ in 0..1_500 {
        let e = FlatTheory::parse(&random_theory_text(&mut r, SIG, 3), &sig).unwrap();
        let s = random_term(&mut r, SIG, 3);
        let u = if r.gen_bool(0.5) { rewrite_walk(&mut r, &e, &s, 4) } else { random_term(&mut r, SIG, 3) };
        let Some(expect) = oracle_eq_modulo(&e, &s, &u, 50_000) else { continue };
        let got = eq_modulo(&e, &s, &u).map_err(|e| e.to_string())?;
        ensure(got == expect, || format!("{s} vs {u}: expected {expect}"))?;
        conclusive += 1;
        equal += expect as usize;
    }
    ensure(conclusive >= 1_000, || format!("only {conclusive} conclusive instances"))?;
    let quads = replacement_quadruples(8, 200);
    for q in &quads {
        let before = eq_modulo(&q.theory, &q.s, &q.t).map_err(|e| e.to_string())?;
        let after = eq_modulo(&q.theory, &q.s2, &q.t2).map_err(|e| e.to_string())?;
        ensure(before == after, || format!("{} {} {} {}", q.s, q.t, q.s2, q.t2))?;
    }
    Ok(format!("{conclusive} oracle agreements ({equal} equal), {} quadruples", quads.len()))
}

fn criterion_9() -> Outcome {
    let demo = curry(&t(fixtures::CURRY_TERM.trim())).to_string();
    ensure(demo == "@(@(@(a,@(b,c)),d),@(@(f,g),h))", || format!("curried demo term {demo}"))?;
    let mut r = rng(9);
    for _ in 0..500 {
        let d = doc(&mut r, 12);
        ensure(uncurry(&curry(&d)).ok().as_ref() == Some(&d), || format!("round trip of {d}"))?;
    }
    let mut docs = 0;
    for _ in 0..100 {
        let h = random_hag(&mut r);
        let tag = hag_to_tag(&h).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let d = doc(&mut r, 8);
            let direct = hag_member(&h, &d).map_err(|e| e.to_string())?;
            let via_tag = member(&tag, &curry(&d)).map_err(|e| e.to_string())?.is_some();
            let runs = hedge_run_exists(&h, &d).map_err(|e| e.to_string())?;
            ensure(direct == via_tag && direct == runs, || format!("{d}: {direct} {via_tag} {runs}"))?;
            docs += 1;
        }
    }
    Ok(format!("demo term, 500 round trips, {docs} hedge documents"))
}

fn criterion_10() -> Outcome {
    let small: Vec<Term> = all_terms(EMSO_SIG, 4).into_iter().filter(|t| t.size() <= 5).collect();
    let mut r = rng(10);
    let mut checks = 0;
    for k in 0..100 {
        let n = r.gen_range(1..=2);
        let a0 = random_annotated(&mut r, n);
        let phi = random_query(&mut r, n);
        let out = compile_query(&a0, &phi).map_err(|e| format!("instance {k}: {e}"))?;
        for term in &small {
            let got = member(&out, term).map_err(|e| e.to_string())?.is_some();
            ensure(got == emso_oracle(&a0, &phi, term), || format!("instance {k}: {term} {phi:?}"))?;
            checks += 1;
        }
    }
    Ok(format!("100 instances, {checks} membership checks"))
}

fn main() -> ExitCode {
    let criteria: [fn() -> Outcome; 10] = [
        criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
        criterion_6, criterion_7, criterion_8, criterion_9, criterion_10,
    ];
    let mut failed = BTreeSet::new();
    for (k, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = c();
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {detail} [{took:.2?}]", k + 1),
            Err(why) => {
                println!("criterion {}: FAIL {why} [{took:.2?}]", k + 1);
                failed.insert(k + 1);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
