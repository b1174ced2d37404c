use std::fs;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use tabg::automaton::{is_accepting_run, validate_run};
use tabg::emptiness::{emptiness_with_budget, Mode, Verdict, DEFAULT_TERM_BUDGET};
use tabg::emso::{compile_query, parse_query, split_symbol, AnnotatedTa};
use tabg::format::{parse_automaton, parse_run, parse_theory_file, write_automaton, write_run};
use tabg::hedge::{curry, hag_to_tag, parse_hedge_automaton, uncurry};
use tabg::membership::{member_with_budget, DEFAULT_SEARCH_BUDGET};
use tabg::ops::{intersect, union};
use tabg::pumping::{apply_pump, compute_bound, find_pump, index_for};
use tabg::reduction::{to_positive_conjunctive_with, Limits, DEFAULT_COUNTING_CAP, DEFAULT_STEP_CAP};
use tabg::theory::DEFAULT_NODE_BUDGET;
use tabg::{fixtures, Automaton, CongruenceIndex, Error, Run, Term};

mod report;

#[derive(Parser)]
#[command(name = "tabg", version, about = "Tree automata with global and brother constraints")]
struct Cli {
    /// Print results as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a term is accepted.
    Member {
        automaton: String,
        /// A term file or a term literal.
        term: String,
        #[arg(long, default_value_t = DEFAULT_SEARCH_BUDGET)]
        budget: usize,
    },
    /// Check that a run file is an accepting run.
    CheckRun { automaton: String, run: String },
    /// Emptiness, bounded by height or certified by the pumping bound.
    Empty {
        automaton: String,
        #[arg(long, default_value_t = 4, conflicts_with = "certified")]
        max_height: usize,
        #[arg(long)]
        certified: bool,
        /// Tree nodes explored while computing the pumping bound.
        #[arg(long, default_value_t = 2_000_000)]
        bound_budget: usize,
        #[arg(long, default_value_t = DEFAULT_TERM_BUDGET)]
        term_budget: usize,
    },
    /// Reduce to a positive conjunctive global constraint.
    Reduce {
        automaton: String,
        #[arg(long, default_value_t = tabg::constraint::DEFAULT_DNF_CAP)]
        dnf_cap: usize,
        #[arg(long, default_value_t = DEFAULT_COUNTING_CAP)]
        counting_cap: usize,
        #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
        step_cap: usize,
        /// Print the lemma applications to stderr.
        #[arg(long)]
        trace: bool,
    },
    /// Find a global pumping of a run and apply it.
    Pump { automaton: String, run: String },
    /// Strata of a run and their statistics.
    Stats { automaton: String, run: String },
    /// Pumping bound B(a, n).
    Bound {
        arity: usize,
        states: usize,
        #[arg(long, default_value_t = 2_000_000)]
        budget: usize,
    },
    /// Union of two automata with positive conjunctive constraints.
    Union { first: String, second: String },
    /// Intersection of two automata.
    Intersect { first: String, second: String },
    /// Curry an unranked term, or uncurry a binary one.
    Curry {
        term: String,
        #[arg(long)]
        inverse: bool,
    },
    /// Translate a hedge automaton to a ranked automaton over curried terms.
    Hag2tag { hedge_automaton: String },
    /// Compile an annotated automaton and a query over X1..Xn.
    EmsoCompile {
        annotated: String,
        /// A constraint literal or a file containing one.
        constraint: String,
    },
    /// Decide equality of two terms modulo the theory of a file.
    Eqmod {
        theory: String,
        s: String,
        t: String,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        budget: usize,
    },
    /// Print a bundled fixture, or list them.
    Fixture { name: Option<String> },
}

/// Exit codes.
const POSITIVE: u8 = 0;
const NEGATIVE: u8 = 1;
const INCONCLUSIVE: u8 = 2;
const INPUT_ERROR: u8 = 3;
const BUDGET_ERROR: u8 = 4;

enum Failure {
    Input(String),
    Budget(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Budget { .. } => Failure::Budget(e.to_string()),
            e => Failure::Input(e.to_string()),
        }
    }
}

struct Outcome {
    code: u8,
    text: String,
    json: Value,
}

impl Outcome {
    fn new(code: u8, text: impl Into<String>, json: Value) -> Self {
        Outcome { code, text: text.into(), json }
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn read(path: &str) -> Res<String> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{path}: {e}")))
}

/// File contents when `arg` names a file, otherwise `arg` itself.
fn file_or_literal(arg: &str) -> Res<String> {
    if Path::new(arg).is_file() {
        read(arg)
    } else {
        Ok(arg.to_string())
    }
}

fn load(path: &str) -> Res<Automaton> {
    parse_automaton(&read(path)?).map_err(|e| Failure::Input(format!("{path}: {e}")))
}

fn term_arg(arg: &str) -> Res<Term> {
    Ok(Term::parse(file_or_literal(arg)?.trim())?)
}

fn run_json(run: &Run) -> Value {
    Value::Array(run.rule_map().into_iter().map(|(p, r)| json!({"position": p.to_string(), "rule": r})).collect())
}

fn automaton_outcome(kind: &str, a: &Automaton) -> Outcome {
    let text = write_automaton(a);
    Outcome::new(POSITIVE, text.clone(), json!({"command": kind, "automaton": text}))
}

fn dispatch(cmd: Command) -> Res<Outcome> {
    Ok(match cmd {
        Command::Member { automaton, term, budget } => {
            let a = load(&automaton)?;
            let t = term_arg(&term)?;
            t.check(&a.signature)?;
            match member_with_budget(&a, &t, budget)? {
                Some(run) => Outcome::new(
                    POSITIVE,
                    format!("accepted\n{}", write_run(&run)),
                    json!({"command": "member", "accepted": true, "run": run_json(&run)}),
                ),
                None => Outcome::new(NEGATIVE, "rejected\n", json!({"command": "member", "accepted": false})),
            }
        }
        Command::CheckRun { automaton, run } => {
            let a = load(&automaton)?;
            let r = parse_run(&read(&run)?, &a)?;
            let violations: Vec<String> = validate_run(&a, &r)?.iter().map(|v| v.to_string()).collect();
            let accepting = violations.is_empty() && is_accepting_run(&a, &r)?;
            let mut text = String::new();
            for v in &violations {
                text += &format!("violation {v}\n");
            }
            if violations.is_empty() && !accepting {
                text += "root state is not final\n";
            }
            text += if accepting { "valid\n" } else { "invalid\n" };
            Outcome::new(
                if accepting { POSITIVE } else { NEGATIVE },
                text,
                json!({"command": "check-run", "valid": accepting, "violations": violations}),
            )
        }
        Command::Empty { automaton, max_height, certified, bound_budget, term_budget } => {
            let a = load(&automaton)?;
            let mode = if certified { Mode::Certified { budget: bound_budget } } else { Mode::Bounded { max_height } };
            let v = emptiness_with_budget(&a, mode, term_budget)?;
            let (code, j) = match &v {
                Verdict::Empty => (POSITIVE, json!({"verdict": "EMPTY"})),
                Verdict::NonEmpty(run) => (
                    NEGATIVE,
                    json!({"verdict": "NONEMPTY", "witness": run.term().to_string(), "run": run_json(run)}),
                ),
                Verdict::EmptyUpTo(h) => (INCONCLUSIVE, json!({"verdict": "EMPTY_UP_TO", "height": h})),
            };
            let mut j = j;
            j["command"] = json!("empty");
            Outcome::new(code, format!("{v}\n"), j)
        }
        Command::Reduce { automaton, dnf_cap, counting_cap, step_cap, trace } => {
            let a = load(&automaton)?;
            let limits = Limits { dnf_conjuncts: dnf_cap, counting_states: counting_cap, steps: step_cap };
            let red = to_positive_conjunctive_with(&a, limits)?;
            if trace {
                for s in &red.trace {
                    eprintln!("{s}");
                }
            }
            let text = write_automaton(&red.automaton);
            let steps: Vec<Value> = red
                .trace
                .iter()
                .map(|s| {
                    json!({
                        "lemma": s.lemma,
                        "literal": s.literal,
                        "before": [s.before.0, s.before.1],
                        "after": s.after.iter().map(|m| json!([m.0, m.1])).collect::<Vec<_>>(),
                    })
                })
                .collect();
            Outcome::new(POSITIVE, text.clone(), json!({"command": "reduce", "automaton": text, "trace": steps}))
        }
        Command::Pump { automaton, run } => {
            let a = load(&automaton)?;
            let r = parse_run(&read(&run)?, &a)?;
            let index = index_for(&a, &r)?;
            match find_pump(&a, &r, &index)? {
                None => Outcome::new(NEGATIVE, "no pumping\n", json!({"command": "pump", "found": false})),
                Some(plan) => {
                    let out = apply_pump(&a, &r, &plan, &index)?;
                    let injection: Vec<Value> = plan
                        .injection
                        .iter()
                        .map(|(p, q)| json!({"from": p.to_string(), "to": q.to_string()}))
                        .collect();
                    Outcome::new(
                        POSITIVE,
                        format!("{plan}\nterm {}\n{}", out.term(), write_run(&out)),
                        json!({
                            "command": "pump", "found": true, "i": plan.i, "j": plan.j,
                            "injection": injection, "term": out.term().to_string(),
                            "height": out.height(), "run": run_json(&out),
                        }),
                    )
                }
            }
        }
        Command::Stats { automaton, run } => {
            let a = load(&automaton)?;
            let r = parse_run(&read(&run)?, &a)?;
            let (text, j) = report::stats(&a, &r)?;
            Outcome::new(POSITIVE, text, j)
        }
        Command::Bound { arity, states, budget } => {
            let b = compute_bound(arity, states, budget)?;
            Outcome::new(POSITIVE, format!("{b}\n"), json!({"command": "bound", "a": arity, "n": states, "bound": b}))
        }
        Command::Union { first, second } => automaton_outcome("union", &union(&load(&first)?, &load(&second)?)?),
        Command::Intersect { first, second } => {
            automaton_outcome("intersect", &intersect(&load(&first)?, &load(&second)?)?)
        }
        Command::Curry { term, inverse } => {
            let t = term_arg(&term)?;
            let out = if inverse { uncurry(&t)? } else { curry(&t) };
            Outcome::new(POSITIVE, format!("{out}\n"), json!({"command": "curry", "term": out.to_string()}))
        }
        Command::Hag2tag { hedge_automaton } => {
            let h = parse_hedge_automaton(&read(&hedge_automaton)?)?;
            automaton_outcome("hag2tag", &hag_to_tag(&h)?)
        }
        Command::EmsoCompile { annotated, constraint } => {
            let a = load(&annotated)?;
            let n = a.signature.iter().next().map(|(s, _)| split_symbol(s).1.len()).unwrap_or(0);
            let a0 = AnnotatedTa::new(a, n)?;
            let phi = parse_query(file_or_literal(&constraint)?.trim(), n)?;
            automaton_outcome("emso-compile", &compile_query(&a0, &phi)?)
        }
        Command::Eqmod { theory, s, t, budget } => {
            let (sig, e) = parse_theory_file(&read(&theory)?)?;
            let (s, t) = (term_arg(&s)?, term_arg(&t)?);
            s.check(&sig)?;
            t.check(&sig)?;
            let index = CongruenceIndex::build_with_budget(&e, &[&s, &t], budget)?;
            let equal = index.same_class(&s, &t).expect("both terms are indexed");
            Outcome::new(
                if equal { POSITIVE } else { NEGATIVE },
                if equal { "equal\n" } else { "different\n" },
                json!({"command": "eqmod", "equal": equal}),
            )
        }
        Command::Fixture { name: None } => {
            let names: Vec<&str> = fixtures::ALL.iter().map(|f| f.1).collect();
            Outcome::new(POSITIVE, names.join("\n") + "\n", json!({"command": "fixture", "fixtures": names}))
        }
        Command::Fixture { name: Some(name) } => {
            let text = fixtures::get(&name).ok_or_else(|| Failure::Input(format!("no fixture {name}")))?;
            Outcome::new(POSITIVE, text, json!({"command": "fixture", "name": name, "text": text}))
        }
    })
}

/// The signature declared by the `sig` lines of a theory file.
fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { INPUT_ERROR } else { POSITIVE });
        }
    };
    let json_out = cli.json;
    match dispatch(cli.command) {
        Ok(o) => {
            if json_out {
                println!("{}", o.json);
            } else {
                print!("{}", o.text);
            }
            ExitCode::from(o.code)
        }
        Err(f) => {
            let (code, kind, msg) = match f {
                Failure::Input(m) => (INPUT_ERROR, "input", m),
                Failure::Budget(m) => (BUDGET_ERROR, "budget", m),
            };
            if json_out {
                println!("{}", json!({"error": kind, "message": msg}));
            } else {
                eprintln!("error: {msg}");
            }
            ExitCode::from(code)
        }
    }
}
