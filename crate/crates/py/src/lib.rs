//! Python bindings: automata, membership, emptiness, reduction, pumping,
//! currying, flat theories and the bundled fixtures.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ::tabg as core;
use core::automaton::{is_accepting_run, validate_run};
use core::emptiness::{emptiness_with_budget, Mode, Verdict, DEFAULT_TERM_BUDGET};
use core::emso::{compile_query, parse_query, AnnotatedTa};
use core::format::{parse_automaton, parse_run, parse_theory_file, write_automaton, write_run};
use core::hedge::{curry as curry_term, hag_to_tag as hag_to_tag_core, parse_hedge_automaton, uncurry as uncurry_term};
use core::membership::member;
use core::ops;
use core::pumping::{apply_pump, compute_bound as bound, find_pump, index_for};
use core::reduction::to_positive_conjunctive;
use core::{fixtures, Term};

create_exception!(tabg, TabgError, PyValueError, "Malformed input or unsupported operation.");
create_exception!(tabg, BudgetError, TabgError, "A resource budget was exhausted.");

fn err(e: core::Error) -> PyErr {
    if e.is_budget() {
        BudgetError::new_err(e.to_string())
    } else {
        TabgError::new_err(e.to_string())
    }
}

fn term(src: &str) -> PyResult<Term> {
    Term::parse(src.trim()).map_err(err)
}

/// A tree automaton with brother and global constraints.
#[pyclass(name = "Automaton", module = "tabg", frozen)]
pub struct PyAutomaton {
    inner: core::Automaton,
}

impl From<core::Automaton> for PyAutomaton {
    fn from(inner: core::Automaton) -> Self {
        PyAutomaton { inner }
    }
}

#[pymethods]
impl PyAutomaton {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(parse_automaton(text).map_err(err)?.into())
    }

    #[staticmethod]
    fn fixture(name: &str) -> PyResult<Self> {
        let text = fixtures::get(name).ok_or_else(|| TabgError::new_err(format!("no fixture {name}")))?;
        Self::new(text)
    }

    fn to_text(&self) -> String {
        write_automaton(&self.inner)
    }

    fn __str__(&self) -> String {
        self.to_text()
    }

    fn __repr__(&self) -> String {
        format!("<Automaton: {} states, {} rules>", self.inner.n_states(), self.inner.rules.len())
    }

    #[getter]
    fn states(&self) -> Vec<String> {
        self.inner.states().to_vec()
    }

    #[getter]
    fn finals(&self) -> Vec<String> {
        self.inner.finals.iter().map(|&q| self.inner.state_name(q).to_string()).collect()
    }

    #[getter]
    fn is_positive_conjunctive(&self) -> bool {
        self.inner.global.is_positive_conjunctive()
    }

    /// An accepting run on `term` in run-file format, or `None`.
    fn member(&self, term_src: &str) -> PyResult<Option<String>> {
        Ok(member(&self.inner, &term(term_src)?).map_err(err)?.map(|r| write_run(&r)))
    }

    fn accepts(&self, term_src: &str) -> PyResult<bool> {
        Ok(member(&self.inner, &term(term_src)?).map_err(err)?.is_some())
    }

    /// Violations of a run file; empty when the run is valid and accepting.
    fn check_run(&self, run: &str) -> PyResult<Vec<String>> {
        let r = parse_run(run, &self.inner).map_err(err)?;
        let mut out: Vec<String> = validate_run(&self.inner, &r).map_err(err)?.iter().map(|v| v.to_string()).collect();
        if out.is_empty() && !is_accepting_run(&self.inner, &r).map_err(err)? {
            out.push("root state is not final".into());
        }
        Ok(out)
    }

    /// `("EMPTY", None)`, `("NONEMPTY", witness)` or `("EMPTY_UP_TO", None)`.
    #[pyo3(signature = (max_height = 4, certified = false, bound_budget = 2_000_000, term_budget = DEFAULT_TERM_BUDGET))]
    fn emptiness(
        &self,
        max_height: usize,
        certified: bool,
        bound_budget: usize,
        term_budget: usize,
    ) -> PyResult<(&'static str, Option<String>)> {
        let mode = if certified { Mode::Certified { budget: bound_budget } } else { Mode::Bounded { max_height } };
        Ok(match emptiness_with_budget(&self.inner, mode, term_budget).map_err(err)? {
            Verdict::Empty => ("EMPTY", None),
            Verdict::NonEmpty(run) => ("NONEMPTY", Some(run.term().to_string())),
            Verdict::EmptyUpTo(_) => ("EMPTY_UP_TO", None),
        })
    }

    /// An equivalent automaton whose global constraint only uses `~` and `!~`.
    fn reduce(&self) -> PyResult<Self> {
        Ok(to_positive_conjunctive(&self.inner).map_err(err)?.automaton.into())
    }

    fn union(&self, other: &Self) -> PyResult<Self> {
        Ok(ops::union(&self.inner, &other.inner).map_err(err)?.into())
    }

    fn intersect(&self, other: &Self) -> PyResult<Self> {
        Ok(ops::intersect(&self.inner, &other.inner).map_err(err)?.into())
    }

    /// Pumps a run down once: `(plan, pumped run)`, or `None` if no pair of
    /// strata is comparable.
    fn pump(&self, run: &str) -> PyResult<Option<(String, String)>> {
        let r = parse_run(run, &self.inner).map_err(err)?;
        let index = index_for(&self.inner, &r).map_err(err)?;
        let Some(plan) = find_pump(&self.inner, &r, &index).map_err(err)? else { return Ok(None) };
        let out = apply_pump(&self.inner, &r, &plan, &index).map_err(err)?;
        Ok(Some((plan.to_string(), write_run(&out))))
    }

    /// Compiles an EMSO constraint over the `n` annotation bits of this
    /// automaton's symbols.
    fn emso_compile(&self, n: usize, query: &str) -> PyResult<Self> {
        let a0 = AnnotatedTa::new(self.inner.clone(), n).map_err(err)?;
        let phi = parse_query(query, n).map_err(err)?;
        Ok(compile_query(&a0, &phi).map_err(err)?.into())
    }
}

#[pyfunction]
fn curry(term_src: &str) -> PyResult<String> {
    Ok(curry_term(&term(term_src)?).to_string())
}

#[pyfunction]
fn uncurry(term_src: &str) -> PyResult<String> {
    Ok(uncurry_term(&term(term_src)?).map_err(err)?.to_string())
}

/// Translates a hedge automaton file to an automaton over curried terms.
#[pyfunction]
fn hag_to_tag(text: &str) -> PyResult<PyAutomaton> {
    let h = parse_hedge_automaton(text).map_err(err)?;
    Ok(hag_to_tag_core(&h).map_err(err)?.into())
}

/// Decides `s =E t` for a theory file with `sig`, `vars` and `eq` lines.
#[pyfunction]
fn eq_modulo(theory: &str, s: &str, t: &str) -> PyResult<bool> {
    let (sig, e) = parse_theory_file(theory).map_err(err)?;
    let (s, t) = (term(s)?, term(t)?);
    s.check(&sig).map_err(err)?;
    t.check(&sig).map_err(err)?;
    core::eq_modulo(&e, &s, &t).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (arity, states, budget = 2_000_000))]
fn compute_bound(arity: usize, states: usize, budget: usize) -> PyResult<usize> {
    bound(arity, states, budget).map_err(err)
}

#[pyfunction]
fn fixture(name: &str) -> PyResult<&'static str> {
    fixtures::get(name).ok_or_else(|| TabgError::new_err(format!("no fixture {name}")))
}

#[pyfunction]
fn fixture_names() -> Vec<&'static str> {
    fixtures::ALL.iter().map(|f| f.0).collect()
}

#[pymodule]
fn tabg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TabgError", m.py().get_type::<TabgError>())?;
    m.add("BudgetError", m.py().get_type::<BudgetError>())?;
    m.add_class::<PyAutomaton>()?;
    m.add_function(wrap_pyfunction!(curry, m)?)?;
    m.add_function(wrap_pyfunction!(uncurry, m)?)?;
    m.add_function(wrap_pyfunction!(hag_to_tag, m)?)?;
    m.add_function(wrap_pyfunction!(eq_modulo, m)?)?;
    m.add_function(wrap_pyfunction!(compute_bound, m)?)?;
    m.add_function(wrap_pyfunction!(fixture, m)?)?;
    m.add_function(wrap_pyfunction!(fixture_names, m)?)?;
    Ok(())
}
