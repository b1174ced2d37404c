//! Tree automata with global equality and disequality constraints, brother
//! constraints, counting constraints, and flat equational theories.

pub mod automaton;
pub mod constraint;
pub mod emptiness;
pub mod emso;
pub mod error;
pub mod fixtures;
pub mod format;
pub mod hedge;
pub mod membership;
pub mod ops;
pub mod pumping;
pub mod reduction;
pub mod syntax;
pub mod term;
pub mod theory;

pub use automaton::{validate_run, Automaton, BrotherAtom, Classification, Rule, Run, Violation};
pub use constraint::{Atom, Cmp, Constraint, CountKind, LinearAtom, Measure, StateId};
pub use error::{Error, Result};
pub use term::{Position, Signature, Symbol, Term};
pub use theory::{eq_modulo, ClassId, CongruenceIndex, FlatTheory};
