//! CP-logic interpreter and actual-causation engine.

pub mod battery;
pub mod causation;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod kernel;
pub mod neuron;
pub mod parser;
pub mod reduction;
pub mod semantics;
pub mod story;
pub mod transform;

pub use error::{Error, Result, SourceDiagnostic};
pub use kernel::{head_remainder, Atom, AtomSet, CpLaw, CpTheory, Disjunct, LawId, Literal, Outcome, Rational};
