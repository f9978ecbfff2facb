//! An interpreter, witness-search engine and path-semantics checker for a
//! deterministic dynamic logic over finite traces of relational structures.
//!
//! States are finite relational structures whose mutable part consists of
//! registers (unary singleton relations); atomic steps are singleton-monadic
//! conjunctive-query transductions under the law of inertia; programs are
//! algebraic terms over composition, preferential union, anti-domain and
//! anti-image negations, right selection, maximum iterate and converse, with
//! a history-dependent choice operator resolving atomic non-determinism.
//!
//! The crate is organised as:
//!
//! * [`model`] — structures, vocabularies, traces, structure files;
//! * [`syntax`] — terms, programs, parser, printer, desugarer;
//! * [`atomic`] — candidate successors of one atomic step;
//! * [`eval`] — the derivation engine under a fixed choice strategy;
//! * [`search`] — backtracking over choice points, certificates;
//! * [`pathsem`] — the independent path-semantics checker;
//! * [`stdlib`] — example programs, input generators, native oracles.

pub mod atomic;
pub mod eval;
pub mod model;
pub mod pathsem;
pub mod search;
pub mod stdlib;
pub mod syntax;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Syntax(#[from] syntax::SyntaxError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Search(#[from] search::SearchError),
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Parses and binds a program file against a structure file.
pub fn load(
    program_text: &str,
    structure_text: &str,
) -> Result<syntax::BoundProgram, Error> {
    let program = syntax::parse_program(program_text)?;
    let st = model::parse_structure_text(structure_text)?;
    syntax::bind(&program, &st)
}
