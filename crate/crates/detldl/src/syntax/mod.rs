//! Terms, programs, the surface parser, the printer and the rewrites that
//! lower surface syntax to the core operator set.

mod bind;
mod parse;
mod print;
mod rewrite;

pub use bind::{bind, BoundProgram};
pub use parse::{parse_program, parse_term};
pub use print::print_term;
pub use rewrite::{collect_registers, desugar, push_converse, resolve};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SyntaxError {
    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

impl SyntaxError {
    pub(crate) fn at(line: usize, col: usize, msg: impl Into<String>) -> SyntaxError {
        SyntaxError::Parse { line, col, msg: msg.into() }
    }
}

/// Algebraic terms. The first block is the core the evaluator understands,
/// including the trace tests which stay primitive; the second block is
/// surface sugar removed by [`desugar`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    // core
    Id,
    Eps(String),
    PropTest(String),
    Compose(Box<Term>, Box<Term>),
    PrefUnion(Box<Term>, Box<Term>),
    AntiDomain(Box<Term>),
    AntiImage(Box<Term>),
    SelectEq(String, String, Box<Term>),
    MaxIterate(Box<Term>),
    Converse(Box<Term>),
    Fresh(String, Vec<String>),
    Exists(Box<Term>),
    Globally(Box<Term>),
    BackExists(Box<Term>),
    BackGlobally(Box<Term>),
    // sugar
    Ref(String),
    Skip,
    Fail,
    Last,
    AnyM,
    Test(Box<Term>),
    Dom(Box<Term>),
    SelectNeq(String, String, Box<Term>),
    Power(Box<Term>, usize),
    IfThenElse(Box<Term>, Box<Term>, Box<Term>),
    While(Box<Term>, Box<Term>),
    RepeatUntil(Box<Term>, Box<Term>),
    DiamondRight(Box<Term>, Box<Term>),
    DiamondLeft(Box<Term>, Box<Term>),
    BoxRight(Box<Term>, Box<Term>),
    BoxLeft(Box<Term>, Box<Term>),
}

impl Term {
    pub fn compose(a: Term, b: Term) -> Term {
        Term::Compose(Box::new(a), Box::new(b))
    }

    pub fn is_core(&self) -> bool {
        use Term::*;
        match self {
            Id | Eps(_) | PropTest(_) | Fresh(..) => true,
            Compose(a, b) | PrefUnion(a, b) => a.is_core() && b.is_core(),
            AntiDomain(a) | AntiImage(a) | MaxIterate(a) | Converse(a) | Exists(a)
            | Globally(a) | BackExists(a) | BackGlobally(a) => a.is_core(),
            SelectEq(_, _, a) => a.is_core(),
            _ => false,
        }
    }
}

/// Unresolved module declaration, exactly as written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleDecl {
    pub name: String,
    pub is_prop: bool,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub rules: Vec<RuleDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleDecl {
    pub head: Option<(String, String)>,
    pub body: Vec<(String, Vec<String>)>,
}

/// A parsed program file: module declarations in order, named abbreviations
/// and the main term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub modules: Vec<ModuleDecl>,
    pub lets: Vec<(String, Term)>,
    pub main: Term,
}

impl Program {
    /// Main term with abbreviations inlined and bare names resolved to
    /// module references.
    pub fn resolved_main(&self) -> Result<Term, SyntaxError> {
        resolve(&self.main, self)
    }

    /// Fully lowered main term: resolved, desugared, converse pushed to
    /// atoms.
    pub fn core_main(&self) -> Result<Term, SyntaxError> {
        let actions: Vec<String> = self
            .modules
            .iter()
            .filter(|m| !m.is_prop)
            .map(|m| m.name.clone())
            .collect();
        push_converse(&desugar(&self.resolved_main()?, &actions))
    }
}
