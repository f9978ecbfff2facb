//! Independent path-semantics checker: membership of a recorded subword in
//! the language of a term, and satisfaction of state formulae at a position.
//!
//! This is the cross-validation oracle for the derivation engine. It never
//! extends a trace: all quantifiers range over recorded positions only, and
//! negation clauses ask for the absence of a matching subword on the path
//! rather than for underivability. Atomic membership is a pair check against
//! the module relation; step labels play no role here.

use std::collections::HashMap;

use thiserror::Error;

use crate::atomic;
use crate::model::{ModuleKind, ModuleVocabulary, Trace};
use crate::syntax::{push_converse, Term};

#[derive(Debug, Error)]
pub enum PathError {
    #[error("positions ({i}, {j}) out of range for a trace of length {len}")]
    Index { i: usize, j: usize, len: usize },
    #[error("{0}")]
    Structural(String),
}

fn structural(msg: impl Into<String>) -> PathError {
    PathError::Structural(msg.into())
}

/// Decides `p(i, j) ∈ L(t)` on the recorded trace. The term is first
/// normalised so converse sits only on atomic steps.
pub fn path_in_language(
    mv: &ModuleVocabulary,
    trace: &Trace,
    i: usize,
    j: usize,
    t: &Term,
) -> Result<bool, PathError> {
    let len = trace.states.len();
    if i > j || j >= len {
        return Err(PathError::Index { i, j, len });
    }
    let term = push_converse(t).map_err(|e| structural(e.to_string()))?;
    let mut checker = Checker { mv, trace, memo: HashMap::new() };
    checker.lang(i, j, &term)
}

/// Decides `p, i ⊨ φ` for a state formula at a recorded position.
pub fn state_satisfies(
    mv: &ModuleVocabulary,
    trace: &Trace,
    i: usize,
    phi: &StateFormula,
) -> Result<bool, PathError> {
    let len = trace.states.len();
    if i >= len {
        return Err(PathError::Index { i, j: i, len });
    }
    let mut checker = Checker { mv, trace, memo: HashMap::new() };
    checker.state(i, phi)
}

/// State formulae of the two-sorted syntax: truth, propositions, register
/// equality, negation and the four directed modalities, plus the derived
/// last-state formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateFormula {
    True,
    Last,
    Prop(String),
    RegEq(String, String),
    Not(Box<StateFormula>),
    DiamondRight(Term, Box<StateFormula>),
    BoxRight(Term, Box<StateFormula>),
    DiamondLeft(Term, Box<StateFormula>),
    BoxLeft(Term, Box<StateFormula>),
}

impl StateFormula {
    /// The term the formula abbreviates, for cross-checks against the
    /// derivation engine (still sugared; desugar before evaluating).
    pub fn to_term(&self) -> Term {
        use StateFormula as F;
        match self {
            F::True => Term::Id,
            F::Last => Term::Last,
            F::Prop(m) => Term::PropTest(m.clone()),
            F::RegEq(x, y) => Term::SelectEq(x.clone(), y.clone(), Box::new(Term::Id)),
            F::Not(f) => Term::AntiDomain(Box::new(f.to_term())),
            F::DiamondRight(a, f) => {
                Term::DiamondRight(Box::new(a.clone()), Box::new(f.to_term()))
            }
            F::BoxRight(a, f) => Term::BoxRight(Box::new(a.clone()), Box::new(f.to_term())),
            F::DiamondLeft(a, f) => {
                Term::DiamondLeft(Box::new(a.clone()), Box::new(f.to_term()))
            }
            F::BoxLeft(a, f) => Term::BoxLeft(Box::new(a.clone()), Box::new(f.to_term())),
        }
    }
}

struct Checker<'a> {
    mv: &'a ModuleVocabulary,
    trace: &'a Trace,
    memo: HashMap<(usize, usize, usize), bool>,
}

impl<'a> Checker<'a> {
    fn last(&self) -> usize {
        self.trace.states.len() - 1
    }

    fn lang(&mut self, i: usize, j: usize, t: &Term) -> Result<bool, PathError> {
        let key = (i, j, t as *const Term as usize);
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let v = self.lang_uncached(i, j, t)?;
        self.memo.insert(key, v);
        Ok(v)
    }

    fn lang_uncached(&mut self, i: usize, j: usize, t: &Term) -> Result<bool, PathError> {
        use Term::*;
        Ok(match t {
            Id => j == i,
            Eps(name) => {
                let m = self.action(name)?;
                j == i + 1
                    && atomic::in_relation(m, &self.trace.states[i], &self.trace.states[j])
            }
            PropTest(name) => {
                let m = self.proposition(name)?;
                j == i && atomic::check_proposition(m, &self.trace.states[i])
            }
            Converse(inner) => match &**inner {
                Eps(name) => {
                    let m = self.action(name)?;
                    j == i + 1
                        && atomic::in_relation(m, &self.trace.states[j], &self.trace.states[i])
                }
                other => {
                    return Err(structural(format!(
                        "converse not pushed to an atomic step: {other:?}"
                    )))
                }
            },
            AntiDomain(a) => j == i && !self.derivable_from(i, a)?,
            AntiImage(a) => j == i && !self.arrives_at(i, a)?,
            Compose(a, b) => {
                let mut found = false;
                for l in i..=j {
                    if self.lang(i, l, a)? && self.lang(l, j, b)? {
                        found = true;
                        break;
                    }
                }
                found
            }
            PrefUnion(a, b) => {
                if self.derivable_from(i, a)? {
                    self.lang(i, j, a)?
                } else if self.derivable_from(i, b)? {
                    self.lang(i, j, b)?
                } else {
                    false
                }
            }
            MaxIterate(a) => {
                if j == i && !self.derivable_from(i, a)? {
                    true
                } else {
                    let mut found = false;
                    for l in (i + 1)..=j {
                        if self.lang(i, l, a)? && self.lang(l, j, t)? {
                            found = true;
                            break;
                        }
                    }
                    found
                }
            }
            SelectEq(x, y, a) => {
                self.lang(i, j, a)? && {
                    let s = &self.trace.states[j];
                    let xv = s
                        .reg_by_name(x)
                        .ok_or_else(|| structural(format!("unknown register `{x}`")))?;
                    let yv = s
                        .reg_by_name(y)
                        .ok_or_else(|| structural(format!("unknown register `{y}`")))?;
                    xv == yv
                }
            }
            Fresh(x, ys) => j == i && self.fresh_at(i, x, ys)?,
            BackGlobally(f) => {
                j == i && {
                    let mut all = true;
                    for k in 0..=i {
                        if !self.state_test(k, f)? {
                            all = false;
                            break;
                        }
                    }
                    all
                }
            }
            BackExists(f) => {
                j == i && {
                    let mut any = false;
                    for k in 0..=i {
                        if self.state_test(k, f)? {
                            any = true;
                            break;
                        }
                    }
                    any
                }
            }
            Globally(f) => {
                j == i && {
                    let mut all = true;
                    for k in i..=self.last() {
                        if !self.state_test(k, f)? {
                            all = false;
                            break;
                        }
                    }
                    all
                }
            }
            Exists(f) => {
                j == i && {
                    let mut any = false;
                    for k in i..=self.last() {
                        if self.state_test(k, f)? {
                            any = true;
                            break;
                        }
                    }
                    any
                }
            }
            other => return Err(structural(format!("term is not in core form: {other:?}"))),
        })
    }

    /// `∃k ≥ i` on the path with `p(i,k) ∈ L(a)` — the path reading of the
    /// domain of a term.
    fn derivable_from(&mut self, i: usize, a: &Term) -> Result<bool, PathError> {
        for k in i..=self.last() {
            if self.lang(i, k, a)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// `∃l ≤ i` on the path with `p(l,i) ∈ L(a)` — an incoming transition.
    fn arrives_at(&mut self, i: usize, a: &Term) -> Result<bool, PathError> {
        for l in 0..=i {
            if self.lang(l, i, a)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// A term used as a state test: some recorded match starting here.
    fn state_test(&mut self, i: usize, f: &Term) -> Result<bool, PathError> {
        self.derivable_from(i, f)
    }

    fn fresh_at(&self, at: usize, x: &str, ys: &[String]) -> Result<bool, PathError> {
        let tr = self.trace;
        let vocab = &tr.states[0].base.vocab;
        let xv = tr.states[at]
            .reg_by_name(x)
            .ok_or_else(|| structural(format!("unknown register `{x}`")))?;
        let mut watched = Vec::with_capacity(ys.len());
        for y in ys {
            watched.push(
                vocab.reg_id(y).ok_or_else(|| structural(format!("unknown register `{y}`")))?,
            );
        }
        for j in 1..=at {
            let module = self
                .mv
                .get(&tr.steps[j - 1])
                .ok_or_else(|| structural(format!("unknown step label `{}`", tr.steps[j - 1])))?;
            for &y in &watched {
                if module.outputs.contains(&y) && tr.states[j].reg(y) == xv {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn state(&mut self, i: usize, phi: &StateFormula) -> Result<bool, PathError> {
        use StateFormula as F;
        Ok(match phi {
            F::True => true,
            F::Last => i == self.last(),
            F::Prop(name) => {
                let m = self.proposition(name)?;
                atomic::check_proposition(m, &self.trace.states[i])
            }
            F::RegEq(x, y) => {
                let s = &self.trace.states[i];
                let xv = s
                    .reg_by_name(x)
                    .ok_or_else(|| structural(format!("unknown register `{x}`")))?;
                let yv = s
                    .reg_by_name(y)
                    .ok_or_else(|| structural(format!("unknown register `{y}`")))?;
                xv == yv
            }
            F::Not(f) => !self.state(i, f)?,
            F::DiamondRight(a, f) => {
                let a = push_converse(a).map_err(|e| structural(e.to_string()))?;
                let mut any = false;
                for j in i..=self.last() {
                    if self.lang(i, j, &a)? && self.state(j, f)? {
                        any = true;
                        break;
                    }
                }
                any
            }
            F::BoxRight(a, f) => {
                let a = push_converse(a).map_err(|e| structural(e.to_string()))?;
                let mut all = true;
                for j in i..=self.last() {
                    if self.lang(i, j, &a)? && !self.state(j, f)? {
                        all = false;
                        break;
                    }
                }
                all
            }
            F::DiamondLeft(a, f) => {
                let a = push_converse(a).map_err(|e| structural(e.to_string()))?;
                let mut any = false;
                for j in 0..=i {
                    if self.lang(j, i, &a)? && self.state(j, f)? {
                        any = true;
                        break;
                    }
                }
                any
            }
            F::BoxLeft(a, f) => {
                let a = push_converse(a).map_err(|e| structural(e.to_string()))?;
                let mut all = true;
                for j in 0..=i {
                    if self.lang(j, i, &a)? && !self.state(j, f)? {
                        all = false;
                        break;
                    }
                }
                all
            }
        })
    }

    fn action(&self, name: &str) -> Result<&'a crate::model::ModuleDef, PathError> {
        match self.mv.get(name) {
            Some(m) if m.kind == ModuleKind::Action => Ok(m),
            Some(_) => Err(structural(format!("`{name}` is not an action module"))),
            None => Err(structural(format!("unknown module `{name}`"))),
        }
    }

    fn proposition(&self, name: &str) -> Result<&'a crate::model::ModuleDef, PathError> {
        match self.mv.get(name) {
            Some(m) if m.kind == ModuleKind::Proposition => Ok(m),
            Some(_) => Err(structural(format!("`{name}` is not a proposition"))),
            None => Err(structural(format!("unknown module `{name}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::tests::{world, EVEN};
    use crate::eval::{evaluate, ChoiceStrategy, EvalConfig};
    use crate::syntax::parse_term;

    #[test]
    fn atomic_membership_is_a_pair_check() {
        let w = world(
            "module GuessP(; P) { P(x) <- . }\nmain: eps GuessP",
            "domain 2\n",
        );
        let out = evaluate(
            &w.modules,
            &w.core,
            &w.initial,
            &ChoiceStrategy::First,
            &EvalConfig::default(),
        )
        .unwrap();
        let tr = out.trace.unwrap();
        assert!(path_in_language(&w.modules, &tr, 0, 1, &Term::Eps("GuessP".into())).unwrap());
        // The diagonal clause holds everywhere for id.
        for i in 0..tr.states.len() {
            assert!(path_in_language(&w.modules, &tr, i, i, &Term::Id).unwrap());
        }
    }

    #[test]
    fn accepted_even_trace_is_in_the_language() {
        let w = world(EVEN, "domain 2\n");
        let out = evaluate(
            &w.modules,
            &w.core,
            &w.initial,
            &ChoiceStrategy::Scripted(vec![0, 1]),
            &EvalConfig::default(),
        )
        .unwrap();
        assert!(out.accepted);
        let tr = out.trace.unwrap();
        assert!(path_in_language(&w.modules, &tr, 0, tr.states.len() - 1, &w.core).unwrap());
        // ... and a strict prefix is not a full match.
        assert!(!path_in_language(&w.modules, &tr, 0, 1, &w.core).unwrap());
    }

    #[test]
    fn state_formulae_basics() {
        let w = world(
            "module GuessP(; P) { P(x) <- . }\nprop HasEdge(E) { <- E(x,y). }\nmain: eps GuessP",
            "domain 2\nrel E 2 { (e1,e2) }\n",
        );
        let out = evaluate(
            &w.modules,
            &w.core,
            &w.initial,
            &ChoiceStrategy::First,
            &EvalConfig::default(),
        )
        .unwrap();
        let tr = out.trace.unwrap();
        let last = tr.states.len() - 1;
        assert!(state_satisfies(&w.modules, &tr, last, &StateFormula::Last).unwrap());
        assert!(!state_satisfies(&w.modules, &tr, 0, &StateFormula::Last).unwrap());
        assert!(state_satisfies(&w.modules, &tr, 0, &StateFormula::True).unwrap());
        assert!(state_satisfies(&w.modules, &tr, 0, &StateFormula::Prop("HasEdge".into()))
            .unwrap());
        let dia = StateFormula::DiamondRight(
            Term::Eps("GuessP".into()),
            Box::new(StateFormula::Last),
        );
        assert!(state_satisfies(&w.modules, &tr, 0, &dia).unwrap());
    }

    #[test]
    fn answers_do_not_depend_on_the_suffix() {
        // Membership of p(i,j) for a converse-free, forward-test-free term
        // is insensitive to what the trace records beyond j.
        let w = world(
            "module GuessP(; P) { P(x) <- . }\nmodule CopyPO(P; O) { O(x) <- P(x). }\n\
             main: eps GuessP ; eps CopyPO ; eps GuessP",
            "domain 3\n",
        );
        let out = evaluate(
            &w.modules,
            &w.core,
            &w.initial,
            &ChoiceStrategy::Scripted(vec![0, 1]),
            &EvalConfig::default(),
        )
        .unwrap();
        let tr = out.trace.unwrap();
        let t = parse_term("eps GuessP ; eps CopyPO").unwrap();
        let full = path_in_language(&w.modules, &tr, 0, 2, &t).unwrap();
        let mut clipped = tr.clone();
        clipped.states.truncate(3);
        clipped.steps.truncate(2);
        clipped.position = 2;
        let clip = path_in_language(&w.modules, &clipped, 0, 2, &t).unwrap();
        assert_eq!(full, clip);
        assert!(full);
    }

    #[test]
    fn index_errors_are_reported() {
        let w = world("module M(; R) { R(x) <- . }\nmain: id", "domain 2\n");
        let tr = crate::model::Trace::new(w.initial.clone());
        assert!(matches!(
            path_in_language(&w.modules, &tr, 0, 3, &Term::Id),
            Err(PathError::Index { .. })
        ));
    }
}
