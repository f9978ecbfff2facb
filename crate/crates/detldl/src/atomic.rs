//! Evaluation of atomic transductions: the candidate successor states of an
//! action module at a given state, and satisfaction of proposition modules.
//!
//! A rule body is a conjunctive query over the source state; its witness set
//! for the head variable determines the admissible values of the output
//! register. A module with several rules updates its outputs independently,
//! so the candidate set is the cartesian product of the per-rule witness
//! sets, with everything outside the outputs copied by inertia.

use std::collections::BTreeSet;

use crate::model::{
    canonical_order, equal_outside, AtomSym, BoundRule, ModuleDef, ModuleKind, Structure,
};

/// Canonically ordered successor states of one action module at one state.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub source: Structure,
    pub module: String,
    pub candidates: Vec<Structure>,
}

/// Head-witness set of a rule body at a state: all values of the head
/// variable for which some assignment of the remaining body variables
/// satisfies every atom. An empty body leaves the head unconstrained, so the
/// whole domain qualifies. Joins are naive nested loops.
pub fn eval_body(rule: &BoundRule, state: &Structure) -> BTreeSet<u32> {
    let n = state.base.domain.len() as u32;
    let head_var = rule.head.as_ref().map(|(_, v)| v.as_str());
    match head_var {
        None => unreachable!("eval_body is for action rules; use body_satisfiable"),
        Some(hv) => {
            if rule.body.is_empty() {
                return (0..n).collect();
            }
            let mut out = BTreeSet::new();
            for a in 0..n {
                let mut env = Vec::new();
                env.push((hv.to_string(), a));
                if satisfy(&rule.body, 0, state, &mut env) {
                    out.insert(a);
                }
            }
            out
        }
    }
}

/// True iff the body has at least one satisfying assignment in the state.
pub fn body_satisfiable(body: &[crate::model::Atom], state: &Structure) -> bool {
    let mut env = Vec::new();
    satisfy(body, 0, state, &mut env)
}

fn lookup(env: &[(String, u32)], var: &str) -> Option<u32> {
    env.iter().find(|(v, _)| v == var).map(|&(_, e)| e)
}

fn satisfy(body: &[crate::model::Atom], i: usize, state: &Structure, env: &mut Vec<(String, u32)>) -> bool {
    let Some(atom) = body.get(i) else { return true };
    match atom.sym {
        AtomSym::Reg(id) => {
            let value = state.reg(id);
            let var = &atom.vars[0];
            match lookup(env, var) {
                Some(bound) => bound == value && satisfy(body, i + 1, state, env),
                None => {
                    env.push((var.clone(), value));
                    let ok = satisfy(body, i + 1, state, env);
                    env.pop();
                    ok
                }
            }
        }
        AtomSym::Edb(id) => {
            for tuple in &state.base.edb[id] {
                let mut pushed = 0;
                let mut ok = true;
                for (var, &value) in atom.vars.iter().zip(tuple.iter()) {
                    match lookup(env, var) {
                        Some(bound) if bound != value => {
                            ok = false;
                            break;
                        }
                        Some(_) => {}
                        None => {
                            env.push((var.clone(), value));
                            pushed += 1;
                        }
                    }
                }
                if ok && satisfy(body, i + 1, state, env) {
                    for _ in 0..pushed {
                        env.pop();
                    }
                    return true;
                }
                for _ in 0..pushed {
                    env.pop();
                }
            }
            false
        }
    }
}

/// All successor states of an action module: one candidate per element of
/// the cartesian product of the rules' witness sets. Empty iff some rule has
/// no witness, in which case the module is undefined at this state.
pub fn successors(module: &ModuleDef, state: &Structure) -> CandidateSet {
    debug_assert_eq!(module.kind, ModuleKind::Action);
    let mut candidates = vec![state.clone()];
    for rule in &module.rules {
        let (head_reg, _) = rule.head.as_ref().expect("action rules have heads");
        let witnesses = eval_body(rule, state);
        if witnesses.is_empty() {
            candidates.clear();
            break;
        }
        let mut next = Vec::with_capacity(candidates.len() * witnesses.len());
        for c in &candidates {
            for &w in &witnesses {
                next.push(c.with_reg(*head_reg, w));
            }
        }
        candidates = next;
    }
    let candidates = canonical_order(candidates);
    debug_assert!(candidates.iter().all(|c| {
        equal_outside(state, c, &module.output_set()).unwrap_or(false)
    }));
    CandidateSet { source: state.clone(), module: module.name.clone(), candidates }
}

/// True iff every rule body of the proposition module has a satisfying
/// assignment in the state. Propositions never move.
pub fn check_proposition(module: &ModuleDef, state: &Structure) -> bool {
    debug_assert_eq!(module.kind, ModuleKind::Proposition);
    module.rules.iter().all(|r| body_satisfiable(&r.body, state))
}

/// Membership of a state pair in an action module's transition relation.
pub fn in_relation(module: &ModuleDef, from: &Structure, to: &Structure) -> bool {
    successors(module, from).candidates.iter().any(|c| c == to)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_structure_text;
    use crate::syntax::{bind, parse_program};
    use std::collections::BTreeSet;

    fn world(program: &str, structure: &str) -> crate::syntax::BoundProgram {
        let p = parse_program(program).unwrap();
        let st = parse_structure_text(structure).unwrap();
        bind(&p, &st).unwrap()
    }

    #[test]
    fn eval_body_joins_register_and_edge() {
        // Witness set of ReachN(y) <- Reach(x), E(x,y) with Reach = e1.
        let w = world(
            "module Step(Reach, E; ReachN) { ReachN(y) <- Reach(x), E(x,y). }\nmain: eps Step",
            "domain e1 e2 e3\nrel E 2 { (e1,e2) (e1,e3) (e2,e3) }\nreg Reach = e1\nreg ReachN = e1\n",
        );
        let rule = &w.modules.get("Step").unwrap().rules[0];
        let got = eval_body(rule, &w.initial);
        assert_eq!(got, BTreeSet::from([1, 2]));
        // Same answer from plain enumeration of all assignments.
        let brute: BTreeSet<u32> = (0..3)
            .filter(|&y| (0..3).any(|x| {
                w.initial.reg_by_name("Reach") == Some(x)
                    && w.initial.base.edb_rel("E").unwrap().contains(&vec![x, y])
            }))
            .collect();
        assert_eq!(got, brute);
    }

    #[test]
    fn empty_body_yields_whole_domain() {
        let w = world(
            "module GuessP(; P) { P(x) <- . }\nmain: eps GuessP",
            "domain a b c\nreg P = a\n",
        );
        let rule = &w.modules.get("GuessP").unwrap().rules[0];
        assert_eq!(eval_body(rule, &w.initial), BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn unsatisfiable_body_yields_empty_set() {
        let w = world(
            "module Step(Reach, E; ReachN) { ReachN(y) <- Reach(x), E(x,y). }\nmain: eps Step",
            "domain 2\nrel E 2 { }\nreg Reach = e1\nreg ReachN = e1\n",
        );
        let rule = &w.modules.get("Step").unwrap().rules[0];
        assert!(eval_body(rule, &w.initial).is_empty());
    }

    #[test]
    fn guess_successors_enumerate_domain() {
        let w = world(
            "module GuessP(; P) { P(x) <- . }\nmain: eps GuessP",
            "domain a b c\nreg P = a\n",
        );
        let cs = successors(w.modules.get("GuessP").unwrap(), &w.initial);
        assert_eq!(cs.candidates.len(), 3);
        let p = w.initial.base.vocab.reg_id("P").unwrap();
        assert_eq!(cs.candidates.iter().map(|c| c.reg(p)).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn two_rule_module_pairs_witnesses() {
        // Deterministic walks on two chains: each rule has one witness, so
        // exactly one candidate carries both updates.
        let w = world(
            "module Up(RA, RB, E; RAN, RBN) { RAN(x) <- RA(y), E(x,y). RBN(v) <- RB(w), E(v,w). }\n\
             main: eps Up",
            "domain 6\nrel E 2 { (e2,e1) (e5,e4) }\nreg RA = e1\nreg RB = e4\nreg RAN = e1\nreg RBN = e1\n",
        );
        let cs = successors(w.modules.get("Up").unwrap(), &w.initial);
        assert_eq!(cs.candidates.len(), 1);
        let c = &cs.candidates[0];
        assert_eq!(c.reg_by_name("RAN"), Some(1));
        assert_eq!(c.reg_by_name("RBN"), Some(4));
    }

    #[test]
    fn copy_module_is_deterministic() {
        let w = world(
            "module CopyPO(P; O) { O(x) <- P(x). }\nmain: eps CopyPO",
            "domain a b c\nreg P = c\nreg O = a\n",
        );
        let cs = successors(w.modules.get("CopyPO").unwrap(), &w.initial);
        assert_eq!(cs.candidates.len(), 1);
        assert_eq!(cs.candidates[0].reg_by_name("O"), Some(2));
        assert_eq!(cs.candidates[0].reg_by_name("P"), Some(2));
    }

    #[test]
    fn proposition_checks() {
        let w = world(
            "prop Same(P, Q) { <- P(x), Q(x). }\n\
             prop Loop(E) { <- E(x,x). }\n\
             prop Empty() { }\n\
             main: Same",
            "domain 4\nrel E 2 { (e1,e2) (e2,e1) }\nreg P = e3\nreg Q = e3\n",
        );
        assert!(check_proposition(w.modules.get("Same").unwrap(), &w.initial));
        assert!(!check_proposition(w.modules.get("Loop").unwrap(), &w.initial));
        assert!(check_proposition(w.modules.get("Empty").unwrap(), &w.initial));
    }

    #[test]
    fn candidate_count_is_bounded_by_outputs() {
        let w = world(
            "module Guess2(; P, Q) { P(x) <- . Q(y) <- . }\nmain: eps Guess2",
            "domain 3\nreg P = e1\nreg Q = e1\n",
        );
        let cs = successors(w.modules.get("Guess2").unwrap(), &w.initial);
        assert_eq!(cs.candidates.len(), 9); // n^outputs
    }
}
