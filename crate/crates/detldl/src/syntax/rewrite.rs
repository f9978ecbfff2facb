//! Name resolution, desugaring to the core operator set, and the rewrite
//! that pushes converse down to atomic steps.

use std::collections::{BTreeMap, BTreeSet};

use super::{Program, SyntaxError, Term};

/// Inlines `let` definitions and resolves bare names to module references
/// (`eps` for actions, a test for propositions). Detects definition cycles.
pub fn resolve(t: &Term, p: &Program) -> Result<Term, SyntaxError> {
    let lets: BTreeMap<&str, &Term> = p.lets.iter().map(|(n, t)| (n.as_str(), t)).collect();
    let mut stack = Vec::new();
    resolve_rec(t, p, &lets, &mut stack)
}

fn resolve_rec<'a>(
    t: &'a Term,
    p: &Program,
    lets: &BTreeMap<&str, &'a Term>,
    stack: &mut Vec<String>,
) -> Result<Term, SyntaxError> {
    use Term::*;
    let go = |x: &'a Term, stack: &mut Vec<String>| resolve_rec(x, p, lets, stack);
    Ok(match t {
        Ref(name) => {
            if let Some(body) = lets.get(name.as_str()) {
                if stack.iter().any(|s| s == name) {
                    return Err(SyntaxError::Invalid(format!("cyclic definition `{name}`")));
                }
                stack.push(name.clone());
                let r = resolve_rec(body, p, lets, stack)?;
                stack.pop();
                r
            } else if let Some(m) = p.modules.iter().find(|m| &m.name == name) {
                if m.is_prop {
                    PropTest(name.clone())
                } else {
                    Eps(name.clone())
                }
            } else {
                return Err(SyntaxError::Invalid(format!("unknown name `{name}`")));
            }
        }
        Eps(name) => match p.modules.iter().find(|m| &m.name == name) {
            Some(m) if !m.is_prop => Eps(name.clone()),
            Some(_) => {
                return Err(SyntaxError::Invalid(format!(
                    "`eps {name}` applies to action modules; `{name}` is a proposition"
                )))
            }
            None => return Err(SyntaxError::Invalid(format!("unknown module `{name}`"))),
        },
        PropTest(name) => PropTest(name.clone()),
        Id | Skip | Fail | Last | AnyM => t.clone(),
        Fresh(x, ys) => Fresh(x.clone(), ys.clone()),
        Compose(a, b) => Compose(Box::new(go(a, stack)?), Box::new(go(b, stack)?)),
        PrefUnion(a, b) => PrefUnion(Box::new(go(a, stack)?), Box::new(go(b, stack)?)),
        AntiDomain(a) => AntiDomain(Box::new(go(a, stack)?)),
        AntiImage(a) => AntiImage(Box::new(go(a, stack)?)),
        SelectEq(x, y, a) => SelectEq(x.clone(), y.clone(), Box::new(go(a, stack)?)),
        SelectNeq(x, y, a) => SelectNeq(x.clone(), y.clone(), Box::new(go(a, stack)?)),
        MaxIterate(a) => MaxIterate(Box::new(go(a, stack)?)),
        Converse(a) => Converse(Box::new(go(a, stack)?)),
        Test(a) => Test(Box::new(go(a, stack)?)),
        Dom(a) => Dom(Box::new(go(a, stack)?)),
        Power(a, n) => Power(Box::new(go(a, stack)?), *n),
        Exists(a) => Exists(Box::new(go(a, stack)?)),
        Globally(a) => Globally(Box::new(go(a, stack)?)),
        BackExists(a) => BackExists(Box::new(go(a, stack)?)),
        BackGlobally(a) => BackGlobally(Box::new(go(a, stack)?)),
        IfThenElse(f, a, b) => IfThenElse(
            Box::new(go(f, stack)?),
            Box::new(go(a, stack)?),
            Box::new(go(b, stack)?),
        ),
        While(f, a) => While(Box::new(go(f, stack)?), Box::new(go(a, stack)?)),
        RepeatUntil(a, f) => RepeatUntil(Box::new(go(a, stack)?), Box::new(go(f, stack)?)),
        DiamondRight(a, f) => DiamondRight(Box::new(go(a, stack)?), Box::new(go(f, stack)?)),
        DiamondLeft(a, f) => DiamondLeft(Box::new(go(a, stack)?), Box::new(go(f, stack)?)),
        BoxRight(a, f) => BoxRight(Box::new(go(a, stack)?), Box::new(go(f, stack)?)),
        BoxLeft(a, f) => BoxLeft(Box::new(go(a, stack)?), Box::new(go(f, stack)?)),
    })
}

fn test_of(t: Term) -> Term {
    Term::AntiDomain(Box::new(Term::AntiDomain(Box::new(t))))
}

/// Rewrites sugar into the core operators. The trace tests (`fresh`, `E`,
/// `G`, `BE`, `BG`) stay primitive; everything else reduces to the algebra.
/// `actions` lists the action module names in declaration order for the
/// expansion of `any`.
pub fn desugar(t: &Term, actions: &[String]) -> Term {
    use Term::*;
    let d = |x: &Term| desugar(x, actions);
    match t {
        Id | Eps(_) | PropTest(_) | Ref(_) | Fresh(..) => t.clone(),
        Skip => Id,
        Fail => AntiDomain(Box::new(Id)),
        AnyM => any_m(actions),
        Last => {
            // |any] not-top, i.e. no action module can step here.
            let not_top = AntiDomain(Box::new(Id));
            desugar(&BoxRight(Box::new(AnyM), Box::new(not_top)), actions)
        }
        Test(a) => test_of(d(a)),
        Dom(a) => test_of(d(a)),
        Compose(a, b) => Compose(Box::new(d(a)), Box::new(d(b))),
        PrefUnion(a, b) => PrefUnion(Box::new(d(a)), Box::new(d(b))),
        AntiDomain(a) => AntiDomain(Box::new(d(a))),
        AntiImage(a) => AntiImage(Box::new(d(a))),
        SelectEq(x, y, a) => SelectEq(x.clone(), y.clone(), Box::new(d(a))),
        SelectNeq(x, y, a) => {
            let neq = AntiDomain(Box::new(SelectEq(x.clone(), y.clone(), Box::new(Id))));
            Compose(Box::new(d(a)), Box::new(neq))
        }
        MaxIterate(a) => MaxIterate(Box::new(d(a))),
        Converse(a) => Converse(Box::new(d(a))),
        Power(a, n) => {
            let body = d(a);
            match n {
                0 => Id,
                _ => {
                    let mut acc = body.clone();
                    for _ in 1..*n {
                        acc = Compose(Box::new(acc), Box::new(body.clone()));
                    }
                    acc
                }
            }
        }
        IfThenElse(f, a, b) => PrefUnion(
            Box::new(Compose(Box::new(test_of(d(f))), Box::new(d(a)))),
            Box::new(d(b)),
        ),
        While(f, a) => {
            let body = Compose(Box::new(test_of(d(f))), Box::new(d(a)));
            let exit = test_of(AntiDomain(Box::new(d(f))));
            Compose(Box::new(MaxIterate(Box::new(body))), Box::new(exit))
        }
        RepeatUntil(a, f) => {
            let once = d(a);
            let again = Compose(Box::new(test_of(AntiDomain(Box::new(d(f))))), Box::new(d(a)));
            Compose(
                Box::new(Compose(Box::new(once), Box::new(MaxIterate(Box::new(again))))),
                Box::new(test_of(d(f))),
            )
        }
        DiamondRight(a, f) => test_of(Compose(Box::new(d(a)), Box::new(d(f)))),
        BoxRight(a, f) => AntiDomain(Box::new(Compose(
            Box::new(d(a)),
            Box::new(AntiDomain(Box::new(d(f)))),
        ))),
        DiamondLeft(a, f) => AntiImage(Box::new(AntiImage(Box::new(Compose(
            Box::new(d(f)),
            Box::new(d(a)),
        ))))),
        BoxLeft(a, f) => AntiImage(Box::new(Compose(
            Box::new(AntiImage(Box::new(d(f)))),
            Box::new(d(a)),
        ))),
        Exists(a) => Exists(Box::new(d(a))),
        Globally(a) => Globally(Box::new(d(a))),
        BackExists(a) => BackExists(Box::new(d(a))),
        BackGlobally(a) => BackGlobally(Box::new(d(a))),
    }
}

fn any_m(actions: &[String]) -> Term {
    let mut it = actions.iter();
    match it.next() {
        None => Term::AntiDomain(Box::new(Term::Id)),
        Some(first) => {
            let mut acc = Term::Eps(first.clone());
            for m in it {
                acc = Term::PrefUnion(Box::new(acc), Box::new(Term::Eps(m.clone())));
            }
            acc
        }
    }
}

/// Pushes converse down so that it remains only directly over atomic steps:
/// `(a;b)~ = b~;a~`, `(!a)~ = !a`, `(~a)~ = ~a`, `(a^)~ = (a~)^`,
/// `(a~)~ = a`, `(sel(a))~ = sel(a~)`. Diagonal terms are their own
/// converse. Converse over preferential union is not defined.
pub fn push_converse(t: &Term) -> Result<Term, SyntaxError> {
    use Term::*;
    Ok(match t {
        Converse(inner) => match &**inner {
            Eps(m) => Converse(Box::new(Eps(m.clone()))),
            Id => Id,
            PropTest(_) | Fresh(..) => push_converse(inner)?,
            Exists(_) | Globally(_) | BackExists(_) | BackGlobally(_) => push_converse(inner)?,
            Compose(a, b) => Compose(
                Box::new(push_converse(&Converse(b.clone()))?),
                Box::new(push_converse(&Converse(a.clone()))?),
            ),
            AntiDomain(a) => AntiDomain(Box::new(push_converse(a)?)),
            AntiImage(a) => AntiImage(Box::new(push_converse(a)?)),
            MaxIterate(a) => MaxIterate(Box::new(push_converse(&Converse(a.clone()))?)),
            SelectEq(x, y, a) => SelectEq(
                x.clone(),
                y.clone(),
                Box::new(push_converse(&Converse(a.clone()))?),
            ),
            Converse(a) => push_converse(a)?,
            PrefUnion(..) => {
                return Err(SyntaxError::Invalid(
                    "converse over preferential union is not defined".into(),
                ))
            }
            other => {
                return Err(SyntaxError::Invalid(format!(
                    "converse over {other:?} requires desugaring first"
                )))
            }
        },
        Id | Eps(_) | PropTest(_) | Fresh(..) => t.clone(),
        Compose(a, b) => Compose(Box::new(push_converse(a)?), Box::new(push_converse(b)?)),
        PrefUnion(a, b) => PrefUnion(Box::new(push_converse(a)?), Box::new(push_converse(b)?)),
        AntiDomain(a) => AntiDomain(Box::new(push_converse(a)?)),
        AntiImage(a) => AntiImage(Box::new(push_converse(a)?)),
        SelectEq(x, y, a) => SelectEq(x.clone(), y.clone(), Box::new(push_converse(a)?)),
        MaxIterate(a) => MaxIterate(Box::new(push_converse(a)?)),
        Exists(a) => Exists(Box::new(push_converse(a)?)),
        Globally(a) => Globally(Box::new(push_converse(a)?)),
        BackExists(a) => BackExists(Box::new(push_converse(a)?)),
        BackGlobally(a) => BackGlobally(Box::new(push_converse(a)?)),
        other => {
            return Err(SyntaxError::Invalid(format!(
                "push_converse expects a core term, found {other:?}"
            )))
        }
    })
}

/// Register names a core term constrains directly (selection and freshness
/// operands).
pub fn collect_registers(t: &Term, out: &mut BTreeSet<String>) {
    use Term::*;
    match t {
        SelectEq(x, y, a) | SelectNeq(x, y, a) => {
            out.insert(x.clone());
            out.insert(y.clone());
            collect_registers(a, out);
        }
        Fresh(x, ys) => {
            out.insert(x.clone());
            out.extend(ys.iter().cloned());
        }
        Compose(a, b) | PrefUnion(a, b) => {
            collect_registers(a, out);
            collect_registers(b, out);
        }
        AntiDomain(a) | AntiImage(a) | MaxIterate(a) | Converse(a) | Test(a) | Dom(a)
        | Power(a, _) | Exists(a) | Globally(a) | BackExists(a) | BackGlobally(a) => {
            collect_registers(a, out)
        }
        IfThenElse(f, a, b) => {
            collect_registers(f, out);
            collect_registers(a, out);
            collect_registers(b, out);
        }
        While(a, b) | RepeatUntil(a, b) | DiamondRight(a, b) | DiamondLeft(a, b)
        | BoxRight(a, b) | BoxLeft(a, b) => {
            collect_registers(a, out);
            collect_registers(b, out);
        }
        Id | Eps(_) | PropTest(_) | Ref(_) | Skip | Fail | Last | AnyM => {}
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse::{parse_program, parse_term};
    use super::super::print_term;
    use super::*;

    fn fixture(src: &str) -> Program {
        let text = format!(
            "module a(; R) {{ R(x) <- . }}\n\
             module b(; R) {{ R(x) <- . }}\n\
             prop p(R) {{ <- R(x). }}\n\
             main: {src}"
        );
        parse_program(&text).unwrap()
    }

    fn core(src: &str) -> Term {
        let p = fixture(src);
        desugar(&p.resolved_main().unwrap(), &["a".to_string(), "b".to_string()])
    }

    #[test]
    fn while_expands_to_iterate_and_exit_test() {
        let t = core("while(p, a)");
        assert_eq!(print_term(&t), "(p? ; a)^ ; (!p)?");
    }

    #[test]
    fn skip_is_id_and_power_zero_is_id() {
        assert_eq!(core("skip"), Term::Id);
        assert_eq!(core("pow(a, 0)"), Term::Id);
    }

    #[test]
    fn power_is_left_nested_composition() {
        assert_eq!(core("pow(a, 3)"), core("(a ; a) ; a"));
    }

    #[test]
    fn any_expands_in_declaration_order() {
        assert_eq!(print_term(&core("any")), "a <+ b");
    }

    #[test]
    fn desugar_is_idempotent_and_reaches_core() {
        let actions = vec!["a".to_string(), "b".to_string()];
        for src in ["while(p, a)", "repeat(a, p)", "if(p, a, b)", "last", "[a> p?", "<a] p?"] {
            let p = fixture(src);
            let once = desugar(&p.resolved_main().unwrap(), &actions);
            assert_eq!(desugar(&once, &actions), once, "source `{src}`");
            assert!(once.is_core(), "source `{src}` left sugar behind: {once:?}");
        }
    }

    #[test]
    fn converse_of_compose_reverses() {
        let t = parse_term("conv(conv(eps a) ; conv(eps b))").unwrap();
        let pushed = push_converse(&t).unwrap();
        assert_eq!(print_term(&pushed), "b ; a");
    }

    #[test]
    fn converse_is_involutive_and_fixes_negation() {
        let t = parse_term("conv(conv(eps a))").unwrap();
        assert_eq!(push_converse(&t).unwrap(), Term::Eps("a".into()));
        let t = parse_term("conv(!eps a)").unwrap();
        assert_eq!(print_term(&push_converse(&t).unwrap()), "!a");
    }

    #[test]
    fn converse_over_union_is_rejected() {
        let t = parse_term("conv(eps a <+ eps b)").unwrap();
        assert!(push_converse(&t).is_err());
    }

    #[test]
    fn resolve_detects_cycles_and_unknown_names() {
        let p = parse_program("let x = x ; x\nmain: x").unwrap();
        assert!(p.resolved_main().is_err());
        let p = parse_program("main: nosuch").unwrap();
        assert!(p.resolved_main().is_err());
    }

    #[test]
    fn bare_names_resolve_by_module_kind() {
        let p = parse_program(
            "module M(; R) { R(x) <- . }\nprop Q(R) { <- R(x). }\nmain: M ; Q",
        )
        .unwrap();
        let r = p.resolved_main().unwrap();
        assert_eq!(r, Term::compose(Term::Eps("M".into()), Term::PropTest("Q".into())));
    }
}
