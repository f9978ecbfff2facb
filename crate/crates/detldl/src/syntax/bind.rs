//! Joins a parsed program with a structure file: assembles the vocabulary,
//! classifies symbols into registers and EDB relations, and resolves module
//! rules against it.
//!
//! A symbol is a register when it is some module's output, a selection or
//! freshness operand, or carries a `reg` line in the structure file. Any
//! other symbol mentioned by the program must be declared as an EDB relation
//! in the structure file.

use std::collections::BTreeSet;

use crate::model::{
    build_structure, Atom, AtomSym, BoundRule, ModelError, ModuleDef, ModuleKind,
    ModuleVocabulary, Structure, StructureText,
};

use super::{collect_registers, ModuleDecl, Program, SyntaxError, Term};

#[derive(Debug)]
pub struct BoundProgram {
    pub modules: ModuleVocabulary,
    pub initial: Structure,
    pub core: Term,
    pub warnings: Vec<String>,
}

fn invalid(msg: String) -> crate::Error {
    crate::Error::Syntax(SyntaxError::Invalid(msg))
}

/// Register names a program forces into the vocabulary, before the structure
/// file is consulted.
pub(crate) fn program_registers(program: &Program, core: &Term) -> BTreeSet<String> {
    let mut regs = BTreeSet::new();
    for m in &program.modules {
        regs.extend(m.outputs.iter().cloned());
    }
    collect_registers(core, &mut regs);
    regs
}

pub fn bind(program: &Program, text: &StructureText) -> Result<BoundProgram, crate::Error> {
    let core = program.core_main()?;
    let regs = program_registers(program, &core);
    let mut warnings = Vec::new();
    let initial = build_structure(text, &regs, &mut warnings)?;
    let vocab = &initial.base.vocab;

    let mut modules = Vec::new();
    for decl in &program.modules {
        modules.push(bind_module(decl, vocab)?);
    }
    let modules = ModuleVocabulary { modules };

    // Selection and freshness operands must name registers, which
    // program_registers guarantees; what is left to check is that every
    // module referenced by the core term exists -- already done during
    // resolution -- and that register atoms are not shadowed by relations,
    // which build_structure rejects.
    Ok(BoundProgram { modules, initial, core, warnings })
}

fn bind_module(
    decl: &ModuleDecl,
    vocab: &crate::model::Vocabulary,
) -> Result<ModuleDef, crate::Error> {
    let mut outputs = Vec::new();
    for out in &decl.outputs {
        let id = vocab
            .reg_id(out)
            .ok_or_else(|| invalid(format!("output `{out}` of `{}` is not a register", decl.name)))?;
        outputs.push(id);
    }
    for input in &decl.inputs {
        if vocab.reg_id(input).is_none() && vocab.edb_id(input).is_none() {
            return Err(invalid(format!(
                "input `{input}` of `{}` is neither a register nor a declared relation",
                decl.name
            )));
        }
    }
    let mut rules = Vec::new();
    for rule in &decl.rules {
        let head = match &rule.head {
            Some((sym, var)) => {
                let id = vocab.reg_id(sym).ok_or_else(|| {
                    invalid(format!("head `{sym}` of `{}` is not a register", decl.name))
                })?;
                Some((id, var.clone()))
            }
            None => None,
        };
        let mut body = Vec::new();
        for (sym, vars) in &rule.body {
            let atom = if let Some(id) = vocab.reg_id(sym) {
                if vars.len() != 1 {
                    return Err(invalid(format!(
                        "register `{sym}` used with arity {} in `{}`",
                        vars.len(),
                        decl.name
                    )));
                }
                Atom { sym: AtomSym::Reg(id), name: sym.clone(), vars: vars.clone() }
            } else if let Some(id) = vocab.edb_id(sym) {
                let arity = vocab.edb[id].arity;
                if vars.len() != arity {
                    return Err(invalid(format!(
                        "relation `{sym}` has arity {arity}, used with {} in `{}`",
                        vars.len(),
                        decl.name
                    )));
                }
                Atom { sym: AtomSym::Edb(id), name: sym.clone(), vars: vars.clone() }
            } else {
                return Err(invalid(format!(
                    "unknown symbol `{sym}` in a rule of `{}`",
                    decl.name
                )));
            };
            if !decl.inputs.contains(sym) {
                return Err(invalid(format!(
                    "`{sym}` is read by `{}` but not among its inputs",
                    decl.name
                )));
            }
            body.push(atom);
        }
        rules.push(BoundRule { head, body });
    }
    Ok(ModuleDef {
        name: decl.name.clone(),
        kind: if decl.is_prop { ModuleKind::Proposition } else { ModuleKind::Action },
        inputs: decl.inputs.clone(),
        outputs,
        output_names: decl.outputs.clone(),
        rules,
    })
}

impl BoundProgram {
    /// Rebinds the same program data onto a different initial structure
    /// (for permuted or regenerated inputs the vocabulary must match).
    pub fn with_initial(&self, initial: Structure) -> Result<BoundProgram, crate::Error> {
        if initial.base.vocab != self.initial.base.vocab {
            return Err(crate::Error::Model(ModelError::Mismatch));
        }
        Ok(BoundProgram {
            modules: self.modules.clone(),
            initial,
            core: self.core.clone(),
            warnings: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;
    use super::*;
    use crate::model::parse_structure_text;

    #[test]
    fn binds_reachability_program() {
        let program = parse_program(
            "module Base(S; Reach) { Reach(x) <- S(x). }\n\
             module Step(Reach, E; ReachN) { ReachN(y) <- Reach(x), E(x,y). }\n\
             main: eps Base ; eps Step ; sel(Reach = T, id)",
        )
        .unwrap();
        let st = parse_structure_text(
            "domain a b c\nrel E 2 { (a,b) (b,c) }\nreg S = a\nreg T = c\n",
        )
        .unwrap();
        let bound = bind(&program, &st).unwrap();
        let vocab = &bound.initial.base.vocab;
        assert_eq!(vocab.registers, vec!["Reach", "ReachN", "S", "T"]);
        assert_eq!(vocab.edb.len(), 1);
        // Reach and ReachN default to the first element, S and T are given.
        assert_eq!(bound.warnings.len(), 2);
        assert_eq!(bound.initial.reg_by_name("S"), Some(0));
        assert_eq!(bound.initial.reg_by_name("T"), Some(2));
    }

    #[test]
    fn rejects_undeclared_body_symbol() {
        let program = parse_program(
            "module M(P; R) { R(x) <- Q(x). }\nmain: eps M",
        )
        .unwrap();
        let st = parse_structure_text("domain 2\nrel P 1 { (e1) }\n").unwrap();
        assert!(bind(&program, &st).is_err());
    }

    #[test]
    fn rejects_body_symbol_missing_from_inputs() {
        let program = parse_program(
            "module M(; R) { R(x) <- P(x). }\nmain: eps M",
        )
        .unwrap();
        let st = parse_structure_text("domain 2\nrel P 1 { (e1) }\n").unwrap();
        let err = bind(&program, &st).unwrap_err();
        assert!(err.to_string().contains("not among its inputs"), "{err}");
    }

    #[test]
    fn rejects_wrong_edb_arity() {
        let program = parse_program(
            "module M(E; R) { R(x) <- E(x). }\nmain: eps M",
        )
        .unwrap();
        let st = parse_structure_text("domain 2\nrel E 2 { (e1,e2) }\n").unwrap();
        assert!(bind(&program, &st).is_err());
    }
}
