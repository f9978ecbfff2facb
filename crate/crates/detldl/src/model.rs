//! Relational structures, vocabularies and traces.
//!
//! A state of the transition system is a finite relational structure whose
//! mutable part consists of *registers*: unary singleton relations, each
//! holding exactly one domain element. The immutable part (domain plus EDB
//! relations) is shared between all states of a run via [`StructureBase`].
//! A [`Trace`] is a finite word of states together with the atomic step
//! labels that produced it and a cursor position.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("structure error: {0}")]
    Invalid(String),
    #[error("{0}")]
    Parse(String),
    #[error("mismatched domains or vocabularies")]
    Mismatch,
}

/// Relation symbol names paired with the split into immutable EDB relations
/// and mutable registers. Symbol names are unique across both kinds and both
/// lists are kept sorted by name, so ids double as a canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub edb: Vec<EdbSym>,
    pub registers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdbSym {
    pub name: String,
    pub arity: usize,
}

impl Vocabulary {
    pub fn new(mut edb: Vec<EdbSym>, mut registers: Vec<String>) -> Result<Self, ModelError> {
        edb.sort_by(|a, b| a.name.cmp(&b.name));
        registers.sort();
        let mut seen = BTreeSet::new();
        for s in edb.iter().map(|s| &s.name).chain(registers.iter()) {
            if !seen.insert(s.clone()) {
                return Err(ModelError::Invalid(format!("duplicate symbol `{s}`")));
            }
        }
        for s in &edb {
            if s.arity == 0 {
                return Err(ModelError::Invalid(format!("relation `{}` has arity 0", s.name)));
            }
        }
        Ok(Vocabulary { edb, registers })
    }

    pub fn reg_id(&self, name: &str) -> Option<usize> {
        self.registers.binary_search_by(|r| r.as_str().cmp(name)).ok()
    }

    pub fn edb_id(&self, name: &str) -> Option<usize> {
        self.edb.binary_search_by(|r| r.name.as_str().cmp(name)).ok()
    }
}

/// The immutable part of every state of one run: element names, vocabulary
/// and EDB contents. Tuples are vectors of domain indices.
#[derive(Debug, PartialEq, Eq)]
pub struct StructureBase {
    pub vocab: Vocabulary,
    pub domain: Vec<String>,
    pub edb: Vec<BTreeSet<Vec<u32>>>,
}

impl StructureBase {
    pub fn elem_id(&self, name: &str) -> Option<u32> {
        self.domain.iter().position(|e| e == name).map(|i| i as u32)
    }

    pub fn edb_rel(&self, name: &str) -> Option<&BTreeSet<Vec<u32>>> {
        self.vocab.edb_id(name).map(|i| &self.edb[i])
    }
}

/// One state: a shared base plus one element per register, indexed in
/// register-id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Structure {
    pub base: Arc<StructureBase>,
    pub regs: Vec<u32>,
}

impl Structure {
    pub fn new(base: Arc<StructureBase>, regs: Vec<u32>) -> Result<Self, ModelError> {
        if regs.len() != base.vocab.registers.len() {
            return Err(ModelError::Invalid("register count mismatch".into()));
        }
        let n = base.domain.len() as u32;
        for (tuples, sym) in base.edb.iter().zip(&base.vocab.edb) {
            for t in tuples {
                if t.len() != sym.arity {
                    return Err(ModelError::Invalid(format!(
                        "tuple arity mismatch for `{}`",
                        sym.name
                    )));
                }
                if t.iter().any(|&e| e >= n) {
                    return Err(ModelError::Invalid(format!(
                        "tuple component outside domain in `{}`",
                        sym.name
                    )));
                }
            }
        }
        if regs.iter().any(|&e| e >= n) {
            return Err(ModelError::Invalid("register value outside domain".into()));
        }
        Ok(Structure { base, regs })
    }

    pub fn reg(&self, id: usize) -> u32 {
        self.regs[id]
    }

    pub fn reg_by_name(&self, name: &str) -> Option<u32> {
        self.base.vocab.reg_id(name).map(|i| self.regs[i])
    }

    /// Copy of this state with one register reassigned.
    pub fn with_reg(&self, id: usize, value: u32) -> Structure {
        let mut regs = self.regs.clone();
        regs[id] = value;
        Structure { base: Arc::clone(&self.base), regs }
    }

    /// Register valuation rendered as `R1=a,R2=b`, in register-name order.
    pub fn reg_line(&self) -> String {
        let mut out = String::new();
        for (i, r) in self.base.vocab.registers.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}={}", r, self.base.domain[self.regs[i] as usize]);
        }
        out
    }

    fn same_base(&self, other: &Structure) -> bool {
        Arc::ptr_eq(&self.base, &other.base) || self.base == other.base
    }
}

/// True iff the two states agree on all EDB relations and on every register
/// not listed in `symbols`. EDB agreement is structural: both states must
/// share a base.
pub fn equal_outside(
    a: &Structure,
    b: &Structure,
    symbols: &BTreeSet<usize>,
) -> Result<bool, ModelError> {
    if !a.same_base(b) {
        return Err(ModelError::Mismatch);
    }
    Ok(a.regs
        .iter()
        .zip(&b.regs)
        .enumerate()
        .all(|(i, (x, y))| symbols.contains(&i) || x == y))
}

/// Sorts candidate states lexicographically by (register name, value index in
/// the domain list) and drops duplicates. Register ids are already in name
/// order, so the key is just the register vector.
pub fn canonical_order(mut candidates: Vec<Structure>) -> Vec<Structure> {
    candidates.sort_by(|a, b| a.regs.cmp(&b.regs));
    candidates.dedup_by(|a, b| a.regs == b.regs);
    candidates
}

/// A finite word of states with the module labels that produced each
/// transition and a current position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub states: Vec<Structure>,
    pub steps: Vec<String>,
    pub position: usize,
}

impl Trace {
    pub fn new(initial: Structure) -> Trace {
        Trace { states: vec![initial], steps: Vec::new(), position: 0 }
    }

    pub fn last(&self) -> usize {
        self.states.len() - 1
    }

    pub fn current(&self) -> &Structure {
        &self.states[self.position]
    }

    pub fn push(&mut self, step: String, state: Structure) {
        self.states.push(state);
        self.steps.push(step);
    }

    /// Serialization of the prefix ending at the current position; the key a
    /// choice function is queried with. EDB parts are constant and omitted.
    pub fn history_key(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.states[..=self.position].iter().enumerate() {
            if i > 0 {
                out.push('|');
            }
            out.push_str(&s.reg_line());
        }
        out
    }

    /// States plus step labels; used to compare runs and count witness
    /// classes.
    pub fn fingerprint(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.states.iter().enumerate() {
            if i > 0 {
                let _ = write!(out, " -{}-> ", self.steps[i - 1]);
            }
            out.push_str(&s.reg_line());
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Module vocabularies
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModuleKind {
    Action,
    Proposition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomSym {
    Reg(usize),
    Edb(usize),
}

/// One body atom of a rule, resolved against a vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub sym: AtomSym,
    pub name: String,
    pub vars: Vec<String>,
}

/// `R(x) <- B1, ..., Bm.` — the head is absent for proposition rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundRule {
    pub head: Option<(usize, String)>,
    pub body: Vec<Atom>,
}

/// An atomic transduction: per-output rules plus input metadata. Bodies read
/// the source state, heads name the registers updated in the target state;
/// everything else is copied by inertia.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleDef {
    pub name: String,
    pub kind: ModuleKind,
    pub inputs: Vec<String>,
    pub outputs: Vec<usize>,
    pub output_names: Vec<String>,
    pub rules: Vec<BoundRule>,
}

impl ModuleDef {
    pub fn output_set(&self) -> BTreeSet<usize> {
        self.outputs.iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModuleVocabulary {
    pub modules: Vec<ModuleDef>,
}

impl ModuleVocabulary {
    pub fn get(&self, name: &str) -> Option<&ModuleDef> {
        self.modules.iter().find(|m| m.name == name)
    }

    /// Action module names in declaration order; the expansion order of the
    /// any-module shorthand.
    pub fn action_names(&self) -> Vec<String> {
        self.modules
            .iter()
            .filter(|m| m.kind == ModuleKind::Action)
            .map(|m| m.name.clone())
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Structure files
// ---------------------------------------------------------------------------

/// Parsed form of a structure file, before it is joined with a program's
/// register usage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StructureText {
    pub domain: Vec<String>,
    pub rels: Vec<(String, usize, Vec<Vec<String>>)>,
    pub regs: Vec<(String, String)>,
}

/// Line-oriented format: `domain n` or `domain a b c`, one
/// `rel NAME ARITY { (t1,..) (t2,..) }` per EDB relation, `reg NAME = ELEM`
/// per initial register value, `#` comments.
pub fn parse_structure_text(input: &str) -> Result<StructureText, ModelError> {
    let mut st = StructureText::default();
    for (ln, raw) in input.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| ModelError::Parse(format!("line {}: {}", ln + 1, msg));
        let mut words = line.split_whitespace();
        match words.next() {
            Some("domain") => {
                let names: Vec<&str> = words.collect();
                if names.is_empty() {
                    return Err(err("domain needs a size or element names".into()));
                }
                if st.domain.is_empty() {
                    if names.len() == 1 {
                        if let Ok(n) = names[0].parse::<usize>() {
                            if n == 0 {
                                return Err(err("domain must be nonempty".into()));
                            }
                            st.domain = (1..=n).map(|i| format!("e{i}")).collect();
                            continue;
                        }
                    }
                    st.domain = names.iter().map(|s| s.to_string()).collect();
                    let unique: BTreeSet<&String> = st.domain.iter().collect();
                    if unique.len() != st.domain.len() {
                        return Err(err("duplicate domain element".into()));
                    }
                } else {
                    return Err(err("duplicate domain line".into()));
                }
            }
            Some("rel") => {
                let name = words.next().ok_or_else(|| err("rel needs a name".into()))?;
                let arity: usize = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| err("rel needs an arity".into()))?;
                let rest: String = words.collect::<Vec<_>>().join(" ");
                let rest = rest.trim();
                let body = rest
                    .strip_prefix('{')
                    .and_then(|r| r.strip_suffix('}'))
                    .ok_or_else(|| err("rel tuples must be wrapped in { }".into()))?;
                let mut tuples = Vec::new();
                for part in body.split(')') {
                    let part = part.trim().trim_start_matches(',').trim();
                    if part.is_empty() {
                        continue;
                    }
                    let inner = part
                        .strip_prefix('(')
                        .ok_or_else(|| err(format!("malformed tuple near `{part}`")))?;
                    let tuple: Vec<String> =
                        inner.split(',').map(|e| e.trim().to_string()).collect();
                    if tuple.len() != arity || tuple.iter().any(|e| e.is_empty()) {
                        return Err(err(format!("tuple ({inner}) does not match arity {arity}")));
                    }
                    tuples.push(tuple);
                }
                st.rels.push((name.to_string(), arity, tuples));
            }
            Some("reg") => {
                let name = words.next().ok_or_else(|| err("reg needs a name".into()))?;
                if words.next() != Some("=") {
                    return Err(err("expected `reg NAME = ELEM`".into()));
                }
                let val = words.next().ok_or_else(|| err("reg needs a value".into()))?;
                st.regs.push((name.to_string(), val.to_string()));
            }
            Some(other) => return Err(err(format!("unknown directive `{other}`"))),
            None => {}
        }
    }
    if st.domain.is_empty() {
        return Err(ModelError::Parse("structure file has no domain line".into()));
    }
    Ok(st)
}

/// Builds the shared base and initial state. `extra_registers` comes from the
/// program (module outputs, selection and freshness operands); registers
/// missing an explicit initial value default to the first domain element and
/// produce a warning.
pub fn build_structure(
    text: &StructureText,
    extra_registers: &BTreeSet<String>,
    warnings: &mut Vec<String>,
) -> Result<Structure, ModelError> {
    let mut reg_names: BTreeSet<String> = extra_registers.clone();
    for (r, _) in &text.regs {
        reg_names.insert(r.clone());
    }
    let edb_syms: Vec<EdbSym> = text
        .rels
        .iter()
        .map(|(n, a, _)| EdbSym { name: n.clone(), arity: *a })
        .collect();
    {
        let mut seen = BTreeSet::new();
        for (n, _, _) in &text.rels {
            if !seen.insert(n) {
                return Err(ModelError::Invalid(format!("relation `{n}` declared twice")));
            }
            if reg_names.contains(n) {
                return Err(ModelError::Invalid(format!(
                    "`{n}` is used both as a relation and as a register"
                )));
            }
        }
    }
    let vocab = Vocabulary::new(edb_syms, reg_names.into_iter().collect())?;

    let elem = |name: &str| -> Result<u32, ModelError> {
        text.domain
            .iter()
            .position(|e| e == name)
            .map(|i| i as u32)
            .ok_or_else(|| ModelError::Invalid(format!("`{name}` is not a domain element")))
    };

    let mut edb = vec![BTreeSet::new(); vocab.edb.len()];
    for (name, _, tuples) in &text.rels {
        let id = vocab.edb_id(name).unwrap();
        for t in tuples {
            let tuple: Vec<u32> = t.iter().map(|e| elem(e)).collect::<Result<_, _>>()?;
            edb[id].insert(tuple);
        }
    }

    let given: BTreeMap<&str, &str> =
        text.regs.iter().map(|(r, v)| (r.as_str(), v.as_str())).collect();
    let mut regs = Vec::with_capacity(vocab.registers.len());
    for r in &vocab.registers {
        match given.get(r.as_str()) {
            Some(v) => regs.push(elem(v)?),
            None => {
                warnings.push(format!(
                    "register `{}` has no initial value; defaulting to `{}`",
                    r, text.domain[0]
                ));
                regs.push(0);
            }
        }
    }

    let base = Arc::new(StructureBase { vocab, domain: text.domain.clone(), edb });
    Structure::new(base, regs)
}

/// Canonical text form; `parse -> serialize -> parse` is the identity on
/// structures.
pub fn serialize_structure(s: &Structure) -> String {
    let b = &s.base;
    let mut out = String::new();
    let _ = writeln!(out, "domain {}", b.domain.join(" "));
    for (sym, tuples) in b.vocab.edb.iter().zip(&b.edb) {
        let mut body = String::new();
        for t in tuples {
            let names: Vec<&str> = t.iter().map(|&e| b.domain[e as usize].as_str()).collect();
            let _ = write!(body, " ({})", names.join(","));
        }
        let _ = writeln!(out, "rel {} {} {{{} }}", sym.name, sym.arity, body);
    }
    for (i, r) in b.vocab.registers.iter().enumerate() {
        let _ = writeln!(out, "reg {} = {}", r, b.domain[s.regs[i] as usize]);
    }
    out
}

/// Applies a permutation of domain indices to registers and EDB tuples.
/// Element names keep their positions; only the content moves. Used for
/// isomorphism-invariance checks.
pub fn permute_structure(s: &Structure, perm: &[u32]) -> Structure {
    let b = &s.base;
    assert_eq!(perm.len(), b.domain.len());
    let edb = b
        .edb
        .iter()
        .map(|tuples| {
            tuples
                .iter()
                .map(|t| t.iter().map(|&e| perm[e as usize]).collect())
                .collect()
        })
        .collect();
    let base = Arc::new(StructureBase {
        vocab: b.vocab.clone(),
        domain: b.domain.clone(),
        edb,
    });
    let regs = s.regs.iter().map(|&e| perm[e as usize]).collect();
    Structure { base, regs }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_with(regs: &[&str]) -> Arc<StructureBase> {
        let vocab = Vocabulary::new(vec![], regs.iter().map(|s| s.to_string()).collect()).unwrap();
        Arc::new(StructureBase {
            vocab,
            domain: vec!["a".into(), "b".into(), "c".into()],
            edb: vec![],
        })
    }

    #[test]
    fn equal_outside_identity() {
        let base = base_with(&["O", "P"]);
        let s = Structure::new(base, vec![0, 0]).unwrap();
        assert!(equal_outside(&s, &s, &BTreeSet::new()).unwrap());
    }

    #[test]
    fn equal_outside_excluded_symbol() {
        let base = base_with(&["O", "P"]);
        let p = base.vocab.reg_id("P").unwrap();
        let a = Structure::new(Arc::clone(&base), vec![0, 0]).unwrap();
        let b = a.with_reg(p, 1);
        assert!(equal_outside(&a, &b, &BTreeSet::from([p])).unwrap());
        assert!(!equal_outside(&a, &b, &BTreeSet::new()).unwrap());
    }

    #[test]
    fn equal_outside_other_register_differs() {
        let base = base_with(&["O", "P"]);
        let p = base.vocab.reg_id("P").unwrap();
        let o = base.vocab.reg_id("O").unwrap();
        let a = Structure::new(Arc::clone(&base), vec![0, 0]).unwrap();
        let b = a.with_reg(p, 1).with_reg(o, 1);
        assert!(!equal_outside(&a, &b, &BTreeSet::from([p])).unwrap());
    }

    #[test]
    fn equal_outside_rejects_mismatched_bases() {
        let a = Structure::new(base_with(&["P"]), vec![0]).unwrap();
        let b = Structure::new(base_with(&["Q"]), vec![0]).unwrap();
        assert!(matches!(equal_outside(&a, &b, &BTreeSet::new()), Err(ModelError::Mismatch)));
    }

    #[test]
    fn canonical_order_sorts_by_domain_index() {
        let base = base_with(&["P"]);
        let mk = |v| Structure::new(Arc::clone(&base), vec![v]).unwrap();
        let sorted = canonical_order(vec![mk(2), mk(0), mk(1)]);
        assert_eq!(sorted.iter().map(|s| s.regs[0]).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn canonical_order_single_and_duplicates() {
        let base = base_with(&["P"]);
        let mk = |v| Structure::new(Arc::clone(&base), vec![v]).unwrap();
        assert_eq!(canonical_order(vec![mk(1)]), vec![mk(1)]);
        assert_eq!(canonical_order(vec![mk(0), mk(0)]), vec![mk(0)]);
    }

    #[test]
    fn structure_file_round_trip() {
        let text = "\
# a comment
domain a b c
rel E 2 { (a,b) (b,c) }
rel P 1 { (a) }
reg S = a
reg T = c
";
        let parsed = parse_structure_text(text).unwrap();
        let mut warn = Vec::new();
        let s = build_structure(&parsed, &BTreeSet::new(), &mut warn).unwrap();
        assert!(warn.is_empty());
        let serialized = serialize_structure(&s);
        let reparsed = parse_structure_text(&serialized).unwrap();
        let s2 = build_structure(&reparsed, &BTreeSet::new(), &mut warn).unwrap();
        assert_eq!(s, s2);
    }

    #[test]
    fn numeric_domain_and_default_registers() {
        let parsed = parse_structure_text("domain 3\n").unwrap();
        assert_eq!(parsed.domain, vec!["e1", "e2", "e3"]);
        let mut warn = Vec::new();
        let s =
            build_structure(&parsed, &BTreeSet::from(["P".to_string()]), &mut warn).unwrap();
        assert_eq!(warn.len(), 1);
        assert_eq!(s.reg_by_name("P"), Some(0));
    }

    #[test]
    fn rejects_register_relation_collision() {
        let parsed = parse_structure_text("domain 2\nrel P 1 { (e1) }\nreg P = e1\n").unwrap();
        let mut warn = Vec::new();
        assert!(build_structure(&parsed, &BTreeSet::new(), &mut warn).is_err());
    }
}
