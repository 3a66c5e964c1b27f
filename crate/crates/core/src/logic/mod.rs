//! First-order language machinery: predicates, terms, atoms, definite clauses
//! with two-atom bodies, programs, and the crisp bottom-up evaluator used as
//! ground truth for the soft engine.

mod eval;
mod syntax;

pub use eval::{crisp_consequence, Interpretation};
pub use syntax::{parse_atom, parse_clause, parse_constant, parse_program};

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest arity a predicate may have.
pub const MAX_ARITY: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateKind {
    Extensional,
    Target,
    Auxiliary,
}

/// A named relation symbol. Equality, hashing and ordering only look at the
/// name and arity; the kind is a property assigned by the surrounding language.
#[derive(Debug, Clone)]
pub struct Predicate {
    name: String,
    arity: usize,
    kind: PredicateKind,
}

impl Predicate {
    pub fn new(name: impl Into<String>, arity: usize, kind: PredicateKind) -> Result<Self> {
        let name = name.into();
        if arity == 0 || arity > MAX_ARITY {
            return Err(Error::InvalidLanguage(format!(
                "predicate {name} has arity {arity}; arity must be 1 or 2"
            )));
        }
        if !is_identifier(&name) {
            return Err(Error::InvalidLanguage(format!(
                "predicate name `{name}` is not a bare identifier"
            )));
        }
        Ok(Self { name, arity, kind })
    }

    pub fn extensional(name: impl Into<String>, arity: usize) -> Result<Self> {
        Self::new(name, arity, PredicateKind::Extensional)
    }

    pub fn target(name: impl Into<String>, arity: usize) -> Result<Self> {
        Self::new(name, arity, PredicateKind::Target)
    }

    pub fn auxiliary(name: impl Into<String>, arity: usize) -> Result<Self> {
        Self::new(name, arity, PredicateKind::Auxiliary)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn kind(&self) -> PredicateKind {
        self.kind
    }

    pub fn is_intensional(&self) -> bool {
        self.kind != PredicateKind::Extensional
    }

    pub fn with_kind(&self, kind: PredicateKind) -> Self {
        Self {
            kind,
            ..self.clone()
        }
    }
}

impl PartialEq for Predicate {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.arity == other.arity
    }
}

impl Eq for Predicate {}

impl Hash for Predicate {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.name.hash(state);
        self.arity.hash(state);
    }
}

impl PartialOrd for Predicate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Predicate {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.name.as_str(), self.arity).cmp(&(other.name.as_str(), other.arity))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// An opaque constant symbol.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constant(Box<str>);

impl Constant {
    pub fn new(symbol: impl AsRef<str>) -> Self {
        Self(symbol.as_ref().into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Constants print bare when they cannot be mistaken for a variable or
    /// break the clause syntax; otherwise they are double-quoted.
    fn needs_quotes(&self) -> bool {
        let s = self.as_str();
        match s.chars().next() {
            None => true,
            Some(c) if c.is_ascii_uppercase() || c == '_' => true,
            _ => !s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'),
        }
    }
}

impl From<&str> for Constant {
    fn from(s: &str) -> Self {
        Constant::new(s)
    }
}

impl From<String> for Constant {
    fn from(s: String) -> Self {
        Constant::new(s)
    }
}

impl From<u64> for Constant {
    fn from(v: u64) -> Self {
        Constant::new(v.to_string())
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.needs_quotes() {
            write!(f, "\"{}\"", self.0.replace('\\', "\\\\").replace('"', "\\\""))
        } else {
            f.write_str(&self.0)
        }
    }
}

/// Variables sort before constants.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(u8),
    Const(Constant),
}

impl Term {
    pub fn var(&self) -> Option<u8> {
        match self {
            Term::Var(v) => Some(*v),
            Term::Const(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "X{v}"),
            Term::Const(c) => c.fmt(f),
        }
    }
}

/// Variable-to-constant substitution.
pub type Binding = BTreeMap<u8, Constant>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    predicate: Predicate,
    terms: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: Predicate, terms: Vec<Term>) -> Result<Self> {
        if terms.len() != predicate.arity() {
            return Err(Error::InvalidAtom(format!(
                "{} applied to {} terms",
                predicate,
                terms.len()
            )));
        }
        Ok(Self { predicate, terms })
    }

    pub fn ground<I, C>(predicate: Predicate, constants: I) -> Result<Self>
    where
        I: IntoIterator<Item = C>,
        C: Into<Constant>,
    {
        let terms = constants.into_iter().map(|c| Term::Const(c.into())).collect();
        Self::new(predicate, terms)
    }

    pub fn predicate(&self) -> &Predicate {
        &self.predicate
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_ground(&self) -> bool {
        self.terms.iter().all(|t| matches!(t, Term::Const(_)))
    }

    pub fn variables(&self) -> impl Iterator<Item = u8> + '_ {
        self.terms.iter().filter_map(Term::var)
    }

    /// Constant arguments of a ground atom.
    pub fn constants(&self) -> Option<Vec<&Constant>> {
        self.terms
            .iter()
            .map(|t| match t {
                Term::Const(c) => Some(c),
                Term::Var(_) => None,
            })
            .collect()
    }

    /// Replaces every variable by its bound constant.
    pub fn substitute(&self, binding: &Binding) -> Result<Atom> {
        let terms = self
            .terms
            .iter()
            .map(|t| match t {
                Term::Var(v) => binding
                    .get(v)
                    .cloned()
                    .map(Term::Const)
                    .ok_or(Error::UnboundVariable(*v)),
                Term::Const(c) => Ok(Term::Const(c.clone())),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Atom {
            predicate: self.predicate.clone(),
            terms,
        })
    }

    pub(crate) fn map_vars(&self, f: impl Fn(u8) -> u8) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| match t {
                    Term::Var(v) => Term::Var(f(*v)),
                    c => c.clone(),
                })
                .collect(),
        }
    }
}

impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic on (predicate name, term list) with variables before constants.
impl Ord for Atom {
    fn cmp(&self, other: &Self) -> Ordering {
        self.predicate
            .cmp(&other.predicate)
            .then_with(|| self.terms.cmp(&other.terms))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate.name())?;
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            t.fmt(f)?;
        }
        f.write_str(")")
    }
}

/// A definite clause `head :- body[0], body[1].`
///
/// Construction enforces that the head is intensional, every head variable
/// occurs in the body, the head atom is not repeated in the body, and the
/// variable ids form the contiguous range `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause {
    head: Atom,
    body: [Atom; 2],
}

impl Clause {
    pub fn new(head: Atom, first: Atom, second: Atom) -> Result<Self> {
        if !head.predicate().is_intensional() {
            return Err(Error::InvalidClause(format!(
                "head {head} uses extensional predicate {}",
                head.predicate()
            )));
        }
        let body = [first, second];
        let body_vars: BTreeSet<u8> = body.iter().flat_map(Atom::variables).collect();
        if let Some(v) = head.variables().find(|v| !body_vars.contains(v)) {
            return Err(Error::InvalidClause(format!(
                "head variable X{v} of {head} does not occur in the body"
            )));
        }
        if body.iter().any(|b| b == &head) {
            return Err(Error::InvalidClause(format!(
                "head atom {head} also occurs in its own body"
            )));
        }
        let all: BTreeSet<u8> = head.variables().chain(body_vars).collect();
        if all.iter().enumerate().any(|(i, v)| i != *v as usize) {
            return Err(Error::InvalidClause(format!(
                "variable ids {all:?} are not contiguous from 0"
            )));
        }
        Ok(Self { head, body })
    }

    pub fn head(&self) -> &Atom {
        &self.head
    }

    pub fn body(&self) -> &[Atom; 2] {
        &self.body
    }

    /// Head variables, and variables that occur only in the body (the
    /// existentially quantified ones).
    pub fn free_variables(&self) -> (BTreeSet<u8>, BTreeSet<u8>) {
        let head: BTreeSet<u8> = self.head.variables().collect();
        let body_only = self
            .body
            .iter()
            .flat_map(Atom::variables)
            .filter(|v| !head.contains(v))
            .collect();
        (head, body_only)
    }

    pub fn n_exists(&self) -> usize {
        self.free_variables().1.len()
    }

    pub fn variable_count(&self) -> usize {
        let (h, b) = self.free_variables();
        h.len() + b.len()
    }

    /// Predicates used in the body, in body order (may repeat).
    pub fn body_predicates(&self) -> impl Iterator<Item = &Predicate> {
        self.body.iter().map(Atom::predicate)
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- {}, {}.", self.head, self.body[0], self.body[1])
    }
}

/// An induced rule set: one or two defining clauses per intensional
/// predicate, target clauses first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    target: Predicate,
    clauses: Vec<Clause>,
}

impl Program {
    pub fn new(target: Predicate, clauses: Vec<Clause>) -> Result<Self> {
        if target.kind() != PredicateKind::Target {
            return Err(Error::InvalidProgram(format!("{target} is not a target predicate")));
        }
        let mut order: Vec<&Predicate> = Vec::new();
        let mut counts: HashMap<&Predicate, usize> = HashMap::new();
        for c in &clauses {
            let p = c.head().predicate();
            if p == &target && p.kind() != PredicateKind::Target {
                return Err(Error::InvalidProgram(format!(
                    "clause head {p} is not tagged as the target"
                )));
            }
            if p != &target && p.kind() == PredicateKind::Target {
                return Err(Error::InvalidProgram(format!("second target predicate {p}")));
            }
            if order.last() != Some(&p) {
                if counts.contains_key(p) {
                    return Err(Error::InvalidProgram(format!(
                        "clauses for {p} are not grouped together"
                    )));
                }
                order.push(p);
            }
            *counts.entry(p).or_default() += 1;
        }
        if let Some((p, n)) = counts.iter().find(|(_, n)| **n > 2) {
            return Err(Error::InvalidProgram(format!("{p} has {n} clauses; at most 2 allowed")));
        }
        if !clauses.is_empty() && order[0] != &target {
            return Err(Error::InvalidProgram(
                "target clauses must come first".to_string(),
            ));
        }
        Ok(Self { target, clauses })
    }

    pub fn target(&self) -> &Predicate {
        &self.target
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Intensional predicates with at least one clause, in program order.
    pub fn defined_predicates(&self) -> Vec<&Predicate> {
        let mut out: Vec<&Predicate> = Vec::new();
        for c in &self.clauses {
            let p = c.head().predicate();
            if !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    pub fn clauses_for<'a>(&'a self, predicate: &'a Predicate) -> impl Iterator<Item = &'a Clause> {
        self.clauses
            .iter()
            .filter(move |c| c.head().predicate() == predicate)
    }

    /// All predicates mentioned anywhere in the program.
    pub fn predicates(&self) -> BTreeSet<&Predicate> {
        self.clauses
            .iter()
            .flat_map(|c| std::iter::once(c.head()).chain(c.body().iter()))
            .map(Atom::predicate)
            .collect()
    }

    pub fn max_arity(&self) -> usize {
        self.predicates().iter().map(|p| p.arity()).max().unwrap_or(0)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// The predicate signature and constant universe a problem is grounded over.
/// Constants keep insertion order; all downstream indexing uses it.
#[derive(Debug, Clone)]
pub struct Language {
    predicates: Vec<Predicate>,
    constants: Vec<Constant>,
    lookup: OnceLock<HashMap<Constant, usize>>,
}

impl Language {
    pub fn new(predicates: Vec<Predicate>, constants: Vec<Constant>) -> Result<Self> {
        if constants.is_empty() {
            return Err(Error::InvalidLanguage("constant set is empty".to_string()));
        }
        validate_predicates(&predicates)?;
        let language = Self {
            predicates,
            constants,
            lookup: OnceLock::new(),
        };
        if language.index().len() != language.constants.len() {
            return Err(Error::InvalidLanguage("constant list has duplicates".to_string()));
        }
        Ok(language)
    }

    fn index(&self) -> &HashMap<Constant, usize> {
        self.lookup.get_or_init(|| {
            self.constants
                .iter()
                .enumerate()
                .map(|(i, c)| (c.clone(), i))
                .collect()
        })
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.predicates
    }

    pub fn constants(&self) -> &[Constant] {
        &self.constants
    }

    pub fn constant_index(&self, c: &Constant) -> Option<usize> {
        self.index().get(c).copied()
    }

    pub fn predicate(&self, name: &str) -> Option<&Predicate> {
        self.predicates.iter().find(|p| p.name() == name)
    }

    pub fn target(&self) -> &Predicate {
        self.predicates
            .iter()
            .find(|p| p.kind() == PredicateKind::Target)
            .expect("language has a target predicate")
    }

    pub fn extensional(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates.iter().filter(|p| !p.is_intensional())
    }

    pub fn intensional(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates.iter().filter(|p| p.is_intensional())
    }

    /// Same constants, predicates extended by `extra` (e.g. auxiliaries).
    pub fn with_predicates(&self, extra: impl IntoIterator<Item = Predicate>) -> Result<Self> {
        let mut predicates = self.predicates.clone();
        predicates.extend(extra);
        validate_predicates(&predicates)?;
        Ok(Self {
            predicates,
            constants: self.constants.clone(),
            lookup: self.lookup.clone(),
        })
    }
}

fn validate_predicates(predicates: &[Predicate]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for p in predicates {
        if !seen.insert(p.name()) {
            return Err(Error::InvalidLanguage(format!(
                "predicate name {} is declared twice",
                p.name()
            )));
        }
    }
    let targets = predicates
        .iter()
        .filter(|p| p.kind() == PredicateKind::Target)
        .count();
    if targets != 1 {
        return Err(Error::InvalidLanguage(format!(
            "expected exactly one target predicate, found {targets}"
        )));
    }
    Ok(())
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fraud() -> Predicate {
        Predicate::target("Fraud", 2).unwrap()
    }

    #[test]
    fn substitute_replaces_variables() {
        let atom = Atom::new(fraud(), vec![Term::Var(0), Term::Var(1)]).unwrap();
        let binding: Binding = [(0, "a".into()), (1, "b".into())].into_iter().collect();
        assert_eq!(atom.substitute(&binding).unwrap().to_string(), "Fraud(a,b)");
    }

    #[test]
    fn substitute_ground_atom_is_identity() {
        let atom = Atom::ground(fraud(), ["a", "b"]).unwrap();
        assert_eq!(atom.substitute(&Binding::new()).unwrap(), atom);
    }

    #[test]
    fn substitute_reports_missing_binding() {
        let atom = Atom::new(fraud(), vec![Term::Var(0), Term::Var(1)]).unwrap();
        let binding: Binding = [(0, "a".into())].into_iter().collect();
        assert!(matches!(atom.substitute(&binding), Err(Error::UnboundVariable(1))));
    }

    #[test]
    fn free_variables_of_transitive_clause() {
        let connected = Predicate::target("connected", 2).unwrap();
        let edge = Predicate::extensional("edge", 2).unwrap();
        let v = Term::Var;
        let clause = Clause::new(
            Atom::new(connected.clone(), vec![v(0), v(1)]).unwrap(),
            Atom::new(edge, vec![v(0), v(2)]).unwrap(),
            Atom::new(connected, vec![v(2), v(1)]).unwrap(),
        )
        .unwrap();
        let (head, body_only) = clause.free_variables();
        assert_eq!(head, [0, 1].into_iter().collect());
        assert_eq!(body_only, [2].into_iter().collect());
    }

    #[test]
    fn free_variables_without_existentials() {
        let target = Predicate::target("Target", 1).unwrap();
        let a = Predicate::extensional("A", 1).unwrap();
        let b = Predicate::extensional("B", 1).unwrap();
        let x = || vec![Term::Var(0)];
        let clause = Clause::new(
            Atom::new(target, x()).unwrap(),
            Atom::new(a, x()).unwrap(),
            Atom::new(b, x()).unwrap(),
        )
        .unwrap();
        assert_eq!(clause.n_exists(), 0);
    }

    #[test]
    fn free_variables_two_existentials() {
        let p = Predicate::target("p", 1).unwrap();
        let q = Predicate::extensional("q", 2).unwrap();
        let r = Predicate::extensional("r", 2).unwrap();
        let v = Term::Var;
        let clause = Clause::new(
            Atom::new(p, vec![v(0)]).unwrap(),
            Atom::new(q, vec![v(0), v(1)]).unwrap(),
            Atom::new(r, vec![v(1), v(2)]).unwrap(),
        )
        .unwrap();
        let (head, body_only) = clause.free_variables();
        assert_eq!(head.len(), 1);
        assert_eq!(body_only, [1, 2].into_iter().collect());
    }

    #[test]
    fn clause_rejects_missing_head_variable() {
        let p = Predicate::target("p", 2).unwrap();
        let a = Predicate::extensional("a", 1).unwrap();
        let v = Term::Var;
        let err = Clause::new(
            Atom::new(p, vec![v(0), v(1)]).unwrap(),
            Atom::new(a.clone(), vec![v(0)]).unwrap(),
            Atom::new(a, vec![v(0)]).unwrap(),
        );
        assert!(matches!(err, Err(Error::InvalidClause(_))));
    }

    #[test]
    fn clause_rejects_head_in_body() {
        let p = Predicate::target("p", 1).unwrap();
        let a = Predicate::extensional("A", 1).unwrap();
        let x = || vec![Term::Var(0)];
        let err = Clause::new(
            Atom::new(p.clone(), x()).unwrap(),
            Atom::new(p, x()).unwrap(),
            Atom::new(a, x()).unwrap(),
        );
        assert!(matches!(err, Err(Error::InvalidClause(_))));
    }

    #[test]
    fn clause_rejects_extensional_head() {
        let a = Predicate::extensional("A", 1).unwrap();
        let x = || vec![Term::Var(0)];
        let err = Clause::new(
            Atom::new(a.clone(), x()).unwrap(),
            Atom::new(a.clone(), x()).unwrap(),
            Atom::new(a, x()).unwrap(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn atom_arity_is_checked() {
        assert!(Atom::ground(fraud(), ["a"]).is_err());
        assert!(Predicate::extensional("wide", 3).is_err());
    }

    #[test]
    fn language_validation() {
        let t = Predicate::target("T", 1).unwrap();
        let a = Predicate::extensional("A", 1).unwrap();
        assert!(Language::new(vec![t.clone(), a.clone()], vec![]).is_err());
        assert!(Language::new(vec![a.clone()], vec!["x".into()]).is_err());
        assert!(Language::new(vec![t.clone(), a.clone()], vec!["x".into(), "x".into()]).is_err());
        let lang = Language::new(vec![t, a], vec!["x".into(), "y".into()]).unwrap();
        assert_eq!(lang.constant_index(&"y".into()), Some(1));
        let aux = Predicate::auxiliary("pred1", 1).unwrap();
        let extended = lang.with_predicates([aux]).unwrap();
        assert_eq!(extended.predicates().len(), 3);
        assert!(extended
            .with_predicates([Predicate::auxiliary("A", 1).unwrap()])
            .is_err());
    }

    #[test]
    fn constants_quote_when_ambiguous() {
        assert_eq!(Constant::new("16051").to_string(), "16051");
        assert_eq!(Constant::new("abc").to_string(), "abc");
        assert_eq!(Constant::new("X0").to_string(), "\"X0\"");
        assert_eq!(Constant::new("a b").to_string(), "\"a b\"");
    }
}
