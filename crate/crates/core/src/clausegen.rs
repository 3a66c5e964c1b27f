//! Candidate clause generation from rule templates.
//!
//! Every generated clause has exactly two body atoms over predicates of arity
//! at most two, mentions each head variable in its body, does not repeat its
//! head atom in the body, uses at most `n_exists` body-only variables, and
//! only uses intensional predicates in the body when the template allows it.
//! Body pairs are normalized (sorted, body-only variables renamed) so no two
//! candidates for one slot are equal up to atom swap or variable renaming.
//!
//! The extended circular restriction spans two predicates and is therefore
//! applied to clause *pairs* and whole programs, not single clauses: the
//! target atom over a clause's head variables may not appear in the body of
//! an auxiliary predicate that the target depends on.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{Atom, Clause, Language, Predicate, PredicateKind, Program, Term};

pub const DEFAULT_MAX_EXISTS: usize = 2;
pub const DEFAULT_MEMORY_CAP_BYTES: u64 = 2 << 30;

/// `(n_exists, int)`: how many body-only variables a clause may use and
/// whether intensional predicates may appear in its body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleTemplate {
    pub n_exists: usize,
    #[serde(rename = "int")]
    pub allow_intensional: bool,
}

impl RuleTemplate {
    pub const fn new(n_exists: usize, allow_intensional: bool) -> Self {
        Self {
            n_exists,
            allow_intensional,
        }
    }
}

/// Language bias for one learning problem.
#[derive(Debug, Clone)]
pub struct ProgramTemplate {
    pub target: Predicate,
    pub auxiliary: Vec<Predicate>,
    /// Two rule templates per intensional predicate, keyed by predicate name.
    pub rules: BTreeMap<String, (RuleTemplate, RuleTemplate)>,
    pub inference_steps: usize,
    /// Reject any occurrence of the target predicate in any clause body.
    pub prevent_target_recursion: bool,
    /// Mask clause pairs that would re-enter the target through an auxiliary.
    pub extended_circularity: bool,
    pub max_exists: usize,
    pub memory_cap_bytes: u64,
}

impl ProgramTemplate {
    pub fn new(
        target: Predicate,
        auxiliary: Vec<Predicate>,
        rules: BTreeMap<String, (RuleTemplate, RuleTemplate)>,
        inference_steps: usize,
    ) -> Result<Self> {
        let template = Self {
            target: target.with_kind(PredicateKind::Target),
            auxiliary: auxiliary
                .into_iter()
                .map(|p| p.with_kind(PredicateKind::Auxiliary))
                .collect(),
            rules,
            inference_steps,
            prevent_target_recursion: false,
            extended_circularity: true,
            max_exists: DEFAULT_MAX_EXISTS,
            memory_cap_bytes: DEFAULT_MEMORY_CAP_BYTES,
        };
        template.validate()?;
        Ok(template)
    }

    /// Same pair of templates for the target and every auxiliary predicate.
    pub fn uniform(
        target: Predicate,
        auxiliary: Vec<Predicate>,
        rule: (RuleTemplate, RuleTemplate),
        inference_steps: usize,
    ) -> Result<Self> {
        let rules = std::iter::once(&target)
            .chain(auxiliary.iter())
            .map(|p| (p.name().to_string(), rule))
            .collect();
        Self::new(target, auxiliary, rules, inference_steps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inference_steps == 0 {
            return Err(Error::InvalidTemplate("inference_steps must be at least 1".into()));
        }
        let names: BTreeSet<&str> = self.intensional().map(Predicate::name).collect();
        if names.len() != 1 + self.auxiliary.len() {
            return Err(Error::InvalidTemplate("intensional predicate names must be unique".into()));
        }
        for name in &names {
            let Some((a, b)) = self.rules.get(*name) else {
                return Err(Error::InvalidTemplate(format!("no rule templates for {name}")));
            };
            for t in [a, b] {
                if t.n_exists > self.max_exists {
                    return Err(Error::InvalidTemplate(format!(
                        "{name}: n_exists {} exceeds the cap of {}",
                        t.n_exists, self.max_exists
                    )));
                }
            }
        }
        if let Some(extra) = self.rules.keys().find(|k| !names.contains(k.as_str())) {
            return Err(Error::InvalidTemplate(format!(
                "rule templates given for unknown predicate {extra}"
            )));
        }
        Ok(())
    }

    /// Target first, then auxiliaries in declaration order.
    pub fn intensional(&self) -> impl Iterator<Item = &Predicate> {
        std::iter::once(&self.target).chain(self.auxiliary.iter())
    }

    pub fn rules_for(&self, predicate: &Predicate) -> (RuleTemplate, RuleTemplate) {
        self.rules[predicate.name()]
    }

    /// `base` extended with any auxiliary predicates it does not declare yet.
    pub fn language(&self, base: &Language) -> Result<Language> {
        if base.target() != &self.target {
            return Err(Error::InvalidTemplate(format!(
                "template target {} differs from the data's target {}",
                self.target,
                base.target()
            )));
        }
        let mut missing = Vec::new();
        for aux in &self.auxiliary {
            match base.predicate(aux.name()) {
                Some(p) if p.kind() == PredicateKind::Auxiliary && p.arity() == aux.arity() => {}
                Some(p) => {
                    return Err(Error::InvalidTemplate(format!(
                        "auxiliary {aux} clashes with declared predicate {p}"
                    )))
                }
                None => missing.push(aux.clone()),
            }
        }
        base.with_predicates(missing)
    }

    /// Number of "possible predicate columns": extensional predicates plus
    /// auxiliaries.
    pub fn rule_size(&self, language: &Language) -> usize {
        language.extensional().count() + self.auxiliary.len()
    }
}

/// Enumerates every admissible clause for `predicate` under `template`.
pub fn generate_clauses(
    predicate: &Predicate,
    template: RuleTemplate,
    language: &Language,
) -> Result<Vec<Clause>> {
    let Some(head_pred) = language.predicate(predicate.name()).filter(|p| p.is_intensional()) else {
        return Err(Error::InvalidTemplate(format!(
            "{predicate} is not an intensional predicate of the language"
        )));
    };
    let arity = head_pred.arity();
    let n_vars = arity + template.n_exists;
    if n_vars > 6 {
        return Err(Error::InvalidTemplate(format!(
            "{predicate}: {} existential variables is too many",
            template.n_exists
        )));
    }
    let head = Atom::new(head_pred.clone(), (0..arity as u8).map(Term::Var).collect())?;

    let mut allowed: Vec<&Predicate> = language
        .predicates()
        .iter()
        .filter(|p| !p.is_intensional() || template.allow_intensional)
        .collect();
    allowed.sort();

    let mut atoms = Vec::new();
    for p in allowed {
        for tuple in tuples(n_vars, p.arity()) {
            atoms.push(Atom::new(p.clone(), tuple.into_iter().map(Term::Var).collect())?);
        }
    }

    let head_vars: BTreeSet<u8> = head.variables().collect();
    let mut bodies: BTreeSet<(Atom, Atom)> = BTreeSet::new();
    for (i, a) in atoms.iter().enumerate() {
        if a == &head {
            continue;
        }
        for b in &atoms[i..] {
            if b == &head {
                continue;
            }
            let used: BTreeSet<u8> = a.variables().chain(b.variables()).collect();
            if !head_vars.is_subset(&used) {
                continue;
            }
            bodies.insert(canonical_body(a, b, arity as u8));
        }
    }

    let clauses = bodies
        .into_iter()
        .map(|(a, b)| Clause::new(head.clone(), a, b))
        .collect::<Result<Vec<_>>>()?;
    if clauses.is_empty() {
        return Err(Error::EmptyCandidateSpace {
            predicate: predicate.name().to_string(),
        });
    }
    Ok(clauses)
}

/// All `len`-tuples over `0..n`, lexicographic.
fn tuples(n: usize, len: usize) -> Vec<Vec<u8>> {
    (0..len).fold(vec![Vec::new()], |acc, _| {
        acc.into_iter()
            .flat_map(|prefix| {
                (0..n as u8).map(move |v| {
                    let mut t = prefix.clone();
                    t.push(v);
                    t
                })
            })
            .collect()
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// Smallest sorted body pair over all renamings of the body-only variables
/// onto `first_free..`.
fn canonical_body(a: &Atom, b: &Atom, first_free: u8) -> (Atom, Atom) {
    let used: Vec<u8> = a
        .variables()
        .chain(b.variables())
        .filter(|v| *v >= first_free)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut best: Option<(Atom, Atom)> = None;
    for perm in permutations(used.len()) {
        let rename = |v: u8| match used.iter().position(|u| *u == v) {
            Some(k) => first_free + perm[k] as u8,
            None => v,
        };
        let (x, y) = (a.map_vars(rename), b.map_vars(rename));
        let pair = if x <= y { (x, y) } else { (y, x) };
        if best.as_ref().is_none_or(|b| &pair < b) {
            best = Some(pair);
        }
    }
    best.expect("at least one permutation")
}

/// Whether the body of `clause` holds the target atom over the clause's own
/// head variables.
fn reenters_target(clause: &Clause, target: &Predicate) -> bool {
    let (head_vars, _) = clause.free_variables();
    clause.body().iter().any(|atom| {
        atom.predicate() == target
            && atom
                .terms()
                .iter()
                .all(|t| t.var().is_some_and(|v| head_vars.contains(&v)))
    })
}

fn mentions_target(clause: &Clause, target: &Predicate) -> bool {
    clause.body_predicates().any(|p| p == target)
}

/// Whether a clause pair for `predicate` may be selected at all.
pub fn pair_admissible(
    predicate: &Predicate,
    first: &Clause,
    second: &Clause,
    template: &ProgramTemplate,
) -> bool {
    let target = &template.target;
    let pair = [first, second];
    if template.prevent_target_recursion && pair.iter().any(|c| mentions_target(c, target)) {
        return false;
    }
    if template.extended_circularity
        && predicate != target
        && pair.iter().any(|c| reenters_target(c, target))
    {
        return false;
    }
    true
}

/// Program-level check of the extended circular restriction: no auxiliary
/// predicate reachable from the target's clauses may contain the target atom
/// over its head variables in a body. With `prevent_target_recursion`, the
/// target may not occur in any body at all.
pub fn check_extended_circularity(program: &Program, prevent_target_recursion: bool) -> bool {
    let target = program.target();
    if prevent_target_recursion
        && program.clauses().iter().any(|c| mentions_target(c, target))
    {
        return false;
    }
    let mut reached: BTreeSet<&Predicate> = BTreeSet::new();
    let mut queue: VecDeque<&Predicate> = VecDeque::from([target]);
    while let Some(p) = queue.pop_front() {
        for clause in program.clauses_for(p) {
            for q in clause.body_predicates() {
                if q.is_intensional() && q != target && reached.insert(q) {
                    queue.push_back(q);
                }
            }
        }
    }
    !reached
        .iter()
        .flat_map(|q| program.clauses_for(q))
        .any(|c| reenters_target(c, target))
}

/// Candidate clauses of one intensional predicate.
#[derive(Debug, Clone)]
pub struct PredicateSpace {
    pub predicate: Predicate,
    pub templates: (RuleTemplate, RuleTemplate),
    pub slot1: Vec<Clause>,
    pub slot2: Vec<Clause>,
    /// Row-major over `slot1 × slot2`.
    pub admissible: Vec<bool>,
}

impl PredicateSpace {
    /// Both slots hold the same candidate list.
    pub fn shared(&self) -> bool {
        self.templates.0 == self.templates.1
    }

    pub fn pair_count(&self) -> usize {
        self.slot1.len() * self.slot2.len()
    }

    pub fn admissible_count(&self) -> usize {
        self.admissible.iter().filter(|a| **a).count()
    }

    /// The clauses selected by flattened pair index; a diagonal pair of a
    /// shared space yields a single clause.
    pub fn pair(&self, flat: usize) -> Vec<&Clause> {
        let (j, k) = (flat / self.slot2.len(), flat % self.slot2.len());
        let (a, b) = (&self.slot1[j], &self.slot2[k]);
        if a == b {
            vec![a]
        } else {
            vec![a, b]
        }
    }
}

/// Rough memory need of training, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryEstimate {
    /// Pair weights plus their gradient and optimizer state.
    pub weights: u64,
    /// Ground clause instance tables.
    pub instances: u64,
    /// Per-step valuations and clause activations kept for the backward pass.
    pub activations: u64,
}

impl MemoryEstimate {
    pub fn total(&self) -> u64 {
        self.weights
            .saturating_add(self.instances)
            .saturating_add(self.activations)
    }
}

/// Candidate lists for every intensional predicate of a template.
#[derive(Debug, Clone)]
pub struct CandidateSpace {
    pub predicates: Vec<PredicateSpace>,
}

impl CandidateSpace {
    pub fn get(&self, predicate: &Predicate) -> Option<&PredicateSpace> {
        self.predicates.iter().find(|p| &p.predicate == predicate)
    }

    pub fn pair_counts(&self) -> Vec<(&str, usize)> {
        self.predicates
            .iter()
            .map(|p| (p.predicate.name(), p.pair_count()))
            .collect()
    }

    pub fn estimate_memory(&self, language: &Language, steps: usize) -> MemoryEstimate {
        let n = language.constants().len() as u128;
        let pow = |e: usize| n.saturating_pow(e as u32);
        let mut weights: u128 = 0;
        let mut instances: u128 = 0;
        let mut per_step: u128 = language
            .predicates()
            .iter()
            .map(|p| pow(p.arity()) * 8)
            .sum();
        for ps in &self.predicates {
            weights += ps.pair_count() as u128 * 8 * 3;
            let heads = pow(ps.predicate.arity());
            let lists: &[&Vec<Clause>] = if ps.shared() {
                &[&ps.slot1]
            } else {
                &[&ps.slot1, &ps.slot2]
            };
            for clause in lists.iter().flat_map(|l| l.iter()) {
                instances += heads.saturating_mul(pow(clause.n_exists())) * 8 + heads * 4;
                per_step += heads * 12;
            }
            per_step += heads * 8;
        }
        let clamp = |v: u128| v.min(u64::MAX as u128) as u64;
        MemoryEstimate {
            weights: clamp(weights),
            instances: clamp(instances),
            activations: clamp(per_step.saturating_mul(steps as u128)),
        }
    }
}

/// Generates candidates for every intensional predicate of `template`,
/// masks inadmissible pairs and enforces the memory cap.
pub fn build_candidate_space(template: &ProgramTemplate, language: &Language) -> Result<CandidateSpace> {
    template.validate()?;
    let language = template.language(language)?;
    let mut predicates = Vec::new();
    for predicate in template.intensional() {
        let (t1, t2) = template.rules_for(predicate);
        let slot1 = generate_clauses(predicate, t1, &language)?;
        let slot2 = if t1 == t2 {
            slot1.clone()
        } else {
            generate_clauses(predicate, t2, &language)?
        };
        let admissible: Vec<bool> = slot1
            .iter()
            .flat_map(|a| slot2.iter().map(move |b| (a, b)))
            .map(|(a, b)| pair_admissible(predicate, a, b, template))
            .collect();
        if !admissible.iter().any(|a| *a) {
            return Err(Error::EmptyCandidateSpace {
                predicate: predicate.name().to_string(),
            });
        }
        debug!(
            "{predicate}: {} x {} candidates, {} admissible pairs",
            slot1.len(),
            slot2.len(),
            admissible.iter().filter(|a| **a).count()
        );
        predicates.push(PredicateSpace {
            predicate: language
                .predicate(predicate.name())
                .expect("intensional predicate declared")
                .clone(),
            templates: (t1, t2),
            slot1,
            slot2,
            admissible,
        });
    }
    let space = CandidateSpace { predicates };
    let estimate = space.estimate_memory(&language, template.inference_steps);
    if estimate.total() > template.memory_cap_bytes {
        return Err(Error::MemoryCapExceeded {
            what: "the candidate space and its groundings",
            estimate: estimate.total(),
            cap: template.memory_cap_bytes,
        });
    }
    Ok(space)
}
