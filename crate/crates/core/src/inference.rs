//! Differentiable forward chaining over a grounded candidate space.
//!
//! Semantics of one soft step, per intensional predicate with pair weights W:
//!
//! * clause value `c_j(h)`: max over the ground instances of clause `j` with
//!   head `h` of the product of the two body valuations;
//! * pair value `f_jk(h) = max(c_j(h), c_k(h))`;
//! * mixed value `b(h) = Σ_jk softmax(W)_jk · f_jk(h)`, where inadmissible
//!   pairs are outside the softmax support;
//! * amalgamation `v'(h) = v(h) + b(h) − v(h)·b(h)` (probabilistic sum).
//!
//! Extensional entries never change.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::clausegen::{CandidateSpace, PredicateSpace};
use crate::error::{Error, Result};
use crate::logic::{Atom, Clause, Constant, Language, Predicate, Term};

const NO_INSTANCE: u32 = u32::MAX;

/// Logit used for "excluded" entries of one-hot weight sets; its softmax
/// mass underflows to exactly zero next to a logit of 0.
const OFF_LOGIT: f64 = -1.0e4;

#[derive(Debug, Clone)]
struct Block {
    predicate: Predicate,
    offset: usize,
    len: usize,
}

/// Dense numbering of every ground atom of a language: extensional blocks
/// first, then intensional, each block ordered by constant tuple.
#[derive(Debug, Clone)]
pub struct GroundIndex {
    language: Language,
    blocks: Vec<Block>,
    len: usize,
    extensional_len: usize,
}

pub fn build_ground_index(language: &Language, memory_cap_bytes: u64) -> Result<GroundIndex> {
    let n = language.constants().len() as u128;
    let size: u128 = language
        .predicates()
        .iter()
        .map(|p| n.pow(p.arity() as u32))
        .sum();
    let bytes = size.saturating_mul(8);
    if bytes > memory_cap_bytes as u128 {
        return Err(Error::MemoryCapExceeded {
            what: "the ground atom index",
            estimate: bytes.min(u64::MAX as u128) as u64,
            cap: memory_cap_bytes,
        });
    }
    let n = n as usize;
    let ordered = language
        .extensional()
        .chain(language.intensional())
        .cloned();
    let mut blocks = Vec::new();
    let mut offset = 0;
    let mut extensional_len = 0;
    for predicate in ordered {
        let len = n.pow(predicate.arity() as u32);
        if !predicate.is_intensional() {
            extensional_len += len;
        }
        blocks.push(Block {
            predicate,
            offset,
            len,
        });
        offset += len;
    }
    Ok(GroundIndex {
        language: language.clone(),
        blocks,
        len: offset,
        extensional_len,
    })
}

impl GroundIndex {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn extensional_len(&self) -> usize {
        self.extensional_len
    }

    pub fn language(&self) -> &Language {
        &self.language
    }

    fn block(&self, predicate: &Predicate) -> Option<&Block> {
        self.blocks.iter().find(|b| &b.predicate == predicate)
    }

    /// `(offset, len)` of a predicate's block.
    pub fn span(&self, predicate: &Predicate) -> Option<(usize, usize)> {
        self.block(predicate).map(|b| (b.offset, b.len))
    }

    /// Index of `predicate(args…)` where `args` are constant positions.
    pub fn position(&self, predicate: &Predicate, args: &[usize]) -> Option<usize> {
        let block = self.block(predicate)?;
        let n = self.language.constants().len();
        let mut local = 0;
        for &a in args {
            if a >= n {
                return None;
            }
            local = local * n + a;
        }
        Some(block.offset + local)
    }

    pub fn index_of(&self, atom: &Atom) -> Option<usize> {
        let args = atom
            .terms()
            .iter()
            .map(|t| match t {
                Term::Const(c) => self.language.constant_index(c),
                Term::Var(_) => None,
            })
            .collect::<Option<Vec<_>>>()?;
        self.position(atom.predicate(), &args)
    }

    pub fn atom_at(&self, index: usize) -> Option<Atom> {
        let block = self
            .blocks
            .iter()
            .find(|b| index >= b.offset && index < b.offset + b.len)?;
        let constants = self.language.constants();
        let args = decode(index - block.offset, constants.len(), block.predicate.arity());
        let terms: Vec<Constant> = args.into_iter().map(|i| constants[i].clone()).collect();
        Atom::ground(block.predicate.clone(), terms).ok()
    }
}

/// Constant positions of the `local`-th tuple of the given arity.
fn decode(mut local: usize, n: usize, arity: usize) -> Vec<usize> {
    let mut out = vec![0; arity];
    for slot in out.iter_mut().rev() {
        *slot = local % n;
        local /= n;
    }
    out
}

/// Truth degree per ground atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Valuation(Vec<f64>);

impl Valuation {
    pub fn zeros(index: &GroundIndex) -> Self {
        Self(vec![0.0; index.len()])
    }

    /// Characteristic vector of `facts`; atoms outside the index are ignored.
    pub fn from_facts<'a>(index: &GroundIndex, facts: impl IntoIterator<Item = &'a Atom>) -> Self {
        let mut v = Self::zeros(index);
        for atom in facts {
            if let Some(i) = index.index_of(atom) {
                v.0[i] = 1.0;
            }
        }
        v
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Ground instances of one clause: for every ground head atom of its
/// predicate (in block order), the body index pairs of each substitution.
#[derive(Debug, Clone)]
pub struct CompiledClause {
    offsets: Vec<u32>,
    pairs: Vec<[u32; 2]>,
}

impl CompiledClause {
    pub fn heads(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn instances(&self, head: usize) -> &[[u32; 2]] {
        &self.pairs[self.offsets[head] as usize..self.offsets[head + 1] as usize]
    }

    pub fn total_instances(&self) -> usize {
        self.pairs.len()
    }
}

pub fn compile_clause(clause: &Clause, index: &GroundIndex) -> CompiledClause {
    let language = &index.language;
    let n = language.constants().len();
    let head = clause.head();
    let arity = head.predicate().arity();
    let n_heads = n.pow(arity as u32);
    let n_vars = clause.variable_count();
    let (head_vars, body_only) = clause.free_variables();
    let body_only: Vec<u8> = body_only.into_iter().collect();
    debug_assert!(head_vars.iter().all(|v| (*v as usize) < n_vars));

    enum Slot {
        Var(usize),
        Const(Option<usize>),
    }
    let slots = |a: &Atom| -> Vec<Slot> {
        a.terms()
            .iter()
            .map(|t| match t {
                Term::Var(v) => Slot::Var(*v as usize),
                Term::Const(c) => Slot::Const(language.constant_index(c)),
            })
            .collect()
    };
    let head_slots = slots(head);
    let body_slots = [slots(&clause.body()[0]), slots(&clause.body()[1])];
    let body_preds = [clause.body()[0].predicate(), clause.body()[1].predicate()];

    let mut offsets = Vec::with_capacity(n_heads + 1);
    let mut pairs = Vec::new();
    offsets.push(0u32);
    let mut env = vec![usize::MAX; n_vars.max(1)];
    let mut args = [Vec::with_capacity(2), Vec::with_capacity(2)];
    for h in 0..n_heads {
        env.iter_mut().for_each(|e| *e = usize::MAX);
        let head_args = decode(h, n, arity);
        let mut consistent = true;
        for (slot, &value) in head_slots.iter().zip(&head_args) {
            match slot {
                Slot::Const(c) => consistent &= *c == Some(value),
                Slot::Var(v) => {
                    if env[*v] == usize::MAX {
                        env[*v] = value;
                    } else {
                        consistent &= env[*v] == value;
                    }
                }
            }
        }
        if consistent {
            let combos = n.pow(body_only.len() as u32);
            for combo in 0..combos {
                for (k, value) in decode(combo, n, body_only.len()).into_iter().enumerate() {
                    env[body_only[k] as usize] = value;
                }
                let mut ok = true;
                for (i, s) in body_slots.iter().enumerate() {
                    args[i].clear();
                    for slot in s {
                        match slot {
                            Slot::Var(v) => args[i].push(env[*v]),
                            Slot::Const(Some(c)) => args[i].push(*c),
                            Slot::Const(None) => ok = false,
                        }
                    }
                }
                if !ok {
                    continue;
                }
                let b1 = index.position(body_preds[0], &args[0]);
                let b2 = index.position(body_preds[1], &args[1]);
                if let (Some(b1), Some(b2)) = (b1, b2) {
                    pairs.push([b1 as u32, b2 as u32]);
                }
            }
        }
        offsets.push(pairs.len() as u32);
    }
    CompiledClause { offsets, pairs }
}

/// Learnable logits over the `slot1 × slot2` clause pairs of one predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct PairWeights {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl PairWeights {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }
}

/// One pair-weight matrix per intensional predicate, aligned with the
/// candidate space order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub predicates: Vec<PairWeights>,
}

impl WeightSet {
    pub fn zeros(space: &CandidateSpace) -> Self {
        Self {
            predicates: space
                .predicates
                .iter()
                .map(|p| PairWeights::zeros(p.slot1.len(), p.slot2.len()))
                .collect(),
        }
    }

    pub fn random<R: Rng>(space: &CandidateSpace, scale: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, scale.max(0.0)).expect("finite scale");
        let mut w = Self::zeros(space);
        for m in &mut w.predicates {
            for x in &mut m.values {
                *x = normal.sample(rng);
            }
        }
        w
    }

    /// Weights whose softmax puts all mass on one flattened pair per predicate.
    pub fn one_hot(space: &CandidateSpace, choices: &[usize]) -> Self {
        let mut w = Self::zeros(space);
        for (m, &choice) in w.predicates.iter_mut().zip(choices) {
            m.values.iter_mut().for_each(|x| *x = OFF_LOGIT);
            m.values[choice] = 0.0;
        }
        w
    }

    pub fn len(&self) -> usize {
        self.predicates.iter().map(|m| m.values.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.predicates.iter().flat_map(|m| m.values.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.predicates.iter_mut().flat_map(|m| m.values.iter_mut())
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn same_shape(&self, space: &CandidateSpace) -> bool {
        self.predicates.len() == space.predicates.len()
            && self
                .predicates
                .iter()
                .zip(&space.predicates)
                .all(|(m, p)| m.rows == p.slot1.len() && m.cols == p.slot2.len())
    }
}

/// Softmax over the admissible entries; inadmissible entries get 0.
pub fn masked_softmax(logits: &[f64], admissible: &[bool]) -> Vec<f64> {
    let max = logits
        .iter()
        .zip(admissible)
        .filter(|(_, a)| **a)
        .map(|(x, _)| *x)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits
        .iter()
        .zip(admissible)
        .map(|(x, a)| if *a { (x - max).exp() } else { 0.0 })
        .collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    out
}

#[derive(Debug, Clone)]
pub struct CompiledPredicate {
    pub predicate: Predicate,
    offset: usize,
    heads: usize,
    slot1: Vec<CompiledClause>,
    /// `None` when both slots share the same candidate list.
    slot2: Option<Vec<CompiledClause>>,
    admissible: Vec<bool>,
}

impl CompiledPredicate {
    fn slot2(&self) -> &[CompiledClause] {
        self.slot2.as_deref().unwrap_or(&self.slot1)
    }
}

/// A candidate space grounded over a language.
#[derive(Debug, Clone)]
pub struct CompiledSpace {
    index: GroundIndex,
    predicates: Vec<CompiledPredicate>,
}

impl CompiledSpace {
    pub fn index(&self) -> &GroundIndex {
        &self.index
    }

    pub fn predicates(&self) -> &[CompiledPredicate] {
        &self.predicates
    }
}

/// Grounds every candidate clause of `space` over `index`.
pub fn compile_space(space: &CandidateSpace, index: GroundIndex) -> Result<CompiledSpace> {
    let predicates = space
        .predicates
        .iter()
        .map(|ps| compile_predicate(ps, &index))
        .collect::<Result<Vec<_>>>()?;
    Ok(CompiledSpace { index, predicates })
}

fn compile_predicate(ps: &PredicateSpace, index: &GroundIndex) -> Result<CompiledPredicate> {
    let (offset, heads) = index.span(&ps.predicate).ok_or_else(|| {
        Error::InvalidTemplate(format!("{} is missing from the ground index", ps.predicate))
    })?;
    let compile = |list: &[Clause]| list.iter().map(|c| compile_clause(c, index)).collect();
    Ok(CompiledPredicate {
        predicate: ps.predicate.clone(),
        offset,
        heads,
        slot1: compile(&ps.slot1),
        slot2: (!ps.shared()).then(|| compile(&ps.slot2)),
        admissible: ps.admissible.clone(),
    })
}

/// Clause values per (clause, head), row-major by clause, with the index of
/// the maximizing instance.
#[derive(Debug, Clone)]
struct ClauseValues {
    values: Vec<f64>,
    argmax: Vec<u32>,
}

fn clause_values(clauses: &[CompiledClause], heads: usize, v: &[f64]) -> ClauseValues {
    let mut values = vec![0.0; clauses.len() * heads];
    let mut argmax = vec![NO_INSTANCE; clauses.len() * heads];
    for (j, clause) in clauses.iter().enumerate() {
        for h in 0..heads {
            let mut best = 0.0;
            let mut arg = NO_INSTANCE;
            for (i, [a, b]) in clause.instances(h).iter().enumerate() {
                let x = v[*a as usize] * v[*b as usize];
                if arg == NO_INSTANCE || x > best {
                    best = x;
                    arg = i as u32;
                }
            }
            values[j * heads + h] = best;
            argmax[j * heads + h] = arg;
        }
    }
    ClauseValues { values, argmax }
}

fn mix(probs: &[f64], c1: &[f64], c2: &[f64], n2: usize, heads: usize) -> Vec<f64> {
    let mut b = vec![0.0; heads];
    for (flat, &s) in probs.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let (j, k) = (flat / n2, flat % n2);
        let r1 = &c1[j * heads..(j + 1) * heads];
        let r2 = &c2[k * heads..(k + 1) * heads];
        for ((acc, x), y) in b.iter_mut().zip(r1).zip(r2) {
            *acc += s * x.max(*y);
        }
    }
    b.iter_mut().for_each(|x| *x = x.min(1.0));
    b
}

#[derive(Debug, Clone)]
struct PredicateRecord {
    c1: ClauseValues,
    c2: Option<ClauseValues>,
    mixed: Vec<f64>,
}

#[derive(Debug, Clone)]
struct StepRecord {
    input: Vec<f64>,
    predicates: Vec<PredicateRecord>,
}

/// Everything the backward pass needs from a forward run.
#[derive(Debug, Clone)]
pub struct Tape {
    probs: Vec<Vec<f64>>,
    steps: Vec<StepRecord>,
    output: Valuation,
}

impl Tape {
    pub fn output(&self) -> &Valuation {
        &self.output
    }
}

fn step_recorded(
    v: &[f64],
    probs: &[Vec<f64>],
    space: &CompiledSpace,
) -> (Vec<f64>, Vec<PredicateRecord>) {
    let mut out = v.to_vec();
    let mut records = Vec::with_capacity(space.predicates.len());
    for (cp, s) in space.predicates.iter().zip(probs) {
        let c1 = clause_values(&cp.slot1, cp.heads, v);
        let c2 = cp
            .slot2
            .as_ref()
            .map(|list| clause_values(list, cp.heads, v));
        let n2 = cp.slot2().len();
        let mixed = mix(s, &c1.values, &c2.as_ref().unwrap_or(&c1).values, n2, cp.heads);
        for (h, b) in mixed.iter().enumerate() {
            let x = v[cp.offset + h];
            out[cp.offset + h] = 1.0 - (1.0 - x) * (1.0 - b);
        }
        records.push(PredicateRecord { c1, c2, mixed });
    }
    (out, records)
}

fn probabilities(weights: &WeightSet, space: &CompiledSpace) -> Vec<Vec<f64>> {
    weights
        .predicates
        .iter()
        .zip(&space.predicates)
        .map(|(w, cp)| masked_softmax(&w.values, &cp.admissible))
        .collect()
}

/// One soft inference step.
pub fn soft_step(valuation: &Valuation, weights: &WeightSet, space: &CompiledSpace) -> Valuation {
    let probs = probabilities(weights, space);
    Valuation(step_recorded(&valuation.0, &probs, space).0)
}

/// `steps` applications of [`soft_step`].
pub fn forward_chain(
    facts: &Valuation,
    weights: &WeightSet,
    space: &CompiledSpace,
    steps: usize,
) -> Valuation {
    let probs = probabilities(weights, space);
    let mut v = facts.0.clone();
    for _ in 0..steps {
        v = step_recorded(&v, &probs, space).0;
    }
    Valuation(v)
}

/// Forward chaining that keeps the intermediate values for [`backward`].
pub fn forward_recorded(
    facts: &Valuation,
    weights: &WeightSet,
    space: &CompiledSpace,
    steps: usize,
) -> Tape {
    let probs = probabilities(weights, space);
    let mut v = facts.0.clone();
    let mut records = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (next, predicates) = step_recorded(&v, &probs, space);
        records.push(StepRecord {
            input: std::mem::replace(&mut v, next),
            predicates,
        });
    }
    Tape {
        probs,
        steps: records,
        output: Valuation(v),
    }
}

/// Gradient of a scalar loss with respect to the pair logits, given the
/// loss gradient with respect to the final valuation. Max operations route
/// the gradient to their maximizing argument, lowest index first on ties.
pub fn backward(tape: &Tape, space: &CompiledSpace, output_grad: &[f64]) -> WeightSet {
    let mut prob_grads: Vec<Vec<f64>> = tape.probs.iter().map(|p| vec![0.0; p.len()]).collect();
    let mut g = output_grad.to_vec();
    for record in tape.steps.iter().rev() {
        let v = &record.input;
        let mut g_in = g.clone();
        // amalgamation self-terms first: routing below adds into any block
        for (cp, rec) in space.predicates.iter().zip(&record.predicates) {
            for h in 0..cp.heads {
                let i = cp.offset + h;
                g_in[i] = g[i] * (1.0 - rec.mixed[h]);
            }
        }
        for ((cp, rec), (s, gs)) in space
            .predicates
            .iter()
            .zip(&record.predicates)
            .zip(tape.probs.iter().zip(prob_grads.iter_mut()))
        {
            let heads = cp.heads;
            let n2 = cp.slot2().len();
            let g_mixed: Vec<f64> = (cp.offset..cp.offset + heads)
                .map(|i| g[i] * (1.0 - v[i]))
                .collect();
            let c1 = &rec.c1.values;
            let c2 = &rec.c2.as_ref().unwrap_or(&rec.c1).values;
            let mut gc1 = vec![0.0; c1.len()];
            let mut gc2 = if cp.slot2.is_some() {
                vec![0.0; c2.len()]
            } else {
                Vec::new()
            };
            for (flat, &p) in s.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let (j, k) = (flat / n2, flat % n2);
                let mut acc = 0.0;
                for h in 0..heads {
                    let (x, y) = (c1[j * heads + h], c2[k * heads + h]);
                    let gb = g_mixed[h];
                    acc += gb * x.max(y);
                    if x >= y {
                        gc1[j * heads + h] += gb * p;
                    } else if cp.slot2.is_some() {
                        gc2[k * heads + h] += gb * p;
                    } else {
                        gc1[k * heads + h] += gb * p;
                    }
                }
                gs[flat] += acc;
            }
            route_clause_grads(&cp.slot1, &rec.c1, &gc1, heads, v, &mut g_in);
            if let (Some(list), Some(vals)) = (&cp.slot2, &rec.c2) {
                route_clause_grads(list, vals, &gc2, heads, v, &mut g_in);
            }
        }
        g = g_in;
    }
    let mut out = WeightSet {
        predicates: Vec::with_capacity(space.predicates.len()),
    };
    for ((cp, s), gs) in space.predicates.iter().zip(&tape.probs).zip(&prob_grads) {
        let dot: f64 = s.iter().zip(gs).map(|(a, b)| a * b).sum();
        let values = s
            .iter()
            .zip(gs)
            .map(|(p, gp)| p * (gp - dot))
            .collect();
        out.predicates.push(PairWeights {
            rows: cp.slot1.len(),
            cols: cp.slot2().len(),
            values,
        });
    }
    out
}

fn route_clause_grads(
    clauses: &[CompiledClause],
    values: &ClauseValues,
    grads: &[f64],
    heads: usize,
    v: &[f64],
    g_in: &mut [f64],
) {
    for (j, clause) in clauses.iter().enumerate() {
        for h in 0..heads {
            let gc = grads[j * heads + h];
            let arg = values.argmax[j * heads + h];
            if gc == 0.0 || arg == NO_INSTANCE {
                continue;
            }
            let [a, b] = clause.instances(h)[arg as usize];
            let (a, b) = (a as usize, b as usize);
            g_in[a] += gc * v[b];
            g_in[b] += gc * v[a];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clausegen::{build_candidate_space, ProgramTemplate, RuleTemplate};
    use crate::logic::{parse_atom, parse_clause, PredicateKind};

    fn language(preds: &[(&str, usize, PredicateKind)], n: usize) -> Language {
        Language::new(
            preds
                .iter()
                .map(|(name, a, k)| Predicate::new(*name, *a, *k).unwrap())
                .collect(),
            (0..n).map(|i| Constant::new(format!("c{i}"))).collect(),
        )
        .unwrap()
    }

    #[test]
    fn ground_index_sizes() {
        use PredicateKind::*;
        let l = language(&[("edge", 2, Extensional), ("connected", 2, Target)], 2);
        assert_eq!(build_ground_index(&l, u64::MAX).unwrap().len(), 8);
        let l = language(&[("A", 1, Extensional), ("T", 1, Target)], 1);
        let idx = build_ground_index(&l, u64::MAX).unwrap();
        assert_eq!(idx.len(), 2);
        let l = language(&[("T", 1, Target)], 100);
        assert_eq!(build_ground_index(&l, u64::MAX).unwrap().len(), 100);
        assert!(matches!(
            build_ground_index(&l, 799),
            Err(Error::MemoryCapExceeded { .. })
        ));
    }

    #[test]
    fn ground_index_roundtrip_and_order() {
        use PredicateKind::*;
        let l = language(&[("T", 2, Target), ("E", 2, Extensional)], 3);
        let idx = build_ground_index(&l, u64::MAX).unwrap();
        assert_eq!(idx.extensional_len(), 9);
        for i in 0..idx.len() {
            let atom = idx.atom_at(i).unwrap();
            assert_eq!(idx.index_of(&atom), Some(i));
        }
        assert_eq!(idx.atom_at(0).unwrap().predicate().name(), "E");
        assert_eq!(idx.atom_at(5).unwrap().to_string(), "E(c1,c2)");
    }

    #[test]
    fn compile_unary_conjunction() {
        let l = Language::new(
            vec![
                Predicate::target("p", 1).unwrap(),
                Predicate::extensional("A", 1).unwrap(),
                Predicate::extensional("B", 1).unwrap(),
            ],
            vec![Constant::new("a"), Constant::new("b")],
        )
        .unwrap();
        let idx = build_ground_index(&l, u64::MAX).unwrap();
        let clause = parse_clause("p(X) :- A(X), B(X).", &l).unwrap();
        let cc = compile_clause(&clause, &idx);
        assert_eq!(cc.heads(), 2);
        let at = |s: &str| idx.index_of(&parse_atom(s, &l).unwrap()).unwrap() as u32;
        assert_eq!(cc.instances(0), &[[at("A(a)"), at("B(a)")]]);
        assert_eq!(cc.instances(1), &[[at("A(b)"), at("B(b)")]]);
    }

    #[test]
    fn compile_existential_enumerates_constants() {
        use PredicateKind::*;
        let l = language(&[("edge", 2, Extensional), ("connected", 2, Target)], 2);
        let idx = build_ground_index(&l, u64::MAX).unwrap();
        let clause = parse_clause("connected(X,Y) :- edge(X,Z), connected(Z,Y).", &l).unwrap();
        let cc = compile_clause(&clause, &idx);
        assert_eq!(cc.heads(), 4);
        assert!((0..4).all(|h| cc.instances(h).len() == 2));
    }

    #[test]
    fn compile_with_absent_constant_is_empty() {
        use PredicateKind::*;
        let l = language(&[("edge", 2, Extensional), ("p", 1, Target)], 2);
        let idx = build_ground_index(&l, u64::MAX).unwrap();
        let clause = parse_clause("p(X) :- edge(X, zz), edge(X, zz).", &l).unwrap();
        let cc = compile_clause(&clause, &idx);
        assert_eq!(cc.total_instances(), 0);
    }

    fn unary_setup() -> (Language, CandidateSpace, CompiledSpace) {
        use PredicateKind::*;
        let l = language(&[("A", 1, Extensional), ("B", 1, Extensional), ("T", 1, Target)], 3);
        let template = ProgramTemplate::uniform(
            l.target().clone(),
            vec![],
            (RuleTemplate::new(0, false), RuleTemplate::new(0, false)),
            1,
        )
        .unwrap();
        let space = build_candidate_space(&template, &l).unwrap();
        let compiled = compile_space(&space, build_ground_index(&l, u64::MAX).unwrap()).unwrap();
        (l, space, compiled)
    }

    #[test]
    fn all_zero_valuation_stays_zero() {
        let (_, space, compiled) = unary_setup();
        let v0 = Valuation::zeros(compiled.index());
        let w = WeightSet::zeros(&space);
        assert!(soft_step(&v0, &w, &compiled).as_slice().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn one_hot_on_true_instance_gives_one() {
        let (l, space, compiled) = unary_setup();
        let facts = [parse_atom("A(c0)", &l).unwrap(), parse_atom("B(c0)", &l).unwrap()];
        let v0 = Valuation::from_facts(compiled.index(), facts.iter());
        // slot lists are [A∧A, A∧B, B∧B]; pick the diagonal A∧B pair
        let ps = &space.predicates[0];
        let j = ps.slot1.iter().position(|c| c.to_string() == "T(X0) :- A(X0), B(X0).").unwrap();
        let w = WeightSet::one_hot(&space, &[j * ps.slot2.len() + j]);
        let v1 = soft_step(&v0, &w, &compiled);
        let t0 = compiled.index().index_of(&parse_atom("T(c0)", &l).unwrap()).unwrap();
        let t1 = compiled.index().index_of(&parse_atom("T(c1)", &l).unwrap()).unwrap();
        assert_eq!(v1.get(t0), 1.0);
        assert_eq!(v1.get(t1), 0.0);
    }

    #[test]
    fn forward_chain_one_step_equals_soft_step() {
        let (l, space, compiled) = unary_setup();
        let facts = [parse_atom("A(c1)", &l).unwrap(), parse_atom("B(c1)", &l).unwrap()];
        let v0 = Valuation::from_facts(compiled.index(), facts.iter());
        let mut rng = rand::rng();
        let w = WeightSet::random(&space, 1.0, &mut rng);
        assert_eq!(forward_chain(&v0, &w, &compiled, 1), soft_step(&v0, &w, &compiled));
    }

    #[test]
    fn masked_softmax_excludes_entries() {
        let p = masked_softmax(&[1.0, 2.0, 3.0], &[true, false, true]);
        assert_eq!(p[1], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[2] > p[0]);
    }
}
