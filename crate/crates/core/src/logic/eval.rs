use std::collections::{BTreeSet, HashMap, HashSet};

use super::{Atom, Clause, Constant, Language, Predicate, Program, Term};

type Tuple = [u32; 2];

const UNUSED: u32 = u32::MAX;

#[derive(Debug, Default, Clone)]
struct Relation {
    tuples: Vec<Tuple>,
    members: HashSet<Tuple>,
}

impl Relation {
    fn insert(&mut self, t: Tuple) -> bool {
        if self.members.insert(t) {
            self.tuples.push(t);
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Var(u8),
    Const(u32),
}

/// A set of ground atoms over a language, stored as interned tuples per
/// predicate. Supports synchronous bottom-up rule application.
#[derive(Debug, Clone)]
pub struct Interpretation<'a> {
    language: &'a Language,
    relations: HashMap<Predicate, Relation>,
}

impl<'a> Interpretation<'a> {
    pub fn new(language: &'a Language) -> Self {
        Self {
            language,
            relations: HashMap::new(),
        }
    }

    /// Atoms whose constants fall outside the language are ignored.
    pub fn from_atoms<'b>(language: &'a Language, atoms: impl IntoIterator<Item = &'b Atom>) -> Self {
        let mut out = Self::new(language);
        for a in atoms {
            out.insert(a);
        }
        out
    }

    pub fn insert(&mut self, atom: &Atom) -> bool {
        match self.intern(atom) {
            Some(t) => self
                .relations
                .entry(atom.predicate().clone())
                .or_default()
                .insert(t),
            None => false,
        }
    }

    /// Inserts `predicate(constants…)` by constant indices.
    pub fn insert_indices(&mut self, predicate: &Predicate, args: &[usize]) -> bool {
        let t = tuple_of(args.iter().map(|&i| i as u32));
        self.relations
            .entry(predicate.clone())
            .or_default()
            .insert(t)
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        match self.intern(atom) {
            Some(t) => self
                .relations
                .get(atom.predicate())
                .is_some_and(|r| r.members.contains(&t)),
            None => false,
        }
    }

    pub fn holds(&self, predicate: &Predicate, args: &[usize]) -> bool {
        let t = tuple_of(args.iter().map(|&i| i as u32));
        self.relations
            .get(predicate)
            .is_some_and(|r| r.members.contains(&t))
    }

    pub fn len(&self) -> usize {
        self.relations.values().map(|r| r.tuples.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let constants = self.language.constants();
        let mut out = BTreeSet::new();
        for (p, rel) in &self.relations {
            for t in &rel.tuples {
                let args: Vec<Constant> = t[..p.arity()]
                    .iter()
                    .map(|&i| constants[i as usize].clone())
                    .collect();
                out.insert(Atom::ground(p.clone(), args).expect("arity matches"));
            }
        }
        out
    }

    fn intern(&self, atom: &Atom) -> Option<Tuple> {
        let mut ids = Vec::with_capacity(2);
        for t in atom.terms() {
            match t {
                Term::Const(c) => ids.push(self.language.constant_index(c)? as u32),
                Term::Var(_) => return None,
            }
        }
        Some(tuple_of(ids.into_iter()))
    }

    /// Applies every clause of `program` to the current atoms, synchronously,
    /// up to `steps` times or until nothing new is derived. Returns the number
    /// of steps that added atoms.
    pub fn apply(&mut self, program: &Program, steps: usize) -> usize {
        let compiled: Vec<_> = program
            .clauses()
            .iter()
            .filter_map(|c| CompiledRule::new(c, self.language))
            .collect();
        let mut productive = 0;
        for _ in 0..steps {
            let mut derived: Vec<(&Predicate, Tuple)> = Vec::new();
            for rule in &compiled {
                rule.fire(&self.relations, |t| derived.push((rule.head_predicate, t)));
            }
            let mut added = false;
            for (p, t) in derived {
                added |= self.relations.entry(p.clone()).or_default().insert(t);
            }
            if !added {
                break;
            }
            productive += 1;
        }
        productive
    }
}

fn tuple_of(mut ids: impl Iterator<Item = u32>) -> Tuple {
    [ids.next().unwrap_or(UNUSED), ids.next().unwrap_or(UNUSED)]
}

struct CompiledRule<'c> {
    head_predicate: &'c Predicate,
    head: Vec<Slot>,
    body: [(&'c Predicate, Vec<Slot>); 2],
}

impl<'c> CompiledRule<'c> {
    /// `None` when the clause mentions a constant outside the language, in
    /// which case it can never fire.
    fn new(clause: &'c Clause, language: &Language) -> Option<Self> {
        let slots = |a: &Atom| -> Option<Vec<Slot>> {
            a.terms()
                .iter()
                .map(|t| match t {
                    Term::Var(v) => Some(Slot::Var(*v)),
                    Term::Const(c) => language.constant_index(c).map(|i| Slot::Const(i as u32)),
                })
                .collect()
        };
        let [b1, b2] = clause.body();
        Some(Self {
            head_predicate: clause.head().predicate(),
            head: slots(clause.head())?,
            body: [(b1.predicate(), slots(b1)?), (b2.predicate(), slots(b2)?)],
        })
    }

    fn fire(&self, relations: &HashMap<Predicate, Relation>, mut emit: impl FnMut(Tuple)) {
        let (Some(r1), Some(r2)) = (relations.get(self.body[0].0), relations.get(self.body[1].0))
        else {
            return;
        };
        let env = [UNUSED; 8];
        for t1 in &r1.tuples {
            let mut env1 = env;
            if !bind(&self.body[0].1, t1, &mut env1) {
                continue;
            }
            let pattern = &self.body[1].1;
            let all_bound = pattern.iter().all(|s| match s {
                Slot::Var(v) => env1[*v as usize] != UNUSED,
                Slot::Const(_) => true,
            });
            if all_bound {
                let probe = tuple_of(pattern.iter().map(|s| resolve(s, &env1)));
                if r2.members.contains(&probe) {
                    emit(tuple_of(self.head.iter().map(|s| resolve(s, &env1))));
                }
            } else {
                for t2 in &r2.tuples {
                    let mut env2 = env1;
                    if bind(pattern, t2, &mut env2) {
                        emit(tuple_of(self.head.iter().map(|s| resolve(s, &env2))));
                    }
                }
            }
        }
    }
}

fn resolve(slot: &Slot, env: &[u32; 8]) -> u32 {
    match slot {
        Slot::Var(v) => env[*v as usize],
        Slot::Const(c) => *c,
    }
}

fn bind(pattern: &[Slot], tuple: &Tuple, env: &mut [u32; 8]) -> bool {
    for (slot, &value) in pattern.iter().zip(tuple.iter()) {
        match slot {
            Slot::Const(c) if *c != value => return false,
            Slot::Const(_) => {}
            Slot::Var(v) => {
                let cell = &mut env[*v as usize];
                if *cell == UNUSED {
                    *cell = value;
                } else if *cell != value {
                    return false;
                }
            }
        }
    }
    true
}

/// Facts plus every intensional atom derivable within `steps` synchronous
/// applications of the program's clauses (stopping early at the fixpoint).
pub fn crisp_consequence(
    program: &Program,
    facts: &BTreeSet<Atom>,
    language: &Language,
    steps: usize,
) -> BTreeSet<Atom> {
    let mut interp = Interpretation::from_atoms(language, facts);
    interp.apply(program, steps);
    interp.atoms()
}
