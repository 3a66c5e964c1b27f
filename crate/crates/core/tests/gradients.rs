//! Analytic gradients against central finite differences.

use dilp_core::clausegen::{ProgramTemplate, RuleTemplate};
use dilp_core::facts::{ExampleSet, FactTable};
use dilp_core::inference::{Valuation, WeightSet};
use dilp_core::logic::{Atom, Constant, Language, Predicate};
use dilp_core::trainer::{loss_and_gradients, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-4;
/// Logits probed per instance.
const COORDS: usize = 40;

fn random_problem(rng: &mut ChaCha8Rng) -> Problem {
    let target_arity = rng.random_range(1..=2);
    let constants: Vec<Constant> = (0..3).map(|i| Constant::new(format!("c{i}"))).collect();
    let mut preds = vec![
        Predicate::extensional("e", 2).unwrap(),
        Predicate::extensional("u", 1).unwrap(),
        Predicate::target("t", target_arity).unwrap(),
    ];
    let with_aux = rng.random_bool(0.5);
    let aux = Predicate::auxiliary("a", 1).unwrap();
    if with_aux {
        preds.push(aux.clone());
    }
    let language = Language::new(preds.clone(), constants.clone()).unwrap();
    let target = preds[2].clone();
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    let tuples: Vec<Vec<Constant>> = if target_arity == 1 {
        constants.iter().map(|c| vec![c.clone()]).collect()
    } else {
        constants
            .iter()
            .flat_map(|a| constants.iter().map(move |b| vec![a.clone(), b.clone()]))
            .collect()
    };
    for t in tuples {
        let atom = Atom::ground(target.clone(), t).unwrap();
        if rng.random_bool(0.5) {
            positives.push(atom);
        } else {
            negatives.push(atom);
        }
    }
    let table = FactTable::new(
        language,
        Default::default(),
        ExampleSet::new(positives, negatives).unwrap(),
    )
    .unwrap();
    let n_exists = rng.random_range(0..=1);
    let rule = (RuleTemplate::new(n_exists, true), RuleTemplate::new(1, rng.random_bool(0.5)));
    let auxiliary = if with_aux { vec![aux] } else { vec![] };
    let template = ProgramTemplate::uniform(target, auxiliary, rule, rng.random_range(1..=3)).unwrap();
    let mut problem = Problem::new(&table, &template).unwrap();
    // continuous background values keep every max free of ties
    let ext = problem.index().extensional_len();
    let values: Vec<f64> = (0..problem.index().len())
        .map(|i| if i < ext { rng.random_range(0.05..0.95) } else { 0.0 })
        .collect();
    problem.initial = Valuation::from_vec(values);
    problem
}

fn loss_at(problem: &Problem, w: &WeightSet) -> f64 {
    loss_and_gradients(w, problem).0
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut checked = 0;
    while checked < 24 {
        let problem = random_problem(&mut rng);
        let w = WeightSet::random(&problem.space, 1.0, &mut rng);
        let (_, analytic) = loss_and_gradients(&w, &problem);
        let all: Vec<f64> = analytic.iter().copied().collect();
        let coords: Vec<usize> = if all.len() <= COORDS {
            (0..all.len()).collect()
        } else {
            (0..COORDS).map(|_| rng.random_range(0..all.len())).collect()
        };
        let flat_a: Vec<f64> = coords.iter().map(|&i| all[i]).collect();
        let numeric: Vec<f64> = coords
            .iter()
            .map(|&i| {
                let mut plus = w.clone();
                let mut minus = w.clone();
                *plus.iter_mut().nth(i).unwrap() += H;
                *minus.iter_mut().nth(i).unwrap() -= H;
                (loss_at(&problem, &plus) - loss_at(&problem, &minus)) / (2.0 * H)
            })
            .collect();
        let diff: f64 = flat_a
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = flat_a
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
            .max(numeric.iter().map(|n| n * n).sum::<f64>().sqrt());
        if scale < 1e-9 {
            continue;
        }
        let rel = diff / scale;
        assert!(rel < 1e-3, "instance {checked}: relative error {rel:e}");
        checked += 1;
    }
}

#[test]
fn inadmissible_pairs_get_zero_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut seen_masked = false;
    for _ in 0..20 {
        let problem = random_problem(&mut rng);
        let w = WeightSet::random(&problem.space, 1.0, &mut rng);
        let (_, g) = loss_and_gradients(&w, &problem);
        for (gm, ps) in g.predicates.iter().zip(&problem.space.predicates) {
            for (x, ok) in gm.values.iter().zip(&ps.admissible) {
                if !ok {
                    seen_masked = true;
                    assert_eq!(*x, 0.0);
                }
            }
        }
    }
    assert!(seen_masked, "no instance had an inadmissible pair");
}
