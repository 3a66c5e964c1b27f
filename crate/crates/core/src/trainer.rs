//! Gradient descent over clause-pair weights and extraction of the learned
//! program.

use std::fmt::Write as _;
use std::io::Write as _;

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clausegen::{build_candidate_space, CandidateSpace, ProgramTemplate};
use crate::error::{Error, Result};
use crate::facts::{ExampleSet, FactTable};
use crate::inference::{
    backward, build_ground_index, compile_space, forward_chain, forward_recorded, masked_softmax,
    CompiledSpace, GroundIndex, PairWeights, Valuation, WeightSet,
};
use crate::logic::{crisp_consequence, parse_program, Clause, Language, Program};
use crate::metrics::{report, ConfusionMatrix, MetricsReport};

/// Probabilities are clamped to `[EPSILON, 1 − EPSILON]` inside the loss.
pub const EPSILON: f64 = 1e-7;
pub const DECISION_THRESHOLD: f64 = 0.5;
/// Final valuations inside this band make a soft/crisp comparison unreliable.
pub const AMBIGUOUS_BAND: (f64, f64) = (0.3, 0.7);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_steps: usize,
    pub seed: u64,
    pub early_stop_loss: f64,
    pub weight_init_scale: f64,
    /// Independent runs from consecutive seeds; the lowest final loss wins.
    pub restarts: usize,
    /// Decay of the running mean of squared gradients.
    pub rms_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            max_steps: 6000,
            seed: 0,
            early_stop_loss: 1e-3,
            weight_init_scale: 0.1,
            restarts: 1,
            rms_decay: 0.9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidTrainConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.weight_init_scale >= 0.0 && self.weight_init_scale.is_finite()) {
            return bad("weight_init_scale must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.rms_decay) {
            return bad("rms_decay must lie in [0, 1)");
        }
        Ok(())
    }
}

/// A fact table grounded against a template: everything a forward pass
/// needs.
#[derive(Debug, Clone)]
pub struct Problem {
    pub language: Language,
    pub space: CandidateSpace,
    pub compiled: CompiledSpace,
    pub initial: Valuation,
    pub table: FactTable,
    /// `(ground index, label)` per example.
    pub examples: Vec<(usize, bool)>,
    pub steps: usize,
}

impl Problem {
    pub fn new(table: &FactTable, template: &ProgramTemplate) -> Result<Self> {
        let language = template.language(table.language())?;
        let space = build_candidate_space(template, &language)?;
        let index = build_ground_index(&language, template.memory_cap_bytes)?;
        let initial = Valuation::from_facts(&index, table.facts());
        let examples = example_indices(&index, table.examples());
        let compiled = compile_space(&space, index)?;
        Ok(Self {
            language,
            space,
            compiled,
            initial,
            table: table.clone(),
            examples,
            steps: template.inference_steps,
        })
    }

    pub fn index(&self) -> &GroundIndex {
        self.compiled.index()
    }

    pub fn forward(&self, weights: &WeightSet) -> Valuation {
        forward_chain(&self.initial, weights, &self.compiled, self.steps)
    }

    /// Soft truth degree of every example atom after the forward pass.
    pub fn predict(&self, weights: &WeightSet) -> Vec<f64> {
        let v = self.forward(weights);
        self.examples.iter().map(|(i, _)| v.get(*i)).collect()
    }
}

fn example_indices(index: &GroundIndex, examples: &ExampleSet) -> Vec<(usize, bool)> {
    examples
        .labelled()
        .map(|(a, label)| {
            let i = index
                .index_of(a)
                .expect("examples are ground over the language");
            (i, label)
        })
        .collect()
}

/// Mean cross-entropy over the examples.
pub fn loss(valuation: &Valuation, index: &GroundIndex, examples: &ExampleSet) -> f64 {
    indexed_loss(valuation.as_slice(), &example_indices(index, examples))
}

fn indexed_loss(v: &[f64], examples: &[(usize, bool)]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let total: f64 = examples
        .iter()
        .map(|&(i, label)| {
            let p = v[i].clamp(EPSILON, 1.0 - EPSILON);
            if label {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / examples.len() as f64
}

fn loss_gradient(v: &[f64], examples: &[(usize, bool)]) -> Vec<f64> {
    let mut g = vec![0.0; v.len()];
    let n = examples.len().max(1) as f64;
    for &(i, label) in examples {
        // saturated values keep the boundary slope instead of a zero gradient
        let p = v[i].clamp(EPSILON, 1.0 - EPSILON);
        g[i] += if label { -1.0 / (n * p) } else { 1.0 / (n * (1.0 - p)) };
    }
    g
}

/// Loss and its exact gradient with respect to every pair logit.
pub fn loss_and_gradients(weights: &WeightSet, problem: &Problem) -> (f64, WeightSet) {
    let tape = forward_recorded(&problem.initial, weights, &problem.compiled, problem.steps);
    let v = tape.output().as_slice();
    let l = indexed_loss(v, &problem.examples);
    let g = backward(&tape, &problem.compiled, &loss_gradient(v, &problem.examples));
    (l, g)
}

pub fn gradients(weights: &WeightSet, problem: &Problem) -> WeightSet {
    loss_and_gradients(weights, problem).1
}

/// Per intensional predicate, the admissible pair with the largest softmax
/// probability; ties go to the lowest flattened index.
pub fn extract_program(weights: &WeightSet, space: &CandidateSpace) -> Result<Program> {
    let choices = argmax_pairs(weights, space);
    program_from_choices(space, &choices)
}

pub fn argmax_pairs(weights: &WeightSet, space: &CandidateSpace) -> Vec<usize> {
    weights
        .predicates
        .iter()
        .zip(&space.predicates)
        .map(|(w, ps)| {
            let probs = masked_softmax(&w.values, &ps.admissible);
            let mut best = None;
            for (i, (p, ok)) in probs.iter().zip(&ps.admissible).enumerate() {
                if *ok && best.is_none_or(|(_, bp)| *p > bp) {
                    best = Some((i, *p));
                }
            }
            best.expect("every predicate has an admissible pair").0
        })
        .collect()
}

pub fn program_from_choices(space: &CandidateSpace, choices: &[usize]) -> Result<Program> {
    let clauses: Vec<Clause> = space
        .predicates
        .iter()
        .zip(choices)
        .flat_map(|(ps, &flat)| ps.pair(flat).into_iter().cloned())
        .collect();
    let target = space.predicates[0].predicate.clone();
    Program::new(target, clauses)
}

/// Drops clauses, last first, whose removal changes the crisp prediction of
/// no labelled example. The last target clause is always kept.
pub fn prune_redundant(
    program: &Program,
    table: &FactTable,
    language: &Language,
    steps: usize,
) -> Result<Program> {
    let predict = |p: &Program| -> Vec<bool> {
        let derived = crisp_consequence(p, table.facts(), language, steps);
        table.examples().labelled().map(|(a, _)| derived.contains(a)).collect()
    };
    let full = predict(program);
    let mut clauses = program.clauses().to_vec();
    for i in (0..clauses.len()).rev() {
        let mut rest = clauses.clone();
        let removed = rest.remove(i);
        if removed.head().predicate() == program.target()
            && !rest.iter().any(|c| c.head().predicate() == program.target())
        {
            continue;
        }
        let candidate = Program::new(program.target().clone(), rest)?;
        if predict(&candidate) == full {
            clauses = candidate.clauses().to_vec();
        }
    }
    Program::new(program.target().clone(), clauses)
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub weights: WeightSet,
    pub loss_trace: Vec<f64>,
    /// Argmax program, one clause pair per intensional predicate.
    pub extracted: Program,
    /// `extracted` without clauses that add nothing to the crisp
    /// consequence of the training facts.
    pub pruned: Program,
    pub config: TrainConfig,
    pub template: ProgramTemplate,
    /// Index of the restart whose run was kept.
    pub restart: usize,
}

impl TrainedModel {
    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("loss trace is non-empty")
    }
}

pub fn train(table: &FactTable, template: &ProgramTemplate, config: &TrainConfig) -> Result<TrainedModel> {
    config.validate()?;
    let problem = Problem::new(table, template)?;
    train_problem(&problem, template, config)
}

pub fn train_problem(
    problem: &Problem,
    template: &ProgramTemplate,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    let mut best: Option<(WeightSet, Vec<f64>, usize)> = None;
    for restart in 0..config.restarts {
        let seed = config.seed.wrapping_add(restart as u64);
        let (weights, trace) = descend(problem, config, seed)?;
        let last = *trace.last().expect("at least one step");
        info!(
            "restart {restart} (seed {seed}): {} steps, final loss {last:.6}",
            trace.len()
        );
        if best.as_ref().is_none_or(|(_, t, _)| last < *t.last().expect("non-empty")) {
            best = Some((weights, trace, restart));
        }
    }
    let (weights, loss_trace, restart) = best.expect("restarts ≥ 1");
    let extracted = extract_program(&weights, &problem.space)?;
    let pruned = prune_redundant(&extracted, &problem.table, &problem.language, problem.steps)?;
    Ok(TrainedModel {
        weights,
        loss_trace,
        extracted,
        pruned,
        config: config.clone(),
        template: template.clone(),
        restart,
    })
}

/// RMSProp from a seeded normal initialization.
fn descend(problem: &Problem, config: &TrainConfig, seed: u64) -> Result<(WeightSet, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = WeightSet::random(&problem.space, config.weight_init_scale, &mut rng);
    let mut mean_sq: Vec<f64> = vec![0.0; weights.len()];
    let mut trace = Vec::new();
    let mut last_finite = f64::NAN;
    for step in 0..config.max_steps {
        let (l, grad) = loss_and_gradients(&weights, problem);
        if !l.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { step, last_finite });
        }
        last_finite = l;
        trace.push(l);
        if step % 500 == 0 {
            debug!("step {step}: loss {l:.6}");
        }
        if l < config.early_stop_loss {
            break;
        }
        let rho = config.rms_decay;
        for ((w, g), m) in weights.iter_mut().zip(grad.iter()).zip(mean_sq.iter_mut()) {
            *m = rho * *m + (1.0 - rho) * g * g;
            *w -= config.learning_rate * g / (m.sqrt() + EPSILON);
        }
    }
    Ok((weights, trace))
}

/// Thresholded soft predictions of a model on `table`'s examples, plus the
/// rows binarization dropped (predicted negative).
pub fn evaluate(model: &TrainedModel, table: &FactTable) -> Result<MetricsReport> {
    let problem = Problem::new(table, &model.template)?;
    if !model.weights.same_shape(&problem.space) {
        return Err(Error::InvalidTemplate(
            "model weights do not match the candidate space of this table".into(),
        ));
    }
    let mut cm = ConfusionMatrix::default();
    for (p, (_, label)) in problem.predict(&model.weights).iter().zip(&problem.examples) {
        cm.record(*p >= DECISION_THRESHOLD, *label);
    }
    report(&(cm + dropped_matrix(table)))
}

fn dropped_matrix(table: &FactTable) -> ConfusionMatrix {
    let d = table.dropped();
    ConfusionMatrix {
        tn: d.negatives as u64,
        fn_: d.positives as u64,
        ..Default::default()
    }
}

/// Crisp predictions of `program` for `table`'s examples, in example order.
pub fn crisp_predictions(program: &Program, table: &FactTable, steps: usize) -> Vec<bool> {
    let derived = crisp_consequence(program, table.facts(), table.language(), steps);
    table
        .examples()
        .labelled()
        .map(|(a, _)| derived.contains(a))
        .collect()
}

/// Crisp evaluation of a discrete program, counting dropped rows as
/// predicted negative.
pub fn evaluate_program(program: &Program, table: &FactTable, steps: usize) -> Result<MetricsReport> {
    let mut cm = ConfusionMatrix::default();
    for (p, (_, label)) in crisp_predictions(program, table, steps)
        .into_iter()
        .zip(table.examples().labelled())
    {
        cm.record(p, label);
    }
    report(&(cm + dropped_matrix(table)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Consistency {
    /// Examples whose soft value falls inside the ambiguous band.
    pub ambiguous: usize,
    /// Examples the soft model and the crisp program classify differently.
    pub disagreements: usize,
}

impl Consistency {
    pub fn within_margin(&self) -> bool {
        self.ambiguous == 0
    }

    /// Agreement is only required when every value is outside the band.
    pub fn holds(&self) -> bool {
        !self.within_margin() || self.disagreements == 0
    }
}

pub fn soft_crisp_consistency(model: &TrainedModel, problem: &Problem, table: &FactTable) -> Consistency {
    let soft = problem.predict(&model.weights);
    let crisp = crisp_predictions(&model.extracted, table, problem.steps);
    let ambiguous = soft
        .iter()
        .filter(|p| (AMBIGUOUS_BAND.0..=AMBIGUOUS_BAND.1).contains(*p))
        .count();
    let disagreements = soft
        .iter()
        .zip(&crisp)
        .filter(|(s, c)| (**s >= DECISION_THRESHOLD) != **c)
        .count();
    Consistency {
        ambiguous,
        disagreements,
    }
}

/// Weights as text: a `[weights]` section with one `name rows cols` header
/// line followed by one line of row-major values per predicate, then a
/// `[program]` section holding the extracted clauses.
pub fn weights_to_text(weights: &WeightSet, space: &CandidateSpace, program: &Program) -> String {
    let mut out = String::from("[weights]\n");
    for (w, ps) in weights.predicates.iter().zip(&space.predicates) {
        let _ = writeln!(out, "{} {} {}", ps.predicate.name(), w.rows, w.cols);
        let values: Vec<String> = w.values.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(out, "{}", values.join(" "));
    }
    let _ = write!(out, "[program]\n{program}");
    out
}

/// Inverse of [`weights_to_text`]; the weights must match `space`.
pub fn weights_from_text(text: &str, space: &CandidateSpace) -> Result<(WeightSet, Program)> {
    let err = |line: usize, message: String| Error::Parse { line, message };
    let program_at = text
        .find("[program]")
        .ok_or_else(|| err(1, "missing [program] section".into()))?;
    let head = &text[..program_at];
    let mut lines = head
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, "[weights]")) => {}
        _ => return Err(err(1, "expected [weights] header".into())),
    }
    let mut predicates = Vec::new();
    while let Some((n, header)) = lines.next() {
        let parts: Vec<&str> = header.split_whitespace().collect();
        let [name, rows, cols] = parts.as_slice() else {
            return Err(err(n, format!("expected `name rows cols`, found `{header}`")));
        };
        let rows: usize = rows.parse().map_err(|_| err(n, "bad row count".into()))?;
        let cols: usize = cols.parse().map_err(|_| err(n, "bad column count".into()))?;
        let (vn, values) = lines
            .next()
            .ok_or_else(|| err(n, format!("missing values for {name}")))?;
        let values = values
            .split_whitespace()
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| err(vn, e.to_string()))?;
        if values.len() != rows * cols {
            return Err(err(vn, format!("{name}: expected {} values", rows * cols)));
        }
        let expected = space.predicates.get(predicates.len()).map(|p| p.predicate.name());
        if expected != Some(*name) {
            return Err(err(n, format!("unexpected weights for {name}")));
        }
        predicates.push(PairWeights { rows, cols, values });
    }
    let weights = WeightSet { predicates };
    if !weights.same_shape(space) {
        return Err(Error::InvalidTemplate(
            "stored weights do not match the candidate space".into(),
        ));
    }
    let program = parse_program(&text[program_at + "[program]".len()..])?;
    Ok((weights, program))
}

/// `step,loss` CSV.
pub fn write_loss_csv<W: std::io::Write>(out: W, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "loss"])?;
    for (step, l) in trace.iter().enumerate() {
        w.write_record([step.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn loss_csv(trace: &[f64]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_loss_csv(&mut buf, trace)?;
    buf.flush()?;
    Ok(buf)
}
