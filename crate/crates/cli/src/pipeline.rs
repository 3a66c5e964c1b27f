//! Prepare, train and evaluate one experiment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dilp_core::emit::{display_text, to_sql, SqlQuery};
use dilp_core::facts::{write_atomically, FactTable};
use dilp_core::logic::{parse_program, Program};
use dilp_core::metrics::{write_csv_rows, MetricsReport};
use dilp_core::synth::{ScenarioKind, ScenarioSpec};
use dilp_core::tabular::{
    binarize, compute_aggregates, group_split, load_paysim, paysim_clean, sample_balanced,
    standard_scale, Scaler, ThresholdSpec,
};
use dilp_core::trainer::{evaluate_program, loss_csv, train_problem, weights_to_text, Problem, TrainedModel};
use dilp_core::{Error, Result};
use log::{info, warn};
use serde::Serialize;

use crate::config::ExperimentConfig;

const RULES_STEPS_KEY: &str = "% inference_steps =";

#[derive(Debug, Clone, Serialize)]
pub struct SplitSummary {
    pub constants: usize,
    pub positives: usize,
    pub negatives: usize,
    pub dropped_positives: usize,
    pub dropped_negatives: usize,
}

impl SplitSummary {
    fn of(table: &FactTable) -> Self {
        Self {
            constants: table.language().constants().len(),
            positives: table.examples().positives().len(),
            negatives: table.examples().negatives().len(),
            dropped_positives: table.dropped().positives,
            dropped_negatives: table.dropped().negatives,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Seeds {
    pub train: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainingSummary {
    pub steps: usize,
    pub final_loss: f64,
    pub restart: usize,
    pub program: String,
}

/// Everything needed to regenerate an experiment's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub source: String,
    pub seeds: Seeds,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<ThresholdSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaler: Option<Scaler>,
    pub splits: BTreeMap<String, SplitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingSummary>,
}

impl Manifest {
    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: FactTable,
    pub validation: Option<FactTable>,
    pub test: Option<FactTable>,
    pub manifest: Manifest,
}

impl Prepared {
    pub fn splits(&self) -> Vec<(&'static str, &FactTable)> {
        let mut out = vec![("train", &self.train)];
        out.extend(self.validation.as_ref().map(|t| ("validation", t)));
        out.extend(self.test.as_ref().map(|t| ("test", t)));
        out
    }
}

/// Builds the fact tables of every split.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    config.check_files()?;
    let seeds = Seeds {
        train: config.train.seed,
        data: config.data.scenario.as_ref().map(|s| s.seed),
        holdout: config.data.holdout_seed,
        split: None,
        sample: None,
    };
    let mut manifest = Manifest {
        experiment: config.name.clone(),
        source: String::new(),
        seeds,
        thresholds: None,
        scaler: None,
        splits: BTreeMap::new(),
        training: None,
    };
    let prepared = if let Some(scenario) = &config.data.scenario {
        manifest.source = match scenario.kind {
            ScenarioKind::Abcd => "abcd",
            ScenarioKind::FraudRelationship => "fraud_relationship",
            ScenarioKind::FraudChain => "fraud_chain",
        }
        .to_string();
        let train = scenario.fact_table()?;
        let test = config
            .data
            .holdout_seed
            .map(|seed| ScenarioSpec { seed, ..scenario.clone() }.fact_table())
            .transpose()?;
        Prepared { train, validation: None, test, manifest }
    } else {
        let path = config.data.csv.as_ref().expect("validated source");
        let tab = config.tabular.as_ref().expect("validated tabular section");
        manifest.source = path.display().to_string();
        let spec = tab.threshold_spec()?;
        let mut table = paysim_clean(&load_paysim(path)?)?;
        if !tab.aggregate_windows.is_empty() {
            table = compute_aggregates(&table, "nameDest", "step", "amount", &tab.aggregate_windows)?;
        }
        let split = group_split(&table, &tab.split)?;
        let cols: Vec<&str> = tab.scale.iter().map(String::as_str).collect();
        let (train, rest, scaler) = standard_scale(&split.train, &[&split.validation, &split.test], &cols)?;
        let train = match tab.sampling.counts() {
            Some((p, n)) => sample_balanced(&train, &tab.target, p, n, tab.sample_seed)?,
            None => train,
        };
        info!("binarizing {} train rows", train.len());
        let facts = |t| binarize(t, &spec, &tab.target);
        let train = facts(&train)?;
        let validation = optional_split(facts(&rest[0]), "validation")?;
        let test = optional_split(facts(&rest[1]), "test")?;
        manifest.seeds.split = Some(tab.split.seed);
        manifest.seeds.sample = tab.sampling.counts().map(|_| tab.sample_seed);
        manifest.thresholds = Some(spec);
        manifest.scaler = Some(scaler);
        Prepared { train, validation, test, manifest }
    };
    let mut prepared = prepared;
    let splits = prepared
        .splits()
        .into_iter()
        .map(|(name, table)| (name.to_string(), SplitSummary::of(table)))
        .collect();
    prepared.manifest.splits = splits;
    Ok(prepared)
}

fn optional_split(r: Result<FactTable>, name: &str) -> Result<Option<FactTable>> {
    match r {
        Ok(t) => Ok(Some(t)),
        Err(Error::EmptyEvaluation) => {
            warn!("{name} split has no rows with a true predicate");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Writes `<split>.facts` for every split plus `manifest.toml`.
pub fn write_prepared(prepared: &Prepared, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let manifest = prepared.manifest.to_text()?;
    for (name, table) in prepared.splits() {
        let path = dir.join(format!("{name}.facts"));
        table.save(&path)?;
        written.push(path);
    }
    let path = dir.join("manifest.toml");
    write_atomically(&path, manifest.as_bytes())?;
    written.push(path);
    Ok(written)
}

#[derive(Debug)]
pub struct Outcome {
    pub prepared: Prepared,
    pub model: TrainedModel,
    pub weights_text: String,
    /// Flattened rule text, or the program itself when it is recursive.
    pub rule: String,
    /// The query, or the reason none was produced.
    pub sql: std::result::Result<SqlQuery, Error>,
    pub metrics: Vec<(&'static str, MetricsReport)>,
}

impl Outcome {
    pub fn program(&self) -> &Program {
        &self.model.pruned
    }

    pub fn metrics_for(&self, split: &str) -> Option<&MetricsReport> {
        self.metrics.iter().find(|(s, _)| *s == split).map(|(_, m)| m)
    }
}

/// Prepares data, trains, extracts and evaluates the crisp program on every
/// split.
pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let mut prepared = prepare(config)?;
    let template = config.template.program_template(prepared.train.target())?;
    let problem = Problem::new(&prepared.train, &template)?;
    for (name, pairs) in problem.space.pair_counts() {
        info!("{name}: {pairs} candidate pairs");
    }
    let model = train_problem(&problem, &template, &config.train)?;
    let weights_text = weights_to_text(&model.weights, &problem.space, &model.extracted);
    let program = &model.pruned;
    let rule = display_text(program)?;
    let sql = to_sql(program, &config.output.sql_table);
    let steps = template.inference_steps;
    let metrics = prepared
        .splits()
        .into_iter()
        .map(|(name, table)| Ok((name, evaluate_program(program, table, steps)?)))
        .collect::<Result<Vec<_>>>()?;
    prepared.manifest.training = Some(TrainingSummary {
        steps: model.loss_trace.len(),
        final_loss: model.final_loss(),
        restart: model.restart,
        program: program.to_string(),
    });
    Ok(Outcome { prepared, model, weights_text, rule, sql, metrics })
}

/// Program text headed by the inference step count it was trained with.
pub fn rules_file_text(program: &Program, steps: usize) -> String {
    format!("{RULES_STEPS_KEY} {steps}\n{program}")
}

/// Parses a `.rules` file; the step count is `None` when the header is absent.
pub fn parse_rules_file(text: &str) -> Result<(Program, Option<usize>)> {
    let steps = text
        .lines()
        .find_map(|l| l.trim().strip_prefix(RULES_STEPS_KEY))
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad inference step count `{}`", s.trim())))
        })
        .transpose()?;
    Ok((parse_program(text)?, steps))
}

/// Crisp metrics of a stored program; without a step count the program runs
/// to its fixpoint.
pub fn eval_rules(program: &Program, table: &FactTable, steps: Option<usize>) -> Result<MetricsReport> {
    evaluate_program(program, table, steps.unwrap_or(usize::MAX))
}

/// Files written by [`write_outcome`].
#[derive(Debug, Clone)]
pub struct Written {
    pub files: Vec<PathBuf>,
    /// Why the SQL file was skipped, when it was.
    pub sql_notice: Option<String>,
}

/// Writes rules, weights, loss trace, metrics, manifest and optionally the
/// SQL query into `dir`. Every file is rendered before the first is written.
pub fn write_outcome(outcome: &Outcome, config: &ExperimentConfig, dir: &Path, emit_sql: bool) -> Result<Written> {
    let name = &config.name;
    let mut files: Vec<(PathBuf, Vec<u8>)> = vec![
        (
            dir.join(format!("{name}.rules")),
            rules_file_text(outcome.program(), config.template.inference_steps).into_bytes(),
        ),
        (dir.join("weights.txt"), outcome.weights_text.clone().into_bytes()),
        (dir.join("loss.csv"), loss_csv(&outcome.model.loss_trace)?),
    ];
    let mut metrics = Vec::new();
    let rows: Vec<(&str, &str, &MetricsReport)> = outcome
        .metrics
        .iter()
        .map(|(split, m)| (name.as_str(), *split, m))
        .collect();
    write_csv_rows(&mut metrics, &rows, true)?;
    files.push((dir.join("metrics.csv"), metrics));
    files.push((dir.join("manifest.toml"), outcome.prepared.manifest.to_text()?.into_bytes()));
    let mut sql_notice = None;
    if emit_sql {
        match &outcome.sql {
            Ok(q) => files.push((dir.join(format!("{name}.sql")), format!("{}\n", q.text).into_bytes())),
            Err(e) => sql_notice = Some(format!("sql skipped: {e}")),
        }
    }
    std::fs::create_dir_all(dir)?;
    for (path, bytes) in &files {
        write_atomically(path, bytes)?;
    }
    Ok(Written {
        files: files.into_iter().map(|(p, _)| p).collect(),
        sql_notice,
    })
}
