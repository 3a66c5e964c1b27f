//! Experiment configuration files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dilp_core::clausegen::{ProgramTemplate, RuleTemplate, DEFAULT_MAX_EXISTS, DEFAULT_MEMORY_CAP_BYTES};
use dilp_core::logic::{Predicate, PredicateKind};
use dilp_core::synth::{ScenarioKind, ScenarioSpec};
use dilp_core::tabular::{SplitSpec, ThresholdSpec, PAYSIM_NUMERIC};
use dilp_core::trainer::TrainConfig;
use dilp_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub data: DataConfig,
    #[serde(default)]
    pub tabular: Option<TabularConfig>,
    pub template: TemplateConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Exactly one of `csv` and `scenario`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub csv: Option<PathBuf>,
    pub scenario: Option<ScenarioSpec>,
    /// Seed of a second ABCD table used as held-out data.
    pub holdout_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPreset {
    DecisionTree,
    SymbolicClassifier,
}

impl ThresholdPreset {
    pub fn spec(self) -> ThresholdSpec {
        match self {
            Self::DecisionTree => ThresholdSpec::decision_tree(),
            Self::SymbolicClassifier => ThresholdSpec::symbolic_classifier(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Keep every training row.
    Full,
    /// 100 fraudulent and 100 genuine rows.
    Balanced,
    /// 10 fraudulent and 1000 genuine rows.
    OnePercent,
    Custom { positives: usize, negatives: usize },
}

impl Sampling {
    pub fn counts(self) -> Option<(usize, usize)> {
        match self {
            Self::Full => None,
            Self::Balanced => Some((100, 100)),
            Self::OnePercent => Some((10, 1000)),
            Self::Custom { positives, negatives } => Some((positives, negatives)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabularConfig {
    pub target: String,
    /// Exactly one of `preset` and `thresholds`.
    pub preset: Option<ThresholdPreset>,
    pub thresholds: Option<ThresholdSpec>,
    pub negations: bool,
    pub sampling: Sampling,
    pub sample_seed: u64,
    /// Rolling windows for per-destination amount aggregates; empty skips them.
    pub aggregate_windows: Vec<usize>,
    pub split: SplitSpec,
    pub scale: Vec<String>,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self {
            target: "isFraud".into(),
            preset: None,
            thresholds: None,
            negations: false,
            sampling: Sampling::Full,
            sample_seed: 0,
            aggregate_windows: vec![],
            split: SplitSpec::default(),
            scale: PAYSIM_NUMERIC.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl TabularConfig {
    pub fn threshold_spec(&self) -> Result<ThresholdSpec> {
        let spec = match (&self.preset, &self.thresholds) {
            (Some(p), None) => p.spec(),
            (None, Some(s)) => s.clone(),
            _ => {
                return Err(Error::Config(
                    "give exactly one of tabular.preset and tabular.thresholds".into(),
                ))
            }
        };
        let spec = if self.negations {
            dilp_core::tabular::add_negations(&spec)?
        } else {
            spec
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateConfig {
    #[serde(default)]
    pub auxiliary: Vec<String>,
    /// Defaults to the target's arity.
    #[serde(default)]
    pub auxiliary_arity: Option<usize>,
    pub inference_steps: usize,
    #[serde(default)]
    pub prevent_target_recursion: bool,
    #[serde(default = "yes")]
    pub extended_circularity: bool,
    #[serde(default = "default_max_exists")]
    pub max_exists: usize,
    #[serde(default = "default_memory_cap")]
    pub memory_cap_bytes: u64,
    pub rules: BTreeMap<String, (RuleTemplate, RuleTemplate)>,
}

fn yes() -> bool {
    true
}

fn default_max_exists() -> usize {
    DEFAULT_MAX_EXISTS
}

fn default_memory_cap() -> u64 {
    DEFAULT_MEMORY_CAP_BYTES
}

impl TemplateConfig {
    pub fn program_template(&self, target: &Predicate) -> Result<ProgramTemplate> {
        let arity = self.auxiliary_arity.unwrap_or(target.arity());
        let auxiliary = self
            .auxiliary
            .iter()
            .map(|n| Predicate::new(n, arity, PredicateKind::Auxiliary))
            .collect::<Result<Vec<_>>>()?;
        let t = ProgramTemplate {
            target: target.with_kind(PredicateKind::Target),
            auxiliary,
            rules: self.rules.clone(),
            inference_steps: self.inference_steps,
            prevent_target_recursion: self.prevent_target_recursion,
            extended_circularity: self.extended_circularity,
            max_exists: self.max_exists,
            memory_cap_bytes: self.memory_cap_bytes,
        };
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub emit_sql: bool,
    pub sql_table: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            emit_sql: false,
            sql_table: "Fraud_Table".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config; relative CSV paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        if let Some(csv) = &config.data.csv {
            if csv.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                config.data.csv = Some(base.join(csv));
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("`{}` is not a usable experiment name", self.name)));
        }
        match (&self.data.csv, &self.data.scenario) {
            (Some(_), None) => {
                let tab = self.tabular.as_ref().ok_or_else(|| {
                    Error::Config("a csv data source needs a [tabular] section".into())
                })?;
                tab.threshold_spec()?;
            }
            (None, Some(s)) => {
                s.validate()?;
                if self.tabular.is_some() {
                    return Err(Error::Config("[tabular] applies to csv sources only".into()));
                }
            }
            _ => {
                return Err(Error::Config(
                    "give exactly one of data.csv and data.scenario".into(),
                ))
            }
        }
        if self.data.holdout_seed.is_some()
            && self.data.scenario.as_ref().map(|s| s.kind) != Some(ScenarioKind::Abcd)
        {
            return Err(Error::Config("data.holdout_seed applies to the abcd scenario only".into()));
        }
        if self.template.inference_steps == 0 {
            return Err(Error::InvalidTemplate("inference_steps must be at least 1".into()));
        }
        self.train.validate()
    }

    /// Checks that files named by the config exist.
    pub fn check_files(&self) -> Result<()> {
        if let Some(csv) = &self.data.csv {
            if !csv.is_file() {
                return Err(Error::Config(format!("data file {} does not exist", csv.display())));
            }
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(&self.name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ABCD: &str = r#"
name = "abcd"

[data]
scenario = { kind = "abcd", n_rows = 100, seed = 33 }

[template]
auxiliary = ["pred1"]
inference_steps = 5

[template.rules]
Target = [{ n_exists = 0, int = true }, { n_exists = 0, int = true }]
pred1 = [{ n_exists = 0, int = false }, { n_exists = 0, int = false }]
"#;

    #[test]
    fn parses_minimal_scenario() {
        let c = ExperimentConfig::from_toml(ABCD).unwrap();
        assert_eq!(c.template.inference_steps, 5);
        assert_eq!(c.train, TrainConfig::default());
        assert!(!c.output.emit_sql);
        assert_eq!(c.output_dir(), PathBuf::from("out/abcd"));
        let target = Predicate::target("Target", 1).unwrap();
        let t = c.template.program_template(&target).unwrap();
        assert_eq!(t.auxiliary[0].arity(), 1);
        assert_eq!(t.rules_for(&target), (RuleTemplate::new(0, true), RuleTemplate::new(0, true)));
    }

    #[test]
    fn rejects_two_sources() {
        let text = ABCD.replace("[data]\n", "[data]\ncsv = \"x.csv\"\n");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = ABCD.replace("inference_steps = 5", "inference_steps = 5\nsteps = 3");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn csv_needs_one_threshold_source() {
        let base = r#"
name = "p"
[data]
csv = "paysim.csv"
[tabular]
sampling = "balanced"
[template]
inference_steps = 1
[template.rules]
isFraud = [{ n_exists = 0, int = false }, { n_exists = 0, int = false }]
"#;
        assert!(ExperimentConfig::from_toml(base).is_err());
        let ok = base.replace("sampling", "preset = \"symbolic_classifier\"\nsampling");
        let c = ExperimentConfig::from_toml(&ok).unwrap();
        assert_eq!(c.tabular.unwrap().sampling.counts(), Some((100, 100)));
        let custom = ok.replace("\"balanced\"", "{ custom = { positives = 3, negatives = 4 } }");
        let c = ExperimentConfig::from_toml(&custom).unwrap();
        assert_eq!(c.tabular.unwrap().sampling.counts(), Some((3, 4)));
    }

    #[test]
    fn negations_extend_thresholds() {
        let tab = TabularConfig {
            preset: Some(ThresholdPreset::DecisionTree),
            negations: true,
            ..Default::default()
        };
        let names: Vec<String> = tab
            .threshold_spec()
            .unwrap()
            .predicate_names()
            .map(String::from)
            .collect();
        assert!(names.contains(&"NOT_amount_gt".to_string()));
        assert_eq!(names.len(), 6);
    }
}
