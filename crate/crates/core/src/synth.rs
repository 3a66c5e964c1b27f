//! Seeded synthetic scenarios: the ABCD conjunction table and two fixed
//! arity-2 fraud instances.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facts::FactTable;
use crate::tabular::{binarize, Column, Table, ThresholdSpec};

pub const ABCD_FEATURES: [&str; 4] = ["A", "B", "C", "D"];
pub const ABCD_TARGET: &str = "Target";

/// Seed whose 100-row ABCD table has 7 positives, 86 labelled negatives
/// and 7 all-false rows.
pub const ABCD_REFERENCE_SEED: u64 = 33;

const FRAUD_RELATIONSHIP: &str = include_str!("../data/fraud_relationship.facts");
const FRAUD_CHAIN: &str = include_str!("../data/fraud_chain.facts");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Abcd,
    FraudRelationship,
    FraudChain,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abcd" => Ok(Self::Abcd),
            "fraud_relationship" => Ok(Self::FraudRelationship),
            "fraud_chain" => Ok(Self::FraudChain),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub n_rows: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        match (self.kind, self.n_rows) {
            (ScenarioKind::Abcd, Some(0)) => Err(Error::Config("abcd needs n_rows ≥ 1".into())),
            (ScenarioKind::Abcd, _) => Ok(()),
            (_, Some(_)) => Err(Error::Config("n_rows applies to abcd only".into())),
            _ => Ok(()),
        }
    }

    /// Fact table for the scenario; ABCD rows are binarized on their flags.
    pub fn fact_table(&self) -> Result<FactTable> {
        self.validate()?;
        match self.kind {
            ScenarioKind::Abcd => abcd_facts(&gen_abcd(self.n_rows.unwrap_or(100), self.seed)?),
            ScenarioKind::FraudRelationship => gen_fraud_relationship(),
            ScenarioKind::FraudChain => gen_fraud_chain(),
        }
    }
}

/// `n` rows of independent fair booleans A..D with `Target = A∧B∧C∧D`.
pub fn gen_abcd(n: usize, seed: u64) -> Result<Table> {
    if n == 0 {
        return Err(Error::Config("abcd needs at least one row".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = vec![Vec::with_capacity(n); 4];
    for _ in 0..n {
        for c in cols.iter_mut() {
            c.push(rng.random_bool(0.5));
        }
    }
    let target = (0..n).map(|i| cols.iter().all(|c| c[i])).collect();
    let mut columns: Vec<(String, Column)> = ABCD_FEATURES
        .iter()
        .zip(cols)
        .map(|(name, c)| (name.to_string(), Column::Bool(c)))
        .collect();
    columns.push((ABCD_TARGET.into(), Column::Bool(target)));
    Table::new(columns)
}

pub fn abcd_spec() -> ThresholdSpec {
    ThresholdSpec {
        thresholds: vec![],
        flags: ABCD_FEATURES.iter().map(|s| s.to_string()).collect(),
    }
}

pub fn abcd_facts(table: &Table) -> Result<FactTable> {
    binarize(table, &abcd_spec(), ABCD_TARGET)
}

/// Writes an ABCD table as CSV with `true`/`false` cells.
pub fn write_abcd_csv<W: Write>(table: &Table, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let names: Vec<&str> = ABCD_FEATURES.iter().copied().chain([ABCD_TARGET]).collect();
    w.write_record(&names)?;
    let cols = names
        .iter()
        .map(|n| table.flags(n))
        .collect::<Result<Vec<_>>>()?;
    for i in 0..table.len() {
        w.write_record(cols.iter().map(|c| if c[i] { "true" } else { "false" }))?;
    }
    w.flush()?;
    Ok(())
}

/// Four fraudulent transactions over agents 1, 2, 4, 5 with the nine
/// `Fraudsters` atoms they entail; every other pair is negative.
pub fn gen_fraud_relationship() -> Result<FactTable> {
    FactTable::from_text(FRAUD_RELATIONSHIP)
}

/// Ten frauds and twenty-six transactions among 29 agents. A transaction
/// X→Y is a positive `Fraud_Chain(X,Y)` when X received a fraud, and a
/// negative otherwise.
pub fn gen_fraud_chain() -> Result<FactTable> {
    FactTable::from_text(FRAUD_CHAIN)
}
