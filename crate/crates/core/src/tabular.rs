//! Tabular preprocessing: PaySim loading and cleaning, rolling aggregates,
//! group-aware splits, standard scaling, balanced sampling and threshold
//! binarization into fact tables.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facts::{DroppedRows, ExampleSet, FactTable};
use crate::logic::{is_identifier, Atom, Constant, Language, Predicate};

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Int(Vec<i64>),
    Float(Vec<f64>),
    Bool(Vec<bool>),
    Str(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Int(v) => v.len(),
            Column::Float(v) => v.len(),
            Column::Bool(v) => v.len(),
            Column::Str(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Numeric view; booleans read as 0/1, strings are not numeric.
    pub fn as_f64(&self) -> Option<Vec<f64>> {
        match self {
            Column::Int(v) => Some(v.iter().map(|x| *x as f64).collect()),
            Column::Float(v) => Some(v.clone()),
            Column::Bool(v) => Some(v.iter().map(|b| f64::from(u8::from(*b))).collect()),
            Column::Str(_) => None,
        }
    }

    fn take(&self, rows: &[usize]) -> Column {
        fn pick<T: Clone>(v: &[T], rows: &[usize]) -> Vec<T> {
            rows.iter().map(|&r| v[r].clone()).collect()
        }
        match self {
            Column::Int(v) => Column::Int(pick(v, rows)),
            Column::Float(v) => Column::Float(pick(v, rows)),
            Column::Bool(v) => Column::Bool(pick(v, rows)),
            Column::Str(v) => Column::Str(pick(v, rows)),
        }
    }
}

/// Named columns of equal length plus the original row id of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    names: Vec<String>,
    columns: Vec<Column>,
    row_ids: Vec<u64>,
}

impl Table {
    pub fn new(columns: Vec<(String, Column)>) -> Result<Self> {
        let len = columns.first().map_or(0, |(_, c)| c.len());
        let mut seen = BTreeSet::new();
        for (name, c) in &columns {
            if c.len() != len {
                return Err(Error::SchemaMismatch(format!(
                    "column {name} has {} rows, expected {len}",
                    c.len()
                )));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::SchemaMismatch(format!("duplicate column {name}")));
            }
        }
        let (names, columns) = columns.into_iter().unzip();
        Ok(Self {
            names,
            columns,
            row_ids: (0..len as u64).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn numeric(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)?
            .as_f64()
            .ok_or_else(|| Error::SchemaMismatch(format!("column {name} is not numeric")))
    }

    pub fn strings(&self, name: &str) -> Result<&[String]> {
        match self.column(name)? {
            Column::Str(v) => Ok(v),
            _ => Err(Error::SchemaMismatch(format!("column {name} is not text"))),
        }
    }

    /// Adds or replaces a column.
    pub fn set_column(&mut self, name: &str, column: Column) -> Result<()> {
        if column.len() != self.len() {
            return Err(Error::SchemaMismatch(format!(
                "column {name} has {} rows, expected {}",
                column.len(),
                self.len()
            )));
        }
        match self.names.iter().position(|n| n == name) {
            Some(i) => self.columns[i] = column,
            None => {
                self.names.push(name.to_string());
                self.columns.push(column);
            }
        }
        Ok(())
    }

    /// The given rows, in the given order, keeping their original ids.
    pub fn select(&self, rows: &[usize]) -> Table {
        Table {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
            row_ids: rows.iter().map(|&r| self.row_ids[r]).collect(),
        }
    }

    /// Boolean view of a 0/1 or boolean column.
    pub fn flags(&self, name: &str) -> Result<Vec<bool>> {
        match self.column(name)? {
            Column::Bool(v) => Ok(v.clone()),
            Column::Int(v) => v
                .iter()
                .map(|x| match x {
                    0 => Ok(false),
                    1 => Ok(true),
                    other => Err(Error::SchemaMismatch(format!(
                        "column {name} holds {other}, expected 0 or 1"
                    ))),
                })
                .collect(),
            _ => Err(Error::SchemaMismatch(format!("column {name} is not boolean"))),
        }
    }
}

pub const PAYSIM_COLUMNS: [&str; 10] = [
    "step",
    "type",
    "amount",
    "nameOrig",
    "oldbalanceOrg",
    "newbalanceOrig",
    "nameDest",
    "oldbalanceDest",
    "newbalanceDest",
    "isFraud",
];

/// Balance and amount columns that get standard-scaled.
pub const PAYSIM_NUMERIC: [&str; 5] = [
    "amount",
    "oldbalanceOrg",
    "newbalanceOrig",
    "oldbalanceDest",
    "newbalanceDest",
];

#[derive(Debug, Deserialize)]
struct PaysimRecord {
    step: i64,
    #[serde(rename = "type")]
    kind: String,
    amount: f64,
    #[serde(rename = "nameOrig")]
    name_orig: String,
    #[serde(rename = "oldbalanceOrg")]
    old_orig: f64,
    #[serde(rename = "newbalanceOrig")]
    new_orig: f64,
    #[serde(rename = "nameDest")]
    name_dest: String,
    #[serde(rename = "oldbalanceDest")]
    old_dest: f64,
    #[serde(rename = "newbalanceDest")]
    new_dest: f64,
    #[serde(rename = "isFraud")]
    is_fraud: i64,
}

/// Reads a PaySim-format CSV. Extra columns are ignored.
pub fn read_paysim<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let missing: Vec<&str> = PAYSIM_COLUMNS
        .iter()
        .copied()
        .filter(|c| !headers.iter().any(|h| h == *c))
        .collect();
    if !missing.is_empty() {
        return Err(Error::SchemaMismatch(format!(
            "missing columns: {}",
            missing.join(", ")
        )));
    }
    let mut step = Vec::new();
    let mut kind = Vec::new();
    let mut amount = Vec::new();
    let mut name_orig = Vec::new();
    let mut old_orig = Vec::new();
    let mut new_orig = Vec::new();
    let mut name_dest = Vec::new();
    let mut old_dest = Vec::new();
    let mut new_dest = Vec::new();
    let mut fraud = Vec::new();
    for (i, rec) in rdr.deserialize::<PaysimRecord>().enumerate() {
        let r = rec?;
        if !matches!(r.is_fraud, 0 | 1) {
            return Err(Error::SchemaMismatch(format!(
                "row {i}: isFraud is {}, expected 0 or 1",
                r.is_fraud
            )));
        }
        step.push(r.step);
        kind.push(r.kind);
        amount.push(r.amount);
        name_orig.push(r.name_orig);
        old_orig.push(r.old_orig);
        new_orig.push(r.new_orig);
        name_dest.push(r.name_dest);
        old_dest.push(r.old_dest);
        new_dest.push(r.new_dest);
        fraud.push(r.is_fraud == 1);
    }
    Table::new(vec![
        ("step".into(), Column::Int(step)),
        ("type".into(), Column::Str(kind)),
        ("amount".into(), Column::Float(amount)),
        ("nameOrig".into(), Column::Str(name_orig)),
        ("oldbalanceOrg".into(), Column::Float(old_orig)),
        ("newbalanceOrig".into(), Column::Float(new_orig)),
        ("nameDest".into(), Column::Str(name_dest)),
        ("oldbalanceDest".into(), Column::Float(old_dest)),
        ("newbalanceDest".into(), Column::Float(new_dest)),
        ("isFraud".into(), Column::Bool(fraud)),
    ])
}

pub fn load_paysim(path: &Path) -> Result<Table> {
    read_paysim(std::fs::File::open(path)?)
}

fn is_merchant(name: &str) -> bool {
    name.starts_with('M')
}

/// Imputes merchant-side balances and adds the `external_orig` and
/// `external_dest` flags plus one-hot `type_<KIND>` columns.
///
/// A row is external-origin when its origin is a merchant or its old origin
/// balance is zero; the old origin balance is then set to the amount.
/// External-destination rows (merchant destination or zero new destination
/// balance) get the new destination balance set to the amount.
pub fn paysim_clean(table: &Table) -> Result<Table> {
    for c in PAYSIM_COLUMNS {
        table.column(c).map_err(|_| Error::SchemaMismatch(format!("missing column {c}")))?;
    }
    let mut out = table.clone();
    let amount = table.numeric("amount")?;
    let mut old_orig = table.numeric("oldbalanceOrg")?;
    let mut new_dest = table.numeric("newbalanceDest")?;
    let orig = table.strings("nameOrig")?;
    let dest = table.strings("nameDest")?;
    let mut ext_orig = vec![false; table.len()];
    let mut ext_dest = vec![false; table.len()];
    for i in 0..table.len() {
        if is_merchant(&orig[i]) || old_orig[i] == 0.0 {
            old_orig[i] = amount[i];
            ext_orig[i] = true;
        }
        if is_merchant(&dest[i]) || new_dest[i] == 0.0 {
            new_dest[i] = amount[i];
            ext_dest[i] = true;
        }
    }
    out.set_column("oldbalanceOrg", Column::Float(old_orig))?;
    out.set_column("newbalanceDest", Column::Float(new_dest))?;
    out.set_column("external_orig", Column::Bool(ext_orig))?;
    out.set_column("external_dest", Column::Bool(ext_dest))?;
    let kinds = table.strings("type")?.to_vec();
    let distinct: BTreeSet<&str> = kinds.iter().map(String::as_str).collect();
    for k in distinct {
        let name = format!("type_{k}");
        if !is_identifier(&name) {
            return Err(Error::SchemaMismatch(format!("transaction type `{k}` is not a valid name")));
        }
        out.set_column(&name, Column::Bool(kinds.iter().map(|x| x == k).collect()))?;
    }
    Ok(out)
}

/// Names of the columns written by [`compute_aggregates`].
pub fn aggregate_columns(windows: &[usize]) -> Vec<String> {
    windows
        .iter()
        .flat_map(|w| [format!("amount_mean_{w}"), format!("amount_max_{w}")])
        .collect()
}

/// Per group, trailing rolling mean and max of `value` over each window,
/// including the current row. Rows are ordered by `order` within a group,
/// ties by table position; output keeps the table's row order.
pub fn compute_aggregates(
    table: &Table,
    group: &str,
    order: &str,
    value: &str,
    windows: &[usize],
) -> Result<Table> {
    let keys = table.strings(group)?;
    let steps = table.numeric(order)?;
    let values = table.numeric(value)?;
    let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, k) in keys.iter().enumerate() {
        groups.entry(k.as_str()).or_default().push(i);
    }
    let mut out = table.clone();
    for &w in windows {
        if w == 0 {
            return Err(Error::Config("aggregate windows must be at least 1".into()));
        }
        let mut mean = vec![0.0; table.len()];
        let mut max = vec![0.0; table.len()];
        for rows in groups.values() {
            let mut rows = rows.clone();
            rows.sort_by(|a, b| steps[*a].total_cmp(&steps[*b]).then(a.cmp(b)));
            for (pos, &r) in rows.iter().enumerate() {
                let window = &rows[pos.saturating_sub(w - 1)..=pos];
                let xs = window.iter().map(|&j| values[j]);
                mean[r] = xs.clone().sum::<f64>() / window.len() as f64;
                max[r] = xs.fold(f64::NEG_INFINITY, f64::max);
            }
        }
        out.set_column(&format!("{value}_mean_{w}"), Column::Float(mean))?;
        out.set_column(&format!("{value}_max_{w}"), Column::Float(max))?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub test_fraction: f64,
    /// Fraction of the non-test groups held out for validation.
    pub validation_fraction: f64,
    pub group_key: String,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.15,
            validation_fraction: 0.15,
            group_key: "nameDest".into(),
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn train_fraction(&self) -> f64 {
        1.0 - self.test_fraction
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Table,
    pub validation: Table,
    pub test: Table,
}

/// Seeded shuffle of the distinct group keys; the first `round(test·G)`
/// groups form the test partition, the next `round(validation·rest)` the
/// validation partition, the remainder train.
pub fn group_split(table: &Table, spec: &SplitSpec) -> Result<Split> {
    for f in [spec.test_fraction, spec.validation_fraction] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("split fraction {f} outside (0, 1)")));
        }
    }
    let keys = table.strings(&spec.group_key)?;
    let mut order: Vec<&str> = Vec::new();
    let mut seen = BTreeSet::new();
    for k in keys {
        if seen.insert(k.as_str()) {
            order.push(k);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let g = order.len();
    let n_test = (spec.test_fraction * g as f64).round() as usize;
    let n_val = (spec.validation_fraction * (g - n_test) as f64).round() as usize;
    let mut part: HashMap<&str, u8> = HashMap::new();
    for (i, k) in order.iter().enumerate() {
        let p = if i < n_test {
            2
        } else if i < n_test + n_val {
            1
        } else {
            0
        };
        part.insert(k, p);
    }
    let mut rows: [Vec<usize>; 3] = Default::default();
    for (i, k) in keys.iter().enumerate() {
        rows[part[k.as_str()] as usize].push(i);
    }
    Ok(Split {
        train: table.select(&rows[0]),
        validation: table.select(&rows[1]),
        test: table.select(&rows[2]),
    })
}

/// Per-column mean and population standard deviation fitted on a train set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub columns: Vec<ScaledColumn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledColumn {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

impl Scaler {
    pub fn fit(table: &Table, columns: &[&str]) -> Result<Self> {
        let mut out = Vec::new();
        for &name in columns {
            let xs = table.numeric(name)?;
            let n = xs.len().max(1) as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            out.push(ScaledColumn {
                name: name.to_string(),
                mean,
                std: var.sqrt(),
            });
        }
        Ok(Self { columns: out })
    }

    /// Zero-variance columns pass through unchanged.
    pub fn apply(&self, table: &Table) -> Result<Table> {
        let mut out = table.clone();
        for c in &self.columns {
            if c.std == 0.0 {
                warn!("column {} has zero variance; left unscaled", c.name);
                continue;
            }
            let xs = table.numeric(&c.name)?;
            out.set_column(
                &c.name,
                Column::Float(xs.iter().map(|x| (x - c.mean) / c.std).collect()),
            )?;
        }
        Ok(out)
    }
}

/// Fits a scaler on `train` and applies it to `train` and every table in
/// `others`.
pub fn standard_scale(
    train: &Table,
    others: &[&Table],
    columns: &[&str],
) -> Result<(Table, Vec<Table>, Scaler)> {
    let scaler = Scaler::fit(train, columns)?;
    let scaled = scaler.apply(train)?;
    let rest = others
        .iter()
        .map(|t| scaler.apply(t))
        .collect::<Result<Vec<_>>>()?;
    Ok((scaled, rest, scaler))
}

/// Seeded uniform sample without replacement of `n_pos` positive and
/// `n_neg` negative rows; the result keeps table order.
pub fn sample_balanced(table: &Table, target: &str, n_pos: usize, n_neg: usize, seed: u64) -> Result<Table> {
    let labels = table.flags(target)?;
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..table.len()).partition(|&i| labels[i]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |pool: &[usize], n: usize, class: &'static str| -> Result<Vec<usize>> {
        if n > pool.len() {
            return Err(Error::InsufficientRows {
                class,
                requested: n,
                available: pool.len(),
            });
        }
        Ok(rand::seq::index::sample(&mut rng, pool.len(), n)
            .into_iter()
            .map(|i| pool[i])
            .collect())
    };
    let mut rows = pick(&pos, n_pos, "positive")?;
    rows.extend(pick(&neg, n_neg, "negative")?);
    rows.sort_unstable();
    Ok(table.select(&rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `x > t`
    Greater,
    /// `x ≤ t`
    LessOrEqual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Threshold {
    pub column: String,
    pub threshold: f64,
    pub direction: Direction,
    pub predicate: String,
}

impl Threshold {
    pub fn greater(column: &str, threshold: f64) -> Self {
        Self {
            column: column.to_string(),
            threshold,
            direction: Direction::Greater,
            predicate: format!("{column}_gt"),
        }
    }

    pub fn holds(&self, x: f64) -> bool {
        match self.direction {
            Direction::Greater => x > self.threshold,
            Direction::LessOrEqual => x <= self.threshold,
        }
    }
}

/// Numeric thresholds plus boolean columns used as predicates verbatim.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSpec {
    pub thresholds: Vec<Threshold>,
    pub flags: Vec<String>,
}

impl ThresholdSpec {
    pub fn predicate_names(&self) -> impl Iterator<Item = &str> {
        self.thresholds
            .iter()
            .map(|t| t.predicate.as_str())
            .chain(self.flags.iter().map(String::as_str))
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for name in self.predicate_names() {
            if !is_identifier(name) {
                return Err(Error::Config(format!("`{name}` is not a valid predicate name")));
            }
            if !seen.insert(name) {
                return Err(Error::Config(format!("predicate {name} is defined twice")));
            }
        }
        Ok(())
    }

    /// Thresholds published for the Decision Tree split points.
    pub fn decision_tree() -> Self {
        Self {
            thresholds: vec![
                Threshold::greater("amount", 1.297),
                Threshold::greater("oldbalanceDest", -0.007),
            ],
            flags: vec!["type_TRANSFER".into(), "external_dest".into()],
        }
    }

    /// The Deep Symbolic Classification rule's boolean inputs.
    pub fn symbolic_classifier() -> Self {
        Self {
            thresholds: vec![],
            flags: vec!["type_TRANSFER".into(), "external_dest".into()],
        }
    }
}

/// Appends a `NOT_<predicate>` less-or-equal twin for every threshold.
pub fn add_negations(spec: &ThresholdSpec) -> Result<ThresholdSpec> {
    if spec.thresholds.iter().any(|t| t.direction != Direction::Greater) {
        return Err(Error::Config(
            "negations can only be added to greater-than thresholds".into(),
        ));
    }
    let mut out = spec.clone();
    for t in &spec.thresholds {
        out.thresholds.push(Threshold {
            column: t.column.clone(),
            threshold: t.threshold,
            direction: Direction::LessOrEqual,
            predicate: format!("NOT_{}", t.predicate),
        });
    }
    Ok(out)
}

/// One constant per row with at least one true predicate (row ordinal among
/// the surviving rows); rows with no true predicate are dropped and counted.
pub fn binarize(table: &Table, spec: &ThresholdSpec, target: &str) -> Result<FactTable> {
    spec.validate()?;
    if !is_identifier(target) || spec.predicate_names().any(|p| p == target) {
        return Err(Error::Config(format!("`{target}` cannot be the target predicate")));
    }
    let labels = table.flags(target)?;
    let mut tests: Vec<(Predicate, Box<dyn Fn(usize) -> bool + '_>)> = Vec::new();
    for t in &spec.thresholds {
        let xs = table.numeric(&t.column)?;
        tests.push((
            Predicate::extensional(&t.predicate, 1)?,
            Box::new(move |i| t.holds(xs[i])),
        ));
    }
    for f in &spec.flags {
        let xs = table.flags(f)?;
        tests.push((Predicate::extensional(f, 1)?, Box::new(move |i| xs[i])));
    }
    let target_pred = Predicate::target(target, 1)?;
    let mut constants = Vec::new();
    let mut provenance = BTreeMap::new();
    let mut facts = BTreeSet::new();
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    let mut dropped = DroppedRows::default();
    for (row, &label) in labels.iter().enumerate() {
        let holding: Vec<&Predicate> = tests
            .iter()
            .filter(|(_, test)| test(row))
            .map(|(p, _)| p)
            .collect();
        if holding.is_empty() {
            if label {
                dropped.positives += 1;
            } else {
                dropped.negatives += 1;
            }
            continue;
        }
        let c = Constant::from(constants.len() as u64);
        for p in holding {
            facts.insert(Atom::ground((*p).clone(), [c.clone()])?);
        }
        let example = Atom::ground(target_pred.clone(), [c.clone()])?;
        if label {
            positives.push(example);
        } else {
            negatives.push(example);
        }
        provenance.insert(c.clone(), table.row_ids()[row]);
        constants.push(c);
    }
    if constants.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let mut predicates: Vec<Predicate> = tests.into_iter().map(|(p, _)| p).collect();
    predicates.push(target_pred);
    let language = Language::new(predicates, constants)?;
    Ok(FactTable::new(language, facts, ExampleSet::new(positives, negatives)?)?
        .with_provenance(provenance)
        .with_dropped(dropped))
}

/// A labelled agent-to-agent transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    pub relation: String,
    /// `false` marks an explicit non-edge, used only for conflict detection.
    pub present: bool,
}

impl Edge {
    pub fn new(src: impl ToString, dst: impl ToString, relation: &str) -> Self {
        Self {
            src: src.to_string(),
            dst: dst.to_string(),
            relation: relation.to_string(),
            present: true,
        }
    }
}

/// Arity-2 facts over agent constants. Constants are the agents in order of
/// first appearance (edges, then examples); one extensional predicate per
/// relation label.
pub fn facts_arity2(
    edges: &[Edge],
    target: &str,
    positives: &[(String, String)],
    negatives: &[(String, String)],
) -> Result<FactTable> {
    let mut labels: HashMap<(&str, &str, &str), bool> = HashMap::new();
    for e in edges {
        let key = (e.src.as_str(), e.dst.as_str(), e.relation.as_str());
        if let Some(prev) = labels.insert(key, e.present) {
            if prev != e.present {
                return Err(Error::DuplicateEdgeLabelConflict {
                    src: e.src.clone(),
                    dst: e.dst.clone(),
                    relation: e.relation.clone(),
                });
            }
        }
    }
    let mut constants: Vec<Constant> = Vec::new();
    let mut seen = BTreeSet::new();
    let agents = edges
        .iter()
        .flat_map(|e| [&e.src, &e.dst])
        .chain(positives.iter().chain(negatives).flat_map(|(a, b)| [a, b]));
    for a in agents {
        if seen.insert(a.as_str()) {
            constants.push(Constant::new(a));
        }
    }
    let mut relations: Vec<Predicate> = Vec::new();
    for e in edges {
        if !relations.iter().any(|p| p.name() == e.relation) {
            relations.push(Predicate::extensional(&e.relation, 2)?);
        }
    }
    let facts = edges
        .iter()
        .filter(|e| e.present)
        .map(|e| {
            let p = relations
                .iter()
                .find(|p| p.name() == e.relation)
                .expect("relation registered")
                .clone();
            Atom::ground(p, [e.src.as_str(), e.dst.as_str()])
        })
        .collect::<Result<BTreeSet<_>>>()?;
    let target = Predicate::target(target, 2)?;
    let atoms = |pairs: &[(String, String)]| {
        pairs
            .iter()
            .map(|(a, b)| Atom::ground(target.clone(), [a.as_str(), b.as_str()]))
            .collect::<Result<Vec<_>>>()
    };
    let examples = ExampleSet::new(atoms(positives)?, atoms(negatives)?)?;
    relations.push(target);
    let language = Language::new(relations, constants)?;
    FactTable::new(language, facts, examples)
}
