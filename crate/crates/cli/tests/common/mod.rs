#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn dilp() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dilp"));
    c.env("RUST_LOG", "warn");
    c
}

pub fn run(args: &[&str]) -> Output {
    dilp().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn preset(name: &str) -> PathBuf {
    workspace().join("experiments").join(format!("{name}.toml"))
}

/// A small PaySim-shaped table: frauds are transfers that empty into a new
/// account; genuine rows are merchant payments, cash-outs and transfers into
/// funded accounts.
pub fn write_paysim(path: &Path, rows: usize) {
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record([
        "step", "type", "amount", "nameOrig", "oldbalanceOrg", "newbalanceOrig", "nameDest",
        "oldbalanceDest", "newbalanceDest", "isFraud", "isFlaggedFraud",
    ])
    .unwrap();
    for i in 0..rows {
        let amount = 1000.0 + (i * 37 % 500) as f64;
        let orig = format!("C{}", 10_000 + i);
        let bal = 5000.0 + (i * 13 % 900) as f64;
        let rec: [String; 11] = match i % 10 {
            0 => [
                "1".into(), "TRANSFER".into(), amount.to_string(), orig, bal.to_string(), (bal - amount).to_string(),
                format!("C{}", 90_000 + i), "0".into(), "0".into(), "1".into(), "0".into(),
            ],
            1..=3 => [
                "1".into(), "PAYMENT".into(), amount.to_string(), orig, bal.to_string(), (bal - amount).to_string(),
                format!("M{}", 50_000 + i % 40), "0".into(), "0".into(), "0".into(), "0".into(),
            ],
            4..=6 => [
                "2".into(), "TRANSFER".into(), amount.to_string(), orig, bal.to_string(), (bal - amount).to_string(),
                format!("C{}", 70_000 + i % 60), "800".into(), (800.0 + amount).to_string(), "0".into(), "0".into(),
            ],
            _ => [
                "3".into(), "CASH_OUT".into(), amount.to_string(), orig, bal.to_string(), (bal - amount).to_string(),
                format!("C{}", 60_000 + i % 50), "300".into(), (300.0 + amount).to_string(), "0".into(), "0".into(),
            ],
        };
        w.write_record(&rec).unwrap();
    }
    w.flush().unwrap();
}

/// DSC-style config over `csv` with `pos`+`neg` sampled rows.
pub fn paysim_config(name: &str, csv: &Path, pos: usize, neg: usize) -> String {
    format!(
        r#"name = "{name}"

[data]
csv = "{}"

[tabular]
preset = "symbolic_classifier"
sampling = {{ custom = {{ positives = {pos}, negatives = {neg} }} }}
split = {{ seed = 1 }}

[template]
auxiliary = ["pred1", "pred2"]
inference_steps = 5

[template.rules]
isFraud = [{{ n_exists = 0, int = true }}, {{ n_exists = 0, int = true }}]
pred1 = [{{ n_exists = 0, int = true }}, {{ n_exists = 0, int = true }}]
pred2 = [{{ n_exists = 0, int = false }}, {{ n_exists = 0, int = false }}]

[output]
emit_sql = true
"#,
        csv.display()
    )
}
