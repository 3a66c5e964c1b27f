//! Binary classification metrics.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    /// Positive and negative classes exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

pub fn confusion(predictions: &[bool], labels: &[bool]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (p, l) in predictions.iter().zip(labels) {
        cm.record(*p, *l);
    }
    Ok(cm)
}

/// Which metrics hit a zero denominator and were reported as 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Degenerate {
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
    pub mcc: bool,
}

impl Degenerate {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.f1 || self.mcc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
    #[serde(skip)]
    pub degenerate: Degenerate,
    #[serde(skip)]
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn report(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let mut degenerate = Degenerate::default();
    let accuracy = (cm.tp + cm.tn) as f64 / total as f64;
    let precision = ratio(cm.tp, cm.tp + cm.fp, &mut degenerate.precision);
    let recall = ratio(cm.tp, cm.tp + cm.fn_, &mut degenerate.recall);
    let f1 = if precision + recall == 0.0 {
        degenerate.f1 = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let (tp, fp, tn, fn_) = (cm.tp as u128, cm.fp as u128, cm.tn as u128, cm.fn_ as u128);
    let numerator = (tp * tn) as i128 - (fp * fn_) as i128;
    let left = ((tp + fp) * (tp + fn_)) as f64;
    let right = ((tn + fp) * (tn + fn_)) as f64;
    let mcc = if left == 0.0 || right == 0.0 {
        degenerate.mcc = true;
        0.0
    } else {
        (numerator as f64 / (left.sqrt() * right.sqrt())).clamp(-1.0, 1.0)
    };
    Ok(MetricsReport {
        accuracy,
        precision,
        recall,
        f1,
        mcc,
        degenerate,
        confusion: *cm,
    })
}

impl fmt::Display for MetricsReport {
    /// Flat `key=value` record, one per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cm = &self.confusion;
        writeln!(f, "accuracy={:.4}", self.accuracy)?;
        writeln!(f, "precision={:.4}", self.precision)?;
        writeln!(f, "recall={:.4}", self.recall)?;
        writeln!(f, "f1={:.4}", self.f1)?;
        writeln!(f, "mcc={:.4}", self.mcc)?;
        writeln!(f, "tp={}\nfp={}\ntn={}\nfn={}", cm.tp, cm.fp, cm.tn, cm.fn_)?;
        if self.degenerate.any() {
            let d = &self.degenerate;
            let names: Vec<&str> = [
                (d.precision, "precision"),
                (d.recall, "recall"),
                (d.f1, "f1"),
                (d.mcc, "mcc"),
            ]
            .into_iter()
            .filter_map(|(on, name)| on.then_some(name))
            .collect();
            writeln!(f, "degenerate={}", names.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct Row<'a> {
    experiment: &'a str,
    split: &'a str,
    accuracy: f64,
    precision: f64,
    recall: f64,
    f1: f64,
    mcc: f64,
}

/// Appends result rows to a CSV stream; the header is written when
/// `with_header` is set.
pub fn write_csv_rows<W: Write>(
    out: W,
    rows: &[(&str, &str, &MetricsReport)],
    with_header: bool,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(with_header)
        .from_writer(out);
    for (experiment, split, r) in rows {
        w.serialize(Row {
            experiment,
            split,
            accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            mcc: r.mcc,
        })?;
    }
    w.flush()?;
    Ok(())
}
