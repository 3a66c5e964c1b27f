//! Binarized datasets: a language, extensional facts and labelled examples.
//!
//! Text form, one section per header:
//!
//! ```text
//! [predicates]
//! A/1 extensional
//! Target/1 target
//! [constants]
//! 0 17
//! [facts]
//! A(0)
//! [examples]
//! +Target(0)
//! -Target(1)
//! [dropped]
//! positives 0
//! negatives 3
//! ```
//!
//! A constant line may carry the original row id after the symbol. The
//! `[predicates]` and `[dropped]` sections are optional when reading; missing
//! predicates are inferred from facts (extensional) and examples (target).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::logic::{parse_atom, parse_constant, Atom, Constant, Language, Predicate, PredicateKind};

/// Positive and negative target atoms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExampleSet {
    positives: Vec<Atom>,
    negatives: Vec<Atom>,
}

impl ExampleSet {
    pub fn new(positives: Vec<Atom>, negatives: Vec<Atom>) -> Result<Self> {
        if let Some(a) = positives.iter().chain(&negatives).find(|a| !a.is_ground()) {
            return Err(Error::InvalidAtom(format!("example {a} is not ground")));
        }
        let pos: HashSet<&Atom> = positives.iter().collect();
        if let Some(a) = negatives.iter().find(|a| pos.contains(a)) {
            return Err(Error::InvalidAtom(format!("{a} is both a positive and a negative example")));
        }
        Ok(Self {
            positives,
            negatives,
        })
    }

    pub fn positives(&self) -> &[Atom] {
        &self.positives
    }

    pub fn negatives(&self) -> &[Atom] {
        &self.negatives
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every example with its label, positives first.
    pub fn labelled(&self) -> impl Iterator<Item = (&Atom, bool)> {
        self.positives
            .iter()
            .map(|a| (a, true))
            .chain(self.negatives.iter().map(|a| (a, false)))
    }
}

/// Rows removed by binarization because none of their facts held.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DroppedRows {
    pub positives: usize,
    pub negatives: usize,
}

impl DroppedRows {
    pub fn total(&self) -> usize {
        self.positives + self.negatives
    }
}

#[derive(Debug, Clone)]
pub struct FactTable {
    language: Language,
    facts: BTreeSet<Atom>,
    examples: ExampleSet,
    row_provenance: BTreeMap<Constant, u64>,
    dropped: DroppedRows,
}

impl FactTable {
    pub fn new(language: Language, facts: BTreeSet<Atom>, examples: ExampleSet) -> Result<Self> {
        let grounded = |a: &Atom| {
            a.constants()
                .is_some_and(|cs| cs.iter().all(|c| language.constant_index(c).is_some()))
                && language.predicate(a.predicate().name()).map(Predicate::arity)
                    == Some(a.predicate().arity())
        };
        if let Some(a) = facts.iter().find(|a| !grounded(a)) {
            return Err(Error::InvalidAtom(format!("fact {a} is not grounded in the language")));
        }
        if let Some(a) = facts.iter().find(|a| a.predicate().is_intensional()) {
            return Err(Error::InvalidAtom(format!("fact {a} uses an intensional predicate")));
        }
        let target = language.target();
        if let Some((a, _)) = examples
            .labelled()
            .find(|(a, _)| !grounded(a) || a.predicate() != target)
        {
            return Err(Error::InvalidAtom(format!(
                "example {a} is not a ground {target} atom of the language"
            )));
        }
        Ok(Self {
            language,
            facts,
            examples,
            row_provenance: BTreeMap::new(),
            dropped: DroppedRows::default(),
        })
    }

    pub fn with_provenance(mut self, rows: BTreeMap<Constant, u64>) -> Self {
        self.row_provenance = rows;
        self
    }

    pub fn with_dropped(mut self, dropped: DroppedRows) -> Self {
        self.dropped = dropped;
        self
    }

    pub fn language(&self) -> &Language {
        &self.language
    }

    pub fn facts(&self) -> &BTreeSet<Atom> {
        &self.facts
    }

    pub fn examples(&self) -> &ExampleSet {
        &self.examples
    }

    pub fn row_provenance(&self) -> &BTreeMap<Constant, u64> {
        &self.row_provenance
    }

    pub fn dropped(&self) -> DroppedRows {
        self.dropped
    }

    pub fn target(&self) -> &Predicate {
        self.language.target()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("[predicates]\n");
        for p in self.language.predicates() {
            let kind = match p.kind() {
                PredicateKind::Extensional => "extensional",
                PredicateKind::Target => "target",
                PredicateKind::Auxiliary => "auxiliary",
            };
            let _ = writeln!(out, "{p} {kind}");
        }
        out.push_str("[constants]\n");
        for c in self.language.constants() {
            match self.row_provenance.get(c) {
                Some(row) => {
                    let _ = writeln!(out, "{c} {row}");
                }
                None => {
                    let _ = writeln!(out, "{c}");
                }
            }
        }
        out.push_str("[facts]\n");
        for f in &self.facts {
            let _ = writeln!(out, "{f}");
        }
        out.push_str("[examples]\n");
        for (a, label) in self.examples.labelled() {
            let _ = writeln!(out, "{}{a}", if label { '+' } else { '-' });
        }
        let _ = write!(
            out,
            "[dropped]\npositives {}\nnegatives {}\n",
            self.dropped.positives, self.dropped.negatives
        );
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut section = "";
        let mut declared: Vec<Predicate> = Vec::new();
        let mut constants = Vec::new();
        let mut rows = BTreeMap::new();
        let mut facts_raw = Vec::new();
        let mut examples_raw = Vec::new();
        let mut dropped = DroppedRows::default();
        let err = |line: usize, message: String| Error::Parse { line, message };
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = match &line[1..line.len() - 1] {
                    s @ ("predicates" | "constants" | "facts" | "examples" | "dropped") => s,
                    other => return Err(err(line_no, format!("unknown section [{other}]"))),
                };
                continue;
            }
            match section {
                "predicates" => declared.push(parse_declaration(line).map_err(|m| err(line_no, m))?),
                "constants" => {
                    let (symbol, row) = split_constant_line(line);
                    let c = parse_constant(symbol).map_err(|e| err(line_no, e.to_string()))?;
                    if let Some(row) = row {
                        let row = row
                            .parse::<u64>()
                            .map_err(|_| err(line_no, format!("bad row id `{row}`")))?;
                        rows.insert(c.clone(), row);
                    }
                    constants.push(c);
                }
                "facts" => facts_raw.push((line_no, line)),
                "examples" => {
                    let (label, atom) = match line.chars().next() {
                        Some('+') => (true, &line[1..]),
                        Some('-') => (false, &line[1..]),
                        Some('\u{2212}') => (false, &line['\u{2212}'.len_utf8()..]),
                        _ => return Err(err(line_no, "example lines start with + or -".into())),
                    };
                    examples_raw.push((line_no, label, atom.trim()));
                }
                "dropped" => {
                    let mut parts = line.split_whitespace();
                    let (Some(key), Some(value), None) = (parts.next(), parts.next(), parts.next())
                    else {
                        return Err(err(line_no, format!("bad dropped-row line `{line}`")));
                    };
                    let value = value
                        .parse::<usize>()
                        .map_err(|_| err(line_no, format!("bad count `{value}`")))?;
                    match key {
                        "positives" => dropped.positives = value,
                        "negatives" => dropped.negatives = value,
                        _ => return Err(err(line_no, format!("unknown key `{key}`"))),
                    }
                }
                _ => return Err(err(line_no, "content before the first section header".into())),
            }
        }
        if declared.is_empty() {
            declared = infer_predicates(&facts_raw, &examples_raw)?;
        }
        let language = Language::new(declared, constants)?;
        let facts = facts_raw
            .iter()
            .map(|(n, t)| parse_atom(t, &language).map_err(|e| relocate(e, *n)))
            .collect::<Result<BTreeSet<_>>>()?;
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for (n, label, t) in examples_raw {
            let atom = parse_atom(t, &language).map_err(|e| relocate(e, n))?;
            if label {
                positives.push(atom);
            } else {
                negatives.push(atom);
            }
        }
        Ok(Self::new(language, facts, ExampleSet::new(positives, negatives)?)?
            .with_provenance(rows)
            .with_dropped(dropped))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomically(path, self.to_text().as_bytes())
    }
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomically(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn relocate(e: Error, line: usize) -> Error {
    match e {
        Error::Parse { message, .. } => Error::Parse { line, message },
        other => other,
    }
}

fn split_constant_line(line: &str) -> (&str, Option<&str>) {
    // a quoted symbol may contain spaces
    let end = if line.starts_with('"') {
        let mut escaped = false;
        line.char_indices()
            .skip(1)
            .find(|&(_, c)| {
                let hit = c == '"' && !escaped;
                escaped = c == '\\' && !escaped;
                hit
            })
            .map_or(line.len(), |(i, _)| i + 1)
    } else {
        line.find(char::is_whitespace).unwrap_or(line.len())
    };
    let rest = line[end..].trim();
    (&line[..end], (!rest.is_empty()).then_some(rest))
}

fn parse_declaration(line: &str) -> std::result::Result<Predicate, String> {
    let mut parts = line.split_whitespace();
    let (Some(sig), Some(kind), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(format!("expected `name/arity kind`, found `{line}`"));
    };
    let (name, arity) = sig
        .rsplit_once('/')
        .ok_or_else(|| format!("expected `name/arity`, found `{sig}`"))?;
    let arity: usize = arity.parse().map_err(|_| format!("bad arity in `{sig}`"))?;
    let kind = match kind {
        "extensional" => PredicateKind::Extensional,
        "target" => PredicateKind::Target,
        "auxiliary" => PredicateKind::Auxiliary,
        other => return Err(format!("unknown predicate kind `{other}`")),
    };
    Predicate::new(name, arity, kind).map_err(|e| e.to_string())
}

fn infer_predicates(
    facts: &[(usize, &str)],
    examples: &[(usize, bool, &str)],
) -> Result<Vec<Predicate>> {
    let signature = |line: usize, text: &str| -> Result<(String, usize)> {
        let open = text.find('(').ok_or_else(|| Error::Parse {
            line,
            message: format!("`{text}` is not an atom"),
        })?;
        let inner = &text[open + 1..text.rfind(')').unwrap_or(text.len())];
        let mut depth_quote = false;
        let mut commas = 0;
        for c in inner.chars() {
            match c {
                '"' => depth_quote = !depth_quote,
                ',' if !depth_quote => commas += 1,
                _ => {}
            }
        }
        Ok((text[..open].trim().to_string(), commas + 1))
    };
    let mut out: Vec<Predicate> = Vec::new();
    let mut push = |name: String, arity: usize, kind: PredicateKind| -> Result<()> {
        if !out.iter().any(|p| p.name() == name) {
            out.push(Predicate::new(name, arity, kind)?);
        }
        Ok(())
    };
    for (n, _, t) in examples {
        let (name, arity) = signature(*n, t)?;
        push(name, arity, PredicateKind::Target)?;
    }
    for (n, t) in facts {
        let (name, arity) = signature(*n, t)?;
        push(name, arity, PredicateKind::Extensional)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> FactTable {
        let language = Language::new(
            vec![
                Predicate::extensional("A", 1).unwrap(),
                Predicate::extensional("B", 1).unwrap(),
                Predicate::target("Target", 1).unwrap(),
            ],
            vec![Constant::new("0"), Constant::new("1"), Constant::new("Odd one")],
        )
        .unwrap();
        let at = |s: &str| parse_atom(s, &language).unwrap();
        let facts = [at("A(0)"), at("B(0)"), at("A(1)"), at("B(\"Odd one\")")].into();
        let examples = ExampleSet::new(vec![at("Target(0)")], vec![at("Target(1)")]).unwrap();
        FactTable::new(language, facts, examples)
            .unwrap()
            .with_provenance([(Constant::new("0"), 4), (Constant::new("1"), 9)].into())
            .with_dropped(DroppedRows {
                positives: 1,
                negatives: 2,
            })
    }

    #[test]
    fn text_roundtrip() {
        let t = small();
        let text = t.to_text();
        let back = FactTable::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.facts().len(), 4);
        assert_eq!(back.dropped().total(), 3);
        assert_eq!(back.row_provenance()[&Constant::new("1")], 9);
    }

    #[test]
    fn predicates_are_inferred_when_undeclared() {
        let text = "[constants]\n1\n2\n[facts]\nFraud(1,2)\n[examples]\n+Fraudsters(1,2)\n-Fraudsters(2,1)\n";
        let t = FactTable::from_text(text).unwrap();
        assert_eq!(t.target().name(), "Fraudsters");
        assert_eq!(t.language().predicate("Fraud").unwrap().arity(), 2);
        assert_eq!(t.examples().len(), 2);
    }

    #[test]
    fn overlapping_examples_are_rejected() {
        let text = "[constants]\n1\n[facts]\nA(1)\n[examples]\n+T(1)\n-T(1)\n";
        assert!(FactTable::from_text(text).is_err());
    }

    #[test]
    fn unknown_constant_is_rejected() {
        let text = "[constants]\n1\n[facts]\nA(2)\n[examples]\n+T(1)\n";
        assert!(FactTable::from_text(text).is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "[constants]\n1\n[facts]\nA(1\n[examples]\n+T(1)\n";
        match FactTable::from_text(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
