//! Plain-text clause syntax: `head :- body1, body2.`
//!
//! Terms starting with an uppercase letter or `_` are variables; everything
//! else (bare alphanumerics or double-quoted strings) is a constant. A body
//! with a single atom is read as that atom repeated twice.

use std::collections::{BTreeMap, HashMap};

use super::{is_identifier, Atom, Clause, Constant, Language, Predicate, PredicateKind, Program, Term};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum RawTerm {
    Var(String),
    Const(String),
}

#[derive(Debug, Clone)]
struct RawAtom {
    name: String,
    terms: Vec<RawTerm>,
}

#[derive(Debug, Clone)]
struct RawClause {
    line: usize,
    head: RawAtom,
    body: Vec<RawAtom>,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Self {
            chars: src.char_indices().peekable(),
            src,
            line,
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: self.line,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while let Some((_, c)) = self.chars.peek() {
            if c.is_whitespace() {
                if *c == '\n' {
                    self.line += 1;
                }
                self.chars.next();
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.peek().map(|(_, c)| *c)
    }

    fn expect(&mut self, want: char) -> Result<()> {
        match self.peek() {
            Some(c) if c == want => {
                self.chars.next();
                Ok(())
            }
            Some(c) => self.err(format!("expected `{want}`, found `{c}`")),
            None => self.err(format!("expected `{want}`, found end of input")),
        }
    }

    fn eat_str(&mut self, s: &str) -> bool {
        self.skip_ws();
        let Some(&(start, _)) = self.chars.peek() else {
            return false;
        };
        if self.src[start..].starts_with(s) {
            for _ in s.chars() {
                self.chars.next();
            }
            true
        } else {
            false
        }
    }

    fn word(&mut self) -> Result<String> {
        self.skip_ws();
        let mut out = String::new();
        while let Some(&(_, c)) = self.chars.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                out.push(c);
                self.chars.next();
            } else {
                break;
            }
        }
        if out.is_empty() {
            match self.chars.peek().map(|(_, c)| *c) {
                Some(c) => self.err(format!("unexpected `{c}`")),
                None => self.err("unexpected end of input"),
            }
        } else {
            Ok(out)
        }
    }

    fn quoted(&mut self) -> Result<String> {
        self.expect('"')?;
        let mut out = String::new();
        loop {
            match self.chars.next() {
                Some((_, '\\')) => match self.chars.next() {
                    Some((_, c)) => out.push(c),
                    None => return self.err("unterminated string"),
                },
                Some((_, '"')) => return Ok(out),
                Some((_, c)) => out.push(c),
                None => return self.err("unterminated string"),
            }
        }
    }

    fn term(&mut self) -> Result<RawTerm> {
        if self.peek() == Some('"') {
            return Ok(RawTerm::Const(self.quoted()?));
        }
        let w = self.word()?;
        let first = w.chars().next().expect("non-empty word");
        if first.is_ascii_uppercase() || first == '_' {
            Ok(RawTerm::Var(w))
        } else {
            Ok(RawTerm::Const(w))
        }
    }

    fn atom(&mut self) -> Result<RawAtom> {
        let name = self.word()?;
        if !is_identifier(&name) {
            return self.err(format!("`{name}` is not a predicate name"));
        }
        self.expect('(')?;
        let mut terms = vec![self.term()?];
        while self.peek() == Some(',') {
            self.chars.next();
            terms.push(self.term()?);
        }
        self.expect(')')?;
        Ok(RawAtom { name, terms })
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }
}

/// Removes `%` and `#` comments (outside quotes).
fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let mut in_quotes = false;
        let mut escaped = false;
        for c in line.chars() {
            if in_quotes {
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == '"' {
                    in_quotes = false;
                }
            } else if c == '"' {
                in_quotes = true;
            } else if c == '%' || c == '#' {
                break;
            }
            out.push(c);
        }
        out.push('\n');
    }
    out
}

fn raw_clauses(text: &str) -> Result<Vec<RawClause>> {
    let text = strip_comments(text);
    let mut cur = Cursor::new(&text, 1);
    let mut out = Vec::new();
    while !cur.at_end() {
        let line = cur.line;
        let head = cur.atom()?;
        if !(cur.eat_str(":-") || cur.eat_str("<-") || cur.eat_str("←")) {
            return cur.err("expected `:-` after clause head");
        }
        let mut body = vec![cur.atom()?];
        while cur.peek() == Some(',') {
            cur.chars.next();
            body.push(cur.atom()?);
        }
        cur.expect('.')?;
        if body.len() > 2 {
            return Err(Error::Parse {
                line,
                message: format!("clause body has {} atoms; at most 2 allowed", body.len()),
            });
        }
        out.push(RawClause { line, head, body });
    }
    Ok(out)
}

fn build_atom(raw: &RawAtom, predicate: Predicate, vars: &HashMap<String, u8>) -> Result<Atom> {
    let terms = raw
        .terms
        .iter()
        .map(|t| match t {
            RawTerm::Var(v) => Term::Var(vars[v]),
            RawTerm::Const(c) => Term::Const(Constant::new(c)),
        })
        .collect();
    Atom::new(predicate, terms)
}

fn build_clause(raw: &RawClause, predicate_of: &dyn Fn(&RawAtom) -> Result<Predicate>) -> Result<Clause> {
    let body: Vec<&RawAtom> = if raw.body.len() == 1 {
        vec![&raw.body[0], &raw.body[0]]
    } else {
        raw.body.iter().collect()
    };
    let mut order: Vec<&str> = Vec::new();
    for t in raw.head.terms.iter().chain(body.iter().flat_map(|a| a.terms.iter())) {
        if let RawTerm::Var(v) = t {
            if !order.contains(&v.as_str()) {
                order.push(v);
            }
        }
    }
    let numeric: Option<HashMap<String, u8>> = order
        .iter()
        .map(|name| {
            name.strip_prefix('X')
                .filter(|d| !d.is_empty() && d.chars().all(|c| c.is_ascii_digit()))
                .and_then(|d| d.parse::<u8>().ok())
                .map(|id| (name.to_string(), id))
        })
        .collect();
    let positional: HashMap<String, u8> = order
        .iter()
        .enumerate()
        .map(|(i, n)| (n.to_string(), i as u8))
        .collect();
    let head_pred = predicate_of(&raw.head)?;
    let make = |vars: &HashMap<String, u8>| -> Result<Clause> {
        Clause::new(
            build_atom(&raw.head, head_pred.clone(), vars)?,
            build_atom(body[0], predicate_of(body[0])?, vars)?,
            build_atom(body[1], predicate_of(body[1])?, vars)?,
        )
    };
    let parse_err = |e: Error| Error::Parse {
        line: raw.line,
        message: e.to_string(),
    };
    if let Some(numeric) = numeric {
        if let Ok(c) = make(&numeric) {
            let canonical_head = c
                .head()
                .variables()
                .enumerate()
                .all(|(i, v)| i == v as usize);
            if canonical_head {
                return Ok(c);
            }
        }
    }
    make(&positional).map_err(parse_err)
}

/// Parses a single constant, bare or double-quoted.
pub fn parse_constant(text: &str) -> Result<Constant> {
    let mut cur = Cursor::new(text, 1);
    let symbol = if cur.peek() == Some('"') {
        cur.quoted()?
    } else {
        cur.word()?
    };
    if !cur.at_end() {
        return cur.err("trailing input after constant");
    }
    Ok(Constant::new(symbol))
}

/// Parses one atom; its predicate must be declared in `language`.
pub fn parse_atom(text: &str, language: &Language) -> Result<Atom> {
    let mut cur = Cursor::new(text, 1);
    let raw = cur.atom()?;
    if cur.peek() == Some('.') {
        cur.chars.next();
    }
    if !cur.at_end() {
        return cur.err("trailing input after atom");
    }
    let predicate = lookup(&raw, language, 1)?;
    let vars: HashMap<String, u8> = raw
        .terms
        .iter()
        .filter_map(|t| match t {
            RawTerm::Var(v) => Some(v.clone()),
            RawTerm::Const(_) => None,
        })
        .enumerate()
        .map(|(i, v)| (v, i as u8))
        .collect();
    build_atom(&raw, predicate, &vars)
}

fn lookup(raw: &RawAtom, language: &Language, line: usize) -> Result<Predicate> {
    match language.predicate(&raw.name) {
        Some(p) if p.arity() == raw.terms.len() => Ok(p.clone()),
        Some(p) => Err(Error::Parse {
            line,
            message: format!("{} used with {} arguments", p, raw.terms.len()),
        }),
        None => Err(Error::Parse {
            line,
            message: format!("unknown predicate `{}`", raw.name),
        }),
    }
}

/// Parses one clause; predicates must be declared in `language`.
pub fn parse_clause(text: &str, language: &Language) -> Result<Clause> {
    let raws = raw_clauses(text)?;
    let [raw] = raws.as_slice() else {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected exactly one clause, found {}", raws.len()),
        });
    };
    build_clause(raw, &|a| lookup(a, language, raw.line))
}

/// Parses a program. The head of the first clause is the target predicate,
/// other heads are auxiliary, and every other predicate is extensional.
pub fn parse_program(text: &str) -> Result<Program> {
    let raws = raw_clauses(text)?;
    let Some(first) = raws.first() else {
        return Err(Error::Parse {
            line: 1,
            message: "program has no clauses".to_string(),
        });
    };
    let target_name = first.head.name.clone();
    let mut kinds: BTreeMap<&str, PredicateKind> = BTreeMap::new();
    for r in &raws {
        let k = if r.head.name == target_name {
            PredicateKind::Target
        } else {
            PredicateKind::Auxiliary
        };
        kinds.insert(&r.head.name, k);
    }
    let mut arities: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &raws {
        for a in std::iter::once(&r.head).chain(r.body.iter()) {
            let n = a.terms.len();
            if let Some(prev) = arities.insert(&a.name, n) {
                if prev != n {
                    return Err(Error::Parse {
                        line: r.line,
                        message: format!("predicate {} used with arities {prev} and {n}", a.name),
                    });
                }
            }
        }
    }
    let predicate_of = |a: &RawAtom| -> Result<Predicate> {
        let kind = kinds
            .get(a.name.as_str())
            .copied()
            .unwrap_or(PredicateKind::Extensional);
        Predicate::new(&a.name, a.terms.len(), kind)
    };
    let target = predicate_of(&first.head)?;
    let clauses = raws
        .iter()
        .map(|r| build_clause(r, &predicate_of))
        .collect::<Result<Vec<_>>>()?;
    Program::new(target, clauses)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_paper_style_variables() {
        let p = parse_program(
            "Fraud_Chain(X, Y) :- Fraud(Z, X), Transaction(X, Y).",
        )
        .unwrap();
        assert_eq!(
            p.to_string().trim(),
            "Fraud_Chain(X0,X1) :- Fraud(X2,X0), Transaction(X0,X1)."
        );
    }

    #[test]
    fn single_atom_body_is_duplicated() {
        let p = parse_program("pred2(X0) :- Pe4(X0).").unwrap();
        let c = &p.clauses()[0];
        assert_eq!(c.body()[0], c.body()[1]);
    }

    #[test]
    fn kinds_are_inferred() {
        let p = parse_program(
            "Target(X0) :- pred1(X0), B(X0).\n\
             pred1(X0) :- A(X0), C(X0).",
        )
        .unwrap();
        assert_eq!(p.target().name(), "Target");
        let c = &p.clauses()[0];
        assert_eq!(c.body()[0].predicate().kind(), PredicateKind::Auxiliary);
        assert_eq!(c.body()[1].predicate().kind(), PredicateKind::Extensional);
    }

    #[test]
    fn comments_and_quotes() {
        let p = parse_program(
            "% header\nT(X0) :- A(X0, \"has space\"), A(X0, b). # trailing\n",
        )
        .unwrap();
        assert_eq!(p.clauses().len(), 1);
        assert_eq!(
            p.clauses()[0].body()[0].terms()[1],
            Term::Const(Constant::new("has space"))
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_program("T(X) :- A(X).\nT(X) :- A(X) B(X).").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(parse_program("").is_err());
        assert!(parse_program("T(X) :- A(X), B(X), C(X).").is_err());
        assert!(parse_program("T(X) :- A(X), A(X, Y).").is_err());
    }

    #[test]
    fn rejects_head_variable_missing_from_body() {
        assert!(parse_program("T(X, Y) :- A(X), A(X).").is_err());
    }
}
