//! Presentation of learned programs: flattening auxiliary predicates into
//! rules over extensional atoms, and SQL generation for arity-1 programs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::facts::FactTable;
use crate::logic::{crisp_consequence, Atom, Clause, Language, Predicate, Program, Term};

/// A definite clause with an arbitrary-length body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatRule {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl fmt::Display for FlatRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- ", self.head)?;
        for (i, a) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(".")
    }
}

/// Intensional dependencies of every predicate reachable from the target.
fn dependencies(program: &Program) -> BTreeMap<&Predicate, BTreeSet<&Predicate>> {
    let mut deps: BTreeMap<&Predicate, BTreeSet<&Predicate>> = BTreeMap::new();
    let mut stack = vec![program.target()];
    while let Some(p) = stack.pop() {
        if deps.contains_key(p) {
            continue;
        }
        let next: BTreeSet<&Predicate> = program
            .clauses_for(p)
            .flat_map(|c| c.body().iter())
            .map(Atom::predicate)
            .filter(|q| q.is_intensional())
            .collect();
        stack.extend(next.iter().copied());
        deps.insert(p, next);
    }
    deps
}

/// Predicates reachable from the target, each after everything it depends
/// on. Fails on the first cycle found.
pub fn dependency_order(program: &Program) -> Result<Vec<&Predicate>> {
    let deps = dependencies(program);
    let mut order = Vec::new();
    let mut state: HashMap<&Predicate, bool> = HashMap::new();
    fn visit<'a>(
        p: &'a Predicate,
        program: &'a Program,
        deps: &BTreeMap<&'a Predicate, BTreeSet<&'a Predicate>>,
        state: &mut HashMap<&'a Predicate, bool>,
        order: &mut Vec<&'a Predicate>,
    ) -> Result<()> {
        match state.get(p) {
            Some(true) => return Ok(()),
            Some(false) => return Err(Error::RecursivePredicate(p.name().to_string())),
            None => {}
        }
        state.insert(p, false);
        // body order, so the deepest predicate of the first clause comes first
        for c in program.clauses_for(p) {
            for q in c.body().iter().map(Atom::predicate) {
                if deps[p].contains(q) {
                    visit(q, program, deps, state, order)?;
                }
            }
        }
        state.insert(p, true);
        order.push(p);
        Ok(())
    }
    visit(program.target(), program, &deps, &mut state, &mut order)?;
    Ok(order)
}

/// Predicates with at least one clause whose intensional body atoms are all
/// productive themselves.
fn productive<'a>(program: &'a Program, order: &[&'a Predicate]) -> BTreeSet<&'a Predicate> {
    let mut out = BTreeSet::new();
    for p in order {
        let ok = program.clauses_for(p).any(|c| {
            c.body()
                .iter()
                .all(|a| !a.predicate().is_intensional() || out.contains(a.predicate()))
        });
        if ok {
            out.insert(*p);
        }
    }
    out
}

struct Inliner<'a> {
    program: &'a Program,
    productive: BTreeSet<&'a Predicate>,
    next_var: u8,
}

impl Inliner<'_> {
    /// Alternative flat bodies for a clause body: extensional atoms first,
    /// then each intensional atom's expansion in body order.
    fn expand_body(&mut self, body: &[Atom]) -> Result<Vec<Vec<Atom>>> {
        let ext: Vec<Atom> = body
            .iter()
            .filter(|a| !a.predicate().is_intensional())
            .cloned()
            .collect();
        let mut alternatives = vec![ext];
        for a in body.iter().filter(|a| a.predicate().is_intensional()) {
            let options = self.expand_atom(a)?;
            let mut next = Vec::new();
            for prefix in &alternatives {
                for o in &options {
                    let mut v = prefix.clone();
                    v.extend(o.iter().cloned());
                    next.push(v);
                }
            }
            alternatives = next;
        }
        Ok(alternatives)
    }

    fn expand_atom(&mut self, atom: &Atom) -> Result<Vec<Vec<Atom>>> {
        if !self.productive.contains(atom.predicate()) {
            return Ok(vec![]);
        }
        let program = self.program;
        let mut out = Vec::new();
        for clause in program.clauses_for(atom.predicate()) {
            let renamed = self.rename(clause, atom)?;
            out.extend(self.expand_body(&renamed)?);
        }
        Ok(out)
    }

    /// Body of `clause` with head variables replaced by the call's terms and
    /// body-only variables made fresh.
    fn rename(&mut self, clause: &Clause, call: &Atom) -> Result<Vec<Atom>> {
        let mut map: HashMap<u8, Term> = HashMap::new();
        for (h, t) in clause.head().terms().iter().zip(call.terms()) {
            let Term::Var(v) = h else {
                return Err(Error::InvalidProgram(format!("head {} has a constant", clause.head())));
            };
            if let Some(prev) = map.insert(*v, t.clone()) {
                if &prev != t {
                    return Err(Error::InvalidProgram(format!(
                        "cannot inline {} into {call}: repeated head variable",
                        clause.head()
                    )));
                }
            }
        }
        let mut body = Vec::new();
        for a in clause.body() {
            let mut terms = Vec::new();
            for t in a.terms() {
                terms.push(match t {
                    Term::Var(v) => match map.get(v) {
                        Some(x) => x.clone(),
                        None => {
                            let fresh = Term::Var(self.next_var);
                            self.next_var = self
                                .next_var
                                .checked_add(1)
                                .ok_or_else(|| Error::InvalidProgram("too many variables".into()))?;
                            map.insert(*v, fresh.clone());
                            fresh
                        }
                    },
                    c => c.clone(),
                });
            }
            body.push(Atom::new(a.predicate().clone(), terms)?);
        }
        Ok(body)
    }
}

fn dedup_atoms(body: Vec<Atom>) -> Vec<Atom> {
    let mut out: Vec<Atom> = Vec::new();
    for a in body {
        if !out.contains(&a) {
            out.push(a);
        }
    }
    out
}

/// Inlines auxiliary predicates into the target clauses. Clauses that can
/// never fire (an auxiliary without productive clauses) disappear.
pub fn rephrase(program: &Program) -> Result<Vec<FlatRule>> {
    let order = dependency_order(program)?;
    let productive = productive(program, &order);
    let mut rules: Vec<FlatRule> = Vec::new();
    for clause in program.clauses_for(program.target()) {
        let used = clause.variable_count();
        let mut inliner = Inliner {
            program,
            productive: productive.clone(),
            next_var: u8::try_from(used).map_err(|_| Error::InvalidProgram("too many variables".into()))?,
        };
        for body in inliner.expand_body(clause.body())? {
            let rule = FlatRule {
                head: clause.head().clone(),
                body: dedup_atoms(body),
            };
            if !rules.contains(&rule) {
                rules.push(rule);
            }
        }
    }
    Ok(rules)
}

/// Program text in clause syntax, one clause per line.
pub fn rules_text(program: &Program) -> String {
    program.to_string()
}

/// Rephrased rules, or the program itself when it is recursive.
pub fn display_text(program: &Program) -> Result<String> {
    match rephrase(program) {
        Ok(rules) => Ok(rules.iter().map(|r| format!("{r}\n")).collect()),
        Err(Error::RecursivePredicate(_)) => Ok(rules_text(program)),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlQuery {
    pub text: String,
    /// Extensional predicate columns the query reads.
    pub columns: Vec<String>,
}

impl SqlQuery {
    /// Fails with `UnknownColumn` on the first column the language lacks.
    pub fn check_columns(&self, language: &Language) -> Result<()> {
        match self.columns.iter().find(|c| language.predicate(c).is_none()) {
            Some(c) => Err(Error::UnknownColumn(c.clone())),
            None => Ok(()),
        }
    }
}

impl fmt::Display for SqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// One `select` over `table` with an alias per intensional predicate,
/// deepest first; each predicate is the `or` of its clause conjunctions,
/// last clause first.
pub fn to_sql(program: &Program, table: &str) -> Result<SqlQuery> {
    let order = dependency_order(program)?;
    for p in program.predicates() {
        if p.arity() != 1 {
            return Err(Error::UnsupportedArity {
                predicate: p.name().to_string(),
                arity: p.arity(),
            });
        }
    }
    let mut columns: Vec<String> = Vec::new();
    let mut items = Vec::new();
    for p in &order {
        let mut disjuncts = Vec::new();
        for clause in program.clauses_for(p).collect::<Vec<_>>().into_iter().rev() {
            if clause.variable_count() != 1 {
                return Err(Error::InvalidProgram(format!(
                    "clause `{clause}` has existential variables; SQL output is row-wise"
                )));
            }
            let mut conj: Vec<&str> = Vec::new();
            for a in clause.body() {
                let name = a.predicate().name();
                if !a.predicate().is_intensional() && !columns.iter().any(|c| c == name) {
                    columns.push(name.to_string());
                }
                if !conj.contains(&name) {
                    conj.push(name);
                }
            }
            disjuncts.push(conj.join(" and "));
        }
        let expr = if disjuncts.is_empty() {
            "false".to_string()
        } else {
            disjuncts.join(" or ")
        };
        items.push(format!("    {expr} as {}", p.name()));
    }
    let text = format!("select\n{}\nfrom {table}", items.join(",\n"));
    Ok(SqlQuery { text, columns })
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Lit(bool),
    Col(String),
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

impl Expr {
    fn eval(&self, row: &HashMap<String, bool>) -> Result<bool> {
        Ok(match self {
            Expr::Lit(b) => *b,
            Expr::Col(c) => *row.get(c).ok_or_else(|| Error::UnknownColumn(c.clone()))?,
            Expr::And(xs) => {
                let mut v = true;
                for x in xs {
                    v &= x.eval(row)?;
                }
                v
            }
            Expr::Or(xs) => {
                let mut v = false;
                for x in xs {
                    v |= x.eval(row)?;
                }
                v
            }
        })
    }
}

/// A parsed `select e1 as a1, ..., en as an from t` statement.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectStatement {
    items: Vec<(Expr, String)>,
    pub table: String,
}

fn sql_error(message: impl Into<String>) -> Error {
    Error::Parse {
        line: 1,
        message: message.into(),
    }
}

/// Parses the subset emitted by [`to_sql`]: `select`, `and`, `or`, `as`,
/// `from`, identifiers and the literals `true` / `false`.
pub fn parse_select(text: &str) -> Result<SelectStatement> {
    let spaced = text.replace(',', " , ");
    let tokens: Vec<&str> = spaced.split_whitespace().collect();
    let kw = |t: &str, k: &str| t.eq_ignore_ascii_case(k);
    let mut pos = 0;
    if !tokens.first().is_some_and(|t| kw(t, "select")) {
        return Err(sql_error("expected `select`"));
    }
    pos += 1;
    let mut items = Vec::new();
    loop {
        let mut disjuncts = Vec::new();
        let mut conjuncts = Vec::new();
        loop {
            let t = *tokens.get(pos).ok_or_else(|| sql_error("unexpected end of query"))?;
            pos += 1;
            conjuncts.push(match t.to_ascii_lowercase().as_str() {
                "true" => Expr::Lit(true),
                "false" => Expr::Lit(false),
                "select" | "and" | "or" | "as" | "from" | "," => {
                    return Err(sql_error(format!("unexpected `{t}`")))
                }
                _ => Expr::Col(t.to_string()),
            });
            let next = *tokens.get(pos).ok_or_else(|| sql_error("unexpected end of query"))?;
            if kw(next, "and") {
                pos += 1;
            } else if kw(next, "or") {
                pos += 1;
                disjuncts.push(Expr::And(std::mem::take(&mut conjuncts)));
            } else if kw(next, "as") {
                pos += 1;
                disjuncts.push(Expr::And(std::mem::take(&mut conjuncts)));
                break;
            } else {
                return Err(sql_error(format!("unexpected `{next}`")));
            }
        }
        let alias = *tokens.get(pos).ok_or_else(|| sql_error("missing alias"))?;
        pos += 1;
        items.push((Expr::Or(disjuncts), alias.to_string()));
        match tokens.get(pos) {
            Some(&",") => pos += 1,
            Some(t) if kw(t, "from") => {
                pos += 1;
                break;
            }
            other => return Err(sql_error(format!("unexpected {other:?} after alias"))),
        }
    }
    let table = tokens.get(pos).ok_or_else(|| sql_error("missing table name"))?;
    if pos + 1 != tokens.len() {
        return Err(sql_error("trailing tokens after table name"));
    }
    Ok(SelectStatement {
        items,
        table: table.to_string(),
    })
}

impl SelectStatement {
    /// Evaluates every alias on every constant of `table`, treating each
    /// extensional predicate as a boolean column. Aliases may refer to
    /// earlier aliases.
    pub fn evaluate(&self, table: &FactTable) -> Result<Vec<BTreeMap<String, bool>>> {
        let language = table.language();
        let mut rows = Vec::new();
        for c in language.constants() {
            let mut row: HashMap<String, bool> = HashMap::new();
            for p in language.extensional().filter(|p| p.arity() == 1) {
                let atom = Atom::ground(p.clone(), [c.clone()])?;
                row.insert(p.name().to_string(), table.facts().contains(&atom));
            }
            let mut out = BTreeMap::new();
            for (expr, alias) in &self.items {
                let v = expr.eval(&row)?;
                row.insert(alias.clone(), v);
                out.insert(alias.clone(), v);
            }
            rows.push(out);
        }
        Ok(rows)
    }
}

/// Row-by-row comparison of the generated query against crisp evaluation of
/// the program, over every alias.
pub fn sql_equivalence_check(program: &Program, table: &FactTable) -> Result<bool> {
    let query = to_sql(program, "facts")?;
    query.check_columns(table.language())?;
    let statement = parse_select(&query.text)?;
    let sql_rows = statement.evaluate(table)?;
    let order = dependency_order(program)?;
    let language = table
        .language()
        .with_predicates(order.iter().filter(|p| table.language().predicate(p.name()).is_none()).map(|p| (*p).clone()))?;
    let derived = crisp_consequence(program, table.facts(), &language, order.len());
    for (c, row) in language.constants().iter().zip(&sql_rows) {
        for p in &order {
            let crisp = derived.contains(&Atom::ground((*p).clone(), [c.clone()])?);
            if row[p.name()] != crisp {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
