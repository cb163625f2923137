//! CNF formulas as counted multisets of counted-multiset clauses.
//!
//! Clauses are multisets of literals and formulas are multisets of clauses.
//! Both are stored in counted form: a clause maps each literal to its
//! occurrence count, a formula maps each (canonical) clause to its
//! multiplicity. Formula multiplicities are big integers, since resolution
//! can square the clause count at every step.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;

use num_bigint::BigUint;
use num_traits::One;
use thiserror::Error;

/// A variable index, 1-based.
pub type Var = u32;

/// A literal: a variable or its negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub var: Var,
    pub negated: bool,
}

impl Literal {
    pub fn pos(var: Var) -> Self {
        assert!(var >= 1, "variables are 1-based");
        Literal { var, negated: false }
    }

    pub fn neg(var: Var) -> Self {
        assert!(var >= 1, "variables are 1-based");
        Literal { var, negated: true }
    }

    /// From a signed DIMACS literal (nonzero).
    pub fn from_dimacs(lit: i64) -> Self {
        debug_assert!(lit != 0);
        Literal {
            var: lit.unsigned_abs() as Var,
            negated: lit < 0,
        }
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64;
        if self.negated {
            -v
        } else {
            v
        }
    }

    pub fn complement(self) -> Self {
        Literal {
            var: self.var,
            negated: !self.negated,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A clause as a counted multiset of literals. The `BTreeMap` keeps literals
/// sorted by (variable, polarity), so equal multisets compare equal and the
/// map itself is a canonical key.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Clause {
    counts: BTreeMap<Literal, u32>,
}

impl Clause {
    pub fn empty() -> Self {
        Clause::default()
    }

    pub fn from_literals<I: IntoIterator<Item = Literal>>(lits: I) -> Self {
        let mut c = Clause::default();
        for l in lits {
            c.insert(l, 1);
        }
        c
    }

    /// Count of a literal (0 if absent).
    pub fn count(&self, lit: Literal) -> u32 {
        self.counts.get(&lit).copied().unwrap_or(0)
    }

    pub fn insert(&mut self, lit: Literal, n: u32) {
        if n > 0 {
            *self.counts.entry(lit).or_insert(0) += n;
        }
    }

    /// Remove up to `n` occurrences, truncating at zero.
    pub fn remove(&mut self, lit: Literal, n: u32) {
        if let Some(c) = self.counts.get_mut(&lit) {
            if *c > n {
                *c -= n;
            } else {
                self.counts.remove(&lit);
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Total literal count, duplicates included.
    pub fn len(&self) -> u32 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Literal, u32)> + '_ {
        self.counts.iter().map(|(&l, &n)| (l, n))
    }

    pub fn distinct_literals(&self) -> impl Iterator<Item = Literal> + '_ {
        self.counts.keys().copied()
    }

    pub fn contains_var(&self, var: Var) -> bool {
        self.count(Literal::pos(var)) > 0 || self.count(Literal::neg(var)) > 0
    }

    /// True if both `x` and `¬x` occur for some variable.
    pub fn is_tautology(&self) -> bool {
        self.counts
            .keys()
            .any(|l| !l.negated && self.count(l.complement()) > 0)
    }

    /// Pointwise multiset sum.
    pub fn multiset_plus(&self, other: &Clause) -> Clause {
        let mut out = self.clone();
        for (l, n) in other.iter() {
            out.insert(l, n);
        }
        out
    }

    /// Pointwise truncated multiset difference.
    pub fn multiset_minus(&self, other: &Clause) -> Clause {
        let mut out = self.clone();
        for (l, n) in other.iter() {
            out.remove(l, n);
        }
        out
    }

    /// Drop duplicate literals (every count capped at 1).
    pub fn dedup(&self) -> Clause {
        Clause {
            counts: self.counts.keys().map(|&l| (l, 1)).collect(),
        }
    }
}

/// The resolvent `res_x(c1, c2) = (c1 ⊖ {x}) ⊕ (c2 ⊖ {¬x})`.
///
/// Requires `c1(x) = 1, c1(¬x) = 0` and `c2(¬x) = 1, c2(x) = 0`.
/// Duplicates in the union are kept.
pub fn resolvent(c1: &Clause, c2: &Clause, x: Var) -> Clause {
    let pos = Literal::pos(x);
    let neg = Literal::neg(x);
    assert_eq!(c1.count(pos), 1, "left clause must contain x exactly once");
    assert_eq!(c1.count(neg), 0, "left clause must not contain ¬x");
    assert_eq!(c2.count(neg), 1, "right clause must contain ¬x exactly once");
    assert_eq!(c2.count(pos), 0, "right clause must not contain x");
    let mut a = c1.clone();
    a.remove(pos, 1);
    let mut b = c2.clone();
    b.remove(neg, 1);
    a.multiset_plus(&b)
}

/// A CNF formula as a counted multiset of clauses.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Formula {
    clauses: BTreeMap<Clause, BigUint>,
    num_vars: Var,
}

impl Formula {
    pub fn new(num_vars: Var) -> Self {
        Formula {
            clauses: BTreeMap::new(),
            num_vars,
        }
    }

    pub fn num_vars(&self) -> Var {
        self.num_vars
    }

    pub fn set_num_vars(&mut self, n: Var) {
        self.num_vars = n;
    }

    pub fn add_clause(&mut self, clause: Clause, multiplicity: BigUint) {
        if multiplicity != BigUint::default() {
            *self.clauses.entry(clause).or_default() += multiplicity;
        }
    }

    pub fn add_clause_once(&mut self, clause: Clause) {
        self.add_clause(clause, BigUint::one());
    }

    pub fn multiplicity(&self, clause: &Clause) -> BigUint {
        self.clauses.get(clause).cloned().unwrap_or_default()
    }

    /// Number of distinct clause keys.
    pub fn num_distinct_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// Total clause count, multiplicities included.
    pub fn num_clauses(&self) -> BigUint {
        self.clauses.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Clause, &BigUint)> + '_ {
        self.clauses.iter()
    }

    pub fn contains_empty_clause(&self) -> bool {
        self.clauses.contains_key(&Clause::empty())
    }

    /// Multiplicity of the empty clause □.
    pub fn empty_clause_multiplicity(&self) -> BigUint {
        self.multiplicity(&Clause::empty())
    }

    /// Algorithm-shape normalization: duplicate literals within a clause
    /// removed, tautological clauses dropped, duplicate clauses collapsed to
    /// multiplicity 1. The result is a set of sets, equisatisfiable with the
    /// input.
    pub fn preprocess(&self) -> Formula {
        let mut out = Formula::new(self.num_vars);
        for (clause, _) in self.iter() {
            if clause.is_tautology() {
                continue;
            }
            let c = clause.dedup();
            out.clauses.insert(c, BigUint::one());
        }
        out
    }

    /// Canonical textual dump: one line per distinct clause,
    /// `<multiplicity> x <sorted literal list>`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (clause, mult) in self.iter() {
            s.push_str(&format!("{} x", mult));
            for (lit, n) in clause.iter() {
                for _ in 0..n {
                    s.push_str(&format!(" {}", lit));
                }
            }
            s.push('\n');
        }
        s
    }

    /// Truth-table satisfiability by exhaustive enumeration. Intended for
    /// tests and small inputs only.
    pub fn brute_force_satisfiable(&self) -> bool {
        let n = self.num_vars;
        assert!(n <= 24, "brute force limited to small formulas");
        'outer: for bits in 0u64..(1u64 << n) {
            for (clause, _) in self.iter() {
                let satisfied = clause.distinct_literals().any(|l| {
                    let val = (bits >> (l.var - 1)) & 1 == 1;
                    val != l.negated
                });
                if !satisfied {
                    continue 'outer;
                }
            }
            return true;
        }
        false
    }
}

/// A (partial) assignment of field elements to variables 1..=n. The modulus
/// is carried by the evaluation context, not the assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    values: Vec<Option<u64>>,
}

impl Assignment {
    pub fn undefined(num_vars: Var) -> Self {
        Assignment {
            values: vec![None; num_vars as usize],
        }
    }

    /// Total assignment from per-variable values, index 0 holding variable 1.
    pub fn total(values: Vec<u64>) -> Self {
        Assignment {
            values: values.into_iter().map(Some).collect(),
        }
    }

    pub fn num_vars(&self) -> Var {
        self.values.len() as Var
    }

    pub fn get(&self, var: Var) -> Option<u64> {
        self.values.get(var as usize - 1).copied().flatten()
    }

    pub fn set(&mut self, var: Var, value: u64) {
        self.values[var as usize - 1] = Some(value);
    }

    pub fn unset(&mut self, var: Var) {
        self.values[var as usize - 1] = None;
    }

    /// The same assignment with the pivot left undefined.
    pub fn without(&self, pivot: Var) -> Assignment {
        let mut a = self.clone();
        a.unset(pivot);
        a
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().flatten().all(|&v| v <= 1)
    }

    /// Values of a total assignment, in variable order.
    pub fn to_values(&self) -> Option<Vec<u64>> {
        self.values.iter().copied().collect()
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: malformed header: {msg}")]
    BadHeader { line: usize, msg: String },
    #[error("line {line}: literal {lit} out of range 1..={max}")]
    LiteralOutOfRange { line: usize, lit: i64, max: Var },
    #[error("clause not terminated by 0")]
    MissingTerminator,
    #[error("missing 'p cnf' header")]
    MissingHeader,
    #[error("line {line}: unexpected token {token:?}")]
    BadToken { line: usize, token: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Result of parsing: the formula as read (duplicates preserved as counts)
/// plus a warning when the header clause count disagrees with the body.
pub struct ParsedDimacs {
    pub formula: Formula,
    pub clause_count_warning: Option<String>,
}

/// Parse DIMACS CNF. Duplicate literals and duplicate clauses are kept as
/// counts. A clause-count mismatch against the header is a warning, not an
/// error; real-world files disagree on it.
pub fn parse_dimacs<R: BufRead>(reader: R) -> Result<ParsedDimacs, ParseError> {
    let mut num_vars: Option<Var> = None;
    let mut declared_clauses: usize = 0;
    let mut formula = Formula::new(0);
    let mut current = Clause::empty();
    let mut in_clause = false;
    let mut body_clauses = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('p') {
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(ParseError::BadHeader {
                    line: lineno,
                    msg: format!("expected 'p cnf <vars> <clauses>', got {trimmed:?}"),
                });
            }
            let vars: Var = parts[2].parse().map_err(|_| ParseError::BadHeader {
                line: lineno,
                msg: format!("bad variable count {:?}", parts[2]),
            })?;
            declared_clauses = parts[3].parse().map_err(|_| ParseError::BadHeader {
                line: lineno,
                msg: format!("bad clause count {:?}", parts[3]),
            })?;
            num_vars = Some(vars);
            formula.set_num_vars(vars);
            continue;
        }
        let max = num_vars.ok_or(ParseError::MissingHeader)?;
        for token in trimmed.split_whitespace() {
            let lit: i64 = token.parse().map_err(|_| ParseError::BadToken {
                line: lineno,
                token: token.to_string(),
            })?;
            if lit == 0 {
                formula.add_clause_once(std::mem::take(&mut current));
                in_clause = false;
                body_clauses += 1;
            } else {
                if lit.unsigned_abs() > max as u64 {
                    return Err(ParseError::LiteralOutOfRange {
                        line: lineno,
                        lit,
                        max,
                    });
                }
                current.insert(Literal::from_dimacs(lit), 1);
                in_clause = true;
            }
        }
    }
    if num_vars.is_none() {
        return Err(ParseError::MissingHeader);
    }
    if in_clause {
        return Err(ParseError::MissingTerminator);
    }
    let clause_count_warning = if body_clauses != declared_clauses {
        Some(format!(
            "header declares {declared_clauses} clauses but file contains {body_clauses}"
        ))
    } else {
        None
    };
    Ok(ParsedDimacs {
        formula,
        clause_count_warning,
    })
}
